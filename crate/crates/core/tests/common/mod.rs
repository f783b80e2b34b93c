use nalgebra::{DMatrix, DVector};

/// Minimizes `c·x` over `{A x <= b, 0 <= x <= 10}` by enumerating every basic
/// solution (all `n`-subsets of active constraints).
pub fn vertex_oracle(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<f64> {
    let n = c.len();
    let mut rows: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        rows.push((e.clone(), 0.0));
        e[j] = 1.0;
        rows.push((e, 10.0));
    }
    let mut best: Option<f64> = None;
    let mut pick = vec![0usize; n];
    fn rec(
        start: usize,
        depth: usize,
        pick: &mut Vec<usize>,
        rows: &[(Vec<f64>, f64)],
        c: &[f64],
        best: &mut Option<f64>,
    ) {
        let n = c.len();
        if depth == n {
            let m = DMatrix::from_fn(n, n, |i, j| rows[pick[i]].0[j]);
            let rhs = DVector::from_fn(n, |i, _| rows[pick[i]].1);
            let Some(x) = m.lu().solve(&rhs) else { return };
            let feasible = rows
                .iter()
                .all(|(r, bb)| r.iter().zip(x.iter()).map(|(p, q)| p * q).sum::<f64>() <= bb + 1e-9);
            if feasible {
                let val: f64 = c.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
                *best = Some(best.map_or(val, |b: f64| b.min(val)));
            }
            return;
        }
        for i in start..rows.len() {
            pick[depth] = i;
            rec(i + 1, depth + 1, pick, rows, c, best);
        }
    }
    rec(0, 0, &mut pick, &rows, c, &mut best);
    best
}
