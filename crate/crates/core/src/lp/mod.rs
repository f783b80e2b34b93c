//! Dense two-phase primal simplex and the Step-3 formulations.
//!
//! Problems are stated as
//!
//! ```text
//! minimize    c·x
//! subject to  A_eq x  = b_eq
//!             A_le x <= b_le
//!             lower <= x <= upper      (bounds may be infinite)
//! ```
//!
//! and rewritten internally into `min c'y, A'y = b', y >= 0` with slack and
//! artificial columns. Pricing is Dantzig's rule with lowest-index ties; after
//! a run of degenerate pivots the solver falls back to Bland's rule until the
//! objective moves again, which rules out cycling. The final basis is
//! refactorized from the original columns to wash out tableau drift.

mod step3;

pub use step3::{build_step3_exact, build_step3_public, Step3Problem};

use crate::error::{invalid, mismatch, Error, Result};

/// Upper bound on the constraint nonzeros accepted by [`lp_solve`].
pub const MAX_NONZEROS: usize = 50_000;

/// Upper bound on the dense tableau size (rows × columns).
pub const MAX_TABLEAU_CELLS: usize = 40_000_000;

pub type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub eq_rows: Vec<SparseRow>,
    pub eq_rhs: Vec<f64>,
    pub le_rows: Vec<SparseRow>,
    pub le_rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    /// `num_vars` variables with bounds `[0, ∞)` and zero objective.
    pub fn new(num_vars: usize) -> Self {
        LpProblem {
            objective: vec![0.0; num_vars],
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            le_rows: Vec::new(),
            le_rhs: Vec::new(),
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_eq(&mut self, row: SparseRow, rhs: f64) {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    pub fn add_le(&mut self, row: SparseRow, rhs: f64) {
        self.le_rows.push(row);
        self.le_rhs.push(rhs);
    }

    pub fn add_ge(&mut self, row: SparseRow, rhs: f64) {
        self.add_le(row.into_iter().map(|(j, a)| (j, -a)).collect(), -rhs);
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn nonzeros(&self) -> usize {
        self.eq_rows.iter().chain(&self.le_rows).map(|r| r.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(mismatch("bound vectors do not match the variable count"));
        }
        if self.eq_rows.len() != self.eq_rhs.len() || self.le_rows.len() != self.le_rhs.len() {
            return Err(mismatch("row and right-hand-side counts differ"));
        }
        for row in self.eq_rows.iter().chain(&self.le_rows) {
            for &(j, a) in row {
                if j >= n {
                    return Err(mismatch(format!("row references variable {j} of {n}")));
                }
                if !a.is_finite() {
                    return Err(invalid("constraint coefficients must be finite"));
                }
            }
        }
        if self.objective.iter().chain(&self.eq_rhs).chain(&self.le_rhs).any(|v| !v.is_finite()) {
            return Err(invalid("objective and right-hand sides must be finite"));
        }
        if self.lower.contains(&f64::INFINITY) || self.upper.contains(&f64::NEG_INFINITY) {
            return Err(invalid("bounds must not exclude every value"));
        }
        let nnz = self.nonzeros();
        if nnz > MAX_NONZEROS {
            return Err(Error::Capacity {
                what: "linear program nonzeros",
                requested: nnz as u128,
                limit: MAX_NONZEROS as u128,
            });
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let dot = |row: &SparseRow| row.iter().map(|&(j, a)| a * x[j]).sum::<f64>();
        let mut worst: f64 = 0.0;
        for (row, &b) in self.eq_rows.iter().zip(&self.eq_rhs) {
            worst = worst.max((dot(row) - b).abs());
        }
        for (row, &b) in self.le_rows.iter().zip(&self.le_rhs) {
            worst = worst.max(dot(row) - b);
        }
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        worst
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; meaningful only when `status` is `Optimal`.
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexSolver {
    /// Smallest column entry accepted as a pivot.
    pub pivot_tol: f64,
    /// Reduced-cost and phase-one feasibility tolerance.
    pub feas_tol: f64,
    /// Pivot budget; `None` scales with the problem size.
    pub max_pivots: Option<usize>,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_streak: usize,
}

impl Default for SimplexSolver {
    fn default() -> Self {
        SimplexSolver {
            pivot_tol: 1e-9,
            feas_tol: 1e-9,
            max_pivots: None,
            degenerate_streak: 40,
        }
    }
}

/// Solves with the default solver settings.
pub fn lp_solve(problem: &LpProblem) -> Result<LpSolution> {
    SimplexSolver::default().solve(problem)
}

/// How an original variable is expressed through nonnegative columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = offset + y
    Shift { col: usize, offset: f64 },
    /// x = offset - y
    Mirror { col: usize, offset: f64 },
    /// x = y⁺ - y⁻
    Split { pos: usize, neg: usize },
}

struct StandardForm {
    /// Sparse columns of the structural and slack part, by row.
    rows: Vec<SparseRow>,
    rhs: Vec<f64>,
    /// Slack column per row, with its sign; `None` for equality rows.
    slack: Vec<Option<(usize, f64)>>,
    cost: Vec<f64>,
    num_cols: usize,
    maps: Vec<VarMap>,
}

fn to_standard_form(p: &LpProblem) -> Option<StandardForm> {
    let n = p.num_vars();
    let mut maps = Vec::with_capacity(n);
    let mut cost = Vec::new();
    let mut next = 0usize;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (lo, hi) = (p.lower[j], p.upper[j]);
        if lo > hi {
            return None;
        }
        let c = p.objective[j];
        if lo.is_finite() {
            maps.push(VarMap::Shift { col: next, offset: lo });
            cost.push(c);
            if hi.is_finite() {
                bound_rows.push((next, hi - lo));
            }
            next += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Mirror { col: next, offset: hi });
            cost.push(-c);
            next += 1;
        } else {
            maps.push(VarMap::Split { pos: next, neg: next + 1 });
            cost.push(c);
            cost.push(-c);
            next += 2;
        }
    }
    let structural = next;

    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut is_le = Vec::new();
    let translate = |row: &SparseRow, b: f64| -> (SparseRow, f64) {
        let mut out = Vec::with_capacity(row.len());
        let mut b = b;
        for &(j, a) in row {
            match maps[j] {
                VarMap::Shift { col, offset } => {
                    out.push((col, a));
                    b -= a * offset;
                }
                VarMap::Mirror { col, offset } => {
                    out.push((col, -a));
                    b -= a * offset;
                }
                VarMap::Split { pos, neg } => {
                    out.push((pos, a));
                    out.push((neg, -a));
                }
            }
        }
        (merge_duplicates(out), b)
    };
    for (row, &b) in p.eq_rows.iter().zip(&p.eq_rhs) {
        let (r, b) = translate(row, b);
        rows.push(r);
        rhs.push(b);
        is_le.push(false);
    }
    for (row, &b) in p.le_rows.iter().zip(&p.le_rhs) {
        let (r, b) = translate(row, b);
        rows.push(r);
        rhs.push(b);
        is_le.push(true);
    }
    for (col, width) in bound_rows {
        rows.push(vec![(col, 1.0)]);
        rhs.push(width);
        is_le.push(true);
    }

    let mut slack = Vec::with_capacity(rows.len());
    let mut num_cols = structural;
    for (i, le) in is_le.iter().enumerate() {
        if *le {
            slack.push(Some((num_cols, 1.0)));
            rows[i].push((num_cols, 1.0));
            num_cols += 1;
        } else {
            slack.push(None);
        }
    }
    cost.resize(num_cols, 0.0);
    // nonnegative right-hand sides
    for i in 0..rows.len() {
        if rhs[i] < 0.0 {
            rhs[i] = -rhs[i];
            for e in rows[i].iter_mut() {
                e.1 = -e.1;
            }
            if let Some((c, s)) = slack[i] {
                slack[i] = Some((c, -s));
            }
        }
    }
    Some(StandardForm {
        rows,
        rhs,
        slack,
        cost,
        num_cols,
        maps,
    })
}

fn merge_duplicates(mut row: SparseRow) -> SparseRow {
    row.sort_by_key(|e| e.0);
    let mut out: SparseRow = Vec::with_capacity(row.len());
    for (j, a) in row {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += a,
            _ => out.push((j, a)),
        }
    }
    out.retain(|e| e.1 != 0.0);
    out
}

struct Tableau {
    m: usize,
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.data[i * self.width + self.width - 1]
    }

    fn pivot(&mut self, p: usize, q: usize, obj: &mut [f64]) {
        let w = self.width;
        let inv = 1.0 / self.at(p, q);
        {
            let row = &mut self.data[p * w..(p + 1) * w];
            for v in row.iter_mut() {
                *v *= inv;
            }
            row[q] = 1.0;
        }
        let nz: Vec<usize> = self
            .row(p)
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, _)| j)
            .collect();
        let prow: Vec<f64> = nz.iter().map(|&j| self.at(p, j)).collect();
        for i in 0..self.m {
            if i == p {
                continue;
            }
            let f = self.data[i * w + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.data[i * w..(i + 1) * w];
            for (&j, &pv) in nz.iter().zip(&prow) {
                let v = row[j] - f * pv;
                row[j] = if v.abs() < 1e-14 { 0.0 } else { v };
            }
            row[q] = 0.0;
        }
        let f = obj[q];
        if f != 0.0 {
            for (&j, &pv) in nz.iter().zip(&prow) {
                obj[j] -= f * pv;
            }
            obj[q] = 0.0;
        }
        self.basis[p] = q;
        self.pivots += 1;
    }
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl SimplexSolver {
    pub fn solve(&self, problem: &LpProblem) -> Result<LpSolution> {
        problem.validate()?;
        let n = problem.num_vars();
        let infeasible = || LpSolution {
            status: LpStatus::Infeasible,
            x: vec![0.0; n],
            objective: f64::NAN,
            pivots: 0,
        };
        let Some(sf) = to_standard_form(problem) else {
            return Ok(infeasible());
        };
        let m = sf.rows.len();

        // artificial columns for rows without a +1 slack
        let mut art_of_row = vec![None; m];
        let mut num_cols = sf.num_cols;
        for i in 0..m {
            match sf.slack[i] {
                Some((_, s)) if s > 0.0 => {}
                _ => {
                    art_of_row[i] = Some(num_cols);
                    num_cols += 1;
                }
            }
        }
        let first_art = sf.num_cols;
        let width = num_cols + 1;
        let cells = (m as u128) * (width as u128);
        if cells > MAX_TABLEAU_CELLS as u128 {
            return Err(Error::Capacity {
                what: "simplex tableau cells",
                requested: cells,
                limit: MAX_TABLEAU_CELLS as u128,
            });
        }
        let mut t = Tableau {
            m,
            width,
            data: vec![0.0; m * width],
            basis: vec![0; m],
            pivots: 0,
        };
        for i in 0..m {
            let base = i * width;
            for &(j, a) in &sf.rows[i] {
                t.data[base + j] = a;
            }
            t.data[base + width - 1] = sf.rhs[i];
            match art_of_row[i] {
                Some(a) => {
                    t.data[base + a] = 1.0;
                    t.basis[i] = a;
                }
                None => t.basis[i] = sf.slack[i].unwrap().0,
            }
        }
        let budget = self.max_pivots.unwrap_or(50 * (m + num_cols) + 1000);

        // phase one: minimize the sum of artificials
        let mut obj = vec![0.0; width];
        for i in 0..m {
            if art_of_row[i].is_some() {
                for (o, v) in obj.iter_mut().zip(t.row(i)) {
                    *o -= v;
                }
            }
        }
        for a in first_art..num_cols {
            obj[a] = 0.0;
        }
        if art_of_row.iter().any(|a| a.is_some()) {
            self.run_phase(&mut t, &mut obj, num_cols, budget)?;
            let scale = sf.rhs.iter().fold(1.0f64, |acc, b| acc.max(b.abs()));
            if -obj[width - 1] > self.feas_tol * scale {
                return Ok(LpSolution {
                    pivots: t.pivots,
                    ..infeasible()
                });
            }
            // drive remaining artificials out of the basis
            for i in 0..m {
                if t.basis[i] < first_art {
                    continue;
                }
                let mut best: Option<(usize, f64)> = None;
                for j in 0..first_art {
                    let a = t.at(i, j).abs();
                    if a > self.pivot_tol && best.map_or(true, |(_, b)| a > b) {
                        best = Some((j, a));
                    }
                }
                if let Some((j, _)) = best {
                    t.pivot(i, j, &mut obj);
                }
                // otherwise the row is redundant; its artificial stays basic at zero
            }
        }

        // phase two
        let mut obj = vec![0.0; width];
        obj[..sf.num_cols].copy_from_slice(&sf.cost);
        for i in 0..m {
            let cb = if t.basis[i] < sf.num_cols { sf.cost[t.basis[i]] } else { 0.0 };
            if cb != 0.0 {
                let row = t.row(i);
                for (o, v) in obj.iter_mut().zip(row) {
                    *o -= cb * v;
                }
            }
        }
        for i in 0..m {
            obj[t.basis[i]] = 0.0;
        }
        let end = self.run_phase(&mut t, &mut obj, first_art, budget)?;
        if let PhaseEnd::Unbounded = end {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                x: vec![0.0; n],
                objective: f64::NEG_INFINITY,
                pivots: t.pivots,
            });
        }

        let mut y = vec![0.0; num_cols];
        for i in 0..m {
            y[t.basis[i]] = t.rhs(i).max(0.0);
        }
        if let Some(refined) = refactor_basic_solution(&sf, &t.basis, first_art, num_cols) {
            y = refined;
        }
        let x: Vec<f64> = sf
            .maps
            .iter()
            .map(|map| match *map {
                VarMap::Shift { col, offset } => offset + y[col],
                VarMap::Mirror { col, offset } => offset - y[col],
                VarMap::Split { pos, neg } => y[pos] - y[neg],
            })
            .collect();
        let violation = problem.max_violation(&x);
        let scale = 1.0
            + problem
                .eq_rhs
                .iter()
                .chain(&problem.le_rhs)
                .fold(0.0f64, |acc, b| acc.max(b.abs()));
        if violation > 1e-7 * scale {
            return Err(Error::Solver(format!(
                "optimal basis violates constraints by {violation:.3e} after {} pivots",
                t.pivots
            )));
        }
        Ok(LpSolution {
            status: LpStatus::Optimal,
            objective: problem.objective_at(&x),
            x,
            pivots: t.pivots,
        })
    }

    /// Runs simplex iterations over columns `0..allowed`.
    fn run_phase(
        &self,
        t: &mut Tableau,
        obj: &mut [f64],
        allowed: usize,
        budget: usize,
    ) -> Result<PhaseEnd> {
        let mut streak = 0usize;
        loop {
            if t.pivots >= budget {
                return Err(Error::Solver(format!(
                    "pivot budget of {budget} exhausted ({} rows, {} columns)",
                    t.m,
                    t.width - 1
                )));
            }
            let bland = streak >= self.degenerate_streak;
            let mut enter: Option<usize> = None;
            let mut best = -self.feas_tol;
            for (j, &d) in obj[..allowed].iter().enumerate() {
                if d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(q) = enter else {
                return Ok(PhaseEnd::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..t.m {
                let a = t.at(i, q);
                if a <= self.pivot_tol {
                    continue;
                }
                let ratio = t.rhs(i).max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        if ratio < best - 1e-12 {
                            Some((i, ratio))
                        } else if ratio <= best + 1e-12 && t.basis[i] < t.basis[r] {
                            Some((i, best.min(ratio)))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
            let Some((p, ratio)) = leave else {
                return Ok(PhaseEnd::Unbounded);
            };
            if ratio <= 1e-12 {
                streak += 1;
            } else {
                streak = 0;
            }
            t.pivot(p, q, obj);
        }
    }
}

/// Recomputes the basic solution by Gaussian elimination on the original
/// columns. Returns `None` if the basis matrix is numerically singular or the
/// result leaves the nonnegative orthant noticeably.
fn refactor_basic_solution(
    sf: &StandardForm,
    basis: &[usize],
    first_art: usize,
    num_cols: usize,
) -> Option<Vec<f64>> {
    let m = basis.len();
    if m == 0 {
        return Some(vec![0.0; num_cols]);
    }
    let slot: std::collections::HashMap<usize, usize> =
        basis.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut a = vec![0.0; m * m];
    for (i, row) in sf.rows.iter().enumerate() {
        for &(j, v) in row {
            if let Some(&s) = slot.get(&j) {
                a[i * m + s] = v;
            }
        }
    }
    // artificial columns are unit vectors on their own rows
    let mut art_row = 0usize;
    let mut art_col = first_art;
    for (i, s) in sf.slack.iter().enumerate() {
        let needs_art = !matches!(s, Some((_, v)) if *v > 0.0);
        if needs_art {
            if let Some(&sl) = slot.get(&art_col) {
                a[i * m + sl] = 1.0;
            }
            art_col += 1;
        }
        art_row += 1;
    }
    debug_assert_eq!(art_row, m);
    let mut b = sf.rhs.clone();
    // partial-pivoting elimination
    for col in 0..m {
        let (piv, mag) = (col..m)
            .map(|r| (r, a[r * m + col].abs()))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if mag < 1e-12 {
            return None;
        }
        if piv != col {
            for c in 0..m {
                a.swap(piv * m + c, col * m + c);
            }
            b.swap(piv, col);
        }
        let d = a[col * m + col];
        for r in col + 1..m {
            let f = a[r * m + col] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..m {
                a[r * m + c] -= f * a[col * m + c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut z = vec![0.0; m];
    for r in (0..m).rev() {
        let mut acc = b[r];
        for c in r + 1..m {
            acc -= a[r * m + c] * z[c];
        }
        z[r] = acc / a[r * m + r];
    }
    if z.iter().any(|v| !v.is_finite() || *v < -1e-9) {
        return None;
    }
    let mut y = vec![0.0; num_cols];
    for (i, &c) in basis.iter().enumerate() {
        y[c] = z[i].max(0.0);
    }
    Some(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_lower_bound() {
        let mut p = LpProblem::new(1);
        p.objective[0] = 1.0;
        p.add_ge(vec![(0, 1.0)], 3.0);
        let s = lp_solve(&p).unwrap();
        assert!(s.is_optimal());
        assert!((s.x[0] - 3.0).abs() < 1e-12);
        assert!((s.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn textbook_case() {
        let mut p = LpProblem::new(2);
        p.objective = vec![-1.0, -1.0];
        p.add_le(vec![(0, 1.0), (1, 1.0)], 1.0);
        let s = lp_solve(&p).unwrap();
        assert!((s.objective + 1.0).abs() < 1e-12);
    }

    #[test]
    fn status_detection() {
        let mut p = LpProblem::new(1);
        p.objective[0] = -1.0;
        assert_eq!(lp_solve(&p).unwrap().status, LpStatus::Unbounded);

        let mut p = LpProblem::new(1);
        p.add_le(vec![(0, 1.0)], -1.0);
        assert_eq!(lp_solve(&p).unwrap().status, LpStatus::Infeasible);

        let mut p = LpProblem::new(2);
        p.add_eq(vec![(0, 1.0), (1, 1.0)], 1.0);
        p.add_eq(vec![(0, 1.0), (1, 1.0)], 2.0);
        assert_eq!(lp_solve(&p).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn free_and_mirrored_variables() {
        // min x - y with x free, y <= 2, x >= -5 via a row, x + y >= -10
        let mut p = LpProblem::new(2);
        p.objective = vec![1.0, -1.0];
        p.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
        p.set_bounds(1, f64::NEG_INFINITY, 2.0);
        p.add_ge(vec![(0, 1.0)], -5.0);
        p.add_ge(vec![(0, 1.0), (1, 1.0)], -10.0);
        let s = lp_solve(&p).unwrap();
        assert!((s.x[0] + 5.0).abs() < 1e-12);
        assert!((s.x[1] - 2.0).abs() < 1e-12);
        assert!((s.objective + 7.0).abs() < 1e-12);

        let mut p = LpProblem::new(1);
        p.set_bounds(0, 2.0, 1.0);
        assert_eq!(lp_solve(&p).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn redundant_equalities() {
        let mut p = LpProblem::new(3);
        p.objective = vec![1.0, 2.0, 3.0];
        p.add_eq(vec![(0, 1.0), (1, 1.0), (2, 1.0)], 1.0);
        p.add_eq(vec![(0, 2.0), (1, 2.0), (2, 2.0)], 2.0);
        p.add_ge(vec![(2, 1.0)], 0.25);
        let s = lp_solve(&p).unwrap();
        assert!((s.objective - 1.5).abs() < 1e-12);
        assert!(p.max_violation(&s.x) < 1e-12);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Beale's classic cycling example for the textbook rule
        let mut p = LpProblem::new(4);
        p.objective = vec![-0.75, 150.0, -0.02, 6.0];
        p.add_le(vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)], 0.0);
        p.add_le(vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)], 0.0);
        p.add_le(vec![(2, 1.0)], 1.0);
        let s = SimplexSolver {
            degenerate_streak: 0,
            ..SimplexSolver::default()
        }
        .solve(&p)
        .unwrap();
        assert!((s.objective + 0.05).abs() < 1e-12);
        let s = lp_solve(&p).unwrap();
        assert!((s.objective + 0.05).abs() < 1e-12);
    }

    #[test]
    fn guards() {
        let mut p = LpProblem::new(2);
        p.add_le(vec![(5, 1.0)], 1.0);
        assert!(lp_solve(&p).is_err());
        let mut p = LpProblem::new(1);
        p.add_le(vec![(0, f64::NAN)], 1.0);
        assert!(lp_solve(&p).is_err());
        let mut p = LpProblem::new(MAX_NONZEROS + 1);
        p.add_le((0..MAX_NONZEROS + 1).map(|j| (j, 1.0)).collect(), 1.0);
        assert!(matches!(lp_solve(&p), Err(Error::Capacity { .. })));
    }

    #[test]
    fn deterministic() {
        let mut p = LpProblem::new(3);
        p.objective = vec![-1.0, -1.0, -1.0];
        p.add_le(vec![(0, 1.0), (1, 1.0)], 1.0);
        p.add_le(vec![(1, 1.0), (2, 1.0)], 1.0);
        p.add_le(vec![(0, 1.0), (2, 1.0)], 1.0);
        let a = lp_solve(&p).unwrap();
        let b = lp_solve(&p).unwrap();
        assert_eq!(a, b);
        assert!((a.objective + 1.5).abs() < 1e-12);
    }
}
