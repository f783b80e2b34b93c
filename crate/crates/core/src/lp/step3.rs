//! Step 3: the grid probability measure (or public-point mixture) whose
//! marginals are closest to a noisy query vector under `L_T`.
//!
//! With `d_{S,l} = F_{S,l} − P_l(ν^S)` the gap between the candidate's and the
//! target's partial sums, the problem
//!
//! ```text
//! minimize t
//!   s.t.  Σ_a α_a = 1
//!         (Tα)_{S,l} − (d_{S,l} − d_{S,l−1}) = ν_{S,l}        d_{S,0} = 0
//!         (1/k) Σ_l (p⁺_{S,l} + p⁻_{S,l}) ≤ t                 d = p⁺ − p⁻
//! ```
//!
//! is the epigraph of `L_T(ν, Tα)` with one row per stacked entry, which keeps
//! the dense tableau near `K·k^s` rows.

use super::{lp_solve, LpProblem, LpSolution, LpStatus};
use crate::error::{invalid, mismatch, Error, Result};
use crate::grid::{checked_cells, discretize_point, linear_index, GridHistogram, GridSpec};
use crate::query::{MarginalBlockVector, QueryOperator};

/// Weights below this are released as exact zeros.
pub const WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Step3Problem {
    problem: LpProblem,
    spec: GridSpec,
    /// Linear cell index of each candidate atom, in variable order.
    atoms: Vec<usize>,
}

impl Step3Problem {
    pub fn lp(&self) -> &LpProblem {
        &self.problem
    }

    pub fn atoms(&self) -> &[usize] {
        &self.atoms
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Index of the epigraph variable `t`.
    pub fn objective_var(&self) -> usize {
        self.problem.num_vars() - 1
    }

    pub fn solve(&self) -> Result<LpSolution> {
        let sol = lp_solve(&self.problem)?;
        match sol.status {
            LpStatus::Optimal => Ok(sol),
            other => Err(Error::Solver(format!("step-3 program reported {other:?}"))),
        }
    }

    /// Atom weights of a solution as a probability measure: tiny weights are
    /// clamped to zero and the rest renormalized.
    pub fn measure_from(&self, sol: &LpSolution) -> Result<GridHistogram> {
        self.measure_from_weights(&sol.x[..self.atoms.len()])
    }

    pub fn measure_from_weights(&self, alpha: &[f64]) -> Result<GridHistogram> {
        if alpha.len() != self.atoms.len() {
            return Err(mismatch("one weight per atom expected"));
        }
        let clamped: Vec<f64> = alpha
            .iter()
            .map(|&a| if a < WEIGHT_FLOOR { 0.0 } else { a })
            .collect();
        let total: f64 = clamped.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Solver("step-3 solution carries no mass".into()));
        }
        let mut h = GridHistogram::new(self.spec.k, self.spec.d)?;
        for (&cell, &a) in self.atoms.iter().zip(&clamped) {
            if a > 0.0 {
                h.add_linear(cell, a / total);
            }
        }
        Ok(h)
    }
}

fn check_target(nu: &MarginalBlockVector, spec: &GridSpec) -> Result<()> {
    if nu.spec() != spec {
        return Err(mismatch(format!(
            "query vector built for {:?}, problem asks for {spec:?}",
            nu.spec()
        )));
    }
    Ok(())
}

/// Candidates are all `k^d` grid cells.
pub fn build_step3_exact(nu: &MarginalBlockVector, spec: &GridSpec) -> Result<Step3Problem> {
    check_target(nu, spec)?;
    let cells = checked_cells(spec.k, spec.d)?;
    build(nu, spec, (0..cells).collect())
}

/// Candidates are the discretized public points, one weight per point.
pub fn build_step3_public(
    nu: &MarginalBlockVector,
    public_points: &[Vec<f64>],
    spec: &GridSpec,
) -> Result<Step3Problem> {
    check_target(nu, spec)?;
    if public_points.is_empty() {
        return Err(invalid("public data set is empty"));
    }
    let mut atoms = Vec::with_capacity(public_points.len());
    for p in public_points {
        if p.len() != spec.d {
            return Err(mismatch(format!(
                "public point has dimension {}, spec expects {}",
                p.len(),
                spec.d
            )));
        }
        atoms.push(linear_index(&discretize_point(p, spec.k)?, spec.k));
    }
    build(nu, spec, atoms)
}

fn build(nu: &MarginalBlockVector, spec: &GridSpec, atoms: Vec<usize>) -> Result<Step3Problem> {
    let op = QueryOperator::new(*spec)?;
    let blocks = spec.num_blocks();
    let block_len = nu.block_len();
    let m = blocks * block_len;
    let na = atoms.len();
    // variables: α (na), p⁺ (m), p⁻ (m), t
    let pplus = na;
    let pminus = na + m;
    let t = na + 2 * m;
    let mut p = LpProblem::new(t + 1);
    p.objective[t] = 1.0;

    p.add_eq((0..na).map(|a| (a, 1.0)).collect(), 1.0);

    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    for (a, &cell) in atoms.iter().enumerate() {
        for pos in op.positions_of_linear(cell) {
            rows[pos].push((a, 1.0));
        }
    }
    let target = nu.as_slice();
    for (g, mut row) in rows.into_iter().enumerate() {
        let l = g % block_len;
        row.push((pplus + g, -1.0));
        row.push((pminus + g, 1.0));
        if l > 0 {
            row.push((pplus + g - 1, 1.0));
            row.push((pminus + g - 1, -1.0));
        }
        p.add_eq(row, target[g]);
    }

    let w = 1.0 / spec.k as f64;
    for j in 0..blocks {
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * block_len + 1);
        for l in 0..block_len {
            row.push((pplus + j * block_len + l, w));
            row.push((pminus + j * block_len + l, w));
        }
        row.push((t, -1.0));
        p.add_le(row, 0.0);
    }
    Ok(Step3Problem {
        problem: p,
        spec: *spec,
        atoms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridHistogram;
    use crate::loss::proxy_lt;
    use crate::query::apply_t;

    fn objective_at(nu: &MarginalBlockVector, spec: &GridSpec, h: &GridHistogram) -> f64 {
        proxy_lt(nu, &apply_t(h, spec).unwrap()).unwrap()
    }

    #[test]
    fn noiseless_point_mass_is_recovered() {
        let spec = GridSpec::new(2, 1, 3).unwrap();
        let h = GridHistogram::point_mass(3, &[2, 1]).unwrap();
        let nu = apply_t(&h, &spec).unwrap();
        let prob = build_step3_exact(&nu, &spec).unwrap();
        let sol = prob.solve().unwrap();
        assert!(sol.objective.abs() < 1e-12);
        let mu = prob.measure_from(&sol).unwrap();
        assert!(mu.is_probability());
        assert_eq!(apply_t(&mu, &spec).unwrap(), nu);
    }

    #[test]
    fn grid_search_oracle() {
        // d=2, s=1, k=2: four atoms, hand-set noisy target
        let spec = GridSpec::new(2, 1, 2).unwrap();
        let nu = MarginalBlockVector::from_vec(spec, vec![0.9, -0.2, 0.35, 0.5]).unwrap();
        let prob = build_step3_exact(&nu, &spec).unwrap();
        let sol = prob.solve().unwrap();
        // direct evaluation: cell (i0, i1) has linear index i0 + 2·i1
        let target = nu.as_slice().to_vec();
        let lt = |w: [f64; 4]| {
            let blocks = [[w[0] + w[2], w[1] + w[3]], [w[0] + w[1], w[2] + w[3]]];
            let mut worst: f64 = 0.0;
            for (j, b) in blocks.iter().enumerate() {
                let d0 = b[0] - target[2 * j];
                let d1 = d0 + b[1] - target[2 * j + 1];
                worst = worst.max(0.5 * (d0.abs() + d1.abs()));
            }
            worst
        };
        let steps = 1000usize;
        let mut best = f64::INFINITY;
        for a in 0..=steps {
            for b in 0..=steps - a {
                for c in 0..=steps - a - b {
                    let w = [a, b, c, steps - a - b - c].map(|x| x as f64 / steps as f64);
                    best = best.min(lt(w));
                }
            }
        }
        assert!(sol.objective <= best + 1e-12);
        assert!(best - sol.objective < 2e-3);
        let mu = prob.measure_from(&sol).unwrap();
        assert!((objective_at(&nu, &spec, &mu) - sol.objective).abs() < 1e-9);
    }

    #[test]
    fn public_singleton_and_uniform_bound() {
        let spec = GridSpec::new(2, 2, 4).unwrap();
        let nu = MarginalBlockVector::from_vec(spec, (0..16).map(|i| (i % 5) as f64 / 30.0).collect())
            .unwrap();
        let z = vec![vec![0.1, 0.7]];
        let prob = build_step3_public(&nu, &z, &spec).unwrap();
        let sol = prob.solve().unwrap();
        let single = GridHistogram::point_mass(4, &[0, 2]).unwrap();
        assert!((sol.objective - objective_at(&nu, &spec, &single)).abs() < 1e-9);

        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 6.0, 1.0 - i as f64 / 7.0]).collect();
        let prob = build_step3_public(&nu, &pts, &spec).unwrap();
        let sol = prob.solve().unwrap();
        let uniform = prob.measure_from_weights(&[1.0 / 6.0; 6]).unwrap();
        assert!(sol.objective <= objective_at(&nu, &spec, &uniform) + 1e-12);
        assert!(build_step3_public(&nu, &[], &spec).is_err());
    }
}
