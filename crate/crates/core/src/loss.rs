//! Proxy utility losses on query vectors, exact Wasserstein-1 distances, and
//! the evaluation bracket for the utility loss between two measures.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Error, Result};
use crate::flow::{king_edges, king_graph};
use crate::grid::{
    center, checked_cells_with_limit, discretize_point, linear_index, multi_index, subsets, Dataset,
    GridHistogram, SnakeOrder,
};
use crate::lp::{lp_solve, LpProblem, LpStatus};
use crate::query::MarginalBlockVector;

/// Largest block accepted by the `U_T` programs.
pub const MAX_UT_BLOCK: usize = 4096;

/// Largest support accepted by [`w1_exact`] on either side.
pub const MAX_COUPLING_SUPPORT: usize = 1024;

/// Coupling programs with at most this many variables are solved directly;
/// larger marginals go through the grid flow.
pub const COUPLING_VARIABLES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProxyLossKind {
    #[serde(rename = "LT")]
    Lt,
    #[serde(rename = "UT")]
    Ut,
}

impl ProxyLossKind {
    pub fn name(self) -> &'static str {
        match self {
            ProxyLossKind::Lt => "LT",
            ProxyLossKind::Ut => "UT",
        }
    }
}

impl std::str::FromStr for ProxyLossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LT" => Ok(ProxyLossKind::Lt),
            "UT" => Ok(ProxyLossKind::Ut),
            _ => Err(invalid(format!("unknown proxy loss {s:?}; expected LT or UT"))),
        }
    }
}

/// `(1/k)·Σ_l |Σ_{i≤l} w_i|` for one snake-ordered block.
fn partial_sum_norm(w: impl Iterator<Item = f64>, k: usize) -> f64 {
    let mut acc = 0.0;
    let mut total = 0.0;
    for x in w {
        acc += x;
        total += acc.abs();
    }
    total / k as f64
}

/// `L_T(v, u)`: the largest partial-sum norm of `v − u` over blocks.
pub fn proxy_lt(v: &MarginalBlockVector, u: &MarginalBlockVector) -> Result<f64> {
    v.check_same(u)?;
    let k = v.spec().k;
    Ok(v.blocks()
        .zip(u.blocks())
        .map(|(a, b)| partial_sum_norm(a.iter().zip(b).map(|(x, y)| x - y), k))
        .fold(0.0, f64::max))
}

/// Value of the block program
/// `max Σ f_p w_p` subject to `|f| ≤ 1` and `|f_a − f_b| ≤ 1/k` on king-move
/// neighbors, solved through its min-cost-flow dual.
pub fn ut_block(w: &[f64], order: &SnakeOrder) -> Result<f64> {
    check_ut_block(w, order)?;
    let cells = order.len();
    let g = king_graph(order.k(), order.dims(), true)?;
    let mut supply = vec![0.0; cells + 1];
    for (p, &x) in w.iter().enumerate() {
        supply[order.cell_at(p)] = x;
    }
    supply[cells] = -w.iter().sum::<f64>();
    g.min_cost(&supply)
}

/// The same block program solved directly by the simplex method.
pub fn ut_block_lp(w: &[f64], order: &SnakeOrder) -> Result<f64> {
    check_ut_block(w, order)?;
    let k = order.k();
    let mut p = LpProblem::new(w.len());
    for (pos, &x) in w.iter().enumerate() {
        p.objective[pos] = -x;
        p.set_bounds(pos, -1.0, 1.0);
    }
    let step = 1.0 / k as f64;
    for (a, b) in king_edges(k, order.dims())? {
        let (pa, pb) = (order.position_of(a), order.position_of(b));
        p.add_le(vec![(pa, 1.0), (pb, -1.0)], step);
        p.add_le(vec![(pb, 1.0), (pa, -1.0)], step);
    }
    let sol = lp_solve(&p)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("U_T block program reported {:?}", sol.status)));
    }
    Ok((-sol.objective).max(0.0))
}

fn check_ut_block(w: &[f64], order: &SnakeOrder) -> Result<()> {
    if w.len() != order.len() {
        return Err(mismatch("block length does not match the snake order"));
    }
    if w.len() > MAX_UT_BLOCK {
        return Err(Error::Capacity {
            what: "U_T block variables",
            requested: w.len() as u128,
            limit: MAX_UT_BLOCK as u128,
        });
    }
    Ok(())
}

/// `U_T(v, u)`: the largest flat-metric block program value over blocks.
pub fn proxy_ut(v: &MarginalBlockVector, u: &MarginalBlockVector) -> Result<f64> {
    v.check_same(u)?;
    let order = SnakeOrder::new(v.spec().k, v.spec().s)?;
    let mut worst: f64 = 0.0;
    for (a, b) in v.blocks().zip(u.blocks()) {
        let w: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        worst = worst.max(ut_block(&w, &order)?);
    }
    Ok(worst)
}

pub fn proxy_loss(v: &MarginalBlockVector, u: &MarginalBlockVector, kind: ProxyLossKind) -> Result<f64> {
    match kind {
        ProxyLossKind::Lt => proxy_lt(v, u),
        ProxyLossKind::Ut => proxy_ut(v, u),
    }
}

/// `P(0, η)`.
pub fn proxy_loss_of_noise(eta: &MarginalBlockVector, kind: ProxyLossKind) -> Result<f64> {
    match kind {
        ProxyLossKind::Lt => {
            let k = eta.spec().k;
            Ok(eta
                .blocks()
                .map(|b| partial_sum_norm(b.iter().map(|x| -x), k))
                .fold(0.0, f64::max))
        }
        ProxyLossKind::Ut => {
            let order = SnakeOrder::new(eta.spec().k, eta.spec().s)?;
            let mut worst: f64 = 0.0;
            for b in eta.blocks() {
                let w: Vec<f64> = b.iter().map(|x| -x).collect();
                worst = worst.max(ut_block(&w, &order)?);
            }
            Ok(worst)
        }
    }
}

fn check_masses(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() > 1e-9 {
        return Err(mismatch(format!("masses differ: {a} versus {b}")));
    }
    Ok(())
}

/// W1 between two measures on the 1D `k`-grid given as dense weight vectors,
/// `k = p.len()`.
pub fn w1_1d(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() || p.is_empty() {
        return Err(mismatch("1D measures need equal, nonzero lengths"));
    }
    check_masses(p.iter().sum(), q.iter().sum())?;
    Ok(partial_sum_norm(p.iter().zip(q).map(|(x, y)| x - y), p.len()))
}

fn check_same_grid(p: &GridHistogram, q: &GridHistogram) -> Result<()> {
    if p.k() != q.k() || p.dim() != q.dim() {
        return Err(mismatch(format!(
            "histograms live on different grids (k={}, dim={} versus k={}, dim={})",
            p.k(),
            p.dim(),
            q.k(),
            q.dim()
        )));
    }
    if p.iter_linear().chain(q.iter_linear()).any(|(_, w)| w < 0.0) {
        return Err(Error::Domain("transport needs nonnegative weights".into()));
    }
    check_masses(p.total_mass(), q.total_mass())
}

fn cell_distance(a: usize, b: usize, k: usize, dim: usize) -> f64 {
    let (ia, ib) = (multi_index(a, k, dim), multi_index(b, k, dim));
    let steps = ia.iter().zip(&ib).map(|(x, y)| x.abs_diff(*y)).max().unwrap_or(0);
    steps as f64 / k as f64
}

/// Optimal transport cost under the ℓ∞ ground metric between two equal-mass
/// grid histograms, by a linear program over couplings.
pub fn w1_exact(p: &GridHistogram, q: &GridHistogram) -> Result<f64> {
    check_same_grid(p, q)?;
    let ps: Vec<(usize, f64)> = p.iter_linear().filter(|e| e.1 > 0.0).collect();
    let qs: Vec<(usize, f64)> = q.iter_linear().filter(|e| e.1 > 0.0).collect();
    for len in [ps.len(), qs.len()] {
        if len > MAX_COUPLING_SUPPORT {
            return Err(Error::Capacity {
                what: "coupling support",
                requested: len as u128,
                limit: MAX_COUPLING_SUPPORT as u128,
            });
        }
    }
    coupling_cost(&ps, &qs, |a, b| cell_distance(a, b, p.k(), p.dim()))
}

/// Min-cost coupling between two weighted atom lists; one marginal row is
/// dropped since it is implied by the others.
fn coupling_cost<F: Fn(usize, usize) -> f64>(
    ps: &[(usize, f64)],
    qs: &[(usize, f64)],
    dist: F,
) -> Result<f64> {
    if ps.is_empty() || qs.is_empty() {
        return Ok(0.0);
    }
    let nq = qs.len();
    let mut lp = LpProblem::new(ps.len() * nq);
    for (i, &(a, _)) in ps.iter().enumerate() {
        for (j, &(b, _)) in qs.iter().enumerate() {
            lp.objective[i * nq + j] = dist(a, b);
        }
    }
    for (i, &(_, w)) in ps.iter().enumerate() {
        lp.add_eq((0..nq).map(|j| (i * nq + j, 1.0)).collect(), w);
    }
    for (j, &(_, w)) in qs.iter().enumerate().take(nq - 1) {
        lp.add_eq((0..ps.len()).map(|i| (i * nq + j, 1.0)).collect(), w);
    }
    let sol = lp_solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("coupling program reported {:?}", sol.status)));
    }
    Ok(sol.objective.max(0.0))
}

/// W1 between two equal-mass histograms by min-cost flow on the king graph.
pub fn w1_grid(p: &GridHistogram, q: &GridHistogram) -> Result<f64> {
    check_same_grid(p, q)?;
    let g = king_graph(p.k(), p.dim(), false)?;
    let mut supply = vec![0.0; g.num_nodes()];
    for (i, w) in p.iter_linear() {
        supply[i] += w;
    }
    for (i, w) in q.iter_linear() {
        supply[i] -= w;
    }
    g.min_cost(&supply)
}

/// W1 between marginal histograms, choosing the cheapest exact route.
fn w1_marginal(p: &GridHistogram, q: &GridHistogram) -> Result<f64> {
    if p.dim() == 1 {
        let dense = |h: &GridHistogram| {
            let mut v = vec![0.0; h.k()];
            for (i, w) in h.iter_linear() {
                v[i] += w;
            }
            v
        };
        return w1_1d(&dense(p), &dense(q));
    }
    if p.support_len() * q.support_len() <= COUPLING_VARIABLES {
        w1_exact(p, q)
    } else {
        w1_grid(p, q)
    }
}

/// A finite probability measure on `[0, 1]^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPoints {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedPoints {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let data = Dataset::new(points)?;
        if weights.len() != data.len() {
            return Err(mismatch("one weight per point expected"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Domain("weights must be finite and nonnegative".into()));
        }
        let mass: f64 = weights.iter().sum();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("weights sum to {mass}, expected 1")));
        }
        Ok(WeightedPoints {
            dim: data.dim(),
            coords: data.points().flatten().copied().collect(),
            weights,
        })
    }

    /// The empirical measure of a dataset.
    pub fn from_dataset(data: &Dataset) -> Self {
        let w = 1.0 / data.len() as f64;
        WeightedPoints {
            dim: data.dim(),
            coords: data.points().flatten().copied().collect(),
            weights: vec![w; data.len()],
        }
    }

    /// Atoms at the centers of a histogram's cells.
    pub fn from_histogram(h: &GridHistogram) -> Result<Self> {
        h.validate_probability()
            .or_else(|_| check_masses(h.total_mass(), 1.0))?;
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for (idx, w) in h.iter() {
            if w > 0.0 {
                coords.extend(h.center_of(&idx));
                weights.push(w);
            } else if w < 0.0 {
                return Err(Error::Domain("histogram has negative weights".into()));
            }
        }
        Ok(WeightedPoints {
            dim: h.dim(),
            coords,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Marginal on `subset` pushed to the `k`-grid, plus the mean ℓ∞
    /// displacement of that push.
    fn project(&self, subset: &[usize], k: usize) -> Result<(GridHistogram, f64)> {
        let mut h = GridHistogram::new(k, subset.len())?;
        let mut residual = 0.0;
        let mut x = vec![0.0; subset.len()];
        for i in 0..self.len() {
            let p = self.point(i);
            for (slot, &a) in x.iter_mut().zip(subset) {
                *slot = p[a];
            }
            let idx = discretize_point(&x, k)?;
            let disp = x
                .iter()
                .zip(&idx)
                .map(|(v, &c)| (v - center(k, c)).abs())
                .fold(0.0, f64::max);
            residual += self.weights[i] * disp;
            h.add_linear(linear_index(&idx, k), self.weights[i]);
        }
        Ok((h, residual))
    }
}

/// Bracket `[lower, upper]` on the utility loss between two measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBracket {
    pub lower: f64,
    pub upper: f64,
    /// Largest marginal W1 after pushing both measures to the evaluation grid.
    pub core: f64,
    pub residual_a: f64,
    pub residual_b: f64,
}

/// Triangle-inequality bracket: with `C` the largest W1 between the
/// `s`-marginals pushed to the `k_eval` grid and `r_a`, `r_b` the push
/// displacements, returns `(max(C − r_a − r_b, 0), C + r_a + r_b)`.
pub fn utility_loss_bounds(
    a: &WeightedPoints,
    b: &WeightedPoints,
    s: usize,
    k_eval: usize,
) -> Result<LossBracket> {
    if a.dim() != b.dim() {
        return Err(mismatch(format!(
            "measures have dimensions {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    if s == 0 || s > a.dim() || k_eval == 0 {
        return Err(invalid(format!(
            "need 1 <= s <= d and k_eval >= 1 (s={s}, d={}, k_eval={k_eval})",
            a.dim()
        )));
    }
    checked_cells_with_limit(k_eval, s, crate::flow::MAX_FLOW_NODES, "evaluation grid cells")?;
    let mut core: f64 = 0.0;
    let (mut ra, mut rb): (f64, f64) = (0.0, 0.0);
    for subset in subsets(a.dim(), s) {
        let (pa, da) = a.project(&subset, k_eval)?;
        let (pb, db) = b.project(&subset, k_eval)?;
        core = core.max(w1_marginal(&pa, &pb)?);
        ra = ra.max(da);
        rb = rb.max(db);
    }
    Ok(LossBracket {
        lower: (core - ra - rb).max(0.0),
        upper: core + ra + rb,
        core,
        residual_a: ra,
        residual_b: rb,
    })
}

/// 1D W1 between weighted point sets by integrating `|F_a − F_b|`.
fn w1_weighted_1d(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut events: Vec<(f64, f64)> = a
        .iter()
        .copied()
        .chain(b.iter().map(|&(x, w)| (x, -w)))
        .collect();
    events.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut cdf = 0.0;
    let mut total = 0.0;
    for pair in events.windows(2) {
        cdf += pair[0].1;
        total += cdf.abs() * (pair[1].0 - pair[0].0);
    }
    total
}

/// Exact utility loss `max_S W1(a^S, b^S)` when it is cheap to compute:
/// always for `s = 1`, and through a coupling program when the distinct
/// projected supports are small. Returns `None` otherwise.
pub fn utility_loss_exact(a: &WeightedPoints, b: &WeightedPoints, s: usize) -> Result<Option<f64>> {
    if a.dim() != b.dim() || s == 0 || s > a.dim() {
        return Err(invalid("exact loss needs matching dimensions and 1 <= s <= d"));
    }
    let mut worst: f64 = 0.0;
    for subset in subsets(a.dim(), s) {
        let project = |m: &WeightedPoints| -> Vec<(Vec<f64>, f64)> {
            let mut atoms: Vec<(Vec<f64>, f64)> = (0..m.len())
                .map(|i| (subset.iter().map(|&j| m.point(i)[j]).collect(), m.weight(i)))
                .collect();
            atoms.sort_by(|x, y| {
                x.0.iter()
                    .zip(&y.0)
                    .map(|(u, v)| u.total_cmp(v))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let mut merged: Vec<(Vec<f64>, f64)> = Vec::with_capacity(atoms.len());
            for (x, w) in atoms {
                match merged.last_mut() {
                    Some(last) if last.0 == x => last.1 += w,
                    _ => merged.push((x, w)),
                }
            }
            merged
        };
        let (pa, pb) = (project(a), project(b));
        let value = if pa == pb {
            0.0
        } else if s == 1 {
            let flat = |v: &[(Vec<f64>, f64)]| v.iter().map(|(x, w)| (x[0], *w)).collect::<Vec<_>>();
            w1_weighted_1d(&flat(&pa), &flat(&pb))
        } else if pa.len() * pb.len() <= COUPLING_VARIABLES {
            let ps: Vec<(usize, f64)> = pa.iter().enumerate().map(|(i, e)| (i, e.1)).collect();
            let qs: Vec<(usize, f64)> = pb.iter().enumerate().map(|(i, e)| (i, e.1)).collect();
            coupling_cost(&ps, &qs, |i, j| {
                pa[i].0
                    .iter()
                    .zip(&pb[j].0)
                    .map(|(u, v)| (u - v).abs())
                    .fold(0.0, f64::max)
            })?
        } else {
            return Ok(None);
        };
        worst = worst.max(value);
    }
    Ok(Some(worst))
}
