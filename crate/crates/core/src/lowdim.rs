//! Release for data of low effective dimension: a noisy full histogram
//! projected onto the ℓ1 ball, and the adaptive choice of the effective
//! dimension `s'` from private support-size estimates.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::flat::FlatDoc;
use crate::flow::king_edges;
use crate::grid::{checked_cells, empirical_measure, support_count, Dataset, GridHistogram, GridSpec};
use crate::lp::{lp_solve, LpProblem, LpStatus};
use crate::mechanism::sample_laplace;
use crate::rng::{label, Streams};

/// Grids up to this many cells get the `U_T`-optimal fit; larger grids are
/// clipped and renormalized.
pub const MAX_LOWDIM_LP_CELLS: usize = 512;

/// Euclidean projection onto `{y : ‖y‖₁ ≤ radius}` by sorting and
/// soft-thresholding.
pub fn project_l1_ball(x: &[f64], radius: f64) -> Result<Vec<f64>> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(invalid(format!("radius must be positive and finite, got {radius}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(invalid("projection input must be finite"));
    }
    let norm: f64 = x.iter().map(|v| v.abs()).sum();
    if norm <= radius {
        return Ok(x.to_vec());
    }
    let mut u: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - radius) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    Ok(x.iter()
        .map(|&v| v.signum() * (v.abs() - theta).max(0.0))
        .collect())
}

/// One low-dimensional release and the quantities entering its analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct LowdimRelease {
    pub k: usize,
    pub measure: GridHistogram,
    /// True histogram by linear cell index.
    pub v: Vec<f64>,
    /// Laplace noise added to `v`.
    pub eta: Vec<f64>,
    /// `ν = Π_{‖·‖₁ ≤ 1}(v + η)`.
    pub nu: Vec<f64>,
    /// Occupied cells of the `k`-grid.
    pub support: usize,
}

/// Noisy full histogram at scale `2/(nε)`, projected onto the unit ℓ1 ball,
/// then turned into a probability measure.
pub fn lowdim_release(data: &Dataset, k: usize, epsilon: f64, streams: &Streams) -> Result<LowdimRelease> {
    if !(epsilon > 0.0) {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let d = data.dim();
    let cells = checked_cells(k, d)?;
    let spec = GridSpec::new(d, d, k)?;
    let hist = empirical_measure(data, &spec)?;
    let mut v = vec![0.0; cells];
    for (lin, w) in hist.iter_linear() {
        v[lin] = w;
    }
    let lambda = 2.0 / (data.len() as f64 * epsilon);
    let mut rng = streams.rng(0);
    let eta: Vec<f64> = (0..cells)
        .map(|_| if lambda == 0.0 { 0.0 } else { sample_laplace(lambda, &mut rng) })
        .collect();
    let noisy: Vec<f64> = v.iter().zip(&eta).map(|(a, b)| a + b).collect();
    let nu = project_l1_ball(&noisy, 1.0)?;
    let weights = if cells <= MAX_LOWDIM_LP_CELLS {
        fit_ut(&nu, k, d)?
    } else {
        clip_and_normalize(&nu)
    };
    let mut measure = GridHistogram::new(k, d)?;
    for (lin, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            measure.add_linear(lin, w);
        }
    }
    Ok(LowdimRelease {
        k,
        measure,
        v,
        eta,
        nu,
        support: support_count(data, k)?,
    })
}

fn clip_and_normalize(nu: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = nu.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total > 0.0 {
        clipped.iter().map(|x| x / total).collect()
    } else {
        vec![1.0 / nu.len() as f64; nu.len()]
    }
}

/// Probability vector `μ` minimizing the flat-metric distance to `ν` on the
/// king graph, written as a min-cost routing of `ν − μ`.
fn fit_ut(nu: &[f64], k: usize, d: usize) -> Result<Vec<f64>> {
    let c = nu.len();
    let edges = king_edges(k, d)?;
    let e = edges.len();
    // variables: μ (c), r⁺ (c), r⁻ (c), φ forward (e), φ backward (e)
    let (rp, rm, ff, fb) = (c, 2 * c, 3 * c, 3 * c + e);
    let mut p = LpProblem::new(3 * c + 2 * e);
    for i in 0..c {
        p.objective[rp + i] = 1.0;
        p.objective[rm + i] = 1.0;
    }
    for j in 0..2 * e {
        p.objective[ff + j] = 1.0 / k as f64;
    }
    p.add_eq((0..c).map(|i| (i, 1.0)).collect(), 1.0);
    let mut rows: Vec<Vec<(usize, f64)>> = (0..c)
        .map(|i| vec![(i, 1.0), (rp + i, 1.0), (rm + i, -1.0)])
        .collect();
    for (j, &(a, b)) in edges.iter().enumerate() {
        rows[a].push((ff + j, 1.0));
        rows[b].push((ff + j, -1.0));
        rows[b].push((fb + j, 1.0));
        rows[a].push((fb + j, -1.0));
    }
    for (i, row) in rows.into_iter().enumerate() {
        p.add_eq(row, nu[i]);
    }
    let sol = lp_solve(&p)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("low-dimensional fit reported {:?}", sol.status)));
    }
    let mu: Vec<f64> = sol.x[..c].iter().map(|&w| if w < 1e-12 { 0.0 } else { w }).collect();
    let total: f64 = mu.iter().sum();
    Ok(mu.iter().map(|w| w / total).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig {
    /// Multiplier on the cell-count rule for `k_{s'}`.
    pub k_constant: f64,
    /// Constant `c` in `|q(D)| ≤ c·k^{s'}`; only used for the reference
    /// rate column.
    pub cell_constant: Option<f64>,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            k_constant: 1.0,
            cell_constant: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveRow {
    pub s_prime: usize,
    pub k: usize,
    pub support_estimate: f64,
    pub score: f64,
    pub rate_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveReport {
    pub n: usize,
    pub d: usize,
    pub epsilon: f64,
    pub eps_tilde: f64,
    pub k_constant: f64,
    pub rows: Vec<AdaptiveRow>,
    pub s_opt: usize,
    pub measure: GridHistogram,
}

/// `ε / (2(d+1))`: `d+1` releases and `d+1` support queries share `ε`.
pub fn per_query_budget(epsilon: f64, d: usize) -> f64 {
    epsilon / (2.0 * (d as f64 + 1.0))
}

/// `max(1, round(c·(d²·ln(εn)/(nε̃))^{−1/(s'+1)}))`.
pub fn cells_for(s_prime: usize, n: usize, d: usize, epsilon: f64, k_constant: f64) -> usize {
    let eps_tilde = per_query_budget(epsilon, d);
    let base = (d * d) as f64 * (epsilon * n as f64).ln() / (n as f64 * eps_tilde);
    let k = k_constant * base.powf(-1.0 / (s_prime as f64 + 1.0));
    (k.round() as usize).max(1)
}

/// `1/(2k) + 64·ln(k^d + 1)/(nε̃)·Ŝ`.
pub fn adaptive_score(k: usize, d: usize, n: usize, eps_tilde: f64, support: f64) -> f64 {
    let cells = (k as f64).powi(d as i32);
    0.5 / k as f64 + 64.0 * (cells + 1.0).ln() / (n as f64 * eps_tilde) * support
}

/// Index of the smallest score; ties go to the smaller `s'`.
pub fn select_dimension(rows: &[AdaptiveRow]) -> usize {
    let mut best = 0;
    for (i, row) in rows.iter().enumerate() {
        if row.score < rows[best].score {
            best = i;
        }
    }
    rows[best].s_prime
}

pub fn adaptive_select(
    data: &Dataset,
    epsilon: f64,
    config: &AdaptiveConfig,
    seed: u64,
) -> Result<AdaptiveReport> {
    let (n, d) = (data.len(), data.dim());
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(invalid(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    if (n as f64) * epsilon < (d + 1) as f64 {
        return Err(invalid(format!(
            "adaptive selection needs n·ε ≥ d+1 (n={n}, ε={epsilon}, d={d})"
        )));
    }
    if !(config.k_constant > 0.0) {
        return Err(invalid("the cell-count constant must be positive"));
    }
    let eps_tilde = per_query_budget(epsilon, d);
    let root = Streams::new(seed);
    let mut rows = Vec::with_capacity(d + 1);
    let mut releases = Vec::with_capacity(d + 1);
    for s_prime in 0..=d {
        let k = cells_for(s_prime, n, d, epsilon, config.k_constant);
        let release = lowdim_release(data, k, eps_tilde, &root.child(label::LOWDIM).child(s_prime as u64))?;
        let mut rng = root.child(label::SUPPORT_QUERY).rng(s_prime as u64);
        let support_estimate = release.support as f64 + sample_laplace(1.0 / eps_tilde, &mut rng);
        let rate_bound = config
            .cell_constant
            .map(|c| adaptive_score(k, d, n, eps_tilde, c * (k as f64).powi(s_prime as i32)));
        rows.push(AdaptiveRow {
            s_prime,
            k,
            support_estimate,
            score: adaptive_score(k, d, n, eps_tilde, support_estimate),
            rate_bound,
        });
        releases.push(release);
    }
    let s_opt = select_dimension(&rows);
    Ok(AdaptiveReport {
        n,
        d,
        epsilon,
        eps_tilde,
        k_constant: config.k_constant,
        rows,
        s_opt,
        measure: releases.swap_remove(s_opt).measure,
    })
}

impl AdaptiveReport {
    pub fn to_doc(&self) -> FlatDoc {
        let mut doc = FlatDoc::new();
        doc.int("n", self.n as u64)
            .int("d", self.d as u64)
            .float("epsilon", self.epsilon)
            .float("eps_tilde", self.eps_tilde)
            .float("k_constant", self.k_constant)
            .int("s_opt", self.s_opt as u64)
            .int("k_opt", self.rows[self.s_opt].k as u64);
        for row in &self.rows {
            let key = |name: &str| format!("s{}_{name}", row.s_prime);
            doc.int(&key("k"), row.k as u64)
                .float(&key("support_estimate"), row.support_estimate)
                .float(&key("score"), row.score);
            if let Some(b) = row.rate_bound {
                doc.float(&key("rate_bound"), b);
            }
        }
        doc
    }

    pub fn to_json(&self) -> String {
        self.to_doc().to_json()
    }

    /// Rows recovered from a serialized report.
    pub fn rows_from_json(text: &str) -> Result<Vec<AdaptiveRow>> {
        let doc = FlatDoc::parse(text)?;
        let d = doc.get_u64("d")? as usize;
        (0..=d)
            .map(|s| {
                let key = |name: &str| format!("s{s}_{name}");
                Ok(AdaptiveRow {
                    s_prime: s,
                    k: doc.get_u64(&key("k"))? as usize,
                    support_estimate: doc.get_f64(&key("support_estimate"))?,
                    score: doc.get_f64(&key("score"))?,
                    rate_bound: if doc.has(&key("rate_bound")) {
                        Some(doc.get_f64(&key("rate_bound"))?)
                    } else {
                        None
                    },
                })
            })
            .collect()
    }
}
