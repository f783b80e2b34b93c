//! Synthetic data generators, the rate sweep, slope fitting, and the
//! evaluation of released measures against data.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{empirical_measure, Dataset, GridSpec};
use crate::loss::{utility_loss_bounds, utility_loss_exact, LossBracket, WeightedPoints};
use crate::mechanism::PrivacyBudget;
use crate::rng::{label, Streams};
use crate::sanitize::{fit_measure, privatize_dataset, run_algorithm1, Mode, ReleaseConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GeneratorKind {
    Uniform,
    /// Mixture of boxes of half-width `spread` around `centers` random
    /// centers, truncated to the cube.
    Clustered { centers: usize, spread: f64 },
    /// Uniform on a random axis-aligned segment spanning one axis.
    Segment,
}

pub fn generate_data(kind: GeneratorKind, n: usize, d: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(invalid("generators need n >= 1 and d >= 1"));
    }
    let mut rng = Streams::new(seed).child(label::DATA).rng(0);
    let points = match kind {
        GeneratorKind::Uniform => (0..n)
            .map(|_| (0..d).map(|_| rng.gen::<f64>()).collect())
            .collect(),
        GeneratorKind::Clustered { centers, spread } => {
            if centers == 0 || !(spread >= 0.0) {
                return Err(invalid("clustered data needs at least one center and spread >= 0"));
            }
            let cs: Vec<Vec<f64>> = (0..centers)
                .map(|_| (0..d).map(|_| rng.gen::<f64>()).collect())
                .collect();
            (0..n)
                .map(|_| {
                    let c = &cs[rng.gen_range(0..centers)];
                    c.iter()
                        .map(|&x| {
                            let off = if spread > 0.0 { rng.gen_range(-spread..=spread) } else { 0.0 };
                            (x + off).clamp(0.0, 1.0)
                        })
                        .collect()
                })
                .collect()
        }
        GeneratorKind::Segment => {
            let axis = rng.gen_range(0..d);
            let anchor: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            (0..n)
                .map(|_| {
                    let mut p = anchor.clone();
                    p[axis] = rng.gen::<f64>();
                    p
                })
                .collect()
        }
    };
    Dataset::new(points)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KRule {
    Fixed(usize),
    /// `max(2, round(d^{-1}·(ln(εn)²/(nε))^{−1/s}))`.
    TheoremOptimal,
}

pub fn theorem_k(n: usize, d: usize, s: usize, epsilon: f64) -> usize {
    let nf = n as f64;
    let base = (epsilon * nf).ln().powi(2) / (nf * epsilon);
    let k = base.powf(-1.0 / s as f64) / d as f64;
    (k.round() as usize).max(2)
}

impl KRule {
    pub fn k_for(&self, n: usize, d: usize, s: usize, epsilon: f64) -> usize {
        match *self {
            KRule::Fixed(k) => k,
            KRule::TheoremOptimal => theorem_k(n, d, s, epsilon),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n_values: Vec<usize>,
    pub d: usize,
    pub s: usize,
    pub k_rule: KRule,
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    pub generator: GeneratorKind,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("a sweep needs at least one trial per cell"));
        }
        if self.n_values.is_empty() || self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("n values must be nonempty and strictly increasing"));
        }
        if self.n_values[0] == 0 {
            return Err(invalid("n values must be positive"));
        }
        for &n in &self.n_values {
            let k = self.k_rule.k_for(n, self.d, self.s, self.epsilon);
            GridSpec::new(self.d, self.s, k)?;
            crate::grid::checked_cells(k, self.d)?;
        }
        PrivacyBudget::pure(self.epsilon)?;
        Ok(())
    }
}

/// One line of sweep output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub k: usize,
    pub mean_loss: f64,
    pub std_loss: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Utility loss of one exact-mode release on grid-snapped data, so the loss
/// is computed without discretization slack.
fn sweep_trial(config: &SweepConfig, d: usize, n: usize, k: usize, seed: u64) -> Result<f64> {
    let spec = GridSpec::new(d, config.s, k)?;
    let budget = PrivacyBudget::pure(config.epsilon)?;
    let data = generate_data(config.generator, n, d, seed)?.snap_to_grid(k);
    let noisy = privatize_dataset(&data, &spec, &budget, seed)?;
    let mu = fit_measure(&noisy.nu, &Mode::Exact)?;
    let truth = WeightedPoints::from_histogram(&empirical_measure(&data, &spec)?)?;
    let released = WeightedPoints::from_histogram(&mu)?;
    Ok(utility_loss_bounds(&truth, &released, config.s, k)?.upper)
}

fn sweep_cell(config: &SweepConfig, d: usize, n: usize, cell: u64) -> Result<SweepRow> {
    let k = config.k_rule.k_for(n, d, config.s, config.epsilon);
    let family = Streams::new(config.seed).child(cell);
    let losses = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| sweep_trial(config, d, n, k, family.derive_seed(t)))
        .collect::<Result<Vec<f64>>>()?;
    let trials = losses.len() as f64;
    let mean = losses.iter().sum::<f64>() / trials;
    let var = if losses.len() > 1 {
        losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (trials - 1.0)
    } else {
        0.0
    };
    Ok(SweepRow {
        n,
        k,
        mean_loss: mean,
        std_loss: var.sqrt(),
        trials: losses.len(),
        seed: config.seed,
    })
}

/// Mean and standard deviation of the utility loss for each `n`.
pub fn rate_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    config
        .n_values
        .iter()
        .enumerate()
        .map(|(i, &n)| sweep_cell(config, config.d, n, i as u64))
        .collect()
}

/// Loss versus dimension at a fixed `n`, for inspecting the `d`-dependence.
pub fn dimension_sweep(config: &SweepConfig, n: usize, d_values: &[usize]) -> Result<Vec<(usize, SweepRow)>> {
    d_values
        .iter()
        .map(|&d| {
            let cfg = SweepConfig {
                d,
                n_values: vec![n],
                ..config.clone()
            };
            cfg.validate()?;
            Ok((d, sweep_cell(&cfg, d, n, 1000 + d as u64)?))
        })
        .collect()
}

/// Least-squares slope of `ln(mean_loss)` against `ln(n)` over rows with
/// positive loss.
pub fn slope_fit(rows: &[SweepRow]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.mean_loss > 0.0 && r.mean_loss.is_finite())
        .map(|r| ((r.n as f64).ln(), r.mean_loss.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(invalid(format!(
            "slope fit needs at least 3 rows with positive loss, got {}",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Bracket on the utility loss, tightened by the exact value when it is
/// cheap to compute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub lower: f64,
    pub upper: f64,
    pub bracket: LossBracket,
    pub exact: Option<f64>,
}

pub fn evaluate(a: &WeightedPoints, b: &WeightedPoints, s: usize, k_eval: usize) -> Result<Evaluation> {
    let bracket = utility_loss_bounds(a, b, s, k_eval)?;
    let exact = utility_loss_exact(a, b, s)?;
    let (lower, upper) = match exact {
        Some(e) => (e, e),
        None => (bracket.lower, bracket.upper),
    };
    Ok(Evaluation {
        lower,
        upper,
        bracket,
        exact,
    })
}

/// One point of a certificate-versus-loss curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub certificate: f64,
    /// Bracket lower bound on the loss of the released measure.
    pub lower: f64,
    /// Loss of the released measure (exact when available, else the bracket
    /// upper bound).
    pub measured: f64,
    pub upper: f64,
    /// Loss of releasing the public data unchanged.
    pub public_baseline: f64,
}

/// For each `k`: release from `data` in public mode, certify, and measure the
/// loss against the data at evaluation resolution `k_eval`.
pub fn certificate_curve(
    data: &Dataset,
    public: &Dataset,
    s: usize,
    ks: &[usize],
    epsilon: f64,
    k_eval: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    let truth = WeightedPoints::from_dataset(data);
    let public_points = public.to_rows();
    let baseline = evaluate(&truth, &WeightedPoints::from_dataset(public), s, k_eval)?;
    ks.iter()
        .map(|&k| {
            let spec = GridSpec::new(data.dim(), s, k)?;
            let mut cfg = ReleaseConfig::new(spec, PrivacyBudget::pure(epsilon)?, seed);
            cfg.mc_samples = mc_samples;
            let bundle = run_algorithm1(data, &Mode::Public(public_points.clone()), &cfg)?;
            let released = WeightedPoints::from_histogram(&bundle.measure)?;
            let ev = evaluate(&truth, &released, s, k_eval)?;
            Ok(CurvePoint {
                k,
                certificate: bundle.certificate.total,
                lower: ev.bracket.lower,
                measured: ev.exact.unwrap_or(ev.upper),
                upper: ev.upper,
                public_baseline: baseline.exact.unwrap_or(baseline.upper),
            })
        })
        .collect()
}
