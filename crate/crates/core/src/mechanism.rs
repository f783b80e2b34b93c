//! Laplace noise, its truncated variant, and the Haar-correlated
//! privatization of stacked marginals.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::GridSpec;
use crate::haar::HaarOperator;
use crate::loss::{proxy_loss_of_noise, ProxyLossKind};
use crate::query::{sensitivity, MarginalBlockVector};
use crate::rng::Streams;

/// Privacy parameters. `delta_dp = 0` selects pure ε-DP with Laplace noise,
/// `delta_dp > 0` selects (ε, δ)-DP with truncated Laplace noise.
///
/// `epsilon = +∞` is accepted and means "no noise"; it is only useful for
/// checking noiseless fixed points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta_dp: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta_dp: f64) -> Result<Self> {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(0.0..1.0).contains(&delta_dp) {
            return Err(invalid(format!("delta_dp must lie in [0, 1), got {delta_dp}")));
        }
        Ok(PrivacyBudget { epsilon, delta_dp })
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }
}

/// Scale of the latent Laplace draws and, for (ε, δ)-DP, the truncation bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub lambda: f64,
    pub truncation: Option<f64>,
    epsilon: f64,
    delta: f64,
}

/// `A = λ (1 + (e^ε − 1) / (2δ))`.
pub fn truncation_bound(lambda: f64, epsilon: f64, delta: f64) -> f64 {
    lambda * (1.0 + epsilon.exp_m1() / (2.0 * delta))
}

impl NoiseSpec {
    /// Noise for the stacked-marginal query on `n` records: `λ = Δ_T / ε`
    /// (the Haar inverse has unit column norm).
    pub fn for_query(spec: &GridSpec, n: usize, budget: &PrivacyBudget) -> Result<Self> {
        let lambda = sensitivity(spec, n)? / budget.epsilon;
        Ok(Self::with_scale(lambda, budget))
    }

    pub fn with_scale(lambda: f64, budget: &PrivacyBudget) -> Self {
        let truncation = (budget.delta_dp > 0.0 && lambda > 0.0)
            .then(|| truncation_bound(lambda, budget.epsilon, budget.delta_dp));
        NoiseSpec {
            lambda,
            truncation,
            epsilon: budget.epsilon,
            delta: budget.delta_dp,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.lambda == 0.0 {
            return 0.0;
        }
        match self.truncation {
            None => sample_laplace(self.lambda, rng),
            Some(a) => self.lambda * standard_tlap(a / self.lambda, rng),
        }
    }
}

/// Uniform on the open interval `(-1/2, 1/2)`.
fn centered_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u = rng.gen::<f64>() - 0.5;
        if u > -0.5 {
            return u;
        }
    }
}

fn laplace_from_uniform(u: f64) -> f64 {
    -u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// One draw from the zero-mean Laplace distribution with scale `lambda`
/// (variance `2λ²`) by inverse CDF.
pub fn sample_laplace<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> f64 {
    lambda * laplace_from_uniform(centered_uniform(rng))
}

/// Unit-scale Laplace truncated to `[-a, a]`.
fn standard_tlap<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    let u = centered_uniform(rng);
    let mass = -(-a).exp_m1(); // 1 - e^{-a}
    let mag = -(-2.0 * u.abs() * mass).ln_1p();
    u.signum() * mag.min(a)
}

/// One draw from Laplace(`lambda`) conditioned on `[-A, A]` with
/// `A = λ (1 + (e^ε − 1)/(2δ))`.
pub fn sample_tlap<R: Rng + ?Sized>(
    lambda: f64,
    epsilon: f64,
    delta: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!(
            "truncated Laplace needs 0 < delta < 1, got {delta}; use plain Laplace for delta = 0"
        )));
    }
    if !(lambda > 0.0) || !(epsilon > 0.0) {
        return Err(invalid("truncated Laplace needs lambda > 0 and epsilon > 0"));
    }
    let a = truncation_bound(lambda, epsilon, delta);
    Ok(lambda * standard_tlap(a / lambda, rng))
}

/// Latent i.i.d. draws `η̃` for one block.
pub fn draw_latent<R: Rng + ?Sized>(len: usize, noise: &NoiseSpec, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| noise.sample(rng)).collect()
}

/// The correlated noise vector `η` with block `j` equal to
/// `[Φ η̃^{S_j}]_{1:k^s}`; block `j` reads stream `j` of `streams`.
pub fn draw_noise(
    spec: &GridSpec,
    noise: &NoiseSpec,
    streams: &Streams,
) -> Result<MarginalBlockVector> {
    let block_len = spec.block_len()?;
    let phi = HaarOperator::for_length(block_len)?;
    let mut eta = MarginalBlockVector::zeros(*spec)?;
    for j in 0..spec.num_blocks() {
        let mut rng = streams.rng(j as u64);
        let latent = draw_latent(phi.order(), noise, &mut rng);
        let block = phi.apply_truncated(&latent, block_len)?;
        eta.block_mut(j).copy_from_slice(&block);
    }
    Ok(eta)
}

/// `ν_DP = v + η` for a query vector built from `n` records.
pub fn privatize(
    v: &MarginalBlockVector,
    budget: &PrivacyBudget,
    n: usize,
    streams: &Streams,
) -> Result<MarginalBlockVector> {
    let noise = NoiseSpec::for_query(v.spec(), n, budget)?;
    let eta = draw_noise(v.spec(), &noise, streams)?;
    v.add(&eta)
}

/// Monte-Carlo estimate of the `1 − δ` quantile of `P(0, η)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimate {
    pub value: f64,
    /// 1-based order statistic that was returned.
    pub rank: usize,
    pub samples: usize,
    /// Set when `samples · δ < 5`, i.e. fewer than five draws are expected
    /// above the quantile.
    pub low_resolution: bool,
}

/// Draws `n_mc` noise vectors exactly as [`privatize`] would (trial `t` uses
/// the child family `t` of `streams`) and returns the upper order statistic
/// at rank `⌈(1 − δ)·n_mc⌉`.
pub fn noise_quantile_mc(
    spec: &GridSpec,
    budget: &PrivacyBudget,
    n: usize,
    kind: ProxyLossKind,
    delta_fail: f64,
    n_mc: usize,
    streams: &Streams,
) -> Result<QuantileEstimate> {
    if n_mc == 0 {
        return Err(invalid("at least one Monte-Carlo sample is required"));
    }
    if !(delta_fail > 0.0 && delta_fail < 1.0) {
        return Err(invalid(format!("delta_fail must lie in (0, 1), got {delta_fail}")));
    }
    let noise = NoiseSpec::for_query(spec, n, budget)?;
    let mut values = (0..n_mc as u64)
        .into_par_iter()
        .map(|t| {
            let eta = draw_noise(spec, &noise, &streams.child(t))?;
            proxy_loss_of_noise(&eta, kind)
        })
        .collect::<Result<Vec<f64>>>()?;
    values.sort_by(f64::total_cmp);
    let rank = quantile_rank(delta_fail, n_mc);
    Ok(QuantileEstimate {
        value: values[rank - 1],
        rank,
        samples: n_mc,
        low_resolution: (n_mc as f64) * delta_fail < 5.0,
    })
}

/// `⌈(1 − δ)·n⌉`, clamped to `[1, n]`, robust to the representation error of `δ`.
pub fn quantile_rank(delta_fail: f64, n: usize) -> usize {
    let raw = (1.0 - delta_fail) * n as f64;
    let rank = (raw - 1e-9 * n as f64).ceil() as usize;
    rank.clamp(1, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::apply_t_dataset;
    use crate::grid::Dataset;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn laplace_median_and_moments() {
        assert_eq!(laplace_from_uniform(0.0), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lambda = 1.5;
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_laplace(lambda, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 * 2f64.sqrt() * lambda / 1e3, "mean {mean}");
        assert!((var / (2.0 * lambda * lambda) - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn truncated_laplace_bounds() {
        let a = truncation_bound(1.0, 1.0, 0.1);
        assert!((a - (1.0 + (1f64.exp() - 1.0) / 0.2)).abs() < 1e-12);
        assert!((a - 9.591409142295225).abs() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100_000 {
            let x = sample_tlap(0.3, 2.0, 0.4, &mut rng).unwrap();
            assert!(x.abs() <= truncation_bound(0.3, 2.0, 0.4));
        }
        assert!(sample_tlap(1.0, 1.0, 0.0, &mut rng).is_err());
        // A decreases as delta grows
        let mut prev = f64::INFINITY;
        for i in 1..50 {
            let d = i as f64 / 100.0;
            let a = truncation_bound(1.0, 1.0, d);
            assert!(a < prev);
            prev = a;
        }
    }

    #[test]
    fn tight_truncation_hits_the_boundary_region() {
        // with a small truncation bound, samples fill [-A, A] symmetrically
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = 0.5;
        let draws: Vec<f64> = (0..20_000).map(|_| standard_tlap(a, &mut rng)).collect();
        assert!(draws.iter().all(|x| x.abs() <= a));
        assert!(draws.iter().any(|&x| x > 0.45) && draws.iter().any(|&x| x < -0.45));
    }

    #[test]
    fn budget_validation() {
        assert!(PrivacyBudget::new(0.0, 0.0).is_err());
        assert!(PrivacyBudget::new(1.0, 1.0).is_err());
        assert!(PrivacyBudget::new(1.0, -0.1).is_err());
        assert!(PrivacyBudget::new(f64::INFINITY, 0.0).is_ok());
    }

    #[test]
    fn privatize_one_block_by_hand() {
        // d = s = 1, k = 2, n = 10, ε = 1: λ = 0.2 and Φ = [[1, 1], [1, -1]]
        let spec = GridSpec::new(1, 1, 2).unwrap();
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![if i < 3 { 0.1 } else { 0.8 }]).collect();
        let v = apply_t_dataset(&Dataset::new(pts).unwrap(), &spec).unwrap();
        let budget = PrivacyBudget::pure(1.0).unwrap();
        let streams = Streams::new(42);
        let nu = privatize(&v, &budget, 10, &streams).unwrap();

        let mut rng = streams.rng(0);
        let e0 = 0.2 * laplace_from_uniform(centered_uniform(&mut rng));
        let e1 = 0.2 * laplace_from_uniform(centered_uniform(&mut rng));
        assert_eq!(nu.as_slice()[0], 0.3 + (e0 + e1));
        assert_eq!(nu.as_slice()[1], 0.7 + (e0 - e1));
    }

    #[test]
    fn infinite_epsilon_is_noiseless() {
        let spec = GridSpec::new(2, 1, 3).unwrap();
        let data = Dataset::new(vec![vec![0.1, 0.5], vec![0.9, 0.2]]).unwrap();
        let v = apply_t_dataset(&data, &spec).unwrap();
        let nu = privatize(&v, &PrivacyBudget::pure(f64::INFINITY).unwrap(), 2, &Streams::new(1)).unwrap();
        assert_eq!(nu, v);
        let q = noise_quantile_mc(
            &spec,
            &PrivacyBudget::pure(f64::INFINITY).unwrap(),
            2,
            ProxyLossKind::Lt,
            0.1,
            20,
            &Streams::new(1),
        )
        .unwrap();
        assert_eq!(q.value, 0.0);
    }

    #[test]
    fn quantile_rank_values() {
        assert_eq!(quantile_rank(0.1, 200), 180);
        assert_eq!(quantile_rank(0.1, 10), 9);
        assert_eq!(quantile_rank(0.05, 200), 190);
        assert_eq!(quantile_rank(0.5, 3), 2);
        assert_eq!(quantile_rank(0.999, 3), 1);
    }

    #[test]
    fn quantile_picks_order_statistic() {
        let spec = GridSpec::new(2, 1, 4).unwrap();
        let budget = PrivacyBudget::pure(1.0).unwrap();
        let streams = Streams::new(77);
        let q = noise_quantile_mc(&spec, &budget, 50, ProxyLossKind::Lt, 0.1, 200, &streams).unwrap();
        assert_eq!(q.rank, 180);
        assert!(!q.low_resolution);
        let noise = NoiseSpec::for_query(&spec, 50, &budget).unwrap();
        let mut vals: Vec<f64> = (0..200)
            .map(|t| proxy_loss_of_noise(&draw_noise(&spec, &noise, &streams.child(t)).unwrap(), ProxyLossKind::Lt).unwrap())
            .collect();
        vals.sort_by(f64::total_cmp);
        assert_eq!(q.value, vals[179]);
        let q = noise_quantile_mc(&spec, &budget, 50, ProxyLossKind::Lt, 0.1, 20, &streams).unwrap();
        assert!(q.low_resolution);
        assert!(noise_quantile_mc(&spec, &budget, 50, ProxyLossKind::Lt, 0.0, 20, &streams).is_err());
        assert!(noise_quantile_mc(&spec, &budget, 50, ProxyLossKind::Lt, 0.1, 0, &streams).is_err());
    }
}
