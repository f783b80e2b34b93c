//! The release pipeline: discretize, answer marginals, privatize, fit a
//! measure, certify.
//!
//! Steps 1–2 ([`privatize_dataset`]) are the only ones that read the private
//! data. Steps 3–4 ([`post_process`]) take a [`NoisyRelease`] and public
//! inputs only, so everything they produce inherits the privacy guarantee of
//! the noisy vector.

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Error, Result};
use crate::flat::FlatDoc;
use crate::grid::{checked_cells, multi_index, Dataset, GridHistogram, GridSpec};
use crate::loss::{proxy_loss, ProxyLossKind, MAX_UT_BLOCK};
use crate::lp::{build_step3_exact, build_step3_public, MAX_NONZEROS};
use crate::mechanism::{noise_quantile_mc, privatize, PrivacyBudget, QuantileEstimate};
use crate::query::{apply_t, apply_t_dataset, MarginalBlockVector};
use crate::rng::{label, Streams};

/// Where Step 3 looks for the released measure.
#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    /// Any probability measure on the `k^d` grid.
    Exact,
    /// Mixtures of the given public points (discretized to the grid).
    Public(Vec<Vec<f64>>),
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Public(_) => "public",
        }
    }
}

/// Parameters of one release besides the data and the mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReleaseConfig {
    pub spec: GridSpec,
    pub budget: PrivacyBudget,
    pub delta_fail: f64,
    pub mc_samples: usize,
    /// Proxy used for the certificate (Step 3 always minimizes `L_T`).
    pub cert_kind: ProxyLossKind,
    /// Also estimate the `L_T` noise quantile for comparison.
    pub compare_lt: bool,
    pub seed: u64,
}

impl ReleaseConfig {
    pub fn new(spec: GridSpec, budget: PrivacyBudget, seed: u64) -> Self {
        ReleaseConfig {
            spec,
            budget,
            delta_fail: 0.1,
            mc_samples: 200,
            cert_kind: ProxyLossKind::Ut,
            compare_lt: false,
            seed,
        }
    }

    /// Checks parameters and size guards without doing any work.
    pub fn validate(&self, mode: &Mode) -> Result<()> {
        if !(self.delta_fail > 0.0 && self.delta_fail < 1.0) {
            return Err(invalid(format!("delta_fail must lie in (0, 1), got {}", self.delta_fail)));
        }
        if self.mc_samples == 0 {
            return Err(invalid("at least one Monte-Carlo sample is required"));
        }
        let spec = &self.spec;
        let block_len = spec.block_len()?;
        let vector_len = spec.vector_len()?;
        if self.cert_kind == ProxyLossKind::Ut && block_len > MAX_UT_BLOCK {
            return Err(Error::Capacity {
                what: "U_T block variables",
                requested: block_len as u128,
                limit: MAX_UT_BLOCK as u128,
            });
        }
        let atoms = match mode {
            Mode::Exact => checked_cells(spec.k, spec.d)?,
            Mode::Public(points) => {
                if points.is_empty() {
                    return Err(invalid("public data set is empty"));
                }
                if let Some(p) = points.iter().find(|p| p.len() != spec.d) {
                    return Err(mismatch(format!(
                        "public point has dimension {}, spec expects {}",
                        p.len(),
                        spec.d
                    )));
                }
                points.len()
            }
        };
        // Σα row, K entries per atom, four per stacked entry, two per stacked
        // entry in the epigraph rows
        let nnz = atoms as u128 * (1 + spec.num_blocks() as u128) + 6 * vector_len as u128;
        if nnz > MAX_NONZEROS as u128 {
            return Err(Error::Capacity {
                what: "step-3 program nonzeros",
                requested: nnz,
                limit: MAX_NONZEROS as u128,
            });
        }
        Ok(())
    }
}

/// The privatized query vector together with the record count it was built
/// from. This is the whole interface between private and public steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyRelease {
    pub nu: MarginalBlockVector,
    pub n: usize,
}

impl NoisyRelease {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: NoisyRelease = serde_json::from_str(text)?;
        MarginalBlockVector::from_vec(*r.nu.spec(), r.nu.as_slice().to_vec())?;
        if r.n == 0 {
            return Err(invalid("record count must be positive"));
        }
        Ok(r)
    }
}

/// The bound `ub = 1/2k + q_{1−δ}(P(0, η)) + P(ν, Tμ)` and its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub discretization_error: f64,
    pub privatization_quantile: f64,
    pub projection_error: f64,
    pub total: f64,
    pub loss_kind: ProxyLossKind,
    pub delta_fail: f64,
    pub mc_samples: usize,
    pub quantile_rank: usize,
    pub k: usize,
    pub s: usize,
    pub d: usize,
    pub n: usize,
    pub epsilon: f64,
    pub delta_dp: f64,
    pub seed: u64,
    /// `L_T` noise quantile, when requested for comparison.
    pub lt_privatization_quantile: Option<f64>,
}

impl Certificate {
    pub fn to_doc(&self) -> FlatDoc {
        let mut doc = FlatDoc::new();
        doc.float("discretization_error", self.discretization_error)
            .float("privatization_quantile", self.privatization_quantile)
            .float("projection_error", self.projection_error)
            .float("total", self.total)
            .string("loss_kind", self.loss_kind.name())
            .float("delta_fail", self.delta_fail)
            .int("mc_samples", self.mc_samples as u64)
            .int("quantile_rank", self.quantile_rank as u64)
            .int("k", self.k as u64)
            .int("s", self.s as u64)
            .int("d", self.d as u64)
            .int("n", self.n as u64)
            .float("epsilon", self.epsilon)
            .float("delta_dp", self.delta_dp)
            .int("seed", self.seed);
        if let Some(q) = self.lt_privatization_quantile {
            doc.float("lt_privatization_quantile", q);
        }
        doc
    }

    pub fn to_json(&self) -> String {
        self.to_doc().to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc = FlatDoc::parse(text)?;
        let usize_of = |key: &str| doc.get_u64(key).map(|v| v as usize);
        Ok(Certificate {
            discretization_error: doc.get_f64("discretization_error")?,
            privatization_quantile: doc.get_f64("privatization_quantile")?,
            projection_error: doc.get_f64("projection_error")?,
            total: doc.get_f64("total")?,
            loss_kind: doc.get_str("loss_kind")?.parse()?,
            delta_fail: doc.get_f64("delta_fail")?,
            mc_samples: usize_of("mc_samples")?,
            quantile_rank: usize_of("quantile_rank")?,
            k: usize_of("k")?,
            s: usize_of("s")?,
            d: usize_of("d")?,
            n: usize_of("n")?,
            epsilon: doc.get_f64("epsilon")?,
            delta_dp: doc.get_f64("delta_dp")?,
            seed: doc.get_u64("seed")?,
            lt_privatization_quantile: if doc.has("lt_privatization_quantile") {
                Some(doc.get_f64("lt_privatization_quantile")?)
            } else {
                None
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReleaseBundle {
    pub measure: GridHistogram,
    pub certificate: Certificate,
    pub noisy: NoisyRelease,
    pub quantile: QuantileEstimate,
}

/// Steps 1–2: `ν = T μ_D + η`, drawing noise from the release stream of
/// `seed`.
pub fn privatize_dataset(
    data: &Dataset,
    spec: &GridSpec,
    budget: &PrivacyBudget,
    seed: u64,
) -> Result<NoisyRelease> {
    let v = apply_t_dataset(data, spec)?;
    let streams = Streams::new(seed).child(label::RELEASE_NOISE);
    Ok(NoisyRelease {
        nu: privatize(&v, budget, data.len(), &streams)?,
        n: data.len(),
    })
}

/// Step 3: the measure minimizing `L_T(ν, Tμ)` over the mode's candidates.
pub fn fit_measure(nu: &MarginalBlockVector, mode: &Mode) -> Result<GridHistogram> {
    let spec = nu.spec();
    let problem = match mode {
        Mode::Exact => build_step3_exact(nu, spec)?,
        Mode::Public(points) => build_step3_public(nu, points, spec)?,
    };
    let sol = problem.solve()?;
    problem.measure_from(&sol)
}

/// Step 4 for a given measure and noise quantile. For grid-supported `μ`
/// the `U(T†Tμ, μ)` part of the projection term vanishes.
pub fn certify(
    mu: &GridHistogram,
    noisy: &NoisyRelease,
    quantile: &QuantileEstimate,
    config: &ReleaseConfig,
) -> Result<Certificate> {
    let spec = &config.spec;
    if noisy.nu.spec() != spec {
        return Err(mismatch("noisy vector and configuration disagree on the grid"));
    }
    let projection_error = proxy_loss(&noisy.nu, &apply_t(mu, spec)?, config.cert_kind)?;
    let discretization_error = spec.discretization_error();
    let privatization_quantile = quantile.value;
    Ok(Certificate {
        discretization_error,
        privatization_quantile,
        projection_error,
        total: discretization_error + privatization_quantile + projection_error,
        loss_kind: config.cert_kind,
        delta_fail: config.delta_fail,
        mc_samples: quantile.samples,
        quantile_rank: quantile.rank,
        k: spec.k,
        s: spec.s,
        d: spec.d,
        n: noisy.n,
        epsilon: config.budget.epsilon,
        delta_dp: config.budget.delta_dp,
        seed: config.seed,
        lt_privatization_quantile: None,
    })
}

/// Monte-Carlo noise quantile from the certificate stream of `config.seed`.
pub fn certificate_quantile(
    config: &ReleaseConfig,
    n: usize,
    kind: ProxyLossKind,
) -> Result<QuantileEstimate> {
    let streams = Streams::new(config.seed).child(label::CERTIFICATE);
    noise_quantile_mc(
        &config.spec,
        &config.budget,
        n,
        kind,
        config.delta_fail,
        config.mc_samples,
        &streams,
    )
}

/// Steps 3–4 from the noisy vector alone.
pub fn post_process(noisy: &NoisyRelease, mode: &Mode, config: &ReleaseConfig) -> Result<ReleaseBundle> {
    config.validate(mode)?;
    let measure = fit_measure(&noisy.nu, mode)?;
    let quantile = certificate_quantile(config, noisy.n, config.cert_kind)?;
    let mut certificate = certify(&measure, noisy, &quantile, config)?;
    if config.compare_lt {
        certificate.lt_privatization_quantile =
            Some(certificate_quantile(config, noisy.n, ProxyLossKind::Lt)?.value);
    }
    Ok(ReleaseBundle {
        measure,
        certificate,
        noisy: noisy.clone(),
        quantile,
    })
}

/// The full pipeline.
pub fn run_algorithm1(data: &Dataset, mode: &Mode, config: &ReleaseConfig) -> Result<ReleaseBundle> {
    config.validate(mode)?;
    let noisy = privatize_dataset(data, &config.spec, &config.budget, config.seed)?;
    post_process(&noisy, mode, config)
}

/// `n_out` i.i.d. draws of cell centers with probabilities equal to the
/// measure's weights.
pub fn sample_synthetic(measure: &GridHistogram, n_out: usize, seed: u64) -> Result<Dataset> {
    if n_out == 0 {
        return Err(invalid("at least one synthetic record is required"));
    }
    if measure.validate_probability().is_err() {
        return Err(Error::Domain("synthetic data needs a probability measure".into()));
    }
    let atoms: Vec<(usize, f64)> = measure.iter_linear().filter(|e| e.1 > 0.0).collect();
    let dist = WeightedIndex::new(atoms.iter().map(|e| e.1))
        .map_err(|e| Error::Domain(format!("cannot sample from the measure: {e}")))?;
    let mut rng = Streams::new(seed).child(label::SYNTHETIC).rng(0);
    let points = (0..n_out)
        .map(|_| {
            let lin = atoms[dist.sample(&mut rng)].0;
            measure.center_of(&multi_index(lin, measure.k(), measure.dim()))
        })
        .collect();
    Dataset::new(points)
}
