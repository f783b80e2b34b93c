use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dpcert::eval::{evaluate, rate_sweep, GeneratorKind, KRule, SweepConfig};
use dpcert::flat::FlatDoc;
use dpcert::grid::{discretize_point, GridHistogram, GridSpec};
use dpcert::loss::WeightedPoints;
use dpcert::lowdim::{adaptive_select, AdaptiveConfig};
use dpcert::mechanism::PrivacyBudget;
use dpcert::sanitize::{certificate_quantile, certify, run_algorithm1, sample_synthetic, Mode, NoisyRelease, ReleaseConfig};
use dpcert::{Dataset, Error};
use dpcert_cli::{read_table, write_table, ColumnScaling, IngestError};

#[derive(Parser)]
#[command(name = "dpcert", version, about = "Certified differentially private synthetic data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// Privacy parameter ε.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// δ of (ε, δ)-DP; 0 selects pure ε-DP.
    #[arg(long = "delta-dp", global = true, default_value_t = 0.0)]
    delta_dp: f64,
    /// Marginal sparsity s.
    #[arg(long, global = true)]
    s: Option<usize>,
    /// Cells per axis k.
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Exact)]
    mode: ModeArg,
    /// Public data CSV for `--mode public`.
    #[arg(long, global = true)]
    public: Option<PathBuf>,
    /// Failure probability of the certificate.
    #[arg(long = "delta-fail", global = true, default_value_t = 0.1)]
    delta_fail: f64,
    /// Monte-Carlo samples for the noise quantile.
    #[arg(long, global = true, default_value_t = 200)]
    mc: usize,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Main output file (synthetic CSV, sweep CSV).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Certificate or report document.
    #[arg(long, global = true)]
    cert: Option<PathBuf>,
    /// Number of synthetic records (default: input size).
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Public column bounds (`column,min,max`) instead of the data's own range.
    #[arg(long, global = true)]
    bounds: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Exact,
    Public,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GeneratorArg {
    Uniform,
    Clustered,
    Segment,
}

#[derive(Subcommand)]
enum Command {
    /// Release a synthetic dataset with a utility certificate.
    Sanitize {
        input: PathBuf,
        /// Released cell weights (unit-cube centers plus weight).
        #[arg(long = "weights-out")]
        weights_out: Option<PathBuf>,
        /// Noisy marginal vector snapshot.
        #[arg(long = "nu-out")]
        nu_out: Option<PathBuf>,
        /// Also report the L_T noise quantile.
        #[arg(long = "compare-lt")]
        compare_lt: bool,
    },
    /// Recompute the certificate of a released measure from its snapshot.
    Certify {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        nu: PathBuf,
    },
    /// Bracket the utility loss between two datasets.
    Evaluate { a: PathBuf, b: PathBuf },
    /// Utility loss versus n on generated data.
    Sweep {
        /// Comma-separated, increasing sample sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, value_enum, default_value_t = GeneratorArg::Uniform)]
        generator: GeneratorArg,
    },
    /// Low-dimensional release with adaptive choice of the effective dimension.
    Lowdim {
        input: PathBuf,
        #[arg(long = "k-constant", default_value_t = 1.0)]
        k_constant: f64,
        #[arg(long = "cell-constant")]
        cell_constant: Option<f64>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Ingest(IngestError::Format { .. }) => 2,
            CliError::Core(e) | CliError::Ingest(IngestError::Core(e)) => match e {
                Error::InvalidParameter(_) | Error::Mismatch(_) | Error::Capacity { .. } | Error::Domain(_) => 2,
                Error::Solver(_) | Error::Serde(_) => 1,
            },
            CliError::Ingest(IngestError::Io { .. }) | CliError::Io { .. } => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

impl Global {
    fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| usage("--seed is required"))
    }

    fn epsilon(&self) -> Result<f64> {
        self.epsilon.ok_or_else(|| usage("--epsilon is required"))
    }

    fn budget(&self) -> Result<PrivacyBudget> {
        Ok(PrivacyBudget::new(self.epsilon()?, self.delta_dp)?)
    }

    fn release_config(&self, spec: GridSpec) -> Result<ReleaseConfig> {
        let mut cfg = ReleaseConfig::new(spec, self.budget()?, self.seed()?);
        cfg.delta_fail = self.delta_fail;
        cfg.mc_samples = self.mc;
        Ok(cfg)
    }

    /// Scaling from `--bounds`, or from the given tables' own range.
    fn scaling(&self, headers: &[String], rows: &[&Vec<Vec<f64>>]) -> Result<ColumnScaling> {
        match &self.bounds {
            Some(path) => {
                let s = ColumnScaling::from_bounds_file(path, headers)?;
                for table in rows {
                    if let Some((r, c)) = s.first_outside(table) {
                        return Err(usage(format!(
                            "row {} column {} lies outside the public bounds",
                            r + 1,
                            headers[c]
                        )));
                    }
                }
                Ok(s)
            }
            None => Ok(ColumnScaling::observe(rows.iter().flat_map(|t| t.iter()), headers.len())),
        }
    }
}

fn weights_table(measure: &GridHistogram) -> Vec<Vec<f64>> {
    measure
        .iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|(idx, w)| {
            let mut row = measure.center_of(&idx);
            row.push(w);
            row
        })
        .collect()
}

fn synthetic_rows(measure: &GridHistogram, n_out: usize, seed: u64, scaling: &ColumnScaling) -> Result<Vec<Vec<f64>>> {
    let synth: Dataset = sample_synthetic(measure, n_out, seed)?;
    Ok(synth.points().map(|p| scaling.unscale(p)).collect())
}

fn sanitize(g: &Global, input: &Path, weights_out: Option<&Path>, nu_out: Option<&Path>, compare_lt: bool) -> Result<()> {
    let table = read_table(input)?;
    let public_table = match (g.mode, &g.public) {
        (ModeArg::Public, Some(p)) => Some(read_table(p)?),
        (ModeArg::Public, None) => return Err(usage("--mode public needs --public <path>")),
        (ModeArg::Exact, Some(_)) => return Err(usage("--public is only used with --mode public")),
        (ModeArg::Exact, None) => None,
    };
    if let Some(p) = &public_table {
        if p.headers != table.headers {
            return Err(usage("public data must have the same columns as the input"));
        }
    }
    // the public data never widens the private scaling
    let scaling = g.scaling(&table.headers, &[&table.rows])?;
    let data = scaling.apply(&table.rows)?;
    let s = g.s.ok_or_else(|| usage("--s is required"))?;
    let k = g.k.ok_or_else(|| usage("--k is required"))?;
    let spec = GridSpec::new(data.dim(), s, k)?;
    let mut cfg = g.release_config(spec)?;
    cfg.compare_lt = compare_lt;
    let mode = match public_table {
        Some(p) => Mode::Public(p.rows.iter().map(|r| scaling.scale(r)).collect()),
        None => Mode::Exact,
    };
    let bundle = run_algorithm1(&data, &mode, &cfg)?;
    let cert = bundle.certificate.to_json();
    if let Some(path) = &g.cert {
        write_text(path, &cert)?;
    }
    if let Some(path) = &g.out {
        let n_out = g.samples.unwrap_or(data.len());
        let rows = synthetic_rows(&bundle.measure, n_out, cfg.seed, &scaling)?;
        write_table(path, &table.headers, &rows)?;
    }
    if let Some(path) = weights_out {
        let mut headers = table.headers.clone();
        headers.push("weight".into());
        write_table(path, &headers, &weights_table(&bundle.measure))?;
    }
    if let Some(path) = nu_out {
        write_text(path, &bundle.noisy.to_json()?)?;
    }
    print!("{cert}");
    Ok(())
}

fn certify_cmd(g: &Global, weights: &Path, nu: &Path) -> Result<()> {
    let noisy = NoisyRelease::from_json(&read_text(nu)?)?;
    let spec = *noisy.nu.spec();
    let table = read_table(weights)?;
    if table.headers.len() != spec.d + 1 {
        return Err(usage(format!(
            "weights file needs {} coordinate columns and a weight column",
            spec.d
        )));
    }
    let mut measure = GridHistogram::new(spec.k, spec.d)?;
    for row in &table.rows {
        let idx = discretize_point(&row[..spec.d], spec.k)?;
        measure.add(&idx, row[spec.d])?;
    }
    let total = measure.total_mass();
    if (total - 1.0).abs() > 1e-9 {
        return Err(usage(format!("weights sum to {total}, expected 1")));
    }
    let cfg = g.release_config(spec)?;
    let quantile = certificate_quantile(&cfg, noisy.n, cfg.cert_kind)?;
    let cert = certify(&measure, &noisy, &quantile, &cfg)?.to_json();
    if let Some(path) = &g.cert {
        write_text(path, &cert)?;
    }
    print!("{cert}");
    Ok(())
}

fn evaluate_cmd(g: &Global, a: &Path, b: &Path) -> Result<()> {
    let ta = read_table(a)?;
    let tb = read_table(b)?;
    if ta.headers.len() != tb.headers.len() {
        return Err(usage("both files need the same number of columns"));
    }
    let scaling = g.scaling(&ta.headers, &[&ta.rows, &tb.rows])?;
    let da = scaling.apply(&ta.rows)?;
    let db = scaling.apply(&tb.rows)?;
    let s = g.s.ok_or_else(|| usage("--s is required"))?;
    let k = g.k.ok_or_else(|| usage("--k (evaluation resolution) is required"))?;
    let ev = evaluate(&WeightedPoints::from_dataset(&da), &WeightedPoints::from_dataset(&db), s, k)?;
    let mut doc = FlatDoc::new();
    doc.float("lower", ev.lower)
        .float("upper", ev.upper)
        .float("core", ev.bracket.core)
        .float("residual_a", ev.bracket.residual_a)
        .float("residual_b", ev.bracket.residual_b)
        .int("s", s as u64)
        .int("k_eval", k as u64);
    if let Some(e) = ev.exact {
        doc.float("exact", e);
    }
    let text = doc.to_json();
    if let Some(path) = &g.cert {
        write_text(path, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn sweep_cmd(g: &Global, n: Vec<usize>, d: usize, trials: usize, generator: GeneratorArg) -> Result<()> {
    let config = SweepConfig {
        n_values: n,
        d,
        s: g.s.unwrap_or(1),
        k_rule: g.k.map_or(KRule::TheoremOptimal, KRule::Fixed),
        epsilon: g.epsilon()?,
        trials,
        seed: g.seed()?,
        generator: match generator {
            GeneratorArg::Uniform => GeneratorKind::Uniform,
            GeneratorArg::Clustered => GeneratorKind::Clustered { centers: 4, spread: 0.05 },
            GeneratorArg::Segment => GeneratorKind::Segment,
        },
    };
    let rows = rate_sweep(&config)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        w.serialize(row).map_err(|e| usage(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| usage(e.to_string()))?;
    let text = String::from_utf8(bytes).expect("csv output is utf-8");
    match &g.out {
        Some(path) => write_text(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn lowdim_cmd(g: &Global, input: &Path, k_constant: f64, cell_constant: Option<f64>) -> Result<()> {
    let table = read_table(input)?;
    let scaling = g.scaling(&table.headers, &[&table.rows])?;
    let data = scaling.apply(&table.rows)?;
    let seed = g.seed()?;
    let config = AdaptiveConfig {
        k_constant,
        cell_constant,
    };
    let report = adaptive_select(&data, g.epsilon()?, &config, seed)?;
    let text = report.to_json();
    if let Some(path) = &g.cert {
        write_text(path, &text)?;
    }
    if let Some(path) = &g.out {
        let n_out = g.samples.unwrap_or(data.len());
        let rows = synthetic_rows(&report.measure, n_out, seed, &scaling)?;
        write_table(path, &table.headers, &rows)?;
    }
    print!("{text}");
    Ok(())
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("DP_SANITIZE_THREADS") {
        let threads: usize = v
            .parse()
            .ok()
            .filter(|t| *t > 0)
            .ok_or_else(|| usage(format!("DP_SANITIZE_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let g = &cli.global;
    if g.mc == 0 {
        return Err(usage("--mc must be at least 1"));
    }
    if g.samples == Some(0) {
        return Err(usage("--samples must be at least 1"));
    }
    match cli.command {
        Command::Sanitize {
            input,
            weights_out,
            nu_out,
            compare_lt,
        } => sanitize(g, &input, weights_out.as_deref(), nu_out.as_deref(), compare_lt),
        Command::Certify { weights, nu } => certify_cmd(g, &weights, &nu),
        Command::Evaluate { a, b } => evaluate_cmd(g, &a, &b),
        Command::Sweep {
            n,
            d,
            trials,
            generator,
        } => sweep_cmd(g, n, d, trials, generator),
        Command::Lowdim {
            input,
            k_constant,
            cell_constant,
        } => lowdim_cmd(g, &input, k_constant, cell_constant),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dpcert: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
