//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use dpcert::eval::{certificate_curve, generate_data, rate_sweep, slope_fit, GeneratorKind, KRule, SweepConfig};
use dpcert::grid::{grid_centers, GridSpec};
use dpcert::haar::{verify_phi_lemma, HaarOperator};
use dpcert::loss::{proxy_lt, proxy_ut, utility_loss_exact, w1_exact, WeightedPoints};
use dpcert::lowdim::{adaptive_select, lowdim_release, project_l1_ball, AdaptiveConfig};
use dpcert::lp::{lp_solve, LpProblem, LpStatus};
use dpcert::mechanism::{sample_tlap, truncation_bound, PrivacyBudget};
use dpcert::query::{brute_force_sensitivity, sensitivity, MarginalBlockVector, QueryOperator};
use dpcert::sanitize::{run_algorithm1, Mode, ReleaseConfig};
use dpcert::{Dataset, Streams};

mod common;
use common::vertex_oracle;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ceil_log2(m: usize) -> u32 {
    if m <= 1 {
        0
    } else {
        usize::BITS - (m - 1).leading_zeros()
    }
}

fn haar_lemma() -> Outcome {
    let mut worst_inv: f64 = 0.0;
    let mut cached = None;
    for m in 1..=4096usize {
        let op = HaarOperator::for_length(m).unwrap();
        let report = match cached {
            Some((order, r)) if order == op.order() => r,
            _ => {
                let r = verify_phi_lemma(&op).unwrap();
                cached = Some((op.order(), r));
                r
            }
        };
        let levels = f64::from(ceil_log2(m) + 1);
        worst_inv = worst_inv.max(report.inv_col_norm_max);
        if report.inv_col_norm_max > 1.0 + 1e-10
            || report.partial_row_sum_l1_max > levels.powi(2) + 1e-10
            || report.partial_row_sum_l2_max > levels.powf(1.5) + 1e-10
        {
            return outcome(false, format!("m={m}: {report:?}"));
        }
    }
    outcome(true, format!("m = 1..4096, max inverse column norm {worst_inv}"))
}

fn random_probability_blocks(spec: GridSpec, rng: &mut ChaCha8Rng) -> MarginalBlockVector {
    let len = spec.block_len().unwrap();
    let mut data = Vec::with_capacity(spec.vector_len().unwrap());
    for _ in 0..spec.num_blocks() {
        let mut w: Vec<f64> = (0..len).map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen() }).collect();
        if w.iter().all(|&x| x == 0.0) {
            w[rng.gen_range(0..len)] = 1.0;
        }
        let total: f64 = w.iter().sum();
        data.extend(w.iter().map(|x| x / total));
    }
    MarginalBlockVector::from_vec(spec, data).unwrap()
}

fn proxy_domination() -> Outcome {
    let mut r = rng(2);
    let (mut gap_lt, mut gap_ut): (f64, f64) = (f64::INFINITY, 0.0);
    for case in 0..500 {
        let d = r.gen_range(1..=3);
        let s = r.gen_range(1..=d.min(2));
        let k = r.gen_range(1..=3);
        let spec = GridSpec::new(d, s, k).unwrap();
        let op = QueryOperator::new(spec).unwrap();
        let v = random_probability_blocks(spec, &mut r);
        let u = random_probability_blocks(spec, &mut r);
        let mut w1: f64 = 0.0;
        for j in 0..spec.num_blocks() {
            let p = v.block_histogram(j, op.snake()).unwrap();
            let q = u.block_histogram(j, op.snake()).unwrap();
            w1 = w1.max(w1_exact(&p, &q).unwrap());
        }
        let lt = proxy_lt(&v, &u).unwrap();
        let ut = proxy_ut(&v, &u).unwrap();
        gap_lt = gap_lt.min(lt - w1);
        gap_ut = gap_ut.max((ut - w1).abs());
        if w1 > lt + 1e-9 || (ut - w1).abs() > 1e-7 {
            return outcome(false, format!("case {case} (d={d}, s={s}, k={k}): W1={w1}, L_T={lt}, U_T={ut}"));
        }
    }
    outcome(true, format!("500 pairs; min L_T - W1 = {gap_lt:.3e}, max |U_T - W1| = {gap_ut:.3e}"))
}

fn certificate_coverage() -> Outcome {
    let k = 8;
    let data = generate_data(GeneratorKind::Clustered { centers: 5, spread: 0.1 }, 500, 2, 3)
        .unwrap()
        .snap_to_grid(k);
    let spec = GridSpec::new(2, 1, k).unwrap();
    let truth = WeightedPoints::from_dataset(&data);
    let covered: Vec<bool> = (0..500u64)
        .into_par_iter()
        .map(|seed| {
            let mut cfg = ReleaseConfig::new(spec, PrivacyBudget::pure(1.0).unwrap(), seed);
            cfg.delta_fail = 0.1;
            cfg.mc_samples = 200;
            let bundle = run_algorithm1(&data, &Mode::Exact, &cfg).unwrap();
            let released = WeightedPoints::from_histogram(&bundle.measure).unwrap();
            let loss = utility_loss_exact(&truth, &released, 1).unwrap().expect("s = 1 loss is exact");
            loss <= bundle.certificate.total
        })
        .collect();
    let rate = covered.iter().filter(|&&c| c).count() as f64 / covered.len() as f64;
    outcome(rate >= 0.87, format!("coverage {rate:.3} over 500 runs (need >= 0.87)"))
}

fn rate_reproduction() -> Outcome {
    let config = SweepConfig {
        n_values: (8..=14).map(|e| 1usize << e).collect(),
        d: 2,
        s: 1,
        k_rule: KRule::TheoremOptimal,
        epsilon: 1.0,
        trials: 10,
        seed: 4,
        generator: GeneratorKind::Uniform,
    };
    let rows = rate_sweep(&config).unwrap();
    let slope = slope_fit(&rows).unwrap();
    let losses: Vec<String> = rows.iter().map(|r| format!("{}:{:.4}", r.n, r.mean_loss)).collect();
    outcome(
        (-1.3..=-0.7).contains(&slope),
        format!("slope {slope:.3} in [-1.3, -0.7]; mean loss by n {}", losses.join(" ")),
    )
}

fn sensitivity_oracle() -> Outcome {
    let mut r = rng(5);
    let mut cases = 0;
    for d in 1..=3usize {
        for s in 1..=d.min(2) {
            for k in 2..=3usize {
                for n in [1usize, 2, 5, 10] {
                    let spec = GridSpec::new(d, s, k).unwrap();
                    let centers = grid_centers(k, d).unwrap();
                    let rows: Vec<Vec<f64>> = (0..n).map(|_| centers[r.gen_range(0..centers.len())].clone()).collect();
                    let data = Dataset::new(rows).unwrap();
                    let brute = brute_force_sensitivity(&data, &spec, &centers).unwrap();
                    let bound = sensitivity(&spec, n).unwrap();
                    cases += 1;
                    if brute > bound + 1e-12 || (brute - bound).abs() > 1e-12 {
                        return outcome(false, format!("d={d} s={s} k={k} n={n}: brute {brute} vs 2K/n {bound}"));
                    }
                }
            }
        }
    }
    outcome(true, format!("{cases} configurations, bound attained in each"))
}

fn l1_projection() -> Outcome {
    let p = project_l1_ball(&[0.8, 0.6], 1.0).unwrap();
    let example = (p[0] - 0.6).abs() <= 1e-15 && (p[1] - 0.4).abs() <= 1e-15;
    if !example {
        return outcome(false, format!("(0.8, 0.6) -> {p:?}"));
    }
    let mut r = rng(6);
    for case in 0..100 {
        let n = r.gen_range(1..=8);
        let x: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
        let p = project_l1_ball(&x, 1.0).unwrap();
        let dist = |y: &[f64]| x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let dp = dist(&p);
        if p.iter().map(|v| v.abs()).sum::<f64>() > 1.0 + 1e-12 {
            return outcome(false, format!("case {case}: projection leaves the ball"));
        }
        for _ in 0..1000 {
            let raw: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
            let norm: f64 = raw.iter().map(|v| v.abs()).sum();
            let radius: f64 = r.gen();
            let probe: Vec<f64> = raw.iter().map(|v| v / norm.max(1e-300) * radius).collect();
            if dist(&probe) < dp - 1e-12 {
                return outcome(false, format!("case {case}: probe beats the projection"));
            }
        }
    }
    outcome(true, format!("example -> ({}, {}); 100 inputs x 1000 probes", p[0], p[1]))
}

fn sparse_recovery() -> Outcome {
    let ks = [2usize, 4, 8, 16];
    let results: Vec<(f64, f64)> = (0..200u64)
        .into_par_iter()
        .map(|run| {
            let data = generate_data(GeneratorKind::Segment, 10_000, 3, 700 + run).unwrap();
            let k = ks[run as usize % ks.len()];
            let rel = lowdim_release(&data, k, 1.0, &Streams::new(run)).unwrap();
            let lhs: f64 = rel.nu.iter().zip(&rel.v).map(|(a, b)| (a - b).abs()).sum();
            let eta_inf = rel.eta.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            (lhs, 16.0 * rel.support as f64 * eta_inf)
        })
        .collect();
    let failures = results.iter().filter(|(l, r)| l > r).count();
    let worst = results.iter().map(|(l, r)| l / r).fold(0.0f64, f64::max);
    outcome(failures == 0, format!("200 runs, {failures} violations, max lhs/rhs {worst:.3}"))
}

fn adaptive_selection() -> Outcome {
    let config = AdaptiveConfig::default();
    let segment: Vec<usize> = (0..10u64)
        .map(|t| {
            let data = generate_data(GeneratorKind::Segment, 10_000, 3, 800 + t).unwrap();
            adaptive_select(&data, 5.0, &config, t).unwrap().s_opt
        })
        .collect();
    let point: Vec<usize> = (0..10u64)
        .map(|t| {
            let data = Dataset::new(vec![vec![0.3, 0.6, 0.1]; 10_000]).unwrap();
            adaptive_select(&data, 5.0, &config, 900 + t).unwrap().s_opt
        })
        .collect();
    let seg_hits = segment.iter().filter(|&&s| s == 1).count();
    let point_hits = point.iter().filter(|&&s| s == 0).count();
    outcome(
        seg_hits >= 7 && point_hits >= 9,
        format!(
            "segment s_opt=1 in {seg_hits}/10 (need 7) {segment:?}; point mass s_opt=0 in {point_hits}/10 (need 9) {point:?}"
        ),
    )
}

fn property_suites() -> Outcome {
    let mut r = rng(9);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let d = r.gen_range(1..=3);
        let s = r.gen_range(1..=d.min(2));
        let spec = GridSpec::new(d, s, r.gen_range(1..=3)).unwrap();
        let len = spec.vector_len().unwrap();
        let mut vec = || MarginalBlockVector::from_vec(spec, (0..len).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap();
        let (a, b, c) = (vec(), vec(), vec());
        let zero = MarginalBlockVector::zeros(spec).unwrap();
        let scale = r.gen_range(-3.0..3.0);
        for f in [proxy_lt, proxy_ut] {
            let (ab, bc, ac) = (f(&a, &b).unwrap(), f(&b, &c).unwrap(), f(&a, &c).unwrap());
            worst = worst.max(ac - ab - bc);
            worst = worst.max((f(&a.add(&c).unwrap(), &b.add(&c).unwrap()).unwrap() - ab).abs());
            let base = f(&zero, &a).unwrap();
            worst = worst.max((f(&zero, &a.scale(scale)).unwrap() - scale.abs() * base).abs());
        }
    }
    if worst > 1e-9 {
        return outcome(false, format!("proxy property violated by {worst:e}"));
    }

    let mut lp_worst: f64 = 0.0;
    for case in 0..200 {
        let n = r.gen_range(1..=3);
        let m = r.gen_range(1..=4);
        let c: Vec<f64> = (0..n).map(|_| f64::from(r.gen_range(-5..=5))).collect();
        let a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| f64::from(r.gen_range(-4..=4))).collect()).collect();
        let b: Vec<f64> = (0..m).map(|_| f64::from(r.gen_range(-3..=12))).collect();
        let mut lp = LpProblem::new(n);
        lp.objective = c.clone();
        for (row, &rhs) in a.iter().zip(&b) {
            lp.add_le(row.iter().copied().enumerate().collect(), rhs);
        }
        for j in 0..n {
            lp.set_bounds(j, 0.0, 10.0);
        }
        let sol = lp_solve(&lp).unwrap();
        let agree = match vertex_oracle(&c, &a, &b) {
            None => sol.status == LpStatus::Infeasible,
            Some(best) => {
                lp_worst = lp_worst.max((sol.objective - best).abs());
                sol.status == LpStatus::Optimal && (sol.objective - best).abs() <= 1e-8
            }
        };
        if !agree {
            return outcome(false, format!("LP case {case} disagrees with vertex enumeration"));
        }
    }

    let runs: Vec<Vec<u8>> = (0..2).map(|_| probe_in_child()).collect();
    if runs[0].is_empty() || runs[0] != runs[1] {
        return outcome(false, "two process runs produced different bytes");
    }
    outcome(
        true,
        format!(
            "proxy worst {worst:.1e}; 200 LPs, worst objective gap {lp_worst:.1e}; {} identical bytes across processes",
            runs[0].len()
        ),
    )
}

fn probe_in_child() -> Vec<u8> {
    let exe = std::env::current_exe().unwrap();
    let out = Command::new(exe).arg("--determinism-probe").output().unwrap();
    assert!(out.status.success(), "probe failed: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

/// Seeded release, low-dimensional report and sweep, written to stdout.
fn determinism_probe() {
    let data = generate_data(GeneratorKind::Clustered { centers: 3, spread: 0.1 }, 300, 3, 17).unwrap();
    let spec = GridSpec::new(3, 2, 4).unwrap();
    let cfg = ReleaseConfig::new(spec, PrivacyBudget::new(1.0, 1e-3).unwrap(), 17);
    let bundle = run_algorithm1(&data, &Mode::Exact, &cfg).unwrap();
    println!("{}", bundle.certificate.to_json());
    for (lin, w) in bundle.measure.iter_linear() {
        println!("{lin} {w:?}");
    }
    println!("{}", adaptive_select(&data, 5.0, &AdaptiveConfig::default(), 17).unwrap().to_json());
    let sweep = SweepConfig {
        n_values: vec![64, 128],
        d: 2,
        s: 1,
        k_rule: KRule::TheoremOptimal,
        epsilon: 1.0,
        trials: 4,
        seed: 17,
        generator: GeneratorKind::Uniform,
    };
    for row in rate_sweep(&sweep).unwrap() {
        println!("{row:?}");
    }
}

fn truncated_laplace() -> Outcome {
    let (lambda, eps, delta) = (1.0, 1.0, 0.1);
    let a = truncation_bound(lambda, eps, delta);
    let closed = 1.0 + (std::f64::consts::E - 1.0) / 0.2;
    if (a - closed).abs() > 1e-9 {
        return outcome(false, format!("A = {a}, closed form {closed}"));
    }
    let mut r = rng(10);
    let mut widest: f64 = 0.0;
    for (lam, e, dl) in [(1.0, 1.0, 0.1), (0.01, 0.5, 1e-6), (3.0, 4.0, 0.5)] {
        let bound = truncation_bound(lam, e, dl);
        for _ in 0..100_000 {
            let x = sample_tlap(lam, e, dl, &mut r).unwrap();
            if x.abs() > bound {
                return outcome(false, format!("sample {x} outside [-{bound}, {bound}]"));
            }
            widest = widest.max(x.abs() / bound);
        }
    }
    outcome(true, format!("A = {a:.12}; 3 x 10^5 samples, max |x|/A = {widest:.4}"))
}

fn figure_shape() -> Outcome {
    let kind = GeneratorKind::Clustered { centers: 4, spread: 0.08 };
    let data = generate_data(kind, 400, 2, 21).unwrap();
    let public = generate_data(kind, 200, 2, 22).unwrap();
    let curve = certificate_curve(&data, &public, 1, &[2, 4, 8, 16], 1.0, 32, 200, 23).unwrap();
    let bad: Vec<usize> = curve
        .iter()
        .filter(|p| !(p.lower <= p.measured + 1e-12 && p.measured <= p.certificate))
        .map(|p| p.k)
        .collect();
    let shape: Vec<String> = curve
        .iter()
        .map(|p| format!("k={} lb={:.4} loss={:.4} cert={:.4} public={:.4}", p.k, p.lower, p.measured, p.certificate, p.public_baseline))
        .collect();
    outcome(bad.is_empty(), format!("{}; violations at k {bad:?}", shape.join(" | ")))
}

fn main() {
    if std::env::args().any(|a| a == "--determinism-probe") {
        determinism_probe();
        return;
    }
    let criteria: [(&str, &str, fn() -> Outcome, Duration); 11] = [
        ("1", "Haar lemma", haar_lemma, Duration::from_secs(60)),
        ("2", "proxy domination and duality", proxy_domination, Duration::from_secs(300)),
        ("3", "certificate coverage", certificate_coverage, Duration::from_secs(900)),
        ("4", "rate reproduction", rate_reproduction, Duration::from_secs(1200)),
        ("5", "sensitivity oracle", sensitivity_oracle, Duration::from_secs(60)),
        ("6", "l1 projection", l1_projection, Duration::from_secs(60)),
        ("7", "sparse-recovery inequality", sparse_recovery, Duration::from_secs(600)),
        ("8", "adaptive dimension selection", adaptive_selection, Duration::from_secs(600)),
        ("9", "property suites and determinism", property_suites, Duration::from_secs(300)),
        ("10", "truncated Laplace support", truncated_laplace, Duration::from_secs(60)),
        ("fig", "certificate curve ordering", figure_shape, Duration::from_secs(600)),
    ];
    let mut failed = Vec::new();
    for (id, name, check, budget) in criteria {
        let start = Instant::now();
        let mut result = check();
        let elapsed = start.elapsed();
        if elapsed > budget {
            result.pass = false;
            result.detail = format!("{} [over time budget {budget:?}]", result.detail);
        }
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {id} ({name}) [{:.1}s]: {}", elapsed.as_secs_f64(), result.detail);
        if !result.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
