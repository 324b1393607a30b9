//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed; the
//! process exits non-zero if any hard criterion fails.

use std::path::Path;
use std::process::Command as Proc;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weighted_minnorm::estimators::{weighted_minnorm, SolverPath};
use weighted_minnorm::interpolation::{
    fit_interpolant, rmse, BuiltinTarget, InterpolationProblem, Method,
};
use weighted_minnorm::model::{cr_bounds, GridConfig, Spectrum};
use weighted_minnorm::montecarlo::{concentration_check, empirical_risk, McConfig};
use weighted_minnorm::risk::{
    asymptotic_bound, concentration_bound, lowest_risks, risk_over_closed, risk_trace_over,
    risk_trace_under, risk_under_closed,
};

type Criterion = (&'static str, fn() -> Check);

enum Outcome {
    Pass(String),
    Fail(String),
    /// Failed a performance target only; reported, not fatal.
    SoftFail(String),
}

type Check = Result<Outcome, String>;

fn grid(d: usize, n: usize, p: usize) -> GridConfig {
    GridConfig::classify(d, n, p).expect("valid grid")
}

fn spec(d: usize, r: f64) -> Spectrum {
    Spectrum::new(d, r).expect("valid spectrum")
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn closed_vs_trace() -> Check {
    let start = Instant::now();
    let (mut over, mut under, mut count) = (0.0f64, 0.0f64, 0);
    for d in [8, 16, 32, 64] {
        for tau in [2, 4, 8] {
            let n = d / tau;
            for r in [0.0, 0.3, 0.5, 1.0, 1.5, 2.0] {
                let s = spec(d, r);
                for l in [1, 2, 4].into_iter().filter(|&l| l <= tau) {
                    let g = grid(d, n, l * n);
                    for q in [0.0, 0.5, 1.0, 2.0] {
                        let a = risk_over_closed(&s, &g, q).map_err(|e| e.to_string())?.risk;
                        let b = risk_trace_over(&s, &g, q).map_err(|e| e.to_string())?.risk;
                        over = over.max((a - b).abs());
                        count += 1;
                    }
                }
                for p in 1..=n {
                    let g = grid(d, n, p);
                    let a = risk_under_closed(&s, &g).map_err(|e| e.to_string())?;
                    let b = risk_trace_under(&s, &g).map_err(|e| e.to_string())?;
                    under = under.max((a - b).abs());
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(verdict(
        over <= 1e-9 && under <= 1e-9 && secs < 30.0,
        format!("{count} over configs, max over diff {over:.2e}, max under diff {under:.2e}, {secs:.2}s"),
    ))
}

fn special_cases() -> Check {
    let (mut plain, mut full) = (0.0f64, 0.0f64);
    for d in [8, 16, 32, 64] {
        for tau in [1, 2, 4, 8] {
            let n = d / tau;
            for r in [0.0, 0.3, 0.5, 1.0, 1.5, 2.0] {
                let s = spec(d, r);
                let risk0 = risk_over_closed(&s, &grid(d, n, d), 0.0).map_err(|e| e.to_string())?.risk;
                plain = plain.max((risk0 - (1.0 - n as f64 / d as f64)).abs());
                if tau == 1 {
                    for q in [0.0, 0.5, 1.0, 2.0] {
                        let g = grid(d, d, d);
                        let a = risk_over_closed(&s, &g, q).map_err(|e| e.to_string())?.risk;
                        let b = risk_under_closed(&s, &g).map_err(|e| e.to_string())?;
                        full = full.max(a.abs()).max(b.abs());
                    }
                }
            }
        }
    }
    Ok(verdict(
        plain <= 1e-14 && full <= 1e-12,
        format!("max |risk_0(p=D) - (1-n/D)| {plain:.2e}, max |risk(n=p=D)| {full:.2e}"),
    ))
}

fn boundary_identities() -> Check {
    let (mut boundary, mut q1p) = (0.0f64, 0.0f64);
    for d in [8, 16, 32, 64] {
        for tau in [1, 2, 4, 8] {
            let n = d / tau;
            for r in [0.0, 0.3, 0.5, 1.0, 1.5, 2.0] {
                let s = spec(d, r);
                let g = grid(d, n, n);
                let under = risk_under_closed(&s, &g).map_err(|e| e.to_string())?;
                for q in [0.0, 0.5, 1.0, 2.0] {
                    let over = risk_over_closed(&s, &g, q).map_err(|e| e.to_string())?.risk;
                    boundary = boundary.max((under - over).abs());
                }
                for l in [1, 2, 4].into_iter().filter(|&l| l <= tau) {
                    let b = risk_over_closed(&s, &grid(d, n, l * n), r).map_err(|e| e.to_string())?;
                    q1p = q1p.max((b.q_q1 - b.p_q).abs());
                }
            }
        }
    }
    Ok(verdict(
        boundary <= 1e-12 && q1p <= 1e-10,
        format!("max boundary gap {boundary:.2e}, max |Q1 - P| at q=r {q1p:.2e}"),
    ))
}

fn rate_bound() -> Check {
    let start = Instant::now();
    let (mut min_slack, mut count) = (f64::INFINITY, 0);
    for r in [0.6, 0.75, 1.0, 1.5] {
        for l in [2, 4] {
            for n in [8, 16, 32] {
                for tau in [2 * l, 4 * l] {
                    let d = tau * n;
                    let s = spec(d, r);
                    let g = grid(d, n, l * n);
                    let risk = risk_over_closed(&s, &g, r).map_err(|e| e.to_string())?.risk;
                    let b = asymptotic_bound(&s, &g).map_err(|e| e.to_string())?;
                    min_slack = min_slack.min(b.bound - risk);
                    count += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(verdict(
        min_slack >= 0.0 && secs < 10.0,
        format!("{count} configs, min slack {min_slack:.3e}, {secs:.2}s"),
    ))
}

fn cr_sandwich() -> Check {
    let mut worst = Vec::new();
    let mut ok = true;
    for r in [0.6, 1.0, 2.0] {
        for d in [4, 64, 4096] {
            let c = spec(d, r).c_r();
            let (lo, hi) = cr_bounds(d, r).map_err(|e| e.to_string())?;
            ok &= lo <= c && c <= hi;
            worst.push((c - lo).min(hi - c));
        }
    }
    let margin = worst.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(verdict(ok, format!("9 configs, smallest margin {margin:.3e}")))
}

fn lower_bound() -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    for r in [1.0, 1.5, 2.0] {
        let d = 64;
        let s = spec(d, r);
        for n in [4, 8] {
            let risks: Vec<f64> = (1..=n)
                .map(|p| risk_under_closed(&s, &grid(d, n, p)))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            let decreasing = risks.windows(2).all(|w| w[1] < w[0]);
            let lr = lowest_risks(&s, n, r).map_err(|e| e.to_string())?;
            let margin = lr.under_star - lr.over_star;
            ok &= decreasing && margin > 1e-12;
            notes.push(margin);
        }
    }
    let m = notes.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(verdict(
        ok,
        format!("under-regime risk strictly decreasing in p; smallest margin below 2 c_r tail {m:.3e}"),
    ))
}

fn monte_carlo() -> Check {
    let start = Instant::now();
    let (d, n) = (256, 16);
    let mc = McConfig::new(500, 20240601);
    let mut worst = (0.0f64, 0.0, 0);
    for r in [0.3, 0.5, 1.0] {
        let s = spec(d, r);
        for p in [4, 8, 16, 32, 64, 128, 256] {
            let g = grid(d, n, p);
            let theory = if p <= n {
                risk_under_closed(&s, &g)
            } else {
                risk_over_closed(&s, &g, r).map(|b| b.risk)
            }
            .map_err(|e| e.to_string())?;
            let est = empirical_risk(&s, &g, r, &mc).map_err(|e| e.to_string())?;
            let rel = (est.mean - theory).abs() / theory;
            if rel > worst.0 {
                worst = (rel, r, p);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(verdict(
        worst.0 <= 0.05 && secs < 120.0,
        format!(
            "21 configs, worst relative gap {:.4} at r=q={} p={}, {secs:.1}s",
            worst.0, worst.1, worst.2
        ),
    ))
}

fn concentration() -> Check {
    let s = spec(256, 1.0);
    let g = grid(256, 16, 32);
    let (tq, _) = concentration_bound(1.0, 1.0, 1.0).map_err(|e| e.to_string())?;
    let expected = 4.0 * (10.0f64 / 3.0).sqrt();
    let ts: Vec<f64> = [0.5, 1.0, 2.0].iter().map(|m| m * tq).collect();
    let rows = concentration_check(&s, &g, 1.0, &ts, &McConfig::new(2000, 7)).map_err(|e| e.to_string())?;
    let ok = (tq - expected).abs() < 1e-12 && rows.iter().all(|r| r.dominated());
    let detail: Vec<String> = rows
        .iter()
        .map(|r| format!("t={:.2}: emp {:.4} <= bound {:.4}", r.t, r.empirical_tail, r.bound_tail))
        .collect();
    Ok(verdict(ok, format!("T_q={tq:.4}; {}", detail.join("; "))))
}

fn random_y(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn rel_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

fn estimator_paths() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(1..=24usize);
        let l = rng.random_range(1..=6usize);
        let tau = l * rng.random_range(1..=3usize);
        let d = tau * n;
        let r = rng.random_range(0.0..2.0);
        let q = rng.random_range(0.0..2.0);
        let s = spec(d, r);
        let g = grid(d, n, l * n);
        let y = random_y(&mut rng, n);
        let fast = weighted_minnorm(&y, &s, &g, q, SolverPath::CirculantFft).map_err(|e| e.to_string())?;
        let dense = weighted_minnorm(&y, &s, &g, q, SolverPath::DenseSvd).map_err(|e| e.to_string())?;
        worst = worst.max(rel_diff(&fast.theta_hat, &dense.theta_hat));
    }
    if worst > 1e-8 {
        return Ok(Outcome::Fail(format!("50 problems, worst relative gap {worst:.2e}")));
    }

    let (d, n, p) = (4096, 256, 1024);
    let s = spec(d, 1.0);
    let g = grid(d, n, p);
    let y = random_y(&mut rng, n);
    let time = |path| -> Result<(Duration, Vec<Complex64>), String> {
        let t = Instant::now();
        let fit = weighted_minnorm(&y, &s, &g, 1.0, path).map_err(|e| e.to_string())?;
        Ok((t.elapsed(), fit.theta_hat))
    };
    let (fast_t, fast) = time(SolverPath::CirculantFft)?;
    let (dense_t, dense) = time(SolverPath::DenseSvd)?;
    let speedup = dense_t.as_secs_f64() / fast_t.as_secs_f64().max(1e-9);
    let detail = format!(
        "50 problems, worst relative gap {worst:.2e}; D=4096 n=256 p=1024: fast {:.2}ms, dense {:.0}ms, {speedup:.0}x, gap {:.2e}",
        fast_t.as_secs_f64() * 1e3,
        dense_t.as_secs_f64() * 1e3,
        rel_diff(&fast, &dense)
    );
    Ok(if speedup >= 10.0 {
        Outcome::Pass(detail)
    } else {
        Outcome::SoftFail(detail)
    })
}

fn interpolation() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    let cases = [
        (BuiltinTarget::Cubic1d, InterpolationProblem::builtin(BuiltinTarget::Cubic1d, 15, 1000, 1000, 2.0), 2000),
        (BuiltinTarget::Cos2d, InterpolationProblem::builtin(BuiltinTarget::Cos2d, 10, 41, 100, 2.0), 80),
    ];
    for (target, problem, m) in cases {
        let pts = problem.domain.evaluation_grid(m, target.dimension());
        let w = fit_interpolant(&problem, Method::WeightedMinNorm).map_err(|e| e.to_string())?;
        let pl = fit_interpolant(&problem, Method::PlainMinNorm).map_err(|e| e.to_string())?;
        let (ew, ep) = (rmse(&w, target, &pts), rmse(&pl, target, &pts));
        let weights = problem.weights();
        let (nw, np) = (w.weighted_norm(&weights, problem.q), pl.weighted_norm(&weights, problem.q));
        ok &= ew < ep && w.residual <= 1e-8 && pl.residual <= 1e-8 && nw < np;
        parts.push(format!(
            "{}: rmse {ew:.4} vs {ep:.4}, residuals {:.1e}/{:.1e}, weighted norm {nw:.3e} vs {np:.3e}",
            target.name(),
            w.residual,
            pl.residual
        ));
    }
    Ok(verdict(ok, parts.join("; ")))
}

const DETERMINISM_SPECS: [(&str, &str); 6] = [
    (
        "risk-curve",
        "command = \"risk-curve\"\n[grid]\ndim = 128\nn = 16\nr_list = [0.5, 1.0]\nq_list = [0.0, 1.0]\np_rule = \"all\"\n",
    ),
    (
        "mc-risk",
        "command = \"mc-risk\"\n[grid]\ndim = 64\nn = 8\np_list = [4, 8, 12, 16, 32, 64]\nr_list = [1.0]\nq_rule = \"match_r\"\n[mc]\ntrials = 60\nseed = 11\n",
    ),
    (
        "heatmap",
        "command = \"heatmap\"\n[grid]\ndim = 64\nn = 8\nr_list = [0.5, 1.0, 1.5]\nq_rule = \"match_r\"\n",
    ),
    (
        "bound-check",
        "command = \"bound-check\"\n[grid]\nn_list = [8, 16]\nl_list = [1, 2, 4]\ntau_multiples = [2]\nr_list = [0.4, 1.0]\nq_rule = \"match_r\"\n",
    ),
    (
        "interp",
        "command = \"interp\"\n[interp]\ntarget = \"stage1d\"\nn_axis = 15\np_axis = 61\ndim_axis = 61\nq = 1.5\nnoise_sigma = 0.05\nnoise_seed = 3\neval_points = 50\n",
    ),
    (
        "concentration",
        "command = \"concentration\"\n[grid]\ndim = 64\nn = 8\np_list = [16, 32]\nr_list = [1.0]\nq_rule = \"match_r\"\n[mc]\ntrials = 200\nseed = 5\n[concentration]\nt_multiples = [0.5, 1.0]\n",
    ),
];

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            for (name, bytes) in snapshot(&p) {
                out.push((format!("{}/{name}", p.file_name().unwrap().to_string_lossy()), bytes));
            }
        } else {
            out.push((p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()));
        }
    }
    out
}

fn determinism() -> Check {
    let bin = env!("CARGO_BIN_EXE_wmn");
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut mismatched = Vec::new();
    for (cmd, toml) in DETERMINISM_SPECS {
        let cfg = root.path().join(format!("{cmd}.toml"));
        std::fs::write(&cfg, toml).map_err(|e| e.to_string())?;
        let mut runs = Vec::new();
        for (i, threads) in ["1", "4", "4"].iter().enumerate() {
            let dir = root.path().join(format!("{cmd}-{i}"));
            std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
            let out = dir.join(if cmd == "interp" { "out".to_string() } else { format!("{cmd}.csv") });
            let status = Proc::new(bin)
                .arg(cmd)
                .arg("--config")
                .arg(&cfg)
                .arg("--out")
                .arg(&out)
                .args(["--threads", threads])
                .output()
                .map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Ok(Outcome::Fail(format!(
                    "{cmd} exited with {}: {}",
                    status.status,
                    String::from_utf8_lossy(&status.stderr)
                )));
            }
            runs.push(snapshot(&dir));
        }
        if runs.iter().any(|r| r != &runs[0] || r.is_empty()) {
            mismatched.push(cmd);
        }
    }
    Ok(verdict(
        mismatched.is_empty(),
        if mismatched.is_empty() {
            "6 commands x 3 runs (1, 4, 4 threads) byte-identical".to_string()
        } else {
            format!("differing outputs: {}", mismatched.join(", "))
        },
    ))
}

fn main() {
    // `cargo test -- --list` and filters come through here too
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let checks: [Criterion; 11] = [
        ("closed-form risk matches trace form", closed_vs_trace),
        ("special cases of the risk", special_cases),
        ("regime boundary and proof identities", boundary_identities),
        ("rate bound dominates the risk", rate_bound),
        ("c_r sandwich", cr_sandwich),
        ("lower-bound comparison", lower_bound),
        ("Monte Carlo agrees with theory", monte_carlo),
        ("concentration tail domination", concentration),
        ("fast and dense estimators agree", estimator_paths),
        ("weighted interpolation beats plain", interpolation),
        ("CLI outputs are deterministic", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let line = match check() {
            Ok(Outcome::Pass(d)) => format!("PASS [{:>2}] {name}: {d}", i + 1),
            Ok(Outcome::SoftFail(d)) => format!("WARN [{:>2}] {name} (performance target missed): {d}", i + 1),
            Ok(Outcome::Fail(d)) => {
                failed += 1;
                format!("FAIL [{:>2}] {name}: {d}", i + 1)
            }
            Err(e) => {
                failed += 1;
                format!("FAIL [{:>2}] {name}: error: {e}", i + 1)
            }
        };
        println!("{line}");
    }
    println!("acceptance: {} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
