//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so every line is printed even when
//! criteria fail; the process exits nonzero if any criterion is red.
//! `SHOCKPINN_ACCEPTANCE=5,7` restricts a development run to the listed
//! criteria. Tolerances do not depend on it.

mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shockpinn::analysis::{load_field_csv, predict_stitched};
use shockpinn::config::ExperimentConfig;
use shockpinn::experiment::{run, RunReport, Setup};
use shockpinn::geometry::Polygon;
use shockpinn::loss::{pinn_loss, xpinn_loss, LossWeights, Parallelism, COMPONENTS};
use shockpinn::network::{forward, load_checkpoint, stitched_forward, Indicator, NetworkParams};
use shockpinn::oracles::ObliqueShockCase;
use shockpinn::physics::GAMMA;
use shockpinn::selftest;

const GRADIENT_BUDGET: Duration = Duration::from_secs(60);
const SMOOTH_BUDGET: Duration = Duration::from_secs(15 * 60);
const SMOOTH_TOL: f64 = 5e-2;
const EXPANSION_TOL: f64 = 2e-2;
/// Published relative L2 density error for the expansion wave with
/// adaptive activations; reported as a ratio, not required.
const EXPANSION_PUBLISHED_RHO: f64 = 6.5783e-3;
const PLATEAU_TOL: f64 = 5e-2;
/// Distance below the shock line where the downstream plateau starts.
const PLATEAU_OFFSET: f64 = 0.1;
const SLICE_POINTS: usize = 101;
/// Total variation may exceed the net drop by this factor.
const SLICE_TV_FACTOR: f64 = 1.2;
/// Fraction of the exact density jump the net drop must reach.
const SLICE_DROP_FRACTION: f64 = 0.5;
const EQUIVALENCE_CASES: u64 = 20;
const DW_ADAM: usize = 1000;
const JUMP_TOL: f64 = 1e-2;
const BOW_ADAM: usize = 300;
const BOW_LBFGS: usize = 100;
const WALL_SLIP_TOL: f64 = 5e-2;

type Verdict = Result<(bool, String), String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn run_preset(name: &str, overrides: &[String], out: &Path) -> Result<RunReport, String> {
    let cfg = ExperimentConfig::resolve(name, overrides).map_err(err)?;
    run(&cfg, out, Parallelism::Sequential).map_err(err)
}

fn fmt4(e: &[f64; 4]) -> String {
    format!("rho {:.2e}, u {:.2e}, v {:.2e}, p {:.2e}", e[0], e[1], e[2], e[3])
}

fn c1_gradients() -> Verdict {
    let start = Instant::now();
    let (_, check) = selftest::gradient_check(50, 7).map_err(err)?;
    let elapsed = start.elapsed();
    Ok((
        check.passed && elapsed < GRADIENT_BUDGET,
        format!("{}; {:.1}s (limit {}s)", check.detail, elapsed.as_secs_f64(), GRADIENT_BUDGET.as_secs()),
    ))
}

fn c2_entropy_pair() -> Verdict {
    let check = selftest::entropy_pair_check(100, 11, GAMMA);
    Ok((check.passed, check.detail))
}

fn c3_exact_residuals() -> Verdict {
    let smooth = selftest::smooth_residual_check(10_000, 13, GAMMA).map_err(err)?;
    let fan = selftest::expansion_residual_check(2_000, 17, GAMMA, 1e-6, 0.02).map_err(err)?;
    Ok((smooth.passed && fan.passed, format!("{}; {}", smooth.detail, fan.detail)))
}

fn c4_oblique_oracle() -> Verdict {
    let (_, check) = selftest::oblique_printed_check(GAMMA).map_err(err)?;
    Ok((check.passed, check.detail))
}

fn c5_smooth(dir: &Path) -> Verdict {
    let r = run_preset("smooth", &[], &dir.join("smooth"))?;
    let ok = r.errors.iter().all(|e| *e <= SMOOTH_TOL) && r.wall_clock_seconds <= SMOOTH_BUDGET.as_secs_f64();
    Ok((
        ok,
        format!(
            "{} (tol {SMOOTH_TOL:e}); {} Adam + {} L-BFGS in {:.0}s (limit {}s)",
            fmt4(&r.errors),
            r.adam_iterations,
            r.lbfgs_iterations,
            r.wall_clock_seconds,
            SMOOTH_BUDGET.as_secs()
        ),
    ))
}

fn c6_expansion(dir: &Path) -> Verdict {
    let r = run_preset("expansion", &[], &dir.join("expansion"))?;
    let ok = r.errors[0] <= EXPANSION_TOL && r.errors[3] <= EXPANSION_TOL;
    Ok((
        ok,
        format!(
            "{} (rho, p tol {EXPANSION_TOL:e}); rho is {:.2}x the published {EXPANSION_PUBLISHED_RHO:e}; {:.0}s",
            fmt4(&r.errors),
            r.errors[0] / EXPANSION_PUBLISHED_RHO,
            r.wall_clock_seconds
        ),
    ))
}

fn load_nets(out: &Path, count: usize) -> Result<Vec<NetworkParams>, String> {
    (0..count)
        .map(|q| load_checkpoint(&out.join(format!("checkpoints/final_net{q}.ckpt"))).map_err(err))
        .collect()
}

/// Total variation and net drop of a sampled profile.
fn variation(values: &[f64]) -> (f64, f64) {
    let tv = values.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    (tv, values[0] - values[values.len() - 1])
}

fn c7_oblique(dir: &Path) -> Verdict {
    let out = dir.join("oblique");
    let r = run_preset("oblique", &[], &out)?;
    let cfg = ExperimentConfig::resolve("oblique", &[]).map_err(err)?;
    let setup = Setup::new(&cfg).map_err(err)?;
    let inlet = setup.scales.nondimensionalize(&cfg.inlet.ok_or("oblique preset has no inlet")?.state());
    let theta = cfg.geometry.theta_deg.ok_or("oblique preset has no theta")?.to_radians();
    let case = ObliqueShockCase::from_relations(inlet, theta, cfg.gamma).map_err(err)?;
    let nets = load_nets(&out, r.networks)?;

    let plateau: Vec<[f64; 3]> = setup.eval_points[0]
        .iter()
        .copied()
        .filter(|p| case.shock_distance([p[0], p[1]]) < -PLATEAU_OFFSET)
        .collect();
    let pred = predict_stitched(&nets, &setup.decomposition, &plateau).map_err(err)?;
    let post = case.post.to_array();
    let mut plateau_err = [0.0; 4];
    for (k, e) in plateau_err.iter_mut().enumerate() {
        let mean = pred.iter().map(|s| s[k]).sum::<f64>() / pred.len().max(1) as f64;
        let scale = if post[k].abs() > 1e-12 { post[k].abs() } else { case.post.speed() };
        *e = (mean - post[k]).abs() / scale;
    }
    let mut ok = !plateau.is_empty() && plateau_err.iter().all(|e| *e <= PLATEAU_TOL);
    let mut detail = format!(
        "plateau ({} points) off by {} (tol {PLATEAU_TOL})",
        plateau.len(),
        fmt4(&plateau_err)
    );

    let exact_drop = case.post.rho - case.pre.rho;
    for x in [0.3, 0.7] {
        let line: Vec<[f64; 3]> = (0..SLICE_POINTS)
            .map(|i| [x, i as f64 / (SLICE_POINTS - 1) as f64, 0.0])
            .collect();
        let rho: Vec<f64> = predict_stitched(&nets, &setup.decomposition, &line)
            .map_err(err)?
            .iter()
            .map(|s| s[0])
            .collect();
        let (tv, drop) = variation(&rho);
        let monotone = drop >= SLICE_DROP_FRACTION * exact_drop && tv <= SLICE_TV_FACTOR * drop.abs();
        ok &= monotone;
        detail += &format!(
            "; x={x}: drop {drop:.3} of {exact_drop:.3}, TV/drop {:.2}",
            tv / drop.abs().max(1e-300)
        );
    }
    detail += &format!("; rel L2 {}; {:.0}s", fmt4(&r.errors), r.wall_clock_seconds);
    Ok((ok, detail))
}

fn c8_equivalences() -> Verdict {
    let w = LossWeights::default();
    let square = Polygon::rectangle(0.0, 1.0, 0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut loss_ok, mut stitch_ok) = (true, true);
    for seed in 0..EQUIVALENCE_CASES {
        let (net, problem) = common::random_problem(seed, seed % 2 == 0, false);
        let a = pinn_loss(&net, &problem, &w).map_err(err)?;
        let b = xpinn_loss(std::slice::from_ref(&net), &problem, &w).map_err(err)?;
        loss_ok &= (0..COMPONENTS).all(|k| a.breakdown.values[k] == b.breakdown.values[k]) && a.gradient == b.gradient;
        let parts: [(&NetworkParams, &dyn Indicator); 1] = [(&net, &square)];
        for _ in 0..10 {
            let p = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            stitch_ok &= stitched_forward(&parts, &p).map_err(err)? == forward(&net, &p).map_err(err)?;
        }
    }
    Ok((
        loss_ok && stitch_ok,
        format!(
            "{EQUIVALENCE_CASES} configurations: xpinn == pinn {}, stitched == forward {}",
            if loss_ok { "exactly" } else { "NOT exactly" },
            if stitch_ok { "exactly" } else { "NOT exactly" }
        ),
    ))
}

fn c9_dynamic_weights(dir: &Path) -> Verdict {
    let out = dir.join("expansion_dw");
    let overrides = [
        "method.dynamic=true".to_string(),
        format!("optimizer.adam.iterations={DW_ADAM}"),
        "optimizer.lbfgs.max_iterations=0".into(),
        "output.grid=50".into(),
    ];
    run_preset("expansion", &overrides, &out)?;
    let text = std::fs::read_to_string(out.join("loss_history.csv")).map_err(err)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or("empty history")?.split(',').collect();
    let cols: Vec<usize> = ["omega_2", "omega_3", "omega_4"]
        .iter()
        .filter_map(|n| header.iter().position(|h| h == n))
        .collect();
    let all: Vec<usize> = (0..header.len()).filter(|&i| header[i].starts_with("omega_")).collect();
    let (mut rows, mut positive, mut moved) = (0usize, true, false);
    let mut first: Option<Vec<f64>> = None;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let w: Vec<f64> = all.iter().map(|&i| f[i].parse::<f64>().unwrap_or(f64::NAN)).collect();
        positive &= w.iter().all(|v| v.is_finite() && *v > 0.0);
        if let Some(f0) = &first {
            moved |= f0 != &w;
        } else {
            first = Some(w);
        }
        rows += 1;
    }
    Ok((
        cols.len() == 3 && positive && rows > 0,
        format!(
            "{rows} rows, omega_2..4 columns {}, all omega positive and finite {positive}, trajectories change {moved}",
            if cols.len() == 3 { "present" } else { "missing" }
        ),
    ))
}

fn c10_interface(dir: &Path) -> Verdict {
    let r = run_preset("smooth", &["method.xpinn=true".into()], &dir.join("smooth_xpinn"))?;
    let jump = r.interface_jump.ok_or("run reported no interface jump")?;
    let worst = jump.iter().fold(0.0f64, |m, v| m.max(*v));
    Ok((
        r.networks == 2 && worst <= JUMP_TOL,
        format!(
            "{} subdomains, max jump {} (tol {JUMP_TOL:e}); errors {}; {:.0}s",
            r.networks,
            fmt4(&jump),
            fmt4(&r.errors),
            r.wall_clock_seconds
        ),
    ))
}

fn cli_run(out: &Path) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_shockpinn"))
        .env("RUST_LOG", "warn")
        .args(["run", "expansion", "--threads", "1", "--seed", "5", "--out"])
        .arg(out)
        .args([
            "--override",
            "method.dynamic=true",
            "--override",
            "optimizer.adam.iterations=60",
            "--override",
            "optimizer.lbfgs.max_iterations=20",
            "--override",
            "output.grid=12",
        ])
        .output()
        .map_err(err)?;
    if !o.status.success() {
        return Err(format!("run failed: {}", String::from_utf8_lossy(&o.stderr)));
    }
    Ok(())
}

fn c11_determinism(dir: &Path) -> Verdict {
    let (a, b) = (dir.join("det_a"), dir.join("det_b"));
    cli_run(&a)?;
    cli_run(&b)?;
    let read = |p: PathBuf| std::fs::read(p.join("loss_history.csv")).map_err(err);
    let (x, y) = (read(a)?, read(b)?);
    Ok((
        x == y && !x.is_empty(),
        format!("loss histories {} ({} bytes)", if x == y { "byte-identical" } else { "differ" }, x.len()),
    ))
}

fn c12_bow(dir: &Path) -> Verdict {
    let reference = dir.join("bow_reference.csv");
    common::bow_fixture_csv(&reference, 0.5, 0.025);
    let out = dir.join("bow");
    let overrides = [
        format!("reference.path=\"{}\"", reference.display()),
        format!("optimizer.adam.iterations={BOW_ADAM}"),
        format!("optimizer.lbfgs.max_iterations={BOW_LBFGS}"),
    ];
    let r = run_preset("bow", &overrides, &out)?;
    let rows = load_field_csv(&out.join("field.csv")).map_err(err)?;
    let fields_ok = !rows.is_empty() && rows.iter().all(|row| row.abs_error.is_finite());
    let rms = r.wall_slip_rms.ok_or("run reported no wall slip")?;
    Ok((
        fields_ok && rms <= WALL_SLIP_TOL,
        format!(
            "{} Adam + {} L-BFGS in {:.0}s; {} error rows; wall |n.u| RMS {rms:.2e} of freestream (tol {WALL_SLIP_TOL:e}); final omega_6 {:.3e}",
            r.adam_iterations,
            r.lbfgs_iterations,
            r.wall_clock_seconds,
            rows.len(),
            r.final_omega[5]
        ),
    ))
}

fn main() -> ExitCode {
    let _ = env_logger::builder().is_test(true).try_init();
    let only: Option<Vec<usize>> = std::env::var("SHOCKPINN_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let tmp = tempfile::tempdir().expect("temporary directory");
    let dir = tmp.path();
    let criteria: [(usize, &str, &dyn Fn() -> Verdict); 12] = [
        (1, "autodiff gradients vs finite differences", &c1_gradients),
        (2, "entropy-entropy flux pair", &c2_entropy_pair),
        (3, "exact-solution residuals", &c3_exact_residuals),
        (4, "oblique-shock printed states", &c4_oblique_oracle),
        (5, "smooth inverse problem", &|| c5_smooth(dir)),
        (6, "expansion wave", &|| c6_expansion(dir)),
        (7, "oblique shock XPINN", &|| c7_oblique(dir)),
        (8, "single-subdomain equivalences", &c8_equivalences),
        (9, "dynamic weights", &|| c9_dynamic_weights(dir)),
        (10, "XPINN interface quality", &|| c10_interface(dir)),
        (11, "determinism", &|| c11_determinism(dir)),
        (12, "bow shock pipeline", &|| c12_bow(dir)),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!passed);
        println!("{} [{id}] {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
