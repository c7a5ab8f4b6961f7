//! The generate, train, analyze and emit pipeline behind the `run` and
//! `compare` commands.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    complexity_norms, export_field_csv, interface_jump, predict_stitched, relative_l2_fields,
    ComplexityReport, NormMeasure, VARIABLES,
};
use crate::config::ExperimentConfig;
use crate::decomposition::{build_decomposition, Decomposition, Experiment, ExperimentGeometry, Location};
use crate::error::{Error, Result};
use crate::geometry::{Membership, Polygon, Polyline};
use crate::loss::{InterfaceData, LossProblem, LossSettings, Parallelism, SubdomainData};
use crate::network::{save_checkpoint, xavier_init_with, NetworkParams};
use crate::optimize::{train, CheckpointPlan, TrainOptions};
use crate::oracles::{
    load_reference_field, ExpansionCase, FieldFormat, ObliqueShockCase, Oracle, ReferenceField, ReferenceGrid,
    SmoothWave, Units, WedgeGeometry,
};
use crate::physics::ReferenceScales;
use crate::sampling::{
    export_point_sets, point_data, sample_boundary, sample_domain, sample_interface, synth_schlieren,
    BoundaryCurve, GradientRegion, Placement, PointSet, Role, Strategy, TimeSpan,
};

/// Nondimensional flow data for one experiment.
enum Source {
    Smooth(SmoothWave),
    Expansion(ExpansionCase),
    Oblique(ObliqueShockCase),
    Bow { grid: ReferenceGrid, field: ReferenceField },
}

impl Source {
    fn oracle(&self) -> &dyn Oracle {
        match self {
            Source::Smooth(s) => s,
            Source::Expansion(e) => e,
            Source::Oblique(o) => o,
            Source::Bow { grid, .. } => grid,
        }
    }
}

/// Everything a run needs before training starts.
pub struct Setup {
    pub config: ExperimentConfig,
    pub kind: Experiment,
    pub scales: ReferenceScales,
    pub geometry: ExperimentGeometry,
    pub decomposition: Decomposition,
    pub problem: LossProblem,
    pub nets: Vec<NetworkParams>,
    /// All generated data, before partitioning.
    pub point_sets: Vec<PointSet>,
    /// Evaluation points per output time level.
    pub eval_points: Vec<Vec<[f64; 3]>>,
    pub eval_reference: Vec<Vec<[f64; 4]>>,
    pub eval_times: Vec<f64>,
    /// Body points for the no-penetration diagnostic (bow only).
    pub wall_points: Option<PointSet>,
}

fn derive_seed(seed: u64, tag: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(tag)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

fn geometry_of(cfg: &ExperimentConfig, kind: Experiment, source: &Source) -> Result<ExperimentGeometry> {
    let g = &cfg.geometry;
    let missing = |name: &str| Error::config(format!("{} geometry needs '{name}'", cfg.experiment));
    Ok(match kind {
        Experiment::Smooth => ExperimentGeometry::Smooth {
            half_width: g.half_width.ok_or_else(|| missing("half_width"))?,
        },
        Experiment::Expansion => {
            let Source::Expansion(case) = source else { unreachable!() };
            ExperimentGeometry::Expansion {
                wedge: case.geometry,
                split_angle: g.split_angle_deg.ok_or_else(|| missing("split_angle_deg"))?.to_radians(),
            }
        }
        Experiment::Oblique => {
            let Source::Oblique(case) = source else { unreachable!() };
            ExperimentGeometry::Oblique {
                beta: case.beta,
                offsets: g.offsets.ok_or_else(|| missing("offsets"))?,
            }
        }
        Experiment::Bow => ExperimentGeometry::Bow {
            radius: g.radius.ok_or_else(|| missing("radius"))?,
            bounds: g.bounds.ok_or_else(|| missing("bounds"))?,
            interface: g.interface.ok_or_else(|| missing("interface"))?,
            arc_segments: g.arc_segments.ok_or_else(|| missing("arc_segments"))?,
        },
    })
}

fn build_source(cfg: &ExperimentConfig, kind: Experiment, scales: &ReferenceScales) -> Result<Source> {
    let g = &cfg.geometry;
    let inlet = || {
        cfg.inlet
            .map(|i| scales.nondimensionalize(&i.state()))
            .ok_or_else(|| Error::config(format!("{} needs an inlet state", cfg.experiment)))
    };
    let theta = || {
        g.theta_deg
            .map(f64::to_radians)
            .ok_or_else(|| Error::config("geometry needs 'theta_deg'"))
    };
    Ok(match kind {
        Experiment::Smooth => Source::Smooth(SmoothWave),
        Experiment::Expansion => {
            let wall = g.wall.ok_or_else(|| Error::config("expansion geometry needs 'wall'"))?;
            Source::Expansion(ExpansionCase::new(WedgeGeometry::new(theta()?, wall)?, inlet()?, cfg.gamma)?)
        }
        Experiment::Oblique => Source::Oblique(ObliqueShockCase::from_relations(inlet()?, theta()?, cfg.gamma)?),
        Experiment::Bow => {
            let path = cfg
                .reference
                .as_ref()
                .map(|r| PathBuf::from(&r.path))
                .ok_or_else(|| Error::ingestion("bow runs need reference.path pointing at a field CSV"))?;
            let raw = load_reference_field(&path, FieldFormat::Csv)?;
            let field = match raw.units {
                Units::Si => raw.map_states(Units::Nondim, |s| scales.nondimensionalize(s)),
                Units::Nondim => raw,
            };
            let grid = ReferenceGrid::from_field(&field)?;
            Source::Bow { grid, field }
        }
    })
}

fn line(a: [f64; 2], b: [f64; 2]) -> Result<BoundaryCurve> {
    Ok(BoundaryCurve::Line {
        line: Polyline::segment(a, b)?,
        flip: false,
    })
}

/// Gradient-data region: the configured polygon, the diagonal for the smooth
/// wave, or a band around the shock for the oblique case.
fn gradient_region(cfg: &ExperimentConfig, geometry: &ExperimentGeometry, source: &Source) -> Result<GradientRegion> {
    if let Some(v) = &cfg.geometry.region {
        return Ok(GradientRegion::Area(Polygon::new(v.clone())?));
    }
    match (geometry, source) {
        (ExperimentGeometry::Smooth { half_width: h }, _) => {
            Ok(GradientRegion::Curve(Polyline::segment([-h, -h], [*h, *h])?))
        }
        (ExperimentGeometry::Oblique { beta, .. }, Source::Oblique(_)) => {
            let band = cfg.geometry.band.unwrap_or(0.15);
            // shock distance d = y cos(beta) - x sin(beta); keep |d| <= band
            let n = [-beta.sin(), beta.cos()];
            let region = geometry
                .domain()
                .clip_halfplane(n, band)?
                .clip_halfplane([-n[0], -n[1]], band)?;
            Ok(GradientRegion::Area(region))
        }
        _ => Err(Error::config(format!("{} needs geometry.region", cfg.experiment))),
    }
}

fn generate(cfg: &ExperimentConfig, kind: Experiment, geometry: &ExperimentGeometry, source: &Source) -> Result<(Vec<PointSet>, Option<PointSet>)> {
    let s = &cfg.sampling;
    let oracle = source.oracle();
    let domain = geometry.domain();
    let seed = |tag| derive_seed(cfg.seed, tag);
    let span: TimeSpan = match kind {
        Experiment::Smooth => Some([0.0, cfg.geometry.t_final.unwrap_or(1.0)]),
        _ => None,
    };
    let levels = time_levels(cfg, kind);
    let mut sets = Vec::new();

    sets.push(sample_domain(&domain, s.residual, seed(1), s.strategy, span)?);

    if s.gradient > 0 {
        let region = gradient_region(cfg, geometry, source)?;
        sets.push(synth_schlieren(oracle, &region, s.gradient, seed(2), s.gradient_method, span, s.noise)?);
    }

    if s.inflow > 0 {
        let mut inflow = PointSet::new(Role::Inflow, seed(3));
        let pieces: Vec<(BoundaryCurve, usize)> = match geometry {
            ExperimentGeometry::Smooth { half_width: h } => {
                let half = s.inflow / 2;
                vec![
                    (line([-h, -h], [-h, *h])?, half),
                    (line([-h, -h], [*h, -h])?, s.inflow - half),
                ]
            }
            _ => {
                // left edge of the domain
                let x0 = domain.bbox()[0];
                let ys: Vec<f64> = domain.vertices().iter().filter(|v| v[0] == x0).map(|v| v[1]).collect();
                let y0 = ys.iter().copied().fold(f64::INFINITY, f64::min);
                let y1 = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                vec![(line([x0, y0], [x0, y1])?, s.inflow)]
            }
        };
        let initial = match (span, s.initial_data) {
            (Some([t0, _]), true) => Some(t0),
            (None, true) => return Err(Error::config("initial_data needs an unsteady experiment")),
            _ => None,
        };
        let faces = pieces.len() + usize::from(initial.is_some());
        let share = |k: usize| s.inflow / faces + usize::from(k < s.inflow % faces);
        for (k, (curve, _)) in pieces.iter().enumerate() {
            let n = if initial.is_some() { share(k) } else { pieces[k].1 };
            let part = sample_boundary(curve, n, seed(30 + k as u64), Placement::Random, Role::Inflow, Some(oracle), span)?;
            inflow.extend(&part);
        }
        if let Some(t0) = initial {
            let plane = sample_domain(&domain, share(faces - 1), seed(39), Strategy::Random, Some([t0, t0]))?;
            inflow.extend(&point_data(&plane.points, Role::Inflow, oracle, seed(39))?);
        }
        sets.push(inflow);
    }

    let body = match geometry {
        ExperimentGeometry::Bow { radius, .. } => Some(BoundaryCurve::Arc {
            center: [0.0, 0.0],
            radius: *radius,
            phi0: 0.5 * PI,
            phi1: 1.5 * PI,
        }),
        ExperimentGeometry::Expansion { wedge, .. } => {
            let x1 = wedge.corner[0] + wedge.extent[0];
            Some(line(wedge.corner, [x1, wedge.wall_y(x1)])?)
        }
        _ => None,
    };

    if let Some(locs) = &s.pressure_points {
        let pts: Vec<[f64; 3]> = levels
            .iter()
            .flat_map(|&t| locs.iter().map(move |p| [p[0], p[1], t]))
            .collect();
        sets.push(point_data(&pts, Role::WallPressure, oracle, seed(4))?);
    } else if s.wall_pressure > 0 {
        let curve = body
            .as_ref()
            .ok_or_else(|| Error::config(format!("{} has no wall for pressure data; set pressure_points", cfg.experiment)))?;
        sets.push(sample_boundary(curve, s.wall_pressure, seed(4), Placement::Random, Role::WallPressure, Some(oracle), span)?);
    }

    let wall = match (kind, &body) {
        (Experiment::Bow, Some(curve)) => {
            let n = if s.wall_slip > 0 { s.wall_slip } else { 100 };
            Some(sample_boundary(curve, n, seed(5), Placement::Even, Role::WallSlip, None, None)?)
        }
        _ => None,
    };
    if cfg.method.wall_slip {
        let w = wall
            .as_ref()
            .ok_or_else(|| Error::config("wall-slip terms are only defined for the bow geometry"))?;
        if s.wall_slip == 0 {
            return Err(Error::config("method.wall_slip needs sampling.wall_slip > 0"));
        }
        sets.push(w.clone());
    }
    Ok((sets, wall))
}

fn time_levels(cfg: &ExperimentConfig, kind: Experiment) -> Vec<f64> {
    match kind {
        Experiment::Smooth => linspace(0.0, cfg.geometry.t_final.unwrap_or(1.0), cfg.sampling.time_levels.max(1)),
        _ => vec![0.0],
    }
}

fn partition(sets: &[PointSet], dec: &Decomposition) -> Result<Vec<Vec<PointSet>>> {
    let mut out: Vec<Vec<PointSet>> = vec![Vec::new(); dec.subdomains.len()];
    for set in sets {
        let mut parts: Vec<PointSet> = (0..dec.subdomains.len()).map(|_| PointSet::new(set.role, set.seed)).collect();
        for i in 0..set.len() {
            let p = set.points[i];
            let q = match dec.locate([p[0], p[1]])? {
                Location::Subdomain(q) => q,
                Location::Interface(a, b) => a.min(b),
            };
            parts[q].push(p, set.target(i));
        }
        for (q, part) in parts.into_iter().enumerate() {
            if !part.is_empty() {
                out[q].push(part);
            }
        }
    }
    for (q, sets) in out.iter().enumerate() {
        if !sets.iter().any(|s| s.role == Role::Residual) {
            return Err(Error::config(format!("subdomain {q} received no residual points")));
        }
    }
    Ok(out)
}

/// Evaluation points and reference states, one list per time, plus the times.
type EvalGrid = (Vec<Vec<[f64; 3]>>, Vec<Vec<[f64; 4]>>, Vec<f64>);

fn evaluation_grid(cfg: &ExperimentConfig, kind: Experiment, domain: &Polygon, source: &Source) -> Result<EvalGrid> {
    let oracle = source.oracle();
    if let Source::Bow { field, .. } = source {
        let mut pts = Vec::new();
        let mut refs = Vec::new();
        for (p, s) in field.points.iter().zip(&field.states) {
            if domain.contains(*p) {
                pts.push([p[0], p[1], 0.0]);
                refs.push(s.to_array());
            }
        }
        if pts.is_empty() {
            return Err(Error::ingestion("reference field has no samples inside the fluid domain"));
        }
        return Ok((vec![pts], vec![refs], vec![0.0]));
    }
    let [x0, x1, y0, y1] = domain.bbox();
    let n = cfg.output.grid;
    let xy: Vec<[f64; 2]> = linspace(y0, y1, n)
        .into_iter()
        .flat_map(|y| linspace(x0, x1, n).into_iter().map(move |x| [x, y]))
        .filter(|p| domain.classify(*p, 1e-12) != Membership::Outside)
        .collect();
    let times = match kind {
        Experiment::Smooth => {
            let t = cfg.geometry.t_final.unwrap_or(1.0);
            vec![0.0, 0.5 * t, t]
        }
        _ => vec![0.0],
    };
    let mut pts = Vec::new();
    let mut refs = Vec::new();
    for &t in &times {
        let level: Vec<[f64; 3]> = xy.iter().map(|p| [p[0], p[1], t]).collect();
        let r = level
            .iter()
            .map(|p| oracle.state(*p).map(|s| s.to_array()))
            .collect::<Result<Vec<_>>>()?;
        pts.push(level);
        refs.push(r);
    }
    Ok((pts, refs, times))
}

/// Mean primitive state over the inflow data.
fn mean_inflow(sets: &[PointSet]) -> Option<[f64; 4]> {
    let mut sum = [0.0; 4];
    let mut n = 0usize;
    for set in sets.iter().filter(|s| s.role == Role::Inflow) {
        for i in 0..set.len() {
            for (acc, v) in sum.iter_mut().zip(set.target(i)) {
                *acc += v;
            }
            n += 1;
        }
    }
    (n > 0).then(|| sum.map(|v| v / n as f64))
}

/// Starts the output layer at `state` so the clamped density and pressure
/// channels begin on their active branch. Each output row is shrunk to a
/// tenth of its channel's magnitude (floored at a hundredth of the largest),
/// otherwise a freestream pressure well below one starts clamped at many
/// points.
fn set_output_bias(net: &mut NetworkParams, state: [f64; 4]) {
    let last = net.slots()[net.layer_count() - 1];
    let top = state.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let values = net.values_mut();
    for (k, s) in state.iter().enumerate() {
        let scale = 0.1 * s.abs().max(0.01 * top);
        let row = last.weights + k * last.cols;
        values[row..row + last.cols].iter_mut().for_each(|w| *w *= scale);
    }
    values[last.bias..last.bias + 4].copy_from_slice(&state);
}

impl Setup {
    /// Builds data, decomposition, loss problem and initial networks.
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let cfg = config.clone();
        let kind = cfg.kind()?;
        let scales = match (kind, cfg.inlet) {
            (Experiment::Smooth, _) | (_, None) => ReferenceScales::identity(),
            (_, Some(i)) => ReferenceScales::freestream(&i.state(), 1.0)?,
        };
        let source = build_source(&cfg, kind, &scales)?;
        let geometry = geometry_of(&cfg, kind, &source)?;
        let decomposition = build_decomposition(&geometry, cfg.method.xpinn, cfg.sampling.interface)?;
        let domain = geometry.domain();
        if let Source::Bow { field, .. } = &source {
            field.check_domain(&domain, 1e-9).or_else(|e| {
                warn!("reference field: {e}");
                Ok::<_, Error>(())
            })?;
        }

        let (point_sets, wall_points) = generate(&cfg, kind, &geometry, &source)?;
        let parts = partition(&point_sets, &decomposition)?;
        let unsteady = kind == Experiment::Smooth;
        let subdomains = parts
            .into_iter()
            .zip(&decomposition.subdomains)
            .map(|(sets, spec)| SubdomainData {
                sets,
                quadrature: if cfg.method.global_conservation {
                    spec.region
                        .boundary_quadrature(cfg.sampling.quadrature_order, cfg.sampling.quadrature_panels)
                } else {
                    Vec::new()
                },
            })
            .collect();
        let levels = time_levels(&cfg, kind);
        let interfaces = decomposition
            .interfaces
            .iter()
            .map(|i| {
                let mut terms = i.terms;
                if let Some(f) = cfg.method.flux_continuity {
                    terms.flux = f;
                }
                Ok(InterfaceData {
                    pair: i.pair,
                    points: sample_interface(&i.curve, i.points, &levels)?,
                    terms,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let settings = LossSettings {
            gamma: cfg.gamma,
            entropy: cfg.method.entropy.mode(),
            epsilon: cfg.method.epsilon,
            unsteady,
        };
        let problem = LossProblem::new(subdomains, interfaces, settings)?;

        let input = if unsteady { 3 } else { 2 };
        let nets = decomposition
            .subdomains
            .iter()
            .map(|spec| {
                let sizes = spec.sizes.clone().unwrap_or_else(|| {
                    let mut s = vec![input];
                    s.extend(std::iter::repeat_n(cfg.network.width, cfg.network.hidden_layers));
                    s.push(4);
                    s
                });
                xavier_init_with(&sizes, derive_seed(cfg.seed, 1000 + spec.id as u64), cfg.network.scale_n, cfg.network.alpha_clamp)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut nets = nets;
        if let Some(mean) = mean_inflow(&point_sets) {
            for net in &mut nets {
                set_output_bias(net, mean);
            }
        }

        let (eval_points, eval_reference, eval_times) = evaluation_grid(&cfg, kind, &domain, &source)?;
        Ok(Self {
            config: cfg,
            kind,
            scales,
            geometry,
            decomposition,
            problem,
            nets,
            point_sets,
            eval_points,
            eval_reference,
            eval_times,
            wall_points,
        })
    }

    pub fn train_options(&self, parallelism: Parallelism, checkpoint: Option<CheckpointPlan>) -> TrainOptions {
        let m = &self.config.method;
        let dynamic = if m.dynamic && m.xpinn {
            warn!("dynamic weights are not used with XPINN; training with fixed weights");
            None
        } else if m.dynamic {
            Some(self.config.dynamic)
        } else {
            None
        };
        TrainOptions {
            schedule: self.config.optimizer,
            dynamic,
            adaptive: m.adaptive,
            parallelism,
            checkpoint,
        }
    }

    /// Hash of the evaluation points; runs are comparable only when equal.
    pub fn grid_hash(&self) -> String {
        let mut h = Sha256::new();
        for p in self.eval_points.iter().flatten() {
            for v in p {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Summary written to `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment: String,
    pub seed: u64,
    pub config_hash: String,
    pub grid_hash: String,
    pub networks: usize,
    /// Relative L2 error of rho, u, v, p over all evaluation points.
    pub errors: [f64; 4],
    /// Per evaluation time (one entry for steady problems).
    pub errors_by_time: Vec<(f64, [f64; 4])>,
    pub interface_jump: Option<[f64; 4]>,
    /// No-penetration RMS on the body relative to the freestream speed.
    pub wall_slip_rms: Option<f64>,
    pub complexity: ComplexityReport,
    pub best_loss: f64,
    pub final_omega: [f64; 6],
    pub lbfgs_status: Option<String>,
    pub lbfgs_iterations: usize,
    pub adam_iterations: usize,
    pub wall_clock_seconds: f64,
    pub loss_history: String,
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn field_file(times: &[f64], k: usize) -> String {
    if times.len() == 1 {
        "field.csv".into()
    } else {
        format!("field_t{k}.csv")
    }
}

/// Runs one experiment into `out`: generate, train, analyze, emit.
pub fn run(config: &ExperimentConfig, out: &Path, parallelism: Parallelism) -> Result<RunReport> {
    let start = Instant::now();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write(&out.join("config.toml"), &config.to_toml())?;

    let setup = Setup::new(config).map_err(|e| e.in_phase("generate"))?;
    let sets: Vec<&PointSet> = setup.point_sets.iter().collect();
    export_point_sets(&sets, &out.join("points.csv")).map_err(|e| e.in_phase("generate"))?;
    info!(
        "{}: {} network(s), {} parameters",
        config.experiment,
        setup.nets.len(),
        setup.nets.iter().map(|n| n.len()).sum::<usize>()
    );

    let plan = CheckpointPlan {
        dir: out.join("checkpoints"),
        every: config.output.checkpoint_every.max(1),
    };
    let opts = setup.train_options(parallelism, Some(plan.clone()));
    let outcome = train(&setup.nets, &setup.problem, config.weights, &opts).map_err(|e| e.in_phase("train"))?;
    outcome
        .history
        .write_csv(&out.join("loss_history.csv"))
        .map_err(|e| e.in_phase("emit"))?;
    for (q, net) in outcome.nets.iter().enumerate() {
        let p = plan.dir.join(format!("final_net{q}.ckpt"));
        save_checkpoint(net, &p).map_err(|e| e.in_phase("emit"))?;
    }

    let analyzed = analyze(&setup, &outcome.nets, out).map_err(|e| e.in_phase("analyze"))?;
    let adam_iterations = outcome
        .history
        .rows
        .iter()
        .filter(|r| r.phase == crate::optimize::Phase::Adam)
        .count();
    let report = RunReport {
        experiment: config.experiment.clone(),
        seed: config.seed,
        config_hash: config.hash(),
        grid_hash: setup.grid_hash(),
        networks: outcome.nets.len(),
        errors: analyzed.errors,
        errors_by_time: analyzed.by_time,
        interface_jump: analyzed.jump,
        wall_slip_rms: analyzed.wall_slip_rms,
        complexity: analyzed.complexity,
        best_loss: outcome.best_loss,
        final_omega: outcome.weights.omega,
        lbfgs_status: outcome.lbfgs.as_ref().map(|r| r.status.name().to_string()),
        lbfgs_iterations: outcome.lbfgs.as_ref().map_or(0, |r| r.iterations),
        adam_iterations,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        loss_history: "loss_history.csv".into(),
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Analysis(e.to_string()).in_phase("emit"))?;
    write(&out.join("summary.json"), &json).map_err(|e| e.in_phase("emit"))?;
    Ok(report)
}

struct Analyzed {
    errors: [f64; 4],
    by_time: Vec<(f64, [f64; 4])>,
    jump: Option<[f64; 4]>,
    wall_slip_rms: Option<f64>,
    complexity: ComplexityReport,
}

fn analyze(setup: &Setup, nets: &[NetworkParams], out: &Path) -> Result<Analyzed> {
    let mut all_pred = Vec::new();
    let mut all_ref = Vec::new();
    let mut by_time = Vec::new();
    for (k, (pts, refs)) in setup.eval_points.iter().zip(&setup.eval_reference).enumerate() {
        let pred = predict_stitched(nets, &setup.decomposition, pts)?;
        export_field_csv(pts, &pred, refs, &out.join(field_file(&setup.eval_times, k)))?;
        by_time.push((setup.eval_times[k], relative_l2_fields(&pred, refs)?));
        all_pred.extend(pred);
        all_ref.extend_from_slice(refs);
    }
    let errors = relative_l2_fields(&all_pred, &all_ref)?;

    let jump = if setup.decomposition.is_xpinn() {
        let pairs: Vec<((usize, usize), &PointSet)> = setup.problem.interfaces.iter().map(|i| (i.pair, &i.points)).collect();
        Some(interface_jump(nets, &pairs)?)
    } else {
        None
    };

    let wall_slip_rms = match &setup.wall_points {
        Some(w) if !w.is_empty() => {
            let pred = predict_stitched(nets, &setup.decomposition, &w.points)?;
            let sum: f64 = pred
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let n = w.target(i);
                    (s[1] * n[0] + s[2] * n[1]).powi(2)
                })
                .sum();
            // nondimensional speeds are in freestream units already
            Some((sum / w.len() as f64).sqrt())
        }
        _ => None,
    };

    let labels: Vec<(String, &NetworkParams)> = if nets.len() == 1 {
        vec![("PINN".to_string(), &nets[0])]
    } else {
        nets.iter().enumerate().map(|(q, n)| (format!("XPINN-{}", q + 1), n)).collect()
    };
    let complexity = complexity_norms(&labels, NormMeasure::Spectral, None)?;
    Ok(Analyzed {
        errors,
        by_time,
        jump,
        wall_slip_rms,
        complexity,
    })
}

/// Reads `summary.json` from a run directory.
pub fn load_report(dir: &Path) -> Result<RunReport> {
    let path = dir.join("summary.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::ingestion(format!("{}: {e}", path.display())))
}

/// Error table (rows rho, u, v, p; one column per run) followed by the
/// norms report, relative to the first single-network run when present.
pub fn compare(dirs: &[PathBuf]) -> Result<String> {
    if dirs.len() < 2 {
        return Err(Error::config("compare needs at least two run directories"));
    }
    let reports = dirs.iter().map(|d| load_report(d)).collect::<Result<Vec<_>>>()?;
    let first = &reports[0];
    for (d, r) in dirs.iter().zip(&reports).skip(1) {
        if r.experiment != first.experiment {
            return Err(Error::Analysis(format!(
                "{} is a {} run, expected {}",
                d.display(),
                r.experiment,
                first.experiment
            )));
        }
        if r.grid_hash != first.grid_hash {
            return Err(Error::Analysis(format!("{} was evaluated on a different grid", d.display())));
        }
    }
    let labels: Vec<String> = dirs
        .iter()
        .map(|d| d.file_name().map_or_else(|| d.display().to_string(), |n| n.to_string_lossy().into_owned()))
        .collect();
    let mut s = String::new();
    let _ = writeln!(s, "| var | {} |", labels.join(" | "));
    let _ = writeln!(s, "|---|{}", "---|".repeat(labels.len()));
    for (c, var) in VARIABLES.iter().enumerate() {
        let cells: Vec<String> = reports.iter().map(|r| format!("{:.4e}", r.errors[c])).collect();
        let _ = writeln!(s, "| {var} | {} |", cells.join(" | "));
    }
    let baseline = reports
        .iter()
        .find(|r| r.networks == 1)
        .and_then(|r| r.complexity.rows.first().map(|row| row.measure));
    let _ = writeln!(s, "\n| network | norm | % of baseline |");
    let _ = writeln!(s, "|---|---|---|");
    for (label, r) in labels.iter().zip(&reports) {
        for row in &r.complexity.rows {
            let pct = baseline.map_or(row.percent, |b| 100.0 * row.measure / b);
            let _ = writeln!(s, "| {label}/{} | {:.4e} | {:.1} |", row.label, row.measure, pct);
        }
    }
    Ok(s)
}
