//! Two-phase training over the concatenated parameters of all subnetworks.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{lbfgs_run, Eval, LbfgsReport, OptimizerSchedule, TrainState};
use crate::error::{Error, Result};
use crate::loss::{trainable_mask, Component, DynamicWeights, Evaluation, Group, LossProblem, LossWeights, Parallelism, COMPONENTS};
use crate::network::{save_checkpoint, NetworkParams};

#[derive(Clone, Debug)]
pub struct CheckpointPlan {
    pub dir: PathBuf,
    pub every: usize,
}

#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub schedule: OptimizerSchedule,
    /// Dynamic weights during the Adam phase.
    pub dynamic: Option<DynamicWeights>,
    /// Trainable activation slopes.
    pub adaptive: bool,
    pub parallelism: Parallelism,
    pub checkpoint: Option<CheckpointPlan>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            schedule: OptimizerSchedule::default(),
            dynamic: None,
            adaptive: true,
            parallelism: Parallelism::default(),
            checkpoint: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Adam,
    Lbfgs,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Adam => "adam",
            Phase::Lbfgs => "lbfgs",
        }
    }
}

/// One evaluated iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRow {
    pub iteration: usize,
    pub phase: Phase,
    pub values: [f64; COMPONENTS],
    pub omega: [f64; 6],
    /// Total under the weights in force at this iterate.
    pub total: f64,
    /// Best total under the initial weights seen so far.
    pub best: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossHistory {
    pub rows: Vec<HistoryRow>,
}

impl LossHistory {
    pub fn header() -> String {
        let mut h = String::from("iteration,phase");
        for c in Component::ALL {
            h.push(',');
            h.push_str(c.name());
        }
        for i in 1..=6 {
            let _ = write!(h, ",omega_{i}");
        }
        h.push_str(",total,best");
        h
    }

    pub fn to_csv(&self) -> String {
        let mut s = Self::header();
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{},{}", r.iteration, r.phase.name());
            for v in r.values.iter().chain(&r.omega) {
                let _ = write!(s, ",{v:e}");
            }
            let _ = writeln!(s, ",{:e},{:e}", r.total, r.best);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn last(&self) -> Option<&HistoryRow> {
        self.rows.last()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Best-so-far parameters.
    pub nets: Vec<NetworkParams>,
    pub history: LossHistory,
    /// Weights at the end of training.
    pub weights: LossWeights,
    pub best_loss: f64,
    pub lbfgs: Option<LbfgsReport>,
}

fn split(templates: &[NetworkParams], flat: &[f64]) -> Vec<NetworkParams> {
    let mut out = Vec::with_capacity(templates.len());
    let mut off = 0;
    for t in templates {
        let mut n = t.clone();
        n.set_values(&flat[off..off + t.len()]);
        off += t.len();
        out.push(n);
    }
    out
}

fn check_finite(e: &Evaluation, active: &[Group], iteration: usize) -> Result<()> {
    if let Some(c) = e.breakdown.first_non_finite() {
        return Err(Error::Divergence(format!("{} is not finite at iteration {iteration}", c.name())));
    }
    for g in active {
        if let Some(grad) = e.group_gradients.get(g.index()) {
            if grad.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence(format!(
                    "gradient of the {} terms is not finite at iteration {iteration}",
                    g.name()
                )));
            }
        }
    }
    Ok(())
}

/// Runs the Adam phase (with optional dynamic weights) then the L-BFGS
/// phase, recording every evaluated iterate. Returns the parameters with the
/// lowest total under the initial weights.
pub fn train(nets: &[NetworkParams], problem: &LossProblem, weights: LossWeights, opts: &TrainOptions) -> Result<TrainOutcome> {
    opts.schedule.validate()?;
    if let Some(plan) = &opts.checkpoint {
        if plan.every == 0 {
            return Err(Error::config("checkpoint interval must be positive"));
        }
        std::fs::create_dir_all(&plan.dir).map_err(|e| Error::io(&plan.dir, e))?;
    }
    let fixed = weights;
    let mut weights = weights;
    let mask = trainable_mask(nets, opts.adaptive);
    let active = problem.active_groups();
    let flat: Vec<f64> = nets.iter().flat_map(|n| n.values().iter().copied()).collect();
    let mut state = TrainState::new(flat);
    let mut history = LossHistory::default();

    let evaluate = |x: &[f64], w: &LossWeights| -> Result<Evaluation> {
        let current = split(nets, x);
        let mut e = problem.evaluate(&current, w, true, opts.parallelism)?;
        for (i, m) in mask.iter().enumerate() {
            if !m {
                e.gradient[i] = 0.0;
            }
        }
        Ok(e)
    };
    let checkpoint = |state: &TrainState, history: &LossHistory| -> Result<()> {
        let Some(plan) = &opts.checkpoint else {
            return Ok(());
        };
        if !state.iteration.is_multiple_of(plan.every) {
            return Ok(());
        }
        for (q, n) in split(nets, &state.params).iter().enumerate() {
            save_checkpoint(n, &plan.dir.join(format!("iter_{:07}_net{q}.ckpt", state.iteration)))?;
        }
        history.write_csv(&plan.dir.join("loss_history.csv"))
    };
    let record = |state: &mut TrainState, history: &mut LossHistory, e: &Evaluation, w: &LossWeights, phase: Phase| {
        let fixed_total = e.breakdown.weighted_total(&fixed);
        state.record_best(fixed_total, &state.params.clone());
        history.rows.push(HistoryRow {
            iteration: state.iteration,
            phase,
            values: e.breakdown.values,
            omega: w.omega,
            total: e.breakdown.total,
            best: state.best_loss,
        });
    };

    let adam = opts.schedule.adam;
    for k in 0..adam.iterations {
        let mut e = evaluate(&state.params, &weights)?;
        check_finite(&e, &active, state.iteration)?;
        record(&mut state, &mut history, &e, &weights, Phase::Adam);
        checkpoint(&state, &history)?;
        if let Some(dw) = &opts.dynamic {
            if k > 0 && k % dw.period.max(1) == 0 {
                dw.update(&mut weights, &e.group_gradients, &active, &mask)?;
                e.gradient.iter_mut().for_each(|v| *v = 0.0);
                for g in Group::ALL {
                    let gw = weights.group_weight(g);
                    for ((a, v), m) in e.gradient.iter_mut().zip(&e.group_gradients[g.index()]).zip(&mask) {
                        if *m {
                            *a += gw * v;
                        }
                    }
                }
            }
        }
        state.adam_step(&e.gradient, &adam)?;
        state.iteration += 1;
    }

    // weights stay fixed from here on
    let start = evaluate(&state.params, &weights)?;
    check_finite(&start, &active, state.iteration)?;
    record(&mut state, &mut history, &start, &weights, Phase::Lbfgs);
    checkpoint(&state, &history)?;
    let mut lbfgs = None;
    if opts.schedule.lbfgs.max_iterations > 0 {
        let w = weights;
        let objective = |x: &[f64]| -> Result<Eval<Evaluation>> {
            let e = evaluate(x, &w)?;
            Ok(Eval {
                f: if e.breakdown.first_non_finite().is_some() { f64::NAN } else { e.total() },
                g: e.gradient.clone(),
                extra: e,
            })
        };
        let first = Eval {
            f: start.total(),
            g: start.gradient.clone(),
            extra: start,
        };
        let mut rows = Vec::new();
        let mut best = (state.best_loss, None::<Vec<f64>>);
        let report = lbfgs_run(&mut state, first, &opts.schedule.lbfgs, objective, |s, e| {
            check_finite(&e.extra, &active, s.iteration)?;
            let fixed_total = e.extra.breakdown.weighted_total(&fixed);
            if fixed_total < best.0 {
                best = (fixed_total, Some(s.params.clone()));
            }
            rows.push(HistoryRow {
                iteration: s.iteration,
                phase: Phase::Lbfgs,
                values: e.extra.breakdown.values,
                omega: w.omega,
                total: e.extra.total(),
                best: best.0,
            });
            if let Some(plan) = &opts.checkpoint {
                if s.iteration % plan.every == 0 {
                    for (q, n) in split(nets, &s.params).iter().enumerate() {
                        save_checkpoint(n, &plan.dir.join(format!("iter_{:07}_net{q}.ckpt", s.iteration)))?;
                    }
                }
            }
            Ok(())
        })?;
        log::info!("L-BFGS stopped after {} iterations: {}", report.iterations, report.status.name());
        history.rows.extend(rows);
        if let (loss, Some(p)) = best {
            state.best_loss = loss;
            state.best_params = p;
        }
        lbfgs = Some(report);
    }
    if let Some(plan) = &opts.checkpoint {
        history.write_csv(&plan.dir.join("loss_history.csv"))?;
    }
    Ok(TrainOutcome {
        nets: split(nets, &state.best_params),
        history,
        weights,
        best_loss: state.best_loss,
        lbfgs,
    })
}
