//! Adam followed by L-BFGS, and the training loop that drives them.

mod lbfgs;
mod train;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lbfgs::{lbfgs_run, line_search, Eval, LbfgsReport, LbfgsStatus};
pub use train::{train, CheckpointPlan, HistoryRow, LossHistory, Phase, TrainOptions, TrainOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            iterations: 0,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LbfgsConfig {
    pub max_iterations: usize,
    pub memory: usize,
    /// Sufficient-decrease constant of the strong Wolfe conditions.
    pub c1: f64,
    /// Curvature constant of the strong Wolfe conditions.
    pub c2: f64,
    /// Function evaluations allowed per line search.
    pub max_line_search: usize,
    /// Stop when the gradient norm drops below this.
    pub tol_grad: f64,
    /// Stop when the relative loss decrease of a step drops below this.
    pub tol_f: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            max_iterations: 0,
            memory: 50,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 25,
            tol_grad: 1e-9,
            tol_f: 1e-12,
        }
    }
}

/// Two-phase optimizer schedule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSchedule {
    pub adam: AdamConfig,
    pub lbfgs: LbfgsConfig,
}

impl OptimizerSchedule {
    pub fn new(adam_iterations: usize, lbfgs_iterations: usize) -> Self {
        let mut s = Self::default();
        s.adam.iterations = adam_iterations;
        s.lbfgs.max_iterations = lbfgs_iterations;
        s
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.adam;
        if !(a.learning_rate > 0.0) {
            return Err(Error::config("Adam learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || a.epsilon < 0.0 {
            return Err(Error::config("Adam moment rates must lie in [0, 1) and epsilon be nonnegative"));
        }
        let l = &self.lbfgs;
        if l.memory < 1 {
            return Err(Error::config("L-BFGS memory must be at least 1"));
        }
        if !(0.0 < l.c1 && l.c1 < l.c2 && l.c2 < 1.0) {
            return Err(Error::config("line search needs 0 < c1 < c2 < 1"));
        }
        if l.max_line_search == 0 {
            return Err(Error::config("line search needs at least one evaluation"));
        }
        Ok(())
    }
}

/// Optimizer state shared by both phases.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub iteration: usize,
    pub params: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub adam_steps: i32,
    /// Curvature pairs `(s, y)`, oldest first.
    pub pairs: VecDeque<(Vec<f64>, Vec<f64>)>,
    pub best_loss: f64,
    pub best_params: Vec<f64>,
}

impl TrainState {
    pub fn new(params: Vec<f64>) -> Self {
        let n = params.len();
        Self {
            iteration: 0,
            best_params: params.clone(),
            params,
            m: vec![0.0; n],
            v: vec![0.0; n],
            adam_steps: 0,
            pairs: VecDeque::new(),
            best_loss: f64::INFINITY,
        }
    }

    /// One bias-corrected Adam update.
    pub fn adam_step(&mut self, grad: &[f64], cfg: &AdamConfig) -> Result<()> {
        if grad.len() != self.params.len() {
            return Err(Error::config("gradient length does not match parameters"));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::Divergence(format!("non-finite gradient entry {i}")));
        }
        self.adam_steps += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.adam_steps);
        let c2 = 1.0 - cfg.beta2.powi(self.adam_steps);
        for (((p, m), v), &g) in self.params.iter_mut().zip(&mut self.m).zip(&mut self.v).zip(grad) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let mh = *m / c1;
            let vh = *v / c2;
            *p -= cfg.learning_rate * mh / (vh.sqrt() + cfg.epsilon);
        }
        Ok(())
    }

    /// Keeps `params` if `loss` beats the best so far.
    pub fn record_best(&mut self, loss: f64, params: &[f64]) -> bool {
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_params.clear();
            self.best_params.extend_from_slice(params);
            true
        } else {
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_adam_step_value() {
        let mut s = TrainState::new(vec![0.0]);
        s.adam_step(&[1.0], &AdamConfig::default()).unwrap();
        // hand evaluation: m_hat = v_hat = 1, step = 1e-3 / (1 + 1e-8)
        assert!((s.params[0] + 1e-3 / (1.0 + 1e-8)).abs() < 1e-18);
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut s = TrainState::new(vec![0.3, -1.0]);
        s.adam_step(&[0.0, 0.0], &AdamConfig::default()).unwrap();
        assert_eq!(s.params, vec![0.3, -1.0]);
    }

    #[test]
    fn first_step_is_odd_and_bounded() {
        let g = [3.0, -1e-3, 250.0];
        let cfg = AdamConfig::default();
        let mut a = TrainState::new(vec![0.0; 3]);
        let mut b = TrainState::new(vec![0.0; 3]);
        a.adam_step(&g, &cfg).unwrap();
        b.adam_step(&g.map(|x| -x), &cfg).unwrap();
        for j in 0..3 {
            assert_eq!(a.params[j], -b.params[j]);
            assert!(a.params[j].abs() <= cfg.learning_rate * (1.0 + 1e-6));
        }
    }

    #[test]
    fn non_finite_gradient_is_divergence() {
        let mut s = TrainState::new(vec![0.0; 2]);
        let e = s.adam_step(&[1.0, f64::NAN], &AdamConfig::default()).unwrap_err();
        assert!(matches!(e, Error::Divergence(_)));
    }

    #[test]
    fn schedule_validation() {
        assert!(OptimizerSchedule::new(10, 10).validate().is_ok());
        let mut s = OptimizerSchedule::default();
        s.lbfgs.memory = 0;
        assert!(s.validate().is_err());
        let mut s = OptimizerSchedule::default();
        s.adam.learning_rate = 0.0;
        assert!(s.validate().is_err());
    }
}
