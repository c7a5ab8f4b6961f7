mod common;

use shockpinn::loss::{DynamicWeights, LossWeights, Parallelism};
use shockpinn::optimize::{train, OptimizerSchedule, Phase, TrainOptions};

fn options(adam: usize, lbfgs: usize) -> TrainOptions {
    TrainOptions {
        schedule: OptimizerSchedule::new(adam, lbfgs),
        dynamic: None,
        adaptive: true,
        parallelism: Parallelism::Sequential,
        checkpoint: None,
    }
}

#[test]
fn training_is_deterministic() {
    let (net, problem) = common::random_problem(5, true, true);
    let opts = options(15, 10);
    let a = train(std::slice::from_ref(&net), &problem, LossWeights::default(), &opts).unwrap();
    let b = train(std::slice::from_ref(&net), &problem, LossWeights::default(), &opts).unwrap();
    assert_eq!(a.history.to_csv(), b.history.to_csv());
    assert_eq!(a.nets, b.nets);
}

#[test]
fn zero_iterations_return_the_initial_network() {
    let (net, problem) = common::random_problem(6, false, false);
    let out = train(std::slice::from_ref(&net), &problem, LossWeights::default(), &options(0, 0)).unwrap();
    assert_eq!(out.nets[0], net);
    assert_eq!(out.history.rows.len(), 1);
    assert_eq!(out.history.rows[0].phase, Phase::Lbfgs);
}

#[test]
fn training_reduces_the_loss() {
    let (net, problem) = common::random_problem(7, true, false);
    let out = train(std::slice::from_ref(&net), &problem, LossWeights::default(), &options(100, 50)).unwrap();
    let first = out.history.rows[0].total;
    assert!(out.best_loss < 0.5 * first, "{} vs {first}", out.best_loss);
    let bests: Vec<f64> = out.history.rows.iter().map(|r| r.best).collect();
    assert!(bests.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn dynamic_weights_stay_positive_and_are_logged() {
    let (net, problem) = common::random_problem(8, true, false);
    let mut opts = options(60, 0);
    opts.dynamic = Some(DynamicWeights { lambda: 0.1, period: 5 });
    let out = train(std::slice::from_ref(&net), &problem, LossWeights::default(), &opts).unwrap();
    for row in &out.history.rows {
        assert!(row.omega.iter().all(|w| *w > 0.0 && w.is_finite()), "{:?}", row.omega);
    }
    assert!(out.history.rows.iter().any(|r| r.omega[1] != 1.0));
    let header = out.history.to_csv().lines().next().unwrap().to_string();
    for name in ["omega_2", "omega_3", "omega_4"] {
        assert!(header.contains(name));
    }
}

#[test]
fn frozen_slopes_do_not_move() {
    let (net, problem) = common::random_problem(9, false, false);
    let mut opts = options(20, 5);
    opts.adaptive = false;
    let out = train(std::slice::from_ref(&net), &problem, LossWeights::default(), &opts).unwrap();
    for i in net.slope_indices() {
        assert_eq!(out.nets[0].values()[i], net.values()[i]);
    }
}
