//! Self-checks shared by the `check` command and the acceptance suite:
//! gradients against finite differences, the entropy-pair identity, and the
//! oracles against the equations they solve.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{DualPoint, Jet};
use crate::error::Result;
use crate::geometry::Polygon;
use crate::loss::{LossProblem, LossSettings, LossWeights, Parallelism, SubdomainData};
use crate::network::xavier_init_with;
use crate::oracles::{
    oblique_shock_relations, smooth_density_gradient, smooth_exact, verify_rankine_hugoniot, ExpansionCase,
    ObliqueShockCase, RhResidual, VelocityOrdering, WallCurve, WedgeGeometry, SMOOTH_U, SMOOTH_V,
};
use crate::physics::{
    entropy, entropy_residual, flux_generic, steady_residual, unsteady_residual, EntropyMode, FieldPoint,
    PrimitiveState,
};
use crate::sampling::{PointSet, Role};

/// Outcome of one self-check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Per-parameter agreement of loss gradients with central differences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientAgreement {
    pub parameters: usize,
    /// Fraction of parameters within `tol`.
    pub fraction: f64,
    pub max_rel: f64,
}

/// Relative error with a floor at `1e-6` of the largest gradient entry, so
/// entries that are zero to roundoff are not judged by their own scale.
fn compare_gradients(ad: &[f64], fd: &[f64], tol: f64) -> GradientAgreement {
    let scale = ad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-6 * scale.max(f64::MIN_POSITIVE);
    let rel: Vec<f64> = ad
        .iter()
        .zip(fd)
        .map(|(a, d)| (a - d).abs() / a.abs().max(d.abs()).max(floor))
        .collect();
    GradientAgreement {
        parameters: rel.len(),
        fraction: rel.iter().filter(|r| **r <= tol).count() as f64 / rel.len().max(1) as f64,
        max_rel: rel.iter().fold(0.0f64, |m, v| m.max(*v)),
    }
}

fn random_state<R: Rng>(rng: &mut R) -> PrimitiveState {
    PrimitiveState::new(
        rng.random_range(0.5..2.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(0.3..2.0),
    )
}

/// A small steady PINN loss (residual, gradient data, inflow and pressure
/// terms) on a random network; returns the AD gradient and its central
/// difference estimate with step `h`.
pub fn loss_gradient_pair(seed: u64, h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden = rng.random_range(1..=3);
    let width = rng.random_range(2..=20);
    let mut sizes = vec![2];
    sizes.extend(std::iter::repeat_n(width, hidden));
    sizes.push(4);
    let mut net = xavier_init_with(&sizes, rng.random(), 10.0, 1e-6)?;
    // positive outputs keep density and pressure admissible
    let last = net.layer_count() - 1;
    let bias_at = net.slots()[last].bias;
    let values = net.values_mut();
    values[bias_at] = 1.5;
    values[bias_at + 3] = 1.5;
    for a in net.slope_indices().collect::<Vec<_>>() {
        net.values_mut()[a] = rng.random_range(0.05..0.2);
    }

    let square = Polygon::rectangle(0.0, 1.0, 0.0, 1.0);
    let mut residual = PointSet::new(Role::Residual, 0);
    for p in square.sample_uniform(&mut rng, 12) {
        residual.push([p[0], p[1], 0.0], &[]);
    }
    let mut gradient = PointSet::new(Role::GradientData, 0);
    let mut inflow = PointSet::new(Role::Inflow, 0);
    let mut pressure = PointSet::new(Role::WallPressure, 0);
    for _ in 0..4 {
        let p = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), 0.0];
        gradient.push(p, &[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
        inflow.push([0.0, p[1], 0.0], &random_state(&mut rng).to_array());
        pressure.push([p[0], 0.0, 0.0], &[rng.random_range(0.5..1.5)]);
    }
    let settings = LossSettings {
        gamma: 1.4,
        entropy: None,
        epsilon: 1e-4,
        unsteady: false,
    };
    let problem = LossProblem::new(
        vec![SubdomainData {
            sets: vec![residual, gradient, inflow, pressure],
            quadrature: Vec::new(),
        }],
        Vec::new(),
        settings,
    )?;
    let weights = LossWeights::default();
    let nets = vec![net];
    let ad = problem.evaluate(&nets, &weights, true, Parallelism::Sequential)?.gradient;
    let mut probe = nets.clone();
    let mut fd = Vec::with_capacity(ad.len());
    for i in 0..ad.len() {
        let x0 = nets[0].values()[i];
        probe[0].values_mut()[i] = x0 + h;
        let fp = problem.evaluate(&probe, &weights, false, Parallelism::Sequential)?.total();
        probe[0].values_mut()[i] = x0 - h;
        let fm = problem.evaluate(&probe, &weights, false, Parallelism::Sequential)?.total();
        probe[0].values_mut()[i] = x0;
        fd.push((fp - fm) / (2.0 * h));
    }
    Ok((ad, fd))
}

/// Gradient check over `trials` random networks, pooled over parameters.
pub fn gradient_check(trials: usize, seed: u64) -> Result<(GradientAgreement, Check)> {
    let (mut ad, mut fd) = (Vec::new(), Vec::new());
    let mut worst = 0.0f64;
    let mut within = 0usize;
    for k in 0..trials {
        let (a, d) = loss_gradient_pair(seed.wrapping_add(k as u64), 1e-4)?;
        let g = compare_gradients(&a, &d, 1e-5);
        worst = worst.max(g.max_rel);
        within += (g.fraction * g.parameters as f64).round() as usize;
        ad.extend(a);
        fd.extend(d);
    }
    let total = ad.len();
    let agreement = GradientAgreement {
        parameters: total,
        fraction: within as f64 / total.max(1) as f64,
        max_rel: worst,
    };
    let passed = agreement.fraction >= 0.99 && agreement.max_rel <= 1e-4;
    let check = Check {
        name: "loss gradient vs central differences",
        passed,
        detail: format!(
            "{trials} networks, {total} parameters, {:.2}% within 1e-5, max rel {:.2e}",
            100.0 * agreement.fraction,
            agreement.max_rel
        ),
    };
    Ok((agreement, check))
}

/// Largest relative violation of `eta' G_i' = phi_i'` (conserved-variable
/// Jacobians by forward AD) over `count` random admissible states.
pub fn entropy_pair_check(count: usize, seed: u64, gamma: f64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let s = random_state(&mut rng);
        let cons = s.to_conserved(gamma).expect("admissible").to_array();
        let u: [Jet<4>; 4] = std::array::from_fn(|k| Jet::variable(cons[k], k));
        let rho = u[0];
        let vx = u[1] / rho;
        let vy = u[2] / rho;
        let p = (u[3] - (u[1] * u[1] + u[2] * u[2]) / rho * 0.5) * (gamma - 1.0);
        let w = [rho, vx, vy, p];
        let eta = entropy(&w, gamma);
        let (g1, g2) = flux_generic(&w, gamma);
        for (g, phi) in [(g1, vx * eta), (g2, vy * eta)] {
            let scale = phi.grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for j in 0..4 {
                let lhs: f64 = (0..4).map(|k| eta.grad[k] * g[k].grad[j]).sum();
                worst = worst.max((lhs - phi.grad[j]).abs() / scale);
            }
        }
    }
    Check {
        name: "entropy-entropy flux pair",
        passed: worst <= 1e-7,
        detail: format!("{count} states, max relative violation {worst:.2e} (tol 1e-7)"),
    }
}

/// Unsteady and entropy residuals of the smooth wave from closed-form
/// derivatives at `count` random points of (-1, 1)^2 x (0, 1).
pub fn smooth_residual_check(count: usize, seed: u64, gamma: f64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut res, mut ent) = (0.0f64, 0.0f64);
    for _ in 0..count {
        let (x, y, t) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..1.0));
        let s = smooth_exact(x, y, t);
        let g = smooth_density_gradient(x, y, t);
        let rho_t = -(SMOOTH_U * g[0] + SMOOTH_V * g[1]);
        let w = [
            DualPoint::new(s.rho, &[g[0], g[1], rho_t]),
            DualPoint::new(s.u, &[0.0; 3]),
            DualPoint::new(s.v, &[0.0; 3]),
            DualPoint::new(s.p, &[0.0; 3]),
        ];
        let fp = FieldPoint::from_duals(&w);
        let r = unsteady_residual(&fp, gamma)?;
        res = r.iter().fold(res, |m, v| m.max(v.abs()));
        ent = ent.max(entropy_residual(&fp, EntropyMode::Relu, 1e-4, true, gamma)?.abs());
    }
    Ok(Check {
        name: "smooth wave residuals",
        passed: res < 1e-10 && ent < 1e-10,
        detail: format!("{count} points, max |residual| {res:.2e}, max entropy residual {ent:.2e} (tol 1e-10)"),
    })
}

/// Expansion case used by the checks: the preset inlet in freestream units.
pub fn expansion_case(gamma: f64) -> Result<ExpansionCase> {
    let inlet = PrimitiveState::new(1.0, 1.0, 0.0, 1.01e5 / (1.23 * 678.1 * 678.1));
    ExpansionCase::new(WedgeGeometry::new(10f64.to_radians(), WallCurve::Tanh)?, inlet, gamma)
}

/// Steady residual of the expansion fan with central differences (`h`) at
/// random points at least `margin` radians from both Mach lines and 0.05
/// from the corner.
pub fn expansion_residual_check(count: usize, seed: u64, gamma: f64, h: f64, margin: f64) -> Result<Check> {
    let case = expansion_case(gamma)?;
    let domain = case.geometry.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut used = 0;
    while used < count {
        let p = domain.sample_uniform(&mut rng, 1)[0];
        if case.mach_line_distance(p) < margin || p[0].hypot(p[1]) < 0.05 || domain.boundary_distance(p) < 2.0 * h {
            continue;
        }
        used += 1;
        let s = case.exact(p)?.to_array();
        let mut grad = [[0.0; 4]; crate::autodiff::MAX_DIRS];
        for (d, row) in grad.iter_mut().take(2).enumerate() {
            let (mut a, mut b) = (p, p);
            a[d] += h;
            b[d] -= h;
            let (fa, fb) = (case.exact(a)?.to_array(), case.exact(b)?.to_array());
            *row = std::array::from_fn(|k| (fa[k] - fb[k]) / (2.0 * h));
        }
        let fp = FieldPoint {
            prim: s,
            grad,
            dirs: 2,
        };
        let r = steady_residual(&fp, gamma)?;
        worst = r.iter().fold(worst, |m, v| m.max(v.abs()));
    }
    Ok(Check {
        name: "expansion fan steady residual",
        passed: worst < 1e-6,
        detail: format!("{count} points, max |residual| {worst:.2e} (tol 1e-6, FD h {h:e})"),
    })
}

/// Rounds to `digits` significant figures.
pub fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(digits - 1 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

/// Result of checking the printed oblique-shock states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObliqueCheck {
    pub ordering: VelocityOrdering,
    pub residual: RhResidual,
    /// Printed density ratio over the normal-shock formula's, minus one.
    pub density_ratio_error: f64,
    pub beta: f64,
}

/// Jump residuals of the printed states (rounded to four figures) across
/// the weak shock for the printed pre state, with the velocity ordering that
/// fits best.
pub fn oblique_printed_check(gamma: f64) -> Result<(ObliqueCheck, Check)> {
    let theta = 10f64.to_radians();
    let round = |s: PrimitiveState| {
        PrimitiveState::new(round_sig(s.rho, 4), round_sig(s.u, 4), round_sig(s.v, 4), round_sig(s.p, 4))
    };
    let mut best: Option<ObliqueCheck> = None;
    for ordering in [VelocityOrdering::SinCos, VelocityOrdering::CosSin] {
        let (pre, post) = ObliqueShockCase::printed_states(ordering);
        let (pre, post) = (round(pre), round(post));
        let rel = oblique_shock_relations(pre.mach(gamma), theta, gamma)?;
        let residual = verify_rankine_hugoniot(&pre, &post, rel.beta, gamma);
        let mn = pre.mach(gamma) * rel.beta.sin();
        let formula = (gamma + 1.0) * mn * mn / ((gamma - 1.0) * mn * mn + 2.0);
        let candidate = ObliqueCheck {
            ordering,
            residual,
            density_ratio_error: (post.rho / pre.rho) / formula - 1.0,
            beta: rel.beta,
        };
        if best.is_none_or(|b| candidate.residual.max() < b.residual.max()) {
            best = Some(candidate);
        }
    }
    let b = best.expect("two orderings tried");
    let r = b.residual;
    let passed = r.max() <= 0.01 && b.density_ratio_error.abs() <= 0.005;
    let check = Check {
        name: "printed oblique-shock states",
        passed,
        detail: format!(
            "{:?} ordering, beta {:.3} deg; RH residuals mass {:.2}%, normal mom {:.2}%, tangential mom {:.2}%, energy {:.2}% (tol 1%); density ratio off by {:.2}% (tol 0.5%)",
            b.ordering,
            b.beta.to_degrees(),
            100.0 * r.mass,
            100.0 * r.normal_momentum,
            100.0 * r.tangential_momentum,
            100.0 * r.energy,
            100.0 * b.density_ratio_error
        ),
    };
    Ok((b, check))
}

/// Every fast self-check, in a fixed order.
pub fn run_all(gamma: f64) -> Result<Vec<Check>> {
    Ok(vec![
        gradient_check(50, 7)?.1,
        entropy_pair_check(100, 11, gamma),
        smooth_residual_check(10_000, 13, gamma)?,
        expansion_residual_check(2_000, 17, gamma, 1e-6, 0.02)?,
        oblique_printed_check(gamma)?.1,
    ])
}
