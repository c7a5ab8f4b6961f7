//! PINN and XPINN objectives assembled from point sets and network outputs.

mod engine;
mod terms;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NetworkParams;
use crate::physics::{EntropyMode, GAMMA};

pub use engine::{
    global_conservation_terms, pinn_loss, xpinn_loss, Evaluation, InterfaceData, LossProblem,
    Parallelism, SubdomainData, CHUNK,
};
pub use terms::{interface_point_terms, point_terms};

/// Every named loss component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Component {
    Mass,
    MomX,
    MomY,
    Energy,
    Entropy,
    GradRho,
    Inflow,
    PStar,
    GlobalMass,
    GlobalMomentum,
    GlobalEnergy,
    WallSlip,
    InterfaceAvg,
    InterfaceResidual,
    InterfaceFlux,
}

pub const COMPONENTS: usize = 15;

impl Component {
    pub const ALL: [Component; COMPONENTS] = [
        Component::Mass,
        Component::MomX,
        Component::MomY,
        Component::Energy,
        Component::Entropy,
        Component::GradRho,
        Component::Inflow,
        Component::PStar,
        Component::GlobalMass,
        Component::GlobalMomentum,
        Component::GlobalEnergy,
        Component::WallSlip,
        Component::InterfaceAvg,
        Component::InterfaceResidual,
        Component::InterfaceFlux,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::Mass => "mse_mass",
            Component::MomX => "mse_mom_x",
            Component::MomY => "mse_mom_y",
            Component::Energy => "mse_energy",
            Component::Entropy => "mse_entropy",
            Component::GradRho => "mse_grad_rho",
            Component::Inflow => "mse_inflow",
            Component::PStar => "mse_p_star",
            Component::GlobalMass => "mse_global_mass",
            Component::GlobalMomentum => "mse_global_momentum",
            Component::GlobalEnergy => "mse_global_energy",
            Component::WallSlip => "mse_wall_slip",
            Component::InterfaceAvg => "mse_interface_avg",
            Component::InterfaceResidual => "mse_interface_residual",
            Component::InterfaceFlux => "mse_interface_flux",
        }
    }

    pub fn group(self) -> Group {
        match self {
            Component::Mass | Component::MomX | Component::MomY | Component::Energy | Component::Entropy => {
                Group::Residual
            }
            Component::GradRho => Group::GradRho,
            Component::Inflow => Group::Inflow,
            Component::PStar => Group::PStar,
            Component::GlobalMass | Component::GlobalMomentum | Component::GlobalEnergy => Group::Global,
            Component::WallSlip => Group::WallSlip,
            Component::InterfaceAvg | Component::InterfaceResidual | Component::InterfaceFlux => {
                Group::Interface
            }
        }
    }
}

/// Terms sharing one weight. The first six carry the weights `w1..w6`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Group {
    Residual,
    GradRho,
    Inflow,
    PStar,
    Global,
    WallSlip,
    Interface,
}

pub const GROUPS: usize = 7;

impl Group {
    pub const ALL: [Group; GROUPS] = [
        Group::Residual,
        Group::GradRho,
        Group::Inflow,
        Group::PStar,
        Group::Global,
        Group::WallSlip,
        Group::Interface,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Group::Residual => "residual",
            Group::GradRho => "grad_rho",
            Group::Inflow => "inflow",
            Group::PStar => "p_star",
            Group::Global => "global",
            Group::WallSlip => "wall_slip",
            Group::Interface => "interface",
        }
    }
}

/// Loss weights: `omega[k]` multiplies group `k` (`omega[0]` is the fixed
/// residual weight); `interface` holds the average, residual-continuity and
/// flux-continuity weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub omega: [f64; 6],
    pub interface: [f64; 3],
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            omega: [1.0; 6],
            interface: [1.0; 3],
        }
    }
}

impl LossWeights {
    pub fn group_weight(&self, g: Group) -> f64 {
        match g {
            Group::Interface => 1.0,
            other => self.omega[other.index()],
        }
    }

    /// Multiplier applied inside a group, before the group weight.
    pub fn multiplier(&self, c: Component) -> f64 {
        match c {
            Component::InterfaceAvg => self.interface[0],
            Component::InterfaceResidual => self.interface[1],
            Component::InterfaceFlux => self.interface[2],
            _ => 1.0,
        }
    }

    pub fn weight(&self, c: Component) -> f64 {
        self.group_weight(c.group()) * self.multiplier(c)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            omega: self.omega.map(|w| w * factor),
            interface: self.interface.map(|w| w * factor),
        }
    }
}

/// Named component values and their weighted total.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub values: [f64; COMPONENTS],
    pub total: f64,
}

impl Default for LossBreakdown {
    fn default() -> Self {
        Self {
            values: [0.0; COMPONENTS],
            total: 0.0,
        }
    }
}

impl LossBreakdown {
    pub fn get(&self, c: Component) -> f64 {
        self.values[c.index()]
    }

    /// Sum of the four conservation-law terms and the entropy term.
    pub fn mse_f(&self) -> f64 {
        [Component::Mass, Component::MomX, Component::MomY, Component::Energy, Component::Entropy]
            .iter()
            .map(|&c| self.get(c))
            .sum()
    }

    pub fn weighted_total(&self, w: &LossWeights) -> f64 {
        Component::ALL.iter().map(|&c| w.weight(c) * self.get(c)).sum()
    }

    pub fn with_total(mut self, w: &LossWeights) -> Self {
        self.total = self.weighted_total(w);
        self
    }

    pub fn add(&mut self, other: &LossBreakdown) {
        for (a, b) in self.values.iter_mut().zip(other.values) {
            *a += b;
        }
        self.total += other.total;
    }

    /// First non-finite component, if any.
    pub fn first_non_finite(&self) -> Option<Component> {
        Component::ALL.into_iter().find(|c| !self.get(*c).is_finite())
    }
}

/// Shared physics settings of the loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSettings {
    pub gamma: f64,
    /// `None` drops the entropy term.
    pub entropy: Option<EntropyMode>,
    pub epsilon: f64,
    /// Time is the third input and the residual includes `d/dt U`.
    pub unsteady: bool,
}

impl Default for LossSettings {
    fn default() -> Self {
        Self {
            gamma: GAMMA,
            entropy: Some(EntropyMode::Relu),
            epsilon: 1e-4,
            unsteady: false,
        }
    }
}

/// Gradient-statistics weight adaptation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicWeights {
    /// Mixing rate in [0, 1].
    pub lambda: f64,
    /// Update period in optimizer iterations.
    pub period: usize,
}

impl Default for DynamicWeights {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            period: 10,
        }
    }
}

/// Outcome of one dynamic-weight update.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightUpdate {
    /// Groups skipped because their mean gradient vanished.
    pub skipped: Vec<Group>,
}

impl DynamicWeights {
    /// Updates `omega[1..6]` for the `active` groups from per-group gradients
    /// (unweighted), restricted to entries where `mask` is true:
    /// `w_hat = max|grad residual| / mean|grad(w_i * MSE_i)|`, then
    /// `w <- (1 - lambda) w + lambda w_hat`.
    pub fn update(
        &self,
        weights: &mut LossWeights,
        group_grads: &[Vec<f64>],
        active: &[Group],
        mask: &[bool],
    ) -> Result<WeightUpdate> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::config("dynamic-weight lambda must lie in [0, 1]"));
        }
        fn pick<'a>(g: &'a [f64], mask: &'a [bool]) -> impl Iterator<Item = f64> + 'a {
            g.iter().zip(mask).filter(|(_, &m)| m).map(|(v, _)| v.abs())
        }
        let residual = &group_grads[Group::Residual.index()];
        let max_r = pick(residual, mask).fold(0.0, f64::max);
        let mut out = WeightUpdate::default();
        for &g in active {
            if matches!(g, Group::Residual | Group::Interface) {
                continue;
            }
            let w = &mut weights.omega[g.index()];
            let (sum, n) = pick(&group_grads[g.index()], mask).fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            let mean = *w * sum / n.max(1) as f64;
            if !(mean > 0.0) || !mean.is_finite() {
                log::warn!("dynamic weight for {} skipped: zero mean gradient", g.name());
                out.skipped.push(g);
                continue;
            }
            let hat = max_r / mean;
            *w = (1.0 - self.lambda) * *w + self.lambda * hat;
        }
        Ok(out)
    }
}

/// Which data terms an experiment's loss uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossRecipe {
    pub gradient: bool,
    pub inflow: bool,
    pub pressure: bool,
    pub global: bool,
    pub wall_slip: bool,
}

impl LossRecipe {
    pub fn active_groups(&self) -> Vec<Group> {
        let mut g = vec![Group::Residual];
        for (on, grp) in [
            (self.gradient, Group::GradRho),
            (self.inflow, Group::Inflow),
            (self.pressure, Group::PStar),
            (self.global, Group::Global),
            (self.wall_slip, Group::WallSlip),
        ] {
            if on {
                g.push(grp);
            }
        }
        g
    }
}

/// Indicator of trainable entries: slopes are frozen when `adaptive` is off.
pub fn trainable_mask(nets: &[NetworkParams], adaptive: bool) -> Vec<bool> {
    let mut mask = Vec::new();
    for n in nets {
        let mut m = vec![true; n.len()];
        if !adaptive {
            for i in n.slope_indices() {
                m[i] = false;
            }
        }
        mask.extend(m);
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dynamic_weight_arithmetic() {
        let dw = DynamicWeights { lambda: 0.1, period: 10 };
        let mut w = LossWeights::default();
        let mut grads = vec![vec![0.0; 2]; GROUPS];
        grads[0] = vec![10.0, -3.0];
        grads[1] = vec![2.0, -2.0];
        dw.update(&mut w, &grads, &[Group::Residual, Group::GradRho], &[true, true]).unwrap();
        assert!((w.omega[1] - 1.4).abs() < 1e-15);
    }

    #[test]
    fn frozen_and_balanced_weights() {
        let mut grads = vec![vec![0.0; 2]; GROUPS];
        grads[0] = vec![1.0, 1.0];
        grads[2] = vec![1.0, -1.0];
        let mut w = LossWeights::default();
        DynamicWeights { lambda: 0.0, period: 1 }
            .update(&mut w, &grads, &[Group::Inflow], &[true; 2])
            .unwrap();
        assert_eq!(w.omega[2], 1.0);
        DynamicWeights { lambda: 0.5, period: 1 }
            .update(&mut w, &grads, &[Group::Inflow], &[true; 2])
            .unwrap();
        assert_eq!(w.omega[2], 1.0);
    }

    #[test]
    fn zero_denominator_is_skipped() {
        let grads = vec![vec![1.0, 0.0]; GROUPS]
            .into_iter()
            .enumerate()
            .map(|(i, g)| if i == 3 { vec![0.0; 2] } else { g })
            .collect::<Vec<_>>();
        let mut w = LossWeights::default();
        let out = DynamicWeights::default()
            .update(&mut w, &grads, &[Group::PStar], &[true; 2])
            .unwrap();
        assert_eq!(out.skipped, vec![Group::PStar]);
        assert_eq!(w.omega[3], 1.0);
    }

    #[test]
    fn breakdown_total() {
        let mut b = LossBreakdown::default();
        b.values[Component::Mass.index()] = 0.01;
        b.values[Component::Inflow.index()] = 2.0;
        let w = LossWeights { omega: [1.0, 1.0, 3.0, 1.0, 1.0, 1.0], interface: [1.0; 3] };
        assert!((b.weighted_total(&w) - 6.01).abs() < 1e-15);
        assert!((b.mse_f() - 0.01).abs() < 1e-18);
    }
}
