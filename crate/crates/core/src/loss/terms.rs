//! Per-point loss contributions, generic over the scalar so the fast engine
//! (jets) and the reference path (tape) share one definition.

use super::{Component, LossSettings};
use crate::autodiff::Real;
use crate::decomposition::InterfaceTerms;
use crate::error::{Error, Result};
use crate::physics::{entropy_residual, normal_flux, steady_residual, unsteady_residual, FieldPoint};
use crate::sampling::Role;

const RESIDUALS: [Component; 4] = [Component::Mass, Component::MomX, Component::MomY, Component::Energy];

fn residuals<S: Real>(fp: &FieldPoint<S>, s: &LossSettings) -> Result<([S; 4], Option<S>)> {
    let r = if s.unsteady {
        unsteady_residual(fp, s.gamma)?
    } else {
        steady_residual(fp, s.gamma)?
    };
    let e = match s.entropy {
        Some(mode) => Some(entropy_residual(fp, mode, s.epsilon, s.unsteady, s.gamma)?),
        None => None,
    };
    Ok((r, e))
}

/// Squared pointwise contributions of one point of a data or residual set.
///
/// `emit` receives each component with its unnormalized value; the caller
/// averages over the set.
pub fn point_terms<S: Real>(
    role: Role,
    fp: &FieldPoint<S>,
    target: &[f64],
    settings: &LossSettings,
    emit: &mut impl FnMut(Component, S),
) -> Result<()> {
    let w = &fp.prim;
    match role {
        Role::Residual => {
            let (r, e) = residuals(fp, settings)?;
            for (c, r) in RESIDUALS.into_iter().zip(r) {
                emit(c, r.square());
            }
            if let Some(e) = e {
                emit(Component::Entropy, e.square());
            }
        }
        Role::GradientData => {
            let dx = fp.grad[0][0] - target[0];
            let dy = fp.grad[1][0] - target[1];
            emit(Component::GradRho, dx.square() + dy.square());
        }
        Role::Inflow => {
            let mut acc = (w[0] - target[0]).square();
            for c in 1..4 {
                acc = acc + (w[c] - target[c]).square();
            }
            emit(Component::Inflow, acc);
        }
        Role::WallPressure => emit(Component::PStar, (w[3] - target[0]).square()),
        Role::WallSlip => {
            let vn = w[1] * target[0] + w[2] * target[1];
            emit(Component::WallSlip, vn.square());
        }
        Role::Interface => {
            return Err(Error::config("interface points need both adjacent networks"));
        }
    }
    Ok(())
}

fn sum_sq<S: Real>(a: &[S], b: &[S]) -> S {
    let mut acc = (a[0] - b[0]).square();
    for k in 1..a.len() {
        acc = acc + (a[k] - b[k]).square();
    }
    acc
}

/// Continuity contributions at one interface point, as seen by either side.
///
/// The average term is `|w_a - (w_a + w_b)/2|^2 = |w_a - w_b|^2 / 4`, the
/// same for both sides.
pub fn interface_point_terms<S: Real>(
    a: &FieldPoint<S>,
    b: &FieldPoint<S>,
    normal: [f64; 2],
    terms: &InterfaceTerms,
    settings: &LossSettings,
    emit: &mut impl FnMut(Component, S),
) -> Result<()> {
    if terms.average {
        emit(Component::InterfaceAvg, sum_sq(&a.prim, &b.prim) * 0.25);
    }
    if terms.residual {
        let (ra, ea) = residuals(a, settings)?;
        let (rb, eb) = residuals(b, settings)?;
        let mut jump = sum_sq(&ra, &rb);
        if let (Some(ea), Some(eb)) = (ea, eb) {
            jump = jump + (ea - eb).square();
        }
        emit(Component::InterfaceResidual, jump);
    }
    if terms.flux {
        let fa = normal_flux(&a.prim, normal, settings.gamma);
        let fb = normal_flux(&b.prim, normal, settings.gamma);
        emit(Component::InterfaceFlux, sum_sq(&fa, &fb));
    }
    Ok(())
}
