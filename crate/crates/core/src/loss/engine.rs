//! Batched evaluation of the loss and its per-group parameter gradients.
//!
//! Points are cut into fixed-size chunks. Each chunk runs one batched forward
//! pass, builds per-point jets over the network outputs and their input
//! derivatives, and feeds the jet gradients back through the batched reverse
//! sweep. Chunk results are reduced in task order, so the result does not
//! depend on the thread count.

use super::{point_terms, interface_point_terms, Component, Group, LossBreakdown, LossSettings, LossWeights, COMPONENTS, GROUPS};
use crate::autodiff::{parameter_gradient, Jet, Real, Tape, Var, MAX_DIRS};
use crate::decomposition::InterfaceTerms;
use crate::error::{Error, Result};
use crate::geometry::QuadraturePoint;
use crate::network::{forward_on_tape, BatchForward, NetworkParams};
use crate::physics::{normal_flux, FieldPoint};
use crate::sampling::{PointSet, Role};

/// Points per work item.
pub const CHUNK: usize = 256;

/// Variables per network in a point jet: 4 channels times (value + 3 tangents).
const STRIDE: usize = 16;

/// How chunk work is scheduled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    /// Rayon's current pool; runs sequentially when built without `parallel`.
    Rayon,
}

impl Default for Parallelism {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Parallelism::Rayon
        } else {
            Parallelism::Sequential
        }
    }
}

/// Point sets and boundary quadrature owned by one subdomain network.
#[derive(Clone, Debug, Default)]
pub struct SubdomainData {
    pub sets: Vec<PointSet>,
    /// Closed-boundary quadrature for the global conservation terms; empty
    /// disables them.
    pub quadrature: Vec<QuadraturePoint>,
}

/// Interface points (targets hold the unit normal) between two subdomains.
#[derive(Clone, Debug)]
pub struct InterfaceData {
    pub pair: (usize, usize),
    pub points: PointSet,
    pub terms: InterfaceTerms,
}

#[derive(Clone, Debug)]
pub struct LossProblem {
    pub subdomains: Vec<SubdomainData>,
    pub interfaces: Vec<InterfaceData>,
    pub settings: LossSettings,
}

/// Loss value, breakdowns and gradients of one evaluation.
#[derive(Clone, Debug)]
pub struct Evaluation {
    /// Sum over subdomains; `total` is weighted.
    pub breakdown: LossBreakdown,
    pub per_subdomain: Vec<LossBreakdown>,
    /// Unweighted gradient of each group (interface multipliers applied),
    /// over the concatenated parameters; empty without gradients.
    pub group_gradients: Vec<Vec<f64>>,
    /// Gradient of the weighted total.
    pub gradient: Vec<f64>,
}

impl Evaluation {
    pub fn total(&self) -> f64 {
        self.breakdown.total
    }
}

fn group_of(role: Role) -> Group {
    match role {
        Role::Residual => Group::Residual,
        Role::GradientData => Group::GradRho,
        Role::Inflow => Group::Inflow,
        Role::WallPressure => Group::PStar,
        Role::WallSlip => Group::WallSlip,
        Role::Interface => Group::Interface,
    }
}

enum Task {
    Set { sub: usize, set: usize, start: usize, end: usize },
    Interface { idx: usize, start: usize, end: usize },
    Global { sub: usize },
}

struct Partial {
    values: Vec<(usize, [f64; COMPONENTS])>,
    group: Group,
    grads: Vec<(usize, Vec<f64>)>,
}

fn jet_point<const N: usize>(fwd: &BatchForward, p: usize, offset: usize) -> FieldPoint<Jet<N>> {
    let d = fwd.dirs();
    FieldPoint {
        prim: std::array::from_fn(|c| Jet::variable(fwd.value(p, c), offset + c * 4)),
        grad: std::array::from_fn(|dir| {
            std::array::from_fn(|c| {
                if dir < d {
                    Jet::variable(fwd.tangent(p, dir, c), offset + c * 4 + dir + 1)
                } else {
                    Jet::constant(0.0)
                }
            })
        }),
        dirs: d,
    }
}

fn scatter(fwd: &BatchForward, adj: &mut ndarray::Array2<f64>, p: usize, grad: &[f64], coef: f64) {
    for c in 0..4 {
        for blk in 0..=fwd.dirs() {
            let g = grad[c * 4 + blk];
            if g != 0.0 {
                fwd.add_adjoint(adj, p, c, blk, coef * g);
            }
        }
    }
}

fn chunks(len: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..len.div_ceil(CHUNK)).map(move |k| (k * CHUNK, ((k + 1) * CHUNK).min(len)))
}

fn run_tasks<T, F>(tasks: &[Task], par: Parallelism, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Task) -> Result<T> + Sync,
{
    match par {
        #[cfg(feature = "parallel")]
        Parallelism::Rayon => {
            use rayon::prelude::*;
            tasks.par_iter().map(&f).collect()
        }
        _ => tasks.iter().map(f).collect(),
    }
}

fn closure_error(q: &[QuadraturePoint]) -> f64 {
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    for p in q {
        sx += p.weight * p.normal[0];
        sy += p.weight * p.normal[1];
        sw += p.weight;
    }
    sx.hypot(sy) / sw.max(1.0)
}

impl LossProblem {
    pub fn new(subdomains: Vec<SubdomainData>, interfaces: Vec<InterfaceData>, settings: LossSettings) -> Result<Self> {
        let problem = Self {
            subdomains,
            interfaces,
            settings,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        if self.subdomains.is_empty() {
            return Err(Error::config("loss needs at least one subdomain"));
        }
        for (s, sub) in self.subdomains.iter().enumerate() {
            for set in &sub.sets {
                if set.role == Role::Interface {
                    return Err(Error::config(format!("subdomain {s} holds interface points")));
                }
                if set.targets.len() != set.len() * set.role.target_width() {
                    return Err(Error::config(format!("{} set of subdomain {s} has malformed targets", set.role.name())));
                }
            }
            if !sub.quadrature.is_empty() {
                if self.settings.unsteady {
                    return Err(Error::config("global conservation terms need a steady problem"));
                }
                let gap = closure_error(&sub.quadrature);
                if gap > 1e-8 {
                    return Err(Error::config(format!(
                        "boundary quadrature of subdomain {s} is not a closed loop (|sum w n| = {gap:e})"
                    )));
                }
            }
        }
        for (i, itf) in self.interfaces.iter().enumerate() {
            let (a, b) = itf.pair;
            if a == b || a >= self.subdomains.len() || b >= self.subdomains.len() {
                return Err(Error::config(format!("interface {i} joins invalid subdomains {a} and {b}")));
            }
            if itf.points.role != Role::Interface {
                return Err(Error::config(format!("interface {i} points must have the interface role")));
            }
        }
        Ok(())
    }

    /// Groups with at least one contributing point.
    pub fn active_groups(&self) -> Vec<Group> {
        let mut on = [false; GROUPS];
        for sub in &self.subdomains {
            for set in sub.sets.iter().filter(|s| !s.is_empty()) {
                on[group_of(set.role).index()] = true;
            }
            if !sub.quadrature.is_empty() {
                on[Group::Global.index()] = true;
            }
        }
        if self.interfaces.iter().any(|i| !i.points.is_empty()) {
            on[Group::Interface.index()] = true;
        }
        Group::ALL.into_iter().filter(|g| on[g.index()]).collect()
    }

    fn check_nets(&self, nets: &[NetworkParams]) -> Result<()> {
        if nets.len() != self.subdomains.len() {
            return Err(Error::config(format!(
                "{} networks for {} subdomains",
                nets.len(),
                self.subdomains.len()
            )));
        }
        let want = if self.settings.unsteady { 3 } else { 2 };
        for (i, n) in nets.iter().enumerate() {
            if n.input_dim() != want {
                return Err(Error::config(format!(
                    "network {i} takes {} inputs, the problem needs {want}",
                    n.input_dim()
                )));
            }
        }
        Ok(())
    }

    fn tasks(&self) -> Vec<Task> {
        let mut tasks = Vec::new();
        for (sub, data) in self.subdomains.iter().enumerate() {
            for (set, ps) in data.sets.iter().enumerate() {
                tasks.extend(chunks(ps.len()).map(|(start, end)| Task::Set { sub, set, start, end }));
            }
            if !data.quadrature.is_empty() {
                tasks.push(Task::Global { sub });
            }
        }
        for (idx, itf) in self.interfaces.iter().enumerate() {
            tasks.extend(chunks(itf.points.len()).map(|(start, end)| Task::Interface { idx, start, end }));
        }
        tasks
    }

    /// Evaluates the loss; with `gradient` also the per-group and weighted
    /// gradients over the concatenated network parameters.
    pub fn evaluate(
        &self,
        nets: &[NetworkParams],
        weights: &LossWeights,
        gradient: bool,
        par: Parallelism,
    ) -> Result<Evaluation> {
        self.check_nets(nets)?;
        let tasks = self.tasks();
        let parts = run_tasks(&tasks, par, |t| self.run_task(t, nets, weights, gradient))?;

        let mut offsets = Vec::with_capacity(nets.len());
        let mut total_len = 0;
        for n in nets {
            offsets.push(total_len);
            total_len += n.len();
        }
        let mut per_sub = vec![LossBreakdown::default(); nets.len()];
        let mut group_gradients = if gradient { vec![vec![0.0; total_len]; GROUPS] } else { Vec::new() };
        for part in parts {
            for (s, vals) in part.values {
                for (a, v) in per_sub[s].values.iter_mut().zip(vals) {
                    *a += v;
                }
            }
            if gradient {
                let dst = &mut group_gradients[part.group.index()];
                for (net, g) in part.grads {
                    for (a, v) in dst[offsets[net]..offsets[net] + g.len()].iter_mut().zip(g) {
                        *a += v;
                    }
                }
            }
        }
        let mut breakdown = LossBreakdown::default();
        for b in per_sub.iter_mut() {
            *b = b.with_total(weights);
            breakdown.add(b);
        }
        breakdown = breakdown.with_total(weights);
        let mut grad = Vec::new();
        if gradient {
            grad = vec![0.0; total_len];
            for g in Group::ALL {
                let w = weights.group_weight(g);
                for (a, v) in grad.iter_mut().zip(&group_gradients[g.index()]) {
                    *a += w * v;
                }
            }
        }
        Ok(Evaluation {
            breakdown,
            per_subdomain: per_sub,
            group_gradients,
            gradient: grad,
        })
    }

    fn run_task(&self, task: &Task, nets: &[NetworkParams], weights: &LossWeights, gradient: bool) -> Result<Partial> {
        match *task {
            Task::Set { sub, set, start, end } => {
                let ps = &self.subdomains[sub].sets[set];
                let net = &nets[sub];
                let fwd = BatchForward::compute(net, &ps.points[start..end]);
                let inv = 1.0 / ps.len() as f64;
                let mut vals = [0.0; COMPONENTS];
                let mut adj = gradient.then(|| fwd.adjoint_buffer());
                for p in 0..end - start {
                    let fp = jet_point::<STRIDE>(&fwd, p, 0);
                    point_terms(ps.role, &fp, ps.target(start + p), &self.settings, &mut |c, v: Jet<STRIDE>| {
                        vals[c.index()] += v.value * inv;
                        if let Some(adj) = adj.as_mut() {
                            scatter(&fwd, adj, p, &v.grad, weights.multiplier(c) * inv);
                        }
                    })?;
                }
                let grads = match adj {
                    Some(adj) => {
                        let mut g = vec![0.0; net.len()];
                        fwd.backward(net, &adj, &mut g);
                        vec![(sub, g)]
                    }
                    None => Vec::new(),
                };
                Ok(Partial {
                    values: vec![(sub, vals)],
                    group: group_of(ps.role),
                    grads,
                })
            }
            Task::Interface { idx, start, end } => {
                let itf = &self.interfaces[idx];
                let (a, b) = itf.pair;
                let pts = &itf.points.points[start..end];
                let fa = BatchForward::compute(&nets[a], pts);
                let fb = BatchForward::compute(&nets[b], pts);
                let inv = 1.0 / itf.points.len() as f64;
                let mut vals = [0.0; COMPONENTS];
                let mut adj = gradient.then(|| (fa.adjoint_buffer(), fb.adjoint_buffer()));
                for p in 0..end - start {
                    let pa = jet_point::<{ 2 * STRIDE }>(&fa, p, 0);
                    let pb = jet_point::<{ 2 * STRIDE }>(&fb, p, STRIDE);
                    let t = itf.points.target(start + p);
                    let normal = [t[0], t[1]];
                    interface_point_terms(&pa, &pb, normal, &itf.terms, &self.settings, &mut |c, v: Jet<{ 2 * STRIDE }>| {
                        vals[c.index()] += v.value * inv;
                        if let Some((ja, jb)) = adj.as_mut() {
                            // the term belongs to both subdomain losses
                            let coef = 2.0 * weights.multiplier(c) * inv;
                            scatter(&fa, ja, p, &v.grad[..STRIDE], coef);
                            scatter(&fb, jb, p, &v.grad[STRIDE..], coef);
                        }
                    })?;
                }
                let grads = match adj {
                    Some((ja, jb)) => {
                        let mut ga = vec![0.0; nets[a].len()];
                        let mut gb = vec![0.0; nets[b].len()];
                        fa.backward(&nets[a], &ja, &mut ga);
                        fb.backward(&nets[b], &jb, &mut gb);
                        vec![(a, ga), (b, gb)]
                    }
                    None => Vec::new(),
                };
                Ok(Partial {
                    values: vec![(a, vals), (b, vals)],
                    group: Group::Interface,
                    grads,
                })
            }
            Task::Global { sub } => {
                let q = &self.subdomains[sub].quadrature;
                let net = &nets[sub];
                let pts: Vec<[f64; 3]> = q.iter().map(|p| [p.point[0], p.point[1], 0.0]).collect();
                let fwd = BatchForward::compute(net, &pts);
                let mut phi = [0.0; 4];
                let mut local = Vec::with_capacity(q.len());
                for (k, qp) in q.iter().enumerate() {
                    let fp = jet_point::<STRIDE>(&fwd, k, 0);
                    let g = normal_flux(&fp.prim, qp.normal, self.settings.gamma);
                    for c in 0..4 {
                        phi[c] += qp.weight * g[c].value;
                    }
                    local.push(g);
                }
                let mut vals = [0.0; COMPONENTS];
                vals[Component::GlobalMass.index()] = phi[0] * phi[0];
                vals[Component::GlobalMomentum.index()] = phi[1] * phi[1] + phi[2] * phi[2];
                vals[Component::GlobalEnergy.index()] = phi[3] * phi[3];
                let mut grads = Vec::new();
                if gradient {
                    let mut adj = fwd.adjoint_buffer();
                    for (k, (qp, g)) in q.iter().zip(&local).enumerate() {
                        for c in 0..4 {
                            scatter(&fwd, &mut adj, k, &g[c].grad, 2.0 * phi[c] * qp.weight);
                        }
                    }
                    let mut gv = vec![0.0; net.len()];
                    fwd.backward(net, &adj, &mut gv);
                    grads.push((sub, gv));
                }
                Ok(Partial {
                    values: vec![(sub, vals)],
                    group: Group::Global,
                    grads,
                })
            }
        }
    }

    /// Slow pointwise evaluation on a single tape. Independent of the batched
    /// engine and meant for cross-checks on small problems.
    pub fn reference_evaluate(&self, nets: &[NetworkParams], weights: &LossWeights) -> Result<(LossBreakdown, Vec<f64>)> {
        self.check_nets(nets)?;
        let d = nets[0].input_dim();
        let tape = Tape::new(d);
        let vars: Vec<Vec<Var<'_>>> = nets
            .iter()
            .map(|n| n.values().iter().map(|&v| tape.parameter(v)).collect())
            .collect();
        let field = |net: usize, pt: &[f64; 3]| -> Result<FieldPoint<Var<'_>>> {
            let out = forward_on_tape(&nets[net], &tape, &vars[net], &pt[..d])?;
            Ok(FieldPoint {
                prim: out,
                grad: std::array::from_fn(|dir| {
                    std::array::from_fn(|c| if dir < d { out[c].tangent(dir) } else { tape.constant(0.0) })
                }),
                dirs: d,
            })
        };
        debug_assert!(d <= MAX_DIRS);
        let mut values = [0.0; COMPONENTS];
        let mut loss = tape.constant(0.0);
        for (s, sub) in self.subdomains.iter().enumerate() {
            for set in &sub.sets {
                let inv = 1.0 / set.len() as f64;
                for (i, pt) in set.points.iter().enumerate() {
                    let fp = field(s, pt)?;
                    point_terms(set.role, &fp, set.target(i), &self.settings, &mut |c, v| {
                        values[c.index()] += v.value() * inv;
                        loss = loss + v * (weights.weight(c) * inv);
                    })?;
                }
            }
            if !sub.quadrature.is_empty() {
                let mut phi = [tape.constant(0.0); 4];
                for qp in &sub.quadrature {
                    let fp = field(s, &[qp.point[0], qp.point[1], 0.0])?;
                    let g = normal_flux(&fp.prim, qp.normal, self.settings.gamma);
                    for c in 0..4 {
                        phi[c] = phi[c] + g[c] * qp.weight;
                    }
                }
                let terms = [
                    (Component::GlobalMass, phi[0].square()),
                    (Component::GlobalMomentum, phi[1].square() + phi[2].square()),
                    (Component::GlobalEnergy, phi[3].square()),
                ];
                for (c, v) in terms {
                    values[c.index()] += v.value();
                    loss = loss + v * weights.weight(c);
                }
            }
        }
        for itf in &self.interfaces {
            let inv = 1.0 / itf.points.len() as f64;
            for (i, pt) in itf.points.points.iter().enumerate() {
                let pa = field(itf.pair.0, pt)?;
                let pb = field(itf.pair.1, pt)?;
                let t = itf.points.target(i);
                interface_point_terms(&pa, &pb, [t[0], t[1]], &itf.terms, &self.settings, &mut |c, v| {
                    values[c.index()] += 2.0 * v.value() * inv;
                    loss = loss + v * (2.0 * weights.weight(c) * inv);
                })?;
            }
        }
        let all: Vec<Var<'_>> = vars.iter().flatten().copied().collect();
        let grad = parameter_gradient(&tape, loss, &all)?.as_slice().to_vec();
        let breakdown = LossBreakdown { values, total: loss.value() };
        Ok((breakdown, grad))
    }
}

/// Single-network loss.
pub fn pinn_loss(net: &NetworkParams, problem: &LossProblem, weights: &LossWeights) -> Result<Evaluation> {
    if problem.subdomains.len() != 1 {
        return Err(Error::config("a PINN loss has exactly one subdomain"));
    }
    problem.evaluate(std::slice::from_ref(net), weights, true, Parallelism::default())
}

/// Joint loss over all subnetworks of a decomposition.
pub fn xpinn_loss(nets: &[NetworkParams], problem: &LossProblem, weights: &LossWeights) -> Result<Evaluation> {
    problem.evaluate(nets, weights, true, Parallelism::default())
}

/// Net fluxes `sum_k w_k G(U_k) . n_k` of mass, x/y momentum and energy
/// through a closed boundary.
pub fn global_conservation_terms(net: &NetworkParams, quadrature: &[QuadraturePoint], gamma: f64) -> Result<[f64; 4]> {
    if closure_error(quadrature) > 1e-8 {
        return Err(Error::config("boundary quadrature is not a closed loop"));
    }
    let pts: Vec<[f64; 3]> = quadrature.iter().map(|p| [p.point[0], p.point[1], 0.0]).collect();
    let fwd = BatchForward::compute(net, &pts);
    let mut phi = [0.0; 4];
    for (k, qp) in quadrature.iter().enumerate() {
        let w: [f64; 4] = std::array::from_fn(|c| fwd.value(k, c));
        let g = normal_flux(&w, qp.normal, gamma);
        for c in 0..4 {
            phi[c] += qp.weight * g[c];
        }
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polygon;
    use crate::network::xavier_init;
    use crate::physics::EntropyMode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(role: Role, n: usize, d: usize, rng: &mut ChaCha8Rng) -> PointSet {
        let mut s = PointSet::new(role, 0);
        for _ in 0..n {
            let p = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), if d == 3 { rng.random_range(0.0..1.0) } else { 0.0 }];
            let t: Vec<f64> = match role {
                Role::Interface | Role::WallSlip => vec![0.6, 0.8],
                _ => (0..role.target_width()).map(|_| rng.random_range(0.2..1.0)).collect(),
            };
            s.push(p, &t);
        }
        s
    }

    fn nets(count: usize, d: usize) -> Vec<NetworkParams> {
        (0..count)
            .map(|k| {
                let mut n = xavier_init(&[d, 8, 8, 4], 11 + k as u64).unwrap();
                // keep outputs away from the clamp so every channel is active
                let last = n.layer_count() - 1;
                let nb = n.bias(last).len();
                let off = n.slots()[last].bias;
                for i in 0..nb {
                    n.values_mut()[off + i] = 1.0;
                }
                n
            })
            .collect()
    }

    fn problem(d: usize, subs: usize, global: bool) -> LossProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let roles = [Role::Residual, Role::GradientData, Role::Inflow, Role::WallPressure, Role::WallSlip];
        let subdomains = (0..subs)
            .map(|_| SubdomainData {
                sets: roles.iter().map(|&r| random_set(r, 7, d, &mut rng)).collect(),
                quadrature: if global {
                    Polygon::rectangle(-1.0, 1.0, -0.5, 0.5).boundary_quadrature(3, 2.0)
                } else {
                    Vec::new()
                },
            })
            .collect();
        let interfaces = (1..subs)
            .map(|b| InterfaceData {
                pair: (b - 1, b),
                points: random_set(Role::Interface, 5, d, &mut rng),
                terms: InterfaceTerms { average: true, residual: true, flux: true },
            })
            .collect();
        let settings = LossSettings {
            unsteady: d == 3,
            entropy: Some(EntropyMode::TwoSided),
            ..LossSettings::default()
        };
        LossProblem::new(subdomains, interfaces, settings).unwrap()
    }

    fn weights() -> LossWeights {
        LossWeights { omega: [1.0, 0.7, 2.0, 1.5, 0.3, 1.2], interface: [0.5, 2.0, 1.3] }
    }

    fn compare(p: &LossProblem, nets: &[NetworkParams]) {
        let w = weights();
        let fast = p.evaluate(nets, &w, true, Parallelism::Sequential).unwrap();
        let (slow, grad) = p.reference_evaluate(nets, &w).unwrap();
        assert!((fast.total() - slow.total).abs() <= 1e-10 * slow.total.abs().max(1.0), "{} vs {}", fast.total(), slow.total);
        for c in Component::ALL {
            let (a, b) = (fast.breakdown.get(c), slow.get(c));
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-6), "{c:?}: {a} vs {b}");
        }
        let scale = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (i, (a, b)) in fast.gradient.iter().zip(&grad).enumerate() {
            assert!((a - b).abs() <= 1e-9 * scale, "param {i}: {a} vs {b}");
        }
    }

    #[test]
    fn steady_pinn_matches_reference() {
        compare(&problem(2, 1, true), &nets(1, 2));
    }

    #[test]
    fn unsteady_pinn_matches_reference() {
        compare(&problem(3, 1, false), &nets(1, 3));
    }

    #[test]
    fn xpinn_matches_reference() {
        compare(&problem(2, 3, true), &nets(3, 2));
    }

    #[test]
    fn group_gradients_sum_to_total() {
        let p = problem(2, 2, true);
        let ns = nets(2, 2);
        let w = weights();
        let e = p.evaluate(&ns, &w, true, Parallelism::Sequential).unwrap();
        for i in 0..e.gradient.len() {
            let s: f64 = Group::ALL.iter().map(|g| w.group_weight(*g) * e.group_gradients[g.index()][i]).sum();
            assert!((s - e.gradient[i]).abs() <= 1e-14 * s.abs().max(1.0));
        }
        assert_eq!(p.active_groups().len(), GROUPS);
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let mut p = problem(2, 1, false);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        p.subdomains[0].sets[0] = random_set(Role::Residual, 3 * CHUNK + 17, 2, &mut rng);
        let ns = nets(1, 2);
        let w = weights();
        let a = p.evaluate(&ns, &w, true, Parallelism::Sequential).unwrap();
        let b = p.evaluate(&ns, &w, true, Parallelism::Rayon).unwrap();
        assert_eq!(a.total().to_bits(), b.total().to_bits());
        assert!(a.gradient.iter().zip(&b.gradient).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn open_quadrature_and_unsteady_global_rejected() {
        let mut q = Polygon::rectangle(0.0, 1.0, 0.0, 1.0).boundary_quadrature(2, 1.0);
        q.truncate(q.len() - 2);
        let sub = SubdomainData { sets: Vec::new(), quadrature: q.clone() };
        assert!(LossProblem::new(vec![sub], Vec::new(), LossSettings::default()).is_err());
        let closed = Polygon::rectangle(0.0, 1.0, 0.0, 1.0).boundary_quadrature(2, 1.0);
        let sub = SubdomainData { sets: Vec::new(), quadrature: closed };
        let s = LossSettings { unsteady: true, ..LossSettings::default() };
        assert!(LossProblem::new(vec![sub], Vec::new(), s).is_err());
    }

    #[test]
    fn constant_state_has_zero_global_flux() {
        // a network with zero weights outputs its (clamped) biases everywhere
        let mut n = xavier_init(&[2, 4, 4], 1).unwrap();
        n.values_mut().iter_mut().for_each(|v| *v = 0.0);
        let last = n.layer_count() - 1;
        let off = n.slots()[last].bias;
        n.values_mut()[off..off + 4].copy_from_slice(&[1.2, 2.0, -0.5, 0.9]);
        let q = Polygon::new(vec![[0.0, 0.0], [2.0, 0.1], [1.5, 1.4], [-0.3, 0.8]]).unwrap().boundary_quadrature(4, 3.0);
        let phi = global_conservation_terms(&n, &q, 1.4).unwrap();
        assert!(phi.iter().all(|v| v.abs() < 1e-12), "{phi:?}");
    }
}
