//! Event-driven forward integration of a free particle among inequality
//! constraints. Face hits are resolved by impulsive multipliers (a unique
//! continuation); corner hits fan out into every feasible outgoing direction.

use std::collections::VecDeque;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{direction, ConstraintSet, Corner, Vec2, CONE_PROBE_STEP, EPS_ACTIVE};

/// Hits within this distance of a corner are classified as corner hits.
pub const EPS_CORNER: f64 = 1e-7;

/// Residual allowed on `ġ_j` after an impulse.
pub const GDOT_TOL: f64 = 1e-12;

/// Lineage of a trajectory: the root is `[0]`, and each corner fan appends
/// the index of the chosen direction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BranchId(pub Vec<u32>);

impl BranchId {
    pub fn root() -> Self {
        BranchId(vec![0])
    }

    pub fn child(&self, index: u32) -> Self {
        let mut v = self.0.clone();
        v.push(index);
        BranchId(v)
    }
}

impl fmt::Display for BranchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        f.write_str(&parts.join("."))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    pub q: Vec2,
    pub v: Vec2,
    pub t: f64,
    pub branch: BranchId,
}

impl ParticleState {
    pub fn new(q: Vec2, v: Vec2, t: f64) -> Self {
        Self { q, v, t, branch: BranchId::root() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Face,
    Corner,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionEvent {
    pub t_hit: f64,
    pub q_hit: Vec2,
    pub active_ids: Vec<usize>,
    pub kind: EventKind,
    /// Index into [`ConstraintSet::corners`] when the hit engaged a corner record.
    pub corner: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSolution {
    /// `(constraint id, impulse)` for every constraint retained by the active-set loop.
    pub lambdas: Vec<(usize, f64)>,
    pub restitution: f64,
    pub v_out: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsConfig {
    pub mass: f64,
    pub restitution: f64,
    pub fan_size: usize,
    pub max_branches: usize,
    pub eps_corner: f64,
    /// Per-trajectory cap on collision events.
    pub max_events: usize,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            mass: 1.0,
            restitution: 0.0,
            fan_size: 64,
            max_branches: 4096,
            eps_corner: EPS_CORNER,
            max_events: 10_000,
        }
    }
}

/// Exact free flight: `q' = q + v dt`, velocity unchanged.
pub fn integrate_free(s: &ParticleState, dt: f64) -> ParticleState {
    ParticleState { q: s.q + s.v * dt, v: s.v, t: s.t + dt, branch: s.branch.clone() }
}

/// Earliest boundary crossing or corner contact on `[q, q + v dt]`.
pub fn detect_collision(cs: &ConstraintSet, s: &ParticleState, dt: f64, eps_corner: f64) -> Option<CollisionEvent> {
    let speed = s.v.norm();
    if speed == 0.0 || dt <= 0.0 {
        return None;
    }
    let rate_tol = GDOT_TOL * speed.max(1.0);

    // (time, constraint id)
    let mut face_hits: Vec<(f64, usize)> = Vec::new();
    for c in cs.constraints() {
        let n = c.grad_q(&s.q, s.t);
        let rate = n.dot(&s.v) + c.grad_t(&s.q, s.t);
        if rate <= rate_tol {
            continue;
        }
        let g0 = match c.face() {
            Some(face) => n.dot(&(s.q - face.a)),
            None => c.eval(&s.q, s.t),
        };
        if g0 > EPS_ACTIVE {
            continue;
        }
        let tau = (-g0 / rate).max(0.0);
        if tau > dt {
            continue;
        }
        if let Some(face) = c.face() {
            let x = s.q + s.v * tau;
            let u = face.slab_coordinate(&x);
            let len = face.length();
            let u_tol = EPS_ACTIVE / len;
            if u < -u_tol || u > 1.0 + u_tol {
                continue;
            }
            let near_end = u * len <= eps_corner || (1.0 - u) * len <= eps_corner;
            if near_end {
                let end = if u < 0.5 { face.a } else { face.b };
                if cs.corner_near(&end, eps_corner).is_some() {
                    continue;
                }
            }
        }
        face_hits.push((tau, c.id));
    }

    let mut corner_hit: Option<(f64, usize)> = None;
    for (ci, corner) in cs.corners().iter().enumerate() {
        if (s.q - corner.position).norm() <= eps_corner {
            continue;
        }
        let tau = (corner.position - s.q).dot(&s.v) / (speed * speed);
        if tau <= 0.0 || tau > dt {
            continue;
        }
        let miss = (s.q + s.v * tau - corner.position).norm();
        if miss <= eps_corner && corner_hit.map_or(true, |(t, _)| tau < t) {
            corner_hit = Some((tau, ci));
        }
    }

    let first_face = face_hits.iter().map(|h| h.0).fold(f64::INFINITY, f64::min);
    if let Some((tau, ci)) = corner_hit {
        if tau <= first_face {
            let corner = &cs.corners()[ci];
            return Some(CollisionEvent {
                t_hit: s.t + tau,
                q_hit: corner.position,
                active_ids: corner.incident_constraints.clone(),
                kind: EventKind::Corner,
                corner: Some(ci),
            });
        }
    }
    if !first_face.is_finite() {
        return None;
    }
    let tau = first_face;
    let simultaneous = 1e-12 * dt.max(1.0);
    let mut ids: Vec<usize> = face_hits
        .iter()
        .filter(|(t, _)| (t - tau).abs() <= simultaneous)
        .map(|(_, id)| *id)
        .collect();
    ids.sort_unstable();
    ids.dedup();

    let t_hit = s.t + tau;
    let mut q_hit = s.q + s.v * tau;
    for &id in &ids {
        let c = cs.constraint(id);
        let n = c.grad_q(&q_hit, t_hit);
        let g = match c.face() {
            Some(face) => n.dot(&(q_hit - face.a)),
            None => c.eval(&q_hit, t_hit),
        };
        if g > 0.0 {
            q_hit -= n * (g / n.norm_squared());
        }
    }
    let kind = if ids.len() >= 2 { EventKind::Corner } else { EventKind::Face };
    Some(CollisionEvent { t_hit, q_hit, active_ids: ids, kind, corner: None })
}

/// Impulsive multipliers for a collision: `λ = -(1 + e) G⁺ ġ` on a working
/// set that drops separating constraints (`λ > 0`) and re-adds violated ones.
pub fn solve_multipliers(
    cs: &ConstraintSet,
    event: &CollisionEvent,
    v_in: &Vec2,
    mass: f64,
    restitution: f64,
) -> Result<MultiplierSolution> {
    if event.active_ids.is_empty() {
        return Err(Error::InvalidArgument("collision without active constraints".into()));
    }
    if !(0.0..=1.0).contains(&restitution) {
        return Err(Error::InvalidArgument(format!("restitution {restitution} outside [0, 1]")));
    }
    let q = event.q_hit;
    let t = event.t_hit;
    let grads: Vec<Vec2> = event.active_ids.iter().map(|&j| cs.constraint(j).grad_q(&q, t)).collect();
    let grad_t: Vec<f64> = event.active_ids.iter().map(|&j| cs.constraint(j).grad_t(&q, t)).collect();
    let gdot = |k: usize, v: &Vec2| grads[k].dot(v) + grad_t[k];
    let scale = v_in.norm().max(1.0);

    let mut working: Vec<usize> = (0..grads.len()).collect();
    let max_iter = (2 * grads.len()).max(2);
    for _ in 0..max_iter {
        let n = working.len();
        let mut lambdas = vec![0.0; n];
        if n > 0 {
            let gram = DMatrix::from_fn(n, n, |r, c| grads[working[r]].dot(&grads[working[c]]) / mass);
            let rhs = DVector::from_fn(n, |r, _| gdot(working[r], v_in));
            let svd = gram.svd(true, true);
            let smax = svd.singular_values.max();
            let pinv = svd
                .pseudo_inverse(1e-12 * smax)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let lam = -(1.0 + restitution) * (pinv * rhs);
            lambdas.copy_from_slice(lam.as_slice());
        }

        // separating constraints leave the working set
        let lam_tol = 1e-14 * scale * mass;
        if let Some((pos, _)) = lambdas
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > lam_tol)
            .max_by(|a, b| a.1.total_cmp(b.1))
        {
            working.remove(pos);
            continue;
        }

        let mut v_out = *v_in;
        for (k, &j) in working.iter().enumerate() {
            v_out += grads[j] * (lambdas[k] / mass);
        }

        let violated = (0..grads.len())
            .filter(|k| !working.contains(k))
            .map(|k| (k, gdot(k, &v_out)))
            .filter(|&(_, gd)| gd > GDOT_TOL * scale)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((k, _)) = violated {
            working.push(k);
            working.sort_unstable();
            continue;
        }

        let lambdas = working.iter().zip(lambdas).map(|(&k, l)| (event.active_ids[k], l)).collect();
        return Ok(MultiplierSolution { lambdas, restitution, v_out });
    }
    Err(Error::NonConvergence { iterations: max_iter })
}

/// Continuations leaving a corner: `fan_size` directions at the centres of
/// equal-measure cells of the outgoing cone, speed preserved. Only the
/// sectors reachable from the arrival side are sampled.
pub fn branch_continuations(corner: &Corner, s_hit: &ParticleState, fan_size: usize) -> Result<Vec<ParticleState>> {
    if fan_size == 0 {
        return Err(Error::InvalidArgument("fan_size must be at least 1".into()));
    }
    let reachable = corner.arcs_containing(&-s_hit.v);
    let arcs: Vec<_> = if reachable.is_empty() || s_hit.v.norm() == 0.0 {
        corner.outgoing_cone.clone()
    } else {
        reachable.iter().map(|&i| corner.outgoing_cone[i]).collect()
    };
    let total: f64 = arcs.iter().map(|a| a.width()).sum();
    if arcs.is_empty() || total <= 0.0 {
        return Err(Error::EmptyCone { x: corner.position.x, y: corner.position.y });
    }
    let speed = s_hit.v.norm();
    let mut out = Vec::with_capacity(fan_size);
    for k in 0..fan_size {
        let mut offset = (k as f64 + 0.5) / fan_size as f64 * total;
        let mut angle = arcs[0].start;
        for arc in &arcs {
            if offset <= arc.width() {
                angle = arc.start + offset;
                break;
            }
            offset -= arc.width();
        }
        out.push(ParticleState {
            q: corner.position,
            v: direction(angle) * speed,
            t: s_hit.t,
            branch: s_hit.branch.child(k as u32),
        });
    }
    Ok(out)
}

/// Whether a continuation direction stays feasible for a short step.
pub fn continuation_feasible(cs: &ConstraintSet, s: &ParticleState) -> bool {
    let speed = s.v.norm();
    if speed == 0.0 {
        return cs.is_feasible(&s.q, s.t);
    }
    cs.is_feasible(&(s.q + s.v / speed * CONE_PROBE_STEP), s.t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFlag {
    Start,
    Face,
    Corner,
    End,
}

impl SampleFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SampleFlag::Start => "start",
            SampleFlag::Face => "face",
            SampleFlag::Corner => "corner",
            SampleFlag::End => "end",
        }
    }
}

/// A recorded state; `v` is the velocity leaving the sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub q: Vec2,
    pub v: Vec2,
    pub flag: SampleFlag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub branch: BranchId,
    pub samples: Vec<TrajectorySample>,
    pub truncated: bool,
}

impl Trajectory {
    /// Position at time `t` by free flight from the last sample before `t`.
    pub fn position_at(&self, t: f64) -> Vec2 {
        let s = self
            .samples
            .iter()
            .rev()
            .find(|s| s.t <= t)
            .unwrap_or(&self.samples[0]);
        s.q + s.v * (t - s.t)
    }

    pub fn corner_hits(&self) -> usize {
        self.samples.iter().filter(|s| s.flag == SampleFlag::Corner).count()
    }

    pub fn face_hits(&self) -> usize {
        self.samples.iter().filter(|s| s.flag == SampleFlag::Face).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub trajectories: Vec<Trajectory>,
    /// Set when the branch budget or an event cap cut the expansion short.
    pub truncated: bool,
    pub failures: Vec<(BranchId, Error)>,
}

/// Breadth-first expansion of every extremal continuation from `s0` up to
/// time `horizon`.
pub fn simulate(cs: &ConstraintSet, s0: &ParticleState, horizon: f64, cfg: &DynamicsConfig) -> Result<SimulationResult> {
    if horizon <= s0.t {
        return Err(Error::InvalidArgument("simulation horizon must exceed the start time".into()));
    }
    if !cs.is_feasible(&s0.q, s0.t) {
        return Err(Error::InvalidArgument("initial state is not feasible".into()));
    }
    let start = TrajectorySample { t: s0.t, q: s0.q, v: s0.v, flag: SampleFlag::Start };
    let mut queue = VecDeque::new();
    queue.push_back((Trajectory { branch: s0.branch.clone(), samples: vec![start], truncated: false }, s0.clone()));
    let mut live = 1usize;
    let mut result = SimulationResult { trajectories: Vec::new(), truncated: false, failures: Vec::new() };

    while let Some((mut traj, mut s)) = queue.pop_front() {
        let mut events = 0usize;
        loop {
            let remaining = horizon - s.t;
            let Some(event) = detect_collision(cs, &s, remaining, cfg.eps_corner) else {
                s = integrate_free(&s, remaining);
                traj.samples.push(TrajectorySample { t: horizon, q: s.q, v: s.v, flag: SampleFlag::End });
                result.trajectories.push(traj);
                break;
            };
            events += 1;
            if events > cfg.max_events {
                traj.truncated = true;
                result.truncated = true;
                result.trajectories.push(traj);
                break;
            }
            let hit = ParticleState { q: event.q_hit, v: s.v, t: event.t_hit, branch: s.branch.clone() };

            if let (EventKind::Corner, Some(ci)) = (event.kind, event.corner) {
                let children = match branch_continuations(&cs.corners()[ci], &hit, cfg.fan_size) {
                    Ok(c) => c,
                    Err(e) => {
                        result.failures.push((traj.branch.clone(), e));
                        break;
                    }
                };
                let budget = cfg.max_branches.saturating_sub(live - 1).max(1);
                let keep = children.len().min(budget);
                if keep < children.len() {
                    result.truncated = true;
                }
                live += keep - 1;
                for child in children.into_iter().take(keep) {
                    let mut t = traj.clone();
                    t.branch = child.branch.clone();
                    t.samples.push(TrajectorySample { t: child.t, q: child.q, v: child.v, flag: SampleFlag::Corner });
                    queue.push_back((t, child));
                }
                break;
            }

            match solve_multipliers(cs, &event, &s.v, cfg.mass, cfg.restitution) {
                Ok(sol) => {
                    s = ParticleState { v: sol.v_out, ..hit };
                    traj.samples.push(TrajectorySample { t: s.t, q: s.q, v: s.v, flag: SampleFlag::Face });
                }
                Err(e) => {
                    result.failures.push((traj.branch.clone(), e));
                    break;
                }
            }
        }
    }
    result.trajectories.sort_by(|a, b| a.branch.cmp(&b.branch));
    Ok(result)
}
