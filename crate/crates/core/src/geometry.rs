//! Constrained planar regions: walls lowered to linear inequality
//! constraints `g_j(q, t) <= 0`, active sets, corner extraction and
//! straight-segment visibility.

use std::f64::consts::PI;

use nalgebra::Vector2;

pub type Vec2 = Vector2<f64>;

/// Tolerance on `|g_j|` for a constraint to count as active.
pub const EPS_ACTIVE: f64 = 1e-9;

/// Step used when probing the feasibility of directions leaving a corner.
pub const CONE_PROBE_STEP: f64 = 1e-6;

/// Axis-aligned scenario bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min: Vec2,
    pub max: Vec2,
}

impl BoundingBox {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Self { min, max }
    }

    /// Strict containment: points on the box boundary are outside.
    pub fn contains_strict(&self, p: &Vec2) -> bool {
        p.x > self.min.x && p.x < self.max.x && p.y > self.min.y && p.y < self.max.y
    }

    pub fn translated(&self, offset: &Vec2) -> Self {
        Self::new(self.min + offset, self.max + offset)
    }
}

/// A finite straight wall of given thickness. Thickness zero gives a
/// two-sided blade; positive thickness gives a rectangle centred on `a→b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Wall {
    pub name: String,
    pub a: Vec2,
    pub b: Vec2,
    pub thickness: f64,
}

impl Wall {
    pub fn new(name: impl Into<String>, a: Vec2, b: Vec2, thickness: f64) -> Self {
        Self { name: name.into(), a, b, thickness }
    }

    pub fn thin(name: impl Into<String>, a: Vec2, b: Vec2) -> Self {
        Self::new(name, a, b, 0.0)
    }

    /// Boundary faces of the wall. Each face's normal points into the wall.
    pub fn faces(&self) -> Vec<WallSegment> {
        let along = self.b - self.a;
        let len = along.norm();
        let u = along / len;
        let perp = Vec2::new(-u.y, u.x);
        if self.thickness <= 0.0 {
            return vec![
                WallSegment { a: self.a, b: self.b, outward_normal: perp, depth: 0.0 },
                WallSegment { a: self.b, b: self.a, outward_normal: -perp, depth: 0.0 },
            ];
        }
        let h = 0.5 * self.thickness * perp;
        let (a_lo, a_hi, b_lo, b_hi) = (self.a - h, self.a + h, self.b - h, self.b + h);
        let w = self.thickness;
        vec![
            WallSegment { a: a_hi, b: b_hi, outward_normal: -perp, depth: w },
            WallSegment { a: b_lo, b: a_lo, outward_normal: perp, depth: w },
            WallSegment { a: a_lo, b: a_hi, outward_normal: u, depth: len },
            WallSegment { a: b_hi, b: b_lo, outward_normal: -u, depth: len },
        ]
    }

    pub fn translated(&self, offset: &Vec2) -> Self {
        Self::new(self.name.clone(), self.a + offset, self.b + offset, self.thickness)
    }
}

/// One flat face of a wall. `outward_normal` is a unit vector pointing out
/// of the feasible region (into the wall); `depth` is the wall's extent
/// along that normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallSegment {
    pub a: Vec2,
    pub b: Vec2,
    pub outward_normal: Vec2,
    pub depth: f64,
}

impl WallSegment {
    /// Position of `q` along the face, 0 at `a` and 1 at `b`.
    pub fn slab_coordinate(&self, q: &Vec2) -> f64 {
        let d = self.b - self.a;
        (q - self.a).dot(&d) / d.norm_squared()
    }

    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }

    /// Signed distance to the face's supporting line, positive into the wall.
    pub fn plane_value(&self, q: &Vec2) -> f64 {
        self.outward_normal.dot(&(q - self.a))
    }

    /// Linear constraint value, scoped to the face slab and to the half of
    /// the wall nearest this face. Outside that scope the face reports `-inf`.
    pub fn eval(&self, q: &Vec2) -> f64 {
        let s = self.slab_coordinate(q);
        let tol = EPS_ACTIVE / self.length();
        if s < -tol || s > 1.0 + tol {
            return f64::NEG_INFINITY;
        }
        let g = self.outward_normal.dot(&(q - self.a));
        if g > 0.5 * self.depth {
            f64::NEG_INFINITY
        } else {
            g
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintKind {
    Face { face: WallSegment, wall: usize },
    /// Unbounded half-plane `n·(q - point) <= 0`.
    HalfPlane { point: Vec2, normal: Vec2 },
    /// Half-plane whose boundary translates along its unit normal at `speed`.
    MovingHalfPlane { point: Vec2, normal: Vec2, speed: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub id: usize,
    pub kind: ConstraintKind,
}

impl Constraint {
    pub fn eval(&self, q: &Vec2, t: f64) -> f64 {
        match &self.kind {
            ConstraintKind::Face { face, .. } => face.eval(q),
            ConstraintKind::HalfPlane { point, normal } => normal.dot(&(q - point)),
            ConstraintKind::MovingHalfPlane { point, normal, speed } => {
                normal.dot(&(q - point)) - speed * normal.norm_squared() * t
            }
        }
    }

    pub fn grad_q(&self, _q: &Vec2, _t: f64) -> Vec2 {
        match &self.kind {
            ConstraintKind::Face { face, .. } => face.outward_normal,
            ConstraintKind::HalfPlane { normal, .. } => *normal,
            ConstraintKind::MovingHalfPlane { normal, .. } => *normal,
        }
    }

    pub fn grad_t(&self, _q: &Vec2, _t: f64) -> f64 {
        match &self.kind {
            ConstraintKind::MovingHalfPlane { normal, speed, .. } => -speed * normal.norm_squared(),
            _ => 0.0,
        }
    }

    pub fn face(&self) -> Option<&WallSegment> {
        match &self.kind {
            ConstraintKind::Face { face, .. } => Some(face),
            _ => None,
        }
    }

    fn translated(&self, offset: &Vec2) -> Self {
        let kind = match &self.kind {
            ConstraintKind::Face { face, wall } => ConstraintKind::Face {
                face: WallSegment { a: face.a + offset, b: face.b + offset, ..*face },
                wall: *wall,
            },
            ConstraintKind::HalfPlane { point, normal } => {
                ConstraintKind::HalfPlane { point: point + offset, normal: *normal }
            }
            ConstraintKind::MovingHalfPlane { point, normal, speed } => {
                ConstraintKind::MovingHalfPlane { point: point + offset, normal: *normal, speed: *speed }
            }
        };
        Self { id: self.id, kind }
    }
}

/// Half-open angular interval `(start, end)` of unit directions, radians,
/// with `start` in `[-pi, pi)` and `start < end <= start + 2 pi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularInterval {
    pub start: f64,
    pub end: f64,
}

impl AngularInterval {
    pub fn width(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, angle: f64) -> bool {
        let a = self.unwrap(angle);
        a > self.start && a < self.end
    }

    /// Membership including the bounding directions, up to `tol` radians.
    pub fn contains_closed(&self, angle: f64, tol: f64) -> bool {
        let a = self.unwrap(angle);
        a >= self.start - tol && a <= self.end + tol || a - 2.0 * PI >= self.start - tol
    }

    fn unwrap(&self, angle: f64) -> f64 {
        let mut a = angle;
        while a < self.start {
            a += 2.0 * PI;
        }
        while a >= self.start + 2.0 * PI {
            a -= 2.0 * PI;
        }
        a
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corner {
    pub position: Vec2,
    pub incident_constraints: Vec<usize>,
    /// Unit directions from the corner along each incident boundary.
    pub edge_directions: Vec<Vec2>,
    pub outgoing_cone: Vec<AngularInterval>,
}

impl Corner {
    pub fn cone_measure(&self) -> f64 {
        self.outgoing_cone.iter().map(AngularInterval::width).sum()
    }

    /// Indices of the cone arcs containing direction `d` (closed arcs).
    pub fn arcs_containing(&self, d: &Vec2) -> Vec<usize> {
        let a = angle_of(d);
        (0..self.outgoing_cone.len())
            .filter(|&i| self.outgoing_cone[i].contains_closed(a, 1e-12))
            .collect()
    }

    /// Whether directions `a` and `b` leave the corner into the same
    /// feasible sector, i.e. passing from one to the other does not cross a
    /// boundary meeting at the corner.
    pub fn same_sector(&self, a: &Vec2, b: &Vec2) -> bool {
        let sa = self.arcs_containing(a);
        let sb = self.arcs_containing(b);
        sa.iter().any(|i| sb.contains(i))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryWarning {
    pub position: Vec2,
    pub message: String,
}

/// The feasible region as a list of inequality constraints plus the corners
/// of its boundary inside the scenario bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    constraints: Vec<Constraint>,
    walls: Vec<Wall>,
    corners: Vec<Corner>,
    warnings: Vec<GeometryWarning>,
    bbox: BoundingBox,
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a < -PI {
        a += 2.0 * PI;
    } else if a >= PI {
        a -= 2.0 * PI;
    }
    a
}

fn angle_of(v: &Vec2) -> f64 {
    v.y.atan2(v.x)
}

pub fn direction(angle: f64) -> Vec2 {
    Vec2::new(angle.cos(), angle.sin())
}

fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

impl ConstraintSet {
    pub fn from_walls(walls: Vec<Wall>, bbox: BoundingBox) -> Self {
        Self::build(walls, Vec::new(), bbox)
    }

    /// Walls plus additional unbounded constraints (half-planes).
    pub fn build(walls: Vec<Wall>, extra: Vec<ConstraintKind>, bbox: BoundingBox) -> Self {
        let mut constraints = Vec::new();
        for (wi, wall) in walls.iter().enumerate() {
            for face in wall.faces() {
                let id = constraints.len();
                constraints.push(Constraint { id, kind: ConstraintKind::Face { face, wall: wi } });
            }
        }
        for kind in extra {
            let id = constraints.len();
            constraints.push(Constraint { id, kind });
        }
        let mut cs = Self { constraints, walls, corners: Vec::new(), warnings: Vec::new(), bbox };
        let (corners, warnings) = cs.extract_corners();
        cs.corners = corners;
        cs.warnings = warnings;
        cs
    }

    pub fn empty(bbox: BoundingBox) -> Self {
        Self::build(Vec::new(), Vec::new(), bbox)
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint(&self, id: usize) -> &Constraint {
        &self.constraints[id]
    }

    pub fn walls(&self) -> &[Wall] {
        &self.walls
    }

    pub fn corners(&self) -> &[Corner] {
        &self.corners
    }

    pub fn warnings(&self) -> &[GeometryWarning] {
        &self.warnings
    }

    pub fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }

    /// Largest violation at `q`; feasible points have this `<= EPS_ACTIVE`.
    ///
    /// A thick wall is convex, so its violation is the smallest of its face
    /// planes; this keeps points on one face from being counted as deep
    /// inside by a neighbouring face whose slab ends on that face.
    pub fn max_violation(&self, q: &Vec2, t: f64) -> f64 {
        let mut thick = vec![f64::INFINITY; self.walls.len()];
        let mut worst = f64::NEG_INFINITY;
        for c in &self.constraints {
            match &c.kind {
                ConstraintKind::Face { face, wall } if self.walls[*wall].thickness > 0.0 => {
                    thick[*wall] = thick[*wall].min(face.plane_value(q));
                }
                _ => worst = worst.max(c.eval(q, t)),
            }
        }
        thick.into_iter().filter(|g| g.is_finite()).fold(worst, f64::max)
    }

    pub fn is_feasible(&self, q: &Vec2, t: f64) -> bool {
        self.max_violation(q, t) <= EPS_ACTIVE
    }

    /// Ids of the constraints with `|g_j(q, t)| <= EPS_ACTIVE`, ascending.
    pub fn active_set(&self, q: &Vec2, t: f64) -> Vec<usize> {
        self.constraints
            .iter()
            .filter(|c| c.eval(q, t).abs() <= EPS_ACTIVE)
            .map(|c| c.id)
            .collect()
    }

    /// Corner records, also available precomputed through [`corners`](Self::corners).
    pub fn corners_of(&self) -> (Vec<Corner>, Vec<GeometryWarning>) {
        self.extract_corners()
    }

    fn extract_corners(&self) -> (Vec<Corner>, Vec<GeometryWarning>) {
        // Group face endpoints by position.
        let mut groups: Vec<(Vec2, Vec<(usize, Vec2)>)> = Vec::new();
        for c in &self.constraints {
            let Some(face) = c.face() else { continue };
            for (p, other) in [(face.a, face.b), (face.b, face.a)] {
                let dir = (other - p).normalize();
                match groups.iter_mut().find(|(q, _)| (q - p).norm() <= EPS_ACTIVE) {
                    Some((_, members)) => members.push((c.id, dir)),
                    None => groups.push((p, vec![(c.id, dir)])),
                }
            }
        }

        let mut corners = Vec::new();
        let mut warnings = Vec::new();
        for (position, members) in groups {
            if members.len() < 2 || !self.bbox.contains_strict(&position) {
                continue;
            }
            let mut incident: Vec<usize> = members.iter().map(|(id, _)| *id).collect();
            incident.sort_unstable();
            incident.dedup();

            let mut edge_directions: Vec<Vec2> = Vec::new();
            for (_, d) in &members {
                if !edge_directions.iter().any(|e| (e - d).norm() < 1e-9) {
                    edge_directions.push(*d);
                }
            }
            if edge_directions.len() >= 3 {
                warnings.push(GeometryWarning {
                    position,
                    message: format!(
                        "{} boundaries meet at ({}, {})",
                        edge_directions.len(),
                        position.x,
                        position.y
                    ),
                });
            }
            let outgoing_cone = self.cone_at(&position, &edge_directions);
            corners.push(Corner { position, incident_constraints: incident, edge_directions, outgoing_cone });
        }
        corners.sort_by(|a, b| {
            a.position
                .x
                .total_cmp(&b.position.x)
                .then(a.position.y.total_cmp(&b.position.y))
        });
        (corners, warnings)
    }

    /// Feasible arcs between consecutive boundary directions at a corner.
    fn cone_at(&self, position: &Vec2, edges: &[Vec2]) -> Vec<AngularInterval> {
        let mut angles: Vec<f64> = edges.iter().map(angle_of).collect();
        angles.sort_by(f64::total_cmp);
        let mut arcs = Vec::new();
        for i in 0..angles.len() {
            let start = angles[i];
            let end = if i + 1 < angles.len() { angles[i + 1] } else { angles[0] + 2.0 * PI };
            if end - start <= 1e-12 {
                continue;
            }
            let mid = 0.5 * (start + end);
            let probe = position + CONE_PROBE_STEP * direction(mid);
            if self.is_feasible(&probe, 0.0) {
                arcs.push(AngularInterval { start: wrap_angle(start), end: wrap_angle(start) + (end - start) });
            }
        }
        arcs
    }

    /// Whether the straight segment `p → q` stays in the feasible region.
    /// Grazing contact (touching a corner, sliding along a face, endpoints
    /// on a boundary) is feasible; crossing a blade or entering a wall is not.
    pub fn segment_feasible(&self, p: &Vec2, q: &Vec2) -> bool {
        let d = q - p;
        let seg_len = d.norm();
        if seg_len == 0.0 {
            return self.is_feasible(p, 0.0);
        }
        let s_tol = EPS_ACTIVE / seg_len;
        let mut breaks = vec![0.0, 1.0];
        for c in &self.constraints {
            let (point, normal, face) = match &c.kind {
                ConstraintKind::Face { face, .. } => (face.a, face.outward_normal, Some(face)),
                ConstraintKind::HalfPlane { point, normal } => (*point, *normal, None),
                ConstraintKind::MovingHalfPlane { point, normal, .. } => (*point, *normal, None),
            };
            let denom = normal.dot(&d);
            let g_p = normal.dot(&(p - point));
            if denom.abs() <= 1e-300 {
                continue;
            }
            let s = -g_p / denom;
            if !(0.0..=1.0).contains(&s) {
                continue;
            }
            match face {
                None => breaks.push(s),
                Some(face) => {
                    let x = p + s * d;
                    let u = face.slab_coordinate(&x);
                    let u_tol = EPS_ACTIVE / face.length();
                    if u < -u_tol || u > 1.0 + u_tol {
                        continue;
                    }
                    breaks.push(s);
                    let interior_seg = s > s_tol && s < 1.0 - s_tol;
                    let interior_face = u > u_tol && u < 1.0 - u_tol;
                    if face.depth == 0.0 && interior_seg && interior_face {
                        return false;
                    }
                }
            }
        }
        for corner in &self.corners {
            let s = (corner.position - p).dot(&d) / (seg_len * seg_len);
            if s <= s_tol || s >= 1.0 - s_tol {
                continue;
            }
            if (p + s * d - corner.position).norm() > EPS_ACTIVE {
                continue;
            }
            if !corner.same_sector(&-d, &d) {
                return false;
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.windows(2).all(|w| {
            if w[1] - w[0] <= 1e-15 {
                return true;
            }
            let mid = p + 0.5 * (w[0] + w[1]) * d;
            self.is_feasible(&mid, 0.0)
        })
    }

    /// Same geometry shifted by `offset` (bounding box included).
    pub fn translated(&self, offset: &Vec2) -> Self {
        let walls: Vec<Wall> = self.walls.iter().map(|w| w.translated(offset)).collect();
        let extra: Vec<ConstraintKind> = self
            .constraints
            .iter()
            .filter(|c| c.face().is_none())
            .map(|c| c.translated(offset).kind)
            .collect();
        Self::build(walls, extra, self.bbox.translated(offset))
    }

    /// Corner whose position lies within `tol` of `q`, if any.
    pub fn corner_near(&self, q: &Vec2, tol: f64) -> Option<&Corner> {
        self.corners.iter().find(|c| (c.position - q).norm() <= tol)
    }
}

/// Turn direction sign of the polyline `prev → at → next`: positive for a
/// left (counter-clockwise) turn.
pub fn turn_sign(prev: &Vec2, at: &Vec2, next: &Vec2) -> f64 {
    cross(&(at - prev), &(next - at))
}

/// Whether direction `e` lies strictly inside the angular wedge swept from
/// `from` to `to` in the given rotational sense (counter-clockwise when
/// `ccw`).
pub fn strictly_between(from: &Vec2, to: &Vec2, e: &Vec2, ccw: bool) -> bool {
    let a0 = angle_of(from);
    let sweep = |x: &Vec2| {
        let mut d = angle_of(x) - a0;
        if !ccw {
            d = -d;
        }
        d.rem_euclid(2.0 * PI)
    };
    let span = sweep(to);
    let pos = sweep(e);
    const TOL: f64 = 1e-12;
    pos > TOL && pos < span - TOL
}
