//! Brute-force validator: a time-sliced lattice path integral over the
//! feasible region, and comparison of intensity profiles.
//!
//! The lattice covers a region around the obstacles only. The wave enters
//! it analytically (free kernel from the source, cut by visibility), is
//! advanced through `K` equal slices by direct windowed sums in which a hop
//! counts only if its straight segment is feasible, and leaves through one
//! direct hop from the lattice to the screen bins.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, ConstraintKind, ConstraintSet, Vec2, WallSegment};
use crate::paths::{allocate_times, enumerate_paths, PathRule, PolygonalPath};
use crate::propagator::{free_kernel, free_kernel_2d, Amplitude, IntensityProfile, PhysicalConstants, Screen};

/// Nominal slice window radius in units of `sqrt(hbar tau / m)`; shorter
/// windows raise a warning.
pub const WINDOW_RADIUS: f64 = 6.0;

/// Upper bound on the slice window radius in units of `sqrt(hbar tau / m)`.
pub const MAX_WINDOW_RADIUS: f64 = 12.0;

/// Largest kernel frequency kept in a slice window, as a fraction of the
/// lattice sampling frequency `2 pi / h`.
pub const ALIAS_FRACTION: f64 = 0.6;

/// Kaiser shape parameter per radian of kernel phase at the window edge.
pub const KAISER_BETA_PER_RADIAN: f64 = 0.3;

/// Fraction of the window radius where the taper starts.
pub const TAPER_START: f64 = 0.55;

pub const MIN_NODES_PER_WAVELENGTH: f64 = 8.0;

pub const MIN_SLICES: usize = 4;

/// One-dimensional composition window, as a fraction of the radius where
/// the composed integrand reaches the grid Nyquist frequency.
pub const CK_WINDOW_FRACTION: f64 = 0.5;

/// Default composition spacing in units of `sqrt(hbar dt / m)`.
pub const CK_DEFAULT_SPACING: f64 = 0.08;

/// Smooth step: 1 for `u <= 0`, 0 for `u >= 1`, infinitely differentiable.
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        return 1.0;
    }
    if u >= 1.0 {
        return 0.0;
    }
    let a = (-1.0 / (1.0 - u)).exp();
    let b = (-1.0 / u).exp();
    a / (a + b)
}

/// 1 inside `inner * r_max`, falling smoothly to 0 at `r_max`.
pub fn radial_taper(r: f64, r_max: f64, inner: f64) -> f64 {
    smooth_step((r / r_max - inner) / (1.0 - inner))
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleWarning {
    FewSlices { slices: usize },
    UnderResolved { nodes_per_wavelength: f64 },
    ShortWindow { radius: f64 },
}

impl fmt::Display for OracleWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleWarning::FewSlices { slices } => {
                write!(f, "only {slices} time slices (at least {MIN_SLICES} recommended)")
            }
            OracleWarning::UnderResolved { nodes_per_wavelength } => write!(
                f,
                "lattice resolves the wavelength with {nodes_per_wavelength:.2} nodes (at least {MIN_NODES_PER_WAVELENGTH} recommended)"
            ),
            OracleWarning::ShortWindow { radius } => write!(
                f,
                "slice window radius is {radius:.2} kernel widths (at least {WINDOW_RADIUS} recommended); use fewer slices or a finer grid"
            ),
        }
    }
}

/// Width of the absorbing border, as a fraction of the region's short side.
pub const EDGE_FRACTION: f64 = 0.2;
/// Inset of the lattice entry and exit boundary, same units.
pub const MARGIN_FRACTION: f64 = 0.25;

/// Nodes closer than this fraction of the spacing to a wall are masked;
/// a node lying on a thin wall would otherwise pass amplitude through it.
pub const MASK_MARGIN: f64 = 1e-6;

/// Square-spaced node grid with a feasibility mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    /// Position of node `(0, 0)`.
    pub origin: Vec2,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub slices: usize,
    pub mask: Vec<bool>,
    /// Width of the smooth apodisation band along the lattice border.
    pub edge_width: f64,
}

impl Lattice {
    /// `grid` nodes along the longer side of `region`; the shorter side uses
    /// the same spacing. The node set is centred in the region.
    pub fn new(cs: &ConstraintSet, region: &BoundingBox, grid: usize, slices: usize) -> Result<Self> {
        if grid < 3 {
            return Err(Error::InvalidArgument(format!("oracle grid must be at least 3, got {grid}")));
        }
        if slices == 0 {
            return Err(Error::InvalidArgument("oracle needs at least one slice".into()));
        }
        let side = region.max - region.min;
        if !(side.x > 0.0 && side.y > 0.0) {
            return Err(Error::InvalidArgument("oracle region must have positive extent".into()));
        }
        let h = side.x.max(side.y) / (grid - 1) as f64;
        let nx = ((side.x / h).round() as usize + 1).min(grid);
        let ny = ((side.y / h).round() as usize + 1).min(grid);
        let centre = 0.5 * (region.min + region.max);
        let origin = centre - 0.5 * h * Vec2::new((nx - 1) as f64, (ny - 1) as f64);
        let mut lat = Self { origin, h, nx, ny, slices, mask: Vec::new(), edge_width: EDGE_FRACTION * side.x.min(side.y) };
        lat.mask = (0..lat.n_nodes()).map(|k| cs.max_violation(&lat.node_at(k), 0.0) < -MASK_MARGIN * h).collect();
        Ok(lat)
    }

    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        self.origin + self.h * Vec2::new(i as f64, j as f64)
    }

    pub fn node_at(&self, k: usize) -> Vec2 {
        self.node(k % self.nx, k / self.nx)
    }

    pub fn extent(&self) -> BoundingBox {
        BoundingBox::new(self.origin, self.node(self.nx - 1, self.ny - 1))
    }

    pub fn apply_mask(&self, psi: &mut [Amplitude]) {
        for (v, &ok) in psi.iter_mut().zip(&self.mask) {
            if !ok {
                *v = Amplitude::new(0.0, 0.0);
            }
        }
    }

    /// Apodisation weight: 0 on the border, 1 deeper than `edge_width`.
    pub fn edge_window(&self, q: &Vec2) -> f64 {
        if self.edge_width <= 0.0 {
            return 1.0;
        }
        let ext = self.extent();
        let d = (q.x - ext.min.x).min(ext.max.x - q.x).min(q.y - ext.min.y).min(ext.max.y - q.y);
        smooth_step(1.0 - d / self.edge_width)
    }

    pub fn warnings(&self, wavelength: f64) -> Vec<OracleWarning> {
        let mut out = Vec::new();
        if self.slices < MIN_SLICES {
            out.push(OracleWarning::FewSlices { slices: self.slices });
        }
        let ratio = wavelength / self.h;
        if ratio < MIN_NODES_PER_WAVELENGTH {
            out.push(OracleWarning::UnderResolved { nodes_per_wavelength: ratio });
        }
        out
    }
}

/// Modified Bessel function `I0`, power series.
fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Smooth step built from the cumulative Kaiser window: 1 at `x = 0`, 0 at
/// `x = 1`.
struct KaiserStep {
    table: Vec<f64>,
}

impl KaiserStep {
    const N: usize = 4096;

    fn new(beta: f64) -> Self {
        let n = Self::N;
        let density: Vec<f64> = (0..=n)
            .map(|k| {
                let x = 2.0 * k as f64 / n as f64 - 1.0;
                bessel_i0(beta * (1.0 - x * x).max(0.0).sqrt())
            })
            .collect();
        let mut table = vec![0.0; n + 1];
        for k in 1..=n {
            table[k] = table[k - 1] + 0.5 * (density[k - 1] + density[k]);
        }
        let total = table[n];
        for v in &mut table {
            *v = 1.0 - *v / total;
        }
        Self { table }
    }

    fn value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        if x >= 1.0 {
            return 0.0;
        }
        let p = x * Self::N as f64;
        let k = p.floor() as usize;
        let f = p - k as f64;
        self.table[k] * (1.0 - f) + self.table[k + 1] * f
    }
}

/// Offsets and weights `K(r, tau) * taper * h^2` of one slice. The window
/// ends where the kernel frequency reaches `ALIAS_FRACTION` of the lattice
/// sampling frequency (capped at `MAX_WINDOW_RADIUS` kernel widths), and
/// the taper is a Kaiser step in kernel phase.
#[derive(Debug, Clone)]
struct Stencil {
    offsets: Vec<(i64, i64)>,
    weights: Vec<Amplitude>,
    radius: f64,
    /// Radius in units of `sqrt(hbar tau / m)`.
    widths: f64,
}

impl Stencil {
    fn new(lat: &Lattice, pc: &PhysicalConstants, tau: f64) -> Self {
        let width = (pc.hbar * tau / pc.m).sqrt();
        let alias = ALIAS_FRACTION * 2.0 * PI * pc.hbar * tau / (pc.m * lat.h);
        let radius = alias.min(MAX_WINDOW_RADIUS * width);
        let u_max = 0.5 * pc.m * radius * radius / (pc.hbar * tau);
        let step = KaiserStep::new((KAISER_BETA_PER_RADIAN * u_max).clamp(2.0, 20.0));
        let n = (radius / lat.h).ceil() as i64;
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        for dj in -n..=n {
            for di in -n..=n {
                let o = lat.h * Vec2::new(di as f64, dj as f64);
                let r = o.norm();
                if r >= radius {
                    continue;
                }
                let u = 0.5 * pc.m * r * r / (pc.hbar * tau);
                let w = free_kernel_2d(pc, &Vec2::zeros(), &o, tau) * step.value(u / u_max) * lat.h * lat.h;
                offsets.push((di, dj));
                weights.push(w);
            }
        }
        Self { offsets, weights, radius, widths: radius / width }
    }
}

fn point_segment_distance(p: &Vec2, face: &WallSegment) -> f64 {
    let d = face.b - face.a;
    let s = ((p - face.a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
    (p - (face.a + s * d)).norm()
}

fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Whether segment `p q` intersects or comes within `tol` of segment `a b`.
fn segments_touch(p: &Vec2, q: &Vec2, a: &Vec2, b: &Vec2, tol: f64) -> bool {
    let d1 = cross(&(q - p), &(a - p));
    let d2 = cross(&(q - p), &(b - p));
    let d3 = cross(&(b - a), &(p - a));
    let d4 = cross(&(b - a), &(q - a));
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return true;
    }
    let pq = WallSegment { a: *p, b: *q, outward_normal: Vec2::zeros(), depth: 0.0 };
    let ab = WallSegment { a: *a, b: *b, outward_normal: Vec2::zeros(), depth: 0.0 };
    point_segment_distance(a, &pq) <= tol
        || point_segment_distance(b, &pq) <= tol
        || point_segment_distance(p, &ab) <= tol
        || point_segment_distance(q, &ab) <= tol
}

/// Segment feasibility with a cheap rejection: segments between feasible
/// points that stay clear of every face are feasible.
fn hop_feasible(cs: &ConstraintSet, faces: &[WallSegment], bounded: bool, p: &Vec2, q: &Vec2) -> bool {
    if bounded && !faces.iter().any(|f| segments_touch(p, q, &f.a, &f.b, 1e-9)) {
        return true;
    }
    cs.segment_feasible(p, q)
}

/// Per target node, which stencil hops are blocked. `None` for nodes whose
/// window cannot reach any wall. Flags are packed 64 to a word.
fn hop_blocking(lat: &Lattice, cs: &ConstraintSet, st: &Stencil) -> Vec<Option<Vec<u64>>> {
    let faces: Vec<WallSegment> = cs.constraints().iter().filter_map(|c| c.face().copied()).collect();
    let unbounded = cs.constraints().iter().any(|c| !matches!(c.kind, ConstraintKind::Face { .. }));
    let reach = st.radius + lat.h;
    (0..lat.n_nodes())
        .into_par_iter()
        .map(|k| {
            let q = lat.node_at(k);
            if !lat.mask[k] || (!unbounded && faces.iter().all(|f| point_segment_distance(&q, f) > reach)) {
                return None;
            }
            let near: Vec<WallSegment> =
                faces.iter().filter(|f| point_segment_distance(&q, f) <= reach).copied().collect();
            let (i, j) = ((k % lat.nx) as i64, (k / lat.nx) as i64);
            let mut blocked = vec![0u64; st.offsets.len().div_ceil(64)];
            for (n, &(di, dj)) in st.offsets.iter().enumerate() {
                let (si, sj) = (i - di, j - dj);
                let outside = si < 0 || sj < 0 || si >= lat.nx as i64 || sj >= lat.ny as i64;
                if outside || !hop_feasible(cs, &near, !unbounded, &lat.node(si as usize, sj as usize), &q) {
                    blocked[n / 64] |= 1 << (n % 64);
                }
            }
            Some(blocked)
        })
        .collect()
}

fn slice_step(lat: &Lattice, st: &Stencil, blocking: &[Option<Vec<u64>>], psi: &[Amplitude]) -> Vec<Amplitude> {
    let (nx, ny) = (lat.nx as i64, lat.ny as i64);
    (0..lat.n_nodes())
        .into_par_iter()
        .map(|k| {
            if !lat.mask[k] {
                return Amplitude::new(0.0, 0.0);
            }
            let (i, j) = ((k as i64) % nx, (k as i64) / nx);
            let mut acc = Amplitude::new(0.0, 0.0);
            let blocked = blocking[k].as_deref();
            for (n, (&(di, dj), w)) in st.offsets.iter().zip(&st.weights).enumerate() {
                let (si, sj) = (i - di, j - dj);
                if si < 0 || sj < 0 || si >= nx || sj >= ny {
                    continue;
                }
                if blocked.is_some_and(|b| b[n / 64] >> (n % 64) & 1 == 1) {
                    continue;
                }
                acc += w * psi[(sj * nx + si) as usize];
            }
            acc
        })
        .collect()
}

/// Advances a lattice field by `duration` in `lat.slices` equal slices.
/// Hops across walls are dropped and infeasible nodes absorb.
pub fn evolve(lat: &Lattice, cs: &ConstraintSet, pc: &PhysicalConstants, psi: &[Amplitude], duration: f64) -> Result<Vec<Amplitude>> {
    if psi.len() != lat.n_nodes() {
        return Err(Error::InvalidArgument(format!("field has {} values for {} nodes", psi.len(), lat.n_nodes())));
    }
    if !(duration > 0.0) {
        return Err(Error::InvalidArgument("evolution time must be positive".into()));
    }
    let tau = duration / lat.slices as f64;
    let st = Stencil::new(lat, pc, tau);
    let blocking = hop_blocking(lat, cs, &st);
    let mut field = psi.to_vec();
    lat.apply_mask(&mut field);
    let sponge: Vec<f64> = (0..lat.n_nodes()).map(|k| lat.edge_window(&lat.node_at(k))).collect();
    for _ in 0..lat.slices {
        field = slice_step(lat, &st, &blocking, &field);
        for (v, w) in field.iter_mut().zip(&sponge) {
            *v *= w;
        }
    }
    Ok(field)
}

/// Field at time `t` of a point source released at `q_src` at time 0,
/// restricted to nodes visible from the source and apodised at the border.
pub fn point_source_field(lat: &Lattice, cs: &ConstraintSet, pc: &PhysicalConstants, q_src: &Vec2, t: f64) -> Vec<Amplitude> {
    (0..lat.n_nodes())
        .into_par_iter()
        .map(|k| {
            let q = lat.node_at(k);
            if !lat.mask[k] || !cs.segment_feasible(q_src, &q) {
                return Amplitude::new(0.0, 0.0);
            }
            free_kernel_2d(pc, q_src, &q, t) * lat.edge_window(&q)
        })
        .collect()
}

/// Point source at `q_src` propagated to `t_end`: analytic up to `t_start`,
/// then `lat.slices` lattice slices.
pub fn lattice_propagate(
    lat: &Lattice,
    cs: &ConstraintSet,
    pc: &PhysicalConstants,
    q_src: &Vec2,
    schedule: &Schedule,
) -> Result<Vec<Amplitude>> {
    let psi0 = point_source_field(lat, cs, pc, q_src, schedule.t_start);
    evolve(lat, cs, pc, &psi0, schedule.t_end - schedule.t_start)
}

/// Direct hop from the lattice field to the screen bins over `dt`.
pub fn screen_hop(
    lat: &Lattice,
    cs: &ConstraintSet,
    pc: &PhysicalConstants,
    psi: &[Amplitude],
    screen: &Screen,
    dt: f64,
) -> Vec<Amplitude> {
    let faces: Vec<WallSegment> = cs.constraints().iter().filter_map(|c| c.face().copied()).collect();
    let bounded = faces.len() == cs.constraints().len();
    let weighted: Vec<(Vec2, Amplitude)> = (0..lat.n_nodes())
        .filter(|&k| psi[k] != Amplitude::new(0.0, 0.0))
        .map(|k| {
            let q = lat.node_at(k);
            (q, psi[k] * lat.edge_window(&q) * lat.h * lat.h)
        })
        .filter(|(_, v)| *v != Amplitude::new(0.0, 0.0))
        .collect();
    screen
        .bin_centers()
        .par_iter()
        .map(|dst| {
            weighted
                .iter()
                .filter(|(q, _)| hop_feasible(cs, &faces, bounded, q, dst))
                .map(|(q, v)| free_kernel_2d(pc, q, dst, dt) * v)
                .sum()
        })
        .collect()
}

/// Times at which the lattice takes over from, and hands back to, the
/// analytic kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub t_start: f64,
    pub t_end: f64,
}

/// Entry and exit times of a constant-speed traversal of `path` (total time
/// `total_time`) through `region` shrunk by `margin` on every side.
pub fn reference_schedule(path: &PolygonalPath, total_time: f64, region: &BoundingBox, margin: f64) -> Result<Schedule> {
    let inner = BoundingBox::new(region.min + Vec2::repeat(margin), region.max - Vec2::repeat(margin));
    let lengths = path.segment_lengths();
    let total: f64 = lengths.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroLength { segments: lengths.len() });
    }
    let step = (margin.max(1e-3) * 1e-2).min(total * 1e-4);
    let n = (total / step).ceil() as usize;
    let mut first = None;
    let mut last = None;
    for k in 0..=n {
        let s = total * k as f64 / n as f64;
        if inner.contains_strict(&point_along(path, &lengths, s)) {
            first.get_or_insert(s);
            last = Some(s);
        }
    }
    match (first, last) {
        (Some(a), Some(b)) if b > a && a > 0.0 && b < total => {
            Ok(Schedule { t_start: total_time * a / total, t_end: total_time * b / total })
        }
        _ => Err(Error::Validation(
            "oracle region must contain an interior stretch of the reference path, away from both endpoints".into(),
        )),
    }
}

fn point_along(path: &PolygonalPath, lengths: &[f64], s: f64) -> Vec2 {
    let mut rest = s;
    for (k, l) in lengths.iter().enumerate() {
        if rest <= *l || k + 1 == lengths.len() {
            let u = if *l > 0.0 { (rest / l).min(1.0) } else { 0.0 };
            return path.vertices[k] + u * (path.vertices[k + 1] - path.vertices[k]);
        }
        rest -= l;
    }
    path.vertices[0]
}

/// Shortest admissible polygon to the middle screen bin, with times.
pub fn reference_path(
    pc: &PhysicalConstants,
    cs: &ConstraintSet,
    q_src: &Vec2,
    screen: &Screen,
    max_corners: usize,
    rule: PathRule,
) -> Result<PolygonalPath> {
    let dst = screen.bin_center(screen.n_bins / 2);
    let paths = enumerate_paths(cs, q_src, &dst, max_corners, rule)?;
    allocate_times(&paths[0], pc.t_total, pc.m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub region: BoundingBox,
    pub grid: usize,
    pub slices: usize,
    /// Shrink margin for the schedule, as a fraction of the shorter side.
    pub margin_fraction: f64,
    /// Border apodisation width, as a fraction of the shorter side.
    pub edge_fraction: f64,
}

impl OracleConfig {
    pub fn new(region: BoundingBox, grid: usize, slices: usize) -> Self {
        Self { region, grid, slices, margin_fraction: MARGIN_FRACTION, edge_fraction: EDGE_FRACTION }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub profile: IntensityProfile,
    pub amplitudes: Vec<Amplitude>,
    pub schedule: Schedule,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub wavelength: f64,
    pub warnings: Vec<OracleWarning>,
}

/// Lattice estimate of the screen intensity. Lattice profiles carry
/// `n_paths = 0` and no shadow flags.
pub fn oracle_intensity(
    pc: &PhysicalConstants,
    cs: &ConstraintSet,
    q_src: &Vec2,
    screen: &Screen,
    reference: &PolygonalPath,
    cfg: &OracleConfig,
) -> Result<OracleRun> {
    let mut lat = Lattice::new(cs, &cfg.region, cfg.grid, cfg.slices)?;
    let short = (cfg.region.max - cfg.region.min).min();
    lat.edge_width = cfg.edge_fraction * short;
    let schedule = reference_schedule(reference, pc.t_total, &cfg.region, cfg.margin_fraction * short)?;
    let speed = reference.length / pc.t_total;
    let wavelength = pc.wavelength(speed);
    let mut warnings = lat.warnings(wavelength);
    let tau = (schedule.t_end - schedule.t_start) / lat.slices.max(1) as f64;
    let widths = Stencil::new(&lat, pc, tau).widths;
    if widths < WINDOW_RADIUS {
        warnings.push(OracleWarning::ShortWindow { radius: widths });
    }
    let psi = lattice_propagate(&lat, cs, pc, q_src, &schedule)?;
    let amplitudes = screen_hop(&lat, cs, pc, &psi, screen, pc.t_total - schedule.t_end);
    let n = screen.n_bins;
    let profile = IntensityProfile::from_raw(
        (0..n).map(|i| screen.coordinate(i)).collect(),
        amplitudes.iter().map(|a| a.norm_sqr()).collect(),
        vec![0; n],
        vec![false; n],
    );
    Ok(OracleRun { profile, amplitudes, schedule, h: lat.h, nx: lat.nx, ny: lat.ny, wavelength, warnings })
}

/// `∫ K(x0 → y, dt) K(y → x, dt) dy` on the grid `y = k h`, tapered
/// smoothly to zero before the integrand's local frequency reaches the
/// grid Nyquist limit.
pub fn compose_free_1d(pc: &PhysicalConstants, x0: f64, x: f64, dt: f64, h: f64) -> Amplitude {
    let c = 0.5 * (x0 + x);
    let nyquist_radius = PI * pc.hbar * dt / (2.0 * pc.m * h);
    let r_max = CK_WINDOW_FRACTION * nyquist_radius;
    let k_lo = ((c - r_max) / h).ceil() as i64;
    let k_hi = ((c + r_max) / h).floor() as i64;
    (k_lo..=k_hi)
        .map(|k| {
            let y = k as f64 * h;
            let w = radial_taper((y - c).abs(), r_max, TAPER_START);
            free_kernel(pc, &[x0], &[y], dt) * free_kernel(pc, &[y], &[x], dt) * (w * h)
        })
        .sum()
}

/// Default grid spacing for [`compose_free_1d`] at slice time `dt`.
pub fn ck_default_spacing(pc: &PhysicalConstants, dt: f64) -> f64 {
    CK_DEFAULT_SPACING * (pc.hbar * dt / pc.m).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumKind {
    Maximum,
    Minimum,
}

impl ExtremumKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExtremumKind::Maximum => "max",
            ExtremumKind::Minimum => "min",
        }
    }
}

/// One extremum of the first profile and its nearest counterpart in the
/// second, positions in fractional bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremumOffset {
    pub kind: ExtremumKind,
    pub position_a: f64,
    pub position_b: Option<f64>,
}

impl ExtremumOffset {
    pub fn offset_bins(&self) -> Option<f64> {
        self.position_b.map(|b| b - self.position_a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityReport {
    pub n_bins: usize,
    pub window: Range<usize>,
    /// Zero-mean normalised cross-correlation over the window.
    pub correlation: f64,
    pub max_abs_deviation: f64,
    pub extrema: Vec<ExtremumOffset>,
}

impl SimilarityReport {
    /// Largest `|offset|` among extrema of `kind`; infinite if any is
    /// unmatched, 0 if there are none.
    pub fn max_offset(&self, kind: ExtremumKind) -> f64 {
        self.extrema
            .iter()
            .filter(|e| e.kind == kind)
            .map(|e| e.offset_bins().map_or(f64::INFINITY, f64::abs))
            .fold(0.0, f64::max)
    }
}

/// Compares two profiles over all bins.
pub fn compare_profiles(a: &IntensityProfile, b: &IntensityProfile) -> Result<SimilarityReport> {
    compare_profiles_in(a, b, 0..a.len())
}

/// Compares two profiles over the bin range `window`.
pub fn compare_profiles_in(a: &IntensityProfile, b: &IntensityProfile, window: Range<usize>) -> Result<SimilarityReport> {
    if a.len() != b.len() {
        return Err(Error::ProfileMismatch(format!("{} bins vs {} bins", a.len(), b.len())));
    }
    if window.start >= window.end || window.end > a.len() {
        return Err(Error::ProfileMismatch(format!("window {window:?} outside {} bins", a.len())));
    }
    let xa = &a.intensity[window.clone()];
    let xb = &b.intensity[window.clone()];
    let correlation = pearson(xa, xb);
    let max_abs_deviation = xa.iter().zip(xb).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);

    let ea = extrema(&a.intensity, &window);
    let eb = extrema(&b.intensity, &window);
    let maxima_a: Vec<f64> = ea.iter().filter(|e| e.0 == ExtremumKind::Maximum).map(|e| e.1).collect();
    let tolerance = if maxima_a.len() >= 2 {
        0.5 * (maxima_a[maxima_a.len() - 1] - maxima_a[0]) / (maxima_a.len() - 1) as f64
    } else {
        0.5 * window.len() as f64
    };
    let extrema = ea
        .iter()
        .map(|&(kind, pos)| {
            let position_b = eb
                .iter()
                .filter(|e| e.0 == kind)
                .map(|e| e.1)
                .min_by(|x, y| (x - pos).abs().total_cmp(&(y - pos).abs()))
                .filter(|p| (p - pos).abs() <= tolerance);
            ExtremumOffset { kind, position_a: pos, position_b }
        })
        .collect();
    Ok(SimilarityReport { n_bins: a.len(), window, correlation, max_abs_deviation, extrema })
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 && sbb == 0.0 {
        return 1.0;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Vertex of the parabola through three samples, relative to the middle.
fn parabolic_offset(l: f64, c: f64, r: f64) -> f64 {
    let denom = l - 2.0 * c + r;
    if denom == 0.0 {
        0.0
    } else {
        (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
    }
}

/// Indices of fringe maxima: local maxima over +-2 bins above 5% of the
/// peak, excluding the profile ends.
pub fn fringe_maxima(v: &[f64]) -> Vec<usize> {
    let peak = v.iter().cloned().fold(0.0, f64::max);
    (1..v.len().saturating_sub(1))
        .filter(|&i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 2).min(v.len() - 1);
            v[i] >= 0.05 * peak
                && (lo..i).all(|k| v[k] < v[i])
                && (i + 1..=hi).all(|k| v[k] <= v[i])
        })
        .collect()
}

/// Maxima inside `window` and the minima between consecutive maxima, at
/// sub-bin resolution.
fn extrema(v: &[f64], window: &Range<usize>) -> Vec<(ExtremumKind, f64)> {
    let maxima: Vec<usize> = fringe_maxima(v).into_iter().filter(|i| window.contains(i)).collect();
    let mut out: Vec<(ExtremumKind, f64)> = Vec::new();
    for (n, &i) in maxima.iter().enumerate() {
        out.push((ExtremumKind::Maximum, i as f64 + parabolic_offset(v[i - 1], v[i], v[i + 1])));
        if let Some(&next) = maxima.get(n + 1) {
            let m = (i + 1..next).min_by(|&x, &y| v[x].total_cmp(&v[y])).unwrap_or(i);
            if m > 0 && m + 1 < v.len() {
                out.push((ExtremumKind::Minimum, m as f64 + parabolic_offset(v[m - 1], v[m], v[m + 1])));
            }
        }
    }
    out
}

/// Bin range holding the bright maximum nearest the middle of the profile
/// and `n_fringes / 2` maxima on either side, padded by half a fringe
/// spacing. Maxima below half the peak are not considered central.
pub fn central_fringe_window(p: &IntensityProfile, n_fringes: usize) -> Range<usize> {
    let maxima = fringe_maxima(&p.intensity);
    if maxima.is_empty() {
        return 0..p.len();
    }
    let peak = p.intensity.iter().cloned().fold(0.0, f64::max);
    let mid = (p.len() as f64 - 1.0) / 2.0;
    let c = (0..maxima.len())
        .filter(|&k| p.intensity[maxima[k]] >= 0.5 * peak)
        .min_by(|&x, &y| (maxima[x] as f64 - mid).abs().total_cmp(&(maxima[y] as f64 - mid).abs()))
        .unwrap_or(0);
    let half = n_fringes / 2;
    let lo = c.saturating_sub(half);
    let hi = (c + half).min(maxima.len() - 1);
    let pad = if maxima.len() >= 2 {
        ((maxima[maxima.len() - 1] - maxima[0]) as f64 / (maxima.len() - 1) as f64 / 2.0).round() as usize
    } else {
        p.len() / 4
    };
    maxima[lo].saturating_sub(pad)..(maxima[hi] + pad + 1).min(p.len())
}
