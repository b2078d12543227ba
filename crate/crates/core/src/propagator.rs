//! Free-particle kernel, polygon kernels and screen intensity profiles built
//! from the superposition of extremal polygon amplitudes.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{ConstraintSet, Vec2};
use crate::paths::{allocate_times, enumerate_paths, PathRule, PolygonalPath};

pub type Amplitude = Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub m: f64,
    pub hbar: f64,
    /// Total flight time from source to screen.
    pub t_total: f64,
}

impl PhysicalConstants {
    pub fn new(m: f64, hbar: f64, t_total: f64) -> Result<Self> {
        for (name, v) in [("m", m), ("hbar", hbar), ("T", t_total)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { m, hbar, t_total })
    }

    /// de Broglie wavelength `2 pi hbar / (m v)`.
    pub fn wavelength(&self, speed: f64) -> f64 {
        2.0 * PI * self.hbar / (self.m * speed)
    }
}

/// `(m / (2 pi i hbar dt))^{n/2} exp(i m |q - q_o|^2 / (2 hbar dt))` with
/// `sqrt(i) = e^{i pi/4}`. `n` is the slice length.
pub fn free_kernel(pc: &PhysicalConstants, q_o: &[f64], q: &[f64], dt: f64) -> Amplitude {
    debug_assert_eq!(q_o.len(), q.len());
    let n = q.len() as f64;
    let r2: f64 = q.iter().zip(q_o).map(|(a, b)| (a - b) * (a - b)).sum();
    let modulus = (pc.m / (2.0 * PI * pc.hbar * dt)).powf(0.5 * n);
    let phase = pc.m * r2 / (2.0 * pc.hbar * dt) - n * PI / 4.0;
    Amplitude::from_polar(modulus, phase)
}

/// Planar convenience wrapper over [`free_kernel`].
pub fn free_kernel_2d(pc: &PhysicalConstants, q_o: &Vec2, q: &Vec2, dt: f64) -> Amplitude {
    free_kernel(pc, q_o.as_slice(), q.as_slice(), dt)
}

/// Unwrapped phase of the polygon kernel: `S / hbar - N n pi / 4`.
pub fn polygon_phase(pc: &PhysicalConstants, path: &PolygonalPath) -> f64 {
    let n = 2.0;
    path.action / pc.hbar - path.n_segments() as f64 * n * PI / 4.0
}

/// Product of free kernels over the segments, using the stored times.
pub fn polygon_amplitude(pc: &PhysicalConstants, path: &PolygonalPath) -> Amplitude {
    polygon_amplitude_weighted(pc, path, &|_| 1.0)
}

/// Like [`polygon_amplitude`], multiplied by `weight(corner)` for every
/// corner the path visits.
pub fn polygon_amplitude_weighted(
    pc: &PhysicalConstants,
    path: &PolygonalPath,
    weight: &(dyn Fn(usize) -> f64 + Sync),
) -> Amplitude {
    let mut amp = path
        .vertices
        .windows(2)
        .zip(&path.segment_times)
        .map(|(w, dt)| free_kernel_2d(pc, &w[0], &w[1], *dt))
        .fold(Amplitude::new(1.0, 0.0), |acc, k| acc * k);
    for &c in &path.corners {
        amp *= weight(c);
    }
    amp
}

/// Detector line from `start` to `end` split into `n_bins` equal bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Screen {
    pub start: Vec2,
    pub end: Vec2,
    pub n_bins: usize,
}

impl Screen {
    pub fn new(start: Vec2, end: Vec2, n_bins: usize) -> Result<Self> {
        if n_bins < 2 {
            return Err(Error::Validation(format!("screen needs at least 2 bins, got {n_bins}")));
        }
        if (end - start).norm() == 0.0 {
            return Err(Error::Validation("screen has zero length".into()));
        }
        Ok(Self { start, end, n_bins })
    }

    pub fn bin_center(&self, i: usize) -> Vec2 {
        let s = (i as f64 + 0.5) / self.n_bins as f64;
        self.start + s * (self.end - self.start)
    }

    pub fn bin_centers(&self) -> Vec<Vec2> {
        (0..self.n_bins).map(|i| self.bin_center(i)).collect()
    }

    /// Unit vector along the screen.
    pub fn axis(&self) -> Vec2 {
        (self.end - self.start).normalize()
    }

    /// Projection of a bin centre on the screen axis. For a screen parallel
    /// to a coordinate axis this is that coordinate.
    pub fn coordinate(&self, i: usize) -> f64 {
        self.axis().dot(&self.bin_center(i))
    }

    pub fn bin_width(&self) -> f64 {
        (self.end - self.start).norm() / self.n_bins as f64
    }
}

/// Peak-normalised intensity on the screen bins.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityProfile {
    pub coords: Vec<f64>,
    pub intensity: Vec<f64>,
    pub n_paths: Vec<usize>,
    pub shadow: Vec<bool>,
}

impl IntensityProfile {
    pub fn len(&self) -> usize {
        self.intensity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensity.is_empty()
    }

    /// Builds a profile from raw intensities, normalising to peak 1.
    pub fn from_raw(coords: Vec<f64>, raw: Vec<f64>, n_paths: Vec<usize>, shadow: Vec<bool>) -> Self {
        let peak = raw.iter().cloned().fold(0.0, f64::max);
        let intensity = if peak > 0.0 { raw.iter().map(|v| v / peak).collect() } else { raw };
        Self { coords, intensity, n_paths, shadow }
    }
}

/// Summed polygon amplitude at one bin, and the number of paths used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinAmplitude {
    pub amplitude: Amplitude,
    pub n_paths: usize,
}

/// Unnormalised amplitudes at every bin centre. Bins without any path get
/// zero amplitude and `n_paths = 0`; other errors propagate.
pub fn screen_amplitudes(
    pc: &PhysicalConstants,
    cs: &ConstraintSet,
    q_src: &Vec2,
    screen: &Screen,
    max_corners: usize,
    rule: PathRule,
    weight: &(dyn Fn(usize) -> f64 + Sync),
) -> Result<Vec<BinAmplitude>> {
    screen
        .bin_centers()
        .par_iter()
        .map(|dst| match enumerate_paths(cs, q_src, dst, max_corners, rule) {
            Ok(paths) => {
                let mut amplitude = Amplitude::new(0.0, 0.0);
                for p in &paths {
                    let timed = allocate_times(p, pc.t_total, pc.m)?;
                    amplitude += polygon_amplitude_weighted(pc, &timed, weight);
                }
                Ok(BinAmplitude { amplitude, n_paths: paths.len() })
            }
            Err(Error::NoPath) => Ok(BinAmplitude { amplitude: Amplitude::new(0.0, 0.0), n_paths: 0 }),
            Err(e) => Err(e),
        })
        .collect()
}

/// `|sum of polygon amplitudes|^2` per bin, normalised to peak 1.
pub fn screen_intensity(
    pc: &PhysicalConstants,
    cs: &ConstraintSet,
    q_src: &Vec2,
    screen: &Screen,
    max_corners: usize,
    rule: PathRule,
) -> Result<IntensityProfile> {
    screen_intensity_weighted(pc, cs, q_src, screen, max_corners, rule, &|_| 1.0)
}

pub fn screen_intensity_weighted(
    pc: &PhysicalConstants,
    cs: &ConstraintSet,
    q_src: &Vec2,
    screen: &Screen,
    max_corners: usize,
    rule: PathRule,
    weight: &(dyn Fn(usize) -> f64 + Sync),
) -> Result<IntensityProfile> {
    let amps = screen_amplitudes(pc, cs, q_src, screen, max_corners, rule, weight)?;
    Ok(profile_from_amplitudes(screen, &amps))
}

pub fn profile_from_amplitudes(screen: &Screen, amps: &[BinAmplitude]) -> IntensityProfile {
    IntensityProfile::from_raw(
        (0..screen.n_bins).map(|i| screen.coordinate(i)).collect(),
        amps.iter().map(|a| a.amplitude.norm_sqr()).collect(),
        amps.iter().map(|a| a.n_paths).collect(),
        amps.iter().map(|a| a.n_paths == 0).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoundingBox, Wall};

    fn unit() -> PhysicalConstants {
        PhysicalConstants::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn kernel_at_coincident_points() {
        let k = free_kernel(&unit(), &[0.0], &[0.0], 1.0);
        assert!((k.norm() - (2.0 * PI).powf(-0.5)).abs() < 1e-15);
        assert!((k.arg() + PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_phase_grows_with_distance() {
        let pc = unit();
        let k0 = free_kernel(&pc, &[0.0, 0.0], &[0.0, 0.0], 1.0);
        let k1 = free_kernel(&pc, &[0.0, 0.0], &[1.0, 0.0], 1.0);
        let d = (k1 / k0).arg();
        assert!((d - 0.5).abs() < 1e-14);
    }

    #[test]
    fn rejects_nonpositive_constants() {
        assert!(PhysicalConstants::new(1.0, 1.0, -2.0).is_err());
        assert!(PhysicalConstants::new(0.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn single_segment_polygon_is_free_kernel() {
        let pc = PhysicalConstants::new(1.3, 0.7, 2.0).unwrap();
        let a = Vec2::new(0.1, -0.4);
        let b = Vec2::new(3.0, 1.5);
        let p = allocate_times(&PolygonalPath::new(vec![a, b], vec![]), pc.t_total, pc.m).unwrap();
        let amp = polygon_amplitude(&pc, &p);
        let k = free_kernel_2d(&pc, &a, &b, pc.t_total);
        assert!((amp - k).norm() < 1e-14 * k.norm());
    }

    #[test]
    fn split_segment_keeps_action_phase() {
        let pc = unit();
        let a = Vec2::new(0.0, 0.0);
        let m = Vec2::new(1.0, 0.0);
        let b = Vec2::new(2.0, 0.0);
        let one = allocate_times(&PolygonalPath::new(vec![a, b], vec![]), 1.0, 1.0).unwrap();
        let two = allocate_times(&PolygonalPath::new(vec![a, m, b], vec![]), 1.0, 1.0).unwrap();
        assert!((one.action - two.action).abs() < 1e-14);
        let d = polygon_phase(&pc, &two) - polygon_phase(&pc, &one);
        assert!((d + PI / 2.0).abs() < 1e-14);
        // extra prefactor m/(2 pi hbar dt) with dt = 1/2, relative to dt = 1
        let ratio = polygon_amplitude(&pc, &two).norm() / polygon_amplitude(&pc, &one).norm();
        assert!((ratio - 2.0 / PI).abs() < 1e-14);
    }

    #[test]
    fn corner_weight_scales_amplitude() {
        let pc = unit();
        let mut p = PolygonalPath::new(vec![Vec2::zeros(), Vec2::new(1.0, 1.0), Vec2::new(2.0, 0.0)], vec![3]);
        p = allocate_times(&p, 1.0, 1.0).unwrap();
        let plain = polygon_amplitude(&pc, &p);
        let half = polygon_amplitude_weighted(&pc, &p, &|c| if c == 3 { 0.5 } else { 1.0 });
        assert!((half - plain * 0.5).norm() < 1e-15);
    }

    #[test]
    fn screen_bins_are_centred() {
        let s = Screen::new(Vec2::new(5.0, -1.0), Vec2::new(5.0, 1.0), 4).unwrap();
        assert_eq!(s.bin_center(0), Vec2::new(5.0, -0.75));
        assert!((s.coordinate(3) - 0.75).abs() < 1e-15);
        assert!(Screen::new(Vec2::zeros(), Vec2::x(), 1).is_err());
    }

    #[test]
    fn blocked_bins_are_shadowed() {
        let bbox = BoundingBox::new(Vec2::new(-10.0, -10.0), Vec2::new(10.0, 10.0));
        let cs = ConstraintSet::from_walls(vec![Wall::thin("w", Vec2::new(0.0, -20.0), Vec2::new(0.0, 0.0))], bbox);
        let screen = Screen::new(Vec2::new(5.0, -5.0), Vec2::new(5.0, 5.0), 10).unwrap();
        let pc = PhysicalConstants::new(1.0, 1.0, 10.0).unwrap();
        let prof = screen_intensity(&pc, &cs, &Vec2::new(-5.0, 0.5), &screen, 0, PathRule::Taut).unwrap();
        assert!(prof.shadow[0]);
        assert_eq!(prof.intensity[0], 0.0);
        assert!(!prof.shadow[9]);
        let peak = prof.intensity.iter().cloned().fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-15);
    }
}
