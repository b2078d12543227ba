//! Subcommand orchestration: runs the modules a scenario asks for and writes
//! their artifacts into an output directory.

use std::path::{Path, PathBuf};

use crate::dynamics::{simulate, ParticleState, SimulationResult};
use crate::error::{Error, Result};
use crate::oracle::{central_fringe_window, compare_profiles_in, oracle_intensity, reference_path, OracleRun, SimilarityReport};
use crate::output;
use crate::paths::{allocate_times, enumerate_paths, PolygonalPath};
use crate::propagator::{screen_intensity, IntensityProfile, Screen};
use crate::scenario::Scenario;

/// Fringe maxima, the central one included, covered by the comparison
/// window.
pub const COMPARISON_FRINGES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Simulate,
    Paths,
    Intensity,
    Oracle,
    Compare,
    All,
}

impl Subcommand {
    pub const ALL: [Subcommand; 6] = [
        Subcommand::Simulate,
        Subcommand::Paths,
        Subcommand::Intensity,
        Subcommand::Oracle,
        Subcommand::Compare,
        Subcommand::All,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Subcommand::Simulate => "simulate",
            Subcommand::Paths => "paths",
            Subcommand::Intensity => "intensity",
            Subcommand::Oracle => "oracle",
            Subcommand::Compare => "compare",
            Subcommand::All => "all",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

/// Command-line overrides of scenario options.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub bins: Option<usize>,
    pub max_corners: Option<usize>,
    pub fan_size: Option<usize>,
    pub oracle_grid: Option<usize>,
    pub oracle_slices: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, scenario: &Scenario) -> Result<Scenario> {
        let mut s = scenario.clone();
        if let Some(b) = self.bins {
            s.screen = Screen::new(s.screen.start, s.screen.end, b)?;
        }
        if let Some(k) = self.max_corners {
            s.run.max_corners = k;
        }
        if let Some(f) = self.fan_size {
            s.run.fan_size = f;
        }
        if let Some(g) = self.oracle_grid {
            s.run.oracle_grid = g;
        }
        if let Some(k) = self.oracle_slices {
            s.run.oracle_slices = k;
        }
        s.validate()?;
        Ok(s)
    }
}

/// Files written and one-line summaries of what was computed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

impl Artifacts {
    fn write(&mut self, dir: &Path, name: &str, contents: &str) -> Result<()> {
        output::write_file(dir, name, contents).map_err(|e| Error::Io(format!("{}: {e}", dir.join(name).display())))?;
        self.files.push(dir.join(name));
        Ok(())
    }
}

pub fn run_simulation(s: &Scenario) -> Result<SimulationResult> {
    let cs = s.constraint_set();
    let s0 = ParticleState::new(s.source, s.velocity, 0.0);
    simulate(&cs, &s0, s.horizon(), &s.dynamics_config())
}

/// Timed polygons to every screen bin; bins without paths are omitted.
pub fn screen_paths(s: &Scenario) -> Result<Vec<(usize, Vec<PolygonalPath>)>> {
    let cs = s.constraint_set();
    let mut rows = Vec::new();
    for (i, dst) in s.screen.bin_centers().iter().enumerate() {
        match enumerate_paths(&cs, &s.source, dst, s.run.max_corners, s.run.path_rule) {
            Ok(paths) => {
                let timed = paths
                    .iter()
                    .map(|p| allocate_times(p, s.constants.t_total, s.constants.m))
                    .collect::<Result<Vec<_>>>()?;
                rows.push((i, timed));
            }
            Err(Error::NoPath) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(rows)
}

pub fn polygon_profile(s: &Scenario) -> Result<IntensityProfile> {
    screen_intensity(&s.constants, &s.constraint_set(), &s.source, &s.screen, s.run.max_corners, s.run.path_rule)
}

pub fn oracle_profile(s: &Scenario) -> Result<OracleRun> {
    let cs = s.constraint_set();
    let reference = reference_path(&s.constants, &cs, &s.source, &s.screen, s.run.max_corners, s.run.path_rule)?;
    oracle_intensity(&s.constants, &cs, &s.source, &s.screen, &reference, &s.oracle_config()?)
}

/// Compares polygon and lattice profiles over the central fringes of the
/// polygon profile.
pub fn compare(polygon: &IntensityProfile, lattice: &IntensityProfile) -> Result<SimilarityReport> {
    compare_profiles_in(polygon, lattice, central_fringe_window(polygon, COMPARISON_FRINGES))
}

/// Runs `sub` on a scenario and writes its artifacts into `out`.
pub fn run(sub: Subcommand, s: &Scenario, out: &Path) -> Result<Artifacts> {
    let mut a = Artifacts::default();
    let wants = |c: Subcommand| sub == c || sub == Subcommand::All;

    if wants(Subcommand::Simulate) {
        let res = run_simulation(s)?;
        a.write(out, "trajectories.csv", &output::trajectories_csv(&res))?;
        a.write(out, "trajectories.svg", &output::trajectories_svg("trajectories", &s.constraint_set(), &res))?;
        a.summary.push(format!(
            "simulate: {} trajectories, {} failed branches{}",
            res.trajectories.len(),
            res.failures.len(),
            if res.truncated { ", branch budget exhausted" } else { "" }
        ));
    }
    if wants(Subcommand::Paths) {
        let rows = screen_paths(s)?;
        let n: usize = rows.iter().map(|r| r.1.len()).sum();
        a.write(out, "paths.csv", &output::paths_csv(&rows))?;
        a.summary.push(format!("paths: {n} polygons to {} of {} bins", rows.len(), s.screen.n_bins));
    }
    let mut polygon = None;
    if wants(Subcommand::Intensity) || wants(Subcommand::Compare) {
        let p = polygon_profile(s)?;
        a.write(out, "intensity.csv", &output::intensity_csv(&p))?;
        a.write(out, "intensity.svg", &output::profile_svg("polygon superposition", &[("polygon", &p)]))?;
        let shadow = p.shadow.iter().filter(|x| **x).count();
        a.summary.push(format!("intensity: {} bins, {shadow} in shadow", p.len()));
        polygon = Some(p);
    }
    let mut lattice = None;
    if wants(Subcommand::Oracle) || wants(Subcommand::Compare) {
        let r = oracle_profile(s)?;
        a.write(out, "oracle_intensity.csv", &output::intensity_csv(&r.profile))?;
        a.write(out, "oracle_intensity.svg", &output::profile_svg("lattice path integral", &[("lattice", &r.profile)]))?;
        a.summary.push(format!("oracle: {}x{} nodes, h = {}", r.nx, r.ny, r.h));
        for w in &r.warnings {
            a.summary.push(format!("oracle warning: {w}"));
        }
        lattice = Some(r);
    }
    if wants(Subcommand::Compare) {
        let (p, r) = (polygon.as_ref().unwrap(), lattice.as_ref().unwrap());
        let rep = compare(p, &r.profile)?;
        a.write(out, "comparison.txt", &output::comparison_report(&rep, Some(r)))?;
        a.write(
            out,
            "comparison.svg",
            &output::profile_svg("polygon vs lattice", &[("polygon", p), ("lattice", &r.profile)]),
        )?;
        a.summary.push(format!(
            "compare: correlation {:.4}, max abs deviation {:.4}",
            rep.correlation, rep.max_abs_deviation
        ));
    }
    Ok(a)
}
