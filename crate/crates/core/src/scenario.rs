//! Plain-text scenario files: INI-like sections of `key = value` lines.
//!
//! ```text
//! [constants]
//! m = 1
//! hbar = 1
//! T = 136
//!
//! [walls]
//! bar = 0 -19.8 0 19.8        # x1 y1 x2 y2 [thickness]
//!
//! [source]
//! position = -50 0
//! velocity = 6.28 0
//!
//! [screen]
//! start = 800 -60
//! end = 800 60
//! bins = 121
//!
//! [run]
//! domain = -100 -200 900 200  # xmin ymin xmax ymax
//! max_corners = 1
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::dynamics::DynamicsConfig;
use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, ConstraintSet, Vec2, Wall};
use crate::oracle::OracleConfig;
use crate::paths::PathRule;
use crate::propagator::{PhysicalConstants, Screen};

pub const DEFAULT_MAX_CORNERS: usize = 2;
pub const DEFAULT_FAN_SIZE: usize = 64;
pub const DEFAULT_ORACLE_GRID: usize = 512;
pub const DEFAULT_ORACLE_SLICES: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub domain: BoundingBox,
    pub max_corners: usize,
    pub fan_size: usize,
    pub restitution: f64,
    pub path_rule: PathRule,
    /// Simulation horizon; the flight time `T` when absent.
    pub horizon: Option<f64>,
    pub max_branches: usize,
    pub max_events: usize,
    pub oracle_region: Option<BoundingBox>,
    pub oracle_grid: usize,
    pub oracle_slices: usize,
    pub out: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub constants: PhysicalConstants,
    pub walls: Vec<Wall>,
    pub source: Vec2,
    pub velocity: Vec2,
    pub screen: Screen,
    pub run: RunOptions,
}

impl Scenario {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        parse_scenario(&text)
    }

    pub fn constraint_set(&self) -> ConstraintSet {
        ConstraintSet::from_walls(self.walls.clone(), self.run.domain)
    }

    pub fn horizon(&self) -> f64 {
        self.run.horizon.unwrap_or(self.constants.t_total)
    }

    pub fn dynamics_config(&self) -> DynamicsConfig {
        DynamicsConfig {
            mass: self.constants.m,
            restitution: self.run.restitution,
            fan_size: self.run.fan_size,
            max_branches: self.run.max_branches,
            max_events: self.run.max_events,
            ..DynamicsConfig::default()
        }
    }

    pub fn oracle_config(&self) -> Result<OracleConfig> {
        let region = self
            .run
            .oracle_region
            .ok_or_else(|| Error::Validation("oracle runs need `oracle_box` in [run]".into()))?;
        Ok(OracleConfig::new(region, self.run.oracle_grid, self.run.oracle_slices))
    }

    /// Checks every invariant that does not depend on the text form.
    pub fn validate(&self) -> Result<()> {
        let v = |msg: String| Err(Error::Validation(msg));
        PhysicalConstants::new(self.constants.m, self.constants.hbar, self.constants.t_total)?;
        Screen::new(self.screen.start, self.screen.end, self.screen.n_bins)?;
        let d = &self.run.domain;
        if !(d.max.x > d.min.x && d.max.y > d.min.y) {
            return v("domain must have positive extent".into());
        }
        for (k, w) in self.walls.iter().enumerate() {
            if w.name.is_empty() || w.name.contains(char::is_whitespace) {
                return v(format!("wall name `{}` must be a single non-empty word", w.name));
            }
            if self.walls[..k].iter().any(|o| o.name == w.name) {
                return v(format!("duplicate wall name `{}`", w.name));
            }
            if !((w.b - w.a).norm() > 0.0) {
                return v(format!("wall `{}` has zero length", w.name));
            }
            if !(w.thickness >= 0.0 && w.thickness.is_finite()) {
                return v(format!("wall `{}` has negative thickness", w.name));
            }
        }
        if self.run.fan_size == 0 {
            return v("fan_size must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.run.restitution) {
            return v(format!("restitution must lie in [0, 1], got {}", self.run.restitution));
        }
        if self.run.max_branches == 0 || self.run.max_events == 0 {
            return v("max_branches and max_events must be positive".into());
        }
        if let Some(h) = self.run.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return v(format!("horizon must be positive, got {h}"));
            }
        }
        if self.run.oracle_grid < 3 || self.run.oracle_slices == 0 {
            return v("oracle_grid must be at least 3 and oracle_slices at least 1".into());
        }
        if let Some(r) = &self.run.oracle_region {
            if !(r.max.x > r.min.x && r.max.y > r.min.y) {
                return v("oracle_box must have positive extent".into());
            }
        }
        let cs = self.constraint_set();
        if !d.contains_strict(&self.source) {
            return v("source lies outside the domain".into());
        }
        if !cs.is_feasible(&self.source, 0.0) {
            return v("source is not a feasible point".into());
        }
        for (i, c) in self.screen.bin_centers().iter().enumerate() {
            if !cs.is_feasible(c, 0.0) {
                return v(format!("screen bin {i} centre is not a feasible point"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Constants,
    Walls,
    Source,
    Screen,
    Run,
}

fn numbers(line: usize, key: &str, value: &str, n: usize) -> Result<Vec<f64>> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != n {
        return Err(Error::Parse { line, message: format!("`{key}` expects {n} numbers, got {}", parts.len()) });
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Parse { line, message: format!("`{key}`: `{p}` is not a finite number") })
        })
        .collect()
}

fn number(line: usize, key: &str, value: &str) -> Result<f64> {
    Ok(numbers(line, key, value, 1)?[0])
}

fn integer(line: usize, key: &str, value: &str) -> Result<usize> {
    value
        .trim()
        .parse::<usize>()
        .map_err(|_| Error::Parse { line, message: format!("`{key}`: `{value}` is not a non-negative integer") })
}

fn point(line: usize, key: &str, value: &str) -> Result<Vec2> {
    let v = numbers(line, key, value, 2)?;
    Ok(Vec2::new(v[0], v[1]))
}

fn rect(line: usize, key: &str, value: &str) -> Result<BoundingBox> {
    let v = numbers(line, key, value, 4)?;
    Ok(BoundingBox::new(Vec2::new(v[0], v[1]), Vec2::new(v[2], v[3])))
}

/// Parses and validates a scenario, filling defaults.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut section: Option<Section> = None;
    let mut seen = Vec::new();
    let (mut m, mut hbar, mut t_total) = (1.0, 1.0, None);
    let mut walls = Vec::new();
    let (mut source, mut velocity) = (None, None);
    let (mut start, mut end, mut bins) = (None, None, None);
    let mut domain = None;
    let mut max_corners = DEFAULT_MAX_CORNERS;
    let mut fan_size = DEFAULT_FAN_SIZE;
    let mut restitution = 0.0;
    let mut path_rule = PathRule::default();
    let mut horizon = None;
    let defaults = DynamicsConfig::default();
    let (mut max_branches, mut max_events) = (defaults.max_branches, defaults.max_events);
    let mut oracle_region = None;
    let (mut oracle_grid, mut oracle_slices) = (DEFAULT_ORACLE_GRID, DEFAULT_ORACLE_SLICES);
    let mut out = None;

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let s = match name.trim() {
                "constants" => Section::Constants,
                "walls" => Section::Walls,
                "source" => Section::Source,
                "screen" => Section::Screen,
                "run" => Section::Run,
                other => return Err(Error::Parse { line, message: format!("unknown section [{other}]") }),
            };
            if seen.contains(&s) {
                return Err(Error::Parse { line, message: format!("section [{}] appears twice", name.trim()) });
            }
            seen.push(s);
            section = Some(s);
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(a, b)| (a.trim(), b.trim()))
            .ok_or_else(|| Error::Parse { line, message: format!("expected `key = value`, got `{content}`") })?;
        let unknown = || Error::Parse { line, message: format!("unknown key `{key}`") };
        match section {
            None => return Err(Error::Parse { line, message: "key outside of any section".into() }),
            Some(Section::Constants) => match key {
                "m" => m = number(line, key, value)?,
                "hbar" => hbar = number(line, key, value)?,
                "T" => t_total = Some(number(line, key, value)?),
                _ => return Err(unknown()),
            },
            Some(Section::Walls) => {
                let n = value.split_whitespace().count();
                if n != 4 && n != 5 {
                    return Err(Error::Parse {
                        line,
                        message: format!("wall `{key}` expects `x1 y1 x2 y2 [thickness]`, got {n} numbers"),
                    });
                }
                let v = numbers(line, key, value, n)?;
                let thickness = if n == 5 { v[4] } else { 0.0 };
                walls.push(Wall::new(key, Vec2::new(v[0], v[1]), Vec2::new(v[2], v[3]), thickness));
            }
            Some(Section::Source) => match key {
                "position" => source = Some(point(line, key, value)?),
                "velocity" => velocity = Some(point(line, key, value)?),
                _ => return Err(unknown()),
            },
            Some(Section::Screen) => match key {
                "start" => start = Some(point(line, key, value)?),
                "end" => end = Some(point(line, key, value)?),
                "bins" => bins = Some(integer(line, key, value)?),
                _ => return Err(unknown()),
            },
            Some(Section::Run) => match key {
                "domain" => domain = Some(rect(line, key, value)?),
                "max_corners" => max_corners = integer(line, key, value)?,
                "fan_size" => fan_size = integer(line, key, value)?,
                "restitution" => restitution = number(line, key, value)?,
                "path_rule" => {
                    path_rule = PathRule::parse(value)
                        .ok_or_else(|| Error::Parse { line, message: format!("unknown path_rule `{value}`") })?
                }
                "horizon" => horizon = Some(number(line, key, value)?),
                "max_branches" => max_branches = integer(line, key, value)?,
                "max_events" => max_events = integer(line, key, value)?,
                "oracle_box" => oracle_region = Some(rect(line, key, value)?),
                "oracle_grid" => oracle_grid = integer(line, key, value)?,
                "oracle_slices" => oracle_slices = integer(line, key, value)?,
                "out" => out = Some(value.to_string()),
                _ => return Err(unknown()),
            },
        }
    }

    let missing = |what: &str| Error::Validation(format!("missing {what}"));
    let t_total = t_total.ok_or_else(|| missing("`T` in [constants]"))?;
    if !seen.contains(&Section::Source) {
        return Err(missing("[source] section"));
    }
    if !seen.contains(&Section::Screen) {
        return Err(missing("[screen] section"));
    }
    let source = source.ok_or_else(|| missing("`position` in [source]"))?;
    let start = start.ok_or_else(|| missing("`start` in [screen]"))?;
    let end = end.ok_or_else(|| missing("`end` in [screen]"))?;
    let bins = bins.ok_or_else(|| missing("`bins` in [screen]"))?;
    let constants = PhysicalConstants::new(m, hbar, t_total)?;
    let screen = Screen::new(start, end, bins)?;
    let domain = domain.ok_or_else(|| missing("`domain` in [run]"))?;
    let centre = 0.5 * (start + end);
    let velocity = velocity.unwrap_or((centre - source) / t_total);
    let scenario = Scenario {
        constants,
        walls,
        source,
        velocity,
        screen,
        run: RunOptions {
            domain,
            max_corners,
            fan_size,
            restitution,
            path_rule,
            horizon,
            max_branches,
            max_events,
            oracle_region,
            oracle_grid,
            oracle_slices,
            out,
        },
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Writes a scenario in the text format; `parse_scenario` inverts it.
pub fn emit_scenario(s: &Scenario) -> String {
    let mut o = String::new();
    let r = &s.run;
    let pt = |p: &Vec2| format!("{} {}", p.x, p.y);
    let bx = |b: &BoundingBox| format!("{} {} {} {}", b.min.x, b.min.y, b.max.x, b.max.y);
    let _ = writeln!(o, "[constants]\nm = {}\nhbar = {}\nT = {}\n", s.constants.m, s.constants.hbar, s.constants.t_total);
    let _ = writeln!(o, "[walls]");
    for w in &s.walls {
        let _ = writeln!(o, "{} = {} {} {}", w.name, pt(&w.a), pt(&w.b), w.thickness);
    }
    let _ = writeln!(o, "\n[source]\nposition = {}\nvelocity = {}\n", pt(&s.source), pt(&s.velocity));
    let _ = writeln!(o, "[screen]\nstart = {}\nend = {}\nbins = {}\n", pt(&s.screen.start), pt(&s.screen.end), s.screen.n_bins);
    let _ = writeln!(o, "[run]\ndomain = {}", bx(&r.domain));
    let _ = writeln!(o, "max_corners = {}\nfan_size = {}\nrestitution = {}", r.max_corners, r.fan_size, r.restitution);
    let _ = writeln!(o, "path_rule = {}", r.path_rule.as_str());
    if let Some(h) = r.horizon {
        let _ = writeln!(o, "horizon = {h}");
    }
    let _ = writeln!(o, "max_branches = {}\nmax_events = {}", r.max_branches, r.max_events);
    if let Some(b) = &r.oracle_region {
        let _ = writeln!(o, "oracle_box = {}", bx(b));
    }
    let _ = writeln!(o, "oracle_grid = {}\noracle_slices = {}", r.oracle_grid, r.oracle_slices);
    if let Some(out) = &r.out {
        let _ = writeln!(o, "out = {out}");
    }
    o
}
