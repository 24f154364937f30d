//! Run configuration: flat `key = value` files with `#` comments, merged
//! with command-line overrides and validated into a [`RunConfig`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use discrete_routh::systems::DspParams;
use nalgebra::DVector;

use crate::error::{CliError, CliResult};

const KEYS: &[&str] = &[
    "system", "j2", "m1", "m2", "l1", "l2", "g", "method", "order", "h", "steps", "mu", "q", "qdot", "x", "xdot", "out",
    "emit",
];
const IC_KEYS: &[&str] = &["q", "qdot", "x", "xdot", "mu"];
const DSP_KEYS: &[&str] = &["m1", "m2", "l1", "l2", "g"];

/// Relative tolerance between a configured `mu` and the momentum of a full
/// initial condition.
pub const MU_MATCH_TOL: f64 = 1e-9;

pub const DEFAULT_J2: f64 = 0.05;
pub const DEFAULT_SATELLITE_H: f64 = 0.3;
pub const DEFAULT_DSP_H: f64 = 0.01;
pub const DEFAULT_STEPS: usize = 1000;
pub const DEFAULT_INCLINATION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Satellite,
    Dsp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Del,
    Sprk,
    Dr,
    Rsprk,
    Rk4,
}

impl Method {
    pub fn is_reduced(self) -> bool {
        matches!(self, Method::Dr | Method::Rsprk)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Emit {
    Trajectory,
    Energy,
    Momentum,
    Reconstruction,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Full { q: DVector<f64>, qdot: DVector<f64> },
    Reduced { x: DVector<f64>, xdot: DVector<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemKind,
    pub j2: f64,
    pub dsp: DspParams,
    pub method: Method,
    pub order: u32,
    pub h: f64,
    pub steps: usize,
    pub mu: Option<f64>,
    pub ic: InitialCondition,
    pub out: PathBuf,
    pub emit: BTreeSet<Emit>,
}

impl RunConfig {
    pub fn final_time(&self) -> f64 {
        self.h * self.steps as f64
    }
}

macro_rules! keyword_enum {
    ($ty:ty, $what:literal, { $($name:literal => $variant:expr),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = CliError;
            fn from_str(s: &str) -> CliResult<Self> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(CliError::config(format!(
                        concat!("unknown ", $what, " '{}' (expected one of: {})"),
                        other,
                        [$($name),+].join(", ")
                    ))),
                }
            }
        }
    };
}

keyword_enum!(SystemKind, "system", { "satellite" => SystemKind::Satellite, "dsp" => SystemKind::Dsp });
keyword_enum!(Method, "method", {
    "del" => Method::Del,
    "sprk" => Method::Sprk,
    "dr" => Method::Dr,
    "rsprk" => Method::Rsprk,
    "rk4" => Method::Rk4,
});
keyword_enum!(Emit, "emit target", {
    "trajectory" => Emit::Trajectory,
    "energy" => Emit::Energy,
    "momentum" => Emit::Momentum,
    "reconstruction" => Emit::Reconstruction,
});

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Method::Del => "del",
            Method::Sprk => "sprk",
            Method::Dr => "dr",
            Method::Rsprk => "rsprk",
            Method::Rk4 => "rk4",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    origin: String,
}

/// Raw settings gathered from files and flags, later entries overriding
/// earlier ones.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    entries: BTreeMap<String, Entry>,
}

impl Settings {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let mut settings = Self::default();
        settings.merge_file(path, KEYS)?;
        Ok(settings)
    }

    /// Merge an initial-condition file; only `q`, `qdot`, `x`, `xdot` and
    /// `mu` may appear in it.
    pub fn merge_ic_file(&mut self, path: &Path) -> CliResult<()> {
        self.merge_file(path, IC_KEYS)
    }

    fn merge_file(&mut self, path: &Path, allowed: &[&str]) -> CliResult<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let parsed = parse_text(&text, &path.display().to_string(), allowed)?;
        self.entries.extend(parsed.entries);
        Ok(())
    }

    #[cfg(test)]
    pub fn parse(text: &str, origin: &str) -> CliResult<Self> {
        parse_text(text, origin, KEYS)
    }

    /// Command-line override.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        debug_assert!(KEYS.contains(&key));
        self.entries.insert(key.to_string(), Entry { value: value.into(), origin: format!("--{key}") });
    }

    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn number(&self, key: &str) -> CliResult<Option<f64>> {
        self.get(key).map(|e| parse_number(key, e)).transpose()
    }

    fn vector(&self, key: &str) -> CliResult<Option<DVector<f64>>> {
        let Some(entry) = self.get(key) else { return Ok(None) };
        let values = entry
            .value
            .split(',')
            .map(|part| parse_number(key, &Entry { value: part.trim().to_string(), origin: entry.origin.clone() }))
            .collect::<CliResult<Vec<f64>>>()?;
        Ok(Some(DVector::from_vec(values)))
    }

    pub fn to_config(&self) -> CliResult<RunConfig> {
        let system = match self.get("system") {
            Some(e) => e.value.parse()?,
            None => SystemKind::Satellite,
        };
        let j2 = self.number("j2")?;
        let mut dsp = DspParams::default();
        match system {
            SystemKind::Satellite => {
                if let Some(key) = DSP_KEYS.iter().find(|k| self.get(k).is_some()) {
                    return Err(CliError::config(format!("'{key}' is a pendulum parameter; system is satellite")));
                }
            }
            SystemKind::Dsp => {
                if j2.is_some() {
                    return Err(CliError::config("'j2' is a satellite parameter; system is dsp"));
                }
                for (key, slot) in [
                    ("m1", &mut dsp.m1),
                    ("m2", &mut dsp.m2),
                    ("l1", &mut dsp.l1),
                    ("l2", &mut dsp.l2),
                    ("g", &mut dsp.g),
                ] {
                    if let Some(v) = self.number(key)? {
                        *slot = v;
                    }
                }
                dsp.validate().map_err(|e| CliError::config(e.to_string()))?;
            }
        }
        let j2 = j2.unwrap_or(DEFAULT_J2);
        if !(j2.is_finite() && j2 >= 0.0) {
            return Err(CliError::config(format!("j2 must be finite and non-negative, got {j2}")));
        }

        let method = match self.get("method") {
            Some(e) => e.value.parse()?,
            None => Method::Rsprk,
        };
        let order = match self.get("order") {
            Some(e) => e.value.trim().parse::<u32>().map_err(|_| bad_value("order", e))?,
            None => match method {
                Method::Del | Method::Dr => 2,
                _ => 4,
            },
        };
        match (method, order) {
            (Method::Del | Method::Dr, 2) | (Method::Sprk | Method::Rsprk, 2 | 4) | (Method::Rk4, 4) => {}
            (Method::Del | Method::Dr, _) => {
                return Err(CliError::config(format!("method {method} uses the midpoint rule and has order 2, not {order}")))
            }
            (Method::Rk4, _) => return Err(CliError::config(format!("method rk4 has order 4, not {order}"))),
            _ => return Err(CliError::config(format!("order must be 2 or 4, got {order}"))),
        }

        let h = self.number("h")?.unwrap_or(match system {
            SystemKind::Satellite => DEFAULT_SATELLITE_H,
            SystemKind::Dsp => DEFAULT_DSP_H,
        });
        if !(h.is_finite() && h > 0.0) {
            return Err(CliError::config(format!("h must be positive and finite, got {h}")));
        }
        let steps = match self.get("steps") {
            Some(e) => e.value.trim().parse::<usize>().map_err(|_| bad_value("steps", e))?,
            None => DEFAULT_STEPS,
        };
        if steps == 0 {
            return Err(CliError::config("steps must be at least 1"));
        }
        let mu = self.number("mu")?;
        if mu.is_some_and(|m| !m.is_finite()) {
            return Err(CliError::config("mu must be finite"));
        }

        let (n, d) = match system {
            SystemKind::Satellite => (3, 2),
            SystemKind::Dsp => (4, 3),
        };
        let ic = match (self.vector("q")?, self.vector("qdot")?, self.vector("x")?, self.vector("xdot")?) {
            (Some(q), Some(qdot), None, None) => {
                check_len("q", &q, n)?;
                check_len("qdot", &qdot, n)?;
                InitialCondition::Full { q, qdot }
            }
            (None, None, Some(x), Some(xdot)) => {
                check_len("x", &x, d)?;
                check_len("xdot", &xdot, d)?;
                if mu.is_none() {
                    return Err(CliError::config("a reduced initial condition (x, xdot) needs mu"));
                }
                InitialCondition::Reduced { x, xdot }
            }
            (None, None, None, None) => default_initial_condition(system),
            _ => {
                return Err(CliError::config(
                    "give the initial condition either as q and qdot or as x and xdot (with mu)",
                ))
            }
        };

        let out = PathBuf::from(self.get("out").map_or(".", |e| e.value.as_str()));
        let mut emit = BTreeSet::new();
        match self.get("emit") {
            Some(e) => {
                for part in e.value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                    emit.insert(part.parse::<Emit>()?);
                }
                if emit.is_empty() {
                    return Err(CliError::config("emit must name at least one output"));
                }
            }
            None => {
                emit.insert(Emit::Trajectory);
            }
        }
        if emit.contains(&Emit::Reconstruction) && !method.is_reduced() {
            return Err(CliError::config(format!("reconstruction output needs method dr or rsprk, not {method}")));
        }

        Ok(RunConfig { system, j2, dsp, method, order, h, steps, mu, ic, out, emit })
    }
}

/// The inclined unit circular orbit for the satellite; a rotating,
/// slightly swinging motion for the pendulum.
pub fn default_initial_condition(system: SystemKind) -> InitialCondition {
    match system {
        SystemKind::Satellite => InitialCondition::Full {
            q: DVector::from_vec(vec![1.0, 0.0, 0.0]),
            qdot: DVector::from_vec(vec![0.0, DEFAULT_INCLINATION.cos(), DEFAULT_INCLINATION.sin()]),
        },
        SystemKind::Dsp => InitialCondition::Full {
            q: DVector::from_vec(vec![0.6, 0.0, 0.5, 0.4]),
            qdot: DVector::from_vec(vec![0.1, 2.0, -0.1, 2.5]),
        },
    }
}

fn parse_text(text: &str, origin: &str, allowed: &[&str]) -> CliResult<Settings> {
    let mut settings = Settings::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = format!("{origin}:{}", lineno + 1);
        let (key, value) = line.split_once('=').ok_or_else(|| CliError::config(format!("{at}: expected 'key = value'")))?;
        let (key, value) = (key.trim(), value.trim());
        if !allowed.contains(&key) {
            return Err(CliError::config(format!("{at}: unknown key '{key}'")));
        }
        if value.is_empty() {
            return Err(CliError::config(format!("{at}: empty value for '{key}'")));
        }
        if settings.entries.contains_key(key) {
            return Err(CliError::config(format!("{at}: duplicate key '{key}'")));
        }
        settings.entries.insert(key.to_string(), Entry { value: value.to_string(), origin: at });
    }
    Ok(settings)
}

fn parse_number(key: &str, entry: &Entry) -> CliResult<f64> {
    entry.value.trim().parse::<f64>().map_err(|_| bad_value(key, entry))
}

fn bad_value(key: &str, entry: &Entry) -> CliError {
    CliError::config(format!("{}: invalid value '{}' for '{key}'", entry.origin, entry.value))
}

fn check_len(key: &str, v: &DVector<f64>, expected: usize) -> CliResult<()> {
    if v.len() != expected {
        return Err(CliError::config(format!("'{key}' needs {expected} components, got {}", v.len())));
    }
    if v.iter().any(|c| !c.is_finite()) {
        return Err(CliError::config(format!("'{key}' has a non-finite component")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> CliResult<RunConfig> {
        Settings::parse(text, "test")?.to_config()
    }

    #[test]
    fn defaults() {
        let cfg = config("").unwrap();
        assert_eq!(cfg.system, SystemKind::Satellite);
        assert_eq!(cfg.method, Method::Rsprk);
        assert_eq!((cfg.order, cfg.h, cfg.steps, cfg.j2), (4, 0.3, 1000, 0.05));
        assert_eq!(cfg.emit, BTreeSet::from([Emit::Trajectory]));
        assert!(matches!(cfg.ic, InitialCondition::Full { .. }));
    }

    #[test]
    fn comments_and_vectors() {
        let cfg = config(
            "# pendulum\nsystem = dsp   # the double spherical pendulum\nmethod=dr\nx = 0.5, 0.6,0.1\nxdot = 0,0,0\nmu = 1.5\nemit = trajectory, energy\n",
        )
        .unwrap();
        assert_eq!(cfg.system, SystemKind::Dsp);
        assert_eq!(cfg.order, 2);
        assert_eq!(cfg.h, DEFAULT_DSP_H);
        assert_eq!(cfg.mu, Some(1.5));
        assert_eq!(cfg.ic, InitialCondition::Reduced { x: DVector::from_vec(vec![0.5, 0.6, 0.1]), xdot: DVector::zeros(3) });
        assert_eq!(cfg.emit, BTreeSet::from([Emit::Trajectory, Emit::Energy]));
    }

    #[test]
    fn overrides_win() {
        let mut s = Settings::parse("h = 0.1\nsteps = 10\n", "test").unwrap();
        s.set("h", "0.05");
        let cfg = s.to_config().unwrap();
        assert_eq!((cfg.h, cfg.steps), (0.05, 10));
    }

    #[test]
    fn rejected_configs() {
        for bad in [
            "steps = 0",
            "h = -0.1",
            "h = nan",
            "order = 3",
            "method = del\norder = 4",
            "method = rk4\norder = 2",
            "method = leapfrog",
            "system = moon",
            "colour = red",
            "h = 0.1\nh = 0.2",
            "just a line",
            "x = 1, 0\nxdot = 0, 0",
            "q = 1, 0\nqdot = 0, 1",
            "q = 1, 0, 0",
            "system = dsp\nj2 = 0.1",
            "m1 = 2",
            "system = dsp\nl1 = -1",
            "emit = reconstruction\nmethod = sprk",
            "emit = pictures",
            "j2 = -0.5",
        ] {
            let err = config(bad).expect_err(bad);
            assert_eq!(err.exit_code(), 2, "{bad}");
        }
    }

    #[test]
    fn error_messages_carry_line_numbers() {
        let err = config("h = 0.1\n\nsteps = many\n").unwrap_err();
        assert!(err.to_string().contains("test:3"), "{err}");
    }
}
