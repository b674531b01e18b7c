use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use entlab_core::bounds::BoundName;
use entlab_core::deconv::Strategy;
use entlab_core::{DistSpec, Potential};
use serde::Deserialize;

use crate::verify::Suite;

/// A configuration problem; always maps to the usage exit code.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    CCurve,
    Bounds,
    Verify,
    Concentration,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::CCurve => "c-curve",
            CommandKind::Bounds => "bounds",
            CommandKind::Verify => "verify",
            CommandKind::Concentration => "concentration",
        }
    }
}

impl FromStr for CommandKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        [CommandKind::CCurve, CommandKind::Bounds, CommandKind::Verify, CommandKind::Concentration]
            .into_iter()
            .find(|c| c.name() == s)
            .map_or_else(|| err(format!("unknown command '{s}'")), Ok)
    }
}

/// Budgets either as `min:max:steps` (inclusive) or as an explicit list.
#[derive(Debug, Clone, PartialEq)]
pub enum RGrid {
    Range { min: f64, max: f64, steps: usize },
    List(Vec<f64>),
}

impl RGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            RGrid::List(v) => v.clone(),
            RGrid::Range { min, steps: 1, .. } => vec![*min],
            RGrid::Range { min, max, steps } => {
                let h = (max - min) / (*steps as f64 - 1.0);
                (0..*steps).map(|k| if k + 1 == *steps { *max } else { min + h * k as f64 }).collect()
            }
        }
    }
}

impl fmt::Display for RGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RGrid::Range { min, max, steps } => write!(f, "{min}:{max}:{steps}"),
            RGrid::List(v) => {
                let s: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                f.write_str(&s.join(","))
            }
        }
    }
}

fn number(what: &str, s: &str) -> Result<f64, ConfigError> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => err(format!("{what}: '{s}' is not a finite number")),
    }
}

impl FromStr for RGrid {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        let grid = if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            if parts.len() != 3 {
                return err(format!("R grid '{s}': expected min:max:steps"));
            }
            let (min, max) = (number("R grid", parts[0])?, number("R grid", parts[1])?);
            let steps: usize = parts[2].trim().parse().map_err(|_| ConfigError(format!("R grid '{s}': bad step count")))?;
            if steps == 0 || max < min || (steps == 1 && max != min) {
                return err(format!("R grid '{s}': need max >= min and steps >= 1 (steps = 1 only when min = max)"));
            }
            RGrid::Range { min, max, steps }
        } else {
            let v = s.split(',').map(|x| number("R grid", x)).collect::<Result<Vec<_>, _>>()?;
            if v.windows(2).any(|w| w[1] < w[0]) {
                return err(format!("R grid '{s}': values must be ascending"));
            }
            RGrid::List(v)
        };
        if grid.values().iter().any(|r| *r < 0.0) {
            return err(format!("R grid '{s}': budgets must be nonnegative"));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

impl FromStr for Format {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => err(format!("unknown format '{s}' (csv or json)")),
        }
    }
}

/// Named tolerances with their defaults.
pub const DEFAULT_TOLERANCES: [(&str, f64); 13] = [
    ("cauchy_c", 1e-2),
    ("consistency", 2e-3),
    ("entropy", 1e-3),
    ("epi", 1e-3),
    ("epsilon", 1e-4),
    ("gaussian_c", 1e-3),
    ("marginal", 1e-6),
    ("mi", 1e-4),
    ("monotone", 1e-4),
    ("oracle_w2", 5e-3),
    ("ordering", 1e-6),
    ("recovery", 1e-3),
    ("scenario", 5e-3),
];

/// Overrides on top of [`DEFAULT_TOLERANCES`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tolerances {
    overrides: BTreeMap<String, f64>,
}

impl Tolerances {
    pub fn get(&self, name: &str) -> f64 {
        if let Some(v) = self.overrides.get(name) {
            return *v;
        }
        DEFAULT_TOLERANCES
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .unwrap_or_else(|| panic!("no tolerance named {name}"))
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<(), ConfigError> {
        if !DEFAULT_TOLERANCES.iter().any(|(k, _)| *k == name) {
            let known: Vec<&str> = DEFAULT_TOLERANCES.iter().map(|(k, _)| *k).collect();
            return err(format!("unknown tolerance '{name}' (known: {})", known.join(", ")));
        }
        if value.is_nan() || value < 0.0 || value.is_infinite() {
            return err(format!("tolerance {name} must be finite and >= 0"));
        }
        self.overrides.insert(name.to_string(), value);
        Ok(())
    }

    /// Parses `name=value`.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair.split_once('=').ok_or_else(|| ConfigError(format!("tolerance '{pair}': expected name=value")))?;
        self.set(k.trim(), number(k, v)?)
    }

    pub fn overrides(&self) -> &BTreeMap<String, f64> {
        &self.overrides
    }
}

/// Everything a run depends on. Its canonical string is written into every
/// output table and parses back to the same config.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    /// Law for `c-curve`.
    pub dist: Option<String>,
    /// Reference potential for `bounds` and `concentration`.
    pub pot: Option<String>,
    /// Second law for `bounds`.
    pub py: Option<String>,
    pub r: Option<RGrid>,
    pub grid_points: Option<usize>,
    pub strategy: Option<Strategy>,
    pub which: Vec<BoundName>,
    pub only: Vec<Suite>,
    /// Half-line `(-inf, a]` for `concentration`.
    pub a: Option<f64>,
    pub c: Option<f64>,
    pub samples: Option<usize>,
    pub tolerances: Tolerances,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(command: CommandKind) -> Self {
        Self {
            command,
            dist: None,
            pot: None,
            py: None,
            r: None,
            grid_points: None,
            strategy: None,
            which: Vec::new(),
            only: Vec::new(),
            a: None,
            c: None,
            samples: None,
            tolerances: Tolerances::default(),
            format: Format::Csv,
            output: None,
            seed: 0,
        }
    }

    /// Stores a law in canonical form after checking it parses.
    pub fn set_dist(slot: &mut Option<String>, s: &str) -> Result<(), ConfigError> {
        let spec: DistSpec = s.parse().map_err(|e| ConfigError(format!("{e}")))?;
        *slot = Some(spec.to_string());
        Ok(())
    }

    pub fn set_pot(&mut self, s: &str) -> Result<(), ConfigError> {
        let p: Potential = s.parse().map_err(|e| ConfigError(format!("{e}")))?;
        self.pot = Some(p.to_string());
        Ok(())
    }

    pub fn set_which(&mut self, s: &str) -> Result<(), ConfigError> {
        let mut v = Vec::new();
        for item in s.split(',').filter(|x| !x.trim().is_empty()) {
            let b: BoundName = item.parse().map_err(|e| ConfigError(format!("{e}")))?;
            if b == BoundName::Concentration {
                return err("'concentration' is a separate command, not a transport bound");
            }
            if !v.contains(&b) {
                v.push(b);
            }
        }
        self.which = v;
        Ok(())
    }

    pub fn set_only(&mut self, s: &str) -> Result<(), ConfigError> {
        let mut v = Vec::new();
        for item in s.split(',').filter(|x| !x.trim().is_empty()) {
            let suite: Suite = item.trim().parse()?;
            if !v.contains(&suite) {
                v.push(suite);
            }
        }
        self.only = v;
        Ok(())
    }

    /// Checks that the fields the command needs are present.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let need = |ok: bool, what: &str| if ok { Ok(()) } else { err(format!("{} needs {what}", self.command.name())) };
        match self.command {
            CommandKind::CCurve => need(self.dist.is_some(), "--dist")?,
            CommandKind::Bounds => {
                need(self.pot.is_some(), "--pot")?;
                need(self.py.is_some(), "--py")?;
                need(self.r.is_some(), "--r")?;
            }
            CommandKind::Concentration => need(self.pot.is_some(), "--pot")?,
            CommandKind::Verify => {}
        }
        if let Some(n) = self.grid_points {
            if n < 16 {
                return err("grid must have at least 16 points");
            }
        }
        if let Some(c) = self.c {
            if !(c > 0.0 && c <= 1.0) {
                return err("C must lie in (0, 1]");
            }
        }
        if self.samples == Some(0) {
            return err("samples must be positive");
        }
        Ok(())
    }

    /// Space-separated `key=value` pairs in a fixed order.
    pub fn canonical(&self) -> String {
        let mut parts = vec![format!("command={}", self.command.name())];
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                parts.push(format!("{k}={v}"));
            }
        };
        push("dist", self.dist.clone());
        push("pot", self.pot.clone());
        push("py", self.py.clone());
        push("r", self.r.as_ref().map(|r| r.to_string()));
        push("grid", self.grid_points.map(|n| n.to_string()));
        push("strategy", self.strategy.map(|s| s.to_string()));
        let join = |v: Vec<String>| if v.is_empty() { None } else { Some(v.join(",")) };
        push("which", join(self.which.iter().map(|b| b.key().to_string()).collect()));
        push("only", join(self.only.iter().map(|s| s.to_string()).collect()));
        push("a", self.a.map(|v| v.to_string()));
        push("c", self.c.map(|v| v.to_string()));
        push("samples", self.samples.map(|v| v.to_string()));
        for (k, v) in self.tolerances.overrides() {
            push(&format!("tol.{k}"), Some(v.to_string()));
        }
        push("format", Some(self.format.to_string()));
        push("output", self.output.as_ref().map(|p| p.display().to_string()));
        push("seed", Some(self.seed.to_string()));
        parts.join(" ")
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl FromStr for RunConfig {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        let mut pairs = Vec::new();
        for tok in s.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| ConfigError(format!("config token '{tok}': expected key=value")))?;
            if pairs.iter().any(|(pk, _)| *pk == k) {
                return err(format!("config key '{k}' given twice"));
            }
            pairs.push((k, v));
        }
        let command = match pairs.iter().find(|(k, _)| *k == "command") {
            Some((_, v)) => v.parse()?,
            None => return err("config has no command"),
        };
        let mut cfg = RunConfig::new(command);
        for (k, v) in pairs {
            let int = |v: &str| v.parse::<usize>().map_err(|_| ConfigError(format!("{k}: '{v}' is not a count")));
            match k {
                "command" => {}
                "dist" => RunConfig::set_dist(&mut cfg.dist, v)?,
                "py" => RunConfig::set_dist(&mut cfg.py, v)?,
                "pot" => cfg.set_pot(v)?,
                "r" => cfg.r = Some(v.parse()?),
                "grid" => cfg.grid_points = Some(int(v)?),
                "strategy" => cfg.strategy = Some(v.parse().map_err(|e| ConfigError(format!("{e}")))?),
                "which" => cfg.set_which(v)?,
                "only" => cfg.set_only(v)?,
                "a" => cfg.a = Some(number(k, v)?),
                "c" => cfg.c = Some(number(k, v)?),
                "samples" => cfg.samples = Some(int(v)?),
                "format" => cfg.format = v.parse()?,
                "output" => cfg.output = Some(PathBuf::from(v)),
                "seed" => cfg.seed = v.parse().map_err(|_| ConfigError(format!("seed: '{v}' is not an integer")))?,
                _ => match k.strip_prefix("tol.") {
                    Some(name) => cfg.tolerances.set(name, number(k, v)?)?,
                    None => return err(format!("unknown config key '{k}'")),
                },
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A `verify` suite file (TOML): optional suite filter and tolerance overrides.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteFile {
    #[serde(default)]
    only: Vec<String>,
    #[serde(default)]
    tolerances: BTreeMap<String, f64>,
}

/// Merges a suite file into `cfg`.
pub fn apply_suite_file(cfg: &mut RunConfig, text: &str) -> Result<(), ConfigError> {
    let file: SuiteFile = toml::from_str(text).map_err(|e| ConfigError(format!("suite file: {e}")))?;
    if !file.only.is_empty() {
        cfg.set_only(&file.only.join(","))?;
    }
    for (k, v) in file.tolerances {
        cfg.tolerances.set(&k, v)?;
    }
    Ok(())
}

/// Pulls the config string out of a file: either the `# config:` line of an
/// output table or the first non-empty line.
pub fn config_from_file_text(text: &str) -> Result<RunConfig, ConfigError> {
    let line = text
        .lines()
        .find_map(|l| l.strip_prefix("# config: "))
        .or_else(|| text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#')))
        .ok_or_else(|| ConfigError("config file is empty".into()))?;
    line.trim().parse()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_grid_is_inclusive() {
        let g: RGrid = "0:5:50".parse().unwrap();
        let v = g.values();
        assert_eq!(v.len(), 50);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[49], 5.0);
        assert_eq!("0.5:0.5:1".parse::<RGrid>().unwrap().values(), vec![0.5]);
        assert!("1:0:3".parse::<RGrid>().is_err());
        assert!("0.1,2,1".parse::<RGrid>().is_err());
    }

    #[test]
    fn canonical_string_round_trips() {
        let mut cfg = RunConfig::new(CommandKind::Bounds);
        cfg.set_pot("potential:fig2").unwrap();
        RunConfig::set_dist(&mut cfg.py, "gaussian:mean=0,var=0.04").unwrap();
        cfg.r = Some("0.05:4:40".parse().unwrap());
        cfg.set_which("thm3,bolley").unwrap();
        cfg.tolerances.set("scenario", 1e-2).unwrap();
        let s = cfg.canonical();
        let back: RunConfig = s.parse().unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.canonical(), s);
    }

    #[test]
    fn mixture_spec_survives_config_string() {
        let mut cfg = RunConfig::new(CommandKind::CCurve);
        RunConfig::set_dist(&mut cfg.dist, "mixture:w=0.5;0.5,mean=-2;2,var=1;1").unwrap();
        let back: RunConfig = cfg.canonical().parse().unwrap();
        assert_eq!(back.dist.as_deref(), Some("mixture:w=0.5;0.5,mean=-2;2,var=1;1"));
    }

    #[test]
    fn rejects_unknown_keys_and_tolerances() {
        assert!("command=verify bogus=1".parse::<RunConfig>().is_err());
        assert!("command=verify tol.nope=1".parse::<RunConfig>().is_err());
        assert!("command=bounds pot=potential:fig2".parse::<RunConfig>().is_err());
    }

    #[test]
    fn suite_file_overrides() {
        let mut cfg = RunConfig::new(CommandKind::Verify);
        apply_suite_file(&mut cfg, "only = [\"transport\"]\n[tolerances]\nmi = 0.5\n").unwrap();
        assert_eq!(cfg.only, vec![Suite::Transport]);
        assert_eq!(cfg.tolerances.get("mi"), 0.5);
        assert!(apply_suite_file(&mut cfg, "[tolerances]\nfoo = 1\n").is_err());
    }

    #[test]
    fn reads_config_line_from_output() {
        let text = "# config: command=verify only=dist format=csv seed=0\nsuite,check\n";
        assert_eq!(config_from_file_text(text).unwrap().only, vec![Suite::Dist]);
    }
}
