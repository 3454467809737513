//! Scenario files.
//!
//! A scenario is a TOML document with a few top-level keys and fixed
//! sections:
//!
//! ```toml
//! name = "cara"
//! seed = 42
//! wealth = 1.0
//!
//! [grid]
//! horizon = 1.0
//! n_steps = 200
//! n_paths = 100000
//!
//! [market]
//! s0 = 1.0
//! sigma = 1.0          # scalar, or a list giving a diagonal matrix
//!
//! [drift]
//! kind = "constant"    # constant | sinusoid | constant-gaussian | ornstein-uhlenbeck
//! value = 0.2
//!
//! [utility]
//! kind = "cara"        # cara | log | power
//! alpha = 1.0
//!
//! [driver]
//! kind = "k-ignorance" # zero | k-ignorance | discount | linear
//! k = 0.1
//! ```
//!
//! Optional sections `[bsde]`, `[tolerances]` and `[checks]` tune the solver
//! and the verification. Every key left out is filled with its default and
//! listed in [`ScenarioConfig::defaulted`], so reports echo the complete
//! scenario.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};

pub const DEFAULT_PATHS: usize = 100_000;
pub const DEFAULT_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("syntax: {0}")]
    Syntax(String),
    #[error("duplicate key `{key}` at line {first} and line {second}")]
    DuplicateKey { key: String, first: usize, second: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("`{key}` must be {expected}")]
    Type { key: String, expected: &'static str },
    #[error("`{key}` = {value}: requires {requirement}")]
    Range {
        key: String,
        value: String,
        requirement: String,
    },
}

/// Every problem found in one document.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} configuration error(s)", self.0.len())?;
        for e in &self.0 {
            write!(f, "\n  - {e}")?;
        }
        Ok(())
    }
}

impl ConfigErrors {
    pub fn mentions(&self, needle: &str) -> bool {
        self.0.iter().any(|e| e.to_string().contains(needle))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DriftConfig {
    Constant {
        value: f64,
    },
    /// `offset + amplitude · sin(2π frequency t + phase)`.
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        phase: f64,
        offset: f64,
    },
    ConstantGaussian {
        mean: f64,
        variance: f64,
    },
    OrnsteinUhlenbeck {
        rate: f64,
        long_run: f64,
        vol: f64,
        mean: f64,
        variance: f64,
    },
}

impl DriftConfig {
    pub fn is_deterministic(&self) -> bool {
        matches!(self, Self::Constant { .. } | Self::Sinusoid { .. })
    }

    /// Largest `|μ(t)|` for deterministic drifts.
    pub fn deterministic_sup(&self) -> Option<f64> {
        match self {
            Self::Constant { value } => Some(value.abs()),
            Self::Sinusoid { amplitude, offset, .. } => Some(offset.abs() + amplitude.abs()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum UtilityConfig {
    Cara { alpha: f64 },
    Log,
    Power { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DriverConfig {
    Zero,
    KIgnorance { k: f64 },
    /// `f(y) = −r y`.
    Discount { r: f64 },
    /// `f(y, z) = β y + γ'z`.
    Linear { beta: f64, gamma: Vec<f64> },
}

impl DriverConfig {
    pub fn is_smooth(&self) -> bool {
        !matches!(self, Self::KIgnorance { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub horizon: f64,
    pub n_steps: usize,
    pub n_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    pub s0: f64,
    /// Diagonal of `σ`; its length is the market dimension.
    pub sigma: Vec<f64>,
    /// Drift truncation level; `None` means ten standard deviations.
    pub drift_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsdeSettings {
    pub n_picard: usize,
    pub basis_degree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Width of every Monte Carlo acceptance band, in standard errors.
    pub sigmas: f64,
    /// Relative tolerance of pipeline multipliers against closed forms.
    pub multiplier_rel: f64,
    /// Relative tolerance of utility values against closed forms.
    pub value_rel: f64,
    /// Coefficient-of-variation threshold of the stationarity check.
    pub cv_threshold: f64,
    /// Binding-set threshold, relative to the initial wealth.
    pub zero_tol: f64,
    /// Allowance on the boundary condition of the stationarity check.
    pub slack: f64,
    /// Band of the innovation quadratic-variation test, in standard errors.
    pub innovation_sigmas: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checks {
    pub budget: bool,
    pub duality_gap: bool,
    pub saddle: bool,
    pub alternatives: usize,
    pub oracles: bool,
    pub max_principle: bool,
    pub innovation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub wealth: f64,
    pub grid: GridConfig,
    pub market: MarketConfig,
    pub drift: DriftConfig,
    pub utility: UtilityConfig,
    pub driver: DriverConfig,
    pub bsde: BsdeSettings,
    pub tolerances: Tolerances,
    pub checks: Checks,
    /// Dotted keys that took their default value.
    pub defaulted: Vec<String>,
    /// Command-line overrides, as `key=value`.
    pub overrides: Vec<String>,
}

impl ScenarioConfig {
    pub fn dim(&self) -> usize {
        self.market.sigma.len()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.overrides.push(format!("seed={seed}"));
        self
    }

    pub fn with_paths(mut self, n: usize) -> Result<Self, ConfigErrors> {
        if n < 2 {
            return Err(ConfigErrors(vec![range("grid.n_paths", n, "n_paths >= 2")]));
        }
        self.grid.n_paths = n;
        self.overrides.push(format!("grid.n_paths={n}"));
        Ok(self)
    }

    pub fn with_steps(mut self, n: usize) -> Result<Self, ConfigErrors> {
        if n < 1 {
            return Err(ConfigErrors(vec![range("grid.n_steps", n, "n_steps >= 1")]));
        }
        self.grid.n_steps = n;
        self.overrides.push(format!("grid.n_steps={n}"));
        Ok(self)
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io(path.display().to_string(), e))?;
    parse_config(&text).map_err(LoadError::Invalid)
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {0}: {1}")]
    Io(String, std::io::Error),
    #[error("{0}")]
    Invalid(ConfigErrors),
}

fn range(key: &str, value: impl fmt::Display, requirement: &str) -> ConfigError {
    ConfigError::Range {
        key: key.to_string(),
        value: value.to_string(),
        requirement: requirement.to_string(),
    }
}

/// Parses and validates a scenario, collecting every error.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigErrors> {
    let dups = duplicate_keys(text);
    if !dups.is_empty() {
        return Err(ConfigErrors(dups));
    }
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigErrors(vec![ConfigError::Syntax(e.message().to_string())]))?;
    let mut r = Reader::new(table);
    let cfg = r.scenario();
    match cfg {
        Some(cfg) if r.errors.is_empty() => Ok(cfg),
        _ => Err(ConfigErrors(r.errors)),
    }
}

/// Line-based scan for keys and tables defined twice, so that both
/// locations can be reported. Keys inside multi-line arrays are skipped.
fn duplicate_keys(text: &str) -> Vec<ConfigError> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut errors = Vec::new();
    let mut section = String::new();
    let mut depth = 0i32;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if depth == 0 && line.starts_with('[') && !line.starts_with("[[") {
            section = line.trim_start_matches('[').trim_end_matches(']').trim().to_string();
            let key = format!("[{section}]");
            if let Some(first) = seen.insert(key.clone(), line_no) {
                errors.push(ConfigError::DuplicateKey {
                    key,
                    first,
                    second: line_no,
                });
            }
            continue;
        }
        if depth == 0 {
            if let Some((k, _)) = line.split_once('=') {
                let k = k.trim().trim_matches('"');
                let key = if section.is_empty() {
                    k.to_string()
                } else {
                    format!("{section}.{k}")
                };
                if let Some(first) = seen.insert(key.clone(), line_no) {
                    errors.push(ConfigError::DuplicateKey {
                        key,
                        first,
                        second: line_no,
                    });
                }
            }
        }
        for c in line.chars() {
            match c {
                '[' | '{' => depth += 1,
                ']' | '}' => depth -= 1,
                _ => {}
            }
        }
        depth = depth.max(0);
    }
    errors
}

fn strip_comment(line: &str) -> &str {
    let mut in_str = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_str = !in_str,
            '#' if !in_str => return &line[..i],
            _ => {}
        }
    }
    line
}

/// Pulls typed values out of the document, recording defaults and errors.
struct Reader {
    root: Table,
    errors: Vec<ConfigError>,
    defaulted: Vec<String>,
}

impl Reader {
    fn new(root: Table) -> Self {
        Self {
            root,
            errors: Vec::new(),
            defaulted: Vec::new(),
        }
    }

    fn section(&mut self, name: &str, required: bool) -> Table {
        match self.root.remove(name) {
            Some(Value::Table(t)) => t,
            Some(_) => {
                self.errors.push(ConfigError::Type {
                    key: name.to_string(),
                    expected: "a section",
                });
                Table::new()
            }
            None => {
                if required {
                    self.errors.push(ConfigError::Missing(format!("[{name}]")));
                }
                Table::new()
            }
        }
    }

    fn finish(&mut self, prefix: &str, table: Table) {
        for key in table.keys() {
            let full = if prefix.is_empty() {
                key.clone()
            } else {
                format!("{prefix}.{key}")
            };
            self.errors.push(ConfigError::UnknownKey(full));
        }
    }

    fn take(&mut self, t: &mut Table, prefix: &str, key: &str) -> (String, Option<Value>) {
        let full = if prefix.is_empty() {
            key.to_string()
        } else {
            format!("{prefix}.{key}")
        };
        (full, t.remove(key))
    }

    fn f64(&mut self, t: &mut Table, prefix: &str, key: &str, default: Option<f64>) -> Option<f64> {
        let (full, v) = self.take(t, prefix, key);
        match v {
            Some(Value::Float(x)) => Some(x),
            Some(Value::Integer(i)) => Some(i as f64),
            Some(_) => {
                self.errors.push(ConfigError::Type {
                    key: full,
                    expected: "a number",
                });
                None
            }
            None => self.default(full, default),
        }
    }

    fn usize(&mut self, t: &mut Table, prefix: &str, key: &str, default: Option<usize>) -> Option<usize> {
        let (full, v) = self.take(t, prefix, key);
        match v {
            Some(Value::Integer(i)) if i >= 0 => Some(i as usize),
            Some(_) => {
                self.errors.push(ConfigError::Type {
                    key: full,
                    expected: "a non-negative integer",
                });
                None
            }
            None => self.default(full, default),
        }
    }

    fn bool(&mut self, t: &mut Table, prefix: &str, key: &str, default: bool) -> bool {
        let (full, v) = self.take(t, prefix, key);
        match v {
            Some(Value::Boolean(b)) => b,
            Some(_) => {
                self.errors.push(ConfigError::Type {
                    key: full,
                    expected: "true or false",
                });
                default
            }
            None => {
                self.defaulted.push(full);
                default
            }
        }
    }

    fn string(&mut self, t: &mut Table, prefix: &str, key: &str, default: Option<&str>) -> Option<String> {
        let (full, v) = self.take(t, prefix, key);
        match v {
            Some(Value::String(s)) => Some(s),
            Some(_) => {
                self.errors.push(ConfigError::Type {
                    key: full,
                    expected: "a string",
                });
                None
            }
            None => self.default(full, default.map(str::to_string)),
        }
    }

    fn f64_list(&mut self, t: &mut Table, prefix: &str, key: &str, default: Option<Vec<f64>>) -> Option<Vec<f64>> {
        let (full, v) = self.take(t, prefix, key);
        let as_num = |v: &Value| match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        };
        match v {
            Some(Value::Array(a)) => {
                let xs: Option<Vec<f64>> = a.iter().map(as_num).collect();
                if xs.as_ref().is_none_or(|x| x.is_empty()) {
                    self.errors.push(ConfigError::Type {
                        key: full,
                        expected: "a number or a non-empty list of numbers",
                    });
                }
                xs.filter(|x| !x.is_empty())
            }
            Some(v) => match as_num(&v) {
                Some(x) => Some(vec![x]),
                None => {
                    self.errors.push(ConfigError::Type {
                        key: full,
                        expected: "a number or a non-empty list of numbers",
                    });
                    None
                }
            },
            None => self.default(full, default),
        }
    }

    fn default<T>(&mut self, full: String, default: Option<T>) -> Option<T> {
        match default {
            Some(d) => {
                self.defaulted.push(full);
                Some(d)
            }
            None => {
                self.errors.push(ConfigError::Missing(full));
                None
            }
        }
    }

    fn check(&mut self, key: &str, value: Option<f64>, ok: impl Fn(f64) -> bool, requirement: &str) {
        if let Some(v) = value {
            if !ok(v) {
                self.errors.push(range(key, v, requirement));
            }
        }
    }

    fn scenario(&mut self) -> Option<ScenarioConfig> {
        let mut top = std::mem::take(&mut self.root);
        let name = self.string(&mut top, "", "name", None);
        let seed = match top.remove("seed") {
            Some(Value::Integer(i)) if i >= 0 => Some(i as u64),
            Some(_) => {
                self.errors.push(ConfigError::Type {
                    key: "seed".into(),
                    expected: "a non-negative integer",
                });
                None
            }
            None => {
                self.defaulted.push("seed".into());
                Some(0)
            }
        };
        let wealth = self.f64(&mut top, "", "wealth", Some(1.0));
        self.check("wealth", wealth, |v| v.is_finite(), "a finite initial wealth");
        self.root = top;

        let grid = self.grid();
        let market = self.market();
        let drift = self.drift();
        let utility = self.utility();
        let driver = self.driver();
        let bsde = self.bsde();
        let tolerances = self.tolerances();
        let checks = self.checks();
        let rest = std::mem::take(&mut self.root);
        self.finish("", rest);

        if let (Some(w), Some(u)) = (wealth, &utility) {
            if !matches!(u, UtilityConfig::Cara { .. }) && w <= 0.0 {
                self.errors.push(range("wealth", w, "wealth > 0 for utilities on positive wealth"));
            }
        }
        if let (Some(m), Some(DriverConfig::Linear { gamma, .. })) = (&market, &driver) {
            if gamma.len() != m.sigma.len() {
                self.errors.push(range(
                    "driver.gamma",
                    format!("{gamma:?}"),
                    "one entry per market dimension",
                ));
            }
        }
        Some(ScenarioConfig {
            name: name?,
            seed: seed?,
            wealth: wealth?,
            grid: grid?,
            market: market?,
            drift: drift?,
            utility: utility?,
            driver: driver?,
            bsde: bsde?,
            tolerances: tolerances?,
            checks,
            defaulted: std::mem::take(&mut self.defaulted),
            overrides: Vec::new(),
        })
    }

    fn grid(&mut self) -> Option<GridConfig> {
        let mut t = self.section("grid", false);
        let horizon = self.f64(&mut t, "grid", "horizon", Some(1.0));
        let n_steps = self.usize(&mut t, "grid", "n_steps", Some(DEFAULT_STEPS));
        let n_paths = self.usize(&mut t, "grid", "n_paths", Some(DEFAULT_PATHS));
        self.finish("grid", t);
        self.check("grid.horizon", horizon, |v| v > 0.0 && v.is_finite(), "horizon T > 0");
        self.check("grid.n_steps", n_steps.map(|v| v as f64), |v| v >= 1.0, "n_steps >= 1");
        self.check("grid.n_paths", n_paths.map(|v| v as f64), |v| v >= 2.0, "n_paths >= 2");
        Some(GridConfig {
            horizon: horizon?,
            n_steps: n_steps?,
            n_paths: n_paths?,
        })
    }

    fn market(&mut self) -> Option<MarketConfig> {
        let mut t = self.section("market", false);
        let s0 = self.f64(&mut t, "market", "s0", Some(1.0));
        let sigma = self.f64_list(&mut t, "market", "sigma", Some(vec![1.0]));
        let bound = match t.contains_key("drift_bound") {
            true => self.f64(&mut t, "market", "drift_bound", None),
            false => {
                self.defaulted.push("market.drift_bound".into());
                None
            }
        };
        self.finish("market", t);
        self.check("market.s0", s0, |v| v > 0.0 && v.is_finite(), "initial price > 0");
        if let Some(s) = &sigma {
            for v in s {
                self.check("market.sigma", Some(*v), |v| v > 0.0 && v.is_finite(), "every volatility entry > 0");
            }
        }
        self.check("market.drift_bound", bound, |v| v > 0.0, "drift bound > 0");
        Some(MarketConfig {
            s0: s0?,
            sigma: sigma?,
            drift_bound: bound,
        })
    }

    fn drift(&mut self) -> Option<DriftConfig> {
        let mut t = self.section("drift", true);
        let kind = self.string(&mut t, "drift", "kind", Some("constant"));
        let p = "drift";
        let out = match kind.as_deref() {
            Some("constant") => {
                let value = self.f64(&mut t, p, "value", None);
                self.check("drift.value", value, f64::is_finite, "a finite drift");
                Some(DriftConfig::Constant { value: value? })
            }
            Some("sinusoid") => {
                let amplitude = self.f64(&mut t, p, "amplitude", None);
                let frequency = self.f64(&mut t, p, "frequency", Some(1.0));
                let phase = self.f64(&mut t, p, "phase", Some(0.0));
                let offset = self.f64(&mut t, p, "offset", Some(0.0));
                for (k, v) in [("drift.amplitude", amplitude), ("drift.frequency", frequency), ("drift.phase", phase), ("drift.offset", offset)] {
                    self.check(k, v, f64::is_finite, "a finite number");
                }
                Some(DriftConfig::Sinusoid {
                    amplitude: amplitude?,
                    frequency: frequency?,
                    phase: phase?,
                    offset: offset?,
                })
            }
            Some("constant-gaussian") => {
                let mean = self.f64(&mut t, p, "mean", None);
                let variance = self.f64(&mut t, p, "variance", None);
                self.check("drift.variance", variance, |v| v >= 0.0, "prior variance v0 >= 0");
                Some(DriftConfig::ConstantGaussian {
                    mean: mean?,
                    variance: variance?,
                })
            }
            Some("ornstein-uhlenbeck") => {
                let rate = self.f64(&mut t, p, "rate", None);
                let long_run = self.f64(&mut t, p, "long_run", None);
                let vol = self.f64(&mut t, p, "vol", None);
                let mean = self.f64(&mut t, p, "mean", None);
                let variance = self.f64(&mut t, p, "variance", None);
                self.check("drift.rate", rate, |v| v >= 0.0, "mean-reversion rate >= 0");
                self.check("drift.vol", vol, |v| v >= 0.0, "drift volatility >= 0");
                self.check("drift.variance", variance, |v| v >= 0.0, "prior variance v0 >= 0");
                Some(DriftConfig::OrnsteinUhlenbeck {
                    rate: rate?,
                    long_run: long_run?,
                    vol: vol?,
                    mean: mean?,
                    variance: variance?,
                })
            }
            Some(other) => {
                self.errors.push(range(
                    "drift.kind",
                    other,
                    "one of constant, sinusoid, constant-gaussian, ornstein-uhlenbeck",
                ));
                t.clear();
                None
            }
            None => None,
        };
        self.finish("drift", t);
        out
    }

    fn utility(&mut self) -> Option<UtilityConfig> {
        let mut t = self.section("utility", true);
        let kind = self.string(&mut t, "utility", "kind", None);
        let out = match kind.as_deref() {
            Some("cara") => {
                let alpha = self.f64(&mut t, "utility", "alpha", Some(1.0));
                self.check("utility.alpha", alpha, |v| v > 0.0 && v.is_finite(), "risk aversion alpha > 0");
                Some(UtilityConfig::Cara { alpha: alpha? })
            }
            Some("log") => Some(UtilityConfig::Log),
            Some("power") => {
                let p = self.f64(&mut t, "utility", "p", None);
                self.check("utility.p", p, |v| v < 1.0 && v != 0.0, "p < 1 and p != 0");
                Some(UtilityConfig::Power { p: p? })
            }
            Some(other) => {
                self.errors.push(range("utility.kind", other, "one of cara, log, power"));
                t.clear();
                None
            }
            None => None,
        };
        self.finish("utility", t);
        out
    }

    fn driver(&mut self) -> Option<DriverConfig> {
        let mut t = self.section("driver", true);
        let kind = self.string(&mut t, "driver", "kind", None);
        let out = match kind.as_deref() {
            Some("zero") => Some(DriverConfig::Zero),
            Some("k-ignorance") => {
                let k = self.f64(&mut t, "driver", "k", None);
                self.check("driver.k", k, |v| v >= 0.0 && v.is_finite(), "K >= 0");
                Some(DriverConfig::KIgnorance { k: k? })
            }
            Some("discount") => {
                let r = self.f64(&mut t, "driver", "r", None);
                self.check("driver.r", r, f64::is_finite, "a finite rate");
                Some(DriverConfig::Discount { r: r? })
            }
            Some("linear") => {
                let beta = self.f64(&mut t, "driver", "beta", Some(0.0));
                let gamma = self.f64_list(&mut t, "driver", "gamma", None);
                self.check("driver.beta", beta, f64::is_finite, "a finite coefficient");
                Some(DriverConfig::Linear {
                    beta: beta?,
                    gamma: gamma?,
                })
            }
            Some(other) => {
                self.errors.push(range("driver.kind", other, "one of zero, k-ignorance, discount, linear"));
                t.clear();
                None
            }
            None => None,
        };
        self.finish("driver", t);
        out
    }

    fn bsde(&mut self) -> Option<BsdeSettings> {
        let mut t = self.section("bsde", false);
        let n_picard = self.usize(&mut t, "bsde", "n_picard", Some(3));
        let basis_degree = self.usize(&mut t, "bsde", "basis_degree", Some(2));
        self.finish("bsde", t);
        self.check("bsde.basis_degree", basis_degree.map(|v| v as f64), |v| v <= 6.0, "basis degree <= 6");
        Some(BsdeSettings {
            n_picard: n_picard?,
            basis_degree: basis_degree?,
        })
    }

    fn tolerances(&mut self) -> Option<Tolerances> {
        let mut t = self.section("tolerances", false);
        let p = "tolerances";
        let sigmas = self.f64(&mut t, p, "sigmas", Some(4.0));
        let multiplier_rel = self.f64(&mut t, p, "multiplier_rel", Some(5e-3));
        let value_rel = self.f64(&mut t, p, "value_rel", Some(1e-2));
        let cv_threshold = self.f64(&mut t, p, "cv_threshold", Some(1e-2));
        let zero_tol = self.f64(&mut t, p, "zero_tol", Some(1e-6));
        let slack = self.f64(&mut t, p, "slack", Some(1e-3));
        let innovation_sigmas = self.f64(&mut t, p, "innovation_sigmas", Some(5.0));
        self.finish(p, t);
        for (k, v) in [
            ("tolerances.sigmas", sigmas),
            ("tolerances.multiplier_rel", multiplier_rel),
            ("tolerances.value_rel", value_rel),
            ("tolerances.cv_threshold", cv_threshold),
            ("tolerances.zero_tol", zero_tol),
            ("tolerances.slack", slack),
            ("tolerances.innovation_sigmas", innovation_sigmas),
        ] {
            self.check(k, v, |v| v >= 0.0 && v.is_finite(), "a finite tolerance >= 0");
        }
        Some(Tolerances {
            sigmas: sigmas?,
            multiplier_rel: multiplier_rel?,
            value_rel: value_rel?,
            cv_threshold: cv_threshold?,
            zero_tol: zero_tol?,
            slack: slack?,
            innovation_sigmas: innovation_sigmas?,
        })
    }

    fn checks(&mut self) -> Checks {
        let mut t = self.section("checks", false);
        let p = "checks";
        let budget = self.bool(&mut t, p, "budget", true);
        let duality_gap = self.bool(&mut t, p, "duality_gap", true);
        let saddle = self.bool(&mut t, p, "saddle", true);
        let alternatives = self.usize(&mut t, p, "alternatives", Some(32)).unwrap_or(32);
        let oracles = self.bool(&mut t, p, "oracles", true);
        let max_principle = self.bool(&mut t, p, "max_principle", true);
        let innovation = self.bool(&mut t, p, "innovation", true);
        self.finish(p, t);
        Checks {
            budget,
            duality_gap,
            saddle,
            alternatives,
            oracles,
            max_principle,
            innovation,
        }
    }
}
