//! Run reports and their three renderings: a human summary, a JSON record
//! and a CSV table with one row per check.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use recutil::Estimate;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::config::ScenarioConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// `f64` that survives JSON: non-finite values are written as the strings
/// `"inf"`, `"-inf"` and `"nan"`.
#[derive(Debug, Clone, Copy)]
pub struct Num(pub f64);

impl PartialEq for Num {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits() || self.0 == other.0
    }
}

impl From<f64> for Num {
    fn from(v: f64) -> Self {
        Num(v)
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Num;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
                Ok(Num(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
                match v {
                    "inf" => Ok(Num(f64::INFINITY)),
                    "-inf" => Ok(Num(f64::NEG_INFINITY)),
                    "nan" => Ok(Num(f64::NAN)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub value: Num,
    pub stderr: Num,
    pub exact: bool,
}

impl From<Estimate<f64>> for EstimateRecord {
    fn from(e: Estimate<f64>) -> Self {
        Self {
            value: Num(e.value),
            stderr: Num(e.stderr),
            exact: e.exact,
        }
    }
}

impl EstimateRecord {
    fn show(&self) -> String {
        if self.exact {
            format!("{:.6} (exact)", self.value.0)
        } else {
            format!("{:.6} ± {:.2e}", self.value.0, self.stderr.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The test could not decide; not counted as a failure.
    Inconclusive,
}

impl CheckStatus {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Self::Pass
        } else {
            Self::Fail
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub id: String,
    pub status: CheckStatus,
    pub statistic: Num,
    pub tolerance: Num,
    pub stderr: Num,
    pub detail: String,
}

/// Pipeline value against an independent closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleDelta {
    pub quantity: String,
    pub pipeline: Num,
    pub closed_form: Num,
    pub delta: Num,
}

/// Range of a per-path (or per-path, per-step) quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub min: Num,
    pub max: Num,
    pub mean: Num,
    /// Every entry is the same number.
    pub constant: bool,
}

impl Spread {
    pub fn of(xs: impl IntoIterator<Item = f64>) -> Self {
        let (mut min, mut max, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
        let mut first = None;
        let mut constant = true;
        for x in xs {
            min = min.min(x);
            max = max.max(x);
            sum += x;
            n += 1;
            match first {
                None => first = Some(x.to_bits()),
                Some(b) => constant &= b == x.to_bits(),
            }
        }
        Self {
            min: Num(min),
            max: Num(max),
            mean: Num(if n > 0 { sum / n as f64 } else { f64::NAN }),
            constant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub method: String,
    /// Best-effort minimizer that did not converge.
    pub flagged: bool,
    pub square_integrable: bool,
    pub zeta_hat: EstimateRecord,
    /// Recursive utility `Y(0)` of the optimal terminal wealth.
    pub y0: EstimateRecord,
    pub v_upper: EstimateRecord,
    pub v_star: EstimateRecord,
    pub budget: EstimateRecord,
    pub budget_gap: Num,
    pub auxiliary_y0: Option<EstimateRecord>,
    pub xi_hat: Spread,
    pub gamma_hat: Spread,
    pub beta_hat: Spread,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub scenario: ScenarioConfig,
    pub solution: SolutionSummary,
    pub deltas: Vec<OracleDelta>,
    pub checks: Vec<CheckRecord>,
    /// Wall-clock seconds; kept out of the machine record so reruns compare
    /// byte for byte.
    #[serde(skip)]
    pub elapsed_seconds: Option<f64>,
}

impl RunReport {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail).count()
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }

    pub fn check(&self, id: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(["check_id", "status", "statistic", "tolerance", "stderr"])
            .expect("in-memory write");
        for c in &self.checks {
            w.write_record([
                c.id.as_str(),
                c.status.as_str(),
                &fmt_num(c.statistic.0),
                &fmt_num(c.tolerance.0),
                &fmt_num(c.stderr.0),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn to_text(&self) -> String {
        let c = &self.scenario;
        let s = &self.solution;
        let mut out = String::new();
        let _ = writeln!(out, "scenario {} (seed {})", c.name, c.seed);
        let _ = writeln!(
            out,
            "  {} paths x {} steps, T = {}, x = {}",
            c.grid.n_paths, c.grid.n_steps, c.grid.horizon, c.wealth
        );
        if !c.overrides.is_empty() {
            let _ = writeln!(out, "  overrides: {}", c.overrides.join(", "));
        }
        let _ = writeln!(out, "  method     {}{}", s.method, if s.flagged { " (flagged)" } else { "" });
        let _ = writeln!(out, "  zeta_hat   {}", s.zeta_hat.show());
        let _ = writeln!(out, "  Y(0)       {}", s.y0.show());
        let _ = writeln!(out, "  V_upper    {}", s.v_upper.show());
        let _ = writeln!(out, "  V_star     {}", s.v_star.show());
        let _ = writeln!(out, "  budget     {}", s.budget.show());
        if let Some(a) = &s.auxiliary_y0 {
            let _ = writeln!(out, "  aux y(0)   {}", a.show());
        }
        let _ = writeln!(
            out,
            "  xi_hat     [{:.6}, {:.6}]{}",
            s.xi_hat.min.0,
            s.xi_hat.max.0,
            if s.xi_hat.constant { " constant" } else { "" }
        );
        if !s.square_integrable {
            let _ = writeln!(out, "  warning: second moment of xi_hat is unstable");
        }
        for d in &self.deltas {
            let _ = writeln!(
                out,
                "  {:<22} pipeline {:.6}  closed form {:.6}  delta {:.2e}",
                d.quantity, d.pipeline.0, d.closed_form.0, d.delta.0
            );
        }
        for ch in &self.checks {
            let _ = writeln!(
                out,
                "  [{:<12}] {:<28} {:>12} <= {:<12} {}",
                ch.status.as_str(),
                ch.id,
                fmt_num(ch.statistic.0),
                fmt_num(ch.tolerance.0),
                ch.detail
            );
        }
        let _ = writeln!(
            out,
            "  {} of {} checks failed{}",
            self.failures(),
            self.checks.len(),
            self.elapsed_seconds.map(|t| format!(" ({t:.1} s)")).unwrap_or_default()
        );
        out
    }

    /// Writes `report.json`, `checks.csv` and `summary.txt` under
    /// `dir/<scenario name>`; returns that directory.
    pub fn write_to(&self, dir: &Path) -> io::Result<PathBuf> {
        let target = dir.join(sanitize(&self.scenario.name));
        fs::create_dir_all(&target)?;
        fs::write(target.join("report.json"), self.to_json())?;
        fs::write(target.join("checks.csv"), self.to_csv())?;
        fs::write(target.join("summary.txt"), self.to_text())?;
        Ok(target)
    }
}

pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:e}")
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// One line per scenario of a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub config: String,
    pub scenario: String,
    pub status: String,
    pub checks: usize,
    pub failures: usize,
    pub error: Option<String>,
}

pub fn suite_csv(rows: &[SuiteRow]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["config", "scenario", "status", "checks", "failures", "error"])
        .expect("in-memory write");
    for r in rows {
        w.write_record([
            r.config.as_str(),
            r.scenario.as_str(),
            r.status.as_str(),
            &r.checks.to_string(),
            &r.failures.to_string(),
            r.error.as_deref().unwrap_or(""),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}
