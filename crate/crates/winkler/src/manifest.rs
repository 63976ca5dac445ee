//! Flat `key=value` run manifests.
//!
//! A manifest lists every input of an experiment, so the experiment can be
//! rerun from the file alone. Output keys (`eta_norm`, `stop_reason`,
//! `iterations`, ...) are appended after a run and ignored when reading
//! the inputs back.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use winkler_core::eki::{EkiConfig, FailurePolicy, SigmaMode};
use winkler_core::harness::{ExperimentSpec, Mode, TruthSpec};
use winkler_core::plate::PlateModel;

use crate::error::{Error, Result};
use crate::format::write_text;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert or replace `key`, keeping the first insertion position.
    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_owned(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::manifest(key, "missing"))
    }

    pub fn parse_key<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|e: T::Err| Error::manifest(key, format!("cannot parse `{raw}`: {e}")))
    }

    fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            Some(_) => self.parse_key(key),
            None => Ok(default),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            writeln!(out, "{k}={v}").unwrap();
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.render())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        text.parse().map_err(|e: Error| match e {
            Error::Manifest { key, reason } => Error::format(path, format!("{key}: {reason}")),
            other => other,
        })
    }
}

impl FromStr for Manifest {
    type Err = Error;

    /// Blank lines and lines starting with `#` are skipped.
    fn from_str(text: &str) -> Result<Self> {
        let mut m = Manifest::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::manifest(&format!("line {}", no + 1), "expected key=value")
            })?;
            let k = k.trim();
            if m.get(k).is_some() {
                return Err(Error::manifest(k, "given twice"));
            }
            m.set(k, v.trim());
        }
        Ok(m)
    }
}

/// Round-trip formatting for manifest floats.
fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Manifest of every input field of `spec`.
pub fn from_spec(spec: &ExperimentSpec) -> Result<Manifest> {
    if matches!(spec.truth, TruthSpec::Table(_)) {
        return Err(Error::manifest(
            "truth",
            "tabulated truths cannot be recorded in a manifest",
        ));
    }
    let e = &spec.eki;
    let mut m = Manifest::new();
    m.set("mode", spec.mode.as_str())
        .set("truth", &spec.truth)
        .set("n", spec.n)
        .set("gamma", num(spec.gamma))
        .set("beta", num(spec.beta))
        .set("shift", num(spec.shift))
        .set("prior_mean", num(spec.prior_mean))
        .set("J", e.ensemble_size)
        .set("sigma_mode", e.sigma_mode.as_str())
        .set("dt", num(e.dt))
        .set("N", e.max_iter)
        .set("seed", e.seed)
        .set("k_floor", e.k_floor.map_or_else(|| "none".to_owned(), num))
        .set("gamma_reg", num(e.gamma_reg))
        .set("policy", e.failure_policy.as_str())
        .set("D", num(spec.plate.rigidity))
        .set("f", num(spec.plate.force))
        .set("s", num(spec.plate.precision))
        .set("p0x", num(spec.plate.point.0))
        .set("p0y", num(spec.plate.point.1));
    Ok(m)
}

/// Rebuild the experiment described by `m`. Keys beyond the core set fall
/// back to their defaults when absent.
pub fn to_spec(m: &Manifest) -> Result<ExperimentSpec> {
    let plate = PlateModel::default();
    let eki = EkiConfig::default();
    let k_floor = match m.get("k_floor") {
        None | Some("none") => None,
        Some(_) => Some(m.parse_key("k_floor")?),
    };
    let spec = ExperimentSpec {
        mode: m.parse_key::<Mode>("mode")?,
        truth: m.parse_key::<TruthSpec>("truth")?,
        n: m.parse_key("n")?,
        gamma: m.parse_key("gamma")?,
        beta: m.parse_key("beta")?,
        shift: m.parse_or("shift", 0.0)?,
        prior_mean: m.parse_or("prior_mean", 0.0)?,
        plate: PlateModel {
            rigidity: m.parse_or("D", plate.rigidity)?,
            force: m.parse_or("f", plate.force)?,
            precision: m.parse_or("s", plate.precision)?,
            point: (
                m.parse_or("p0x", plate.point.0)?,
                m.parse_or("p0y", plate.point.1)?,
            ),
        },
        eki: EkiConfig {
            ensemble_size: m.parse_key("J")?,
            dt: m.parse_key("dt")?,
            max_iter: m.parse_key("N")?,
            sigma_mode: m.parse_key::<SigmaMode>("sigma_mode")?,
            gamma_reg: m.parse_key("gamma_reg")?,
            seed: m.parse_key("seed")?,
            k_floor,
            failure_policy: m.parse_or::<FailurePolicy>("policy", eki.failure_policy)?,
        },
    };
    spec.validate()?;
    Ok(spec)
}
