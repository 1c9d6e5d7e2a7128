//! Runnable structural checks with explicit pass/fail verdicts.
//!
//! Every check compares a measured quantity with a bound or target. Its
//! tolerance has three separate parts: a statistical part (3 standard
//! errors), a discretization allowance (one grid step times the relevant
//! Lipschitz scale) and a fixed absolute part (float slack or a declared
//! solver tolerance). A lab passes when all gating checks pass.

mod gap;
mod kprocess;
mod mollify;
mod scaling;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::config::{LabSection, RunConfig};
use crate::error::{Error, Result};
use crate::gspec::GSpec;
use crate::pde::PdeParams;
use crate::scenario::TimeGrid;
use crate::upper::{McSetup, SCHEMA_VERSION};

pub use gap::{sii_gap, sii_gap_reports};
pub use kprocess::{lemma42, thm44};
pub use mollify::{cor33, delta_decay, mollification_bound, prop35, thm32};
pub use scaling::{gnormal, qv_scaling};

/// Slack for comparisons that hold exactly up to rounding.
pub const FLOAT_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LabId {
    SiiGap,
    Thm32,
    Cor33,
    Prop35,
    Delta,
    Lemma42,
    Thm44,
    QvScaling,
    Gnormal,
}

impl LabId {
    pub const ALL: [LabId; 9] = [
        LabId::SiiGap,
        LabId::Thm32,
        LabId::Cor33,
        LabId::Prop35,
        LabId::Delta,
        LabId::Lemma42,
        LabId::Thm44,
        LabId::QvScaling,
        LabId::Gnormal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LabId::SiiGap => "sii-gap",
            LabId::Thm32 => "thm32",
            LabId::Cor33 => "cor33",
            LabId::Prop35 => "prop35",
            LabId::Delta => "delta",
            LabId::Lemma42 => "lemma42",
            LabId::Thm44 => "thm44",
            LabId::QvScaling => "qv-scaling",
            LabId::Gnormal => "gnormal",
        }
    }
}

impl fmt::Display for LabId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LabId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = LabId::ALL.iter().map(|l| l.as_str()).collect();
                Error::InvalidArgument(format!("unknown lab `{s}` (known: {})", known.join(", ")))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `measured >= bound - tolerance`.
    AtLeast,
    /// `measured <= bound + tolerance`.
    AtMost,
    /// `|measured - bound| <= tolerance`.
    Equal,
}

/// One comparison inside a verdict.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub std_err: f64,
    pub relation: Relation,
    pub bound: f64,
    pub stat_tolerance: f64,
    pub discretization: f64,
    pub absolute: f64,
    /// Reported but not part of the lab's pass flag.
    pub gating: bool,
    pub pass: bool,
}

impl Check {
    pub fn new(
        name: impl Into<String>,
        measured: f64,
        std_err: f64,
        relation: Relation,
        bound: f64,
    ) -> Self {
        let mut c = Self {
            name: name.into(),
            measured,
            std_err,
            relation,
            bound,
            stat_tolerance: 3.0 * std_err,
            discretization: 0.0,
            absolute: FLOAT_SLACK,
            gating: true,
            pass: false,
        };
        c.pass = c.evaluate();
        c
    }

    /// A boolean condition recorded as `1 == 1`.
    pub fn flag(name: impl Into<String>, holds: bool) -> Self {
        Self::new(
            name,
            if holds { 1.0 } else { 0.0 },
            0.0,
            Relation::Equal,
            1.0,
        )
    }

    pub fn discretization(mut self, allowance: f64) -> Self {
        self.discretization = allowance;
        self.pass = self.evaluate();
        self
    }

    pub fn absolute(mut self, tolerance: f64) -> Self {
        self.absolute = tolerance;
        self.pass = self.evaluate();
        self
    }

    pub fn informational(mut self) -> Self {
        self.gating = false;
        self
    }

    pub fn tolerance(&self) -> f64 {
        self.stat_tolerance + self.discretization + self.absolute
    }

    fn evaluate(&self) -> bool {
        let tol = self.tolerance();
        let ok = match self.relation {
            Relation::AtLeast => self.measured >= self.bound - tol,
            Relation::AtMost => self.measured <= self.bound + tol,
            Relation::Equal => (self.measured - self.bound).abs() <= tol,
        };
        ok && self.measured.is_finite()
    }
}

/// Machine-checkable outcome of one lab.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabVerdict {
    pub schema_version: u32,
    pub lab: String,
    pub statement: String,
    pub seed: u64,
    pub profile: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub pass: bool,
    #[serde(skip)]
    pub runtime_secs: f64,
}

impl LabVerdict {
    pub fn new(
        id: LabId,
        statement: impl Into<String>,
        seed: u64,
        profile: BTreeMap<String, Value>,
        checks: Vec<Check>,
    ) -> Self {
        let pass = checks.iter().filter(|c| c.gating).all(|c| c.pass);
        Self {
            schema_version: SCHEMA_VERSION,
            lab: id.as_str().into(),
            statement: statement.into(),
            seed,
            profile,
            checks,
            pass,
            runtime_secs: 0.0,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.gating && !c.pass).collect()
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)?;
        Ok(())
    }
}

/// Rows of a lab's data table, formatted as shortest round-trip decimals.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DataTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl DataTable {
    pub fn new(headers: &[&str]) -> Self {
        Self {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let j = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j].as_str()).collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.headers)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shorthand for table cells.
pub(crate) fn cell(x: impl ToString) -> String {
    x.to_string()
}

#[derive(Clone, Debug)]
pub struct LabOutcome {
    pub verdict: LabVerdict,
    pub table: DataTable,
}

/// Band, seed, PDE grid and profile overrides shared by every lab.
#[derive(Clone, Debug, PartialEq)]
pub struct LabOptions {
    pub spec: GSpec,
    pub seed: u64,
    pub pde: PdeParams,
    pub overrides: LabSection,
}

impl LabOptions {
    pub fn new(spec: GSpec, seed: u64) -> Self {
        Self {
            spec,
            seed,
            pde: PdeParams::default(),
            overrides: LabSection::default(),
        }
    }

    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        Ok(Self {
            spec: cfg.gspec()?,
            seed: cfg.mc.seed,
            pde: cfg.pde,
            overrides: cfg.lab.clone(),
        })
    }

    pub(crate) fn horizon(&self) -> f64 {
        self.overrides.horizon.unwrap_or(1.0)
    }

    pub(crate) fn setup(&self, n_steps: usize, n_paths: usize) -> Result<McSetup> {
        Ok(McSetup {
            spec: self.spec,
            grid: TimeGrid::new(self.horizon(), self.overrides.n_steps.unwrap_or(n_steps))?,
            n_paths: self.overrides.n_paths.unwrap_or(n_paths),
            seed: self.seed,
        })
    }

    pub(crate) fn n_list(&self, default: &[usize]) -> Vec<usize> {
        self.overrides.n.clone().unwrap_or_else(|| default.to_vec())
    }

    pub(crate) fn profile(&self, setup: &McSetup) -> BTreeMap<String, Value> {
        let mut p = BTreeMap::new();
        p.insert("sigma_lo_sq".into(), self.spec.sigma_lo_sq().into());
        p.insert("sigma_hi_sq".into(), self.spec.sigma_hi_sq().into());
        p.insert("T".into(), setup.grid.horizon().into());
        p.insert("n_steps".into(), setup.grid.n_steps().into());
        p.insert("n_paths".into(), setup.n_paths.into());
        p
    }
}

pub fn run_lab(id: LabId, opts: &LabOptions) -> Result<LabOutcome> {
    let start = Instant::now();
    let mut out = match id {
        LabId::SiiGap => sii_gap(opts),
        LabId::Thm32 => thm32(opts),
        LabId::Cor33 => cor33(opts),
        LabId::Prop35 => prop35(opts),
        LabId::Delta => delta_decay(opts),
        LabId::Lemma42 => lemma42(opts),
        LabId::Thm44 => thm44(opts),
        LabId::QvScaling => qv_scaling(opts),
        LabId::Gnormal => gnormal(opts),
    }?;
    out.verdict.runtime_secs = start.elapsed().as_secs_f64();
    Ok(out)
}

/// `<outdir>/<lab>/<seed>/`.
pub fn output_dir(outdir: &Path, id: LabId, seed: u64) -> PathBuf {
    outdir.join(id.as_str()).join(seed.to_string())
}

/// Writes `verdict.json`, `data.csv` and `config.effective`.
pub fn write_outcome(dir: &Path, outcome: &LabOutcome, config_text: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    outcome
        .verdict
        .write_json(std::fs::File::create(dir.join("verdict.json"))?)?;
    outcome
        .table
        .write_csv(std::fs::File::create(dir.join("data.csv"))?)?;
    std::fs::write(dir.join("config.effective"), config_text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_relations() {
        assert!(Check::new("a", 0.44, 0.01, Relation::AtLeast, 0.45).pass);
        assert!(!Check::new("a", 0.40, 0.01, Relation::AtLeast, 0.45).pass);
        assert!(
            Check::new("b", 1.02, 0.0, Relation::AtMost, 1.0)
                .absolute(0.05)
                .pass
        );
        assert!(!Check::new("c", 1.0, 0.0, Relation::Equal, 1.1).pass);
        assert!(
            Check::new("c", 1.0, 0.0, Relation::Equal, 1.1)
                .discretization(0.1)
                .pass
        );
        assert!(!Check::new("nan", f64::NAN, 0.0, Relation::AtMost, 1.0).pass);
        assert!(!Check::flag("f", false).pass);
    }

    #[test]
    fn verdict_ignores_informational_checks() {
        let checks = vec![
            Check::flag("ok", true),
            Check::flag("note", false).informational(),
        ];
        let v = LabVerdict::new(LabId::Thm32, "x", 1, BTreeMap::new(), checks);
        assert!(v.pass);
        assert!(v.failures().is_empty());
    }

    #[test]
    fn lab_ids_round_trip() {
        for id in LabId::ALL {
            assert_eq!(id.as_str().parse::<LabId>().unwrap(), id);
        }
        assert!("thm99".parse::<LabId>().is_err());
    }
}
