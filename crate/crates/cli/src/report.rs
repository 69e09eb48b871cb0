//! Report schema (JSON and CSV).
//!
//! Field order is fixed by the struct definitions. Floats are written with
//! 17 significant digits in scientific notation; non-finite values become
//! `null` in JSON and empty cells in CSV.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::io::SpecFile;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// A float with fixed, round-trippable formatting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Num(pub f64);

impl Num {
    pub fn text(self) -> Option<String> {
        self.0.is_finite().then(|| format!("{:.16e}", self.0))
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text().unwrap_or_default())
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.text() {
            Some(t) => serde_json::Number::from_str(&t).map_err(serde::ser::Error::custom)?.serialize(s),
            None => s.serialize_none(),
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Num(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN)))
    }
}

impl From<f64> for Num {
    fn from(x: f64) -> Self {
        Num(x)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetEcho {
    pub nodes: u64,
    pub member_cap: usize,
    pub enumeration: u64,
    pub exact_points: usize,
    pub exact_members: usize,
    pub exact_independent_points: usize,
    pub pairs: usize,
}

/// The fully resolved configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigEcho {
    /// The generating spec with defaults filled in; absent for file systems.
    pub spec: Option<SpecFile>,
    pub space_file: Option<String>,
    pub map_file: Option<String>,
    pub cover_files: Vec<String>,
    pub horizon: usize,
    pub mesh_radii: Vec<Num>,
    pub window: Option<[usize; 2]>,
    pub tolerance: Num,
    pub analytic_tolerance: Num,
    pub mode: String,
    pub budget: BudgetEcho,
    pub known_overrides: Vec<(String, Num)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverInfo {
    pub id: String,
    pub radius: Num,
    pub members: usize,
    pub lebesgue_number: Num,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemInfo {
    pub name: String,
    pub points: usize,
    pub metric: String,
    pub diameter: Num,
    pub separation: Num,
    pub covers: Vec<CoverInfo>,
}

/// One value with where it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantityRow {
    pub name: String,
    pub value: Num,
    pub provenance: String,
    pub op: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaRow {
    pub system: String,
    pub cover_id: String,
    pub n: usize,
    pub delta_n: Num,
    /// `ln(δ_{n−1}/δ_n)`; `null` when `δ_n` is capped.
    pub a_n: Num,
    pub capped: bool,
    pub op: String,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateRow {
    pub system: String,
    pub source: String,
    pub cover_id: String,
    pub radius: Num,
    pub n_min: usize,
    pub n_max: usize,
    pub lower_rate: Num,
    pub upper_rate: Num,
    pub slope: Num,
    pub cumulative_rate: Num,
    pub op: String,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterateRow {
    pub system: String,
    pub n: usize,
    pub lipschitz: Num,
    /// `(1/n)·ln L(fⁿ)`.
    pub rate: Num,
    pub op: String,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrefixMaxRow {
    pub cover_id: String,
    pub n_min: usize,
    pub n_max: usize,
    /// Windowed upper rate of `−ln δ(f⁻ⁿU)/n`.
    pub pullback_rate: Num,
    /// Windowed upper rate of `−ln δ_n/n`.
    pub running_min_rate: Num,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreimageInfo {
    pub lower: Num,
    pub upper: Num,
    pub best_pair: [usize; 2],
    pub pairs: usize,
    pub n_min: usize,
    pub n_max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteBoundRow {
    pub cover_id: String,
    /// Non-negative when `δ_n ≥ δ(U)·max(L,1)^{−(n−1)}` holds for all `n`.
    pub margin: Num,
}

/// Side checks that accompany the rate tables.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    pub prefix_max: Vec<PrefixMaxRow>,
    pub preimage_gap: Option<PreimageInfo>,
    pub subadditive: Option<bool>,
    pub minimal_dominated: Option<bool>,
    pub finite_bounds: Vec<FiniteBoundRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyRow {
    pub system: String,
    pub estimator: String,
    pub scale: Num,
    pub n: usize,
    pub count: usize,
    pub rate: Num,
    pub exact: bool,
    pub op: String,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropySummary {
    pub system: String,
    pub estimator: String,
    pub scale: Num,
    pub n_min: usize,
    pub n_max: usize,
    pub estimate: Num,
    pub op: String,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimRow {
    pub system: String,
    pub gamma: Num,
    pub count: usize,
    pub exact: bool,
    pub slope: Num,
    pub op: String,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalityOut {
    pub name: String,
    pub relation: String,
    pub lhs: Num,
    pub rhs: Num,
    pub slack: Num,
    pub tol: Num,
    pub status: String,
    pub pass: bool,
    pub lhs_src: Option<String>,
    pub rhs_src: Option<String>,
    pub lhs_from: String,
    pub rhs_from: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatusCounts {
    pub pass: usize,
    pub fail: usize,
    pub inconclusive: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalitySection {
    /// No row failed.
    pub passed: bool,
    pub counts: StatusCounts,
    pub failed: Vec<String>,
    pub rows: Vec<InequalityOut>,
}

/// A full report. Sections a command does not produce are omitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub config: ConfigEcho,
    pub system: SystemInfo,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_table: Option<Vec<DeltaRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<RateRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterates: Option<Vec<IterateRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<Checks>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy: Option<Vec<EntropyRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy_summary: Option<Vec<EntropySummary>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<DimRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantities: Option<Vec<QuantityRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inequalities: Option<InequalitySection>,
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<Num>,
}

/// The sections produced by one command.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Fragment {
    pub delta_table: Option<Vec<DeltaRow>>,
    pub rates: Option<Vec<RateRow>>,
    pub iterates: Option<Vec<IterateRow>>,
    pub checks: Option<Checks>,
    pub entropy: Option<Vec<EntropyRow>>,
    pub entropy_summary: Option<Vec<EntropySummary>>,
    pub dims: Option<Vec<DimRow>>,
    pub quantities: Option<Vec<QuantityRow>>,
    pub inequalities: Option<InequalitySection>,
    pub notes: Vec<String>,
}

fn merge_opt<T>(a: &mut Option<T>, b: Option<T>) {
    if b.is_some() {
        *a = b;
    }
}

impl Fragment {
    /// Later sections replace earlier ones; notes accumulate.
    pub fn merge(&mut self, other: Fragment) {
        merge_opt(&mut self.delta_table, other.delta_table);
        merge_opt(&mut self.rates, other.rates);
        merge_opt(&mut self.iterates, other.iterates);
        merge_opt(&mut self.entropy, other.entropy);
        merge_opt(&mut self.entropy_summary, other.entropy_summary);
        merge_opt(&mut self.dims, other.dims);
        merge_opt(&mut self.quantities, other.quantities);
        merge_opt(&mut self.inequalities, other.inequalities);
        match (&mut self.checks, other.checks) {
            (Some(mine), Some(theirs)) => {
                if !theirs.prefix_max.is_empty() {
                    mine.prefix_max = theirs.prefix_max;
                }
                merge_opt(&mut mine.preimage_gap, theirs.preimage_gap);
                merge_opt(&mut mine.subadditive, theirs.subadditive);
                merge_opt(&mut mine.minimal_dominated, theirs.minimal_dominated);
                if !theirs.finite_bounds.is_empty() {
                    mine.finite_bounds = theirs.finite_bounds;
                }
            }
            (slot, theirs) => merge_opt(slot, theirs),
        }
        for n in other.notes {
            if !self.notes.contains(&n) {
                self.notes.push(n);
            }
        }
    }
}

impl Report {
    pub fn new(command: &str, config: ConfigEcho, system: SystemInfo, f: Fragment) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config,
            system,
            delta_table: f.delta_table,
            rates: f.rates,
            iterates: f.iterates,
            checks: f.checks,
            entropy: f.entropy,
            entropy_summary: f.entropy_summary,
            dims: f.dims,
            quantities: f.quantities,
            inequalities: f.inequalities,
            notes: f.notes,
            wall_time_s: None,
        }
    }

    /// CSV tables in a fixed order: `(file stem, header, records)`.
    pub fn tables(&self) -> Vec<Table> {
        let mut out = Vec::new();
        if let Some(rows) = &self.delta_table {
            out.push(table("delta", &["system", "cover_id", "n", "delta_n", "a_n", "capped"], rows, |r| {
                vec![
                    r.system.clone(),
                    r.cover_id.clone(),
                    r.n.to_string(),
                    r.delta_n.to_string(),
                    r.a_n.to_string(),
                    r.capped.to_string(),
                ]
            }));
        }
        if let Some(rows) = &self.rates {
            let header = [
                "system",
                "source",
                "cover_id",
                "radius",
                "n_min",
                "n_max",
                "lower_rate",
                "upper_rate",
                "slope",
                "cumulative_rate",
                "provenance",
            ];
            out.push(table("rates", &header, rows, |r| {
                vec![
                    r.system.clone(),
                    r.source.clone(),
                    r.cover_id.clone(),
                    r.radius.to_string(),
                    r.n_min.to_string(),
                    r.n_max.to_string(),
                    r.lower_rate.to_string(),
                    r.upper_rate.to_string(),
                    r.slope.to_string(),
                    r.cumulative_rate.to_string(),
                    r.provenance.clone(),
                ]
            }));
        }
        if let Some(rows) = &self.iterates {
            out.push(table("iterates", &["system", "n", "lipschitz", "rate", "provenance"], rows, |r| {
                vec![
                    r.system.clone(),
                    r.n.to_string(),
                    r.lipschitz.to_string(),
                    r.rate.to_string(),
                    r.provenance.clone(),
                ]
            }));
        }
        if let Some(rows) = &self.entropy {
            let header = ["system", "estimator", "scale", "n", "count", "rate", "exact", "provenance"];
            out.push(table("entropy", &header, rows, |r| {
                vec![
                    r.system.clone(),
                    r.estimator.clone(),
                    r.scale.to_string(),
                    r.n.to_string(),
                    r.count.to_string(),
                    r.rate.to_string(),
                    r.exact.to_string(),
                    r.provenance.clone(),
                ]
            }));
        }
        if let Some(rows) = &self.entropy_summary {
            let header = ["system", "estimator", "scale", "n_min", "n_max", "estimate", "provenance"];
            out.push(table("entropy_summary", &header, rows, |r| {
                vec![
                    r.system.clone(),
                    r.estimator.clone(),
                    r.scale.to_string(),
                    r.n_min.to_string(),
                    r.n_max.to_string(),
                    r.estimate.to_string(),
                    r.provenance.clone(),
                ]
            }));
        }
        if let Some(rows) = &self.dims {
            out.push(table("dims", &["system", "gamma", "count", "exact", "slope"], rows, |r| {
                vec![
                    r.system.clone(),
                    r.gamma.to_string(),
                    r.count.to_string(),
                    r.exact.to_string(),
                    r.slope.to_string(),
                ]
            }));
        }
        if let Some(rows) = &self.quantities {
            out.push(table("quantities", &["name", "value", "provenance", "op"], rows, |r| {
                vec![r.name.clone(), r.value.to_string(), r.provenance.clone(), r.op.clone()]
            }));
        }
        if let Some(sec) = &self.inequalities {
            let header = ["name", "relation", "lhs", "rhs", "slack", "tol", "status", "pass", "lhs_src", "rhs_src"];
            out.push(table("inequalities", &header, &sec.rows, |r| {
                vec![
                    r.name.clone(),
                    r.relation.clone(),
                    r.lhs.to_string(),
                    r.rhs.to_string(),
                    r.slack.to_string(),
                    r.tol.to_string(),
                    r.status.clone(),
                    r.pass.to_string(),
                    r.lhs_src.clone().unwrap_or_default(),
                    r.rhs_src.clone().unwrap_or_default(),
                ]
            }));
        }
        out
    }

    pub fn to_json(&self) -> String {
        crate::io::to_json_string(self)
    }
}

pub struct Table {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub records: Vec<Vec<String>>,
}

fn table<T>(name: &'static str, header: &[&'static str], rows: &[T], f: impl Fn(&T) -> Vec<String>) -> Table {
    Table { name, header: header.to_vec(), records: rows.iter().map(f).collect() }
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("write to memory");
        for r in &self.records {
            w.write_record(r).expect("write to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("CSV is UTF-8")
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}
