//! Reproduction harness. Each target regenerates one experiment from seeded
//! synthetic data (or ingested UCI files where available) and renders both a
//! JSON document and an aligned plain-text table.

mod breast;
mod general;
mod heart;
mod kl_table;
mod prior_table;
mod transformation;

pub use breast::{repro_breast, BreastReport, BreastRun, BREAST_FILE, BREAST_LABELS, BREAST_TARGET_PRIOR};
pub(crate) use breast::standin_pair as breast_standin_pair;
pub use general::{repro_general_benign, GeneralBenignReport, GeneralCase};
pub use heart::{repro_heart, HeartOutcome, HeartReport, OfflineHeartRun, HEART_LABELS, HEART_SOURCE_FILE, HEART_TARGET_FILE};
pub use kl_table::{repro_kl_table, KlRow, KlTableReport, PUBLISHED_FEATURE_KL};
pub use prior_table::{repro_prior_table, AccuracyCell, PriorTableReport, PriorRun};
pub use transformation::{verify_transformation_proposition, TotalProbabilityCheck, TransformationReport};

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReproTarget {
    PriorTable,
    KlTable,
    GeneralBenign,
    Heart,
    Breast,
    Transformation,
}

impl ReproTarget {
    pub const ALL: [ReproTarget; 6] = [
        ReproTarget::PriorTable,
        ReproTarget::KlTable,
        ReproTarget::GeneralBenign,
        ReproTarget::Heart,
        ReproTarget::Breast,
        ReproTarget::Transformation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReproTarget::PriorTable => "prior-table",
            ReproTarget::KlTable => "kl-table",
            ReproTarget::GeneralBenign => "general-benign",
            ReproTarget::Heart => "heart",
            ReproTarget::Breast => "breast",
            ReproTarget::Transformation => "transformation",
        }
    }
}

impl fmt::Display for ReproTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReproTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReproTarget::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown repro target `{s}`")))
    }
}

/// A finished reproduction run.
pub trait Report: Serialize {
    fn render_text(&self) -> String;

    fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Rendered artifacts of one repro target.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub target: ReproTarget,
    pub json: String,
    pub text: String,
}

impl Artifacts {
    fn of<R: Report>(target: ReproTarget, report: &R) -> Result<Self> {
        Ok(Self {
            target,
            json: report.to_json()?,
            text: report.render_text(),
        })
    }

    /// Writes `<name>.json` and `<name>.txt` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let json = dir.join(format!("{}.json", self.target.name()));
        let text = dir.join(format!("{}.txt", self.target.name()));
        std::fs::write(&json, &self.json)?;
        std::fs::write(&text, &self.text)?;
        Ok((json, text))
    }
}

/// Runs one target with its default parameters.
pub fn run(target: ReproTarget, seed: u64, data_dir: Option<&Path>) -> Result<Artifacts> {
    match target {
        ReproTarget::PriorTable => Artifacts::of(target, &repro_prior_table(seed)?),
        ReproTarget::KlTable => Artifacts::of(target, &repro_kl_table(seed)?),
        ReproTarget::GeneralBenign => Artifacts::of(target, &repro_general_benign(seed)?),
        ReproTarget::Heart => Artifacts::of(target, &repro_heart(data_dir, seed)?),
        ReproTarget::Breast => Artifacts::of(target, &repro_breast(data_dir, seed)?),
        ReproTarget::Transformation => Artifacts::of(target, &verify_transformation_proposition(&[0.5, 1.0, 1.5], 20_000, seed)?),
    }
}

/// Left-aligned first column, right-aligned others.
pub(crate) fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (c, cell) in row.iter().enumerate().take(cols) {
            width[c] = width[c].max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        cells
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{:<w$}", s, w = width[c])
                } else {
                    format!("{:>w$}", s, w = width[c])
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * (cols - 1)));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_names_round_trip() {
        for t in ReproTarget::ALL {
            assert_eq!(t.name().parse::<ReproTarget>().unwrap(), t);
        }
        assert!("table-9".parse::<ReproTarget>().is_err());
    }

    #[test]
    fn table_alignment() {
        let t = text_table(&["a", "bb"], &[vec!["xyz".into(), "1".into()]]);
        assert_eq!(t, "a    bb\n-------\nxyz   1\n");
    }
}
