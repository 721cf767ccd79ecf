//! Normalizes the raw UCI heart-disease and breast-cancer files into the
//! dataset CSV format read by the reproduction harness.
//!
//! Column mapping:
//!
//! * heart, from `processed.hungarian.data` and `processed.va.data`
//!   (comma-separated, 14 fields, `?` for missing): field 1 `age`, field 5
//!   `chol`, field 14 `num`. Rows with a missing or zero cholesterol or a
//!   missing age are dropped. `label` is `disease` when `num > 0`, else
//!   `healthy`. Written to `heart/hungarian.csv` and `heart/long_beach.csv`.
//! * breast, from `breast-cancer-wisconsin.data` (11 fields: id, nine
//!   cytology scores, class 2 or 4): the nine scores keep their order under
//!   the names in [`BREAST_COLUMNS`]; the id is discarded; class 4 becomes
//!   `malignant`, class 2 `benign`. Rows with any `?` are dropped. Written to
//!   `breast/breast.csv`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::repro::{BREAST_FILE, HEART_SOURCE_FILE, HEART_TARGET_FILE};

pub const HEART_RAW_SOURCE: &str = "processed.hungarian.data";
pub const HEART_RAW_TARGET: &str = "processed.va.data";
pub const BREAST_RAW: &str = "breast-cancer-wisconsin.data";

pub const BREAST_COLUMNS: [&str; 9] = [
    "clump_thickness",
    "cell_size_uniformity",
    "cell_shape_uniformity",
    "marginal_adhesion",
    "epithelial_cell_size",
    "bare_nuclei",
    "bland_chromatin",
    "normal_nucleoli",
    "mitoses",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IngestTarget {
    Heart,
    Breast,
}

impl fmt::Display for IngestTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IngestTarget::Heart => "heart",
            IngestTarget::Breast => "breast",
        })
    }
}

impl FromStr for IngestTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heart" => Ok(IngestTarget::Heart),
            "breast" => Ok(IngestTarget::Breast),
            _ => Err(Error::InvalidArgument(format!("unknown ingest target `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestedFile {
    pub path: PathBuf,
    pub rows_kept: usize,
    pub rows_dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub target: IngestTarget,
    pub files: Vec<IngestedFile>,
}

/// Normalized CSV text plus the number of dropped rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalized {
    pub csv: String,
    pub kept: usize,
    pub dropped: usize,
}

fn fields(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

fn number(s: &str) -> Option<f64> {
    if s == "?" {
        None
    } else {
        s.parse::<f64>().ok().filter(|v| v.is_finite())
    }
}

pub fn normalize_heart(raw: &str) -> Result<Normalized> {
    let mut csv = String::from("age,chol,label\n");
    let (mut kept, mut dropped) = (0, 0);
    for (i, line) in raw.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f = fields(line);
        if f.len() != 14 {
            return Err(Error::Csv(format!("line {}: expected 14 fields, got {}", i + 1, f.len())));
        }
        let num = number(f[13]).ok_or_else(|| Error::Csv(format!("line {}: diagnosis `{}`", i + 1, f[13])))?;
        match (number(f[0]), number(f[4])) {
            (Some(age), Some(chol)) if chol != 0.0 => {
                let label = if num > 0.0 { "disease" } else { "healthy" };
                csv.push_str(&format!("{age},{chol},{label}\n"));
                kept += 1;
            }
            _ => dropped += 1,
        }
    }
    Ok(Normalized { csv, kept, dropped })
}

pub fn normalize_breast(raw: &str) -> Result<Normalized> {
    let mut csv = BREAST_COLUMNS.join(",");
    csv.push_str(",label\n");
    let (mut kept, mut dropped) = (0, 0);
    for (i, line) in raw.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f = fields(line);
        if f.len() != 11 {
            return Err(Error::Csv(format!("line {}: expected 11 fields, got {}", i + 1, f.len())));
        }
        let label = match f[10] {
            "4" => "malignant",
            "2" => "benign",
            other => return Err(Error::Csv(format!("line {}: class `{other}`", i + 1))),
        };
        let values: Option<Vec<f64>> = f[1..10].iter().map(|s| number(s)).collect();
        match values {
            Some(v) => {
                let row: Vec<String> = v.iter().map(f64::to_string).collect();
                csv.push_str(&format!("{},{label}\n", row.join(",")));
                kept += 1;
            }
            None => dropped += 1,
        }
    }
    Ok(Normalized { csv, kept, dropped })
}

/// Reads `file` under `from`, which is an http(s) base URL, a directory, or,
/// for single-file targets, the file itself.
fn fetch(from: &str, file: &str) -> Result<String> {
    if from.starts_with("http://") || from.starts_with("https://") {
        let url = format!("{}/{file}", from.trim_end_matches('/'));
        log::info!("downloading {url}");
        return ureq::get(&url)
            .call()
            .map_err(|e| Error::DatasetUnavailable(format!("{url}: {e}")))?
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::DatasetUnavailable(format!("{url}: {e}")));
    }
    let p = Path::new(from);
    let path = if p.is_dir() { p.join(file) } else { p.to_path_buf() };
    std::fs::read_to_string(&path).map_err(|e| Error::DatasetUnavailable(format!("{}: {e}", path.display())))
}

fn store(to: &Path, rel: &str, n: Normalized) -> Result<IngestedFile> {
    let path = to.join(rel);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&path, n.csv)?;
    Ok(IngestedFile {
        path,
        rows_kept: n.kept,
        rows_dropped: n.dropped,
    })
}

pub fn ingest(target: IngestTarget, from: &str, to: &Path) -> Result<IngestSummary> {
    let files = match target {
        IngestTarget::Heart => {
            if !from.starts_with("http") && Path::new(from).is_file() {
                return Err(Error::InvalidArgument(
                    "heart needs two raw files; pass their directory or base URL".into(),
                ));
            }
            let src = normalize_heart(&fetch(from, HEART_RAW_SOURCE)?)?;
            let tgt = normalize_heart(&fetch(from, HEART_RAW_TARGET)?)?;
            vec![store(to, HEART_SOURCE_FILE, src)?, store(to, HEART_TARGET_FILE, tgt)?]
        }
        IngestTarget::Breast => vec![store(to, BREAST_FILE, normalize_breast(&fetch(from, BREAST_RAW)?)?)?],
    };
    Ok(IngestSummary { target, files })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::read_csv_path;

    const HUNGARIAN: &str = "28,1,2,130,132,0,2,185,0,0,?,?,?,0\n\
                             29,1,2,120,243,0,0,160,0,0,?,?,?,0\n\
                             32,0,2,105,0,0,0,165,0,0,?,?,?,0\n\
                             47,1,4,150,?,0,0,98,1,1.5,2,?,?,1\n\
                             48,1,4,160,193,0,0,102,1,3,2,?,?,3\n";

    #[test]
    fn heart_mapping() {
        let n = normalize_heart(HUNGARIAN).unwrap();
        assert_eq!((n.kept, n.dropped), (3, 2));
        assert_eq!(n.csv, "age,chol,label\n28,132,healthy\n29,243,healthy\n48,193,disease\n");
    }

    #[test]
    fn breast_mapping() {
        let raw = "1000025,5,1,1,1,2,1,3,1,1,2\n1057013,8,4,5,1,2,?,7,3,1,4\n1017122,8,10,10,8,7,10,9,7,1,4\n";
        let n = normalize_breast(raw).unwrap();
        assert_eq!((n.kept, n.dropped), (2, 1));
        assert!(n.csv.ends_with("5,1,1,1,2,1,3,1,1,benign\n8,10,10,8,7,10,9,7,1,malignant\n"));
        assert!(normalize_breast("1,2,3\n").is_err());
    }

    #[test]
    fn ingest_from_directory() {
        let raw = tempfile::tempdir().unwrap();
        std::fs::write(raw.path().join(HEART_RAW_SOURCE), HUNGARIAN).unwrap();
        std::fs::write(raw.path().join(HEART_RAW_TARGET), "63,1,4,140,260,0,1,112,1,3,2,?,?,2\n").unwrap();
        let out = tempfile::tempdir().unwrap();
        let s = ingest(IngestTarget::Heart, raw.path().to_str().unwrap(), out.path()).unwrap();
        assert_eq!(s.files.len(), 2);
        let ds = read_csv_path(&out.path().join(HEART_SOURCE_FILE)).unwrap();
        assert_eq!((ds.n(), ds.d()), (3, 2));
        let missing = ingest(IngestTarget::Breast, raw.path().to_str().unwrap(), out.path());
        assert!(matches!(missing, Err(Error::DatasetUnavailable(_))));
    }
}
