//! Core domain types: datasets, label spaces, domain pairs, shift scenarios
//! and importance weights, plus the CSV dataset format.
//!
//! Labels are symbolic strings on the outside and contiguous indices
//! `0..k` (in [`LabelSpace`] order) everywhere numbers are computed.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered set of `k >= 2` distinct label identifiers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelSpace {
    labels: Vec<String>,
}

impl LabelSpace {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "label space needs at least 2 labels, got {}",
                labels.len()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidArgument(format!("duplicate label `{l}`")));
            }
        }
        Ok(Self { labels })
    }

    /// The `{"+1", "-1"}` space used by the synthetic binary generators.
    pub fn signed_binary() -> Self {
        Self {
            labels: vec!["+1".into(), "-1".into()],
        }
    }

    /// Label space inferred from the distinct labels of a dataset, in
    /// order of first appearance.
    pub fn infer(datasets: &[&Dataset]) -> Result<Self> {
        let mut labels: Vec<String> = Vec::new();
        for ds in datasets {
            for l in ds.labels().into_iter().flatten() {
                if !labels.contains(l) {
                    labels.push(l.clone());
                }
            }
        }
        Self::new(labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index_of(label).is_some()
    }

    pub fn encode(&self, labels: &[String]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|l| self.index_of(l).ok_or_else(|| Error::UnknownLabel(l.clone())))
            .collect()
    }
}

impl TryFrom<Vec<String>> for LabelSpace {
    type Error = Error;
    fn try_from(v: Vec<String>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LabelSpace> for Vec<String> {
    fn from(s: LabelSpace) -> Self {
        s.labels
    }
}

/// Feature matrix (`n x d`, finite values) with optional labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetRepr", into = "DatasetRepr")]
pub struct Dataset {
    name: String,
    features: Array2<f64>,
    labels: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct DatasetRepr {
    name: String,
    features: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl TryFrom<DatasetRepr> for Dataset {
    type Error = Error;
    fn try_from(r: DatasetRepr) -> Result<Self> {
        Dataset::from_rows(r.name, &r.features, r.labels)
    }
}

impl From<Dataset> for DatasetRepr {
    fn from(ds: Dataset) -> Self {
        DatasetRepr {
            features: ds.features.rows().into_iter().map(|r| r.to_vec()).collect(),
            name: ds.name,
            labels: ds.labels,
        }
    }
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 || d == 0 {
            return Err(Error::InvalidDataset(format!(
                "need n >= 1 and d >= 1, got {n} x {d}"
            )));
        }
        if let Some(((i, j), v)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite feature {v} at row {i}, column {j}"
            )));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::InvalidDataset(format!(
                    "{} labels for {n} rows",
                    l.len()
                )));
            }
        }
        // Row access hands out contiguous slices.
        let features = if features.is_standard_layout() {
            features
        } else {
            features.as_standard_layout().to_owned()
        };
        Ok(Self {
            name: name.into(),
            features,
            labels,
        })
    }

    pub fn from_rows(
        name: impl Into<String>,
        rows: &[Vec<f64>],
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::InvalidDataset(format!(
                "row {i} has {} values, expected {d}",
                r.len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let features = Array2::from_shape_vec((n, d), flat)
            .map_err(|e| Error::InvalidDataset(e.to_string()))?;
        Self::new(name, features, labels)
    }

    /// Builds a labeled dataset from label indices into `space`.
    pub fn from_encoded(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: &[usize],
        space: &LabelSpace,
    ) -> Result<Self> {
        let labels = labels.iter().map(|&i| space.label(i).to_string()).collect();
        Self::new(name, features, Some(labels))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features
            .row(i)
            .to_slice()
            .expect("features kept in standard layout")
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.features.column(j)
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    pub fn encoded_labels(&self, space: &LabelSpace) -> Result<Vec<usize>> {
        space.encode(self.labels.as_deref().ok_or(Error::UnlabeledDataset)?)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn without_labels(&self) -> Self {
        Self {
            labels: None,
            ..self.clone()
        }
    }

    /// Dataset restricted to the given row indices (order preserved).
    pub fn select(&self, rows: &[usize]) -> Self {
        let features = self.features.select(ndarray::Axis(0), rows);
        let labels = self
            .labels
            .as_ref()
            .map(|l| rows.iter().map(|&i| l[i].clone()).collect());
        Self {
            name: self.name.clone(),
            features,
            labels,
        }
    }

    /// One-column dataset holding feature `j`.
    pub fn select_column(&self, j: usize) -> Self {
        let features = self.features.select(ndarray::Axis(1), &[j]);
        Self {
            name: self.name.clone(),
            features,
            labels: self.labels.clone(),
        }
    }
}

/// Source (labeled) and target dataset under one feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainPair {
    pub source: Dataset,
    pub target: Dataset,
    pub label_space: LabelSpace,
}

impl DomainPair {
    /// Builds a pair, rejecting any invariant violation.
    pub fn new(source: Dataset, target: Dataset, label_space: LabelSpace) -> Result<Self> {
        let pair = Self {
            source,
            target,
            label_space,
        };
        let report = validate_domain_pair(&pair);
        if report.is_empty() {
            Ok(pair)
        } else {
            Err(Error::InvalidDataset(
                report
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("; "),
            ))
        }
    }

    pub fn source_labels(&self) -> Result<Vec<usize>> {
        self.source.encoded_labels(&self.label_space)
    }

    pub fn target_labels(&self) -> Option<Result<Vec<usize>>> {
        self.target
            .is_labeled()
            .then(|| self.target.encoded_labels(&self.label_space))
    }
}

/// One broken invariant found by [`validate_domain_pair`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

pub fn validate_domain_pair(pair: &DomainPair) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field: &str, rule: String| {
        out.push(Violation {
            field: field.to_string(),
            rule,
        })
    };
    if pair.source.d() != pair.target.d() {
        push(
            "target.features",
            format!(
                "feature dimension mismatch: source d = {}, target d = {}",
                pair.source.d(),
                pair.target.d()
            ),
        );
    }
    match pair.source.labels() {
        None => push("source.labels", "source labels required".into()),
        Some(labels) => {
            if let Some(l) = labels.iter().find(|l| !pair.label_space.contains(l)) {
                push("source.labels", format!("label outside space: `{l}`"));
            }
        }
    }
    if let Some(labels) = pair.target.labels() {
        if let Some(l) = labels.iter().find(|l| !pair.label_space.contains(l)) {
            push("target.labels", format!("label outside space: `{l}`"));
        }
    }
    out
}

/// Class frequencies of `ds` in `space` order.
pub fn empirical_prior(ds: &Dataset, space: &LabelSpace) -> Result<Vec<f64>> {
    let encoded = ds.encoded_labels(space)?;
    Ok(class_frequencies(&encoded, space.len()))
}

pub(crate) fn class_frequencies(labels: &[usize], k: usize) -> Vec<f64> {
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    let n = labels.len() as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Causality {
    XtoY,
    YtoX,
    Unknown,
}

impl Causality {
    pub const ALL: [Causality; 3] = [Causality::XtoY, Causality::YtoX, Causality::Unknown];
}

impl std::str::FromStr for Causality {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['-', '_', ' ', '>'], "").as_str() {
            "xtoy" | "xy" => Ok(Causality::XtoY),
            "ytox" | "yx" => Ok(Causality::YtoX),
            "unknown" | "?" => Ok(Causality::Unknown),
            _ => Err(Error::InvalidArgument(format!("unknown causality `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    Prior,
    ClassConditional,
    Covariate,
    Concept,
    General,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::Prior,
        ScenarioKind::ClassConditional,
        ScenarioKind::Covariate,
        ScenarioKind::Concept,
        ScenarioKind::General,
    ];

    pub fn admits(self, causality: Causality) -> bool {
        match self {
            ScenarioKind::Prior | ScenarioKind::ClassConditional => causality == Causality::YtoX,
            ScenarioKind::Covariate | ScenarioKind::Concept => causality == Causality::XtoY,
            ScenarioKind::General => causality != Causality::Unknown,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ScenarioKind::Prior => "Prior",
            ScenarioKind::ClassConditional => "ClassConditional",
            ScenarioKind::Covariate => "Covariate",
            ScenarioKind::Concept => "Concept",
            ScenarioKind::General => "General",
        };
        f.write_str(s)
    }
}

/// A scenario kind together with a causality it is compatible with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioRepr")]
pub struct ShiftScenario {
    kind: ScenarioKind,
    causality: Causality,
}

#[derive(Deserialize)]
struct ScenarioRepr {
    kind: ScenarioKind,
    causality: Causality,
}

impl TryFrom<ScenarioRepr> for ShiftScenario {
    type Error = Error;
    fn try_from(r: ScenarioRepr) -> Result<Self> {
        ShiftScenario::new(r.kind, r.causality)
    }
}

impl ShiftScenario {
    pub fn new(kind: ScenarioKind, causality: Causality) -> Result<Self> {
        if kind.admits(causality) {
            Ok(Self { kind, causality })
        } else {
            Err(Error::InvalidArgument(format!(
                "scenario {kind} is incompatible with causality {causality:?}"
            )))
        }
    }

    pub fn kind(&self) -> ScenarioKind {
        self.kind
    }

    pub fn causality(&self) -> Causality {
        self.causality
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TriState {
    Yes,
    No,
    Unknown,
}

impl TriState {
    pub const ALL: [TriState; 3] = [TriState::Yes, TriState::No, TriState::Unknown];

    pub fn from_bool(b: bool) -> Self {
        if b {
            TriState::Yes
        } else {
            TriState::No
        }
    }

    pub fn is_known(self) -> bool {
        self != TriState::Unknown
    }
}

impl std::str::FromStr for TriState {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" | "y" | "true" => Ok(TriState::Yes),
            "no" | "n" | "false" => Ok(TriState::No),
            "unknown" | "u" | "?" | "" => Ok(TriState::Unknown),
            _ => Err(Error::InvalidArgument(format!("expected yes/no/unknown, got `{s}`"))),
        }
    }
}

/// One cell of the shift matrix; `definitional` marks the shifts fixed by the
/// scenario definition as opposed to those inferred from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftCell {
    pub shifted: TriState,
    pub definitional: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftMatrix {
    pub delta_py: ShiftCell,
    pub delta_px: ShiftCell,
    pub delta_px_given_y: ShiftCell,
    pub delta_py_given_x: ShiftCell,
    pub delta_joint: ShiftCell,
}

impl ShiftMatrix {
    pub fn cells(&self) -> [ShiftCell; 5] {
        [
            self.delta_py,
            self.delta_px,
            self.delta_px_given_y,
            self.delta_py_given_x,
            self.delta_joint,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    PerSample,
    PerClass,
}

/// Nonnegative importance weights, per sample or per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightRepr")]
pub struct WeightVector {
    kind: WeightKind,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct WeightRepr {
    kind: WeightKind,
    values: Vec<f64>,
}

impl TryFrom<WeightRepr> for WeightVector {
    type Error = Error;
    fn try_from(r: WeightRepr) -> Result<Self> {
        WeightVector::new(r.kind, r.values)
    }
}

impl WeightVector {
    pub fn new(kind: WeightKind, values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "weights must be finite and nonnegative, got {v}"
            )));
        }
        if !values.iter().any(|v| *v > 0.0) {
            return Err(Error::InvalidArgument(
                "at least one weight must be positive".into(),
            ));
        }
        Ok(Self { kind, values })
    }

    pub fn per_sample(values: Vec<f64>) -> Result<Self> {
        Self::new(WeightKind::PerSample, values)
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Expands per-class weights to one weight per labeled sample.
    pub fn expand(&self, labels: &[usize]) -> Result<WeightVector> {
        match self.kind {
            WeightKind::PerSample => Ok(self.clone()),
            WeightKind::PerClass => {
                let values = labels
                    .iter()
                    .map(|&l| {
                        self.values.get(l).copied().ok_or_else(|| {
                            Error::InvalidArgument(format!("no class weight for label index {l}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                WeightVector::per_sample(values)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// CSV format: header row, optional `label` column, every other column a
// decimal feature.
// ---------------------------------------------------------------------------

pub const LABEL_COLUMN: &str = "label";

/// Parses a dataset in CSV form. Errors name the 1-based data row and the
/// column of the first failure.
pub fn read_csv<R: Read>(name: &str, reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv(format!("header: {e}")))?
        .clone();
    let label_col = headers.iter().position(|h| h.trim() == LABEL_COLUMN);
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| Some(c) != label_col).collect();
    if feature_cols.is_empty() {
        return Err(Error::Csv("no feature columns".into()));
    }
    let mut flat = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0usize;
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Csv(format!("row {row}: {e}")))?;
        if record.len() != headers.len() {
            return Err(Error::Csv(format!(
                "row {row}: expected {} fields, got {}",
                headers.len(),
                record.len()
            )));
        }
        for &c in &feature_cols {
            let raw = record[c].trim();
            let v: f64 = raw.parse().map_err(|_| {
                Error::Csv(format!("row {row}, column `{}`: cannot parse `{raw}`", &headers[c]))
            })?;
            if !v.is_finite() {
                return Err(Error::Csv(format!(
                    "row {row}, column `{}`: non-finite value `{raw}`",
                    &headers[c]
                )));
            }
            flat.push(v);
        }
        if let Some(c) = label_col {
            labels.push(record[c].trim().to_string());
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Csv("no data rows".into()));
    }
    let features = Array2::from_shape_vec((n, feature_cols.len()), flat)
        .map_err(|e| Error::Csv(e.to_string()))?;
    Dataset::new(name, features, label_col.map(|_| labels))
}

pub fn read_csv_path(path: &Path) -> Result<Dataset> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let file = std::fs::File::open(path)?;
    read_csv(&name, std::io::BufReader::new(file))
}

/// Feature column names of a dataset CSV, in column order.
pub fn read_csv_feature_names(path: &Path) -> Result<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(|e| Error::Csv(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| Error::Csv(format!("header: {e}")))?;
    Ok(headers
        .iter()
        .map(str::trim)
        .filter(|h| *h != LABEL_COLUMN)
        .map(String::from)
        .collect())
}

/// Writes `ds` as CSV. Feature columns are named from `headers` if given,
/// otherwise `x0..x{d-1}`.
pub fn write_csv<W: Write>(ds: &Dataset, headers: Option<&[String]>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = match headers {
        Some(h) => h.to_vec(),
        None => (0..ds.d()).map(|j| format!("x{j}")).collect(),
    };
    if ds.is_labeled() {
        header.push(LABEL_COLUMN.into());
    }
    w.write_record(&header).map_err(|e| Error::Csv(e.to_string()))?;
    for i in 0..ds.n() {
        let mut rec: Vec<String> = ds.row(i).iter().map(|v| format!("{v:?}")).collect();
        if let Some(l) = ds.labels() {
            rec.push(l[i].clone());
        }
        w.write_record(&rec).map_err(|e| Error::Csv(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a single `weight` column aligned with the source row order.
pub fn write_weights_csv<W: Write>(weights: &[f64], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["weight"]).map_err(|e| Error::Csv(e.to_string()))?;
    for v in weights {
        w.write_record([format!("{v:?}")])
            .map_err(|e| Error::Csv(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_weights_csv<R: Read>(reader: R) -> Result<WeightVector> {
    let mut rdr = csv::Reader::from_reader(reader);
    let col = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .position(|h| h.trim() == "weight")
        .ok_or_else(|| Error::Csv("missing `weight` column".into()))?;
    let mut values = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv(format!("row {}: {e}", r + 1)))?;
        let raw = rec.get(col).unwrap_or("").trim();
        values.push(
            raw.parse::<f64>()
                .map_err(|_| Error::Csv(format!("row {}: cannot parse weight `{raw}`", r + 1)))?,
        );
    }
    WeightVector::per_sample(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn labeled(n: usize, d: usize, labels: &[&str]) -> Dataset {
        let features = Array2::from_shape_fn((n, d), |(i, j)| (i * d + j) as f64);
        let labels = (0..n).map(|i| labels[i % labels.len()].to_string()).collect();
        Dataset::new("t", features, Some(labels)).unwrap()
    }

    #[test]
    fn well_formed_pair_has_empty_report() {
        let pair = DomainPair {
            source: labeled(10, 2, &["A", "B"]),
            target: labeled(5, 2, &["A"]).without_labels(),
            label_space: LabelSpace::new(["A", "B"]).unwrap(),
        };
        assert!(validate_domain_pair(&pair).is_empty());
    }

    #[test]
    fn dimension_mismatch_reported() {
        let pair = DomainPair {
            source: labeled(10, 2, &["A", "B"]),
            target: labeled(5, 3, &["A"]).without_labels(),
            label_space: LabelSpace::new(["A", "B"]).unwrap(),
        };
        let report = validate_domain_pair(&pair);
        assert_eq!(report.len(), 1);
        assert!(report[0].rule.contains("feature dimension mismatch"));
        assert!(DomainPair::new(pair.source, pair.target, pair.label_space).is_err());
    }

    #[test]
    fn foreign_label_reported() {
        let pair = DomainPair {
            source: labeled(10, 2, &["A", "B", "C"]),
            target: labeled(5, 2, &["A"]).without_labels(),
            label_space: LabelSpace::new(["A", "B"]).unwrap(),
        };
        let report = validate_domain_pair(&pair);
        assert_eq!(report.len(), 1);
        assert!(report[0].rule.contains("label outside space"));
    }

    #[test]
    fn empirical_prior_examples() {
        let space = LabelSpace::new(["A", "B"]).unwrap();
        let p = |ls: &[&str]| {
            let ds = Dataset::new(
                "p",
                Array2::zeros((ls.len(), 1)),
                Some(ls.iter().map(|s| s.to_string()).collect()),
            )
            .unwrap();
            empirical_prior(&ds, &space).unwrap()
        };
        assert_eq!(p(&["A", "A", "B", "B"]), vec![0.5, 0.5]);
        assert_eq!(p(&["A", "A", "A", "B"]), vec![0.75, 0.25]);
        assert_eq!(p(&["A"]), vec![1.0, 0.0]);
        let unlabeled = Dataset::new("u", Array2::zeros((2, 1)), None).unwrap();
        assert!(matches!(
            empirical_prior(&unlabeled, &space),
            Err(Error::UnlabeledDataset)
        ));
    }

    #[test]
    fn dataset_rejects_bad_input() {
        assert!(Dataset::new("e", Array2::zeros((0, 2)), None).is_err());
        assert!(Dataset::new("e", array![[1.0, f64::NAN]], None).is_err());
        assert!(Dataset::new("e", array![[1.0], [2.0]], Some(vec!["A".into()])).is_err());
        assert!(LabelSpace::new(["A"]).is_err());
        assert!(LabelSpace::new(["A", "A"]).is_err());
    }

    #[test]
    fn scenario_compatibility_enumeration() {
        let valid: Vec<_> = ScenarioKind::ALL
            .iter()
            .flat_map(|&k| Causality::ALL.iter().map(move |&c| (k, c)))
            .filter(|&(k, c)| ShiftScenario::new(k, c).is_ok())
            .collect();
        assert_eq!(
            valid,
            vec![
                (ScenarioKind::Prior, Causality::YtoX),
                (ScenarioKind::ClassConditional, Causality::YtoX),
                (ScenarioKind::Covariate, Causality::XtoY),
                (ScenarioKind::Concept, Causality::XtoY),
                (ScenarioKind::General, Causality::XtoY),
                (ScenarioKind::General, Causality::YtoX),
            ]
        );
    }

    #[test]
    fn csv_parsing_and_errors() {
        let text = "age,label,chol\n40,A,200\n50,B,250.5\n";
        let ds = read_csv("h", text.as_bytes()).unwrap();
        assert_eq!((ds.n(), ds.d()), (2, 2));
        assert_eq!(ds.row(1), &[50.0, 250.5]);
        assert_eq!(ds.labels().unwrap(), &["A".to_string(), "B".to_string()]);

        let bad = "x,y\n1,2\n3,oops\n";
        let err = read_csv("b", bad.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("row 2") && err.contains("`y`"), "{err}");
        assert!(read_csv("n", "x\nNaN\n".as_bytes()).is_err());
    }

    #[test]
    fn weights_reject_negative_and_all_zero() {
        assert!(WeightVector::per_sample(vec![1.0, -0.1]).is_err());
        assert!(WeightVector::per_sample(vec![0.0, 0.0]).is_err());
        let w = WeightVector::new(WeightKind::PerClass, vec![2.0, 0.5]).unwrap();
        assert_eq!(w.expand(&[0, 1, 1]).unwrap().values(), &[2.0, 0.5, 0.5]);
    }
}
