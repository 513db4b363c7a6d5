//! Longitudinal cohort data: observations, individuals, ingestion from CSV
//! or JSON, cross-validation folds and feature ablation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Clinical diagnosis recorded at a visit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Diagnosis {
    CN,
    MCI,
    AD,
    NA,
}

impl Diagnosis {
    pub fn as_str(self) -> &'static str {
        match self {
            Diagnosis::CN => "CN",
            Diagnosis::MCI => "MCI",
            Diagnosis::AD => "AD",
            Diagnosis::NA => "NA",
        }
    }
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Diagnosis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "CN" => Ok(Diagnosis::CN),
            "MCI" => Ok(Diagnosis::MCI),
            "AD" => Ok(Diagnosis::AD),
            "NA" | "" => Ok(Diagnosis::NA),
            other => Err(format!("unknown diagnosis '{other}' (expected CN, MCI, AD or NA)")),
        }
    }
}

/// Which tail of a feature is pathological.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Increasing,
    Decreasing,
}

/// One visit: I feature values with a missingness mask.
///
/// Missing entries hold `NaN` in memory and serialize as `null`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Observation {
    #[serde(serialize_with = "ser_values", deserialize_with = "de_values")]
    pub values: Vec<f64>,
    pub missing_mask: Vec<bool>,
    pub visit_time: f64,
}

fn ser_values<S: Serializer>(values: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let opt: Vec<Option<f64>> = values
        .iter()
        .map(|v| if v.is_finite() { Some(*v) } else { None })
        .collect();
    opt.serialize(s)
}

fn de_values<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    let opt: Vec<Option<f64>> = Vec::deserialize(d)?;
    Ok(opt.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
}

impl PartialEq for Observation {
    fn eq(&self, other: &Self) -> bool {
        self.visit_time.to_bits() == other.visit_time.to_bits()
            && self.missing_mask == other.missing_mask
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.missing_mask)
                .all(|((a, b), &m)| m || a.to_bits() == b.to_bits())
    }
}

impl Observation {
    /// Builds an observation from optional values; `None` marks a missing cell.
    pub fn new(values: &[Option<f64>], visit_time: f64) -> Self {
        Observation {
            values: values.iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
            missing_mask: values.iter().map(Option::is_none).collect(),
            visit_time,
        }
    }

    pub fn n_features(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, feature: usize) -> Option<f64> {
        if self.missing_mask[feature] {
            None
        } else {
            Some(self.values[feature])
        }
    }

    pub fn n_observed(&self) -> usize {
        self.missing_mask.iter().filter(|m| !**m).count()
    }

    pub fn set_missing(&mut self, feature: usize) {
        self.missing_mask[feature] = true;
        self.values[feature] = f64::NAN;
    }

    fn validate(&self, n_features: usize) -> Result<()> {
        if self.values.len() != n_features || self.missing_mask.len() != n_features {
            return Err(Error::Schema(format!(
                "observation has {} values / {} mask entries, expected {n_features}",
                self.values.len(),
                self.missing_mask.len()
            )));
        }
        if !(self.visit_time >= 0.0) || !self.visit_time.is_finite() {
            return Err(Error::Validation(format!(
                "visit_time must be finite and >= 0, got {}",
                self.visit_time
            )));
        }
        for (i, (v, m)) in self.values.iter().zip(&self.missing_mask).enumerate() {
            if !m && !v.is_finite() {
                return Err(Error::Validation(format!(
                    "feature {i} is marked observed but holds non-finite value {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub id: String,
    pub observations: Vec<Observation>,
    pub diagnosis_labels: Vec<Diagnosis>,
}

impl Individual {
    pub fn n_visits(&self) -> usize {
        self.observations.len()
    }

    pub fn visit_times(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.visit_time).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.observations.iter().all(|o| o.missing_mask.iter().all(|m| !m))
    }

    pub fn baseline_label(&self) -> Diagnosis {
        self.diagnosis_labels[0]
    }

    /// Copy restricted to the first visit.
    pub fn baseline_only(&self) -> Individual {
        Individual {
            id: self.id.clone(),
            observations: vec![self.observations[0].clone()],
            diagnosis_labels: vec![self.diagnosis_labels[0]],
        }
    }

    fn validate(&self, n_features: usize) -> Result<()> {
        if self.observations.is_empty() {
            return Err(Error::Validation(format!("individual '{}' has no visits", self.id)));
        }
        if self.diagnosis_labels.len() != self.observations.len() {
            return Err(Error::Validation(format!(
                "individual '{}' has {} labels for {} visits",
                self.id,
                self.diagnosis_labels.len(),
                self.observations.len()
            )));
        }
        for o in &self.observations {
            o.validate(n_features)
                .map_err(|e| prefix_error(e, &format!("individual '{}'", self.id)))?;
        }
        for w in self.observations.windows(2) {
            if !(w[1].visit_time > w[0].visit_time) {
                return Err(Error::Validation(format!(
                    "individual '{}' visits not strictly ascending ({} then {})",
                    self.id, w[0].visit_time, w[1].visit_time
                )));
            }
        }
        Ok(())
    }
}

fn prefix_error(e: Error, context: &str) -> Error {
    match e {
        Error::Validation(m) => Error::Validation(format!("{context}: {m}")),
        Error::Schema(m) => Error::Schema(format!("{context}: {m}")),
        other => other,
    }
}

/// A validated longitudinal cohort. Construct through [`Cohort::new`] or
/// the loaders; every instance satisfies the data invariants.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cohort {
    feature_names: Vec<String>,
    feature_directions: Vec<Direction>,
    individuals: Vec<Individual>,
}

#[derive(Deserialize)]
struct RawCohort {
    feature_names: Vec<String>,
    feature_directions: Vec<Direction>,
    individuals: Vec<Individual>,
}

impl<'de> Deserialize<'de> for Cohort {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawCohort::deserialize(d)?;
        Cohort::new(raw.feature_names, raw.feature_directions, raw.individuals).map_err(serde::de::Error::custom)
    }
}

impl Cohort {
    pub fn new(
        feature_names: Vec<String>,
        feature_directions: Vec<Direction>,
        individuals: Vec<Individual>,
    ) -> Result<Self> {
        if feature_names.len() < 2 {
            return Err(Error::Schema(format!(
                "at least 2 features are required, got {}",
                feature_names.len()
            )));
        }
        if feature_directions.len() != feature_names.len() {
            return Err(Error::Schema(format!(
                "{} feature directions for {} features",
                feature_directions.len(),
                feature_names.len()
            )));
        }
        let n = feature_names.len();
        for ind in &individuals {
            ind.validate(n)?;
        }
        Ok(Cohort {
            feature_names,
            feature_directions,
            individuals,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_directions(&self) -> &[Direction] {
        &self.feature_directions
    }

    pub fn individuals(&self) -> &[Individual] {
        &self.individuals
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn n_missing_cells(&self) -> usize {
        self.individuals
            .iter()
            .flat_map(|i| &i.observations)
            .map(|o| o.missing_mask.iter().filter(|m| **m).count())
            .sum()
    }

    /// Cohort sharing this one's feature schema but holding `individuals`.
    pub fn with_individuals(&self, individuals: Vec<Individual>) -> Cohort {
        Cohort {
            feature_names: self.feature_names.clone(),
            feature_directions: self.feature_directions.clone(),
            individuals,
        }
    }

    /// Individuals with no missing cell at any visit.
    pub fn complete_subset(&self) -> Cohort {
        self.with_individuals(self.individuals.iter().filter(|i| i.is_complete()).cloned().collect())
    }

    /// Replaces the per-feature abnormal directions.
    pub fn with_directions(mut self, directions: Vec<Direction>) -> Result<Cohort> {
        if directions.len() != self.n_features() {
            return Err(Error::Schema(format!(
                "{} feature directions for {} features",
                directions.len(),
                self.n_features()
            )));
        }
        self.feature_directions = directions;
        Ok(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Json,
}

impl DataFormat {
    /// Guesses the format from a file extension (`.json` → JSON, otherwise CSV).
    pub fn from_path(path: &Path) -> DataFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => DataFormat::Json,
            _ => DataFormat::Csv,
        }
    }
}

impl FromStr for DataFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(DataFormat::Csv),
            "json" => Ok(DataFormat::Json),
            other => Err(format!("unknown data format '{other}'")),
        }
    }
}

const FIXED_COLUMNS: [&str; 3] = ["subject_id", "visit_time", "diagnosis"];

/// Loads a cohort. CSV files carry no direction information, so every
/// feature is taken as increasing unless named in `decreasing`; JSON files
/// carry their own directions and `decreasing` is applied on top.
pub fn load_cohort(path: &Path, format: DataFormat, decreasing: &[String]) -> Result<Cohort> {
    let cohort = match format {
        DataFormat::Json => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<Cohort>(&text).map_err(|e| {
                if e.is_data() {
                    Error::Validation(e.to_string())
                } else {
                    Error::Format {
                        row: e.line() as u64,
                        column: format!("char {}", e.column()),
                        message: e.to_string(),
                    }
                }
            })?
        }
        DataFormat::Csv => {
            let file = std::fs::File::open(path)?;
            read_cohort_csv(file)?
        }
    };
    apply_decreasing(cohort, decreasing)
}

fn apply_decreasing(cohort: Cohort, decreasing: &[String]) -> Result<Cohort> {
    if decreasing.is_empty() {
        return Ok(cohort);
    }
    let mut directions = cohort.feature_directions.clone();
    for name in decreasing {
        let idx = cohort
            .feature_index(name)
            .ok_or_else(|| Error::Schema(format!("unknown feature '{name}' in direction list")))?;
        directions[idx] = Direction::Decreasing;
    }
    cohort.with_directions(directions)
}

/// Parses the long-format CSV layout: one row per visit, rows of a subject
/// contiguous and ordered by visit time.
pub fn read_cohort_csv<R: std::io::Read>(reader: R) -> Result<Cohort> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_format_error)?.clone();
    for (i, expected) in FIXED_COLUMNS.iter().enumerate() {
        if headers.get(i) != Some(*expected) {
            return Err(Error::Schema(format!(
                "column {} must be '{expected}', found '{}'",
                i + 1,
                headers.get(i).unwrap_or("")
            )));
        }
    }
    let feature_names: Vec<String> = headers.iter().skip(3).map(str::to_string).collect();
    let n_features = feature_names.len();

    let mut individuals: Vec<Individual> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_format_error)?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != n_features + 3 {
            return Err(Error::Schema(format!(
                "row {row} has {} columns, header declares {}",
                record.len(),
                n_features + 3
            )));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(Error::Format {
                row,
                column: "subject_id".into(),
                message: "empty subject id".into(),
            });
        }
        let visit_time: f64 = record[1].parse().map_err(|_| Error::Format {
            row,
            column: "visit_time".into(),
            message: format!("'{}' is not a number", &record[1]),
        })?;
        let diagnosis: Diagnosis = record[2].parse().map_err(|m| Error::Format {
            row,
            column: "diagnosis".into(),
            message: m,
        })?;
        let mut values = Vec::with_capacity(n_features);
        for (f, cell) in record.iter().skip(3).enumerate() {
            if cell.is_empty() {
                values.push(None);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Format {
                    row,
                    column: feature_names[f].clone(),
                    message: format!("'{cell}' is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Format {
                        row,
                        column: feature_names[f].clone(),
                        message: format!("non-finite value '{cell}'"),
                    });
                }
                values.push(Some(v));
            }
        }
        let obs = Observation::new(&values, visit_time);
        match index.get(&id) {
            Some(&j) => {
                if j + 1 != individuals.len() {
                    return Err(Error::Validation(format!(
                        "rows for subject '{id}' are not contiguous (row {row})"
                    )));
                }
                individuals[j].observations.push(obs);
                individuals[j].diagnosis_labels.push(diagnosis);
            }
            None => {
                index.insert(id.clone(), individuals.len());
                individuals.push(Individual {
                    id,
                    observations: vec![obs],
                    diagnosis_labels: vec![diagnosis],
                });
            }
        }
    }
    Cohort::new(feature_names, vec![Direction::Increasing; n_features], individuals)
}

fn csv_format_error(e: csv::Error) -> Error {
    let row = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Format {
        row,
        column: String::new(),
        message: e.to_string(),
    }
}

pub fn write_cohort_csv<W: std::io::Write>(cohort: &Cohort, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = FIXED_COLUMNS.to_vec();
    header.extend(cohort.feature_names.iter().map(String::as_str));
    w.write_record(&header).map_err(std::io::Error::from)?;
    for ind in &cohort.individuals {
        for (obs, label) in ind.observations.iter().zip(&ind.diagnosis_labels) {
            let mut row = vec![ind.id.clone(), obs.visit_time.to_string(), label.to_string()];
            row.extend((0..obs.n_features()).map(|f| obs.get(f).map(|v| v.to_string()).unwrap_or_default()));
            w.write_record(&row).map_err(std::io::Error::from)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_cohort(cohort: &Cohort, path: &Path, format: DataFormat) -> Result<()> {
    match format {
        DataFormat::Csv => write_cohort_csv(cohort, std::fs::File::create(path)?),
        DataFormat::Json => {
            let text = serde_json::to_string_pretty(cohort)?;
            std::fs::write(path, text)?;
            Ok(())
        }
    }
}

/// A single cross-validation split.
#[derive(Clone, Debug)]
pub struct Fold {
    pub train: Cohort,
    pub test: Cohort,
}

/// Partitions individuals (never visits) into `k` folds. With `stratify`
/// the shuffled individuals are dealt per baseline diagnosis so that each
/// fold receives a similar label mix.
pub fn split_folds(cohort: &Cohort, k: usize, seed: u64, stratify: bool) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::Argument(format!("fold count must be >= 2, got {k}")));
    }
    if k > cohort.len() {
        return Err(Error::Argument(format!(
            "fold count {k} exceeds number of individuals {}",
            cohort.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..cohort.len()).collect();
    order.shuffle(&mut rng);
    if stratify {
        // stable sort keeps the shuffled order inside each stratum
        order.sort_by_key(|&j| cohort.individuals[j].baseline_label());
    }
    let mut assignment = vec![0usize; cohort.len()];
    for (pos, &j) in order.iter().enumerate() {
        assignment[j] = pos % k;
    }
    Ok((0..k)
        .map(|fold| {
            let (test, train): (Vec<_>, Vec<_>) = cohort
                .individuals
                .iter()
                .enumerate()
                .partition(|(j, _)| assignment[*j] == fold);
            Fold {
                train: cohort.with_individuals(train.into_iter().map(|(_, i)| i.clone()).collect()),
                test: cohort.with_individuals(test.into_iter().map(|(_, i)| i.clone()).collect()),
            }
        })
        .collect())
}

/// Hides `round(fraction × observed cells)` additional cells per individual,
/// chosen uniformly at random. The random order of candidate cells depends
/// only on `seed` and the individual's position, so for a fixed seed the
/// cells hidden at a smaller fraction are a subset of those hidden at a
/// larger one.
pub fn ablate_features(cohort: &Cohort, fraction: f64, seed: u64) -> Result<Cohort> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Argument(format!(
            "ablation fraction must lie in [0, 1], got {fraction}"
        )));
    }
    let individuals = cohort
        .individuals
        .iter()
        .enumerate()
        .map(|(j, ind)| {
            let mut ind = ind.clone();
            let mut cells: Vec<(usize, usize)> = ind
                .observations
                .iter()
                .enumerate()
                .flat_map(|(t, o)| {
                    (0..o.n_features())
                        .filter(move |&f| !o.missing_mask[f])
                        .map(move |f| (t, f))
                })
                .collect();
            let n_drop = (fraction * cells.len() as f64).round() as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            cells.shuffle(&mut rng);
            for &(t, f) in cells.iter().take(n_drop) {
                ind.observations[t].set_missing(f);
            }
            ind
        })
        .collect();
    Ok(cohort.with_individuals(individuals))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize, visits: usize) -> Cohort {
        let individuals = (0..n)
            .map(|j| Individual {
                id: format!("S{j:03}"),
                observations: (0..visits)
                    .map(|t| Observation::new(&[Some(j as f64), Some(t as f64 * 0.5), Some(1.25)], 12.0 * t as f64))
                    .collect(),
                diagnosis_labels: vec![if j % 2 == 0 { Diagnosis::CN } else { Diagnosis::MCI }; visits],
            })
            .collect();
        Cohort::new(
            vec!["A".into(), "B".into(), "ABETA".into()],
            vec![Direction::Increasing, Direction::Increasing, Direction::Decreasing],
            individuals,
        )
        .unwrap()
    }

    #[test]
    fn csv_minimal_subject() {
        let text = "subject_id,visit_time,diagnosis,A,B\nS1,0,CN,1.5,2\n";
        let c = read_cohort_csv(text.as_bytes()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.individuals()[0].n_visits(), 1);
        assert!(c.individuals()[0].observations[0].missing_mask.iter().all(|m| !m));
    }

    #[test]
    fn csv_empty_cell_is_missing() {
        let text = "subject_id,visit_time,diagnosis,TAU,ABETA\nS1,0,MCI,3.0,\nS1,12,AD,,1\n";
        let c = read_cohort_csv(text.as_bytes()).unwrap();
        let obs = &c.individuals()[0].observations;
        assert_eq!(obs[0].missing_mask, vec![false, true]);
        assert_eq!(obs[1].get(1), Some(1.0));
        assert_eq!(c.individuals()[0].diagnosis_labels, vec![Diagnosis::MCI, Diagnosis::AD]);
    }

    #[test]
    fn csv_all_missing_visit_is_valid() {
        let text = "subject_id,visit_time,diagnosis,A,B\nS1,0,NA,,\n";
        let c = read_cohort_csv(text.as_bytes()).unwrap();
        assert_eq!(c.individuals()[0].observations[0].n_observed(), 0);
    }

    #[test]
    fn csv_errors() {
        let bad_num = "subject_id,visit_time,diagnosis,A,B\nS1,0,CN,x,1\n";
        match read_cohort_csv(bad_num.as_bytes()) {
            Err(Error::Format { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "A");
            }
            other => panic!("expected format error, got {other:?}"),
        }
        let unsorted = "subject_id,visit_time,diagnosis,A,B\nS1,12,CN,1,1\nS1,0,CN,1,1\n";
        assert!(matches!(
            read_cohort_csv(unsorted.as_bytes()),
            Err(Error::Validation(_))
        ));
        let ragged = "subject_id,visit_time,diagnosis,A,B\nS1,0,CN,1\n";
        assert!(matches!(read_cohort_csv(ragged.as_bytes()), Err(Error::Schema(_))));
        let one_feature = "subject_id,visit_time,diagnosis,A\nS1,0,CN,1\n";
        assert!(matches!(read_cohort_csv(one_feature.as_bytes()), Err(Error::Schema(_))));
        let bad_header = "id,visit_time,diagnosis,A,B\n";
        assert!(matches!(read_cohort_csv(bad_header.as_bytes()), Err(Error::Schema(_))));
        let negative = "subject_id,visit_time,diagnosis,A,B\nS1,-1,CN,1,1\n";
        assert!(matches!(
            read_cohort_csv(negative.as_bytes()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn json_and_csv_round_trip() {
        let mut c = toy(4, 3);
        c = ablate_features(&c, 0.3, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let jp = dir.path().join("c.json");
        save_cohort(&c, &jp, DataFormat::Json).unwrap();
        assert_eq!(load_cohort(&jp, DataFormat::Json, &[]).unwrap(), c);
        let cp = dir.path().join("c.csv");
        save_cohort(&c, &cp, DataFormat::Csv).unwrap();
        let back = load_cohort(&cp, DataFormat::Csv, &["ABETA".to_string()]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn folds_partition_and_sizes() {
        let c = toy(468, 1);
        let folds = split_folds(&c, 5, 42, false).unwrap();
        assert_eq!(folds.len(), 5);
        let mut seen = std::collections::BTreeSet::new();
        for f in &folds {
            assert!(f.test.len() == 93 || f.test.len() == 94);
            assert_eq!(f.train.len() + f.test.len(), 468);
            for i in f.test.individuals() {
                assert!(seen.insert(i.id.clone()), "duplicate {}", i.id);
            }
        }
        assert_eq!(seen.len(), 468);
    }

    #[test]
    fn folds_leave_one_out_and_determinism() {
        let c = toy(10, 2);
        let loo = split_folds(&c, 10, 0, false).unwrap();
        assert!(loo.iter().all(|f| f.test.len() == 1));
        let a = split_folds(&c, 5, 7, false).unwrap();
        let b = split_folds(&c, 5, 7, false).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.test, y.test);
        }
        assert!(matches!(split_folds(&c, 11, 0, false), Err(Error::Argument(_))));
        assert!(matches!(split_folds(&c, 1, 0, false), Err(Error::Argument(_))));
    }

    #[test]
    fn stratified_folds_balance_labels() {
        let c = toy(20, 1);
        let folds = split_folds(&c, 5, 3, true).unwrap();
        for f in &folds {
            let cn = f
                .test
                .individuals()
                .iter()
                .filter(|i| i.baseline_label() == Diagnosis::CN)
                .count();
            assert_eq!(cn, 2);
        }
    }

    #[test]
    fn ablation_edge_cases() {
        let c = toy(3, 12);
        assert_eq!(ablate_features(&c, 0.0, 1).unwrap(), c);
        let all = ablate_features(&c, 1.0, 1).unwrap();
        assert_eq!(all.n_missing_cells(), 3 * 12 * 3);
        let half = ablate_features(&c, 0.5, 9).unwrap();
        for (a, b) in half.individuals().iter().zip(c.individuals()) {
            let before: usize = b.observations.iter().map(|o| o.n_observed()).sum();
            let after: usize = a.observations.iter().map(|o| o.n_observed()).sum();
            assert_eq!(before, 36);
            assert_eq!(before - after, 18);
        }
        assert!(ablate_features(&c, 1.5, 0).is_err());
    }
}
