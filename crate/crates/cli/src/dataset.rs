//! CSV datasets.
//!
//! A dataset has a header row with an `id` column, a `y` column of 0/1
//! labels, one `pred:<name>` column per predictor with scores in `[0, 1]`,
//! and one `group:<name>` column of 0/1 memberships per subpopulation.
//! Each row becomes one domain point. Rows are numbered from 1, not
//! counting the header.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use multical::{
    DomainPoint, FiniteDistribution, Group, LabeledSample, PredictionSpace, Predictor,
    PredictorClass, SubpopulationCollection,
};
use thiserror::Error;

pub const ID_COLUMN: &str = "id";
pub const LABEL_COLUMN: &str = "y";
pub const PRED_PREFIX: &str = "pred:";
pub const GROUP_PREFIX: &str = "group:";
/// Name of the implicit subpopulation used when a file has no group columns.
pub const ALL_GROUP: &str = "all";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read dataset: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("domain violation at row {row}, column `{column}`: {message}")]
    DomainViolation {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid header: {0}")]
    Header(String),

    #[error("{0}")]
    Model(#[from] multical::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub labels: Vec<u8>,
    pub predictors: Vec<(String, Vec<f64>)>,
    pub groups: Vec<(String, Vec<bool>)>,
}

enum Column {
    Id,
    Label,
    Pred(usize),
    Group(usize),
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let file = std::fs::File::open(path)?;
    read_dataset(file)
}

pub fn read_dataset(reader: impl Read) -> Result<Dataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_header_error)?.clone();

    let mut columns = Vec::with_capacity(header.len());
    let mut names = HashSet::new();
    let mut ds = Dataset {
        ids: Vec::new(),
        labels: Vec::new(),
        predictors: Vec::new(),
        groups: Vec::new(),
    };
    for name in header.iter() {
        if !names.insert(name.to_string()) {
            return Err(DatasetError::Header(format!(
                "column `{name}` appears twice"
            )));
        }
        let col = if name == ID_COLUMN {
            Column::Id
        } else if name == LABEL_COLUMN {
            Column::Label
        } else if let Some(p) = name.strip_prefix(PRED_PREFIX).filter(|p| !p.is_empty()) {
            ds.predictors.push((p.to_string(), Vec::new()));
            Column::Pred(ds.predictors.len() - 1)
        } else if let Some(g) = name.strip_prefix(GROUP_PREFIX).filter(|g| !g.is_empty()) {
            ds.groups.push((g.to_string(), Vec::new()));
            Column::Group(ds.groups.len() - 1)
        } else {
            return Err(DatasetError::Header(format!(
                "unrecognized column `{name}` (expected `id`, `y`, `pred:<name>` or `group:<name>`)"
            )));
        };
        columns.push(col);
    }
    for required in [ID_COLUMN, LABEL_COLUMN] {
        if !names.contains(required) {
            return Err(DatasetError::Header(format!("missing `{required}` column")));
        }
    }
    if ds.predictors.is_empty() {
        return Err(DatasetError::Header("no `pred:` columns".into()));
    }

    let mut seen_ids = HashSet::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DatasetError::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        for (field, (col, name)) in record.iter().zip(columns.iter().zip(header.iter())) {
            match *col {
                Column::Id => {
                    if !seen_ids.insert(field.to_string()) {
                        return Err(DatasetError::Parse {
                            row,
                            column: name.to_string(),
                            message: format!("duplicate id `{field}`"),
                        });
                    }
                    ds.ids.push(field.to_string());
                }
                Column::Label => ds.labels.push(parse_bit(field, row, name)?),
                Column::Pred(p) => {
                    let v: f64 = field.parse().map_err(|_| DatasetError::Parse {
                        row,
                        column: name.to_string(),
                        message: format!("`{field}` is not a number"),
                    })?;
                    if !(0.0..=1.0).contains(&v) {
                        return Err(DatasetError::DomainViolation {
                            row,
                            column: name.to_string(),
                            message: format!("prediction {field} outside [0, 1]"),
                        });
                    }
                    ds.predictors[p].1.push(v);
                }
                Column::Group(g) => ds.groups[g].1.push(parse_bit(field, row, name)? == 1),
            }
        }
    }
    if ds.ids.is_empty() {
        return Err(DatasetError::Header("dataset has no rows".into()));
    }
    if ds.groups.is_empty() {
        ds.groups
            .push((ALL_GROUP.to_string(), vec![true; ds.ids.len()]));
    }
    Ok(ds)
}

fn parse_bit(field: &str, row: usize, column: &str) -> Result<u8, DatasetError> {
    match field {
        "0" => Ok(0),
        "1" => Ok(1),
        _ => Err(DatasetError::DomainViolation {
            row,
            column: column.to_string(),
            message: format!("`{field}` is not 0 or 1"),
        }),
    }
}

fn csv_header_error(e: csv::Error) -> DatasetError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => DatasetError::Io(io),
        other => DatasetError::Header(format!("{other:?}")),
    }
}

/// How the prediction range is discretized.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionMode {
    /// Singleton cells, one per distinct prediction value in the data.
    FiniteY,
    /// Cells `[j·λ, (j+1)·λ)` with the last closed.
    ContinuousY,
}

/// In-memory model induced by a dataset.
#[derive(Clone, Debug)]
pub struct DatasetModel {
    pub space: PredictionSpace,
    pub class: PredictorClass,
    pub groups: SubpopulationCollection,
    /// Rows as draws.
    pub sample: LabeledSample,
    /// Uniform over rows.
    pub distribution: FiniteDistribution,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Distinct prediction values over all predictors, ascending.
    pub fn prediction_values(&self) -> Vec<f64> {
        let mut vs: Vec<f64> = self
            .predictors
            .iter()
            .flat_map(|(_, t)| t.iter().copied())
            .collect();
        vs.sort_by(f64::total_cmp);
        vs.dedup();
        vs
    }

    pub fn domain(&self) -> Vec<DomainPoint> {
        (0..self.len()).map(DomainPoint::from).collect()
    }

    pub fn to_model(
        &self,
        mode: PredictionMode,
        lambda: f64,
    ) -> Result<DatasetModel, DatasetError> {
        let n = self.len();
        let space = match mode {
            PredictionMode::FiniteY => PredictionSpace::finite(self.prediction_values())?,
            PredictionMode::ContinuousY => PredictionSpace::continuous(lambda)?,
        };
        let class = PredictorClass::new(
            self.predictors
                .iter()
                .map(|(name, table)| Predictor::new(name.clone(), table.clone(), &space))
                .collect::<multical::Result<Vec<_>>>()?,
        )?;
        let groups = SubpopulationCollection::new(
            self.groups
                .iter()
                .map(|(name, members)| {
                    let points = members
                        .iter()
                        .enumerate()
                        .filter(|(_, &m)| m)
                        .map(|(i, _)| DomainPoint::from(i));
                    Group::new(name.clone(), points, n)
                })
                .collect::<multical::Result<Vec<_>>>()?,
        )?;
        let sample = LabeledSample::new(
            self.labels
                .iter()
                .enumerate()
                .map(|(i, &y)| (DomainPoint::from(i), y))
                .collect(),
        )?;
        let distribution = FiniteDistribution::from_integer_weights(
            n,
            self.labels
                .iter()
                .enumerate()
                .map(|(i, &label)| (DomainPoint::from(i), label, 1)),
        )?;
        Ok(DatasetModel {
            space,
            class,
            groups,
            sample,
            distribution,
        })
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![ID_COLUMN.to_string(), LABEL_COLUMN.to_string()];
        header.extend(
            self.predictors
                .iter()
                .map(|(n, _)| format!("{PRED_PREFIX}{n}")),
        );
        header.extend(
            self.groups
                .iter()
                .map(|(n, _)| format!("{GROUP_PREFIX}{n}")),
        );
        w.write_record(&header).map_err(csv_write_error)?;
        for i in 0..self.len() {
            let mut rec = vec![self.ids[i].clone(), self.labels[i].to_string()];
            rec.extend(self.predictors.iter().map(|(_, t)| t[i].to_string()));
            rec.extend(self.groups.iter().map(|(_, m)| u8::from(m[i]).to_string()));
            w.write_record(&rec).map_err(csv_write_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_write_error(e: csv::Error) -> DatasetError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => DatasetError::Io(io),
        other => DatasetError::Header(format!("{other:?}")),
    }
}

/// Rows per unit of probability used by [`export_distribution`] by default.
pub const DEFAULT_RESOLUTION: u64 = 10_000;

/// Turns a distribution into a dataset: support entry `(x, y)` with
/// probability `p` becomes `round(p · resolution)` identical rows carrying
/// x's predictions and memberships. When every probability is a multiple
/// of `1 / resolution` the rows reproduce `D` exactly.
pub fn export_distribution(
    distribution: &FiniteDistribution,
    class: &PredictorClass,
    groups: &SubpopulationCollection,
    resolution: u64,
) -> Result<Dataset, DatasetError> {
    if resolution == 0 {
        return Err(DatasetError::Header("resolution must be positive".into()));
    }
    let mut ds = Dataset {
        ids: Vec::new(),
        labels: Vec::new(),
        predictors: class
            .iter()
            .map(|h| (h.name().to_string(), Vec::new()))
            .collect(),
        groups: groups
            .iter()
            .map(|g| (g.name().to_string(), Vec::new()))
            .collect(),
    };
    for e in distribution.support() {
        let copies = (e.prob * resolution as f64).round() as u64;
        for k in 0..copies {
            ds.ids.push(format!("{}-y{}-{}", e.point, e.label, k));
            ds.labels.push(e.label);
            for ((_, t), h) in ds.predictors.iter_mut().zip(class.iter()) {
                t.push(h.predict(e.point));
            }
            for ((_, m), g) in ds.groups.iter_mut().zip(groups.iter()) {
                m.push(g.contains(e.point));
            }
        }
    }
    if ds.ids.is_empty() {
        return Err(DatasetError::Header(
            "resolution too coarse: no rows exported".into(),
        ));
    }
    Ok(ds)
}
