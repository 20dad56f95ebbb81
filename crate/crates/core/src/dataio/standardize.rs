use chrono::NaiveDate;

use super::{BasinRecord, FeatureCatalog};
use crate::numcore::Matrix;
use crate::{DateRange, Error, Result};

/// Mean and population standard deviation (ddof = 0) of one column.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnStats {
    pub name: String,
    pub mean: f64,
    pub std: f64,
}

impl ColumnStats {
    fn fit(name: &str, values: impl Iterator<Item = f64> + Clone) -> Result<Self> {
        let n = values.clone().count();
        if n == 0 {
            return Err(Error::Contract(format!("no values for column `{name}`")));
        }
        let mean = values.clone().sum::<f64>() / n as f64;
        let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        // A constant column's two-pass deviation is pure rounding noise.
        if !(std > 1e-12 * mean.abs().max(1.0)) {
            return Err(Error::ZeroVariance(name.to_string()));
        }
        Ok(Self {
            name: name.to_string(),
            mean,
            std,
        })
    }

    #[inline]
    pub fn forward(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    #[inline]
    pub fn inverse(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Normalization statistics fitted on the training pool.
///
/// Static features use one value per training basin; dynamic features use
/// every training-period day of every training basin; discharge is
/// normalized per basin.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub static_stats: Vec<ColumnStats>,
    pub dynamic_stats: Vec<ColumnStats>,
    /// `name` holds the basin id.
    pub discharge_stats: Vec<ColumnStats>,
}

/// A basin with model-ready inputs.
#[derive(Clone, Debug)]
pub struct StandardizedBasin {
    pub id: String,
    pub start: NaiveDate,
    pub x_s: Vec<f64>,
    pub forcing: Matrix,
    /// Per-basin standardized discharge, when statistics exist for the basin.
    pub target: Option<Vec<f64>>,
}

impl StandardizedBasin {
    pub fn len(&self) -> usize {
        self.forcing.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.forcing.rows() == 0
    }

    pub fn date(&self, k: usize) -> NaiveDate {
        self.start + chrono::Days::new(k as u64)
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let k = (date - self.start).num_days();
        (k >= 0 && (k as usize) < self.len()).then_some(k as usize)
    }
}

impl Standardizer {
    /// Fits statistics over `basins`, restricted to `days` when given.
    pub fn fit(
        basins: &[BasinRecord],
        catalog: &FeatureCatalog,
        days: Option<&DateRange>,
    ) -> Result<Self> {
        let first = basins
            .first()
            .ok_or_else(|| Error::Contract("standardizer needs at least one basin".into()))?;
        let ranges = basins
            .iter()
            .map(|b| match days {
                Some(r) => b.index_range(r),
                None => Ok(0..b.len()),
            })
            .collect::<Result<Vec<_>>>()?;

        let static_stats = catalog
            .names()
            .enumerate()
            .map(|(k, name)| {
                ColumnStats::fit(name, basins.iter().map(move |b| b.static_features()[k]))
            })
            .collect::<Result<Vec<_>>>()?;

        let dynamic_stats = first
            .dynamic_names()
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let values = basins
                    .iter()
                    .zip(&ranges)
                    .flat_map(move |(b, r)| r.clone().map(move |t| b.forcing().get(t, j)));
                ColumnStats::fit(name, values)
            })
            .collect::<Result<Vec<_>>>()?;

        let discharge_stats = basins
            .iter()
            .zip(&ranges)
            .map(|(b, r)| {
                ColumnStats::fit(b.id(), b.discharge()[r.clone()].iter().copied()).map_err(|e| {
                    match e {
                        Error::ZeroVariance(id) => {
                            Error::ZeroVariance(format!("discharge of basin {id}"))
                        }
                        other => other,
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            static_stats,
            dynamic_stats,
            discharge_stats,
        })
    }

    pub fn discharge_stats_for(&self, id: &str) -> Option<&ColumnStats> {
        self.discharge_stats.iter().find(|s| s.name == id)
    }

    pub fn standardize_static(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.static_stats.len() {
            return Err(Error::Shape {
                context: "standardize static features",
                expected: self.static_stats.len(),
                actual: raw.len(),
            });
        }
        Ok(raw
            .iter()
            .zip(&self.static_stats)
            .map(|(v, s)| s.forward(*v))
            .collect())
    }

    pub fn inverse_static(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.static_stats)
            .map(|(v, s)| s.inverse(*v))
            .collect()
    }

    pub fn standardize_forcing(&self, raw: &Matrix) -> Result<Matrix> {
        if raw.cols() != self.dynamic_stats.len() {
            return Err(Error::Shape {
                context: "standardize forcing",
                expected: self.dynamic_stats.len(),
                actual: raw.cols(),
            });
        }
        let n = self.dynamic_stats.len();
        let data = raw
            .as_slice()
            .iter()
            .enumerate()
            .map(|(k, v)| self.dynamic_stats[k % n].forward(*v))
            .collect();
        Matrix::from_vec(raw.rows(), raw.cols(), data)
    }

    pub fn inverse_forcing(&self, z: &Matrix) -> Matrix {
        let n = self.dynamic_stats.len();
        let data = z
            .as_slice()
            .iter()
            .enumerate()
            .map(|(k, v)| self.dynamic_stats[k % n].inverse(*v))
            .collect();
        Matrix::from_vec(z.rows(), z.cols(), data).expect("shape preserved")
    }

    /// Standardizes a basin. Discharge is standardized only if the basin was
    /// part of the fitting pool.
    pub fn apply(&self, basin: &BasinRecord) -> Result<StandardizedBasin> {
        let names_match = basin
            .dynamic_names()
            .iter()
            .zip(&self.dynamic_stats)
            .all(|(a, s)| *a == s.name);
        if !names_match || basin.dynamic_names().len() != self.dynamic_stats.len() {
            return Err(Error::Contract(format!(
                "basin {} forcing columns {:?} do not match the model's {:?}",
                basin.id(),
                basin.dynamic_names(),
                self.dynamic_stats
                    .iter()
                    .map(|s| &s.name)
                    .collect::<Vec<_>>()
            )));
        }
        let target = self
            .discharge_stats_for(basin.id())
            .map(|s| basin.discharge().iter().map(|q| s.forward(*q)).collect());
        Ok(StandardizedBasin {
            id: basin.id().to_string(),
            start: basin.start(),
            x_s: self.standardize_static(basin.static_features())?,
            forcing: self.standardize_forcing(basin.forcing())?,
            target,
        })
    }

    pub fn destandardize_discharge(&self, id: &str, z: f64) -> Result<f64> {
        self.discharge_stats_for(id)
            .map(|s| s.inverse(z))
            .ok_or_else(|| Error::Contract(format!("no discharge statistics for basin {id}")))
    }
}
