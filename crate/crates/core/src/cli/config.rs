//! Flat `key = value` run configuration.
//!
//! Every key is optional. Unknown keys and ill-typed values are rejected
//! with an error naming the key.
//!
//! | key | default |
//! |---|---|
//! | `seed` | 42 |
//! | `basins`, `days`, `start_date` | 8, 1200, 2000-01-01 |
//! | `dominant_high`, `dominant_low` | `"slope_mean"`, none (`""` disables) |
//! | `dominant_strength` | 1.0 |
//! | `quickflow_fraction`, `recession_rate`, `warmup_days` | 0.45, 0.05, 365 |
//! | `hidden_size`, `lookback`, `batch_size` | 32, 365, 256 |
//! | `learning_rate`, `max_epochs`, `patience`, `clip_norm` | 0.005, 30, 10, 1.0 |
//! | `train_start`, `train_end`, `valid_start`, `valid_end` | last quarter of the record validates |
//! | `sensitivity_start`, `sensitivity_end` | every day with a full lookback window |
//!
//! Dates may be TOML dates or `"YYYY-MM-DD"` strings.

use std::path::Path;

use chrono::{Days, NaiveDate};

use crate::dataio::SynthConfig;
use crate::training::TrainConfig;
use crate::{DateRange, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub synth: SynthConfig,
    pub hidden_size: usize,
    pub lookback: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub clip_norm: f64,
    pub train_start: Option<NaiveDate>,
    pub train_end: Option<NaiveDate>,
    pub valid_start: Option<NaiveDate>,
    pub valid_end: Option<NaiveDate>,
    pub sensitivity_start: Option<NaiveDate>,
    pub sensitivity_end: Option<NaiveDate>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            synth: SynthConfig::default(),
            hidden_size: 32,
            lookback: 365,
            batch_size: 256,
            learning_rate: 5e-3,
            max_epochs: 30,
            patience: 10,
            clip_norm: 1.0,
            train_start: None,
            train_end: None,
            valid_start: None,
            valid_end: None,
            sensitivity_start: None,
            sensitivity_end: None,
        }
    }
}

fn as_usize(key: &str, v: &toml::Value) -> Result<usize> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(Error::config(key, "expected a non-negative integer")),
    }
}

fn as_f64(key: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(x) => Ok(*x),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::config(key, "expected a number")),
    }
}

fn as_str<'a>(key: &str, v: &'a toml::Value) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| Error::config(key, "expected a string"))
}

fn as_date(key: &str, v: &toml::Value) -> Result<NaiveDate> {
    let text = match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Datetime(d) if d.date.is_some() && d.time.is_none() => d.to_string(),
        _ => return Err(Error::config(key, "expected a date YYYY-MM-DD")),
    };
    text.parse()
        .map_err(|_| Error::config(key, format!("invalid date `{text}`")))
}

fn optional_name(key: &str, v: &toml::Value) -> Result<Option<String>> {
    let s = as_str(key, v)?;
    Ok((!s.is_empty()).then(|| s.to_string()))
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::parse(text, Path::new("<config>"))
    }

    fn parse(text: &str, origin: &Path) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::load(origin, None, e.message()))?;
        let mut cfg = Self::default();
        for (key, v) in &table {
            let k = key.as_str();
            match k {
                "seed" => cfg.seed = as_usize(k, v)? as u64,
                "basins" => cfg.synth.basins = as_usize(k, v)?,
                "days" => cfg.synth.days = as_usize(k, v)?,
                "start_date" => cfg.synth.start = as_date(k, v)?,
                "dominant_high" => cfg.synth.dominant_high = optional_name(k, v)?,
                "dominant_low" => cfg.synth.dominant_low = optional_name(k, v)?,
                "dominant_strength" => cfg.synth.dominant_strength = as_f64(k, v)?,
                "quickflow_fraction" => cfg.synth.quickflow_fraction = as_f64(k, v)?,
                "recession_rate" => cfg.synth.recession_rate = as_f64(k, v)?,
                "warmup_days" => cfg.synth.warmup_days = as_usize(k, v)?,
                "hidden_size" => cfg.hidden_size = as_usize(k, v)?,
                "lookback" => cfg.lookback = as_usize(k, v)?,
                "batch_size" => cfg.batch_size = as_usize(k, v)?,
                "learning_rate" => cfg.learning_rate = as_f64(k, v)?,
                "max_epochs" => cfg.max_epochs = as_usize(k, v)?,
                "patience" => cfg.patience = as_usize(k, v)?,
                "clip_norm" => cfg.clip_norm = as_f64(k, v)?,
                "train_start" => cfg.train_start = Some(as_date(k, v)?),
                "train_end" => cfg.train_end = Some(as_date(k, v)?),
                "valid_start" => cfg.valid_start = Some(as_date(k, v)?),
                "valid_end" => cfg.valid_end = Some(as_date(k, v)?),
                "sensitivity_start" => cfg.sensitivity_start = Some(as_date(k, v)?),
                "sensitivity_end" => cfg.sensitivity_end = Some(as_date(k, v)?),
                _ => return Err(Error::config(k, "unknown key")),
            }
        }
        cfg.synth.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::load(path, None, e.to_string()))?;
        Self::parse(&text, path)
    }

    /// Training and validation ranges. Without explicit dates the last
    /// quarter of `record` validates and the rest trains.
    pub fn split(&self, record: &DateRange) -> Result<(DateRange, DateRange)> {
        let given = [
            ("train_start", self.train_start),
            ("train_end", self.train_end),
            ("valid_start", self.valid_start),
            ("valid_end", self.valid_end),
        ];
        if given.iter().all(|(_, d)| d.is_none()) {
            let n = record.days();
            let n_valid = n / 4;
            if n_valid == 0 || n_valid == n {
                return Err(Error::Contract(format!(
                    "record of {n} days is too short to split"
                )));
            }
            let train_end = record.start + Days::new((n - n_valid - 1) as u64);
            let valid_start = train_end + Days::new(1);
            return Ok((
                DateRange::new(record.start, train_end)?,
                DateRange::new(valid_start, record.end)?,
            ));
        }
        let mut dates = [record.start; 4];
        for (slot, (field, d)) in dates.iter_mut().zip(given) {
            *slot =
                d.ok_or_else(|| Error::config(field, "required when any train/valid date is set"))?;
        }
        let train = DateRange::new(dates[0], dates[1])
            .map_err(|_| Error::config("train_end", "precedes train_start"))?;
        let valid = DateRange::new(dates[2], dates[3])
            .map_err(|_| Error::config("valid_end", "precedes valid_start"))?;
        Ok((train, valid))
    }

    pub fn sensitivity_range(&self) -> Result<Option<DateRange>> {
        match (self.sensitivity_start, self.sensitivity_end) {
            (None, None) => Ok(None),
            (Some(a), Some(b)) => DateRange::new(a, b)
                .map(Some)
                .map_err(|_| Error::config("sensitivity_end", "precedes sensitivity_start")),
            (None, Some(_)) => Err(Error::config(
                "sensitivity_start",
                "required with sensitivity_end",
            )),
            (Some(_), None) => Err(Error::config(
                "sensitivity_end",
                "required with sensitivity_start",
            )),
        }
    }

    pub fn train_config(
        &self,
        train_range: DateRange,
        valid_range: DateRange,
    ) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            hidden: self.hidden_size,
            lookback: self.lookback,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            max_epochs: self.max_epochs,
            patience: self.patience,
            clip_norm: self.clip_norm,
            seed: self.seed,
            train_range,
            valid_range,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn parses_known_keys() {
        let cfg = RunConfig::from_toml_str(
            "seed = 7\nbasins = 4\nstart_date = 2001-02-03\nvalid_start = \"2002-01-01\"\n\
             learning_rate = 1\ndominant_high = \"\"\ndominant_low = \"aridity\"\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.synth.basins, 4);
        assert_eq!(cfg.synth.start, d("2001-02-03"));
        assert_eq!(cfg.valid_start, Some(d("2002-01-01")));
        assert_eq!(cfg.learning_rate, 1.0);
        assert_eq!(cfg.synth.dominant_high, None);
        assert_eq!(cfg.synth.dominant_low.as_deref(), Some("aridity"));
    }

    #[test]
    fn errors_name_the_field() {
        for (text, field) in [
            ("hidden_size = -3", "hidden_size"),
            ("lookback = \"long\"", "lookback"),
            ("unknown_thing = 1", "unknown_thing"),
            ("train_start = \"2001-13-01\"", "train_start"),
            ("dominant_high = \"nope\"", "dominant_high"),
            ("dominant_strength = 2.0", "dominant_strength"),
        ] {
            let msg = RunConfig::from_toml_str(text).unwrap_err().to_string();
            assert!(msg.contains(&format!("`{field}`")), "{text}: {msg}");
        }
    }

    #[test]
    fn default_split_holds_out_the_last_quarter() {
        let record = DateRange::new(d("2000-01-01"), d("2000-04-09")).unwrap();
        assert_eq!(record.days(), 100);
        let (train, valid) = RunConfig::default().split(&record).unwrap();
        assert_eq!(train.days(), 75);
        assert_eq!(valid.days(), 25);
        assert_eq!(valid.end, record.end);
        assert!(!train.overlaps(&valid));
    }

    #[test]
    fn partial_split_names_missing_field() {
        let cfg = RunConfig {
            train_start: Some(d("2000-01-01")),
            ..RunConfig::default()
        };
        let record = DateRange::new(d("2000-01-01"), d("2001-01-01")).unwrap();
        let msg = cfg.split(&record).unwrap_err().to_string();
        assert!(msg.contains("`train_end`"), "{msg}");
    }
}
