//! Model checkpoint: parameters, shapes, feature names and standardizer
//! statistics in one line-oriented text file.
//!
//! ```text
//! hydrosense-checkpoint 1
//! hidden_size <H>
//! n_static <n_s>
//! n_dynamic <n_d>
//! lookback <L>
//! static_feature <name> <group> <mean> <std>      (n_s lines, catalog order)
//! dynamic_feature <name> <mean> <std>             (n_d lines)
//! discharge <basin_id> <mean> <std>               (one per training basin)
//! tensor <name> <rows> <cols>                     (13 tensors, fixed order)
//! <row values>                                    (rows lines)
//! end
//! ```
//!
//! Tensors follow [`TENSOR_NAMES`]; vectors are stored as one row and
//! `head_b` as a 1 × 1 tensor. Reals use Rust's shortest round-trip
//! formatting, so save → load is bit-exact. Names may not contain
//! whitespace.

use std::fmt::Write as _;
use std::path::Path;

use crate::dataio::{ColumnStats, FeatureCatalog, FeatureEntry, Standardizer};
use crate::ealstm::{EaLstmParams, TENSOR_NAMES};
use crate::{Error, Result};

pub const MAGIC: &str = "hydrosense-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: EaLstmParams,
    pub lookback: usize,
    pub catalog: FeatureCatalog,
    pub standardizer: Standardizer,
}

fn tensor_shape(p: &EaLstmParams, k: usize) -> (usize, usize) {
    let h = p.hidden_size();
    match TENSOR_NAMES[k] {
        "w_i" => (h, p.n_static()),
        "w_f" | "w_g" | "w_o" => (h, p.n_dynamic()),
        "u_f" | "u_g" | "u_o" => (h, h),
        "head_b" => (1, 1),
        _ => (1, h),
    }
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.chars().any(char::is_whitespace) {
        return Err(Error::Checkpoint(format!(
            "name `{name}` is empty or contains whitespace"
        )));
    }
    Ok(())
}

impl Checkpoint {
    pub fn new(
        params: EaLstmParams,
        lookback: usize,
        catalog: FeatureCatalog,
        standardizer: Standardizer,
    ) -> Result<Self> {
        params.validate()?;
        let ck = Self {
            params,
            lookback,
            catalog,
            standardizer,
        };
        ck.check_consistency()?;
        Ok(ck)
    }

    fn check_consistency(&self) -> Result<()> {
        let p = &self.params;
        if self.lookback == 0 {
            return Err(Error::Checkpoint("lookback must be positive".into()));
        }
        if self.catalog.len() != p.n_static()
            || self.standardizer.static_stats.len() != p.n_static()
        {
            return Err(Error::Checkpoint(
                "static feature count does not match parameters".into(),
            ));
        }
        if self.standardizer.dynamic_stats.len() != p.n_dynamic() {
            return Err(Error::Checkpoint(
                "dynamic feature count does not match parameters".into(),
            ));
        }
        for (e, s) in self
            .catalog
            .entries()
            .iter()
            .zip(&self.standardizer.static_stats)
        {
            if e.name != s.name {
                return Err(Error::Checkpoint(format!(
                    "catalog feature `{}` does not match standardizer column `{}`",
                    e.name, s.name
                )));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> Result<String> {
        let p = &self.params;
        let mut out = String::new();
        writeln!(out, "{MAGIC} {FORMAT_VERSION}").unwrap();
        writeln!(out, "hidden_size {}", p.hidden_size()).unwrap();
        writeln!(out, "n_static {}", p.n_static()).unwrap();
        writeln!(out, "n_dynamic {}", p.n_dynamic()).unwrap();
        writeln!(out, "lookback {}", self.lookback).unwrap();
        for (e, s) in self
            .catalog
            .entries()
            .iter()
            .zip(&self.standardizer.static_stats)
        {
            check_name(&e.name)?;
            writeln!(
                out,
                "static_feature {} {} {:?} {:?}",
                e.name, e.group, s.mean, s.std
            )
            .unwrap();
        }
        for s in &self.standardizer.dynamic_stats {
            check_name(&s.name)?;
            writeln!(out, "dynamic_feature {} {:?} {:?}", s.name, s.mean, s.std).unwrap();
        }
        for s in &self.standardizer.discharge_stats {
            check_name(&s.name)?;
            writeln!(out, "discharge {} {:?} {:?}", s.name, s.mean, s.std).unwrap();
        }
        for (k, t) in p.tensors().iter().enumerate() {
            let (rows, cols) = tensor_shape(p, k);
            writeln!(out, "tensor {} {rows} {cols}", TENSOR_NAMES[k]).unwrap();
            for r in 0..rows {
                let line: Vec<String> = t[r * cols..(r + 1) * cols]
                    .iter()
                    .map(|v| format!("{v:?}"))
                    .collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
        out.push_str("end\n");
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
        let err = |line: usize, msg: String| Error::Checkpoint(format!("line {line}: {msg}"));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| {
                Error::Checkpoint(format!("unexpected end of file, expected {what}"))
            })
        };

        let (n, header) = next("header")?;
        match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            [MAGIC, v] if *v == FORMAT_VERSION.to_string() => {}
            [MAGIC, v] => return Err(err(n, format!("unsupported format version {v}"))),
            _ => return Err(err(n, "not a hydrosense checkpoint".into())),
        }
        let mut field = |key: &str| -> Result<usize> {
            let (n, l) = next(key)?;
            match l.split_whitespace().collect::<Vec<_>>().as_slice() {
                [k, v] if *k == key => v.parse().map_err(|_| err(n, format!("invalid {key}"))),
                _ => Err(err(n, format!("expected `{key} <value>`"))),
            }
        };
        let hidden = field("hidden_size")?;
        let n_static = field("n_static")?;
        let n_dynamic = field("n_dynamic")?;
        let lookback = field("lookback")?;

        let num = |n: usize, s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| err(n, format!("invalid number `{s}`")))
        };
        let mut entries = Vec::new();
        let mut static_stats = Vec::new();
        let mut dynamic_stats = Vec::new();
        let mut discharge_stats = Vec::new();
        let mut params = EaLstmParams::zeros(hidden, n_static, n_dynamic);
        let mut tensor_index = 0;
        let mut finished = false;

        while let Some((n, line)) = lines.next() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                ["static_feature", name, group, mean, std] => {
                    let group = group.parse().map_err(|e: String| err(n, e))?;
                    entries.push(FeatureEntry::new(*name, group));
                    static_stats.push(ColumnStats {
                        name: name.to_string(),
                        mean: num(n, mean)?,
                        std: num(n, std)?,
                    });
                }
                ["dynamic_feature", name, mean, std] => dynamic_stats.push(ColumnStats {
                    name: name.to_string(),
                    mean: num(n, mean)?,
                    std: num(n, std)?,
                }),
                ["discharge", id, mean, std] => discharge_stats.push(ColumnStats {
                    name: id.to_string(),
                    mean: num(n, mean)?,
                    std: num(n, std)?,
                }),
                ["tensor", name, rows, cols] => {
                    if tensor_index >= TENSOR_NAMES.len() || *name != TENSOR_NAMES[tensor_index] {
                        return Err(err(n, format!("unexpected tensor `{name}`")));
                    }
                    let shape = tensor_shape(&params, tensor_index);
                    if (rows.parse::<usize>().ok(), cols.parse::<usize>().ok())
                        != (Some(shape.0), Some(shape.1))
                    {
                        return Err(err(
                            n,
                            format!(
                                "tensor `{name}` has shape {rows}x{cols}, expected {}x{}",
                                shape.0, shape.1
                            ),
                        ));
                    }
                    let mut values = Vec::with_capacity(shape.0 * shape.1);
                    for _ in 0..shape.0 {
                        let (n, row) = lines.next().ok_or_else(|| {
                            Error::Checkpoint(format!("tensor `{name}` is truncated"))
                        })?;
                        let vals = row
                            .split_whitespace()
                            .map(|s| num(n, s))
                            .collect::<Result<Vec<_>>>()?;
                        if vals.len() != shape.1 {
                            return Err(err(n, format!("expected {} values", shape.1)));
                        }
                        values.extend(vals);
                    }
                    params.tensors_mut()[tensor_index].copy_from_slice(&values);
                    tensor_index += 1;
                }
                ["end"] => {
                    finished = true;
                    break;
                }
                [] => {}
                _ => return Err(err(n, format!("unrecognized line `{line}`"))),
            }
        }
        if !finished {
            return Err(Error::Checkpoint("missing `end` marker".into()));
        }
        if tensor_index != TENSOR_NAMES.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {tensor_index}",
                TENSOR_NAMES.len()
            )));
        }
        let catalog = FeatureCatalog::new(entries)?;
        Self::new(
            params,
            lookback,
            catalog,
            Standardizer {
                static_stats,
                dynamic_stats,
                discharge_stats,
            },
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::load(path, None, e.to_string()))?;
        Self::from_text(&text).map_err(|e| Error::load(path, None, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::FeatureGroup;
    use crate::numcore::SeededRng;

    fn sample() -> Checkpoint {
        let mut params = EaLstmParams::init(4, 2, 3, 5);
        let mut rng = SeededRng::new(1);
        for t in params.tensors_mut() {
            for v in t.iter_mut() {
                *v += rng.normal() * 1e-7;
            }
        }
        params.head_b = -1.0 / 3.0;
        let stats = |names: &[&str]| {
            names
                .iter()
                .enumerate()
                .map(|(k, n)| ColumnStats {
                    name: n.to_string(),
                    mean: 0.1 * k as f64 + 1e-300,
                    std: 1.0 / 7.0 + k as f64,
                })
                .collect::<Vec<_>>()
        };
        Checkpoint::new(
            params,
            30,
            FeatureCatalog::new(vec![
                FeatureEntry::new("aridity", FeatureGroup::Climate),
                FeatureEntry::new("slope_mean", FeatureGroup::Topography),
            ])
            .unwrap(),
            Standardizer {
                static_stats: stats(&["aridity", "slope_mean"]),
                dynamic_stats: stats(&["prcp", "tmax", "tmin"]),
                discharge_stats: stats(&["b1", "b2"]),
            },
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let text = ck.to_text().unwrap();
        let back = Checkpoint::from_text(&text).unwrap();
        assert_eq!(back, ck);
        let bits = |c: &Checkpoint| {
            c.params
                .to_flat()
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&back), bits(&ck));
        assert_eq!(back.to_text().unwrap(), text);
    }

    #[test]
    fn rejects_corruption() {
        let text = sample().to_text().unwrap();
        assert!(Checkpoint::from_text(
            &text.replace("hydrosense-checkpoint 1", "hydrosense-checkpoint 9")
        )
        .is_err());
        assert!(Checkpoint::from_text(&text.replace("end\n", "")).is_err());
        assert!(Checkpoint::from_text(&text.replace("tensor u_f 4 4", "tensor u_f 4 3")).is_err());
        let truncated: String = text.lines().take(20).collect::<Vec<_>>().join("\n");
        assert!(Checkpoint::from_text(&truncated).is_err());
    }

    #[test]
    fn rejects_whitespace_names() {
        let mut ck = sample();
        ck.standardizer.discharge_stats[0].name = "bad id".into();
        assert!(ck.to_text().is_err());
    }
}
