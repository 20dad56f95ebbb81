//! Windowed samples, squared-error loss, minibatch Adam with global-norm
//! clipping and early stopping, and Nash–Sutcliffe evaluation.

use std::time::Instant;

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::dataio::{StandardizedBasin, Standardizer};
use crate::ealstm::{backward, forward, EaLstmParams};
use crate::numcore::SeededRng;
use crate::{DateRange, Error, Result};

/// One sequence-to-one training example.
///
/// The window is rows `end + 1 − L ..= end` of the basin's standardized
/// forcing; the target is that basin's standardized discharge on day `end`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub basin: usize,
    pub end: usize,
    pub target: f64,
    pub date: NaiveDate,
}

impl Sample {
    pub fn window<'a>(&self, basins: &'a [StandardizedBasin], lookback: usize) -> &'a [f64] {
        basins[self.basin]
            .forcing
            .row_block(self.end + 1 - lookback, self.end + 1)
    }
}

/// Samples for every day in `range` that has at least `L − 1` preceding
/// days, in chronological order. `basin_index` is stored on each sample.
pub fn make_windows(
    basin: &StandardizedBasin,
    basin_index: usize,
    lookback: usize,
    range: &DateRange,
) -> Result<Vec<Sample>> {
    if lookback == 0 {
        return Err(Error::Contract("lookback must be at least 1".into()));
    }
    let (Some(a), Some(b)) = (basin.index_of(range.start), basin.index_of(range.end)) else {
        return Err(Error::Contract(format!(
            "range {}..{} is outside basin {} record",
            range.start, range.end, basin.id
        )));
    };
    let target = basin.target.as_ref().ok_or_else(|| {
        Error::Contract(format!("basin {} has no standardized discharge", basin.id))
    })?;
    Ok((a.max(lookback - 1)..=b)
        .map(|end| Sample {
            basin: basin_index,
            end,
            target: target[end],
            date: basin.date(end),
        })
        .collect())
}

/// `((ŷ − y)², 2(ŷ − y))`.
pub fn mse_loss(yhat: f64, y: f64) -> (f64, f64) {
    let r = yhat - y;
    (r * r, 2.0 * r)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub hidden: usize,
    pub lookback: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub clip_norm: f64,
    pub seed: u64,
    pub train_range: DateRange,
    pub valid_range: DateRange,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden_size", self.hidden),
            ("lookback", self.lookback),
            ("batch_size", self.batch_size),
            ("patience", self.patience),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::config(
                "learning_rate",
                "must be a non-negative number",
            ));
        }
        if !(self.clip_norm.is_finite() && self.clip_norm > 0.0) {
            return Err(Error::config("clip_norm", "must be positive"));
        }
        if self.train_range.overlaps(&self.valid_range) {
            return Err(Error::config(
                "valid_start",
                "validation range overlaps the training range",
            ));
        }
        Ok(())
    }
}

/// Adam with β₁ = 0.9, β₂ = 0.999, ε = 1e-8 over a flat parameter view.
pub struct Adam {
    pub learning_rate: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPSILON: f64 = 1e-8;

    pub fn new(learning_rate: f64, num_values: usize) -> Self {
        Self {
            learning_rate,
            step: 0,
            m: vec![0.0; num_values],
            v: vec![0.0; num_values],
        }
    }

    pub fn step(&mut self, params: &mut EaLstmParams, grads: &EaLstmParams) {
        self.step += 1;
        let bc1 = 1.0 - Self::BETA1.powi(self.step as i32);
        let bc2 = 1.0 - Self::BETA2.powi(self.step as i32);
        let mut k = 0;
        for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
            for (pv, gv) in p.iter_mut().zip(g) {
                let m = Self::BETA1 * self.m[k] + (1.0 - Self::BETA1) * gv;
                let v = Self::BETA2 * self.v[k] + (1.0 - Self::BETA2) * gv * gv;
                self.m[k] = m;
                self.v[k] = v;
                *pv -= self.learning_rate * (m / bc1) / ((v / bc2).sqrt() + Self::EPSILON);
                k += 1;
            }
        }
    }
}

pub fn global_norm(g: &EaLstmParams) -> f64 {
    g.tensors()
        .iter()
        .flat_map(|t| t.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Rescales `g` so its global norm is at most `max_norm`; returns the
/// pre-clip norm.
pub fn clip_global_norm(g: &mut EaLstmParams, max_norm: f64) -> f64 {
    let norm = global_norm(g);
    if norm > max_norm {
        let scale = max_norm / norm;
        for t in g.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= scale);
        }
    }
    norm
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Mean pre-clip gradient norm over the epoch's batches (0 for epoch 0).
    pub grad_norm: f64,
    /// Seconds since training started. Not part of the CSV.
    pub wall_seconds: f64,
}

impl EpochLog {
    pub const CSV_HEADER: &'static str = "epoch,train_loss,val_loss,grad_norm";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.epoch, self.train_loss, self.val_loss, self.grad_norm
        )
    }
}

pub fn log_csv(log: &[EpochLog]) -> String {
    let mut out = String::from(EpochLog::CSV_HEADER);
    out.push('\n');
    for row in log {
        out.push_str(&row.csv_row());
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: EaLstmParams,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
}

/// Mean squared error over `samples`, evaluated in parallel and reduced in
/// sample order.
pub fn mean_loss(
    params: &EaLstmParams,
    basins: &[StandardizedBasin],
    samples: &[Sample],
    lookback: usize,
) -> Result<f64> {
    let losses = samples
        .par_iter()
        .map(|s| {
            forward(params, &basins[s.basin].x_s, s.window(basins, lookback))
                .map(|(yhat, _)| mse_loss(yhat, s.target).0)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Loss and summed gradient over one batch. Per-sample work runs in
/// parallel; the reduction is sequential in batch order so the result does
/// not depend on the thread count.
fn batch_gradient(
    params: &EaLstmParams,
    basins: &[StandardizedBasin],
    batch: &[&Sample],
    lookback: usize,
) -> Result<(f64, EaLstmParams)> {
    let per_sample = batch
        .par_iter()
        .map(|s| {
            let (yhat, cache) = forward(params, &basins[s.basin].x_s, s.window(basins, lookback))?;
            let (loss, d_yhat) = mse_loss(yhat, s.target);
            Ok((loss, backward(&cache, params, d_yhat)?.d_params))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total =
        EaLstmParams::zeros(params.hidden_size(), params.n_static(), params.n_dynamic());
    let mut loss = 0.0;
    let scale = 1.0 / batch.len() as f64;
    for (l, g) in &per_sample {
        loss += l;
        total.add_scaled(g, scale);
    }
    Ok((loss * scale, total))
}

/// Trains from `init` on the pooled windows of `basins`.
///
/// Epoch 0 of the log evaluates the initial parameters. The returned
/// parameters are those of the epoch with the lowest validation loss
/// (earliest on ties).
pub fn train_from(
    cfg: &TrainConfig,
    basins: &[StandardizedBasin],
    init: EaLstmParams,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if basins.is_empty() {
        return Err(Error::Contract("no training basins".into()));
    }
    let mut train = Vec::new();
    let mut valid = Vec::new();
    for (k, b) in basins.iter().enumerate() {
        train.extend(make_windows(b, k, cfg.lookback, &cfg.train_range)?);
        valid.extend(make_windows(b, k, cfg.lookback, &cfg.valid_range)?);
    }
    if train.is_empty() || valid.is_empty() {
        return Err(Error::Contract(
            "training and validation ranges must both yield windows".into(),
        ));
    }

    let clock = Instant::now();
    let mut params = init;
    let fault = |epoch, batch| {
        move |e: Error| Error::TrainingFault {
            epoch,
            batch,
            source: Box::new(e),
        }
    };
    let mut log = vec![EpochLog {
        epoch: 0,
        train_loss: mean_loss(&params, basins, &train, cfg.lookback).map_err(fault(0, 0))?,
        val_loss: mean_loss(&params, basins, &valid, cfg.lookback).map_err(fault(0, 0))?,
        grad_norm: 0.0,
        wall_seconds: clock.elapsed().as_secs_f64(),
    }];
    let mut best = (log[0].val_loss, 0usize, params.clone());
    let mut adam = Adam::new(cfg.learning_rate, params.num_values());
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        SeededRng::derived(cfg.seed, epoch as u64).shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut norm_sum = 0.0;
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Sample> = chunk.iter().map(|&k| &train[k]).collect();
            let (loss, mut grad) =
                batch_gradient(&params, basins, &batch, cfg.lookback).map_err(fault(epoch, b))?;
            let norm = clip_global_norm(&mut grad, cfg.clip_norm);
            if !norm.is_finite() {
                return Err(fault(epoch, b)(Error::Contract(
                    "non-finite gradient norm".into(),
                )));
            }
            adam.step(&mut params, &grad);
            loss_sum += loss * batch.len() as f64;
            norm_sum += norm;
            batches += 1;
        }
        let val_loss =
            mean_loss(&params, basins, &valid, cfg.lookback).map_err(fault(epoch, batches))?;
        log.push(EpochLog {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_loss,
            grad_norm: norm_sum / batches as f64,
            wall_seconds: clock.elapsed().as_secs_f64(),
        });
        log::info!(
            "epoch {epoch}: train {:.5} val {val_loss:.5}",
            loss_sum / train.len() as f64
        );
        if val_loss < best.0 {
            best = (val_loss, epoch, params.clone());
        } else if epoch - best.1 >= cfg.patience {
            log::info!("early stop after {epoch} epochs (best {})", best.1);
            break;
        }
    }
    Ok(TrainOutcome {
        params: best.2,
        best_epoch: best.1,
        log,
    })
}

/// [`train_from`] with [`EaLstmParams::init`] under `cfg.seed`.
pub fn train(cfg: &TrainConfig, basins: &[StandardizedBasin]) -> Result<TrainOutcome> {
    let n_s = basins.first().map_or(0, |b| b.x_s.len());
    let n_d = basins.first().map_or(0, |b| b.forcing.cols());
    train_from(
        cfg,
        basins,
        EaLstmParams::init(cfg.hidden, n_s, n_d, cfg.seed),
    )
}

/// `1 − Σ(ŷ − y)² / Σ(y − ȳ)²`.
pub fn nse(predicted: &[f64], observed: &[f64]) -> Result<f64> {
    if predicted.len() != observed.len() || observed.is_empty() {
        return Err(Error::Contract(
            "NSE needs equally long, non-empty series".into(),
        ));
    }
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let sse: f64 = predicted
        .iter()
        .zip(observed)
        .map(|(p, o)| (p - o).powi(2))
        .sum();
    let sst: f64 = observed.iter().map(|o| (o - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(Error::Degenerate {
            what: "NSE".into(),
            reason: "observed series is constant".into(),
        });
    }
    Ok(1.0 - sse / sst)
}

/// De-standardized daily predictions for every day in `range` with a full
/// lookback window, paired with the observed discharge.
pub fn predict_range(
    params: &EaLstmParams,
    standardizer: &Standardizer,
    basin: &StandardizedBasin,
    observed: &[f64],
    lookback: usize,
    range: &DateRange,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (Some(a), Some(b)) = (basin.index_of(range.start), basin.index_of(range.end)) else {
        return Err(Error::Contract(format!(
            "range outside basin {} record",
            basin.id
        )));
    };
    let days: Vec<usize> = (a.max(lookback - 1)..=b).collect();
    let preds = days
        .par_iter()
        .map(|&end| {
            let window = basin.forcing.row_block(end + 1 - lookback, end + 1);
            let (z, _) = forward(params, &basin.x_s, window).map_err(|e| Error::DayFault {
                basin: basin.id.clone(),
                date: basin.date(end),
                source: Box::new(e),
            })?;
            standardizer.destandardize_discharge(&basin.id, z)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((preds, days.iter().map(|&d| observed[d]).collect()))
}

/// NSE of de-standardized predictions over `range`.
pub fn evaluate_nse(
    params: &EaLstmParams,
    standardizer: &Standardizer,
    basin: &StandardizedBasin,
    observed: &[f64],
    lookback: usize,
    range: &DateRange,
) -> Result<f64> {
    let (pred, obs) = predict_range(params, standardizer, basin, observed, lookback, range)?;
    nse(&pred, &obs)
}
