//! Gradient-based sensitivity of simulated streamflow to static features
//! during low-flow and high-flow periods.
//!
//! Per basin:
//!
//! 1. 5th / 95th percentiles of observed discharge over the analysis days
//!    (type-7: linear interpolation at 0-based position `(D − 1)·p`);
//! 2. low days `q < q05`, high days `q > q95` (strict);
//! 3. for each such day, the gradient of that day's prediction w.r.t. the
//!    standardized static features;
//! 4. mean absolute gradient per feature over each regime's days;
//! 5. min–max normalization to `[0, 1]` within the basin;
//! 6. descending ranking, ties to the lower catalog index.
//!
//! The cohort summary averages normalized vectors across non-degenerate
//! basins. Degenerate basins (constant discharge, empty regime, all-equal
//! sensitivities) are recorded as exclusions.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::dataio::{
    BasinRecord, FeatureCatalog, FeatureEntry, FeatureGroup, StandardizedBasin, Standardizer,
};
use crate::ealstm::{backward, forward, EaLstmParams};
use crate::numcore::Matrix;
use crate::{DateRange, Error, Result};

/// Minimum series length for percentile-based flow periods.
pub const MIN_PERCENTILE_DAYS: usize = 40;
pub const LOW_FLOW_PERCENTILE: f64 = 0.05;
pub const HIGH_FLOW_PERCENTILE: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regime {
    Low,
    High,
}

impl Regime {
    pub const BOTH: [Regime; 2] = [Regime::Low, Regime::High];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Low => "low",
            Regime::High => "high",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "low" => Ok(Regime::Low),
            "high" => Ok(Regime::High),
            other => Err(format!("unknown regime `{other}`")),
        }
    }
}

/// Type-7 empirical quantile of an ascending slice.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// `(q05, q95)` of a discharge series.
pub fn flow_percentiles(discharge: &[f64]) -> Result<(f64, f64)> {
    if discharge.len() < MIN_PERCENTILE_DAYS {
        return Err(Error::Degenerate {
            what: "discharge series".into(),
            reason: format!(
                "{} days is too short for flow percentiles (need {MIN_PERCENTILE_DAYS})",
                discharge.len()
            ),
        });
    }
    if discharge.iter().any(|q| !q.is_finite()) {
        return Err(Error::Contract(
            "discharge contains non-finite values".into(),
        ));
    }
    let mut sorted = discharge.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q05 = quantile_type7(&sorted, LOW_FLOW_PERCENTILE);
    let q95 = quantile_type7(&sorted, HIGH_FLOW_PERCENTILE);
    if q05 >= q95 {
        return Err(Error::Degenerate {
            what: "discharge series".into(),
            reason: format!("q05 = q95 = {q05}"),
        });
    }
    Ok((q05, q95))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowPeriodMask {
    pub q05: f64,
    pub q95: f64,
    pub low: Vec<bool>,
    pub high: Vec<bool>,
}

impl FlowPeriodMask {
    pub fn get(&self, regime: Regime) -> &[bool] {
        match regime {
            Regime::Low => &self.low,
            Regime::High => &self.high,
        }
    }
}

pub fn flow_masks(discharge: &[f64], q05: f64, q95: f64) -> FlowPeriodMask {
    FlowPeriodMask {
        q05,
        q95,
        low: discharge.iter().map(|q| *q < q05).collect(),
        high: discharge.iter().map(|q| *q > q95).collect(),
    }
}

/// Gradient of the prediction for each day in `days` (record indices) w.r.t.
/// the standardized static features; one row per day.
pub fn static_gradients_for_days(
    params: &EaLstmParams,
    basin: &StandardizedBasin,
    lookback: usize,
    days: &[usize],
) -> Result<Matrix> {
    let n_s = params.n_static();
    if basin.x_s.len() != n_s {
        return Err(Error::Shape {
            context: "static gradients x_s",
            expected: n_s,
            actual: basin.x_s.len(),
        });
    }
    let rows = days
        .par_iter()
        .map(|&end| {
            if end + 1 < lookback || end >= basin.len() {
                return Err(Error::Contract(format!(
                    "day {} of basin {} has no full lookback window",
                    basin.date(end.min(basin.len().saturating_sub(1))),
                    basin.id
                )));
            }
            let window = basin.forcing.row_block(end + 1 - lookback, end + 1);
            let grads = forward(params, &basin.x_s, window)
                .and_then(|(_, cache)| backward(&cache, params, 1.0))
                .map_err(|e| Error::DayFault {
                    basin: basin.id.clone(),
                    date: basin.date(end),
                    source: Box::new(e),
                })?;
            Ok(grads.d_xs)
        })
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_vec(days.len(), n_s, rows.concat())
}

/// Daily static-feature gradients over `range`, which must admit a full
/// lookback window on its first day.
pub fn daily_static_gradients(
    params: &EaLstmParams,
    basin: &StandardizedBasin,
    lookback: usize,
    range: &DateRange,
) -> Result<Matrix> {
    let days = analysis_days(basin, lookback, range)?;
    static_gradients_for_days(params, basin, lookback, &days.collect::<Vec<_>>())
}

fn analysis_days(
    basin: &StandardizedBasin,
    lookback: usize,
    range: &DateRange,
) -> Result<std::ops::RangeInclusive<usize>> {
    let (Some(a), Some(b)) = (basin.index_of(range.start), basin.index_of(range.end)) else {
        return Err(Error::Contract(format!(
            "range {}..{} is outside basin {} record",
            range.start, range.end, basin.id
        )));
    };
    if a + 1 < lookback {
        return Err(Error::Contract(format!(
            "range start {} leaves less than {lookback} days of lookback in basin {}",
            range.start, basin.id
        )));
    }
    Ok(a..=b)
}

/// Mean absolute value of each column over the masked rows.
pub fn aggregate_sensitivity(grads: &Matrix, mask: &[bool]) -> Result<Vec<f64>> {
    if mask.len() != grads.rows() {
        return Err(Error::Shape {
            context: "aggregate_sensitivity mask",
            expected: grads.rows(),
            actual: mask.len(),
        });
    }
    let mut out = vec![0.0; grads.cols()];
    let mut count = 0usize;
    for (d, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
        for (o, g) in out.iter_mut().zip(grads.row(d)) {
            *o += g.abs();
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::Degenerate {
            what: "flow period".into(),
            reason: "no days selected".into(),
        });
    }
    out.iter_mut().for_each(|v| *v /= count as f64);
    Ok(out)
}

/// Min–max scaling to `[0, 1]`. Returns all zeros and `true` when every
/// entry is equal.
pub fn normalize_unit(v: &[f64]) -> (Vec<f64>, bool) {
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if v.is_empty() || !(max > min) {
        return (vec![0.0; v.len()], true);
    }
    let span = max - min;
    (v.iter().map(|x| (x - min) / span).collect(), false)
}

/// Indices sorted by descending value, lower index first on ties.
pub fn rank_descending(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ranking {
    pub ranking: Vec<usize>,
    pub top_feature: String,
    pub top_group: FeatureGroup,
}

pub fn rank_and_group(normalized: &[f64], catalog: &FeatureCatalog) -> Result<Ranking> {
    if normalized.len() != catalog.len() || catalog.is_empty() {
        return Err(Error::Shape {
            context: "rank_and_group",
            expected: catalog.len(),
            actual: normalized.len(),
        });
    }
    let ranking = rank_descending(normalized);
    let top = catalog.entry(ranking[0]);
    Ok(Ranking {
        ranking,
        top_feature: top.name.clone(),
        top_group: top.group,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityReport {
    pub basin_id: String,
    pub regime: Regime,
    pub raw_mean_abs_grad: Vec<f64>,
    pub normalized: Vec<f64>,
    pub ranking: Vec<usize>,
    pub top_feature: String,
    pub top_group: FeatureGroup,
    /// Every raw value was equal; excluded from cohort statistics.
    pub degenerate: bool,
    /// Number of days in the regime.
    pub days: usize,
}

impl SensitivityReport {
    pub fn from_raw(
        basin_id: &str,
        regime: Regime,
        raw: Vec<f64>,
        days: usize,
        catalog: &FeatureCatalog,
    ) -> Result<Self> {
        let (normalized, degenerate) = normalize_unit(&raw);
        let r = rank_and_group(&normalized, catalog)?;
        Ok(Self {
            basin_id: basin_id.to_string(),
            regime,
            raw_mean_abs_grad: raw,
            normalized,
            ranking: r.ranking,
            top_feature: r.top_feature,
            top_group: r.top_group,
            degenerate,
            days,
        })
    }

    /// 1-based rank of each feature.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.ranking.len()];
        for (pos, &k) in self.ranking.iter().enumerate() {
            ranks[k] = pos + 1;
        }
        ranks
    }
}

/// A basin (or basin-regime) left out of cohort statistics, with the reason.
#[derive(Clone, Debug, PartialEq)]
pub struct Exclusion {
    pub basin_id: String,
    pub regime: Option<Regime>,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegimeSummary {
    pub regime: Regime,
    pub basins: usize,
    pub mean_normalized: Vec<f64>,
    pub ranking: Vec<usize>,
    pub top_group_counts: BTreeMap<FeatureGroup, usize>,
}

impl RegimeSummary {
    pub fn top(&self, n: usize) -> &[usize] {
        &self.ranking[..n.min(self.ranking.len())]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CohortSummary {
    pub regimes: Vec<RegimeSummary>,
}

impl CohortSummary {
    pub fn regime(&self, regime: Regime) -> Option<&RegimeSummary> {
        self.regimes.iter().find(|r| r.regime == regime)
    }
}

/// Averages normalized vectors of non-degenerate reports per regime.
pub fn summarize(reports: &[SensitivityReport], catalog: &FeatureCatalog) -> CohortSummary {
    let regimes = Regime::BOTH
        .iter()
        .filter_map(|&regime| {
            let used: Vec<&SensitivityReport> = reports
                .iter()
                .filter(|r| r.regime == regime && !r.degenerate)
                .collect();
            if used.is_empty() {
                return None;
            }
            let mut mean = vec![0.0; catalog.len()];
            for r in &used {
                for (m, v) in mean.iter_mut().zip(&r.normalized) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= used.len() as f64);
            let mut counts = BTreeMap::new();
            for r in &used {
                *counts.entry(r.top_group).or_insert(0) += 1;
            }
            Some(RegimeSummary {
                regime,
                basins: used.len(),
                ranking: rank_descending(&mean),
                mean_normalized: mean,
                top_group_counts: counts,
            })
        })
        .collect();
    CohortSummary { regimes }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutput {
    pub reports: Vec<SensitivityReport>,
    pub exclusions: Vec<Exclusion>,
    pub summary: CohortSummary,
}

/// Runs the full analysis for one basin.
///
/// `range = None` analyses every day with a full lookback window.
pub fn basin_sensitivity(
    params: &EaLstmParams,
    standardizer: &Standardizer,
    basin: &BasinRecord,
    lookback: usize,
    range: Option<&DateRange>,
    catalog: &FeatureCatalog,
) -> Result<(Vec<SensitivityReport>, Vec<Exclusion>)> {
    let z = standardizer.apply(basin)?;
    let days = match range {
        Some(r) => analysis_days(&z, lookback, r)?,
        None => {
            if basin.len() < lookback {
                return Err(Error::Contract(format!(
                    "basin {} is shorter than the lookback",
                    basin.id()
                )));
            }
            lookback - 1..=basin.len() - 1
        }
    };
    let offset = *days.start();
    let observed = &basin.discharge()[days.clone()];
    let exclude = |regime: Option<Regime>, reason: String| Exclusion {
        basin_id: basin.id().to_string(),
        regime,
        reason,
    };
    let (q05, q95) = match flow_percentiles(observed) {
        Ok(q) => q,
        Err(e @ Error::Degenerate { .. }) => {
            return Ok((Vec::new(), vec![exclude(None, e.to_string())]))
        }
        Err(e) => return Err(e),
    };
    let mask = flow_masks(observed, q05, q95);

    // Only regime days need gradients.
    let selected: Vec<usize> = (0..observed.len())
        .filter(|&d| mask.low[d] || mask.high[d])
        .collect();
    let record_days: Vec<usize> = selected.iter().map(|d| d + offset).collect();
    let grads = static_gradients_for_days(params, &z, lookback, &record_days)?;

    let mut reports = Vec::new();
    let mut exclusions = Vec::new();
    for regime in Regime::BOTH {
        let regime_mask: Vec<bool> = selected.iter().map(|&d| mask.get(regime)[d]).collect();
        let count = regime_mask.iter().filter(|m| **m).count();
        match aggregate_sensitivity(&grads, &regime_mask) {
            Ok(raw) => {
                let report = SensitivityReport::from_raw(basin.id(), regime, raw, count, catalog)?;
                if report.degenerate {
                    exclusions.push(exclude(Some(regime), "all sensitivities equal".into()));
                }
                reports.push(report);
            }
            Err(e @ Error::Degenerate { .. }) => {
                exclusions.push(exclude(Some(regime), e.to_string()))
            }
            Err(e) => return Err(e),
        }
    }
    Ok((reports, exclusions))
}

/// Per-basin reports (low then high), exclusions and the cohort summary.
pub fn run_pipeline(
    params: &EaLstmParams,
    standardizer: &Standardizer,
    basins: &[BasinRecord],
    lookback: usize,
    range: Option<&DateRange>,
    catalog: &FeatureCatalog,
) -> Result<PipelineOutput> {
    if catalog.len() != params.n_static() {
        return Err(Error::Shape {
            context: "catalog vs model static inputs",
            expected: params.n_static(),
            actual: catalog.len(),
        });
    }
    let mut reports = Vec::new();
    let mut exclusions = Vec::new();
    for basin in basins {
        let (r, e) = basin_sensitivity(params, standardizer, basin, lookback, range, catalog)?;
        reports.extend(r);
        exclusions.extend(e);
    }
    let summary = summarize(&reports, catalog);
    Ok(PipelineOutput {
        reports,
        exclusions,
        summary,
    })
}

pub const REPORT_HEADER: &str =
    "basin_id,regime,feature,group,raw_mean_abs_grad,normalized,rank,degenerate";

/// One row per (basin, regime, feature).
pub fn report_csv(reports: &[SensitivityReport], catalog: &FeatureCatalog) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for r in reports {
        let ranks = r.ranks();
        for (k, e) in catalog.entries().iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.basin_id,
                r.regime,
                e.name,
                e.group,
                r.raw_mean_abs_grad[k],
                r.normalized[k],
                ranks[k],
                u8::from(r.degenerate)
            )
            .unwrap();
        }
    }
    out
}

/// Cohort mean normalized sensitivity, ordered by regime then rank.
pub fn summary_csv(summary: &CohortSummary, catalog: &FeatureCatalog) -> String {
    let mut out = String::from("regime,feature,group,cohort_mean_normalized,rank,basins\n");
    for s in &summary.regimes {
        for (pos, &k) in s.ranking.iter().enumerate() {
            let e = catalog.entry(k);
            writeln!(
                out,
                "{},{},{},{},{},{}",
                s.regime,
                e.name,
                e.group,
                s.mean_normalized[k],
                pos + 1,
                s.basins
            )
            .unwrap();
        }
    }
    out
}

/// Top feature and group per non-degenerate basin and regime.
pub fn top_group_csv(reports: &[SensitivityReport]) -> String {
    let mut out = String::from("basin_id,regime,top_feature,top_group\n");
    for r in reports.iter().filter(|r| !r.degenerate) {
        writeln!(
            out,
            "{},{},{},{}",
            r.basin_id, r.regime, r.top_feature, r.top_group
        )
        .unwrap();
    }
    out
}

pub fn exclusions_csv(exclusions: &[Exclusion]) -> String {
    let mut out = String::from("basin_id,regime,reason\n");
    for e in exclusions {
        let regime = e.regime.map_or("all", Regime::as_str);
        writeln!(
            out,
            "{},{},\"{}\"",
            e.basin_id,
            regime,
            e.reason.replace('"', "'")
        )
        .unwrap();
    }
    out
}

/// Reads a report CSV back into reports and the catalog it was written with.
pub fn read_report_csv(path: &Path) -> Result<(Vec<SensitivityReport>, FeatureCatalog)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::load(path, None, e.to_string()))?;
    struct Row {
        basin: String,
        regime: Regime,
        feature: String,
        group: FeatureGroup,
        raw: f64,
        degenerate: bool,
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::load(path, None, e.to_string()))?;
        let line = rec.position().map(|p| p.line() as usize);
        let field = |k: usize| {
            rec.get(k)
                .ok_or_else(|| Error::load(path, line, "too few fields"))
        };
        let num = |k: usize| -> Result<f64> {
            field(k)?
                .parse()
                .map_err(|_| Error::load(path, line, format!("invalid number in column {}", k + 1)))
        };
        rows.push(Row {
            basin: field(0)?.to_string(),
            regime: field(1)?
                .parse()
                .map_err(|e: String| Error::load(path, line, e))?,
            feature: field(2)?.to_string(),
            group: field(3)?
                .parse()
                .map_err(|e: String| Error::load(path, line, e))?,
            raw: num(4)?,
            degenerate: field(7)? == "1",
        });
    }
    if rows.is_empty() {
        return Err(Error::load(path, None, "report contains no rows"));
    }
    // The first block defines the catalog.
    let first_key = (&rows[0].basin, rows[0].regime);
    let catalog = FeatureCatalog::new(
        rows.iter()
            .take_while(|r| (&r.basin, r.regime) == first_key)
            .map(|r| FeatureEntry::new(&r.feature, r.group))
            .collect(),
    )?;
    let n = catalog.len();
    if rows.len() % n != 0 {
        return Err(Error::load(
            path,
            None,
            "rows do not form complete feature blocks",
        ));
    }
    let mut reports = Vec::new();
    for block in rows.chunks(n) {
        for (r, e) in block.iter().zip(catalog.entries()) {
            if r.feature != e.name || r.basin != block[0].basin || r.regime != block[0].regime {
                return Err(Error::load(
                    path,
                    None,
                    format!("inconsistent block for basin {}", block[0].basin),
                ));
            }
        }
        let raw = block.iter().map(|r| r.raw).collect();
        let mut report =
            SensitivityReport::from_raw(&block[0].basin, block[0].regime, raw, 0, &catalog)?;
        report.degenerate |= block[0].degenerate;
        reports.push(report);
    }
    Ok((reports, catalog))
}

/// Plain-text top-`n` listing per regime and top-group distribution.
pub fn render_text_summary(summary: &CohortSummary, catalog: &FeatureCatalog, n: usize) -> String {
    let mut out = String::new();
    for s in &summary.regimes {
        writeln!(out, "{} flow ({} basins)", s.regime, s.basins).unwrap();
        for (pos, &k) in s.top(n).iter().enumerate() {
            let e = catalog.entry(k);
            writeln!(
                out,
                "  {}. {} [{}] {:.4}",
                pos + 1,
                e.name,
                e.group,
                s.mean_normalized[k]
            )
            .unwrap();
        }
        out.push_str("  top group per basin:");
        for g in FeatureGroup::ALL {
            write!(
                out,
                " {}={}",
                g,
                s.top_group_counts.get(&g).copied().unwrap_or(0)
            )
            .unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn catalog(groups: &[FeatureGroup]) -> FeatureCatalog {
        FeatureCatalog::new(
            groups
                .iter()
                .enumerate()
                .map(|(k, g)| FeatureEntry::new(format!("f{k}"), *g))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn percentiles_of_one_to_hundred() {
        let q: Vec<f64> = (1..=100).map(f64::from).collect();
        let (q05, q95) = flow_percentiles(&q).unwrap();
        assert_eq!(q05, 5.95);
        assert_eq!(q95, 95.05);
        let m = flow_masks(&q, q05, q95);
        assert_eq!(m.low.iter().filter(|b| **b).count(), 5);
        assert_eq!(m.high.iter().filter(|b| **b).count(), 5);
    }

    #[test]
    fn percentile_errors() {
        assert!(matches!(
            flow_percentiles(&[1.0; 39]),
            Err(Error::Degenerate { .. })
        ));
        assert!(matches!(
            flow_percentiles(&[2.5; 60]),
            Err(Error::Degenerate { .. })
        ));
    }

    #[test]
    fn ties_at_threshold_are_not_low() {
        let m = flow_masks(&[3.0; 10], 3.0, 7.0);
        assert!(m.low.iter().all(|b| !b));
    }

    #[test]
    fn aggregate_examples() {
        let g = Matrix::from_rows(&[vec![1.0, -2.0], vec![-3.0, 4.0], vec![0.5, -0.5]]).unwrap();
        assert_eq!(
            aggregate_sensitivity(&g, &[false, true, false]).unwrap(),
            vec![3.0, 4.0]
        );
        // (|1| + |−3| + |0.5|)/3 = 1.5, (|−2| + |4| + |−0.5|)/3 = 6.5/3
        let all = aggregate_sensitivity(&g, &[true, true, true]).unwrap();
        assert_eq!(all[0], 1.5);
        assert!((all[1] - 6.5 / 3.0).abs() < 1e-15);
        let z = Matrix::zeros(3, 2);
        assert_eq!(
            aggregate_sensitivity(&z, &[true, false, true]).unwrap(),
            vec![0.0, 0.0]
        );
        assert!(matches!(
            aggregate_sensitivity(&g, &[false; 3]),
            Err(Error::Degenerate { .. })
        ));
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize_unit(&[2.0, 4.0, 6.0]),
            (vec![0.0, 0.5, 1.0], false)
        );
        assert_eq!(normalize_unit(&[3.0, 3.0]), (vec![0.0, 0.0], true));
    }

    #[test]
    fn rank_and_group_examples() {
        use FeatureGroup::*;
        let cat = catalog(&[Soil, Climate, Vegetation]);
        let r = rank_and_group(&[0.0, 1.0, 0.5], &cat).unwrap();
        assert_eq!(r.top_feature, "f1");
        assert_eq!(r.top_group, Climate);
        assert_eq!(r.ranking, vec![1, 2, 0]);
        let r = rank_and_group(&[1.0, 0.0, 1.0], &cat).unwrap();
        assert_eq!(r.ranking, vec![0, 2, 1]);
    }

    #[test]
    fn relabeling_permutes_ranking() {
        use FeatureGroup::*;
        let cat = catalog(&[Soil, Climate, Vegetation, Topography]);
        let v = [0.2, 0.9, 1.0, 0.0];
        let perm = [3, 1, 0, 2];
        let cat_p =
            FeatureCatalog::new(perm.iter().map(|&k| cat.entry(k).clone()).collect()).unwrap();
        let v_p: Vec<f64> = perm.iter().map(|&k| v[k]).collect();
        let a = rank_and_group(&v, &cat).unwrap();
        let b = rank_and_group(&v_p, &cat_p).unwrap();
        assert_eq!(a.top_feature, b.top_feature);
        let names_a: Vec<&str> = a
            .ranking
            .iter()
            .map(|&k| cat.entry(k).name.as_str())
            .collect();
        let names_b: Vec<&str> = b
            .ranking
            .iter()
            .map(|&k| cat_p.entry(k).name.as_str())
            .collect();
        assert_eq!(names_a, names_b);
    }

    #[test]
    fn singleton_cohort_equals_basin() {
        use FeatureGroup::*;
        let cat = catalog(&[Soil, Climate, Vegetation]);
        let r =
            SensitivityReport::from_raw("a", Regime::High, vec![0.3, 0.1, 0.7], 5, &cat).unwrap();
        let s = summarize(std::slice::from_ref(&r), &cat);
        let high = s.regime(Regime::High).unwrap();
        assert_eq!(high.mean_normalized, r.normalized);
        assert_eq!(high.ranking, r.ranking);
        assert!(s.regime(Regime::Low).is_none());
    }

    #[test]
    fn report_csv_round_trip() {
        use FeatureGroup::*;
        let cat = catalog(&[Soil, Climate, Vegetation]);
        let reports = vec![
            SensitivityReport::from_raw("a", Regime::Low, vec![0.3, 0.1, 0.7], 5, &cat).unwrap(),
            SensitivityReport::from_raw("a", Regime::High, vec![0.2, 0.2, 0.2], 5, &cat).unwrap(),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(&path, report_csv(&reports, &cat)).unwrap();
        let (back, cat2) = read_report_csv(&path).unwrap();
        assert_eq!(cat2, cat);
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].normalized, reports[0].normalized);
        assert!(back[1].degenerate);
    }

    proptest! {
        #[test]
        fn normalization_contract(v in prop::collection::vec(0.0f64..10.0, 2..12)) {
            let (n, degenerate) = normalize_unit(&v);
            if degenerate {
                prop_assert!(n.iter().all(|x| *x == 0.0));
            } else {
                prop_assert!(n.iter().all(|x| (0.0..=1.0).contains(x)));
                prop_assert_eq!(n.iter().copied().fold(f64::MIN, f64::max), 1.0);
                prop_assert_eq!(rank_descending(&n)[0], rank_descending(&v)[0]);
            }
        }

        #[test]
        fn ranking_is_scale_invariant(
            v in prop::collection::vec(0.0f64..10.0, 2..12),
            lambda in 1e-3f64..1e3,
        ) {
            let scaled: Vec<f64> = v.iter().map(|x| x * lambda).collect();
            let (a, _) = normalize_unit(&v);
            let (b, _) = normalize_unit(&scaled);
            prop_assert_eq!(rank_descending(&v), rank_descending(&scaled));
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn masks_are_disjoint_and_small(q in prop::collection::vec(0.0f64..50.0, 100..400)) {
            let (q05, q95) = flow_percentiles(&q).unwrap();
            prop_assert!(q05 >= q.iter().copied().fold(f64::MAX, f64::min));
            prop_assert!(q95 <= q.iter().copied().fold(f64::MIN, f64::max));
            let m = flow_masks(&q, q05, q95);
            prop_assert!(m.low.iter().zip(&m.high).all(|(a, b)| !(a & b)));
            let d = q.len() as f64;
            prop_assert!(m.low.iter().filter(|b| **b).count() as f64 / d <= 0.06);
            prop_assert!(m.high.iter().filter(|b| **b).count() as f64 / d <= 0.06);
        }
    }
}
