//! Grouped relative error, ablation response curves and partial dependence.
//!
//! Individual outcomes are dominated by noise, so models are compared on
//! groups of similar customers. Customers are binned on a few features by
//! quantiles, and for each group `i` with `w_i` members the observed mean
//! `y_i` is compared to the mean prediction `y_hat_i`:
//!
//! ```text
//! RMAE = sum_i w_i |y_hat_i - y_i| / sum_i w_i y_i
//! ```
//!
//! Too few groups blur the differences between methods; too many leave
//! the noise uncancelled. Nine quantile bins on four features (up to 6561
//! groups) is the default.
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design::TestingDesign;
use crate::domain::{CreditRating, CustomerRecord};
use crate::error::{Error, Result};
use crate::response::{check_grid, ResponseSurface};

/// Quantities customers can be binned or partitioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKey {
    ProbDefault,
    AvgSpend3m,
    AvgSpend6m,
    MaxSpend12m,
    AvgBalance3m,
    AvgBalance6m,
    CurrentLimit,
    BalanceToLimit,
    SpendToLimit,
}

impl FeatureKey {
    pub const ALL: [FeatureKey; 9] = [
        FeatureKey::ProbDefault,
        FeatureKey::AvgSpend3m,
        FeatureKey::AvgSpend6m,
        FeatureKey::MaxSpend12m,
        FeatureKey::AvgBalance3m,
        FeatureKey::AvgBalance6m,
        FeatureKey::CurrentLimit,
        FeatureKey::BalanceToLimit,
        FeatureKey::SpendToLimit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKey::ProbDefault => "prob_default",
            FeatureKey::AvgSpend3m => "avg_spend_3m",
            FeatureKey::AvgSpend6m => "avg_spend_6m",
            FeatureKey::MaxSpend12m => "max_spend_12m",
            FeatureKey::AvgBalance3m => "avg_balance_3m",
            FeatureKey::AvgBalance6m => "avg_balance_6m",
            FeatureKey::CurrentLimit => "current_limit",
            FeatureKey::BalanceToLimit => "balance_to_limit",
            FeatureKey::SpendToLimit => "spend_to_limit",
        }
    }

    pub fn value(self, r: &CustomerRecord) -> f64 {
        match self {
            FeatureKey::ProbDefault => r.prob_default,
            FeatureKey::AvgSpend3m => r.avg_spend_3m,
            FeatureKey::AvgSpend6m => r.avg_spend_6m,
            FeatureKey::MaxSpend12m => r.max_spend_12m,
            FeatureKey::AvgBalance3m => r.avg_balance_3m,
            FeatureKey::AvgBalance6m => r.avg_balance_6m,
            FeatureKey::CurrentLimit => r.current_limit,
            FeatureKey::BalanceToLimit => r.balance_to_limit(),
            FeatureKey::SpendToLimit => r.spend_to_limit(),
        }
    }
}

impl fmt::Display for FeatureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureKey::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownFeature(s.to_string()))
    }
}

/// One binning feature and its number of quantile bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub feature: String,
    pub bins: usize,
}

impl BinSpec {
    pub fn new(feature: &str, bins: usize) -> Self {
        BinSpec {
            feature: feature.to_string(),
            bins,
        }
    }
}

/// Nine bins on risk, limit, six-month spend and six-month balance.
pub fn default_binning() -> Vec<BinSpec> {
    ["prob_default", "current_limit", "avg_spend_6m", "avg_balance_6m"]
        .iter()
        .map(|f| BinSpec::new(f, 9))
        .collect()
}

/// Interior cut points at the `j / bins` empirical quantiles (inverse-CDF
/// convention: the `ceil(q n)`-th order statistic), deduplicated.
pub fn quantile_edges(values: &[f64], bins: usize) -> Vec<f64> {
    if values.is_empty() || bins <= 1 {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges: Vec<f64> = (1..bins)
        .map(|j| {
            let rank = ((j as f64 / bins as f64) * n as f64).ceil() as usize;
            sorted[rank.clamp(1, n) - 1]
        })
        .collect();
    edges.dedup();
    edges
}

/// Right-closed bin index: the number of edges strictly below `value`.
pub fn bin_index(edges: &[f64], value: f64) -> usize {
    edges.partition_point(|&e| e < value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    features: Vec<FeatureKey>,
    edges: Vec<Vec<f64>>,
    groups: BTreeMap<Vec<usize>, Vec<usize>>,
    size: usize,
}

impl GroupSpec {
    pub fn features(&self) -> &[FeatureKey] {
        &self.features
    }

    pub fn edges(&self) -> &[Vec<f64>] {
        &self.edges
    }

    /// Non-empty groups keyed by bin tuple, members as record indices.
    pub fn groups(&self) -> &BTreeMap<Vec<usize>, Vec<usize>> {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Number of records grouped.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn key_of(&self, r: &CustomerRecord) -> Vec<usize> {
        self.features
            .iter()
            .zip(&self.edges)
            .map(|(f, e)| bin_index(e, f.value(r)))
            .collect()
    }
}

/// Quantile-bins `records` on the requested features. Edges are computed
/// on `records` themselves.
pub fn build_groups(records: &[CustomerRecord], spec: &[BinSpec]) -> Result<GroupSpec> {
    if records.is_empty() {
        return Err(Error::InvalidInput("cannot group an empty dataset".into()));
    }
    let mut features = Vec::with_capacity(spec.len());
    let mut edges = Vec::with_capacity(spec.len());
    for s in spec {
        let key: FeatureKey = s.feature.parse()?;
        if s.bins == 0 {
            return Err(Error::invalid(&s.feature, "needs at least one bin"));
        }
        let values: Vec<f64> = records.iter().map(|r| key.value(r)).collect();
        features.push(key);
        edges.push(quantile_edges(&values, s.bins));
    }
    let mut out = GroupSpec {
        features,
        edges,
        groups: BTreeMap::new(),
        size: records.len(),
    };
    for (i, r) in records.iter().enumerate() {
        let key = out.key_of(r);
        out.groups.entry(key).or_default().push(i);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub key: Vec<usize>,
    pub w: usize,
    pub y: f64,
    pub y_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: String,
    pub rmae: f64,
    pub rows: Vec<GroupRow>,
}

impl EvaluationReport {
    /// Applies the metric to already aggregated group rows.
    pub fn from_rows(method: &str, rows: Vec<GroupRow>) -> Result<Self> {
        let mut num = 0.0;
        let mut den = 0.0;
        for r in &rows {
            let w = r.w as f64;
            num += w * (r.y_hat - r.y).abs();
            den += w * r.y;
        }
        if !(den > 0.0) {
            return Err(Error::UndefinedMetric(format!(
                "weighted mean outcome is {den}; the relative error needs a positive denominator"
            )));
        }
        Ok(EvaluationReport {
            method: method.to_string(),
            rmae: num / den,
            rows,
        })
    }
}

fn mean(idx: &[usize], v: &[f64]) -> f64 {
    idx.iter().map(|&i| v[i]).sum::<f64>() / idx.len() as f64
}

/// Grouped RMAE of `predictions` against `observed`, both aligned with the
/// records the groups were built on.
pub fn rmae(groups: &GroupSpec, observed: &[f64], predictions: &[f64], method: &str) -> Result<EvaluationReport> {
    if observed.len() != groups.size() || predictions.len() != groups.size() {
        return Err(Error::InvalidInput(format!(
            "{} groups members, {} outcomes, {} predictions",
            groups.size(),
            observed.len(),
            predictions.len()
        )));
    }
    let rows = groups
        .groups()
        .iter()
        .map(|(key, idx)| GroupRow {
            key: key.clone(),
            w: idx.len(),
            y: mean(idx, observed),
            y_hat: mean(idx, predictions),
        })
        .collect();
    EvaluationReport::from_rows(method, rows)
}

/// `0, stride, 2 stride, ...` up to and including `max`.
pub fn treatment_grid(max: f64, stride: f64) -> Result<Vec<f64>> {
    if !(stride.is_finite() && stride > 0.0) {
        return Err(Error::invalid("stride", "must be positive"));
    }
    if !(max.is_finite() && max >= 0.0) {
        return Err(Error::invalid("max treatment", "must be non-negative"));
    }
    let steps = (max / stride + 1e-9).floor() as usize;
    Ok((0..=steps).map(|i| i as f64 * stride).collect())
}

/// Averaged predictions of several models over one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AverageCurves {
    pub grid: Vec<f64>,
    pub members: usize,
    /// One curve per model, in input order.
    pub curves: Vec<Vec<f64>>,
}

fn average_curve(model: &dyn ResponseSurface, records: &[&CustomerRecord], grid: &[f64]) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; grid.len()];
    for r in records {
        for (a, y) in acc.iter_mut().zip(model.curve(r, grid)?) {
            *a += y;
        }
    }
    let n = records.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

/// Per-subgroup average response curves over `0..=max menu treatment`
/// (currency) at the given stride.
pub fn ablation_curves(
    models: &[&dyn ResponseSurface],
    records: &[CustomerRecord],
    design: &TestingDesign,
    treatment_unit: f64,
    stride: f64,
) -> Result<BTreeMap<CreditRating, AverageCurves>> {
    let mut out = BTreeMap::new();
    for subgroup in design.subgroups() {
        let members: Vec<&CustomerRecord> = records.iter().filter(|r| r.credit_rating == subgroup).collect();
        if members.is_empty() {
            return Err(Error::InvalidInput(format!("subgroup {subgroup} has no records")));
        }
        let grid = treatment_grid(design.max_treatment(subgroup)? * treatment_unit, stride)?;
        let curves = models
            .iter()
            .map(|m| average_curve(*m, &members, &grid))
            .collect::<Result<Vec<_>>>()?;
        out.insert(
            subgroup,
            AverageCurves {
                grid,
                members: members.len(),
                curves,
            },
        );
    }
    Ok(out)
}

/// Cells `(-inf, e_1], (e_1, e_2], ..., (e_m, inf)` on a derived quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub feature: FeatureKey,
    pub edges: Vec<f64>,
}

impl Partition {
    pub fn new(feature: FeatureKey, edges: Vec<f64>) -> Result<Self> {
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("edges", "must be finite and strictly increasing"));
        }
        Ok(Partition { feature, edges })
    }

    /// Quantile partition of `records` into `cells` cells.
    pub fn quantiles(feature: FeatureKey, records: &[CustomerRecord], cells: usize) -> Result<Self> {
        let values: Vec<f64> = records.iter().map(|r| feature.value(r)).collect();
        Partition::new(feature, quantile_edges(&values, cells))
    }

    pub fn cells(&self) -> usize {
        self.edges.len() + 1
    }

    pub fn cell_of(&self, r: &CustomerRecord) -> usize {
        bin_index(&self.edges, self.feature.value(r))
    }

    pub fn bounds(&self, cell: usize) -> (f64, f64) {
        let lo = if cell == 0 { f64::NEG_INFINITY } else { self.edges[cell - 1] };
        let hi = self.edges.get(cell).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdpCell {
    pub lower: f64,
    pub upper: f64,
    pub members: usize,
    pub curve: Vec<f64>,
}

impl PdpCell {
    /// Average gain over the grid, `curve[last] - curve[0]`.
    pub fn total_gain(&self) -> f64 {
        self.curve.last().copied().unwrap_or(0.0) - self.curve.first().copied().unwrap_or(0.0)
    }
}

/// Average response curve of `model` within each partition cell.
pub fn partial_dependence(
    model: &dyn ResponseSurface,
    records: &[CustomerRecord],
    partition: &Partition,
    grid: &[f64],
) -> Result<Vec<PdpCell>> {
    check_grid(grid)?;
    let mut members: Vec<Vec<&CustomerRecord>> = vec![Vec::new(); partition.cells()];
    for r in records {
        members[partition.cell_of(r)].push(r);
    }
    members
        .iter()
        .enumerate()
        .map(|(cell, rs)| {
            if rs.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "partition cell {cell} on {} is empty",
                    partition.feature
                )));
            }
            let (lower, upper) = partition.bounds(cell);
            Ok(PdpCell {
                lower,
                upper,
                members: rs.len(),
                curve: average_curve(model, rs, grid)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(pd: f64, limit: f64) -> CustomerRecord {
        CustomerRecord {
            customer_id: "r".into(),
            prob_default: pd,
            credit_rating: CreditRating::Fair,
            avg_spend_3m: 100.0,
            avg_spend_6m: 100.0,
            max_spend_12m: 200.0,
            avg_balance_3m: 300.0,
            avg_balance_6m: 300.0,
            current_limit: limit,
        }
    }

    #[test]
    fn two_group_hand_example() {
        let rows = vec![
            GroupRow { key: vec![0], w: 2, y: 10.0, y_hat: 12.0 },
            GroupRow { key: vec![1], w: 3, y: 20.0, y_hat: 17.0 },
        ];
        let report = EvaluationReport::from_rows("m", rows).unwrap();
        assert_eq!(report.rmae, 0.1625);
    }

    #[test]
    fn single_group_reduces_to_relative_error() {
        let rows = vec![GroupRow { key: vec![], w: 7, y: 8.0, y_hat: 10.0 }];
        assert_eq!(EvaluationReport::from_rows("m", rows).unwrap().rmae, 0.25);
    }

    #[test]
    fn non_positive_denominator_errors() {
        let rows = vec![GroupRow { key: vec![], w: 1, y: -3.0, y_hat: 1.0 }];
        assert!(matches!(EvaluationReport::from_rows("m", rows), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn one_bin_is_one_group() {
        let records: Vec<_> = (0..20).map(|i| rec(0.01 * i as f64, 1000.0 + i as f64)).collect();
        let g = build_groups(&records, &[BinSpec::new("prob_default", 1), BinSpec::new("current_limit", 1)]).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.groups().values().next().unwrap().len(), 20);
    }

    #[test]
    fn right_closed_hand_binning() {
        // pd = 1..5 (scaled), 2 bins: median edge is the 3rd order statistic
        let records: Vec<_> = [0.05, 0.01, 0.03, 0.02, 0.04].iter().map(|&p| rec(p, 1000.0)).collect();
        let g = build_groups(&records, &[BinSpec::new("prob_default", 2)]).unwrap();
        assert_eq!(g.edges()[0], vec![0.03]);
        let groups = g.groups();
        assert_eq!(groups[&vec![0]], vec![1, 2, 3]);
        assert_eq!(groups[&vec![1]], vec![0, 4]);
    }

    #[test]
    fn unknown_feature() {
        let records = vec![rec(0.1, 1.0)];
        assert!(matches!(
            build_groups(&records, &[BinSpec::new("zip_code", 3)]),
            Err(Error::UnknownFeature(_))
        ));
    }

    #[test]
    fn perfect_prediction_zero() {
        let records: Vec<_> = (0..30).map(|i| rec(0.001 * i as f64, 500.0 + i as f64)).collect();
        let g = build_groups(&records, &default_binning()[..2]).unwrap();
        let y: Vec<f64> = (0..30).map(|i| 5.0 + i as f64).collect();
        assert_eq!(rmae(&g, &y, &y, "m").unwrap().rmae, 0.0);
    }

    #[test]
    fn grid_contract() {
        assert_eq!(treatment_grid(3000.0, 1000.0).unwrap(), vec![0.0, 1000.0, 2000.0, 3000.0]);
        assert_eq!(treatment_grid(0.0, 1000.0).unwrap(), vec![0.0]);
        assert!(treatment_grid(10.0, 0.0).is_err());
    }

    #[test]
    fn partition_edges_validated() {
        assert!(Partition::new(FeatureKey::ProbDefault, vec![0.2, 0.1]).is_err());
        assert!(Partition::new(FeatureKey::ProbDefault, vec![0.1, 0.1]).is_err());
        let p = Partition::new(FeatureKey::ProbDefault, vec![0.1, 0.2]).unwrap();
        assert_eq!(p.cells(), 3);
        assert_eq!(p.cell_of(&rec(0.1, 1.0)), 0);
        assert_eq!(p.cell_of(&rec(0.15, 1.0)), 1);
        assert_eq!(p.cell_of(&rec(0.25, 1.0)), 2);
    }
}
