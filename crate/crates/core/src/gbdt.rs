//! Gradient-boosted regression trees under squared loss.
//!
//! Trees are grown level by level with an exact greedy search over every
//! boundary between consecutive distinct values of each feature. A split
//! with threshold `v` sends a sample left iff its value is `<= v`, where `v`
//! is the lower of the two neighbouring training values, so a fitted tree is
//! constant on every half-open interval `(v_i, v_{i+1}]` between observed
//! values.
//!
//! The same ensemble serves as a regressor and as a leaf-index encoder: each
//! sample maps to the one-hot pattern of the leaves it reaches, one block per
//! tree.
use serde::{Deserialize, Serialize};

use crate::domain::{FeatureVector, Schema, TREATMENT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub num_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub min_gain: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            num_trees: 50,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 20,
            min_gain: 0.0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid("learning_rate", "must lie in (0, 1]"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf", "must be at least 1"));
        }
        if !(self.min_gain.is_finite() && self.min_gain >= 0.0) {
            return Err(Error::invalid("min_gain", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        ordinal: usize,
    },
}

/// A binary tree stored as a node array; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    num_leaves: usize,
}

impl RegressionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn num_leaves(&self) -> usize {
        self.num_leaves
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Returns `(leaf value, leaf ordinal)` reached by `x`.
    pub fn route(&self, x: &[f64]) -> (f64, usize) {
        self.route_by(|f| x[f])
    }

    fn route_by(&self, x: impl Fn(usize) -> f64) -> (f64, usize) {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, ordinal } => return (value, ordinal),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x(feature) <= threshold { left } else { right },
            }
        }
    }

    /// Leaf values indexed by ordinal.
    pub fn leaf_values(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.num_leaves];
        for n in &self.nodes {
            if let Node::Leaf { value, ordinal } = *n {
                out[ordinal] = value;
            }
        }
        out
    }

    /// All split thresholds on `feature`.
    pub fn thresholds(&self, feature: usize) -> Vec<f64> {
        self.nodes
            .iter()
            .filter_map(|n| match *n {
                Node::Split {
                    feature: f,
                    threshold,
                    ..
                } if f == feature => Some(threshold),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    schema: Schema,
    trees: Vec<RegressionTree>,
    learning_rate: f64,
    base_prediction: f64,
    params: GbdtParams,
}

impl GbdtModel {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn base_prediction(&self) -> f64 {
        self.base_prediction
    }

    pub fn params(&self) -> &GbdtParams {
        &self.params
    }

    pub fn total_leaves(&self) -> usize {
        self.trees.iter().map(RegressionTree::num_leaves).sum()
    }

    /// Names of the encoding columns, `tree{t}_leaf{l}`.
    pub fn leaf_schema(&self) -> Schema {
        Schema::new(self.trees.iter().enumerate().flat_map(|(t, tree)| {
            (0..tree.num_leaves()).map(move |l| format!("tree{t}_leaf{l}"))
        }))
    }

    fn check(&self, x: &FeatureVector) -> Result<()> {
        if x.schema() != &self.schema {
            return Err(Error::SchemaMismatch {
                expected: self.schema.len(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn predict_values(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.route(x).0).sum();
        self.base_prediction + self.learning_rate * sum
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<f64> {
        self.check(x)?;
        Ok(self.predict_values(x.values()))
    }

    /// Global encoding column of the leaf reached in each tree.
    pub(crate) fn leaf_columns(&self, x: &[f64]) -> Vec<usize> {
        let mut offset = 0;
        self.trees
            .iter()
            .map(|t| {
                let col = offset + t.route(x).1;
                offset += t.num_leaves();
                col
            })
            .collect()
    }

    /// One-hot leaf encoding of width [`total_leaves`](Self::total_leaves).
    pub fn encode_leaves(&self, x: &FeatureVector) -> Result<FeatureVector> {
        self.check(x)?;
        let mut values = vec![0.0; self.total_leaves()];
        for c in self.leaf_columns(x.values()) {
            values[c] = 1.0;
        }
        FeatureVector::new(values, self.leaf_schema())
    }

    /// Start of each tree's block in the leaf encoding.
    pub fn block_offsets(&self) -> Vec<usize> {
        let mut offset = 0;
        self.trees
            .iter()
            .map(|t| {
                let o = offset;
                offset += t.num_leaves();
                o
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Mean computed around the first element, so a constant input returns that
/// constant exactly.
fn shifted_mean(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut it = values.clone();
    let Some(first) = it.next() else { return 0.0 };
    let (n, s) = values.fold((0usize, 0.0), |(n, s), v| (n + 1, s + (v - first)));
    first + s / n as f64
}

struct Columns {
    cols: Vec<Vec<f64>>,
    sorted: Vec<Vec<u32>>,
}

impl Columns {
    fn new(rows: &[&[f64]], width: usize) -> Self {
        let cols: Vec<Vec<f64>> = (0..width)
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        let sorted = cols
            .iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..c.len() as u32).collect();
                idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Columns { cols, sorted }
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

enum Build {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(f64),
}

const CLOSED: u32 = u32::MAX;

fn grow_tree(data: &Columns, residual: &[f64], params: &GbdtParams) -> RegressionTree {
    let n = residual.len();
    let width = data.cols.len();
    // slot[i]: index into `frontier` of the open node holding sample i
    let mut slot = vec![0u32; n];
    let mut build: Vec<Option<Build>> = vec![None];
    let mut frontier: Vec<usize> = vec![0];
    let mut stats: Vec<(f64, usize)> = vec![(residual.iter().sum(), n)];
    let mut depth = 0;

    while !frontier.is_empty() {
        let m = frontier.len();
        let mut best: Vec<Option<Candidate>> = vec![None; m];
        if depth < params.max_depth {
            let msl = params.min_samples_leaf;
            for f in 0..width {
                let col = &data.cols[f];
                let mut left_sum = vec![0.0; m];
                let mut left_n = vec![0usize; m];
                let mut last = vec![f64::NAN; m];
                for &i in &data.sorted[f] {
                    let i = i as usize;
                    let s = slot[i];
                    if s == CLOSED {
                        continue;
                    }
                    let s = s as usize;
                    let v = col[i];
                    let (total, count) = stats[s];
                    if left_n[s] > 0 && v > last[s] && left_n[s] >= msl && count - left_n[s] >= msl {
                        let (ln, rn) = (left_n[s] as f64, (count - left_n[s]) as f64);
                        let rs = total - left_sum[s];
                        let gain = left_sum[s] * left_sum[s] / ln + rs * rs / rn
                            - total * total / count as f64;
                        if best[s].is_none_or(|b| gain > b.gain) {
                            best[s] = Some(Candidate {
                                gain,
                                feature: f,
                                threshold: last[s],
                            });
                        }
                    }
                    left_sum[s] += residual[i];
                    left_n[s] += 1;
                    last[s] = v;
                }
            }
        }

        let mut next_frontier = Vec::new();
        let mut next_stats = Vec::new();
        // remap[s] = (left slot, right slot) for split nodes
        let mut remap: Vec<Option<(u32, u32, usize, f64)>> = vec![None; m];
        for s in 0..m {
            let node = frontier[s];
            let (total, count) = stats[s];
            match best[s] {
                Some(c) if c.gain > params.min_gain => {
                    let left = build.len();
                    let right = left + 1;
                    build.push(None);
                    build.push(None);
                    build[node] = Some(Build::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right,
                    });
                    let ls = next_frontier.len() as u32;
                    next_frontier.push(left);
                    next_frontier.push(right);
                    next_stats.push((0.0, 0));
                    next_stats.push((0.0, 0));
                    remap[s] = Some((ls, ls + 1, c.feature, c.threshold));
                }
                _ => {
                    build[node] = Some(Build::Leaf(if count == 0 { 0.0 } else { total / count as f64 }));
                }
            }
        }
        for i in 0..n {
            let s = slot[i];
            if s == CLOSED {
                continue;
            }
            slot[i] = match remap[s as usize] {
                Some((l, r, f, t)) => {
                    let target = if data.cols[f][i] <= t { l } else { r };
                    let st = &mut next_stats[target as usize];
                    st.0 += residual[i];
                    st.1 += 1;
                    target
                }
                None => CLOSED,
            };
        }
        frontier = next_frontier;
        stats = next_stats;
        depth += 1;
    }

    // renumber leaves in depth-first, left-first order
    let build: Vec<Build> = build.into_iter().map(|b| b.expect("every node resolved")).collect();
    let mut nodes = Vec::with_capacity(build.len());
    let mut num_leaves = 0;
    fn emit(build: &[Build], i: usize, nodes: &mut Vec<Node>, leaves: &mut usize) -> usize {
        let at = nodes.len();
        match build[i] {
            Build::Leaf(value) => {
                nodes.push(Node::Leaf {
                    value,
                    ordinal: *leaves,
                });
                *leaves += 1;
            }
            Build::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                nodes.push(Node::Leaf { value: 0.0, ordinal: 0 });
                let l = emit(build, left, nodes, leaves);
                let r = emit(build, right, nodes, leaves);
                nodes[at] = Node::Split {
                    feature,
                    threshold,
                    left: l,
                    right: r,
                };
            }
        }
        at
    }
    emit(&build, 0, &mut nodes, &mut num_leaves);
    RegressionTree { nodes, num_leaves }
}

fn check_inputs(x: &[FeatureVector], y: &[f64]) -> Result<Schema> {
    if x.is_empty() {
        return Err(Error::InvalidInput("no training samples".into()));
    }
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "{} feature rows but {} targets",
            x.len(),
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            field: "target".into(),
        });
    }
    let schema = x[0].schema().clone();
    if let Some(bad) = x.iter().find(|v| v.schema() != &schema) {
        return Err(Error::SchemaMismatch {
            expected: schema.len(),
            found: bad.len(),
        });
    }
    Ok(schema)
}

/// Boosts `params.num_trees` trees on squared loss. Each tree is fitted to
/// the current residuals; leaves hold the mean residual and predictions are
/// shrunk by the learning rate.
pub fn fit_gbdt(x: &[FeatureVector], y: &[f64], params: &GbdtParams) -> Result<GbdtModel> {
    params.validate()?;
    let schema = check_inputs(x, y)?;
    let rows: Vec<&[f64]> = x.iter().map(FeatureVector::values).collect();
    Ok(fit_rows(&rows, y, schema, params))
}

pub(crate) fn fit_rows(rows: &[&[f64]], y: &[f64], schema: Schema, params: &GbdtParams) -> GbdtModel {
    let data = Columns::new(rows, schema.len());
    let base_prediction = shifted_mean(y.iter().copied());
    let mut residual: Vec<f64> = y.iter().map(|v| v - base_prediction).collect();
    let mut trees = Vec::with_capacity(params.num_trees);
    for _ in 0..params.num_trees {
        let tree = grow_tree(&data, &residual, params);
        for (i, r) in residual.iter_mut().enumerate() {
            let (value, _) = tree.route_by(|f| data.cols[f][i]);
            *r -= params.learning_rate * value;
        }
        trees.push(tree);
    }
    GbdtModel {
        schema,
        trees,
        learning_rate: params.learning_rate,
        base_prediction,
        params: params.clone(),
    }
}

/// Fits the leaf encoder on customer features only. The treatment must not
/// be part of the schema.
pub fn fit_encoder(x: &[FeatureVector], y: &[f64], params: &GbdtParams) -> Result<GbdtModel> {
    if let Some(first) = x.first() {
        if first
            .schema()
            .names()
            .iter()
            .any(|n| n.eq_ignore_ascii_case(TREATMENT))
        {
            return Err(Error::InvalidInput(
                "the leaf encoder must be fitted without the treatment column".into(),
            ));
        }
    }
    fit_gbdt(x, y, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_feature(xs: &[f64]) -> Vec<FeatureVector> {
        let schema = Schema::new(["x"]);
        xs.iter()
            .map(|&v| FeatureVector::new(vec![v], schema.clone()).unwrap())
            .collect()
    }

    fn stump() -> GbdtParams {
        GbdtParams {
            num_trees: 1,
            max_depth: 1,
            learning_rate: 1.0,
            min_samples_leaf: 1,
            min_gain: 0.0,
        }
    }

    #[test]
    fn constant_target() {
        let x = one_feature(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = vec![0.1; 5];
        let m = fit_gbdt(&x, &y, &GbdtParams { min_samples_leaf: 1, ..GbdtParams::default() }).unwrap();
        assert_eq!(m.base_prediction(), 0.1);
        for t in m.trees() {
            assert_eq!(t.num_leaves(), 1);
            assert_eq!(t.leaf_values(), vec![0.0]);
        }
        for v in &x {
            assert_eq!(m.predict(v).unwrap(), 0.1);
        }
    }

    #[test]
    fn four_point_stump() {
        let x = one_feature(&[1.0, 2.0, 3.0, 4.0]);
        let y = [0.0, 0.0, 10.0, 10.0];
        let m = fit_gbdt(&x, &y, &stump()).unwrap();
        let tree = &m.trees()[0];
        let th = tree.thresholds(0);
        assert_eq!(th.len(), 1);
        assert!((2.0..3.0).contains(&th[0]));
        assert_eq!(tree.leaf_values(), vec![-5.0, 5.0]);
        for (v, target) in x.iter().zip(y) {
            assert_eq!(m.predict(v).unwrap(), target);
        }
        let mid = one_feature(&[2.5]);
        assert_eq!(m.predict(&mid[0]).unwrap(), 10.0);
    }

    #[test]
    fn empty_ensemble_predicts_base() {
        let x = one_feature(&[1.0, 2.0, 3.0]);
        let y = [1.0, 2.0, 6.0];
        let m = fit_gbdt(&x, &y, &GbdtParams { num_trees: 0, ..GbdtParams::default() }).unwrap();
        assert_eq!(m.predict(&x[0]).unwrap(), 3.0);
    }

    #[test]
    fn width_mismatch() {
        let x = one_feature(&[1.0, 2.0, 3.0, 4.0]);
        let m = fit_gbdt(&x, &[0.0, 0.0, 1.0, 1.0], &stump()).unwrap();
        let wide = FeatureVector::new(vec![1.0, 2.0], Schema::new(["x", "z"])).unwrap();
        assert!(matches!(m.predict(&wide), Err(Error::SchemaMismatch { .. })));
        assert!(m.encode_leaves(&wide).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(fit_gbdt(&[], &[], &stump()).is_err());
        let x = one_feature(&[1.0, 2.0]);
        assert!(fit_gbdt(&x, &[0.0, f64::NAN], &stump()).is_err());
        assert!(fit_gbdt(&x, &[0.0], &stump()).is_err());
    }

    #[test]
    fn encoding_layout() {
        let leaf = |value, ordinal| Node::Leaf { value, ordinal };
        let split = |feature, threshold, left, right| Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        let t1 = RegressionTree {
            nodes: vec![split(0, 0.0, 1, 2), leaf(1.0, 0), leaf(2.0, 1)],
            num_leaves: 2,
        };
        let t2 = RegressionTree {
            nodes: vec![
                split(1, 5.0, 1, 4),
                split(1, -5.0, 2, 3),
                leaf(0.0, 0),
                leaf(0.0, 1),
                split(1, 10.0, 5, 6),
                leaf(3.0, 2),
                leaf(4.0, 3),
            ],
            num_leaves: 4,
        };
        let schema = Schema::new(["a", "b"]);
        let m = GbdtModel {
            schema: schema.clone(),
            trees: vec![t1, t2],
            learning_rate: 0.5,
            base_prediction: 1.0,
            params: GbdtParams::default(),
        };
        let x = FeatureVector::new(vec![-1.0, 7.0], schema).unwrap();
        let enc = m.encode_leaves(&x).unwrap();
        assert_eq!(enc.values(), &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(enc.values().iter().sum::<f64>(), 2.0);
        assert_eq!(m.predict(&x).unwrap(), 1.0 + 0.5 * (1.0 + 3.0));
    }

    #[test]
    fn single_leaf_tree_encodes_constant_one() {
        let x = one_feature(&[1.0, 2.0, 3.0]);
        let m = fit_gbdt(&x, &[4.0, 4.0, 4.0], &stump()).unwrap();
        for v in &x {
            assert_eq!(m.encode_leaves(v).unwrap().values(), &[1.0]);
        }
    }

    #[test]
    fn encoder_rejects_treatment_column() {
        let schema = Schema::new(["a", "treatment"]);
        let x = vec![FeatureVector::new(vec![1.0, 2.0], schema).unwrap()];
        assert!(fit_encoder(&x, &[1.0], &stump()).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let xs: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let y: Vec<f64> = xs.iter().map(|v| (v * 1.3).sin() * 100.0 + v).collect();
        let x = one_feature(&xs);
        let m = fit_gbdt(&x, &y, &GbdtParams { min_samples_leaf: 5, ..GbdtParams::default() }).unwrap();
        let back = GbdtModel::from_json(&m.to_json().unwrap()).unwrap();
        for v in &x {
            assert_eq!(m.predict(v).unwrap().to_bits(), back.predict(v).unwrap().to_bits());
        }
    }
}
