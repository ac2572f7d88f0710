//! The experiment pipeline behind the command-line tool.
//!
//! Four stages share one output directory:
//!
//! | stage      | reads                           | writes                                   |
//! |------------|---------------------------------|------------------------------------------|
//! | `simulate` | config                          | `train.csv`, `test.csv`, `groundtruth.json`, `design.json`, `manifest.json` |
//! | `train`    | `train.csv`                     | `models/<variant>.json`, `models/manifest.json` |
//! | `evaluate` | models, both splits             | `rmae.csv`, `rmae.txt`, `groups/<method>_<split>.csv` |
//! | `curves`   | models, `test.csv`, ground truth | `curves/subgroup_<rating>.csv`, `curves/pdp_<factor>.csv` |
//!
//! Every file a stage reads is checked against the SHA-256 recorded by the
//! stage that wrote it. Outputs contain no timestamps, so reruns are
//! byte-identical.
use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset;
use crate::design::{default_design, TestingDesign};
use crate::domain::{CustomerRecord, ObservationRecord};
use crate::error::{Error, Result};
use crate::evaluation::{
    ablation_curves, build_groups, default_binning, partial_dependence, rmae, treatment_grid, BinSpec,
    EvaluationReport, FeatureKey, Partition,
};
use crate::gbdt::GbdtParams;
use crate::response::{
    fit_outcome_encoder, fit_response_with_encoder, ModelSpec, Regularization, ResponseModel,
    ResponseSurface, SingleGbdt, TreatmentTransform, Variant,
};
use crate::simulator::{build_dataset, GroundTruth, PopulationParams, SimulationSpec};

pub const OUT_ENV: &str = "CREDIT_RESPONSE_OUT";
pub const ORACLE: &str = "oracle";

/// The compared methods, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Linear,
    Gbdt,
    Or,
    OrLog,
    EncOr,
    EncOrLog,
    EncOrLogL2,
    EncOrLogL1,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Linear,
        Method::Gbdt,
        Method::Or,
        Method::OrLog,
        Method::EncOr,
        Method::EncOrLog,
        Method::EncOrLogL2,
        Method::EncOrLogL1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Linear => "linear",
            Method::Gbdt => "gbdt",
            Method::Or => "or",
            Method::OrLog => "or_log",
            Method::EncOr => "enc_or",
            Method::EncOrLog => "enc_or_log",
            Method::EncOrLogL2 => "enc_or_log_l2",
            Method::EncOrLogL1 => "enc_or_log_l1",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Linear => "Linear Regression",
            Method::Gbdt => "Single GBDT",
            Method::Or => "Outcome Regression (OR)",
            Method::OrLog => "OR + LOG",
            Method::EncOr => "GBDT Encoding + OR",
            Method::EncOrLog => "GBDT Encoding + OR + LOG",
            Method::EncOrLogL2 => "GBDT Encoding + OR + LOG + L2",
            Method::EncOrLogL1 => "GBDT Encoding + OR + LOG + L1",
        }
    }

    /// `None` for the single GBDT baseline.
    pub fn model_spec(self, cfg: &RunConfig) -> Option<ModelSpec> {
        let log = TreatmentTransform::LogShift { k: cfg.transform_k };
        let id = TreatmentTransform::Identity;
        let (variant, transform, regularization) = match self {
            Method::Gbdt => return None,
            Method::Linear => (Variant::LinearRegression, id, Regularization::None),
            Method::Or => (Variant::OutcomeRegression, id, Regularization::None),
            Method::OrLog => (Variant::OutcomeRegression, log, Regularization::None),
            Method::EncOr => (Variant::EncodedOutcomeRegression, id, Regularization::None),
            Method::EncOrLog => (Variant::EncodedOutcomeRegression, log, Regularization::None),
            Method::EncOrLogL2 => (
                Variant::EncodedOutcomeRegression,
                log,
                Regularization::L2 { lambda: cfg.lambda },
            ),
            Method::EncOrLogL1 => (
                Variant::EncodedOutcomeRegression,
                log,
                Regularization::L1 { lambda: cfg.lambda },
            ),
        };
        Some(ModelSpec {
            variant,
            transform,
            regularization,
            encoder: cfg.gbdt.clone(),
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownVariant(s.to_string()))
    }
}

/// A serialized model of either family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FittedModel {
    Response(ResponseModel),
    SingleGbdt(SingleGbdt),
}

impl ResponseSurface for FittedModel {
    fn predict(&self, record: &CustomerRecord, treatment: f64) -> Result<f64> {
        match self {
            FittedModel::Response(m) => m.predict(record, treatment),
            FittedModel::SingleGbdt(m) => m.predict(record, treatment),
        }
    }

    fn curve(&self, record: &CustomerRecord, grid: &[f64]) -> Result<Vec<f64>> {
        match self {
            FittedModel::Response(m) => m.curve(record, grid),
            FittedModel::SingleGbdt(m) => m.curve(record, grid),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub n: usize,
    pub split_fraction: f64,
    /// Currency per design unit.
    pub treatment_unit: f64,
    /// JSON design file; the default design when absent.
    pub design: Option<PathBuf>,
    pub variants: Vec<String>,
    pub transform_k: f64,
    pub lambda: f64,
    pub gbdt: GbdtParams,
    pub grouping: Vec<BinSpec>,
    pub curve_stride: f64,
    pub pdp_cells: usize,
    pub pdp_max_treatment: f64,
    pub output: PathBuf,
    pub population: PopulationParams,
    pub ground_truth: GroundTruth,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sim = SimulationSpec::default();
        RunConfig {
            seed: sim.seed,
            n: sim.n,
            split_fraction: sim.split_fraction,
            treatment_unit: sim.treatment_unit,
            design: None,
            variants: Method::ALL.iter().map(|m| m.name().to_string()).collect(),
            transform_k: 20_000.0,
            lambda: 100.0,
            gbdt: GbdtParams::default(),
            grouping: default_binning(),
            curve_stride: 1000.0,
            pdp_cells: 5,
            pdp_max_treatment: 30_000.0,
            output: PathBuf::from("out"),
            population: sim.population,
            ground_truth: sim.ground_truth,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| Err(Error::Config(format!("`{field}` {reason}")));
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad("split_fraction", "must lie strictly between 0 and 1");
        }
        if self.n < 2 {
            return bad("n", "must be at least 2");
        }
        if !(self.treatment_unit.is_finite() && self.treatment_unit > 0.0) {
            return bad("treatment_unit", "must be positive");
        }
        if !(self.transform_k.is_finite() && self.transform_k > 0.0) {
            return bad("transform_k", "must be positive");
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad("lambda", "must be non-negative");
        }
        if !(self.curve_stride.is_finite() && self.curve_stride > 0.0) {
            return bad("curve_stride", "must be positive");
        }
        if !(self.pdp_max_treatment.is_finite() && self.pdp_max_treatment >= 0.0) {
            return bad("pdp_max_treatment", "must be non-negative");
        }
        if self.pdp_cells == 0 {
            return bad("pdp_cells", "must be at least 1");
        }
        if self.variants.is_empty() {
            return bad("variants", "must name at least one method");
        }
        for b in &self.grouping {
            b.feature.parse::<FeatureKey>()?;
            if b.bins == 0 {
                return bad("grouping", "needs at least one bin per feature");
            }
        }
        self.methods()?;
        self.gbdt.validate()?;
        self.population.validate()?;
        self.ground_truth.validate()
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        let mut out: Vec<Method> = self.variants.iter().map(|v| v.parse()).collect::<Result<_>>()?;
        out.sort();
        out.dedup();
        Ok(out)
    }

    pub fn simulation(&self) -> SimulationSpec {
        SimulationSpec {
            n: self.n,
            seed: self.seed,
            split_fraction: self.split_fraction,
            treatment_unit: self.treatment_unit,
            population: self.population.clone(),
            ground_truth: self.ground_truth.clone(),
        }
    }

    pub fn testing_design(&self) -> Result<TestingDesign> {
        match &self.design {
            Some(p) => TestingDesign::load(p),
            None => Ok(default_design()),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Seed and content hashes of the files a stage wrote.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub files: BTreeMap<String, String>,
    /// Hashes of the inputs the stage consumed.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub inputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn save(&self, path: &Path) -> Result<()> {
        write_file(path, (serde_json::to_string_pretty(self)? + "\n").as_bytes())
    }

    /// Reads `dir/name` and checks it against the recorded hash.
    pub fn read_verified(&self, dir: &Path, name: &str) -> Result<Vec<u8>> {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let expected = self
            .files
            .get(name)
            .ok_or_else(|| Error::Drift(format!("{name} is not listed in the manifest")))?;
        let found = sha256_hex(&bytes);
        if &found != expected {
            return Err(Error::Drift(format!(
                "{} changed since it was written (sha256 {found}, manifest {expected})",
                path.display()
            )));
        }
        Ok(bytes)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn utf8(bytes: Vec<u8>, name: &str) -> Result<String> {
    String::from_utf8(bytes).map_err(|_| Error::InvalidInput(format!("{name} is not UTF-8")))
}

const TRAIN: &str = "train.csv";
const TEST: &str = "test.csv";
const TRUTH: &str = "groundtruth.json";
const DESIGN: &str = "design.json";
const MANIFEST: &str = "manifest.json";
const MODELS: &str = "models";

/// Simulates a testing campaign and writes both splits.
pub fn simulate(cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate()?;
    let design = cfg.testing_design()?;
    let data = build_dataset(&cfg.simulation(), &design)?;
    let out = &cfg.output;

    let mut files = BTreeMap::new();
    for (name, rows) in [(TRAIN, &data.train), (TEST, &data.test)] {
        let mut buf = Vec::new();
        dataset::write_observations(&mut buf, rows)?;
        write_file(&out.join(name), &buf)?;
        files.insert(name.to_string(), sha256_hex(&buf));
    }
    for (name, text) in [
        (TRUTH, cfg.ground_truth.to_json()? + "\n"),
        (DESIGN, design.to_json()? + "\n"),
    ] {
        write_file(&out.join(name), text.as_bytes())?;
        files.insert(name.to_string(), sha256_hex(text.as_bytes()));
    }
    let manifest = Manifest {
        seed: cfg.seed,
        files,
        inputs: BTreeMap::new(),
    };
    manifest.save(&out.join(MANIFEST))?;
    Ok(manifest)
}

fn read_split(dir: &Path, manifest: &Manifest, name: &str) -> Result<Vec<ObservationRecord>> {
    let bytes = manifest.read_verified(dir, name)?;
    let rows = dataset::read_observations(bytes.as_slice())?;
    if rows.is_empty() {
        return Err(Error::InvalidInput(format!("{name} has no rows")));
    }
    Ok(rows)
}

/// Fits every configured method on `train.csv`. The encoded variants
/// share one encoder.
pub fn train(cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate()?;
    let methods = cfg.methods()?;
    let out = &cfg.output;
    let data = Manifest::load(&out.join(MANIFEST))?;
    let rows = read_split(out, &data, TRAIN)?;
    let design = TestingDesign::from_json(&utf8(data.read_verified(out, DESIGN)?, DESIGN)?)?;
    dataset::check_on_menu(&rows, &design, cfg.treatment_unit)?;

    let needs_encoder = methods
        .iter()
        .filter_map(|m| m.model_spec(cfg))
        .any(|s| s.variant == Variant::EncodedOutcomeRegression);
    let encoder = if needs_encoder {
        Some(fit_outcome_encoder(&rows, &cfg.gbdt)?)
    } else {
        None
    };

    let mut files = BTreeMap::new();
    for m in methods {
        let model = match m.model_spec(cfg) {
            None => FittedModel::SingleGbdt(SingleGbdt::fit(&rows, &cfg.gbdt)?),
            Some(spec) => {
                let enc = match spec.variant {
                    Variant::EncodedOutcomeRegression => encoder.clone(),
                    _ => None,
                };
                FittedModel::Response(fit_response_with_encoder(&rows, &spec, enc)?)
            }
        };
        let name = format!("{m}.json");
        let text = serde_json::to_string(&model)? + "\n";
        write_file(&out.join(MODELS).join(&name), text.as_bytes())?;
        files.insert(name, sha256_hex(text.as_bytes()));
    }
    let manifest = Manifest {
        seed: data.seed,
        files,
        inputs: BTreeMap::from([(TRAIN.to_string(), data.files[TRAIN].clone())]),
    };
    manifest.save(&out.join(MODELS).join(MANIFEST))?;
    Ok(manifest)
}

/// Loads the trained models in table order.
pub fn load_models(cfg: &RunConfig) -> Result<Vec<(Method, FittedModel)>> {
    let dir = cfg.output.join(MODELS);
    let data = Manifest::load(&cfg.output.join(MANIFEST))?;
    let manifest = Manifest::load(&dir.join(MANIFEST))?;
    if manifest.inputs.get(TRAIN) != data.files.get(TRAIN) {
        return Err(Error::Drift("models were trained on a different train.csv".into()));
    }
    let mut out = Vec::new();
    for name in manifest.files.keys() {
        let method: Method = name.trim_end_matches(".json").parse()?;
        let text = utf8(manifest.read_verified(&dir, name)?, name)?;
        out.push((method, serde_json::from_str(&text)?));
    }
    out.sort_by_key(|(m, _)| *m);
    Ok(out)
}

struct Inputs {
    train: Vec<ObservationRecord>,
    test: Vec<ObservationRecord>,
    truth: GroundTruth,
    design: TestingDesign,
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let out = &cfg.output;
    let m = Manifest::load(&out.join(MANIFEST))?;
    Ok(Inputs {
        train: read_split(out, &m, TRAIN)?,
        test: read_split(out, &m, TEST)?,
        truth: GroundTruth::from_json(&utf8(m.read_verified(out, TRUTH)?, TRUTH)?)?,
        design: TestingDesign::from_json(&utf8(m.read_verified(out, DESIGN)?, DESIGN)?)?,
    })
}

/// Train and test RMAE of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct RmaeRow {
    pub method: String,
    pub label: String,
    pub train: EvaluationReport,
    pub test: EvaluationReport,
}

fn evaluate_split(
    model: &dyn ResponseSurface,
    rows: &[ObservationRecord],
    spec: &[BinSpec],
    method: &str,
) -> Result<EvaluationReport> {
    let customers: Vec<CustomerRecord> = rows.iter().map(|r| r.customer.clone()).collect();
    let groups = build_groups(&customers, spec)?;
    let observed: Vec<f64> = rows.iter().map(|r| r.outcome).collect();
    let predicted = rows
        .iter()
        .map(|r| model.predict(&r.customer, r.treatment))
        .collect::<Result<Vec<_>>>()?;
    rmae(&groups, &observed, &predicted, method)
}

fn fmt_key(key: &[usize]) -> Vec<String> {
    key.iter().map(usize::to_string).collect()
}

fn group_csv(report: &EvaluationReport, spec: &[BinSpec]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = spec.iter().map(|b| format!("{}_bin", b.feature)).collect();
    header.extend(["w", "y", "y_hat"].map(String::from));
    w.write_record(&header)?;
    for r in &report.rows {
        let mut rec = fmt_key(&r.key);
        rec.extend([r.w.to_string(), r.y.to_string(), r.y_hat.to_string()]);
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))
}

/// Aligned text in the shape of an RMAE comparison table.
pub fn format_table(rows: &[RmaeRow]) -> String {
    let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max("Models".len());
    let mut s = String::new();
    let rule = "-".repeat(width + 22);
    let _ = writeln!(s, "{rule}");
    let _ = writeln!(s, "{:<width$}  {:>9}  {:>9}", "Models", "Training", "Test");
    let _ = writeln!(s, "{rule}");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<width$}  {:>8.2}%  {:>8.2}%",
            r.label,
            100.0 * r.train.rmae,
            100.0 * r.test.rmae
        );
    }
    let _ = writeln!(s, "{rule}");
    s
}

/// Grouped RMAE of every trained model, plus the noiseless oracle.
pub fn evaluate(cfg: &RunConfig) -> Result<Vec<RmaeRow>> {
    cfg.validate()?;
    let inputs = load_inputs(cfg)?;
    let models = load_models(cfg)?;
    let mut surfaces: Vec<(String, String, &dyn ResponseSurface)> = models
        .iter()
        .map(|(m, model)| (m.name().to_string(), m.label().to_string(), model as &dyn ResponseSurface))
        .collect();
    surfaces.push((ORACLE.into(), "Oracle (noiseless)".into(), &inputs.truth));

    let out = &cfg.output;
    let mut rows = Vec::new();
    for (name, label, model) in surfaces {
        let train = evaluate_split(model, &inputs.train, &cfg.grouping, &name)?;
        let test = evaluate_split(model, &inputs.test, &cfg.grouping, &name)?;
        for (split, report) in [("train", &train), ("test", &test)] {
            let path = out.join("groups").join(format!("{name}_{split}.csv"));
            write_file(&path, &group_csv(report, &cfg.grouping)?)?;
        }
        rows.push(RmaeRow {
            method: name,
            label,
            train,
            test,
        });
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "label", "train_rmae", "test_rmae"])?;
    for r in &rows {
        w.write_record([&r.method, &r.label, &r.train.rmae.to_string(), &r.test.rmae.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))?;
    write_file(&out.join("rmae.csv"), &bytes)?;
    write_file(&out.join("rmae.txt"), format_table(&rows).as_bytes())?;
    Ok(rows)
}

/// The three partitions used for partial dependence, keyed by file stem.
pub const PDP_FACTORS: [(&str, FeatureKey); 3] = [
    ("risk", FeatureKey::ProbDefault),
    ("balance_to_limit", FeatureKey::BalanceToLimit),
    ("spend_to_limit", FeatureKey::SpendToLimit),
];

/// Writes per-subgroup ablation curves and partial dependence tables.
/// Returns the written paths.
pub fn curves(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let inputs = load_inputs(cfg)?;
    let models = load_models(cfg)?;
    let customers: Vec<CustomerRecord> = inputs.test.iter().map(|r| r.customer.clone()).collect();

    let mut names: Vec<&str> = models.iter().map(|(m, _)| m.name()).collect();
    names.push(ORACLE);
    let mut surfaces: Vec<&dyn ResponseSurface> = models.iter().map(|(_, m)| m as &dyn ResponseSurface).collect();
    surfaces.push(&inputs.truth);

    let dir = cfg.output.join("curves");
    let mut written = Vec::new();
    let by_subgroup = ablation_curves(&surfaces, &customers, &inputs.design, cfg.treatment_unit, cfg.curve_stride)?;
    for (rating, avg) in &by_subgroup {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["treatment"];
        header.extend(&names);
        w.write_record(&header)?;
        for (i, t) in avg.grid.iter().enumerate() {
            let mut rec = vec![t.to_string()];
            rec.extend(avg.curves.iter().map(|c| c[i].to_string()));
            w.write_record(&rec)?;
        }
        let path = dir.join(format!("subgroup_{}.csv", rating.name()));
        write_file(&path, &w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))?)?;
        written.push(path);
    }

    let grid = treatment_grid(cfg.pdp_max_treatment, cfg.curve_stride)?;
    for (stem, feature) in PDP_FACTORS {
        let partition = Partition::quantiles(feature, &customers, cfg.pdp_cells)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "cell", "lower", "upper", "members", "treatment", "y_hat"])?;
        for (name, model) in names.iter().zip(&surfaces) {
            for (cell, pdp) in partial_dependence(*model, &customers, &partition, &grid)?.iter().enumerate() {
                for (t, y) in grid.iter().zip(&pdp.curve) {
                    w.write_record([
                        name.to_string(),
                        cell.to_string(),
                        pdp.lower.to_string(),
                        pdp.upper.to_string(),
                        pdp.members.to_string(),
                        t.to_string(),
                        y.to_string(),
                    ])?;
                }
            }
        }
        let path = dir.join(format!("pdp_{stem}.csv"));
        write_file(&path, &w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))?)?;
        written.push(path);
    }
    Ok(written)
}

/// All four stages in order.
pub fn run_all(cfg: &RunConfig) -> Result<Vec<RmaeRow>> {
    simulate(cfg)?;
    train(cfg)?;
    let rows = evaluate(cfg)?;
    curves(cfg)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_settings() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.gbdt.num_trees, 50);
        assert_eq!(cfg.gbdt.max_depth, 3);
        assert_eq!(cfg.transform_k, 20_000.0);
        assert_eq!(cfg.lambda, 100.0);
        assert_eq!(cfg.methods().unwrap().len(), 8);
    }

    #[test]
    fn variant_specs() {
        let cfg = RunConfig::default();
        let s = Method::OrLog.model_spec(&cfg).unwrap();
        assert_eq!(s.variant, Variant::OutcomeRegression);
        assert_eq!(s.transform, TreatmentTransform::LogShift { k: 20_000.0 });
        assert_eq!(s.regularization, Regularization::None);
        let s = Method::EncOrLogL1.model_spec(&cfg).unwrap();
        assert_eq!(s.variant, Variant::EncodedOutcomeRegression);
        assert_eq!(s.regularization, Regularization::L1 { lambda: 100.0 });
        assert!(Method::Gbdt.model_spec(&cfg).is_none());
    }

    #[test]
    fn unknown_variant() {
        assert!(matches!("xgboost".parse::<Method>(), Err(Error::UnknownVariant(_))));
    }

    #[test]
    fn split_fraction_out_of_range() {
        let err = RunConfig::from_toml("split_fraction = 1.2\n").unwrap_err();
        assert!(err.to_string().contains("split_fraction"), "{err}");
    }

    #[test]
    fn toml_errors_carry_line() {
        let err = RunConfig::from_toml("seed = 1\nn = \"many\"\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn config_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }
}
