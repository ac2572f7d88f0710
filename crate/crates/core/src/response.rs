//! Structural balance-response models.
//!
//! All regression variants share the form
//!
//! ```text
//! Y(T) = g(x) + phi(T) * h(x)
//! ```
//!
//! with `g` and `h` affine in a feature vector `x`. `x` is either the
//! standardized customer vector or, for the encoded variant, the one-hot
//! leaf pattern of a GBDT fitted on the customer features without the
//! treatment. Linear regression is the special case where `h` is a single
//! constant. `phi` is the identity or `ln(1 + T/k)`.
//!
//! The design row is `[1, x, phi, phi * x]`, so the coefficient vector is
//! laid out as `[g_0, g_1..g_d, h_0, h_1..h_d]`.
use serde::{Deserialize, Serialize};

use crate::domain::{
    encode_features, fit_standardizer, CustomerRecord, FeatureVector, ObservationRecord, Schema,
    Standardizer, CUSTOMER_WIDTH, DUMMY_OFFSET, TREATMENT,
};
use crate::error::{Error, Result};
use crate::gbdt::{fit_encoder, fit_gbdt, GbdtModel, GbdtParams};
use crate::solver::{lasso, least_squares, ridge, CdOptions, Gram, SparseRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreatmentTransform {
    Identity,
    LogShift { k: f64 },
}

impl TreatmentTransform {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TreatmentTransform::Identity => Ok(()),
            TreatmentTransform::LogShift { k } if k.is_finite() && k > 0.0 => Ok(()),
            TreatmentTransform::LogShift { .. } => Err(Error::invalid("k", "must be positive")),
        }
    }

    pub fn apply(&self, t: f64) -> f64 {
        match *self {
            TreatmentTransform::Identity => t,
            TreatmentTransform::LogShift { k } => (t / k).ln_1p(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            TreatmentTransform::Identity => 1.0,
            TreatmentTransform::LogShift { k } => 1.0 / (t + k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularization {
    None,
    L1 { lambda: f64 },
    L2 { lambda: f64 },
}

impl Regularization {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Regularization::None => Ok(()),
            Regularization::L1 { lambda } | Regularization::L2 { lambda }
                if lambda.is_finite() && lambda >= 0.0 =>
            {
                Ok(())
            }
            _ => Err(Error::invalid("lambda", "must be non-negative")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    LinearRegression,
    OutcomeRegression,
    EncodedOutcomeRegression,
}

fn check_treatment(t: f64) -> Result<()> {
    if !t.is_finite() {
        return Err(Error::NonFinite {
            field: TREATMENT.into(),
        });
    }
    if t < 0.0 {
        return Err(Error::NegativeTreatment(t));
    }
    Ok(())
}

/// `[1, x, phi(T), phi(T) * x]` for a feature vector `x`.
pub fn build_design_matrix(
    features: &FeatureVector,
    transform: TreatmentTransform,
    treatment: f64,
) -> Result<Vec<f64>> {
    check_treatment(treatment)?;
    transform.validate()?;
    let phi = transform.apply(treatment);
    let x = features.values();
    let mut row = Vec::with_capacity(2 * x.len() + 2);
    row.push(1.0);
    row.extend_from_slice(x);
    row.push(phi);
    row.extend(x.iter().map(|v| phi * v));
    Ok(row)
}

/// Anything that predicts a counterfactual outcome for a customer.
pub trait ResponseSurface {
    fn predict(&self, record: &CustomerRecord, treatment: f64) -> Result<f64>;

    /// Predictions over a treatment grid.
    fn curve(&self, record: &CustomerRecord, grid: &[f64]) -> Result<Vec<f64>> {
        grid.iter().map(|&t| self.predict(record, t)).collect()
    }
}

/// Sparse view of a customer in model feature space.
#[derive(Debug, Clone)]
struct Features {
    index: Vec<usize>,
    value: Vec<f64>,
}

impl Features {
    fn affine(&self, w: &[f64]) -> f64 {
        w[0] + self
            .index
            .iter()
            .zip(&self.value)
            .map(|(&i, v)| w[1 + i] * v)
            .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseModel {
    variant: Variant,
    transform: TreatmentTransform,
    regularization: Regularization,
    /// `[intercept, x_1..x_d]`
    w_g: Vec<f64>,
    /// `[intercept]` for linear regression, `[intercept, x_1..x_d]` otherwise.
    w_h: Vec<f64>,
    standardizer: Option<Standardizer>,
    encoder: Option<GbdtModel>,
    /// Columns held at zero because they were collinear with earlier ones.
    #[serde(default)]
    aliased: Vec<String>,
}

impl ResponseModel {
    /// Assembles a model from explicit coefficients.
    pub fn from_parts(
        variant: Variant,
        transform: TreatmentTransform,
        w_g: Vec<f64>,
        w_h: Vec<f64>,
        standardizer: Option<Standardizer>,
        encoder: Option<GbdtModel>,
    ) -> Result<Self> {
        transform.validate()?;
        let d = match (variant, &standardizer, &encoder) {
            (Variant::EncodedOutcomeRegression, _, Some(e)) => e.total_leaves(),
            (Variant::EncodedOutcomeRegression, _, None) => {
                return Err(Error::InvalidInput("encoded variant needs an encoder".into()))
            }
            (_, Some(s), _) => s.schema().len(),
            (_, None, _) => return Err(Error::InvalidInput("raw-feature variant needs a standardizer".into())),
        };
        let h_len = if variant == Variant::LinearRegression { 1 } else { d + 1 };
        if w_g.len() != d + 1 || w_h.len() != h_len {
            return Err(Error::SchemaMismatch {
                expected: d + 1 + h_len,
                found: w_g.len() + w_h.len(),
            });
        }
        Ok(ResponseModel {
            variant,
            transform,
            regularization: Regularization::None,
            w_g,
            w_h,
            standardizer,
            encoder,
            aliased: Vec::new(),
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn transform(&self) -> TreatmentTransform {
        self.transform
    }

    pub fn regularization(&self) -> Regularization {
        self.regularization
    }

    pub fn g_coefficients(&self) -> &[f64] {
        &self.w_g
    }

    pub fn h_coefficients(&self) -> &[f64] {
        &self.w_h
    }

    pub fn standardizer(&self) -> Option<&Standardizer> {
        self.standardizer.as_ref()
    }

    pub fn encoder(&self) -> Option<&GbdtModel> {
        self.encoder.as_ref()
    }

    pub fn aliased(&self) -> &[String] {
        &self.aliased
    }

    /// Schema of the vector `x` that `g` and `h` act on.
    pub fn feature_schema(&self) -> Schema {
        match &self.encoder {
            Some(e) if self.variant == Variant::EncodedOutcomeRegression => e.leaf_schema(),
            _ => Schema::customer(),
        }
    }

    fn features(&self, record: &CustomerRecord) -> Result<Features> {
        match self.variant {
            Variant::EncodedOutcomeRegression => {
                record.validate()?;
                let enc = self.encoder.as_ref().expect("encoded model carries an encoder");
                let index = enc.leaf_columns(&record.raw_values());
                let value = vec![1.0; index.len()];
                Ok(Features { index, value })
            }
            _ => {
                let std = self.standardizer.as_ref().expect("raw model carries a standardizer");
                let x = encode_features(record, std)?;
                Ok(Features {
                    index: (0..x.len()).collect(),
                    value: x.values().to_vec(),
                })
            }
        }
    }

    fn features_from_vector(&self, x: &FeatureVector) -> Result<Features> {
        let expected = self.w_g.len() - 1;
        if x.len() != expected {
            return Err(Error::SchemaMismatch {
                expected,
                found: x.len(),
            });
        }
        if self.variant != Variant::EncodedOutcomeRegression && x.schema() != &Schema::customer() {
            return Err(Error::SchemaMismatch {
                expected,
                found: x.len(),
            });
        }
        Ok(Features {
            index: (0..x.len()).collect(),
            value: x.values().to_vec(),
        })
    }

    fn g(&self, f: &Features) -> f64 {
        f.affine(&self.w_g)
    }

    fn h(&self, f: &Features) -> f64 {
        if self.w_h.len() == 1 {
            self.w_h[0]
        } else {
            f.affine(&self.w_h)
        }
    }

    /// `h(x)` for a customer.
    pub fn gain(&self, record: &CustomerRecord) -> Result<f64> {
        Ok(self.h(&self.features(record)?))
    }

    /// `g(x)` for a customer.
    pub fn baseline(&self, record: &CustomerRecord) -> Result<f64> {
        Ok(self.g(&self.features(record)?))
    }

    pub fn predict_response(&self, record: &CustomerRecord, treatment: f64) -> Result<f64> {
        check_treatment(treatment)?;
        let f = self.features(record)?;
        Ok(self.g(&f) + self.transform.apply(treatment) * self.h(&f))
    }

    /// Prediction from an already-encoded vector (standardized customer
    /// features, or the leaf encoding for the encoded variant).
    pub fn predict_features(&self, x: &FeatureVector, treatment: f64) -> Result<f64> {
        check_treatment(treatment)?;
        let f = self.features_from_vector(x)?;
        Ok(self.g(&f) + self.transform.apply(treatment) * self.h(&f))
    }

    /// `dY/dT = h(x) * phi'(T)`.
    pub fn marginal_effect(&self, record: &CustomerRecord, treatment: f64) -> Result<f64> {
        check_treatment(treatment)?;
        let f = self.features(record)?;
        Ok(self.h(&f) * self.transform.derivative(treatment))
    }

    pub fn marginal_effect_features(&self, x: &FeatureVector, treatment: f64) -> Result<f64> {
        check_treatment(treatment)?;
        let f = self.features_from_vector(x)?;
        Ok(self.h(&f) * self.transform.derivative(treatment))
    }

    /// `(T, Y(T))` pairs over a sorted non-negative grid.
    pub fn response_curve(&self, record: &CustomerRecord, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
        check_grid(grid)?;
        let ys = ResponseSurface::curve(self, record, grid)?;
        Ok(grid.iter().copied().zip(ys).collect())
    }

    /// Dense design row used to fit this model.
    pub fn design_row(&self, record: &CustomerRecord, treatment: f64) -> Result<Vec<f64>> {
        check_treatment(treatment)?;
        let f = self.features(record)?;
        let row = design_row(&f, self.w_g.len() - 1, self.variant, self.transform.apply(treatment));
        Ok(row.to_dense(self.w_g.len() + self.w_h.len()))
    }

    /// Coefficients in design-row order.
    pub fn coefficients(&self) -> Vec<f64> {
        self.w_g.iter().chain(&self.w_h).copied().collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::invalid("grid", "treatments must be finite and non-negative"));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("grid", "must be sorted"));
    }
    Ok(())
}

impl ResponseSurface for ResponseModel {
    fn predict(&self, record: &CustomerRecord, treatment: f64) -> Result<f64> {
        self.predict_response(record, treatment)
    }

    fn curve(&self, record: &CustomerRecord, grid: &[f64]) -> Result<Vec<f64>> {
        let f = self.features(record)?;
        let (g, h) = (self.g(&f), self.h(&f));
        grid.iter()
            .map(|&t| {
                check_treatment(t)?;
                Ok(g + self.transform.apply(t) * h)
            })
            .collect()
    }
}

fn design_row(f: &Features, d: usize, variant: Variant, phi: f64) -> SparseRow {
    let mut row = SparseRow::default();
    row.push(0, 1.0);
    for (&i, &v) in f.index.iter().zip(&f.value) {
        row.push(1 + i, v);
    }
    let h0 = d + 1;
    row.push(h0, phi);
    if variant != Variant::LinearRegression {
        for (&i, &v) in f.index.iter().zip(&f.value) {
            row.push(h0 + 1 + i, phi * v);
        }
    }
    row
}

/// What to fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    pub transform: TreatmentTransform,
    pub regularization: Regularization,
    /// Encoder settings for the encoded variant.
    #[serde(default)]
    pub encoder: GbdtParams,
}

/// Fits the leaf encoder used by the encoded variant: a GBDT on the
/// unscaled customer features (no treatment) predicting the outcome.
pub fn fit_outcome_encoder(train: &[ObservationRecord], params: &GbdtParams) -> Result<GbdtModel> {
    let x = train
        .iter()
        .map(|r| r.customer.raw_features())
        .collect::<Result<Vec<_>>>()?;
    let y: Vec<f64> = train.iter().map(|r| r.outcome).collect();
    fit_encoder(&x, &y, params)
}

/// Fits a response model by regularized least squares.
pub fn fit_response(train: &[ObservationRecord], spec: &ModelSpec) -> Result<ResponseModel> {
    let encoder = match spec.variant {
        Variant::EncodedOutcomeRegression => Some(fit_outcome_encoder(train, &spec.encoder)?),
        _ => None,
    };
    fit_response_with_encoder(train, spec, encoder)
}

/// As [`fit_response`], reusing an already fitted encoder for the encoded
/// variant.
pub fn fit_response_with_encoder(
    train: &[ObservationRecord],
    spec: &ModelSpec,
    encoder: Option<GbdtModel>,
) -> Result<ResponseModel> {
    spec.transform.validate()?;
    spec.regularization.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidInput("no training rows".into()));
    }
    for r in train {
        r.validate()?;
    }

    let (standardizer, encoder, d) = match spec.variant {
        Variant::EncodedOutcomeRegression => {
            let enc = encoder.ok_or_else(|| Error::InvalidInput("encoded variant needs an encoder".into()))?;
            if enc.schema() != &Schema::customer() {
                return Err(Error::SchemaMismatch {
                    expected: CUSTOMER_WIDTH,
                    found: enc.schema().len(),
                });
            }
            let d = enc.total_leaves();
            (None, Some(enc), d)
        }
        _ => {
            let std = fit_standardizer(train.iter().map(|r| &r.customer))?;
            (Some(std), None, CUSTOMER_WIDTH)
        }
    };
    let h_len = if spec.variant == Variant::LinearRegression { 1 } else { d + 1 };
    let p = d + 1 + h_len;

    let mut model = ResponseModel {
        variant: spec.variant,
        transform: spec.transform,
        regularization: spec.regularization,
        w_g: vec![0.0; d + 1],
        w_h: vec![0.0; h_len],
        standardizer,
        encoder,
        aliased: Vec::new(),
    };

    let rows = train
        .iter()
        .map(|r| {
            let f = model.features(&r.customer)?;
            Ok(design_row(&f, d, spec.variant, spec.transform.apply(r.treatment)))
        })
        .collect::<Result<Vec<_>>>()?;
    let y: Vec<f64> = train.iter().map(|r| r.outcome).collect();
    let gram = Gram::from_rows(&rows, &y, p)?;

    let h0 = d + 1;
    let names = column_names(&model.feature_schema(), h_len > 1);
    let penalized: Vec<bool> = (0..p).map(|j| j != 0 && j != h0).collect();

    let w = match spec.regularization {
        Regularization::None => {
            let mut active = vec![true; p];
            for start in reference_columns(&model, d) {
                active[1 + start] = false;
                if h_len > 1 {
                    active[h0 + 1 + start] = false;
                }
            }
            let (w, aliased) = least_squares(&gram, &active);
            if !aliased.is_empty() {
                if spec.variant != Variant::EncodedOutcomeRegression {
                    return Err(Error::Singular(names[aliased[0]].clone()));
                }
                model.aliased = aliased.iter().map(|&j| names[j].clone()).collect();
            }
            w
        }
        Regularization::L2 { lambda } => ridge(&gram, lambda, &penalized)?,
        Regularization::L1 { lambda } => lasso(&gram, lambda, &penalized, CdOptions::default()).w,
    };
    model.w_g = w[..h0].to_vec();
    model.w_h = w[h0..].to_vec();
    Ok(model)
}

/// First column of every one-hot block, dropped in unpenalized fits so the
/// blocks are not collinear with the intercepts.
fn reference_columns(model: &ResponseModel, d: usize) -> Vec<usize> {
    match (&model.encoder, model.variant) {
        (Some(e), Variant::EncodedOutcomeRegression) => e.block_offsets(),
        _ => {
            debug_assert_eq!(d, CUSTOMER_WIDTH);
            vec![DUMMY_OFFSET]
        }
    }
}

fn column_names(schema: &Schema, full_h: bool) -> Vec<String> {
    let mut out = vec!["g:intercept".to_string()];
    out.extend(schema.names().iter().map(|n| format!("g:{n}")));
    out.push("h:intercept".into());
    if full_h {
        out.extend(schema.names().iter().map(|n| format!("h:{n}")));
    }
    out
}

/// Boosted trees on the customer features plus the raw treatment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleGbdt {
    model: GbdtModel,
}

impl SingleGbdt {
    pub fn fit(train: &[ObservationRecord], params: &GbdtParams) -> Result<Self> {
        let x = train
            .iter()
            .map(|r| {
                r.validate()?;
                r.customer.raw_features()?.with_column(TREATMENT, r.treatment)
            })
            .collect::<Result<Vec<_>>>()?;
        let y: Vec<f64> = train.iter().map(|r| r.outcome).collect();
        Ok(SingleGbdt {
            model: fit_gbdt(&x, &y, params)?,
        })
    }

    pub fn model(&self) -> &GbdtModel {
        &self.model
    }

    /// Split thresholds on the treatment column across all trees, sorted.
    pub fn treatment_thresholds(&self) -> Vec<f64> {
        let f = CUSTOMER_WIDTH;
        let mut out: Vec<f64> = self.model.trees().iter().flat_map(|t| t.thresholds(f)).collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

impl ResponseSurface for SingleGbdt {
    fn predict(&self, record: &CustomerRecord, treatment: f64) -> Result<f64> {
        check_treatment(treatment)?;
        record.validate()?;
        let mut x = record.raw_values().to_vec();
        x.push(treatment);
        Ok(self.model.predict_values(&x))
    }

    fn curve(&self, record: &CustomerRecord, grid: &[f64]) -> Result<Vec<f64>> {
        record.validate()?;
        let mut x = record.raw_values().to_vec();
        x.push(0.0);
        grid.iter()
            .map(|&t| {
                check_treatment(t)?;
                x[CUSTOMER_WIDTH] = t;
                Ok(self.model.predict_values(&x))
            })
            .collect()
    }
}

impl ResponseSurface for crate::simulator::GroundTruth {
    fn predict(&self, record: &CustomerRecord, treatment: f64) -> Result<f64> {
        self.true_response(record, treatment)
    }
}
