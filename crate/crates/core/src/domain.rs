//! Customer records, feature vectors and standardization.
//!
//! Every model in this crate sees a customer through the same fixed feature
//! layout:
//!
//! ```text
//! prob_default, avg_spend_3m, avg_spend_6m, max_spend_12m,
//! avg_balance_3m, avg_balance_6m, current_limit,
//! rating_very_good, rating_good, rating_fair, rating_poor,
//! rating_prime_high, rating_prime_low
//! ```
//!
//! `prob_default` and the rating dummies are never rescaled; the six currency
//! columns are standardized with the sample (n-1) standard deviation.
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The six subgroups of the testing design. The subgroup label is also the
/// artificial confounder on which treatment assignment is randomized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CreditRating {
    VeryGood,
    Good,
    Fair,
    Poor,
    PrimeHigh,
    PrimeLow,
}

impl CreditRating {
    pub const ALL: [CreditRating; 6] = [
        CreditRating::VeryGood,
        CreditRating::Good,
        CreditRating::Fair,
        CreditRating::Poor,
        CreditRating::PrimeHigh,
        CreditRating::PrimeLow,
    ];

    /// Position of this rating in the dummy block.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            CreditRating::VeryGood => "very_good",
            CreditRating::Good => "good",
            CreditRating::Fair => "fair",
            CreditRating::Poor => "poor",
            CreditRating::PrimeHigh => "prime_high",
            CreditRating::PrimeLow => "prime_low",
        }
    }

    pub fn is_prime(self) -> bool {
        matches!(self, CreditRating::PrimeHigh | CreditRating::PrimeLow)
    }
}

impl fmt::Display for CreditRating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CreditRating {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CreditRating::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::UnknownSubgroup(s.to_string()))
    }
}

pub const PROB_DEFAULT: &str = "prob_default";
pub const TREATMENT: &str = "treatment";

/// Currency-valued columns, in schema order. These are the standardized ones.
pub const CONTINUOUS_FEATURES: [&str; 6] = [
    "avg_spend_3m",
    "avg_spend_6m",
    "max_spend_12m",
    "avg_balance_3m",
    "avg_balance_6m",
    "current_limit",
];

pub const RATING_DUMMIES: [&str; 6] = [
    "rating_very_good",
    "rating_good",
    "rating_fair",
    "rating_poor",
    "rating_prime_high",
    "rating_prime_low",
];

/// Offset of the first rating dummy in the customer schema.
pub const DUMMY_OFFSET: usize = 1 + CONTINUOUS_FEATURES.len();

/// Width of the customer schema.
pub const CUSTOMER_WIDTH: usize = DUMMY_OFFSET + RATING_DUMMIES.len();

/// An ordered list of feature names, cheap to clone and compare.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schema(Arc<[String]>);

impl Schema {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Schema(names.into_iter().map(Into::into).collect())
    }

    /// The fixed customer layout.
    pub fn customer() -> Self {
        Schema::new(
            std::iter::once(PROB_DEFAULT)
                .chain(CONTINUOUS_FEATURES)
                .chain(RATING_DUMMIES),
        )
    }

    /// Customer layout followed by a trailing `treatment` column.
    pub fn customer_with_treatment() -> Self {
        Schema::new(
            std::iter::once(PROB_DEFAULT)
                .chain(CONTINUOUS_FEATURES)
                .chain(RATING_DUMMIES)
                .chain(std::iter::once(TREATMENT)),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|n| n == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.position(name).is_some()
    }
}

/// A finite feature vector tagged with its schema.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    schema: Schema,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, schema: Schema) -> Result<Self> {
        if values.len() != schema.len() {
            return Err(Error::SchemaMismatch {
                expected: schema.len(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                field: schema.names()[i].clone(),
            });
        }
        Ok(FeatureVector { values, schema })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.schema.position(name).map(|i| self.values[i])
    }

    /// Appends one named column.
    pub fn with_column(&self, name: &str, value: f64) -> Result<Self> {
        let mut values = self.values.clone();
        values.push(value);
        let schema = Schema::new(self.schema.names().iter().map(String::as_str).chain([name]));
        FeatureVector::new(values, schema)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerRecord {
    pub customer_id: String,
    pub prob_default: f64,
    pub credit_rating: CreditRating,
    pub avg_spend_3m: f64,
    pub avg_spend_6m: f64,
    pub max_spend_12m: f64,
    pub avg_balance_3m: f64,
    pub avg_balance_6m: f64,
    pub current_limit: f64,
}

impl CustomerRecord {
    pub fn validate(&self) -> Result<()> {
        let mut fields = vec![(PROB_DEFAULT, self.prob_default)];
        fields.extend(CONTINUOUS_FEATURES.iter().copied().zip(self.currency_values()));
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    field: name.to_string(),
                });
            }
        }
        if !(0.0..=1.0).contains(&self.prob_default) {
            return Err(Error::invalid(PROB_DEFAULT, "must lie in [0, 1]"));
        }
        for (name, value) in CONTINUOUS_FEATURES.iter().zip(self.currency_values()) {
            if value < 0.0 {
                return Err(Error::invalid(*name, "must be non-negative"));
            }
        }
        if self.current_limit <= 0.0 {
            return Err(Error::invalid("current_limit", "must be positive"));
        }
        Ok(())
    }

    /// Currency fields in schema order.
    pub fn currency_values(&self) -> [f64; 6] {
        [
            self.avg_spend_3m,
            self.avg_spend_6m,
            self.max_spend_12m,
            self.avg_balance_3m,
            self.avg_balance_6m,
            self.current_limit,
        ]
    }

    pub fn balance_to_limit(&self) -> f64 {
        self.avg_balance_6m / self.current_limit
    }

    pub fn spend_to_limit(&self) -> f64 {
        self.avg_spend_6m / self.current_limit
    }

    /// Unscaled values in customer schema order (dummies included).
    pub fn raw_values(&self) -> [f64; CUSTOMER_WIDTH] {
        let mut out = [0.0; CUSTOMER_WIDTH];
        out[0] = self.prob_default;
        out[1..DUMMY_OFFSET].copy_from_slice(&self.currency_values());
        out[DUMMY_OFFSET + self.credit_rating.index()] = 1.0;
        out
    }

    /// Unscaled feature vector. Trees are invariant to monotone rescaling,
    /// so this is what the GBDT models consume.
    pub fn raw_features(&self) -> Result<FeatureVector> {
        self.validate()?;
        FeatureVector::new(self.raw_values().to_vec(), Schema::customer())
    }
}

/// One row of testing data: the customer, the limit increase it received
/// (currency), and the observed growth of balance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub customer: CustomerRecord,
    pub treatment: f64,
    pub outcome: f64,
}

impl ObservationRecord {
    pub fn validate(&self) -> Result<()> {
        self.customer.validate()?;
        if !self.treatment.is_finite() {
            return Err(Error::NonFinite {
                field: TREATMENT.into(),
            });
        }
        if self.treatment < 0.0 {
            return Err(Error::NegativeTreatment(self.treatment));
        }
        if !self.outcome.is_finite() {
            return Err(Error::NonFinite {
                field: "outcome".into(),
            });
        }
        Ok(())
    }
}

/// Per-feature location/scale over the customer schema. Exempt features
/// keep mean 0 and scale 1 so that the transform is the identity on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    schema: Schema,
    mean: Vec<f64>,
    stddev: Vec<f64>,
    exempt: Vec<String>,
}

impl Standardizer {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn mean(&self, name: &str) -> Option<f64> {
        self.schema.position(name).map(|i| self.mean[i])
    }

    pub fn stddev(&self, name: &str) -> Option<f64> {
        self.schema.position(name).map(|i| self.stddev[i])
    }

    pub fn is_exempt(&self, name: &str) -> bool {
        self.exempt.iter().any(|e| e == name)
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

    pub fn transform(&self, x: &FeatureVector) -> Result<FeatureVector> {
        self.check(x)?;
        let values = x
            .values()
            .iter()
            .zip(self.mean.iter().zip(&self.stddev))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        FeatureVector::new(values, self.schema.clone())
    }

    pub fn inverse_transform(&self, z: &FeatureVector) -> Result<FeatureVector> {
        self.check(z)?;
        let values = z
            .values()
            .iter()
            .zip(self.mean.iter().zip(&self.stddev))
            .map(|(v, (m, s))| v * s + m)
            .collect();
        FeatureVector::new(values, self.schema.clone())
    }
}

/// Fits means and sample standard deviations of the currency columns.
pub fn fit_standardizer<'a, I>(records: I) -> Result<Standardizer>
where
    I: IntoIterator<Item = &'a CustomerRecord>,
{
    let mut count = 0usize;
    let mut sums = [0.0f64; 6];
    let mut rows = Vec::new();
    for r in records {
        r.validate()?;
        let v = r.currency_values();
        for (s, x) in sums.iter_mut().zip(v) {
            *s += x;
        }
        rows.push(v);
        count += 1;
    }
    if count < 2 {
        return Err(Error::InvalidInput(format!(
            "standardizer needs at least 2 records, got {count}"
        )));
    }
    let n = count as f64;
    let means = sums.map(|s| s / n);
    let mut ss = [0.0f64; 6];
    for row in &rows {
        for j in 0..6 {
            let d = row[j] - means[j];
            ss[j] += d * d;
        }
    }

    let schema = Schema::customer();
    let mut mean = vec![0.0; CUSTOMER_WIDTH];
    let mut stddev = vec![1.0; CUSTOMER_WIDTH];
    for j in 0..6 {
        let sd = (ss[j] / (n - 1.0)).sqrt();
        // Relative threshold: a column whose spread is rounding noise is constant.
        if sd <= 1e-12 * means[j].abs().max(1.0) {
            return Err(Error::ZeroVariance(CONTINUOUS_FEATURES[j].to_string()));
        }
        mean[1 + j] = means[j];
        stddev[1 + j] = sd;
    }
    let exempt = std::iter::once(PROB_DEFAULT)
        .chain(RATING_DUMMIES)
        .map(String::from)
        .collect();
    Ok(Standardizer {
        schema,
        mean,
        stddev,
        exempt,
    })
}

/// `[prob_default, standardized currency columns, one-hot rating]`.
pub fn encode_features(record: &CustomerRecord, standardizer: &Standardizer) -> Result<FeatureVector> {
    standardizer.transform(&record.raw_features()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn record(rating: CreditRating) -> CustomerRecord {
        CustomerRecord {
            customer_id: "C1".into(),
            prob_default: 0.07,
            credit_rating: rating,
            avg_spend_3m: 1000.0,
            avg_spend_6m: 1100.0,
            max_spend_12m: 2500.0,
            avg_balance_3m: 3000.0,
            avg_balance_6m: 2800.0,
            current_limit: 10000.0,
        }
    }

    fn scaled(rec: &CustomerRecord, k: f64) -> CustomerRecord {
        CustomerRecord {
            avg_spend_3m: rec.avg_spend_3m * k,
            avg_spend_6m: rec.avg_spend_6m * k,
            max_spend_12m: rec.max_spend_12m * k,
            avg_balance_3m: rec.avg_balance_3m * k,
            avg_balance_6m: rec.avg_balance_6m * k,
            current_limit: rec.current_limit * k,
            ..rec.clone()
        }
    }

    #[test]
    fn poor_rating_dummy_block() {
        let a = record(CreditRating::Poor);
        let s = fit_standardizer(&[a.clone(), scaled(&a, 2.0)]).unwrap();
        let x = encode_features(&a, &s).unwrap();
        assert_eq!(&x.values()[DUMMY_OFFSET..], &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(x.values()[0], 0.07);
    }

    #[test]
    fn mean_maps_to_zero() {
        let a = record(CreditRating::Good);
        let b = scaled(&a, 3.0);
        let mid = scaled(&a, 2.0);
        let s = fit_standardizer(&[a, b]).unwrap();
        let x = encode_features(&mid, &s).unwrap();
        for v in &x.values()[1..DUMMY_OFFSET] {
            assert!(v.abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn two_point_sample_stddev() {
        let mut a = record(CreditRating::Fair);
        let mut b = a.clone();
        a.avg_spend_3m = 1.0;
        b.avg_spend_3m = 3.0;
        b.avg_spend_6m += 1.0;
        b.max_spend_12m += 1.0;
        b.avg_balance_3m += 1.0;
        b.avg_balance_6m += 1.0;
        b.current_limit += 1.0;
        let s = fit_standardizer(&[a, b]).unwrap();
        assert_eq!(s.mean("avg_spend_3m"), Some(2.0));
        // sample convention: sum of squares 2 over n - 1 = 1
        assert!((s.stddev("avg_spend_3m").unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_record_rejected() {
        let a = record(CreditRating::Fair);
        assert!(matches!(fit_standardizer(&[a]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn constant_column_rejected() {
        let a = record(CreditRating::Fair);
        let mut b = scaled(&a, 2.0);
        b.current_limit = a.current_limit;
        match fit_standardizer(&[a, b]) {
            Err(Error::ZeroVariance(name)) => assert_eq!(name, "current_limit"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_finite_field_named() {
        let mut a = record(CreditRating::Fair);
        let s = fit_standardizer(&[a.clone(), scaled(&a, 2.0)]).unwrap();
        a.avg_balance_3m = f64::NAN;
        match encode_features(&a, &s) {
            Err(Error::NonFinite { field }) => assert_eq!(field, "avg_balance_3m"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn record_bounds() {
        let mut a = record(CreditRating::Fair);
        a.prob_default = 1.2;
        assert!(a.validate().is_err());
        let mut b = record(CreditRating::Fair);
        b.current_limit = 0.0;
        assert!(b.validate().is_err());
        let mut c = record(CreditRating::Fair);
        c.avg_spend_6m = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn rating_names_round_trip() {
        for r in CreditRating::ALL {
            assert_eq!(r.name().parse::<CreditRating>().unwrap(), r);
            assert_eq!(RATING_DUMMIES[r.index()], format!("rating_{}", r.name()));
        }
    }
}
