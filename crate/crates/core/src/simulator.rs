//! Synthetic customer populations with a known balance response.
//!
//! The response of a customer to a limit increase `T` (currency) is
//!
//! ```text
//! Y(T) = a(L) + b(L) * ln(1 + T / k_true) + noise
//! ```
//!
//! where `a` is the untreated drift and `b = scale * softplus(score)` is a
//! non-negative gain driven by risk, utilization and spend. Both depend on
//! the balance-to-limit and spend-to-limit ratios, which are not among the
//! model features, so linear models can only approximate them.
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::design::{assign_treatment, TestingDesign};
use crate::domain::{CreditRating, CustomerRecord, ObservationRecord};
use crate::error::{Error, Result};

const STREAM_POPULATION: u64 = 1;
const STREAM_ASSIGNMENT: u64 = 2;
const STREAM_OUTCOME: u64 = 3;
const STREAM_SPLIT: u64 = 4;

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaseDrift {
    pub intercept: f64,
    pub prob_default: f64,
    pub balance_ratio: f64,
    pub balance_ratio_sq: f64,
    pub spend_ratio: f64,
}

impl Default for BaseDrift {
    fn default() -> Self {
        BaseDrift {
            intercept: -95_000.0,
            prob_default: -30_000.0,
            balance_ratio: 45_000.0,
            balance_ratio_sq: -45_000.0,
            spend_ratio: 20_000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogGain {
    pub scale: f64,
    pub intercept: f64,
    pub prob_default: f64,
    pub balance_ratio: f64,
    pub spend_ratio: f64,
}

impl Default for LogGain {
    fn default() -> Self {
        LogGain {
            scale: 20_000.0,
            intercept: -1.0,
            prob_default: 80.0,
            balance_ratio: 3.0,
            spend_ratio: 3.0,
        }
    }
}

/// Parameters of the oracle response surface. `k_true` and `noise_sigma`
/// are in currency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundTruth {
    pub base: BaseDrift,
    pub gain: LogGain,
    pub k_true: f64,
    pub noise_sigma: f64,
}

impl Default for GroundTruth {
    fn default() -> Self {
        GroundTruth {
            base: BaseDrift::default(),
            gain: LogGain::default(),
            k_true: 8_000.0,
            noise_sigma: 60_000.0,
        }
    }
}

impl GroundTruth {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_true.is_finite() && self.k_true > 0.0) {
            return Err(Error::invalid("k_true", "must be positive"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma", "must be non-negative"));
        }
        if !(self.gain.scale.is_finite() && self.gain.scale >= 0.0) {
            return Err(Error::invalid("gain.scale", "must be non-negative"));
        }
        Ok(())
    }

    /// Untreated drift a(L).
    pub fn base(&self, r: &CustomerRecord) -> f64 {
        let u = r.balance_to_limit();
        let b = &self.base;
        b.intercept
            + b.prob_default * r.prob_default
            + b.balance_ratio * u
            + b.balance_ratio_sq * u * u
            + b.spend_ratio * r.spend_to_limit()
    }

    /// Log-gain coefficient b(L) >= 0.
    pub fn gain(&self, r: &CustomerRecord) -> f64 {
        let g = &self.gain;
        let score = g.intercept
            + g.prob_default * r.prob_default
            + g.balance_ratio * r.balance_to_limit()
            + g.spend_ratio * r.spend_to_limit();
        g.scale * softplus(score)
    }

    fn check_treatment(treatment: f64) -> Result<()> {
        if !treatment.is_finite() {
            return Err(Error::NonFinite {
                field: "treatment".into(),
            });
        }
        if treatment < 0.0 {
            return Err(Error::NegativeTreatment(treatment));
        }
        Ok(())
    }

    /// Noiseless expected outcome.
    pub fn true_response(&self, r: &CustomerRecord, treatment: f64) -> Result<f64> {
        Self::check_treatment(treatment)?;
        Ok(self.base(r) + self.gain(r) * (treatment / self.k_true).ln_1p())
    }

    /// Exact derivative of [`true_response`](Self::true_response) in `T`.
    pub fn true_marginal_effect(&self, r: &CustomerRecord, treatment: f64) -> Result<f64> {
        Self::check_treatment(treatment)?;
        Ok(self.gain(r) / (treatment + self.k_true))
    }

    pub fn sample_outcome<R: Rng + ?Sized>(
        &self,
        r: &CustomerRecord,
        treatment: f64,
        rng: &mut R,
    ) -> Result<f64> {
        let mean = self.true_response(r, treatment)?;
        if self.noise_sigma == 0.0 {
            return Ok(mean);
        }
        let z: f64 = rng.sample(StandardNormal);
        Ok(mean + self.noise_sigma * z)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let gt: GroundTruth = serde_json::from_str(text)?;
        gt.validate()?;
        Ok(gt)
    }
}

/// Latent parameters of one rating band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    /// Share of the population.
    pub share: f64,
    /// Mean of log current_limit.
    pub log_limit: f64,
    /// Mean logit of balance-to-limit.
    pub utilization_logit: f64,
    /// Mean logit of prob_default.
    pub default_logit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationParams {
    pub very_good: Band,
    pub good: Band,
    pub fair: Band,
    pub poor: Band,
    /// Prime customers before the demand split.
    pub prime: Band,
    /// Prime customers with avg_spend_6m above this quantile (over prime
    /// customers of the population) are high demand.
    pub demand_quantile: f64,
    /// Mean log spend-to-limit ratio.
    pub spend_ratio_log: f64,
}

impl Default for PopulationParams {
    fn default() -> Self {
        let band = |share, log_limit, utilization_logit, default_logit| Band {
            share,
            log_limit,
            utilization_logit,
            default_logit,
        };
        PopulationParams {
            very_good: band(0.20, 10.3, -1.0, -4.2),
            good: band(0.20, 9.9, -0.6, -3.6),
            fair: band(0.18, 9.5, -0.2, -3.0),
            poor: band(0.12, 9.0, 0.3, -2.2),
            prime: band(0.30, 11.0, -1.2, -4.8),
            demand_quantile: 0.5,
            spend_ratio_log: -1.6,
        }
    }
}

impl PopulationParams {
    fn bands(&self) -> [(Option<CreditRating>, &Band); 5] {
        [
            (Some(CreditRating::VeryGood), &self.very_good),
            (Some(CreditRating::Good), &self.good),
            (Some(CreditRating::Fair), &self.fair),
            (Some(CreditRating::Poor), &self.poor),
            (None, &self.prime),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.bands().iter().map(|(_, b)| b.share).sum();
        if self.bands().iter().any(|(_, b)| !(b.share >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("population", "band shares must be non-negative and sum to 1"));
        }
        if !(self.demand_quantile > 0.0 && self.demand_quantile < 1.0) {
            return Err(Error::invalid("demand_quantile", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Draws `n` customers. Spends, balances and limits are log-normal and
/// share a latent utilization factor; riskier bands have lower limits,
/// higher utilization and higher default probability.
pub fn generate_population(n: usize, params: &PopulationParams, seed: u64) -> Result<Vec<CustomerRecord>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_POPULATION);
    let bands = params.bands();

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = bands.len() - 1;
        for (j, (_, b)) in bands.iter().enumerate() {
            acc += b.share;
            if u < acc {
                pick = j;
                break;
            }
        }
        let (rating, band) = bands[pick];
        let mut z = || -> f64 { rng.sample(StandardNormal) };
        let (z_util, z_limit, z_spend, z_risk) = (z(), z(), z(), z());
        let (e_bal, e_spend, e_max) = (z(), z(), z());

        let limit = (band.log_limit + 0.35 * z_limit).exp();
        let utilization = logistic(band.utilization_logit + 0.9 * z_util);
        let prob_default = logistic(band.default_logit + 0.4 * z_risk + 0.35 * z_util);
        let spend_ratio = (params.spend_ratio_log + 0.5 * z_spend + 0.2 * z_util).exp();

        let avg_balance_6m = utilization * limit;
        let avg_spend_6m = spend_ratio * limit;
        out.push(CustomerRecord {
            customer_id: format!("C{i:07}"),
            prob_default,
            // prime demand level is settled below
            credit_rating: rating.unwrap_or(CreditRating::PrimeLow),
            avg_spend_3m: avg_spend_6m * (0.2 * e_spend).exp(),
            avg_spend_6m,
            max_spend_12m: avg_spend_6m * (1.2 + 0.6 * e_max.abs()),
            avg_balance_3m: avg_balance_6m * (0.15 * e_bal).exp(),
            avg_balance_6m,
            current_limit: limit,
        });
    }

    let mut prime_spend: Vec<f64> = out
        .iter()
        .filter(|r| r.credit_rating.is_prime())
        .map(|r| r.avg_spend_6m)
        .collect();
    if !prime_spend.is_empty() {
        prime_spend.sort_by(f64::total_cmp);
        let rank = ((params.demand_quantile * prime_spend.len() as f64).ceil() as usize).max(1);
        let threshold = prime_spend[rank - 1];
        for r in out.iter_mut().filter(|r| r.credit_rating.is_prime()) {
            if r.avg_spend_6m > threshold {
                r.credit_rating = CreditRating::PrimeHigh;
            }
        }
    }
    Ok(out)
}

/// Everything needed to regenerate a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub n: usize,
    pub seed: u64,
    pub split_fraction: f64,
    /// Currency per design unit.
    pub treatment_unit: f64,
    pub population: PopulationParams,
    pub ground_truth: GroundTruth,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            n: 100_000,
            seed: 20_200_101,
            split_fraction: 0.5,
            treatment_unit: 1000.0,
            population: PopulationParams::default(),
            ground_truth: GroundTruth::default(),
        }
    }
}

/// Train/test split of a simulated testing campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Vec<ObservationRecord>,
    pub test: Vec<ObservationRecord>,
}

/// Population, per-subgroup randomized treatment, noisy outcome and a
/// Bernoulli(split_fraction) train/test split.
pub fn build_dataset(spec: &SimulationSpec, design: &TestingDesign) -> Result<SplitDataset> {
    if !(spec.split_fraction > 0.0 && spec.split_fraction < 1.0) {
        return Err(Error::invalid("split_fraction", "must lie strictly between 0 and 1"));
    }
    if !(spec.treatment_unit.is_finite() && spec.treatment_unit > 0.0) {
        return Err(Error::invalid("treatment_unit", "must be positive"));
    }
    spec.ground_truth.validate()?;
    let population = generate_population(spec.n, &spec.population, spec.seed)?;

    let stream = |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(s);
        rng
    };
    let mut assign_rng = stream(STREAM_ASSIGNMENT);
    let mut outcome_rng = stream(STREAM_OUTCOME);
    let mut split_rng = stream(STREAM_SPLIT);

    let mut train = Vec::new();
    let mut test = Vec::new();
    for customer in population {
        let treatment =
            assign_treatment(design, customer.credit_rating, &mut assign_rng)? * spec.treatment_unit;
        let outcome = spec
            .ground_truth
            .sample_outcome(&customer, treatment, &mut outcome_rng)?;
        let row = ObservationRecord {
            customer,
            treatment,
            outcome,
        };
        if split_rng.random::<f64>() < spec.split_fraction {
            train.push(row);
        } else {
            test.push(row);
        }
    }
    Ok(SplitDataset { train, test })
}
