//! Conditional-independence testing design.
//!
//! Treatments are randomized within each of the six subgroups, so that
//! treatment and features are independent given the subgroup label. Menu
//! values are in design units; multiply by a treatment unit to get currency.
use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::domain::{CreditRating, ObservationRecord};
use crate::error::{Error, Result};

/// Menus must sum to one within this tolerance.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// Smallest subgroup size accepted by the balance audit.
pub const MIN_AUDIT_RECORDS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MenuEntry {
    pub t: f64,
    pub p: f64,
}

/// Per-subgroup treatment menus with assignment probabilities.
///
/// Construction enforces the structural invariants (probabilities in (0, 1],
/// summing to one, strictly increasing treatments). The causal assumptions
/// (control holdout, common support) are audited by
/// [`validate_common_support`] so that a flawed design can still be loaded
/// and inspected.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct TestingDesign {
    menus: BTreeMap<CreditRating, Vec<MenuEntry>>,
}

impl<'de> Deserialize<'de> for TestingDesign {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let menus = BTreeMap::<CreditRating, Vec<MenuEntry>>::deserialize(d)?;
        TestingDesign::new(menus).map_err(serde::de::Error::custom)
    }
}

impl TestingDesign {
    pub fn new(menus: BTreeMap<CreditRating, Vec<MenuEntry>>) -> Result<Self> {
        for (rating, menu) in &menus {
            if menu.is_empty() {
                return Err(Error::InvalidDesign(format!("{rating}: empty menu")));
            }
            for e in menu {
                if !e.t.is_finite() || e.t < 0.0 {
                    return Err(Error::InvalidDesign(format!(
                        "{rating}: treatment {} must be finite and non-negative",
                        e.t
                    )));
                }
                if !(e.p > 0.0 && e.p <= 1.0) {
                    return Err(Error::InvalidDesign(format!(
                        "{rating}: probability {} outside (0, 1]",
                        e.p
                    )));
                }
            }
            if menu.windows(2).any(|w| w[0].t >= w[1].t) {
                return Err(Error::InvalidDesign(format!(
                    "{rating}: treatments must be strictly increasing"
                )));
            }
            let total: f64 = menu.iter().map(|e| e.p).sum();
            if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
                return Err(Error::InvalidDesign(format!(
                    "{rating}: probabilities sum to {total}"
                )));
            }
        }
        Ok(TestingDesign { menus })
    }

    pub fn from_menus<I>(menus: I) -> Result<Self>
    where
        I: IntoIterator<Item = (CreditRating, Vec<(f64, f64)>)>,
    {
        TestingDesign::new(
            menus
                .into_iter()
                .map(|(r, m)| (r, m.into_iter().map(|(t, p)| MenuEntry { t, p }).collect()))
                .collect(),
        )
    }

    pub fn menu(&self, rating: CreditRating) -> Result<&[MenuEntry]> {
        self.menus
            .get(&rating)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownSubgroup(rating.to_string()))
    }

    pub fn subgroups(&self) -> impl Iterator<Item = CreditRating> + '_ {
        self.menus.keys().copied()
    }

    pub fn max_treatment(&self, rating: CreditRating) -> Result<f64> {
        Ok(self.menu(rating)?.last().map_or(0.0, |e| e.t))
    }

    pub fn contains(&self, rating: CreditRating, treatment: f64) -> bool {
        self.menu(rating)
            .map(|m| m.iter().any(|e| e.t == treatment))
            .unwrap_or(false)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TestingDesign::from_json(&text)
    }
}

/// The default design: four sub-prime credit ratings with five arms each,
/// and two prime demand levels with four arms each.
pub fn default_design() -> TestingDesign {
    let even = |ts: &[f64]| {
        let p = 1.0 / ts.len() as f64;
        ts.iter().map(|&t| (t, p)).collect::<Vec<_>>()
    };
    TestingDesign::from_menus([
        (CreditRating::VeryGood, even(&[0.0, 30.0, 60.0, 100.0, 150.0])),
        (CreditRating::Good, even(&[0.0, 20.0, 30.0, 60.0, 100.0])),
        (CreditRating::Fair, even(&[0.0, 10.0, 20.0, 30.0, 60.0])),
        (CreditRating::Poor, even(&[0.0, 5.0, 10.0, 20.0, 30.0])),
        (CreditRating::PrimeHigh, even(&[0.0, 100.0, 200.0, 300.0])),
        (CreditRating::PrimeLow, even(&[0.0, 50.0, 100.0, 150.0])),
    ])
    .expect("default design is valid")
}

/// Draws a treatment (design units) from the subgroup's menu.
pub fn assign_treatment<R: Rng + ?Sized>(
    design: &TestingDesign,
    rating: CreditRating,
    rng: &mut R,
) -> Result<f64> {
    let menu = design.menu(rating)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for e in menu {
        acc += e.p;
        if u < acc {
            return Ok(e.t);
        }
    }
    // u landed in the rounding gap below 1.0
    Ok(menu[menu.len() - 1].t)
}

/// Known assignment probability P(T = t | subgroup); zero off-menu.
pub fn design_propensity(design: &TestingDesign, rating: CreditRating, treatment: f64) -> Result<f64> {
    Ok(design
        .menu(rating)?
        .iter()
        .find(|e| e.t == treatment)
        .map_or(0.0, |e| e.p))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// A multi-arm menu entry with probability 1 (or a lone arm).
    NoOverlap { subgroup: CreditRating, treatment: f64, p: f64 },
    NoControl { subgroup: CreditRating },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NoOverlap { subgroup, treatment, p } => write!(
                f,
                "{subgroup}: treatment {treatment} has p={p}; p=1 breaks 0<P(T|L)<1"
            ),
            Violation::NoControl { subgroup } => write!(f, "{subgroup}: no control holdout"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SupportReport {
    pub violations: Vec<Violation>,
}

impl SupportReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks 0 < p < 1 for every arm and that every subgroup keeps a zero-increase
/// control arm.
pub fn validate_common_support(design: &TestingDesign) -> SupportReport {
    let mut violations = Vec::new();
    for (&subgroup, menu) in &design.menus {
        for e in menu {
            if e.p >= 1.0 {
                violations.push(Violation::NoOverlap {
                    subgroup,
                    treatment: e.t,
                    p: e.p,
                });
            }
        }
        if !menu.iter().any(|e| e.t == 0.0) {
            violations.push(Violation::NoControl { subgroup });
        }
    }
    SupportReport { violations }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceRow {
    pub subgroup: CreditRating,
    pub n: usize,
    pub observed: Vec<usize>,
    pub expected: Vec<f64>,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    pub alpha: f64,
    /// Per-subgroup threshold after splitting `alpha` across subgroups.
    pub threshold: f64,
    pub rows: Vec<BalanceRow>,
}

impl BalanceReport {
    pub fn flagged(&self) -> impl Iterator<Item = &BalanceRow> {
        self.rows.iter().filter(|r| r.flagged)
    }

    pub fn is_balanced(&self) -> bool {
        self.flagged().next().is_none()
    }
}

/// Pearson chi-square statistic; cells with zero expectation must be empty.
pub fn chi_square_statistic(observed: &[usize], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum()
}

/// Chi-square goodness of fit of realized treatment frequencies against the
/// menu, per subgroup. `treatment_unit` converts the records' currency
/// treatments back to design units.
///
/// The family of per-subgroup tests is held at level `alpha` with a
/// Bonferroni split: a subgroup is flagged when its p-value is below
/// `alpha / number_of_subgroups`.
pub fn validate_assignment_balance(
    records: &[ObservationRecord],
    design: &TestingDesign,
    treatment_unit: f64,
    alpha: f64,
) -> Result<BalanceReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", "must lie in (0, 1)"));
    }
    let mut counts: BTreeMap<CreditRating, Vec<usize>> = design
        .menus
        .iter()
        .map(|(r, m)| (*r, vec![0; m.len()]))
        .collect();
    for rec in records {
        let rating = rec.customer.credit_rating;
        let menu = design.menu(rating)?;
        let t = rec.treatment / treatment_unit;
        let arm = menu
            .iter()
            .position(|e| (e.t - t).abs() <= 1e-9 * e.t.abs().max(1.0))
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "treatment {} is not on the {rating} menu",
                    rec.treatment
                ))
            })?;
        counts.get_mut(&rating).expect("menu exists")[arm] += 1;
    }

    let threshold = alpha / design.menus.len() as f64;
    let mut rows = Vec::new();
    for (subgroup, observed) in counts {
        let n: usize = observed.iter().sum();
        if n == 0 {
            return Err(Error::InvalidInput(format!("subgroup {subgroup} has no records")));
        }
        if n < MIN_AUDIT_RECORDS {
            return Err(Error::InvalidInput(format!(
                "subgroup {subgroup} has {n} records; the audit needs at least {MIN_AUDIT_RECORDS}"
            )));
        }
        let menu = &design.menus[&subgroup];
        let expected: Vec<f64> = menu.iter().map(|e| e.p * n as f64).collect();
        let chi_square = chi_square_statistic(&observed, &expected);
        let dof = menu.len().saturating_sub(1);
        let p_value = if dof == 0 {
            1.0
        } else {
            let dist = ChiSquared::new(dof as f64).expect("positive dof");
            1.0 - dist.cdf(chi_square)
        };
        rows.push(BalanceRow {
            subgroup,
            n,
            observed,
            expected,
            chi_square,
            dof,
            p_value,
            flagged: p_value < threshold,
        });
    }
    Ok(BalanceReport {
        alpha,
        threshold,
        rows,
    })
}
