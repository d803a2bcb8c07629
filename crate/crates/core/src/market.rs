//! Market and strategy-profile data model.

use num::{BigRational, Zero};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A linear Fisher market with one unit of every good.
///
/// Inputs are kept exactly; the working copy is normalized so that every
/// utility row sums to 1 and total money is 1. Payoffs are reported in the
/// original units by multiplying with the per-buyer utility scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    raw_utilities: Vec<Vec<BigRational>>,
    raw_money: Vec<BigRational>,
    utilities: Vec<Vec<f64>>,
    money: Vec<f64>,
    utility_scale: Vec<f64>,
    money_scale: f64,
}

impl Market {
    /// Validates and normalizes a market given in exact arithmetic.
    pub fn from_rational(utilities: Vec<Vec<BigRational>>, money: Vec<BigRational>) -> Result<Self> {
        let m = utilities.len();
        if m < 2 {
            return Err(Error::TooFewBuyers { required: 2, got: m });
        }
        let n = utilities[0].len();
        if n == 0 {
            return Err(Error::Dimension("market has no goods".into()));
        }
        if money.len() != m {
            return Err(Error::Dimension(format!(
                "{m} utility rows but {} money entries",
                money.len()
            )));
        }
        for (i, row) in utilities.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!("utility row {i} has {} entries, expected {n}", row.len())));
            }
            if let Some(j) = row.iter().position(|v| v < &<BigRational as Zero>::zero()) {
                return Err(Error::NegativeEntry(i, j));
            }
            if row.iter().all(|v| v.is_zero()) {
                return Err(Error::ZeroUtilityRow(i));
            }
        }
        if let Some(i) = money.iter().position(|v| v <= &<BigRational as Zero>::zero()) {
            return Err(Error::NonpositiveMoney(i));
        }

        let exact = normalize_exact(&utilities, &money);
        let utility_scale = utilities
            .iter()
            .map(|row| Scalar::to_f64(&<BigRational as Scalar>::sum(row)))
            .collect();
        let money_scale = Scalar::to_f64(&<BigRational as Scalar>::sum(&money));
        Ok(Self {
            utilities: exact
                .0
                .iter()
                .map(|row| row.iter().map(Scalar::to_f64).collect())
                .collect(),
            money: exact.1.iter().map(Scalar::to_f64).collect(),
            raw_utilities: utilities,
            raw_money: money,
            utility_scale,
            money_scale,
        })
    }

    pub fn new(utilities: Vec<Vec<f64>>, money: Vec<f64>) -> Result<Self> {
        let conv = |v: f64| -> Result<BigRational> {
            BigRational::from_float(v).ok_or_else(|| Error::Schema(format!("non-finite value {v}")))
        };
        let u = utilities
            .into_iter()
            .map(|row| row.into_iter().map(conv).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let mo = money.into_iter().map(conv).collect::<Result<Vec<_>>>()?;
        Self::from_rational(u, mo)
    }

    /// Convenience constructor from small integers.
    pub fn from_ints(utilities: &[&[i64]], money: &[i64]) -> Result<Self> {
        Self::from_rational(
            utilities
                .iter()
                .map(|row| row.iter().map(|&v| BigRational::from_i64(v)).collect())
                .collect(),
            money.iter().map(|&v| BigRational::from_i64(v)).collect(),
        )
    }

    pub fn num_buyers(&self) -> usize {
        self.utilities.len()
    }

    pub fn num_goods(&self) -> usize {
        self.utilities[0].len()
    }

    /// Normalized utilities (rows sum to 1).
    pub fn utilities(&self) -> &[Vec<f64>] {
        &self.utilities
    }

    pub fn utility(&self, buyer: usize, good: usize) -> f64 {
        self.utilities[buyer][good]
    }

    /// Normalized money (sums to 1).
    pub fn money(&self) -> &[f64] {
        &self.money
    }

    pub fn raw_utilities(&self) -> &[Vec<BigRational>] {
        &self.raw_utilities
    }

    pub fn raw_money(&self) -> &[BigRational] {
        &self.raw_money
    }

    /// Exact normalized utilities and money.
    pub fn normalized_exact(&self) -> (Vec<Vec<BigRational>>, Vec<BigRational>) {
        normalize_exact(&self.raw_utilities, &self.raw_money)
    }

    /// Row sums of the original utilities.
    pub fn utility_scale(&self) -> &[f64] {
        &self.utility_scale
    }

    /// Total original money.
    pub fn money_scale(&self) -> f64 {
        self.money_scale
    }

    /// Payoff of `buyer` in original units from a normalized payoff.
    pub fn payoff_to_original(&self, buyer: usize, normalized: f64) -> f64 {
        normalized * self.utility_scale[buyer]
    }

    pub fn payoff_to_normalized(&self, buyer: usize, original: f64) -> f64 {
        original / self.utility_scale[buyer]
    }

    pub fn prices_to_original(&self, prices: &[f64]) -> Vec<f64> {
        prices.iter().map(|p| p * self.money_scale).collect()
    }

    /// Normalized payoff `Σ_j u_ij x_ij` of an allocation.
    pub fn payoff(&self, buyer: usize, allocation_row: &[f64]) -> f64 {
        self.utilities[buyer]
            .iter()
            .zip(allocation_row)
            .map(|(u, x)| u * x)
            .sum()
    }

    /// The profile where everyone reports their true utilities.
    pub fn truthful_profile(&self) -> StrategyProfile {
        StrategyProfile::new(self.utilities.clone()).expect("utility rows are valid strategies")
    }
}

fn normalize_exact(
    utilities: &[Vec<BigRational>],
    money: &[BigRational],
) -> (Vec<Vec<BigRational>>, Vec<BigRational>) {
    let u = utilities
        .iter()
        .map(|row| {
            let s = <BigRational as Scalar>::sum(row);
            row.iter().map(|v| v / &s).collect()
        })
        .collect();
    let total = <BigRational as Scalar>::sum(money);
    let mo = money.iter().map(|v| v / &total).collect();
    (u, mo)
}

fn normalized_row(i: usize, row: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    if row.len() != n {
        return Err(Error::Dimension(format!("strategy row {i} has {} entries, expected {n}", row.len())));
    }
    if let Some(j) = row.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::NegativeEntry(i, j));
    }
    let s: f64 = row.iter().sum();
    if s <= 0.0 {
        return Err(Error::ZeroStrategyRow(i));
    }
    Ok(row.into_iter().map(|v| v / s).collect())
}

/// One reported utility row per buyer, stored normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    rows: Vec<Vec<f64>>,
}

impl StrategyProfile {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Dimension("empty strategy profile".into()));
        }
        let n = rows[0].len();
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, row)| normalized_row(i, row, n))
            .collect::<Result<_>>()?;
        Ok(Self { rows })
    }

    pub fn symmetric(row: Vec<f64>, num_buyers: usize) -> Result<Self> {
        Self::new(vec![row; num_buyers])
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, buyer: usize) -> &[f64] {
        &self.rows[buyer]
    }

    pub fn num_buyers(&self) -> usize {
        self.rows.len()
    }

    pub fn num_goods(&self) -> usize {
        self.rows[0].len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_symmetric_within(0.0)
    }

    pub fn is_symmetric_within(&self, tol: f64) -> bool {
        self.rows
            .iter()
            .all(|r| r.iter().zip(&self.rows[0]).all(|(a, b)| (a - b).abs() <= tol))
    }

    /// Replaces one buyer's row (normalized); the other rows are kept bit for bit.
    pub fn with_row(&self, buyer: usize, row: Vec<f64>) -> Result<Self> {
        let mut rows = self.rows.clone();
        rows[buyer] = normalized_row(buyer, row, self.num_goods())?;
        Ok(Self { rows })
    }

    pub fn check_against(&self, market: &Market) -> Result<()> {
        if self.num_buyers() != market.num_buyers() || self.num_goods() != market.num_goods() {
            return Err(Error::Dimension(format!(
                "profile is {}x{}, market is {}x{}",
                self.num_buyers(),
                self.num_goods(),
                market.num_buyers(),
                market.num_goods()
            )));
        }
        Ok(())
    }
}
