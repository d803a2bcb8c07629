//! Two-buyer markets: every Nash equilibrium is symmetric, and the
//! equilibria form a union of polyhedra in price space.
//!
//! Everything here is generic over [`Scalar`]. With `BigRational` the
//! computations are exact; with `f64` comparisons use the polyhedron
//! tolerance. Goods are reordered so that `u_1j / u_2j` is nonincreasing;
//! public results map back to the original good indices.

mod curve;
mod nicify;
mod polyhedra;

use std::cmp::Ordering;

use num::BigRational;
use serde::Serialize;

use crate::allocation::MoneyFlowAllocation;
use crate::error::{Error, Result};
use crate::market::{Market, StrategyProfile};
use crate::scalar::Scalar;

pub use curve::{
    alpha_sweep, correlated_dominance_check, max_payoff_by_imitation, payoff_curve, CurveJson, CurvePoint, CurveSegment,
    ImitationPayoff,
    PayoffCurve,
};
pub use nicify::{nicify, Nicified};
pub use polyhedra::{
    build_polyhedra, is_nesp, membership, price_range_at_payoff, Halfspace, HalfspaceRelation, NespPolyhedron,
    PriceInterval, PriceRange,
};

/// A two-buyer market with goods sorted by decreasing `u_1j / u_2j`.
#[derive(Debug, Clone)]
pub struct OrderedTwoBuyerMarket<T> {
    market: Market,
    /// `order[k]` is the original index of the k-th ordered good.
    order: Vec<usize>,
    /// Goods neither buyer values; left out of the analysis.
    dropped: Vec<usize>,
    utilities: [Vec<T>; 2],
    money: [T; 2],
    utility_scale: [T; 2],
    money_scale: T,
}

/// How a nice allocation splits the ordered goods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SharingPattern {
    /// Buyer 1 holds the goods before `good`, buyer 2 those after, and both
    /// hold part of `good` (ordered index). The allocation graph is a tree.
    Shared { good: usize },
    /// Buyer 1 holds exactly the first `prefix` goods. Two trees.
    Split { prefix: usize },
}

/// Cap on the orders [`OrderedTwoBuyerMarket::tie_orders`] enumerates.
pub const MAX_TIE_ORDERS: usize = 720;

/// All orderings of `items`, identity first.
fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (k, &first) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(k);
        for mut tail in permutations(&rest) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}

fn compare_ratio<T: Scalar>(u1a: &T, u2a: &T, u1b: &T, u2b: &T) -> Ordering {
    // u1a/u2a against u1b/u2b without dividing, so a zero u2 reads as +inf.
    let lhs = u1a.clone() * u2b.clone();
    let rhs = u1b.clone() * u2a.clone();
    lhs.partial_cmp(&rhs).unwrap_or(Ordering::Equal)
}

impl<T: Scalar> OrderedTwoBuyerMarket<T> {
    pub fn new(market: &Market) -> Result<Self> {
        if market.num_buyers() != 2 {
            return Err(Error::NotTwoBuyers(market.num_buyers()));
        }
        let (u, m) = market.normalized_exact();
        let conv = |row: &[BigRational]| -> Vec<T> { row.iter().map(T::from_rational).collect() };
        let u1 = conv(&u[0]);
        let u2 = conv(&u[1]);
        let (mut order, mut dropped) = (Vec::new(), Vec::new());
        for j in 0..market.num_goods() {
            if u1[j] == T::zero() && u2[j] == T::zero() {
                dropped.push(j);
            } else {
                order.push(j);
            }
        }
        // Stable sort keeps ties in input order.
        order.sort_by(|&a, &b| compare_ratio(&u1[b], &u2[b], &u1[a], &u2[a]));
        let pick = |row: &[T]| -> Vec<T> { order.iter().map(|&j| row[j].clone()).collect() };
        let raw_scale = |i: usize| T::from_rational(&<BigRational as Scalar>::sum(&market.raw_utilities()[i]));
        Ok(Self {
            utilities: [pick(&u1), pick(&u2)],
            money: [T::from_rational(&m[0]), T::from_rational(&m[1])],
            utility_scale: [raw_scale(0), raw_scale(1)],
            money_scale: T::from_rational(&<BigRational as Scalar>::sum(market.raw_money())),
            market: market.clone(),
            order,
            dropped,
        })
    }

    pub fn market(&self) -> &Market {
        &self.market
    }

    /// The same market under every other order of goods that one buyer
    /// does not value at all, the first entry being `self`. Such goods tie
    /// on the ratio, but unlike positive ties the order between them
    /// changes which symmetric profiles have a conflict-free nice
    /// allocation. Falls back to `self` alone past `MAX_TIE_ORDERS`.
    pub fn tie_orders(&self) -> Vec<Self> {
        let n = self.order.len();
        let groups: Vec<Vec<usize>> = [0, 1]
            .iter()
            .map(|&b| (0..n).filter(|&k| self.utilities[b][k] == T::zero()).collect::<Vec<_>>())
            .filter(|g| g.len() > 1)
            .collect();
        let count: usize = groups.iter().map(|g| (1..=g.len()).product::<usize>()).product();
        if count <= 1 || count > MAX_TIE_ORDERS {
            return vec![self.clone()];
        }
        let mut perms: Vec<Vec<usize>> = vec![(0..n).collect()];
        for g in &groups {
            let mut next = Vec::new();
            for base in &perms {
                for arrangement in permutations(g) {
                    let mut p = base.clone();
                    for (slot, &k) in g.iter().zip(&arrangement) {
                        p[*slot] = base[k];
                    }
                    next.push(p);
                }
            }
            perms = next;
        }
        perms
            .into_iter()
            .map(|p| {
                let pick = |row: &[T]| -> Vec<T> { p.iter().map(|&k| row[k].clone()).collect() };
                Self {
                    utilities: [pick(&self.utilities[0]), pick(&self.utilities[1])],
                    order: p.iter().map(|&k| self.order[k]).collect(),
                    ..self.clone()
                }
            })
            .collect()
    }

    /// Number of goods kept after dropping those nobody values.
    pub fn num_goods(&self) -> usize {
        self.order.len()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    /// Normalized utilities of `buyer` (0 or 1), ordered.
    pub fn utilities(&self, buyer: usize) -> &[T] {
        &self.utilities[buyer]
    }

    /// Normalized money of `buyer`.
    pub fn money(&self, buyer: usize) -> &T {
        &self.money[buyer]
    }

    pub fn money_scale(&self) -> &T {
        &self.money_scale
    }

    /// `u_1j / u_2j` in the working order, `+inf` when `u_2j = 0`.
    pub fn ratios(&self) -> Vec<f64> {
        self.utilities[0]
            .iter()
            .zip(&self.utilities[1])
            .map(|(a, b)| if *b == T::zero() { f64::INFINITY } else { (a.clone() / b.clone()).to_f64() })
            .collect()
    }

    pub fn payoff_to_original(&self, buyer: usize, normalized: &T) -> T {
        normalized.clone() * self.utility_scale[buyer].clone()
    }

    pub fn payoff_to_normalized(&self, buyer: usize, original: &T) -> T {
        original.clone() / self.utility_scale[buyer].clone()
    }

    /// Expands an ordered row to the original good indices, zero on dropped goods.
    pub fn to_original_row(&self, row: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.market.num_goods()];
        for (k, &j) in self.order.iter().enumerate() {
            out[j] = row[k].clone();
        }
        out
    }

    pub fn to_ordered_row(&self, row: &[T]) -> Vec<T> {
        self.order.iter().map(|&j| row[j].clone()).collect()
    }

    /// Common row of `t(α)`: `u_1 + α (u_2 - u_1)`, ordered.
    pub fn t_alpha_row(&self, alpha: &T) -> Vec<T> {
        self.utilities[0]
            .iter()
            .zip(&self.utilities[1])
            .map(|(a, b)| a.clone() + alpha.clone() * (b.clone() - a.clone()))
            .collect()
    }

    /// The symmetric profile `t(α)` in original good order.
    pub fn t_alpha(&self, alpha: &T) -> Result<StrategyProfile> {
        let row: Vec<f64> = self.to_original_row(&self.t_alpha_row(alpha)).iter().map(T::to_f64).collect();
        StrategyProfile::symmetric(row, 2)
    }

    /// Normalized prices of a symmetric report: the row rescaled to sum to 1.
    fn prices_of(&self, row: &[T]) -> Vec<T> {
        let total = T::sum(row);
        row.iter().map(|v| v.clone() / total.clone()).collect()
    }

    /// The unique nice allocation of the symmetric profile whose common
    /// (ordered) row is `row`.
    pub fn nice_allocation(&self, row: &[T], tol: f64) -> NiceAllocation<T> {
        let prices = self.prices_of(row);
        let n = prices.len();
        let mut budget = self.money[0].clone();
        let mut first = vec![T::zero(); n];
        let mut shared = None;
        for (j, p) in prices.iter().enumerate() {
            if !budget.is_pos_tol(tol) {
                break;
            }
            if budget.cmp_tol(p, tol) != Ordering::Less {
                first[j] = T::one();
                budget = budget - p.clone();
            } else {
                first[j] = budget.clone() / p.clone();
                budget = T::zero();
                shared = Some(j);
            }
        }
        let second: Vec<T> = first.iter().map(|x| T::one() - x.clone()).collect();
        let payoff = |buyer: usize, q: &[T]| -> T {
            T::sum(
                &self.utilities[buyer]
                    .iter()
                    .zip(q)
                    .map(|(u, x)| u.clone() * x.clone())
                    .collect::<Vec<_>>(),
            )
        };
        let pattern = match shared {
            Some(good) => SharingPattern::Shared { good },
            None => SharingPattern::Split {
                prefix: first.iter().filter(|x| **x == T::one()).count(),
            },
        };
        NiceAllocation {
            payoffs: [payoff(0, &first), payoff(1, &second)],
            quantities: [first, second],
            prices,
            pattern,
        }
    }

    /// Payoffs of `t(α)` (normalized), read off its nice allocation.
    pub fn t_alpha_payoffs(&self, alpha: &T, tol: f64) -> [T; 2] {
        self.nice_allocation(&self.t_alpha_row(alpha), tol).payoffs
    }
}

/// A nice allocation in working order, normalized units.
#[derive(Debug, Clone, PartialEq)]
pub struct NiceAllocation<T> {
    /// Quantity of each ordered good held by each buyer.
    pub quantities: [Vec<T>; 2],
    pub prices: Vec<T>,
    pub payoffs: [T; 2],
    pub pattern: SharingPattern,
}

impl<T: Scalar> NiceAllocation<T> {
    /// Money-flow form on the original good indices.
    pub fn to_money_flow(&self, market: &OrderedTwoBuyerMarket<T>) -> MoneyFlowAllocation {
        let n = market.market.num_goods();
        let mut flow = vec![vec![0.0; n]; 2];
        let mut prices = vec![0.0; n];
        for (k, &j) in market.order.iter().enumerate() {
            prices[j] = self.prices[k].to_f64();
            for (i, row) in flow.iter_mut().enumerate() {
                row[j] = (self.quantities[i][k].clone() * self.prices[k].clone()).to_f64();
            }
        }
        MoneyFlowAllocation { flow, prices }
    }

    pub fn original_payoffs(&self, market: &OrderedTwoBuyerMarket<T>) -> [T; 2] {
        [
            market.payoff_to_original(0, &self.payoffs[0]),
            market.payoff_to_original(1, &self.payoffs[1]),
        ]
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::market::Market;

    pub fn example_six() -> Market {
        Market::new(vec![vec![6.0, 2.0, 2.0], vec![0.5, 2.5, 7.0]], vec![7.0, 3.0]).unwrap()
    }

    pub fn example_seven() -> Market {
        Market::from_ints(&[&[4, 3, 2, 1], &[1, 2, 3, 4]], &[10, 10]).unwrap()
    }
}
