//! The polyhedra of symmetric equilibrium price vectors.
//!
//! One polyhedron per way a conflict-free nice allocation can look: good `k`
//! shared between the buyers, or the goods split after a prefix. Variables
//! are normalized prices (equal to the common report, since money sums to 1).

use std::cmp::Ordering;

use serde::Serialize;

use super::curve::payoff_curve;
use super::{OrderedTwoBuyerMarket, SharingPattern};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, Relation};
use crate::market::{Market, StrategyProfile};
use crate::scalar::Scalar;
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HalfspaceRelation {
    Le,
    Lt,
    Eq,
}

/// `coeffs · α  (relation)  rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace<T> {
    pub coeffs: Vec<T>,
    pub relation: HalfspaceRelation,
    pub rhs: T,
}

impl<T: Scalar> Halfspace<T> {
    fn slack(&self, alpha: &[T]) -> T {
        let lhs = T::sum(
            &self
                .coeffs
                .iter()
                .zip(alpha)
                .map(|(c, a)| c.clone() * a.clone())
                .collect::<Vec<_>>(),
        );
        lhs - self.rhs.clone()
    }

    /// Exact for rationals. For floats, `Le`/`Eq` allow `tol` and `Lt`
    /// demands a margin of more than `tol`.
    pub fn satisfied(&self, alpha: &[T], tol: f64) -> bool {
        let s = self.slack(alpha).sign(tol);
        match self.relation {
            HalfspaceRelation::Le => s != Ordering::Greater,
            HalfspaceRelation::Lt => s == Ordering::Less,
            HalfspaceRelation::Eq => s == Ordering::Equal,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NespPolyhedron<T> {
    pub pattern: SharingPattern,
    pub halfspaces: Vec<Halfspace<T>>,
}

impl<T: Scalar> NespPolyhedron<T> {
    pub fn contains(&self, alpha: &[T], tol: f64) -> bool {
        self.halfspaces.iter().all(|h| h.satisfied(alpha, tol))
    }

    /// Closure of the polyhedron as an LP feasible region (strict become weak).
    pub fn closure_lp(&self) -> LinearProgram<T> {
        let mut lp = LinearProgram::new(self.halfspaces.first().map_or(0, |h| h.coeffs.len()));
        for h in &self.halfspaces {
            let rel = match h.relation {
                HalfspaceRelation::Eq => Relation::Eq,
                _ => Relation::Le,
            };
            lp.add(h.coeffs.clone(), rel, h.rhs.clone());
        }
        lp
    }
}

fn indicator<T: Scalar>(n: usize, range: impl Iterator<Item = usize>) -> Vec<T> {
    let mut v = vec![T::zero(); n];
    for i in range {
        v[i] = T::one();
    }
    v
}

/// Buyer 1 weakly prefers every good in `left` and buyer 2 every good in
/// `right`, in bang per buck.
fn preference_constraints<T: Scalar>(
    o: &OrderedTwoBuyerMarket<T>,
    left: std::ops::Range<usize>,
    right: std::ops::Range<usize>,
    out: &mut Vec<Halfspace<T>>,
) {
    let n = o.num_goods();
    let (u1, u2) = (o.utilities(0), o.utilities(1));
    for i in left {
        for j in right.clone() {
            if i == j {
                continue;
            }
            let mut c = vec![T::zero(); n];
            c[i] = u1[j].clone();
            c[j] = -u1[i].clone();
            out.push(Halfspace {
                coeffs: c,
                relation: HalfspaceRelation::Le,
                rhs: T::zero(),
            });
            let mut c = vec![T::zero(); n];
            c[j] = u2[i].clone();
            c[i] = -u2[j].clone();
            out.push(Halfspace {
                coeffs: c,
                relation: HalfspaceRelation::Le,
                rhs: T::zero(),
            });
        }
    }
}

fn nonnegativity<T: Scalar>(n: usize, out: &mut Vec<Halfspace<T>>) {
    for i in 0..n {
        let mut c = vec![T::zero(); n];
        c[i] = -T::one();
        out.push(Halfspace {
            coeffs: c,
            relation: HalfspaceRelation::Le,
            rhs: T::zero(),
        });
    }
}

/// All `2n - 1` polyhedra: shared good `0..n`, then split after `1..n-1` goods.
pub fn build_polyhedra<T: Scalar>(o: &OrderedTwoBuyerMarket<T>) -> Vec<NespPolyhedron<T>> {
    let n = o.num_goods();
    let (m1, m2) = (o.money(0).clone(), o.money(1).clone());
    let mut out = Vec::with_capacity(2 * n);
    for k in 0..n {
        let mut hs = vec![
            Halfspace {
                coeffs: indicator(n, 0..k),
                relation: HalfspaceRelation::Lt,
                rhs: m1.clone(),
            },
            Halfspace {
                coeffs: indicator(n, k + 1..n),
                relation: HalfspaceRelation::Lt,
                rhs: m2.clone(),
            },
            Halfspace {
                coeffs: indicator(n, 0..n),
                relation: HalfspaceRelation::Eq,
                rhs: m1.clone() + m2.clone(),
            },
        ];
        preference_constraints(o, 0..k + 1, k..n, &mut hs);
        nonnegativity(n, &mut hs);
        out.push(NespPolyhedron {
            pattern: SharingPattern::Shared { good: k },
            halfspaces: hs,
        });
    }
    for prefix in 1..n {
        let mut hs = vec![
            Halfspace {
                coeffs: indicator(n, 0..prefix),
                relation: HalfspaceRelation::Eq,
                rhs: m1.clone(),
            },
            Halfspace {
                coeffs: indicator(n, prefix..n),
                relation: HalfspaceRelation::Eq,
                rhs: m2.clone(),
            },
        ];
        preference_constraints(o, 0..prefix, prefix..n, &mut hs);
        nonnegativity(n, &mut hs);
        out.push(NespPolyhedron {
            pattern: SharingPattern::Split { prefix },
            halfspaces: hs,
        });
    }
    out
}

/// Patterns of every polyhedron containing the ordered price vector `alpha`.
/// Points on an interface are reported in both families.
pub fn membership<T: Scalar>(o: &OrderedTwoBuyerMarket<T>, alpha: &[T], tol: f64) -> Vec<SharingPattern> {
    build_polyhedra(o)
        .into_iter()
        .filter(|p| p.contains(alpha, tol))
        .map(|p| p.pattern)
        .collect()
}

/// Whether `profile` is a Nash equilibrium of the two-buyer game, decided by
/// polyhedron membership with tolerance `tol.poly`, under any order of the
/// goods one buyer ignores. Asymmetric profiles never are.
pub fn is_nesp(market: &Market, profile: &StrategyProfile, tol: &Tolerances) -> Result<bool> {
    profile.check_against(market)?;
    let o = OrderedTwoBuyerMarket::<f64>::new(market)?;
    if !profile.is_symmetric_within(tol.poly) {
        return Ok(false);
    }
    let row = profile.row(0);
    if o.dropped().iter().any(|&j| row[j] > tol.poly) {
        return Ok(false);
    }
    Ok(o.tie_orders().iter().any(|o| {
        let ordered = o.to_ordered_row(row);
        let total: f64 = ordered.iter().sum();
        let alpha: Vec<f64> = ordered.iter().map(|v| v / total).collect();
        !membership(o, &alpha, tol.poly).is_empty()
    }))
}

#[derive(Debug, Clone, Serialize)]
pub struct PriceInterval {
    /// Original good index.
    pub good: usize,
    pub low: String,
    pub high: String,
    #[serde(skip)]
    pub low_f64: f64,
    #[serde(skip)]
    pub high_f64: f64,
}

/// Equilibrium price ranges at a fixed payoff pair, original money units.
#[derive(Debug, Clone, Serialize)]
pub struct PriceRange<T> {
    pub intervals: Vec<PriceInterval>,
    /// Polyhedra whose closure meets the payoff pair.
    pub patterns: Vec<SharingPattern>,
    #[serde(skip)]
    pub bounds: Vec<(T, T)>,
}

/// Adds the two payoff equalities for `pattern`; `None` if the pattern
/// cannot produce `payoff` at all.
fn payoff_constraints<T: Scalar>(
    o: &OrderedTwoBuyerMarket<T>,
    pattern: SharingPattern,
    payoff: &[T; 2],
    tol: f64,
    lp: &mut LinearProgram<T>,
) -> bool {
    let n = o.num_goods();
    let (u1, u2) = (o.utilities(0), o.utilities(1));
    match pattern {
        SharingPattern::Shared { good: k } => {
            // u_1k (m1 - Σ_{i<k} α_i) = (P1 - Σ_{i<k} u_1i) α_k, and the mirror for buyer 2.
            let mut c = vec![T::zero(); n];
            for ci in c.iter_mut().take(k) {
                *ci = u1[k].clone();
            }
            c[k] = payoff[0].clone() - T::sum(&u1[..k]);
            lp.add(c, Relation::Eq, u1[k].clone() * o.money(0).clone());
            let mut c = vec![T::zero(); n];
            for ci in c.iter_mut().skip(k + 1) {
                *ci = u2[k].clone();
            }
            c[k] = payoff[1].clone() - T::sum(&u2[k + 1..]);
            lp.add(c, Relation::Eq, u2[k].clone() * o.money(1).clone());
            true
        }
        SharingPattern::Split { prefix } => {
            T::sum(&u1[..prefix]).cmp_tol(&payoff[0], tol) == Ordering::Equal
                && T::sum(&u2[prefix..]).cmp_tol(&payoff[1], tol) == Ordering::Equal
        }
    }
}

/// Per-good price intervals over all symmetric equilibria paying `payoff`
/// (original units). Intervals from several polyhedra are merged into their
/// hull.
pub fn price_range_at_payoff<T: Scalar>(
    o: &OrderedTwoBuyerMarket<T>,
    payoff: &[T; 2],
    tol: f64,
) -> Result<PriceRange<T>> {
    let curve = payoff_curve(o, tol);
    if !curve.contains(payoff, tol) {
        return Err(Error::PointOffCurve);
    }
    let norm = [o.payoff_to_normalized(0, &payoff[0]), o.payoff_to_normalized(1, &payoff[1])];
    let n = o.num_goods();
    let mut bounds: Vec<Option<(T, T)>> = vec![None; n];
    let mut patterns = Vec::new();
    for poly in build_polyhedra(o) {
        let mut lp = poly.closure_lp();
        if !payoff_constraints(o, poly.pattern, &norm, tol, &mut lp) {
            continue;
        }
        let mut feasible = false;
        for j in 0..n {
            let mut lo = lp.clone();
            lo.minimize(indicator(n, j..j + 1));
            let Some(low) = lo.solve(tol)?.optimal() else { break };
            let mut hi = lp.clone();
            hi.maximize(indicator(n, j..j + 1));
            let Some(high) = hi.solve(tol)?.optimal() else { break };
            feasible = true;
            let (l, h) = (low.x[j].clone(), high.x[j].clone());
            bounds[j] = Some(match bounds[j].take() {
                None => (l, h),
                Some((a, b)) => (a.min_of(l), b.max_of(h)),
            });
        }
        if feasible {
            patterns.push(poly.pattern);
        }
    }
    if patterns.is_empty() {
        return Err(Error::PointOffCurve);
    }
    let scale = o.money_scale().clone();
    let mut by_original: Vec<(usize, T, T)> = o
        .order()
        .iter()
        .zip(bounds)
        .map(|(&j, b)| {
            let (l, h) = b.expect("every good bounded once feasible");
            (j, l * scale.clone(), h * scale.clone())
        })
        .collect();
    by_original.extend(o.dropped().iter().map(|&j| (j, T::zero(), T::zero())));
    by_original.sort_by_key(|t| t.0);
    Ok(PriceRange {
        intervals: by_original
            .iter()
            .map(|(j, l, h)| PriceInterval {
                good: *j,
                low: l.render(),
                high: h.render(),
                low_f64: l.to_f64(),
                high_f64: h.to_f64(),
            })
            .collect(),
        patterns,
        bounds: by_original.into_iter().map(|(_, l, h)| (l, h)).collect(),
    })
}
