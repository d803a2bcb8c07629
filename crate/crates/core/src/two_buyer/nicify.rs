//! Exchanging goods between the two buyers until the allocation is nice,
//! without making either of them worse off.

use std::cmp::Ordering;

use super::OrderedTwoBuyerMarket;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Nicified<T> {
    /// Quantities per buyer on the original good indices.
    pub quantities: [Vec<T>; 2],
    /// Payoffs before and after, original units.
    pub before: [T; 2],
    pub after: [T; 2],
    pub exchanges: usize,
}

fn payoffs<T: Scalar>(o: &OrderedTwoBuyerMarket<T>, q: &[Vec<T>; 2]) -> [T; 2] {
    let p = |b: usize| {
        let v: Vec<T> = o.utilities(b).iter().zip(&q[b]).map(|(u, x)| u.clone() * x.clone()).collect();
        o.payoff_to_original(b, &T::sum(&v))
    };
    [p(0), p(1)]
}

/// Turns any full allocation (quantities, original good order) into a nice
/// one that pays both buyers at least as much.
///
/// While buyer 1 holds some of a later good `i` and buyer 2 some of an
/// earlier good `j`, buyer 1 trades `z` of `i` for `w` of `j` with `w / z`
/// inside `[u_1i / u_1j, u_2i / u_2j]`, as much as the holdings allow.
pub fn nicify<T: Scalar>(o: &OrderedTwoBuyerMarket<T>, allocation: &[Vec<T>], tol: f64) -> Result<Nicified<T>> {
    let n_orig = o.market().num_goods();
    if allocation.len() != 2 || allocation.iter().any(|r| r.len() != n_orig) {
        return Err(Error::Dimension(format!("allocation must be 2x{n_orig}")));
    }
    for j in 0..n_orig {
        if allocation[0][j].is_neg_tol(tol) || allocation[1][j].is_neg_tol(tol) {
            return Err(Error::NegativeEntry(if allocation[0][j].is_neg_tol(tol) { 0 } else { 1 }, j));
        }
        let total = allocation[0][j].clone() + allocation[1][j].clone();
        if !o.dropped().contains(&j) && total.cmp_tol(&T::one(), tol) != Ordering::Equal {
            return Err(Error::Dimension(format!("good {j} is not fully allocated")));
        }
    }
    let mut q = [o.to_ordered_row(&allocation[0]), o.to_ordered_row(&allocation[1])];
    let before = payoffs(o, &q);
    let n = o.num_goods();
    let (u1, u2) = (o.utilities(0), o.utilities(1));
    let mut exchanges = 0;
    loop {
        let late = (0..n).rev().find(|&k| q[0][k].is_pos_tol(tol));
        let early = (0..n).find(|&k| q[1][k].is_pos_tol(tol));
        let (Some(i), Some(j)) = (late, early) else { break };
        if i <= j {
            break;
        }
        if exchanges > 2 * n {
            return Err(Error::Invariant("exchange loop did not terminate".into()));
        }
        // Bounds on w/z: buyer 1 needs w u_1j >= z u_1i, buyer 2 needs z u_2i >= w u_2j.
        let lo = if u1[j] == T::zero() { T::zero() } else { u1[i].clone() / u1[j].clone() };
        let hi = if u2[j] == T::zero() { None } else { Some(u2[i].clone() / u2[j].clone()) };
        let ratio = match &hi {
            Some(h) if lo.cmp_tol(h, tol) == Ordering::Greater => {
                return Err(Error::RatioIntervalEmpty(o.order()[i], o.order()[j]));
            }
            Some(h) => (lo.clone() + h.clone()) / T::from_i64(2),
            None if lo == T::zero() => T::one(),
            None => lo.clone(),
        };
        let (x1i, x2j) = (q[0][i].clone(), q[1][j].clone());
        if x1i.clone() * ratio.clone() <= x2j {
            let w = x1i.clone() * ratio;
            q[0][i] = T::zero();
            q[1][i] = q[1][i].clone() + x1i;
            q[1][j] = x2j - w.clone();
            q[0][j] = q[0][j].clone() + w;
        } else {
            let z = x2j.clone() / ratio;
            q[0][i] = x1i - z.clone();
            q[1][i] = q[1][i].clone() + z;
            q[1][j] = T::zero();
            q[0][j] = q[0][j].clone() + x2j;
        }
        exchanges += 1;
    }
    let after = payoffs(o, &q);
    let mut quantities = [o.to_original_row(&q[0]), o.to_original_row(&q[1])];
    for &j in o.dropped() {
        quantities[0][j] = allocation[0][j].clone();
        quantities[1][j] = allocation[1][j].clone();
    }
    Ok(Nicified {
        quantities,
        before,
        after,
        exchanges,
    })
}
