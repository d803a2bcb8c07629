//! Unilateral deviations: cycle breaking, necessary NE conditions and a
//! best-response search used to certify or refute Nash equilibria.

mod conditions;
mod oracle;
mod perturb;

use serde::Serialize;

pub use conditions::{check_necessary_conditions, fisher_symmetric_nesp, FisherSymmetricProfile, NecessaryConditions};
pub use oracle::{best_response_oracle, BestResponse, OracleConfig};
pub use perturb::{
    alternating_reach, conflict_removal, perturb, ConflictRemoval, Perturbation, PerturbationEvent, PerturbationStep,
};

use crate::error::{Error, Result};
use crate::market::{Market, StrategyProfile};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Certification {
    NeCertified,
    NeRefutedByConditions,
    NeRefutedByDeviation,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct NeVerdict {
    pub necessary_conditions: NecessaryConditions,
    /// Largest improvement found over all buyers, original units.
    pub best_response_gap: f64,
    /// Buyer and report attaining `best_response_gap`, kept only for refutations.
    pub witness: Option<(usize, Vec<f64>)>,
    pub certified: Certification,
    pub per_buyer: Vec<BestResponse>,
}

/// Runs the condition checker and the oracle for every buyer.
///
/// A deviation gaining more than `tol.dev` (normalized) refutes; failing
/// conditions refute otherwise; if the grid is too large to search, a
/// profile passing the conditions is `Inconclusive`.
pub fn verify_ne(market: &Market, profile: &StrategyProfile, config: &OracleConfig, tol: &Tolerances) -> Result<NeVerdict> {
    profile.check_against(market)?;
    let necessary_conditions = check_necessary_conditions(market, profile, tol)?;
    let mut per_buyer = Vec::with_capacity(market.num_buyers());
    let mut searchable = true;
    for k in 0..market.num_buyers() {
        match best_response_oracle(market, profile, k, config, tol) {
            Ok(r) => per_buyer.push(r),
            Err(Error::SearchBudgetExceeded(_)) => {
                searchable = false;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let top = per_buyer
        .iter()
        .max_by(|a, b| {
            let ga = market.payoff_to_normalized(a.buyer, a.gap);
            let gb = market.payoff_to_normalized(b.buyer, b.gap);
            ga.total_cmp(&gb).then(b.buyer.cmp(&a.buyer))
        })
        .cloned();
    let best_response_gap = top.as_ref().map_or(0.0, |r| r.gap);
    let refuting = top.filter(|r| market.payoff_to_normalized(r.buyer, r.gap) > tol.dev);

    let certified = if refuting.is_some() {
        Certification::NeRefutedByDeviation
    } else if !necessary_conditions.all() {
        Certification::NeRefutedByConditions
    } else if searchable {
        Certification::NeCertified
    } else {
        Certification::Inconclusive
    };
    Ok(NeVerdict {
        necessary_conditions,
        best_response_gap,
        witness: refuting.map(|r| (r.buyer, r.witness)),
        certified,
        per_buyer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_four_conditions_hold_but_deviation_exists() {
        let m = Market::new(vec![vec![2.0, 0.1], vec![4.0, 9.0], vec![0.1, 2.0]], vec![50.0, 100.0, 50.0]).unwrap();
        let v = verify_ne(&m, &m.truthful_profile(), &OracleConfig::default(), &Tolerances::default()).unwrap();
        assert!(v.necessary_conditions.all());
        assert_eq!(v.certified, Certification::NeRefutedByDeviation);
        assert!(v.best_response_gap >= 0.24);
        assert_eq!(v.witness.as_ref().unwrap().0, 1);
    }

    #[test]
    fn fisher_symmetric_profile_is_certified() {
        let m = Market::from_ints(&[&[10, 3], &[3, 10]], &[10, 10]).unwrap();
        let t = Tolerances::default();
        let s = fisher_symmetric_nesp(&m, &t).unwrap();
        let v = verify_ne(&m, &s.profile, &OracleConfig::default(), &t).unwrap();
        assert_eq!(v.certified, Certification::NeCertified, "{v:?}");
    }
}
