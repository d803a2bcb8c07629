use serde::Serialize;

use crate::allocation::{is_conflict_free, payoff_report, FlowPolytope};
use crate::equilibrium::solve_equilibrium;
use crate::error::{Error, Result};
use crate::lp::Relation;
use crate::market::{Market, StrategyProfile};
use crate::tolerances::Tolerances;

/// The three structural conditions every Nash equilibrium profile satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NecessaryConditions {
    pub conflict_free: bool,
    pub goods_degree_at_least_two: bool,
    /// Each buyer receives some good that is bang-per-buck optimal for her
    /// true utilities at the current prices, in a conflict-free allocation.
    pub buys_true_optimal_good: bool,
}

impl NecessaryConditions {
    pub fn all(&self) -> bool {
        self.conflict_free && self.goods_degree_at_least_two && self.buys_true_optimal_good
    }
}

pub fn check_necessary_conditions(market: &Market, profile: &StrategyProfile, tol: &Tolerances) -> Result<NecessaryConditions> {
    let out = solve_equilibrium(market, profile, tol)?;
    let check = is_conflict_free(market, &out, tol)?;
    let goods_degree_at_least_two = (0..market.num_goods()).all(|j| out.graph.good_degree(j) >= 2);

    let mut buys_true_optimal_good = check.conflict_free;
    if check.conflict_free {
        let poly = FlowPolytope::of_outcome(market, &out);
        for i in 0..market.num_buyers() {
            let bpb: Vec<f64> = (0..market.num_goods())
                .map(|j| market.utility(i, j) / out.prices[j])
                .collect();
            let best = bpb.iter().cloned().fold(0.0, f64::max);
            let optimal: Vec<usize> = (0..market.num_goods())
                .filter(|&j| bpb[j] >= (1.0 - tol.tight) * best)
                .collect();
            let target: Vec<f64> = poly
                .edges()
                .iter()
                .map(|&(b, g)| if b == i && optimal.contains(&g) { 1.0 } else { 0.0 })
                .collect();
            if target.iter().all(|&c| c == 0.0) {
                buys_true_optimal_good = false;
                break;
            }
            let mut lp = poly.base_lp();
            for (k, w) in check.best.iter().enumerate() {
                lp.add(poly.payoff_coefficients(market, k), Relation::Ge, w - tol.pay);
            }
            lp.maximize(target);
            let flow_into_optimal = lp
                .solve(tol.lp)?
                .optimal()
                .map(|s| s.objective)
                .unwrap_or(0.0);
            if flow_into_optimal <= tol.eq * 10.0 {
                buys_true_optimal_good = false;
                break;
            }
        }
    }
    Ok(NecessaryConditions {
        conflict_free: check.conflict_free,
        goods_degree_at_least_two,
        buys_true_optimal_good,
    })
}

/// The symmetric profile whose common row is the truthful equilibrium price
/// vector, with its payoffs and the Fisher payoffs (original units).
#[derive(Debug, Clone)]
pub struct FisherSymmetricProfile {
    pub profile: StrategyProfile,
    pub fisher_payoffs: Vec<f64>,
    pub payoffs: Vec<f64>,
}

pub fn fisher_symmetric_nesp(market: &Market, tol: &Tolerances) -> Result<FisherSymmetricProfile> {
    let truthful = solve_equilibrium(market, &market.truthful_profile(), tol)?;
    let fisher = payoff_report(market, &truthful, tol)?;
    let profile = StrategyProfile::symmetric(truthful.prices.clone(), market.num_buyers())?;
    let out = solve_equilibrium(market, &profile, tol)?;
    let report = payoff_report(market, &out, tol)?;
    for i in 0..market.num_buyers() {
        let gap = market.payoff_to_normalized(i, (report.selected_payoffs[i] - fisher.selected_payoffs[i]).abs());
        if gap > tol.pay * 10.0 {
            return Err(Error::Invariant(format!(
                "symmetric profile at Fisher prices pays buyer {i} {} instead of {}",
                report.selected_payoffs[i], fisher.selected_payoffs[i]
            )));
        }
    }
    Ok(FisherSymmetricProfile {
        profile,
        fisher_payoffs: fisher.selected_payoffs,
        payoffs: report.selected_payoffs,
    })
}
