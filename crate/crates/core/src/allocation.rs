//! The set of equilibrium allocations of a profile and queries over it.
//!
//! Once prices are fixed, equilibrium allocations are exactly the money flows
//! on tight edges that exhaust every budget and pay every price: a
//! transportation polytope. Payoffs are measured with the true utilities.

use serde::Serialize;

use crate::equilibrium::EquilibriumOutcome;
use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::lp::{LinearProgram, LpStatus, Relation};
use crate::market::Market;
use crate::tolerances::Tolerances;

const FW_MAX_ITERATIONS: usize = 200;
const PAIRWISE_MAX_ITERATIONS: usize = 100_000;

/// Money flows on tight edges with row sums `money` and column sums `prices`.
#[derive(Debug, Clone)]
pub struct FlowPolytope {
    money: Vec<f64>,
    prices: Vec<f64>,
    edges: Vec<(usize, usize)>,
}

impl FlowPolytope {
    pub fn new(money: Vec<f64>, prices: Vec<f64>, graph: &BipartiteGraph) -> Self {
        Self {
            money,
            prices,
            edges: graph.edges(),
        }
    }

    pub fn of_outcome(market: &Market, outcome: &EquilibriumOutcome) -> Self {
        Self::new(market.money().to_vec(), outcome.prices.clone(), &outcome.graph)
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn money(&self) -> &[f64] {
        &self.money
    }

    pub fn edge_index(&self, buyer: usize, good: usize) -> Option<usize> {
        self.edges.iter().position(|&e| e == (buyer, good))
    }

    /// LP over edge flows with the conservation equalities and zero objective.
    pub fn base_lp(&self) -> LinearProgram<f64> {
        let k = self.edges.len();
        let mut lp = LinearProgram::new(k);
        for (i, &m) in self.money.iter().enumerate() {
            let coeffs = self.edges.iter().map(|&(b, _)| if b == i { 1.0 } else { 0.0 }).collect();
            lp.add(coeffs, Relation::Eq, m);
        }
        for (j, &p) in self.prices.iter().enumerate() {
            let coeffs = self.edges.iter().map(|&(_, g)| if g == j { 1.0 } else { 0.0 }).collect();
            lp.add(coeffs, Relation::Eq, p);
        }
        lp
    }

    /// Coefficients of buyer `i`'s normalized payoff `Σ_j u_ij f_ij / p_j`.
    pub fn payoff_coefficients(&self, market: &Market, buyer: usize) -> Vec<f64> {
        self.edges
            .iter()
            .map(|&(i, j)| if i == buyer { market.utility(i, j) / self.prices[j] } else { 0.0 })
            .collect()
    }

    pub fn to_matrix(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut f = vec![vec![0.0; self.prices.len()]; self.money.len()];
        for (&(i, j), &v) in self.edges.iter().zip(x) {
            f[i][j] = v.max(0.0);
        }
        f
    }

    pub fn to_vector(&self, flow: &[Vec<f64>]) -> Vec<f64> {
        self.edges.iter().map(|&(i, j)| flow[i][j]).collect()
    }

    pub fn feasible_flow(&self, tol: &Tolerances) -> Result<Option<Vec<Vec<f64>>>> {
        Ok(self.base_lp().solve(tol.lp)?.optimal().map(|s| self.to_matrix(&s.x)))
    }

    /// Max violation of budget and price conservation.
    pub fn residual(&self, flow: &[Vec<f64>]) -> f64 {
        let row = self
            .money
            .iter()
            .enumerate()
            .map(|(i, m)| (flow[i].iter().sum::<f64>() - m).abs());
        let col = self
            .prices
            .iter()
            .enumerate()
            .map(|(j, p)| (flow.iter().map(|r| r[j]).sum::<f64>() - p).abs());
        row.chain(col).fold(0.0, f64::max)
    }

    fn maximize(&self, objective: Vec<f64>, extra: &[(Vec<f64>, Relation, f64)], tol: &Tolerances) -> Result<(Vec<f64>, f64)> {
        let mut lp = self.base_lp();
        for (c, r, b) in extra {
            lp.add(c.clone(), *r, *b);
        }
        lp.maximize(objective);
        match lp.solve(tol.lp)? {
            LpStatus::Optimal(s) => Ok((s.x, s.objective)),
            LpStatus::Infeasible => Err(Error::InfeasiblePolytope),
            LpStatus::Unbounded => Err(Error::Unbounded),
        }
    }
}

/// An equilibrium allocation expressed as money flows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoneyFlowAllocation {
    pub flow: Vec<Vec<f64>>,
    pub prices: Vec<f64>,
}

impl MoneyFlowAllocation {
    /// Quantities `x_ij = f_ij / p_j`.
    pub fn quantities(&self) -> Vec<Vec<f64>> {
        self.flow
            .iter()
            .map(|row| row.iter().zip(&self.prices).map(|(f, p)| f / p).collect())
            .collect()
    }

    /// Normalized payoffs under the market's true utilities.
    pub fn payoffs(&self, market: &Market) -> Vec<f64> {
        self.quantities()
            .iter()
            .enumerate()
            .map(|(i, x)| market.payoff(i, x))
            .collect()
    }

    pub fn original_payoffs(&self, market: &Market) -> Vec<f64> {
        self.payoffs(market)
            .iter()
            .enumerate()
            .map(|(i, &v)| market.payoff_to_original(i, v))
            .collect()
    }

    pub fn support(&self, eps: f64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, row) in self.flow.iter().enumerate() {
            for (j, &f) in row.iter().enumerate() {
                if f > eps {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Best payoff `w_i(S)` of `buyer` over all equilibrium allocations, normalized units.
pub fn max_buyer_payoff(market: &Market, outcome: &EquilibriumOutcome, buyer: usize, tol: &Tolerances) -> Result<f64> {
    let poly = FlowPolytope::of_outcome(market, outcome);
    Ok(poly.maximize(poly.payoff_coefficients(market, buyer), &[], tol)?.1)
}

pub fn max_payoffs(market: &Market, outcome: &EquilibriumOutcome, tol: &Tolerances) -> Result<Vec<f64>> {
    (0..market.num_buyers())
        .map(|i| max_buyer_payoff(market, outcome, i, tol))
        .collect()
}

#[derive(Debug, Clone)]
pub struct ConflictCheck {
    pub conflict_free: bool,
    /// `w_i(S)`, normalized.
    pub best: Vec<f64>,
    pub witness: Option<MoneyFlowAllocation>,
}

/// Whether one equilibrium allocation gives every buyer `w_i(S)` (within `tol.pay`).
pub fn is_conflict_free(market: &Market, outcome: &EquilibriumOutcome, tol: &Tolerances) -> Result<ConflictCheck> {
    let best = max_payoffs(market, outcome, tol)?;
    let poly = FlowPolytope::of_outcome(market, outcome);
    let mut lp = poly.base_lp();
    for (i, w) in best.iter().enumerate() {
        lp.add(poly.payoff_coefficients(market, i), Relation::Ge, w - tol.pay);
    }
    // Any feasible point qualifies; maximizing total payoff lands on a vertex
    // attaining every w_i rather than one sitting on the slack boundary.
    let mut total = vec![0.0; poly.edges().len()];
    for i in 0..market.num_buyers() {
        for (t, c) in total.iter_mut().zip(poly.payoff_coefficients(market, i)) {
            *t += c;
        }
    }
    lp.maximize(total);
    let witness = lp.solve(tol.lp)?.optimal().map(|s| MoneyFlowAllocation {
        flow: poly.to_matrix(&s.x),
        prices: outcome.prices.clone(),
    });
    Ok(ConflictCheck {
        conflict_free: witness.is_some(),
        best,
        witness,
    })
}

/// Allocation chosen by the product-of-payoffs rule.
#[derive(Debug, Clone)]
pub struct PayoffSelection {
    pub allocation: MoneyFlowAllocation,
    /// Normalized payoffs of `allocation`.
    pub payoffs: Vec<f64>,
    pub conflict_free: bool,
    /// Buyers whose payoff is zero in every equilibrium allocation; their
    /// factor is left out of the product.
    pub zero_payoff_buyers: Vec<usize>,
    pub best: Vec<f64>,
}

/// Maximizes `Σ_i log u_i(X)` over the allocation polytope.
///
/// Conflict-free outcomes return the conflict-free witness, which maximizes
/// every factor at once. Otherwise fully corrective Frank-Wolfe runs
/// from the barycenter of the per-buyer optimal vertices.
pub fn select_payoff_allocation(market: &Market, outcome: &EquilibriumOutcome, tol: &Tolerances) -> Result<PayoffSelection> {
    let check = is_conflict_free(market, outcome, tol)?;
    let zero_payoff_buyers: Vec<usize> = check
        .best
        .iter()
        .enumerate()
        .filter(|(_, &w)| w <= tol.pay)
        .map(|(i, _)| i)
        .collect();
    if let Some(witness) = check.witness {
        let payoffs = witness.payoffs(market);
        return Ok(PayoffSelection {
            allocation: witness,
            payoffs,
            conflict_free: true,
            zero_payoff_buyers,
            best: check.best,
        });
    }

    let poly = FlowPolytope::of_outcome(market, outcome);
    let active: Vec<usize> = (0..market.num_buyers()).filter(|i| !zero_payoff_buyers.contains(i)).collect();
    let coeffs: Vec<Vec<f64>> = (0..market.num_buyers())
        .map(|i| poly.payoff_coefficients(market, i))
        .collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let payoff_of = |v: &[f64]| -> Vec<f64> { active.iter().map(|&i| dot(&coeffs[i], v)).collect() };
    let mut vertices: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for &i in &active {
        let (v, _) = poly.maximize(coeffs[i].clone(), &[], tol)?;
        let u = payoff_of(&v);
        vertices.push((v, u));
    }
    let mut weights = vec![1.0 / vertices.len().max(1) as f64; vertices.len()];

    // Fully corrective Frank-Wolfe: each LP adds a vertex, then the weights
    // over all vertices found so far are re-optimized in payoff space.
    for _ in 0..FW_MAX_ITERATIONS {
        reweight(&vertices, &mut weights, tol.pay);
        let x = combine(&vertices, &weights, poly.edges().len());
        let utils = payoff_of(&x);
        let mut grad = vec![0.0; x.len()];
        for (k, &i) in active.iter().enumerate() {
            for (g, c) in grad.iter_mut().zip(&coeffs[i]) {
                *g += c / utils[k];
            }
        }
        let (vertex, _) = poly.maximize(grad.clone(), &[], tol)?;
        let gap = dot(&grad, &vertex) - dot(&grad, &x);
        if gap <= tol.pay {
            break;
        }
        let u = payoff_of(&vertex);
        vertices.push((vertex, u));
        weights.push(0.0);
    }
    let x = combine(&vertices, &weights, poly.edges().len());

    let allocation = MoneyFlowAllocation {
        flow: poly.to_matrix(&x),
        prices: outcome.prices.clone(),
    };
    let payoffs = allocation.payoffs(market);
    Ok(PayoffSelection {
        allocation,
        payoffs,
        conflict_free: false,
        zero_payoff_buyers,
        best: check.best,
    })
}

fn combine(vertices: &[(Vec<f64>, Vec<f64>)], weights: &[f64], len: usize) -> Vec<f64> {
    let mut x = vec![0.0; len];
    for ((v, _), w) in vertices.iter().zip(weights) {
        for (a, b) in x.iter_mut().zip(v) {
            *a += w * b;
        }
    }
    x
}

/// Pairwise Frank-Wolfe on `Σ_k log (Σ_v w_v u_vk)` over the weight simplex.
fn reweight(vertices: &[(Vec<f64>, Vec<f64>)], weights: &mut [f64], eps: f64) {
    let dims = vertices.first().map_or(0, |(_, u)| u.len());
    for _ in 0..PAIRWISE_MAX_ITERATIONS {
        let mut utils = vec![0.0; dims];
        for ((_, u), w) in vertices.iter().zip(weights.iter()) {
            for (a, b) in utils.iter_mut().zip(u) {
                *a += w * b;
            }
        }
        let score = |u: &[f64]| u.iter().zip(&utils).map(|(a, b)| a / b).sum::<f64>();
        let scores: Vec<f64> = vertices.iter().map(|(_, u)| score(u)).collect();
        let toward = (0..scores.len()).max_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap_or(0);
        let Some(away) = (0..scores.len())
            .filter(|&v| weights[v] > 0.0)
            .min_by(|&a, &b| scores[a].total_cmp(&scores[b]))
        else {
            return;
        };
        if scores[toward] - scores[away] <= eps * 1e-3 {
            return;
        }
        let dir: Vec<f64> = vertices[toward].1.iter().zip(&vertices[away].1).map(|(a, b)| a - b).collect();
        let derivative = |g: f64| -> f64 { utils.iter().zip(&dir).map(|(u, d)| d / (u + g * d)).sum() };
        let cap = weights[away];
        let step = if derivative(cap) >= 0.0 {
            cap
        } else {
            let (mut lo, mut hi) = (0.0, cap);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if derivative(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        if step <= 0.0 {
            return;
        }
        weights[toward] += step;
        weights[away] = if step == cap { 0.0 } else { weights[away] - step };
    }
}

/// Among allocations giving buyer `a` its best payoff, one maximizing the flow on `(a, b)`.
pub fn maximize_edge_subject_to_best(
    market: &Market,
    outcome: &EquilibriumOutcome,
    buyer: usize,
    good: usize,
    tol: &Tolerances,
) -> Result<MoneyFlowAllocation> {
    let poly = FlowPolytope::of_outcome(market, outcome);
    let edge = poly
        .edge_index(buyer, good)
        .ok_or_else(|| Error::Invariant(format!("({buyer}, {good}) is not a tight edge")))?;
    let coeffs = poly.payoff_coefficients(market, buyer);
    let (_, best) = poly.maximize(coeffs.clone(), &[], tol)?;
    let mut objective = vec![0.0; poly.edges().len()];
    objective[edge] = 1.0;
    let (x, _) = poly.maximize(objective, &[(coeffs, Relation::Ge, best - tol.pay)], tol)?;
    Ok(MoneyFlowAllocation {
        flow: poly.to_matrix(&x),
        prices: outcome.prices.clone(),
    })
}

/// Everything a caller needs to know about payoffs at a profile, in original units.
#[derive(Debug, Clone, Serialize)]
pub struct PayoffReport {
    pub per_buyer_best: Vec<f64>,
    pub selected: MoneyFlowAllocation,
    pub selected_payoffs: Vec<f64>,
    pub conflict_free: bool,
    pub zero_payoff_buyers: Vec<usize>,
}

pub fn payoff_report(market: &Market, outcome: &EquilibriumOutcome, tol: &Tolerances) -> Result<PayoffReport> {
    let sel = select_payoff_allocation(market, outcome, tol)?;
    let to_orig = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(i, &p)| market.payoff_to_original(i, p))
            .collect()
    };
    Ok(PayoffReport {
        per_buyer_best: to_orig(&sel.best),
        selected_payoffs: to_orig(&sel.payoffs),
        selected: sel.allocation,
        conflict_free: sel.conflict_free,
        zero_payoff_buyers: sel.zero_payoff_buyers,
    })
}
