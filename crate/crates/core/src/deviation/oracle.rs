//! Brute-force best-response search over one buyer's strategy simplex.

use std::cmp::Ordering;

use serde::Serialize;

use super::perturb::conflict_removal;
use crate::allocation::select_payoff_allocation;
use crate::equilibrium::solve_equilibrium;
use crate::error::{Error, Result};
use crate::market::{Market, StrategyProfile};
use crate::parallel::{map_collect, Execution};
use crate::tolerances::Tolerances;

const SEARCH_BUDGET: u128 = 1_000_000;
const REFINE_FACTOR: usize = 3;
const REFINE_RADIUS: i64 = 3;
const LOCAL_STEPS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
/// Normalized payoff losses allowed to the conflict-removal candidates.
const REMOVAL_LOSSES: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    /// Grid points per coordinate at the first depth.
    pub grid_points: usize,
    pub depth: usize,
    pub exec: Execution,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            grid_points: 15,
            depth: 3,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BestResponse {
    pub buyer: usize,
    /// Best payoff found minus the current payoff, original units.
    pub gap: f64,
    pub current_payoff: f64,
    pub best_payoff: f64,
    /// Normalized strategy row attaining `best_payoff`.
    pub witness: Vec<f64>,
    pub evaluations: usize,
}

/// Selected payoff of `buyer` (normalized) when she reports `row`.
fn payoff_with_row(market: &Market, profile: &StrategyProfile, buyer: usize, row: &[f64], tol: &Tolerances) -> Option<f64> {
    let p = profile.with_row(buyer, row.to_vec()).ok()?;
    let out = solve_equilibrium(market, &p, tol).ok()?;
    let sel = select_payoff_allocation(market, &out, tol).ok()?;
    Some(sel.payoffs[buyer])
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Integer points of the scaled simplex within `REFINE_RADIUS` of `center` in every coordinate.
fn neighborhood(center: &[i64], total: i64) -> Vec<Vec<usize>> {
    let n = center.len();
    let mut out = Vec::new();
    let mut offset = vec![-REFINE_RADIUS; n.saturating_sub(1)];
    loop {
        let mut point: Vec<i64> = center[..n - 1].iter().zip(&offset).map(|(c, d)| c + d).collect();
        let last = total - point.iter().sum::<i64>();
        point.push(last);
        if point.iter().all(|&v| v >= 0) && (last - center[n - 1]).abs() <= REFINE_RADIUS {
            out.push(point.into_iter().map(|v| v as usize).collect());
        }
        let mut k = 0;
        while k < offset.len() && offset[k] == REFINE_RADIUS {
            offset[k] = -REFINE_RADIUS;
            k += 1;
        }
        if k == offset.len() {
            break;
        }
        offset[k] += 1;
    }
    out
}

fn to_row(point: &[usize], total: usize) -> Vec<f64> {
    point.iter().map(|&v| v as f64 / total as f64).collect()
}

fn normalize(mut row: Vec<f64>) -> Option<Vec<f64>> {
    let s: f64 = row.iter().sum();
    if !(s > 0.0) || row.iter().any(|v| *v < 0.0) {
        return None;
    }
    row.iter_mut().for_each(|v| *v /= s);
    Some(row)
}

/// Multiplicative nudges of each coordinate, plus zeroing or seeding it.
fn local_moves(row: &[f64]) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for j in 0..row.len() {
        for &eta in &LOCAL_STEPS {
            for factor in [1.0 + eta, 1.0 - eta] {
                let mut r = row.to_vec();
                r[j] *= factor;
                out.extend(normalize(r));
            }
        }
        let mut zeroed = row.to_vec();
        zeroed[j] = 0.0;
        out.extend(normalize(zeroed));
        let mut seeded = row.to_vec();
        seeded[j] += LOCAL_STEPS[LOCAL_STEPS.len() - 1];
        out.extend(normalize(seeded));
    }
    out
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Highest payoff, ties to the lexicographically smallest row.
fn better(cand: &(Vec<f64>, f64), inc: &(Vec<f64>, f64)) -> bool {
    match cand.1.total_cmp(&inc.1) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => lex_cmp(&cand.0, &inc.0) == Ordering::Less,
    }
}

struct Search<'a> {
    market: &'a Market,
    profile: &'a StrategyProfile,
    buyer: usize,
    tol: &'a Tolerances,
    exec: Execution,
    evaluations: usize,
    best: (Vec<f64>, f64),
}

impl Search<'_> {
    fn offer(&mut self, rows: Vec<Vec<f64>>) {
        let payoffs = map_collect(&rows, self.exec, |r| payoff_with_row(self.market, self.profile, self.buyer, r, self.tol));
        self.evaluations += rows.len();
        for (row, p) in rows.into_iter().zip(payoffs) {
            if let Some(p) = p {
                let cand = (row, p);
                if better(&cand, &self.best) {
                    self.best = cand;
                }
            }
        }
    }
}

/// Searches buyer `buyer`'s normalized reports for the best unilateral deviation.
///
/// Candidates: a barycentric grid, recursively refined around the incumbent;
/// small multiplicative moves around the current report and the incumbent;
/// and the reports produced by conflict removal for this buyer. Evaluations
/// whose equilibrium cannot be computed are skipped.
pub fn best_response_oracle(
    market: &Market,
    profile: &StrategyProfile,
    buyer: usize,
    config: &OracleConfig,
    tol: &Tolerances,
) -> Result<BestResponse> {
    profile.check_against(market)?;
    let n = market.num_goods();
    let budget = (config.grid_points as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if budget > SEARCH_BUDGET {
        return Err(Error::SearchBudgetExceeded(budget));
    }
    if buyer >= market.num_buyers() {
        return Err(Error::Dimension(format!("no buyer {buyer}")));
    }
    let current_row = profile.row(buyer).to_vec();
    let out = solve_equilibrium(market, profile, tol)?;
    let current = select_payoff_allocation(market, &out, tol)?.payoffs[buyer];

    let mut search = Search {
        market,
        profile,
        buyer,
        tol,
        exec: config.exec,
        evaluations: 0,
        best: (current_row.clone(), current),
    };

    let mut resolution = config.grid_points.max(2) - 1;
    search.offer(compositions(resolution, n).iter().map(|p| to_row(p, resolution)).collect());
    for _ in 1..config.depth {
        resolution *= REFINE_FACTOR;
        let center: Vec<i64> = search.best.0.iter().map(|v| (v * resolution as f64).round() as i64).collect();
        let total = resolution as i64;
        let mut rows: Vec<Vec<f64>> = neighborhood(&center, total).iter().map(|p| to_row(p, resolution)).collect();
        rows.retain(|r| r.iter().sum::<f64>() > 0.0);
        search.offer(rows);
    }

    let mut rows = local_moves(&current_row);
    rows.extend(local_moves(&search.best.0.clone()));
    if n > 1 {
        for loss in REMOVAL_LOSSES {
            let delta = market.payoff_to_original(buyer, loss);
            if let Ok(removal) = conflict_removal(market, profile, buyer, delta, tol) {
                rows.push(removal.profile.row(buyer).to_vec());
            }
        }
    }
    search.offer(rows);

    let (witness, best) = search.best;
    let best_payoff = market.payoff_to_original(buyer, best);
    let current_payoff = market.payoff_to_original(buyer, current);
    Ok(BestResponse {
        buyer,
        gap: best_payoff - current_payoff,
        current_payoff,
        best_payoff,
        witness,
        evaluations: search.evaluations,
    })
}
