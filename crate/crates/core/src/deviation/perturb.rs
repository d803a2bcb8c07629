//! Cycle breaking through a single buyer's report.
//!
//! `perturb` raises one reported utility `s_ab` so that prices of the goods
//! reachable from `b_a` drop by a factor `1 - α` while those reachable from
//! `g_b` rise by `1 + lα/r`. The step size is half of the largest α before a
//! non-tight edge turns tight, the money flow can no longer follow the
//! prices, or buyer `a`'s best payoff falls to the floor.

use std::collections::VecDeque;

use serde::Serialize;

use crate::allocation::{maximize_edge_subject_to_best, max_buyer_payoff, MoneyFlowAllocation};
use crate::equilibrium::{solve_equilibrium, EquilibriumOutcome};
use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, Node};
use crate::lp::{LinearProgram, LpStatus, Relation};
use crate::market::{Market, StrategyProfile};
use crate::tolerances::Tolerances;

/// Grid used to locate the first α where buyer a's best payoff hits the floor.
const PAYOFF_SCAN_POINTS: usize = 64;
const MAX_STEP_HALVINGS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PerturbationEvent {
    NewTightEdge,
    NonzeroEdgeZero,
    PayoffFloor,
    None,
}

/// Audit record of one perturbation.
#[derive(Debug, Clone, Serialize)]
pub struct PerturbationStep {
    pub buyer: usize,
    pub good: usize,
    /// Nodes reachable from `b_a` (`"b0"`, `"g1"`, ...).
    pub reach_from_buyer: Vec<String>,
    pub reach_from_good: Vec<String>,
    pub price_mass_left: f64,
    pub price_mass_right: f64,
    pub alpha_cap: f64,
    pub alpha_used: f64,
    /// Event that determined `alpha_cap`.
    pub event_hit: PerturbationEvent,
    /// Buyer a's best payoff after the step, original units.
    pub best_payoff_after: f64,
    pub profile_row_after: Vec<f64>,
}

fn node_label(n: &Node) -> String {
    match n {
        Node::Buyer(i) => format!("b{i}"),
        Node::Good(j) => format!("g{j}"),
    }
}

/// Nodes reachable from `start` along paths whose odd-position edges carry
/// flow above `eps`, with `excluded` removed. Includes `start`.
pub fn alternating_reach(
    graph: &BipartiteGraph,
    flow: &[Vec<f64>],
    start: Node,
    excluded: (usize, usize),
    eps: f64,
) -> Vec<Node> {
    let mut g = graph.clone();
    g.set_edge(excluded.0, excluded.1, false);
    // state: (node, next edge is at an odd position)
    let mut seen: Vec<(Node, bool)> = vec![(start, true)];
    let mut queue = VecDeque::from([(start, true)]);
    while let Some((v, odd)) = queue.pop_front() {
        let nexts: Vec<Node> = match v {
            Node::Buyer(i) => g
                .goods_of(i)
                .filter(|&j| !odd || flow[i][j] > eps)
                .map(Node::Good)
                .collect(),
            Node::Good(j) => g
                .buyers_of(j)
                .filter(|&i| !odd || flow[i][j] > eps)
                .map(Node::Buyer)
                .collect(),
        };
        for w in nexts {
            let state = (w, !odd);
            if !seen.contains(&state) {
                seen.push(state);
                queue.push_back(state);
            }
        }
    }
    let mut nodes: Vec<Node> = seen.into_iter().map(|(n, _)| n).collect();
    nodes.sort();
    nodes.dedup();
    nodes
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Side {
    Left,
    Right,
    Rest,
}

struct Setup {
    buyer_side: Vec<Side>,
    good_side: Vec<Side>,
    ratio: f64,
}

impl Setup {
    /// Scale `(c0, c1)` meaning `c0 + c1 α` for a side.
    fn scale(&self, side: Side) -> (f64, f64) {
        match side {
            Side::Left => (1.0, -1.0),
            Side::Right => (1.0, self.ratio),
            Side::Rest => (1.0, 0.0),
        }
    }

    fn price_factor(&self, good: usize, alpha: f64) -> f64 {
        let (c0, c1) = self.scale(self.good_side[good]);
        c0 + c1 * alpha
    }

    /// Edges that survive the price move: inside one side, plus `(a, b)`.
    fn kept_graph(&self, graph: &BipartiteGraph, a: usize, b: usize) -> BipartiteGraph {
        let mut kept = graph.clone();
        for (i, j) in graph.edges() {
            if (i, j) != (a, b) && self.buyer_side[i] != self.good_side[j] {
                kept.set_edge(i, j, false);
            }
        }
        kept
    }
}

/// Result of [`perturb`]; `step` is `None` when the edge was on no cycle.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub profile: StrategyProfile,
    pub step: Option<PerturbationStep>,
}

/// Breaks every cycle through the tight edge `(a, b)` by raising `s_ab`.
///
/// `allocation` must maximize the flow on `(a, b)` among allocations giving
/// `a` its best payoff. `gamma` is in normalized payoff units. The returned
/// profile differs from `profile` only in row `a`.
pub fn perturb(
    market: &Market,
    profile: &StrategyProfile,
    outcome: &EquilibriumOutcome,
    allocation: &MoneyFlowAllocation,
    a: usize,
    b: usize,
    gamma: f64,
    tol: &Tolerances,
) -> Result<Perturbation> {
    let graph = &outcome.graph;
    if !graph.edge_on_cycle(a, b) {
        return Ok(Perturbation {
            profile: profile.clone(),
            step: None,
        });
    }
    let prices = &outcome.prices;
    let flow_eps = tol.eq * 10.0;
    let left = alternating_reach(graph, &allocation.flow, Node::Buyer(a), (a, b), flow_eps);
    let right = alternating_reach(graph, &allocation.flow, Node::Good(b), (a, b), flow_eps);
    if left.iter().any(|v| right.contains(v)) {
        return Err(Error::Invariant(format!(
            "alternating sets from b{a} and g{b} intersect; flow on ({a}, {b}) is not maximal"
        )));
    }
    let (m, n) = (market.num_buyers(), market.num_goods());
    let mut buyer_side = vec![Side::Rest; m];
    let mut good_side = vec![Side::Rest; n];
    for (set, side) in [(&left, Side::Left), (&right, Side::Right)] {
        for v in set {
            match *v {
                Node::Buyer(i) => buyer_side[i] = side,
                Node::Good(j) => good_side[j] = side,
            }
        }
    }
    let l: f64 = (0..n).filter(|&j| good_side[j] == Side::Left).map(|j| prices[j]).sum();
    let r: f64 = (0..n).filter(|&j| good_side[j] == Side::Right).map(|j| prices[j]).sum();
    let setup = Setup {
        buyer_side,
        good_side,
        ratio: l / r,
    };
    let kept = setup.kept_graph(graph, a, b);
    let s = profile.rows();
    let tau = tol.tight;
    let beta: Vec<f64> = (0..m)
        .map(|i| (0..n).map(|j| s[i][j] / prices[j]).fold(0.0, f64::max))
        .collect();

    // α where the relative bang-per-buck of (i, j) crosses 1 - τ, moving in `dir`.
    let crossing = |i: usize, j: usize, rising: bool| -> Option<f64> {
        let rho0 = s[i][j] / prices[j] / beta[i];
        let (c0, c1) = setup.scale(setup.buyer_side[i]);
        let (d0, d1) = setup.scale(setup.good_side[j]);
        let num = (1.0 - tau) * d0 - rho0 * c0;
        let den = rho0 * c1 - (1.0 - tau) * d1;
        if den == 0.0 {
            return None;
        }
        let alpha = num / den;
        let ok = if rising { den > 0.0 && alpha > 0.0 } else { den < 0.0 && alpha >= 0.0 };
        ok.then_some(alpha)
    };

    let mut cap = if l > 0.0 { 1.0 } else { f64::INFINITY };
    let mut event = PerturbationEvent::None;
    let mut floor: f64 = 0.0;
    for i in 0..m {
        for j in 0..n {
            if s[i][j] <= 0.0 || (i, j) == (a, b) {
                continue;
            }
            if !graph.has_edge(i, j) {
                if let Some(al) = crossing(i, j, true) {
                    if al < cap {
                        cap = al;
                        event = PerturbationEvent::NewTightEdge;
                    }
                }
            } else if !kept.has_edge(i, j) {
                // breaking edges must drop below the tight threshold
                if let Some(al) = crossing(i, j, false) {
                    floor = floor.max(al);
                }
            }
        }
    }

    let drain_cap = if l > 0.0 {
        max_feasible_alpha(market.money(), prices, &kept, &setup, tol)?
    } else {
        f64::INFINITY
    };
    if drain_cap < cap {
        cap = drain_cap;
        event = PerturbationEvent::NonzeroEdgeZero;
    }
    if !cap.is_finite() {
        // Prices stay put (nothing reachable on a's side); any α < 1 is admissible.
        cap = 1.0;
    }

    let start_payoff = allocation.payoffs(market)[a];
    let target = start_payoff - gamma;
    let payoff_at = |alpha: f64| -> Result<f64> {
        let p: Vec<f64> = (0..n).map(|j| prices[j] * setup.price_factor(j, alpha)).collect();
        let out = EquilibriumOutcome {
            flow: vec![vec![0.0; n]; m],
            graph: kept.clone(),
            prices: p,
            residual: 0.0,
            iterations: 0,
        };
        max_buyer_payoff(market, &out, a, tol)
    };
    let upper = cap * (1.0 - 1e-9);
    let mut last_ok = 0.0;
    for k in 1..=PAYOFF_SCAN_POINTS {
        let alpha = upper * k as f64 / PAYOFF_SCAN_POINTS as f64;
        let ok = matches!(payoff_at(alpha), Ok(w) if w > target);
        if !ok {
            let (mut lo, mut hi) = (last_ok, alpha);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if matches!(payoff_at(mid), Ok(w) if w > target) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            cap = lo;
            event = PerturbationEvent::PayoffFloor;
            break;
        }
        last_ok = alpha;
    }

    if !(cap > 0.0) || cap <= floor {
        return Err(Error::DegenerateAlphaCap(cap - floor));
    }
    let mut alpha = cap / 2.0;
    if alpha <= floor {
        alpha = 0.5 * (floor + cap);
    }

    let base_row = s[a].to_vec();
    for _ in 0..MAX_STEP_HALVINGS {
        let mut row = base_row.clone();
        row[b] *= (1.0 + setup.ratio * alpha) / (1.0 - alpha);
        let candidate = profile.with_row(a, row)?;
        if let Some(best) = verify_step(market, &candidate, graph, a, b, target, tol)? {
            let scale = market.utility_scale()[a];
            return Ok(Perturbation {
                step: Some(PerturbationStep {
                    buyer: a,
                    good: b,
                    reach_from_buyer: left.iter().map(node_label).collect(),
                    reach_from_good: right.iter().map(node_label).collect(),
                    price_mass_left: l,
                    price_mass_right: r,
                    alpha_cap: cap,
                    alpha_used: alpha,
                    event_hit: event,
                    best_payoff_after: best * scale,
                    profile_row_after: candidate.row(a).to_vec(),
                }),
                profile: candidate,
            });
        }
        alpha = 0.5 * (alpha + floor);
    }
    Err(Error::DegenerateAlphaCap(cap))
}

/// Largest α for which a flow on `kept` pays the moved prices.
fn max_feasible_alpha(
    money: &[f64],
    prices: &[f64],
    kept: &BipartiteGraph,
    setup: &Setup,
    tol: &Tolerances,
) -> Result<f64> {
    let edges = kept.edges();
    let k = edges.len();
    // variables: flows on kept edges, then α
    let mut lp = LinearProgram::new(k + 1);
    for (i, &mi) in money.iter().enumerate() {
        let mut c: Vec<f64> = edges.iter().map(|&(b, _)| if b == i { 1.0 } else { 0.0 }).collect();
        c.push(0.0);
        lp.add(c, Relation::Eq, mi);
    }
    for (j, &pj) in prices.iter().enumerate() {
        let (d0, d1) = setup.scale(setup.good_side[j]);
        let mut c: Vec<f64> = edges.iter().map(|&(_, g)| if g == j { 1.0 } else { 0.0 }).collect();
        c.push(-pj * d1);
        lp.add(c, Relation::Eq, pj * d0);
    }
    lp.add_bound(k, Relation::Le, 1.0);
    let mut obj = vec![0.0; k + 1];
    obj[k] = 1.0;
    lp.maximize(obj);
    match lp.solve(tol.lp)? {
        LpStatus::Optimal(sol) => Ok(sol.x[k]),
        LpStatus::Unbounded => Ok(f64::INFINITY),
        LpStatus::Infeasible => Err(Error::Invariant("allocation flow infeasible at α = 0".into())),
    }
}

/// Re-solves the candidate and checks the perturbation contract. Returns
/// buyer a's new best payoff (normalized) when it holds.
fn verify_step(
    market: &Market,
    candidate: &StrategyProfile,
    before: &BipartiteGraph,
    a: usize,
    b: usize,
    target: f64,
    tol: &Tolerances,
) -> Result<Option<f64>> {
    let out = match solve_equilibrium(market, candidate, tol) {
        Ok(o) => o,
        Err(Error::ConvergenceFailure { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    if out.graph.edge_on_cycle(a, b) || !out.graph.is_subgraph_of(before) {
        return Ok(None);
    }
    let w = max_buyer_payoff(market, &out, a, tol)?;
    Ok((w > target).then_some(w))
}

/// Final profile of [`conflict_removal`] and one trace record per perturbation.
#[derive(Debug, Clone)]
pub struct ConflictRemoval {
    pub profile: StrategyProfile,
    pub steps: Vec<PerturbationStep>,
}

/// Repeatedly perturbs buyer `a`'s report until `b_a` lies on no cycle of
/// the solution graph, losing less than `delta` (original payoff units).
pub fn conflict_removal(
    market: &Market,
    profile: &StrategyProfile,
    a: usize,
    delta: f64,
    tol: &Tolerances,
) -> Result<ConflictRemoval> {
    let delta_norm = market.payoff_to_normalized(a, delta);
    if delta_norm <= 10.0 * tol.pay {
        return Err(Error::ToleranceTooSmall(delta));
    }
    let n = market.num_goods();
    let gamma = delta_norm / n as f64;
    let mut current = profile.clone();
    let mut steps = Vec::new();
    for _ in 0..=n {
        let out = solve_equilibrium(market, &current, tol)?;
        if !out.graph.buyer_on_cycle(a) {
            return Ok(ConflictRemoval {
                profile: current,
                steps,
            });
        }
        if steps.len() == n {
            break;
        }
        let b = out
            .graph
            .goods_of(a)
            .filter(|&j| out.graph.edge_on_cycle(a, j))
            .max_by(|&j, &k| {
                let bj = market.utility(a, j) / out.prices[j];
                let bk = market.utility(a, k) / out.prices[k];
                bj.total_cmp(&bk).then(k.cmp(&j))
            })
            .expect("buyer on a cycle has a cycle edge");
        let x = maximize_edge_subject_to_best(market, &out, a, b, tol)?;
        let next = perturb(market, &current, &out, &x, a, b, gamma, tol)?;
        if let Some(step) = next.step {
            steps.push(step);
        }
        current = next.profile;
    }
    Err(Error::IterationOverrun {
        buyer: a,
        iterations: steps.len(),
    })
}
