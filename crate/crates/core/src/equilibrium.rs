//! Equilibrium prices and tight-edge graphs for a strategy profile.
//!
//! Proportional-response bidding drives the prices towards equilibrium. At
//! geometrically spaced checkpoints the current bang-per-buck pattern is used
//! to guess the tight graph; prices implied by that graph are computed in
//! closed form per component and accepted once a supporting money flow
//! exists. This turns the linearly converging iteration into an answer that
//! is exact up to round-off.

use serde::Serialize;

use crate::allocation::FlowPolytope;
use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, Node};
use crate::market::{Market, StrategyProfile};
use crate::tolerances::Tolerances;

/// Relative consistency demanded of bang-per-buck ratios around cycles.
const STRUCTURE_TOL: f64 = 1e-9;
/// Threshold of the candidate graph whose forests are searched.
const FOREST_SEARCH_THETA: f64 = 1e-3;
/// Larger candidates skip the forest search.
const FOREST_SEARCH_MAX_EDGES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumOutcome {
    /// Normalized prices, summing to total normalized money (1).
    pub prices: Vec<f64>,
    #[serde(skip)]
    pub graph: BipartiteGraph,
    /// Largest flow-conservation violation of the witness flow.
    pub residual: f64,
    /// A money flow supported on tight edges; `flow[i][j]` is money of buyer i on good j.
    pub flow: Vec<Vec<f64>>,
    pub iterations: usize,
}

impl EquilibriumOutcome {
    pub fn num_buyers(&self) -> usize {
        self.flow.len()
    }

    pub fn num_goods(&self) -> usize {
        self.prices.len()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.graph.edges()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BidInit {
    /// Bids proportional to the reported utilities.
    Proportional,
    /// Money split evenly over the goods a buyer values.
    Uniform,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub init: BidInit,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 1_000_000,
            init: BidInit::Proportional,
        }
    }
}

pub fn solve_equilibrium(market: &Market, profile: &StrategyProfile, tol: &Tolerances) -> Result<EquilibriumOutcome> {
    solve_equilibrium_with(market, profile, tol, SolverOptions::default())
}

pub fn solve_equilibrium_with(
    market: &Market,
    profile: &StrategyProfile,
    tol: &Tolerances,
    options: SolverOptions,
) -> Result<EquilibriumOutcome> {
    profile.check_against(market)?;
    let s = profile.rows();
    let money = market.money();
    let (m, n) = (market.num_buyers(), market.num_goods());

    for j in 0..n {
        if s.iter().all(|row| row[j] <= 0.0) {
            return Err(Error::PriceCollapse { good: j, price: 0.0 });
        }
    }

    let mut searched = Vec::new();
    // Symmetric profiles have closed-form prices: the common row times total money.
    if profile.is_symmetric() {
        let total: f64 = money.iter().sum();
        let guess: Vec<f64> = s[0].iter().map(|v| v * total).collect();
        if let Some(out) = polish(market, profile, &guess, tol, 0, &mut searched)? {
            return Ok(out);
        }
    }

    let mut bids: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let support = s[i].iter().filter(|&&v| v > 0.0).count() as f64;
            s[i].iter()
                .map(|&v| match options.init {
                    BidInit::Proportional => money[i] * v,
                    BidInit::Uniform if v > 0.0 => money[i] / support,
                    BidInit::Uniform => 0.0,
                })
                .collect()
        })
        .collect();
    let mut prices = column_sums(&bids, n);
    let mut next_check = 1usize;
    let mut change = f64::INFINITY;

    for t in 0..=options.max_iterations {
        if t == next_check || t == options.max_iterations {
            if let Some(out) = polish(market, profile, &prices, tol, t, &mut searched)? {
                return Ok(out);
            }
            next_check = if next_check < 256 { next_check * 2 } else { next_check + 256 };
        }
        if t == options.max_iterations {
            break;
        }
        for i in 0..m {
            let shares: Vec<f64> = (0..n)
                .map(|j| if bids[i][j] > 0.0 { s[i][j] * bids[i][j] / prices[j] } else { 0.0 })
                .collect();
            let total: f64 = shares.iter().sum();
            for j in 0..n {
                bids[i][j] = money[i] * shares[j] / total;
            }
        }
        let new_prices = column_sums(&bids, n);
        change = new_prices
            .iter()
            .zip(&prices)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        prices = new_prices;
    }
    Err(Error::ConvergenceFailure {
        iterations: options.max_iterations,
        residual: change,
    })
}

fn column_sums(bids: &[Vec<f64>], n: usize) -> Vec<f64> {
    (0..n).map(|j| bids.iter().map(|row| row[j]).sum()).collect()
}

/// Tight-edge rule: `s_ij / p_j >= (1 - tau) * max_k s_ik / p_k`, with `s_ij > 0`.
pub fn solution_graph(profile: &StrategyProfile, prices: &[f64], tau: f64) -> BipartiteGraph {
    let (m, n) = (profile.num_buyers(), prices.len());
    let mut g = BipartiteGraph::empty(m, n);
    for (i, row) in profile.rows().iter().enumerate() {
        let best = row
            .iter()
            .zip(prices)
            .map(|(s, p)| s / p)
            .fold(0.0, f64::max);
        for j in 0..n {
            if row[j] > 0.0 && row[j] / prices[j] >= (1.0 - tau) * best {
                g.set_edge(i, j, true);
            }
        }
    }
    g
}

/// Tries successively tighter candidate graphs derived from approximate prices.
fn polish(
    market: &Market,
    profile: &StrategyProfile,
    approx: &[f64],
    tol: &Tolerances,
    iterations: usize,
    searched: &mut Vec<BipartiteGraph>,
) -> Result<Option<EquilibriumOutcome>> {
    if approx.iter().any(|p| !(*p > 0.0)) {
        return Ok(None);
    }
    let mut tried: Vec<BipartiteGraph> = Vec::new();
    let mut theta = 0.1;
    while theta > 1e-11 {
        let candidate = solution_graph(profile, approx, theta);
        theta /= 3.0;
        if tried.contains(&candidate) {
            continue;
        }
        tried.push(candidate.clone());
        let Some(prices) = prices_from_structure(profile, market.money(), &candidate) else {
            continue;
        };
        if let Some(j) = prices.iter().position(|&p| p < tol.price) {
            return Err(Error::PriceCollapse { good: j, price: prices[j] });
        }
        if let Some(out) = accept(market, profile, prices, tol, tol.tight, iterations)? {
            return Ok(Some(out));
        }
    }
    // Edges within τ of tight but not exactly tight make the candidate
    // cycles inconsistent. Try every forest of a loose candidate instead.
    let loose = solution_graph(profile, approx, FOREST_SEARCH_THETA);
    if loose.num_edges() > FOREST_SEARCH_MAX_EDGES || searched.contains(&loose) {
        return Ok(None);
    }
    searched.push(loose.clone());
    for forest in covering_forests(&loose) {
        let Some(prices) = prices_from_structure(profile, market.money(), &forest) else {
            continue;
        };
        if prices.iter().any(|&p| p < tol.price) {
            continue;
        }
        if let Some(out) = accept(market, profile, prices, tol, STRUCTURE_TOL, iterations)? {
            return Ok(Some(out));
        }
    }
    Ok(None)
}

/// Forests of `g` in which every buyer and good has an edge, largest first.
fn covering_forests(g: &BipartiteGraph) -> Vec<BipartiteGraph> {
    let (m, n) = (g.num_buyers(), g.num_goods());
    let edges = g.edges();
    let mut out: Vec<(u32, BipartiteGraph)> = Vec::new();
    for mask in 1u32..(1u32 << edges.len()) {
        if mask.count_ones() as usize > m + n - 1 {
            continue;
        }
        let mut parent: Vec<usize> = (0..m + n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut covered = vec![false; m + n];
        let mut acyclic = true;
        for (k, &(i, j)) in edges.iter().enumerate() {
            if mask >> k & 1 == 0 {
                continue;
            }
            let (a, b) = (find(&mut parent, i), find(&mut parent, m + j));
            if a == b {
                acyclic = false;
                break;
            }
            parent[a] = b;
            covered[i] = true;
            covered[m + j] = true;
        }
        if acyclic && covered.iter().all(|&c| c) {
            let chosen: Vec<(usize, usize)> = (0..edges.len()).filter(|k| mask >> k & 1 == 1).map(|k| edges[k]).collect();
            out.push((mask.count_ones(), BipartiteGraph::from_edges(m, n, &chosen)));
        }
    }
    out.sort_by(|a, b| b.0.cmp(&a.0));
    out.into_iter().map(|(_, f)| f).collect()
}

/// Prices making every edge of `edges` tight, scaled so each component's
/// prices match its buyers' money. None if a cycle is inconsistent or a good
/// is uncovered.
fn prices_from_structure(profile: &StrategyProfile, money: &[f64], edges: &BipartiteGraph) -> Option<Vec<f64>> {
    let (m, n) = (edges.num_buyers(), edges.num_goods());
    if (0..n).any(|j| edges.good_degree(j) == 0) {
        return None;
    }
    let s = profile.rows();
    let mut prices = vec![0.0; n];
    let mut beta = vec![0.0; m];
    let mut done = vec![false; m];
    for root in 0..m {
        if done[root] {
            continue;
        }
        let comp = edges.reachable(Node::Buyer(root));
        beta[root] = 1.0;
        done[root] = true;
        let mut queue = std::collections::VecDeque::from([Node::Buyer(root)]);
        let mut assigned_goods = vec![false; n];
        while let Some(v) = queue.pop_front() {
            match v {
                Node::Buyer(i) => {
                    for j in edges.goods_of(i) {
                        let p = s[i][j] / beta[i];
                        if assigned_goods[j] {
                            if ((prices[j] - p) / p).abs() > STRUCTURE_TOL {
                                return None;
                            }
                        } else {
                            assigned_goods[j] = true;
                            prices[j] = p;
                            queue.push_back(Node::Good(j));
                        }
                    }
                }
                Node::Good(j) => {
                    for k in edges.buyers_of(j) {
                        let b = s[k][j] / prices[j];
                        if done[k] {
                            if ((beta[k] - b) / b).abs() > STRUCTURE_TOL {
                                return None;
                            }
                        } else {
                            done[k] = true;
                            beta[k] = b;
                            queue.push_back(Node::Buyer(k));
                        }
                    }
                }
            }
        }
        let mut comp_money = 0.0;
        let mut comp_price = 0.0;
        for node in &comp {
            match *node {
                Node::Buyer(i) => comp_money += money[i],
                Node::Good(j) => comp_price += prices[j],
            }
        }
        let scale = comp_money / comp_price;
        for node in &comp {
            if let Node::Good(j) = *node {
                prices[j] *= scale;
            }
        }
    }
    Some(prices)
}

/// Checks `prices` and builds the outcome. The flow must live on edges
/// within `tight` of best bang-per-buck; the reported graph always uses the
/// inclusive `tol.tight` rule.
fn accept(
    market: &Market,
    profile: &StrategyProfile,
    prices: Vec<f64>,
    tol: &Tolerances,
    tight: f64,
    iterations: usize,
) -> Result<Option<EquilibriumOutcome>> {
    // no good may beat a buyer's tight goods
    let graph = solution_graph(profile, &prices, tight);
    for (i, row) in profile.rows().iter().enumerate() {
        if graph.buyer_degree(i) == 0 {
            return Ok(None);
        }
        let best = row.iter().zip(&prices).map(|(s, p)| s / p).fold(0.0, f64::max);
        let tight_best = graph
            .goods_of(i)
            .map(|j| row[j] / prices[j])
            .fold(0.0, f64::max);
        if best > tight_best * (1.0 + STRUCTURE_TOL) {
            return Ok(None);
        }
    }
    let polytope = FlowPolytope::new(market.money().to_vec(), prices.clone(), &graph);
    let Some(flow) = polytope.feasible_flow(tol)? else {
        return Ok(None);
    };
    let residual = polytope.residual(&flow);
    if residual > tol.eq {
        return Ok(None);
    }
    let (graph, flow) = if tight == tol.tight {
        (graph, flow)
    } else {
        let wide = solution_graph(profile, &prices, tol.tight);
        let flow = (0..graph.num_buyers())
            .map(|i| (0..graph.num_goods()).map(|j| if graph.has_edge(i, j) { flow[i][j] } else { 0.0 }).collect())
            .collect();
        (wide, flow)
    };
    Ok(Some(EquilibriumOutcome {
        prices,
        graph,
        residual,
        flow,
        iterations,
    }))
}
