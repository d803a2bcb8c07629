//! Generators and brute-force reference computations shared by the
//! integration tests. Nothing here calls the library's LP layer.
#![allow(dead_code)]

pub mod checks;

use fisher_game::{EquilibriumOutcome, Market, StrategyProfile};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

/// Fixed seed so failures reproduce from run to run.
pub fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        rng_seed: RngSeed::Fixed(0x5eed),
        ..ProptestConfig::default()
    }
}

/// Small integer market with no all-zero row or column.
pub fn market_strategy(buyers: std::ops::RangeInclusive<usize>, goods: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Market> {
    integer_market(buyers, goods, 0)
}

/// Small integer market with every utility at least `low`.
fn integer_market(
    buyers: std::ops::RangeInclusive<usize>,
    goods: std::ops::RangeInclusive<usize>,
    low: i64,
) -> impl Strategy<Value = Market> {
    (buyers, goods)
        .prop_flat_map(move |(m, n)| {
            (
                prop::collection::vec(prop::collection::vec(low..=6, n), m),
                prop::collection::vec(1i64..=5, m),
            )
        })
        .prop_filter("every row and column needs a positive entry", |(u, _)| {
            let n = u[0].len();
            u.iter().all(|r| r.iter().any(|&v| v > 0)) && (0..n).all(|j| u.iter().any(|r| r[j] > 0))
        })
        .prop_map(|(u, money)| {
            let rows: Vec<&[i64]> = u.iter().map(|r| r.as_slice()).collect();
            Market::from_ints(&rows, &money).expect("generated market is valid")
        })
}

/// Positive normalized row of length `n` from small integer weights.
pub fn row_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1u32..=8, n).prop_map(|w| {
        let s: u32 = w.iter().sum();
        w.iter().map(|&v| v as f64 / s as f64).collect()
    })
}

/// A market together with a symmetric profile of positive weights.
pub fn market_with_symmetric_profile(
    buyers: std::ops::RangeInclusive<usize>,
    goods: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = (Market, StrategyProfile)> {
    market_strategy(buyers, goods).prop_flat_map(|m| {
        let (b, n) = (m.num_buyers(), m.num_goods());
        (Just(m), row_strategy(n).prop_map(move |r| StrategyProfile::symmetric(r, b).unwrap()))
    })
}

/// Like [`market_with_profile`] with strictly positive utilities.
pub fn positive_market_with_profile(
    buyers: std::ops::RangeInclusive<usize>,
    goods: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = (Market, StrategyProfile)> {
    integer_market(buyers, goods, 1).prop_flat_map(|m| {
        let (b, n) = (m.num_buyers(), m.num_goods());
        (Just(m), prop::collection::vec(row_strategy(n), b).prop_map(|rows| StrategyProfile::new(rows).unwrap()))
    })
}

/// A market together with an arbitrary profile of positive weights.
pub fn market_with_profile(
    buyers: std::ops::RangeInclusive<usize>,
    goods: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = (Market, StrategyProfile)> {
    market_strategy(buyers, goods).prop_flat_map(|m| {
        let (b, n) = (m.num_buyers(), m.num_goods());
        (Just(m), prop::collection::vec(row_strategy(n), b).prop_map(|rows| StrategyProfile::new(rows).unwrap()))
    })
}

/// Flows on the tight edges of an outcome, as a transportation polytope:
/// each buyer spends her money, each good collects its price.
pub struct Transport {
    pub money: Vec<f64>,
    pub prices: Vec<f64>,
    pub edges: Vec<(usize, usize)>,
}

impl Transport {
    pub fn of(market: &Market, out: &EquilibriumOutcome) -> Self {
        Self {
            money: market.money().to_vec(),
            prices: out.prices.clone(),
            edges: out.edges(),
        }
    }

    /// Unique flow supported on the forest `support`, if it exists and is nonnegative.
    fn forest_flow(&self, support: &[usize]) -> Option<Vec<f64>> {
        let (m, n) = (self.money.len(), self.prices.len());
        let mut demand: Vec<f64> = self.money.iter().chain(&self.prices).copied().collect();
        let mut live: Vec<usize> = support.to_vec();
        let mut flow = vec![0.0; self.edges.len()];
        let node = |e: usize, side: usize| if side == 0 { self.edges[e].0 } else { m + self.edges[e].1 };
        // peel leaves: a node with one live edge fixes that edge's flow
        while !live.is_empty() {
            let mut degree = vec![0usize; m + n];
            for &e in &live {
                degree[node(e, 0)] += 1;
                degree[node(e, 1)] += 1;
            }
            let (pos, leaf_side) = live
                .iter()
                .enumerate()
                .find_map(|(k, &e)| {
                    if degree[node(e, 0)] == 1 {
                        Some((k, 0))
                    } else if degree[node(e, 1)] == 1 {
                        Some((k, 1))
                    } else {
                        None
                    }
                })?;
            let e = live.swap_remove(pos);
            let (leaf, other) = (node(e, leaf_side), node(e, 1 - leaf_side));
            let f = demand[leaf];
            flow[e] = f;
            demand[leaf] = 0.0;
            demand[other] -= f;
        }
        let scale = self.money.iter().sum::<f64>().max(1.0);
        if flow.iter().any(|&f| f < -1e-12 * scale) || demand.iter().any(|d| d.abs() > 1e-10 * scale) {
            return None;
        }
        Some(flow.into_iter().map(|f| f.max(0.0)).collect())
    }

    /// All vertices: the nonnegative flows supported on forests.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let k = self.edges.len();
        assert!(k <= 16, "vertex enumeration is for small instances");
        let (m, n) = (self.money.len(), self.prices.len());
        let mut out: Vec<Vec<f64>> = Vec::new();
        for mask in 0u32..(1u32 << k) {
            let support: Vec<usize> = (0..k).filter(|e| mask >> e & 1 == 1).collect();
            if support.len() > m + n - 1 || !is_forest(&support, &self.edges, m, n) {
                continue;
            }
            if let Some(f) = self.forest_flow(&support) {
                if !out.iter().any(|v| v.iter().zip(&f).all(|(a, b)| (a - b).abs() < 1e-12)) {
                    out.push(f);
                }
            }
        }
        out
    }

    pub fn payoff(&self, market: &Market, buyer: usize, flow: &[f64]) -> f64 {
        self.edges
            .iter()
            .zip(flow)
            .filter(|((i, _), _)| *i == buyer)
            .map(|(&(i, j), f)| market.utility(i, j) * f / self.prices[j])
            .sum()
    }

    /// Affine dimension of the polytope spanned by `vertices`.
    pub fn dimension(vertices: &[Vec<f64>]) -> usize {
        let Some(base) = vertices.first() else { return 0 };
        let mut rows: Vec<Vec<f64>> = vertices[1..]
            .iter()
            .map(|v| v.iter().zip(base).map(|(a, b)| a - b).collect())
            .collect();
        rank(&mut rows, 1e-9)
    }
}

fn is_forest(support: &[usize], edges: &[(usize, usize)], m: usize, n: usize) -> bool {
    let mut parent: Vec<usize> = (0..m + n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            x = p[x];
        }
        x
    }
    for &e in support {
        let (a, b) = (find(&mut parent, edges[e].0), find(&mut parent, m + edges[e].1));
        if a == b {
            return false;
        }
        parent[a] = b;
    }
    true
}

fn rank(rows: &mut [Vec<f64>], eps: f64) -> usize {
    let cols = rows.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows.len()).max_by(|&a, &b| rows[a][c].abs().total_cmp(&rows[b][c].abs())) else { break };
        if rows[p][c].abs() <= eps {
            continue;
        }
        rows.swap(r, p);
        for k in 0..rows.len() {
            if k != r {
                let f = rows[k][c] / rows[r][c];
                for j in c..cols {
                    rows[k][j] -= f * rows[r][j];
                }
            }
        }
        r += 1;
    }
    r
}

/// Per-buyer best payoffs and the conflict-free verdict by brute force.
/// Conflict-free iff some vertex attains every best payoff, since the set of
/// allocations attaining all of them is a face of the polytope.
pub fn brute_force_best(market: &Market, out: &EquilibriumOutcome, eps: f64) -> (Vec<f64>, bool, usize) {
    let t = Transport::of(market, out);
    let vs = t.vertices();
    assert!(!vs.is_empty(), "equilibrium polytope has no vertex");
    let best: Vec<f64> = (0..market.num_buyers())
        .map(|i| vs.iter().map(|v| t.payoff(market, i, v)).fold(f64::MIN, f64::max))
        .collect();
    let conflict_free = vs
        .iter()
        .any(|v| (0..market.num_buyers()).all(|i| t.payoff(market, i, v) >= best[i] - eps));
    (best, conflict_free, Transport::dimension(&vs))
}

/// Worst payoff of `buyer` over all equilibrium allocations, by brute force.
pub fn brute_force_worst(market: &Market, out: &EquilibriumOutcome, buyer: usize) -> f64 {
    let t = Transport::of(market, out);
    t.vertices().iter().map(|v| t.payoff(market, buyer, v)).fold(f64::MAX, f64::min)
}
