//! Property bodies shared by the proptest suites and the acceptance run.
//! Each returns `Err` with a message on a violation and rejects inputs it
//! does not apply to.

use fisher_game::allocation::is_conflict_free;
use fisher_game::deviation::{check_necessary_conditions, verify_ne, OracleConfig};
use fisher_game::lp::LpStatus;
use fisher_game::parallel::Execution;
use fisher_game::two_buyer::{
    alpha_sweep, build_polyhedra, correlated_dominance_check, is_nesp, nicify, payoff_curve, NespPolyhedron,
    OrderedTwoBuyerMarket,
};
use fisher_game::{solve_equilibrium, Market, StrategyProfile, Tolerances};
use num::{BigInt, BigRational, One, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{brute_force_best, brute_force_worst};

type Q = BigRational;
pub type Check = Result<(), TestCaseError>;

fn q(v: i64) -> Q {
    BigRational::from_integer(BigInt::from(v))
}

fn ordered(market: &Market) -> OrderedTwoBuyerMarket<Q> {
    OrderedTwoBuyerMarket::new(market).unwrap()
}

/// Largest best-response gain over all buyers, normalized units.
pub fn largest_gain(market: &Market, profile: &StrategyProfile, tol: &Tolerances) -> f64 {
    let v = verify_ne(market, profile, &OracleConfig::default(), tol).unwrap();
    v.per_buyer
        .iter()
        .map(|r| market.payoff_to_normalized(r.buyer, r.gap))
        .fold(f64::MIN, f64::max)
}

/// Whether `p` lies on the polyline through `vertices`.
fn on_polyline(vertices: &[[Q; 2]], p: &[Q; 2]) -> bool {
    if vertices.len() == 1 {
        return &vertices[0] == p;
    }
    vertices.windows(2).any(|w| {
        let d = [&w[1][0] - &w[0][0], &w[1][1] - &w[0][1]];
        let e = [&p[0] - &w[0][0], &p[1] - &w[0][1]];
        let cross = &d[0] * &e[1] - &d[1] * &e[0];
        let dot = &d[0] * &e[0] + &d[1] * &e[1];
        let len = &d[0] * &d[0] + &d[1] * &d[1];
        cross.is_zero() && dot >= Q::zero() && dot <= len
    })
}

/// Random points of a polyhedron: positive combinations of optima of random
/// objectives over its closure, kept when they satisfy the strict constraints.
fn sample_points(poly: &NespPolyhedron<Q>, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Q>> {
    let n = poly.halfspaces[0].coeffs.len();
    let mut extremes: Vec<Vec<Q>> = Vec::new();
    for _ in 0..2 * n + 2 {
        let mut lp = poly.closure_lp();
        lp.maximize((0..n).map(|_| q(rng.gen_range(-5..=5))).collect());
        match lp.solve(0.0).unwrap() {
            LpStatus::Optimal(s) if !extremes.contains(&s.x) => extremes.push(s.x),
            LpStatus::Infeasible => return Vec::new(),
            _ => {}
        }
    }
    let mut out = Vec::new();
    for _ in 0..count {
        let weights: Vec<Q> = extremes.iter().map(|_| q(rng.gen_range(1..=9))).collect();
        let total: Q = weights.iter().sum();
        let point: Vec<Q> = (0..n)
            .map(|j| extremes.iter().zip(&weights).map(|(x, w)| &x[j] * w).sum::<Q>() / &total)
            .collect();
        if poly.contains(&point, 0.0) {
            out.push(point);
        }
    }
    out
}

fn symmetric_profile(o: &OrderedTwoBuyerMarket<Q>, alpha: &[Q]) -> StrategyProfile {
    let row: Vec<f64> = o.to_original_row(alpha).iter().map(fisher_game::scalar::Scalar::to_f64).collect();
    StrategyProfile::symmetric(row, 2).unwrap()
}

/// A symmetric profile is an equilibrium exactly when it is conflict-free.
pub fn symmetric_equilibrium_iff_conflict_free(market: &Market, profile: &StrategyProfile) -> Check {
    let tol = Tolerances::default();
    let out = solve_equilibrium(market, profile, &tol).unwrap();
    let conflict_free = is_conflict_free(market, &out, &tol).unwrap().conflict_free;
    let gain = largest_gain(market, profile, &tol);
    prop_assert_eq!(conflict_free, gain <= tol.dev, "gain {}", gain);
    Ok(())
}

/// When the search finds no profitable deviation, all necessary conditions
/// hold. Only meaningful for positive utilities.
pub fn no_deviation_implies_necessary_conditions(market: &Market, profile: &StrategyProfile) -> Check {
    let tol = Tolerances::default();
    let gain = largest_gain(market, profile, &tol);
    if gain <= tol.dev {
        let c = check_necessary_conditions(market, profile, &tol).unwrap();
        prop_assert!(c.all(), "{:?} with gain {}", c, gain);
    }
    Ok(())
}

/// Best payoffs and conflict-freeness agree with exhaustive vertex
/// enumeration whenever the allocation polytope has dimension at most 3.
pub fn lp_matches_vertex_enumeration(market: &Market, profile: &StrategyProfile) -> Check {
    let tol = Tolerances::default();
    let out = solve_equilibrium(market, profile, &tol).unwrap();
    let (best, conflict_free, dim) = brute_force_best(market, &out, tol.pay);
    prop_assume!(dim <= 3);
    let check = is_conflict_free(market, &out, &tol).unwrap();
    for (a, b) in check.best.iter().zip(&best) {
        prop_assert!((a - b).abs() <= 1e-7, "{:?} vs {:?}", check.best, best);
    }
    prop_assert_eq!(check.conflict_free, conflict_free);
    Ok(())
}

/// Smallest payoff of `buyer` over all allocations of `profile`, by brute force.
pub fn worst_payoff(market: &Market, profile: &StrategyProfile, buyer: usize) -> f64 {
    let out = solve_equilibrium(market, profile, &Tolerances::default()).unwrap();
    brute_force_worst(market, &out, buyer)
}

pub fn curve_is_concave_and_bounded(market: &Market) -> Check {
    let o = ordered(market);
    let c = payoff_curve(&o, 0.0);
    prop_assert!(c.is_concave(0.0));
    for v in &c.vertices {
        prop_assert!(on_polyline(&c.frontier, &v.payoff));
    }
    for (k, alpha) in [Q::zero(), Q::one()].iter().enumerate() {
        let p = o.t_alpha_payoffs(alpha, 0.0);
        let p = [o.payoff_to_original(0, &p[0]), o.payoff_to_original(1, &p[1])];
        prop_assert_eq!(&c.window[k], &p);
    }
    Ok(())
}

pub fn alpha_sweep_on_curve(market: &Market) -> Check {
    let o = ordered(market);
    let c = payoff_curve(&o, 0.0);
    let sweep = alpha_sweep(&o, 100, 0.0, Execution::Sequential);
    prop_assert_eq!(sweep.len(), 101);
    for (_, p) in &sweep {
        prop_assert!(c.contains(p, 0.0), "{:?} not on the curve", p);
    }
    for w in sweep.windows(2) {
        prop_assert!(w[1].1[0] >= w[0].1[0]);
        prop_assert!(w[1].1[1] <= w[0].1[1]);
    }
    Ok(())
}

/// A full allocation given as buyer 1's quarter shares becomes nice without
/// hurting either buyer, and ends up on the Pareto frontier.
pub fn nicify_dominates(market: &Market, shares: &[i64]) -> Check {
    let o = ordered(market);
    let n = market.num_goods();
    let first: Vec<Q> = shares[..n].iter().map(|&s| q(s) / q(4)).collect();
    let second: Vec<Q> = first.iter().map(|x| Q::one() - x).collect();
    let r = nicify(&o, &[first, second], 0.0).unwrap();
    prop_assert!(r.after[0] >= r.before[0] && r.after[1] >= r.before[1]);
    prop_assert!(on_polyline(&payoff_curve(&o, 0.0).frontier, &r.after));
    Ok(())
}

/// Averages of equilibrium payoffs under random mixing weights never rise
/// above the curve's upper envelope.
pub fn mixtures_are_dominated(market: &Market, seed: u64) -> Check {
    let o = ordered(market);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mean = [Q::zero(), Q::zero()];
    let mut total = Q::zero();
    for _ in 0..8 {
        let alpha = q(rng.gen_range(0..=20)) / q(20);
        let weight = q(rng.gen_range(1..=10));
        let p = o.t_alpha_payoffs(&alpha, 0.0);
        for b in 0..2 {
            mean[b] += o.payoff_to_original(b, &p[b]) * &weight;
        }
        total += weight;
    }
    let mean = [&mean[0] / &total, &mean[1] / &total];
    prop_assert!(correlated_dominance_check(&o, &mean, 0.0));
    Ok(())
}

/// Symmetric profiles certified by the search lie in some polyhedron.
pub fn certified_profiles_lie_in_a_polyhedron(market: &Market, weights: &[i64]) -> Check {
    let tol = Tolerances::default();
    let o = ordered(market);
    let n = o.num_goods();
    let total: i64 = weights[..n].iter().sum();
    let alpha: Vec<Q> = weights[..n].iter().map(|&w| q(w) / q(total)).collect();
    let profile = symmetric_profile(&o, &alpha);
    if largest_gain(market, &profile, &tol) <= tol.dev {
        prop_assert!(is_nesp(market, &profile, &tol).unwrap());
    }
    Ok(())
}

/// Points of every polyhedron give conflict-free symmetric profiles, and the
/// deviation search finds nothing at one point per polyhedron. Points with a
/// zero price are skipped: no report may be all zero on a good somebody
/// values, so the solver rejects them.
pub fn polyhedron_points_are_equilibria(market: &Market, seed: u64) -> Check {
    let tol = Tolerances::default();
    let o = ordered(market);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for poly in build_polyhedra(&o) {
        let points = sample_points(&poly, 100, &mut rng);
        let positive = points.iter().filter(|a| a.iter().all(|v| v > &Q::zero()));
        for (k, alpha) in positive.enumerate() {
            let profile = symmetric_profile(&o, alpha);
            let out = solve_equilibrium(market, &profile, &tol).unwrap();
            prop_assert!(
                is_conflict_free(market, &out, &tol).unwrap().conflict_free,
                "{:?} at {:?}",
                poly.pattern,
                alpha
            );
            prop_assert!(is_nesp(market, &profile, &tol).unwrap());
            if k == 0 {
                let gain = largest_gain(market, &profile, &tol);
                prop_assert!(gain <= tol.dev, "{:?} at {:?} gains {}", poly.pattern, alpha, gain);
            }
        }
    }
    Ok(())
}
