//! Acceptance run: one PASS/FAIL line per criterion, with the failing
//! sub-checks listed underneath.
//!
//! Criteria listed in `KNOWN_RED` fail for reasons documented in the README
//! and do not fail the target. Any other failure does, and so does a known
//! red that starts passing, so the list cannot go stale.

mod common;

use std::time::{Duration, Instant};

use common::*;
use fisher_game::allocation::{is_conflict_free, payoff_report};
use fisher_game::deviation::{best_response_oracle, check_necessary_conditions, conflict_removal, verify_ne, OracleConfig};
use fisher_game::reproduce::fixture;
use fisher_game::scalar::{parse_rational, Scalar};
use fisher_game::two_buyer::{is_nesp, payoff_curve, price_range_at_payoff, OrderedTwoBuyerMarket};
use fisher_game::{solve_equilibrium, Market, StrategyProfile, Tolerances};
use num::BigRational;
use proptest::prelude::*;
use proptest::test_runner::{RngSeed, TestRunner};

const KNOWN_RED: [u8; 2] = [4, 6];

/// Tolerance on reproduced example values.
const CELL: f64 = 1e-2;
/// Tolerance on the closed-form maximum in criterion 4.
const CLOSED_FORM: f64 = 1e-6;
/// Largest oracle gain, original units, for a profile to count as certified.
const CERTIFIED_GAP: f64 = 1e-3;
/// Vertex enumeration must agree with the LP answers to this.
const VERTEX: f64 = 1e-7;
const PROPERTY_CASES: u32 = 500;

struct Criterion {
    id: u8,
    title: &'static str,
    checks: Vec<(String, bool)>,
}

impl Criterion {
    fn new(id: u8, title: &'static str) -> Self {
        Self { id, title, checks: Vec::new() }
    }

    fn check(&mut self, what: impl Into<String>, pass: bool) {
        self.checks.push((what.into(), pass));
    }

    fn near(&mut self, what: &str, expected: f64, computed: f64, tol: f64) {
        let pass = (expected - computed).abs() <= tol;
        self.check(format!("{what}: expected {expected} got {computed:.6}"), pass);
    }

    fn near_all(&mut self, what: &str, expected: &[f64], computed: &[f64], tol: f64) {
        let pass = expected.len() == computed.len() && expected.iter().zip(computed).all(|(e, c)| (e - c).abs() <= tol);
        self.check(format!("{what}: expected {expected:?} got {computed:.4?}"), pass);
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|(_, p)| *p)
    }
}

fn payoffs(market: &Market, profile: &StrategyProfile, tol: &Tolerances) -> Vec<f64> {
    let out = solve_equilibrium(market, profile, tol).unwrap();
    payoff_report(market, &out, tol).unwrap().selected_payoffs
}

/// Payoffs, original units, at the allocation vertex best for `buyer`,
/// found by enumerating every vertex.
fn payoffs_at_best_for(market: &Market, profile: &StrategyProfile, buyer: usize, tol: &Tolerances) -> Vec<f64> {
    let out = solve_equilibrium(market, profile, tol).unwrap();
    let t = Transport::of(market, &out);
    let best = t
        .vertices()
        .into_iter()
        .max_by(|a, b| t.payoff(market, buyer, a).total_cmp(&t.payoff(market, buyer, b)))
        .unwrap();
    (0..market.num_buyers())
        .map(|i| market.payoff_to_original(i, t.payoff(market, i, &best)))
        .collect()
}

fn largest_gap(market: &Market, profile: &StrategyProfile, tol: &Tolerances) -> f64 {
    verify_ne(market, profile, &OracleConfig::default(), tol).unwrap().per_buyer.iter().map(|r| r.gap).fold(0.0, f64::max)
}

fn criterion_1(tol: &Tolerances) -> Criterion {
    let mut c = Criterion::new(1, "truthful and feigned two-buyer market");
    let start = Instant::now();
    let m = fixture("example1").unwrap().market;
    let truthful = m.truthful_profile();
    let out = solve_equilibrium(&m, &truthful, tol).unwrap();
    c.near_all("truthful prices", &[10.0, 10.0], &m.prices_to_original(&out.prices), CELL);
    c.near_all("truthful payoffs", &[10.0, 10.0], &payoffs(&m, &truthful, tol), CELL);
    let feigned = StrategyProfile::new(vec![vec![5.0, 15.0], vec![3.0, 10.0]]).unwrap();
    c.near_all("feigned payoffs", &[11.0, 20.0 / 3.0], &payoffs(&m, &feigned, tol), CELL);
    let elapsed = start.elapsed();
    c.check(format!("runtime {elapsed:?} under 1s"), elapsed < Duration::from_secs(1));
    c
}

fn criterion_2(tol: &Tolerances) -> Criterion {
    let mut c = Criterion::new(2, "conflicted profile and conflict removal");
    let input = fixture("example2").unwrap();
    let (m, s) = (&input.market, input.profile_or_truthful());
    let out = solve_equilibrium(m, &s, tol).unwrap();
    c.near_all("w", &[11.42, 7.74], &payoff_report(m, &out, tol).unwrap().per_buyer_best, CELL);
    c.near_all("payoffs at buyer 1's best", &[11.42, 5.26], &payoffs_at_best_for(m, &s, 0, tol), CELL);
    c.near_all("payoffs at buyer 2's best", &[1.58, 7.74], &payoffs_at_best_for(m, &s, 1, tol), CELL);
    c.check("profile is conflicted", !is_conflict_free(m, &out, tol).unwrap().conflict_free);
    let removal = conflict_removal(m, &s, 0, 0.1, tol).unwrap();
    let worst = m.payoff_to_original(0, checks::worst_payoff(m, &removal.profile, 0));
    c.check(format!("buyer 1 worst payoff after removal {worst:.4} > 11.32"), worst > 11.32);
    let input = fixture("example3").unwrap();
    let out = solve_equilibrium(&input.market, &input.profile_or_truthful(), tol).unwrap();
    let w = payoff_report(&input.market, &out, tol).unwrap().per_buyer_best;
    c.near_all("w at the listed conflict-free profile", &[11.41, 5.29], &w, CELL);
    c
}

fn criterion_3(tol: &Tolerances) -> Criterion {
    let mut c = Criterion::new(3, "necessary conditions are not sufficient");
    let m = fixture("example4").unwrap().market;
    let truthful = m.truthful_profile();
    c.check("necessary conditions all hold", check_necessary_conditions(&m, &truthful, tol).unwrap().all());
    c.near_all("truthful payoffs", &[1.63, 6.5, 0.72], &payoffs(&m, &truthful, tol), CELL);
    let br = best_response_oracle(&m, &truthful, 1, &OracleConfig::default(), tol).unwrap();
    c.check(format!("buyer 2 deviation reaches {:.4} >= 6.74", br.best_payoff), br.best_payoff >= 6.74);
    c
}

/// Maximum of a concave function on `[lo, hi]` by golden-section search.
fn concave_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    while hi - lo > 1e-12 * (1.0 + hi.abs()) {
        let (a, b) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if f(a) < f(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

fn criterion_4(tol: &Tolerances) -> Criterion {
    let mut c = Criterion::new(4, "two certified equilibria with different payoffs");
    let input = fixture("example5").unwrap();
    let m = &input.market;
    let s1 = input.profile_or_truthful();
    let s2 = StrategyProfile::symmetric(vec![2.0, 3.0], 3).unwrap();
    for (name, s, expected) in [("S1", &s1, [1.25, 6.75, 1.25]), ("S2", &s2, [1.25, 7.5, 1.25])] {
        c.near_all(&format!("{name} payoffs"), &expected, &payoffs(m, s, tol), CELL);
        let gap = largest_gap(m, s, tol);
        c.check(format!("{name} largest deviation gain {gap:.2e} <= {CERTIFIED_GAP}"), gap <= CERTIFIED_GAP);
    }
    // Buyer 2's payoff at S1 when she sends x of her 100 to good 1; buyers 1
    // and 3 stay on goods 1 and 3 whatever she does.
    let h = |x: f64| 4.0 * x / (50.0 + x) + 9.0 * (100.0 - x) / (150.0 - x);
    let (x, value) = concave_max(h, 0.0, 100.0);
    c.near("argmax of buyer 2's split payoff", 30.0, x, CLOSED_FORM);
    c.near("max of buyer 2's split payoff", 7.5, value, CLOSED_FORM);
    c
}

fn criterion_5(tol: &Tolerances) -> Criterion {
    let mut c = Criterion::new(5, "two-buyer payoff curve");
    let m = fixture("example6").unwrap().market;
    let o = OrderedTwoBuyerMarket::<BigRational>::new(&m).unwrap();
    let curve = payoff_curve(&o, 0.0);
    let f = |v: &[BigRational; 2]| [v[0].to_f64(), v[1].to_f64()];
    c.near_all("curve start", &[7.0, 8.25], &f(&curve.window[0]), CELL);
    c.near_all("curve end", &[9.14, 3.0], &f(&curve.window[1]), CELL);
    let p = o.t_alpha_payoffs(&parse_rational("1/5").unwrap(), 0.0);
    let p = [o.payoff_to_original(0, &p[0]), o.payoff_to_original(1, &p[1])];
    c.near_all("t(0.2) payoffs", &[8.0, 7.0], &f(&p), CELL);
    let welfare = f(&curve.window[0]).iter().sum::<f64>();
    let fisher: f64 = payoffs(&m, &m.truthful_profile(), tol).iter().sum();
    c.near("welfare at the curve start", 15.25, welfare, CELL);
    c.check(format!("welfare {welfare:.4} beats truthful welfare {fisher:.4}"), welfare > fisher + CELL);
    c
}

fn criterion_6(tol: &Tolerances) -> Criterion {
    let mut c = Criterion::new(6, "equilibrium price range at a fixed payoff");
    let m = fixture("example7").unwrap().market;
    let o = OrderedTwoBuyerMarket::<BigRational>::new(&m).unwrap();
    let third = |k: i64| BigRational::new(k.into(), 3.into());
    let rows = [
        vec![third(20), third(20), third(10), third(10)],
        vec![third(20), third(20), third(9), third(11)],
    ];
    let target = [parse_rational("11/2").unwrap(), parse_rational("8").unwrap()];
    let range = price_range_at_payoff(&o, &target, 0.0);
    for (k, row) in rows.iter().enumerate() {
        let name = format!("S{}", k + 1);
        let pay = o.nice_allocation(&o.to_ordered_row(row), 0.0).original_payoffs(&o);
        c.near_all(&format!("{name} payoffs"), &[5.5, 8.0], &[pay[0].to_f64(), pay[1].to_f64()], CELL);
        let profile = StrategyProfile::symmetric(row.iter().map(Scalar::to_f64).collect(), 2).unwrap();
        let gap = largest_gap(&m, &profile, tol);
        c.check(format!("{name} is an equilibrium (largest deviation gain {gap:.4})"), is_nesp(&m, &profile, tol).unwrap());
        let inside = match &range {
            Ok(r) => r.bounds.iter().zip(row).all(|((lo, hi), v)| lo <= v && v <= hi),
            Err(_) => false,
        };
        c.check(format!("{name} prices inside the exact price range"), inside);
    }
    c
}

fn runner() -> TestRunner {
    TestRunner::new(ProptestConfig { rng_seed: RngSeed::Fixed(20_261_019), ..config(PROPERTY_CASES) })
}

/// Runs `check` on `PROPERTY_CASES` inputs and records the outcome.
fn run<S: Strategy>(c: &mut Criterion, what: &str, strategy: S, check: impl Fn(S::Value) -> checks::Check)
where
    S::Value: std::fmt::Debug,
{
    let result = runner().run(&strategy, check);
    let detail = match &result {
        Ok(()) => format!("{what}: {PROPERTY_CASES} cases"),
        Err(e) => format!("{what}: {e}"),
    };
    c.check(detail, result.is_ok());
}

fn criterion_7() -> Criterion {
    let mut c = Criterion::new(7, "property suite on random small markets");
    let start = Instant::now();
    run(&mut c, "symmetric: equilibrium iff conflict-free", market_with_symmetric_profile(2..=3, 1..=3), |(m, s)| {
        checks::symmetric_equilibrium_iff_conflict_free(&m, &s)
    });
    run(&mut c, "no deviation implies the necessary conditions", positive_market_with_profile(2..=3, 1..=3), |(m, s)| {
        checks::no_deviation_implies_necessary_conditions(&m, &s)
    });
    let two = || market_strategy(2..=2, 1..=3);
    run(&mut c, "polyhedron soundness", (two(), any::<u64>()), |(m, seed)| {
        checks::polyhedron_points_are_equilibria(&m, seed)
    });
    run(&mut c, "polyhedron completeness", (two(), prop::collection::vec(1i64..=8, 3)), |(m, w)| {
        checks::certified_profiles_lie_in_a_polyhedron(&m, &w)
    });
    run(&mut c, "curve concavity", two(), |m| checks::curve_is_concave_and_bounded(&m));
    run(&mut c, "nicify dominance", (two(), prop::collection::vec(0i64..=4, 3)), |(m, s)| {
        checks::nicify_dominates(&m, &s)
    });
    run(&mut c, "mixtures dominated by the curve", (two(), any::<u64>()), |(m, seed)| {
        checks::mixtures_are_dominated(&m, seed)
    });
    let elapsed = start.elapsed();
    c.check(format!("runtime {elapsed:.1?} under 10 min"), elapsed < Duration::from_secs(600));
    c
}

fn criterion_8() -> Criterion {
    let mut c = Criterion::new(8, "LP answers against vertex enumeration");
    run(&mut c, &format!("arbitrary profiles within {VERTEX}"), market_with_profile(2..=3, 1..=3), |(m, s)| {
        checks::lp_matches_vertex_enumeration(&m, &s)
    });
    run(&mut c, &format!("symmetric profiles within {VERTEX}"), market_with_symmetric_profile(2..=3, 1..=3), |(m, s)| {
        checks::lp_matches_vertex_enumeration(&m, &s)
    });
    c
}

fn main() {
    let tol = Tolerances::default();
    let criteria = [
        criterion_1(&tol),
        criterion_2(&tol),
        criterion_3(&tol),
        criterion_4(&tol),
        criterion_5(&tol),
        criterion_6(&tol),
        criterion_7(),
        criterion_8(),
    ];
    let mut unexpected = Vec::new();
    for c in &criteria {
        let known = KNOWN_RED.contains(&c.id);
        let verdict = match (c.passed(), known) {
            (true, false) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
            (true, true) => "PASS (listed as known red)",
        };
        println!("criterion {}: {verdict}  {}", c.id, c.title);
        for (what, pass) in &c.checks {
            println!("    [{}] {what}", if *pass { "ok" } else { "x " });
        }
        if c.passed() == known {
            unexpected.push(c.id);
        }
    }
    let passed = criteria.iter().filter(|c| c.passed()).count();
    println!("{passed}/{} criteria pass", criteria.len());
    if !unexpected.is_empty() {
        println!("unexpected results for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
