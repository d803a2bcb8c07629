//! Recomputes the worked examples from their bundled fixtures and compares
//! each reported quantity against the published value.

use serde::Serialize;

use crate::allocation::{is_conflict_free, payoff_report, FlowPolytope};
use crate::deviation::{best_response_oracle, check_necessary_conditions, conflict_removal, OracleConfig};
use crate::equilibrium::{solve_equilibrium, EquilibriumOutcome};
use crate::error::Result;
use crate::io::{parse_market_input, MarketInput};
use crate::market::{Market, StrategyProfile};
use crate::scalar::{parse_rational, Scalar};
use crate::tolerances::Tolerances;
use crate::two_buyer::{is_nesp, payoff_curve, price_range_at_payoff, OrderedTwoBuyerMarket};

pub const FIXTURES: [(&str, &str); 7] = [
    ("example1", include_str!("../fixtures/example1.json")),
    ("example2", include_str!("../fixtures/example2.json")),
    ("example3", include_str!("../fixtures/example3.json")),
    ("example4", include_str!("../fixtures/example4.json")),
    ("example5", include_str!("../fixtures/example5.json")),
    ("example6", include_str!("../fixtures/example6.json")),
    ("example7", include_str!("../fixtures/example7.json")),
];

/// Absolute tolerance for numeric cells.
pub const CELL_TOLERANCE: f64 = 1e-2;

pub fn fixture(name: &str) -> Result<MarketInput> {
    let text = FIXTURES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| crate::error::Error::Schema(format!("no fixture {name}")))?;
    parse_market_input(text)
}

#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    pub example: u8,
    pub quantity: String,
    pub expected: String,
    pub computed: String,
    pub pass: bool,
}

struct Table(Vec<Cell>);

impl Table {
    fn approx(&mut self, example: u8, quantity: &str, expected: f64, computed: f64) {
        self.0.push(Cell {
            example,
            quantity: quantity.into(),
            expected: format!("{expected}"),
            computed: format!("{computed:.4}"),
            pass: (expected - computed).abs() <= CELL_TOLERANCE,
        });
    }

    fn at_least(&mut self, example: u8, quantity: &str, bound: f64, computed: f64) {
        self.0.push(Cell {
            example,
            quantity: quantity.into(),
            expected: format!(">= {bound}"),
            computed: format!("{computed:.4}"),
            pass: computed >= bound,
        });
    }

    fn at_most(&mut self, example: u8, quantity: &str, bound: f64, computed: f64) {
        self.0.push(Cell {
            example,
            quantity: quantity.into(),
            expected: format!("<= {bound}"),
            computed: format!("{computed:.6}"),
            pass: computed <= bound,
        });
    }

    fn flag(&mut self, example: u8, quantity: &str, expected: bool, computed: bool) {
        self.0.push(Cell {
            example,
            quantity: quantity.into(),
            expected: expected.to_string(),
            computed: computed.to_string(),
            pass: expected == computed,
        });
    }

    fn vector(&mut self, example: u8, quantity: &str, expected: &[f64], computed: &[f64]) {
        for (k, (e, c)) in expected.iter().zip(computed).enumerate() {
            self.approx(example, &format!("{quantity}[{}]", k + 1), *e, *c);
        }
    }
}

/// Payoffs (original units) of the allocation maximizing `buyer`'s payoff.
fn payoffs_at_best_for(market: &Market, out: &EquilibriumOutcome, buyer: usize, tol: &Tolerances) -> Result<Vec<f64>> {
    let poly = FlowPolytope::of_outcome(market, out);
    let mut lp = poly.base_lp();
    lp.maximize(poly.payoff_coefficients(market, buyer));
    let sol = lp.solve(tol.lp)?.optimal().ok_or(crate::error::Error::InfeasiblePolytope)?;
    Ok((0..market.num_buyers())
        .map(|i| {
            let c = poly.payoff_coefficients(market, i);
            market.payoff_to_original(i, c.iter().zip(&sol.x).map(|(a, b)| a * b).sum())
        })
        .collect())
}

/// Smallest payoff of `buyer` over all equilibrium allocations, original units.
pub fn min_payoff_over_polytope(market: &Market, out: &EquilibriumOutcome, buyer: usize, tol: &Tolerances) -> Result<f64> {
    let poly = FlowPolytope::of_outcome(market, out);
    let mut lp = poly.base_lp();
    lp.minimize(poly.payoff_coefficients(market, buyer));
    let sol = lp.solve(tol.lp)?.optimal().ok_or(crate::error::Error::InfeasiblePolytope)?;
    Ok(market.payoff_to_original(buyer, sol.objective))
}

fn selected(market: &Market, profile: &StrategyProfile, tol: &Tolerances) -> Result<Vec<f64>> {
    let out = solve_equilibrium(market, profile, tol)?;
    Ok(payoff_report(market, &out, tol)?.selected_payoffs)
}

/// Maximum of a concave function on an interval by ternary search.
fn concave_argmax(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    for _ in 0..200 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if f(a) < f(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

pub fn reproduce_examples(tol: &Tolerances, oracle: &OracleConfig) -> Result<Vec<Cell>> {
    let mut t = Table(Vec::new());

    let e1 = fixture("example1")?;
    let m1 = &e1.market;
    let out = solve_equilibrium(m1, &m1.truthful_profile(), tol)?;
    t.vector(1, "truthful prices", &[10.0, 10.0], &m1.prices_to_original(&out.prices));
    t.vector(1, "truthful payoffs", &[10.0, 10.0], &selected(m1, &m1.truthful_profile(), tol)?);
    let feigned = StrategyProfile::new(vec![vec![5.0, 15.0], vec![3.0, 10.0]])?;
    t.vector(1, "feigned payoffs", &[11.0, 20.0 / 3.0], &selected(m1, &feigned, tol)?);

    let e2 = fixture("example2")?;
    let s2 = e2.profile_or_truthful();
    let out = solve_equilibrium(&e2.market, &s2, tol)?;
    t.vector(2, "prices", &[1.0, 19.0], &e2.market.prices_to_original(&out.prices));
    let rep = payoff_report(&e2.market, &out, tol)?;
    t.vector(2, "w", &[11.42, 7.74], &rep.per_buyer_best);
    t.vector(2, "payoffs at buyer 1 optimum", &[11.42, 5.26], &payoffs_at_best_for(&e2.market, &out, 0, tol)?);
    t.vector(2, "payoffs at buyer 2 optimum", &[1.58, 7.74], &payoffs_at_best_for(&e2.market, &out, 1, tol)?);
    t.flag(2, "conflict-free", false, is_conflict_free(&e2.market, &out, tol)?.conflict_free);

    let e3 = fixture("example3")?;
    let out = solve_equilibrium(&e3.market, &e3.profile_or_truthful(), tol)?;
    t.vector(3, "prices", &[1.1, 18.9], &e3.market.prices_to_original(&out.prices));
    t.vector(3, "w", &[11.41, 5.29], &payoff_report(&e3.market, &out, tol)?.per_buyer_best);
    t.flag(3, "graph is a forest", true, out.graph.is_forest());
    let removal = conflict_removal(&e2.market, &s2, 0, 0.1, tol)?;
    let after = solve_equilibrium(&e2.market, &removal.profile, tol)?;
    t.at_least(3, "buyer 1 worst payoff after conflict removal", 11.32, min_payoff_over_polytope(&e2.market, &after, 0, tol)?);

    let e4 = fixture("example4")?;
    let m4 = &e4.market;
    t.vector(4, "truthful payoffs", &[1.63, 6.5, 0.72], &selected(m4, &m4.truthful_profile(), tol)?);
    t.flag(4, "necessary conditions hold", true, check_necessary_conditions(m4, &m4.truthful_profile(), tol)?.all());
    let dev = m4.truthful_profile().with_row(1, vec![2.0, 3.0])?;
    t.vector(4, "payoffs after buyer 2 reports (2,3)", &[1.25, 6.75, 0.83], &selected(m4, &dev, tol)?);
    let br = best_response_oracle(m4, &m4.truthful_profile(), 1, oracle, tol)?;
    t.at_least(4, "oracle best payoff for buyer 2", 6.74, br.best_payoff);

    let e5 = fixture("example5")?;
    let m5 = &e5.market;
    let s1 = e5.profile_or_truthful();
    let s_sym = StrategyProfile::symmetric(vec![2.0, 3.0], 3)?;
    t.vector(5, "S1 payoffs", &[1.25, 6.75, 1.25], &selected(m5, &s1, tol)?);
    t.vector(5, "S2 payoffs", &[1.25, 7.5, 1.25], &selected(m5, &s_sym, tol)?);
    for (name, p) in [("S1", &s1), ("S2", &s_sym)] {
        let gap = (0..3)
            .map(|k| best_response_oracle(m5, p, k, oracle, tol).map(|r| r.gap))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        t.at_most(5, &format!("{name} largest deviation gain"), 1e-3, gap);
    }
    let h2 = |x: f64| 4.0 * x / (50.0 + x) + 9.0 * (100.0 - x) / (150.0 - x);
    let (x_star, h_star) = concave_argmax(h2, 0.0, 100.0);
    t.approx(5, "argmax of buyer 2 money-split payoff", 30.0, x_star);
    t.approx(5, "max of buyer 2 money-split payoff", 7.5, h_star);

    let e6 = fixture("example6")?;
    let o6 = OrderedTwoBuyerMarket::<num::BigRational>::new(&e6.market)?;
    let c6 = payoff_curve(&o6, 0.0);
    let f = |v: &[num::BigRational; 2]| [v[0].to_f64(), v[1].to_f64()];
    t.vector(6, "t(0) payoffs", &[7.0, 8.25], &f(&c6.window[0]));
    t.vector(6, "t(1) payoffs", &[9.14, 3.0], &f(&c6.window[1]));
    let p02 = o6.t_alpha_payoffs(&parse_rational("1/5")?, 0.0);
    t.vector(
        6,
        "t(0.2) payoffs",
        &[8.0, 7.0],
        &[o6.payoff_to_original(0, &p02[0]).to_f64(), o6.payoff_to_original(1, &p02[1]).to_f64()],
    );
    let w = f(&c6.window[0]);
    t.approx(6, "welfare at t(0)", 15.25, w[0] + w[1]);
    let fisher = selected(&e6.market, &e6.market.truthful_profile(), tol)?;
    t.approx(6, "Fisher welfare", 15.0, fisher.iter().sum());

    let e7 = fixture("example7")?;
    let m7 = &e7.market;
    let o7 = OrderedTwoBuyerMarket::<num::BigRational>::new(m7)?;
    let third = |k: i64| num::BigRational::new(k.into(), 3.into());
    let rows = [
        vec![third(20), third(20), third(10), third(10)],
        vec![third(20), third(20), third(9), third(11)],
    ];
    let range = price_range_at_payoff(&o7, &[parse_rational("11/2")?, parse_rational("8")?], 0.0);
    for (k, row) in rows.iter().enumerate() {
        let label = format!("S{}", k + 1);
        let nice = o7.nice_allocation(&o7.to_ordered_row(row), 0.0);
        let pay = nice.original_payoffs(&o7);
        t.vector(7, &format!("{label} payoffs"), &[5.5, 8.0], &[pay[0].to_f64(), pay[1].to_f64()]);
        let profile = StrategyProfile::symmetric(row.iter().map(Scalar::to_f64).collect(), 2)?;
        t.flag(7, &format!("{label} is an equilibrium"), true, is_nesp(m7, &profile, tol)?);
        let inside = match &range {
            Ok(r) => r.bounds.iter().zip(row).all(|((lo, hi), v)| lo <= v && v <= hi),
            Err(_) => false,
        };
        t.flag(7, &format!("{label} prices inside price range at (5.5, 8)"), true, inside);
    }
    Ok(t.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigRational;

    #[test]
    fn all_fixtures_parse() {
        for (name, _) in FIXTURES {
            fixture(name).unwrap();
        }
    }

    /// Buyer 2's split payoff at S1, exactly: the derivative vanishes at
    /// x = 30, where the value is 27/4.
    #[test]
    fn split_payoff_peaks_at_thirty() {
        use crate::scalar::rat;
        let h = |x: &BigRational| rat(4, 1) * x / (rat(50, 1) + x) + rat(9, 1) * (rat(100, 1) - x) / (rat(150, 1) - x);
        let slope = |x: &BigRational| {
            rat(200, 1) / ((rat(50, 1) + x) * (rat(50, 1) + x)) - rat(450, 1) / ((rat(150, 1) - x) * (rat(150, 1) - x))
        };
        let x = rat(30, 1);
        assert_eq!(slope(&x), rat(0, 1));
        assert_eq!(h(&x), rat(27, 4));
        assert!(slope(&rat(29, 1)) > rat(0, 1) && slope(&rat(31, 1)) < rat(0, 1));
        let (x_num, v) = concave_argmax(|x| h(&BigRational::from_float(x).unwrap()).to_f64(), 0.0, 100.0);
        assert!((x_num - 30.0).abs() < 1e-6 && (v - 6.75).abs() < 1e-9);
    }

    #[test]
    fn ternary_search_finds_vertex() {
        let (x, v) = concave_argmax(|x| -(x - 2.0) * (x - 2.0) + 1.0, 0.0, 10.0);
        assert!((x - 2.0).abs() < 1e-6 && (v - 1.0).abs() < 1e-9);
    }
}
