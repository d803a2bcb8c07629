//! The `fmgame` command line.

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use num::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::allocation::{is_conflict_free, payoff_report, PayoffReport};
use crate::deviation::{check_necessary_conditions, conflict_removal, verify_ne, OracleConfig};
use crate::equilibrium::solve_equilibrium;
use crate::error::{Error, Result};
use crate::io::{parse_market_input, to_canonical_json, MarketInput};
use crate::market::{Market, StrategyProfile};
use crate::parallel::Execution;
use crate::reproduce::reproduce_examples;
use crate::scalar::{parse_rational, Scalar};
use crate::tolerances::Tolerances;
use crate::two_buyer::{
    alpha_sweep, correlated_dominance_check, is_nesp, max_payoff_by_imitation, payoff_curve, price_range_at_payoff,
    OrderedTwoBuyerMarket,
};

/// Profiles sampled by `analyze` for the correlated-dominance check.
const DOMINANCE_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Solve,
    Analyze,
    VerifyNe,
    ConflictRemoval,
    Curve,
    PriceRange,
    ReproduceExamples,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "fmgame", version, about = "Strategic analysis of linear Fisher markets")]
pub struct RunConfig {
    #[arg(long, value_enum)]
    pub command: Command,
    /// Market JSON: {"utilities", "money", "profile"?}.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Where to write the JSON result (stdout if absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Grid size of the t(α) sweep in `curve`.
    #[arg(long, default_value_t = 100)]
    pub alpha_steps: usize,
    #[arg(long, default_value_t = 3)]
    pub oracle_depth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Tolerance override, e.g. `--tolerance pay=1e-7`. Repeatable.
    #[arg(long = "tolerance", value_name = "KEY=VAL")]
    pub tolerances: Vec<String>,
    /// Buyer index (0-based) for `conflict-removal`.
    #[arg(long, default_value_t = 0)]
    pub buyer: usize,
    /// Payoff loss allowed by `conflict-removal`, original units.
    #[arg(long, default_value = "0.1")]
    pub delta: String,
    /// Payoff pair for `price-range`, e.g. `11/2,8`.
    #[arg(long)]
    pub payoff: Option<String>,
    /// Also write the curve as CSV here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Run the oracle and sweeps on one thread.
    #[arg(long)]
    pub sequential: bool,
}

/// Result of a command: JSON text, an optional CSV, and whether every
/// reproduced value matched.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub json: String,
    pub csv: Option<String>,
    pub all_passed: bool,
}

/// Process exit status for an error: 1 input, 2 solver, 3 invariant.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse(_)
        | Error::Schema(_)
        | Error::TooFewBuyers { .. }
        | Error::Dimension(_)
        | Error::ZeroUtilityRow(_)
        | Error::NonpositiveMoney(_)
        | Error::NegativeEntry(..)
        | Error::ZeroStrategyRow(_)
        | Error::NotTwoBuyers(_)
        | Error::PointOffCurve
        | Error::Tolerance(_) => 1,
        Error::ConvergenceFailure { .. }
        | Error::PriceCollapse { .. }
        | Error::InfeasiblePolytope
        | Error::Unbounded
        | Error::PivotLimit(_)
        | Error::DegenerateAlphaCap(_)
        | Error::IterationOverrun { .. }
        | Error::ToleranceTooSmall(_)
        | Error::SearchBudgetExceeded(_) => 2,
        Error::RatioIntervalEmpty(..) | Error::Invariant(_) => 3,
    }
}

pub fn diagnostic(err: &Error) -> String {
    let v = json!({"error": format!("{err:?}").split(['(', ' ', '{']).next().unwrap_or(""), "message": err.to_string()});
    to_canonical_json(&v).unwrap_or_else(|_| err.to_string())
}

impl RunConfig {
    pub fn tolerances(&self) -> Result<Tolerances> {
        let mut t = Tolerances::default();
        for a in &self.tolerances {
            t.set(a)?;
        }
        t.validate()?;
        Ok(t)
    }

    fn oracle(&self) -> OracleConfig {
        OracleConfig {
            depth: self.oracle_depth.max(1),
            exec: if self.sequential { Execution::Sequential } else { Execution::Parallel },
            ..OracleConfig::default()
        }
    }

    fn load(&self) -> Result<MarketInput> {
        let path = self
            .input
            .as_ref()
            .ok_or_else(|| Error::Schema("--input is required for this command".into()))?;
        let text = std::fs::read_to_string(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        parse_market_input(&text)
    }
}

#[derive(Serialize)]
struct SolveOutput {
    prices: Vec<f64>,
    edges: Vec<(usize, usize)>,
    residual: f64,
    iterations: usize,
    payoffs: PayoffReport,
}

fn solve_output(market: &Market, profile: &StrategyProfile, tol: &Tolerances) -> Result<SolveOutput> {
    let out = solve_equilibrium(market, profile, tol)?;
    Ok(SolveOutput {
        prices: market.prices_to_original(&out.prices),
        edges: out.edges(),
        residual: out.residual,
        iterations: out.iterations,
        payoffs: payoff_report(market, &out, tol)?,
    })
}

/// Expected payoffs over random report pairs, original units.
fn sampled_expected_payoff(market: &Market, seed: u64, tol: &Tolerances) -> [f64; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = market.num_goods();
    let mut total = [0.0; 2];
    let mut count = 0.0;
    for _ in 0..DOMINANCE_SAMPLES {
        let rows: Vec<Vec<f64>> = (0..2).map(|_| (0..n).map(|_| rng.gen_range(0.01..1.0)).collect()).collect();
        let Ok(p) = StrategyProfile::new(rows) else { continue };
        let Ok(out) = solve_equilibrium(market, &p, tol) else { continue };
        let Ok(rep) = payoff_report(market, &out, tol) else { continue };
        total[0] += rep.selected_payoffs[0];
        total[1] += rep.selected_payoffs[1];
        count += 1.0;
    }
    if count > 0.0 {
        [total[0] / count, total[1] / count]
    } else {
        [0.0, 0.0]
    }
}

fn analyze(cfg: &RunConfig, input: &MarketInput, tol: &Tolerances) -> Result<serde_json::Value> {
    let market = &input.market;
    let profile = input.profile_or_truthful();
    let solved = solve_output(market, &profile, tol)?;
    let out = solve_equilibrium(market, &profile, tol)?;
    let conflict = is_conflict_free(market, &out, tol)?;
    let mut doc = json!({
        "solve": solved,
        "conflict_free": conflict.conflict_free,
        "graph_is_forest": out.graph.is_forest(),
        "necessary_conditions": check_necessary_conditions(market, &profile, tol)?,
        "symmetric": profile.is_symmetric_within(tol.poly),
    });
    if market.num_buyers() == 2 {
        let o = OrderedTwoBuyerMarket::<BigRational>::new(market)?;
        let expected = sampled_expected_payoff(market, cfg.seed, tol);
        let exact = [BigRational::from_f64(expected[0]), BigRational::from_f64(expected[1])];
        let best1 = max_payoff_by_imitation(&o, 0, 0.0)?;
        let best2 = max_payoff_by_imitation(&o, 1, 0.0)?;
        doc["two_buyer"] = json!({
            "order": o.order(),
            "dropped_goods": o.dropped(),
            "is_equilibrium": is_nesp(market, &profile, tol)?,
            "best_payoff_by_imitation": [best1.payoff.render(), best2.payoff.render()],
            "sampled_expected_payoff": expected,
            "sampled_payoff_dominated_by_frontier": correlated_dominance_check(&o, &exact, tol.pay),
        });
    }
    Ok(doc)
}

fn curve(cfg: &RunConfig, market: &Market) -> Result<(serde_json::Value, String)> {
    let o = OrderedTwoBuyerMarket::<BigRational>::new(market)?;
    let c = payoff_curve(&o, 0.0);
    let exec = if cfg.sequential { Execution::Sequential } else { Execution::Parallel };
    let sweep: Vec<_> = alpha_sweep(&o, cfg.alpha_steps, 0.0, exec)
        .into_iter()
        .map(|(a, p)| json!({"alpha": a.render(), "payoff": [p[0].render(), p[1].render()]}))
        .collect();
    let doc = json!({
        "curve": c.to_json(),
        "concave": c.is_concave(0.0),
        "sweep": sweep,
        "dropped_goods": o.dropped(),
    });
    Ok((doc, c.to_csv()))
}

fn price_range(cfg: &RunConfig, market: &Market) -> Result<serde_json::Value> {
    let text = cfg
        .payoff
        .as_ref()
        .ok_or_else(|| Error::Schema("--payoff P1,P2 is required for price-range".into()))?;
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::Schema(format!("--payoff expects two values, got {text:?}")));
    }
    let point = [parse_rational(parts[0].trim())?, parse_rational(parts[1].trim())?];
    let o = OrderedTwoBuyerMarket::<BigRational>::new(market)?;
    let r = price_range_at_payoff(&o, &point, 0.0)?;
    Ok(serde_json::to_value(&r).map_err(|e| Error::Schema(e.to_string()))?)
}

pub fn run_command(cfg: &RunConfig) -> Result<CommandOutput> {
    let tol = cfg.tolerances()?;
    let mut csv = None;
    let mut all_passed = true;
    let doc = match cfg.command {
        Command::ReproduceExamples => {
            let cells = reproduce_examples(&tol, &cfg.oracle())?;
            all_passed = cells.iter().all(|c| c.pass);
            json!({
                "cells": cells,
                "passed": cells.iter().filter(|c| c.pass).count(),
                "total": cells.len(),
            })
        }
        command => {
            let input = cfg.load()?;
            let market = &input.market;
            match command {
                Command::Solve => serde_json::to_value(solve_output(market, &input.profile_or_truthful(), &tol)?)
                    .map_err(|e| Error::Schema(e.to_string()))?,
                Command::Analyze => analyze(cfg, &input, &tol)?,
                Command::VerifyNe => serde_json::to_value(verify_ne(market, &input.profile_or_truthful(), &cfg.oracle(), &tol)?)
                    .map_err(|e| Error::Schema(e.to_string()))?,
                Command::ConflictRemoval => {
                    let delta = parse_rational(&cfg.delta)?.to_f64();
                    let r = conflict_removal(market, &input.profile_or_truthful(), cfg.buyer, delta, &tol)?;
                    json!({"steps": r.steps, "profile": r.profile.rows()})
                }
                Command::Curve => {
                    let (doc, text) = curve(cfg, market)?;
                    csv = Some(text);
                    doc
                }
                Command::PriceRange => price_range(cfg, market)?,
                Command::ReproduceExamples => unreachable!(),
            }
        }
    };
    Ok(CommandOutput {
        json: to_canonical_json(&doc)?,
        csv,
        all_passed,
    })
}

/// Runs the command, writes its artifacts and returns the exit status.
pub fn main_with(cfg: &RunConfig) -> i32 {
    let write = |path: &Option<PathBuf>, text: &str| -> std::io::Result<()> {
        match path {
            Some(p) => std::fs::write(p, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    };
    match run_command(cfg) {
        Ok(out) => {
            if let Err(e) = write(&cfg.output, &out.json) {
                eprintln!("{}", diagnostic(&Error::Schema(e.to_string())));
                return 1;
            }
            if let (Some(path), Some(text)) = (&cfg.csv, &out.csv) {
                if let Err(e) = std::fs::write(path, text) {
                    eprintln!("{}", diagnostic(&Error::Schema(e.to_string())));
                    return 1;
                }
            }
            if out.all_passed {
                0
            } else {
                3
            }
        }
        Err(e) => {
            eprintln!("{}", diagnostic(&e));
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(args: &[&str]) -> RunConfig {
        RunConfig::parse_from(std::iter::once("fmgame").chain(args.iter().copied()))
    }

    fn fixture_path(name: &str) -> String {
        format!("{}/fixtures/{name}.json", env!("CARGO_MANIFEST_DIR"))
    }

    #[test]
    fn solve_example_one() {
        let out = run_command(&cfg(&["--command", "solve", "--input", &fixture_path("example1")])).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out.json).unwrap();
        assert_eq!(v["prices"], json!([10, 10]));
    }

    #[test]
    fn output_is_deterministic() {
        let c = cfg(&["--command", "analyze", "--input", &fixture_path("example6"), "--seed", "7"]);
        assert_eq!(run_command(&c).unwrap().json, run_command(&c).unwrap().json);
    }

    #[test]
    fn curve_example_six() {
        let out = run_command(&cfg(&["--command", "curve", "--input", &fixture_path("example6"), "--alpha-steps", "10"])).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out.json).unwrap();
        assert_eq!(v["curve"]["window"][0], json!(["7", "33/4"]));
        assert_eq!(v["sweep"].as_array().unwrap().len(), 11);
        assert!(out.csv.unwrap().starts_with("alpha_or_breakpoint"));
    }

    #[test]
    fn exit_codes() {
        let missing = cfg(&["--command", "solve", "--input", "/nonexistent.json"]);
        assert_eq!(exit_code(&run_command(&missing).unwrap_err()), 1);
        let bad_tol = cfg(&["--command", "solve", "--input", &fixture_path("example1"), "--tolerance", "eq=1e-3"]);
        assert_eq!(exit_code(&run_command(&bad_tol).unwrap_err()), 1);
        let three = cfg(&["--command", "curve", "--input", &fixture_path("example4")]);
        assert_eq!(exit_code(&run_command(&three).unwrap_err()), 1);
        assert_eq!(exit_code(&Error::PriceCollapse { good: 0, price: 0.0 }), 2);
        assert_eq!(exit_code(&Error::Invariant("x".into())), 3);
    }

    #[test]
    fn diagnostic_names_the_error() {
        let d = diagnostic(&Error::PointOffCurve);
        assert!(d.contains("\"error\": \"PointOffCurve\""), "{d}");
    }
}
