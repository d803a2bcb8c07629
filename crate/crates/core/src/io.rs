//! JSON input and canonical JSON output.
//!
//! Input: `{"utilities": [[...]], "money": [...], "profile": [[...]]}` with
//! `profile` optional. Numbers may be JSON numbers or strings such as
//! `"7/3"` or `"0.25"`; JSON numbers are read through their shortest decimal
//! form, so `0.1` means exactly one tenth.

use num::BigRational;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::market::{Market, StrategyProfile};
use crate::scalar::{parse_rational, Scalar};

/// Digits after the decimal point kept for floats in canonical output.
const OUTPUT_DECIMALS: usize = 10;

#[derive(Debug, Clone)]
pub struct MarketInput {
    pub market: Market,
    pub profile: Option<StrategyProfile>,
    /// The profile exactly as given, before normalization.
    pub exact_profile: Option<Vec<Vec<BigRational>>>,
}

impl MarketInput {
    /// The given profile, or the truthful one.
    pub fn profile_or_truthful(&self) -> StrategyProfile {
        self.profile.clone().unwrap_or_else(|| self.market.truthful_profile())
    }
}

fn number(v: &Value, path: &str) -> Result<BigRational> {
    let text = match v {
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        _ => return Err(Error::Schema(format!("{path}: expected a number or \"p/q\" string"))),
    };
    parse_rational(&text).map_err(|e| Error::Schema(format!("{path}: {e}")))
}

fn vector(v: &Value, path: &str) -> Result<Vec<BigRational>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Schema(format!("{path}: expected an array")))?;
    arr.iter()
        .enumerate()
        .map(|(k, x)| number(x, &format!("{path}[{k}]")))
        .collect()
}

fn matrix(v: &Value, path: &str) -> Result<Vec<Vec<BigRational>>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Schema(format!("{path}: expected an array of rows")))?;
    arr.iter()
        .enumerate()
        .map(|(k, row)| vector(row, &format!("{path}[{k}]")))
        .collect()
}

pub fn parse_market_input(text: &str) -> Result<MarketInput> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::Schema(format!("invalid JSON: {e}")))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| Error::Schema("top level must be an object".into()))?;
    if let Some(k) = obj.keys().find(|k| !matches!(k.as_str(), "utilities" | "money" | "profile")) {
        return Err(Error::Schema(format!("unknown key {k:?}")));
    }
    let get = |k: &str| obj.get(k).ok_or_else(|| Error::Schema(format!("missing key {k:?}")));
    let utilities = matrix(get("utilities")?, "utilities")?;
    let money = vector(get("money")?, "money")?;
    let market = Market::from_rational(utilities, money)?;
    let exact_profile = obj.get("profile").map(|p| matrix(p, "profile")).transpose()?;
    let profile = exact_profile
        .as_ref()
        .map(|rows| {
            let rows_f = rows.iter().map(|r| r.iter().map(Scalar::to_f64).collect()).collect();
            let p = StrategyProfile::new(rows_f)?;
            p.check_against(&market)?;
            Ok::<_, Error>(p)
        })
        .transpose()?;
    Ok(MarketInput {
        market,
        profile,
        exact_profile,
    })
}

fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(0.0);
            let s = format!("{x:.OUTPUT_DECIMALS$}");
            let trimmed = s.trim_end_matches('0').trim_end_matches('.');
            let trimmed = if trimmed == "-0" { "0" } else { trimmed };
            serde_json::from_str(trimmed).unwrap_or(Value::Number(n))
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_floats).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with sorted keys and floats rounded to a fixed number of decimals.
pub fn to_canonical_json<S: Serialize>(value: &S) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Schema(format!("cannot serialize output: {e}")))?;
    let mut s = serde_json::to_string_pretty(&round_floats(v)).map_err(|e| Error::Schema(e.to_string()))?;
    s.push('\n');
    Ok(s)
}
