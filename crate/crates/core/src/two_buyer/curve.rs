//! The frontier of nice-allocation payoffs and the equilibrium part of it.
//!
//! A point on the frontier is addressed by its position `s ∈ [0, n]`: buyer
//! 1 holds the first `⌊s⌋` ordered goods and a fraction `s - ⌊s⌋` of the
//! next one. Equilibrium payoffs are the positions between those of `t(0)`
//! and `t(1)`.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::Serialize;

use super::{compare_ratio, OrderedTwoBuyerMarket};
use crate::error::{Error, Result};
use crate::market::StrategyProfile;
use crate::parallel::{map_collect, Execution};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint<T> {
    /// Original units.
    pub payoff: [T; 2],
    /// Position along the frontier.
    pub position: T,
    /// The `α` with `t(α)` paying this point, when the point is an
    /// equilibrium payoff and the map is invertible there.
    pub alpha: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSegment<T> {
    pub id: usize,
    pub start: [T; 2],
    pub end: [T; 2],
    /// Original indices of the goods shared along this segment.
    pub sharing_goods: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct PayoffCurve<T> {
    /// Vertices of the full frontier from `(0, U_2)` to `(U_1, 0)`, with
    /// collinear vertices removed. Original units.
    pub frontier: Vec<[T; 2]>,
    /// Vertices of the equilibrium part, from `t(0)` to `t(1)`.
    pub vertices: Vec<CurvePoint<T>>,
    pub segments: Vec<CurveSegment<T>>,
    /// Payoffs of `t(0)` and `t(1)`.
    pub window: [[T; 2]; 2],
    /// Normalized frontier vertices with their positions, for evaluation.
    normalized: Vec<(T, [T; 2])>,
}

fn floor_index<T: Scalar>(position: &T, n: usize) -> usize {
    // Largest k < n with k <= position.
    (0..n).rev().find(|&k| T::from_i64(k as i64) <= *position).unwrap_or(0)
}

/// Normalized payoffs of the nice allocation at `position`.
fn point_at<T: Scalar>(o: &OrderedTwoBuyerMarket<T>, position: &T) -> [T; 2] {
    let n = o.num_goods();
    let k = floor_index(position, n);
    let frac = position.clone() - T::from_i64(k as i64);
    let (u1, u2) = (o.utilities(0), o.utilities(1));
    [
        T::sum(&u1[..k]) + frac.clone() * u1[k].clone(),
        T::sum(&u2[k + 1..]) + (T::one() - frac) * u2[k].clone(),
    ]
}

fn position_of_row<T: Scalar>(o: &OrderedTwoBuyerMarket<T>, row: &[T], tol: f64) -> T {
    T::sum(&o.nice_allocation(row, tol).quantities[0])
}

/// `α` at which `t(α)` gives buyer 1 exactly the first `k` goods.
fn alpha_at_break<T: Scalar>(o: &OrderedTwoBuyerMarket<T>, k: usize) -> Option<T> {
    let a = T::sum(&o.utilities(0)[..k]);
    let b = T::sum(&o.utilities(1)[..k]);
    let den = a.clone() - b;
    if den == T::zero() {
        return None;
    }
    Some((a - o.money(0).clone()) / den)
}

impl<T: Scalar> PayoffCurve<T> {
    /// Whether an original-units payoff pair lies on the equilibrium part.
    pub fn contains(&self, payoff: &[T; 2], tol: f64) -> bool {
        let first = &self.vertices[0].payoff;
        if self.vertices.len() == 1 {
            return first[0].cmp_tol(&payoff[0], tol) == Ordering::Equal
                && first[1].cmp_tol(&payoff[1], tol) == Ordering::Equal;
        }
        self.segments.iter().any(|s| on_segment(&s.start, &s.end, payoff, tol))
    }

    /// Breakpoints strictly decrease in slope along the frontier.
    pub fn is_concave(&self, tol: f64) -> bool {
        self.frontier.windows(3).all(|w| {
            let d1 = [w[1][0].clone() - w[0][0].clone(), w[1][1].clone() - w[0][1].clone()];
            let d2 = [w[2][0].clone() - w[1][0].clone(), w[2][1].clone() - w[1][1].clone()];
            let cross = d1[0].clone() * d2[1].clone() - d1[1].clone() * d2[0].clone();
            cross.sign(tol) == Ordering::Less
        })
    }

    /// Rows `alpha_or_breakpoint,payoff1,payoff2,segment_id,sharing_good_original_index`,
    /// one per equilibrium vertex; merged goods are joined with `;`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha_or_breakpoint,payoff1,payoff2,segment_id,sharing_good_original_index\n");
        for (k, v) in self.vertices.iter().enumerate() {
            let seg = self.segments.get(k).or_else(|| self.segments.last());
            let alpha = v.alpha.as_ref().map(|a| a.to_f64().to_string()).unwrap_or_default();
            let (id, goods) = seg.map_or((String::new(), String::new()), |s| {
                let g: Vec<String> = s.sharing_goods.iter().map(|g| g.to_string()).collect();
                (s.id.to_string(), g.join(";"))
            });
            let _ = writeln!(out, "{alpha},{},{},{id},{goods}", v.payoff[0].to_f64(), v.payoff[1].to_f64());
        }
        out
    }

    pub fn to_json(&self) -> CurveJson {
        CurveJson {
            frontier: self.frontier.iter().map(|p| [p[0].render(), p[1].render()]).collect(),
            window: [
                [self.window[0][0].render(), self.window[0][1].render()],
                [self.window[1][0].render(), self.window[1][1].render()],
            ],
            vertices: self
                .vertices
                .iter()
                .map(|v| CurveVertexJson {
                    alpha: v.alpha.as_ref().map(Scalar::render),
                    payoff: [v.payoff[0].render(), v.payoff[1].render()],
                })
                .collect(),
            segments: self
                .segments
                .iter()
                .map(|s| CurveSegmentJson {
                    id: s.id,
                    start: [s.start[0].render(), s.start[1].render()],
                    end: [s.end[0].render(), s.end[1].render()],
                    sharing_goods: s.sharing_goods.clone(),
                })
                .collect(),
        }
    }

    /// Upper envelope of the frontier at a normalized buyer-1 payoff.
    fn envelope(&self, x: &T, tol: f64) -> Option<T> {
        let pts = &self.normalized;
        if x.sign(tol) != Ordering::Greater {
            return Some(pts[0].1[1].clone());
        }
        let mut best: Option<T> = None;
        for w in pts.windows(2) {
            let (a, b) = (&w[0].1, &w[1].1);
            if x.cmp_tol(&a[0], tol) == Ordering::Less || x.cmp_tol(&b[0], tol) == Ordering::Greater {
                continue;
            }
            let dx = b[0].clone() - a[0].clone();
            let y = if dx.sign(0.0) == Ordering::Greater {
                let t = ((x.clone() - a[0].clone()) / dx).max_of(T::zero()).min_of(T::one());
                a[1].clone() + t * (b[1].clone() - a[1].clone())
            } else {
                a[1].clone().max_of(b[1].clone())
            };
            best = Some(match best {
                None => y,
                Some(v) => v.max_of(y),
            });
        }
        best
    }
}

fn on_segment<T: Scalar>(a: &[T; 2], b: &[T; 2], p: &[T; 2], tol: f64) -> bool {
    let d = [b[0].clone() - a[0].clone(), b[1].clone() - a[1].clone()];
    let q = [p[0].clone() - a[0].clone(), p[1].clone() - a[1].clone()];
    let cross = d[0].clone() * q[1].clone() - d[1].clone() * q[0].clone();
    if cross.sign(tol) != Ordering::Equal {
        return false;
    }
    let dot = d[0].clone() * q[0].clone() + d[1].clone() * q[1].clone();
    let len = d[0].clone() * d[0].clone() + d[1].clone() * d[1].clone();
    dot.sign(tol) != Ordering::Less && dot.cmp_tol(&len, tol) != Ordering::Greater
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveVertexJson {
    pub alpha: Option<String>,
    pub payoff: [String; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveSegmentJson {
    pub id: usize,
    pub start: [String; 2],
    pub end: [String; 2],
    pub sharing_goods: Vec<usize>,
}

/// JSON mirror of the CSV export, numbers rendered exactly.
#[derive(Debug, Clone, Serialize)]
pub struct CurveJson {
    pub frontier: Vec<[String; 2]>,
    pub window: [[String; 2]; 2],
    pub vertices: Vec<CurveVertexJson>,
    pub segments: Vec<CurveSegmentJson>,
}

pub fn payoff_curve<T: Scalar>(o: &OrderedTwoBuyerMarket<T>, tol: f64) -> PayoffCurve<T> {
    let n = o.num_goods();
    let (u1, u2) = (o.utilities(0), o.utilities(1));
    let to_orig = |p: [T; 2]| [o.payoff_to_original(0, &p[0]), o.payoff_to_original(1, &p[1])];

    // Frontier breakpoints at integer positions; interior ones survive only
    // where the ratio strictly drops.
    let kept: Vec<usize> = (0..=n)
        .filter(|&k| k == 0 || k == n || compare_ratio(&u1[k - 1], &u2[k - 1], &u1[k], &u2[k]) != Ordering::Equal)
        .collect();
    let normalized: Vec<(T, [T; 2])> = kept
        .iter()
        .map(|&k| {
            let pos = T::from_i64(k as i64);
            let p = [T::sum(&u1[..k]), T::sum(&u2[k..])];
            (pos, p)
        })
        .collect();

    let s0 = position_of_row(o, &o.t_alpha_row(&T::zero()), tol);
    let s1 = position_of_row(o, &o.t_alpha_row(&T::one()), tol);
    let (lo, hi) = if s0 <= s1 { (s0, s1) } else { (s1, s0) };
    let w0 = to_orig(o.t_alpha_payoffs(&T::zero(), tol));
    let w1 = to_orig(o.t_alpha_payoffs(&T::one(), tol));

    let mut vertices = vec![CurvePoint {
        payoff: to_orig(point_at(o, &lo)),
        position: lo.clone(),
        alpha: Some(T::zero()),
    }];
    for (pos, p) in &normalized {
        if lo.cmp_tol(pos, tol) == Ordering::Less && pos.cmp_tol(&hi, tol) == Ordering::Less {
            let k = pos.to_f64().round() as usize;
            vertices.push(CurvePoint {
                payoff: to_orig(p.clone()),
                position: pos.clone(),
                alpha: alpha_at_break(o, k),
            });
        }
    }
    if hi.cmp_tol(&lo, tol) == Ordering::Greater {
        vertices.push(CurvePoint {
            payoff: to_orig(point_at(o, &hi)),
            position: hi.clone(),
            alpha: Some(T::one()),
        });
    }

    let segments = vertices
        .windows(2)
        .enumerate()
        .map(|(id, w)| {
            let first = floor_index(&w[0].position, n);
            let last = (0..n)
                .find(|&k| T::from_i64(k as i64 + 1) >= w[1].position)
                .unwrap_or(n - 1);
            CurveSegment {
                id,
                start: w[0].payoff.clone(),
                end: w[1].payoff.clone(),
                sharing_goods: (first..=last.max(first)).map(|k| o.order()[k]).collect(),
            }
        })
        .collect();

    PayoffCurve {
        frontier: normalized.iter().map(|(_, p)| to_orig(p.clone())).collect(),
        vertices,
        segments,
        window: [w0, w1],
        normalized,
    }
}

/// Payoffs of `t(α)` (original units) on an evenly spaced grid of `steps + 1` values.
pub fn alpha_sweep<T: Scalar>(o: &OrderedTwoBuyerMarket<T>, steps: usize, tol: f64, exec: Execution) -> Vec<(T, [T; 2])> {
    let steps = steps.max(1);
    let alphas: Vec<T> = (0..=steps)
        .map(|k| T::from_i64(k as i64) / T::from_i64(steps as i64))
        .collect();
    map_collect(&alphas, exec, |a| {
        let p = o.t_alpha_payoffs(a, tol);
        (a.clone(), [o.payoff_to_original(0, &p[0]), o.payoff_to_original(1, &p[1])])
    })
}

#[derive(Debug, Clone)]
pub struct ImitationPayoff<T> {
    /// Original units.
    pub payoff: T,
    pub alpha: T,
    pub profile: StrategyProfile,
}

/// Best equilibrium payoff of `buyer` (0 or 1): both report the other buyer's utilities.
pub fn max_payoff_by_imitation<T: Scalar>(o: &OrderedTwoBuyerMarket<T>, buyer: usize, tol: f64) -> Result<ImitationPayoff<T>> {
    if buyer > 1 {
        return Err(Error::Dimension(format!("no buyer {buyer} in a two-buyer market")));
    }
    let alpha = if buyer == 0 { T::one() } else { T::zero() };
    let p = o.t_alpha_payoffs(&alpha, tol);
    let payoff = o.payoff_to_original(buyer, &p[buyer]);
    let curve = payoff_curve(o, tol);
    let best = curve
        .vertices
        .iter()
        .map(|v| v.payoff[buyer].clone())
        .fold(payoff.clone(), |a, b| a.max_of(b));
    if best.cmp_tol(&payoff, tol) == Ordering::Greater {
        return Err(Error::Invariant(format!(
            "imitation pays buyer {buyer} {} but the curve reaches {}",
            payoff.render(),
            best.render()
        )));
    }
    Ok(ImitationPayoff {
        payoff,
        profile: o.t_alpha(&alpha)?,
        alpha,
    })
}

/// Whether an (expected) payoff pair, original units, lies weakly below the
/// frontier, i.e. is dominated by some nice allocation.
pub fn correlated_dominance_check<T: Scalar>(o: &OrderedTwoBuyerMarket<T>, payoff: &[T; 2], tol: f64) -> bool {
    let curve = payoff_curve(o, tol);
    let x = o.payoff_to_normalized(0, &payoff[0]);
    let y = o.payoff_to_normalized(1, &payoff[1]);
    match curve.envelope(&x, tol) {
        Some(h) => y.cmp_tol(&h, tol) != Ordering::Greater,
        None => false,
    }
}
