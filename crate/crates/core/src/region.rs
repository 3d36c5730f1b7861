//! Capacity region geometry with a common message.
//!
//! The region is the set of non-negative `(R1, R2, R0)` satisfying
//!
//! ```text
//! R1/(1-d12) + (R2+R0)/(1-d2) <= 1      (Bound::First)
//! (R1+R0)/(1-d1) + R2/(1-d12) <= 1      (Bound::Second)
//! ```
//!
//! With `d1 <= d2`, the slice at fixed `R0` is a quadrilateral with both
//! bounds active while `R0 <= r_bar`, and a triangle cut only by the first
//! bound above it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{validate, ChannelParams, Violation};

/// Module-wide tolerance for membership and vertex comparisons.
pub const TOL: f64 = 1e-9;

const DEGENERATE_D: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegionError {
    #[error("invalid channel parameters: {0:?}")]
    InvalidParams(Vec<Violation>),
    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),
    #[error("degenerate geometry: the two bounds are parallel (D = {denominator:e})")]
    DegenerateGeometry { denominator: f64 },
    #[error("empty region: common rate {r0} exceeds 1 - delta2 = {max}")]
    EmptyRegion { r0: f64, max: f64 },
    #[error("negative or non-finite rate {0}")]
    InvalidRate(f64),
    #[error("parameters must satisfy delta1 <= delta2 (call canonicalize first)")]
    NotCanonical,
    #[error("common rate {r0} is above r_bar = {r_bar}; use the triangular case")]
    AboveThreshold { r0: f64, r_bar: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RateTriple {
    pub r1: f64,
    pub r2: f64,
    pub r0: f64,
}

impl RateTriple {
    pub fn new(r1: f64, r2: f64, r0: f64) -> Self {
        RateTriple { r1, r2, r0 }
    }

    pub fn sum(&self) -> f64 {
        self.r1 + self.r2 + self.r0
    }

    pub fn swapped(&self) -> Self {
        RateTriple {
            r1: self.r2,
            r2: self.r1,
            r0: self.r0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// `R1/(1-d12) + (R2+R0)/(1-d2) <= 1`
    First,
    /// `(R1+R0)/(1-d1) + R2/(1-d12) <= 1`
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Inside,
    Boundary,
    Outside,
}

/// Membership plus the slack `1 - lhs` of each bound (negative = violated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub membership: Membership,
    pub margins: [f64; 2],
    pub violated: Vec<Bound>,
}

fn check_params(p: &ChannelParams) -> Result<(), RegionError> {
    validate(p).map_err(RegionError::InvalidParams)
}

fn check_rate(r: f64) -> Result<(), RegionError> {
    if r.is_finite() && r >= 0.0 {
        Ok(())
    } else {
        Err(RegionError::InvalidRate(r))
    }
}

/// `x / (1 - delta)`, treating `0 / 0` as zero.
fn ratio(x: f64, delta: f64, what: &str) -> Result<f64, RegionError> {
    let cap = 1.0 - delta;
    if cap > 0.0 {
        Ok(x / cap)
    } else if x == 0.0 {
        Ok(0.0)
    } else {
        Err(RegionError::DegenerateChannel(format!(
            "{what} carries rate {x} over a link that never delivers"
        )))
    }
}

/// Left-hand sides of both bounds.
pub fn bound_values(p: &ChannelParams, r: &RateTriple) -> Result<[f64; 2], RegionError> {
    check_params(p)?;
    if p.delta12 >= 1.0 {
        return Err(RegionError::DegenerateChannel("delta12 = 1: both links always erased".into()));
    }
    let first = r.r1 / (1.0 - p.delta12) + ratio(r.r2 + r.r0, p.delta2, "R2 + R0")?;
    let second = ratio(r.r1 + r.r0, p.delta1, "R1 + R0")? + r.r2 / (1.0 - p.delta12);
    Ok([first, second])
}

/// Membership of `r` with the default tolerance.
pub fn contains(p: &ChannelParams, r: &RateTriple) -> Result<MembershipReport, RegionError> {
    contains_within(p, r, TOL)
}

/// Membership of `r`, treating any bound violated by at most `tol` as tight.
pub fn contains_within(p: &ChannelParams, r: &RateTriple, tol: f64) -> Result<MembershipReport, RegionError> {
    let lhs = bound_values(p, r)?;
    let margins = [1.0 - lhs[0], 1.0 - lhs[1]];
    let violated: Vec<Bound> = [Bound::First, Bound::Second]
        .into_iter()
        .zip(margins)
        .filter(|&(_, m)| m < -tol)
        .map(|(b, _)| b)
        .collect();
    let negative = [r.r1, r.r2, r.r0].iter().any(|&x| x < -tol);
    let membership = if !violated.is_empty() || negative {
        Membership::Outside
    } else if margins.iter().any(|m| m.abs() <= tol) {
        Membership::Boundary
    } else {
        Membership::Inside
    };
    Ok(MembershipReport {
        membership,
        margins,
        violated,
    })
}

/// Relabels the receivers so that `delta1 <= delta2`.
pub fn canonicalize(p: &ChannelParams, r: &RateTriple) -> (ChannelParams, RateTriple, bool) {
    if p.delta1 > p.delta2 {
        (p.swapped(), r.swapped(), true)
    } else {
        (*p, *r, false)
    }
}

fn canonical(p: &ChannelParams) -> Result<(), RegionError> {
    check_params(p)?;
    if p.delta1 > p.delta2 {
        Err(RegionError::NotCanonical)
    } else {
        Ok(())
    }
}

/// Common-rate threshold between the two region shapes.
///
/// Zero when `delta2 = delta12` (then `delta1 = delta12` as well and the
/// formula is `0/0`). Parameters are canonicalized first.
pub fn r_bar(p: &ChannelParams) -> Result<f64, RegionError> {
    check_params(p)?;
    let (p, _, _) = canonicalize(p, &RateTriple::default());
    let gap2 = p.delta2 - p.delta12;
    if gap2 <= DEGENERATE_D {
        return Ok(0.0);
    }
    Ok((p.delta1 - p.delta12) / gap2 * (1.0 - p.delta2))
}

/// `(1-d12) - (1-d1)(1-d2)/(1-d12)`; zero exactly when the two links share
/// one erasure pattern.
pub fn corner_denominator(p: &ChannelParams) -> f64 {
    (1.0 - p.delta12) - (1.0 - p.delta1) * (1.0 - p.delta2) / (1.0 - p.delta12)
}

fn check_common_rate(p: &ChannelParams, r0: f64) -> Result<(), RegionError> {
    check_rate(r0)?;
    let max = 1.0 - p.delta2.max(p.delta1);
    if r0 > max + TOL {
        return Err(RegionError::EmptyRegion { r0, max });
    }
    Ok(())
}

/// Non-trivial corner `(R1*, 0)` of the triangular slice.
pub fn corner_case1(p: &ChannelParams, r0: f64) -> Result<(f64, f64), RegionError> {
    canonical(p)?;
    check_common_rate(p, r0)?;
    if p.delta2 >= 1.0 {
        return Err(RegionError::DegenerateChannel("delta2 = 1: Rx2 never receives".into()));
    }
    let r1 = (1.0 - p.delta12) * (1.0 - r0 / (1.0 - p.delta2));
    Ok((r1.max(0.0), 0.0))
}

/// Maximum sum-rate corner while both bounds are active.
pub fn corner_case2(p: &ChannelParams, r0: f64) -> Result<(f64, f64), RegionError> {
    canonical(p)?;
    check_common_rate(p, r0)?;
    if p.delta12 >= 1.0 {
        return Err(RegionError::DegenerateChannel("delta12 = 1: both links always erased".into()));
    }
    let d = corner_denominator(p);
    if d <= DEGENERATE_D {
        return Err(RegionError::DegenerateGeometry { denominator: d });
    }
    let threshold = r_bar(p)?;
    if r0 > threshold + TOL {
        return Err(RegionError::AboveThreshold { r0, r_bar: threshold });
    }
    let (g1, g2) = (p.delta1 - p.delta12, p.delta2 - p.delta12);
    let r1 = ((1.0 - p.delta1) * g2 - g1 * r0) / d;
    let r2 = (g1 * (1.0 - p.delta2) - g2 * r0) / d;
    Ok((r1.max(0.0), r2.max(0.0)))
}

/// `R1* + R2* + R0` at the maximum sum-rate corner; non-increasing in `r0`.
pub fn sum_rate_max(p: &ChannelParams, r0: f64) -> Result<f64, RegionError> {
    check_params(p)?;
    let (p, _, _) = canonicalize(p, &RateTriple::default());
    check_common_rate(&p, r0)?;
    if p.delta12 >= 1.0 {
        return Err(RegionError::DegenerateChannel("delta12 = 1: both links always erased".into()));
    }
    let (g1, g2) = (p.delta1 - p.delta12, p.delta2 - p.delta12);
    if r0 <= r_bar(&p)? {
        let d = corner_denominator(&p);
        if d <= DEGENERATE_D {
            return Err(RegionError::DegenerateGeometry { denominator: d });
        }
        let a = g1 * g2 / (1.0 - p.delta12);
        Ok(((1.0 - p.delta1) * g2 + (1.0 - p.delta2) * g1 - a * r0) / d)
    } else {
        Ok((1.0 - p.delta12) - r0 * g2 / (1.0 - p.delta2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub r1: f64,
    pub r2: f64,
}

impl Point {
    pub fn new(r1: f64, r2: f64) -> Self {
        Point { r1, r2 }
    }

    fn close(&self, other: &Point) -> bool {
        (self.r1 - other.r1).abs() <= TOL && (self.r2 - other.r2).abs() <= TOL
    }
}

/// Cross-section of a rate region at a fixed common rate.
///
/// Vertices run counter-clockwise from the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSlice {
    pub r0: f64,
    pub vertices: Vec<Point>,
    pub active_bounds: Vec<Bound>,
}

impl RegionSlice {
    fn build(p: &ChannelParams, r0: f64, raw: Vec<Point>) -> Result<Self, RegionError> {
        let mut vertices: Vec<Point> = Vec::with_capacity(raw.len());
        for v in raw {
            let v = Point::new(v.r1.max(0.0), v.r2.max(0.0));
            if !vertices.iter().any(|w| w.close(&v)) {
                vertices.push(v);
            }
        }
        let mut active_bounds = Vec::new();
        for (i, bound) in [Bound::First, Bound::Second].into_iter().enumerate() {
            let mut tight = 0;
            for v in &vertices {
                let lhs = bound_values(p, &RateTriple::new(v.r1, v.r2, r0))?;
                if (1.0 - lhs[i]).abs() <= TOL {
                    tight += 1;
                }
            }
            if tight >= 2 {
                active_bounds.push(bound);
            }
        }
        Ok(RegionSlice {
            r0,
            vertices,
            active_bounds,
        })
    }

    /// The same slice with the receivers relabeled.
    pub fn swap_axes(&self) -> Self {
        let mut vertices: Vec<Point> = self.vertices.iter().map(|v| Point::new(v.r2, v.r1)).collect();
        // Mirroring flips orientation; restore counter-clockwise order from the origin.
        if vertices.len() > 1 {
            vertices[1..].reverse();
        }
        RegionSlice {
            r0: self.r0,
            vertices,
            active_bounds: self
                .active_bounds
                .iter()
                .map(|b| match b {
                    Bound::First => Bound::Second,
                    Bound::Second => Bound::First,
                })
                .collect(),
        }
    }

    /// Largest `R1 + R2 + R0` over the slice.
    pub fn max_sum_rate(&self) -> f64 {
        self.vertices
            .iter()
            .map(|v| v.r1 + v.r2)
            .fold(0.0, f64::max)
            + self.r0
    }

    /// Whether `(r1, r2)` lies in the convex hull of the vertices, up to `tol`.
    pub fn contains_point(&self, r1: f64, r2: f64, tol: f64) -> bool {
        let q = Point::new(r1, r2);
        match self.vertices.as_slice() {
            [] => false,
            [a] => (a.r1 - q.r1).hypot(a.r2 - q.r2) <= tol,
            [a, b] => {
                let (dx, dy) = (b.r1 - a.r1, b.r2 - a.r2);
                let len2 = dx * dx + dy * dy;
                let t = (((q.r1 - a.r1) * dx + (q.r2 - a.r2) * dy) / len2).clamp(0.0, 1.0);
                (a.r1 + t * dx - q.r1).hypot(a.r2 + t * dy - q.r2) <= tol
            }
            vs => (0..vs.len()).all(|i| {
                let (a, b) = (vs[i], vs[(i + 1) % vs.len()]);
                let (ex, ey) = (b.r1 - a.r1, b.r2 - a.r2);
                let cross = ex * (q.r2 - a.r2) - ey * (q.r1 - a.r1);
                cross >= -tol * ex.hypot(ey)
            }),
        }
    }
}

fn axis_limits(p: &ChannelParams, r0: f64) -> (f64, f64) {
    let max_r1 = ((1.0 - p.delta12) * (1.0 - r0 / (1.0 - p.delta2))).min(1.0 - p.delta1 - r0);
    let max_r2 = (1.0 - p.delta2 - r0).min((1.0 - p.delta12) * (1.0 - r0 / (1.0 - p.delta1)));
    (max_r1.max(0.0), max_r2.max(0.0))
}

fn canonical_slice(p: &ChannelParams, r0: f64) -> Result<RegionSlice, RegionError> {
    if p.delta2 >= 1.0 {
        // Only R0 = 0 is admissible and nothing reaches Rx2.
        return RegionSlice::build(p, r0, vec![Point::new(0.0, 0.0), Point::new(1.0 - p.delta1, 0.0)]);
    }
    let (max_r1, max_r2) = axis_limits(p, r0);
    let mut raw = vec![Point::new(0.0, 0.0), Point::new(max_r1, 0.0)];
    if r0 <= r_bar(p)? {
        let (c1, c2) = corner_case2(p, r0)?;
        raw.push(Point::new(c1, c2));
    }
    raw.push(Point::new(0.0, max_r2));
    RegionSlice::build(p, r0, raw)
}

/// Cross-section of the capacity region at common rate `r0`.
pub fn region_slice(p: &ChannelParams, r0: f64) -> Result<RegionSlice, RegionError> {
    check_params(p)?;
    let (cp, _, swapped) = canonicalize(p, &RateTriple::default());
    check_common_rate(&cp, r0)?;
    let slice = canonical_slice(&cp, r0)?;
    Ok(if swapped { slice.swap_axes() } else { slice })
}

/// Region reached by running the private-message scheme and then multicasting
/// the common message at the weaker receiver's link rate: the `r0 = 0` slice
/// scaled by `1 - r0/(1 - d2)`.
pub fn baseline_region_slice(p: &ChannelParams, r0: f64) -> Result<RegionSlice, RegionError> {
    check_params(p)?;
    let (cp, _, swapped) = canonicalize(p, &RateTriple::default());
    check_common_rate(&cp, r0)?;
    let scale = if r0 == 0.0 { 1.0 } else { (1.0 - r0 / (1.0 - cp.delta2)).max(0.0) };
    let base = canonical_slice(&cp, 0.0)?;
    let raw = base
        .vertices
        .iter()
        .map(|v| Point::new(v.r1 * scale, v.r2 * scale))
        .collect();
    let slice = RegionSlice::build(&cp, r0, raw)?;
    Ok(if swapped { slice.swap_axes() } else { slice })
}
