//! Slot-by-slot transmission schemes for private and common messages.
//!
//! A [`SchemePlan`] fixes the bit allocation aimed at a corner of the
//! capacity region and the expected length of every phase. Running a plan
//! draws fresh messages, channel states and generator rows from a seed and
//! returns a [`TrialReport`] with the realized lengths and decode outcomes.
//!
//! Receivers are labeled so that receiver 1 has the better link
//! (`delta1 <= delta2`); plans record whether the caller's labels were swapped.

mod arq;
mod cases;
mod segment;
mod trial;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{validate, ChannelError, ChannelParams};
use crate::region::{self, RateTriple, RegionError};

pub use arq::QueueState;
pub use cases::{run_case1, run_case2, run_variant};
pub use segment::{CodeSpec, Role, SegmentOutcome};
pub use trial::{Msg, Trial};

/// Generator rows span blocks of at most this many message bits by default.
pub const DEFAULT_BLOCK_SIZE: usize = 512;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemeError {
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("common rate {r0} must be below 1 - delta2 = {max}")]
    InfeasibleCommonRate { r0: f64, max: f64 },
    #[error("k1 must be at least 1")]
    EmptyMessage,
    #[error("block size must be at least 1")]
    InvalidBlockSize,
    #[error("slack epsilon must be finite and non-negative, got {0}")]
    InvalidEpsilon(f64),
    #[error("segment wiring: {0}")]
    Wiring(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    /// Common rate above `r_bar`: only the first bound is active.
    CaseI,
    /// Common rate at most `r_bar`: both bounds active.
    CaseII,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Piggybacks common bits on the mis-sent private retransmissions.
    Capacity,
    /// Private-message scheme with a separate multicast for the common bits.
    Baseline,
    /// Private-only scheme followed by one rateless common segment.
    Simple,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Capacity, Variant::Baseline, Variant::Simple];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Capacity => "capacity",
            Variant::Baseline => "baseline",
            Variant::Simple => "simple",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown variant {s:?} (expected capacity, baseline or simple)"))
    }
}

/// How long each phase and segment runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Until feedback shows every decoding prerequisite is met.
    Adaptive,
    /// Exactly `ceil((1 + epsilon) * nominal)` slots; shortfalls are reported.
    Fixed { epsilon: f64 },
}

impl Mode {
    pub fn is_adaptive(&self) -> bool {
        matches!(self, Mode::Adaptive)
    }

    /// Slot budget for a stage of the given nominal length; `None` when adaptive.
    pub fn budget(&self, nominal: f64) -> Option<u64> {
        match *self {
            Mode::Adaptive => None,
            Mode::Fixed { epsilon } => Some(ceil_count((1.0 + epsilon) * nominal)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOptions {
    pub mode: Mode,
    pub block_size: usize,
}

impl Default for TrialOptions {
    fn default() -> Self {
        TrialOptions {
            mode: Mode::Adaptive,
            block_size: DEFAULT_BLOCK_SIZE,
        }
    }
}

impl TrialOptions {
    pub fn validate(&self) -> Result<(), SchemeError> {
        if self.block_size == 0 {
            return Err(SchemeError::InvalidBlockSize);
        }
        if let Mode::Fixed { epsilon } = self.mode {
            if !epsilon.is_finite() || epsilon < 0.0 {
                return Err(SchemeError::InvalidEpsilon(epsilon));
            }
        }
        Ok(())
    }
}

/// Slot counts per phase and segment; absent stages are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Lengths<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n1: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n2: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n2a: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n2b: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n3a: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n3b: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n3c: Option<T>,
}

impl<T: Copy + std::iter::Sum<T>> Lengths<T> {
    pub fn total(&self) -> T {
        [self.n1, self.n2, self.n2a, self.n2b, self.n3a, self.n3b, self.n3c]
            .into_iter()
            .flatten()
            .sum()
    }
}

/// Bit count from a real-valued allocation, rounding up but ignoring
/// floating-point noise just above an integer.
pub fn ceil_count(x: f64) -> u64 {
    if x.is_nan() || x <= 0.0 {
        return 0;
    }
    (x - 1e-9 * x.max(1.0)).ceil().max(0.0) as u64
}

/// Bit allocation and expected stage lengths for one corner point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemePlan {
    /// Canonical parameters (`delta1 <= delta2`).
    pub params: ChannelParams,
    /// True when the caller's receivers were relabeled to reach `params`.
    pub swapped: bool,
    pub r0: f64,
    pub case: Case,
    pub k1: u64,
    pub k2: u64,
    pub k0: u64,
    pub k2_exact: f64,
    pub k0_exact: f64,
    /// Expected number of receiver-1 bits heard only by receiver 2.
    pub k12_expected: f64,
    /// Expected number of receiver-2 bits heard only by receiver 1.
    pub k21_expected: f64,
    /// Common bits carried alongside private retransmissions (`k0_2a` or `k0_3b`).
    pub k0_piggyback: u64,
    pub k0_piggyback_exact: f64,
    /// Corner aimed at, in canonical labels.
    pub target: RateTriple,
    /// Real-valued expected lengths from the exact allocation.
    pub expected_lengths: Lengths<f64>,
}

pub fn plan(p: &ChannelParams, r0: f64, k1: u64) -> Result<SchemePlan, SchemeError> {
    validate(p).map_err(ChannelError::InvalidParams)?;
    let (cp, _, swapped) = region::canonicalize(p, &RateTriple::default());
    if !r0.is_finite() || r0 < 0.0 {
        return Err(RegionError::InvalidRate(r0).into());
    }
    let (a1, a2) = (1.0 - cp.delta1, 1.0 - cp.delta2);
    if r0 >= a2 {
        return Err(SchemeError::InfeasibleCommonRate { r0, max: a2 });
    }
    if k1 == 0 {
        return Err(SchemeError::EmptyMessage);
    }
    let d = region::corner_denominator(&cp);
    if d.is_nan() || d <= 1e-12 {
        return Err(RegionError::DegenerateGeometry { denominator: d }.into());
    }
    let case = if r0 > region::r_bar(&cp)? { Case::CaseI } else { Case::CaseII };
    let (t1, t2) = match case {
        Case::CaseI => region::corner_case1(&cp, r0)?,
        Case::CaseII => region::corner_case2(&cp, r0)?,
    };
    if t1 <= 1e-12 {
        return Err(RegionError::DegenerateGeometry { denominator: t1 }.into());
    }

    let a12 = 1.0 - cp.delta12;
    let k1f = k1 as f64;
    let k2_exact = t2 / t1 * k1f;
    let k0_exact = r0 / t1 * k1f;
    let k12 = (cp.delta1 - cp.delta12) / a12 * k1f;
    let mut lengths = Lengths {
        n1: Some(k1f / a12),
        ..Lengths::default()
    };
    let (k21, piggyback) = match case {
        Case::CaseI => {
            let n2a = k12 / a1;
            lengths.n2a = Some(n2a);
            lengths.n2b = Some(k0_exact / a2 - n2a);
            (0.0, a2 * n2a)
        }
        Case::CaseII => {
            let k21 = (cp.delta2 - cp.delta12) / a12 * k2_exact;
            let n3b = (k12 - a1 / a2 * k21) / a1;
            lengths.n2 = Some(k2_exact / a12);
            lengths.n3a = Some(k21 / a2);
            lengths.n3b = Some(n3b);
            lengths.n3c = Some(k0_exact / a2 - n3b);
            (k21, a2 * n3b)
        }
    };
    Ok(SchemePlan {
        params: cp,
        swapped,
        r0,
        case,
        k1,
        k2: if case == Case::CaseI { 0 } else { ceil_count(k2_exact) },
        k0: ceil_count(k0_exact),
        k2_exact,
        k0_exact,
        k12_expected: k12,
        k21_expected: k21,
        k0_piggyback: ceil_count(piggyback),
        k0_piggyback_exact: piggyback,
        target: RateTriple::new(t1, t2, r0),
        expected_lengths: lengths,
    })
}

impl SchemePlan {
    /// The caller's parameters, undoing any relabeling.
    pub fn caller_params(&self) -> ChannelParams {
        if self.swapped {
            self.params.swapped()
        } else {
            self.params
        }
    }

    /// Converts a canonical rate triple to the caller's labels.
    pub fn to_caller(&self, r: RateTriple) -> RateTriple {
        if self.swapped {
            r.swapped()
        } else {
            r
        }
    }

    /// Expected stage lengths when running `variant` on this allocation.
    pub fn expected_lengths_for(&self, variant: Variant) -> Lengths<f64> {
        if variant == Variant::Capacity {
            return self.expected_lengths;
        }
        let p = &self.params;
        let (a1, a2, a12) = (1.0 - p.delta1, 1.0 - p.delta2, 1.0 - p.delta12);
        let k2 = if self.case == Case::CaseI { 0.0 } else { self.k2_exact };
        Lengths {
            n1: Some(self.k1 as f64 / a12),
            n2: Some(k2 / a12),
            n3a: Some(self.k21_expected / a2),
            n3b: Some(((self.k12_expected - a1 / a2 * self.k21_expected) / a1).max(0.0)),
            n3c: Some(self.k0_exact / a2),
            ..Lengths::default()
        }
    }

    /// Rates reached by `variant` when every stage takes its expected length,
    /// in canonical labels.
    pub fn expected_rates(&self, variant: Variant) -> RateTriple {
        let n = self.expected_lengths_for(variant).total();
        let k2 = if self.case == Case::CaseI { 0.0 } else { self.k2_exact };
        RateTriple::new(self.k1 as f64 / n, k2 / n, self.k0_exact / n)
    }
}

/// Per-receiver decode outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DecodeStatus {
    pub common: bool,
    pub private: bool,
}

impl DecodeStatus {
    pub fn ok(&self) -> bool {
        self.common && self.private
    }
}

/// Outcome of one protocol execution, in canonical receiver labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub seed: u64,
    pub variant: Variant,
    pub case: Case,
    pub mode: Mode,
    pub k1: u64,
    pub k2: u64,
    pub k0: u64,
    pub k12_missent: u64,
    pub k21_missent: u64,
    pub k0_piggyback: u64,
    pub realized_lengths: Lengths<u64>,
    pub total_n: u64,
    pub decoded_ok_rx1: DecodeStatus,
    pub decoded_ok_rx2: DecodeStatus,
    pub achieved: RateTriple,
    /// Bits some receiver holds with the wrong value; zero unless decoding is broken.
    pub mis_decoded_bits: u64,
    /// Stages that ended short of their decoding prerequisites (fixed mode).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

impl TrialReport {
    /// Both receivers recovered every message addressed to them.
    pub fn success(&self) -> bool {
        self.decoded_ok_rx1.ok() && self.decoded_ok_rx2.ok()
    }
}
