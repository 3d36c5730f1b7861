//! Two-user binary erasure broadcast channel with correlated link states.
//!
//! Each slot draws a pair of on/off link states `(s1, s2)` i.i.d. over time.
//! The joint law is fixed by the two marginal erasure probabilities and the
//! probability that both links are erased at once.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const FEASIBILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("invalid channel parameters: {}", join_violations(.0))]
    InvalidParams(Vec<Violation>),
    #[error("transmitter asked for the state of slot {requested} while deciding slot {current}")]
    AccessViolation { requested: usize, current: usize },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// One broken constraint on [`ChannelParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    OutOfRange { name: String, value: f64 },
    JointExceedsMarginal { delta12: f64, min_marginal: f64 },
    NegativeBothReceive { p11: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OutOfRange { name, value } => write!(f, "{name} = {value} is not in [0, 1]"),
            Violation::JointExceedsMarginal { delta12, min_marginal } => write!(
                f,
                "delta12 = {delta12} exceeds min(delta1, delta2) = {min_marginal}"
            ),
            Violation::NegativeBothReceive { p11 } => write!(
                f,
                "1 - delta1 - delta2 + delta12 = {p11} is negative (delta1 + delta2 - delta12 > 1)"
            ),
        }
    }
}

/// Erasure probabilities of the two links and of their joint erasure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub delta1: f64,
    pub delta2: f64,
    pub delta12: f64,
}

impl ChannelParams {
    /// Validated constructor.
    pub fn new(delta1: f64, delta2: f64, delta12: f64) -> Result<Self, ChannelError> {
        let p = ChannelParams { delta1, delta2, delta12 };
        validate(&p).map_err(ChannelError::InvalidParams)?;
        Ok(p)
    }

    /// Independent links: `delta12 = delta1 * delta2`.
    pub fn independent(delta1: f64, delta2: f64) -> Result<Self, ChannelError> {
        ChannelParams::new(delta1, delta2, delta1 * delta2)
    }

    /// The same channel with the receivers relabeled.
    pub fn swapped(&self) -> Self {
        ChannelParams {
            delta1: self.delta2,
            delta2: self.delta1,
            delta12: self.delta12,
        }
    }

    pub fn erasure(&self, rx: Rx) -> f64 {
        match rx {
            Rx::One => self.delta1,
            Rx::Two => self.delta2,
        }
    }
}

/// Returns every violated constraint, or `Ok` when the joint law is a
/// probability vector.
pub fn validate(p: &ChannelParams) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    for (name, value) in [("delta1", p.delta1), ("delta2", p.delta2), ("delta12", p.delta12)] {
        if !(0.0..=1.0).contains(&value) {
            out.push(Violation::OutOfRange {
                name: name.to_string(),
                value,
            });
        }
    }
    if !out.is_empty() {
        return Err(out);
    }
    let min_marginal = p.delta1.min(p.delta2);
    if p.delta12 > min_marginal + FEASIBILITY_TOL {
        out.push(Violation::JointExceedsMarginal {
            delta12: p.delta12,
            min_marginal,
        });
    }
    let p11 = 1.0 - p.delta1 - p.delta2 + p.delta12;
    if p11 < -FEASIBILITY_TOL {
        out.push(Violation::NegativeBothReceive { p11 });
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Joint law of `(S1, S2)`; `p01` is "Rx1 erased, Rx2 receives".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLaw {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

impl JointLaw {
    pub fn prob(&self, s: StatePair) -> f64 {
        match (s.s1, s.s2) {
            (false, false) => self.p00,
            (false, true) => self.p01,
            (true, false) => self.p10,
            (true, true) => self.p11,
        }
    }
}

pub fn joint_law(p: &ChannelParams) -> Result<JointLaw, ChannelError> {
    validate(p).map_err(ChannelError::InvalidParams)?;
    // Clamp float dust from the inclusion-exclusion differences.
    Ok(JointLaw {
        p00: p.delta12,
        p01: (p.delta1 - p.delta12).max(0.0),
        p10: (p.delta2 - p.delta12).max(0.0),
        p11: (1.0 - p.delta1 - p.delta2 + p.delta12).max(0.0),
    })
}

/// Receiver index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rx {
    One,
    Two,
}

impl Rx {
    pub const BOTH: [Rx; 2] = [Rx::One, Rx::Two];

    pub fn index(self) -> usize {
        match self {
            Rx::One => 0,
            Rx::Two => 1,
        }
    }

    pub fn other(self) -> Rx {
        match self {
            Rx::One => Rx::Two,
            Rx::Two => Rx::One,
        }
    }
}

/// Link states of one slot; `true` means the receiver hears the slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StatePair {
    pub s1: bool,
    pub s2: bool,
}

impl StatePair {
    pub fn new(s1: bool, s2: bool) -> Self {
        StatePair { s1, s2 }
    }

    pub fn hears(&self, rx: Rx) -> bool {
        match rx {
            Rx::One => self.s1,
            Rx::Two => self.s2,
        }
    }
}

/// A channel output: the transmitted bit or an erasure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Received {
    Bit(bool),
    Erasure,
}

impl Received {
    pub fn bit(self) -> Option<bool> {
        match self {
            Received::Bit(b) => Some(b),
            Received::Erasure => None,
        }
    }
}

pub fn transmit(x: bool, s: StatePair) -> (Received, Received) {
    let out = |on: bool| if on { Received::Bit(x) } else { Received::Erasure };
    (out(s.s1), out(s.s2))
}

/// Precomputed inverse-CDF sampler for the joint state law.
#[derive(Debug, Clone, Copy)]
pub struct StateSampler {
    c00: f64,
    c01: f64,
    c10: f64,
}

impl StateSampler {
    pub fn new(p: &ChannelParams) -> Result<Self, ChannelError> {
        let law = joint_law(p)?;
        Ok(StateSampler {
            c00: law.p00,
            c01: law.p00 + law.p01,
            c10: law.p00 + law.p01 + law.p10,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> StatePair {
        let u: f64 = rng.gen();
        if u < self.c00 {
            StatePair::new(false, false)
        } else if u < self.c01 {
            StatePair::new(false, true)
        } else if u < self.c10 {
            StatePair::new(true, false)
        } else {
            StatePair::new(true, true)
        }
    }
}

/// One draw from the joint law.
pub fn sample_state<R: Rng + ?Sized>(p: &ChannelParams, rng: &mut R) -> Result<StatePair, ChannelError> {
    Ok(StateSampler::new(p)?.sample(rng))
}

/// Slot-by-slot record of link states.
///
/// The state of a slot is drawn only when [`ChannelTranscript::advance`] is
/// called, after the transmitter has committed to its symbol. The transmitter
/// reads history through [`TransmitterView`], which ends at the previous slot.
#[derive(Debug, Clone)]
pub struct ChannelTranscript {
    sampler: StateSampler,
    states: Vec<StatePair>,
}

impl ChannelTranscript {
    pub fn new(p: &ChannelParams) -> Result<Self, ChannelError> {
        Ok(ChannelTranscript {
            sampler: StateSampler::new(p)?,
            states: Vec::new(),
        })
    }

    /// Slots elapsed.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Draws the state of the current slot and closes it.
    pub fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R) -> StatePair {
        let s = self.sampler.sample(rng);
        self.states.push(s);
        s
    }

    /// Full history, as known to the receivers.
    pub fn receiver_history(&self) -> &[StatePair] {
        &self.states
    }

    pub fn transmitter_view(&self) -> TransmitterView<'_> {
        TransmitterView { past: &self.states }
    }
}

/// Delayed state information available to the encoder of the current slot.
#[derive(Debug, Clone, Copy)]
pub struct TransmitterView<'a> {
    past: &'a [StatePair],
}

impl TransmitterView<'_> {
    /// Index of the slot being decided.
    pub fn current_slot(&self) -> usize {
        self.past.len()
    }

    pub fn state(&self, slot: usize) -> Result<StatePair, ChannelError> {
        self.past.get(slot).copied().ok_or(ChannelError::AccessViolation {
            requested: slot,
            current: self.past.len(),
        })
    }

    pub fn previous(&self) -> Option<StatePair> {
        self.past.last().copied()
    }
}
