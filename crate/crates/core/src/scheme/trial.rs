use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{transmit, ChannelParams, ChannelTranscript, Received, Rx, StatePair};
use crate::gf2::{BitVector, Eliminator};

use super::segment::Code;
use super::{Mode, SchemeError, TrialOptions};

const MESSAGE_STREAM: u64 = 0;
const CHANNEL_STREAM: u64 = 1;
const CODE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Msg {
    /// `W1`, for receiver 1.
    Private1,
    /// `W2`, for receiver 2.
    Private2,
    /// `W0`, for both.
    Common,
}

impl Msg {
    pub(crate) fn index(self) -> usize {
        match self {
            Msg::Private1 => 0,
            Msg::Private2 => 1,
            Msg::Common => 2,
        }
    }
}

/// What one receiver has recovered of one message.
#[derive(Debug, Clone)]
pub(crate) struct Knowledge {
    pub known: BitVector,
    pub values: BitVector,
}

impl Knowledge {
    fn new(len: usize) -> Self {
        Knowledge {
            known: BitVector::zeros(len),
            values: BitVector::zeros(len),
        }
    }

    pub fn learn(&mut self, idx: u32, bit: bool) {
        self.known.set(idx as usize, true);
        self.values.set(idx as usize, bit);
    }

    pub fn knows_all(&self, indices: &[u32]) -> bool {
        indices.iter().all(|&i| self.known.get(i as usize))
    }
}

/// An equation logged for later use: `row · target + Σ deferred = rhs`.
#[derive(Debug, Clone)]
pub(crate) struct Logged {
    pub row: BitVector,
    pub rhs: bool,
    /// `(code id, block, row)` of components the receiver cannot strip yet.
    pub deferred: Vec<(usize, usize, BitVector)>,
}

/// A block whose equations span it but still carry unknown interference.
#[derive(Debug, Clone)]
pub(crate) struct PendingBlock {
    pub rx: Rx,
    pub code: usize,
    pub block: usize,
    pub log: Vec<Logged>,
}

/// State of one protocol execution: messages, channel, and what each
/// receiver has decoded so far.
pub struct Trial {
    pub(crate) params: ChannelParams,
    pub(crate) options: TrialOptions,
    pub(crate) transcript: ChannelTranscript,
    channel_rng: ChaCha8Rng,
    pub(crate) code_rng: ChaCha8Rng,
    pub(crate) messages: [BitVector; 3],
    pub(crate) knowledge: [[Knowledge; 3]; 2],
    pub(crate) codes: Vec<Code>,
    pub(crate) pending: Vec<PendingBlock>,
    pub(crate) failures: Vec<String>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl Trial {
    /// Draws uniformly random messages of the given sizes.
    pub fn new(
        params: &ChannelParams,
        sizes: [u64; 3],
        options: TrialOptions,
        seed: u64,
    ) -> Result<Self, SchemeError> {
        let mut message_rng = stream(seed, MESSAGE_STREAM);
        let messages = sizes.map(|k| BitVector::random(k as usize, &mut message_rng));
        Trial::with_messages(params, messages, options, seed)
    }

    /// Uses the given `[W1, W2, W0]` instead of random messages.
    pub fn with_messages(
        params: &ChannelParams,
        messages: [BitVector; 3],
        options: TrialOptions,
        seed: u64,
    ) -> Result<Self, SchemeError> {
        options.validate()?;
        let sizes = messages.each_ref().map(|m| m.len());
        let fresh = || sizes.map(Knowledge::new);
        Ok(Trial {
            params: *params,
            options,
            transcript: ChannelTranscript::new(params)?,
            channel_rng: stream(seed, CHANNEL_STREAM),
            code_rng: stream(seed, CODE_STREAM),
            messages,
            knowledge: [fresh(), fresh()],
            codes: Vec::new(),
            pending: Vec::new(),
            failures: Vec::new(),
        })
    }

    pub fn mode(&self) -> Mode {
        self.options.mode
    }

    pub fn message(&self, msg: Msg) -> &BitVector {
        &self.messages[msg.index()]
    }

    /// Slots used so far.
    pub fn slots(&self) -> u64 {
        self.transcript.len() as u64
    }

    pub fn failures(&self) -> &[String] {
        &self.failures
    }

    pub(crate) fn knowledge(&self, rx: Rx, msg: Msg) -> &Knowledge {
        &self.knowledge[rx.index()][msg.index()]
    }

    pub(crate) fn knowledge_mut(&mut self, rx: Rx, msg: Msg) -> &mut Knowledge {
        &mut self.knowledge[rx.index()][msg.index()]
    }

    /// Sends one bit and returns what each receiver observed. The slot's
    /// link states reach the transmitter only through the transcript's
    /// delayed view.
    pub(crate) fn send(&mut self, x: bool) -> [Received; 2] {
        let s = self.transcript.advance(&mut self.channel_rng);
        let (y1, y2) = transmit(x, s);
        [y1, y2]
    }

    /// Link states of the last completed slot.
    pub(crate) fn feedback(&self) -> Option<StatePair> {
        self.transcript.transmitter_view().previous()
    }

    /// Whether `rx` holds `msg` completely and correctly.
    pub fn decoded(&self, rx: Rx, msg: Msg) -> bool {
        let k = self.knowledge(rx, msg);
        k.known.all() && k.values == *self.message(msg)
    }

    /// Bits of `msg` that `rx` holds with the wrong value.
    pub fn wrong_bits(&self, rx: Rx, msg: Msg) -> u64 {
        let k = self.knowledge(rx, msg);
        let mut diff = k.values.clone();
        diff.xor_assign(self.message(msg));
        diff.and(&k.known).count_ones() as u64
    }

    /// Values `rx` holds for the given bits; all must be known.
    pub(crate) fn gather_known(&self, rx: Rx, msg: Msg, indices: &[u32]) -> BitVector {
        self.knowledge(rx, msg).values.gather(indices)
    }

    pub(crate) fn record_failure(&mut self, what: String) {
        self.failures.push(what);
    }

    /// Solves every pending block whose deferred interference is now known.
    pub fn resolve_pending(&mut self) {
        let pending = std::mem::take(&mut self.pending);
        for block in pending {
            let ready = block.log.iter().all(|eq| {
                eq.deferred.iter().all(|(code, b, _)| {
                    let c = &self.codes[*code];
                    self.knowledge(block.rx, c.msg).knows_all(c.block(*b))
                })
            });
            if !ready {
                self.pending.push(block);
                continue;
            }
            let code = &self.codes[block.code];
            let (msg, indices) = (code.msg, code.block(block.block).to_vec());
            let mut elim = Eliminator::new(indices.len());
            let known = self.knowledge(block.rx, msg);
            for (col, &idx) in indices.iter().enumerate() {
                if known.known.get(idx as usize) {
                    let mut unit = BitVector::zeros(indices.len());
                    unit.set(col, true);
                    elim.insert(&unit, known.values.get(idx as usize));
                }
            }
            for eq in &block.log {
                let mut rhs = eq.rhs;
                for (code, b, row) in &eq.deferred {
                    let c = &self.codes[*code];
                    rhs ^= row.dot(&self.gather_known(block.rx, c.msg, c.block(*b)));
                }
                elim.insert(&eq.row, rhs);
            }
            match elim.solution() {
                Ok(values) => {
                    let k = self.knowledge_mut(block.rx, msg);
                    for (col, &idx) in indices.iter().enumerate() {
                        k.learn(idx, values.get(col));
                    }
                }
                Err(e) => self.record_failure(format!(
                    "deferred block {} of a {:?} code at {:?}: {e}",
                    block.block, msg, block.rx
                )),
            }
        }
    }
}
