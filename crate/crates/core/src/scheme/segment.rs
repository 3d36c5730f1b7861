//! Rateless segments built from random linear codes over GF(2).
//!
//! A code covers a list of message bits split into blocks of at most
//! `block_size` bits. Each slot carries, for each scheduled block, the inner
//! product of a fresh uniformly random row with that block's bits; the
//! transmitted bit is the XOR of those products. Receivers regenerate the rows
//! from the shared code stream.
//!
//! The transmitter schedules blocks from the receivers' decoder states as of
//! the previous slot, which it can reconstruct from delayed state feedback.

use serde::{Deserialize, Serialize};

use crate::channel::Rx;
use crate::gf2::{BitVector, Eliminator, Insertion};

use super::trial::{Logged, Msg, PendingBlock, Trial};
use super::SchemeError;

/// A receiver's relation to a code within one segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Decodes the code in this segment.
    Needs,
    /// Already holds every bit and strips the code's contribution.
    Knows,
    /// Cannot strip the code yet; logs equations until it learns the bits.
    Defers,
}

/// Which bits a code covers and how each receiver treats it.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeSpec {
    pub msg: Msg,
    pub indices: Vec<u32>,
    /// Indexed by receiver.
    pub roles: [Role; 2],
}

impl CodeSpec {
    pub fn new(msg: Msg, indices: Vec<u32>, rx1: Role, rx2: Role) -> Self {
        CodeSpec {
            msg,
            indices,
            roles: [rx1, rx2],
        }
    }

    fn audience(&self) -> Option<Rx> {
        Rx::BOTH.into_iter().find(|rx| self.roles[rx.index()] == Role::Needs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentOutcome {
    pub slots: u64,
    /// Every `Needs` receiver reached full rank on every block.
    pub complete: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct Code {
    pub msg: Msg,
    indices: Vec<u32>,
    starts: Vec<usize>,
}

impl Code {
    fn new(msg: Msg, indices: Vec<u32>, block_size: usize) -> Self {
        let n = indices.len();
        let blocks = n.div_ceil(block_size);
        let starts = (0..=blocks).map(|j| j * n / blocks.max(1)).collect();
        Code { msg, indices, starts }
    }

    pub fn blocks(&self) -> usize {
        self.starts.len() - 1
    }

    pub fn block(&self, b: usize) -> &[u32] {
        &self.indices[self.starts[b]..self.starts[b + 1]]
    }
}

enum BlockState {
    Known(BitVector),
    Open { elim: Eliminator, log: Option<Vec<Logged>> },
    Pending,
    Deferred,
}

impl BlockState {
    fn is_open(&self) -> bool {
        matches!(self, BlockState::Open { .. })
    }

    fn is_known(&self) -> bool {
        matches!(self, BlockState::Known(_))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Schedule {
    /// Each code goes to its own audience; the first block it still needs.
    Pair,
    /// One code for both receivers.
    Common,
}

type States = Vec<Vec<BlockState>>;

impl Trial {
    /// Sends the XOR of two rateless codes, each decoded by one receiver.
    ///
    /// The audience of each code must know the other code's bits or defer
    /// them; deferred equations are resolved by [`Trial::resolve_pending`].
    pub fn run_xor_segment(&mut self, name: &str, a: CodeSpec, b: CodeSpec) -> Result<SegmentOutcome, SchemeError> {
        let active: Vec<&CodeSpec> = [&a, &b].into_iter().filter(|c| !c.indices.is_empty()).collect();
        for code in &active {
            let Some(aud) = code.audience() else {
                return Err(SchemeError::Wiring(format!("{name}: code without an audience")));
            };
            if code.roles[aud.other().index()] == Role::Needs {
                return Err(SchemeError::Wiring(format!("{name}: code with two audiences")));
            }
        }
        if let [x, y] = active.as_slice() {
            if x.audience() == y.audience() {
                return Err(SchemeError::Wiring(format!("{name}: both codes address the same receiver")));
            }
        }
        self.run_segment(name, vec![a, b], Schedule::Pair)
    }

    /// Sends one rateless code that both receivers need (minus what each
    /// already holds). When no block is needed by both, a block only
    /// receiver 1 needs is XORed with one only receiver 2 needs.
    pub fn run_common_segment(&mut self, name: &str, code: CodeSpec) -> Result<SegmentOutcome, SchemeError> {
        if code.roles.contains(&Role::Defers) {
            return Err(SchemeError::Wiring(format!("{name}: common code cannot be deferred")));
        }
        self.run_segment(name, vec![code], Schedule::Common)
    }

    fn run_segment(&mut self, name: &str, specs: Vec<CodeSpec>, schedule: Schedule) -> Result<SegmentOutcome, SchemeError> {
        let block_size = self.options.block_size;
        let mut ids = Vec::with_capacity(specs.len());
        let mut truth: Vec<Vec<BitVector>> = Vec::with_capacity(specs.len());
        for spec in &specs {
            let code = Code::new(spec.msg, spec.indices.clone(), block_size);
            truth.push((0..code.blocks()).map(|b| self.message(spec.msg).gather(code.block(b))).collect());
            ids.push(self.codes.len());
            self.codes.push(code);
        }

        let mut states: [States; 2] = [Vec::new(), Vec::new()];
        let mut open = [0usize; 2];
        let mut nominal: f64 = 0.0;
        for rx in Rx::BOTH {
            let logs = specs.iter().any(|s| s.roles[rx.index()] == Role::Defers);
            for (spec, &id) in specs.iter().zip(&ids) {
                let code = &self.codes[id];
                let knowledge = self.knowledge(rx, spec.msg);
                let role = spec.roles[rx.index()];
                let mut unknown = 0usize;
                let mut row = Vec::with_capacity(code.blocks());
                for b in 0..code.blocks() {
                    let bits = code.block(b);
                    if knowledge.knows_all(bits) {
                        row.push(BlockState::Known(knowledge.values.gather(bits)));
                        continue;
                    }
                    match role {
                        Role::Needs => {
                            let mut elim = Eliminator::new(bits.len());
                            for (col, &idx) in bits.iter().enumerate() {
                                if knowledge.known.get(idx as usize) {
                                    let mut unit = BitVector::zeros(bits.len());
                                    unit.set(col, true);
                                    elim.insert(&unit, knowledge.values.get(idx as usize));
                                }
                            }
                            unknown += bits.len() - elim.rank();
                            open[rx.index()] += 1;
                            row.push(BlockState::Open {
                                elim,
                                log: logs.then(Vec::new),
                            });
                        }
                        Role::Knows => {
                            return Err(SchemeError::Wiring(format!(
                                "{name}: {rx:?} is expected to know {:?} bits it lacks",
                                spec.msg
                            )))
                        }
                        Role::Defers => row.push(BlockState::Deferred),
                    }
                }
                if unknown > 0 {
                    let capacity = 1.0 - self.params.erasure(rx);
                    if capacity <= 0.0 {
                        return Err(SchemeError::Wiring(format!("{name}: {rx:?} never receives")));
                    }
                    nominal = nominal.max(unknown as f64 / capacity);
                }
                states[rx.index()].push(row);
            }
        }

        let budget = self.mode().budget(nominal);
        let start = self.slots();
        loop {
            match budget {
                Some(b) if self.slots() - start >= b => break,
                None if open == [0, 0] => break,
                _ => {}
            }
            let comps = match schedule {
                Schedule::Pair => schedule_pair(&specs, &states),
                Schedule::Common => schedule_common(&states),
            };
            if comps.is_empty() && budget.is_none() {
                return Err(SchemeError::Wiring(format!("{name}: no useful block to send")));
            }
            let rows: Vec<BitVector> = comps
                .iter()
                .map(|&(c, b)| BitVector::random(truth[c][b].len(), &mut self.code_rng))
                .collect();
            let x = comps
                .iter()
                .zip(&rows)
                .fold(false, |acc, (&(c, b), row)| acc ^ row.dot(&truth[c][b]));
            let observed = self.send(x);
            for rx in Rx::BOTH {
                if let Some(y) = observed[rx.index()].bit() {
                    let absorbed = self.absorb(rx, &mut states[rx.index()], &ids, &comps, &rows, y);
                    open[rx.index()] -= absorbed as usize;
                }
            }
        }

        for rx in Rx::BOTH {
            if open[rx.index()] > 0 {
                self.record_failure(format!("{name}: {rx:?} left {} blocks short of full rank", open[rx.index()]));
            }
        }
        Ok(SegmentOutcome {
            slots: self.slots() - start,
            complete: open == [0, 0],
        })
    }

    /// Feeds one received bit to `rx`. Returns true when it closed a block.
    fn absorb(
        &mut self,
        rx: Rx,
        states: &mut States,
        ids: &[usize],
        comps: &[(usize, usize)],
        rows: &[BitVector],
        y: bool,
    ) -> bool {
        let mut y = y;
        let mut target = None;
        let mut deferred = Vec::new();
        for (i, &(c, b)) in comps.iter().enumerate() {
            match &states[c][b] {
                BlockState::Known(values) => y ^= rows[i].dot(values),
                BlockState::Open { .. } if target.is_none() => target = Some(i),
                BlockState::Open { .. } | BlockState::Pending => return false,
                BlockState::Deferred => deferred.push(i),
            }
        }
        let Some(t) = target else { return false };
        let (c, b) = comps[t];
        let BlockState::Open { elim, log } = &mut states[c][b] else {
            unreachable!("target is open")
        };
        if !deferred.is_empty() && log.is_none() {
            return false;
        }
        let inserted = elim.insert(&rows[t], y);
        if let Some(log) = log {
            if inserted == Insertion::Innovative {
                log.push(Logged {
                    row: rows[t].clone(),
                    rhs: y,
                    deferred: deferred.iter().map(|&i| (ids[comps[i].0], comps[i].1, rows[i].clone())).collect(),
                });
            }
        }
        if !elim.is_full_rank() {
            return false;
        }
        let BlockState::Open { elim, log } = std::mem::replace(&mut states[c][b], BlockState::Pending) else {
            unreachable!("target is open")
        };
        match log {
            Some(log) => self.pending.push(PendingBlock {
                rx,
                code: ids[c],
                block: b,
                log,
            }),
            None => match elim.solution() {
                Ok(values) => {
                    let code = &self.codes[ids[c]];
                    let (msg, bits) = (code.msg, code.block(b).to_vec());
                    let knowledge = self.knowledge_mut(rx, msg);
                    for (col, &idx) in bits.iter().enumerate() {
                        knowledge.learn(idx, values.get(col));
                    }
                    states[c][b] = BlockState::Known(values);
                }
                Err(e) => self.record_failure(format!("{rx:?} failed to solve a full-rank block: {e}")),
            },
        }
        true
    }
}

fn schedule_pair(specs: &[CodeSpec], states: &[States; 2]) -> Vec<(usize, usize)> {
    let mut comps = Vec::with_capacity(2);
    for (c, spec) in specs.iter().enumerate() {
        let Some(aud) = spec.audience() else { continue };
        if let Some(b) = states[aud.index()][c].iter().position(BlockState::is_open) {
            comps.push((c, b));
        }
    }
    comps
}

fn schedule_common(states: &[States; 2]) -> Vec<(usize, usize)> {
    let (s1, s2) = (&states[0][0], &states[1][0]);
    if let Some(b) = (0..s1.len()).find(|&b| s1[b].is_open() && s2[b].is_open()) {
        return vec![(0, b)];
    }
    let only1 = (0..s1.len()).find(|&b| s1[b].is_open() && s2[b].is_known());
    let only2 = (0..s2.len()).find(|&b| s2[b].is_open() && s1[b].is_known());
    let comps: Vec<(usize, usize)> = [only1, only2].into_iter().flatten().map(|b| (0, b)).collect();
    if comps.is_empty() {
        // Not reachable with Needs/Knows roles; kept so a stuck block still gets sent.
        if let Some(b) = (0..s1.len()).find(|&b| s1[b].is_open() || s2[b].is_open()) {
            return vec![(0, b)];
        }
    }
    comps
}
