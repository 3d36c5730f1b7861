use serde::{Deserialize, Serialize};

use crate::channel::Rx;
use crate::gf2::BitVector;

use super::trial::{Msg, Trial};

/// Where the private bits of the retransmission phases ended up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueState {
    /// Receiver-1 bits heard by receiver 1.
    pub delivered_rx1: BitVector,
    /// Receiver-2 bits heard by receiver 2.
    pub delivered_rx2: BitVector,
    /// Receiver-1 bits heard only by receiver 2, in transmission order.
    pub missent_1to2: Vec<u32>,
    /// Receiver-2 bits heard only by receiver 1, in transmission order.
    pub missent_2to1: Vec<u32>,
}

impl QueueState {
    pub fn new(k1: u64, k2: u64) -> Self {
        QueueState {
            delivered_rx1: BitVector::zeros(k1 as usize),
            delivered_rx2: BitVector::zeros(k2 as usize),
            missent_1to2: Vec::new(),
            missent_2to1: Vec::new(),
        }
    }
}

impl Trial {
    /// Sends every receiver-1 bit until some receiver hears it. Returns the
    /// number of slots used.
    pub fn run_phase1(&mut self, queues: &mut QueueState) -> u64 {
        let (delivered, missent) = (&mut queues.delivered_rx1, &mut queues.missent_1to2);
        self.run_arq(Msg::Private1, Rx::One, delivered, missent)
    }

    /// The same retransmission discipline for the receiver-2 bits.
    pub fn run_phase2_private(&mut self, queues: &mut QueueState) -> u64 {
        let (delivered, missent) = (&mut queues.delivered_rx2, &mut queues.missent_2to1);
        self.run_arq(Msg::Private2, Rx::Two, delivered, missent)
    }

    fn run_arq(&mut self, msg: Msg, intended: Rx, delivered: &mut BitVector, missent: &mut Vec<u32>) -> u64 {
        let k = self.message(msg).len();
        let nominal = k as f64 / (1.0 - self.params.delta12);
        let budget = self.mode().budget(nominal);
        let start = self.slots();
        let mut next = 0usize;
        loop {
            let used = self.slots() - start;
            match budget {
                Some(b) if used >= b => break,
                None if next == k => break,
                _ => {}
            }
            if next == k {
                // Fixed mode: the phase keeps its slots even when done early.
                self.send(false);
                continue;
            }
            let bit = self.message(msg).get(next);
            let observed = self.send(bit);
            for rx in Rx::BOTH {
                if let Some(y) = observed[rx.index()].bit() {
                    self.knowledge_mut(rx, msg).learn(next as u32, y);
                }
            }
            let s = self.feedback().expect("a slot was just sent");
            if s.hears(intended) {
                delivered.set(next, true);
                next += 1;
            } else if s.hears(intended.other()) {
                missent.push(next as u32);
                next += 1;
            }
        }
        if next < k {
            self.record_failure(format!("{:?} retransmission: {} of {k} bits never sent", msg, k - next));
        }
        self.slots() - start
    }
}
