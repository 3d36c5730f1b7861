use crate::channel::Rx;
use crate::region::RateTriple;

use super::arq::QueueState;
use super::segment::{CodeSpec, Role};
use super::trial::{Msg, Trial};
use super::{ceil_count, Case, DecodeStatus, Lengths, SchemeError, SchemePlan, TrialOptions, TrialReport, Variant};

/// Triangular regime: retransmit receiver-1 bits, then XOR the mis-sent
/// ones with common bits for receiver 2, then multicast the common message.
pub fn run_case1(plan: &SchemePlan, options: TrialOptions, seed: u64) -> Result<TrialReport, SchemeError> {
    if plan.case != Case::CaseI {
        return Err(SchemeError::Wiring("run_case1 needs a Case I plan".into()));
    }
    let p = &plan.params;
    let (a1, a2) = (1.0 - p.delta1, 1.0 - p.delta2);
    let mut trial = Trial::new(p, [plan.k1, 0, plan.k0], options, seed)?;
    let mut queues = QueueState::new(plan.k1, 0);
    let mut lengths = Lengths {
        n1: Some(trial.run_phase1(&mut queues)),
        ..Lengths::default()
    };

    let k12 = queues.missent_1to2.len();
    let k0_2a = plan.k0.min(ceil_count(a2 / a1 * k12 as f64));
    let private = CodeSpec::new(Msg::Private1, queues.missent_1to2.clone(), Role::Needs, Role::Knows);
    let common_part = CodeSpec::new(Msg::Common, (0..k0_2a as u32).collect(), Role::Defers, Role::Needs);
    lengths.n2a = Some(trial.run_xor_segment("segment 2a", private, common_part)?.slots);

    let common = CodeSpec::new(Msg::Common, (0..plan.k0 as u32).collect(), Role::Needs, Role::Needs);
    lengths.n2b = Some(trial.run_common_segment("segment 2b", common)?.slots);
    trial.resolve_pending();

    Ok(report(plan, Variant::Capacity, &trial, seed, lengths, &queues, k0_2a))
}

/// Both bounds active: retransmit both private messages, then clear the
/// mis-sent bits with XORed codes, piggybacking common bits for receiver 2,
/// then multicast the common message.
pub fn run_case2(plan: &SchemePlan, options: TrialOptions, seed: u64) -> Result<TrialReport, SchemeError> {
    if plan.case != Case::CaseII {
        return Err(SchemeError::Wiring("run_case2 needs a Case II plan".into()));
    }
    run_three_phase(plan, Variant::Capacity, options, seed)
}

/// Runs `variant` on the allocation of `plan`.
pub fn run_variant(variant: Variant, plan: &SchemePlan, options: TrialOptions, seed: u64) -> Result<TrialReport, SchemeError> {
    match (variant, plan.case) {
        (Variant::Capacity, Case::CaseI) => run_case1(plan, options, seed),
        (Variant::Capacity, Case::CaseII) => run_case2(plan, options, seed),
        (Variant::Baseline | Variant::Simple, _) => run_three_phase(plan, variant, options, seed),
    }
}

/// Phases 1 and 2 retransmit the private bits; segment 3a XORs the two
/// mis-sent pools, 3b sends the leftover receiver-1 pool (with common bits
/// for receiver 2 under the capacity variant) and 3c multicasts `W0`.
///
/// Without piggybacking this is exactly the private-message scheme followed
/// by one common segment, which is both the baseline and the simple variant.
fn run_three_phase(plan: &SchemePlan, variant: Variant, options: TrialOptions, seed: u64) -> Result<TrialReport, SchemeError> {
    let p = &plan.params;
    let (a1, a2) = (1.0 - p.delta1, 1.0 - p.delta2);
    let mut trial = Trial::new(p, [plan.k1, plan.k2, plan.k0], options, seed)?;
    let mut queues = QueueState::new(plan.k1, plan.k2);
    let mut lengths = Lengths {
        n1: Some(trial.run_phase1(&mut queues)),
        n2: Some(trial.run_phase2_private(&mut queues)),
        ..Lengths::default()
    };

    let pool1 = &queues.missent_1to2;
    let k21 = queues.missent_2to1.len();
    let m = pool1.len().min(ceil_count(a1 / a2 * k21 as f64) as usize);
    let for_rx2 = CodeSpec::new(Msg::Private2, queues.missent_2to1.clone(), Role::Knows, Role::Needs);
    let for_rx1 = CodeSpec::new(Msg::Private1, pool1[..m].to_vec(), Role::Needs, Role::Knows);
    lengths.n3a = Some(trial.run_xor_segment("segment 3a", for_rx2, for_rx1)?.slots);

    let k0_3b = match variant {
        Variant::Capacity => plan.k0.min(ceil_count(a2 / a1 * (pool1.len() - m) as f64)),
        Variant::Baseline | Variant::Simple => 0,
    };
    let rest = CodeSpec::new(Msg::Private1, pool1[m..].to_vec(), Role::Needs, Role::Knows);
    let common_part = CodeSpec::new(Msg::Common, (0..k0_3b as u32).collect(), Role::Defers, Role::Needs);
    lengths.n3b = Some(trial.run_xor_segment("segment 3b", rest, common_part)?.slots);

    let common = CodeSpec::new(Msg::Common, (0..plan.k0 as u32).collect(), Role::Needs, Role::Needs);
    lengths.n3c = Some(trial.run_common_segment("segment 3c", common)?.slots);
    trial.resolve_pending();

    Ok(report(plan, variant, &trial, seed, lengths, &queues, k0_3b))
}

fn report(
    plan: &SchemePlan,
    variant: Variant,
    trial: &Trial,
    seed: u64,
    realized_lengths: Lengths<u64>,
    queues: &QueueState,
    k0_piggyback: u64,
) -> TrialReport {
    let total_n = trial.slots();
    let n = total_n.max(1) as f64;
    let k2 = trial.message(Msg::Private2).len() as u64;
    TrialReport {
        seed,
        variant,
        case: plan.case,
        mode: trial.mode(),
        k1: plan.k1,
        k2,
        k0: plan.k0,
        k12_missent: queues.missent_1to2.len() as u64,
        k21_missent: queues.missent_2to1.len() as u64,
        k0_piggyback,
        realized_lengths,
        total_n,
        decoded_ok_rx1: DecodeStatus {
            common: trial.decoded(Rx::One, Msg::Common),
            private: trial.decoded(Rx::One, Msg::Private1),
        },
        decoded_ok_rx2: DecodeStatus {
            common: trial.decoded(Rx::Two, Msg::Common),
            private: trial.decoded(Rx::Two, Msg::Private2),
        },
        achieved: RateTriple::new(plan.k1 as f64 / n, k2 as f64 / n, plan.k0 as f64 / n),
        mis_decoded_bits: Rx::BOTH
            .into_iter()
            .flat_map(|rx| [Msg::Private1, Msg::Private2, Msg::Common].map(|m| trial.wrong_bits(rx, m)))
            .sum(),
        failures: trial.failures().to_vec(),
    }
}
