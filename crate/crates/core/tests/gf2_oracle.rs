use ebc_core::gf2::{rank, solve, BitMatrix, BitVector, Gf2Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn to_bits(x: u32, k: usize) -> BitVector {
    BitVector::from_bools(&(0..k).map(|i| x >> i & 1 == 1).collect::<Vec<_>>())
}

/// Every `x` in `{0,1}^k` with `a x = b`, by enumeration.
fn brute_force_solutions(a: &BitMatrix, b: &BitVector) -> Vec<BitVector> {
    let k = a.cols();
    (0..1u32 << k)
        .map(|x| to_bits(x, k))
        .filter(|x| (0..a.rows()).all(|r| a.row(r).dot(x) == b.get(r)))
        .collect()
}

/// Rank as `log2` of the number of distinct row combinations.
fn brute_force_rank(a: &BitMatrix) -> usize {
    let mut span: Vec<BitVector> = (0..1u32 << a.rows())
        .map(|mask| {
            let mut acc = BitVector::zeros(a.cols());
            for r in 0..a.rows() {
                if mask >> r & 1 == 1 {
                    acc.xor_assign(&a.row(r));
                }
            }
            acc
        })
        .collect();
    span.sort_by_key(|v| v.to_string());
    span.dedup();
    span.len().trailing_zeros() as usize
}

#[test]
fn solve_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut outcomes = [0usize; 3];
    for _ in 0..10_000 {
        let k = rng.gen_range(1..=12);
        let m = rng.gen_range(1..=k + 3);
        let rows: Vec<BitVector> = (0..m).map(|_| BitVector::random(k, &mut rng)).collect();
        let a = BitMatrix::from_rows(k, &rows).unwrap();
        let b = if rng.gen() {
            a.mul_vec(&BitVector::random(k, &mut rng)).unwrap()
        } else {
            BitVector::random(m, &mut rng)
        };
        let solutions = brute_force_solutions(&a, &b);
        match (solutions.len(), solve(&a, &b)) {
            (0, Err(Gf2Error::Inconsistent)) => outcomes[0] += 1,
            (1, Ok(x)) => {
                assert_eq!(x, solutions[0]);
                outcomes[1] += 1;
            }
            (n, Err(Gf2Error::Underdetermined { rank, cols })) if n > 1 => {
                assert_eq!(cols, k);
                assert_eq!(n, 1 << (k - rank));
                outcomes[2] += 1;
            }
            (n, other) => panic!("{n} solutions but solve returned {other:?}"),
        }
    }
    assert!(outcomes.iter().all(|&c| c > 500), "{outcomes:?}");
}

#[test]
fn rank_matches_enumeration_on_all_small_matrices() {
    for n in [2usize, 3] {
        for bits in 0u32..1 << (n * n) {
            let mut a = BitMatrix::zeros(n, n);
            for i in 0..n * n {
                a.set(i / n, i % n, bits >> i & 1 == 1);
            }
            assert_eq!(rank(&a), brute_force_rank(&a), "{a:?}");
        }
    }
}
