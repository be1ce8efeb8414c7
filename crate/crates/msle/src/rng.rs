//! Deterministic stream splitting for parallel sampling.
//!
//! Every unit of work (one curve, one path, one bootstrap resample) draws its
//! randomness from a generator derived purely from `(seed, stream)`, never
//! from thread identity or scheduling order. Results collected by stream
//! index are therefore byte-identical across thread counts.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for stream `stream` of the experiment seeded by `seed`.
pub fn task_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut state = seed;
    let from_seed = splitmix64(&mut state);
    let mut mixed = from_seed ^ stream.wrapping_mul(0xD605_BBB5_8C8A_BC03).rotate_left(17);
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut mixed).to_le_bytes());
    }
    ChaCha12Rng::from_seed(bytes)
}

/// Two-level variant for work that forks again internally (per-path, then
/// per-step or per-replicate).
pub fn task_rng2(seed: u64, stream: u64, substream: u64) -> ChaCha12Rng {
    let mut state = seed ^ substream.wrapping_mul(0xA24B_AED4_963E_E407);
    let folded = splitmix64(&mut state);
    task_rng(folded, stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let mut a1 = task_rng(7, 0);
        let mut a2 = task_rng(7, 0);
        let mut b = task_rng(7, 1);
        let mut c = task_rng(8, 0);
        let (x1, x2) = (a1.next_u64(), a2.next_u64());
        assert_eq!(x1, x2);
        assert_ne!(x1, b.next_u64());
        assert_ne!(x1, c.next_u64());
    }

    #[test]
    fn stream_zero_is_frozen() {
        // Pinned so that published experiment outputs stay reproducible
        // across refactors; changing the derivation is a breaking change.
        let mut r = task_rng(0, 0);
        assert_eq!(r.next_u64(), 10391409664494229956);
    }

    #[test]
    fn substreams_do_not_collide_with_streams() {
        let mut plain = task_rng(3, 5);
        let mut sub = task_rng2(3, 5, 1);
        assert_ne!(plain.next_u64(), sub.next_u64());
    }
}
