//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! seeded from a master seed and a stream name, so changing one stage's
//! parameters never shifts another stage's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over the stream name; stable across platforms and releases.
fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn derive_seed(master: u64, name: &str) -> u64 {
    splitmix64(master ^ splitmix64(name_hash(name)))
}

pub fn stream(master: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, name))
}

/// Seed derived from the bit patterns of a data set, for initialisations that
/// must depend only on their input.
pub fn data_seed(values: &[f64]) -> u64 {
    values
        .iter()
        .fold(0x51_7cc1_b727_220a, |h, v| splitmix64(h ^ v.to_bits()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn named_streams_are_independent_and_stable() {
        let a: u64 = stream(7, "noise").random();
        let b: u64 = stream(7, "noise").random();
        let c: u64 = stream(7, "typist").random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(derive_seed(1, "x"), derive_seed(2, "x"));
    }
}
