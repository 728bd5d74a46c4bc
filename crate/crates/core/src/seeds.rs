//! Deterministic seed derivation.
//!
//! Every random stream in the pipeline is a `ChaCha8Rng` seeded from a value
//! mixed out of (parent seed, role tag, indices). The mixer is a fixed-point
//! function of its inputs, so runs are reproducible across platforms and
//! independent of evaluation order.

/// SplitMix64 finalizer.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix an arbitrary number of seed components into one 64-bit seed.
pub fn mix(parts: &[u64]) -> u64 {
    let mut h = 0x51_7c_c1_b7_27_22_0a_95u64;
    for &p in parts {
        h = splitmix(h ^ p);
    }
    h
}
