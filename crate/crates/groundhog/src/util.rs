//! Small shared helpers.

/// Derives a decorrelated sub-seed from a base seed and a stream index
/// using the SplitMix64 finalizer. Used wherever one user-facing seed has
/// to fan out into independent per-iteration or per-stage RNG streams.
pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
