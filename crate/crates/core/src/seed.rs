//! Seed derivation for independent per-iteration streams.

/// SplitMix64 finalizer applied to `base` offset by `stream`. Distinct
/// streams of one base give unrelated seeds.
pub fn mix_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_differ() {
        let seeds: std::collections::HashSet<u64> =
            (0..1000).flat_map(|b| (0..20).map(move |s| mix_seed(b, s))).collect();
        assert_eq!(seeds.len(), 20_000);
    }
}
