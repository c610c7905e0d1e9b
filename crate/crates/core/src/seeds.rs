//! Named, reproducible RNG sub-streams derived from one master seed.

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for stream `name` at position `path` under `master`.
pub fn derive_seed(master: u64, name: &str, path: &[u64]) -> u64 {
    // FNV-1a over the stream name
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut s = splitmix(master ^ splitmix(h));
    for &p in path {
        s = splitmix(s ^ splitmix(p.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    s
}
