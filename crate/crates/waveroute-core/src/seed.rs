//! Deterministic seed derivation for the policy RNG streams.
//!
//! Every run derives one base value from its simulation and policy seeds and
//! fans it out into independent named streams. Each stream only ever sees its
//! own draws, so a policy that never uses a stream leaves the others exactly
//! as a policy that consumes it heavily would.

/// One step of the splitmix64 generator, used here as a 64-bit mixer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over bytes, for hashing textual run labels into seeds.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xCBF2_9CE4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100_0000_01B3);
    }
    hash
}

/// The shared base for a run's streams.
pub fn stream_base(sim_seed: u64, policy_seed: u64) -> u64 {
    splitmix64(sim_seed ^ splitmix64(policy_seed))
}

/// Seed of one named stream under a base.
pub fn stream_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ stream)
}
