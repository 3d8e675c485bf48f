use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for one chunk of replications. The stream depends only on
/// `(seed, stage, point, chunk)`, so any scheduling of chunks over threads
/// reproduces the same draws.
pub fn chunk_rng(seed: u64, stage: u64, point: u64, chunk: u64) -> ChaCha8Rng {
    let mut state = seed;
    for word in [stage, point, chunk] {
        state = splitmix64(&mut state) ^ word;
    }
    let mut key = [0u8; 32];
    for bytes in key.chunks_exact_mut(8) {
        bytes.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
