//! Keyed random streams.
//!
//! Every stream is a ChaCha8 generator whose key is derived from
//! `(master seed, index)` and whose stream id encodes the role. Streams for
//! different roles or indices never overlap, so realizations and replicas can
//! be drawn in any order, on any number of threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamRole {
    Fields,
    Bonds,
    Mask,
    Gauss,
    Replica(u32),
}

impl StreamRole {
    fn id(self) -> u64 {
        match self {
            StreamRole::Fields => 1,
            StreamRole::Bonds => 2,
            StreamRole::Mask => 3,
            StreamRole::Gauss => 4,
            StreamRole::Replica(a) => 0x100 + u64::from(a),
        }
    }
}

const DOMAIN: &[u8; 16] = b"fkg-overlap/v1\0\0";

pub fn stream(master_seed: u64, index: u64, role: StreamRole) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&index.to_le_bytes());
    key[16..].copy_from_slice(DOMAIN);
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(role.id());
    rng
}
