//! Named random sub-streams derived from one root seed.
//!
//! Every consumer of randomness gets its own ChaCha stream so that, for
//! example, changing the exploration draws never shifts the replay sampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Env,
    Init,
    Exploration,
    Sampling,
    Layouts,
    Eval,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Env => 1,
            Stream::Init => 2,
            Stream::Exploration => 3,
            Stream::Sampling => 4,
            Stream::Layouts => 5,
            Stream::Eval => 6,
        }
    }
}

pub fn stream(seed: u64, which: Stream) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}
