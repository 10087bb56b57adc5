use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic random stream keyed by `(seed, stream_id)`.
///
/// Backed by a counter-based ChaCha generator: the seed selects the key and
/// `stream_id` selects an independent stream, so draws for a given rollout do
/// not depend on which worker collects it or in what order.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A child stream for a sub-purpose, derived from this stream's key.
    pub fn derive(&self, tag: StreamTag, a: u64, b: u64) -> Self {
        Self::new(self.seed, stream_id(tag, a, b) ^ self.stream_id.rotate_left(17))
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Named purposes for random streams, so experiment axes vary independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum StreamTag {
    PolicyInit = 1,
    Env = 2,
    Latent = 3,
    Manager = 4,
    Action = 5,
    Evaluation = 6,
    Visitation = 7,
}

/// Pack a tag and two counters (e.g. iteration, rollout index) into a stream id.
pub fn stream_id(tag: StreamTag, a: u64, b: u64) -> u64 {
    ((tag as u64) << 56) ^ ((a & 0xff_ffff) << 32) ^ (b & 0xffff_ffff)
}
