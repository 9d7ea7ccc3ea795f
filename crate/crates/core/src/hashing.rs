//! Deterministic hashing and counter-mode random numbers.
//!
//! Everything random in the crate (embedding initialization, LSH
//! hyperplanes, network initialization, shuffling, bandit sampling) is
//! derived from the two primitives here so that results are reproducible
//! bit-for-bit across runs, thread counts and languages.

use rand_core::{impls, RngCore};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 2^-53, the spacing of the 53-bit uniform grid.
const INV_2_53: f64 = 1.0 / (1u64 << 53) as f64;

/// Stream tags used to derive independent counter streams from one seed.
pub mod stream {
    pub const HYPERPLANES: u64 = 0x7b1f_3a5c_9d42_e801;
    pub const MLP_INIT: u64 = 0x2c8e_61f0_b5a9_4d13;
    pub const SHUFFLE: u64 = 0xe4d2_0b97_6a3f_c125;
    pub const BANDIT: u64 = 0x51a7_c3e9_08fd_6b27;
    pub const SYNTH: u64 = 0x936b_d15e_4f02_a739;
}

/// 64-bit FNV-1a over raw bytes.
#[inline]
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// Murmur3-style avalanche finalizer.
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x ^= x >> 33;
    x = x.wrapping_mul(0xff51_afd7_ed55_8ccd);
    x ^= x >> 33;
    x = x.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    x ^= x >> 33;
    x
}

/// Maps the top 53 bits of `x` onto `[0, 1)`.
#[inline]
pub fn unit_interval(x: u64) -> f64 {
    (x >> 11) as f64 * INV_2_53
}

/// Maps the top 53 bits of `x` onto the open interval `(0, 1)`.
#[inline]
pub fn open_unit_interval(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * INV_2_53
}

/// Initial embedding value for one coordinate of one node.
///
/// `h0 = fnv1a64(label)`, `m = mix64(h0 ^ mix64(seed ^ dim_index))`,
/// result `2 * (m >> 11) * 2^-53 - 1`.
#[inline]
pub fn hash_init_value(label: &str, dim_index: u64, seed: u64) -> f64 {
    hash_init_from_label_hash(fnv1a64(label.as_bytes()), dim_index, seed)
}

/// Same as [`hash_init_value`] with the label hash precomputed.
#[inline]
pub fn hash_init_from_label_hash(label_hash: u64, dim_index: u64, seed: u64) -> f64 {
    let m = mix64(label_hash ^ mix64(seed ^ dim_index));
    2.0 * unit_interval(m) - 1.0
}

/// Key of a counter stream: `mix64(seed ^ stream_tag)`.
#[inline]
pub fn stream_key(seed: u64, stream_tag: u64) -> u64 {
    mix64(seed ^ stream_tag)
}

/// Random word number `counter` of the stream identified by `key`.
#[inline]
pub fn counter_u64(key: u64, counter: u64) -> u64 {
    mix64(key ^ mix64(counter))
}

/// Standard normal sample at position `index` of a stream, by Box–Muller
/// over the two words `2*index` and `2*index + 1`.
#[inline]
pub fn counter_gaussian(key: u64, index: u64) -> f64 {
    let u1 = open_unit_interval(counter_u64(key, index.wrapping_mul(2)));
    let u2 = open_unit_interval(counter_u64(key, index.wrapping_mul(2).wrapping_add(1)));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Sequential generator over a counter stream.
///
/// The full state is `(key, counter)`, so a generator can be checkpointed
/// and resumed exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream_tag: u64) -> Self {
        Self {
            key: stream_key(seed, stream_tag),
            counter: 0,
        }
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn next_word(&mut self) -> u64 {
        let x = counter_u64(self.key, self.counter);
        self.counter = self.counter.wrapping_add(1);
        x
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        unit_interval(self.next_word())
    }

    /// Uniform in `[-1, 1)`.
    pub fn next_symmetric(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }

    /// Uniform integer in `0..n` (`n > 0`), by multiply-shift.
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((u128::from(self.next_word()) * u128::from(n)) >> 64) as u64
    }
}

impl RngCore for CounterRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_word() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next_word()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        impls::fill_bytes_via_next(self, dst)
    }
}
