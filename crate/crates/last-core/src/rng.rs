//! Counter-based pseudo-random generation.
//!
//! Tensor entries must be random-access: the greedy solver touches a sparse
//! subset of an `N^p` tensor with `N` in the thousands, so storing all
//! entries is not an option. Instead every deviate is a pure function of a
//! 64-bit master seed, a stream tag, and the coordinates that identify the
//! value (tensor indices, trial numbers, sample counters). Re-querying any
//! coordinate re-derives the identical value, on any thread, in any order.
//!
//! # The mixing function
//!
//! [`mix64`] is the splitmix64 finalizer (Steele–Lea–Flood constants):
//!
//! ```text
//! z  = x + 0x9E3779B97F4A7C15
//! z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
//! z ^= z >> 27;  z *= 0x94D049BB133111EB
//! z ^= z >> 31
//! ```
//!
//! (All arithmetic mod 2^64.) It is a bijection on u64 with full avalanche,
//! and `mix64(0) == 0xE220A8397B1DCDAF` matches the published splitmix64
//! test vector.
//!
//! # Absorption
//!
//! A seed, a stream tag, and a list of 64-bit parts are folded into one
//! state word by chaining: `h = mix64(seed)`, `h = mix64(h ^ tag)`, then
//! `h = mix64(h ^ part)` for each part. Distinct tags give unrelated
//! streams for the same seed; the tags are ASCII-derived constants listed
//! below.
//!
//! # Normal deviates
//!
//! Two output words `w1 = mix64(h)`, `w2 = mix64(h ^ 0x9E3779B97F4A7C15)`
//! are mapped through the Box–Muller transform:
//!
//! ```text
//! u1 = ((w1 >> 11) + 1) · 2⁻⁵³   ∈ (0, 1]
//! u2 = (w2 >> 11) · 2⁻⁵³        ∈ [0, 1)
//! z  = sqrt(-2 ln u1) · cos(2π u2)
//! ```
//!
//! `u1` is bounded away from zero, so `z` is always finite with
//! `|z| ≤ sqrt(106 ln 2) ≈ 8.5716`. Values are bit-exact for a fixed
//! binary; across platforms only ULP-level drift from `ln`/`cos` is
//! possible, which is why all numeric tests use relative tolerances of at
//! least 1e-12.
//!
//! This generator is for simulation only. It is not cryptographically
//! secure and must never be used where unpredictability matters.

// ===== Stream tags ==========================================================

/// Tensor entry stream: parts are the 1-based indices `i_1..i_p`.
pub const TAG_ENTRY: u64 = u64::from_le_bytes(*b"LSTENTRY");
/// Experiment trial seeds: parts are (experiment id, grid index, trial index).
pub const TAG_TRIAL: u64 = u64::from_le_bytes(*b"LSTTRIAL");
/// Fresh-tensor seeds for interpolated ensembles: parts are (copy index,).
pub const TAG_FRESH: u64 = u64::from_le_bytes(*b"LSTFRESH");
/// Monte-Carlo sample streams in tail validation: parts are sample counters.
pub const TAG_MC: u64 = u64::from_le_bytes(*b"LSTMCSMP");
/// Random initial solutions for local search: parts are (axis, draw counter).
pub const TAG_LSEARCH: u64 = u64::from_le_bytes(*b"LSTLSRCH");
/// Random η draws for covariance models: parts are (i, j, q).
pub const TAG_ETA: u64 = u64::from_le_bytes(*b"LSTETA__");

/// Golden-ratio increment; also the lane separator for the second output word.
const GOLDEN: u64 = 0x9E3779B97F4A7C15;

// ===== Core mixing ==========================================================

/// The splitmix64 finalizer: a full-avalanche bijection on `u64`.
#[inline(always)]
#[must_use]
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `(seed, tag, parts)` into one state word by chained mixing.
#[inline]
#[must_use]
pub fn absorb(seed: u64, tag: u64, parts: &[u64]) -> u64 {
    let mut h = mix64(seed);
    h = mix64(h ^ tag);
    for &p in parts {
        h = mix64(h ^ p);
    }
    h
}

/// Expands a state word into two decorrelated output words.
#[inline]
#[must_use]
pub fn output_words(state: u64) -> (u64, u64) {
    (mix64(state), mix64(state ^ GOLDEN))
}

// ===== Deviates =============================================================

/// Maps a word to a uniform in `(0, 1]` (53-bit resolution, never zero).
#[inline]
#[must_use]
pub fn uniform_open_closed(w: u64) -> f64 {
    ((w >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Maps a word to a uniform in `[0, 1)` (53-bit resolution).
#[inline]
#[must_use]
pub fn uniform_closed_open(w: u64) -> f64 {
    (w >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Box–Muller transform of two output words into one standard normal.
///
/// Always finite; `|z| ≤ sqrt(106 ln 2) ≈ 8.5716`.
#[inline]
#[must_use]
pub fn normal_from_words(w1: u64, w2: u64) -> f64 {
    let u1 = uniform_open_closed(w1);
    let u2 = uniform_closed_open(w2);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Standard normal deviate addressed by `(seed, tag, parts)`.
#[inline]
#[must_use]
pub fn normal_at(seed: u64, tag: u64, parts: &[u64]) -> f64 {
    let (w1, w2) = output_words(absorb(seed, tag, parts));
    normal_from_words(w1, w2)
}

/// Uniform deviate in `[0, 1)` addressed by `(seed, tag, parts)`.
#[inline]
#[must_use]
pub fn uniform_at(seed: u64, tag: u64, parts: &[u64]) -> f64 {
    let (w1, _) = output_words(absorb(seed, tag, parts));
    uniform_closed_open(w1)
}

/// Derives a child seed, e.g. per-trial seeds from a master seed.
///
/// Used with [`TAG_TRIAL`] as
/// `derive_seed(master, TAG_TRIAL, &[experiment_id, grid_index, trial_index])`
/// so that equal trial indices in different experiments or grid points never
/// collide.
#[inline]
#[must_use]
pub fn derive_seed(seed: u64, tag: u64, parts: &[u64]) -> u64 {
    absorb(seed, tag, parts)
}

// ===== Counter stream =======================================================

/// A sequential view over one addressed stream: repeated draws with an
/// incrementing counter appended to the address parts.
///
/// Used where an algorithm needs "the next value" semantics (rejection
/// sampling, Monte-Carlo loops) while staying fully counter-based: the k-th
/// draw is a pure function of `(seed, tag, prefix, k)`.
#[derive(Debug, Clone)]
pub struct CounterStream {
    seed: u64,
    tag: u64,
    prefix_state: u64,
    counter: u64,
}

impl CounterStream {
    /// Opens the stream addressed by `(seed, tag, prefix)` at counter zero.
    #[must_use]
    pub fn new(seed: u64, tag: u64, prefix: &[u64]) -> Self {
        CounterStream {
            seed,
            tag,
            prefix_state: absorb(seed, tag, prefix),
            counter: 0,
        }
    }

    /// Next pair of output words.
    #[inline]
    pub fn next_words(&mut self) -> (u64, u64) {
        let state = mix64(self.prefix_state ^ self.counter);
        self.counter += 1;
        output_words(state)
    }

    /// Next uniform in `[0, 1)`.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        let (w1, _) = self.next_words();
        uniform_closed_open(w1)
    }

    /// Next standard normal.
    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        let (w1, w2) = self.next_words();
        normal_from_words(w1, w2)
    }

    /// Unbiased uniform integer in `[0, bound)` by rejection sampling.
    ///
    /// # Panics
    /// Panics if `bound` is zero.
    #[inline]
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "next_below requires a positive bound");
        // Rejection zone keeps the modulo unbiased.
        let zone = u64::MAX - u64::MAX.wrapping_rem(bound);
        loop {
            let (w, _) = self.next_words();
            if w < zone || zone == 0 {
                return w % bound;
            }
        }
    }

    /// Uniform k-subset of `{1, …, n}`, returned sorted ascending.
    ///
    /// Partial Fisher–Yates over an index table; `O(n)` memory, `O(k)` draws.
    ///
    /// # Panics
    /// Panics if `k > n`.
    pub fn next_subset(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "subset size {k} exceeds ground set size {n}");
        let mut pool: Vec<usize> = (1..=n).collect();
        for i in 0..k {
            let j = i + self.next_below((n - i) as u64) as usize;
            pool.swap(i, j);
        }
        let mut subset = pool[..k].to_vec();
        subset.sort_unstable();
        subset
    }

    /// The seed this stream was opened with.
    #[must_use]
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The tag this stream was opened with.
    #[must_use]
    pub fn tag(&self) -> u64 {
        self.tag
    }
}
