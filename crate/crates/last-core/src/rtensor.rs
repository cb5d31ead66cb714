//! Gaussian random tensors, subtensor sums, and overlaps.
//!
//! The central object is [`TensorInstance`]: an order-`p` tensor with
//! `N^p` i.i.d. standard normal entries, fully determined by a 64-bit seed.
//! Two backends expose the same values:
//!
//! - **dense** materializes all `N^p` entries (guarded by a memory cap),
//! - **implicit** stores nothing and derives each entry on demand from the
//!   counter-based generator in [`crate::rng`].
//!
//! Both backends evaluate the identical arithmetic, so for the same seed
//! they agree bit-for-bit on every entry.
//!
//! A [`TensorInstance`] may carry an *interpolation*: given a base tensor
//! `A⁰` (this instance's seed) and a fresh tensor `Aˡ` (a second seed),
//! entries are `Â = cos(τ)·A⁰ + sin(τ)·Aˡ` for a fixed `τ ∈ [0, π/2]`.
//! The endpoints are special-cased so that `τ = 0` returns base entries
//! exactly and `τ = π/2` returns fresh entries exactly (in IEEE f64,
//! `cos(π/2)` is a nonzero subnormal-scale value, which would otherwise
//! leak a 6e-17-weighted base contribution into the `τ = π/2` copy).
//!
//! Candidate solutions are [`MultiIndex`] values: `p` sorted `k`-subsets of
//! `{1, …, N}`, one per axis. [`overlap`] reports the per-axis intersection
//! sizes `a_q = |I_q ∩ I_q′|`, the quantity that controls the correlation
//! `∏ a_q / k^p` between two subtensor sums over the same tensor.
//!
//! Index convention: all public I/O is 1-based (`1 ≤ i ≤ N`). Dense storage
//! is row-major with axis 1 slowest, axis `p` fastest.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, TAG_ENTRY};

// ===== Budgets ==============================================================

/// Resource guards for tensor materialization and subtensor summation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorBudgets {
    /// Maximum number of entries a dense tensor may materialize.
    pub dense_cap_entries: u128,
    /// Maximum number of terms one `subtensor_sum` call may add.
    pub sum_budget_terms: u128,
}

impl Default for TensorBudgets {
    /// Defaults: 2^28 dense entries (2 GiB of f64), 2^30 summation terms.
    fn default() -> Self {
        TensorBudgets {
            dense_cap_entries: 1 << 28,
            sum_budget_terms: 1 << 30,
        }
    }
}

// ===== Backend and interpolation ============================================

/// Storage strategy for a tensor instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// All `N^p` entries materialized in memory.
    Dense,
    /// Entries derived on demand; nothing stored.
    Implicit,
}

/// Interpolation state: `Â = cos(τ)·A⁰ + sin(τ)·Aˡ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interpolation {
    /// Mixing angle in radians, in `[0, π/2]`.
    pub tau: f64,
    /// Seed of the fresh (independent) tensor `Aˡ`.
    pub fresh_seed: u64,
}

// ===== TensorInstance =======================================================

/// A seeded order-`p` Gaussian random tensor with `N^p` entries.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct TensorInstance {
    order_p: usize,
    dim_n: usize,
    backend: Backend,
    master_seed: u64,
    dense_entries: Option<Vec<f64>>,
    interpolation: Option<Interpolation>,
    budgets: TensorBudgets,
}

impl TensorInstance {
    /// Generates a tensor with default [`TensorBudgets`].
    ///
    /// `k_hint` is the subset size the caller intends to solve for; it is
    /// validated (`1 ≤ k_hint ≤ n`) so configuration errors surface at
    /// generation time rather than deep inside a solver.
    pub fn generate(n: usize, p: usize, k_hint: usize, seed: u64, backend: Backend) -> Result<Self> {
        Self::generate_with(n, p, k_hint, seed, backend, None, TensorBudgets::default())
    }

    /// Generates an interpolated tensor `Â = cos(τ)·A⁰ + sin(τ)·Aˡ` with
    /// default budgets. `seed` identifies `A⁰` and `fresh_seed` identifies
    /// `Aˡ`; requires `τ ∈ [0, π/2]`.
    pub fn generate_interpolated(
        n: usize,
        p: usize,
        k_hint: usize,
        seed: u64,
        backend: Backend,
        tau: f64,
        fresh_seed: u64,
    ) -> Result<Self> {
        Self::generate_with(
            n,
            p,
            k_hint,
            seed,
            backend,
            Some(Interpolation { tau, fresh_seed }),
            TensorBudgets::default(),
        )
    }

    /// Full-control constructor: optional interpolation, explicit budgets.
    pub fn generate_with(
        n: usize,
        p: usize,
        k_hint: usize,
        seed: u64,
        backend: Backend,
        interpolation: Option<Interpolation>,
        budgets: TensorBudgets,
    ) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid(format!("dimension n must be ≥ 1, got {n}")));
        }
        // The entry hash packs one word per axis into a fixed buffer, so
        // the order is capped; 16 covers every experiment by a wide margin.
        if !(1..=16).contains(&p) {
            return Err(Error::invalid(format!(
                "order p must satisfy 1 ≤ p ≤ 16, got {p}"
            )));
        }
        if k_hint < 1 || k_hint > n {
            return Err(Error::invalid(format!(
                "subset-size hint k must satisfy 1 ≤ k ≤ n, got k={k_hint}, n={n}"
            )));
        }
        if let Some(itp) = interpolation {
            if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&itp.tau) {
                return Err(Error::invalid(format!(
                    "interpolation angle τ must lie in [0, π/2], got {}",
                    itp.tau
                )));
            }
        }

        let mut t = TensorInstance {
            order_p: p,
            dim_n: n,
            backend,
            master_seed: seed,
            dense_entries: None,
            interpolation,
            budgets,
        };

        if backend == Backend::Dense {
            let total = (n as u128).pow(p as u32);
            if total > budgets.dense_cap_entries {
                return Err(Error::CapExceeded {
                    requested: total,
                    cap: budgets.dense_cap_entries,
                });
            }
            let mut entries = Vec::with_capacity(total as usize);
            // Row-major odometer, axis 1 slowest: the last axis increments
            // fastest, exactly matching the offset arithmetic below.
            let mut idx = vec![1usize; p];
            loop {
                entries.push(t.compute_entry(&idx));
                let mut axis = p;
                loop {
                    if axis == 0 {
                        break;
                    }
                    idx[axis - 1] += 1;
                    if idx[axis - 1] <= n {
                        break;
                    }
                    idx[axis - 1] = 1;
                    axis -= 1;
                }
                if axis == 0 {
                    break;
                }
            }
            debug_assert_eq!(entries.len() as u128, total);
            t.dense_entries = Some(entries);
        }
        Ok(t)
    }

    // ----- accessors -----

    /// Tensor order `p`.
    #[must_use]
    pub fn p(&self) -> usize {
        self.order_p
    }

    /// Axis dimension `N`.
    #[must_use]
    pub fn n(&self) -> usize {
        self.dim_n
    }

    /// Storage backend.
    #[must_use]
    pub fn backend(&self) -> Backend {
        self.backend
    }

    /// Seed of the base tensor `A⁰`.
    #[must_use]
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Interpolation state, if any.
    #[must_use]
    pub fn interpolation(&self) -> Option<Interpolation> {
        self.interpolation
    }

    /// Budgets in force for this instance.
    #[must_use]
    pub fn budgets(&self) -> TensorBudgets {
        self.budgets
    }

    /// The dense entry array (row-major, axis 1 slowest), if materialized.
    #[must_use]
    pub fn dense_entries(&self) -> Option<&[f64]> {
        self.dense_entries.as_deref()
    }

    // ----- entries -----

    /// Entry at 1-based indices `idx = (i_1, …, i_p)`.
    pub fn entry(&self, idx: &[usize]) -> Result<f64> {
        self.validate_index(idx)?;
        Ok(match &self.dense_entries {
            Some(entries) => entries[self.offset(idx)],
            None => self.compute_entry(idx),
        })
    }

    /// Entry lookup without validation, for solver inner loops.
    ///
    /// `idx` must be 1-based and in range (checked in debug builds only).
    #[inline]
    #[must_use]
    pub fn entry_unchecked(&self, idx: &[usize]) -> f64 {
        debug_assert!(self.validate_index(idx).is_ok());
        match &self.dense_entries {
            Some(entries) => entries[self.offset(idx)],
            None => self.compute_entry(idx),
        }
    }

    /// The defining arithmetic for one entry; both backends route through
    /// this, which is what makes them bit-identical.
    #[inline]
    fn compute_entry(&self, idx: &[usize]) -> f64 {
        let mut parts = [0u64; 16];
        debug_assert!(self.order_p <= 16, "order beyond the index buffer");
        for (slot, &i) in parts.iter_mut().zip(idx.iter()) {
            *slot = i as u64;
        }
        let parts = &parts[..self.order_p];
        let base = rng::normal_at(self.master_seed, TAG_ENTRY, parts);
        match self.interpolation {
            None => base,
            Some(itp) => {
                // Exact endpoints: see the module docs.
                if itp.tau == 0.0 {
                    base
                } else if itp.tau == std::f64::consts::FRAC_PI_2 {
                    rng::normal_at(itp.fresh_seed, TAG_ENTRY, parts)
                } else {
                    let fresh = rng::normal_at(itp.fresh_seed, TAG_ENTRY, parts);
                    itp.tau.cos() * base + itp.tau.sin() * fresh
                }
            }
        }
    }

    /// Row-major flat offset of 1-based indices (axis 1 slowest).
    #[inline]
    fn offset(&self, idx: &[usize]) -> usize {
        let mut off = 0usize;
        for &i in idx {
            off = off * self.dim_n + (i - 1);
        }
        off
    }

    fn validate_index(&self, idx: &[usize]) -> Result<()> {
        if idx.len() != self.order_p {
            return Err(Error::invalid(format!(
                "index tuple has {} components, tensor order is {}",
                idx.len(),
                self.order_p
            )));
        }
        for (axis, &i) in idx.iter().enumerate() {
            if i < 1 || i > self.dim_n {
                return Err(Error::IndexOutOfRange {
                    axis: axis + 1,
                    index: i,
                    n: self.dim_n,
                });
            }
        }
        Ok(())
    }

    // ----- subtensor sums -----

    /// Exact sum of the `k^p` entries addressed by a multi-index.
    pub fn subtensor_sum(&self, mi: &MultiIndex) -> Result<f64> {
        self.validate_multi_index(mi)?;
        let k = mi.k() as u128;
        let terms = k.pow(self.order_p as u32);
        if terms > self.budgets.sum_budget_terms {
            return Err(Error::BudgetExceeded {
                requested: terms as f64,
                budget: self.budgets.sum_budget_terms as f64,
                unit: "summation terms",
            });
        }
        // Odometer over the cross product of the p subsets.
        let k = mi.k();
        let mut pos = vec![0usize; self.order_p];
        let mut idx = vec![0usize; self.order_p];
        for (a, subset) in mi.subsets().iter().enumerate() {
            idx[a] = subset[0];
        }
        let mut sum = 0.0;
        loop {
            sum += self.entry_unchecked(&idx);
            let mut axis = self.order_p;
            loop {
                if axis == 0 {
                    break;
                }
                pos[axis - 1] += 1;
                if pos[axis - 1] < k {
                    idx[axis - 1] = mi.subset(axis - 1)[pos[axis - 1]];
                    break;
                }
                pos[axis - 1] = 0;
                idx[axis - 1] = mi.subset(axis - 1)[0];
                axis -= 1;
            }
            if axis == 0 {
                break;
            }
        }
        Ok(sum)
    }

    /// `subtensor_sum / k^p`: the quantity the solvers maximize.
    pub fn subtensor_average(&self, mi: &MultiIndex) -> Result<f64> {
        let sum = self.subtensor_sum(mi)?;
        Ok(sum / (mi.k() as f64).powi(self.order_p as i32))
    }

    fn validate_multi_index(&self, mi: &MultiIndex) -> Result<()> {
        if mi.p() != self.order_p || mi.n() != self.dim_n {
            return Err(Error::ShapeMismatch(format!(
                "multi-index is (n={}, p={}), tensor is (n={}, p={})",
                mi.n(),
                mi.p(),
                self.dim_n,
                self.order_p
            )));
        }
        Ok(())
    }

    // ----- binary dump -----

    /// Writes the dense-dump format: magic `LAST1`, then `N`, `p`, `seed`
    /// as little-endian u64, one backend flag byte (0 = dense), then all
    /// `N^p` entries as little-endian f64 in row-major order (axis 1
    /// slowest). Requires the dense backend.
    pub fn write_dump(&self, w: &mut impl Write) -> Result<()> {
        let entries = self.dense_entries.as_ref().ok_or_else(|| {
            Error::invalid("binary dump requires the dense backend".to_string())
        })?;
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&(self.dim_n as u64).to_le_bytes())?;
        w.write_all(&(self.order_p as u64).to_le_bytes())?;
        w.write_all(&self.master_seed.to_le_bytes())?;
        w.write_all(&[0u8])?;
        for &v in entries {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a dense dump back into an instance.
    ///
    /// Entries are taken verbatim from the file (so interpolated dumps
    /// round-trip their combined values); the seed is carried in the header
    /// for provenance.
    pub fn read_dump(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(Error::invalid(format!(
                "bad dump magic {magic:?}, expected {DUMP_MAGIC:?}"
            )));
        }
        let mut u = [0u8; 8];
        r.read_exact(&mut u)?;
        let n = u64::from_le_bytes(u) as usize;
        r.read_exact(&mut u)?;
        let p = u64::from_le_bytes(u) as usize;
        r.read_exact(&mut u)?;
        let seed = u64::from_le_bytes(u);
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        if flag[0] != 0 {
            return Err(Error::invalid(format!(
                "unknown backend flag {} in dump header",
                flag[0]
            )));
        }
        if n < 1 || p < 1 {
            return Err(Error::invalid(format!(
                "dump header has invalid shape n={n}, p={p}"
            )));
        }
        let total = (n as u128)
            .checked_pow(p as u32)
            .ok_or_else(|| Error::invalid("dump shape overflows".to_string()))?;
        let budgets = TensorBudgets::default();
        if total > budgets.dense_cap_entries {
            return Err(Error::CapExceeded {
                requested: total,
                cap: budgets.dense_cap_entries,
            });
        }
        let mut entries = Vec::with_capacity(total as usize);
        let mut f = [0u8; 8];
        for _ in 0..total {
            r.read_exact(&mut f)?;
            entries.push(f64::from_le_bytes(f));
        }
        Ok(TensorInstance {
            order_p: p,
            dim_n: n,
            backend: Backend::Dense,
            master_seed: seed,
            dense_entries: Some(entries),
            interpolation: None,
            budgets,
        })
    }
}

/// Magic bytes opening every tensor dump.
pub const DUMP_MAGIC: &[u8; 5] = b"LAST1";

// ===== MultiIndex ===========================================================

/// A candidate solution: `p` sorted `k`-subsets of `{1, …, N}`.
///
/// Canonical form (each subset strictly ascending) makes equality and
/// hashing structural.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex {
    subsets: Vec<Vec<usize>>,
    n: usize,
}

impl MultiIndex {
    /// Validates and wraps `p` subsets against ground-set size `n`.
    ///
    /// Every subset must be strictly increasing, non-empty, within
    /// `[1, n]`, and all of equal size `k`.
    pub fn new(subsets: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        if subsets.is_empty() {
            return Err(Error::invalid("a multi-index needs at least one axis".to_string()));
        }
        let k = subsets[0].len();
        if k == 0 {
            return Err(Error::invalid("axis subsets must be non-empty".to_string()));
        }
        for (axis, s) in subsets.iter().enumerate() {
            if s.len() != k {
                return Err(Error::invalid(format!(
                    "axis {} has {} indices, axis 1 has {k}",
                    axis + 1,
                    s.len()
                )));
            }
            for w in s.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::invalid(format!(
                        "axis {} subset is not strictly increasing at {:?}",
                        axis + 1,
                        w
                    )));
                }
            }
            for &i in s {
                if i < 1 || i > n {
                    return Err(Error::IndexOutOfRange {
                        axis: axis + 1,
                        index: i,
                        n,
                    });
                }
            }
        }
        Ok(MultiIndex { subsets, n })
    }

    /// Subset size `k` (equal across axes).
    #[must_use]
    pub fn k(&self) -> usize {
        self.subsets[0].len()
    }

    /// Number of axes `p`.
    #[must_use]
    pub fn p(&self) -> usize {
        self.subsets.len()
    }

    /// Ground-set size `N` this multi-index was validated against.
    #[must_use]
    pub fn n(&self) -> usize {
        self.n
    }

    /// All axis subsets.
    #[must_use]
    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    /// Subset of one axis (0-based axis number).
    #[must_use]
    pub fn subset(&self, axis: usize) -> &[usize] {
        &self.subsets[axis]
    }
}

// ===== Overlap ==============================================================

/// Per-axis intersection sizes between two multi-indexes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapVector {
    /// `a_q = |I_q ∩ I_q′|`, one per axis, each in `[0, k]`.
    pub intersections: Vec<usize>,
    /// The common subset size `k`.
    pub k: usize,
}

impl OverlapVector {
    /// Normalized overlaps `a_q / k` in `[0, 1]`.
    #[must_use]
    pub fn normalized(&self) -> Vec<f64> {
        self.intersections
            .iter()
            .map(|&a| a as f64 / self.k as f64)
            .collect()
    }
}

/// Computes `a_q = |I_q ∩ I_q′|` for each axis.
///
/// Both multi-indexes must agree on `(n, k, p)`.
pub fn overlap(mi1: &MultiIndex, mi2: &MultiIndex) -> Result<OverlapVector> {
    if mi1.p() != mi2.p() || mi1.k() != mi2.k() || mi1.n() != mi2.n() {
        return Err(Error::ShapeMismatch(format!(
            "overlap needs matching shapes, got (n={}, k={}, p={}) vs (n={}, k={}, p={})",
            mi1.n(),
            mi1.k(),
            mi1.p(),
            mi2.n(),
            mi2.k(),
            mi2.p()
        )));
    }
    let intersections = mi1
        .subsets()
        .iter()
        .zip(mi2.subsets())
        .map(|(a, b)| {
            // Sorted-merge intersection count.
            let (mut i, mut j, mut c) = (0, 0, 0);
            while i < a.len() && j < b.len() {
                match a[i].cmp(&b[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        c += 1;
                        i += 1;
                        j += 1;
                    }
                }
            }
            c
        })
        .collect();
    Ok(OverlapVector {
        intersections,
        k: mi1.k(),
    })
}
