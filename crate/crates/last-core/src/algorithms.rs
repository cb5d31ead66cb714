//! Solvers for the large average subtensor problem.
//!
//! Three solvers with one result type:
//!
//! - [`igpt`] — the Incremental Greedy Procedure for Tensors. Partition
//!   `{1, …, N}` into `k` consecutive blocks of width `⌊N/k⌋` (leftover
//!   indices unused). Initialize axes `1..p−1` with the smallest index of
//!   block 1 and axis `p` with the best single entry over block 1. Then for
//!   step `t = 2..k`, grow each axis `u = 1..p` in order by the index in
//!   block `t` maximizing the incremental sum over the current cross
//!   product of the other axes. Restricting step `t` to block `t` makes the
//!   step maxima *independent*: the step-`(t,u)` maximum `M`, divided by
//!   `sqrt(Π)` with `Π = t^{u−1}(t−1)^{p−u}` the cross-product size, is
//!   distributed as the maximum of `⌊N/k⌋` i.i.d. standard normals,
//!   independently across steps. That decomposition yields the
//!   `2√p/(p+1)·E_max` guarantee and is recorded per step
//!   ([`IgptStep`]) so tests can check the maxima against the
//!   extreme-value window around `sqrt(2 ln(N/k))`.
//! - [`brute_force_max`] — exact `M*` by enumerating all `C(N,k)^p`
//!   multi-indexes in lexicographic order. Axis sums are cached
//!   hierarchically (project axis 1's subset, then axis 2's, …), so the
//!   cost is `Σ_q C(N,k)^q·k·N^{p−q}` additions rather than
//!   `C(N,k)^p·k^p`. Ties resolve to the lexicographically smallest tuple.
//! - [`local_search`] — alternating maximization: repeatedly sweep the
//!   axes, replacing each axis's subset by the exact top-`k` of its
//!   marginal sums against the other fixed axes; stop when a full sweep
//!   changes nothing. Fixed points are axis-wise unimprovable, the
//!   tensor analogue of locally optimal submatrices.
//!
//! All solvers are deterministic: ties break toward smaller indices, so
//! equal inputs give equal outputs bit for bit.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{CounterStream, TAG_LSEARCH};
use crate::rtensor::{MultiIndex, TensorInstance};
use crate::theory::log_binomial;

/// Default cap on `C(N,k)^p` for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_BUDGET_TUPLES: f64 = 1e8;

/// Default cap on local-search sweeps before giving up.
pub const DEFAULT_MAX_SWEEPS: u64 = 1000;

// ===== Results ==============================================================

/// Which solver produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Incremental greedy.
    Igpt,
    /// Exhaustive enumeration.
    Brute,
    /// Alternating per-axis maximization.
    LocalSearch,
}

impl Algorithm {
    /// Stable lower-case token (matches the CLI and CSV vocabulary).
    #[must_use]
    pub fn token(&self) -> &'static str {
        match self {
            Algorithm::Igpt => "igpt",
            Algorithm::Brute => "brute",
            Algorithm::LocalSearch => "local_search",
        }
    }
}

/// Work counters for one solver invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Tensor entry reads (dense array lookups or implicit evaluations).
    /// For brute force this counts the first-level projections, the only
    /// stage that touches the tensor itself.
    pub entries_evaluated: u64,
    /// Greedy steps, tuples enumerated, or sweeps, per algorithm.
    pub iterations: u64,
    /// Wall-clock time of the invocation.
    pub wall_nanos: u64,
}

/// One recorded greedy step: at step `t`, axis `u`, the maximal
/// incremental sum over the candidate block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IgptStep {
    /// Step number `t` (1 for the initialization maximum on axis `p`).
    pub step: usize,
    /// Axis `u` being extended, 1-based.
    pub axis: usize,
    /// The chosen index.
    pub chosen: usize,
    /// The maximal incremental sum `M` over the candidate block.
    pub max_value: f64,
    /// Cross-product size `Π = t^{u−1}·(t−1)^{p−u}`; `M/√Π` is the maximum
    /// of `⌊N/k⌋` i.i.d. standard normals, independent across steps.
    pub pi: u64,
}

impl IgptStep {
    /// `M/√Π`, the standardized step maximum.
    #[must_use]
    pub fn normalized(&self) -> f64 {
        self.max_value / (self.pi as f64).sqrt()
    }
}

/// A solver's output: the solution, its value, and work counters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    /// The chosen multi-index.
    pub solution: MultiIndex,
    /// Sum of the `k^p` selected entries.
    pub value_sum: f64,
    /// `value_sum / k^p`, the maximized objective.
    pub value_average: f64,
    /// Which solver produced this.
    pub algorithm: Algorithm,
    /// Work counters.
    pub stats: SolveStats,
    /// Per-step maxima; present for the greedy solver only.
    pub igpt_steps: Option<Vec<IgptStep>>,
}

// ===== Block partition ======================================================

/// Consecutive index blocks `P_1..P_k` of width `⌊N/k⌋` plus the unused
/// leftover `P_{k+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    /// `P_i = {(i−1)·⌊N/k⌋+1, …, i·⌊N/k⌋}` for `i = 1..k`.
    pub blocks: Vec<Vec<usize>>,
    /// `P_{k+1} = {k·⌊N/k⌋+1, …, N}`; empty iff `k` divides `N`.
    pub leftover: Vec<usize>,
}

impl BlockPartition {
    /// Common block width `⌊N/k⌋`.
    #[must_use]
    pub fn width(&self) -> usize {
        self.blocks[0].len()
    }
}

/// Splits `{1, …, n}` into `k` consecutive blocks of width `⌊n/k⌋` plus a
/// leftover; requires `1 ≤ k ≤ n`.
pub fn block_partition(n: usize, k: usize) -> Result<BlockPartition> {
    if k < 1 || k > n {
        return Err(Error::invalid(format!(
            "block partition needs 1 ≤ k ≤ n, got k={k}, n={n}"
        )));
    }
    let width = n / k;
    let blocks = (1..=k)
        .map(|i| ((i - 1) * width + 1..=i * width).collect())
        .collect();
    let leftover = (k * width + 1..=n).collect();
    Ok(BlockPartition { blocks, leftover })
}

// ===== IGPT =================================================================

/// Runs the incremental greedy (see the module docs for the procedure).
///
/// Works with either backend; the implicit backend is preferred for large
/// `N` since only `O(p·k·N)` of the `N^p` entries are ever read. Ties
/// break toward the smallest candidate index. The returned `value_sum` is
/// the telescoped sum of the initialization value and all step maxima,
/// which equals the subtensor sum of the final solution.
pub fn igpt(t: &TensorInstance, k: usize) -> Result<SolveResult> {
    let start = Instant::now();
    let (n, p) = (t.n(), t.p());
    let partition = block_partition(n, k)?;
    let block_one = &partition.blocks[0];

    // Chronological contents per axis: the t-th element of every axis was
    // chosen at step t, which is what makes Π a plain power product.
    let mut chosen: Vec<Vec<usize>> = vec![Vec::with_capacity(k); p];
    let mut steps: Vec<IgptStep> = Vec::with_capacity(1 + (k - 1) * p);
    let mut entries_evaluated: u64 = 0;
    let mut idx = vec![0usize; p];

    // Initialization: axes 1..p−1 take the smallest index of block 1;
    // axis p takes the best single entry over block 1.
    for axis_set in chosen.iter_mut().take(p - 1) {
        axis_set.push(block_one[0]);
    }
    for (slot, axis_set) in idx.iter_mut().zip(chosen.iter()).take(p - 1) {
        *slot = axis_set[0];
    }
    let mut best_value = f64::NEG_INFINITY;
    let mut best_index = 0usize;
    for &j in block_one {
        idx[p - 1] = j;
        let v = t.entry_unchecked(&idx);
        entries_evaluated += 1;
        if v > best_value {
            best_value = v;
            best_index = j;
        }
    }
    chosen[p - 1].push(best_index);
    let mut value_sum = best_value;
    steps.push(IgptStep {
        step: 1,
        axis: p,
        chosen: best_index,
        max_value: best_value,
        pi: 1,
    });

    // Growth: step t extends every axis in order with an index from block t.
    for t_step in 2..=k {
        let block = &partition.blocks[t_step - 1];
        for u in 1..=p {
            // Cross product of the other axes' current contents.
            let other_axes: Vec<usize> = (0..p).filter(|&v| v != u - 1).collect();
            let mut pi: u64 = 1;
            for &v in &other_axes {
                pi *= chosen[v].len() as u64;
            }
            let mut best_value = f64::NEG_INFINITY;
            let mut best_index = 0usize;
            let mut positions = vec![0usize; other_axes.len()];
            for &c in block {
                idx[u - 1] = c;
                let mut sum = 0.0;
                // Odometer over the other axes.
                for pos in positions.iter_mut() {
                    *pos = 0;
                }
                for (&v, &pos) in other_axes.iter().zip(positions.iter()) {
                    idx[v] = chosen[v][pos];
                }
                loop {
                    sum += t.entry_unchecked(&idx);
                    let mut a = other_axes.len();
                    loop {
                        if a == 0 {
                            break;
                        }
                        positions[a - 1] += 1;
                        if positions[a - 1] < chosen[other_axes[a - 1]].len() {
                            idx[other_axes[a - 1]] = chosen[other_axes[a - 1]][positions[a - 1]];
                            break;
                        }
                        positions[a - 1] = 0;
                        idx[other_axes[a - 1]] = chosen[other_axes[a - 1]][0];
                        a -= 1;
                    }
                    if a == 0 {
                        break;
                    }
                }
                entries_evaluated += pi;
                if sum > best_value {
                    best_value = sum;
                    best_index = c;
                }
            }
            chosen[u - 1].push(best_index);
            value_sum += best_value;
            steps.push(IgptStep {
                step: t_step,
                axis: u,
                chosen: best_index,
                max_value: best_value,
                pi,
            });
        }
    }

    let mut subsets = chosen;
    for s in &mut subsets {
        s.sort_unstable();
    }
    let solution = MultiIndex::new(subsets, n)?;
    let iterations = steps.len() as u64;
    Ok(SolveResult {
        solution,
        value_sum,
        value_average: value_sum / (k as f64).powi(p as i32),
        algorithm: Algorithm::Igpt,
        stats: SolveStats {
            entries_evaluated,
            iterations,
            wall_nanos: start.elapsed().as_nanos() as u64,
        },
        igpt_steps: Some(steps),
    })
}

// ===== Exhaustive enumeration ===============================================

/// Calls `f` once per `k`-subset of `{1, …, n}`, in lexicographic order.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    debug_assert!(k >= 1 && k <= n);
    let mut c: Vec<usize> = (1..=k).collect();
    loop {
        f(&c);
        // Advance the rightmost position that can still move.
        let mut i = k;
        while i > 0 && c[i - 1] == n - k + i {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        c[i - 1] += 1;
        for j in i..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

/// Visits every `p`-tuple of `k`-subsets in lexicographic order with its
/// exact subtensor sum, reusing hierarchical per-axis projections.
///
/// Returns `(tuples_visited, tensor_entry_reads)`. Used by both the exact
/// solver and the overlap scan, so the two agree on enumeration order and
/// summation grouping exactly.
pub(crate) fn enumerate_subtensor_sums(
    t: &TensorInstance,
    k: usize,
    mut visit: impl FnMut(&[Vec<usize>], f64),
) -> Result<(u64, u64)> {
    let entries = t
        .dense_entries()
        .ok_or_else(|| Error::invalid("exhaustive enumeration requires the dense backend".to_string()))?;
    let (n, p) = (t.n(), t.p());
    if k < 1 || k > n {
        return Err(Error::invalid(format!(
            "enumeration needs 1 ≤ k ≤ n, got k={k}, n={n}"
        )));
    }

    // scratch[q] holds the projection after fixing axes 0..=q: size n^{p−1−q}.
    let mut scratch: Vec<Vec<f64>> = (0..p)
        .map(|q| vec![0.0; n.pow((p - 1 - q) as u32)])
        .collect();
    let mut prefix: Vec<Vec<usize>> = Vec::with_capacity(p);
    let mut tuples: u64 = 0;
    let mut reads: u64 = 0;

    // Recursive descent over axes, expressed with an explicit helper so the
    // borrow of `scratch` can be split per level; the recursion state is
    // passed positionally rather than bundled into a struct.
    #[allow(clippy::too_many_arguments)]
    fn descend(
        axis: usize,
        source: &[f64],
        n: usize,
        p: usize,
        k: usize,
        scratch: &mut [Vec<f64>],
        prefix: &mut Vec<Vec<usize>>,
        tuples: &mut u64,
        reads: &mut u64,
        visit: &mut impl FnMut(&[Vec<usize>], f64),
    ) {
        if axis == p - 1 {
            // Last axis: the source is a length-n vector of partial sums.
            for_each_combination(n, k, |subset| {
                let mut sum = 0.0;
                for &i in subset {
                    sum += source[i - 1];
                }
                if axis == 0 {
                    *reads += k as u64;
                }
                *tuples += 1;
                prefix.push(subset.to_vec());
                visit(prefix, sum);
                prefix.pop();
            });
            return;
        }
        let stride = n.pow((p - 1 - axis) as u32);
        let (projected, rest) = scratch.split_first_mut().expect("one scratch level per axis");
        for_each_combination(n, k, |subset| {
            projected.iter_mut().for_each(|v| *v = 0.0);
            for &i in subset {
                let offset = (i - 1) * stride;
                for (acc, &v) in projected.iter_mut().zip(&source[offset..offset + stride]) {
                    *acc += v;
                }
            }
            if axis == 0 {
                *reads += (k * stride) as u64;
            }
            prefix.push(subset.to_vec());
            descend(axis + 1, projected, n, p, k, rest, prefix, tuples, reads, visit);
            prefix.pop();
        });
    }

    descend(
        0, entries, n, p, k, &mut scratch, &mut prefix, &mut tuples, &mut reads, &mut visit,
    );
    Ok((tuples, reads))
}

/// Exact maximum over all `C(N,k)^p` multi-indexes, with the default
/// enumeration budget.
pub fn brute_force_max(t: &TensorInstance, k: usize) -> Result<SolveResult> {
    brute_force_max_with_budget(t, k, DEFAULT_ENUMERATION_BUDGET_TUPLES)
}

/// Exact maximum with an explicit cap on `C(N,k)^p`.
///
/// Requires the dense backend. Ties resolve to the lexicographically
/// smallest tuple (the enumeration is lexicographic and only strict
/// improvements replace the incumbent).
pub fn brute_force_max_with_budget(
    t: &TensorInstance,
    k: usize,
    budget_tuples: f64,
) -> Result<SolveResult> {
    let start = Instant::now();
    let (n, p) = (t.n(), t.p());
    if k < 1 || k > n {
        return Err(Error::invalid(format!(
            "enumeration needs 1 ≤ k ≤ n, got k={k}, n={n}"
        )));
    }
    // Budget check in log space so astronomically large counts don't
    // overflow before they can be rejected.
    let ln_tuples = p as f64 * log_binomial(n as u64, k as u64)?;
    if ln_tuples > budget_tuples.ln() {
        return Err(Error::BudgetExceeded {
            requested: ln_tuples.exp(),
            budget: budget_tuples,
            unit: "tuples",
        });
    }

    let mut best_sum = f64::NEG_INFINITY;
    let mut best_tuple: Option<Vec<Vec<usize>>> = None;
    let (tuples, reads) = enumerate_subtensor_sums(t, k, |tuple, sum| {
        if sum > best_sum {
            best_sum = sum;
            best_tuple = Some(tuple.to_vec());
        }
    })?;

    let solution = MultiIndex::new(best_tuple.expect("at least one tuple"), n)?;
    Ok(SolveResult {
        solution,
        value_sum: best_sum,
        value_average: best_sum / (k as f64).powi(p as i32),
        algorithm: Algorithm::Brute,
        stats: SolveStats {
            entries_evaluated: reads,
            iterations: tuples,
            wall_nanos: start.elapsed().as_nanos() as u64,
        },
        igpt_steps: None,
    })
}

// ===== Local search =========================================================

/// Starting point for [`local_search`].
#[derive(Debug, Clone)]
pub enum LocalSearchInit {
    /// Start from this multi-index.
    Given(MultiIndex),
    /// Start from `p` independent uniform `k`-subsets drawn from this seed.
    Random {
        /// Seed for the init draw.
        seed: u64,
    },
}

/// Alternating per-axis maximization; see the module docs.
///
/// Each sweep visits axes `1..p`, computing every index's marginal sum
/// against the other (fixed) axes and keeping the top `k`; an axis is
/// replaced only on strict improvement, so the objective strictly
/// increases whenever anything changes and the run terminates. Stops after
/// the first sweep that changes nothing, or errors with `BudgetExceeded`
/// after [`DEFAULT_MAX_SWEEPS`].
pub fn local_search(t: &TensorInstance, k: usize, init: LocalSearchInit) -> Result<SolveResult> {
    local_search_traced(t, k, init).map(|(result, _)| result)
}

/// [`local_search`] plus the objective value after every axis pass
/// (non-decreasing by construction; used by tests).
pub fn local_search_traced(
    t: &TensorInstance,
    k: usize,
    init: LocalSearchInit,
) -> Result<(SolveResult, Vec<f64>)> {
    let start = Instant::now();
    let (n, p) = (t.n(), t.p());
    if k < 1 || k > n {
        return Err(Error::invalid(format!(
            "local search needs 1 ≤ k ≤ n, got k={k}, n={n}"
        )));
    }
    let mut subsets: Vec<Vec<usize>> = match init {
        LocalSearchInit::Given(mi) => {
            if mi.n() != n || mi.p() != p {
                return Err(Error::ShapeMismatch(format!(
                    "init is (n={}, p={}), tensor is (n={n}, p={p})",
                    mi.n(),
                    mi.p()
                )));
            }
            if mi.k() != k {
                return Err(Error::invalid(format!(
                    "init has subset size {}, requested k={k}",
                    mi.k()
                )));
            }
            mi.subsets().to_vec()
        }
        LocalSearchInit::Random { seed } => {
            let mut stream = CounterStream::new(seed, TAG_LSEARCH, &[]);
            (0..p).map(|_| stream.next_subset(n, k)).collect()
        }
    };

    // One axis pass reads n·k^{p−1} entries; keep that within the tensor's
    // summation budget so the implicit backend cannot be driven unbounded.
    let pass_terms = (n as u128) * (k as u128).pow(p as u32 - 1);
    if pass_terms > t.budgets().sum_budget_terms {
        return Err(Error::BudgetExceeded {
            requested: pass_terms as f64,
            budget: t.budgets().sum_budget_terms as f64,
            unit: "summation terms per axis pass",
        });
    }

    let mut entries_evaluated: u64 = 0;
    let mut trace: Vec<f64> = Vec::new();
    let mut sweeps: u64 = 0;
    let mut marginals = vec![0.0f64; n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut idx = vec![0usize; p];

    loop {
        if sweeps >= DEFAULT_MAX_SWEEPS {
            return Err(Error::BudgetExceeded {
                requested: (sweeps + 1) as f64,
                budget: DEFAULT_MAX_SWEEPS as f64,
                unit: "local-search sweeps",
            });
        }
        sweeps += 1;
        let mut changed = false;
        for u in 0..p {
            // Marginal sum of every candidate index on axis u.
            let other_axes: Vec<usize> = (0..p).filter(|&v| v != u).collect();
            marginals.iter_mut().for_each(|v| *v = 0.0);
            let mut positions = vec![0usize; other_axes.len()];
            for (&v, &pos) in other_axes.iter().zip(positions.iter()) {
                idx[v] = subsets[v][pos];
            }
            loop {
                for i in 1..=n {
                    idx[u] = i;
                    marginals[i - 1] += t.entry_unchecked(&idx);
                }
                entries_evaluated += n as u64;
                let mut a = other_axes.len();
                loop {
                    if a == 0 {
                        break;
                    }
                    positions[a - 1] += 1;
                    if positions[a - 1] < k {
                        idx[other_axes[a - 1]] = subsets[other_axes[a - 1]][positions[a - 1]];
                        break;
                    }
                    positions[a - 1] = 0;
                    idx[other_axes[a - 1]] = subsets[other_axes[a - 1]][0];
                    a -= 1;
                }
                if a == 0 {
                    break;
                }
            }
            // Exact per-axis optimum: top-k marginals, ties to smaller index.
            order.clear();
            order.extend(1..=n);
            order.sort_by(|&a, &b| {
                marginals[b - 1]
                    .total_cmp(&marginals[a - 1])
                    .then(a.cmp(&b))
            });
            let mut candidate: Vec<usize> = order[..k].to_vec();
            candidate.sort_unstable();
            let new_sum: f64 = candidate.iter().map(|&i| marginals[i - 1]).sum();
            let old_sum: f64 = subsets[u].iter().map(|&i| marginals[i - 1]).sum();
            if new_sum > old_sum {
                subsets[u] = candidate;
                changed = true;
                trace.push(new_sum);
            } else {
                trace.push(old_sum);
            }
        }
        if !changed {
            break;
        }
    }

    let solution = MultiIndex::new(subsets, n)?;
    let value_sum = t.subtensor_sum(&solution)?;
    let result = SolveResult {
        solution,
        value_sum,
        value_average: value_sum / (k as f64).powi(p as i32),
        algorithm: Algorithm::LocalSearch,
        stats: SolveStats {
            entries_evaluated,
            iterations: sweeps,
            wall_nanos: start.elapsed().as_nanos() as u64,
        },
        igpt_steps: None,
    };
    Ok((result, trace))
}
