//! Shared naive oracles for the solver tests.
//!
//! Everything here is deliberately primitive: plain nested loops over
//! `entry()`, no incremental sums, no shared projections, no shortcuts.
//! The library solvers are checked against these transcriptions, so the
//! two sides must not share code paths beyond entry generation.

#![allow(dead_code)] // each integration-test binary uses a subset

use last_core::rtensor::TensorInstance;

/// All k-subsets of `{1, …, n}` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        let needed = k - cur.len();
        for i in start..=(n - needed + 1) {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(1, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Subtensor sum by brute entry iteration (no projections, no reuse).
pub fn naive_subtensor_sum(t: &TensorInstance, subsets: &[Vec<usize>]) -> f64 {
    let p = subsets.len();
    let mut pos = vec![0usize; p];
    let mut idx = vec![0usize; p];
    let mut sum = 0.0;
    loop {
        for q in 0..p {
            idx[q] = subsets[q][pos[q]];
        }
        sum += t.entry(&idx).expect("oracle indices are in range");
        let mut q = p;
        loop {
            if q == 0 {
                return sum;
            }
            pos[q - 1] += 1;
            if pos[q - 1] < subsets[q - 1].len() {
                break;
            }
            pos[q - 1] = 0;
            q -= 1;
        }
    }
}

/// Exhaustive maximizer over all p-tuples of k-subsets, scanning tuples in
/// lexicographic order and keeping the first strict maximum, so the
/// reported maximizer is the lexicographically smallest one.
pub fn naive_brute(t: &TensorInstance, k: usize) -> (Vec<Vec<usize>>, f64) {
    let n = t.n();
    let p = t.p();
    let combos = combinations(n, k);
    let mut choice = vec![0usize; p];
    let mut best: Option<(Vec<Vec<usize>>, f64)> = None;
    loop {
        let subsets: Vec<Vec<usize>> = choice.iter().map(|&c| combos[c].clone()).collect();
        let sum = naive_subtensor_sum(t, &subsets);
        match &best {
            Some((_, b)) if sum <= *b => {}
            _ => best = Some((subsets, sum)),
        }
        let mut q = p;
        loop {
            if q == 0 {
                return best.expect("at least one tuple exists");
            }
            choice[q - 1] += 1;
            if choice[q - 1] < combos.len() {
                break;
            }
            choice[q - 1] = 0;
            q -= 1;
        }
    }
}

/// Line-by-line transcription of the incremental greedy procedure, with
/// every candidate scored by recomputing the full objective from scratch.
///
/// Blocks are `P_i = {(i−1)·⌊n/k⌋+1, …, i·⌊n/k⌋}`. Initialization puts the
/// smallest element of `P_1` on axes `1..p−1` and the best element of
/// `P_1` on axis `p`; each growth step `t = 2..k` extends axes `1..p` in
/// order with the best element of `P_t`, ties resolved to the smallest
/// candidate by a strict-greater ascending scan.
pub fn naive_igpt(t: &TensorInstance, k: usize) -> (Vec<Vec<usize>>, f64) {
    let n = t.n();
    let p = t.p();
    let w = n / k;
    let block = |i: usize| ((i - 1) * w + 1)..=(i * w);

    let mut sets: Vec<Vec<usize>> = vec![vec![1]; p];
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for i in block(1) {
        let mut idx = vec![1usize; p];
        idx[p - 1] = i;
        let v = t.entry(&idx).expect("block indices are in range");
        if v > best {
            best = v;
            arg = i;
        }
    }
    sets[p - 1] = vec![arg];

    for step in 2..=k {
        for u in 0..p {
            let mut best_sum = f64::NEG_INFINITY;
            let mut arg = 0;
            for i in block(step) {
                let mut trial = sets.clone();
                trial[u].push(i);
                let sum = naive_subtensor_sum(t, &trial);
                if sum > best_sum {
                    best_sum = sum;
                    arg = i;
                }
            }
            sets[u].push(arg);
        }
    }
    for s in &mut sets {
        s.sort_unstable();
    }
    let total = naive_subtensor_sum(t, &sets);
    (sets, total)
}

/// Relative-error assertion helper for transcendental comparisons.
pub fn assert_rel(actual: f64, expected: f64, tol: f64, what: &str) {
    let scale = expected.abs().max(1e-300);
    let rel = (actual - expected).abs() / scale;
    assert!(
        rel <= tol,
        "{what}: got {actual:.17e}, expected {expected:.17e}, rel err {rel:.3e} > {tol:.1e}"
    );
}
