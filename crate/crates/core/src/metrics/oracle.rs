//! Exact small-scale oracles: best subset by enumeration, and plug-in
//! mutual information.

use std::collections::HashMap;
use std::hash::Hash;

use fnv::FnvHashMap;
use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::types::SelectionSet;

/// Laplace smoothing added to every cell of the conditional tables.
pub const LAPLACE_ALPHA: f64 = 1.0;
/// Largest feature count the enumeration accepts.
pub const MAX_ENUM_FEATURES: usize = 12;
const TIE_TOL: f64 = 1e-9;

/// Replaces every value by the index of its quantile bin (`bins` equal-mass
/// bins per column, cut points from the column itself).
pub fn discretize_quantiles(x: ArrayView2<'_, f64>, bins: usize) -> Vec<Vec<u32>> {
    let (n, d) = x.dim();
    let mut out = vec![vec![0u32; d]; n];
    for j in 0..d {
        let mut col: Vec<f64> = x.column(j).to_vec();
        col.sort_by(f64::total_cmp);
        let cuts: Vec<f64> = (1..bins)
            .map(|b| col[(b * n / bins).min(n.saturating_sub(1))])
            .collect();
        for (i, row) in out.iter_mut().enumerate() {
            row[j] = cuts.iter().filter(|&&c| x[[i, j]] >= c).count() as u32;
        }
    }
    out
}

/// Mean smoothed `log p(y | x_cols)` over the samples.
fn mean_log_conditional(x: &[Vec<u32>], y: &[u32], cols: &[usize], n_classes: usize) -> f64 {
    let mut joint: FnvHashMap<(Vec<u32>, u32), f64> = FnvHashMap::default();
    let mut marginal: FnvHashMap<Vec<u32>, f64> = FnvHashMap::default();
    let keys: Vec<Vec<u32>> = x.iter().map(|row| cols.iter().map(|&j| row[j]).collect()).collect();
    for (key, &label) in keys.iter().zip(y) {
        *joint.entry((key.clone(), label)).or_default() += 1.0;
        *marginal.entry(key.clone()).or_default() += 1.0;
    }
    let c = n_classes as f64;
    let total: f64 = keys
        .iter()
        .zip(y)
        .map(|(key, &label)| {
            let nj = joint[&(key.clone(), label)];
            let nm = marginal[key];
            ((nj + LAPLACE_ALPHA) / (nm + LAPLACE_ALPHA * c)).ln()
        })
        .sum();
    total / x.len() as f64
}

/// Empirical `E[log p(y | x_S) - log p(y | x_not_S)]` for subset `cols`.
pub fn subset_objective(x: &[Vec<u32>], y: &[u32], cols: &[usize]) -> f64 {
    let d = x.first().map_or(0, Vec::len);
    let n_classes = y.iter().max().map_or(1, |&m| m as usize + 1);
    let rest: Vec<usize> = (0..d).filter(|j| !cols.contains(j)).collect();
    mean_log_conditional(x, y, cols, n_classes) - mean_log_conditional(x, y, &rest, n_classes)
}

fn combinations(d: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + d - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Size-`k` subset maximizing [`subset_objective`], enumerating all subsets
/// in lexicographic order so ties go to the smallest.
pub fn brute_force_best_subset(x: &[Vec<u32>], y: &[u32], k: usize) -> Result<SelectionSet> {
    let d = x.first().map_or(0, Vec::len);
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::shape("brute-force dataset", x.len(), y.len()));
    }
    if d > MAX_ENUM_FEATURES || k == 0 || k > d {
        return Err(Error::config(format!(
            "enumeration needs 1 <= k <= d <= {MAX_ENUM_FEATURES}, got k={k} d={d}"
        )));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    combinations(d, k, |cols| {
        let v = subset_objective(x, y, cols);
        if best.as_ref().is_none_or(|(b, _)| v > b + TIE_TOL) {
            best = Some((v, cols.to_vec()));
        }
    });
    SelectionSet::new(best.expect("at least one subset").1, d)
}

/// Plug-in mutual information in nats from the joint frequency table.
pub fn mi_estimate<A: Hash + Eq, B: Hash + Eq>(a: &[A], b: &[B]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("mutual information inputs", a.len(), b.len()));
    }
    let n = a.len() as f64;
    if a.is_empty() {
        return Ok(0.0);
    }
    let mut joint: HashMap<(&A, &B), f64> = HashMap::new();
    let mut pa: HashMap<&A, f64> = HashMap::new();
    let mut pb: HashMap<&B, f64> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1.0;
        *pa.entry(x).or_default() += 1.0;
        *pb.entry(y).or_default() += 1.0;
    }
    let mi: f64 = joint
        .iter()
        .map(|((x, y), &c)| c / n * (c * n / (pa[x] * pb[y])).ln())
        .sum();
    Ok(mi.max(0.0))
}
