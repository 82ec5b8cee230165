//! Boruta all-relevant feature selection backed by a small Gini random forest.
//!
//! Every iteration pits the undecided and confirmed features against freshly
//! shuffled "shadow" copies of every input column, rejected ones included, and
//! counts how often each real feature beats the best shadow. A two-sided
//! binomial test on those hit counts settles each feature as confirmed or
//! rejected; anything still undecided at the end is tentative.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::bail;
use crate::prelude::*;
use crate::rng::{derive_seed, stream_rng, tag};
use crate::signal::FeatureMatrix;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestConfig {
    pub tree_count: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { tree_count: 100, max_depth: 5, min_leaf: 5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BorutaConfig {
    pub max_iterations: usize,
    pub alpha: f64,
    pub forest: ForestConfig,
    /// Random row subsample used for selection, if the matrix is larger.
    pub max_rows: Option<usize>,
    /// Not serialised; set by the caller.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for BorutaConfig {
    fn default() -> Self {
        BorutaConfig { max_iterations: 100, alpha: 0.05, forest: ForestConfig::default(), max_rows: None, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureStatus {
    Confirmed,
    Rejected,
    Tentative,
}

impl FeatureStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureStatus::Confirmed => "confirmed",
            FeatureStatus::Rejected => "rejected",
            FeatureStatus::Tentative => "tentative",
        }
    }

    pub fn parse(s: &str) -> Option<FeatureStatus> {
        match s {
            "confirmed" => Some(FeatureStatus::Confirmed),
            "rejected" => Some(FeatureStatus::Rejected),
            "tentative" => Some(FeatureStatus::Tentative),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureDecision {
    pub name: String,
    pub status: FeatureStatus,
    pub hits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    /// One entry per input column, in input order.
    pub features: Vec<FeatureDecision>,
    pub iterations: usize,
}

impl SelectionReport {
    pub fn status(&self, name: &str) -> Option<FeatureStatus> {
        self.features.iter().find(|f| f.name == name).map(|f| f.status)
    }

    /// Confirmed and tentative features, in input order.
    pub fn selected(&self) -> Vec<String> {
        self.features.iter().filter(|f| f.status != FeatureStatus::Rejected).map(|f| f.name.clone()).collect()
    }
}

struct Node<'a> {
    cols: &'a [Vec<f64>],
    labels: &'a [usize],
    n_classes: usize,
    cfg: &'a ForestConfig,
    mtry: usize,
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

impl Node<'_> {
    /// Grows one subtree over `rows`, adding each split's impurity decrease
    /// to `importance`.
    fn grow(&self, rows: &mut [usize], depth: usize, rng: &mut impl Rng, importance: &mut [f64], scratch: &mut Vec<(f64, usize)>) {
        let n = rows.len();
        if depth >= self.cfg.max_depth || n < 2 * self.cfg.min_leaf {
            return;
        }
        let mut counts = vec![0usize; self.n_classes];
        rows.iter().for_each(|&r| counts[self.labels[r]] += 1);
        let parent = gini(&counts, n);
        if parent == 0.0 {
            return;
        }
        let mut best: Option<(f64, usize, f64)> = None;
        let mut left = vec![0usize; self.n_classes];
        for f in index::sample(rng, self.cols.len(), self.mtry) {
            let col = &self.cols[f];
            scratch.clear();
            scratch.extend(rows.iter().map(|&r| (col[r], self.labels[r])));
            scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            left.fill(0);
            for i in 1..n {
                left[scratch[i - 1].1] += 1;
                if i < self.cfg.min_leaf || n - i < self.cfg.min_leaf || scratch[i - 1].0 == scratch[i].0 {
                    continue;
                }
                let right: Vec<usize> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
                let decrease =
                    n as f64 * parent - i as f64 * gini(&left, i) - (n - i) as f64 * gini(&right, n - i);
                if best.is_none_or(|b| decrease > b.0) {
                    best = Some((decrease, f, 0.5 * (scratch[i - 1].0 + scratch[i].0)));
                }
            }
        }
        let Some((decrease, f, threshold)) = best else { return };
        if decrease <= 1e-12 {
            return;
        }
        importance[f] += decrease;
        let col = &self.cols[f];
        let mut split = 0;
        for i in 0..n {
            if col[rows[i]] <= threshold {
                rows.swap(i, split);
                split += 1;
            }
        }
        let (l, r) = rows.split_at_mut(split);
        self.grow(l, depth + 1, rng, importance, scratch);
        self.grow(r, depth + 1, rng, importance, scratch);
    }
}

/// Mean impurity-decrease importance over a forest grown on column-major data.
fn forest_importance(cols: &[Vec<f64>], labels: &[usize], cfg: &ForestConfig, seed: u64) -> Result<Vec<f64>> {
    if cfg.tree_count == 0 || cfg.max_depth == 0 || cfg.min_leaf == 0 {
        bail!(Config, "forest needs at least one tree, depth 1 and leaf size 1");
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut seen = vec![false; n_classes];
    labels.iter().for_each(|&l| seen[l] = true);
    if seen.iter().filter(|&&s| s).count() < 2 {
        bail!(Input, "feature importance needs at least two classes");
    }
    let f = cols.len();
    let node = Node { cols, labels, n_classes, cfg, mtry: ((f as f64).sqrt().ceil() as usize).clamp(1, f.max(1)) };
    let n = labels.len();
    let mut total = vec![0.0; f];
    let mut importance = vec![0.0; f];
    let mut rows = vec![0usize; n];
    let mut scratch = Vec::with_capacity(n);
    for t in 0..cfg.tree_count {
        let mut rng = stream_rng(seed, &[tag::FOREST, t as u64]);
        rows.iter_mut().for_each(|r| *r = rng.random_range(0..n));
        importance.fill(0.0);
        node.grow(&mut rows, 0, &mut rng, &mut importance, &mut scratch);
        for (a, b) in total.iter_mut().zip(&importance) {
            *a += b / n as f64;
        }
    }
    let sum: f64 = total.iter().sum();
    if sum > 0.0 {
        total.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(total)
}

fn columns(m: &FeatureMatrix) -> Vec<Vec<f64>> {
    (0..m.n_cols()).map(|j| m.column(j).collect()).collect()
}

/// Random-forest Gini importance of each column, summing to one whenever
/// any split happened and all zero otherwise.
pub fn rf_importance(m: &FeatureMatrix, cfg: &ForestConfig, seed: u64) -> Result<Vec<f64>> {
    forest_importance(&columns(m), m.labels(), cfg, seed)
}

/// Upper and lower tails `P(X >= k)` and `P(X <= k)` for `X ~ Bin(n, 1/2)`.
fn binomial_tails(k: usize, n: usize) -> (f64, f64) {
    let ln_pmf = |i: usize| {
        libm::lgamma(n as f64 + 1.0) - libm::lgamma(i as f64 + 1.0) - libm::lgamma((n - i) as f64 + 1.0)
            - n as f64 * core::f64::consts::LN_2
    };
    let upper = (k..=n).map(|i| ln_pmf(i).exp()).sum::<f64>();
    let lower = (0..=k).map(|i| ln_pmf(i).exp()).sum::<f64>();
    (upper.min(1.0), lower.min(1.0))
}

/// Runs Boruta over the columns of `m`.
///
/// Columns are processed in name order internally, so the outcome for each
/// name does not depend on the column order of `m`.
pub fn boruta_select(m: &FeatureMatrix, cfg: &BorutaConfig) -> Result<SelectionReport> {
    if cfg.max_iterations < 10 {
        bail!(Config, "Boruta needs at least 10 iterations, got {}", cfg.max_iterations);
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        bail!(Config, "alpha must lie in (0, 1), got {}", cfg.alpha);
    }
    let m = match cfg.max_rows {
        Some(max) if max < m.n_rows() => {
            let mut rows = index::sample(&mut stream_rng(cfg.seed, &[tag::BORUTA, u64::MAX]), m.n_rows(), max).into_vec();
            rows.sort_unstable();
            m.select_rows(&rows)
        }
        _ => m.clone(),
    };
    if m.n_rows() < 20 {
        bail!(Input, "Boruta needs at least 20 rows, got {}", m.n_rows());
    }
    let mut order: Vec<usize> = (0..m.n_cols()).collect();
    order.sort_by(|&a, &b| m.feature_names()[a].cmp(&m.feature_names()[b]));
    let all_cols = columns(&m);
    let cols: Vec<&Vec<f64>> = order.iter().map(|&j| &all_cols[j]).collect();
    let f = cols.len();
    let mut status = vec![FeatureStatus::Tentative; f];
    let mut hits = vec![0usize; f];
    let cutoff = cfg.alpha / 2.0 / f as f64;
    let mut iterations = 0;

    while iterations < cfg.max_iterations && status.contains(&FeatureStatus::Tentative) {
        let it = iterations as u64;
        let active: Vec<usize> = (0..f).filter(|&j| status[j] != FeatureStatus::Rejected).collect();
        let mut data: Vec<Vec<f64>> = active.iter().map(|&j| cols[j].clone()).collect();
        for j in 0..f {
            let mut shadow = cols[j].clone();
            shadow.shuffle(&mut stream_rng(cfg.seed, &[tag::BORUTA, it, j as u64]));
            data.push(shadow);
        }
        let imp = forest_importance(&data, m.labels(), &cfg.forest, derive_seed(cfg.seed, &[tag::BORUTA, it]))?;
        let best_shadow = imp[active.len()..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (a, &j) in active.iter().enumerate() {
            if imp[a] > best_shadow {
                hits[j] += 1;
            }
        }
        iterations += 1;
        for &j in &active {
            if status[j] == FeatureStatus::Tentative {
                let (upper, lower) = binomial_tails(hits[j], iterations);
                if upper < cutoff {
                    status[j] = FeatureStatus::Confirmed;
                } else if lower < cutoff {
                    status[j] = FeatureStatus::Rejected;
                }
            }
        }
    }

    let mut features: Vec<Option<FeatureDecision>> = vec![None; f];
    for (k, &j) in order.iter().enumerate() {
        features[j] = Some(FeatureDecision { name: m.feature_names()[j].clone(), status: status[k], hits: hits[k] });
    }
    Ok(SelectionReport { features: features.into_iter().map(Option::unwrap).collect(), iterations })
}
