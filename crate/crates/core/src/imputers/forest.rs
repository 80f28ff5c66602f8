//! Iterative random-forest imputation.
//!
//! Missing cells start at train column means/modes. Columns are then
//! refitted in ascending train-missingness order: each incomplete column
//! gets a forest (bootstrap rows, sqrt-p feature subsampling per node,
//! absolute-error splits with median leaves for continuous columns, gini
//! splits with majority leaves for categorical ones) trained on its
//! originally-observed rows, and its missing cells are re-predicted. Sweeps
//! repeat until the scaled difference between consecutive imputed matrices
//! rises, at which point the previous iterate wins. Test cells are predicted
//! with the accepted forests.
//!
//! Trees are depth-capped and deterministic: every tree derives its own RNG
//! seed from the imputer seed, so forests may be grown in parallel without
//! affecting results.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::imputers::encode::complete_from_matrix;
use crate::imputers::{
    finalize, precheck, CellProvenance, FeatureMatrix, ImputationResult, ImputerConfig,
};
use crate::seed::derive_seed;
use crate::tabular::Dataset;

const MAX_DEPTH: usize = 12;
const MIN_LEAF: usize = 2;

// Fenwick tree over y-value ranks carrying counts and sums, so the L1 split
// sweep gets median and absolute-deviation queries in O(log n).
struct RankedSums {
    counts: Vec<usize>,
    sums: Vec<f64>,
    total_count: usize,
    total_sum: f64,
}

impl RankedSums {
    fn new(n_ranks: usize) -> Self {
        RankedSums {
            counts: vec![0; n_ranks + 1],
            sums: vec![0.0; n_ranks + 1],
            total_count: 0,
            total_sum: 0.0,
        }
    }

    fn update(&mut self, rank: usize, value: f64, add: bool) {
        let (dc, dv) = if add { (1isize, value) } else { (-1isize, -value) };
        self.total_count = (self.total_count as isize + dc) as usize;
        self.total_sum += dv;
        let mut i = rank + 1;
        while i < self.counts.len() {
            self.counts[i] = (self.counts[i] as isize + dc) as usize;
            self.sums[i] += dv;
            i += i & i.wrapping_neg();
        }
    }

    /// Cumulative (count, sum) through `rank` inclusive.
    fn prefix(&self, rank: usize) -> (usize, f64) {
        let mut count = 0;
        let mut sum = 0.0;
        let mut i = rank + 1;
        while i > 0 {
            count += self.counts[i];
            sum += self.sums[i];
            i -= i & i.wrapping_neg();
        }
        (count, sum)
    }

    /// Rank of the k-th smallest element (k is 1-based).
    fn select(&self, k: usize) -> usize {
        let mut pos = 0usize;
        let mut remaining = k;
        let mut step = (self.counts.len() - 1).next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next < self.counts.len() && self.counts[next] < remaining {
                remaining -= self.counts[next];
                pos = next;
            }
            step >>= 1;
        }
        pos // 0-based rank
    }

    /// Sum of absolute deviations from the (lower) median.
    fn l1_cost(&self, sorted_values: &[f64]) -> f64 {
        if self.total_count == 0 {
            return 0.0;
        }
        let med = sorted_values[self.select(self.total_count.div_ceil(2))];
        let (cnt_le, sum_le) = self.prefix(
            sorted_values.partition_point(|&v| v <= med) - 1,
        );
        (med * cnt_le as f64 - sum_le)
            + (self.total_sum - sum_le)
            - med * (self.total_count - cnt_le) as f64
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf(f64),
    Split { feat: usize, threshold: f64, left: u32, right: u32 },
}

#[derive(Clone, Debug)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf(v) => return *v,
                Node::Split { feat, threshold, left, right } => {
                    i = if x[*feat] <= *threshold { *left as usize } else { *right as usize };
                }
            }
        }
    }
}

struct TreeTask<'a> {
    xs: &'a [Vec<f64>],
    ys: &'a [f64],
    categorical: bool,
    n_classes: usize,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn majority(task: &TreeTask, rows: &[usize]) -> f64 {
    let mut counts = vec![0usize; task.n_classes];
    for &r in rows {
        counts[task.ys[r] as usize] += 1;
    }
    let best = counts.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).unwrap();
    best.0 as f64
}

fn leaf_value(task: &TreeTask, rows: &[usize]) -> f64 {
    if task.categorical {
        majority(task, rows)
    } else {
        let mut ys: Vec<f64> = rows.iter().map(|&r| task.ys[r]).collect();
        median(&mut ys)
    }
}

/// Best (cost, threshold) for one feature over the node rows, or None when
/// no boundary leaves MIN_LEAF rows on each side.
fn best_split_l1(task: &TreeTask, rows: &[usize], feat: usize) -> Option<(f64, f64)> {
    let mut order: Vec<usize> = rows.to_vec();
    order.sort_by(|&a, &b| task.xs[a][feat].total_cmp(&task.xs[b][feat]));

    let mut sorted_y: Vec<f64> = rows.iter().map(|&r| task.ys[r]).collect();
    sorted_y.sort_by(f64::total_cmp);
    sorted_y.dedup();
    let rank_of = |y: f64| sorted_y.partition_point(|&v| v < y);

    let mut left = RankedSums::new(sorted_y.len());
    let mut right = RankedSums::new(sorted_y.len());
    for &r in &order {
        right.update(rank_of(task.ys[r]), task.ys[r], true);
    }

    let mut best: Option<(f64, f64)> = None;
    for i in 0..order.len() - 1 {
        let y = task.ys[order[i]];
        left.update(rank_of(y), y, true);
        right.update(rank_of(y), y, false);
        let x_here = task.xs[order[i]][feat];
        let x_next = task.xs[order[i + 1]][feat];
        if x_here == x_next || i + 1 < MIN_LEAF || order.len() - i - 1 < MIN_LEAF {
            continue;
        }
        let cost = left.l1_cost(&sorted_y) + right.l1_cost(&sorted_y);
        if best.is_none() || cost < best.unwrap().0 {
            best = Some((cost, (x_here + x_next) / 2.0));
        }
    }
    best
}

fn best_split_gini(task: &TreeTask, rows: &[usize], feat: usize) -> Option<(f64, f64)> {
    let mut order: Vec<usize> = rows.to_vec();
    order.sort_by(|&a, &b| task.xs[a][feat].total_cmp(&task.xs[b][feat]));

    let mut left = vec![0usize; task.n_classes];
    let mut right = vec![0usize; task.n_classes];
    for &r in &order {
        right[task.ys[r] as usize] += 1;
    }
    let weighted_gini = |counts: &[usize]| {
        let n: usize = counts.iter().sum();
        if n == 0 {
            return 0.0;
        }
        let sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
        n as f64 - sq / n as f64
    };

    let mut best: Option<(f64, f64)> = None;
    for i in 0..order.len() - 1 {
        let class = task.ys[order[i]] as usize;
        left[class] += 1;
        right[class] -= 1;
        let x_here = task.xs[order[i]][feat];
        let x_next = task.xs[order[i + 1]][feat];
        if x_here == x_next || i + 1 < MIN_LEAF || order.len() - i - 1 < MIN_LEAF {
            continue;
        }
        let cost = weighted_gini(&left) + weighted_gini(&right);
        if best.is_none() || cost < best.unwrap().0 {
            best = Some((cost, (x_here + x_next) / 2.0));
        }
    }
    best
}

fn grow(task: &TreeTask, nodes: &mut Vec<Node>, rows: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> u32 {
    let idx = nodes.len() as u32;
    nodes.push(Node::Leaf(0.0));

    let pure = rows.windows(2).all(|w| task.ys[w[0]] == task.ys[w[1]])
        || rows.iter().all(|&r| task.ys[r] == task.ys[rows[0]]);
    let n_features = task.xs.first().map_or(0, Vec::len);
    if depth >= MAX_DEPTH || rows.len() < 2 * MIN_LEAF || pure || n_features == 0 {
        nodes[idx as usize] = Node::Leaf(leaf_value(task, &rows));
        return idx;
    }

    let mtry = (n_features as f64).sqrt().ceil() as usize;
    let sampled = rand::seq::index::sample(rng, n_features, mtry.min(n_features));
    let mut best: Option<(f64, usize, f64)> = None;
    for feat in sampled {
        let split = if task.categorical {
            best_split_gini(task, &rows, feat)
        } else {
            best_split_l1(task, &rows, feat)
        };
        if let Some((cost, threshold)) = split {
            if best.is_none() || cost < best.unwrap().0 {
                best = Some((cost, feat, threshold));
            }
        }
    }
    let Some((_, feat, threshold)) = best else {
        nodes[idx as usize] = Node::Leaf(leaf_value(task, &rows));
        return idx;
    };

    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.into_iter().partition(|&r| task.xs[r][feat] <= threshold);
    let left = grow(task, nodes, left_rows, depth + 1, rng);
    let right = grow(task, nodes, right_rows, depth + 1, rng);
    nodes[idx as usize] = Node::Split { feat, threshold, left, right };
    idx
}

#[derive(Clone, Debug)]
struct Forest {
    trees: Vec<Tree>,
    categorical: bool,
    n_classes: usize,
}

fn fit_forest(task: &TreeTask, seeds: &[u64]) -> Forest {
    let trees: Vec<Tree> = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = task.ys.len();
            let bootstrap: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut nodes = Vec::new();
            grow(task, &mut nodes, bootstrap, 0, &mut rng);
            Tree { nodes }
        })
        .collect();
    Forest { trees, categorical: task.categorical, n_classes: task.n_classes }
}

impl Forest {
    fn predict(&self, x: &[f64]) -> f64 {
        if self.categorical {
            let mut votes = vec![0usize; self.n_classes];
            for tree in &self.trees {
                votes[tree.predict(x) as usize] += 1;
            }
            let best =
                votes.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).unwrap();
            best.0 as f64
        } else {
            self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
        }
    }
}

fn regressor_row(fm: &FeatureMatrix, r: usize, skip: usize) -> Vec<f64> {
    (0..fm.n_cols()).filter(|&j| j != skip).map(|j| fm.values[(r, j)]).collect()
}

// missForest stopping statistic between consecutive imputed matrices:
// continuous part sum((new-old)^2)/sum(new^2) over continuous fit columns,
// plus the changed fraction of missing categorical cells.
fn matrix_diff(
    fm: &FeatureMatrix,
    old: &nalgebra::DMatrix<f64>,
    cols_to_fit: &[usize],
    categorical: &[bool],
) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut changed = 0usize;
    let mut cat_cells = 0usize;
    for &j in cols_to_fit {
        if categorical[j] {
            for r in 0..fm.n_rows() {
                if fm.is_missing(r, j) {
                    cat_cells += 1;
                    if fm.values[(r, j)] != old[(r, j)] {
                        changed += 1;
                    }
                }
            }
        } else {
            for r in 0..fm.n_rows() {
                let gap = fm.values[(r, j)] - old[(r, j)];
                num += gap * gap;
                den += fm.values[(r, j)] * fm.values[(r, j)];
            }
        }
    }
    let mut diff = 0.0;
    if den > 0.0 {
        diff += num / den;
    }
    if cat_cells > 0 {
        diff += changed as f64 / cat_cells as f64;
    }
    diff
}

pub fn impute_missforest(
    train: &Dataset,
    test: &Dataset,
    cfg: &ImputerConfig,
) -> Result<(ImputationResult, ImputationResult)> {
    precheck(train, test, cfg)?;
    let fit_start = Instant::now();

    let mut fm_train = FeatureMatrix::from_dataset(train);
    let fm_test_probe = FeatureMatrix::from_dataset(test);
    let p = fm_train.n_cols();
    let categorical: Vec<bool> =
        fm_train.cols.iter().map(|&c| train.feature(c).is_categorical()).collect();
    let n_classes: Vec<usize> =
        fm_train.cols.iter().map(|&c| train.feature(c).n_categories()).collect();
    let init: Vec<f64> = (0..p)
        .map(|j| {
            if categorical[j] {
                fm_train.observed_mode(j).expect("precheck: train column observed")
            } else {
                fm_train.observed_mean(j).expect("precheck: train column observed")
            }
        })
        .collect();
    fm_train.fill_missing(&init);

    let mut cols_to_fit: Vec<usize> = (0..p)
        .filter(|&j| fm_train.missing_in_col(j) > 0 || fm_test_probe.missing_in_col(j) > 0)
        .collect();
    cols_to_fit.sort_by_key(|&j| (fm_train.missing_in_col(j), j));

    let mut accepted_forests: BTreeMap<usize, Forest> = BTreeMap::new();
    let mut prev_diff = f64::INFINITY;
    for iter in 0..cfg.max_iterations {
        let old_values = fm_train.values.clone();
        let mut forests: BTreeMap<usize, Forest> = BTreeMap::new();
        for &j in &cols_to_fit {
            let rows_obs: Vec<usize> =
                (0..fm_train.n_rows()).filter(|&r| !fm_train.is_missing(r, j)).collect();
            let xs: Vec<Vec<f64>> = rows_obs.iter().map(|&r| regressor_row(&fm_train, r, j)).collect();
            let ys: Vec<f64> = rows_obs.iter().map(|&r| fm_train.values[(r, j)]).collect();
            let task =
                TreeTask { xs: &xs, ys: &ys, categorical: categorical[j], n_classes: n_classes[j] };
            let seeds: Vec<u64> = (0..cfg.n_estimators)
                .map(|t| {
                    derive_seed(
                        cfg.seed,
                        &["missforest", &iter.to_string(), &j.to_string(), &t.to_string()],
                    )
                })
                .collect();
            let forest = fit_forest(&task, &seeds);
            for r in 0..fm_train.n_rows() {
                if fm_train.is_missing(r, j) {
                    let x = regressor_row(&fm_train, r, j);
                    fm_train.values[(r, j)] = forest.predict(&x);
                }
            }
            forests.insert(j, forest);
        }
        let diff = matrix_diff(&fm_train, &old_values, &cols_to_fit, &categorical);
        if diff > prev_diff {
            // The update degraded; keep the previous iterate and its forests.
            fm_train.values = old_values;
            break;
        }
        accepted_forests = forests;
        prev_diff = diff;
        if diff == 0.0 {
            break;
        }
    }
    let fit_runtime = fit_start.elapsed().as_secs_f64();

    let train_result = {
        let start = Instant::now();
        let completed = complete_from_matrix(train, &fm_train);
        let provenance = fm_train
            .missing_cells()
            .into_iter()
            .map(|(r, j)| ((r, fm_train.cols[j]), CellProvenance::Model))
            .collect();
        finalize(train, completed, provenance, fit_runtime, start.elapsed().as_secs_f64())?
    };

    let test_result = {
        let start = Instant::now();
        let mut fm_test = fm_test_probe;
        fm_test.fill_missing(&init);
        for _ in 0..cfg.max_iterations {
            let mut settled = true;
            for &j in &cols_to_fit {
                let Some(forest) = accepted_forests.get(&j) else { continue };
                for r in 0..fm_test.n_rows() {
                    if fm_test.is_missing(r, j) {
                        let x = regressor_row(&fm_test, r, j);
                        let pred = forest.predict(&x);
                        if pred != fm_test.values[(r, j)] {
                            fm_test.values[(r, j)] = pred;
                            settled = false;
                        }
                    }
                }
            }
            if settled {
                break;
            }
        }
        let completed = complete_from_matrix(test, &fm_test);
        let provenance = fm_test
            .missing_cells()
            .into_iter()
            .map(|(r, j)| ((r, fm_test.cols[j]), CellProvenance::Model))
            .collect();
        finalize(test, completed, provenance, 0.0, start.elapsed().as_secs_f64())?
    };

    Ok((train_result, test_result))
}
