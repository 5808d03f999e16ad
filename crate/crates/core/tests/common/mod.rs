//! Exhaustive CART oracle shared by the oracle tests and the acceptance suite.
#![allow(dead_code)]

use leakprobe::forest::{fit, ForestConfig};
use leakprobe::probes::FeatureMatrix;
use leakprobe::rng::Stream;
use num_rational::Ratio;

pub enum OracleNode {
    Split { feature: usize, threshold: f64, left: Box<OracleNode>, right: Box<OracleNode> },
    Leaf(usize),
}

fn gini(labels: &[usize], k: usize) -> Ratio<i128> {
    let n = labels.len() as i128;
    let mut g = Ratio::from_integer(1);
    for c in 0..k {
        let cnt = labels.iter().filter(|&&l| l == c).count() as i128;
        g -= Ratio::new(cnt * cnt, n * n);
    }
    g
}

/// Tries every feature and every midpoint at every node; keeps the first
/// strictly lowest weighted Gini in (feature, threshold) order.
pub fn oracle(x: &[Vec<f64>], y: &[usize], k: usize, rows: &[usize]) -> OracleNode {
    let labels: Vec<usize> = rows.iter().map(|&r| y[r]).collect();
    let mut counts = vec![0usize; k];
    for &l in &labels {
        counts[l] += 1;
    }
    let majority = (0..k).fold(0, |b, c| if counts[c] > counts[b] { c } else { b });
    if rows.len() < 2 || counts.iter().filter(|&&c| c > 0).count() == 1 {
        return OracleNode::Leaf(majority);
    }
    let n = rows.len() as i128;
    let mut best: Option<(Ratio<i128>, usize, f64)> = None;
    #[allow(clippy::needless_range_loop)]
    for f in 0..x[0].len() {
        let mut values: Vec<f64> = rows.iter().map(|&r| x[r][f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][f] <= t);
            let ll: Vec<usize> = l.iter().map(|&i| y[i]).collect();
            let rl: Vec<usize> = r.iter().map(|&i| y[i]).collect();
            let score = Ratio::new(ll.len() as i128, n) * gini(&ll, k)
                + Ratio::new(rl.len() as i128, n) * gini(&rl, k);
            if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
                best = Some((score, f, t));
            }
        }
    }
    match best {
        None => OracleNode::Leaf(majority),
        Some((_, f, t)) => {
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][f] <= t);
            OracleNode::Split {
                feature: f,
                threshold: t,
                left: Box::new(oracle(x, y, k, &l)),
                right: Box::new(oracle(x, y, k, &r)),
            }
        }
    }
}

pub fn oracle_predict(node: &OracleNode, row: &[f64]) -> usize {
    match node {
        OracleNode::Leaf(c) => *c,
        OracleNode::Split { feature, threshold, left, right } => {
            if row[*feature] <= *threshold {
                oracle_predict(left, row)
            } else {
                oracle_predict(right, row)
            }
        }
    }
}

/// Predictions of the oracle and of a single full-feature, no-bootstrap tree
/// on the training rows.
pub fn compare(x: &[Vec<f64>], y: &[usize], k: usize) -> (Vec<usize>, Vec<usize>) {
    let d = x[0].len();
    let m = FeatureMatrix::new(d, x.concat(), y.to_vec(), k).unwrap();
    let cfg = ForestConfig { n_trees: 1, bootstrap: false, max_features: Some(d), ..ForestConfig::default() };
    let model = fit(&m, &cfg).unwrap();
    let rows: Vec<usize> = (0..x.len()).collect();
    let tree = oracle(x, y, k, &rows);
    let ours = model.predict_matrix(&m).unwrap();
    let theirs = x.iter().map(|r| oracle_predict(&tree, r)).collect();
    (ours, theirs)
}

/// Small random dataset with at least two classes; values come from a coarse
/// grid so duplicates and ties are common.
pub fn random_dataset(rng: &mut Stream) -> (Vec<Vec<f64>>, Vec<usize>, usize) {
    loop {
        let n = 2 + rng.below(29);
        let d = 1 + rng.below(3);
        let k = 2 + rng.below(2);
        let grid = 2 + rng.below(6);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.below(grid) as f64 * 0.5).collect())
            .collect();
        let y: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
        if y.iter().any(|&l| l != y[0]) {
            return (x, y, k);
        }
    }
}

