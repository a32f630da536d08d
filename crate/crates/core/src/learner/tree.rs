use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    Entropy,
}

impl Criterion {
    fn impurity(self, counts: &[u32], n: u32) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let n = n as f64;
        match self {
            Criterion::Gini => 1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>(),
            Criterion::Entropy => -counts
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| {
                    let p = c as f64 / n;
                    p * p.ln()
                })
                .sum::<f64>(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: Vec<u32>,
    },
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeParams {
    pub criterion: Criterion,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features examined per split.
    pub max_features: usize,
}

/// CART classification tree stored as a flat node array, root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    /// Grows a tree on the rows listed in `samples` (repeats allowed).
    pub(crate) fn fit<R: Rng>(
        x: &[Vec<f64>],
        y: &[usize],
        n_classes: usize,
        samples: Vec<usize>,
        params: &TreeParams,
        rng: &mut R,
    ) -> Self {
        let n_features = x.first().map_or(0, Vec::len);
        let mut nodes = Vec::new();
        // (node slot, samples of that node)
        let mut stack = vec![(0usize, samples)];
        nodes.push(Node::Leaf { counts: Vec::new() });
        let mut order: Vec<usize> = (0..n_features).collect();
        while let Some((slot, idx)) = stack.pop() {
            let counts = class_counts(y, &idx, n_classes);
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let split = if pure || idx.len() < params.min_samples_split || idx.len() < 2 * params.min_samples_leaf {
                None
            } else {
                order.shuffle(rng);
                best_split(x, y, &idx, &counts, &order, params)
            };
            match split {
                None => nodes[slot] = Node::Leaf { counts },
                Some((feature, threshold)) => {
                    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][feature] <= threshold);
                    let left = nodes.len();
                    nodes.push(Node::Leaf { counts: Vec::new() });
                    nodes.push(Node::Leaf { counts: Vec::new() });
                    nodes[slot] = Node::Split {
                        feature,
                        threshold,
                        left,
                        right: left + 1,
                    };
                    stack.push((left + 1, r));
                    stack.push((left, l));
                }
            }
        }
        DecisionTree { nodes }
    }

    pub fn leaf(&self, row: &[f64]) -> &[u32] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { counts } => return counts,
            }
        }
    }

    /// Features tested by at least one split.
    pub fn used_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf { .. } => None,
        })
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

fn class_counts(y: &[usize], idx: &[usize], n_classes: usize) -> Vec<u32> {
    let mut counts = vec![0u32; n_classes];
    for &i in idx {
        counts[y[i]] += 1;
    }
    counts
}

/// Best (feature, threshold) among the first `max_features` entries of
/// `order`; later features are tried only while no valid split was found.
fn best_split(
    x: &[Vec<f64>],
    y: &[usize],
    idx: &[usize],
    counts: &[u32],
    order: &[usize],
    params: &TreeParams,
) -> Option<(usize, f64)> {
    let n = idx.len();
    let min_leaf = params.min_samples_leaf;
    let mut best: Option<(f64, usize, f64)> = None;
    let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(n);
    for (tried, &f) in order.iter().enumerate() {
        if tried >= params.max_features && best.is_some() {
            break;
        }
        pairs.clear();
        pairs.extend(idx.iter().map(|&i| (x[i][f], y[i])));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = vec![0u32; counts.len()];
        let mut right = counts.to_vec();
        for i in 1..n {
            let c = pairs[i - 1].1;
            left[c] += 1;
            right[c] -= 1;
            if pairs[i - 1].0 == pairs[i].0 || i < min_leaf || n - i < min_leaf {
                continue;
            }
            let score = i as f64 * params.criterion.impurity(&left, i as u32)
                + (n - i) as f64 * params.criterion.impurity(&right, (n - i) as u32);
            if best.is_none_or(|(b, _, _)| score < b - 1e-12) {
                let (lo, hi) = (pairs[i - 1].0, pairs[i].0);
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                best = Some((score, f, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(max_features: usize) -> TreeParams {
        TreeParams {
            criterion: Criterion::Gini,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features,
        }
    }

    fn predict(tree: &DecisionTree, row: &[f64]) -> usize {
        let c = tree.leaf(row);
        (0..c.len()).max_by_key(|&i| (c[i], std::cmp::Reverse(i))).unwrap()
    }

    /// Exhaustive best gini stump over a single feature.
    fn oracle_stump(v: &[f64], y: &[usize]) -> f64 {
        let mut cands: Vec<f64> = v.to_vec();
        cands.sort_by(f64::total_cmp);
        cands.dedup();
        let gini = |ys: &[usize]| {
            if ys.is_empty() {
                return 0.0;
            }
            let p = ys.iter().filter(|&&c| c == 1).count() as f64 / ys.len() as f64;
            1.0 - p * p - (1.0 - p) * (1.0 - p)
        };
        let mut best = (f64::INFINITY, 0.0);
        for w in cands.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let l: Vec<usize> = (0..v.len()).filter(|&i| v[i] <= t).map(|i| y[i]).collect();
            let r: Vec<usize> = (0..v.len()).filter(|&i| v[i] > t).map(|i| y[i]).collect();
            let s = l.len() as f64 * gini(&l) + r.len() as f64 * gini(&r);
            if s < best.0 {
                best = (s, t);
            }
        }
        best.1
    }

    #[test]
    fn stump_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..20 {
            let n = 8 + trial % 12;
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
            let cut = rng.random_range(2.0..8.0);
            let y: Vec<usize> = v.iter().map(|&a| usize::from(a > cut)).collect();
            if y.iter().all(|&c| c == y[0]) {
                continue;
            }
            let x: Vec<Vec<f64>> = v.iter().map(|&a| vec![a]).collect();
            let tree = DecisionTree::fit(&x, &y, 2, (0..n).collect(), &params(1), &mut rng);
            assert_eq!(tree.nodes.len(), 3);
            match tree.nodes[0] {
                Node::Split { threshold, .. } => assert!((threshold - oracle_stump(&v, &y)).abs() < 1e-12),
                _ => panic!("expected a split"),
            }
        }
    }

    #[test]
    fn fits_xor_exactly() {
        let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y = vec![0, 1, 1, 0];
        let tree = DecisionTree::fit(&x, &y, 2, (0..4).collect(), &params(2), &mut ChaCha8Rng::seed_from_u64(0));
        for (row, &c) in x.iter().zip(&y) {
            assert_eq!(predict(&tree, row), c);
        }
    }

    #[test]
    fn leaves_hold_routed_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
        let y: Vec<usize> = (0..50).map(|_| rng.random_range(0..3)).collect();
        let p = TreeParams {
            criterion: Criterion::Entropy,
            min_samples_split: 6,
            min_samples_leaf: 3,
            max_features: 1,
        };
        let tree = DecisionTree::fit(&x, &y, 3, (0..50).collect(), &p, &mut rng);
        let total: u32 = tree
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { counts } => Some(counts.iter().sum::<u32>()),
                _ => None,
            })
            .sum();
        assert_eq!(total, 50);
        for n in &tree.nodes {
            if let Node::Leaf { counts } = n {
                assert!(counts.iter().sum::<u32>() >= 3);
            }
        }
    }

    #[test]
    fn constant_features_give_a_leaf() {
        let x = vec![vec![1.0]; 6];
        let y = vec![0, 1, 0, 1, 0, 1];
        let tree = DecisionTree::fit(&x, &y, 2, (0..6).collect(), &params(1), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(tree.nodes, vec![Node::Leaf { counts: vec![3, 3] }]);
    }
}
