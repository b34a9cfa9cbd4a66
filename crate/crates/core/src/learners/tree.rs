//! Univariate decision trees grown by gain ratio and pruned pessimistically.
//!
//! Numeric features are tested with binary `A_i > b` tests whose cut point
//! `b` is the best midpoint between adjacent observed values at a class
//! boundary. Categorical features branch once per declared category.
//!
//! Missing values: a candidate test is scored on the instances whose value is
//! known, and its gain ratio is scaled by the known fraction. Instances with a
//! missing value follow the branch holding the most known instances (ties to
//! the lower branch index), both when growing and when classifying.
//!
//! Pruning replaces a subtree with a leaf when the leaf's estimated errors do
//! not exceed the sum over the subtree's leaves. The estimate for a node with
//! `n` instances and `e` training errors is `n * U(e, n)`, where `U` is the
//! exact one-sided binomial upper confidence limit at confidence level `cf`:
//! the `p` with `P(X <= e | n, p) = cf`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use super::{argmax_first, Classifier};
use crate::data::{Dataset, FeatureKind, Instance, Value};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BranchTest {
    /// Branch 0 when `value <= threshold`, branch 1 when `value > threshold`.
    Threshold(f64),
    /// One branch per category index.
    Categories(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        class: usize,
        counts: Vec<usize>,
    },
    Test {
        feature: usize,
        test: BranchTest,
        counts: Vec<usize>,
        /// Training instances routed to each branch.
        branch_sizes: Vec<usize>,
        children: Vec<Node>,
    },
}

impl Node {
    pub fn leaf_count(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Test { children, .. } => children.iter().map(Node::leaf_count).sum(),
        }
    }

    pub fn test_count(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Test { children, .. } => 1 + children.iter().map(Node::test_count).sum::<usize>(),
        }
    }

    fn counts(&self) -> &[usize] {
        match self {
            Node::Leaf { counts, .. } | Node::Test { counts, .. } => counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub root: Node,
}

impl TreeModel {
    /// Grow to purity, then prune at `confidence`.
    pub fn train(ds: &Dataset, confidence: f64, min_node_instances: usize) -> Self {
        Self::grow(ds, min_node_instances).pruned(confidence)
    }

    /// Unpruned tree.
    pub fn grow(ds: &Dataset, min_node_instances: usize) -> Self {
        let grower = Grower {
            ds,
            kinds: ds.feature_kinds(),
            min_node: min_node_instances,
        };
        let all: Vec<usize> = (0..ds.len()).collect();
        let root = grower.grow(&all, 0);
        TreeModel { root }
    }

    pub fn pruned(&self, confidence: f64) -> Self {
        let mut cache = HashMap::new();
        let (root, _) = prune(&self.root, confidence, &mut cache);
        TreeModel { root }
    }

    pub fn leaf_count(&self) -> usize {
        self.root.leaf_count()
    }
}

impl Classifier for TreeModel {
    fn classify(&self, x: &Instance) -> usize {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { class, .. } => return *class,
                Node::Test {
                    feature,
                    test,
                    branch_sizes,
                    children,
                    ..
                } => {
                    let branch = route(*test, x.features[*feature])
                        .filter(|&b| b < children.len())
                        .unwrap_or_else(|| argmax_first(branch_sizes));
                    node = &children[branch];
                }
            }
        }
    }
}

/// Branch for a value, `None` when the value is missing or does not fit the
/// test (treated as missing).
fn route(test: BranchTest, v: Option<Value>) -> Option<usize> {
    match (test, v?) {
        (BranchTest::Threshold(b), Value::Numeric(x)) => Some(usize::from(x > b)),
        (BranchTest::Categories(n), Value::Category(c)) if c < n => Some(c),
        _ => None,
    }
}

fn class_counts(ds: &Dataset, idx: &[usize]) -> Vec<usize> {
    let mut c = vec![0; ds.class_count()];
    for &i in idx {
        c[ds.instances()[i].label] += 1;
    }
    c
}

struct Grower<'a> {
    ds: &'a Dataset,
    kinds: Vec<FeatureKind>,
    min_node: usize,
}

struct Candidate {
    feature: usize,
    test: BranchTest,
    score: f64,
}

impl Grower<'_> {
    fn grow(&self, idx: &[usize], parent_class: usize) -> Node {
        let counts = class_counts(self.ds, idx);
        if idx.is_empty() {
            return Node::Leaf {
                class: parent_class,
                counts,
            };
        }
        let class = argmax_first(&counts);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || idx.len() < self.min_node {
            return Node::Leaf { class, counts };
        }
        let Some(best) = self.best_candidate(idx) else {
            return Node::Leaf { class, counts };
        };

        let nb = match best.test {
            BranchTest::Threshold(_) => 2,
            BranchTest::Categories(n) => n,
        };
        let mut parts: Vec<Vec<usize>> = vec![Vec::new(); nb];
        let mut missing = Vec::new();
        for &i in idx {
            match route(best.test, self.ds.instances()[i].features[best.feature]) {
                Some(b) => parts[b].push(i),
                None => missing.push(i),
            }
        }
        let sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
        let target = argmax_first(&sizes);
        parts[target].extend(missing);
        parts[target].sort_unstable();
        let branch_sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
        let children = parts.iter().map(|p| self.grow(p, class)).collect();
        Node::Test {
            feature: best.feature,
            test: best.test,
            counts,
            branch_sizes,
            children,
        }
    }

    fn best_candidate(&self, idx: &[usize]) -> Option<Candidate> {
        let r = self.ds.class_count();
        let mut best: Option<Candidate> = None;
        for (f, kind) in self.kinds.iter().enumerate() {
            let cand = match *kind {
                FeatureKind::Numeric => {
                    let known: Vec<(f64, usize)> = idx
                        .iter()
                        .filter_map(|&i| {
                            let inst = &self.ds.instances()[i];
                            inst.features[f]
                                .and_then(Value::as_numeric)
                                .map(|v| (v, inst.label))
                        })
                        .collect();
                    let frac = known.len() as f64 / idx.len() as f64;
                    best_cut_point_values(&known, r).map(|(b, gr)| Candidate {
                        feature: f,
                        test: BranchTest::Threshold(b),
                        score: gr * frac,
                    })
                }
                FeatureKind::Categorical { levels } => {
                    let mut branches = vec![vec![0usize; r]; levels];
                    let mut known = 0usize;
                    for &i in idx {
                        let inst = &self.ds.instances()[i];
                        if let Some(c) = inst.features[f].and_then(Value::as_category) {
                            branches[c][inst.label] += 1;
                            known += 1;
                        }
                    }
                    let frac = known as f64 / idx.len() as f64;
                    gain_ratio(&branches).map(|gr| Candidate {
                        feature: f,
                        test: BranchTest::Categories(levels),
                        score: gr * frac,
                    })
                }
            };
            if let Some(c) = cand {
                if best.as_ref().is_none_or(|b| c.score > b.score) {
                    best = Some(c);
                }
            }
        }
        best
    }
}

/// `sum(c * log2 c)` over a count vector.
fn c_log_c(counts: impl IntoIterator<Item = usize>) -> f64 {
    counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let c = c as f64;
            c * c.log2()
        })
        .sum()
}

/// Gain ratio (in bits) of a partition given per-branch class counts.
///
/// Returns `None` when fewer than two branches are non-empty, since the split
/// information is then zero.
pub fn gain_ratio(branch_counts: &[Vec<usize>]) -> Option<f64> {
    let sizes: Vec<usize> = branch_counts.iter().map(|b| b.iter().sum()).collect();
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return None;
    }
    let n: usize = sizes.iter().sum();
    let nf = n as f64;
    let r = branch_counts.iter().map(Vec::len).max().unwrap_or(0);
    let mut totals = vec![0usize; r];
    for b in branch_counts {
        for (t, c) in totals.iter_mut().zip(b) {
            *t += c;
        }
    }
    // H(class) = log2 n - sum(c log2 c)/n, and likewise for each branch.
    let prior = nf.log2() - c_log_c(totals) / nf;
    let posterior: f64 = branch_counts
        .iter()
        .zip(&sizes)
        .filter(|(_, &s)| s > 0)
        .map(|(b, &s)| {
            let sf = s as f64;
            (sf / nf) * (sf.log2() - c_log_c(b.iter().copied()) / sf)
        })
        .sum();
    let split_info = nf.log2() - c_log_c(sizes) / nf;
    let gain = (prior - posterior).max(0.0);
    Some((gain / split_info).min(1.0))
}

/// Best `A > b` cut over `(value, label)` pairs: only midpoints between
/// adjacent distinct values at a class boundary are considered. Returns
/// `(b, gain_ratio)`; ties keep the smallest `b`.
pub fn best_cut_point_values(pairs: &[(f64, usize)], class_count: usize) -> Option<(f64, f64)> {
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Group equal values: (value, class counts).
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for &(v, l) in &sorted {
        match groups.last_mut() {
            Some((gv, counts)) if *gv == v => counts[l] += 1,
            _ => {
                let mut counts = vec![0; class_count];
                counts[l] += 1;
                groups.push((v, counts));
            }
        }
    }
    if groups.len() < 2 {
        return None;
    }

    let mut total = vec![0usize; class_count];
    for (_, c) in &groups {
        for (t, x) in total.iter_mut().zip(c) {
            *t += x;
        }
    }
    let single_class = |c: &[usize]| {
        let mut nz = c.iter().enumerate().filter(|(_, &x)| x > 0);
        match (nz.next(), nz.next()) {
            (Some((k, _)), None) => Some(k),
            _ => None,
        }
    };

    let mut left = vec![0usize; class_count];
    let mut best: Option<(f64, f64)> = None;
    for w in 0..groups.len() - 1 {
        for (l, x) in left.iter_mut().zip(&groups[w].1) {
            *l += x;
        }
        let (lo, hi) = (&groups[w], &groups[w + 1]);
        let boundary = match (single_class(&lo.1), single_class(&hi.1)) {
            (Some(a), Some(b)) => a != b,
            _ => true,
        };
        if !boundary {
            continue;
        }
        let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
        let Some(score) = gain_ratio(&[left.clone(), right]) else {
            continue;
        };
        let mut mid = lo.0 + (hi.0 - lo.0) / 2.0;
        if mid >= hi.0 {
            mid = lo.0;
        }
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((mid, score));
        }
    }
    best
}

/// [`best_cut_point_values`] over one numeric feature of a dataset, ignoring
/// missing values.
pub fn best_cut_point(ds: &Dataset, feature: usize) -> Option<(f64, f64)> {
    let pairs: Vec<(f64, usize)> = ds
        .instances()
        .iter()
        .filter_map(|i| {
            i.features[feature]
                .and_then(Value::as_numeric)
                .map(|v| (v, i.label))
        })
        .collect();
    best_cut_point_values(&pairs, ds.class_count())
}

/// Upper confidence limit on the error proportion of a node with `n`
/// instances and `e` errors: the `p` solving `P(X <= e | n, p) = cf`.
pub fn pessimistic_error_bound(n: usize, e: usize, cf: f64) -> f64 {
    if n == 0 || e >= n {
        return 1.0;
    }
    if e == 0 {
        return 1.0 - cf.powf(1.0 / n as f64);
    }
    // P(X <= e) = I_{1-p}(n - e, e + 1), decreasing in p.
    let cdf = |p: f64| beta_reg((n - e) as f64, (e + 1) as f64, 1.0 - p);
    let (mut lo, mut hi) = (e as f64 / n as f64, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) > cf {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn estimated_errors(counts: &[usize], cf: f64, cache: &mut HashMap<(usize, usize), f64>) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let e = n - counts.iter().copied().max().unwrap_or(0);
    let u = *cache
        .entry((n, e))
        .or_insert_with(|| pessimistic_error_bound(n, e, cf));
    n as f64 * u
}

fn prune(node: &Node, cf: f64, cache: &mut HashMap<(usize, usize), f64>) -> (Node, f64) {
    match node {
        Node::Leaf { counts, .. } => (node.clone(), estimated_errors(counts, cf, cache)),
        Node::Test {
            feature,
            test,
            counts,
            branch_sizes,
            children,
        } => {
            let mut pruned = Vec::with_capacity(children.len());
            let mut subtree = 0.0;
            for c in children {
                let (p, e) = prune(c, cf, cache);
                subtree += e;
                pruned.push(p);
            }
            let as_leaf = estimated_errors(counts, cf, cache);
            if as_leaf <= subtree {
                let class = argmax_first(node.counts());
                (
                    Node::Leaf {
                        class,
                        counts: counts.clone(),
                    },
                    as_leaf,
                )
            } else {
                (
                    Node::Test {
                        feature: *feature,
                        test: *test,
                        counts: counts.clone(),
                        branch_sizes: branch_sizes.clone(),
                        children: pruned,
                    },
                    subtree,
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, Schema};
    use approx::assert_abs_diff_eq;

    /// Entropy in bits of a label list, computed directly.
    fn entropy(labels: &[usize]) -> f64 {
        let n = labels.len() as f64;
        let mut seen: Vec<usize> = labels.to_vec();
        seen.sort();
        seen.dedup();
        -seen
            .iter()
            .map(|c| {
                let p = labels.iter().filter(|&&l| l == *c).count() as f64 / n;
                p * p.log2()
            })
            .sum::<f64>()
    }

    /// Gain ratio of a labelled partition by the textbook definition.
    fn oracle_gain_ratio(parts: &[Vec<usize>]) -> f64 {
        let all: Vec<usize> = parts.concat();
        let n = all.len() as f64;
        let cond: f64 = parts.iter().map(|p| p.len() as f64 / n * entropy(p)).sum();
        let split: f64 = -parts
            .iter()
            .filter(|p| !p.is_empty())
            .map(|p| {
                let w = p.len() as f64 / n;
                w * w.log2()
            })
            .sum::<f64>();
        (entropy(&all) - cond) / split
    }

    fn counts_of(parts: &[Vec<usize>], r: usize) -> Vec<Vec<usize>> {
        parts
            .iter()
            .map(|p| {
                let mut c = vec![0; r];
                p.iter().for_each(|&l| c[l] += 1);
                c
            })
            .collect()
    }

    #[test]
    fn gain_ratio_examples() {
        // Perfect separation of [A,A,B,B]: gain = split info = 1 bit.
        let perfect = vec![vec![0, 0], vec![1, 1]];
        assert_abs_diff_eq!(oracle_gain_ratio(&perfect), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            gain_ratio(&counts_of(&perfect, 2)).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        // {A,B},{A,B}: branch entropies equal the prior.
        let mixed = vec![vec![0, 1], vec![0, 1]];
        assert_abs_diff_eq!(oracle_gain_ratio(&mixed), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            gain_ratio(&counts_of(&mixed, 2)).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        // Single class.
        assert_eq!(gain_ratio(&[vec![3, 0], vec![2, 0]]), Some(0.0));
        // Single non-empty branch is rejected.
        assert_eq!(gain_ratio(&[vec![3, 1], vec![0, 0]]), None);
    }

    #[test]
    fn gain_ratio_matches_oracle_on_uneven_partition() {
        let parts = vec![vec![0, 0, 1], vec![1, 1, 2, 2, 0], vec![2]];
        assert_abs_diff_eq!(
            gain_ratio(&counts_of(&parts, 3)).unwrap(),
            oracle_gain_ratio(&parts),
            epsilon = 1e-12
        );
    }

    #[test]
    fn cut_point_examples() {
        let (b, s) = best_cut_point_values(&[(1.0, 0), (2.0, 0), (3.0, 1), (4.0, 1)], 2).unwrap();
        assert_eq!(b, 2.5);
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-15);
        assert_eq!(
            best_cut_point_values(&[(1.0, 0), (2.0, 0), (3.0, 0)], 2),
            None
        );
        let (b, _) = best_cut_point_values(&[(1.0, 0), (1.0, 1), (2.0, 1)], 2).unwrap();
        assert_eq!(b, 1.5);
        assert_eq!(best_cut_point_values(&[(1.0, 0), (1.0, 1)], 2), None);
    }

    #[test]
    fn bound_closed_forms() {
        // e = 0: (1-p)^n = cf.
        assert_abs_diff_eq!(pessimistic_error_bound(1, 0, 0.1), 0.9, epsilon = 1e-12);
        // n = 2, e = 1: 1 - p^2 = cf.
        assert_abs_diff_eq!(
            pessimistic_error_bound(2, 1, 0.1),
            0.9f64.sqrt(),
            epsilon = 1e-12
        );
        assert_eq!(pessimistic_error_bound(3, 3, 0.1), 1.0);
        // Monotone in e.
        let a = pessimistic_error_bound(20, 2, 0.1);
        let b = pessimistic_error_bound(20, 5, 0.1);
        assert!(a < b && a > 0.1);
    }

    fn xy_dataset(points: &[(f64, f64, usize)]) -> Dataset {
        let schema = Schema::new(
            vec![
                Column::numeric("x"),
                Column::numeric("y"),
                Column::categorical("c", ["A", "B"]),
            ],
            "c",
        )
        .unwrap();
        Dataset::new(
            schema,
            points
                .iter()
                .map(|&(x, y, c)| Instance::numeric(&[x, y], c))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn pure_dataset_is_single_leaf() {
        let ds = xy_dataset(&[(0.0, 0.0, 1), (1.0, 2.0, 1), (3.0, 1.0, 1)]);
        let t = TreeModel::train(&ds, 0.1, 2);
        assert_eq!(t.leaf_count(), 1);
        assert_eq!(t.classify(&Instance::numeric(&[9.0, 9.0], 0)), 1);
    }

    #[test]
    fn xor_needs_two_levels_before_pruning() {
        let ds = xy_dataset(&[(0.0, 0.0, 0), (1.0, 1.0, 0), (0.0, 1.0, 1), (1.0, 0.0, 1)]);
        let grown = TreeModel::grow(&ds, 2);
        assert!(grown.root.test_count() >= 2);
        for inst in ds.instances() {
            assert_eq!(grown.classify(inst), inst.label);
        }
        assert!(grown.pruned(0.1).leaf_count() <= grown.leaf_count());
    }

    #[test]
    fn threshold_and_missing_routing() {
        let tree = TreeModel {
            root: Node::Test {
                feature: 0,
                test: BranchTest::Threshold(2.5),
                counts: vec![7, 3],
                branch_sizes: vec![7, 3],
                children: vec![
                    Node::Leaf {
                        class: 0,
                        counts: vec![7, 0],
                    },
                    Node::Leaf {
                        class: 1,
                        counts: vec![0, 3],
                    },
                ],
            },
        };
        assert_eq!(tree.classify(&Instance::numeric(&[3.0], 0)), 1);
        assert_eq!(tree.classify(&Instance::numeric(&[2.5], 0)), 0);
        assert_eq!(tree.classify(&Instance::new(vec![None], 0)), 0);
        assert_eq!(tree.leaf_count(), 2);
    }

    #[test]
    fn unseen_category_treated_as_missing() {
        let tree = TreeModel {
            root: Node::Test {
                feature: 0,
                test: BranchTest::Categories(2),
                counts: vec![2, 5],
                branch_sizes: vec![2, 5],
                children: vec![
                    Node::Leaf {
                        class: 0,
                        counts: vec![2, 0],
                    },
                    Node::Leaf {
                        class: 1,
                        counts: vec![0, 5],
                    },
                ],
            },
        };
        assert_eq!(
            tree.classify(&Instance::new(vec![Some(Value::Category(7))], 0)),
            1
        );
        assert_eq!(
            tree.classify(&Instance::new(vec![Some(Value::Category(0))], 0)),
            0
        );
    }

    #[test]
    fn categorical_split_with_missing_values() {
        let schema = Schema::new(
            vec![
                Column::categorical("f", ["u", "v", "w"]),
                Column::categorical("c", ["A", "B"]),
            ],
            "c",
        )
        .unwrap();
        let cat = |c: Option<usize>, l| Instance::new(vec![c.map(Value::Category)], l);
        let ds = Dataset::new(
            schema,
            vec![
                cat(Some(0), 0),
                cat(Some(0), 0),
                cat(Some(1), 1),
                cat(Some(1), 1),
                cat(None, 0),
            ],
        )
        .unwrap();
        let t = TreeModel::grow(&ds, 2);
        match &t.root {
            Node::Test {
                branch_sizes,
                children,
                ..
            } => {
                // Missing joins the larger known branch (tie -> branch 0).
                assert_eq!(branch_sizes, &vec![3, 2, 0]);
                assert_eq!(children.len(), 3);
            }
            n => panic!("expected a test, got {n:?}"),
        }
        assert_eq!(t.classify(&cat(Some(1), 0)), 1);
        // Empty branch inherits the parent's majority.
        assert_eq!(t.classify(&cat(Some(2), 1)), 0);
    }
}
