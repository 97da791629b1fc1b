//! Test-only helpers: a brute-force tree edit distance and random inputs.
#![allow(dead_code)]

use std::collections::HashMap;

use otslkit::convert::TagName;
use otslkit::dataset::SampleRecord;
use otslkit::otsl::{random_valid, OtslMatrix};
use otslkit::teds::{NodeLabel, TableTree, TreeNode};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Straight recursion on ordered forests, memoized on the forest pair.
///
/// With `v`, `w` the rightmost roots of `f` and `g`:
/// `d(f, g) = min(d(f - v, g) + 1, d(f, g - w) + 1,
///                d(f - tree(v), g - tree(w)) + d(kids(v), kids(w)) + [v != w])`
pub fn brute_force_distance(a: &TableTree, b: &TableTree) -> f64 {
    let mut memo = HashMap::new();
    forest_distance(&[a.root().clone()], &[b.root().clone()], &mut memo) as f64
}

fn forest_size(f: &[TreeNode]) -> usize {
    f.iter().map(TreeNode::size).sum()
}

fn forest_distance(
    f: &[TreeNode],
    g: &[TreeNode],
    memo: &mut HashMap<(Vec<TreeNode>, Vec<TreeNode>), usize>,
) -> usize {
    if f.is_empty() {
        return forest_size(g);
    }
    if g.is_empty() {
        return forest_size(f);
    }
    let key = (f.to_vec(), g.to_vec());
    if let Some(&d) = memo.get(&key) {
        return d;
    }
    let (v, f_rest) = f.split_last().unwrap();
    let (w, g_rest) = g.split_last().unwrap();

    let mut f_minus_v = f_rest.to_vec();
    f_minus_v.extend(v.children.iter().cloned());
    let mut g_minus_w = g_rest.to_vec();
    g_minus_w.extend(w.children.iter().cloned());

    let delete = forest_distance(&f_minus_v, g, memo) + 1;
    let insert = forest_distance(f, &g_minus_w, memo) + 1;
    let matched = forest_distance(f_rest, g_rest, memo)
        + forest_distance(&v.children, &w.children, memo)
        + usize::from(v.label != w.label);
    let d = delete.min(insert).min(matched);
    memo.insert(key, d);
    d
}

/// Oracle similarity, written out independently of the library.
pub fn brute_force_teds(a: &TableTree, b: &TableTree) -> f64 {
    let n = a.size().max(b.size()) as f64;
    1.0 - brute_force_distance(a, b) / n
}

const TAGS: [TagName; 4] = [TagName::Table, TagName::Tbody, TagName::Tr, TagName::Td];

fn random_label(rng: &mut impl Rng) -> NodeLabel {
    NodeLabel {
        tag: TAGS[rng.gen_range(0..TAGS.len())],
        rowspan: rng.gen_range(1..=2),
        colspan: rng.gen_range(1..=2),
    }
}

/// A random ordered tree of exactly `n` nodes built by attaching each new
/// node to a uniformly chosen earlier node.
pub fn random_tree(rng: &mut impl Rng, n: usize) -> TableTree {
    assert!(n >= 1);
    let labels: Vec<NodeLabel> = (0..n).map(|_| random_label(rng)).collect();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 1..n {
        let parent = rng.gen_range(0..i);
        children[parent].push(i);
    }
    fn build(i: usize, labels: &[NodeLabel], children: &[Vec<usize>]) -> TreeNode {
        TreeNode::new(
            labels[i],
            children[i]
                .iter()
                .map(|&c| build(c, labels, children))
                .collect(),
        )
    }
    TableTree::from_root(build(0, &labels, &children))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random valid table with up to `max` rows and columns.
pub fn random_table(rng: &mut impl Rng, max: usize, span_prob: f64) -> OtslMatrix {
    let rows = rng.gen_range(1..=max);
    let cols = rng.gen_range(1..=max);
    random_valid(rows, cols, rng.gen(), span_prob, 0.2).unwrap()
}

/// Records with `pred_otsl = gt_otsl` and the true grid supplied.
pub fn oracle_records(seed: u64, count: usize, max: usize) -> Vec<SampleRecord> {
    let mut rng = rng(seed);
    let languages = ["english", "hindi", "bengali", "telugu", "chinese"];
    (0..count)
        .map(|i| {
            let m = random_table(&mut rng, max, 0.3);
            let otsl = m.serialize();
            let mut r = SampleRecord::new(format!("rec{i:04}"));
            r.gt_otsl = Some(otsl.clone());
            r.pred_otsl = Some(otsl);
            r.gt_grid = Some((m.rows(), m.cols()));
            r.language = Some(languages[i % languages.len()].to_string());
            r
        })
        .collect()
}
