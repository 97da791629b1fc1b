//! Structure-only tree-edit-distance similarity (TEDS-S).
//!
//! Tables are compared as ordered labelled trees `table > tbody > tr > td`
//! where a node label is its tag plus its row and column span. The distance
//! is the Zhang-Shasha keyroot dynamic program; the similarity is
//! `1 - distance / max(|a|, |b|)`.

use serde::Serialize;

use crate::convert::{HtmlTagSequence, TagName};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct NodeLabel {
    pub tag: TagName,
    pub rowspan: u32,
    pub colspan: u32,
}

impl NodeLabel {
    pub fn tag(tag: TagName) -> Self {
        Self {
            tag,
            rowspan: 1,
            colspan: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TreeNode {
    pub label: NodeLabel,
    pub children: Vec<TreeNode>,
}

impl TreeNode {
    pub fn leaf(label: NodeLabel) -> Self {
        Self {
            label,
            children: Vec::new(),
        }
    }

    pub fn new(label: NodeLabel, children: Vec<TreeNode>) -> Self {
        Self { label, children }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(TreeNode::size).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TableTree {
    root: TreeNode,
    size: usize,
}

impl TableTree {
    /// Wraps an arbitrary ordered tree. [`build_tree`] is the way to get a
    /// table-shaped one.
    pub fn from_root(root: TreeNode) -> Self {
        let size = root.size();
        Self { root, size }
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

/// Builds the tree for a structure sequence, dropping the `html` wrapper.
pub fn build_tree(tags: &HtmlTagSequence) -> Result<TableTree> {
    let rows = tags.rows()?;
    let trs = rows
        .into_iter()
        .map(|row| {
            let tds = row
                .into_iter()
                .map(|cell| {
                    TreeNode::leaf(NodeLabel {
                        tag: TagName::Td,
                        rowspan: cell.rowspan,
                        colspan: cell.colspan,
                    })
                })
                .collect();
            TreeNode::new(NodeLabel::tag(TagName::Tr), tds)
        })
        .collect();
    let tbody = TreeNode::new(NodeLabel::tag(TagName::Tbody), trs);
    Ok(TableTree::from_root(TreeNode::new(
        NodeLabel::tag(TagName::Table),
        vec![tbody],
    )))
}

/// Unit-cost edit model: relabelling is free between identical labels
/// (same tag and spans).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EditCostModel {
    pub insert: f64,
    pub delete: f64,
    pub substitute: f64,
}

impl Default for EditCostModel {
    fn default() -> Self {
        Self {
            insert: 1.0,
            delete: 1.0,
            substitute: 1.0,
        }
    }
}

impl EditCostModel {
    pub fn relabel(&self, a: &NodeLabel, b: &NodeLabel) -> f64 {
        if a == b {
            0.0
        } else {
            self.substitute
        }
    }
}

/// Post-order view of a tree used by the dynamic program.
struct PostOrder<'a> {
    labels: Vec<&'a NodeLabel>,
    /// Post-order index of each node's leftmost leaf descendant.
    leftmost: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a> PostOrder<'a> {
    fn new(root: &'a TreeNode) -> Self {
        let mut labels = Vec::new();
        let mut leftmost = Vec::new();
        // Iterative post-order: (node, next child index, leftmost leaf).
        let mut stack: Vec<(&TreeNode, usize, Option<usize>)> = vec![(root, 0, None)];
        while let Some((node, child, lml)) = stack.last_mut() {
            if let Some(next) = node.children.get(*child) {
                *child += 1;
                stack.push((next, 0, None));
                continue;
            }
            let index = labels.len();
            let leaf = lml.unwrap_or(index);
            labels.push(&node.label);
            leftmost.push(leaf);
            stack.pop();
            if let Some((_, 1, parent_lml)) = stack.last_mut() {
                *parent_lml = Some(leaf);
            }
        }
        let n = labels.len();
        let mut seen = vec![false; n];
        let mut keyroots = Vec::new();
        for i in (0..n).rev() {
            if !seen[leftmost[i]] {
                seen[leftmost[i]] = true;
                keyroots.push(i);
            }
        }
        keyroots.reverse();
        Self {
            labels,
            leftmost,
            keyroots,
        }
    }
}

/// Minimum-cost edit script between two ordered labelled trees.
pub fn tree_edit_distance(a: &TableTree, b: &TableTree, costs: &EditCostModel) -> f64 {
    if a == b {
        return 0.0;
    }
    let ta = PostOrder::new(&a.root);
    let tb = PostOrder::new(&b.root);
    let (n, m) = (ta.labels.len(), tb.labels.len());
    let mut treedist = vec![0.0f64; n * m];
    let mut forest = vec![0.0f64; (n + 1) * (m + 1)];

    for &i in &ta.keyroots {
        for &j in &tb.keyroots {
            let (li, lj) = (ta.leftmost[i], tb.leftmost[j]);
            let cols = j - lj + 2;
            let fd = |x: usize, y: usize| x * cols + y;
            forest[fd(0, 0)] = 0.0;
            for x in 1..=i - li + 1 {
                forest[fd(x, 0)] = forest[fd(x - 1, 0)] + costs.delete;
            }
            for y in 1..=j - lj + 1 {
                forest[fd(0, y)] = forest[fd(0, y - 1)] + costs.insert;
            }
            for x in li..=i {
                let xi = x - li + 1;
                for y in lj..=j {
                    let yi = y - lj + 1;
                    let del = forest[fd(xi - 1, yi)] + costs.delete;
                    let ins = forest[fd(xi, yi - 1)] + costs.insert;
                    let value = if ta.leftmost[x] == li && tb.leftmost[y] == lj {
                        let sub =
                            forest[fd(xi - 1, yi - 1)] + costs.relabel(ta.labels[x], tb.labels[y]);
                        let v = del.min(ins).min(sub);
                        treedist[x * m + y] = v;
                        v
                    } else {
                        let p = ta.leftmost[x] - li;
                        let q = tb.leftmost[y] - lj;
                        del.min(ins).min(forest[fd(p, q)] + treedist[x * m + y])
                    };
                    forest[fd(xi, yi)] = value;
                }
            }
        }
    }
    treedist[(n - 1) * m + (m - 1)]
}

/// Similarity of two trees in `[0, 1]` under unit costs.
pub fn teds_trees(a: &TableTree, b: &TableTree) -> f64 {
    let d = tree_edit_distance(a, b, &EditCostModel::default());
    let size = a.size().max(b.size()) as f64;
    (1.0 - d / size).clamp(0.0, 1.0)
}

/// TEDS-S between a ground-truth and a predicted structure sequence.
pub fn teds_s(gt: &HtmlTagSequence, pred: &HtmlTagSequence) -> Result<f64> {
    Ok(teds_trees(&build_tree(gt)?, &build_tree(pred)?))
}
