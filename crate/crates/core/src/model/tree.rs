//! Binary decision trees and their ensembles.

use crate::error::{Error, Result};

/// One node of a binary decision tree.
///
/// Internal nodes route `x[feature] <= threshold` to `left`, otherwise to
/// `right`. Leaves carry one value per class.
#[derive(Debug, Clone)]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { values: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    /// Walk from the root (node 0) to a leaf and return its per-class values.
    pub fn evaluate(&self, x: &[f64]) -> &[f64] {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*feature] <= *threshold { *left } else { *right };
                }
                TreeNode::Leaf { values } => return values,
            }
        }
    }
}

/// How per-tree leaf values combine into ensemble scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    Sum,
    Mean,
}

/// An ensemble of binary decision trees (random-forest or boosted style).
#[derive(Debug, Clone)]
pub struct TreeEnsemble {
    trees: Vec<DecisionTree>,
    aggregation: Aggregation,
    n_features: usize,
    n_classes: usize,
}

impl TreeEnsemble {
    pub fn new(
        trees: Vec<DecisionTree>,
        aggregation: Aggregation,
        n_features: usize,
        n_classes: usize,
    ) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::schema("trees", "ensemble needs at least one tree"));
        }
        if n_features == 0 || n_classes == 0 {
            return Err(Error::schema("n_features", "counts must be positive"));
        }
        for (t, tree) in trees.iter().enumerate() {
            validate_tree(tree, t, n_features, n_classes)?;
        }
        Ok(Self {
            trees,
            aggregation,
            n_features,
            n_classes,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn aggregation(&self) -> Aggregation {
        self.aggregation
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_classes];
        for tree in &self.trees {
            for (o, v) in out.iter_mut().zip(tree.evaluate(x)) {
                *o += v;
            }
        }
        if self.aggregation == Aggregation::Mean {
            let k = self.trees.len() as f64;
            for o in &mut out {
                *o /= k;
            }
        }
        out
    }
}

/// Reject out-of-range feature indices, dangling or cyclic child links, and
/// ragged leaves. Every node must be reachable-safe: walking any path from
/// the root terminates at a leaf.
fn validate_tree(
    tree: &DecisionTree,
    tree_idx: usize,
    n_features: usize,
    n_classes: usize,
) -> Result<()> {
    let path = |node: usize, field: &str| format!("trees[{tree_idx}].nodes[{node}].{field}");
    if tree.nodes.is_empty() {
        return Err(Error::schema(format!("trees[{tree_idx}].nodes"), "empty tree"));
    }
    for (i, node) in tree.nodes.iter().enumerate() {
        match node {
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                if *feature >= n_features {
                    return Err(Error::schema(
                        path(i, "feature"),
                        format!("feature {feature} >= n_features {n_features}"),
                    ));
                }
                if !threshold.is_finite() {
                    return Err(Error::schema(path(i, "threshold"), "non-finite threshold"));
                }
                for (field, child) in [("left", *left), ("right", *right)] {
                    if child >= tree.nodes.len() {
                        return Err(Error::schema(
                            path(i, field),
                            format!("child index {child} out of range"),
                        ));
                    }
                }
            }
            TreeNode::Leaf { values } => {
                if values.len() != n_classes {
                    return Err(Error::schema(
                        path(i, "leaf"),
                        format!("expected {} leaf values, got {}", n_classes, values.len()),
                    ));
                }
                if !values.iter().all(|v| v.is_finite()) {
                    return Err(Error::schema(path(i, "leaf"), "non-finite leaf value"));
                }
            }
        }
    }
    // Cycle / termination check: DFS from the root; a node revisited on the
    // current stack means a cycle.
    let mut state = vec![0u8; tree.nodes.len()]; // 0 unvisited, 1 on stack, 2 done
    let mut stack = vec![(0usize, false)];
    while let Some((node, leaving)) = stack.pop() {
        if leaving {
            state[node] = 2;
            continue;
        }
        if state[node] == 1 {
            return Err(Error::schema(
                path(node, "children"),
                "cycle in child indices",
            ));
        }
        if state[node] == 2 {
            continue;
        }
        state[node] = 1;
        stack.push((node, true));
        if let TreeNode::Internal { left, right, .. } = &tree.nodes[node] {
            stack.push((*left, false));
            stack.push((*right, false));
        }
    }
    Ok(())
}
