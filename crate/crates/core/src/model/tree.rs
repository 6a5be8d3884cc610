use serde::{Deserialize, Serialize};

/// Flat binary tree. A node with `feature < 0` is a leaf; rows with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub feature: i32,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
    pub value: Vec<f64>,
}

impl Node {
    pub fn leaf(value: Vec<f64>) -> Self {
        Node { feature: -1, threshold: 0.0, left: 0, right: 0, value }
    }

    pub fn is_leaf(&self) -> bool {
        self.feature < 0
    }
}

impl Tree {
    pub fn leaf_for(&self, x: &[f64]) -> &[f64] {
        let mut i = 0usize;
        loop {
            let n = &self.nodes[i];
            if n.is_leaf() {
                return &n.value;
            }
            i = if x[n.feature as usize] <= n.threshold { n.left } else { n.right } as usize;
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            let n = &t.nodes[i];
            if n.is_leaf() {
                0
            } else {
                1 + walk(t, n.left as usize).max(walk(t, n.right as usize))
            }
        }
        walk(self, 0)
    }

    /// Features referenced by any split.
    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self.nodes.iter().filter(|n| !n.is_leaf()).map(|n| n.feature as usize).collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}
