use crate::dsl::{Literal, RuleId, Span};
use serde::{Deserialize, Serialize};

/// One body literal of a firing rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofLeaf {
    pub literal: Literal,
    pub edge_weight: f64,
    /// Truth degree contributed by the facts (1 for a satisfied negation).
    pub fact_weight: f64,
    /// Leaf activation: t-norm of edge and fact weight.
    #[serde(rename = "weight")]
    pub activation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched: Option<Literal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleNode {
    pub id: RuleId,
    pub activation: f64,
    pub leaves: Vec<ProofLeaf>,
}

/// Derivation of one hypothesis: root → firing rules → leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofTree {
    pub hypothesis: Literal,
    pub rules: Vec<RuleNode>,
    pub confidence: f64,
}

impl ProofTree {
    pub fn new(hypothesis: Literal, rules: Vec<RuleNode>) -> Self {
        let mut tree = Self { hypothesis, rules, confidence: 0.0 };
        tree.confidence = confidence(&tree);
        tree
    }

    pub fn leaf_count(&self) -> usize {
        self.rules.iter().map(|r| r.leaves.len()).sum()
    }

    /// Product of leaf activations along every root-to-leaf path.
    pub fn path_products(&self) -> Vec<f64> {
        let mut out = Vec::new();
        walk(&Node::Root(self), 1.0, &mut out);
        out
    }
}

enum Node<'a> {
    Root(&'a ProofTree),
    Rule(&'a RuleNode),
    Leaf(&'a ProofLeaf),
}

impl Node<'_> {
    fn children(&self) -> Vec<Node<'_>> {
        match self {
            Node::Root(t) => t.rules.iter().map(Node::Rule).collect(),
            Node::Rule(r) => r.leaves.iter().map(Node::Leaf).collect(),
            Node::Leaf(_) => Vec::new(),
        }
    }

    /// Only literal nodes carry a factor on a path.
    fn factor(&self) -> f64 {
        match self {
            Node::Leaf(l) => l.activation,
            _ => 1.0,
        }
    }

    fn is_root(&self) -> bool {
        matches!(self, Node::Root(_))
    }
}

fn walk(node: &Node<'_>, acc: f64, out: &mut Vec<f64>) {
    let acc = acc * node.factor();
    let children = node.children();
    if children.is_empty() {
        if !node.is_root() {
            out.push(acc);
        }
        return;
    }
    for c in &children {
        walk(c, acc, out);
    }
}

/// Sum over all root-to-leaf paths of the product of leaf activations on
/// the path. An empty tree has confidence 0.
pub fn confidence(tree: &ProofTree) -> f64 {
    tree.path_products().iter().sum()
}
