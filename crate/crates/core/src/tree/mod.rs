//! Alternating max/min Boolean trees over implicit-function slots.
//!
//! Expressions use prefix notation: `max(f0,min(f1,f2))`. A leaf `f<k>`
//! reads slot `k` of the network output.

mod construct;
mod decompose;
mod grouping;
mod maxflow;

use std::fmt;

pub use construct::{construct_tree, construct_tree_symbolic, construct_tree_with, Construction, SelectionPolicy};
pub use decompose::{decompose_patch, DecomposedPatchSet, MeshDecomposer, PatchDecomposer, SymbolicDecomposer};
pub use grouping::{group_patches, Grouping, MAX_GROUP_SIZE};
pub use maxflow::MaxFlow;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Max,
    Min,
}

impl Op {
    pub fn opposite(self) -> Op {
        match self {
            Op::Max => Op::Min,
            Op::Min => Op::Max,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Op::Max => "max",
            Op::Min => "min",
        }
    }

    /// Whether `a` beats `b` strictly under this operation.
    #[inline]
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Op::Max => a > b,
            Op::Min => a < b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Op { op: Op, children: Vec<usize> },
    /// `slot` indexes the network output; `patch` is the (sub)patch it was built from.
    Leaf { slot: u32, patch: u32 },
}

/// Arena-backed Boolean tree. A virtual root (a MIN node with a single
/// child, created when the solid is connected) is kept in the arena but
/// never serialized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BooleanTree {
    nodes: Vec<Node>,
    root: usize,
    virtual_root: bool,
    /// Leaf node ids in depth-first order; a leaf's index here is its leaf id.
    leaves: Vec<usize>,
}

impl BooleanTree {
    pub fn new(nodes: Vec<Node>, root: usize, virtual_root: bool) -> Self {
        let mut t = Self { nodes, root, virtual_root, leaves: Vec::new() };
        t.leaves = t.dfs_leaves();
        t
    }

    pub fn single_leaf(slot: u32) -> Self {
        Self::new(vec![Node::Leaf { slot, patch: slot }], 0, false)
    }

    fn dfs_leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            match &self.nodes[n] {
                Node::Leaf { .. } => out.push(n),
                Node::Op { children, .. } => stack.extend(children.iter().rev()),
            }
        }
        out
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn has_virtual_root(&self) -> bool {
        self.virtual_root
    }

    /// The arena root, including a virtual root when present.
    pub fn arena_root(&self) -> usize {
        self.root
    }

    /// The first node that appears in the serialized form.
    pub fn root(&self) -> usize {
        if self.virtual_root {
            match &self.nodes[self.root] {
                Node::Op { children, .. } if children.len() == 1 => children[0],
                _ => self.root,
            }
        } else {
            self.root
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    /// Slot read by each leaf, in leaf order.
    pub fn leaf_slots(&self) -> Vec<u32> {
        self.leaves.iter().map(|&n| self.leaf(n).0).collect()
    }

    /// (Sub)patch of each leaf, in leaf order.
    pub fn leaf_patches(&self) -> Vec<u32> {
        self.leaves.iter().map(|&n| self.leaf(n).1).collect()
    }

    pub fn leaf_slot(&self, leaf: usize) -> u32 {
        self.leaf(self.leaves[leaf]).0
    }

    fn leaf(&self, n: usize) -> (u32, u32) {
        match self.nodes[n] {
            Node::Leaf { slot, patch } => (slot, patch),
            Node::Op { .. } => unreachable!("not a leaf"),
        }
    }

    /// Number of network outputs the tree reads: one more than the largest slot.
    pub fn slot_count(&self) -> usize {
        self.leaf_slots().iter().map(|&s| s as usize + 1).max().unwrap_or(0)
    }

    /// True when no node has a child carrying the same operation.
    pub fn is_alternating(&self) -> bool {
        self.nodes.iter().all(|n| match n {
            Node::Op { op, children } => children.iter().all(|&c| !matches!(self.nodes[c], Node::Op { op: o, .. } if o == *op)),
            Node::Leaf { .. } => true,
        })
    }

    /// Value of the composition and the id of the leaf whose value reaches
    /// the root. Ties resolve to the lowest leaf id.
    pub fn evaluate(&self, values: &[f64]) -> Result<(f64, usize)> {
        let n = self.slot_count();
        if values.len() != n {
            return Err(Error::ArityMismatch { expected: n, got: values.len() });
        }
        Ok(self.evaluate_unchecked(values))
    }

    /// [`evaluate`](Self::evaluate) without the arity check.
    pub fn evaluate_unchecked(&self, values: &[f64]) -> (f64, usize) {
        let mut next_leaf = 0;
        self.eval_node(self.root, values, &mut next_leaf)
    }

    fn eval_node(&self, n: usize, values: &[f64], next_leaf: &mut usize) -> (f64, usize) {
        match &self.nodes[n] {
            Node::Leaf { slot, .. } => {
                let id = *next_leaf;
                *next_leaf += 1;
                (values[*slot as usize], id)
            }
            Node::Op { op, children } => {
                let mut best = self.eval_node(children[0], values, next_leaf);
                for &c in &children[1..] {
                    let v = self.eval_node(c, values, next_leaf);
                    if op.better(v.0, best.0) {
                        best = v;
                    }
                }
                best
            }
        }
    }

    /// Copy with every leaf's slot replaced by `slot_of[patch]`.
    pub fn with_slots(&self, slot_of: &[u32]) -> BooleanTree {
        let nodes = self
            .nodes
            .iter()
            .map(|n| match *n {
                Node::Leaf { patch, .. } => Node::Leaf { slot: slot_of[patch as usize], patch },
                ref op => op.clone(),
            })
            .collect();
        BooleanTree::new(nodes, self.root, self.virtual_root)
    }

    /// Canonical expression string.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        self.write_node(self.root(), &mut s);
        s
    }

    fn write_node(&self, n: usize, s: &mut String) {
        match &self.nodes[n] {
            Node::Leaf { slot, .. } => {
                s.push('f');
                s.push_str(&slot.to_string());
            }
            Node::Op { op, children } => {
                s.push_str(op.name());
                s.push('(');
                for (i, &c) in children.iter().enumerate() {
                    if i > 0 {
                        s.push(',');
                    }
                    self.write_node(c, s);
                }
                s.push(')');
            }
        }
    }

    /// Parses a canonical expression. Leaves get `patch == slot`. Rejects
    /// single-child operations and an operation nested directly in the same one.
    pub fn parse(text: &str) -> Result<BooleanTree> {
        let src: Vec<u8> = text.bytes().filter(|b| !b.is_ascii_whitespace()).collect();
        let mut p = Parser { src: &src, pos: 0, nodes: Vec::new() };
        let root = p.node(None)?;
        if p.pos != src.len() {
            return Err(p.err("trailing characters"));
        }
        Ok(BooleanTree::new(p.nodes, root, false))
    }
}

impl fmt::Display for BooleanTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

impl std::str::FromStr for BooleanTree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BooleanTree::parse(s)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    nodes: Vec<Node>,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { line: 1, message: format!("tree expression, column {}: {msg}", self.pos + 1) }
    }

    fn eat(&mut self, tok: &[u8]) -> bool {
        if self.src[self.pos..].starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn node(&mut self, parent_op: Option<Op>) -> Result<usize> {
        if self.eat(b"f") {
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let slot: u32 = digits.parse().map_err(|_| self.err("expected a slot number after `f`"))?;
            self.nodes.push(Node::Leaf { slot, patch: slot });
            return Ok(self.nodes.len() - 1);
        }
        let op = if self.eat(b"max(") {
            Op::Max
        } else if self.eat(b"min(") {
            Op::Min
        } else {
            return Err(self.err("expected `max(`, `min(` or `f<k>`"));
        };
        if parent_op == Some(op) {
            return Err(self.err("operation nested directly in the same operation"));
        }
        let mut children = vec![self.node(Some(op))?];
        loop {
            if self.eat(b",") {
                children.push(self.node(Some(op))?);
            } else if self.eat(b")") {
                break;
            } else {
                return Err(self.err("expected `,` or `)`"));
            }
        }
        if children.len() < 2 {
            return Err(self.err("operation needs at least two operands"));
        }
        self.nodes.push(Node::Op { op, children });
        Ok(self.nodes.len() - 1)
    }
}
