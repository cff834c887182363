//! Growing the alternating Boolean tree from a patch graph.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::decompose::{DecomposedPatchSet, MeshDecomposer, PatchDecomposer, SymbolicDecomposer};
use super::{BooleanTree, Node, Op};
use crate::brep::BRepMesh;
use crate::error::{Error, Result};
use crate::graph::{EdgeLabel, PatchGraph};

/// Which blocked patch to decompose next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionPolicy {
    /// Largest `min(#convex, #concave)` inside the current subgraph, lowest id on ties.
    #[default]
    MostMixed,
    Random { seed: u64 },
}

/// Result of tree construction on a mesh.
#[derive(Debug, Clone)]
pub struct Construction {
    /// Leaves carry `slot == patch`; apply a grouping to share slots.
    pub tree: BooleanTree,
    pub patch_set: DecomposedPatchSet,
    /// Input mesh with decomposed patches relabeled (and refined where cut).
    pub mesh: BRepMesh,
    /// Patch graph of `mesh`.
    pub graph: PatchGraph,
}

pub fn construct_tree(graph: &PatchGraph, mesh: &BRepMesh) -> Result<Construction> {
    construct_tree_with(graph, mesh, SelectionPolicy::MostMixed)
}

/// Builds the tree for the patches in `graph`, which must come from `mesh`.
/// Patches of `mesh` missing from `graph` are left out of the tree.
pub fn construct_tree_with(graph: &PatchGraph, mesh: &BRepMesh, policy: SelectionPolicy) -> Result<Construction> {
    let mut dec = MeshDecomposer { mesh: mesh.clone() };
    let (tree, full, parent) = build(graph, &mut dec, policy)?;
    let graph = full.induced(&tree.leaf_patches());
    let patch_set = DecomposedPatchSet::from_mesh(&dec.mesh, parent);
    Ok(Construction { tree, patch_set, mesh: dec.mesh, graph })
}

/// Tree construction on a bare labeled graph. Blocked patches are split
/// symbolically. Returns the tree, the final graph and the parent of every id.
pub fn construct_tree_symbolic(graph: &PatchGraph, policy: SelectionPolicy) -> Result<(BooleanTree, PatchGraph, Vec<u32>)> {
    build(graph, &mut SymbolicDecomposer, policy)
}

fn build(graph: &PatchGraph, dec: &mut dyn PatchDecomposer, policy: SelectionPolicy) -> Result<(BooleanTree, PatchGraph, Vec<u32>)> {
    if graph.vertices.is_empty() {
        return Err(Error::InvalidArgument("empty patch graph".into()));
    }
    let n = graph.vertices.iter().max().map_or(0, |m| m + 1) as usize;
    let mut b = Builder {
        full: graph.clone(),
        parent: (0..n as u32).collect(),
        nodes: vec![Node::Op { op: Op::Min, children: Vec::new() }],
        dec,
        policy,
        rng: ChaCha8Rng::seed_from_u64(match policy {
            SelectionPolicy::Random { seed } => seed,
            SelectionPolicy::MostMixed => 0,
        }),
    };
    let comps: Vec<Vec<u32>> = graph.components().into_iter().map(|c| c.vertices).collect();
    let single = comps.len() == 1;
    for comp in comps {
        b.node(comp, 0, Op::Min)?;
    }
    let Builder { nodes, full, parent, .. } = b;
    Ok((finalize(&nodes, single), full, parent))
}

struct Builder<'a> {
    full: PatchGraph,
    parent: Vec<u32>,
    nodes: Vec<Node>,
    dec: &'a mut dyn PatchDecomposer,
    policy: SelectionPolicy,
    rng: ChaCha8Rng,
}

fn blocking(op: Op) -> EdgeLabel {
    match op {
        Op::Max => EdgeLabel::Concave,
        Op::Min => EdgeLabel::Convex,
    }
}

fn mixedness(g: &PatchGraph, v: u32) -> usize {
    g.label_degree(v, EdgeLabel::Convex).min(g.label_degree(v, EdgeLabel::Concave))
}

impl Builder<'_> {
    fn push(&mut self, node: Node, parent: usize) -> usize {
        self.nodes.push(node);
        let id = self.nodes.len() - 1;
        if let Node::Op { children, .. } = &mut self.nodes[parent] {
            children.push(id);
        }
        id
    }

    fn leaf(&mut self, patch: u32, parent: usize) {
        self.push(Node::Leaf { slot: patch, patch }, parent);
    }

    fn node(&mut self, mut verts: Vec<u32>, parent: usize, parent_op: Op) -> Result<()> {
        let op = parent_op.opposite();
        loop {
            let g = self.full.induced(&verts);
            let q: Vec<u32> = g.vertices.iter().copied().filter(|&v| g.label_degree(v, blocking(op)) == 0).collect();
            if !q.is_empty() {
                let r = self.push(Node::Op { op, children: Vec::new() }, parent);
                for &v in &q {
                    self.leaf(v, r);
                }
                for comp in g.without(&q).components() {
                    self.node(comp.vertices, r, op)?;
                }
                return Ok(());
            }
            if !g.has_label(blocking(parent_op)) {
                if parent != 0 {
                    log::info!("attaching {} patches directly under a {} node", g.vertex_count(), parent_op.name());
                }
                for &v in &g.vertices {
                    self.leaf(v, parent);
                }
                return Ok(());
            }
            let p = self.select(&g)?;
            let ids = self.dec.decompose(&mut self.full, &mut self.parent, p)?;
            log::debug!("decomposed patch {p} into {ids:?}");
            verts.retain(|&v| v != p);
            verts.extend(ids);
        }
    }

    fn select(&mut self, g: &PatchGraph) -> Result<u32> {
        let mixed: Vec<u32> = g.vertices.iter().copied().filter(|&v| mixedness(g, v) > 0).collect();
        if mixed.is_empty() {
            return Err(Error::DecompositionFailure {
                patch: g.vertices[0] as usize,
                reason: "construction is blocked but no patch has a mixed boundary".into(),
            });
        }
        Ok(match self.policy {
            SelectionPolicy::MostMixed => {
                let best = mixed.iter().map(|&v| mixedness(g, v)).max().unwrap();
                *mixed.iter().find(|&&v| mixedness(g, v) == best).unwrap()
            }
            SelectionPolicy::Random { .. } => *mixed.choose(&mut self.rng).unwrap(),
        })
    }
}

/// Copies the reachable tree into a fresh arena, replacing single-leaf
/// operations by the leaf.
fn finalize(nodes: &[Node], single_component: bool) -> BooleanTree {
    fn copy(nodes: &[Node], n: usize, out: &mut Vec<Node>, keep: bool) -> usize {
        match &nodes[n] {
            Node::Leaf { .. } => {
                out.push(nodes[n].clone());
                out.len() - 1
            }
            Node::Op { op, children } => {
                if !keep && children.len() == 1 && matches!(nodes[children[0]], Node::Leaf { .. }) {
                    return copy(nodes, children[0], out, false);
                }
                let id = out.len();
                out.push(Node::Op { op: *op, children: Vec::new() });
                let kids: Vec<usize> = children.iter().map(|&c| copy(nodes, c, out, false)).collect();
                out[id] = Node::Op { op: *op, children: kids };
                id
            }
        }
    }
    let mut out = Vec::with_capacity(nodes.len());
    let root = copy(nodes, 0, &mut out, true);
    let root_children = match &out[root] {
        Node::Op { children, .. } => children.len(),
        Node::Leaf { .. } => 1,
    };
    BooleanTree::new(out, root, single_component && root_children == 1)
}
