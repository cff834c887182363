//! Sharing network outputs between non-adjacent patches.

use std::collections::BTreeSet;

use crate::graph::PatchGraph;

pub const MAX_GROUP_SIZE: usize = 6;

/// Output slot of every patch id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grouping {
    /// Indexed by patch id; `u32::MAX` for ids not in the graph.
    pub slot_of: Vec<u32>,
    pub slot_count: usize,
}

impl Grouping {
    /// Patch ids sharing each slot.
    pub fn groups(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.slot_count];
        for (p, &s) in self.slot_of.iter().enumerate() {
            if s != u32::MAX {
                out[s as usize].push(p as u32);
            }
        }
        out
    }
}

/// Welsh-Powell coloring of the patch adjacency (any label), with at most
/// [`MAX_GROUP_SIZE`] patches per color.
pub fn group_patches(graph: &PatchGraph) -> Grouping {
    let n = graph.vertices.iter().max().map_or(0, |m| m + 1) as usize;
    let mut adj = vec![BTreeSet::new(); n];
    for e in &graph.edges {
        if e.a != e.b {
            adj[e.a as usize].insert(e.b);
            adj[e.b as usize].insert(e.a);
        }
    }
    let mut order = graph.vertices.clone();
    order.sort_by_key(|&v| (std::cmp::Reverse(adj[v as usize].len()), v));
    let mut slot_of = vec![u32::MAX; n];
    let mut sizes: Vec<usize> = Vec::new();
    for v in order {
        let used: BTreeSet<u32> = adj[v as usize].iter().map(|&w| slot_of[w as usize]).collect();
        let c = (0..).find(|&c| !used.contains(&c) && sizes.get(c as usize).is_none_or(|&s| s < MAX_GROUP_SIZE)).unwrap();
        if c as usize == sizes.len() {
            sizes.push(0);
        }
        sizes[c as usize] += 1;
        slot_of[v as usize] = c;
    }
    Grouping { slot_of, slot_count: sizes.len() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::geom::Point3;
    use crate::graph::{build_patch_graph, EdgeLabel};
    use proptest::prelude::*;

    #[test]
    fn cube_uses_opposite_faces() {
        let m = fixtures::cube(Point3::origin(), Point3::new(1.0, 1.0, 1.0));
        let g = group_patches(&build_patch_graph(&m).unwrap());
        assert_eq!(g.slot_count, 3);
        assert_eq!(g.groups(), vec![vec![0, 1], vec![2, 3], vec![4, 5]]);
    }

    #[test]
    fn group_size_is_capped() {
        let g = PatchGraph::from_edges(20, []);
        let grouping = group_patches(&g);
        assert_eq!(grouping.slot_count, 4);
        assert!(grouping.groups().iter().all(|gr| gr.len() <= MAX_GROUP_SIZE));
    }

    #[test]
    fn single_patch_gets_one_slot() {
        let g = group_patches(&PatchGraph::from_edges(1, []));
        assert_eq!(g.slot_of, vec![0]);
        assert_eq!(g.slot_count, 1);
    }

    proptest! {
        #[test]
        fn groups_are_independent_and_small(n in 1usize..30, pairs in proptest::collection::vec((0u32..30, 0u32..30), 0..80)) {
            let edges = pairs.into_iter().filter(|&(a, b)| a != b && (a as usize) < n && (b as usize) < n).map(|(a, b)| (a, b, EdgeLabel::Convex));
            let g = PatchGraph::from_edges(n, edges);
            let grouping = group_patches(&g);
            for e in &g.edges {
                prop_assert_ne!(grouping.slot_of[e.a as usize], grouping.slot_of[e.b as usize]);
            }
            for gr in grouping.groups() {
                prop_assert!(!gr.is_empty() && gr.len() <= MAX_GROUP_SIZE);
            }
        }
    }
}
