//! Finite evidence spaces carrying a preorder disclosure rule.
//!
//! An [`EvidenceSpace`] stores the reflexive-transitive closure of the
//! user-supplied generator edges, the equivalence classes of the preorder,
//! the quotient partial order as class-level bitsets, and its covering
//! (transitive-reduction) edges. Everything is computed eagerly at build
//! time; the space is immutable afterwards and queries are bitset lookups.

use std::collections::{BTreeMap, BTreeSet};

use fixedbitset::FixedBitSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpaceError {
    #[error("duplicate element id `{0}`")]
    DuplicateId(String),
    #[error("edge endpoint `{0}` is not a declared element")]
    DanglingEndpoint(String),
    #[error("unknown element id `{0}`")]
    UnknownId(String),
    #[error("`{0}` is not a subset of the ambient set")]
    NotSubset(String),
    #[error("the queried set must be nonempty")]
    EmptySet,
}

/// A finite set of evidence ids with a preorder `m ⪯ e` ("m is disclosable
/// from e"). Reflexivity and transitivity are enforced by construction.
#[derive(Debug, Clone)]
pub struct EvidenceSpace {
    ids: Vec<String>,
    index: BTreeMap<String, usize>,
    /// element -> equivalence class of the preorder
    class_of: Vec<usize>,
    /// class -> member element indices, ascending
    class_members: Vec<Vec<usize>>,
    /// class -> classes weakly below it (reflexive)
    below: Vec<FixedBitSet>,
    /// class -> classes weakly above it (reflexive)
    above: Vec<FixedBitSet>,
    /// class -> classes it covers (immediately below, transitive reduction)
    covers: Vec<Vec<usize>>,
}

/// Reflexive-transitive closure of `edges` over `elements`, where an edge
/// `(a, b)` declares `a ⪯ b`.
pub fn build_space<S: AsRef<str>, T: AsRef<str>>(
    elements: &[S],
    edges: &[(T, T)],
) -> Result<EvidenceSpace, SpaceError> {
    let n = elements.len();
    let mut ids = Vec::with_capacity(n);
    let mut index = BTreeMap::new();
    for e in elements {
        let id = e.as_ref().to_string();
        if index.insert(id.clone(), ids.len()).is_some() {
            return Err(SpaceError::DuplicateId(id));
        }
        ids.push(id);
    }

    // adj_down[b] lists a with a ⪯ b, so reachability along adj_down is the
    // closure of the generators.
    let mut adj_down: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (lo, hi) in edges {
        let lo = *index
            .get(lo.as_ref())
            .ok_or_else(|| SpaceError::DanglingEndpoint(lo.as_ref().to_string()))?;
        let hi = *index
            .get(hi.as_ref())
            .ok_or_else(|| SpaceError::DanglingEndpoint(hi.as_ref().to_string()))?;
        if lo != hi {
            adj_down[hi].push(lo);
        }
    }
    for row in &mut adj_down {
        row.sort_unstable();
        row.dedup();
    }

    // Tarjan emits sinks of the condensation first, so class k only ever
    // reaches classes with smaller indices along the down arcs.
    let (n_classes, class_of) = tarjan_scc(n, &adj_down);

    let mut class_members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (e, &c) in class_of.iter().enumerate() {
        class_members[c].push(e);
    }

    let mut class_down: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (hi, row) in adj_down.iter().enumerate() {
        for &lo in row {
            let (chi, clo) = (class_of[hi], class_of[lo]);
            if chi != clo {
                class_down[chi].push(clo);
            }
        }
    }
    for row in &mut class_down {
        row.sort_unstable();
        row.dedup();
    }

    let mut below: Vec<FixedBitSet> = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let mut bs = FixedBitSet::with_capacity(n_classes);
        bs.insert(c);
        for &d in &class_down[c] {
            debug_assert!(d < c);
            bs.union_with(&below[d]);
        }
        below.push(bs);
    }

    let mut above = vec![FixedBitSet::with_capacity(n_classes); n_classes];
    for c in 0..n_classes {
        for d in below[c].ones() {
            above[d].insert(c);
        }
    }

    let covers = (0..n_classes)
        .map(|c| {
            let mut strictly_below = below[c].clone();
            strictly_below.remove(c);
            maximal_classes(&strictly_below, &above)
        })
        .collect();

    Ok(EvidenceSpace {
        ids,
        index,
        class_of,
        class_members,
        below,
        above,
        covers,
    })
}

/// Members of `set` with no other member of `set` strictly above them.
fn maximal_classes(set: &FixedBitSet, above: &[FixedBitSet]) -> Vec<usize> {
    let mut out = Vec::new();
    for d in set.ones() {
        let mut up = above[d].clone();
        up.intersect_with(set);
        if up.count_ones(..) == 1 {
            out.push(d);
        }
    }
    out
}

fn tarjan_scc(n: usize, adj: &[Vec<usize>]) -> (usize, Vec<usize>) {
    const UNSET: usize = usize::MAX;
    let mut order = vec![UNSET; n];
    let mut low = vec![0usize; n];
    let mut comp = vec![UNSET; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_order = 0usize;
    let mut n_comp = 0usize;
    // (node, next child index) frames for an iterative DFS
    let mut frames: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if order[root] != UNSET {
            continue;
        }
        frames.push((root, 0));
        order[root] = next_order;
        low[root] = next_order;
        next_order += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut ci)) = frames.last_mut() {
            if *ci < adj[v].len() {
                let w = adj[v][*ci];
                *ci += 1;
                if order[w] == UNSET {
                    order[w] = next_order;
                    low[w] = next_order;
                    next_order += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    frames.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(order[w]);
                }
            } else {
                frames.pop();
                if let Some(&mut (p, _)) = frames.last_mut() {
                    low[p] = low[p].min(low[v]);
                }
                if low[v] == order[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        comp[w] = n_comp;
                        if w == v {
                            break;
                        }
                    }
                    n_comp += 1;
                }
            }
        }
    }
    (n_comp, comp)
}

impl EvidenceSpace {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Element ids in declaration order.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn index_of(&self, id: &str) -> Result<usize, SpaceError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| SpaceError::UnknownId(id.to_string()))
    }

    pub fn id_of(&self, idx: usize) -> &str {
        &self.ids[idx]
    }

    /// `m ⪯ e`?
    pub fn le(&self, m: &str, e: &str) -> Result<bool, SpaceError> {
        let (m, e) = (self.index_of(m)?, self.index_of(e)?);
        Ok(self.le_idx(m, e))
    }

    /// `{m : m ⪯ e for some e ∈ A}`; for a singleton this is `LC(e)`.
    pub fn lower_contour<S: AsRef<str>>(&self, a: &[S]) -> Result<BTreeSet<String>, SpaceError> {
        let classes = self.classes_of_ids(a)?;
        let mut down = FixedBitSet::with_capacity(self.n_classes());
        for c in classes.ones() {
            down.union_with(&self.below[c]);
        }
        Ok(self.classes_to_id_set(&down))
    }

    /// `UC(m) = {e : m ⪯ e}`.
    pub fn upper_contour(&self, m: &str) -> Result<BTreeSet<String>, SpaceError> {
        let c = self.class_of[self.index_of(m)?];
        Ok(self.classes_to_id_set(&self.above[c]))
    }

    /// Elements of `A` with nothing of `A` strictly below them. Nonempty
    /// whenever `A` is.
    pub fn minimal_elements<S: AsRef<str>>(&self, a: &[S]) -> Result<BTreeSet<String>, SpaceError> {
        let classes = self.classes_of_ids(a)?;
        let mut out = BTreeSet::new();
        let members: BTreeSet<usize> = self.indices_of_ids(a)?.into_iter().collect();
        for c in classes.ones() {
            let mut dn = self.below[c].clone();
            dn.intersect_with(&classes);
            if dn.count_ones(..) == 1 {
                for &e in &self.class_members[c] {
                    if members.contains(&e) {
                        out.insert(self.ids[e].clone());
                    }
                }
            }
        }
        Ok(out)
    }

    /// Is `L` a lower contour set in `A`? `L` must be a nonempty subset of `A`.
    pub fn is_lower_contour_in<S: AsRef<str>, T: AsRef<str>>(
        &self,
        l: &[S],
        a: &[T],
    ) -> Result<bool, SpaceError> {
        let l_elems = self.element_bitset(l)?;
        let a_elems = self.element_bitset(a)?;
        if l_elems.count_ones(..) == 0 {
            return Err(SpaceError::EmptySet);
        }
        if !l_elems.is_subset(&a_elems) {
            let offending = l_elems
                .ones()
                .find(|&e| !a_elems.contains(e))
                .map(|e| self.ids[e].clone())
                .unwrap_or_default();
            return Err(SpaceError::NotSubset(offending));
        }
        Ok(self.is_lower_in_idx(&l_elems, &a_elems))
    }

    /// Partition of the elements into maximal comparability-connected sets.
    pub fn connected_components(&self) -> Vec<BTreeSet<String>> {
        let nc = self.n_classes();
        let mut undirected: Vec<Vec<usize>> = vec![Vec::new(); nc];
        for (c, cov) in self.covers.iter().enumerate() {
            for &d in cov {
                undirected[c].push(d);
                undirected[d].push(c);
            }
        }
        let mut seen = vec![false; nc];
        let mut out = Vec::new();
        for start in 0..nc {
            if seen[start] {
                continue;
            }
            let mut queue = vec![start];
            seen[start] = true;
            let mut comp = BTreeSet::new();
            while let Some(c) = queue.pop() {
                for &e in &self.class_members[c] {
                    comp.insert(self.ids[e].clone());
                }
                for &d in &undirected[c] {
                    if !seen[d] {
                        seen[d] = true;
                        queue.push(d);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    // ----- index-level machinery used by the solver -----

    pub(crate) fn n_classes(&self) -> usize {
        self.class_members.len()
    }

    pub(crate) fn class_of_idx(&self, e: usize) -> usize {
        self.class_of[e]
    }

    pub(crate) fn class_members_idx(&self, c: usize) -> &[usize] {
        &self.class_members[c]
    }

    pub(crate) fn le_idx(&self, m: usize, e: usize) -> bool {
        self.below[self.class_of[e]].contains(self.class_of[m])
    }

    pub(crate) fn covers_of(&self, c: usize) -> &[usize] {
        &self.covers[c]
    }

    /// Lower-closedness of an element set inside another element set.
    pub(crate) fn is_lower_in_idx(&self, l_elems: &FixedBitSet, a_elems: &FixedBitSet) -> bool {
        debug_assert!(l_elems.is_subset(a_elems));
        let l_classes = self.classes_of_elements(l_elems);
        let mut reach = FixedBitSet::with_capacity(self.n_classes());
        for c in l_classes.ones() {
            reach.union_with(&self.below[c]);
        }
        for c in reach.ones() {
            for &e in &self.class_members[c] {
                if a_elems.contains(e) && !l_elems.contains(e) {
                    return false;
                }
            }
        }
        true
    }

    pub(crate) fn classes_of_elements(&self, elems: &FixedBitSet) -> FixedBitSet {
        let mut classes = FixedBitSet::with_capacity(self.n_classes());
        for e in elems.ones() {
            classes.insert(self.class_of[e]);
        }
        classes
    }

    pub(crate) fn element_bitset<S: AsRef<str>>(
        &self,
        ids: &[S],
    ) -> Result<FixedBitSet, SpaceError> {
        let mut bs = FixedBitSet::with_capacity(self.len());
        for id in ids {
            bs.insert(self.index_of(id.as_ref())?);
        }
        Ok(bs)
    }

    pub(crate) fn full_element_bitset(&self) -> FixedBitSet {
        let mut bs = FixedBitSet::with_capacity(self.len());
        bs.insert_range(..);
        bs
    }

    pub(crate) fn ids_of_elements(&self, elems: &FixedBitSet) -> BTreeSet<String> {
        elems.ones().map(|e| self.ids[e].clone()).collect()
    }

    /// The restriction to `elems` is order-convex when no absent class sits
    /// strictly between two present ones. Upper sets, lower sets and their
    /// differences all qualify; the solver only ever restricts to such sets,
    /// but callers may pass anything.
    pub(crate) fn is_convex_elements(&self, elems: &FixedBitSet) -> bool {
        let classes = self.classes_of_elements(elems);
        for c in 0..self.n_classes() {
            if classes.contains(c) {
                continue;
            }
            let mut dn = self.below[c].clone();
            dn.intersect_with(&classes);
            if dn.count_ones(..) == 0 {
                continue;
            }
            let mut up = self.above[c].clone();
            up.intersect_with(&classes);
            if up.count_ones(..) > 0 {
                return false;
            }
        }
        true
    }

    /// Arc list `(hi_class, lo_class)` generating the order restricted to the
    /// classes meeting `elems`. Uses precomputed covers when the restriction
    /// is order-convex, otherwise recomputes maximal-below sets.
    pub(crate) fn restriction_arcs(&self, elems: &FixedBitSet) -> Vec<(usize, usize)> {
        let classes = self.classes_of_elements(elems);
        let mut arcs = Vec::new();
        if self.is_convex_elements(elems) {
            for c in classes.ones() {
                for &d in &self.covers[c] {
                    if classes.contains(d) {
                        arcs.push((c, d));
                    }
                }
            }
        } else {
            for c in classes.ones() {
                let mut sb = self.below[c].clone();
                sb.remove(c);
                sb.intersect_with(&classes);
                for d in maximal_classes(&sb, &self.above) {
                    arcs.push((c, d));
                }
            }
        }
        arcs
    }

    fn classes_of_ids<S: AsRef<str>>(&self, ids: &[S]) -> Result<FixedBitSet, SpaceError> {
        let mut classes = FixedBitSet::with_capacity(self.n_classes());
        for id in ids {
            classes.insert(self.class_of[self.index_of(id.as_ref())?]);
        }
        Ok(classes)
    }

    fn indices_of_ids<S: AsRef<str>>(&self, ids: &[S]) -> Result<Vec<usize>, SpaceError> {
        ids.iter().map(|id| self.index_of(id.as_ref())).collect()
    }

    fn classes_to_id_set(&self, classes: &FixedBitSet) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for c in classes.ones() {
            for &e in &self.class_members[c] {
                out.insert(self.ids[e].clone());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(set: &BTreeSet<String>) -> Vec<&str> {
        set.iter().map(|s| s.as_str()).collect()
    }

    fn chain3() -> EvidenceSpace {
        build_space(&["0", "1", "2"], &[("0", "1"), ("1", "2")]).unwrap()
    }

    fn dye() -> EvidenceSpace {
        build_space(&["e0", "e1", "e2"], &[("e0", "e1"), ("e0", "e2")]).unwrap()
    }

    #[test]
    fn singleton_is_reflexive() {
        let s = build_space(&["a"], &[] as &[(&str, &str)]).unwrap();
        assert!(s.le("a", "a").unwrap());
        assert_eq!(ids(&s.lower_contour(&["a"]).unwrap()), vec!["a"]);
    }

    #[test]
    fn chain_closure_is_transitive() {
        let s = chain3();
        assert!(s.le("0", "2").unwrap());
        assert!(!s.le("2", "0").unwrap());
    }

    #[test]
    fn two_cycle_makes_an_equivalence_class() {
        let s = build_space(&["x", "y"], &[("x", "y"), ("y", "x")]).unwrap();
        assert!(s.le("x", "y").unwrap());
        assert!(s.le("y", "x").unwrap());
        assert_eq!(s.n_classes(), 1);
        assert_eq!(
            ids(&s.minimal_elements(&["x", "y"]).unwrap()),
            vec!["x", "y"]
        );
    }

    #[test]
    fn build_rejects_duplicates_and_dangling_edges() {
        assert_eq!(
            build_space(&["a", "a"], &[] as &[(&str, &str)]),
            Err(SpaceError::DuplicateId("a".into()))
        );
        assert_eq!(
            build_space(&["a"], &[("a", "b")]),
            Err(SpaceError::DanglingEndpoint("b".into()))
        );
    }

    #[test]
    fn lower_contour_examples() {
        let s = chain3();
        assert_eq!(ids(&s.lower_contour(&["2"]).unwrap()), vec!["0", "1", "2"]);
        let d = dye();
        assert_eq!(ids(&d.lower_contour(&["e1"]).unwrap()), vec!["e0", "e1"]);
        assert!(s.lower_contour(&[] as &[&str]).unwrap().is_empty());
        assert_eq!(
            s.lower_contour(&["9"]),
            Err(SpaceError::UnknownId("9".into()))
        );
    }

    #[test]
    fn upper_contour_examples() {
        let s = chain3();
        assert_eq!(ids(&s.upper_contour("1").unwrap()), vec!["1", "2"]);
        let d = dye();
        assert_eq!(ids(&d.upper_contour("e0").unwrap()), vec!["e0", "e1", "e2"]);
        assert_eq!(ids(&s.upper_contour("2").unwrap()), vec!["2"]);
    }

    #[test]
    fn minimal_elements_examples() {
        let s = chain3();
        assert_eq!(ids(&s.minimal_elements(&["1", "2"]).unwrap()), vec!["1"]);
        let d = dye();
        assert_eq!(
            ids(&d.minimal_elements(&["e1", "e2"]).unwrap()),
            vec!["e1", "e2"]
        );
    }

    #[test]
    fn lower_contour_in_examples() {
        let s = chain3();
        let all = ["0", "1", "2"];
        assert!(s.is_lower_contour_in(&["0"], &all).unwrap());
        assert!(!s.is_lower_contour_in(&["1"], &all).unwrap());
        let d = dye();
        assert!(d
            .is_lower_contour_in(&["e0", "e2"], &["e0", "e1", "e2"])
            .unwrap());
        assert_eq!(
            d.is_lower_contour_in(&["e1"], &["e0"]),
            Err(SpaceError::NotSubset("e1".into()))
        );
        assert_eq!(
            d.is_lower_contour_in(&[] as &[&str], &["e0"]),
            Err(SpaceError::EmptySet)
        );
    }

    #[test]
    fn connected_components_examples() {
        assert_eq!(chain3().connected_components().len(), 1);
        assert_eq!(dye().connected_components().len(), 1);
        let two = build_space(&["a", "b", "c", "d"], &[("a", "b"), ("c", "d")]).unwrap();
        let comps = two.connected_components();
        assert_eq!(comps.len(), 2);
    }

    #[test]
    fn covers_skip_transitive_edges() {
        let s = build_space(&["0", "1", "2"], &[("0", "1"), ("1", "2"), ("0", "2")]).unwrap();
        let top = s.class_of[s.index_of("2").unwrap()];
        let mid = s.class_of[s.index_of("1").unwrap()];
        assert_eq!(s.covers_of(top), &[mid]);
    }

    #[test]
    fn restriction_arcs_respect_gaps() {
        // 0 ⪯ 1 ⪯ 2 restricted to {0, 2} still forces 0 below 2.
        let s = chain3();
        let elems = s.element_bitset(&["0", "2"]).unwrap();
        assert!(!s.is_convex_elements(&elems));
        let arcs = s.restriction_arcs(&elems);
        let c0 = s.class_of[0];
        let c2 = s.class_of[2];
        assert_eq!(arcs, vec![(c2, c0)]);
    }

    #[test]
    fn convexity_detects_upper_and_split_sets() {
        let s = chain3();
        let upper = s.element_bitset(&["1", "2"]).unwrap();
        assert!(s.is_convex_elements(&upper));
        let gap = s.element_bitset(&["0", "2"]).unwrap();
        assert!(!s.is_convex_elements(&gap));
    }
}
