//! Minimizing ν over nonempty lower contour sets of a sub-poset.
//!
//! The inner step is the classic closure reduction: the largest lower-closed
//! set minimizing a modular weight is read off a sink-side-maximal min cut.
//! Around it runs a Dinkelbach iteration on the odds form of ν, which keeps
//! every comparison rational-exact and terminates because each round strictly
//! lowers the attained ν over a finite lattice.

use std::collections::{BTreeMap, BTreeSet};

use fixedbitset::FixedBitSet;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::flow::FlowNetwork;
use crate::game::GameSpec;
use crate::oracle::OracleBudget;
use crate::poset::{EvidenceSpace, SpaceError};
use crate::rat::Rational;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OptError {
    #[error("the query set must be nonempty")]
    EmptySet,
    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Result of a lower-set minimization: the minimal ν, the largest minimizer
/// (every other minimizer is a subset of it), and the Dinkelbach round count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinimizerResult {
    pub value: Rational,
    pub largest_min: BTreeSet<String>,
    pub iterations: usize,
}

/// The order structure of an element set, grouped into class fragments.
/// Lower contour sets in the restriction are exactly the arc-closed
/// fragment sets.
pub(crate) struct SubPoset<'a> {
    pub space: &'a EvidenceSpace,
    pub frag_elems: Vec<Vec<usize>>,
    /// fragment-level (hi, lo): selecting hi forces lo; lo < hi always
    pub arcs: Vec<(usize, usize)>,
}

impl<'a> SubPoset<'a> {
    pub fn new(space: &'a EvidenceSpace, elems: &FixedBitSet) -> Self {
        let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for e in elems.ones() {
            by_class.entry(space.class_of_idx(e)).or_default().push(e);
        }
        let mut frag_of_class = BTreeMap::new();
        let mut frag_elems = Vec::with_capacity(by_class.len());
        for (class, members) in by_class {
            frag_of_class.insert(class, frag_elems.len());
            frag_elems.push(members);
        }
        let arcs = space
            .restriction_arcs(elems)
            .into_iter()
            .map(|(hi, lo)| (frag_of_class[&hi], frag_of_class[&lo]))
            .collect();
        SubPoset {
            space,
            frag_elems,
            arcs,
        }
    }

    pub fn n_frags(&self) -> usize {
        self.frag_elems.len()
    }

    pub fn full(&self) -> FixedBitSet {
        let mut bs = FixedBitSet::with_capacity(self.n_frags());
        bs.insert_range(..);
        bs
    }

    pub fn elements_of(&self, frags: &FixedBitSet) -> FixedBitSet {
        let mut bs = FixedBitSet::with_capacity(self.space.len());
        for f in frags.ones() {
            for &e in &self.frag_elems[f] {
                bs.insert(e);
            }
        }
        bs
    }

    pub fn id_set_of(&self, frags: &FixedBitSet) -> BTreeSet<String> {
        frags
            .ones()
            .flat_map(|f| {
                self.frag_elems[f]
                    .iter()
                    .map(|&e| self.space.id_of(e).to_string())
            })
            .collect()
    }

    /// Fragments with nothing of the restriction strictly below them.
    pub fn minimal_frags(&self) -> Vec<usize> {
        let mut has_below = vec![false; self.n_frags()];
        for &(hi, _) in &self.arcs {
            has_below[hi] = true;
        }
        (0..self.n_frags()).filter(|&f| !has_below[f]).collect()
    }

    /// Largest lower-closed fragment set minimizing the modular weight, and
    /// the attained weight. `forced` fragments are pinned into the set.
    pub fn closure_min(
        &self,
        weights: &[Rational],
        forced: Option<&FixedBitSet>,
    ) -> (FixedBitSet, Rational) {
        let k = self.n_frags();
        // Scale to exact integers on a common denominator.
        let mut denom = BigInt::one();
        for w in weights {
            denom = denom.lcm(w.denom());
        }
        let scaled: Vec<BigInt> = weights
            .iter()
            .map(|w| w.numer() * (&denom / w.denom()))
            .collect();
        let mut magnitude = BigInt::zero();
        for w in &scaled {
            magnitude += w.abs();
        }
        let inf: BigInt = magnitude + 1;

        let (s, t) = (k, k + 1);
        let mut net = FlowNetwork::new(k + 2);
        for (f, w) in scaled.iter().enumerate() {
            if forced.is_some_and(|fs| fs.contains(f)) {
                net.add_edge(s, f, inf.clone());
            }
            if w.is_positive() {
                net.add_edge(f, t, w.clone());
            } else if w.is_negative() {
                net.add_edge(s, f, -w);
            }
        }
        for &(hi, lo) in &self.arcs {
            net.add_edge(hi, lo, inf.clone());
        }
        net.max_flow(s, t);

        let reach = net.residual_reaches_sink(t);
        assert!(!reach[s], "source must be cut from sink after max-flow");
        let mut closure = FixedBitSet::with_capacity(k);
        for f in 0..k {
            if !reach[f] {
                closure.insert(f);
            }
        }
        let total = closure.ones().map(|f| weights[f].clone()).sum();
        (closure, total)
    }

    /// All nonempty lower-closed fragment sets as bitmasks, ascending.
    /// Only valid for restrictions small enough to fit a machine word.
    pub fn lower_set_masks(&self, budget: &OracleBudget) -> Result<Vec<u64>, OptError> {
        let k = self.n_frags();
        if k >= 63 {
            return Err(OptError::BudgetExceeded(format!(
                "{k} fragments cannot be enumerated"
            )));
        }
        let mut need = vec![0u64; k];
        for &(hi, lo) in &self.arcs {
            need[hi] |= 1 << lo;
        }
        // Transitive requirements; arcs point at smaller indices, so one
        // ascending pass settles, but iterate to fixpoint regardless.
        loop {
            let mut changed = false;
            for f in 0..k {
                let mut acc = need[f];
                let mut rest = need[f];
                while rest != 0 {
                    let lo = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    acc |= need[lo];
                }
                if acc != need[f] {
                    need[f] = acc;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut out = Vec::new();
        for mask in 1u64..(1 << k) {
            let mut ok = true;
            let mut rest = mask;
            while rest != 0 {
                let f = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                if need[f] & !mask != 0 {
                    ok = false;
                    break;
                }
            }
            if ok {
                out.push(mask);
                if out.len() > budget.max_lower_sets {
                    return Err(OptError::BudgetExceeded(format!(
                        "more than {} lower sets",
                        budget.max_lower_sets
                    )));
                }
            }
        }
        Ok(out)
    }

    pub fn frags_from_mask(&self, mask: u64) -> FixedBitSet {
        let mut bs = FixedBitSet::with_capacity(self.n_frags());
        let mut rest = mask;
        while rest != 0 {
            let f = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            bs.insert(f);
        }
        bs
    }
}

/// A sub-poset with the game's masses summed per fragment; built once and
/// reused across Dinkelbach rounds.
pub(crate) struct Restriction<'a> {
    pub sub: SubPoset<'a>,
    pub game: &'a GameSpec,
    pub fg: Vec<Rational>,
    pub fb: Vec<Rational>,
}

impl<'a> Restriction<'a> {
    pub fn new(game: &'a GameSpec, elems: &FixedBitSet) -> Self {
        let sub = SubPoset::new(game.space(), elems);
        let mut fg = Vec::with_capacity(sub.n_frags());
        let mut fb = Vec::with_capacity(sub.n_frags());
        for members in &sub.frag_elems {
            let mut g = Rational::zero();
            let mut b = Rational::zero();
            for &e in members {
                g += game.fg_idx(e);
                b += game.fb_idx(e);
            }
            fg.push(g);
            fb.push(b);
        }
        Restriction { sub, game, fg, fb }
    }

    pub fn masses_of(&self, frags: &FixedBitSet) -> (Rational, Rational) {
        let mut g = Rational::zero();
        let mut b = Rational::zero();
        for f in frags.ones() {
            g += &self.fg[f];
            b += &self.fb[f];
        }
        (g, b)
    }

    pub fn nu_of(&self, frags: &FixedBitSet) -> Rational {
        let (g, b) = self.masses_of(frags);
        self.game
            .nu_from_masses(&g, &b)
            .expect("nonempty fragment sets carry mass")
    }

    /// Dinkelbach loop. Returns ν-minimum, largest minimizer, round count.
    pub fn min_nu(&self) -> (Rational, FixedBitSet, usize) {
        let pi0 = self.game.prior().clone();
        let co_pi0 = Rational::one() - &pi0;

        let mut candidate = self.sub.full();
        let (mut cand_g, mut cand_b) = self.masses_of(&candidate);
        if cand_b.is_zero() {
            // ν ≡ 1 on every nonempty lower set.
            return (Rational::one(), candidate, 0);
        }

        let mut iterations = 0usize;
        loop {
            assert!(iterations <= 1 << 20, "Dinkelbach failed to terminate");
            let lambda = (&cand_g * &pi0) / (&cand_b * &co_pi0);
            let weights: Vec<Rational> = (0..self.sub.n_frags())
                .map(|f| &self.fg[f] * &pi0 - &lambda * &co_pi0 * &self.fb[f])
                .collect();
            let (closure, total) = self.sub.closure_min(&weights, None);
            if total.is_negative() {
                debug_assert!(closure.count_ones(..) > 0);
                candidate = closure;
                let (g, b) = self.masses_of(&candidate);
                debug_assert!(
                    &g * &cand_b < &cand_g * &b,
                    "Dinkelbach odds must strictly decrease"
                );
                cand_g = g;
                cand_b = b;
                iterations += 1;
                continue;
            }
            debug_assert!(total.is_zero(), "candidate attains weight zero");
            let largest = if closure.count_ones(..) == 0 {
                // Unreachable with the full-set initialization: the candidate
                // is itself a zero-weight closure, so the maximal optimal
                // closure contains it. Branch on minimal fragments anyway.
                match self.best_forced_minimal(&weights) {
                    Some((forced_closure, nu)) if nu < self.nu_of(&candidate) => {
                        candidate = forced_closure;
                        let (g, b) = self.masses_of(&candidate);
                        cand_g = g;
                        cand_b = b;
                        iterations += 1;
                        continue;
                    }
                    _ => candidate.clone(),
                }
            } else {
                closure
            };
            debug_assert!(candidate.is_subset(&largest));
            let value = self.nu_of(&largest);
            return (value, largest, iterations);
        }
    }

    /// Best (lowest-ν) closure obtained by pinning each minimal fragment in
    /// turn — the branching rule for an empty unconstrained optimum.
    pub fn best_forced_minimal(&self, weights: &[Rational]) -> Option<(FixedBitSet, Rational)> {
        let mut best: Option<(FixedBitSet, Rational)> = None;
        for m in self.sub.minimal_frags() {
            let mut forced = FixedBitSet::with_capacity(self.sub.n_frags());
            forced.insert(m);
            let (closure, _) = self.sub.closure_min(weights, Some(&forced));
            let nu = self.nu_of(&closure);
            if best.as_ref().is_none_or(|(_, b)| &nu < b) {
                best = Some((closure, nu));
            }
        }
        best
    }
}

/// Exact minimum of ν over all nonempty lower contour sets in `A` by direct
/// enumeration; the largest minimizer is the union of all minimizers.
pub fn brute_force_min<S: AsRef<str>>(
    game: &GameSpec,
    a: &[S],
    budget: &OracleBudget,
) -> Result<MinimizerResult, OptError> {
    let elems = game.space().element_bitset(a)?;
    if elems.count_ones(..) == 0 {
        return Err(OptError::EmptySet);
    }
    if elems.count_ones(..) > budget.max_elements {
        return Err(OptError::BudgetExceeded(format!(
            "{} elements exceeds the budget of {}",
            elems.count_ones(..),
            budget.max_elements
        )));
    }
    let r = Restriction::new(game, &elems);
    let masks = r.sub.lower_set_masks(budget)?;
    let mut best: Option<(Rational, FixedBitSet)> = None;
    for mask in masks {
        let frags = r.sub.frags_from_mask(mask);
        let nu = r.nu_of(&frags);
        match &mut best {
            None => best = Some((nu, frags)),
            Some((v, union)) => {
                if nu < *v {
                    *v = nu;
                    *union = frags;
                } else if nu == *v {
                    union.union_with(&frags);
                }
            }
        }
    }
    let (value, union) = best.expect("nonempty set has lower sets");
    debug_assert_eq!(r.nu_of(&union), value, "union of minimizers minimizes");
    Ok(MinimizerResult {
        value,
        largest_min: r.sub.id_set_of(&union),
        iterations: 0,
    })
}

/// Largest lower contour set in `A` (possibly empty) minimizing the given
/// modular weight; ids absent from `w` weigh zero.
pub fn closure_min<S: AsRef<str>>(
    space: &EvidenceSpace,
    a: &[S],
    w: &BTreeMap<String, Rational>,
) -> Result<BTreeSet<String>, OptError> {
    for id in w.keys() {
        if !space.contains(id) {
            return Err(OptError::Space(SpaceError::UnknownId(id.clone())));
        }
    }
    let elems = space.element_bitset(a)?;
    if elems.count_ones(..) == 0 {
        return Err(OptError::EmptySet);
    }
    let sub = SubPoset::new(space, &elems);
    let weights: Vec<Rational> = (0..sub.n_frags())
        .map(|f| {
            sub.frag_elems[f]
                .iter()
                .map(|&e| {
                    w.get(space.id_of(e))
                        .cloned()
                        .unwrap_or_else(Rational::zero)
                })
                .sum()
        })
        .collect();
    let (closure, _) = sub.closure_min(&weights, None);
    Ok(sub.id_set_of(&closure))
}

/// Dinkelbach-based equivalent of [`brute_force_min`] without the size
/// limit: minimizes ν over nonempty lower contour sets in `A` and returns
/// the largest minimizer.
pub fn min_nu_lower_sets<S: AsRef<str>>(
    game: &GameSpec,
    a: &[S],
) -> Result<MinimizerResult, OptError> {
    let elems = game.space().element_bitset(a)?;
    if elems.count_ones(..) == 0 {
        return Err(OptError::EmptySet);
    }
    let r = Restriction::new(game, &elems);
    let (value, largest, iterations) = r.min_nu();
    Ok(MinimizerResult {
        value,
        largest_min: r.sub.id_set_of(&largest),
        iterations,
    })
}
