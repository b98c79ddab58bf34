//! Brute-force ground truth for small instances: lower-set enumeration,
//! exhaustive ordered-partition search, and seeded random game generation.

use std::collections::BTreeSet;

use fixedbitset::FixedBitSet;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::equilibrium::OrderedPartition;
use crate::game::{GameSpec, ResponseFunction};
use crate::lowerset::{OptError, Restriction, SubPoset};
use crate::poset::{build_space, EvidenceSpace, SpaceError};
use crate::rat::{rational, Rational};

/// Enumeration guard; oversized queries abort cleanly instead of running
/// away.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_elements: usize,
    pub max_lower_sets: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            max_elements: 7,
            max_lower_sets: 1 << 20,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("the oracle requires a strict response function")]
    NonStrictPhi,
    #[error("no ordered partition satisfies the equilibrium conditions")]
    NoSurvivor,
    #[error("{0} ordered partitions satisfy the equilibrium conditions")]
    MultipleSurvivors(usize),
    #[error(transparent)]
    Opt(#[from] OptError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// All nonempty lower contour sets in `A`, each exactly once, in a fixed
/// enumeration order.
pub fn enumerate_lower_sets<S: AsRef<str>>(
    space: &EvidenceSpace,
    a: &[S],
    budget: &OracleBudget,
) -> Result<Vec<BTreeSet<String>>, OracleError> {
    let elems = space.element_bitset(a)?;
    if elems.count_ones(..) > budget.max_elements {
        return Err(OracleError::Opt(OptError::BudgetExceeded(format!(
            "{} elements exceeds the budget of {}",
            elems.count_ones(..),
            budget.max_elements
        ))));
    }
    let sub = SubPoset::new(space, &elems);
    let masks = sub.lower_set_masks(budget)?;
    Ok(masks
        .into_iter()
        .map(|m| sub.id_set_of(&sub.frags_from_mask(m)))
        .collect())
}

/// Enumerates every ordered partition of the space, filters by the three
/// equilibrium-partition conditions, and insists on a unique survivor —
/// the uniqueness certificate for the fast solver.
pub fn oracle_partition(
    game: &GameSpec,
    budget: &OracleBudget,
) -> Result<OrderedPartition, OracleError> {
    if !game.phi().is_strict() {
        return Err(OracleError::NonStrictPhi);
    }
    let space = game.space();
    if space.len() > budget.max_elements {
        return Err(OracleError::Opt(OptError::BudgetExceeded(format!(
            "{} elements exceeds the budget of {}",
            space.len(),
            budget.max_elements
        ))));
    }

    // Cells must respect equivalence classes, so partition the quotient.
    let k = space.n_classes();
    let full = space.full_element_bitset();
    let whole = Restriction::new(game, &full);
    debug_assert_eq!(whole.sub.n_frags(), k);

    let mut survivors: Vec<OrderedPartition> = Vec::new();
    let mut assignment = vec![0usize; k];

    // Restricted-growth strings enumerate set partitions exactly once.
    loop {
        let n_cells = assignment.iter().max().map_or(1, |m| m + 1);
        let mut cells: Vec<FixedBitSet> = vec![FixedBitSet::with_capacity(k); n_cells];
        for (frag, &cell) in assignment.iter().enumerate() {
            cells[cell].insert(frag);
        }
        if let Some(p) = check_candidate(game, &whole, &cells, budget)? {
            survivors.push(p);
        }

        // Next restricted-growth string: rightmost position that may grow
        // (bounded by one past the prefix maximum) is bumped, tail zeroed.
        let mut i = k;
        loop {
            if i <= 1 {
                match survivors.len() {
                    0 => return Err(OracleError::NoSurvivor),
                    1 => return Ok(survivors.pop().expect("len checked")),
                    n => return Err(OracleError::MultipleSurvivors(n)),
                }
            }
            i -= 1;
            let cap = assignment[..i].iter().max().copied().expect("i ≥ 1") + 1;
            if assignment[i] < cap {
                assignment[i] += 1;
                for a in assignment[i + 1..].iter_mut() {
                    *a = 0;
                }
                break;
            }
        }
    }
}

fn check_candidate(
    game: &GameSpec,
    whole: &Restriction<'_>,
    cells: &[FixedBitSet],
    budget: &OracleBudget,
) -> Result<Option<OrderedPartition>, OracleError> {
    let space = game.space();
    // Order cells by ξ; condition 1 demands strictly increasing values, so
    // ties disqualify the candidate outright.
    let mut keyed: Vec<(Rational, usize)> = Vec::with_capacity(cells.len());
    for (i, cell) in cells.iter().enumerate() {
        let nu = whole.nu_of(cell);
        let xi = game.phi().apply(&nu).expect("ν lies in [0, 1]");
        keyed.push((xi, i));
    }
    keyed.sort();
    for w in keyed.windows(2) {
        if w[0].0 == w[1].0 {
            return Ok(None);
        }
    }

    // Condition 2: the disclosure order never points from a later cell to
    // an earlier one.
    let mut rank = vec![0usize; cells.len()];
    for (pos, (_, i)) in keyed.iter().enumerate() {
        rank[*i] = pos;
    }
    let mut frag_rank = vec![0usize; whole.sub.n_frags()];
    for (i, cell) in cells.iter().enumerate() {
        for f in cell.ones() {
            frag_rank[f] = rank[i];
        }
    }
    for &(hi, lo) in &whole.sub.arcs {
        if frag_rank[lo] > frag_rank[hi] {
            return Ok(None);
        }
    }

    // Condition 3 by direct enumeration inside each cell.
    for (_, i) in &keyed {
        let cell = &cells[*i];
        let cell_elems = whole.sub.elements_of(cell);
        let cell_nu = whole.nu_of(cell);
        let r = Restriction::new(game, &cell_elems);
        for mask in r.sub.lower_set_masks(budget)? {
            let frags = r.sub.frags_from_mask(mask);
            if r.nu_of(&frags) < cell_nu {
                return Ok(None);
            }
        }
    }

    let mut out_cells = Vec::with_capacity(cells.len());
    let mut out_xi = Vec::with_capacity(cells.len());
    for (xi, i) in keyed {
        out_cells.push(space.ids_of_elements(&whole.sub.elements_of(&cells[i])));
        out_xi.push(xi);
    }
    Ok(Some(OrderedPartition {
        cells: out_cells,
        cell_xi: out_xi,
    }))
}

/// Configuration for seeded random games over random DAG posets.
#[derive(Debug, Clone)]
pub struct RandomGameConfig {
    pub min_elements: usize,
    pub max_elements: usize,
    /// chance of declaring i ⪯ j for each pair i < j
    pub edge_prob: f64,
    /// chance of also declaring j ⪯ i, merging the two into one class
    pub merge_prob: f64,
    /// masses are drawn as integers in 0..=max_weight, then normalized
    pub max_weight: u32,
}

impl Default for RandomGameConfig {
    fn default() -> Self {
        RandomGameConfig {
            min_elements: 1,
            max_elements: 6,
            edge_prob: 0.4,
            merge_prob: 0.08,
            max_weight: 4,
        }
    }
}

/// Deterministic-per-seed random game with identity φ and small-denominator
/// rational masses; priors cycle through 1/3, 1/2, 2/3.
pub fn random_game(seed: u64, cfg: &RandomGameConfig) -> GameSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(cfg.min_elements..=cfg.max_elements);
    let ids: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let mut edges: Vec<(String, String)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(cfg.edge_prob) {
                edges.push((ids[i].clone(), ids[j].clone()));
                if rng.random_bool(cfg.merge_prob) {
                    edges.push((ids[j].clone(), ids[i].clone()));
                }
            }
        }
    }
    let space = build_space(&ids, &edges).expect("generated ids are unique");

    let (mut wg, mut wb);
    loop {
        let draw = |rng: &mut ChaCha8Rng| -> Vec<u32> {
            (0..n).map(|_| rng.random_range(0..=cfg.max_weight)).collect()
        };
        wg = draw(&mut rng);
        wb = draw(&mut rng);
        for i in 0..n {
            while wg[i] == 0 && wb[i] == 0 {
                wg[i] = rng.random_range(0..=cfg.max_weight);
                wb[i] = rng.random_range(0..=cfg.max_weight);
            }
        }
        if wg.iter().sum::<u32>() > 0 && wb.iter().sum::<u32>() > 0 {
            break;
        }
    }
    let norm = |w: &[u32]| -> Vec<Rational> {
        let total: u32 = w.iter().sum();
        w.iter()
            .map(|&x| rational(i64::from(x), i64::from(total)))
            .collect()
    };
    let prior = match rng.random_range(0..3u8) {
        0 => rational(1, 3),
        1 => rational(1, 2),
        _ => rational(2, 3),
    };
    debug_assert!(prior < Rational::one());
    GameSpec::from_indexed(
        space,
        prior,
        norm(&wg),
        norm(&wb),
        ResponseFunction::identity(),
    )
    .expect("generated masses satisfy the game invariants")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::tests::table2_game;

    fn sets(v: &[BTreeSet<String>]) -> Vec<Vec<&str>> {
        v.iter()
            .map(|s| s.iter().map(|x| x.as_str()).collect())
            .collect()
    }

    #[test]
    fn enumerate_chain_antichain_and_dye() {
        let budget = OracleBudget::default();
        let chain = build_space(&["0", "1", "2"], &[("0", "1"), ("1", "2")]).unwrap();
        let got = enumerate_lower_sets(&chain, &["0", "1", "2"], &budget).unwrap();
        assert_eq!(
            sets(&got),
            vec![vec!["0"], vec!["0", "1"], vec!["0", "1", "2"]]
        );

        let anti = build_space(&["a", "b"], &[] as &[(&str, &str)]).unwrap();
        assert_eq!(
            enumerate_lower_sets(&anti, &["a", "b"], &budget).unwrap().len(),
            3
        );

        let dye = build_space(&["e0", "e1", "e2"], &[("e0", "e1"), ("e0", "e2")]).unwrap();
        let got = enumerate_lower_sets(&dye, &["e0", "e1", "e2"], &budget).unwrap();
        assert_eq!(got.len(), 4);
        assert!(got.iter().all(|s| s.contains("e0")));
    }

    #[test]
    fn enumerate_rejects_oversized_queries() {
        let ids: Vec<String> = (0..9).map(|i| i.to_string()).collect();
        let space = build_space(&ids, &[] as &[(&str, &str)]).unwrap();
        let budget = OracleBudget {
            max_elements: 7,
            ..OracleBudget::default()
        };
        assert!(matches!(
            enumerate_lower_sets(&space, &ids, &budget),
            Err(OracleError::Opt(OptError::BudgetExceeded(_)))
        ));
    }

    #[test]
    fn oracle_partition_table2_identity() {
        let game = table2_game(ResponseFunction::identity());
        let p = oracle_partition(&game, &OracleBudget::default()).unwrap();
        assert_eq!(p.cells.len(), 1);
        assert_eq!(p.cell_xi[0], rational(1, 2));
        assert_eq!(p.cells[0].len(), 2);
    }

    #[test]
    fn oracle_partition_singleton() {
        let space = build_space(&["only"], &[] as &[(&str, &str)]).unwrap();
        let game = GameSpec::from_indexed(
            space,
            rational(1, 2),
            vec![Rational::one()],
            vec![Rational::one()],
            ResponseFunction::identity(),
        )
        .unwrap();
        let p = oracle_partition(&game, &OracleBudget::default()).unwrap();
        assert_eq!(p.cells.len(), 1);
        assert_eq!(p.cell_xi[0], rational(1, 2));
    }

    #[test]
    fn random_games_are_reproducible() {
        let cfg = RandomGameConfig::default();
        let a = random_game(42, &cfg);
        let b = random_game(42, &cfg);
        assert_eq!(a.space().ids(), b.space().ids());
        assert_eq!(a.prior(), b.prior());
        for id in a.space().ids() {
            assert_eq!(a.fg_of(id).unwrap(), b.fg_of(id).unwrap());
            assert_eq!(a.fb_of(id).unwrap(), b.fb_of(id).unwrap());
        }
    }
}
