//! Equilibrium computation and verification.
//!
//! `solve_partition` peels the largest ν-minimizing lower contour set off the
//! residual sub-poset until nothing is left; the resulting ordered partition
//! determines the (unique) value function. `construct_strategy` realizes a
//! sender strategy per fiber as an exact transportation flow: off-path
//! members ship their posterior deficit onto on-path messages below them so
//! that every pooled message lands exactly on the fiber belief. Verifiers
//! re-check every equilibrium condition in rational arithmetic and report
//! machine-readable witnesses.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use fixedbitset::FixedBitSet;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::flow::FlowNetwork;
use crate::game::{GameError, GameSpec};
use crate::lowerset::{OptError, Restriction};
use crate::poset::SpaceError;
use crate::rat::{format_rational, Rational};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("the response function is not strict; use weak_phi_solve")]
    NonStrictPhi,
    #[error("infeasible flow in the fiber with action {fiber_xi}; witness `{witness}`")]
    InfeasibleFiber { fiber_xi: Rational, witness: String },
    #[error("internal solver invariant violated: {0}")]
    Internal(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Opt(#[from] OptError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Partition of the evidence space into pooling cells, listed in strictly
/// increasing ξ order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderedPartition {
    pub cells: Vec<BTreeSet<String>>,
    pub cell_xi: Vec<Rational>,
}

/// The sender's value per evidence endowment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueFunction {
    pub v: BTreeMap<String, Rational>,
}

/// A full equilibrium: sender mixed strategy, receiver actions and beliefs,
/// and the on-path message set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Equilibrium {
    pub sigma: BTreeMap<String, BTreeMap<String, Rational>>,
    pub action: BTreeMap<String, Rational>,
    pub belief: BTreeMap<String, Rational>,
    pub onpath: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PivotOrder {
    Forward,
    Reverse,
}

/// Outcome of the weakly-increasing-φ solver.
#[derive(Debug, Clone)]
pub enum WeakOutcome {
    Equilibrium {
        partition: OrderedPartition,
        equilibrium: Box<Equilibrium>,
    },
    /// No truth-leaning equilibrium: the fiber with the given action cannot
    /// absorb enough off-path mass at the witness message.
    Nonexistent {
        fiber_xi: Rational,
        witness: String,
        candidate: OrderedPartition,
    },
}

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report<V> {
    pub violations: Vec<V>,
}

impl<V> Report<V> {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl<V: fmt::Display> fmt::Display for Report<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "all conditions hold");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValueViolation {
    MissingValue {
        id: String,
    },
    /// Condition 1: v must be non-decreasing along the disclosure order.
    NotMonotone {
        lower: String,
        upper: String,
        v_lower: Rational,
        v_upper: Rational,
    },
    /// Condition 2: ξ of the fiber must reproduce the value exactly.
    FiberXiMismatch {
        value: Rational,
        fiber: BTreeSet<String>,
        xi: Rational,
    },
    /// Condition 3: no lower contour set inside the fiber may fall below it.
    FiberLowerSetBelow {
        value: Rational,
        witness: BTreeSet<String>,
        xi: Rational,
    },
}

impl fmt::Display for ValueViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueViolation::MissingValue { id } => write!(f, "no value assigned to `{id}`"),
            ValueViolation::NotMonotone {
                lower,
                upper,
                v_lower,
                v_upper,
            } => write!(
                f,
                "v(`{lower}`) = {} exceeds v(`{upper}`) = {} although `{lower}` ⪯ `{upper}`",
                format_rational(v_lower),
                format_rational(v_upper)
            ),
            ValueViolation::FiberXiMismatch { value, fiber, xi } => write!(
                f,
                "fiber of {} has ξ = {} (members: {:?})",
                format_rational(value),
                format_rational(xi),
                fiber
            ),
            ValueViolation::FiberLowerSetBelow { value, witness, xi } => write!(
                f,
                "lower set {:?} inside the fiber of {} attains ξ = {}",
                witness,
                format_rational(value),
                format_rational(xi)
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionViolation {
    NotAPartition {
        missing: Vec<String>,
        duplicated: Vec<String>,
    },
    XiValueMismatch {
        index: usize,
        declared: Rational,
        computed: Rational,
    },
    XiNotIncreasing {
        index: usize,
    },
    OrderIncompatible {
        lower: String,
        upper: String,
    },
    CellLowerSetBelow {
        index: usize,
        witness: BTreeSet<String>,
        xi: Rational,
    },
}

impl fmt::Display for PartitionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionViolation::NotAPartition {
                missing,
                duplicated,
            } => write!(
                f,
                "cells do not partition the space (missing {missing:?}, duplicated {duplicated:?})"
            ),
            PartitionViolation::XiValueMismatch {
                index,
                declared,
                computed,
            } => write!(
                f,
                "cell {index} declares ξ = {} but evaluates to {}",
                format_rational(declared),
                format_rational(computed)
            ),
            PartitionViolation::XiNotIncreasing { index } => {
                write!(f, "ξ fails to increase strictly at cell {index}")
            }
            PartitionViolation::OrderIncompatible { lower, upper } => write!(
                f,
                "`{lower}` ⪯ `{upper}` but `{lower}` sits in a later cell"
            ),
            PartitionViolation::CellLowerSetBelow { index, witness, xi } => write!(
                f,
                "lower set {:?} inside cell {index} attains ξ = {}",
                witness,
                format_rational(xi)
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EqViolation {
    IncompleteMaps {
        id: String,
    },
    SigmaNotDistribution {
        evidence: String,
        total: Rational,
    },
    InfeasibleSupport {
        evidence: String,
        message: String,
    },
    OnPathMismatch {
        declared_not_supported: Vec<String>,
        supported_not_declared: Vec<String>,
    },
    /// Eq 2.1: a supported message must attain the best action below.
    SenderSuboptimal {
        evidence: String,
        message: String,
        best: Rational,
        got: Rational,
    },
    /// Eq 2.2: action must equal φ of the belief.
    ReceiverSuboptimal {
        message: String,
        expected: Rational,
        got: Rational,
    },
    /// Eq 2.3 at an on-path message.
    BayesInconsistent {
        message: String,
        expected: Rational,
        got: Rational,
    },
    /// Eq 2.4: truthful reporting whenever truthful reporting is optimal.
    TruthLeaningViolated {
        evidence: String,
    },
    /// Eq 2.5: off-path messages are taken at face value.
    OffPathBelief {
        message: String,
        expected: Rational,
        got: Rational,
    },
}

impl fmt::Display for EqViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EqViolation::IncompleteMaps { id } => {
                write!(f, "equilibrium maps miss element `{id}`")
            }
            EqViolation::SigmaNotDistribution { evidence, total } => write!(
                f,
                "σ(·|`{evidence}`) sums to {}",
                format_rational(total)
            ),
            EqViolation::InfeasibleSupport { evidence, message } => {
                write!(f, "σ(`{message}`|`{evidence}`) > 0 but the message is not disclosable")
            }
            EqViolation::OnPathMismatch {
                declared_not_supported,
                supported_not_declared,
            } => write!(
                f,
                "on-path set mismatch (declared but unsupported {declared_not_supported:?}, supported but undeclared {supported_not_declared:?})"
            ),
            EqViolation::SenderSuboptimal {
                evidence,
                message,
                best,
                got,
            } => write!(
                f,
                "at `{evidence}` the supported message `{message}` yields {} while {} is feasible",
                format_rational(got),
                format_rational(best)
            ),
            EqViolation::ReceiverSuboptimal {
                message,
                expected,
                got,
            } => write!(
                f,
                "action(`{message}`) = {} but φ(belief) = {}",
                format_rational(got),
                format_rational(expected)
            ),
            EqViolation::BayesInconsistent {
                message,
                expected,
                got,
            } => write!(
                f,
                "belief(`{message}`) = {} but Bayes' rule gives {}",
                format_rational(got),
                format_rational(expected)
            ),
            EqViolation::TruthLeaningViolated { evidence } => write!(
                f,
                "truthful disclosure is optimal at `{evidence}` but σ(`{evidence}`|`{evidence}`) ≠ 1"
            ),
            EqViolation::OffPathBelief {
                message,
                expected,
                got,
            } => write!(
                f,
                "off-path belief(`{message}`) = {} but ν = {}",
                format_rational(got),
                format_rational(expected)
            ),
        }
    }
}

// ---------------------------------------------------------------------------
// solving
// ---------------------------------------------------------------------------

/// Peels largest ν-minimizing lower contour sets off the residual sub-poset.
/// Residuals stay upper-closed, so ν strictly increases cell by cell.
fn peel_by_nu(game: &GameSpec) -> Vec<(FixedBitSet, Rational)> {
    let mut residual = game.space().full_element_bitset();
    let mut cells = Vec::new();
    while residual.count_ones(..) > 0 {
        let r = Restriction::new(game, &residual);
        let (value, largest, _) = r.min_nu();
        let elems = r.sub.elements_of(&largest);
        debug_assert!(elems.count_ones(..) > 0);
        residual.difference_with(&elems);
        if let Some((_, prev)) = cells.last() {
            debug_assert!(prev < &value, "peeled ν must strictly increase");
        }
        cells.push((elems, value));
    }
    cells
}

fn cells_to_partition(
    game: &GameSpec,
    cells: Vec<(FixedBitSet, Rational)>,
) -> Result<OrderedPartition, SolveError> {
    let space = game.space();
    let mut out_cells = Vec::with_capacity(cells.len());
    let mut out_xi = Vec::with_capacity(cells.len());
    for (elems, nu) in cells {
        out_cells.push(space.ids_of_elements(&elems));
        out_xi.push(game.phi().apply(&nu)?);
    }
    Ok(OrderedPartition {
        cells: out_cells,
        cell_xi: out_xi,
    })
}

/// The equilibrium partition for a strictly increasing response function.
pub fn solve_partition(game: &GameSpec) -> Result<OrderedPartition, SolveError> {
    if !game.phi().is_strict() {
        return Err(SolveError::NonStrictPhi);
    }
    let partition = cells_to_partition(game, peel_by_nu(game))?;
    for w in partition.cell_xi.windows(2) {
        if w[0] >= w[1] {
            return Err(SolveError::Internal(
                "strict φ must map increasing ν to increasing ξ".into(),
            ));
        }
    }
    Ok(partition)
}

/// v(e) = ξ of the cell containing e.
pub fn value_function(partition: &OrderedPartition) -> ValueFunction {
    let mut v = BTreeMap::new();
    for (cell, xi) in partition.cells.iter().zip(&partition.cell_xi) {
        for id in cell {
            v.insert(id.clone(), xi.clone());
        }
    }
    ValueFunction { v }
}

// ---------------------------------------------------------------------------
// verification
// ---------------------------------------------------------------------------

/// Checks the three value-function conditions exactly and reports every
/// violation with a witness.
pub fn verify_value_function(game: &GameSpec, vf: &ValueFunction) -> Report<ValueViolation> {
    let space = game.space();
    let mut violations = Vec::new();

    let mut missing = false;
    for id in space.ids() {
        if !vf.v.contains_key(id) {
            violations.push(ValueViolation::MissingValue { id: id.clone() });
            missing = true;
        }
    }
    if missing {
        return Report { violations };
    }
    let value_of = |e: usize| &vf.v[space.id_of(e)];

    // Condition 1 along equivalences and covers; transitivity does the rest.
    for c in 0..space.n_classes() {
        let members = space.class_members_idx(c);
        for pair in members.windows(2) {
            // Equivalent elements are below each other, so any value gap is
            // a monotonicity violation with the larger value on the "lower"
            // side.
            let (a, b) = (pair[0], pair[1]);
            if value_of(a) != value_of(b) {
                let (lower, upper) = if value_of(a) > value_of(b) {
                    (a, b)
                } else {
                    (b, a)
                };
                violations.push(ValueViolation::NotMonotone {
                    lower: space.id_of(lower).to_string(),
                    upper: space.id_of(upper).to_string(),
                    v_lower: value_of(lower).clone(),
                    v_upper: value_of(upper).clone(),
                });
            }
        }
        let hi_rep = members[0];
        for &d in space.covers_of(c) {
            let lo_rep = space.class_members_idx(d)[0];
            if value_of(lo_rep) > value_of(hi_rep) {
                violations.push(ValueViolation::NotMonotone {
                    lower: space.id_of(lo_rep).to_string(),
                    upper: space.id_of(hi_rep).to_string(),
                    v_lower: value_of(lo_rep).clone(),
                    v_upper: value_of(hi_rep).clone(),
                });
            }
        }
    }

    // Conditions 2 and 3 per fiber.
    let mut fibers: BTreeMap<Rational, FixedBitSet> = BTreeMap::new();
    for e in 0..space.len() {
        fibers
            .entry(value_of(e).clone())
            .or_insert_with(|| FixedBitSet::with_capacity(space.len()))
            .insert(e);
    }
    for (x, elems) in &fibers {
        let nu = game
            .nu_elements(elems)
            .expect("fibers are nonempty and carry mass");
        let xi = game.phi().apply(&nu).expect("ν lies in [0, 1]");
        if &xi != x {
            violations.push(ValueViolation::FiberXiMismatch {
                value: x.clone(),
                fiber: space.ids_of_elements(elems),
                xi,
            });
        }
        let r = Restriction::new(game, elems);
        let (min_nu, largest, _) = r.min_nu();
        let min_xi = game.phi().apply(&min_nu).expect("ν lies in [0, 1]");
        if &min_xi < x {
            violations.push(ValueViolation::FiberLowerSetBelow {
                value: x.clone(),
                witness: r.sub.id_set_of(&largest),
                xi: min_xi,
            });
        }
    }

    Report { violations }
}

/// Checks the three ordered-partition conditions exactly.
pub fn verify_ordered_partition(
    game: &GameSpec,
    partition: &OrderedPartition,
) -> Report<PartitionViolation> {
    let space = game.space();
    let mut violations = Vec::new();

    if partition.cells.len() != partition.cell_xi.len() {
        violations.push(PartitionViolation::NotAPartition {
            missing: Vec::new(),
            duplicated: Vec::new(),
        });
        return Report { violations };
    }

    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut duplicated = Vec::new();
    let mut unknown = Vec::new();
    let mut empty_cell = false;
    for cell in &partition.cells {
        empty_cell |= cell.is_empty();
        for id in cell {
            if !space.contains(id) {
                unknown.push(id.clone());
            }
            if !seen.insert(id.as_str()) {
                duplicated.push(id.clone());
            }
        }
    }
    let missing: Vec<String> = space
        .ids()
        .iter()
        .filter(|id| !seen.contains(id.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() || !duplicated.is_empty() || !unknown.is_empty() || empty_cell {
        duplicated.extend(unknown);
        violations.push(PartitionViolation::NotAPartition {
            missing,
            duplicated,
        });
        return Report { violations };
    }

    // Condition 1 on recomputed ξ values, flagging stale declared values too.
    let mut computed = Vec::with_capacity(partition.cells.len());
    for (i, cell) in partition.cells.iter().enumerate() {
        let ids: Vec<&String> = cell.iter().collect();
        let xi = game.xi(&ids).expect("cells are nonempty with known ids");
        if xi != partition.cell_xi[i] {
            violations.push(PartitionViolation::XiValueMismatch {
                index: i,
                declared: partition.cell_xi[i].clone(),
                computed: xi.clone(),
            });
        }
        computed.push(xi);
    }
    for i in 1..computed.len() {
        if computed[i - 1] >= computed[i] {
            violations.push(PartitionViolation::XiNotIncreasing { index: i });
        }
    }

    // Condition 2 via class ranks: equivalent elements share a cell and
    // covers point from later cells down to earlier ones.
    let mut rank: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, cell) in partition.cells.iter().enumerate() {
        for id in cell {
            rank.insert(id.as_str(), i);
        }
    }
    let rank_of = |e: usize| rank[space.id_of(e)];
    'classes: for c in 0..space.n_classes() {
        let members = space.class_members_idx(c);
        for pair in members.windows(2) {
            if rank_of(pair[0]) != rank_of(pair[1]) {
                let (lo, hi) = if rank_of(pair[0]) > rank_of(pair[1]) {
                    (pair[0], pair[1])
                } else {
                    (pair[1], pair[0])
                };
                violations.push(PartitionViolation::OrderIncompatible {
                    lower: space.id_of(lo).to_string(),
                    upper: space.id_of(hi).to_string(),
                });
                continue 'classes;
            }
        }
        let hi_rep = members[0];
        for &d in space.covers_of(c) {
            let lo_rep = space.class_members_idx(d)[0];
            if rank_of(lo_rep) > rank_of(hi_rep) {
                violations.push(PartitionViolation::OrderIncompatible {
                    lower: space.id_of(lo_rep).to_string(),
                    upper: space.id_of(hi_rep).to_string(),
                });
            }
        }
    }

    // Condition 3 per cell.
    for (i, cell) in partition.cells.iter().enumerate() {
        let ids: Vec<&String> = cell.iter().collect();
        let elems = space.element_bitset(&ids).expect("cells hold known ids");
        let r = Restriction::new(game, &elems);
        let (min_nu, largest, _) = r.min_nu();
        let min_xi = game.phi().apply(&min_nu).expect("ν lies in [0, 1]");
        if min_xi < computed[i] {
            violations.push(PartitionViolation::CellLowerSetBelow {
                index: i,
                witness: r.sub.id_set_of(&largest),
                xi: min_xi,
            });
        }
    }

    Report { violations }
}

// ---------------------------------------------------------------------------
// strategy construction
// ---------------------------------------------------------------------------

struct FiberOutcome {
    /// σ rows for off-path members of the fiber
    pooling: Vec<(usize, Vec<(usize, Rational)>)>,
    onpath: Vec<usize>,
    offpath: Vec<usize>,
}

/// Balances one fiber with an exact transportation flow.
///
/// Off-path members supply their posterior deficit `-g`, on-path messages
/// above the fiber belief absorb their surplus `g`, where
/// `g(z) = F_G(z)π₀(1-μ) - F_B(z)(1-π₀)μ` and μ is the fiber's ν. Messages
/// with ξ strictly above the fiber action must be filled exactly (they have
/// to land on μ); messages with ξ equal to the action may absorb any amount
/// up to their surplus. Feasibility of the mandatory part is exactly the
/// lower-set condition of the partition.
fn solve_fiber(
    game: &GameSpec,
    cell: &[usize],
    x: &Rational,
    order: PivotOrder,
) -> Result<FiberOutcome, (Rational, String)> {
    let space = game.space();
    let mut cell_elems = FixedBitSet::with_capacity(space.len());
    for &e in cell {
        cell_elems.insert(e);
    }
    let mu = game
        .nu_elements(&cell_elems)
        .expect("cells are nonempty and carry mass");
    let pi0 = game.prior().clone();
    let co_pi0 = Rational::one() - &pi0;
    let co_mu = Rational::one() - &mu;

    let mut offpath: Vec<(usize, Rational)> = Vec::new();
    let mut mandatory: Vec<(usize, Rational)> = Vec::new();
    let mut optional: Vec<(usize, Rational)> = Vec::new();
    let mut onpath = Vec::new();
    let mut balance = Rational::zero();
    for &e in cell {
        let xi_e = game.xi_singleton(e);
        let g = game.fg_idx(e) * &pi0 * &co_mu - game.fb_idx(e) * &co_pi0 * &mu;
        balance += &g;
        if xi_e < *x {
            // ξ(e) below the fiber action forces ν(e) below μ; anything else
            // means the partition is inconsistent, which the flow reports.
            if !g.is_negative() {
                return Err((x.clone(), space.id_of(e).to_string()));
            }
            offpath.push((e, -g));
        } else {
            onpath.push(e);
            if xi_e > *x {
                if !g.is_positive() {
                    return Err((x.clone(), space.id_of(e).to_string()));
                }
                mandatory.push((e, g));
            } else if g.is_positive() {
                optional.push((e, g));
            }
        }
    }
    debug_assert!(balance.is_zero(), "fiber surplus and deficit must cancel");

    if order == PivotOrder::Reverse {
        offpath.reverse();
        mandatory.reverse();
        optional.reverse();
    }

    if mandatory.is_empty() && offpath.is_empty() {
        return Ok(FiberOutcome {
            pooling: Vec::new(),
            onpath,
            offpath: Vec::new(),
        });
    }
    if offpath.is_empty() {
        // Mandatory demand with no supply at all: the first such message
        // witnesses nonexistence outright.
        let (m, _) = &mandatory[0];
        return Err((x.clone(), space.id_of(*m).to_string()));
    }

    // Scale every quantity onto one denominator so the flow is integral.
    let mut denom = BigInt::one();
    for (_, r) in offpath.iter().chain(&mandatory).chain(&optional) {
        denom = denom.lcm(r.denom());
    }
    let scale = |r: &Rational| -> BigInt { r.numer() * (&denom / r.denom()) };

    let n_nodes = 2 + offpath.len() + mandatory.len() + optional.len();
    let (s, t) = (0, 1);
    let supply_node = |i: usize| 2 + i;
    let mand_node = |j: usize| 2 + offpath.len() + j;
    let opt_node = |j: usize| 2 + offpath.len() + mandatory.len() + j;

    let mut net = FlowNetwork::new(n_nodes);
    let mut total_supply = BigInt::zero();
    let mut supply_arcs = Vec::with_capacity(offpath.len());
    for (i, (_, d)) in offpath.iter().enumerate() {
        let cap = scale(d);
        total_supply += &cap;
        supply_arcs.push(net.add_edge(s, supply_node(i), cap));
    }
    let mut mand_total = BigInt::zero();
    let mut mand_arcs = Vec::with_capacity(mandatory.len());
    for (j, (_, g)) in mandatory.iter().enumerate() {
        let cap = scale(g);
        mand_total += &cap;
        mand_arcs.push(net.add_edge(mand_node(j), t, cap));
    }
    let inf: BigInt = &total_supply + &mand_total + 1;
    // Pool arcs respect the disclosure rule: e may ship only to m ⪯ e.
    let mut pool_arcs: Vec<(usize, usize, usize)> = Vec::new();
    for (i, (e, _)) in offpath.iter().enumerate() {
        for (j, (m, _)) in mandatory.iter().enumerate() {
            if space.le_idx(*m, *e) {
                pool_arcs.push((net.add_edge(supply_node(i), mand_node(j), inf.clone()), i, *m));
            }
        }
        for (j, (m, _)) in optional.iter().enumerate() {
            if space.le_idx(*m, *e) {
                pool_arcs.push((net.add_edge(supply_node(i), opt_node(j), inf.clone()), i, *m));
            }
        }
    }

    // Phase 1: meet every mandatory demand exactly.
    let phase1 = net.max_flow(s, t);
    if phase1 < mand_total {
        let witness = mand_arcs
            .iter()
            .zip(&mandatory)
            .find(|(arc, (_, g))| net.flow_on(**arc) < &scale(g))
            .map(|(_, (m, _))| space.id_of(*m).to_string())
            .expect("some mandatory arc is unsaturated");
        return Err((x.clone(), witness));
    }

    // Phase 2: ship the remaining supply into the flexible absorbers.
    // Re-running the push-relabel only ever adds flow, and mandatory sink
    // arcs stay saturated because the sink is terminal on augmenting paths.
    let mut shipped = phase1;
    if !optional.is_empty() {
        for (j, (_, g)) in optional.iter().enumerate() {
            net.add_edge(opt_node(j), t, scale(g));
        }
        shipped += net.max_flow(s, t);
    }
    if shipped < total_supply {
        let witness = supply_arcs
            .iter()
            .zip(&offpath)
            .find(|(arc, (_, d))| net.flow_on(**arc) < &scale(d))
            .map(|(_, (e, _))| space.id_of(*e).to_string())
            .expect("some supply arc is unsaturated");
        return Err((x.clone(), witness));
    }
    for arc in &mand_arcs {
        debug_assert_eq!(net.residual_on(*arc), &BigInt::zero());
    }

    // Read σ off the pool arcs: σ(m|e) is the shipped share of e's deficit.
    let mut rows: BTreeMap<usize, Vec<(usize, Rational)>> = BTreeMap::new();
    for (arc, i, m) in pool_arcs {
        let flow = net.flow_on(arc);
        if flow.is_zero() {
            continue;
        }
        let (e, d) = &offpath[i];
        let share = Rational::new(flow.clone(), scale(d));
        rows.entry(*e).or_default().push((m, share));
    }
    let mut pooling = Vec::with_capacity(offpath.len());
    for (e, _) in &offpath {
        let mut row = rows.remove(e).unwrap_or_default();
        row.sort_by_key(|(m, _)| *m);
        debug_assert_eq!(
            row.iter().map(|(_, s)| s.clone()).sum::<Rational>(),
            Rational::one()
        );
        pooling.push((*e, row));
    }
    Ok(FiberOutcome {
        pooling,
        onpath,
        offpath: offpath.into_iter().map(|(e, _)| e).collect(),
    })
}

/// Builds an equilibrium from a verified partition. Fibers are independent;
/// the pivot order only permutes flow pivots and never changes actions.
pub fn construct_strategy_with(
    game: &GameSpec,
    partition: &OrderedPartition,
    order: PivotOrder,
) -> Result<Equilibrium, SolveError> {
    let space = game.space();
    let mut sigma: BTreeMap<String, BTreeMap<String, Rational>> = BTreeMap::new();
    let mut action: BTreeMap<String, Rational> = BTreeMap::new();
    let mut belief: BTreeMap<String, Rational> = BTreeMap::new();
    let mut onpath: BTreeSet<String> = BTreeSet::new();

    for (cell_ids, x) in partition.cells.iter().zip(&partition.cell_xi) {
        let cell: Vec<usize> = cell_ids
            .iter()
            .map(|id| space.index_of(id))
            .collect::<Result<_, _>>()?;
        let outcome = solve_fiber(game, &cell, x, order).map_err(|(fiber_xi, witness)| {
            SolveError::InfeasibleFiber { fiber_xi, witness }
        })?;

        for &m in &outcome.onpath {
            let id = space.id_of(m).to_string();
            onpath.insert(id.clone());
            sigma.insert(id.clone(), BTreeMap::from([(id.clone(), Rational::one())]));
            action.insert(id, x.clone());
        }
        for (e, row) in &outcome.pooling {
            let id = space.id_of(*e).to_string();
            let row_ids: BTreeMap<String, Rational> = row
                .iter()
                .map(|(m, share)| (space.id_of(*m).to_string(), share.clone()))
                .collect();
            sigma.insert(id.clone(), row_ids);
            action.insert(id.clone(), game.xi_singleton(*e));
            belief.insert(id, game.nu_singleton(*e));
        }
        debug_assert_eq!(outcome.pooling.len(), outcome.offpath.len());

        // On-path beliefs come straight from Bayes' rule over the rows.
        let pi0 = game.prior().clone();
        let co_pi0 = Rational::one() - &pi0;
        let mut inflow: BTreeMap<usize, (Rational, Rational)> = BTreeMap::new();
        for (e, row) in &outcome.pooling {
            for (m, share) in row {
                let g = share * game.fg_idx(*e) * &pi0;
                let b = share * game.fb_idx(*e) * &co_pi0;
                let entry = inflow
                    .entry(*m)
                    .or_insert_with(|| (Rational::zero(), Rational::zero()));
                entry.0 += g;
                entry.1 += b;
            }
        }
        for &m in &outcome.onpath {
            let mut good = game.fg_idx(m) * &pi0;
            let mut total = &good + game.fb_idx(m) * &co_pi0;
            if let Some((g, b)) = inflow.get(&m) {
                good += g;
                total += g + b;
            }
            belief.insert(space.id_of(m).to_string(), good / total);
        }
    }

    Ok(Equilibrium {
        sigma,
        action,
        belief,
        onpath,
    })
}

/// `construct_strategy_with` in the canonical pivot order.
pub fn construct_strategy(
    game: &GameSpec,
    partition: &OrderedPartition,
) -> Result<Equilibrium, SolveError> {
    construct_strategy_with(game, partition, PivotOrder::Forward)
}

/// Solves a game with a weakly increasing response function: partitions by
/// ν, merges consecutive cells whose ξ coincide, verifies the candidate, and
/// attempts the fiber flows. An infeasible fiber certifies that no
/// truth-leaning equilibrium exists.
pub fn weak_phi_solve(game: &GameSpec) -> Result<WeakOutcome, SolveError> {
    let nu_cells = peel_by_nu(game);
    // Merge consecutive runs with equal ξ; φ is monotone, so runs are
    // contiguous and the merged ξ sequence is strictly increasing.
    let mut merged: Vec<(FixedBitSet, Rational)> = Vec::new();
    for (elems, nu) in nu_cells {
        let xi = game.phi().apply(&nu)?;
        match merged.last_mut() {
            Some((cell, last_xi)) if *last_xi == xi => cell.union_with(&elems),
            _ => merged.push((elems, xi)),
        }
    }
    let space = game.space();
    let partition = OrderedPartition {
        cells: merged
            .iter()
            .map(|(elems, _)| space.ids_of_elements(elems))
            .collect(),
        cell_xi: merged.into_iter().map(|(_, xi)| xi).collect(),
    };

    let report = verify_ordered_partition(game, &partition);
    if !report.passed() {
        return Err(SolveError::Internal(format!(
            "merged candidate failed partition verification: {report}"
        )));
    }

    match construct_strategy(game, &partition) {
        Ok(eq) => Ok(WeakOutcome::Equilibrium {
            partition,
            equilibrium: Box::new(eq),
        }),
        Err(SolveError::InfeasibleFiber { fiber_xi, witness }) => Ok(WeakOutcome::Nonexistent {
            fiber_xi,
            witness,
            candidate: partition,
        }),
        Err(other) => Err(other),
    }
}

// ---------------------------------------------------------------------------
// equilibrium verification
// ---------------------------------------------------------------------------

/// Checks sender optimality, receiver optimality, Bayes consistency,
/// truth-leaning, and off-path beliefs, all in exact arithmetic.
pub fn verify_equilibrium(game: &GameSpec, eq: &Equilibrium) -> Report<EqViolation> {
    let space = game.space();
    let mut violations = Vec::new();

    let mut incomplete = false;
    for id in space.ids() {
        if !eq.sigma.contains_key(id) || !eq.action.contains_key(id) || !eq.belief.contains_key(id)
        {
            violations.push(EqViolation::IncompleteMaps { id: id.clone() });
            incomplete = true;
        }
    }
    for id in eq
        .sigma
        .keys()
        .chain(eq.action.keys())
        .chain(eq.belief.keys())
    {
        if !space.contains(id) {
            violations.push(EqViolation::IncompleteMaps { id: id.clone() });
            incomplete = true;
        }
    }
    if incomplete {
        return Report { violations };
    }

    // Row sanity and support feasibility.
    let mut supported: BTreeSet<&str> = BTreeSet::new();
    for (e_id, row) in &eq.sigma {
        let mut total = Rational::zero();
        for (m_id, p) in row {
            if p.is_negative() {
                violations.push(EqViolation::SigmaNotDistribution {
                    evidence: e_id.clone(),
                    total: p.clone(),
                });
            }
            if p.is_positive() {
                supported.insert(m_id.as_str());
                match space.le(m_id, e_id) {
                    Ok(true) => {}
                    _ => violations.push(EqViolation::InfeasibleSupport {
                        evidence: e_id.clone(),
                        message: m_id.clone(),
                    }),
                }
            }
            total += p;
        }
        if !total.is_one() {
            violations.push(EqViolation::SigmaNotDistribution {
                evidence: e_id.clone(),
                total,
            });
        }
    }

    let declared: BTreeSet<&str> = eq.onpath.iter().map(|s| s.as_str()).collect();
    if declared != supported {
        violations.push(EqViolation::OnPathMismatch {
            declared_not_supported: declared
                .difference(&supported)
                .map(|s| s.to_string())
                .collect(),
            supported_not_declared: supported
                .difference(&declared)
                .map(|s| s.to_string())
                .collect(),
        });
    }

    // Receiver optimality.
    for (m_id, a) in &eq.action {
        let mu = &eq.belief[m_id];
        match game.phi().apply(mu) {
            Ok(expected) => {
                if &expected != a {
                    violations.push(EqViolation::ReceiverSuboptimal {
                        message: m_id.clone(),
                        expected,
                        got: a.clone(),
                    });
                }
            }
            Err(_) => violations.push(EqViolation::ReceiverSuboptimal {
                message: m_id.clone(),
                expected: Rational::zero(),
                got: a.clone(),
            }),
        }
    }

    // Best attainable action per class, propagated along covers.
    let n_classes = space.n_classes();
    let mut best: Vec<Option<Rational>> = vec![None; n_classes];
    for c in 0..n_classes {
        let mut b: Option<Rational> = None;
        for &e in space.class_members_idx(c) {
            let a = &eq.action[space.id_of(e)];
            if b.as_ref().is_none_or(|cur| a > cur) {
                b = Some(a.clone());
            }
        }
        for &d in space.covers_of(c) {
            let down = best[d].clone().expect("covers point at processed classes");
            if b.as_ref().is_none_or(|cur| down > *cur) {
                b = Some(down);
            }
        }
        best[c] = b;
    }

    // Sender optimality and truth-leaning.
    for (e_id, row) in &eq.sigma {
        let e = space.index_of(e_id).expect("checked above");
        let top = best[space.class_of_idx(e)]
            .clone()
            .expect("every class has members");
        for (m_id, p) in row {
            if p.is_positive() {
                let got = &eq.action[m_id];
                if got != &top {
                    violations.push(EqViolation::SenderSuboptimal {
                        evidence: e_id.clone(),
                        message: m_id.clone(),
                        best: top.clone(),
                        got: got.clone(),
                    });
                }
            }
        }
        if eq.action[e_id] == top && !row.get(e_id).map(|p| p.is_one()).unwrap_or(false) {
            violations.push(EqViolation::TruthLeaningViolated {
                evidence: e_id.clone(),
            });
        }
    }

    // Bayes consistency on-path, face value off-path. One pass over the σ
    // entries accumulates each message's posterior numerator and mass.
    let pi0 = game.prior().clone();
    let co_pi0 = Rational::one() - &pi0;
    let mut acc: BTreeMap<&str, (Rational, Rational)> = BTreeMap::new();
    for (e_id, row) in &eq.sigma {
        let e = space.index_of(e_id).expect("checked above");
        for (m_id, p) in row {
            if p.is_positive() {
                let g = p * game.fg_idx(e) * &pi0;
                let b = p * game.fb_idx(e) * &co_pi0;
                let entry = acc
                    .entry(m_id.as_str())
                    .or_insert_with(|| (Rational::zero(), Rational::zero()));
                entry.0 += &g;
                entry.1 += g + b;
            }
        }
    }
    for m_id in space.ids() {
        if supported.contains(m_id.as_str()) {
            let (good, total) = &acc[m_id.as_str()];
            let expected = good / total;
            if eq.belief[m_id] != expected {
                violations.push(EqViolation::BayesInconsistent {
                    message: m_id.clone(),
                    expected,
                    got: eq.belief[m_id].clone(),
                });
            }
        } else {
            let e = space.index_of(m_id).expect("ids enumerate the space");
            let expected = game.nu_singleton(e);
            if eq.belief[m_id] != expected {
                violations.push(EqViolation::OffPathBelief {
                    message: m_id.clone(),
                    expected,
                    got: eq.belief[m_id].clone(),
                });
            }
        }
    }

    Report { violations }
}
