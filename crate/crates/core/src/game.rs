//! Probabilistic structure over an evidence space: prior, the two evidence
//! measures, the receiver's response function, and the set functions ν and ξ.

use std::collections::BTreeMap;

use fixedbitset::FixedBitSet;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::poset::{EvidenceSpace, SpaceError};
use crate::rat::Rational;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GameError {
    #[error("prior must lie strictly between 0 and 1, got {0}")]
    PriorOutOfRange(String),
    #[error("negative mass for `{0}`")]
    NegativeMass(String),
    #[error("element `{0}` has zero mass in both states")]
    ZeroMassElement(String),
    #[error("missing {state} mass for `{id}`")]
    MissingMass { state: char, id: String },
    #[error("{state} mass declared for unknown element `{id}`")]
    UnknownMassId { state: char, id: String },
    #[error("{state} masses sum to {sum}, expected 1")]
    MassSumNotOne { state: char, sum: String },
    #[error("ν is undefined on the empty set")]
    EmptySet,
    #[error("queried set has zero total mass")]
    ZeroTotalMass,
    #[error("belief {0} outside [0, 1]")]
    BeliefOutOfRange(String),
    #[error("response function breakpoints must be sorted beliefs in [0, 1]")]
    PhiBadBreakpoints,
    #[error("response function must be non-decreasing")]
    PhiNotMonotone,
    #[error("response function flagged strict but is not strictly increasing")]
    PhiNotStrict,
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseKind {
    Identity,
    PiecewiseLinear,
    Step,
}

/// The receiver's optimal action as a function of his posterior belief.
///
/// Kept rational-valued so equilibrium conditions stay decidable by exact
/// comparison. `Step` is a right-continuous ladder: the action at a
/// breakpoint belief is the level that starts there, which doubles as the
/// explicit tie action at a threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseFunction {
    kind: ResponseKind,
    breakpoints: Vec<(Rational, Rational)>,
    strict: bool,
}

impl ResponseFunction {
    pub fn identity() -> Self {
        ResponseFunction {
            kind: ResponseKind::Identity,
            breakpoints: Vec::new(),
            strict: true,
        }
    }

    /// Ladder over `[0, 1]`: action of belief μ is the action of the last
    /// breakpoint with belief ≤ μ. The first breakpoint must sit at 0.
    pub fn step(breakpoints: Vec<(Rational, Rational)>) -> Result<Self, GameError> {
        let f = ResponseFunction {
            kind: ResponseKind::Step,
            breakpoints,
            strict: false,
        };
        f.validate()?;
        Ok(f)
    }

    /// Linear interpolation through breakpoints spanning `[0, 1]`.
    pub fn piecewise_linear(
        breakpoints: Vec<(Rational, Rational)>,
        strict: bool,
    ) -> Result<Self, GameError> {
        let f = ResponseFunction {
            kind: ResponseKind::PiecewiseLinear,
            breakpoints,
            strict,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn from_parts(
        kind: ResponseKind,
        breakpoints: Vec<(Rational, Rational)>,
        strict: bool,
    ) -> Result<Self, GameError> {
        let f = ResponseFunction {
            kind,
            breakpoints,
            strict,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn kind(&self) -> ResponseKind {
        self.kind
    }

    pub fn breakpoints(&self) -> &[(Rational, Rational)] {
        &self.breakpoints
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    fn validate(&self) -> Result<(), GameError> {
        match self.kind {
            ResponseKind::Identity => Ok(()),
            ResponseKind::Step => {
                self.check_breakpoint_domain()?;
                if !self.breakpoints[0].0.is_zero() {
                    return Err(GameError::PhiBadBreakpoints);
                }
                for w in self.breakpoints.windows(2) {
                    if w[1].1 < w[0].1 {
                        return Err(GameError::PhiNotMonotone);
                    }
                }
                if self.strict {
                    // A ladder is constant between breakpoints.
                    return Err(GameError::PhiNotStrict);
                }
                Ok(())
            }
            ResponseKind::PiecewiseLinear => {
                self.check_breakpoint_domain()?;
                if self.breakpoints.len() < 2
                    || !self.breakpoints[0].0.is_zero()
                    || !self.breakpoints.last().unwrap().0.is_one()
                {
                    return Err(GameError::PhiBadBreakpoints);
                }
                for w in self.breakpoints.windows(2) {
                    if w[1].0 == w[0].0 || w[1].1 < w[0].1 {
                        return Err(GameError::PhiNotMonotone);
                    }
                    if self.strict && w[1].1 == w[0].1 {
                        return Err(GameError::PhiNotStrict);
                    }
                }
                Ok(())
            }
        }
    }

    fn check_breakpoint_domain(&self) -> Result<(), GameError> {
        if self.breakpoints.is_empty() {
            return Err(GameError::PhiBadBreakpoints);
        }
        for (b, _) in &self.breakpoints {
            if b.is_negative() || b > &Rational::one() {
                return Err(GameError::PhiBadBreakpoints);
            }
        }
        for w in self.breakpoints.windows(2) {
            if w[1].0 < w[0].0 {
                return Err(GameError::PhiBadBreakpoints);
            }
        }
        Ok(())
    }

    /// Evaluates φ at a belief in `[0, 1]`; exact at breakpoints.
    pub fn apply(&self, belief: &Rational) -> Result<Rational, GameError> {
        if belief.is_negative() || belief > &Rational::one() {
            return Err(GameError::BeliefOutOfRange(crate::rat::format_rational(
                belief,
            )));
        }
        match self.kind {
            ResponseKind::Identity => Ok(belief.clone()),
            ResponseKind::Step => {
                let mut action = &self.breakpoints[0].1;
                for (b, a) in &self.breakpoints {
                    if b <= belief {
                        action = a;
                    } else {
                        break;
                    }
                }
                Ok(action.clone())
            }
            ResponseKind::PiecewiseLinear => {
                for w in self.breakpoints.windows(2) {
                    let (ref b0, ref a0) = w[0];
                    let (ref b1, ref a1) = w[1];
                    if belief >= b0 && belief <= b1 {
                        let t = (belief - b0) / (b1 - b0);
                        return Ok(a0 + (a1 - a0) * t);
                    }
                }
                unreachable!("breakpoints span [0, 1]")
            }
        }
    }
}

/// An evidence space together with a prior, the two evidence measures, and
/// the receiver's response function. Immutable after construction.
#[derive(Debug, Clone)]
pub struct GameSpec {
    space: EvidenceSpace,
    prior: Rational,
    fg: Vec<Rational>,
    fb: Vec<Rational>,
    phi: ResponseFunction,
}

impl GameSpec {
    /// Masses keyed by element id; every element must appear in both maps.
    pub fn new(
        space: EvidenceSpace,
        prior: Rational,
        fg: &BTreeMap<String, Rational>,
        fb: &BTreeMap<String, Rational>,
        phi: ResponseFunction,
    ) -> Result<Self, GameError> {
        for (state, map) in [('G', fg), ('B', fb)] {
            for id in map.keys() {
                if !space.contains(id) {
                    return Err(GameError::UnknownMassId {
                        state,
                        id: id.clone(),
                    });
                }
            }
        }
        let mut fg_v = Vec::with_capacity(space.len());
        let mut fb_v = Vec::with_capacity(space.len());
        for id in space.ids() {
            fg_v.push(
                fg.get(id)
                    .cloned()
                    .ok_or_else(|| GameError::MissingMass {
                        state: 'G',
                        id: id.clone(),
                    })?,
            );
            fb_v.push(
                fb.get(id)
                    .cloned()
                    .ok_or_else(|| GameError::MissingMass {
                        state: 'B',
                        id: id.clone(),
                    })?,
            );
        }
        Self::from_indexed(space, prior, fg_v, fb_v, phi)
    }

    /// Masses aligned with `space.ids()` order.
    pub fn from_indexed(
        space: EvidenceSpace,
        prior: Rational,
        fg: Vec<Rational>,
        fb: Vec<Rational>,
        phi: ResponseFunction,
    ) -> Result<Self, GameError> {
        if !prior.is_positive() || prior >= Rational::one() {
            return Err(GameError::PriorOutOfRange(crate::rat::format_rational(
                &prior,
            )));
        }
        assert_eq!(fg.len(), space.len());
        assert_eq!(fb.len(), space.len());
        for (i, id) in space.ids().iter().enumerate() {
            if fg[i].is_negative() || fb[i].is_negative() {
                return Err(GameError::NegativeMass(id.clone()));
            }
            if fg[i].is_zero() && fb[i].is_zero() {
                return Err(GameError::ZeroMassElement(id.clone()));
            }
        }
        for (state, masses) in [('G', &fg), ('B', &fb)] {
            let sum: Rational = masses.iter().sum();
            if !sum.is_one() {
                return Err(GameError::MassSumNotOne {
                    state,
                    sum: crate::rat::format_rational(&sum),
                });
            }
        }
        phi.validate()?;
        Ok(GameSpec {
            space,
            prior,
            fg,
            fb,
            phi,
        })
    }

    pub fn space(&self) -> &EvidenceSpace {
        &self.space
    }

    pub fn prior(&self) -> &Rational {
        &self.prior
    }

    pub fn phi(&self) -> &ResponseFunction {
        &self.phi
    }

    pub fn fg_of(&self, id: &str) -> Result<&Rational, GameError> {
        Ok(&self.fg[self.space.index_of(id)?])
    }

    pub fn fb_of(&self, id: &str) -> Result<&Rational, GameError> {
        Ok(&self.fb[self.space.index_of(id)?])
    }

    /// ν(A): the posterior that the state is good given evidence in `A`,
    /// computed exactly.
    pub fn nu<S: AsRef<str>>(&self, a: &[S]) -> Result<Rational, GameError> {
        let elems = self.space.element_bitset(a)?;
        if elems.count_ones(..) == 0 {
            return Err(GameError::EmptySet);
        }
        self.nu_elements(&elems)
    }

    /// ξ(A) = φ(ν(A)).
    pub fn xi<S: AsRef<str>>(&self, a: &[S]) -> Result<Rational, GameError> {
        let nu = self.nu(a)?;
        self.phi.apply(&nu)
    }

    // ----- index-level accessors for the solver -----

    pub(crate) fn fg_idx(&self, e: usize) -> &Rational {
        &self.fg[e]
    }

    pub(crate) fn fb_idx(&self, e: usize) -> &Rational {
        &self.fb[e]
    }

    pub(crate) fn mass_pair(&self, elems: &FixedBitSet) -> (Rational, Rational) {
        let mut g = Rational::zero();
        let mut b = Rational::zero();
        for e in elems.ones() {
            g += &self.fg[e];
            b += &self.fb[e];
        }
        (g, b)
    }

    pub(crate) fn nu_elements(&self, elems: &FixedBitSet) -> Result<Rational, GameError> {
        let (g, b) = self.mass_pair(elems);
        self.nu_from_masses(&g, &b)
    }

    pub(crate) fn nu_from_masses(&self, g: &Rational, b: &Rational) -> Result<Rational, GameError> {
        let num = g * &self.prior;
        let den = &num + b * (Rational::one() - &self.prior);
        if den.is_zero() {
            return Err(GameError::ZeroTotalMass);
        }
        Ok(num / den)
    }

    pub(crate) fn nu_singleton(&self, e: usize) -> Rational {
        self.nu_from_masses(&self.fg[e], &self.fb[e])
            .expect("per-element masses cannot both vanish")
    }

    pub(crate) fn xi_singleton(&self, e: usize) -> Rational {
        self.phi
            .apply(&self.nu_singleton(e))
            .expect("ν lies in [0, 1]")
    }
}
