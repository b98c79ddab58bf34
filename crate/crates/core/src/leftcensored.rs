//! Closed forms for the left-censored disclosure model, plus an exact
//! finite truncation feeding the generic solver.
//!
//! Evidence is a sequence of binary signals; a message is a suffix (the most
//! recent signals). The closed forms involve α = (1-√(1-4pq))/2 and are
//! float-valued; the truncated game builder stays fully rational so the core
//! solver can certify it exactly.

use num_traits::{One, Signed};
use thiserror::Error;

use crate::game::{GameError, GameSpec, ResponseFunction};
use crate::poset::{build_space, SpaceError};
use crate::rat::Rational;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LcError {
    #[error("parameters must satisfy 0 < q < p and p + q < 1, got {0}")]
    BadParams(String),
    #[error("pi0 must lie strictly between 0 and 1")]
    BadPrior,
    #[error("gamma and kappa must both exceed 1")]
    BadShape,
    #[error("Lmax must lie in 1..=13, got {0}")]
    BadTruncation(usize),
    #[error("evidence ids contain only `g` and `b` signals (or `∅`), got `{0}`")]
    BadEvidence(String),
    #[error("closed-form identity check failed: {0}")]
    IdentityCheck(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Signal-process parameters: each signal matches the state with probability
/// p/(p+q) and the record length is geometric with continuation p + q.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcParams {
    pub p: f64,
    pub q: f64,
    pub pi0: f64,
}

impl LcParams {
    pub fn new(p: f64, q: f64, pi0: f64) -> Result<Self, LcError> {
        if !(0.0 < q && q < p && p < 1.0 && p + q < 1.0) {
            return Err(LcError::BadParams(format!("p = {p}, q = {q}")));
        }
        if !(0.0 < pi0 && pi0 < 1.0) {
            return Err(LcError::BadPrior);
        }
        Ok(LcParams { p, q, pi0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signal {
    G,
    B,
}

/// A finite signal sequence, oldest first; the empty sequence is `∅`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LcEvidence {
    signals: Vec<Signal>,
}

impl LcEvidence {
    pub fn new(signals: Vec<Signal>) -> Self {
        LcEvidence { signals }
    }

    pub fn empty() -> Self {
        LcEvidence {
            signals: Vec::new(),
        }
    }

    /// Parses an element id: `∅` (or the empty string) or a `g`/`b` string.
    pub fn parse(id: &str) -> Result<Self, LcError> {
        if id == "∅" || id.is_empty() {
            return Ok(Self::empty());
        }
        let signals = id
            .chars()
            .map(|c| match c {
                'g' => Ok(Signal::G),
                'b' => Ok(Signal::B),
                _ => Err(LcError::BadEvidence(id.to_string())),
            })
            .collect::<Result<_, _>>()?;
        Ok(LcEvidence { signals })
    }

    pub fn id(&self) -> String {
        if self.signals.is_empty() {
            return "∅".to_string();
        }
        self.signals
            .iter()
            .map(|s| match s {
                Signal::G => 'g',
                Signal::B => 'b',
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    pub fn count_good(&self) -> i64 {
        self.signals.iter().filter(|s| **s == Signal::G).count() as i64
    }

    pub fn count_bad(&self) -> i64 {
        self.len() as i64 - self.count_good()
    }

    /// D(e) = G(e) - B(e).
    pub fn diff(&self) -> i64 {
        self.count_good() - self.count_bad()
    }

    /// The k most recent signals; k = 0 gives `∅`.
    pub fn suffix(&self, k: usize) -> LcEvidence {
        assert!(k <= self.len());
        LcEvidence {
            signals: self.signals[self.len() - k..].to_vec(),
        }
    }

    /// `self ⪯ other` under left censoring: self is a suffix of other.
    pub fn le(&self, other: &LcEvidence) -> bool {
        self.len() <= other.len() && other.suffix(self.len()) == *self
    }
}

/// α = (1 - √(1 - 4pq)) / 2, the small root of α² - α + pq = 0.
pub fn lc_alpha(params: &LcParams) -> f64 {
    (1.0 - (1.0 - 4.0 * params.p * params.q).sqrt()) / 2.0
}

/// N(e): the best signal difference over all suffixes, never negative.
pub fn lc_n(e: &LcEvidence) -> i64 {
    (0..=e.len()).map(|k| e.suffix(k).diff()).max().unwrap_or(0)
}

/// The sender's value for evidence with suffix statistic `n`.
pub fn lc_value(n: i64, params: &LcParams) -> f64 {
    assert!(n >= 0);
    let alpha = lc_alpha(params);
    let ratio = (params.p - alpha) / (params.q - alpha);
    let odds = (1.0 - params.pi0) / params.pi0;
    1.0 / (1.0 + odds * ratio * (params.q / params.p).powi(n as i32 + 1))
}

/// The truthfulness slack n* = log_{p/q}((p-α)/(q-α)) - 1 > 0.
pub fn lc_n_star(params: &LcParams) -> f64 {
    let alpha = lc_alpha(params);
    let ratio = (params.p - alpha) / (params.q - alpha);
    ratio.ln() / (params.p / params.q).ln() - 1.0
}

/// Truthful disclosure is optimal exactly when D(e) ≥ N(e) - n*.
pub fn lc_truthful(e: &LcEvidence, params: &LcParams) -> bool {
    e.diff() as f64 >= lc_n(e) as f64 - lc_n_star(params)
}

/// The length every equilibrium message must reach: the longest suffix
/// attaining the maximal signal difference.
pub fn lc_longest_optimal_truncation(e: &LcEvidence) -> usize {
    let mut best = i64::MIN;
    let mut arg = 0usize;
    for k in 0..=e.len() {
        let d = e.suffix(k).diff();
        if d >= best {
            best = d;
            arg = k;
        }
    }
    arg
}

/// Masses of the fiber {e : N(e) = n} under each state.
pub fn lc_fiber_masses(n: i64, params: &LcParams) -> (f64, f64) {
    assert!(n >= 0);
    let alpha = lc_alpha(params);
    let fg = ((params.q - alpha) / params.q) * (alpha / params.q).powi(n as i32);
    let fb = ((params.p - alpha) / params.p) * (alpha / params.p).powi(n as i32);
    (fg, fb)
}

/// Recovers (p, q) from informativeness γ = p/q and expected length
/// κ = 1/(1-p-q).
pub fn lc_params_from(gamma: f64, kappa: f64, pi0: f64) -> Result<LcParams, LcError> {
    if !(gamma > 1.0 && kappa > 1.0) {
        return Err(LcError::BadShape);
    }
    let s = 1.0 - 1.0 / kappa;
    let p = gamma * s / (1.0 + gamma);
    let q = s / (1.0 + gamma);
    LcParams::new(p, q, pi0)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepGrid {
    GammaKappa(Vec<(f64, f64)>),
    PQ(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub gamma: f64,
    pub kappa: f64,
    pub p: f64,
    pub q: f64,
    pub n: i64,
    pub value: f64,
}

/// Evaluates the closed-form value on a parameter grid. Each point is
/// cross-checked against the alternative (γ, κ) expansion of (p-α)/(q-α):
///
///   (γ-1)²κ/(2(γ+1)) + 2γ/(γ+1) + (γ-1)√Δ/2,  Δ = κ² - 4γ(κ-1)²/(γ+1)².
pub fn lc_sweep(grid: &SweepGrid, n_values: &[i64], pi0: f64) -> Result<Vec<SweepRow>, LcError> {
    let points: Vec<LcParams> = match grid {
        SweepGrid::GammaKappa(pairs) => pairs
            .iter()
            .map(|&(g, k)| lc_params_from(g, k, pi0))
            .collect::<Result<_, _>>()?,
        SweepGrid::PQ(pairs) => pairs
            .iter()
            .map(|&(p, q)| LcParams::new(p, q, pi0))
            .collect::<Result<_, _>>()?,
    };
    let mut rows = Vec::with_capacity(points.len() * n_values.len());
    for params in points {
        let gamma = params.p / params.q;
        let kappa = 1.0 / (1.0 - params.p - params.q);
        let alpha = lc_alpha(&params);
        let ratio = (params.p - alpha) / (params.q - alpha);
        let delta = kappa * kappa - 4.0 * gamma / (gamma + 1.0).powi(2) * (kappa - 1.0).powi(2);
        let expansion = (gamma - 1.0).powi(2) / (2.0 * (gamma + 1.0)) * kappa
            + 2.0 * gamma / (gamma + 1.0)
            + (gamma - 1.0) / 2.0 * delta.sqrt();
        let rel = (ratio - expansion).abs() / ratio.abs().max(1.0);
        if rel > 1e-9 {
            return Err(LcError::IdentityCheck(format!(
                "(p-α)/(q-α) = {ratio} vs expansion {expansion} at γ = {gamma}, κ = {kappa}"
            )));
        }
        for &n in n_values {
            rows.push(SweepRow {
                gamma,
                kappa,
                p: params.p,
                q: params.q,
                n,
                value: lc_value(n, &params),
            });
        }
    }
    Ok(rows)
}

/// Ids, generator edges, and exact masses of the truncation to sequences of
/// length ≤ `lmax`. Masses are rescaled by the state-independent factor
/// 1/(1-(p+q)^{lmax+1}), which leaves every Bayes ratio unchanged.
pub(crate) fn lc_truncated_parts(
    p: &Rational,
    q: &Rational,
    lmax: usize,
) -> Result<(Vec<String>, Vec<(String, String)>, Vec<Rational>, Vec<Rational>), LcError> {
    if !q.is_positive() || q >= p || (p + q) >= Rational::one() {
        return Err(LcError::BadParams(format!(
            "p = {}, q = {}",
            crate::rat::format_rational(p),
            crate::rat::format_rational(q)
        )));
    }
    if lmax == 0 || lmax > 13 {
        return Err(LcError::BadTruncation(lmax));
    }

    let rest = Rational::one() - p - q;
    let scale = Rational::one() - (p + q).pow(lmax as i32 + 1);

    let mut ids = vec!["∅".to_string()];
    let mut edges = Vec::new();
    let mut fg = vec![&rest / &scale];
    let mut fb = vec![&rest / &scale];
    // Layer by layer; extending a record means prepending an older signal.
    let mut layer: Vec<(String, Rational, Rational)> = vec![("".into(), fg[0].clone(), fb[0].clone())];
    for _ in 1..=lmax {
        let mut next = Vec::with_capacity(layer.len() * 2);
        for (suffix, g_mass, b_mass) in &layer {
            let parent_id = if suffix.is_empty() {
                "∅".to_string()
            } else {
                suffix.clone()
            };
            for (sig, g_f, b_f) in [('g', p, q), ('b', q, p)] {
                let id = format!("{sig}{suffix}");
                let g_mass = g_mass * g_f;
                let b_mass = b_mass * b_f;
                ids.push(id.clone());
                edges.push((parent_id.clone(), id.clone()));
                fg.push(g_mass.clone());
                fb.push(b_mass.clone());
                next.push((id, g_mass, b_mass));
            }
        }
        layer = next;
    }
    Ok((ids, edges, fg, fb))
}

/// Finite truncation of the left-censored game as an exact `GameSpec` with
/// the identity response function.
pub fn lc_truncated_game(
    p: &Rational,
    q: &Rational,
    pi0: &Rational,
    lmax: usize,
) -> Result<GameSpec, LcError> {
    let (ids, edges, fg, fb) = lc_truncated_parts(p, q, lmax)?;
    let space = build_space(&ids, &edges)?;
    Ok(GameSpec::from_indexed(
        space,
        pi0.clone(),
        fg,
        fb,
        ResponseFunction::identity(),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rational;

    fn ev(s: &str) -> LcEvidence {
        LcEvidence::parse(s).unwrap()
    }

    fn std_params() -> LcParams {
        LcParams::new(4.0 / 9.0, 2.0 / 9.0, 0.5).unwrap()
    }

    #[test]
    fn alpha_examples() {
        // 1 - 4pq = 49/81 makes α exactly 1/9.
        let a = lc_alpha(&std_params());
        assert!((a - 1.0 / 9.0).abs() < 1e-15);

        let b = lc_alpha(&LcParams::new(0.5, 0.25, 0.5).unwrap());
        assert!((b - 0.146_446_609_406_726_24).abs() < 1e-12);

        let p = std_params();
        assert!((a * a - a + p.p * p.q).abs() < 1e-12);
        assert!(0.0 < a && a < p.q);
    }

    #[test]
    fn n_examples() {
        assert_eq!(lc_n(&ev("bbbgb")), 0);
        assert_eq!(lc_n(&ev("gg")), 2);
        assert_eq!(lc_n(&ev("∅")), 0);
        assert_eq!(lc_n(&ev("bb")), 0);
        assert_eq!(lc_n(&ev("gbb")), 0);
        assert_eq!(lc_n(&ev("bgg")), 2);
    }

    #[test]
    fn value_examples() {
        let p = std_params();
        assert!((lc_value(0, &p) - 0.4).abs() < 1e-14);
        assert!((lc_value(1, &p) - 4.0 / 7.0).abs() < 1e-14);
        assert!((lc_value(2, &p) - 8.0 / 11.0).abs() < 1e-14);

        let q = LcParams::new(0.5, 0.25, 0.5).unwrap();
        assert!((lc_value(0, &q) - 0.369_398).abs() < 1e-6);

        // V increases in N toward 1.
        let mut last = 0.0;
        for n in 0..40 {
            let v = lc_value(n, &p);
            assert!(v > last && v < 1.0);
            last = v;
        }
        assert!(lc_value(60, &p) > 1.0 - 1e-9);
    }

    #[test]
    fn n_star_examples() {
        let p = std_params();
        assert!((lc_n_star(&p) - (3f64.log2() - 1.0)).abs() < 1e-12);

        let q = LcParams::new(0.6, 0.35, 0.5).unwrap();
        // α = 0.3 exactly here since 1 - 4pq = 0.16.
        assert!((lc_alpha(&q) - 0.3).abs() < 1e-15);
        assert!((lc_n_star(&q) - (6f64.ln() / (12f64 / 7.0).ln() - 1.0)).abs() < 1e-12);
        assert!((lc_n_star(&q) - 2.324_25).abs() < 1e-4);

        // (p+q)(1-p-q) ≤ pq forces n* ≥ 1.
        assert!(0.95 * 0.05 <= 0.6 * 0.35);
        assert!(lc_n_star(&q) >= 1.0);
    }

    #[test]
    fn truthful_examples() {
        let favored = LcParams::new(0.6, 0.35, 0.5).unwrap();
        assert!(lc_truthful(&ev("b"), &favored));
        let sparse = std_params();
        assert!(!lc_truthful(&ev("b"), &sparse));
        // D = N is always truthful since n* > 0.
        assert!(lc_truthful(&ev("gg"), &sparse));
        assert!(lc_truthful(&ev("∅"), &sparse));
    }

    #[test]
    fn truthful_matches_value_comparison() {
        // Independent route: ν(e) ≥ V(e) decided from the closed forms.
        let grids = [
            std_params(),
            LcParams::new(0.6, 0.35, 0.5).unwrap(),
            LcParams::new(0.5, 0.25, 0.3).unwrap(),
        ];
        let seqs = ["∅", "b", "g", "bb", "gb", "bg", "bbgb", "ggbbb", "bgbgg"];
        for params in &grids {
            let odds = (1.0 - params.pi0) / params.pi0;
            for s in seqs {
                let e = ev(s);
                let nu = 1.0 / (1.0 + odds * (params.q / params.p).powi(e.diff() as i32));
                let v = lc_value(lc_n(&e), params);
                assert_eq!(
                    lc_truthful(&e, params),
                    nu >= v - 1e-12,
                    "mismatch at {s} with p = {}",
                    params.p
                );
            }
        }
    }

    #[test]
    fn longest_truncation_examples() {
        assert_eq!(lc_longest_optimal_truncation(&ev("bbbgb")), 2);
        assert_eq!(lc_longest_optimal_truncation(&ev("gbg")), 3);
        assert_eq!(lc_longest_optimal_truncation(&ev("∅")), 0);
        assert_eq!(lc_longest_optimal_truncation(&ev("b")), 0);
        assert_eq!(lc_longest_optimal_truncation(&ev("bgb")), 2);
    }

    #[test]
    fn fiber_mass_examples() {
        let p = std_params();
        for n in 0..6 {
            let (fg, fb) = lc_fiber_masses(n, &p);
            assert!((fg - 0.5 * 0.5f64.powi(n as i32)).abs() < 1e-14);
            assert!((fb - 0.75 * 0.25f64.powi(n as i32)).abs() < 1e-14);
        }
        // Geometric sums reach 1 in each state.
        let (sg, sb) = (0..200).fold((0.0, 0.0), |(sg, sb), n| {
            let (fg, fb) = lc_fiber_masses(n, &p);
            (sg + fg, sb + fb)
        });
        assert!((sg - 1.0).abs() < 1e-12);
        assert!((sb - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fiber_recursions_hold() {
        let params = std_params();
        let (g0, b0) = lc_fiber_masses(0, &params);
        let (g1, b1) = lc_fiber_masses(1, &params);
        let rest = 1.0 - params.p - params.q;
        assert!((g0 - (rest + params.q * (g0 + g1))).abs() < 1e-12);
        assert!((b0 - (rest + params.p * (b0 + b1))).abs() < 1e-12);
        for n in 1..8 {
            let (gp, bp) = lc_fiber_masses(n - 1, &params);
            let (gc, bc) = lc_fiber_masses(n, &params);
            let (gn, bn) = lc_fiber_masses(n + 1, &params);
            assert!((gc - (params.p * gp + params.q * gn)).abs() < 1e-12);
            assert!((bc - (params.q * bp + params.p * bn)).abs() < 1e-12);
        }
    }

    #[test]
    fn fiber_nu_equals_value() {
        for params in [std_params(), LcParams::new(0.5, 0.2, 0.35).unwrap()] {
            for n in 0..8 {
                let (fg, fb) = lc_fiber_masses(n, &params);
                let nu = fg * params.pi0 / (fg * params.pi0 + fb * (1.0 - params.pi0));
                assert!((nu - lc_value(n, &params)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn params_from_shape_round_trips() {
        let p = lc_params_from(2.0, 3.0, 0.5).unwrap();
        assert!((p.p - 4.0 / 9.0).abs() < 1e-15);
        assert!((p.q - 2.0 / 9.0).abs() < 1e-15);

        let p2 = lc_params_from(2.0, 2.0, 0.5).unwrap();
        assert!((p2.p - 1.0 / 3.0).abs() < 1e-15);
        assert!((p2.q - 1.0 / 6.0).abs() < 1e-15);

        for (g, k) in [(1.5, 1.3), (3.0, 7.0), (10.0, 2.0)] {
            let pa = lc_params_from(g, k, 0.5).unwrap();
            assert!((pa.p / pa.q - g).abs() < 1e-12);
            assert!((1.0 / (1.0 - pa.p - pa.q) - k).abs() < 1e-9);
        }

        // κ → 1⁺ sends both probabilities to zero.
        let tiny = lc_params_from(2.0, 1.0 + 1e-9, 0.5).unwrap();
        assert!(tiny.p < 1e-8 && tiny.q < 1e-8);

        assert_eq!(lc_params_from(0.9, 2.0, 0.5), Err(LcError::BadShape));
    }

    #[test]
    fn sweep_examples() {
        let grid = SweepGrid::GammaKappa(vec![(2.0, 2.0), (2.0, 3.0)]);
        let rows = lc_sweep(&grid, &[2], 0.5).unwrap();
        assert_eq!(rows.len(), 2);
        assert!((rows[0].value - 0.758_398).abs() < 1e-6);
        assert!((rows[1].value - 8.0 / 11.0).abs() < 1e-12);
        assert!(rows[0].value > rows[1].value, "value decreases in κ");

        let empty = lc_sweep(&SweepGrid::PQ(Vec::new()), &[0, 1], 0.5).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn truncated_game_structure() {
        let p = rational(4, 9);
        let q = rational(2, 9);
        let pi0 = rational(1, 2);
        let game = lc_truncated_game(&p, &q, &pi0, 1).unwrap();
        assert_eq!(game.space().len(), 3);
        let ids: Vec<&str> = game.space().ids().iter().map(|s| s.as_str()).collect();
        assert_eq!(ids, vec!["∅", "g", "b"]);
        // Masses are proportional to (1-p-q)·{1, p, q} per state, rescaled.
        let scale = rational(1, 1) - rational(6, 9).pow(2);
        assert_eq!(game.fg_of("∅").unwrap(), &(rational(3, 9) / scale.clone()));
        assert_eq!(
            game.fg_of("g").unwrap(),
            &(rational(3, 9) * rational(4, 9) / scale.clone())
        );
        assert_eq!(
            game.fb_of("g").unwrap(),
            &(rational(3, 9) * rational(2, 9) / scale)
        );

        let bigger = lc_truncated_game(&p, &q, &pi0, 6).unwrap();
        assert_eq!(bigger.space().len(), 127);
        // ν of the whole space is the prior: lengths are uninformative.
        let all: Vec<&String> = bigger.space().ids().iter().collect();
        assert_eq!(bigger.nu(&all).unwrap(), rational(1, 2));
    }

    #[test]
    fn truncated_game_order_is_suffix_order() {
        let game = lc_truncated_game(&rational(4, 9), &rational(2, 9), &rational(1, 2), 3).unwrap();
        let space = game.space();
        assert!(space.le("gb", "bgb").unwrap());
        assert!(!space.le("gb", "gbg").unwrap());
        assert!(space.le("∅", "bgb").unwrap());
        assert!(!space.le("bgb", "gb").unwrap());
    }

    #[test]
    fn truncation_guards() {
        assert!(matches!(
            lc_truncated_game(&rational(2, 9), &rational(4, 9), &rational(1, 2), 3),
            Err(LcError::BadParams(_))
        ));
        assert!(matches!(
            lc_truncated_game(&rational(4, 9), &rational(2, 9), &rational(1, 2), 14),
            Err(LcError::BadTruncation(14))
        ));
    }
}
