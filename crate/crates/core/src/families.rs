//! Named evidence-structure families emitted as game files.
//!
//! Infinite families are truncated mass-exactly: chain-like structures get a
//! tail atom above everything they dominate carrying the residual mass, and
//! the left-censored family rescales by its state-independent length tail.

use num_bigint::BigInt;
use num_traits::Pow;
use thiserror::Error;

use crate::game::ResponseFunction;
use crate::gamefile::GameFile;
use crate::leftcensored::{lc_truncated_parts, LcError};
use crate::rat::{rational, Rational};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FamilyError {
    #[error("family parameter out of range: {0}")]
    BadParameter(String),
    #[error("expected {expected} masses, got {got}")]
    MassCount { expected: usize, got: usize },
    #[error(transparent)]
    Lc(#[from] LcError),
}

fn pow2(k: usize) -> Rational {
    Rational::new(BigInt::from(1), BigInt::from(2).pow(k as u32))
}

fn pow3(k: usize) -> Rational {
    Rational::new(BigInt::from(1), BigInt::from(3).pow(k as u32))
}

/// Geometric-mass chain 0 ⪯ 1 ⪯ … ⪯ T with a tail atom on top holding the
/// residual mass of everything above T.
pub fn linear_geometric(t: usize) -> Result<GameFile, FamilyError> {
    if t == 0 {
        return Err(FamilyError::BadParameter("T must be at least 1".into()));
    }
    let mut ids: Vec<String> = (0..=t).map(|e| e.to_string()).collect();
    ids.push("tail".to_string());
    let edges: Vec<(String, String)> = ids
        .windows(2)
        .map(|w| (w[0].clone(), w[1].clone()))
        .collect();

    let mut fg = vec![("0".to_string(), rational(1, 2))];
    let mut fb = vec![("0".to_string(), rational(1, 2))];
    for e in 1..=t {
        fg.push((e.to_string(), pow2(e + 1)));
        fb.push((e.to_string(), pow3(e)));
    }
    fg.push(("tail".to_string(), pow2(t + 1)));
    fb.push(("tail".to_string(), pow3(t) / rational(2, 1)));

    Ok(GameFile::from_parts(
        ids,
        edges,
        &rational(1, 2),
        &fg,
        &fb,
        &ResponseFunction::identity(),
    ))
}

/// One uninformed element below n informed ones. Masses may be supplied per
/// element (e0 first); the default splits half the mass on e0 and spreads
/// the rest, with the bad state leaning harder on being uninformed.
pub fn dye(
    n: usize,
    fg: Option<Vec<Rational>>,
    fb: Option<Vec<Rational>>,
    pi0: &Rational,
) -> Result<GameFile, FamilyError> {
    if n == 0 {
        return Err(FamilyError::BadParameter("n must be at least 1".into()));
    }
    let mut ids = vec!["e0".to_string()];
    for i in 1..=n {
        ids.push(format!("e{i}"));
    }
    let edges: Vec<(String, String)> = (1..=n)
        .map(|i| ("e0".to_string(), format!("e{i}")))
        .collect();

    let defaults = |head: Rational| -> Vec<Rational> {
        let rest = (Rational::new(BigInt::from(1), BigInt::from(1)) - &head)
            / rational(n as i64, 1);
        let mut v = vec![head];
        v.extend(std::iter::repeat_n(rest, n));
        v
    };
    let fg = fg.unwrap_or_else(|| defaults(rational(1, 2)));
    let fb = fb.unwrap_or_else(|| defaults(rational(2, 3)));
    for masses in [&fg, &fb] {
        if masses.len() != n + 1 {
            return Err(FamilyError::MassCount {
                expected: n + 1,
                got: masses.len(),
            });
        }
    }
    let pair = |m: &[Rational]| -> Vec<(String, Rational)> {
        ids.iter().cloned().zip(m.iter().cloned()).collect()
    };
    Ok(GameFile::from_parts(
        ids.clone(),
        edges,
        pi0,
        &pair(&fg),
        &pair(&fb),
        &ResponseFunction::identity(),
    ))
}

/// Componentwise-ordered grid with product-geometric masses: more evidence
/// in any coordinate raises ν.
pub fn multidim(shape: &[usize], pi0: &Rational) -> Result<GameFile, FamilyError> {
    if shape.is_empty() || shape.iter().any(|&s| s == 0) || shape.iter().product::<usize>() > 4096
    {
        return Err(FamilyError::BadParameter(format!("shape {shape:?}")));
    }
    let mut coords: Vec<Vec<usize>> = vec![Vec::new()];
    for &s in shape {
        coords = coords
            .into_iter()
            .flat_map(|c| {
                (0..s).map(move |i| {
                    let mut c = c.clone();
                    c.push(i);
                    c
                })
            })
            .collect();
    }
    let id_of = |c: &[usize]| {
        c.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let ids: Vec<String> = coords.iter().map(|c| id_of(c)).collect();
    let mut edges = Vec::new();
    for c in &coords {
        for d in 0..c.len() {
            if c[d] > 0 {
                let mut below = c.clone();
                below[d] -= 1;
                edges.push((id_of(&below), id_of(c)));
            }
        }
    }
    // Unnormalized product-geometric weights, then exact normalization.
    let weight = |c: &[usize], ratio: &Rational| -> Rational {
        c.iter()
            .map(|&x| ratio.pow(x as i32))
            .product()
    };
    let build = |ratio: Rational| -> Vec<(String, Rational)> {
        let raw: Vec<Rational> = coords.iter().map(|c| weight(c, &ratio)).collect();
        let total: Rational = raw.iter().sum();
        ids.iter()
            .cloned()
            .zip(raw.into_iter().map(|w| w / &total))
            .collect()
    };
    Ok(GameFile::from_parts(
        ids.clone(),
        edges,
        pi0,
        &build(rational(1, 2)),
        &build(rational(1, 3)),
        &ResponseFunction::identity(),
    ))
}

/// Primary/secondary evidence with the lexicographic disclosure rule: all
/// primary plus part of the secondary, or strictly less primary with any
/// claim about the secondary.
pub fn lex(p_max: usize, s_max: usize, pi0: &Rational) -> Result<GameFile, FamilyError> {
    if p_max == 0 || s_max == 0 || (p_max + 1) * (s_max + 1) > 4096 {
        return Err(FamilyError::BadParameter(format!("{p_max}x{s_max}")));
    }
    let id_of = |p: usize, s: usize| format!("{p},{s}");
    let mut ids = Vec::new();
    let mut edges = Vec::new();
    for p in 0..=p_max {
        for s in 0..=s_max {
            ids.push(id_of(p, s));
            if s > 0 {
                edges.push((id_of(p, s - 1), id_of(p, s)));
            }
        }
        if p > 0 {
            // Anything with less primary evidence is disclosable, reached
            // through the previous level's top secondary count.
            edges.push((id_of(p - 1, s_max), id_of(p, 0)));
        }
    }
    let build = |ratio: Rational| -> Vec<(String, Rational)> {
        let raw: Vec<Rational> = (0..=p_max)
            .flat_map(|p| (0..=s_max).map(move |s| (p, s)))
            .map(|(p, s)| ratio.clone().pow((p + s) as i32))
            .collect();
        let total: Rational = raw.iter().sum();
        ids.iter()
            .cloned()
            .zip(raw.into_iter().map(|w| w / &total))
            .collect()
    };
    Ok(GameFile::from_parts(
        ids.clone(),
        edges,
        pi0,
        &build(rational(1, 2)),
        &build(rational(1, 3)),
        &ResponseFunction::identity(),
    ))
}

/// Left-censored truncation with exact rational masses.
pub fn left_censored(
    p: &Rational,
    q: &Rational,
    pi0: &Rational,
    lmax: usize,
) -> Result<GameFile, FamilyError> {
    let (ids, edges, fg, fb) = lc_truncated_parts(p, q, lmax)?;
    let pair = |m: Vec<Rational>| -> Vec<(String, Rational)> {
        ids.iter().cloned().zip(m).collect()
    };
    Ok(GameFile::from_parts(
        ids.clone(),
        edges,
        pi0,
        &pair(fg),
        &pair(fb),
        &ResponseFunction::identity(),
    ))
}

/// Geometric-mass chain where the sender is strategic or honest; the honest
/// type can only disclose truthfully. Tail atoms close both type chains.
pub fn honest_type(t: usize, theta: &Rational) -> Result<GameFile, FamilyError> {
    use num_traits::{One, Signed};
    if t == 0 {
        return Err(FamilyError::BadParameter("T must be at least 1".into()));
    }
    if !theta.is_positive() || theta >= &Rational::one() {
        return Err(FamilyError::BadParameter(
            "theta must lie strictly between 0 and 1".into(),
        ));
    }
    let honest = theta.clone();
    let strategic = Rational::one() - theta;

    let s_id = |e: usize| format!("{e}s");
    let h_id = |e: usize| format!("{e}h");
    let mut ids = Vec::new();
    let mut edges = Vec::new();
    for e in 0..=t {
        ids.push(s_id(e));
        ids.push(h_id(e));
        edges.push((h_id(e), s_id(e)));
        if e > 0 {
            edges.push((s_id(e - 1), s_id(e)));
        }
    }
    ids.push("tails".to_string());
    ids.push("tailh".to_string());
    edges.push((s_id(t), "tails".to_string()));
    edges.push(("tailh".to_string(), "tails".to_string()));

    let base_fg = |e: usize| if e == 0 { rational(1, 2) } else { pow2(e + 1) };
    let base_fb = |e: usize| if e == 0 { rational(1, 2) } else { pow3(e) };
    let mut fg = Vec::new();
    let mut fb = Vec::new();
    for e in 0..=t {
        fg.push((s_id(e), base_fg(e) * &strategic));
        fg.push((h_id(e), base_fg(e) * &honest));
        fb.push((s_id(e), base_fb(e) * &strategic));
        fb.push((h_id(e), base_fb(e) * &honest));
    }
    let tail_fg = pow2(t + 1);
    let tail_fb = pow3(t) / rational(2, 1);
    fg.push(("tails".to_string(), &tail_fg * &strategic));
    fg.push(("tailh".to_string(), &tail_fg * &honest));
    fb.push(("tails".to_string(), &tail_fb * &strategic));
    fb.push(("tailh".to_string(), &tail_fb * &honest));

    Ok(GameFile::from_parts(
        ids,
        edges,
        &rational(1, 2),
        &fg,
        &fb,
        &ResponseFunction::identity(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn total(masses: &std::collections::BTreeMap<String, String>) -> Rational {
        masses
            .values()
            .map(|s| crate::rat::parse_rational(s).unwrap())
            .sum()
    }

    #[test]
    fn linear_geometric_masses_sum_to_one_with_exact_tail() {
        let file = linear_geometric(30).unwrap();
        assert_eq!(total(&file.fg), Rational::one());
        assert_eq!(total(&file.fb), Rational::one());
        assert_eq!(file.fg["tail"], crate::rat::format_rational(&pow2(31)));
        assert_eq!(
            file.fb["tail"],
            crate::rat::format_rational(&(pow3(30) / rational(2, 1)))
        );
        file.to_game().unwrap();
    }

    #[test]
    fn every_family_round_trips_at_defaults() {
        let half = rational(1, 2);
        let files = vec![
            linear_geometric(8).unwrap(),
            dye(3, None, None, &half).unwrap(),
            multidim(&[3, 3], &half).unwrap(),
            lex(2, 3, &half).unwrap(),
            left_censored(&rational(4, 9), &rational(2, 9), &half, 3).unwrap(),
            honest_type(6, &half).unwrap(),
        ];
        for file in files {
            let json = file.to_json();
            let reparsed = GameFile::from_json(&json).unwrap();
            assert_eq!(file, reparsed);
            let game = reparsed.to_game().unwrap();
            assert!(game.space().len() >= 2);
        }
    }

    #[test]
    fn dye_structure() {
        let file = dye(3, None, None, &rational(1, 2)).unwrap();
        let game = file.to_game().unwrap();
        let lc = game.space().lower_contour(&["e2"]).unwrap();
        assert_eq!(lc.len(), 2);
        assert!(lc.contains("e0"));
        assert!(matches!(
            dye(2, Some(vec![rational(1, 1)]), None, &rational(1, 2)),
            Err(FamilyError::MassCount { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn multidim_orders_componentwise() {
        let file = multidim(&[3, 2], &rational(1, 2)).unwrap();
        let game = file.to_game().unwrap();
        assert!(game.space().le("1,1", "2,1").unwrap());
        assert!(game.space().le("0,0", "2,1").unwrap());
        assert!(!game.space().le("2,0", "1,1").unwrap());
        assert_eq!(game.space().len(), 6);
    }

    #[test]
    fn lex_orders_lexicographically() {
        let file = lex(2, 2, &rational(1, 2)).unwrap();
        let game = file.to_game().unwrap();
        // Same primary: secondary must not exceed.
        assert!(game.space().le("1,1", "1,2").unwrap());
        assert!(!game.space().le("1,2", "1,1").unwrap());
        // Less primary: any secondary is claimable.
        assert!(game.space().le("0,2", "1,0").unwrap());
        assert!(game.space().le("1,2", "2,0").unwrap());
        assert!(!game.space().le("2,0", "1,2").unwrap());
    }

    #[test]
    fn honest_type_masses_and_order() {
        let file = honest_type(10, &rational(1, 2)).unwrap();
        assert_eq!(total(&file.fg), Rational::one());
        assert_eq!(total(&file.fb), Rational::one());
        let game = file.to_game().unwrap();
        // Honest evidence is only disclosable from its own strategic twin
        // and above; strategic senders can reach any lower honest tag.
        assert!(game.space().le("2h", "2s").unwrap());
        assert!(game.space().le("2h", "4s").unwrap());
        assert!(!game.space().le("2h", "4h").unwrap());
        assert!(!game.space().le("2s", "2h").unwrap());
        assert!(game.space().le("tailh", "tails").unwrap());
        assert!(game.space().le("3s", "tails").unwrap());
    }
}
