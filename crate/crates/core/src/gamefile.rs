//! On-disk game description: elements, generator edges, exact rational
//! masses and prior as `"num/den"` strings, and the response function.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{GameError, GameSpec, ResponseFunction, ResponseKind};
use crate::poset::{build_space, SpaceError};
use crate::rat::{format_rational, parse_rational, Rational, RationalParseError};

#[derive(Debug, Error)]
pub enum FileError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad rational in field `{field}`: {source}")]
    Rational {
        field: String,
        source: RationalParseError,
    },
    #[error("unknown response kind `{0}`")]
    UnknownPhiKind(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiFile {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub breakpoints: Vec<(String, String)>,
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub elements: Vec<String>,
    pub edges: Vec<(String, String)>,
    pub pi0: String,
    pub fg: BTreeMap<String, String>,
    pub fb: BTreeMap<String, String>,
    pub phi: PhiFile,
}

fn parse_field(field: &str, value: &str) -> Result<Rational, FileError> {
    parse_rational(value).map_err(|source| FileError::Rational {
        field: field.to_string(),
        source,
    })
}

impl GameFile {
    pub fn from_json(text: &str) -> Result<Self, FileError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("game files serialize");
        s.push('\n');
        s
    }

    /// Validates and builds the in-memory game.
    pub fn to_game(&self) -> Result<GameSpec, FileError> {
        let space = build_space(&self.elements, &self.edges)?;
        let pi0 = parse_field("pi0", &self.pi0)?;
        let mut fg = BTreeMap::new();
        for (id, mass) in &self.fg {
            fg.insert(id.clone(), parse_field(&format!("fg.{id}"), mass)?);
        }
        let mut fb = BTreeMap::new();
        for (id, mass) in &self.fb {
            fb.insert(id.clone(), parse_field(&format!("fb.{id}"), mass)?);
        }
        let kind = match self.phi.kind.as_str() {
            "identity" => ResponseKind::Identity,
            "piecewise-linear" => ResponseKind::PiecewiseLinear,
            "step" => ResponseKind::Step,
            other => return Err(FileError::UnknownPhiKind(other.to_string())),
        };
        let mut breakpoints = Vec::with_capacity(self.phi.breakpoints.len());
        for (i, (b, a)) in self.phi.breakpoints.iter().enumerate() {
            breakpoints.push((
                parse_field(&format!("phi.breakpoints[{i}].belief"), b)?,
                parse_field(&format!("phi.breakpoints[{i}].action"), a)?,
            ));
        }
        let phi = ResponseFunction::from_parts(kind, breakpoints, self.phi.strict)?;
        Ok(GameSpec::new(space, pi0, &fg, &fb, phi)?)
    }

    /// Assembles a file from parts, formatting rationals canonically.
    pub fn from_parts(
        elements: Vec<String>,
        edges: Vec<(String, String)>,
        pi0: &Rational,
        fg: &[(String, Rational)],
        fb: &[(String, Rational)],
        phi: &ResponseFunction,
    ) -> Self {
        let kind = match phi.kind() {
            ResponseKind::Identity => "identity",
            ResponseKind::PiecewiseLinear => "piecewise-linear",
            ResponseKind::Step => "step",
        };
        GameFile {
            elements,
            edges,
            pi0: format_rational(pi0),
            fg: fg
                .iter()
                .map(|(id, r)| (id.clone(), format_rational(r)))
                .collect(),
            fb: fb
                .iter()
                .map(|(id, r)| (id.clone(), format_rational(r)))
                .collect(),
            phi: PhiFile {
                kind: kind.to_string(),
                breakpoints: phi
                    .breakpoints()
                    .iter()
                    .map(|(b, a)| (format_rational(b), format_rational(a)))
                    .collect(),
                strict: phi.is_strict(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rational;
    use proptest::prelude::*;

    fn table2_file() -> GameFile {
        GameFile::from_json(
            r#"{
                "elements": ["∅", "b"],
                "edges": [["∅", "b"]],
                "pi0": "1/2",
                "fg": {"∅": "1/1", "b": "0/1"},
                "fb": {"∅": "1/3", "b": "2/3"},
                "phi": {"kind": "identity", "strict": true}
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn parse_and_build() {
        let game = table2_file().to_game().unwrap();
        assert_eq!(game.nu(&["∅"]).unwrap(), rational(3, 4));
        assert_eq!(game.prior(), &rational(1, 2));
    }

    #[test]
    fn serialization_is_canonical_and_stable() {
        let file = table2_file();
        let json = file.to_json();
        let reparsed = GameFile::from_json(&json).unwrap();
        assert_eq!(file, reparsed);
        assert_eq!(json, reparsed.to_json());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            GameFile::from_json(r#"{"elements": []}"#),
            Err(FileError::Json(_))
        ));

        let mut file = table2_file();
        file.pi0 = "1/0".into();
        assert!(matches!(
            file.to_game(),
            Err(FileError::Rational { field, .. }) if field == "pi0"
        ));

        let mut file = table2_file();
        file.phi.kind = "cubic".into();
        assert!(matches!(file.to_game(), Err(FileError::UnknownPhiKind(_))));

        let mut file = table2_file();
        file.elements.push("∅".into());
        assert!(matches!(
            file.to_game(),
            Err(FileError::Space(SpaceError::DuplicateId(_)))
        ));

        let mut file = table2_file();
        file.edges.push(("ghost".into(), "b".into()));
        assert!(matches!(
            file.to_game(),
            Err(FileError::Space(SpaceError::DanglingEndpoint(_)))
        ));

        let mut file = table2_file();
        file.fg.remove("b");
        assert!(matches!(
            file.to_game(),
            Err(FileError::Game(GameError::MissingMass { .. }))
        ));
    }

    proptest! {
        // Round trip: any game assembled from parts survives
        // serialize → parse → rebuild with identical masses.
        #[test]
        fn round_trip_masses(raw in proptest::collection::vec((1u32..40, 1u32..40), 1..6)) {
            let n = raw.len();
            let ids: Vec<String> = (0..n).map(|i| format!("e{i}")).collect();
            let edges: Vec<(String, String)> =
                ids.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
            let tg: i64 = raw.iter().map(|(g, _)| i64::from(*g)).sum();
            let tb: i64 = raw.iter().map(|(_, b)| i64::from(*b)).sum();
            let fg: Vec<(String, Rational)> = ids
                .iter()
                .zip(&raw)
                .map(|(id, (g, _))| (id.clone(), rational(i64::from(*g), tg)))
                .collect();
            let fb: Vec<(String, Rational)> = ids
                .iter()
                .zip(&raw)
                .map(|(id, (_, b))| (id.clone(), rational(i64::from(*b), tb)))
                .collect();
            let file = GameFile::from_parts(
                ids,
                edges,
                &rational(1, 2),
                &fg,
                &fb,
                &ResponseFunction::identity(),
            );
            let reparsed = GameFile::from_json(&file.to_json()).unwrap();
            prop_assert_eq!(&file, &reparsed);
            let game = reparsed.to_game().unwrap();
            for (id, r) in &fg {
                prop_assert_eq!(game.fg_of(id).unwrap(), r);
            }
        }
    }
}
