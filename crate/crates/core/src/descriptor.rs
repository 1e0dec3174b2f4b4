//! Serializable system descriptors.
//!
//! ```toml
//! kind = "finite_map"
//! map = [1, 0]
//! psi = [1.0, 1.0]
//! ```
//!
//! Unknown keys are rejected. Building a descriptor validates it and maps
//! every failure to [`Error::Invalid`] naming the offending field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lpshift::{FiniteMeasureSystem, WeightedShift};
use crate::matrix::Matrix;
use crate::scalar::Real;
use crate::systems::{build_pf_operator, FiniteMapSystem, MarkovShiftSystem, TransferMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemDescriptor<T> {
    FiniteMap { map: Vec<usize>, psi: Vec<T> },
    MarkovShift { adjacency: Vec<Vec<u8>>, rho: Vec<Vec<T>> },
    MeasureSystem { m: Vec<T>, beta: Vec<usize>, psi: Vec<T>, p: T },
}

/// A validated descriptor.
#[derive(Clone, Debug)]
pub enum BuiltSystem<T: Real> {
    FiniteMap(TransferMatrix<T>),
    MarkovShift { shift: MarkovShiftSystem<T>, rho: Matrix<T> },
    MeasureSystem(WeightedShift<T>),
}

fn named<T>(what: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Invalid { reason, .. } => Error::Invalid { what, reason },
        other => Error::Invalid { what, reason: other.to_string() },
    })
}

impl<T: Real> SystemDescriptor<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::FiniteMap { .. } => "finite_map",
            Self::MarkovShift { .. } => "markov_shift",
            Self::MeasureSystem { .. } => "measure_system",
        }
    }

    pub fn build(&self) -> Result<BuiltSystem<T>> {
        match self {
            Self::FiniteMap { map, psi } => {
                let system = named("map", FiniteMapSystem::new(map.clone()))?;
                Ok(BuiltSystem::FiniteMap(named("psi", build_pf_operator(&system, psi))?))
            }
            Self::MarkovShift { adjacency, rho } => {
                let shift = MarkovShiftSystem::from_01(adjacency)?;
                let n = shift.n_symbols();
                if rho.len() != n || rho.iter().any(|r| r.len() != n) {
                    return Err(Error::Invalid { what: "rho", reason: format!("must be a {n}x{n} matrix") });
                }
                let rho = Matrix::from_rows(rho)?;
                let shift = named("rho", shift.with_branch_weights(rho.clone(), false))?;
                Ok(BuiltSystem::MarkovShift { shift, rho })
            }
            Self::MeasureSystem { m, beta, psi, p } => {
                let beta = named("beta", FiniteMapSystem::new(beta.clone()))?;
                let system = named("m", FiniteMeasureSystem::new(m.clone(), beta))?;
                if psi.len() != system.n_points() {
                    return Err(Error::Invalid {
                        what: "psi",
                        reason: format!("has length {}, system has {} points", psi.len(), system.n_points()),
                    });
                }
                Ok(BuiltSystem::MeasureSystem(WeightedShift::new(system, psi.clone(), *p)?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> std::result::Result<SystemDescriptor<f64>, toml::de::Error> {
        toml::from_str(s)
    }

    #[test]
    fn finite_map_round_trip() {
        let d = parse("kind = \"finite_map\"\nmap = [1, 0]\npsi = [1.0, 2.0]\n").unwrap();
        assert_eq!(d, SystemDescriptor::FiniteMap { map: vec![1, 0], psi: vec![1.0, 2.0] });
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<SystemDescriptor<f64>>(&json).unwrap(), d);
        assert!(matches!(d.build().unwrap(), BuiltSystem::FiniteMap(_)));
    }

    #[test]
    fn unknown_key_rejected() {
        let err = parse("kind = \"finite_map\"\nmap = [0]\npsi = [1.0]\nextra = 1\n").unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");
        assert!(serde_json::from_str::<SystemDescriptor<f64>>(r#"{"kind":"markov_shift","adjacency":[[1]],"rho":[[1]],"p":2}"#).is_err());
    }

    #[test]
    fn unknown_kind_rejected() {
        assert!(parse("kind = \"flow\"\nmap = [0]\n").is_err());
    }

    #[test]
    fn negative_p_names_field() {
        let d = parse("kind = \"measure_system\"\nm = [1.0]\nbeta = [0]\npsi = [1.0]\np = -2.0\n").unwrap();
        match d.build() {
            Err(Error::Invalid { what, .. }) => assert_eq!(what, "p"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_fields_are_named() {
        let cases = [
            ("kind = \"finite_map\"\nmap = [3, 0]\npsi = [1.0, 1.0]\n", "map"),
            ("kind = \"finite_map\"\nmap = [1, 0]\npsi = [1.0]\n", "psi"),
            ("kind = \"finite_map\"\nmap = [1, 0]\npsi = [1.0, -1.0]\n", "psi"),
            ("kind = \"markov_shift\"\nadjacency = [[1, 2], [1, 1]]\nrho = [[1.0, 1.0], [1.0, 1.0]]\n", "adjacency"),
            ("kind = \"markov_shift\"\nadjacency = [[1, 0], [1, 1]]\nrho = [[1.0, 1.0], [1.0, 1.0]]\n", "rho"),
            ("kind = \"markov_shift\"\nadjacency = [[1, 1], [1, 1]]\nrho = [[1.0, 1.0]]\n", "rho"),
            ("kind = \"measure_system\"\nm = [1.0, 0.0]\nbeta = [0, 0]\npsi = [1.0, 1.0]\np = 2.0\n", "m"),
            ("kind = \"measure_system\"\nm = [1.0, 1.0]\nbeta = [0, 5]\npsi = [1.0, 1.0]\np = 2.0\n", "beta"),
        ];
        for (src, field) in cases {
            match parse(src).unwrap().build() {
                Err(Error::Invalid { what, .. }) => assert_eq!(what, field, "{src}"),
                other => panic!("{src}: {other:?}"),
            }
        }
    }

    #[test]
    fn markov_shift_builds() {
        let d = parse("kind = \"markov_shift\"\nadjacency = [[1, 1], [1, 0]]\nrho = [[0.5, 1.0], [0.5, 0.0]]\n").unwrap();
        match d.build().unwrap() {
            BuiltSystem::MarkovShift { shift, .. } => assert_eq!(shift.n_symbols(), 2),
            other => panic!("{other:?}"),
        }
    }
}
