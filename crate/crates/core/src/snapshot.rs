//! JSON snapshots of Fock-space states.
//!
//! Amplitudes (and density-matrix entries, row-major) are stored as one flat
//! array of interleaved (re, im) pairs in the basis ordering of
//! [`BasisSpec`]: first mode most significant.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{BasisSpec, DensityOperator, FockVector, Normalization, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSnapshot {
    pub cutoff: usize,
    pub modes: Vec<String>,
}

impl BasisSnapshot {
    pub fn from_basis(basis: &BasisSpec) -> Self {
        BasisSnapshot {
            cutoff: basis.cutoff(),
            modes: basis.labels().to_vec(),
        }
    }

    pub fn to_basis(&self) -> Result<BasisSpec> {
        BasisSpec::new(self.cutoff, self.modes.iter().cloned())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSnapshot {
    Vector {
        basis: BasisSnapshot,
        normalized: bool,
        amplitudes: Vec<f64>,
    },
    Density {
        basis: BasisSnapshot,
        matrix: Vec<f64>,
    },
}

fn interleave<'a>(values: impl Iterator<Item = &'a C64>) -> Vec<f64> {
    values.flat_map(|z| [z.re, z.im]).collect()
}

fn deinterleave(flat: &[f64], expected: usize) -> Result<Vec<C64>> {
    if flat.len() != 2 * expected {
        return Err(Error::InvalidParameter(format!(
            "snapshot holds {} numbers, expected {}",
            flat.len(),
            2 * expected
        )));
    }
    Ok(flat.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect())
}

impl StateSnapshot {
    pub fn from_vector(v: &FockVector) -> Self {
        StateSnapshot::Vector {
            basis: BasisSnapshot::from_basis(v.basis()),
            normalized: v.is_normalized(),
            amplitudes: interleave(v.amplitudes().iter()),
        }
    }

    pub fn from_density(rho: &DensityOperator) -> Self {
        let m = rho.matrix();
        let entries: Vec<C64> = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)]))
            .collect();
        StateSnapshot::Density {
            basis: BasisSnapshot::from_basis(rho.basis()),
            matrix: interleave(entries.iter()),
        }
    }

    pub fn to_vector(&self) -> Result<FockVector> {
        match self {
            StateSnapshot::Vector {
                basis,
                normalized,
                amplitudes,
            } => {
                let b = basis.to_basis()?;
                let amps = deinterleave(amplitudes, b.dim())?;
                let n = if *normalized {
                    Normalization::Normalized
                } else {
                    Normalization::Unnormalized
                };
                FockVector::new(b, amps, n)
            }
            StateSnapshot::Density { .. } => Err(Error::Unsupported("snapshot holds a density operator".into())),
        }
    }

    pub fn to_density(&self) -> Result<DensityOperator> {
        match self {
            StateSnapshot::Vector { .. } => Ok(self.to_vector()?.to_density()),
            StateSnapshot::Density { basis, matrix } => {
                let b = basis.to_basis()?;
                let d = b.dim();
                let entries = deinterleave(matrix, d * d)?;
                DensityOperator::new(b, DMatrix::from_row_slice(d, d, &entries))
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidParameter(format!("snapshot: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock;

    #[test]
    fn vector_round_trip() {
        let b = BasisSpec::new(4, ["A", "B"]).unwrap();
        let psi = fock::epr_state_truncated(&b, 0, 1, 0.4).unwrap().value;
        let json = StateSnapshot::from_vector(&psi).to_json();
        let back = StateSnapshot::from_json(&json).unwrap().to_vector().unwrap();
        assert_eq!(back.amplitudes(), psi.amplitudes());
        assert_eq!(back.basis(), psi.basis());
    }

    #[test]
    fn density_round_trip_and_layout() {
        let b = BasisSpec::single(1, "B").unwrap();
        let psi = FockVector::new(
            b,
            vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)],
            Normalization::Normalized,
        )
        .unwrap();
        let snap = StateSnapshot::from_density(&psi.to_density());
        let StateSnapshot::Density { matrix, .. } = &snap else { unreachable!() };
        // ρ₀₁ = 0.6 · conj(0.8i) = −0.48i
        assert!((matrix[2] - 0.0).abs() < 1e-15 && (matrix[3] + 0.48).abs() < 1e-15);
        let back = snap.to_density().unwrap();
        assert!(back.trace_distance(&psi.to_density()).unwrap() < 1e-15);
    }

    #[test]
    fn wrong_length_is_rejected() {
        let json = r#"{"kind":"vector","basis":{"cutoff":1,"modes":["A"]},"normalized":false,"amplitudes":[1.0,0.0]}"#;
        assert!(StateSnapshot::from_json(json).unwrap().to_vector().is_err());
    }
}
