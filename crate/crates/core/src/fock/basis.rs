use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on simultaneously simulated modes.
pub const MAX_MODES: usize = 4;

/// Truncated multimode number basis.
///
/// Each mode keeps levels `0..=cutoff`. Basis vectors are ordered row-major
/// over the mode labels: the first label is the most significant digit, so
/// `|n_0, n_1, …⟩` sits at `Σ_k n_k (N+1)^(M-1-k)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    cutoff: usize,
    modes: Vec<String>,
}

impl BasisSpec {
    pub fn new<S: Into<String>>(cutoff: usize, modes: impl IntoIterator<Item = S>) -> Result<Self> {
        let modes: Vec<String> = modes.into_iter().map(Into::into).collect();
        if cutoff < 1 {
            return Err(Error::InvalidBasis("cutoff must be at least 1".into()));
        }
        if modes.is_empty() {
            return Err(Error::InvalidBasis("at least one mode is required".into()));
        }
        if modes.len() > MAX_MODES {
            return Err(Error::InvalidBasis(format!(
                "{} modes requested, at most {MAX_MODES} are supported",
                modes.len()
            )));
        }
        for (i, m) in modes.iter().enumerate() {
            if modes[..i].contains(m) {
                return Err(Error::InvalidBasis(format!("duplicate mode label {m:?}")));
            }
        }
        let levels = cutoff + 1;
        if levels.checked_pow(modes.len() as u32).is_none() {
            return Err(Error::InvalidBasis("dimension overflows usize".into()));
        }
        Ok(BasisSpec { cutoff, modes })
    }

    /// One mode labelled `label`.
    pub fn single(cutoff: usize, label: &str) -> Result<Self> {
        Self::new(cutoff, [label])
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Levels per mode, `cutoff + 1`.
    pub fn levels(&self) -> usize {
        self.cutoff + 1
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.modes
    }

    pub fn dim(&self) -> usize {
        self.levels().pow(self.modes.len() as u32)
    }

    pub fn mode(&self, label: &str) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m == label)
            .ok_or_else(|| Error::InvalidBasis(format!("no mode labelled {label:?} in {:?}", self.modes)))
    }

    pub(crate) fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.n_modes() {
            Ok(())
        } else {
            Err(Error::InvalidBasis(format!(
                "mode index {mode} out of range for {} modes",
                self.n_modes()
            )))
        }
    }

    pub(crate) fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        self.check_mode(i)?;
        self.check_mode(j)?;
        if i == j {
            return Err(Error::InvalidParameter("two-mode operation needs distinct modes".into()));
        }
        Ok(())
    }

    /// Index stride of `mode`.
    pub fn stride(&self, mode: usize) -> usize {
        self.levels().pow((self.n_modes() - 1 - mode) as u32)
    }

    pub fn index(&self, occupations: &[usize]) -> usize {
        debug_assert_eq!(occupations.len(), self.n_modes());
        occupations.iter().fold(0, |acc, &n| acc * self.levels() + n)
    }

    pub fn occupations(&self, mut index: usize) -> Vec<usize> {
        let levels = self.levels();
        let mut occ = vec![0; self.n_modes()];
        for slot in occ.iter_mut().rev() {
            *slot = index % levels;
            index /= levels;
        }
        occ
    }

    /// Occupation of one mode at a flat index.
    pub fn occupation(&self, index: usize, mode: usize) -> usize {
        (index / self.stride(mode)) % self.levels()
    }

    /// The basis restricted to `modes` (kept in the given order).
    pub fn subset(&self, modes: &[usize]) -> Result<Self> {
        for &m in modes {
            self.check_mode(m)?;
        }
        Self::new(self.cutoff, modes.iter().map(|&m| self.modes[m].clone()))
    }

    /// Concatenation `self ⊗ other`; cutoffs must agree.
    pub fn tensor(&self, other: &BasisSpec) -> Result<Self> {
        if self.cutoff != other.cutoff {
            return Err(Error::BasisMismatch(format!(
                "tensor of cutoffs {} and {}",
                self.cutoff, other.cutoff
            )));
        }
        Self::new(self.cutoff, self.modes.iter().chain(other.modes.iter()).cloned())
    }

    pub fn with_cutoff(&self, cutoff: usize) -> Result<Self> {
        Self::new(cutoff, self.modes.iter().cloned())
    }

    pub(crate) fn ensure_same(&self, other: &BasisSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::BasisMismatch(format!(
                "{:?} (N={}) vs {:?} (N={})",
                self.modes, self.cutoff, other.modes, other.cutoff
            )))
        }
    }
}
