use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::basis::BasisSpec;
use super::linalg::{hermitian_eigenvalues, C64, ONE, ZERO};
use crate::error::{Error, Result};

/// Tolerance on ‖ψ‖ for states labelled normalized.
pub const NORM_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Normalized,
    /// Conditional or otherwise unnormalized amplitudes.
    Unnormalized,
    /// Truncated coefficients of a δ-normalized (improper) eigenvector.
    DeltaNormalized,
}

/// A value together with the probability weight it lost to the Fock cutoff.
#[derive(Clone, Debug)]
pub struct Truncated<T> {
    pub value: T,
    /// Weight (norm²) discarded by the cutoff before renormalization.
    pub lost_weight: f64,
    pub warning: Option<String>,
}

impl<T> Truncated<T> {
    pub(crate) fn new(value: T, lost_weight: f64) -> Self {
        Truncated {
            value,
            lost_weight,
            warning: None,
        }
    }
}

/// Complex amplitudes over a [`BasisSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    basis: BasisSpec,
    amps: Vec<C64>,
    normalization: Normalization,
    norm_hint: f64,
}

impl FockVector {
    pub fn new(basis: BasisSpec, amps: Vec<C64>, normalization: Normalization) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::BasisMismatch(format!(
                "{} amplitudes for a basis of dimension {}",
                amps.len(),
                basis.dim()
            )));
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("non-finite amplitude".into()));
        }
        let norm_hint = norm_sqr(&amps).sqrt();
        if normalization == Normalization::Normalized && (norm_hint - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "state labelled normalized has norm {norm_hint}"
            )));
        }
        Ok(FockVector {
            basis,
            amps,
            normalization,
            norm_hint,
        })
    }

    /// Construction from amplitudes produced internally, which are finite by
    /// construction.
    pub(crate) fn from_parts(basis: BasisSpec, amps: Vec<C64>, normalization: Normalization) -> Self {
        debug_assert_eq!(amps.len(), basis.dim());
        let norm_hint = norm_sqr(&amps).sqrt();
        FockVector {
            basis,
            amps,
            normalization,
            norm_hint,
        }
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn is_normalized(&self) -> bool {
        self.normalization == Normalization::Normalized
    }

    pub fn norm(&self) -> f64 {
        self.norm_hint
    }

    pub fn norm_sqr(&self) -> f64 {
        self.norm_hint * self.norm_hint
    }

    pub fn amplitude(&self, occupations: &[usize]) -> C64 {
        self.amps[self.basis.index(occupations)]
    }

    /// Rescaled to unit norm.
    pub fn normalized(&self) -> Result<Self> {
        if !(self.norm_hint > 0.0) {
            return Err(Error::InvalidParameter("cannot normalize a zero vector".into()));
        }
        let s = 1.0 / self.norm_hint;
        let amps = self.amps.iter().map(|z| z * s).collect();
        Ok(Self::from_parts(self.basis.clone(), amps, Normalization::Normalized))
    }

    pub(crate) fn relabel(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    /// ⟨self|other⟩.
    pub fn overlap(&self, other: &FockVector) -> Result<C64> {
        self.basis.ensure_same(&other.basis)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// |⟨φ|ψ⟩|² / ‖ψ‖² against a normalized pure target φ.
    pub fn fidelity(&self, target: &FockVector) -> Result<f64> {
        check_target(target)?;
        let ov = target.overlap(self)?;
        Ok(ov.norm_sqr() / self.norm_sqr())
    }

    /// `self ⊗ other`.
    pub fn tensor(&self, other: &FockVector) -> Result<FockVector> {
        let basis = self.basis.tensor(&other.basis)?;
        let mut amps = Vec::with_capacity(basis.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        let normalization = if self.is_normalized() && other.is_normalized() {
            Normalization::Normalized
        } else {
            Normalization::Unnormalized
        };
        Ok(Self::from_parts(basis, amps, normalization))
    }

    /// |ψ⟩⟨ψ|, normalized if the vector is.
    pub fn to_density(&self) -> DensityOperator {
        let n = self.amps.len();
        let matrix = DMatrix::from_fn(n, n, |i, j| self.amps[i] * self.amps[j].conj());
        DensityOperator {
            basis: self.basis.clone(),
            matrix,
            normalized: self.is_normalized(),
        }
    }

    /// Reduced state on `keep` (mode indices in basis order).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOperator> {
        let split = ModeSplit::new(&self.basis, keep)?;
        let kd = split.keep_basis.dim();
        let mut rho = DMatrix::<C64>::zeros(kd, kd);
        // Group amplitudes by the traced-out configuration.
        let mut columns: Vec<Vec<(usize, C64)>> = vec![Vec::new(); split.rest_dim];
        for (idx, &a) in self.amps.iter().enumerate() {
            if a != ZERO {
                let (k, r) = split.split(idx);
                columns[r].push((k, a));
            }
        }
        for col in &columns {
            for &(k1, a1) in col {
                for &(k2, a2) in col {
                    rho[(k1, k2)] += a1 * a2.conj();
                }
            }
        }
        Ok(DensityOperator {
            basis: split.keep_basis,
            matrix: rho,
            normalized: self.is_normalized(),
        })
    }

    /// Total weight on basis states where any mode sits at or above `level`.
    pub fn weight_at_or_above(&self, level: usize) -> f64 {
        let b = &self.basis;
        self.amps
            .iter()
            .enumerate()
            .filter(|(idx, _)| (0..b.n_modes()).any(|m| b.occupation(*idx, m) >= level))
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// ⟨ψ|O|ψ⟩ for a product of ladder operators, rightmost applied first.
    pub fn expect_ladder(&self, ops: &[Ladder]) -> C64 {
        let b = &self.basis;
        let mut occ = vec![0usize; b.n_modes()];
        let mut acc = ZERO;
        for (idx, &a) in self.amps.iter().enumerate() {
            if a == ZERO {
                continue;
            }
            fill_occupations(b, idx, &mut occ);
            if let Some((coef, target)) = apply_ladder(b, &mut occ, ops) {
                acc += self.amps[target].conj() * a * coef;
            }
        }
        acc
    }

    /// ⟨b_k† b_k⟩ summed over all modes.
    pub fn mean_total_number(&self) -> f64 {
        let b = &self.basis;
        self.amps
            .iter()
            .enumerate()
            .map(|(idx, a)| a.norm_sqr() * b.occupations(idx).iter().sum::<usize>() as f64)
            .sum::<f64>()
            / self.norm_sqr()
    }

    /// Quadrature means and symmetrized covariance, ordered (X₁, P₁, X₂, P₂, …)
    /// with X = b + b†, P = −i(b − b†) (vacuum variance 1).
    pub fn quadrature_moments(&self) -> Moments {
        let n2 = self.norm_sqr();
        moments_from(self.basis.n_modes(), |ops| self.expect_ladder(ops) / n2)
    }
}

fn check_target(target: &FockVector) -> Result<()> {
    if (target.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!(
            "fidelity target must be normalized, has norm {}",
            target.norm()
        )));
    }
    Ok(())
}

fn norm_sqr(amps: &[C64]) -> f64 {
    amps.iter().map(|z| z.norm_sqr()).sum()
}

/// A single bosonic ladder operator on one mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ladder {
    Lower(usize),
    Raise(usize),
}

fn fill_occupations(b: &BasisSpec, mut idx: usize, occ: &mut [usize]) {
    let levels = b.levels();
    for slot in occ.iter_mut().rev() {
        *slot = idx % levels;
        idx /= levels;
    }
}

/// Applies `ops` (rightmost first) to the basis vector with occupations `occ`.
/// Returns the coefficient and resulting flat index, or `None` when the result
/// vanishes or leaves the truncated space. `occ` is clobbered.
fn apply_ladder(b: &BasisSpec, occ: &mut [usize], ops: &[Ladder]) -> Option<(f64, usize)> {
    let mut coef = 1.0;
    for op in ops.iter().rev() {
        match *op {
            Ladder::Lower(m) => {
                if occ[m] == 0 {
                    return None;
                }
                coef *= (occ[m] as f64).sqrt();
                occ[m] -= 1;
            }
            Ladder::Raise(m) => {
                if occ[m] >= b.cutoff() {
                    return None;
                }
                occ[m] += 1;
                coef *= (occ[m] as f64).sqrt();
            }
        }
    }
    Some((coef, b.index(occ)))
}

/// First and second quadrature moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub cov: DMatrix<f64>,
}

/// Builds moments from an expectation oracle for ladder products. Only
/// normally ordered products of lowering operators and b_k† b_l are requested,
/// which are exact on truncated states.
fn moments_from(n_modes: usize, expect: impl Fn(&[Ladder]) -> C64) -> Moments {
    let mut lower = vec![ZERO; n_modes];
    for (k, slot) in lower.iter_mut().enumerate() {
        *slot = expect(&[Ladder::Lower(k)]);
    }
    let mut bb = vec![vec![ZERO; n_modes]; n_modes];
    let mut bdb = vec![vec![ZERO; n_modes]; n_modes];
    for k in 0..n_modes {
        for l in 0..n_modes {
            bb[k][l] = expect(&[Ladder::Lower(k), Ladder::Lower(l)]);
            bdb[k][l] = expect(&[Ladder::Raise(k), Ladder::Lower(l)]);
        }
    }
    // R = u b + u* b† with u = 1 for X and u = -i for P.
    let u = |q: usize| if q.is_multiple_of(2) { ONE } else { C64::new(0.0, -1.0) };
    let dim = 2 * n_modes;
    let mean: Vec<f64> = (0..dim)
        .map(|i| {
            let (k, ui) = (i / 2, u(i));
            (ui * lower[k] + ui.conj() * lower[k].conj()).re
        })
        .collect();
    // ⟨R_i R_j⟩ = u_i u_j ⟨b_k b_l⟩ + u_i u_j* ⟨b_k b_l†⟩ + u_i* u_j ⟨b_k† b_l⟩ + u_i* u_j* ⟨b_k† b_l†⟩
    let second = |i: usize, j: usize| -> C64 {
        let (k, l) = (i / 2, j / 2);
        let (ui, uj) = (u(i), u(j));
        let b_bd = bdb[l][k] + if k == l { ONE } else { ZERO };
        let bd_bd = bb[l][k].conj();
        ui * uj * bb[k][l] + ui * uj.conj() * b_bd + ui.conj() * uj * bdb[k][l] + ui.conj() * uj.conj() * bd_bd
    };
    let cov = DMatrix::from_fn(dim, dim, |i, j| {
        0.5 * (second(i, j) + second(j, i)).re - mean[i] * mean[j]
    });
    Moments { mean, cov }
}

/// Hermitian positive-semidefinite matrix over a [`BasisSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    basis: BasisSpec,
    matrix: DMatrix<C64>,
    normalized: bool,
}

impl DensityOperator {
    pub fn new(basis: BasisSpec, matrix: DMatrix<C64>) -> Result<Self> {
        let d = basis.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::BasisMismatch(format!(
                "{}x{} matrix for a basis of dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("non-finite matrix element".into()));
        }
        let herm = (&matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "density operator is not Hermitian (defect {herm:e})"
            )));
        }
        let trace = matrix.trace().re;
        Ok(DensityOperator {
            basis,
            matrix,
            normalized: (trace - 1.0).abs() <= 1e-8,
        })
    }

    pub(crate) fn from_parts(basis: BasisSpec, matrix: DMatrix<C64>, normalized: bool) -> Self {
        DensityOperator {
            basis,
            matrix,
            normalized,
        }
    }

    /// (1/d) I.
    pub fn maximally_mixed(basis: BasisSpec) -> Self {
        let d = basis.dim();
        let matrix = DMatrix::from_diagonal_element(d, d, C64::new(1.0 / d as f64, 0.0));
        DensityOperator {
            basis,
            matrix,
            normalized: true,
        }
    }

    /// Diagonal state with the given populations on a single mode.
    pub fn diagonal(basis: BasisSpec, populations: &[f64]) -> Result<Self> {
        if populations.len() != basis.dim() {
            return Err(Error::BasisMismatch("population count differs from dimension".into()));
        }
        let m = DMatrix::from_fn(basis.dim(), basis.dim(), |i, j| {
            if i == j {
                C64::new(populations[i], 0.0)
            } else {
                ZERO
            }
        });
        Self::new(basis, m)
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if !(t > 0.0) {
            return Err(Error::InvalidParameter("cannot normalize a zero-trace operator".into()));
        }
        Ok(DensityOperator {
            basis: self.basis.clone(),
            matrix: &self.matrix / C64::new(t, 0.0),
            normalized: true,
        })
    }

    /// Tr ρ² / (Tr ρ)².
    pub fn purity(&self) -> f64 {
        let t = self.trace();
        self.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>() / (t * t)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// ⟨φ|ρ|φ⟩ / Tr ρ against a normalized pure target.
    pub fn fidelity(&self, target: &FockVector) -> Result<f64> {
        check_target(target)?;
        self.basis.ensure_same(target.basis())?;
        let phi = target.amplitudes();
        let mut acc = ZERO;
        for (i, pi) in phi.iter().enumerate() {
            if *pi == ZERO {
                continue;
            }
            for (j, pj) in phi.iter().enumerate() {
                acc += pi.conj() * self.matrix[(i, j)] * pj;
            }
        }
        Ok(acc.re / self.trace())
    }

    /// ½‖ρ − σ‖₁.
    pub fn trace_distance(&self, other: &DensityOperator) -> Result<f64> {
        self.basis.ensure_same(&other.basis)?;
        let diff = &self.matrix - &other.matrix;
        Ok(0.5 * hermitian_eigenvalues(&diff).iter().map(|x| x.abs()).sum::<f64>())
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOperator> {
        let split = ModeSplit::new(&self.basis, keep)?;
        let kd = split.keep_basis.dim();
        let d = self.basis.dim();
        let parts: Vec<(usize, usize)> = (0..d).map(|i| split.split(i)).collect();
        let mut rho = DMatrix::<C64>::zeros(kd, kd);
        for i in 0..d {
            let (ki, ri) = parts[i];
            for j in 0..d {
                let (kj, rj) = parts[j];
                if ri == rj {
                    rho[(ki, kj)] += self.matrix[(i, j)];
                }
            }
        }
        Ok(DensityOperator {
            basis: split.keep_basis,
            matrix: rho,
            normalized: self.normalized,
        })
    }

    /// Tr(O ρ) for a product of ladder operators, rightmost applied first.
    pub fn expect_ladder(&self, ops: &[Ladder]) -> C64 {
        let b = &self.basis;
        let mut occ = vec![0usize; b.n_modes()];
        let mut acc = ZERO;
        for y in 0..b.dim() {
            fill_occupations(b, y, &mut occ);
            if let Some((coef, x)) = apply_ladder(b, &mut occ, ops) {
                // O|y⟩ = coef|x⟩, so Tr(Oρ) picks up coef·ρ[y, x]
                acc += self.matrix[(y, x)] * coef;
            }
        }
        acc
    }

    pub fn quadrature_moments(&self) -> Moments {
        let t = self.trace();
        moments_from(self.basis.n_modes(), |ops| self.expect_ladder(ops) / t)
    }

    /// Population of each flat basis index.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.basis.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }

    /// Accumulates w·|ψ⟩⟨ψ| into this operator.
    pub(crate) fn add_pure(&mut self, psi: &[C64], weight: f64) {
        for (i, a) in psi.iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            let wa = a * weight;
            for (j, b) in psi.iter().enumerate() {
                self.matrix[(i, j)] += wa * b.conj();
            }
        }
    }

    pub(crate) fn zeros(basis: BasisSpec) -> Self {
        let d = basis.dim();
        DensityOperator {
            basis,
            matrix: DMatrix::zeros(d, d),
            normalized: false,
        }
    }

    pub(crate) fn mark_normalized(mut self) -> Self {
        self.normalized = (self.trace() - 1.0).abs() <= 1e-8;
        self
    }
}

/// Splits flat indices into (kept, traced-out) sub-indices.
struct ModeSplit {
    keep_basis: BasisSpec,
    keep: Vec<usize>,
    rest: Vec<usize>,
    rest_dim: usize,
    full: BasisSpec,
}

impl ModeSplit {
    fn new(full: &BasisSpec, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::InvalidParameter("partial trace must keep at least one mode".into()));
        }
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        for &k in &keep {
            full.check_mode(k)?;
        }
        let rest: Vec<usize> = (0..full.n_modes()).filter(|m| !keep.contains(m)).collect();
        let keep_basis = full.subset(&keep)?;
        let rest_dim = full.levels().pow(rest.len() as u32);
        Ok(ModeSplit {
            keep_basis,
            keep,
            rest,
            rest_dim,
            full: full.clone(),
        })
    }

    fn split(&self, idx: usize) -> (usize, usize) {
        let levels = self.full.levels();
        let k = self
            .keep
            .iter()
            .fold(0, |acc, &m| acc * levels + self.full.occupation(idx, m));
        let r = self
            .rest
            .iter()
            .fold(0, |acc, &m| acc * levels + self.full.occupation(idx, m));
        (k, r)
    }
}
