//! Gaussian-state engine: means and covariances in (X₁, P₁, X₂, P₂, …) with
//! X = b + b†, P = −i(b − b†), vacuum variance 1.
//!
//! Used as an independent check on the Fock engine. Symplectic images are
//! derived from the Heisenberg action U†bU of the Fock operators, so the two
//! engines share conventions but no code.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, hermitian_eigenvalues, BasisSpec, DensityOperator, ModeOperator, C64};

/// Tolerance on SᵀΩS = Ω.
pub const SYMPLECTIC_TOLERANCE: f64 = 1e-10;
/// Smallest admissible eigenvalue of V + iΩ.
pub const UNCERTAINTY_TOLERANCE: f64 = -1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || !d.is_multiple_of(2) || cov.shape() != (d, d) {
            return Err(Error::InvalidParameter(format!(
                "gaussian state needs an even-length mean and matching covariance, got {d} and {:?}",
                cov.shape()
            )));
        }
        if (&cov - cov.transpose()).abs().max() > 1e-10 * cov.abs().max().max(1.0) {
            return Err(Error::InvalidParameter("covariance is not symmetric".into()));
        }
        let s = GaussianState { mean, cov };
        let defect = s.uncertainty_min_eigenvalue();
        if defect < UNCERTAINTY_TOLERANCE * s.cov.abs().max().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "covariance violates the uncertainty relation (min eigenvalue {defect})"
            )));
        }
        Ok(s)
    }

    pub fn vacuum(n_modes: usize) -> Self {
        GaussianState {
            mean: DVector::zeros(2 * n_modes),
            cov: DMatrix::identity(2 * n_modes, 2 * n_modes),
        }
    }

    pub fn coherent(beta: C64) -> Self {
        let mut s = Self::vacuum(1);
        s.mean[0] = 2.0 * beta.re;
        s.mean[1] = 2.0 * beta.im;
        s
    }

    /// exp[s(b² − b†²)/2]|0⟩: Var X = e^{−2s}, Var P = e^{2s}.
    pub fn squeezed_vacuum(s: f64) -> Self {
        let mut g = Self::vacuum(1);
        g.cov[(0, 0)] = (-2.0 * s).exp();
        g.cov[(1, 1)] = (2.0 * s).exp();
        g
    }

    /// Gaussian image of the two-mode squeezed vacuum on two modes.
    ///
    /// U†b_A U = cosh r b_A − sinh r b_B†, so ⟨X_A X_B⟩ = −sinh 2r and
    /// ⟨P_A P_B⟩ = +sinh 2r, matching the (−tanh r)^m Fock coefficients.
    pub fn epr(r: f64) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::InvalidParameter(format!("squeezing r = {r} must be finite and >= 0")));
        }
        let (ch, sh) = ((2.0 * r).cosh(), (2.0 * r).sinh());
        let mut cov = DMatrix::identity(4, 4) * ch;
        cov[(0, 2)] = -sh;
        cov[(2, 0)] = -sh;
        cov[(1, 3)] = sh;
        cov[(3, 1)] = sh;
        Ok(GaussianState {
            mean: DVector::zeros(4),
            cov,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn tensor(&self, other: &GaussianState) -> GaussianState {
        let (d1, d2) = (self.mean.len(), other.mean.len());
        let mut mean = DVector::zeros(d1 + d2);
        mean.rows_mut(0, d1).copy_from(&self.mean);
        mean.rows_mut(d1, d2).copy_from(&other.mean);
        let mut cov = DMatrix::zeros(d1 + d2, d1 + d2);
        cov.view_mut((0, 0), (d1, d1)).copy_from(&self.cov);
        cov.view_mut((d1, d1), (d2, d2)).copy_from(&other.cov);
        GaussianState { mean, cov }
    }

    /// Marginal on the listed modes, in the listed order.
    pub fn reduced(&self, modes: &[usize]) -> Result<GaussianState> {
        let idx = self.quadrature_indices(modes)?;
        Ok(GaussianState {
            mean: DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.mean[i])),
            cov: DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.cov[(idx[a], idx[b])]),
        })
    }

    fn quadrature_indices(&self, modes: &[usize]) -> Result<Vec<usize>> {
        let n = self.n_modes();
        let mut seen = vec![false; n];
        let mut idx = Vec::with_capacity(2 * modes.len());
        for &m in modes {
            if m >= n || seen[m] {
                return Err(Error::InvalidParameter(format!("bad mode list {modes:?} for {n} modes")));
            }
            seen[m] = true;
            idx.extend([2 * m, 2 * m + 1]);
        }
        Ok(idx)
    }

    /// 1/√det V (vacuum variance 1).
    pub fn purity(&self) -> f64 {
        1.0 / self.cov.determinant().sqrt()
    }

    /// Smallest eigenvalue of V + iΩ; nonnegative for physical states.
    pub fn uncertainty_min_eigenvalue(&self) -> f64 {
        let d = self.mean.len();
        let omega = symplectic_form(d / 2);
        let m = DMatrix::from_fn(d, d, |i, j| C64::new(self.cov[(i, j)], omega[(i, j)]));
        hermitian_eigenvalues(&m)[0]
    }

    pub fn apply(&self, op: &SymplecticOp) -> Result<GaussianState> {
        if op.matrix.nrows() != self.mean.len() {
            return Err(Error::BasisMismatch(format!(
                "symplectic map of dimension {} on a {}-mode state",
                op.matrix.nrows(),
                self.n_modes()
            )));
        }
        Ok(GaussianState {
            mean: &op.matrix * &self.mean + &op.displacement,
            cov: &op.matrix * &self.cov * op.matrix.transpose(),
        })
    }

    /// Pure-loss channel on `mode`: mean → √η mean, V → ηV + (1−η)I on the
    /// mode's quadratures (cross terms scale by √η).
    pub fn loss_channel(&self, mode: usize, eta: f64) -> Result<GaussianState> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!("efficiency {eta} outside [0, 1]")));
        }
        let idx = self.quadrature_indices(&[mode])?;
        let mut scale = DVector::from_element(self.mean.len(), 1.0);
        for &i in &idx {
            scale[i] = eta.sqrt();
        }
        let mut out = self.clone();
        out.mean.component_mul_assign(&scale);
        for i in 0..self.mean.len() {
            for j in 0..self.mean.len() {
                out.cov[(i, j)] *= scale[i] * scale[j];
            }
        }
        for &i in &idx {
            out.cov[(i, i)] += 1.0 - eta;
        }
        Ok(out)
    }

    /// Tr ρσ = 2ⁿ exp(−½ δᵀ(V₁+V₂)⁻¹δ) / √det(V₁+V₂); equals the fidelity
    /// when either state is pure.
    pub fn overlap(&self, other: &GaussianState) -> Result<f64> {
        if self.mean.len() != other.mean.len() {
            return Err(Error::BasisMismatch("overlap of states with different mode counts".into()));
        }
        let sum = &self.cov + &other.cov;
        let delta = &self.mean - &other.mean;
        let inv = sum
            .clone()
            .try_inverse()
            .ok_or(Error::SingularConditioning(sum.determinant()))?;
        let q = (delta.transpose() * inv * &delta)[(0, 0)];
        let n = self.n_modes() as i32;
        Ok(2f64.powi(n) * (-0.5 * q).exp() / sum.determinant().sqrt())
    }

    /// Measures X_θ = cos θ X + sin θ P on `mode` with result χ.
    pub fn condition_on_homodyne(&self, mode: usize, theta: f64, chi: f64) -> Result<Conditioned> {
        self.condition_on_homodyne_joint(&[Homodyne { mode, theta, chi }])
    }

    /// Joint measurement of commuting quadratures on distinct modes.
    pub fn condition_on_homodyne_joint(&self, measurements: &[Homodyne]) -> Result<Conditioned> {
        let measured: Vec<usize> = measurements.iter().map(|m| m.mode).collect();
        self.quadrature_indices(&measured)?;
        let keep: Vec<usize> = (0..self.n_modes()).filter(|m| !measured.contains(m)).collect();
        let (nmat, chi) = self.projection(measurements);
        let k = measurements.len();
        let s = nmat.transpose() * &self.cov * &nmat;
        let det = s.determinant();
        let s_inv = s
            .clone()
            .try_inverse()
            .filter(|_| det > 1e-300)
            .ok_or(Error::SingularConditioning(det))?;
        let resid = &chi - nmat.transpose() * &self.mean;
        let q = (resid.transpose() * &s_inv * &resid)[(0, 0)];
        let density = (-0.5 * q).exp() / ((2.0 * std::f64::consts::PI).powi(k as i32) * det).sqrt();

        let state = if keep.is_empty() {
            None
        } else {
            let kidx = self.quadrature_indices(&keep)?;
            let vrn = DMatrix::from_fn(kidx.len(), k, |a, b| (self.cov.row(kidx[a]) * nmat.column(b))[(0, 0)]);
            let gain = &vrn * &s_inv;
            let mean = DVector::from_iterator(kidx.len(), kidx.iter().map(|&i| self.mean[i])) + &gain * &resid;
            let vrr = DMatrix::from_fn(kidx.len(), kidx.len(), |a, b| self.cov[(kidx[a], kidx[b])]);
            let cov = vrr - &gain * vrn.transpose();
            Some(GaussianState { mean, cov })
        };
        Ok(Conditioned { state, density })
    }

    /// Columns n_k selecting X_θ on each measured mode, and the results.
    fn projection(&self, measurements: &[Homodyne]) -> (DMatrix<f64>, DVector<f64>) {
        let mut nmat = DMatrix::zeros(self.mean.len(), measurements.len());
        for (k, m) in measurements.iter().enumerate() {
            nmat[(2 * m.mode, k)] = m.theta.cos();
            nmat[(2 * m.mode + 1, k)] = m.theta.sin();
        }
        let chi = DVector::from_iterator(measurements.len(), measurements.iter().map(|m| m.chi));
        (nmat, chi)
    }
}

/// ΩᵀΩ = I block form with [[0, 1], [−1, 0]] per mode.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for m in 0..n_modes {
        o[(2 * m, 2 * m + 1)] = 1.0;
        o[(2 * m + 1, 2 * m)] = -1.0;
    }
    o
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Homodyne {
    pub mode: usize,
    pub theta: f64,
    pub chi: f64,
}

/// Remaining modes after a homodyne measurement (None when every mode was
/// measured) and the probability density of the result.
#[derive(Clone, Debug)]
pub struct Conditioned {
    pub state: Option<GaussianState>,
    pub density: f64,
}

/// Affine symplectic map x → S x + d.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticOp {
    matrix: DMatrix<f64>,
    displacement: DVector<f64>,
}

impl SymplecticOp {
    pub fn new(matrix: DMatrix<f64>, displacement: DVector<f64>) -> Result<Self> {
        let op = SymplecticOp { matrix, displacement };
        let d = op.displacement.len();
        if !d.is_multiple_of(2) || op.matrix.shape() != (d, d) {
            return Err(Error::InvalidParameter("symplectic map dimensions do not match".into()));
        }
        if op.symplectic_defect() > SYMPLECTIC_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "matrix is not symplectic (defect {})",
                op.symplectic_defect()
            )));
        }
        Ok(op)
    }

    pub fn identity(n_modes: usize) -> Self {
        SymplecticOp {
            matrix: DMatrix::identity(2 * n_modes, 2 * n_modes),
            displacement: DVector::zeros(2 * n_modes),
        }
    }

    /// D(β) on `mode`: X += 2 Re β, P += 2 Im β.
    pub fn displacement(n_modes: usize, mode: usize, beta: C64) -> Result<Self> {
        check_mode(n_modes, mode)?;
        let mut op = Self::identity(n_modes);
        op.displacement[2 * mode] = 2.0 * beta.re;
        op.displacement[2 * mode + 1] = 2.0 * beta.im;
        Ok(op)
    }

    /// exp[θ(e^{iφ} b_i† b_j − e^{−iφ} b_i b_j†)], cos θ = √T:
    /// U†b_iU = √T b_i + e^{iφ}√(1−T) b_j, U†b_jU = √T b_j − e^{−iφ}√(1−T) b_i.
    pub fn beamsplitter(n_modes: usize, i: usize, j: usize, transmissivity: f64, phase: f64) -> Result<Self> {
        check_pair(n_modes, i, j)?;
        if !(0.0..=1.0).contains(&transmissivity) {
            return Err(Error::InvalidParameter(format!("transmissivity {transmissivity} outside [0, 1]")));
        }
        let (c, s) = (transmissivity.sqrt(), (1.0 - transmissivity).sqrt());
        let mut op = Self::identity(n_modes);
        op.set_linear(i, i, C64::new(c, 0.0));
        op.set_linear(i, j, C64::from_polar(s, phase));
        op.set_linear(j, j, C64::new(c, 0.0));
        op.set_linear(j, i, -C64::from_polar(s, -phase));
        Ok(op)
    }

    /// exp[r(b_i b_j − b_i† b_j†)]: U†b_iU = cosh r b_i − sinh r b_j†.
    pub fn two_mode_squeeze(n_modes: usize, i: usize, j: usize, r: f64) -> Result<Self> {
        check_pair(n_modes, i, j)?;
        let (c, s) = (r.cosh(), r.sinh());
        let mut op = Self::identity(n_modes);
        op.set_linear(i, i, C64::new(c, 0.0));
        op.set_linear(j, j, C64::new(c, 0.0));
        op.set_conjugate(i, j, C64::new(-s, 0.0));
        op.set_conjugate(j, i, C64::new(-s, 0.0));
        Ok(op)
    }

    /// exp[s(b² − b†²)/2]: U†bU = cosh s b − sinh s b†.
    pub fn squeeze(n_modes: usize, mode: usize, s: f64) -> Result<Self> {
        check_mode(n_modes, mode)?;
        let mut op = Self::identity(n_modes);
        op.matrix[(2 * mode, 2 * mode)] = (-s).exp();
        op.matrix[(2 * mode + 1, 2 * mode + 1)] = s.exp();
        Ok(op)
    }

    /// Coefficient z of b_k in U†b_iU: block [[Re z, −Im z], [Im z, Re z]].
    fn set_linear(&mut self, i: usize, k: usize, z: C64) {
        self.matrix[(2 * i, 2 * k)] = z.re;
        self.matrix[(2 * i, 2 * k + 1)] = -z.im;
        self.matrix[(2 * i + 1, 2 * k)] = z.im;
        self.matrix[(2 * i + 1, 2 * k + 1)] = z.re;
    }

    /// Coefficient z of b_k† in U†b_iU: block [[Re z, Im z], [Im z, −Re z]].
    fn set_conjugate(&mut self, i: usize, k: usize, z: C64) {
        self.matrix[(2 * i, 2 * k)] = z.re;
        self.matrix[(2 * i, 2 * k + 1)] = z.im;
        self.matrix[(2 * i + 1, 2 * k)] = z.im;
        self.matrix[(2 * i + 1, 2 * k + 1)] = -z.re;
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn displacement_vector(&self) -> &DVector<f64> {
        &self.displacement
    }

    /// Applies `self` after `first`.
    pub fn compose(&self, first: &SymplecticOp) -> SymplecticOp {
        SymplecticOp {
            matrix: &self.matrix * &first.matrix,
            displacement: &self.matrix * &first.displacement + &self.displacement,
        }
    }

    /// max |SᵀΩS − Ω|.
    pub fn symplectic_defect(&self) -> f64 {
        let o = symplectic_form(self.displacement.len() / 2);
        (self.matrix.transpose() * &o * &self.matrix - o).abs().max()
    }
}

fn check_mode(n_modes: usize, mode: usize) -> Result<()> {
    if mode < n_modes {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("mode {mode} out of range for {n_modes} modes")))
    }
}

fn check_pair(n_modes: usize, i: usize, j: usize) -> Result<()> {
    check_mode(n_modes, i)?;
    check_mode(n_modes, j)?;
    if i == j {
        return Err(Error::InvalidParameter("two-mode operation needs distinct modes".into()));
    }
    Ok(())
}

/// Channel and gain settings of a Gaussian teleportation run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeleportSetup {
    pub r: f64,
    pub gain: f64,
    /// Loss on the input mode before the Bell measurement.
    pub eta_input: f64,
    /// Loss on Alice's resource mode before the Bell measurement.
    pub eta_alice: f64,
    /// Loss on Bob's resource mode.
    pub eta_bob: f64,
}

impl TeleportSetup {
    pub fn ideal(r: f64) -> Self {
        TeleportSetup {
            r,
            gain: 1.0,
            eta_input: 1.0,
            eta_alice: 1.0,
            eta_bob: 1.0,
        }
    }
}

/// The joint (χ₊, χ₋, X_B, P_B) Gaussian after the Bell beamsplitter,
/// before any measurement. Mode order V, A, B.
fn bell_stage(setup: &TeleportSetup, input: &GaussianState) -> Result<GaussianState> {
    if input.n_modes() != 1 {
        return Err(Error::InvalidParameter("teleportation input must be single-mode".into()));
    }
    let joint = input
        .tensor(&GaussianState::epr(setup.r)?)
        .loss_channel(0, setup.eta_input)?
        .loss_channel(1, setup.eta_alice)?
        .loss_channel(2, setup.eta_bob)?;
    joint.apply(&SymplecticOp::beamsplitter(3, 0, 1, 0.5, 0.0)?)
}

const BELL: [(usize, f64); 2] = [(0, 0.0), (1, std::f64::consts::FRAC_PI_2)];

/// Bob's correction D(gα*) with α = (χ₊ + iχ₋)/√2 as a phase-space shift.
fn correction(gain: f64, chi_plus: f64, chi_minus: f64) -> DVector<f64> {
    let s = gain * std::f64::consts::SQRT_2;
    DVector::from_vec(vec![s * chi_plus, -s * chi_minus])
}

/// Teleportation at a fixed Bell outcome: Bob's corrected state and the
/// outcome density.
pub fn teleport_conditional(
    setup: &TeleportSetup,
    input: &GaussianState,
    chi_plus: f64,
    chi_minus: f64,
) -> Result<Conditioned> {
    let stage = bell_stage(setup, input)?;
    let meas = [
        Homodyne { mode: BELL[0].0, theta: BELL[0].1, chi: chi_plus },
        Homodyne { mode: BELL[1].0, theta: BELL[1].1, chi: chi_minus },
    ];
    let mut c = stage.condition_on_homodyne_joint(&meas)?;
    if let Some(s) = c.state.as_mut() {
        s.mean += correction(setup.gain, chi_plus, chi_minus);
    }
    Ok(c)
}

/// Bob's corrected state averaged over all Bell outcomes.
///
/// The corrected mean is affine in the outcome, m(χ) = m₀ + Tχ, and the
/// conditional covariance V_c does not depend on χ, so the mixture is
/// Gaussian with mean m₀ + Tμ_χ and covariance V_c + TΣ_χTᵀ.
pub fn teleport_averaged(setup: &TeleportSetup, input: &GaussianState) -> Result<GaussianState> {
    let stage = bell_stage(setup, input)?;
    let at = |cp: f64, cm: f64| -> Result<(DVector<f64>, DMatrix<f64>)> {
        let meas = [
            Homodyne { mode: BELL[0].0, theta: BELL[0].1, chi: cp },
            Homodyne { mode: BELL[1].0, theta: BELL[1].1, chi: cm },
        ];
        let s = stage
            .condition_on_homodyne_joint(&meas)?
            .state
            .expect("Bob's mode is never measured");
        Ok((s.mean + correction(setup.gain, cp, cm), s.cov))
    };
    // The corrected mean is affine in χ: recover the slope from three points.
    let (m0, vc) = at(0.0, 0.0)?;
    let (m1, _) = at(1.0, 0.0)?;
    let (m2, _) = at(0.0, 1.0)?;
    let slope = DMatrix::from_columns(&[&m1 - &m0, &m2 - &m0]);
    let chi = stage.reduced(&[0, 1])?;
    let sel = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    let mu = &sel * chi.mean();
    let sigma = &sel * chi.cov() * sel.transpose();
    Ok(GaussianState {
        mean: m0 + &slope * mu,
        cov: vc + &slope * sigma * slope.transpose(),
    })
}

/// Outcome-averaged fidelity ⟨β|ρ̄_B|β⟩ for a coherent input.
pub fn average_fidelity_coherent(setup: &TeleportSetup, beta: C64) -> Result<f64> {
    let input = GaussianState::coherent(beta);
    teleport_averaged(setup, &input)?.overlap(&input)
}

/// Average fidelity for coherent inputs through the full Gaussian pipeline.
/// Independent of β at unit gain; 1/(1 + e^{−2r}) with ideal channels.
pub fn teleport_fidelity_coherent(r: f64, gain: f64, eta_epr: f64) -> Result<f64> {
    let setup = TeleportSetup {
        r,
        gain,
        eta_alice: eta_epr,
        eta_bob: eta_epr,
        eta_input: 1.0,
    };
    average_fidelity_coherent(&setup, C64::new(0.0, 0.0))
}

/// Outcome-averaged fidelity ⟨φ|ρ̄_B|φ⟩ for a pure Gaussian input.
pub fn teleport_fidelity_gaussian(setup: &TeleportSetup, input: &GaussianState) -> Result<f64> {
    teleport_averaged(setup, input)?.overlap(input)
}

/// Lossy EPR state: two-mode squeezed vacuum with losses η_A, η_B.
pub fn lossy_epr(r: f64, eta_a: f64, eta_b: f64) -> Result<GaussianState> {
    GaussianState::epr(r)?.loss_channel(0, eta_a)?.loss_channel(1, eta_b)
}

/// Two-mode squeezed thermal decomposition S(r')(ρ_th(ν_A) ⊗ ρ_th(ν_B))S(r')†
/// of a zero-mean standard-form state with Var X_A = Var P_A = a,
/// Var X_B = Var P_B = b, ⟨X_AX_B⟩ = −c, ⟨P_AP_B⟩ = c.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqueezedThermal {
    pub r: f64,
    /// Thermal variances 2n̄ + 1.
    pub nu_a: f64,
    pub nu_b: f64,
}

impl SqueezedThermal {
    pub fn from_state(state: &GaussianState) -> Result<Self> {
        let v = state.cov();
        let (a, b, c) = (v[(0, 0)], v[(2, 2)], v[(1, 3)]);
        let standard = state.n_modes() == 2
            && state.mean().amax() < 1e-12
            && (v[(1, 1)] - a).abs() < 1e-12
            && (v[(3, 3)] - b).abs() < 1e-12
            && (v[(0, 2)] + c).abs() < 1e-12
            && c >= 0.0
            && [v[(0, 1)], v[(0, 3)], v[(1, 2)], v[(2, 3)]].iter().all(|x| x.abs() < 1e-12);
        if !standard {
            return Err(Error::Unsupported(
                "squeezed-thermal decomposition needs a zero-mean EPR-type standard form".into(),
            ));
        }
        let r = 0.5 * (2.0 * c / (a + b)).atanh();
        let total = (a + b) / (2.0 * r).cosh();
        Ok(SqueezedThermal {
            r,
            nu_a: 0.5 * (total + a - b),
            nu_b: 0.5 * (total - (a - b)),
        })
    }

    /// Fock-basis density on modes ("A", "B") at `cutoff`, built at the larger
    /// `work_cutoff` and then truncated (trace reported by the result).
    pub fn to_fock(&self, cutoff: usize, work_cutoff: usize) -> Result<DensityOperator> {
        let work = work_cutoff.max(cutoff);
        let pa = fock::thermal_populations(0.5 * (self.nu_a - 1.0), work);
        let pb = fock::thermal_populations(0.5 * (self.nu_b - 1.0), work);
        let wbasis = BasisSpec::new(work, ["A", "B"])?;
        let op = ModeOperator::two_mode_squeeze(&wbasis, 0, 1, self.r)?;
        let basis = BasisSpec::new(cutoff, ["A", "B"])?;
        let l = cutoff + 1;
        let mut rho = DMatrix::<C64>::zeros(l * l, l * l);
        for block in op.blocks().expect("two-mode squeeze is block structured") {
            let kept: Vec<(usize, usize)> = block
                .states
                .iter()
                .enumerate()
                .filter(|(_, &(n, m))| n <= cutoff && m <= cutoff)
                .map(|(row, &(n, m))| (row, n * l + m))
                .collect();
            if kept.is_empty() {
                continue;
            }
            for (col, &(n, m)) in block.states.iter().enumerate() {
                let w = pa[n] * pb[m];
                if w < 1e-18 {
                    continue;
                }
                for &(ra, ia) in &kept {
                    let za = block.matrix[(ra, col)] * w;
                    for &(rb, ib) in &kept {
                        rho[(ia, ib)] += za * block.matrix[(rb, col)].conj();
                    }
                }
            }
        }
        DensityOperator::new(basis, rho)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epr_r0_is_vacuum() {
        let s = GaussianState::epr(0.0).unwrap();
        assert_eq!(s.cov(), &DMatrix::<f64>::identity(4, 4));
    }

    #[test]
    fn standard_operations_are_symplectic() {
        let ops = [
            SymplecticOp::beamsplitter(3, 0, 2, 0.3, 1.1).unwrap(),
            SymplecticOp::two_mode_squeeze(3, 1, 2, 0.7).unwrap(),
            SymplecticOp::squeeze(3, 0, -0.4).unwrap(),
            SymplecticOp::displacement(3, 1, C64::new(0.3, -0.2)).unwrap(),
        ];
        for op in &ops {
            assert!(op.symplectic_defect() < SYMPLECTIC_TOLERANCE);
        }
    }

    #[test]
    fn two_mode_squeeze_of_vacuum_is_epr() {
        let s = GaussianState::vacuum(2)
            .apply(&SymplecticOp::two_mode_squeeze(2, 0, 1, 0.6).unwrap())
            .unwrap();
        let e = GaussianState::epr(0.6).unwrap();
        assert!((s.cov() - e.cov()).abs().max() < 1e-12);
    }

    #[test]
    fn vacuum_homodyne_density() {
        let c = GaussianState::vacuum(2).condition_on_homodyne(0, 0.7, 1.3).unwrap();
        let expected = (-0.5 * 1.3f64 * 1.3).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((c.density - expected).abs() < 1e-15);
        assert_eq!(c.state.unwrap(), GaussianState::vacuum(1));
    }

    #[test]
    fn overlap_of_coherent_states() {
        let a = GaussianState::coherent(C64::new(0.0, 0.0));
        let b = GaussianState::coherent(C64::new(1.0, 0.0));
        assert!((a.overlap(&b).unwrap() - (-1.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn loss_to_zero_gives_vacuum() {
        let s = GaussianState::epr(0.9).unwrap().loss_channel(1, 0.0).unwrap();
        let red = s.reduced(&[1]).unwrap();
        assert!((red.cov() - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-14);
    }
}
