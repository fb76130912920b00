//! Alice's Bell-state analysis: quadrature eigenvectors, projection of the
//! joint (V, A, B) state onto homodyne outcomes (χ₊, χ₋), outcome densities
//! on a grid, and sampling.
//!
//! Conventions: χ is an eigenvalue of c e^{−iθ} + c† e^{iθ}, so the vacuum
//! density is (2π)^{−1/2} e^{−χ²/2}. The 50/50 beamsplitter is
//! `beamsplitter(1/2, 0)` on (V, A), which measures c₊ = (b_V + b_A)/√2 in
//! slot V and c₋ = (b_A − b_V)/√2 in slot A. With θ₊ = 0, θ₋ = π/2 the
//! projection equals
//! (2π)^{−1/2} e^{−|α|²/2} ⟨0|exp(−b_V b_A + α b_V + α* b_A),
//! α = (χ₊ + iχ₋)/√2, which is what the operator route evaluates.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{pow, One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{BasisSpec, DensityOperator, FockVector, Normalization, PhotonImages, C64, ZERO};

/// Normalization deficit above which an outcome grid is rejected.
pub const GRID_DEFICIT_TOLERANCE: f64 = 1e-2;
/// Marginal variance above which the grid is widened.
pub const ADAPTIVE_VARIANCE: f64 = 2.0;
/// Largest spacing used when a grid is widened.
pub const MAX_ADAPTIVE_SPACING: f64 = 0.25;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomodyneSetting {
    pub theta_plus: f64,
    pub theta_minus: f64,
}

impl Default for HomodyneSetting {
    fn default() -> Self {
        HomodyneSetting {
            theta_plus: 0.0,
            theta_minus: std::f64::consts::FRAC_PI_2,
        }
    }
}

impl HomodyneSetting {
    pub fn is_default(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementOutcome {
    pub chi_plus: f64,
    pub chi_minus: f64,
    /// (χ₊ + iχ₋)/√2.
    pub alpha: C64,
    pub density_weight: f64,
}

impl MeasurementOutcome {
    pub fn new(chi_plus: f64, chi_minus: f64) -> Self {
        MeasurementOutcome {
            chi_plus,
            chi_minus,
            alpha: C64::new(chi_plus, chi_minus) * FRAC_1_SQRT_2,
            density_weight: 0.0,
        }
    }

    pub fn with_density(mut self, density: f64) -> Self {
        self.density_weight = density;
        self
    }
}

/// Largest |χ| for which quadrature eigenvectors are built at cutoff N:
/// √(4N + 2), the classical turning point of level N. Beyond it every
/// retained Hermite function is in its evanescent tail.
pub fn quadrature_range(cutoff: usize) -> f64 {
    (4.0 * cutoff as f64 + 2.0).sqrt()
}

/// Hermite functions ψ_n(χ) for n ≤ n_max, normalized so that
/// Σ_n |ψ_n|² is the vacuum-convention delta normalization:
/// ψ₀ = (2π)^{−1/4} e^{−χ²/4}, ψ_{n+1} = (χψ_n − √n ψ_{n−1})/√(n+1).
pub fn hermite_functions(chi: f64, n_max: usize) -> Vec<f64> {
    let mut psi = Vec::with_capacity(n_max + 1);
    psi.push((2.0 * std::f64::consts::PI).powf(-0.25) * (-0.25 * chi * chi).exp());
    if n_max >= 1 {
        psi.push(chi * psi[0]);
    }
    for n in 1..n_max {
        let next = (chi * psi[n] - (n as f64).sqrt() * psi[n - 1]) / ((n + 1) as f64).sqrt();
        psi.push(next);
    }
    psi
}

/// |χ⟩_θ with amplitudes ⟨n|χ⟩_θ = e^{inθ} ψ_n(χ) (Hermite recursion).
pub fn quadrature_eigenvector(chi: f64, theta: f64, cutoff: usize) -> Result<FockVector> {
    check_range(chi, cutoff)?;
    let amps = hermite_functions(chi, cutoff)
        .into_iter()
        .enumerate()
        .map(|(n, p)| C64::from_polar(p, n as f64 * theta))
        .collect();
    FockVector::new(BasisSpec::single(cutoff, "quadrature")?, amps, Normalization::DeltaNormalized)
}

/// |χ⟩_θ from the series of (2π)^{−1/4} exp[−(c†e^{iθ} − χ)²/2 + χ²/4]|0⟩:
/// ⟨n|χ⟩ = (2π)^{−1/4} e^{−χ²/4} e^{inθ} √(n!) Σ_k χ^{n−2k}(−1/2)^k / ((n−2k)! k!).
///
/// The alternating sum cancels badly for large χ and n, so it is accumulated
/// exactly in rationals (χ is a dyadic rational) and rounded once.
pub fn quadrature_eigenvector_series(chi: f64, theta: f64, cutoff: usize) -> Result<FockVector> {
    check_range(chi, cutoff)?;
    let pre = (2.0 * std::f64::consts::PI).powf(-0.25) * (-0.25 * chi * chi).exp();
    let x = BigRational::from_float(chi).expect("finite");
    let half = BigRational::new(BigInt::from(-1), BigInt::from(2));
    let mut amps = Vec::with_capacity(cutoff + 1);
    let mut sqrt_fact = 1.0f64;
    for n in 0..=cutoff {
        if n > 0 {
            sqrt_fact *= (n as f64).sqrt();
        }
        // n! Σ_k (−1/2)^k χ^{n−2k} / ((n−2k)! k!), an integer polynomial in χ.
        let mut sum = BigRational::zero();
        for k in 0..=n / 2 {
            let m = n - 2 * k;
            let coef = BigRational::from_integer(factorial(n) / (factorial(m) * factorial(k)));
            sum += coef * pow(half.clone(), k) * pow(x.clone(), m);
        }
        let value = sum.to_f64().expect("finite") / sqrt_fact;
        amps.push(C64::from_polar(pre * value, n as f64 * theta));
    }
    FockVector::new(BasisSpec::single(cutoff, "quadrature")?, amps, Normalization::DeltaNormalized)
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

fn check_range(chi: f64, cutoff: usize) -> Result<()> {
    let max = quadrature_range(cutoff);
    if !chi.is_finite() || chi.abs() > max {
        return Err(Error::QuadratureRange { chi, max, cutoff });
    }
    Ok(())
}

/// Positions of the input, Alice and Bob modes in the joint basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BellModes {
    pub input: usize,
    pub alice: usize,
    pub bob: usize,
}

impl Default for BellModes {
    fn default() -> Self {
        BellModes {
            input: 0,
            alice: 1,
            bob: 2,
        }
    }
}

fn check_modes(basis: &BasisSpec, modes: BellModes) -> Result<()> {
    if basis.n_modes() != 3 {
        return Err(Error::BasisMismatch(format!(
            "Bell projection needs a three-mode state, got {} modes",
            basis.n_modes()
        )));
    }
    let BellModes { input, alice, bob } = modes;
    basis.check_pair(input, alice)?;
    basis.check_pair(input, bob)?;
    basis.check_pair(alice, bob)?;
    Ok(())
}

/// The joint state after the Bell beamsplitter, held at per-mode cutoff 2N
/// so that no photon-number block is truncated. Reusable across outcomes.
pub struct BellAnalyzer {
    cutoff: usize,
    setting: HomodyneSetting,
    bob_basis: BasisSpec,
    /// T[(p·M + q)·L + b] with M = 2N + 1 (slots + and −), L = N + 1 (Bob).
    t: Vec<C64>,
}

impl BellAnalyzer {
    pub fn new(state: &FockVector, modes: BellModes, setting: HomodyneSetting) -> Result<Self> {
        let basis = state.basis();
        check_modes(basis, modes)?;
        let n = basis.cutoff();
        let l = n + 1;
        let m = 2 * n + 1;
        let images = PhotonImages::new(n, n, 0.5, 0.0);
        let (sv, sa, sb) = (basis.stride(modes.input), basis.stride(modes.alice), basis.stride(modes.bob));
        let amps = state.amplitudes();
        let mut t = vec![ZERO; m * m * l];
        for v in 0..l {
            for a in 0..l {
                let total = v + a;
                let img = images.image(v, a);
                for b in 0..l {
                    let psi = amps[v * sv + a * sa + b * sb];
                    if psi == ZERO {
                        continue;
                    }
                    for (p, w) in img.iter().enumerate() {
                        t[(p * m + (total - p)) * l + b] += psi * w;
                    }
                }
            }
        }
        Ok(BellAnalyzer {
            cutoff: n,
            setting,
            bob_basis: BasisSpec::single(n, &basis.labels()[modes.bob])?,
            t,
        })
    }

    pub fn bob_basis(&self) -> &BasisSpec {
        &self.bob_basis
    }

    fn levels(&self) -> (usize, usize) {
        (2 * self.cutoff + 1, self.cutoff + 1)
    }

    /// Bra coefficients ⟨χ|n⟩_θ = e^{−inθ} ψ_n(χ) on the enlarged space.
    fn bra(&self, chi: f64, theta: f64) -> Vec<C64> {
        hermite_functions(chi, 2 * self.cutoff)
            .into_iter()
            .enumerate()
            .map(|(n, p)| C64::from_polar(p, -(n as f64) * theta))
            .collect()
    }

    /// Contracts slot + with ⟨χ₊|: R[q·L + b].
    fn row(&self, chi_plus: f64) -> Vec<C64> {
        let (m, l) = self.levels();
        let w = self.bra(chi_plus, self.setting.theta_plus);
        let mut r = vec![ZERO; m * l];
        for (p, wp) in w.iter().enumerate() {
            if *wp == ZERO {
                continue;
            }
            let slab = &self.t[p * m * l..(p + 1) * m * l];
            for (acc, x) in r.iter_mut().zip(slab) {
                *acc += wp * x;
            }
        }
        r
    }

    fn finish(&self, row: &[C64], bra_minus: &[C64], out: &mut [C64]) {
        let l = self.cutoff + 1;
        out.iter_mut().for_each(|z| *z = ZERO);
        for (q, u) in bra_minus.iter().enumerate() {
            if *u == ZERO {
                continue;
            }
            for (acc, x) in out.iter_mut().zip(&row[q * l..(q + 1) * l]) {
                *acc += u * x;
            }
        }
    }

    /// Unnormalized Bob state at (χ₊, χ₋); its squared norm is p(χ₊, χ₋).
    pub fn project(&self, chi_plus: f64, chi_minus: f64) -> Result<FockVector> {
        let max = quadrature_range(2 * self.cutoff);
        for chi in [chi_plus, chi_minus] {
            if !chi.is_finite() || chi.abs() > max {
                return Err(Error::QuadratureRange {
                    chi,
                    max,
                    cutoff: 2 * self.cutoff,
                });
            }
        }
        let row = self.row(chi_plus);
        let mut out = vec![ZERO; self.cutoff + 1];
        self.finish(&row, &self.bra(chi_minus, self.setting.theta_minus), &mut out);
        FockVector::new(self.bob_basis.clone(), out, Normalization::Unnormalized)
    }

    /// Evaluates `f(i, j, bob)` on every grid point, rows in parallel;
    /// results are returned row-major (χ₊ index slowest).
    pub fn map_grid<T, F>(&self, axis: &GridAxis, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, usize, &[C64]) -> T + Sync,
    {
        let minus: Vec<Vec<C64>> = (0..axis.n_points)
            .map(|j| self.bra(axis.point(j), self.setting.theta_minus))
            .collect();
        (0..axis.n_points)
            .into_par_iter()
            .map(|i| {
                let row = self.row(axis.point(i));
                let mut bob = vec![ZERO; self.cutoff + 1];
                let mut vals = Vec::with_capacity(axis.n_points);
                for (j, u) in minus.iter().enumerate() {
                    self.finish(&row, u, &mut bob);
                    vals.push(f(i, j, &bob));
                }
                vals
            })
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    }
}

/// Projection by the direct route: beamsplitter on (V, A) then contraction
/// with ⟨χ₊|_{θ₊} ⟨χ₋|_{θ₋}.
pub fn bell_project_direct(
    state: &FockVector,
    outcome: &MeasurementOutcome,
    setting: HomodyneSetting,
) -> Result<FockVector> {
    BellAnalyzer::new(state, BellModes::default(), setting)?.project(outcome.chi_plus, outcome.chi_minus)
}

/// Projection by the operator route
/// (2π)^{−1/2} e^{−|α|²/2} Σ_{v,a} α^v α*^a/√(v!a!) ⟨v, a| exp(−b_V b_A)|Ψ⟩.
/// Only defined for the default LO phases.
pub fn bell_project_operator(
    state: &FockVector,
    outcome: &MeasurementOutcome,
    setting: HomodyneSetting,
) -> Result<FockVector> {
    bell_project_operator_modes(state, BellModes::default(), outcome, setting)
}

pub fn bell_project_operator_modes(
    state: &FockVector,
    modes: BellModes,
    outcome: &MeasurementOutcome,
    setting: HomodyneSetting,
) -> Result<FockVector> {
    if !setting.is_default() {
        return Err(Error::Unsupported(
            "the operator route is derived for LO phases (0, pi/2) only".into(),
        ));
    }
    let basis = state.basis();
    check_modes(basis, modes)?;
    let n = basis.cutoff();
    let l = n + 1;
    let (sv, sa, sb) = (basis.stride(modes.input), basis.stride(modes.alice), basis.stride(modes.bob));
    let amps = state.amplitudes();
    let alpha = outcome.alpha;

    // Coherent-bra weights α^v/√v! and α*^a/√a!.
    let mut wv = vec![ZERO; l];
    let mut wa = vec![ZERO; l];
    wv[0] = C64::new(1.0, 0.0);
    wa[0] = C64::new(1.0, 0.0);
    for k in 1..l {
        let s = 1.0 / (k as f64).sqrt();
        wv[k] = wv[k - 1] * alpha * s;
        wa[k] = wa[k - 1] * alpha.conj() * s;
    }

    let mut bob = vec![ZERO; l];
    for v in 0..l {
        for a in 0..l {
            let w = wv[v] * wa[a];
            // ⟨v, a| exp(−b_V b_A) = Σ_k (−1)^k/k! √((v+k)!/v!) √((a+k)!/a!) ⟨v+k, a+k|
            let kmax = n - v.max(a);
            let mut coef = 1.0;
            for k in 0..=kmax {
                if k > 0 {
                    coef *= -(((v + k) * (a + k)) as f64).sqrt() / k as f64;
                }
                let base = (v + k) * sv + (a + k) * sa;
                let c = w * coef;
                for (b, z) in bob.iter_mut().enumerate() {
                    *z += c * amps[base + b * sb];
                }
            }
        }
    }
    let pre = (2.0 * std::f64::consts::PI).powf(-0.5) * (-0.5 * alpha.norm_sqr()).exp();
    bob.iter_mut().for_each(|z| *z *= pre);
    FockVector::new(
        BasisSpec::single(n, &basis.labels()[modes.bob])?,
        bob,
        Normalization::Unnormalized,
    )
}

/// Symmetric grid axis: points −L + k·h, h = 2L/(n − 1); each point is the
/// center of a square cell of side h.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub half_width: f64,
    pub n_points: usize,
}

impl GridAxis {
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n_points - 1) as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        -self.half_width + k as f64 * self.spacing()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub half_width: f64,
    pub n_points: usize,
    /// Widen the grid to 6σ of the outcome marginals when their variance
    /// exceeds [`ADAPTIVE_VARIANCE`].
    pub adaptive: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            half_width: 8.0,
            n_points: 161,
            adaptive: true,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0) || !self.half_width.is_finite() || self.n_points < 3 {
            return Err(Error::InvalidParameter(format!(
                "grid needs half_width > 0 and at least 3 points, got {} and {}",
                self.half_width, self.n_points
            )));
        }
        Ok(())
    }

    /// The axis actually used for marginals with the given means and
    /// variances of (χ₊, χ₋).
    pub fn resolve(&self, means: [f64; 2], variances: [f64; 2]) -> Result<GridAxis> {
        self.validate()?;
        let base = GridAxis {
            half_width: self.half_width,
            n_points: self.n_points,
        };
        if !self.adaptive || variances.iter().all(|&v| v <= ADAPTIVE_VARIANCE) {
            return Ok(base);
        }
        let need = (0..2)
            .map(|k| means[k].abs() + 6.0 * variances[k].max(0.0).sqrt())
            .fold(self.half_width, f64::max);
        if need <= self.half_width {
            return Ok(base);
        }
        let h = base.spacing().max(MAX_ADAPTIVE_SPACING.min(base.spacing() * need / self.half_width));
        let half_cells = (need / h).ceil() as usize;
        Ok(GridAxis {
            half_width: half_cells as f64 * h,
            n_points: 2 * half_cells + 1,
        })
    }
}

/// Outcome density p(χ₊, χ₋) on a square grid, row-major in χ₊.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeGrid {
    pub axis: GridAxis,
    pub density: Vec<f64>,
    /// 1 − Σ p h².
    pub deficit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMetadata {
    pub half_width: f64,
    pub n_points: usize,
    pub spacing: f64,
    pub normalization_deficit: f64,
}

impl OutcomeGrid {
    pub fn cell_area(&self) -> f64 {
        self.axis.spacing().powi(2)
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.density[i * self.axis.n_points + j]
    }

    /// (χ₊, χ₋, p) for every point, row-major.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let n = self.axis.n_points;
        self.density
            .iter()
            .enumerate()
            .map(move |(k, &p)| (self.axis.point(k / n), self.axis.point(k % n), p))
    }

    pub fn metadata(&self) -> GridMetadata {
        GridMetadata {
            half_width: self.axis.half_width,
            n_points: self.axis.n_points,
            spacing: self.axis.spacing(),
            normalization_deficit: self.deficit,
        }
    }

    fn from_density(axis: GridAxis, density: Vec<f64>) -> Result<Self> {
        let total: f64 = density.iter().sum::<f64>() * axis.spacing().powi(2);
        let grid = OutcomeGrid {
            axis,
            density,
            deficit: 1.0 - total,
        };
        if grid.deficit.abs() > GRID_DEFICIT_TOLERANCE {
            return Err(Error::GridTooSmall {
                deficit: grid.deficit,
                tolerance: GRID_DEFICIT_TOLERANCE,
                half_width: axis.half_width,
            });
        }
        Ok(grid)
    }
}

/// Means and variances of (χ₊, χ₋) for an ensemble of unnormalized branches
/// whose weights sum to the total probability.
pub fn outcome_marginals(ensemble: &[FockVector], modes: BellModes) -> ([f64; 2], [f64; 2]) {
    let total: f64 = ensemble.iter().map(|v| v.norm_sqr()).sum();
    let (mut m, mut s) = ([0.0; 2], [0.0; 2]);
    for psi in ensemble {
        let w = psi.norm_sqr() / total;
        let mom = psi.quadrature_moments();
        let (xv, pv, xa, pa) = (2 * modes.input, 2 * modes.input + 1, 2 * modes.alice, 2 * modes.alice + 1);
        // χ₊ = (X_V + X_A)/√2, χ₋ = (P_A − P_V)/√2.
        let mp = (mom.mean[xv] + mom.mean[xa]) * FRAC_1_SQRT_2;
        let mm = (mom.mean[pa] - mom.mean[pv]) * FRAC_1_SQRT_2;
        let vp = 0.5 * (mom.cov[(xv, xv)] + mom.cov[(xa, xa)] + 2.0 * mom.cov[(xv, xa)]);
        let vm = 0.5 * (mom.cov[(pa, pa)] + mom.cov[(pv, pv)] - 2.0 * mom.cov[(pv, pa)]);
        m[0] += w * mp;
        m[1] += w * mm;
        s[0] += w * (vp + mp * mp);
        s[1] += w * (vm + mm * mm);
    }
    (m, [s[0] - m[0] * m[0], s[1] - m[1] * m[1]])
}

/// Outcome density of a pure state on the resolved grid.
pub fn outcome_density(state: &FockVector, spec: &GridSpec) -> Result<OutcomeGrid> {
    outcome_density_ensemble(std::slice::from_ref(state), BellModes::default(), HomodyneSetting::default(), spec)
}

/// Outcome density of a mixture given as unnormalized pure branches.
pub fn outcome_density_ensemble(
    ensemble: &[FockVector],
    modes: BellModes,
    setting: HomodyneSetting,
    spec: &GridSpec,
) -> Result<OutcomeGrid> {
    if ensemble.is_empty() {
        return Err(Error::InvalidParameter("empty ensemble".into()));
    }
    let (means, vars) = outcome_marginals(ensemble, modes);
    let axis = spec.resolve(means, vars)?;
    let mut density = vec![0.0; axis.n_points * axis.n_points];
    for psi in ensemble {
        let an = BellAnalyzer::new(psi, modes, setting)?;
        let d = an.map_grid(&axis, |_, _, bob| bob.iter().map(|z| z.norm_sqr()).sum::<f64>());
        density.iter_mut().zip(d).for_each(|(acc, x)| *acc += x);
    }
    OutcomeGrid::from_density(axis, density)
}

/// Inverse-CDF sampler over grid cells with uniform jitter inside a cell.
#[derive(Clone, Debug)]
pub struct OutcomeSampler {
    axis: GridAxis,
    cdf: Vec<f64>,
    density: Vec<f64>,
}

impl OutcomeSampler {
    pub fn new(grid: &OutcomeGrid) -> Result<Self> {
        let mut acc = 0.0;
        let cdf: Vec<f64> = grid
            .density
            .iter()
            .map(|&p| {
                acc += p.max(0.0);
                acc
            })
            .collect();
        if !(acc > 0.0) {
            return Err(Error::InvalidParameter("outcome grid has no weight".into()));
        }
        Ok(OutcomeSampler {
            axis: grid.axis,
            cdf,
            density: grid.density.clone(),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MeasurementOutcome {
        let total = *self.cdf.last().expect("nonempty grid");
        let u = rng.random::<f64>() * total;
        let k = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        let n = self.axis.n_points;
        let h = self.axis.spacing();
        let cp = self.axis.point(k / n) + (rng.random::<f64>() - 0.5) * h;
        let cm = self.axis.point(k % n) + (rng.random::<f64>() - 0.5) * h;
        MeasurementOutcome::new(cp, cm).with_density(self.density[k])
    }
}

/// One outcome drawn with a ChaCha8 generator seeded by `seed`.
pub fn sample_outcome(grid: &OutcomeGrid, seed: u64) -> Result<MeasurementOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(OutcomeSampler::new(grid)?.sample(&mut rng))
}

/// Bob's state averaged over the grid: Σ h² |bob⟩⟨bob| summed over branches.
pub fn outcome_averaged_bob(
    ensemble: &[FockVector],
    modes: BellModes,
    setting: HomodyneSetting,
    axis: &GridAxis,
) -> Result<DensityOperator> {
    let mut acc: Option<DensityOperator> = None;
    let h2 = axis.spacing().powi(2);
    for psi in ensemble {
        let an = BellAnalyzer::new(psi, modes, setting)?;
        let basis = an.bob_basis().clone();
        let bobs = an.map_grid(axis, |_, _, bob| bob.to_vec());
        let rho = acc.get_or_insert_with(|| DensityOperator::zeros(basis));
        for b in &bobs {
            rho.add_pure(b, h2);
        }
    }
    Ok(acc.expect("nonempty ensemble"))
}
