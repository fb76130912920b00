//! State constructors and the unitary operations of the Fock engine.

use nalgebra::DMatrix;

use super::basis::BasisSpec;
use super::linalg::{C64, ONE, ZERO};
use super::operator::{apply_single, ModeOperator};
use super::state::{FockVector, Normalization, Truncated, NORM_TOLERANCE};
use crate::error::{Error, Result};

/// Largest weight the EPR resource may leave above the cutoff.
pub const EPR_TAIL_TOLERANCE: f64 = 1e-8;
/// Largest norm loss tolerated by [`displace`].
pub const DISPLACE_LOSS_TOLERANCE: f64 = 1e-3;
/// Largest boundary weight tolerated by [`two_mode_squeeze`].
pub const SQUEEZE_LOSS_TOLERANCE: f64 = 1e-6;

/// |0…0⟩.
pub fn vacuum(basis: &BasisSpec) -> FockVector {
    let mut amps = vec![ZERO; basis.dim()];
    amps[0] = ONE;
    FockVector::from_parts(basis.clone(), amps, Normalization::Normalized)
}

/// Places single-mode amplitudes on `mode`, all other modes in vacuum.
fn embed(basis: &BasisSpec, mode: usize, single: &[C64]) -> FockVector {
    let stride = basis.stride(mode);
    let mut amps = vec![ZERO; basis.dim()];
    for (n, a) in single.iter().enumerate() {
        amps[n * stride] = *a;
    }
    FockVector::from_parts(basis.clone(), amps, Normalization::Unnormalized)
}

fn renormalize(v: FockVector, full_weight: f64) -> Result<Truncated<FockVector>> {
    let kept = v.norm_sqr();
    let lost = (full_weight - kept).max(0.0) / full_weight;
    Ok(Truncated::new(v.normalized()?, lost))
}

fn check_beta(beta: C64) -> Result<()> {
    if beta.re.is_finite() && beta.im.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("coherent amplitude {beta} is not finite")))
    }
}

/// e^{−|β|²/2} βⁿ/√n! for n = 0..=cutoff (untruncated coefficients).
pub fn coherent_amplitudes(beta: C64, cutoff: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(cutoff + 1);
    let mut a = C64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
    out.push(a);
    for n in 1..=cutoff {
        a = a * beta / (n as f64).sqrt();
        out.push(a);
    }
    out
}

/// Coherent state |β⟩ on `mode`, truncated and renormalized. `lost_weight`
/// is 1 − Σ_{n≤N} e^{−|β|²}|β|^{2n}/n!.
pub fn coherent(basis: &BasisSpec, mode: usize, beta: C64) -> Result<Truncated<FockVector>> {
    basis.check_mode(mode)?;
    check_beta(beta)?;
    let amps = coherent_amplitudes(beta, basis.cutoff());
    let mut out = renormalize(embed(basis, mode, &amps), 1.0)?;
    if beta.norm_sqr() > basis.cutoff() as f64 / 4.0 {
        out.warning = Some(format!(
            "|beta|^2 = {:.3} exceeds N/4 = {:.3}; expect truncation artifacts",
            beta.norm_sqr(),
            basis.cutoff() as f64 / 4.0
        ));
    }
    Ok(out)
}

/// Number state |n⟩ on `mode`.
pub fn fock_state(basis: &BasisSpec, mode: usize, n: usize) -> Result<FockVector> {
    basis.check_mode(mode)?;
    if n > basis.cutoff() {
        return Err(Error::CutoffTooSmall {
            tail: 1.0,
            tolerance: 0.0,
            required: n,
        });
    }
    let mut single = vec![ZERO; basis.levels()];
    single[n] = ONE;
    Ok(embed(basis, mode, &single).relabel(Normalization::Normalized))
}

/// Cat state ∝ |β⟩ + (−1)^parity |−β⟩ on `mode`.
pub fn cat(basis: &BasisSpec, mode: usize, beta: C64, odd: bool) -> Result<Truncated<FockVector>> {
    basis.check_mode(mode)?;
    check_beta(beta)?;
    if odd && beta.norm_sqr() == 0.0 {
        return Err(Error::InvalidParameter("odd cat state needs beta != 0".into()));
    }
    let sign = if odd { -1.0 } else { 1.0 };
    let amps: Vec<C64> = coherent_amplitudes(beta, basis.cutoff())
        .into_iter()
        .enumerate()
        .map(|(n, a)| {
            let parity = if n % 2 == 0 { 1.0 } else { -1.0 };
            a * (1.0 + sign * parity)
        })
        .collect();
    // ‖|β⟩ ± |−β⟩‖² = 2(1 ± e^{−2|β|²})
    let full = 2.0 * (1.0 + sign * (-2.0 * beta.norm_sqr()).exp());
    renormalize(embed(basis, mode, &amps), full)
}

/// Squeezed vacuum exp[s(b² − b†²)/2]|0⟩ on `mode`.
pub fn squeezed_vacuum(basis: &BasisSpec, mode: usize, s: f64) -> Result<Truncated<FockVector>> {
    basis.check_mode(mode)?;
    if !s.is_finite() {
        return Err(Error::InvalidParameter("squeezing must be finite".into()));
    }
    let t = s.tanh();
    let mut single = vec![ZERO; basis.levels()];
    let mut c = 1.0 / s.cosh().sqrt();
    single[0] = C64::new(c, 0.0);
    let mut n = 2;
    while n <= basis.cutoff() {
        // c_{2k} = c_{2k−2} (−tanh s) √((2k)(2k−1)) / (2k)
        c *= -t * ((n * (n - 1)) as f64).sqrt() / n as f64;
        single[n] = C64::new(c, 0.0);
        n += 2;
    }
    renormalize(embed(basis, mode, &single), 1.0)
}

/// Two-mode squeezed vacuum [cosh r]⁻¹ Σ (−tanh r)^m |m⟩_a|m⟩_b on modes
/// (a, b), all other modes in vacuum. The coefficients are the closed form,
/// not renormalized; the state is labeled normalized only when its norm is
/// within [`NORM_TOLERANCE`] of one. Fails if the weight above the cutoff,
/// tanh(r)^{2(N+1)}, exceeds [`EPR_TAIL_TOLERANCE`].
pub fn epr_state(basis: &BasisSpec, a: usize, b: usize, r: f64) -> Result<FockVector> {
    let v = epr_closed_form(basis, a, b, r)?;
    let lost = epr_tail_weight(r, basis.cutoff());
    if lost > EPR_TAIL_TOLERANCE {
        return Err(Error::CutoffTooSmall {
            tail: lost,
            tolerance: EPR_TAIL_TOLERANCE,
            required: epr_required_cutoff(r, EPR_TAIL_TOLERANCE),
        });
    }
    if (v.norm() - 1.0).abs() <= NORM_TOLERANCE {
        let amps = v.into_amplitudes();
        return Ok(FockVector::from_parts(basis.clone(), amps, Normalization::Normalized));
    }
    Ok(v)
}

/// Like [`epr_state`] but renormalizes instead of failing.
pub fn epr_state_truncated(basis: &BasisSpec, a: usize, b: usize, r: f64) -> Result<Truncated<FockVector>> {
    let v = epr_closed_form(basis, a, b, r)?;
    Ok(Truncated::new(v.normalized()?, epr_tail_weight(r, basis.cutoff())))
}

fn epr_closed_form(basis: &BasisSpec, a: usize, b: usize, r: f64) -> Result<FockVector> {
    basis.check_pair(a, b)?;
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!("squeezing r = {r} must be finite and >= 0")));
    }
    let (sa, sb) = (basis.stride(a), basis.stride(b));
    let lambda = -r.tanh();
    let mut amps = vec![ZERO; basis.dim()];
    let mut c = 1.0 / r.cosh();
    for m in 0..=basis.cutoff() {
        amps[m * (sa + sb)] = C64::new(c, 0.0);
        c *= lambda;
    }
    Ok(FockVector::from_parts(basis.clone(), amps, Normalization::Unnormalized))
}

/// Weight of the two-mode squeezed vacuum above cutoff N: tanh(r)^{2(N+1)}.
pub fn epr_tail_weight(r: f64, cutoff: usize) -> f64 {
    (r.tanh() * r.tanh()).powi(cutoff as i32 + 1)
}

/// Smallest cutoff whose EPR tail weight is at most `tolerance`.
pub fn epr_required_cutoff(r: f64, tolerance: f64) -> usize {
    let lambda = r.tanh() * r.tanh();
    if lambda <= 0.0 {
        return 1;
    }
    let n = (tolerance.ln() / lambda.ln()).ceil() - 1.0;
    (n.max(1.0)) as usize
}

/// D(β) on `mode` via the exponential of the truncated generator, then
/// renormalized. `lost_weight` estimates the norm the exact displacement
/// pushes above the cutoff, 1 − ‖P_N D(β) ψ‖², from the exact matrix
/// elements of [`displacement_matrix`].
pub fn displace(state: &FockVector, mode: usize, beta: C64) -> Result<Truncated<FockVector>> {
    let basis = state.basis();
    basis.check_mode(mode)?;
    check_beta(beta)?;
    if beta == ZERO {
        return Ok(Truncated::new(state.clone(), 0.0));
    }
    let exact = apply_single(basis, state.amplitudes(), mode, &displacement_matrix(beta, basis.cutoff()));
    let kept: f64 = exact.iter().map(|z| z.norm_sqr()).sum();
    let lost = (1.0 - kept / state.norm_sqr()).max(0.0);
    if lost > DISPLACE_LOSS_TOLERANCE {
        return Err(Error::Truncation {
            loss: lost,
            tolerance: DISPLACE_LOSS_TOLERANCE,
            context: format!("displacement by {beta}"),
        });
    }
    let op = ModeOperator::displacement(basis, mode, beta)?;
    let out = op.apply(state)?;
    Ok(Truncated::new(out.normalized()?, lost))
}

/// Exact matrix elements ⟨m|D(γ)|n⟩ for m, n ≤ N (the infinite-space
/// displacement restricted to the cutoff, not the exponential of a
/// truncated generator).
///
/// Uses b D = D (b + γ) and b† D = D (b† + γ*):
/// D_{m,n+1} = (√m D_{m−1,n} − γ* D_{m,n}) / √(n+1), seeded by the coherent
/// column D_{m,0} = e^{−|γ|²/2} γ^m/√m!.
pub fn displacement_matrix(gamma: C64, cutoff: usize) -> DMatrix<C64> {
    let l = cutoff + 1;
    let mut d = DMatrix::<C64>::zeros(l, l);
    let col0 = coherent_amplitudes(gamma, cutoff);
    for m in 0..l {
        d[(m, 0)] = col0[m];
    }
    let gc = gamma.conj();
    let sq: Vec<f64> = (0..=l).map(|k| (k as f64).sqrt()).collect();
    for n in 0..cutoff {
        for m in 0..l {
            let mut v = -gc * d[(m, n)];
            if m > 0 {
                v += d[(m - 1, n)] * sq[m];
            }
            d[(m, n + 1)] = v / sq[n + 1];
        }
    }
    d
}

/// ⟨φ|D(γ)|ψ⟩ on single-mode vectors using exact matrix elements.
pub fn displaced_overlap(phi: &[C64], gamma: C64, psi: &[C64]) -> C64 {
    let n = phi.len().min(psi.len());
    let d = displacement_matrix(gamma, n - 1);
    let mut acc = ZERO;
    for (m, p) in phi.iter().take(n).enumerate() {
        if *p == ZERO {
            continue;
        }
        let mut row = ZERO;
        for (k, s) in psi.iter().take(n).enumerate() {
            row += d[(m, k)] * s;
        }
        acc += p.conj() * row;
    }
    acc
}

/// S(r) on modes (a, b). `lost_weight` is the output weight on the cutoff
/// boundary layer; above [`SQUEEZE_LOSS_TOLERANCE`] the result is rejected.
pub fn two_mode_squeeze(state: &FockVector, a: usize, b: usize, r: f64) -> Result<Truncated<FockVector>> {
    let op = ModeOperator::two_mode_squeeze(state.basis(), a, b, r)?;
    let out = op.apply(state)?;
    let boundary = out.weight_at_or_above(state.basis().cutoff()) / out.norm_sqr();
    if boundary > SQUEEZE_LOSS_TOLERANCE {
        return Err(Error::Truncation {
            loss: boundary,
            tolerance: SQUEEZE_LOSS_TOLERANCE,
            context: format!("two-mode squeezing r = {r}"),
        });
    }
    Ok(Truncated::new(out, boundary))
}

/// Beamsplitter of transmissivity T and phase φ on modes (i, j); see
/// [`ModeOperator::beamsplitter`] for the convention.
pub fn beamsplitter(state: &FockVector, i: usize, j: usize, transmissivity: f64, phase: f64) -> Result<FockVector> {
    ModeOperator::beamsplitter(state.basis(), i, j, transmissivity, phase)?.apply(state)
}

/// Thermal populations (1−λ)λⁿ with λ = n̄/(1+n̄), truncated at the cutoff.
pub fn thermal_populations(mean_number: f64, cutoff: usize) -> Vec<f64> {
    let lambda = mean_number / (1.0 + mean_number);
    (0..=cutoff).map(|n| (1.0 - lambda) * lambda.powi(n as i32)).collect()
}
