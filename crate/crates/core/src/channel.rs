//! Motion-light interface: the effective coupling Γ(t), the regime checks
//! that justify it, and the state-transfer maps it induces.
//!
//! The Langevin equation for the motional mode is linear with amplitude decay
//! e^{-∫Γ}, so for a mode-matched input field its Schrödinger-picture effect
//! is a beamsplitter between one temporal field mode and the motion, with
//! transfer efficiency η(t) = 1 − e^{−2∫₀ᵗΓ}.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::fock::{
    self, BasisSpec, DensityOperator, FockVector, Normalization, C64, ZERO,
};

/// Default ratio standing in for "≫" in the regime inequalities.
pub const DEFAULT_REGIME_RATIO: f64 = 10.0;
/// Largest Lamb-Dicke parameter accepted.
pub const MAX_LAMB_DICKE: f64 = 0.2;
/// Kraus branches lighter than this (relative to the input norm²) are dropped.
pub const KRAUS_PRUNE: f64 = 1e-14;

/// Laser envelope |𝓔_L(t)| in rad/s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Envelope {
    Constant { peak: f64 },
    /// peak · exp(−(t − center)² / (2 width²))
    Gaussian { peak: f64, center: f64, width: f64 },
    /// Piecewise-linear through (times[k], values[k]); zero outside.
    Samples { times: Vec<f64>, values: Vec<f64> },
}

impl Envelope {
    pub fn peak(&self) -> f64 {
        match self {
            Envelope::Constant { peak } | Envelope::Gaussian { peak, .. } => peak.abs(),
            Envelope::Samples { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Envelope::Constant { peak } => *peak,
            Envelope::Gaussian { peak, center, width } => peak * (-(t - center).powi(2) / (2.0 * width * width)).exp(),
            Envelope::Samples { times, values } => {
                if times.is_empty() || t < times[0] || t > times[times.len() - 1] {
                    return 0.0;
                }
                let k = times.partition_point(|&x| x <= t).saturating_sub(1).min(times.len() - 2);
                let (t0, t1) = (times[k], times[k + 1]);
                let w = (t - t0) / (t1 - t0);
                values[k] * (1.0 - w) + values[k + 1] * w
            }
        }
    }

    /// ∫₀ᵗ |𝓔(s)|² ds.
    fn integral_sq(&self, t: f64) -> f64 {
        match self {
            Envelope::Constant { peak } => peak * peak * t,
            Envelope::Gaussian { peak, center, width } => {
                0.5 * peak * peak * width * std::f64::consts::PI.sqrt()
                    * (erf((t - center) / width) + erf(center / width))
            }
            Envelope::Samples { times, .. } => {
                // Piecewise-linear envelope: the square is quadratic per
                // segment, so Simpson's rule is exact.
                let mut acc = 0.0;
                for w in times.windows(2) {
                    let (a, b) = (w[0].max(0.0), w[1].min(t));
                    if b <= a {
                        continue;
                    }
                    let f = |s: f64| self.value(s).powi(2);
                    acc += (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
                }
                acc
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("laser envelope: {m}")));
        match self {
            Envelope::Constant { peak } if !peak.is_finite() => bad("peak must be finite"),
            Envelope::Gaussian { peak, center, width }
                if !(peak.is_finite() && center.is_finite() && width.is_finite() && *width > 0.0) =>
            {
                bad("gaussian needs finite peak/center and width > 0")
            }
            Envelope::Samples { times, values } => {
                if times.len() != values.len() || times.len() < 2 {
                    return bad("samples need matching times/values with at least two points");
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("sample times must be strictly increasing");
                }
                if times.iter().chain(values).any(|x| !x.is_finite()) {
                    return bad("samples must be finite");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Physical parameters of one atom-cavity station; every rate in rad/s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    pub g0: f64,
    pub eta_x: f64,
    /// Δ = ω_a − ω_L.
    pub delta: f64,
    pub kappa: f64,
    pub nu_x: f64,
    pub laser: Envelope,
    /// Cavity and laser frequencies; when both are present the Raman
    /// resonance ω_c − ω_L = ν_x is checked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_l: Option<f64>,
}

impl PhysicalParams {
    /// |g₀η_x 𝓔_L,peak / Δ|.
    pub fn peak_raman_coupling(&self) -> f64 {
        (self.g0 * self.eta_x * self.laser.peak() / self.delta).abs()
    }

    /// (g₀η_x/Δ)²/κ, so that Γ(t) = prefactor · |𝓔_L(t)|².
    fn prefactor(&self) -> f64 {
        (self.g0 * self.eta_x / self.delta).powi(2) / self.kappa
    }

    fn check_finite(&self) -> Result<()> {
        let vals = [self.g0, self.eta_x, self.delta, self.kappa, self.nu_x];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("physical parameters must be finite".into()));
        }
        if self.delta == 0.0 || !(self.kappa > 0.0) || !(self.nu_x > 0.0) {
            return Err(Error::InvalidParameter("need delta != 0, kappa > 0, nu_x > 0".into()));
        }
        self.laser.validate()
    }
}

/// Units accepted for rate-valued inputs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateUnits {
    /// Angular frequency in rad/s.
    #[default]
    #[serde(rename = "rad/s")]
    RadPerSecond,
    /// Ordinary frequency ω/2π in MHz; converted by 2π·10⁶.
    #[serde(rename = "MHz")]
    MHz,
}

impl RateUnits {
    pub fn to_rad_per_s(self, value: f64) -> f64 {
        match self {
            RateUnits::RadPerSecond => value,
            RateUnits::MHz => value * 2.0 * std::f64::consts::PI * 1e6,
        }
    }

    /// Seconds expressed in the natural time unit of these rates.
    pub fn time_from_seconds(self, seconds: f64) -> f64 {
        match self {
            RateUnits::RadPerSecond => seconds,
            RateUnits::MHz => seconds * 1e6,
        }
    }

    pub fn time_unit(self) -> &'static str {
        match self {
            RateUnits::RadPerSecond => "s",
            RateUnits::MHz => "us",
        }
    }

    pub fn time_to_seconds(self, t: f64) -> f64 {
        match self {
            RateUnits::RadPerSecond => t,
            RateUnits::MHz => t * 1e-6,
        }
    }
}

/// JSON form of [`PhysicalParams`] with explicit units. In `MHz` mode rates
/// are ω/2π in MHz and times (envelope centers, widths, sample times) are in µs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConfig {
    #[serde(default)]
    pub units: RateUnits,
    #[serde(flatten)]
    pub params: PhysicalParams,
}

impl PhysicalConfig {
    /// Converts to rad/s and seconds.
    pub fn resolve(&self) -> PhysicalParams {
        let u = self.units;
        let r = |v: f64| u.to_rad_per_s(v);
        let t = |v: f64| u.time_to_seconds(v);
        let p = &self.params;
        let laser = match &p.laser {
            Envelope::Constant { peak } => Envelope::Constant { peak: r(*peak) },
            Envelope::Gaussian { peak, center, width } => Envelope::Gaussian {
                peak: r(*peak),
                center: t(*center),
                width: t(*width),
            },
            Envelope::Samples { times, values } => Envelope::Samples {
                times: times.iter().map(|&x| t(x)).collect(),
                values: values.iter().map(|&v| r(v)).collect(),
            },
        };
        PhysicalParams {
            g0: r(p.g0),
            eta_x: p.eta_x,
            delta: r(p.delta),
            kappa: r(p.kappa),
            nu_x: r(p.nu_x),
            laser,
            omega_c: p.omega_c.map(r),
            omega_l: p.omega_l.map(r),
        }
    }
}

/// One checked inequality `lhs ≥ ratio_required · rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// lhs / rhs (infinite when rhs = 0).
    pub ratio: f64,
    pub required: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub ratio_required: f64,
    pub checks: Vec<InequalityCheck>,
    /// Peak Γ in 1/s.
    pub gamma_peak: f64,
    /// 1/Γ_peak in seconds (infinite when Γ_peak = 0).
    pub gamma_inverse_seconds: f64,
    pub passed: bool,
}

impl RegimeReport {
    pub fn failures(&self) -> Vec<&InequalityCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

fn inequality(name: &str, lhs: f64, rhs: f64, required: f64) -> InequalityCheck {
    let ratio = if rhs == 0.0 { f64::INFINITY } else { lhs / rhs };
    // Boundary inclusive, with room for rounding in the ratio itself.
    let passed = ratio >= required * (1.0 - 1e-12);
    InequalityCheck {
        name: name.into(),
        lhs,
        rhs,
        ratio,
        required,
        passed,
    }
}

/// Checks the Lamb-Dicke condition, ν_x ≥ R·κ, κ ≥ R·|g₀η_x𝓔_L/Δ| and,
/// when the optical frequencies are given, the Raman resonance.
pub fn validate_regime(params: &PhysicalParams, ratio: f64) -> Result<RegimeReport> {
    params.check_finite()?;
    if !(ratio >= 1.0) {
        return Err(Error::InvalidParameter(format!("regime ratio {ratio} must be >= 1")));
    }
    let coupling = params.peak_raman_coupling();
    let mut checks = vec![
        inequality("lamb_dicke: eta_x <= 0.2", MAX_LAMB_DICKE, params.eta_x.abs(), 1.0),
        inequality("nu_x >> kappa", params.nu_x, params.kappa, ratio),
        inequality("kappa >> |g0 eta_x E_L / delta|", params.kappa, coupling, ratio),
    ];
    if let (Some(wc), Some(wl)) = (params.omega_c, params.omega_l) {
        let mismatch = ((wc - wl) - params.nu_x).abs();
        let tol = 1e-6 * params.nu_x;
        checks.push(InequalityCheck {
            name: "raman resonance: omega_c - omega_l = nu_x".into(),
            lhs: wc - wl,
            rhs: params.nu_x,
            ratio: (wc - wl) / params.nu_x,
            required: 1.0,
            passed: mismatch <= tol,
        });
    }
    let gamma_peak = params.prefactor() * params.laser.peak().powi(2);
    Ok(RegimeReport {
        ratio_required: ratio,
        passed: checks.iter().all(|c| c.passed),
        checks,
        gamma_peak,
        gamma_inverse_seconds: if gamma_peak > 0.0 { 1.0 / gamma_peak } else { f64::INFINITY },
    })
}

/// How regime violations are handled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeOptions {
    pub ratio: f64,
    /// Proceed despite failed checks; recorded in [`GammaProfile::override_used`].
    pub allow_violation: bool,
}

impl Default for RegimeOptions {
    fn default() -> Self {
        RegimeOptions {
            ratio: DEFAULT_REGIME_RATIO,
            allow_violation: false,
        }
    }
}

/// Γ(t) = [g₀η_x|𝓔_L(t)|/Δ]²/κ, after the regime checks.
pub fn gamma_from_physics(params: &PhysicalParams, t: f64, opts: RegimeOptions) -> Result<f64> {
    Ok(GammaProfile::from_physics(params, opts)?.gamma(t))
}

#[derive(Clone, Debug, PartialEq)]
enum Rate {
    Constant(f64),
    Envelope { prefactor: f64, envelope: Envelope },
}

/// Time-dependent coupling Γ(t) and its integral.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaProfile {
    rate: Rate,
    override_used: bool,
}

impl GammaProfile {
    pub fn constant(rate: f64) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::InvalidParameter(format!("rate {rate} must be finite and >= 0")));
        }
        Ok(GammaProfile {
            rate: Rate::Constant(rate),
            override_used: false,
        })
    }

    pub fn from_physics(params: &PhysicalParams, opts: RegimeOptions) -> Result<Self> {
        let report = validate_regime(params, opts.ratio)?;
        if !report.passed && !opts.allow_violation {
            let names: Vec<String> = report
                .failures()
                .iter()
                .map(|c| format!("{} (ratio {:.4}, required {})", c.name, c.ratio, c.required))
                .collect();
            return Err(Error::Regime(names.join("; ")));
        }
        Ok(GammaProfile {
            rate: Rate::Envelope {
                prefactor: params.prefactor(),
                envelope: params.laser.clone(),
            },
            override_used: !report.passed,
        })
    }

    /// True when the profile was built despite failed regime checks.
    pub fn override_used(&self) -> bool {
        self.override_used
    }

    pub fn gamma(&self, t: f64) -> f64 {
        match &self.rate {
            Rate::Constant(g) => *g,
            Rate::Envelope { prefactor, envelope } => prefactor * envelope.value(t).powi(2),
        }
    }

    /// ∫₀ᵗ Γ(s) ds (dimensionless).
    pub fn integral(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.rate {
            Rate::Constant(g) => g * t,
            Rate::Envelope { prefactor, envelope } => prefactor * envelope.integral_sq(t),
        }
    }

    pub fn transfer_map(&self, t: f64, direction: Direction) -> TransferMap {
        TransferMap {
            efficiency: transfer_efficiency(self, t),
            direction,
        }
    }
}

/// η(t) = 1 − e^{−2∫₀ᵗΓ}.
pub fn transfer_efficiency(profile: &GammaProfile, t: f64) -> f64 {
    -(-2.0 * profile.integral(t)).exp_m1()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Light → motion.
    Write,
    /// Motion → light.
    Read,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferMap {
    pub efficiency: f64,
    pub direction: Direction,
}

impl TransferMap {
    pub fn new(efficiency: f64, direction: Direction) -> Result<Self> {
        check_eta(efficiency)?;
        Ok(TransferMap { efficiency, direction })
    }

    pub fn apply<'a>(&self, input: impl Into<ModeState<'a>>) -> Result<DensityOperator> {
        match self.direction {
            Direction::Write => apply_write_map(input, self.efficiency),
            Direction::Read => apply_read_map(input, self.efficiency),
        }
    }
}

/// A single-mode input to a transfer map.
#[derive(Clone, Copy, Debug)]
pub enum ModeState<'a> {
    Pure(&'a FockVector),
    Mixed(&'a DensityOperator),
}

impl<'a> From<&'a FockVector> for ModeState<'a> {
    fn from(v: &'a FockVector) -> Self {
        ModeState::Pure(v)
    }
}

impl<'a> From<&'a DensityOperator> for ModeState<'a> {
    fn from(r: &'a DensityOperator) -> Self {
        ModeState::Mixed(r)
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("efficiency {eta} outside [0, 1]")))
    }
}

/// Writes a field-mode state onto a motional mode initially in vacuum.
///
/// Pure inputs go through an explicit beamsplitter of transmissivity 1 − η
/// (phase π, so that b_field† → √(1−η) b_field† + √η b_motion†) followed by a
/// trace over the field; density inputs use the equivalent Kraus form.
pub fn apply_write_map<'a>(input: impl Into<ModeState<'a>>, eta: f64) -> Result<DensityOperator> {
    transfer(input.into(), eta, "motion")
}

/// Reads a motional state out into the effective temporal output mode.
///
/// From a_out = −a_in + √(2Γ) b, the output mode carries the motion with a
/// + sign; the −a_in term only rephases the vacuum input and is dropped.
pub fn apply_read_map<'a>(input: impl Into<ModeState<'a>>, eta: f64) -> Result<DensityOperator> {
    transfer(input.into(), eta, "output")
}

fn transfer(input: ModeState<'_>, eta: f64, out_label: &str) -> Result<DensityOperator> {
    check_eta(eta)?;
    match input {
        ModeState::Pure(v) => {
            require_single_mode(v.basis())?;
            let n = v.basis().cutoff();
            let pair = BasisSpec::new(n, ["field", out_label])?;
            let joint = v
                .tensor(&fock::vacuum(&BasisSpec::single(n, out_label)?))?
                .relabel_basis(pair)?;
            let mixed = fock::beamsplitter(&joint, 0, 1, 1.0 - eta, std::f64::consts::PI)?;
            mixed.partial_trace(&[1])
        }
        ModeState::Mixed(rho) => {
            require_single_mode(rho.basis())?;
            let out = loss_channel_density(rho, eta);
            let basis = BasisSpec::single(rho.basis().cutoff(), out_label)?;
            Ok(DensityOperator::from_parts(basis, out, rho.is_normalized()))
        }
    }
}

fn require_single_mode(b: &BasisSpec) -> Result<()> {
    if b.n_modes() == 1 {
        Ok(())
    } else {
        Err(Error::InvalidParameter("transfer maps act on single-mode states".into()))
    }
}

/// ⟨n−k|A_k|n⟩ = √C(n,k) η^{(n−k)/2} (1−η)^{k/2} for the pure-loss Kraus
/// operators A_k = √((1−η)^k/k!) η^{n̂/2} b^k.
pub(crate) fn kraus_element(n: usize, k: usize, eta: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut ln_binom = 0.0;
    for i in 0..k {
        ln_binom += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    let pe = if n - k == 0 { 0.0 } else { (n - k) as f64 * eta.ln() };
    let pl = if k == 0 { 0.0 } else { k as f64 * (1.0 - eta).ln() };
    (0.5 * (ln_binom + pe + pl)).exp()
}

fn loss_channel_density(rho: &DensityOperator, eta: f64) -> DMatrix<C64> {
    let l = rho.basis().levels();
    let m = rho.matrix();
    let mut out = DMatrix::<C64>::zeros(l, l);
    for k in 0..l {
        for n in k..l {
            let an = kraus_element(n, k, eta);
            if an == 0.0 {
                continue;
            }
            for mm in k..l {
                let am = kraus_element(mm, k, eta);
                out[(n - k, mm - k)] += m[(n, mm)] * (an * am);
            }
        }
    }
    out
}

/// Pure-loss channel on `mode` of a pure multimode state, returned as
/// unnormalized Kraus branches A_k|ψ⟩. Branches lighter than
/// [`KRAUS_PRUNE`]·‖ψ‖² are dropped; their total weight is returned.
pub fn loss_branches(state: &FockVector, mode: usize, eta: f64) -> Result<(Vec<FockVector>, f64)> {
    check_eta(eta)?;
    let basis = state.basis();
    basis.check_mode(mode)?;
    if eta == 1.0 {
        return Ok((vec![state.clone()], 0.0));
    }
    let stride = basis.stride(mode);
    let total = state.norm_sqr();
    let mut branches = Vec::new();
    let mut dropped = 0.0;
    for k in 0..=basis.cutoff() {
        let mut amps = vec![ZERO; basis.dim()];
        for (idx, a) in state.amplitudes().iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            let n = basis.occupation(idx, mode);
            if n < k {
                continue;
            }
            amps[idx - k * stride] = a * kraus_element(n, k, eta);
        }
        let v = FockVector::from_parts(basis.clone(), amps, Normalization::Unnormalized);
        let w = v.norm_sqr();
        if w > KRAUS_PRUNE * total {
            branches.push(v);
        } else {
            dropped += w;
        }
    }
    Ok((branches, dropped))
}

/// Applies the loss channel to every branch of an ensemble.
pub fn loss_ensemble(branches: Vec<FockVector>, mode: usize, eta: f64) -> Result<(Vec<FockVector>, f64)> {
    let mut out = Vec::new();
    let mut dropped = 0.0;
    for b in &branches {
        let (bs, d) = loss_branches(b, mode, eta)?;
        out.extend(bs);
        dropped += d;
    }
    Ok((out, dropped))
}

/// Two-mode squeezed vacuum on modes ("A", "B") written through independent
/// loss channels of efficiency η_A and η_B.
pub fn prepare_epr_lossy(cutoff: usize, r: f64, eta_a: f64, eta_b: f64) -> Result<DensityOperator> {
    let basis = BasisSpec::new(cutoff, ["A", "B"])?;
    let epr = fock::epr_state(&basis, 0, 1, r)?;
    let (branches, _) = loss_branches(&epr, 0, eta_a)?;
    let (branches, _) = loss_ensemble(branches, 1, eta_b)?;
    let mut rho = DensityOperator::zeros(basis);
    for b in &branches {
        rho.add_pure(b.amplitudes(), 1.0);
    }
    Ok(rho.mark_normalized())
}

impl FockVector {
    /// Same amplitudes over a basis of equal shape with different labels.
    pub fn relabel_basis(&self, basis: BasisSpec) -> Result<FockVector> {
        if basis.dim() != self.basis().dim() || basis.n_modes() != self.basis().n_modes() {
            return Err(Error::BasisMismatch("relabelling needs an identically shaped basis".into()));
        }
        Ok(FockVector::from_parts(basis, self.amplitudes().to_vec(), self.normalization()))
    }
}
