//! End-to-end teleportation: input and resource preparation, Bell
//! measurement, Bob's displacement correction, and fidelity statistics.
//!
//! Mode order of the joint state is (V, A, B). Losses are carried as
//! unnormalized pure branches: the input is eigendecomposed after its loss,
//! Alice's resource loss uses Kraus branches (mutually orthogonal on the
//! two-mode squeezed vacuum), and Bob's loss is applied after the projection,
//! with which it commutes.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bell::{
    self, BellAnalyzer, BellModes, GridAxis, GridSpec, HomodyneSetting, MeasurementOutcome, OutcomeGrid,
    OutcomeSampler,
};
use crate::channel::{self, kraus_element, KRAUS_PRUNE};
use crate::error::{Error, Result};
use crate::fock::{
    self, displacement_matrix, BasisSpec, DensityOperator, FockVector, ModeOperator, Normalization, C64, ZERO,
};
use crate::gaussian::{self, GaussianState, TeleportSetup};

pub const MAX_CUTOFF: usize = 120;
pub const DEFAULT_MAX_TRUNCATION: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    Coherent { beta: [f64; 2] },
    Fock { n: usize },
    Cat { beta: [f64; 2], odd: bool },
    Squeezed { s: f64 },
}

impl InputSpec {
    pub fn coherent(re: f64, im: f64) -> Self {
        InputSpec::Coherent { beta: [re, im] }
    }

    /// Gaussian image of the input, when it has one.
    pub fn gaussian(&self) -> Option<GaussianState> {
        match *self {
            InputSpec::Coherent { beta } => Some(GaussianState::coherent(C64::new(beta[0], beta[1]))),
            InputSpec::Squeezed { s } => Some(GaussianState::squeezed_vacuum(s)),
            InputSpec::Fock { n: 0 } => Some(GaussianState::vacuum(1)),
            _ => None,
        }
    }

    /// Normalized input on a single mode with the given label, and the
    /// weight the cutoff removed.
    pub fn prepare(&self, cutoff: usize, label: &str) -> Result<(FockVector, f64)> {
        let b = BasisSpec::single(cutoff, label)?;
        let t = match *self {
            InputSpec::Coherent { beta } => fock::coherent(&b, 0, C64::new(beta[0], beta[1]))?,
            InputSpec::Fock { n } => return Ok((fock::fock_state(&b, 0, n)?, 0.0)),
            InputSpec::Cat { beta, odd } => fock::cat(&b, 0, C64::new(beta[0], beta[1]), odd)?,
            InputSpec::Squeezed { s } => fock::squeezed_vacuum(&b, 0, s)?,
        };
        Ok((t.value, t.lost_weight))
    }
}

fn default_gain() -> f64 {
    1.0
}
fn default_eta() -> f64 {
    1.0
}
fn default_max_truncation() -> f64 {
    DEFAULT_MAX_TRUNCATION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub r: f64,
    pub cutoff: usize,
    pub input: InputSpec,
    #[serde(default = "default_gain")]
    pub gain: f64,
    /// Writing the input field onto Victor's atom (mode V).
    #[serde(default = "default_eta")]
    pub eta_write: f64,
    /// Reading V and A out to Alice's homodyne detectors.
    #[serde(default = "default_eta")]
    pub eta_read: f64,
    /// Writing the EPR light onto Alice's (A) and Bob's (B) atoms.
    #[serde(default = "default_eta")]
    pub eta_epr_a: f64,
    #[serde(default = "default_eta")]
    pub eta_epr_b: f64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub homodyne: HomodyneSetting,
    #[serde(default)]
    pub seed: u64,
    /// Largest weight outcome-averaged runs may lose to the cutoff.
    #[serde(default = "default_max_truncation")]
    pub max_truncation: f64,
}

impl ProtocolConfig {
    pub fn new(r: f64, cutoff: usize, input: InputSpec) -> Self {
        ProtocolConfig {
            r,
            cutoff,
            input,
            gain: 1.0,
            eta_write: 1.0,
            eta_read: 1.0,
            eta_epr_a: 1.0,
            eta_epr_b: 1.0,
            grid: GridSpec::default(),
            homodyne: HomodyneSetting::default(),
            seed: 0,
            max_truncation: DEFAULT_MAX_TRUNCATION,
        }
    }

    /// Λ = tanh r.
    pub fn lambda(&self) -> f64 {
        self.r.tanh()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.r >= 0.0) || !self.r.is_finite() {
            return bad(format!("r = {} must be finite and >= 0", self.r));
        }
        if !(self.gain > 0.0 && self.gain <= 2.0) {
            return bad(format!("gain {} outside (0, 2]", self.gain));
        }
        for (name, eta) in self.etas() {
            if !(0.0..=1.0).contains(&eta) {
                return bad(format!("{name} = {eta} outside [0, 1]"));
            }
        }
        if self.cutoff < 1 || self.cutoff > MAX_CUTOFF {
            return bad(format!("cutoff {} outside 1..={MAX_CUTOFF}", self.cutoff));
        }
        if !(self.max_truncation > 0.0) {
            return bad("max_truncation must be > 0".into());
        }
        self.grid.validate()
    }

    fn etas(&self) -> [(&'static str, f64); 4] {
        [
            ("eta_write", self.eta_write),
            ("eta_read", self.eta_read),
            ("eta_epr_a", self.eta_epr_a),
            ("eta_epr_b", self.eta_epr_b),
        ]
    }

    pub fn is_lossless(&self) -> bool {
        self.etas().iter().all(|&(_, e)| e == 1.0)
    }

    /// Effective losses on (V, A, B).
    pub fn mode_efficiencies(&self) -> [f64; 3] {
        [self.eta_write * self.eta_read, self.eta_epr_a * self.eta_read, self.eta_epr_b]
    }

    fn gaussian_setup(&self) -> TeleportSetup {
        let [v, a, b] = self.mode_efficiencies();
        TeleportSetup {
            r: self.r,
            gain: self.gain,
            eta_input: v,
            eta_alice: a,
            eta_bob: b,
        }
    }

    /// Gaussian-engine value of the outcome-averaged fidelity, for inputs
    /// with a Gaussian image.
    pub fn oracle_fidelity(&self) -> Option<f64> {
        let input = self.input.gaussian()?;
        gaussian::teleport_fidelity_gaussian(&self.gaussian_setup(), &input).ok()
    }
}

/// Joint (V, A, B) state as unnormalized pure branches.
#[derive(Clone, Debug)]
pub struct InitialState {
    pub branches: Vec<FockVector>,
    /// Input weight removed by the cutoff.
    pub input_tail: f64,
    /// Resource weight above the cutoff, tanh(r)^{2(N+1)}.
    pub resource_tail: f64,
    /// Weight of loss branches dropped as negligible.
    pub pruned: f64,
}

impl InitialState {
    pub fn truncation(&self) -> f64 {
        self.input_tail + self.resource_tail + self.pruned
    }

    /// The joint state when no loss created a mixture.
    pub fn pure(&self) -> Option<&FockVector> {
        match self.branches.as_slice() {
            [only] => Some(only),
            _ => None,
        }
    }
}

/// Input on V tensored with the (possibly lossy) resource on (A, B).
/// Bob's loss is not applied here; see [`run_teleport`].
pub fn assemble_initial_state(config: &ProtocolConfig) -> Result<InitialState> {
    config.validate()?;
    let n = config.cutoff;
    let (input, input_tail) = config.input.prepare(n, "V")?;
    if input_tail > config.max_truncation {
        return Err(Error::Truncation {
            loss: input_tail,
            tolerance: config.max_truncation,
            context: "input preparation".into(),
        });
    }
    let [eta_v, eta_a, _] = config.mode_efficiencies();

    let (inputs, pruned_v) = lossy_input(&input, eta_v)?;

    let ab = BasisSpec::new(n, ["A", "B"])?;
    let epr = fock::epr_state_truncated(&ab, 0, 1, config.r)?;
    let (resources, pruned_a) = channel::loss_branches(&epr.value, 0, eta_a)?;

    let mut branches = Vec::with_capacity(inputs.len() * resources.len());
    for i in &inputs {
        for r in &resources {
            branches.push(i.tensor(r)?);
        }
    }
    Ok(InitialState {
        branches,
        input_tail,
        resource_tail: epr.lost_weight,
        pruned: pruned_v + pruned_a,
    })
}

/// Eigen-decomposition of the input after loss, as weighted pure branches.
fn lossy_input(input: &FockVector, eta: f64) -> Result<(Vec<FockVector>, f64)> {
    if eta == 1.0 {
        return Ok((vec![input.clone()], 0.0));
    }
    let rho = channel::apply_write_map(input, eta)?;
    let eig = rho.matrix().clone().symmetric_eigen();
    let mut out = Vec::new();
    let mut dropped = 0.0;
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam <= KRAUS_PRUNE {
            dropped += lam.max(0.0);
            continue;
        }
        let amps: Vec<C64> = eig.eigenvectors.column(k).iter().map(|z| z * lam.sqrt()).collect();
        out.push(FockVector::new(input.basis().clone(), amps, Normalization::Unnormalized)?);
    }
    Ok((out, dropped))
}

/// Bob's conditional or corrected state.
#[derive(Clone, Debug)]
pub enum BobState {
    Pure(FockVector),
    Mixed(DensityOperator),
}

impl BobState {
    pub fn fidelity(&self, target: &FockVector) -> Result<f64> {
        match self {
            BobState::Pure(v) => v.fidelity(target),
            BobState::Mixed(r) => r.fidelity(target),
        }
    }

    pub fn to_density(&self) -> DensityOperator {
        match self {
            BobState::Pure(v) => v.to_density(),
            BobState::Mixed(r) => r.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteCheck {
    /// Smallest overlap between the normalized Bob branches of the two routes.
    pub min_overlap: f64,
    /// Largest relative difference of the branch densities.
    pub max_density_rel_err: f64,
}

#[derive(Clone, Debug)]
pub struct TeleportRecord {
    pub outcome: MeasurementOutcome,
    pub bob_pre: BobState,
    pub bob_post: BobState,
    pub fidelity_post: f64,
    pub truncation_budget: f64,
    pub route_check: Option<RouteCheck>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OutcomeChoice {
    Given(f64, f64),
    /// Drawn from the outcome density with the configured seed.
    Sampled,
}

/// Runs the protocol once. A given outcome does not require the resource
/// tail to be below `max_truncation` (the tail is reported in the budget);
/// a sampled outcome does, since it integrates over all outcomes.
pub fn run_teleport(config: &ProtocolConfig, outcome: OutcomeChoice) -> Result<TeleportRecord> {
    run_teleport_with(config, outcome, false)
}

/// As [`run_teleport`], also evaluating the operator route for comparison.
pub fn run_teleport_checked(config: &ProtocolConfig, outcome: OutcomeChoice) -> Result<TeleportRecord> {
    run_teleport_with(config, outcome, true)
}

fn run_teleport_with(config: &ProtocolConfig, choice: OutcomeChoice, cross_check: bool) -> Result<TeleportRecord> {
    let init = assemble_initial_state(config)?;
    let (target, _) = config.input.prepare(config.cutoff, "B")?;
    let modes = BellModes::default();
    let analyzers = init
        .branches
        .iter()
        .map(|b| BellAnalyzer::new(b, modes, config.homodyne))
        .collect::<Result<Vec<_>>>()?;

    let outcome = match choice {
        OutcomeChoice::Given(cp, cm) => MeasurementOutcome::new(cp, cm),
        OutcomeChoice::Sampled => {
            check_budget(config, &init)?;
            let grid = bell::outcome_density_ensemble(&init.branches, modes, config.homodyne, &config.grid)?;
            bell::sample_outcome(&grid, config.seed)?
        }
    };

    let projected = analyzers
        .iter()
        .map(|a| a.project(outcome.chi_plus, outcome.chi_minus))
        .collect::<Result<Vec<_>>>()?;

    let route_check = if cross_check {
        let mut check = RouteCheck {
            min_overlap: 1.0,
            max_density_rel_err: 0.0,
        };
        for (branch, direct) in init.branches.iter().zip(&projected) {
            let op = bell::bell_project_operator_modes(branch, modes, &outcome, config.homodyne)?;
            let (pd, po) = (direct.norm_sqr(), op.norm_sqr());
            if pd > 0.0 {
                check.max_density_rel_err = check.max_density_rel_err.max((pd - po).abs() / pd);
                let ov = direct.overlap(&op)?.norm_sqr() / (pd * po);
                check.min_overlap = check.min_overlap.min(ov);
            }
        }
        Some(check)
    } else {
        None
    };

    let kraus = BobLoss::new(config.eta_epr_b, config.cutoff);
    let mut bob_vectors = Vec::new();
    for p in &projected {
        kraus.expand(p.amplitudes(), &mut bob_vectors);
    }
    let density: f64 = bob_vectors.iter().map(|v| norm_sqr(v)).sum();
    if !(density > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "outcome ({}, {}) has zero probability density",
            outcome.chi_plus, outcome.chi_minus
        )));
    }
    let outcome = outcome.with_density(density);
    let gamma = outcome.alpha.conj() * config.gain;
    let row = fidelity_row(&target, gamma);
    let fidelity_post = bob_vectors.iter().map(|v| dot(&row, v).norm_sqr()).sum::<f64>() / density;

    let bob_basis = target.basis().clone();
    let (bob_pre, bob_post, displacement_loss) = if bob_vectors.len() == 1 {
        let pre = FockVector::new(bob_basis, bob_vectors.pop().unwrap(), Normalization::Unnormalized)?.normalized()?;
        let post = fock::displace(&pre, 0, gamma)?;
        (BobState::Pure(pre), BobState::Pure(post.value), post.lost_weight)
    } else {
        let l = bob_basis.levels();
        let mut m = DMatrix::<C64>::zeros(l, l);
        for v in &bob_vectors {
            for (i, x) in v.iter().enumerate() {
                for (j, y) in v.iter().enumerate() {
                    m[(i, j)] += x * y.conj() / density;
                }
            }
        }
        let pre = DensityOperator::new(bob_basis.clone(), m)?;
        let d = ModeOperator::displacement(&bob_basis, 0, gamma)?.local_matrix();
        let post = DensityOperator::new(bob_basis, &d * pre.matrix() * d.adjoint())?;
        let loss = bob_vectors
            .iter()
            .map(|v| exact_displacement_loss(v, gamma))
            .sum::<f64>()
            / density;
        (BobState::Mixed(pre), BobState::Mixed(post), loss)
    };

    Ok(TeleportRecord {
        outcome,
        bob_pre,
        bob_post,
        fidelity_post,
        truncation_budget: init.truncation() + displacement_loss,
        route_check,
    })
}

fn exact_displacement_loss(v: &[C64], gamma: C64) -> f64 {
    let d = displacement_matrix(gamma, v.len() - 1);
    let kept: f64 = (0..v.len()).map(|m| dot_row(&d, m, v).norm_sqr()).sum();
    (norm_sqr(v) - kept).max(0.0)
}

fn dot_row(d: &DMatrix<C64>, m: usize, v: &[C64]) -> C64 {
    v.iter().enumerate().fold(ZERO, |acc, (n, x)| acc + d[(m, n)] * x)
}

/// Fails when the input or resource loses more than `max_truncation` to the
/// cutoff, naming the cutoff the resource would need.
pub fn check_truncation(config: &ProtocolConfig) -> Result<()> {
    check_budget(config, &assemble_initial_state(config)?)
}

fn check_budget(config: &ProtocolConfig, init: &InitialState) -> Result<()> {
    if init.resource_tail > config.max_truncation {
        return Err(Error::CutoffTooSmall {
            tail: init.resource_tail,
            tolerance: config.max_truncation,
            required: fock::epr_required_cutoff(config.r, config.max_truncation),
        });
    }
    if init.truncation() > config.max_truncation {
        return Err(Error::Truncation {
            loss: init.truncation(),
            tolerance: config.max_truncation,
            context: "input and resource preparation".into(),
        });
    }
    Ok(())
}

/// w_n = ⟨φ|D(γ)|n⟩ from exact matrix elements, so that the corrected
/// fidelity of a Bob vector v is |w·v|²/‖v‖².
fn fidelity_row(target: &FockVector, gamma: C64) -> Vec<C64> {
    let phi = target.amplitudes();
    let d = displacement_matrix(gamma, phi.len() - 1);
    (0..phi.len())
        .map(|n| phi.iter().enumerate().fold(ZERO, |acc, (m, p)| acc + p.conj() * d[(m, n)]))
        .collect()
}

fn dot(w: &[C64], v: &[C64]) -> C64 {
    w.iter().zip(v).fold(ZERO, |acc, (a, b)| acc + a * b)
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Pure-loss Kraus operators on Bob's mode as a dense table.
struct BobLoss {
    /// table[k][n] = ⟨n−k|A_k|n⟩; empty when η = 1.
    table: Vec<Vec<f64>>,
}

impl BobLoss {
    fn new(eta: f64, cutoff: usize) -> Self {
        if eta == 1.0 {
            return BobLoss { table: Vec::new() };
        }
        let table = (0..=cutoff)
            .map(|k| (0..=cutoff).map(|n| kraus_element(n, k, eta)).collect())
            .collect();
        BobLoss { table }
    }

    fn expand(&self, v: &[C64], out: &mut Vec<Vec<C64>>) {
        if self.table.is_empty() {
            out.push(v.to_vec());
            return;
        }
        for (k, row) in self.table.iter().enumerate() {
            let mut w = vec![ZERO; v.len()];
            for n in k..v.len() {
                w[n - k] = v[n] * row[n];
            }
            if w.iter().any(|z| *z != ZERO) {
                out.push(w);
            }
        }
    }

    /// Σ_k |w·A_k v|² and ‖v‖².
    fn accumulate(&self, w: &[C64], v: &[C64]) -> (f64, f64) {
        let dens = norm_sqr(v);
        if self.table.is_empty() {
            return (dot(w, v).norm_sqr(), dens);
        }
        let mut num = 0.0;
        for (k, row) in self.table.iter().enumerate() {
            let mut acc = ZERO;
            for n in k..v.len() {
                acc += w[n - k] * v[n] * row[n];
            }
            num += acc.norm_sqr();
        }
        (num, dens)
    }
}

/// D(−α*)|φ⟩: Bob's exact conditional state in the Λ → 1 limit.
pub fn ideal_limit_state(phi: &FockVector, alpha: C64) -> Result<fock::Truncated<FockVector>> {
    fock::displace(phi, 0, -alpha.conj())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AverageMode {
    GridExact,
    MonteCarlo { samples: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub r: f64,
    pub gain: f64,
    pub mode: AverageMode,
    pub mean_fidelity: f64,
    /// Monte-carlo standard error, or the grid normalization deficit.
    pub stderr: f64,
    /// 5%, 25%, 50%, 75%, 95% quantiles of F(χ) under the outcome density.
    pub quantiles: [f64; 5],
    pub truncation_budget: f64,
    pub normalization_deficit: f64,
    /// Gaussian-engine value for Gaussian inputs.
    pub oracle_value: Option<f64>,
}

/// Per-cell (p·F, p) over the grid, summed over branches.
fn grid_fidelity(
    config: &ProtocolConfig,
    init: &InitialState,
    target: &FockVector,
    axis: &GridAxis,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let loss = BobLoss::new(config.eta_epr_b, config.cutoff);
    let cells = axis.n_points * axis.n_points;
    let (mut num, mut den) = (vec![0.0; cells], vec![0.0; cells]);
    for branch in &init.branches {
        let an = BellAnalyzer::new(branch, BellModes::default(), config.homodyne)?;
        let vals = an.map_grid(axis, |i, j, bob| {
            let alpha = C64::new(axis.point(i), axis.point(j)) * std::f64::consts::FRAC_1_SQRT_2;
            let w = fidelity_row(target, alpha.conj() * config.gain);
            loss.accumulate(&w, bob)
        });
        for (k, (a, b)) in vals.into_iter().enumerate() {
            num[k] += a;
            den[k] += b;
        }
    }
    Ok((num, den))
}

/// Outcome-averaged fidelity ⟨F⟩ = ∫ p(χ) F(χ) dχ.
pub fn average_fidelity(config: &ProtocolConfig, mode: AverageMode) -> Result<FidelityReport> {
    let init = assemble_initial_state(config)?;
    check_budget(config, &init)?;
    let (target, _) = config.input.prepare(config.cutoff, "B")?;
    let modes = BellModes::default();
    let (means, vars) = bell::outcome_marginals(&init.branches, modes);
    let axis = config.grid.resolve(means, vars)?;
    let h2 = axis.spacing().powi(2);
    let (num, den) = grid_fidelity(config, &init, &target, &axis)?;
    let grid = OutcomeGrid {
        axis,
        density: den.clone(),
        deficit: 1.0 - den.iter().sum::<f64>() * h2,
    };
    if grid.deficit.abs() > bell::GRID_DEFICIT_TOLERANCE {
        return Err(Error::GridTooSmall {
            deficit: grid.deficit,
            tolerance: bell::GRID_DEFICIT_TOLERANCE,
            half_width: axis.half_width,
        });
    }

    let (mean, stderr, quantiles) = match mode {
        AverageMode::GridExact => {
            let mean = num.iter().sum::<f64>() * h2;
            let mut pts: Vec<(f64, f64)> = num
                .iter()
                .zip(&den)
                .filter(|(_, &d)| d > 0.0)
                .map(|(&n, &d)| (n / d, d))
                .collect();
            (mean, grid.deficit.abs(), weighted_quantiles(&mut pts))
        }
        AverageMode::MonteCarlo { samples } => {
            if samples < 2 {
                return Err(Error::InvalidParameter("monte-carlo needs at least 2 samples".into()));
            }
            let sampler = OutcomeSampler::new(&grid)?;
            let analyzers = init
                .branches
                .iter()
                .map(|b| BellAnalyzer::new(b, modes, config.homodyne))
                .collect::<Result<Vec<_>>>()?;
            let loss = BobLoss::new(config.eta_epr_b, config.cutoff);
            let fids = (0..samples)
                .into_par_iter()
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(record_seed(config.seed, i as u64));
                    let o = sampler.sample(&mut rng);
                    let w = fidelity_row(&target, o.alpha.conj() * config.gain);
                    let (mut n, mut d) = (0.0, 0.0);
                    for an in &analyzers {
                        let bob = an.project(o.chi_plus, o.chi_minus)?;
                        let (a, b) = loss.accumulate(&w, bob.amplitudes());
                        n += a;
                        d += b;
                    }
                    Ok(if d > 0.0 { n / d } else { 0.0 })
                })
                .collect::<Result<Vec<f64>>>()?;
            let m = fids.iter().sum::<f64>() / samples as f64;
            let var = fids.iter().map(|f| (f - m).powi(2)).sum::<f64>() / (samples - 1) as f64;
            let mut pts: Vec<(f64, f64)> = fids.iter().map(|&f| (f, 1.0)).collect();
            (m, (var / samples as f64).sqrt(), weighted_quantiles(&mut pts))
        }
    };

    Ok(FidelityReport {
        r: config.r,
        gain: config.gain,
        mode,
        mean_fidelity: mean,
        stderr,
        quantiles,
        truncation_budget: init.truncation(),
        normalization_deficit: grid.deficit,
        oracle_value: config.oracle_fidelity(),
    })
}

fn weighted_quantiles(pts: &mut [(f64, f64)]) -> [f64; 5] {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pts.iter().map(|p| p.1).sum();
    let probs = [0.05, 0.25, 0.5, 0.75, 0.95];
    let mut out = [f64::NAN; 5];
    let mut acc = 0.0;
    let mut k = 0;
    for &(f, w) in pts.iter() {
        acc += w;
        while k < 5 && acc >= probs[k] * total {
            out[k] = f;
            k += 1;
        }
    }
    out
}

/// Outcome density p(χ₊, χ₋) of the configured (possibly lossy) state.
pub fn outcome_grid(config: &ProtocolConfig) -> Result<OutcomeGrid> {
    let init = assemble_initial_state(config)?;
    bell::outcome_density_ensemble(&init.branches, BellModes::default(), config.homodyne, &config.grid)
}

/// Outcome-averaged Bob state after the correction, Σ ΔA·D ρ(χ) D†.
/// Its trace is one minus the grid deficit and the displacement tail.
pub fn averaged_post_correction(config: &ProtocolConfig) -> Result<DensityOperator> {
    let init = assemble_initial_state(config)?;
    let (means, vars) = bell::outcome_marginals(&init.branches, BellModes::default());
    let axis = config.grid.resolve(means, vars)?;
    let h2 = axis.spacing().powi(2);
    let loss = BobLoss::new(config.eta_epr_b, config.cutoff);
    let l = config.cutoff + 1;
    let basis = BasisSpec::single(config.cutoff, "B")?;
    let mut rho = DensityOperator::zeros(basis);
    for branch in &init.branches {
        let an = BellAnalyzer::new(branch, BellModes::default(), config.homodyne)?;
        let cells = an.map_grid(&axis, |i, j, bob| {
            let alpha = C64::new(axis.point(i), axis.point(j)) * std::f64::consts::FRAC_1_SQRT_2;
            let d = displacement_matrix(alpha.conj() * config.gain, config.cutoff);
            let mut vs = Vec::new();
            loss.expand(bob, &mut vs);
            vs.into_iter()
                .map(|v| (0..l).map(|m| dot_row(&d, m, &v)).collect::<Vec<_>>())
                .collect::<Vec<_>>()
        });
        for v in cells.iter().flatten() {
            rho.add_pure(v, h2);
        }
    }
    Ok(rho)
}

/// Smallest C with 1 − F ≤ C·e^{−2r} + budget over (r, F, budget) points.
pub fn convergence_constant(points: &[(f64, f64, f64)]) -> f64 {
    points
        .iter()
        .map(|&(r, f, budget)| ((1.0 - f - budget) * (2.0 * r).exp()).max(0.0))
        .fold(0.0, f64::max)
}

/// Seed of record `index` under `master` (splitmix64 of
/// master + index·0x9E3779B97F4A7C15).
pub fn record_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "parameter", content = "values", rename_all = "snake_case")]
pub enum SweepAxis {
    R(Vec<f64>),
    Gain(Vec<f64>),
    /// Sets both eta_epr_a and eta_epr_b.
    EtaEpr(Vec<f64>),
}

impl SweepAxis {
    fn values(&self) -> &[f64] {
        match self {
            SweepAxis::R(v) | SweepAxis::Gain(v) | SweepAxis::EtaEpr(v) => v,
        }
    }

    fn apply(&self, template: &ProtocolConfig, value: f64) -> ProtocolConfig {
        let mut c = template.clone();
        match self {
            SweepAxis::R(_) => c.r = value,
            SweepAxis::Gain(_) => c.gain = value,
            SweepAxis::EtaEpr(_) => {
                c.eta_epr_a = value;
                c.eta_epr_b = value;
            }
        }
        c
    }
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub value: f64,
    pub seed: u64,
    pub result: std::result::Result<FidelityReport, Error>,
}

/// One independent run per value; point i uses seed record_seed(seed, i).
/// Failures are kept per point and do not stop the sweep.
pub fn sweep(template: &ProtocolConfig, axis: &SweepAxis, mode: AverageMode) -> Vec<SweepPoint> {
    axis.values()
        .par_iter()
        .enumerate()
        .map(|(i, &value)| {
            let mut c = axis.apply(template, value);
            c.seed = record_seed(template.seed, i as u64);
            SweepPoint {
                value,
                seed: c.seed,
                result: average_fidelity(&c, mode),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_per_index() {
        assert_ne!(record_seed(1, 0), record_seed(1, 1));
        assert_eq!(record_seed(9, 4), record_seed(9, 4));
    }

    #[test]
    fn quantiles_of_uniform_weights() {
        let mut pts: Vec<(f64, f64)> = (1..=100).map(|k| (k as f64, 1.0)).collect();
        assert_eq!(weighted_quantiles(&mut pts), [5.0, 25.0, 50.0, 75.0, 95.0]);
    }

    #[test]
    fn config_validation() {
        let mut c = ProtocolConfig::new(0.5, 10, InputSpec::coherent(0.1, 0.0));
        assert!(c.validate().is_ok());
        c.gain = 2.5;
        assert!(c.validate().is_err());
        c.gain = 1.0;
        c.eta_read = 1.2;
        assert!(c.validate().is_err());
    }

    #[test]
    fn lossy_coherent_input_is_a_single_branch() {
        let (v, _) = InputSpec::coherent(0.6, 0.2).prepare(20, "V").unwrap();
        let (branches, _) = lossy_input(&v, 0.7).unwrap();
        assert_eq!(branches.len(), 1);
    }
}
