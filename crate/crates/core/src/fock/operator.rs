//! Mode operators acting on one or two modes of a truncated Fock space.
//!
//! Two-mode operators are stored block-diagonally: a beamsplitter conserves
//! the total photon number n_i + n_j and a two-mode squeezer conserves the
//! difference n_i - n_j, so each block couples at most N+1 basis states.

use nalgebra::DMatrix;

use super::basis::BasisSpec;
use super::linalg::{expm, unitarity_defect, C64, ONE, ZERO};
use super::state::{FockVector, Normalization};
use crate::error::{Error, Result};

/// Bound on ‖U†U − I‖_max for the unitary constructors. The generators are
/// restricted to the truncated space before exponentiation, which keeps the
/// result unitary on that space up to the [`expm`] tolerance.
pub const UNITARITY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    Identity,
    Annihilation,
    Creation,
    Number,
    Displacement,
    TwoModeSqueeze,
    Beamsplitter,
}

impl OperatorKind {
    pub fn is_unitary(self) -> bool {
        matches!(
            self,
            OperatorKind::Identity
                | OperatorKind::Displacement
                | OperatorKind::TwoModeSqueeze
                | OperatorKind::Beamsplitter
        )
    }
}

/// One invariant block of a two-mode operator. `states` lists the local
/// occupations (n_i, n_j) indexing the block's rows and columns.
#[derive(Clone, Debug)]
pub struct Block {
    pub states: Vec<(usize, usize)>,
    pub matrix: DMatrix<C64>,
}

#[derive(Clone, Debug)]
enum Local {
    Single(DMatrix<C64>),
    Pair(Vec<Block>),
}

#[derive(Clone, Debug)]
pub struct ModeOperator {
    basis: BasisSpec,
    modes: Vec<usize>,
    kind: OperatorKind,
    local: Local,
}

impl ModeOperator {
    fn single(basis: &BasisSpec, mode: usize, kind: OperatorKind, m: DMatrix<C64>) -> Result<Self> {
        basis.check_mode(mode)?;
        Ok(ModeOperator {
            basis: basis.clone(),
            modes: vec![mode],
            kind,
            local: Local::Single(m),
        })
    }

    fn pair(basis: &BasisSpec, i: usize, j: usize, kind: OperatorKind, blocks: Vec<Block>) -> Result<Self> {
        basis.check_pair(i, j)?;
        Ok(ModeOperator {
            basis: basis.clone(),
            modes: vec![i, j],
            kind,
            local: Local::Pair(blocks),
        })
    }

    pub fn identity(basis: &BasisSpec, mode: usize) -> Result<Self> {
        let l = basis.levels();
        Self::single(basis, mode, OperatorKind::Identity, DMatrix::identity(l, l))
    }

    /// b with ⟨n−1|b|n⟩ = √n.
    pub fn annihilation(basis: &BasisSpec, mode: usize) -> Result<Self> {
        Self::single(basis, mode, OperatorKind::Annihilation, lowering_matrix(basis.cutoff()))
    }

    pub fn creation(basis: &BasisSpec, mode: usize) -> Result<Self> {
        Self::single(
            basis,
            mode,
            OperatorKind::Creation,
            lowering_matrix(basis.cutoff()).adjoint(),
        )
    }

    /// b†b, diagonal with entries 0..=N.
    pub fn number(basis: &BasisSpec, mode: usize) -> Result<Self> {
        let l = basis.levels();
        let m = DMatrix::from_fn(l, l, |r, c| if r == c { C64::new(r as f64, 0.0) } else { ZERO });
        Self::single(basis, mode, OperatorKind::Number, m)
    }

    /// exp(β b† − β* b) with the generator truncated at the cutoff.
    pub fn displacement(basis: &BasisSpec, mode: usize, beta: C64) -> Result<Self> {
        check_finite(beta, "displacement amplitude")?;
        let b = lowering_matrix(basis.cutoff());
        let gen = b.adjoint() * beta - &b * beta.conj();
        Self::single(basis, mode, OperatorKind::Displacement, expm(&gen))
    }

    /// exp[r(b_i b_j − b_i† b_j†)], block-wise over n_i − n_j.
    pub fn two_mode_squeeze(basis: &BasisSpec, i: usize, j: usize, r: f64) -> Result<Self> {
        if !r.is_finite() {
            return Err(Error::InvalidParameter("squeezing must be finite".into()));
        }
        Self::pair(basis, i, j, OperatorKind::TwoModeSqueeze, squeeze_blocks(basis.cutoff(), r))
    }

    /// exp[θ(e^{iφ} b_i† b_j − e^{−iφ} b_i b_j†)] with cos θ = √T, from the
    /// exponential of each truncated photon-number block.
    ///
    /// Convention: b_i† → √T b_i† − e^{−iφ}√(1−T) b_j†, so T = 1/2 takes
    /// |1,0⟩ to (|1,0⟩ − e^{−iφ}|0,1⟩)/√2.
    pub fn beamsplitter(basis: &BasisSpec, i: usize, j: usize, transmissivity: f64, phase: f64) -> Result<Self> {
        check_transmissivity(transmissivity)?;
        Self::pair(
            basis,
            i,
            j,
            OperatorKind::Beamsplitter,
            beamsplitter_blocks_expm(basis.cutoff(), transmissivity, phase),
        )
    }

    /// The same beamsplitter built by transforming creation operators photon
    /// by photon. Exact on blocks with n_i + n_j ≤ N; components pushed above
    /// the cutoff by higher blocks are dropped.
    pub fn beamsplitter_rotation(
        basis: &BasisSpec,
        i: usize,
        j: usize,
        transmissivity: f64,
        phase: f64,
    ) -> Result<Self> {
        check_transmissivity(transmissivity)?;
        let n = basis.cutoff();
        let images = PhotonImages::new(n, n, transmissivity, phase);
        let mut blocks = Vec::with_capacity(2 * n + 1);
        for total in 0..=2 * n {
            let states = pair_block_states(n, total);
            let k = states.len();
            let mut m = DMatrix::<C64>::zeros(k, k);
            for (col, &(p, q)) in states.iter().enumerate() {
                let img = images.image(p, q);
                for (row, &(pp, _)) in states.iter().enumerate() {
                    m[(row, col)] = img[pp];
                }
            }
            blocks.push(Block { states, matrix: m });
        }
        Self::pair(basis, i, j, OperatorKind::Beamsplitter, blocks)
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    /// The invariant blocks of a two-mode operator.
    pub fn blocks(&self) -> Option<&[Block]> {
        match &self.local {
            Local::Pair(b) => Some(b),
            Local::Single(_) => None,
        }
    }

    /// Dense matrix on the operator's own modes. For two-mode operators the
    /// local index is n_i (N+1) + n_j.
    pub fn local_matrix(&self) -> DMatrix<C64> {
        match &self.local {
            Local::Single(m) => m.clone(),
            Local::Pair(blocks) => {
                let l = self.basis.levels();
                let mut m = DMatrix::<C64>::zeros(l * l, l * l);
                for blk in blocks {
                    for (r, &(ri, rj)) in blk.states.iter().enumerate() {
                        for (c, &(ci, cj)) in blk.states.iter().enumerate() {
                            m[(ri * l + rj, ci * l + cj)] = blk.matrix[(r, c)];
                        }
                    }
                }
                m
            }
        }
    }

    /// ‖U†U − I‖_max over the local space, evaluated block by block.
    pub fn unitarity_defect(&self) -> f64 {
        match &self.local {
            Local::Single(m) => unitarity_defect(m),
            Local::Pair(blocks) => blocks
                .iter()
                .map(|b| unitarity_defect(&b.matrix))
                .fold(0.0, f64::max),
        }
    }

    pub fn apply(&self, state: &FockVector) -> Result<FockVector> {
        self.basis.ensure_same(state.basis())?;
        let out = match &self.local {
            Local::Single(m) => apply_single(state.basis(), state.amplitudes(), self.modes[0], m),
            Local::Pair(blocks) => apply_pair(state.basis(), state.amplitudes(), self.modes[0], self.modes[1], blocks),
        };
        let normalization = if self.kind.is_unitary() && state.is_normalized() {
            Normalization::Normalized
        } else {
            Normalization::Unnormalized
        };
        let v = FockVector::from_parts(state.basis().clone(), out, Normalization::Unnormalized);
        // A unitary on a normalized state stays normalized to the expm
        // tolerance; relabel only when that holds.
        if normalization == Normalization::Normalized && (v.norm() - 1.0).abs() <= 1e-10 {
            Ok(v.relabel(Normalization::Normalized))
        } else {
            Ok(v)
        }
    }
}

fn check_finite(z: C64, what: &str) -> Result<()> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} must be finite")))
    }
}

fn check_transmissivity(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("transmissivity {t} outside [0, 1]")))
    }
}

pub(crate) fn lowering_matrix(cutoff: usize) -> DMatrix<C64> {
    let l = cutoff + 1;
    DMatrix::from_fn(l, l, |r, c| {
        if c == r + 1 {
            C64::new((c as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    })
}

/// Applies a single-mode matrix to `mode` of a multimode amplitude vector.
pub(crate) fn apply_single(basis: &BasisSpec, amps: &[C64], mode: usize, m: &DMatrix<C64>) -> Vec<C64> {
    let l = basis.levels();
    let stride = basis.stride(mode);
    let outer = amps.len() / (l * stride);
    let mut out = vec![ZERO; amps.len()];
    let mut fiber = vec![ZERO; l];
    for o in 0..outer {
        for inner in 0..stride {
            let base = o * l * stride + inner;
            let mut any = false;
            for (n, f) in fiber.iter_mut().enumerate() {
                *f = amps[base + n * stride];
                any |= *f != ZERO;
            }
            if !any {
                continue;
            }
            for r in 0..l {
                let mut acc = ZERO;
                for (c, f) in fiber.iter().enumerate() {
                    acc += m[(r, c)] * f;
                }
                out[base + r * stride] = acc;
            }
        }
    }
    out
}

/// Applies a block-diagonal two-mode operator to modes (i, j).
pub(crate) fn apply_pair(basis: &BasisSpec, amps: &[C64], i: usize, j: usize, blocks: &[Block]) -> Vec<C64> {
    let (si, sj) = (basis.stride(i), basis.stride(j));
    let mut out = vec![ZERO; amps.len()];
    let mut gathered = Vec::new();
    for base in 0..amps.len() {
        if basis.occupation(base, i) != 0 || basis.occupation(base, j) != 0 {
            continue;
        }
        for blk in blocks {
            gathered.clear();
            gathered.extend(blk.states.iter().map(|&(p, q)| amps[base + p * si + q * sj]));
            if gathered.iter().all(|z| *z == ZERO) {
                continue;
            }
            for (r, &(p, q)) in blk.states.iter().enumerate() {
                let mut acc = ZERO;
                for (c, g) in gathered.iter().enumerate() {
                    acc += blk.matrix[(r, c)] * g;
                }
                out[base + p * si + q * sj] = acc;
            }
        }
    }
    out
}

/// Local states (p, total − p) of a photon-number block within the cutoff.
pub(crate) fn pair_block_states(cutoff: usize, total: usize) -> Vec<(usize, usize)> {
    let lo = total.saturating_sub(cutoff);
    let hi = total.min(cutoff);
    (lo..=hi).map(|p| (p, total - p)).collect()
}

fn beamsplitter_blocks_expm(cutoff: usize, t: f64, phase: f64) -> Vec<Block> {
    let theta = t.sqrt().acos();
    let e = C64::from_polar(theta, phase);
    (0..=2 * cutoff)
        .map(|total| {
            let states = pair_block_states(cutoff, total);
            let k = states.len();
            let mut gen = DMatrix::<C64>::zeros(k, k);
            // b_i† b_j: (p, q) → (p+1, q−1), neighbours within the block.
            for c in 0..k {
                let (p, q) = states[c];
                if c + 1 < k && q > 0 {
                    let amp = (((p + 1) * q) as f64).sqrt();
                    gen[(c + 1, c)] += e * amp;
                    gen[(c, c + 1)] -= e.conj() * amp;
                }
            }
            Block {
                states,
                matrix: expm(&gen),
            }
        })
        .collect()
}

fn squeeze_blocks(cutoff: usize, r: f64) -> Vec<Block> {
    let n = cutoff as isize;
    (-n..=n)
        .map(|d| {
            let lo = d.max(0) as usize;
            let hi = (n + d.min(0)) as usize;
            let states: Vec<(usize, usize)> = (lo..=hi).map(|a| (a, (a as isize - d) as usize)).collect();
            let k = states.len();
            let mut gen = DMatrix::<C64>::zeros(k, k);
            // −r b_i† b_j† raises both; +r b_i b_j lowers both.
            for c in 0..k.saturating_sub(1) {
                let (a, b) = states[c];
                let amp = (((a + 1) * (b + 1)) as f64).sqrt() * r;
                gen[(c + 1, c)] -= C64::new(amp, 0.0);
                gen[(c, c + 1)] += C64::new(amp, 0.0);
            }
            Block {
                states,
                matrix: expm(&gen),
            }
        })
        .collect()
}

/// Exact (untruncated) beamsplitter images U|p, q⟩ for p ≤ max_i, q ≤ max_j.
///
/// Each image lives on the photon-number block p + q and is indexed by the
/// number of photons left in mode i. Built by applying the transformed
/// creation operators one photon at a time, which avoids the cancellation of
/// the alternating binomial sums.
pub(crate) struct PhotonImages {
    max_j: usize,
    images: Vec<Vec<C64>>,
}

impl PhotonImages {
    pub(crate) fn new(max_i: usize, max_j: usize, t: f64, phase: f64) -> Self {
        let (c, s) = (t.sqrt(), (1.0 - t).max(0.0).sqrt());
        // U b_i† U† = c b_i† − e^{−iφ} s b_j†,  U b_j† U† = c b_j† + e^{iφ} s b_i†
        let a_i = C64::new(c, 0.0);
        let a_j = -C64::from_polar(s, -phase);
        let b_i = C64::from_polar(s, phase);
        let b_j = C64::new(c, 0.0);
        let mut images = vec![Vec::new(); (max_i + 1) * (max_j + 1)];
        let mut column = vec![ONE];
        for q in 0..=max_j {
            if q > 0 {
                column = raise(&column, b_i, b_j, q);
            }
            let mut cur = column.clone();
            images[q] = cur.clone();
            for p in 1..=max_i {
                cur = raise(&cur, a_i, a_j, p);
                images[p * (max_j + 1) + q] = cur.clone();
            }
        }
        PhotonImages { max_j, images }
    }

    pub(crate) fn image(&self, p: usize, q: usize) -> &[C64] {
        &self.images[p * (self.max_j + 1) + q]
    }
}

/// (x b_i† + y b_j†) w / √k for w on block n, indexed by photons in mode i.
fn raise(w: &[C64], x: C64, y: C64, k: usize) -> Vec<C64> {
    let n = w.len() - 1;
    let norm = 1.0 / (k as f64).sqrt();
    (0..=n + 1)
        .map(|p| {
            let mut acc = ZERO;
            if p > 0 {
                acc += x * (p as f64).sqrt() * w[p - 1];
            }
            if p <= n {
                acc += y * ((n + 1 - p) as f64).sqrt() * w[p];
            }
            acc * norm
        })
        .collect()
}
