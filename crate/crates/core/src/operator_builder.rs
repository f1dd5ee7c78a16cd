//! Frame-resolved quartic operators and their block-tridiagonal compression.
//!
//! An operator is `kinetic * (-d^2/dx^2) + sum_{j=0..4} c_j x^j`. The spectral
//! parameter `lambda = E + Omega E^2` is never folded into `c_0`.

use rug::{Complex, Float};

use crate::error::{Error, Result};
use crate::hermite_basis::{BasisMatrices, BasisSpec};
use crate::linalg::{mat4_scale, mat4_zero, DenseMatrix, Mat4};
use crate::scalars::PrecisionContext;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    DiracTitchmarsh,
    KleinGordon,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    Plus,
    Minus,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Frame {
    Real,
    /// `x -> x + i y`, `y > 0`.
    Translated { y: Float },
    /// `x -> x e^{i theta}`, `0 < |theta| < pi/6`.
    Dilated { theta: Float },
}

impl Frame {
    pub fn tag(&self) -> &'static str {
        match self {
            Frame::Real => "r",
            Frame::Translated { .. } => "t",
            Frame::Dilated { .. } => "d",
        }
    }

    /// `y` or `theta`, zero for the real frame.
    pub fn parameter(&self) -> f64 {
        match self {
            Frame::Real => 0.0,
            Frame::Translated { y } => y.to_f64(),
            Frame::Dilated { theta } => theta.to_f64(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Frame::Real => Ok(()),
            Frame::Translated { y } => {
                if y.is_finite() && *y > 0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("translation y must be positive, got {y}")))
                }
            }
            Frame::Dilated { theta } => {
                let limit = std::f64::consts::PI / 6.0;
                let t = theta.to_f64();
                if theta.is_finite() && t != 0.0 && t.abs() < limit {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "dilation angle must satisfy 0 < |theta| < pi/6, got {t}"
                    )))
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModelParams {
    pub omega: Float,
    pub energy: Complex,
    pub variant: Variant,
    pub branch: Branch,
    pub frame: Frame,
}

impl ModelParams {
    pub fn new(omega: Float, energy: Complex, variant: Variant, branch: Branch, frame: Frame) -> Self {
        Self {
            omega,
            energy,
            variant,
            branch,
            frame,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0) {
            return Err(Error::InvalidParameter(format!(
                "omega must be positive, got {}",
                self.omega
            )));
        }
        self.frame.validate()
    }

    pub fn with_energy(&self, energy: Complex) -> Self {
        Self {
            energy,
            ..self.clone()
        }
    }
}

/// Dimensionless `(Omega, E)` from `Omega = hbar omega / (4 m c^2)` and
/// `E = 2 (W - m c^2) / (hbar omega)`.
pub fn from_physical(
    m: &Float,
    omega: &Float,
    c_light: &Float,
    hbar: &Float,
    w: &Float,
) -> Result<(Float, Float)> {
    for (name, v) in [("m", m), ("omega", omega), ("c", c_light), ("hbar", hbar)] {
        if !(v.is_finite() && *v > 0) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    let prec = m.prec();
    let mc2 = Float::with_val(prec, m * c_light) * c_light;
    let hw = Float::with_val(prec, hbar * omega);
    let omega_rel = Float::with_val(prec, &hw / &mc2) / 4u32;
    let energy = Float::with_val(prec, w - &mc2) * 2u32 / &hw;
    Ok((omega_rel, energy))
}

#[derive(Clone, Debug)]
pub struct QuarticOperator {
    kinetic: Complex,
    coeffs: [Complex; 5],
    params: Option<ModelParams>,
    frame: Frame,
}

impl QuarticOperator {
    pub fn new(kinetic: Complex, coeffs: [Complex; 5]) -> Self {
        Self {
            kinetic,
            coeffs,
            params: None,
            frame: Frame::Real,
        }
    }

    /// All coefficients zero, including the kinetic one.
    pub fn bare(ctx: &PrecisionContext) -> Self {
        Self::new(ctx.czero(), std::array::from_fn(|_| ctx.czero()))
    }

    /// `-d^2/dx^2 + x^2`, the harmonic limit of every variant.
    pub fn harmonic(ctx: &PrecisionContext) -> Self {
        let mut op = Self::bare(ctx);
        op.kinetic = ctx.complex(1.0, 0.0);
        op.coeffs[2] = ctx.complex(1.0, 0.0);
        op
    }

    pub fn kinetic(&self) -> &Complex {
        &self.kinetic
    }

    pub fn kinetic_mut(&mut self) -> &mut Complex {
        &mut self.kinetic
    }

    pub fn coeffs(&self) -> &[Complex; 5] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex; 5] {
        &mut self.coeffs
    }

    pub fn params(&self) -> Option<&ModelParams> {
        self.params.as_ref()
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn prec(&self) -> u32 {
        self.kinetic.prec().0
    }

    /// Real-frame PT symmetry: even coefficients real, odd ones imaginary.
    pub fn is_pt_symmetric(&self) -> bool {
        self.kinetic.imag().is_zero()
            && self.coeffs.iter().enumerate().all(|(j, c)| {
                if j % 2 == 0 {
                    c.imag().is_zero()
                } else {
                    c.real().is_zero()
                }
            })
    }

    pub fn conjugate(&self) -> Self {
        let mut out = self.clone();
        out.kinetic = Complex::with_val(self.prec(), self.kinetic.conj_ref());
        for c in out.coeffs.iter_mut() {
            *c = Complex::with_val(self.prec(), c.conj_ref());
        }
        out
    }
}

/// Real-frame operator for `params`. The frame stored in `params` is applied
/// separately by [`apply_frame`].
pub fn build_operator(params: &ModelParams, ctx: &PrecisionContext) -> Result<QuarticOperator> {
    if !(params.omega.is_finite() && params.omega > 0) {
        return Err(Error::InvalidParameter(format!(
            "omega must be positive, got {}",
            params.omega
        )));
    }
    let prec = ctx.prec();
    let omega = Float::with_val(prec, &params.omega);
    let mut op = QuarticOperator::bare(ctx);
    op.kinetic = ctx.complex(1.0, 0.0);
    if params.variant == Variant::DiracTitchmarsh {
        let root = Float::with_val(prec, omega.sqrt_ref());
        op.coeffs[1] = Complex::with_val(prec, (0, -(root * 2u32)));
    }
    let e_omega = Complex::with_val(prec, &params.energy * &omega);
    op.coeffs[2] = e_omega * 2u32 + 1u32;
    op.coeffs[4] = Complex::with_val(prec, -omega);
    if params.branch == Branch::Minus {
        op = op.conjugate();
    }
    op.params = Some(params.clone());
    Ok(op)
}

/// Substitutes `x -> x + z` into the potential and re-expands in powers of `x`.
pub fn shift_argument(op: &QuarticOperator, z: &Complex) -> QuarticOperator {
    let prec = op.prec();
    const BINOM: [[u32; 5]; 5] = [
        [1, 0, 0, 0, 0],
        [1, 1, 0, 0, 0],
        [1, 2, 1, 0, 0],
        [1, 3, 3, 1, 0],
        [1, 4, 6, 4, 1],
    ];
    let mut zpow = vec![Complex::with_val(prec, 1)];
    for j in 1..5 {
        let next = Complex::with_val(prec, &zpow[j - 1] * z);
        zpow.push(next);
    }
    let mut out = op.clone();
    for k in 0..5 {
        let mut acc = Complex::new(prec);
        for j in k..5 {
            let term = Complex::with_val(prec, &op.coeffs[j] * &zpow[j - k]) * BINOM[j][k];
            acc += term;
        }
        out.coeffs[k] = acc;
    }
    out
}

/// Substitutes `x -> x e^{i theta}`.
pub fn dilate(op: &QuarticOperator, theta: &Float) -> QuarticOperator {
    let prec = op.prec();
    let phase = |m: i32| unit_phase(theta, m, prec);
    let mut out = op.clone();
    out.kinetic = Complex::with_val(prec, &op.kinetic * &phase(-2));
    for (j, c) in out.coeffs.iter_mut().enumerate() {
        *c = Complex::with_val(prec, &*c * &phase(j as i32));
    }
    out
}

/// Resolves the frame recorded in the operator's parameters.
pub fn apply_frame(op: &QuarticOperator) -> Result<QuarticOperator> {
    if op.frame != Frame::Real {
        return Err(Error::FrameAlreadyApplied);
    }
    let params = op
        .params
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("operator carries no frame parameters".into()))?;
    params.frame.validate()?;
    let prec = op.prec();
    let mut out = match &params.frame {
        Frame::Real => op.clone(),
        Frame::Translated { y } => {
            let z = Complex::with_val(prec, (0, y));
            shift_argument(op, &z)
        }
        Frame::Dilated { theta } => dilate(op, theta),
    };
    out.frame = params.frame.clone();
    Ok(out)
}

/// `build_operator` followed by `apply_frame`.
pub fn resolve_operator(params: &ModelParams, ctx: &PrecisionContext) -> Result<QuarticOperator> {
    params.validate()?;
    let op = build_operator(params, ctx)?;
    apply_frame(&op)
}

/// `A_n`, `B_n`, `C_n` blocks of a block-tridiagonal matrix. All three
/// sequences have `n_blocks` entries; `B_{N-1}` and `C_{N-1}` couple to the
/// first block outside the truncation and are kept so that the moment
/// recurrence can be run to full depth.
#[derive(Clone, Debug)]
pub struct BlockTridiagonal {
    pub a: Vec<Mat4>,
    pub b: Vec<Mat4>,
    pub c: Vec<Mat4>,
}

impl BlockTridiagonal {
    pub fn from_blocks(a: Vec<Mat4>, b: Vec<Mat4>, c: Vec<Mat4>) -> Result<Self> {
        if a.len() != b.len() || a.len() != c.len() || a.is_empty() {
            return Err(Error::SizeMismatch {
                needed: a.len(),
                available: b.len().min(c.len()),
            });
        }
        Ok(Self { a, b, c })
    }

    pub fn n_blocks(&self) -> usize {
        self.a.len()
    }

    pub fn prec(&self) -> u32 {
        self.a[0][0][0].prec().0
    }

    /// The leading `4n x 4n` matrix.
    pub fn to_dense(&self, n: usize) -> DenseMatrix {
        let prec = self.prec();
        let mut m = DenseMatrix::zeros(4 * n, prec);
        for blk in 0..n {
            for i in 0..4 {
                for k in 0..4 {
                    m.set(4 * blk + i, 4 * blk + k, &self.a[blk][i][k]);
                    if blk + 1 < n {
                        m.set(4 * blk + i, 4 * (blk + 1) + k, &self.b[blk][i][k]);
                        m.set(4 * (blk + 1) + i, 4 * blk + k, &self.c[blk][i][k]);
                    }
                }
            }
        }
        m
    }

    pub fn scale(&self, s: &Complex) -> Self {
        let prec = self.prec();
        let f = |v: &Vec<Mat4>| v.iter().map(|m| mat4_scale(m, s, prec)).collect();
        Self {
            a: f(&self.a),
            b: f(&self.b),
            c: f(&self.c),
        }
    }

    /// Truncates to the first `n` blocks.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            a: self.a[..n].to_vec(),
            b: self.b[..n].to_vec(),
            c: self.c[..n].to_vec(),
        }
    }
}

/// Packs `op` on `basis` into `n_blocks` blocks.
pub fn assemble_blocks(
    op: &QuarticOperator,
    basis: &BasisSpec,
    n_blocks: usize,
    ctx: &PrecisionContext,
) -> Result<BlockTridiagonal> {
    if n_blocks == 0 || 4 * n_blocks > basis.size() {
        return Err(Error::SizeMismatch {
            needed: 4 * n_blocks.max(1),
            available: basis.size(),
        });
    }
    let mats = BasisMatrices::new(basis.sigma(), 4 * n_blocks + 4, ctx);
    assemble_from_matrices(op, &mats, n_blocks)
}

/// As [`assemble_blocks`], reusing precomputed basis matrices which must
/// cover at least `4 n_blocks + 4` states.
pub fn assemble_from_matrices(
    op: &QuarticOperator,
    mats: &BasisMatrices,
    n_blocks: usize,
) -> Result<BlockTridiagonal> {
    let needed = 4 * n_blocks + 4;
    if mats.size() < needed {
        return Err(Error::SizeMismatch {
            needed,
            available: mats.size(),
        });
    }
    let prec = op.prec();
    let entry = |i: usize, k: usize| -> Complex {
        let mut acc = Complex::with_val(prec, op.kinetic() * &mats.kinetic(i, k));
        for (p, c) in op.coeffs().iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let v = mats.power(p, i, k);
            if !v.is_zero() {
                acc += Complex::with_val(prec, c * &v);
            }
        }
        acc
    };
    let mut a = Vec::with_capacity(n_blocks);
    let mut b = Vec::with_capacity(n_blocks);
    let mut c = Vec::with_capacity(n_blocks);
    for n in 0..n_blocks {
        let mut an = mat4_zero(prec);
        let mut bn = mat4_zero(prec);
        let mut cn = mat4_zero(prec);
        for i in 0..4 {
            for k in 0..4 {
                an[i][k] = entry(4 * n + i, 4 * n + k);
                bn[i][k] = entry(4 * n + i, 4 * (n + 1) + k);
                cn[i][k] = entry(4 * (n + 1) + i, 4 * n + k);
            }
        }
        a.push(an);
        b.push(bn);
        c.push(cn);
    }
    Ok(BlockTridiagonal { a, b, c })
}

/// `1 + 2 E Omega`, the effective harmonic strength.
pub fn harmonic_strength(omega: &Float, energy: &Complex) -> Complex {
    let prec = omega.prec();
    Complex::with_val(prec, energy * omega) * 2u32 + 1u32
}

/// `e^{i m theta}` at precision `prec`.
pub fn unit_phase(theta: &Float, m: i32, prec: u32) -> Complex {
    let angle = Float::with_val(prec, theta * m);
    let (s, c) = angle.sin_cos(Float::new(prec));
    Complex::with_val(prec, (c, s))
}
