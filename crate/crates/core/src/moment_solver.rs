//! Eigenvalues of a truncated block-tridiagonal matrix as zeros of the
//! determinant of the matrix moment polynomial
//!
//! ```text
//! P_0 = I,  P_1 = B_0^{-1} (lambda - A_0),
//! P_n = B_{n-1}^{-1} ((lambda - A_{n-1}) P_{n-1} - C_{n-2} P_{n-2}).
//! ```
//!
//! `det P_n(lambda)` is proportional to `det(lambda - H_{4n})`, so its zeros
//! are the Rayleigh-Ritz eigenvalues of the leading `4n x 4n` section.

use rug::{Assign, Complex, Float};

use crate::error::{Error, Result};
use crate::hermite_basis::BasisMatrices;
use crate::linalg::{
    mat4_det, mat4_identity, mat4_max_abs, mat4_max_exp, mat4_mul, mat4_sub, mat4_transpose, Lu4, Mat4,
};
use crate::operator_builder::{assemble_from_matrices, BlockTridiagonal, QuarticOperator};
use crate::scalars::PrecisionContext;

pub const MAX_NEWTON_ITERATIONS: usize = 200;
pub const DEFAULT_BASIN_RADIUS: f64 = 1.0;
pub const DEFAULT_PLATEAU_THRESHOLD: f64 = 1e-8;
pub const ORACLE_MAX_DIM: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    Upper,
    Lower,
    None,
}

impl Bound {
    pub fn as_str(self) -> &'static str {
        match self {
            Bound::Upper => "upper",
            Bound::Lower => "lower",
            Bound::None => "none",
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenvalueEstimate {
    pub lambda: Complex,
    /// Size of the last Newton correction, `|f / f'|`.
    pub residual: Float,
    pub bound: Bound,
    pub n_blocks: usize,
    pub iterations: usize,
}

/// `det P_n` as `mantissa * 2^(4 scale_exp)`.
#[derive(Clone, Debug)]
pub struct DetP {
    pub mantissa: Complex,
    pub scale_exp: i64,
}

impl DetP {
    /// Natural log of the accumulated scale applied to `P_n`.
    pub fn log_scale(&self) -> Float {
        let prec = self.mantissa.prec().0;
        Float::with_val(prec, rug::float::Constant::Log2) * self.scale_exp
    }

    /// `log|det P_n| = log|mantissa| + 4 log_scale`.
    pub fn log_abs(&self) -> Float {
        let prec = self.mantissa.prec().0;
        let m = Float::with_val(prec, self.mantissa.abs_ref()).ln();
        m + self.log_scale() * 4u32
    }

    /// `self / other` as a plain complex number.
    pub fn ratio(&self, other: &DetP) -> Complex {
        let prec = self.mantissa.prec().0;
        let mut q = Complex::with_val(prec, &self.mantissa / &other.mantissa);
        let shift = 4 * (self.scale_exp - other.scale_exp);
        q <<= shift as i32;
        q
    }
}

/// State of the recurrence after step `index`.
#[derive(Clone, Debug)]
pub struct MomentPolynomialState {
    pub p_prev: Mat4,
    pub p_curr: Mat4,
    /// Binary exponent of the common scale removed from both matrices.
    pub scale_exp: i64,
    pub index: usize,
}

impl MomentPolynomialState {
    pub fn log_scale(&self) -> Float {
        let prec = self.p_curr[0][0].prec().0;
        Float::with_val(prec, rug::float::Constant::Log2) * self.scale_exp
    }
}

/// Moment recurrence over a fixed block matrix with the `B_k` factored once.
///
/// The recurrence cancels roughly one decimal digit per block once the
/// truncation is deep, so the engine may run above context precision; see
/// [`MomentEngine::calibrated`].
pub struct MomentEngine {
    a: Vec<Mat4>,
    c: Vec<Mat4>,
    b_lu: Vec<Lu4>,
    prec: u32,
    rescale_exp: i32,
}

fn lift(m: &Mat4, prec: u32) -> Mat4 {
    std::array::from_fn(|i| std::array::from_fn(|j| Complex::with_val(prec, &m[i][j])))
}

impl MomentEngine {
    /// Factors `B_0 .. B_{n-1}` at context precision; fails with `SingularB`
    /// on a vanishing pivot.
    pub fn new(blocks: &BlockTridiagonal, n: usize, ctx: &PrecisionContext) -> Result<Self> {
        Self::with_prec(blocks, n, ctx, ctx.prec())
    }

    pub fn with_prec(blocks: &BlockTridiagonal, n: usize, ctx: &PrecisionContext, prec: u32) -> Result<Self> {
        if n == 0 || n > blocks.n_blocks() {
            return Err(Error::SizeMismatch {
                needed: n,
                available: blocks.n_blocks(),
            });
        }
        let prec = prec.max(ctx.prec());
        let eps = ctx.epsilon();
        let mut b_lu = Vec::with_capacity(n);
        for (k, b) in blocks.b[..n].iter().enumerate() {
            let b = lift(b, prec);
            let tiny = Float::with_val(prec, mat4_max_abs(&b, prec) * &eps);
            let lu = if tiny.is_zero() {
                None
            } else {
                Lu4::new(&b, &tiny)
            };
            b_lu.push(lu.ok_or(Error::SingularB { block: k })?);
        }
        let rescale_exp = ctx.det_rescale_threshold().get_exp().unwrap_or(333);
        Ok(Self {
            a: blocks.a[..n].iter().map(|m| lift(m, prec)).collect(),
            c: blocks.c[..n].iter().map(|m| lift(m, prec)).collect(),
            b_lu,
            prec,
            rescale_exp,
        })
    }

    /// Chooses the working precision so that `det P_n` near `probe` keeps at
    /// least the context's bits, judged by re-running 128 bits higher.
    pub fn calibrated(blocks: &BlockTridiagonal, n: usize, ctx: &PrecisionContext, probe: &Complex) -> Result<Self> {
        let target = i64::from(ctx.prec()) + 8;
        let mut prec = ctx.prec() + 4 * n as u32 + 32;
        let probe = Complex::with_val(prec + 128, probe + 0.5f64);
        for _ in 0..8 {
            let engine = Self::with_prec(blocks, n, ctx, prec)?;
            let reference = Self::with_prec(blocks, n, ctx, prec + 128)?;
            let d = engine.det(&Complex::with_val(prec, &probe));
            let r = reference.det(&probe);
            if r.mantissa.is_zero() {
                return Ok(engine);
            }
            let rel = Complex::with_val(prec + 128, d.ratio(&r) - 1u32);
            let rel = Float::with_val(64, rel.abs_ref());
            let correct = if rel.is_zero() {
                i64::from(prec)
            } else {
                -rel.get_exp().map(i64::from).unwrap_or(0)
            };
            if correct >= target {
                return Ok(engine);
            }
            prec += (target - correct) as u32 + 64;
        }
        Self::with_prec(blocks, n, ctx, prec)
    }

    pub fn n(&self) -> usize {
        self.b_lu.len()
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    /// Runs the recurrence to `P_n` at `lambda`.
    pub fn state(&self, lambda: &Complex) -> MomentPolynomialState {
        let prec = self.prec;
        let n = self.n();
        let mut p_prev = mat4_identity(prec);
        let mut p_curr = self.b_lu[0].solve(&shifted_product(lambda, &self.a[0], &p_prev, prec));
        let mut scale_exp = 0i64;
        for k in 2..=n {
            let mut m = shifted_product(lambda, &self.a[k - 1], &p_curr, prec);
            m = mat4_sub(&m, &mat4_mul(&self.c[k - 2], &p_prev, prec), prec);
            let next = self.b_lu[k - 1].solve(&m);
            p_prev = p_curr;
            p_curr = next;
            if let Some(e) = mat4_max_exp(&p_curr) {
                if e.abs() > self.rescale_exp {
                    for z in p_curr.iter_mut().flatten().chain(p_prev.iter_mut().flatten()) {
                        *z >>= e;
                    }
                    scale_exp += e as i64;
                }
            }
        }
        MomentPolynomialState {
            p_prev,
            p_curr,
            scale_exp,
            index: n,
        }
    }

    pub fn det(&self, lambda: &Complex) -> DetP {
        let s = self.state(lambda);
        DetP {
            mantissa: mat4_det(&s.p_curr),
            scale_exp: s.scale_exp,
        }
    }
}

/// `(lambda I - A) P`.
fn shifted_product(lambda: &Complex, a: &Mat4, p: &Mat4, prec: u32) -> Mat4 {
    let mut out = mat4_mul(a, p, prec);
    for i in 0..4 {
        for j in 0..4 {
            let lp = Complex::with_val(prec, lambda * &p[i][j]);
            let neg = Complex::with_val(prec, -&out[i][j]);
            out[i][j].assign(neg + lp);
        }
    }
    out
}

/// `(det P_n(lambda) rescaled, log_scale)`.
pub fn det_p(blocks: &BlockTridiagonal, lambda: &Complex, n: usize, ctx: &PrecisionContext) -> Result<(Complex, Float)> {
    let engine = MomentEngine::calibrated(blocks, n, ctx, lambda)?;
    let d = engine.det(lambda);
    let log_scale = d.log_scale();
    Ok((d.mantissa, log_scale))
}

/// Newton iteration knobs.
#[derive(Clone, Debug)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    pub basin_radius: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: MAX_NEWTON_ITERATIONS,
            basin_radius: DEFAULT_BASIN_RADIUS,
        }
    }
}

fn newton<F>(
    f: F,
    lambda0: &Complex,
    prec: u32,
    ctx: &PrecisionContext,
    opts: &NewtonOptions,
) -> Result<(Complex, Float, usize)>
where
    F: Fn(&Complex) -> Result<DetP>,
{
    let rel_step = Float::with_val(prec, ctx.pow10(-(ctx.digits() as i32 / 2)));
    let mut lambda = Complex::with_val(prec, lambda0);
    for it in 1..=opts.max_iterations {
        let mag = Float::with_val(prec, lambda.abs_ref()) + 1u32;
        let h = Float::with_val(prec, &rel_step * &mag);
        let f0 = f(&lambda)?;
        if f0.mantissa.is_zero() {
            return Ok((Complex::with_val(ctx.prec(), &lambda), Float::new(ctx.prec()), it));
        }
        let fp = f(&Complex::with_val(prec, &lambda + &h))?;
        let fm = f(&Complex::with_val(prec, &lambda - &h))?;
        let denom = Complex::with_val(prec, fp.ratio(&f0) - fm.ratio(&f0));
        if denom.is_zero() {
            return Err(Error::NoConvergence { iterations: it });
        }
        let step = Complex::with_val(prec, Complex::with_val(prec, &h * 2u32) / &denom);
        lambda -= &step;
        let step_abs = Float::with_val(prec, step.abs_ref());
        let distance = Float::with_val(prec, Complex::with_val(prec, &lambda - lambda0).abs_ref());
        if distance > opts.basin_radius {
            return Err(Error::BasinEscape {
                distance: distance.to_f64(),
                radius: opts.basin_radius,
            });
        }
        let mag = Float::with_val(prec, lambda.abs_ref()) + 1u32;
        if step_abs < Float::with_val(prec, ctx.newton_tol() * &mag) {
            return Ok((Complex::with_val(ctx.prec(), &lambda), Float::with_val(ctx.prec(), &step_abs), it));
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
    })
}

/// Zero of `det P_n` near `lambda0`; a Rayleigh-Ritz upper-bound approximant.
pub fn find_eigenvalue(
    blocks: &BlockTridiagonal,
    lambda0: &Complex,
    n: usize,
    ctx: &PrecisionContext,
) -> Result<EigenvalueEstimate> {
    find_eigenvalue_with(blocks, lambda0, n, ctx, &NewtonOptions::default())
}

pub fn find_eigenvalue_with(
    blocks: &BlockTridiagonal,
    lambda0: &Complex,
    n: usize,
    ctx: &PrecisionContext,
    opts: &NewtonOptions,
) -> Result<EigenvalueEstimate> {
    let engine = MomentEngine::calibrated(blocks, n, ctx, lambda0)?;
    let (lambda, residual, iterations) = newton(|l| Ok(engine.det(l)), lambda0, engine.prec(), ctx, opts)?;
    Ok(EigenvalueEstimate {
        lambda,
        residual,
        bound: Bound::Upper,
        n_blocks: n,
        iterations,
    })
}

/// Zero of `det(P_n(lambda) - P_n(0) P_{n-1}(0)^{-1} P_{n-1}(lambda))` near
/// `lambda0`.
pub fn lower_bound_eigenvalue(
    blocks: &BlockTridiagonal,
    lambda0: &Complex,
    n: usize,
    ctx: &PrecisionContext,
) -> Result<EigenvalueEstimate> {
    if n < 2 {
        return Err(Error::SingularP { n });
    }
    let engine = MomentEngine::calibrated(blocks, n, ctx, lambda0)?;
    let prec = engine.prec();
    let at_zero = engine.state(&Complex::new(prec));
    let tiny = Float::with_val(prec, mat4_max_abs(&at_zero.p_prev, prec) * &ctx.epsilon());
    if tiny.is_zero() {
        return Err(Error::SingularP { n });
    }
    // P_n(0) P_{n-1}(0)^{-1} = (P_{n-1}(0)^{-T} P_n(0)^T)^T
    let lu_t = Lu4::new(&mat4_transpose(&at_zero.p_prev), &tiny).ok_or(Error::SingularP { n })?;
    let correction = mat4_transpose(&lu_t.solve(&mat4_transpose(&at_zero.p_curr)));
    let f = |l: &Complex| -> Result<DetP> {
        let s = engine.state(l);
        let q = mat4_sub(&s.p_curr, &mat4_mul(&correction, &s.p_prev, prec), prec);
        Ok(DetP {
            mantissa: mat4_det(&q),
            scale_exp: s.scale_exp,
        })
    };
    let (lambda, residual, iterations) = newton(f, lambda0, prec, ctx, &NewtonOptions::default())?;
    Ok(EigenvalueEstimate {
        lambda,
        residual,
        bound: Bound::Lower,
        n_blocks: n,
        iterations,
    })
}

/// All eigenvalues of the leading `4n x 4n` matrix by Hessenberg QR, sorted
/// by real part, then imaginary part.
pub fn dense_eigensolve_oracle(blocks: &BlockTridiagonal, n: usize) -> Result<Vec<Complex>> {
    if 4 * n > ORACLE_MAX_DIM {
        return Err(Error::OracleTooLarge { size: 4 * n });
    }
    if n == 0 || n > blocks.n_blocks() {
        return Err(Error::SizeMismatch {
            needed: n,
            available: blocks.n_blocks(),
        });
    }
    blocks.to_dense(n).eigenvalues()
}

/// Eigenvalues of a diagonal block matrix (the harmonic limit, where every
/// `B_k` vanishes and the moment recurrence is undefined). Off-diagonal
/// entries must be at rounding level relative to the diagonal.
pub fn diagonal_path_eigenvalues(blocks: &BlockTridiagonal, n: usize, ctx: &PrecisionContext) -> Result<Vec<Complex>> {
    if n == 0 || n > blocks.n_blocks() {
        return Err(Error::SizeMismatch {
            needed: n,
            available: blocks.n_blocks(),
        });
    }
    let prec = ctx.prec();
    let scale = blocks.a[..n].iter().map(|a| mat4_max_abs(a, prec)).fold(Float::new(prec), |m, v| m.max(&v));
    let tol = Float::with_val(prec, scale * &ctx.epsilon()) * 100u32;
    let small = |z: &Complex| Float::with_val(prec, z.abs_ref()) <= tol;
    let mut out = Vec::with_capacity(4 * n);
    for blk in 0..n {
        for i in 0..4 {
            for k in 0..4 {
                let off_diag = (i != k && !small(&blocks.a[blk][i][k]))
                    || (blk + 1 < n && (!small(&blocks.b[blk][i][k]) || !small(&blocks.c[blk][i][k])));
                if off_diag {
                    return Err(Error::InvalidParameter("block matrix is not diagonal".into()));
                }
            }
            out.push(blocks.a[blk][i][i].clone());
        }
    }
    out.sort_by(|a, b| {
        a.real()
            .partial_cmp(b.real())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.imag().partial_cmp(b.imag()).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct StabilizationResult {
    pub value: Complex,
    /// Minimal `|E(N_{j+1}) - E(N_j)|` over the scan.
    pub flatness: Float,
    pub n_blocks: usize,
    pub values: Vec<(usize, Complex)>,
}

/// Tracks one eigenvalue of a (possibly unbounded-below) operator across
/// truncations and reads it where it is most stationary. Sizes are block
/// counts; `seed` starts the continuation at the first size.
pub fn stabilization_scan(
    op: &QuarticOperator,
    sigma: &Float,
    block_counts: &[usize],
    seed: &Complex,
    threshold: f64,
    ctx: &PrecisionContext,
) -> Result<StabilizationResult> {
    if block_counts.len() < 2 {
        return Err(Error::NoPlateau {
            min_step: f64::INFINITY,
            threshold,
        });
    }
    let max_blocks = *block_counts.iter().max().unwrap_or(&0);
    let mats = BasisMatrices::new(sigma, 4 * max_blocks + 4, ctx);
    let blocks = assemble_from_matrices(op, &mats, max_blocks)?;
    let mut values = Vec::with_capacity(block_counts.len());
    let mut current = Complex::with_val(ctx.prec(), seed);
    for &n in block_counts {
        let est = find_eigenvalue(&blocks, &current, n, ctx)?;
        current = est.lambda.clone();
        values.push((n, est.lambda));
    }
    let prec = ctx.prec();
    let mut best: Option<(Float, usize)> = None;
    for j in 0..values.len() - 1 {
        let d = Float::with_val(prec, Complex::with_val(prec, &values[j + 1].1 - &values[j].1).abs_ref());
        if best.as_ref().map_or(true, |(b, _)| d < *b) {
            best = Some((d, j + 1));
        }
    }
    let (flatness, at) = best.expect("at least two sizes");
    if flatness > threshold {
        return Err(Error::NoPlateau {
            min_step: flatness.to_f64(),
            threshold,
        });
    }
    Ok(StabilizationResult {
        value: values[at].1.clone(),
        flatness,
        n_blocks: values[at].0,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite_basis::BasisSpec;
    use crate::linalg::mat4_zero;
    use crate::operator_builder::assemble_blocks;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(40).unwrap()
    }

    fn diag_blocks(c: &PrecisionContext, n: usize, coupling: f64) -> BlockTridiagonal {
        let prec = c.prec();
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut cc = Vec::new();
        for blk in 0..n {
            let mut m = mat4_zero(prec);
            for i in 0..4 {
                m[i][i] = c.complex((2 * (4 * blk + i) + 1) as f64, 0.0);
            }
            a.push(m);
            let mut bb = mat4_zero(prec);
            for i in 0..4 {
                bb[i][i] = c.complex(coupling, 0.0);
            }
            b.push(bb);
            cc.push(mat4_zero(prec));
        }
        BlockTridiagonal::from_blocks(a, b, cc).unwrap()
    }

    fn random_symmetric(c: &PrecisionContext, n: usize, seed: u64) -> BlockTridiagonal {
        let prec = c.prec();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut cc = Vec::new();
        for blk in 0..n {
            let mut m = mat4_zero(prec);
            for i in 0..4 {
                for k in i..4 {
                    let v = if i == k {
                        (4 * blk + i) as f64 + rng.gen_range(0.0..1.0)
                    } else {
                        rng.gen_range(-0.3..0.3)
                    };
                    m[i][k] = c.complex(v, 0.0);
                    m[k][i] = c.complex(v, 0.0);
                }
            }
            a.push(m);
            let mut bb = mat4_zero(prec);
            for i in 0..4 {
                for k in 0..=i {
                    let v = if i == k { rng.gen_range(0.2..0.5) } else { rng.gen_range(-0.2..0.2) };
                    bb[i][k] = c.complex(v, 0.0);
                }
            }
            cc.push(mat4_transpose(&bb));
            b.push(bb);
        }
        BlockTridiagonal::from_blocks(a, b, cc).unwrap()
    }

    fn dist(a: &Complex, b: &Complex) -> f64 {
        Complex::with_val(a.prec().0, a - b).abs().real().to_f64()
    }

    #[test]
    fn single_block_zero() {
        let c = ctx();
        let blocks = diag_blocks(&c, 1, 1.0);
        let (d, _) = det_p(&blocks, &c.complex(3.0, 0.0), 1, &c).unwrap();
        assert!(d.is_zero());
        let (d, _) = det_p(&blocks, &c.complex(2.0, 0.0), 1, &c).unwrap();
        // (2-1)(2-3)(2-5)(2-7) = -15
        assert!(dist(&d, &c.complex(-15.0, 0.0)) < 1e-40);
    }

    #[test]
    fn second_step_matches_expanded_formula() {
        let c = ctx();
        let prec = c.prec();
        let blocks = random_symmetric(&c, 3, 7);
        let lambda = c.complex(1.3, 0.2);
        let engine = MomentEngine::new(&blocks, 2, &c).unwrap();
        let s = engine.state(&lambda);
        let tiny = c.epsilon();
        let b0 = Lu4::new(&blocks.b[0], &tiny).unwrap();
        let b1 = Lu4::new(&blocks.b[1], &tiny).unwrap();
        let id = mat4_identity(prec);
        let p1 = b0.solve(&shifted_product(&lambda, &blocks.a[0], &id, prec));
        let inner = mat4_sub(&shifted_product(&lambda, &blocks.a[1], &p1, prec), &blocks.c[0], prec);
        let p2 = b1.solve(&inner);
        for i in 0..4 {
            for k in 0..4 {
                assert!(dist(&s.p_curr[i][k], &p2[i][k]) < 1e-35);
            }
        }
    }

    #[test]
    fn singular_b_is_reported() {
        let c = ctx();
        let blocks = diag_blocks(&c, 2, 0.0);
        assert!(matches!(
            det_p(&blocks, &c.complex(1.0, 0.0), 2, &c),
            Err(Error::SingularB { block: 0 })
        ));
    }

    #[test]
    fn newton_zeros_match_dense_oracle() {
        let c = ctx();
        let blocks = random_symmetric(&c, 3, 11);
        let dense = dense_eigensolve_oracle(&blocks, 3).unwrap();
        assert_eq!(dense.len(), 12);
        for ev in &dense {
            let seed = Complex::with_val(c.prec(), ev + 1e-3);
            let est = find_eigenvalue(&blocks, &seed, 3, &c).unwrap();
            assert!(dist(&est.lambda, ev) < 1e-28, "{} vs {}", est.lambda, ev);
            assert_eq!(est.bound, Bound::Upper);
        }
    }

    #[test]
    fn diagonal_lower_bound_is_exact() {
        let c = ctx();
        let blocks = diag_blocks(&c, 3, 0.5);
        for level in [0usize, 3, 5] {
            let target = (2 * level + 1) as f64;
            let seed = c.complex(target + 0.2, 0.0);
            let up = find_eigenvalue(&blocks, &seed, 3, &c).unwrap();
            let lo = lower_bound_eigenvalue(&blocks, &seed, 3, &c).unwrap();
            assert!(dist(&up.lambda, &c.complex(target, 0.0)) < 1e-30);
            assert!(dist(&lo.lambda, &c.complex(target, 0.0)) < 1e-30);
        }
    }

    #[test]
    fn oracle_size_cap() {
        let c = ctx();
        let blocks = diag_blocks(&c, 17, 1.0);
        assert!(matches!(
            dense_eigensolve_oracle(&blocks, 17),
            Err(Error::OracleTooLarge { size: 68 })
        ));
    }

    #[test]
    fn rescaling_is_transparent() {
        let c = ctx();
        let blocks = random_symmetric(&c, 12, 3);
        let lambda = c.complex(40.5, 0.3);
        let a = MomentEngine::new(&blocks, 12, &c).unwrap().det(&lambda);
        let c2 = ctx().with_det_rescale_threshold(c.real(1e6));
        let b = MomentEngine::new(&blocks, 12, &c2).unwrap().det(&lambda);
        assert!(b.scale_exp != 0);
        let diff = Float::with_val(c.prec(), a.log_abs() - b.log_abs());
        assert!(diff.abs().to_f64() < 1e-35);
    }

    #[test]
    fn harmonic_diagonal_path() {
        let c = ctx();
        let basis = BasisSpec::new(c.real(1.0), 40).unwrap();
        let blocks = assemble_blocks(&QuarticOperator::harmonic(&c), &basis, 10, &c).unwrap();
        assert!(matches!(
            MomentEngine::new(&blocks, 10, &c),
            Err(Error::SingularB { .. })
        ));
        let levels = diagonal_path_eigenvalues(&blocks, 10, &c).unwrap();
        for (k, l) in levels.iter().enumerate() {
            assert!(dist(l, &c.complex((2 * k + 1) as f64, 0.0)) < 1e-40);
        }
    }

    #[test]
    fn plateau_needs_two_sizes() {
        let c = ctx();
        let op = QuarticOperator::harmonic(&c);
        assert!(matches!(
            stabilization_scan(&op, &c.real(1.0), &[4], &c.complex(1.0, 0.0), 1e-8, &c),
            Err(Error::NoPlateau { .. })
        ));
    }

    #[test]
    fn tiny_quartic_plateau() {
        let c = ctx();
        let mut op = QuarticOperator::harmonic(&c);
        op.coeffs_mut()[4] = c.complex(-1e-10, 0.0);
        let r = stabilization_scan(&op, &c.real(1.0), &[4, 6, 8, 10], &c.complex(1.0, 0.0), 1e-8, &c).unwrap();
        assert!((r.value.real().to_f64() - 1.0).abs() < 1e-8);
    }
}
