//! Derived quantities: the `Lambda` tunnelling gap, the `kappa`/`delta`
//! ratios and their fits, spinor reconstruction, Stokes sectors and the WKB
//! action.

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Complex, Float};

use crate::error::{Error, Result};
use crate::hermite_basis::{BasisMatrices, BasisSpec};
use crate::linalg::{vec_norm, BandedSystem};
use crate::level_solver::{LevelResult, SolverConfig};
use crate::moment_solver::find_eigenvalue_with;
use crate::operator_builder::{
    assemble_from_matrices, resolve_operator, Branch, Frame, ModelParams, QuarticOperator, Variant,
};
use crate::scalars::PrecisionContext;

/// `Lambda = -ln(E_t0 - Re E_d0)` together with `-2 ln Im E_d0`.
#[derive(Clone, Debug)]
pub struct LambdaGap {
    pub lambda: Float,
    pub comparison: Float,
}

impl LambdaGap {
    pub fn ratio(&self) -> Float {
        Float::with_val(self.lambda.prec(), &self.lambda / &self.comparison)
    }
}

pub fn lambda_gap(e_t0: &Float, e_d0: &Complex) -> Result<LambdaGap> {
    let prec = e_t0.prec().max(e_d0.prec().0);
    let gap = Float::with_val(prec, e_t0 - e_d0.real());
    let im = e_d0.imag();
    if !(im.is_finite() && *im > 0) {
        return Err(Error::Domain(format!("Im E_d0 must be positive, got {}", im.to_f64())));
    }
    if !(gap.is_finite() && gap > 0) {
        // The gap scales like Im(E_d0)^2.
        let needed = (-2.0 * log10(im)).ceil() as i64 + 2;
        let carried = (f64::from(prec) * std::f64::consts::LOG10_2).floor() as i64;
        return Err(Error::NonpositiveGap(format!(
            "difference {} resolved with {carried} digits; about {needed} digits are needed",
            gap.to_f64()
        )));
    }
    let lambda = -gap.ln();
    let comparison = -Float::with_val(prec, im.ln_ref()) * 2u32;
    Ok(LambdaGap { lambda, comparison })
}

fn log10(x: &Float) -> f64 {
    let (m, e) = x.to_f64_exp();
    m.abs().log10() + f64::from(e) * std::f64::consts::LOG10_2
}

fn same_omega(a: &Float, b: &Float) -> bool {
    let prec = a.prec().min(b.prec());
    let diff = Float::with_val(prec, a - b).abs();
    let tol = Float::with_val(prec, b.abs_ref()) >> (prec as i32 - 8);
    diff <= tol
}

fn pick<'a>(levels: &'a [LevelResult], n: usize, omega: &Float, label: &str) -> Result<&'a LevelResult> {
    levels
        .iter()
        .find(|l| l.n == n && same_omega(&l.omega, omega))
        .ok_or_else(|| Error::MissingLevels(format!("{label} level {n} at omega = {}", omega.to_f64())))
}

/// `kappa = (E_t0 - E_r0) / Omega` and
/// `delta = ((E_t1 - E_t0) - (E_r1 - E_r0)) / Omega`.
pub fn kappa_delta(levels_t: &[LevelResult], levels_r: &[LevelResult], omega: &Float) -> Result<(Float, Float)> {
    let prec = omega.prec();
    let t0 = pick(levels_t, 0, omega, "translated")?.energy.real();
    let t1 = pick(levels_t, 1, omega, "translated")?.energy.real();
    let r0 = pick(levels_r, 0, omega, "real")?.energy.real();
    let r1 = pick(levels_r, 1, omega, "real")?.energy.real();
    let kappa = Float::with_val(prec, t0 - r0) / omega;
    let dt = Float::with_val(prec, t1 - t0);
    let dr = Float::with_val(prec, r1 - r0);
    let delta = (dt - dr) / omega;
    Ok((kappa, delta))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineFit {
    pub intercept: Float,
    pub slope: Float,
}

/// Unweighted least-squares line through `(xs, ys)`.
pub fn least_squares_line(xs: &[Float], ys: &[Float]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidParameter(format!(
            "fit needs paired data, got {} x and {} y values",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidParameter("fit needs at least two points".into()));
    }
    let prec = xs[0].prec();
    let n = xs.len() as u32;
    let mut sx = Float::new(prec);
    let mut sy = Float::new(prec);
    for (x, y) in xs.iter().zip(ys) {
        sx += x;
        sy += y;
    }
    let mx = sx / n;
    let my = sy / n;
    let mut sxx = Float::new(prec);
    let mut sxy = Float::new(prec);
    for (x, y) in xs.iter().zip(ys) {
        let dx = Float::with_val(prec, x - &mx);
        let dy = Float::with_val(prec, y - &my);
        sxx += Float::with_val(prec, &dx * &dx);
        sxy += dx * dy;
    }
    if sxx.is_zero() {
        return Err(Error::InvalidParameter("fit abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - Float::with_val(prec, &slope * &mx);
    Ok(LineFit { intercept, slope })
}

/// Value at `x` of the interpolating polynomial through all nodes.
pub fn lagrange_extrapolate(xs: &[Float], ys: &[Float], x: &Float) -> Result<Float> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::InvalidParameter("interpolation needs paired, nonempty data".into()));
    }
    let prec = x.prec();
    let mut acc = Float::new(prec);
    for (i, (xi, yi)) in xs.iter().zip(ys).enumerate() {
        let mut w = Float::with_val(prec, yi);
        for (j, xj) in xs.iter().enumerate() {
            if i == j {
                continue;
            }
            let den = Float::with_val(prec, xi - xj);
            if den.is_zero() {
                return Err(Error::InvalidParameter("interpolation nodes must be distinct".into()));
            }
            w *= Float::with_val(prec, x - xj) / den;
        }
        acc += w;
    }
    Ok(acc)
}

/// One row of derived quantities at a single `Omega`.
#[derive(Clone, Debug)]
pub struct DiagnosticsRecord {
    pub omega: Float,
    pub lambda: Float,
    pub comparison: Float,
    pub ratio_lambda: Float,
    pub kappa: Float,
    pub delta: Float,
    pub fit_kappa: Option<LineFit>,
}

impl DiagnosticsRecord {
    pub fn new(
        omega: &Float,
        levels_t: &[LevelResult],
        levels_r: &[LevelResult],
        e_d0: &Complex,
    ) -> Result<Self> {
        let t0 = pick(levels_t, 0, omega, "translated")?;
        let gap = lambda_gap(t0.energy.real(), e_d0)?;
        let (kappa, delta) = kappa_delta(levels_t, levels_r, omega)?;
        Ok(Self {
            omega: omega.clone(),
            ratio_lambda: gap.ratio(),
            lambda: gap.lambda,
            comparison: gap.comparison,
            kappa,
            delta,
            fit_kappa: None,
        })
    }
}

/// Fits `kappa(Omega)` over all records and stores the fit on each one.
/// Returns `None` (and leaves the records untouched) for fewer than two
/// distinct `Omega`.
pub fn attach_kappa_fit(records: &mut [DiagnosticsRecord]) -> Option<LineFit> {
    let xs: Vec<Float> = records.iter().map(|r| r.omega.clone()).collect();
    let ys: Vec<Float> = records.iter().map(|r| r.kappa.clone()).collect();
    let fit = least_squares_line(&xs, &ys).ok()?;
    for r in records.iter_mut() {
        r.fit_kappa = Some(fit.clone());
    }
    Some(fit)
}

/// Limit `Omega -> 0` of `Lambda / (-2 ln Im E_d0)` by polynomial
/// interpolation through every record.
pub fn ratio_limit(records: &[DiagnosticsRecord]) -> Result<Float> {
    let xs: Vec<Float> = records.iter().map(|r| r.omega.clone()).collect();
    let ys: Vec<Float> = records.iter().map(|r| r.ratio_lambda.clone()).collect();
    let prec = xs.first().map(|x| x.prec()).unwrap_or(64);
    lagrange_extrapolate(&xs, &ys, &Float::new(prec))
}

/// Upper and lower Dirac components in the oscillator basis and the
/// combinations `X1 = (psi+ + i psi-)/sqrt2`, `X2 = (psi+ - i psi-)/(i sqrt2)`.
#[derive(Clone, Debug)]
pub struct SpinorReconstruction {
    pub psi_plus: Vec<Complex>,
    pub psi_minus: Vec<Complex>,
    pub x1: Vec<Complex>,
    pub x2: Vec<Complex>,
    pub x1_norm: Float,
    pub x2_norm: Float,
    /// `||psi+ - i conj(psi-)||` after the global phase is fixed.
    pub pt_pair_residual: Float,
    /// `||(H - lambda) psi+||` of the input vector.
    pub eigen_residual: Float,
}

fn dot_conj(a: &[Complex], b: &[Complex], prec: u32) -> Complex {
    let mut acc = Complex::new(prec);
    for (x, y) in a.iter().zip(b) {
        acc += Complex::with_val(prec, x.conj_ref()) * y;
    }
    acc
}

fn banded_apply(op: &QuarticOperator, mats: &BasisMatrices, v: &[Complex], prec: u32) -> Vec<Complex> {
    let h = mats.operator_matrix(op);
    let n = v.len();
    (0..n)
        .map(|i| {
            let mut acc = Complex::new(prec);
            for k in i.saturating_sub(4)..(i + 5).min(n) {
                if let Some(e) = h.get_ref(i, k) {
                    acc += Complex::with_val(prec, e * &v[k]);
                }
            }
            acc
        })
        .collect()
}

fn check_spinor_params(params: &ModelParams) -> Result<()> {
    if params.variant != Variant::DiracTitchmarsh {
        return Err(Error::InvalidParameter("spinor reconstruction needs the Dirac operator".into()));
    }
    if params.branch != Branch::Plus {
        return Err(Error::InvalidParameter("spinor reconstruction starts from the + branch".into()));
    }
    if matches!(params.frame, Frame::Dilated { .. }) {
        return Err(Error::WrongFrame("spinor reconstruction takes the real or translated frame".into()));
    }
    Ok(())
}

/// Rebuilds `psi- = -2 sqrt(Omega) psi+' + i (2 Omega (E - x^2) + 1) psi+`
/// from the coefficients of `psi+` (with `x -> x + iy` in the translated
/// frame). The input must be an eigenvector of the truncated operator at
/// `lambda = E + Omega E^2` to within `10^-(digits - 15) (1 + |lambda|)`.
pub fn reconstruct_spinor(
    psi_plus: &[Complex],
    params: &ModelParams,
    basis: &BasisSpec,
    ctx: &PrecisionContext,
) -> Result<SpinorReconstruction> {
    check_spinor_params(params)?;
    params.validate()?;
    let size = basis.size();
    if psi_plus.len() != size {
        return Err(Error::SizeMismatch {
            needed: size,
            available: psi_plus.len(),
        });
    }
    let prec = ctx.prec();
    let norm = vec_norm(psi_plus);
    if norm.is_zero() {
        return Err(Error::InvalidParameter("zero input vector".into()));
    }
    let mut psi: Vec<Complex> = psi_plus.iter().map(|z| Complex::with_val(prec, z / &norm)).collect();

    let ext = size + 2;
    let mats = BasisMatrices::new(basis.sigma(), ext + 2, ctx);
    let op = resolve_operator(params, ctx)?;
    let energy = &params.energy;
    let lambda = Complex::with_val(prec, energy * Complex::with_val(prec, energy * &params.omega)) + energy;

    let h_mats = BasisMatrices::new(basis.sigma(), size, ctx);
    let hpsi = banded_apply(&op, &h_mats, &psi, prec);
    let resid: Vec<Complex> = hpsi
        .iter()
        .zip(&psi)
        .map(|(h, p)| Complex::with_val(prec, h - Complex::with_val(prec, &lambda * p)))
        .collect();
    let eigen_residual = vec_norm(&resid);
    let tol = Float::with_val(prec, ctx.pow10(-(ctx.digits() as i32 - 15)) * (Float::with_val(prec, lambda.abs_ref()) + 1u32));
    if eigen_residual > tol {
        return Err(Error::NotConverged {
            residual: eigen_residual.to_f64(),
            tolerance: tol.to_f64(),
        });
    }

    // psi- on the extended basis
    let shift = match &params.frame {
        Frame::Translated { y } => Complex::with_val(prec, (0, y)),
        _ => Complex::new(prec),
    };
    let sqrt_omega = Float::with_val(prec, params.omega.sqrt_ref());
    let two_omega = Float::with_val(prec, &params.omega * 2u32);
    let i_unit = Complex::with_val(prec, (0, 1));
    // i (2 Omega (E - z^2) + 1) with z = x + s:
    // constant, linear and quadratic coefficients in x
    let s2 = Complex::with_val(prec, &shift * &shift);
    let c0 = {
        let t = Complex::with_val(prec, energy - &s2) * &two_omega + 1u32;
        Complex::with_val(prec, &i_unit * &t)
    };
    let c1 = Complex::with_val(prec, &i_unit * Complex::with_val(prec, &shift * &two_omega)) * -2i32;
    let c2 = Complex::with_val(prec, &i_unit * &two_omega) * -1i32;
    let mut minus = vec![Complex::new(prec); ext];
    for (k, pk) in psi.iter().enumerate() {
        if pk.is_zero() {
            continue;
        }
        for i in k.saturating_sub(2)..=(k + 2).min(ext - 1) {
            let mut coef = Complex::with_val(prec, &c2 * mats.power(2, i, k));
            if !c1.is_zero() {
                coef += Complex::with_val(prec, &c1 * mats.power(1, i, k));
            }
            if i == k {
                coef += &c0;
            }
            minus[i] += Complex::with_val(prec, &coef * pk);
        }
    }
    let deriv = mats.derivative_matrix();
    for (k, pk) in psi.iter().enumerate() {
        for i in k.saturating_sub(1)..=(k + 1).min(ext - 1) {
            if let Some(d) = deriv.get_ref(i, k) {
                if !d.is_zero() {
                    let t = Complex::with_val(prec, d * pk) * &sqrt_omega * 2u32;
                    minus[i] -= t;
                }
            }
        }
    }
    psi.resize(ext, Complex::new(prec));

    // Global phase a with a psi+ = i conj(a psi-) as closely as possible.
    let conj_minus: Vec<Complex> = minus.iter().map(|z| Complex::with_val(prec, z.conj_ref())).collect();
    let c = dot_conj(&psi, &conj_minus, prec);
    if !c.is_zero() {
        // e^{-2i phi} = -i |c| / c
        let unit = Complex::with_val(prec, &c / Float::with_val(prec, c.abs_ref()));
        let target = Complex::with_val(prec, Complex::with_val(prec, (0, -1)) / unit);
        let phase = target.conj().sqrt();
        for z in psi.iter_mut() {
            *z *= &phase;
        }
        for z in minus.iter_mut() {
            *z *= &phase;
        }
    }

    let root2 = Float::with_val(prec, 2u32).sqrt();
    let mut x1 = Vec::with_capacity(ext);
    let mut x2 = Vec::with_capacity(ext);
    let mut pair = Vec::with_capacity(ext);
    for (p, m) in psi.iter().zip(&minus) {
        let im = Complex::with_val(prec, &i_unit * m);
        x1.push(Complex::with_val(prec, p + &im) / &root2);
        let d = Complex::with_val(prec, p - &im);
        x2.push(Complex::with_val(prec, d / &i_unit) / &root2);
        let ic = Complex::with_val(prec, &i_unit * Complex::with_val(prec, m.conj_ref()));
        pair.push(Complex::with_val(prec, p - ic));
    }
    let x1_norm = vec_norm(&x1);
    let x2_norm = vec_norm(&x2);
    let pt_pair_residual = vec_norm(&pair);
    Ok(SpinorReconstruction {
        psi_plus: psi,
        psi_minus: minus,
        x1,
        x2,
        x1_norm,
        x2_norm,
        pt_pair_residual,
        eigen_residual,
    })
}

/// Eigenvector of the `4 n_blocks` truncation of `op` at its eigenvalue
/// `lambda`, by one step of inverse iteration at full precision.
pub fn inverse_iteration(
    op: &QuarticOperator,
    basis: &BasisSpec,
    lambda: &Complex,
    ctx: &PrecisionContext,
) -> Result<Vec<Complex>> {
    let prec = ctx.prec();
    let size = basis.size();
    let mats = BasisMatrices::new(basis.sigma(), size, ctx);
    let h = mats.operator_matrix(op);
    let build = |shift: &Complex| {
        let mut sys = BandedSystem::new(size, 4, 4, prec);
        for i in 0..size {
            for k in i.saturating_sub(4)..(i + 5).min(size) {
                let mut v = h.get(i, k);
                if i == k {
                    v -= shift;
                }
                sys.set(i, k, &v);
            }
        }
        sys
    };
    let rhs: Vec<Complex> = (0..size)
        .map(|k| Complex::with_val(prec, (1.0 / (k as f64 + 1.0), 0)))
        .collect();
    let x = match build(lambda).solve(&rhs) {
        Ok(x) => x,
        Err(_) => {
            let nudge = Float::with_val(prec, ctx.epsilon() * (Float::with_val(prec, lambda.abs_ref()) + 1u32));
            build(&Complex::with_val(prec, lambda + &nudge)).solve(&rhs)?
        }
    };
    let norm = vec_norm(&x);
    Ok(x.into_iter().map(|z| z / &norm).collect())
}

/// Spinor of a converged real or translated level: `psi+` is taken from the
/// real-frame truncation at the level's energy, continued from its `lambda`.
pub fn spinor_for_level(level: &LevelResult, cfg: &SolverConfig) -> Result<SpinorReconstruction> {
    let ctx = &cfg.ctx;
    let prec = ctx.prec();
    let energy = Complex::with_val(prec, level.energy.real());
    let params = ModelParams::new(
        Float::with_val(prec, &level.omega),
        energy,
        Variant::DiracTitchmarsh,
        Branch::Plus,
        Frame::Real,
    );
    let op = resolve_operator(&params, ctx)?;
    let basis = BasisSpec::new(Float::with_val(prec, &cfg.sigma), 4 * cfg.n_blocks)?;
    let mats = BasisMatrices::new(&cfg.sigma, 4 * cfg.n_blocks + 4, ctx);
    let blocks = assemble_from_matrices(&op, &mats, cfg.n_blocks)?;
    let est = find_eigenvalue_with(&blocks, &level.lambda, cfg.n_blocks, ctx, &cfg.newton)?;
    let v = inverse_iteration(&op, &basis, &est.lambda, ctx)?;
    reconstruct_spinor(&v, &params, &basis, ctx)
}

/// Stokes sector `S_j = {|phi - j pi/3| < pi/6}` of the angle of `ix`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sector {
    Index(i32),
    Boundary,
}

pub fn sector_of(phi: f64) -> Sector {
    use std::f64::consts::PI;
    let mut p = phi;
    while p <= -5.0 * PI / 6.0 {
        p += 2.0 * PI;
    }
    while p > 7.0 * PI / 6.0 {
        p -= 2.0 * PI;
    }
    let s = p / (PI / 3.0);
    let j = s.round();
    let edge = (s - j).abs();
    if (edge - 0.5).abs() < 1e-12 {
        return Sector::Boundary;
    }
    Sector::Index(j as i32)
}

/// WKB action `S(x) = int^x sqrt(Omega y^4 - (1 + 2 E Omega) y^2) dy` from the
/// turning point, with its large-`x` form.
#[derive(Clone, Debug)]
pub struct ActionValue {
    pub integral: Float,
    pub asymptotic: Float,
}

pub fn action_s(x: &Float, omega: &Float, energy: &Float) -> Result<ActionValue> {
    let prec = x.prec().max(omega.prec());
    if !(omega.is_finite() && *omega > 0) {
        return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
    }
    let a = Float::with_val(prec, energy * omega) * 2u32 + 1u32;
    if a <= 0 {
        return Err(Error::Domain("1 + 2 E Omega must be positive".into()));
    }
    let turning = Float::with_val(prec, &a / omega).sqrt();
    let ax = Float::with_val(prec, x.abs_ref());
    if ax <= turning {
        return Err(Error::Domain(format!(
            "|x| = {} lies inside the allowed region (turning point {})",
            ax.to_f64(),
            turning.to_f64()
        )));
    }
    let len = Float::with_val(prec, &ax - &turning);
    // integrand in terms of the distance t from the turning point
    let f = |t: &Float| -> Float {
        let y = Float::with_val(prec, &turning + t);
        let inner = Float::with_val(prec, t * Float::with_val(prec, &y + &turning)) * omega;
        inner.sqrt() * y
    };
    let mut integral = tanh_sinh(&f, &len, prec)?;
    let sq = Float::with_val(prec, omega.sqrt_ref());
    let cube = Float::with_val(prec, ax.clone().pow(3u32));
    let mut asymptotic = Float::with_val(prec, &sq * &cube) / 3u32
        - Float::with_val(prec, &a * &ax) / Float::with_val(prec, &sq * 2u32);
    if x.is_sign_negative() {
        integral = -integral;
        asymptotic = -asymptotic;
    }
    Ok(ActionValue { integral, asymptotic })
}

/// `int_0^len f(t) dt` by tanh-sinh quadrature, halving the step until two
/// levels agree to working precision. Nodes near `t = 0` are formed without
/// cancellation, so integrable endpoint singularities there are harmless.
fn tanh_sinh<F: Fn(&Float) -> Float>(f: &F, len: &Float, prec: u32) -> Result<Float> {
    const MAX_LEVELS: usize = 14;
    let half = Float::with_val(prec, len / 2u32);
    let half_pi = Float::with_val(prec, Constant::Pi) / 2u32;
    let tol = Float::with_val(prec, 1u32) >> (prec as i32 - 24);
    let u_max = (f64::from(prec) * std::f64::consts::LN_2 / std::f64::consts::PI).asinh() + 1.0;

    let term = |u: &Float| -> Float {
        let su = Float::with_val(prec, u.sinh_ref()) * &half_pi;
        let cu = Float::with_val(prec, u.cosh_ref()) * &half_pi;
        let ch = Float::with_val(prec, su.cosh_ref());
        let w = Float::with_val(prec, &half * &cu) / Float::with_val(prec, &ch * &ch);
        // half (1 + tanh su) = len e^{2su} / (1 + e^{2su})
        let e = (Float::with_val(prec, su.abs_ref()) * -2i32).exp();
        let small = Float::with_val(prec, len * &e) / Float::with_val(prec, &e + 1u32);
        let t = if su.is_sign_negative() {
            small
        } else {
            Float::with_val(prec, len - &small)
        };
        if w.is_zero() || t.is_zero() {
            return Float::new(prec);
        }
        f(&t) * w
    };

    let mut h = Float::with_val(prec, 1u32);
    let mut sum = term(&Float::new(prec));
    let mut prev: Option<Float> = None;
    for level in 0..MAX_LEVELS {
        let stride = if level == 0 { 1 } else { 2 };
        let count = (u_max / h.to_f64()).ceil() as u64;
        let mut k = 1u64;
        while k <= count {
            let u = Float::with_val(prec, &h * k);
            sum += term(&u);
            sum += term(&Float::with_val(prec, -&u));
            k += stride;
        }
        let est = Float::with_val(prec, &sum * &h);
        if let Some(p) = &prev {
            let diff = Float::with_val(prec, &est - p).abs();
            if diff <= Float::with_val(prec, est.abs_ref()) * &tol {
                return Ok(est);
            }
        }
        prev = Some(est);
        h >>= 1;
    }
    Err(Error::NoConvergence { iterations: MAX_LEVELS })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level_solver::solve_level;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(40).unwrap()
    }

    #[test]
    fn gap_of_ten_to_minus_ten() {
        let c = ctx();
        let e_t = c.parse_real("1.0000000001").unwrap();
        let e_d = c.complex_from(&c.real(1.0), &c.parse_real("1e-5").unwrap());
        let g = lambda_gap(&e_t, &e_d).unwrap();
        assert!((g.lambda.to_f64() - 10.0 * 10f64.ln()).abs() < 1e-9);
        assert!((g.comparison.to_f64() - g.lambda.to_f64()).abs() < 1e-9);
        assert!((g.ratio().to_f64() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn comparison_value_for_table_imaginary_part() {
        let c = ctx();
        let e_d = c.complex_from(&c.real(1.0), &c.parse_real("5.364e-58").unwrap());
        let g = lambda_gap(&c.real(1.5), &e_d).unwrap();
        let oracle = -2.0 * 5.364e-58f64.ln();
        assert!((g.comparison.to_f64() - oracle).abs() < 1e-9);
        assert!((g.comparison.to_f64() - 263.7).abs() < 0.05);
    }

    #[test]
    fn nonpositive_gap_reports_shortfall() {
        let c = ctx();
        let e_d = c.complex_from(&c.real(1.0), &c.parse_real("1e-60").unwrap());
        match lambda_gap(&c.real(1.0), &e_d) {
            Err(Error::NonpositiveGap(msg)) => assert!(msg.contains("122 digits"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let c = ctx();
        let xs: Vec<Float> = (0..5).map(|k| c.real(0.002 + 0.00075 * k as f64)).collect();
        let ys: Vec<Float> = xs
            .iter()
            .map(|x| Float::with_val(c.prec(), x * c.real(0.0285)) + c.real(0.99995))
            .collect();
        let fit = least_squares_line(&xs, &ys).unwrap();
        assert!((fit.slope.to_f64() - 0.0285).abs() < 1e-12);
        assert!((fit.intercept.to_f64() - 0.99995).abs() < 1e-12);
        assert!(least_squares_line(&xs[..1], &ys[..1]).is_err());
    }

    #[test]
    fn quartic_lagrange_is_exact_on_quartics() {
        let c = ctx();
        let poly = |x: f64| 0.999885 + 2.0 * x - 30.0 * x * x + 400.0 * x.powi(3) - 7000.0 * x.powi(4);
        let xs: Vec<Float> = (0..5).map(|k| c.real(0.003 + 0.0005 * k as f64)).collect();
        let ys: Vec<Float> = xs.iter().map(|x| c.real(poly(x.to_f64()))).collect();
        let v = lagrange_extrapolate(&xs, &ys, &c.real(0.0)).unwrap();
        assert!((v.to_f64() - 0.999885).abs() < 1e-9);
    }

    #[test]
    fn sectors() {
        use std::f64::consts::PI;
        assert_eq!(sector_of(0.0), Sector::Index(0));
        assert_eq!(sector_of(PI / 3.0), Sector::Index(1));
        assert_eq!(sector_of(PI / 6.0), Sector::Boundary);
        assert_eq!(sector_of(PI), Sector::Index(3));
        assert_eq!(sector_of(-2.0 * PI / 3.0), Sector::Index(-2));
        assert_eq!(sector_of(2.0 * PI), Sector::Index(0));
    }

    #[test]
    fn action_asymptotic_form_and_closed_form() {
        let c = ctx();
        let (om, e) = (c.real(0.25), c.real(0.0));
        let v = action_s(&c.real(10.0), &om, &e).unwrap();
        assert!((v.asymptotic.to_f64() - (500.0 / 3.0 - 10.0)).abs() < 1e-12);
        // (Omega x^2 - a)^{3/2} / (3 Omega)
        let exact = (0.25f64 * 100.0 - 1.0).powf(1.5) / 0.75;
        assert!((v.integral.to_f64() - exact).abs() < 1e-10 * exact);
        assert!(action_s(&c.real(1.0), &om, &e).is_err());
        let neg = action_s(&c.real(-10.0), &om, &e).unwrap();
        assert_eq!(neg.integral, -v.integral);
    }

    #[test]
    fn spinor_at_small_omega() {
        let c = ctx();
        let cfg = SolverConfig::new(c.clone(), 20);
        let level = solve_level(&c.real(0.002), 0, &Frame::Translated { y: c.real(2.0) }, &cfg).unwrap();
        let s = spinor_for_level(&level, &cfg).unwrap();
        let ratio = Float::with_val(c.prec(), &s.x1_norm / &s.x2_norm);
        assert!(ratio < 0.1);
        assert!(s.pt_pair_residual < c.pow10(-25));
    }
}
