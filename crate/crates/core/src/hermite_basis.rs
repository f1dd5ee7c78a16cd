//! Matrix elements in the orthonormal eigenbasis of `H0 = p^2 + sigma^2 x^2`.
//!
//! The basis functions are `psi_k(x) = (sigma/pi)^(1/4) / sqrt(2^k k!)
//! H_k(sqrt(sigma) x) exp(-sigma x^2 / 2)`, so that in ladder form
//! `x = (a + a^+) / sqrt(2 sigma)` and `d/dx = sqrt(sigma/2) (a - a^+)`.
//! Powers of `x` are produced by iterating the single-step ladder action,
//! never from closed forms.
//!
//! Derivative convention: `(d/dx) psi_k = sqrt(sigma/2) (sqrt(k) psi_{k-1} -
//! sqrt(k+1) psi_{k+1})`.

use std::collections::BTreeMap;

use rug::{Assign, Complex, Float};

use crate::error::{Error, Result};
use crate::operator_builder::QuarticOperator;
use crate::scalars::PrecisionContext;

/// Reference oscillator frequency plus truncation size.
#[derive(Clone, Debug)]
pub struct BasisSpec {
    sigma: Float,
    size: usize,
}

impl BasisSpec {
    pub fn new(sigma: Float, size: usize) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0) {
            return Err(Error::InvalidBasis(format!("sigma must be positive, got {sigma}")));
        }
        if size < 8 || size % 4 != 0 {
            return Err(Error::InvalidBasis(format!(
                "size must be a multiple of 4 and at least 8, got {size}"
            )));
        }
        Ok(Self { sigma, size })
    }

    pub fn sigma(&self) -> &Float {
        &self.sigma
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k >= self.size {
            Err(Error::IndexOutOfRange {
                index: k,
                size: self.size,
            })
        } else {
            Ok(())
        }
    }
}

/// Expansion `sum_j coeff_j psi_j` as ascending `(j, coeff_j)` pairs.
pub type Column = Vec<(usize, Float)>;

/// `<psi_{k+1}| x |psi_k> = sqrt((k+1) / (2 sigma))`.
fn ladder_x(k: usize, sigma: &Float, prec: u32) -> Float {
    let v = Float::with_val(prec, (k + 1) as u64) / Float::with_val(prec, sigma * 2u32);
    v.sqrt()
}

/// Coefficients of `x^p psi_k` over `psi_{k-p} .. psi_{k+p}`. Entries that
/// vanish by parity are omitted.
pub fn position_power_column(
    k: usize,
    p: u32,
    basis: &BasisSpec,
    ctx: &PrecisionContext,
) -> Result<Column> {
    basis.check_index(k)?;
    if !(1..=4).contains(&p) {
        return Err(Error::InvalidParameter(format!("power must be in 1..=4, got {p}")));
    }
    Ok(power_column_unchecked(k, p, basis.sigma(), ctx.prec()))
}

pub(crate) fn power_column_unchecked(k: usize, p: u32, sigma: &Float, prec: u32) -> Column {
    let mut cur: BTreeMap<usize, Float> = BTreeMap::new();
    cur.insert(k, Float::with_val(prec, 1));
    for _ in 0..p {
        let mut next: BTreeMap<usize, Float> = BTreeMap::new();
        for (&j, c) in &cur {
            let up = Float::with_val(prec, c * &ladder_x(j, sigma, prec));
            *next.entry(j + 1).or_insert_with(|| Float::new(prec)) += up;
            if j > 0 {
                let down = Float::with_val(prec, c * &ladder_x(j - 1, sigma, prec));
                *next.entry(j - 1).or_insert_with(|| Float::new(prec)) += down;
            }
        }
        cur = next;
    }
    cur.into_iter().collect()
}

/// `<psi_i| -d^2/dx^2 |psi_k>`; nonzero only for `|i - k|` in {0, 2}.
pub fn kinetic_matrix_element(i: usize, k: usize, basis: &BasisSpec, ctx: &PrecisionContext) -> Float {
    kinetic_unchecked(i, k, basis.sigma(), ctx.prec())
}

pub(crate) fn kinetic_unchecked(i: usize, k: usize, sigma: &Float, prec: u32) -> Float {
    if i == k {
        return Float::with_val(prec, sigma * (2 * k as u64 + 1)) / 2;
    }
    let lo = i.min(k);
    if i.abs_diff(k) == 2 {
        let root = Float::with_val(prec, ((lo + 1) * (lo + 2)) as u64).sqrt();
        return -Float::with_val(prec, Float::with_val(prec, sigma * &root) / 2u32);
    }
    Float::new(prec)
}

/// Coefficients of `(d/dx) psi_k` over `psi_{k-1}, psi_{k+1}`.
pub fn derivative_column(k: usize, basis: &BasisSpec, ctx: &PrecisionContext) -> Result<Column> {
    basis.check_index(k)?;
    Ok(derivative_unchecked(k, basis.sigma(), ctx.prec()))
}

pub(crate) fn derivative_unchecked(k: usize, sigma: &Float, prec: u32) -> Column {
    let half = Float::with_val(prec, sigma / 2u32).sqrt();
    let mut out = Vec::with_capacity(2);
    if k > 0 {
        let v = Float::with_val(prec, k as u64).sqrt();
        out.push((k - 1, Float::with_val(prec, &half * &v)));
    }
    let v = Float::with_val(prec, (k + 1) as u64).sqrt();
    out.push((k + 1, -Float::with_val(prec, &half * &v)));
    out
}

/// Square banded complex matrix, stored by diagonals `-bandwidth..=bandwidth`.
#[derive(Clone, Debug)]
pub struct BandedOperatorMatrix {
    size: usize,
    bandwidth: usize,
    // diags[d][i] = H[i][i + d - bandwidth], valid where the column is in range
    diags: Vec<Vec<Complex>>,
}

impl BandedOperatorMatrix {
    pub fn zeros(size: usize, bandwidth: usize, prec: u32) -> Self {
        Self {
            size,
            bandwidth,
            diags: vec![vec![Complex::new(prec); size]; 2 * bandwidth + 1],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    fn slot(&self, i: usize, k: usize) -> Option<(usize, usize)> {
        if i >= self.size || k >= self.size || i.abs_diff(k) > self.bandwidth {
            return None;
        }
        Some((k + self.bandwidth - i, i))
    }

    /// Entry `(i, k)`; exact zero outside the band.
    pub fn get(&self, i: usize, k: usize) -> Complex {
        match self.slot(i, k) {
            Some((d, r)) => self.diags[d][r].clone(),
            None => Complex::new(self.diags[0][0].prec().0),
        }
    }

    pub fn get_ref(&self, i: usize, k: usize) -> Option<&Complex> {
        self.slot(i, k).map(|(d, r)| &self.diags[d][r])
    }

    pub fn set(&mut self, i: usize, k: usize, v: &Complex) -> Result<()> {
        let (d, r) = self.slot(i, k).ok_or(Error::IndexOutOfRange {
            index: i.max(k),
            size: self.size,
        })?;
        self.diags[d][r].assign(v);
        Ok(())
    }

    fn add_to(&mut self, i: usize, k: usize, v: &Complex) {
        if let Some((d, r)) = self.slot(i, k) {
            self.diags[d][r] += v;
        }
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.size).all(|i| {
            (i..(i + self.bandwidth + 1).min(self.size)).all(|k| self.get(i, k) == self.get(k, i))
        })
    }
}

/// Real banded matrices of `-d^2/dx^2` and `x^1..x^4` on the first `size`
/// basis states, computed once and reused for every operator on this basis.
#[derive(Clone, Debug)]
pub struct BasisMatrices {
    sigma: Float,
    size: usize,
    prec: u32,
    kinetic: Vec<Vec<Float>>,
    // powers[p - 1][d][i] = <psi_i| x^p |psi_{i + d - 4}>
    powers: Vec<Vec<Vec<Float>>>,
}

impl BasisMatrices {
    pub fn new(sigma: &Float, size: usize, ctx: &PrecisionContext) -> Self {
        let prec = ctx.prec();
        let band = |_: usize| vec![vec![Float::new(prec); size]; 9];
        let mut kinetic = band(0);
        let mut powers: Vec<Vec<Vec<Float>>> = (0..4).map(band).collect();
        for k in 0..size {
            for i in k.saturating_sub(2)..=(k + 2).min(size - 1) {
                kinetic[k + 4 - i][i] = kinetic_unchecked(i, k, sigma, prec);
            }
            for p in 1..=4u32 {
                for (i, c) in power_column_unchecked(k, p, sigma, prec) {
                    if i <= k {
                        powers[p as usize - 1][k + 4 - i][i] = c;
                    }
                }
            }
        }
        // Mirror the upper triangle so symmetry holds bit for bit.
        for band in powers.iter_mut() {
            for i in 0..size {
                for k in i.saturating_sub(4)..i {
                    band[k + 4 - i][i] = band[i + 4 - k][k].clone();
                }
            }
        }
        Self {
            sigma: Float::with_val(prec, sigma),
            size,
            prec,
            kinetic,
            powers,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn sigma(&self) -> &Float {
        &self.sigma
    }

    pub fn kinetic(&self, i: usize, k: usize) -> Float {
        self.lookup(&self.kinetic, i, k)
    }

    pub fn power(&self, p: usize, i: usize, k: usize) -> Float {
        if p == 0 {
            return Float::with_val(self.prec, u32::from(i == k));
        }
        self.lookup(&self.powers[p - 1], i, k)
    }

    fn lookup(&self, band: &[Vec<Float>], i: usize, k: usize) -> Float {
        if i >= self.size || k >= self.size || i.abs_diff(k) > 4 {
            return Float::new(self.prec);
        }
        band[k + 4 - i][i].clone()
    }

    /// `kinetic * (-d^2/dx^2) + sum_j c_j x^j` as a banded matrix.
    pub fn operator_matrix(&self, op: &QuarticOperator) -> BandedOperatorMatrix {
        let prec = self.prec;
        let mut m = BandedOperatorMatrix::zeros(self.size, 4, prec);
        for i in 0..self.size {
            for k in i.saturating_sub(4)..(i + 5).min(self.size) {
                let d = k + 4 - i;
                let mut acc = Complex::with_val(prec, op.kinetic() * &self.kinetic[d][i]);
                for (p, c) in op.coeffs().iter().enumerate().skip(1) {
                    if c.is_zero() {
                        continue;
                    }
                    let v = &self.powers[p - 1][d][i];
                    if !v.is_zero() {
                        acc += Complex::with_val(prec, c * v);
                    }
                }
                if i == k {
                    acc += &op.coeffs()[0];
                }
                m.add_to(i, k, &acc);
            }
        }
        m
    }

    /// `(d/dx)` as a banded real matrix on `size` states (rows may extend one
    /// past the last column).
    pub fn derivative_matrix(&self) -> BandedOperatorMatrix {
        let prec = self.prec;
        let mut m = BandedOperatorMatrix::zeros(self.size, 4, prec);
        for k in 0..self.size {
            for (i, c) in derivative_unchecked(k, &self.sigma, prec) {
                if i < self.size {
                    m.add_to(i, k, &Complex::with_val(prec, &c));
                }
            }
        }
        m
    }
}

/// Gauss-Hermite rule for weight `exp(-t^2)` at context precision.
#[derive(Clone, Debug)]
pub struct GaussHermiteRule {
    pub nodes: Vec<Float>,
    pub weights: Vec<Float>,
}

/// Normalized Hermite values `phi_0..phi_{m}` at `t` (without the Gaussian),
/// with `phi_0 = pi^(-1/4)`.
fn normalized_hermite(t: &Float, m: usize, prec: u32) -> Vec<Float> {
    let pi = Float::with_val(prec, rug::float::Constant::Pi);
    let mut out = Vec::with_capacity(m + 1);
    out.push(Float::with_val(prec, pi.sqrt().sqrt().recip_ref()));
    if m == 0 {
        return out;
    }
    let two = Float::with_val(prec, 2);
    out.push(Float::with_val(prec, two.sqrt_ref()) * t * &out[0]);
    for j in 2..=m {
        let a = Float::with_val(prec, Float::with_val(prec, 2) / j as u64).sqrt();
        let b = Float::with_val(prec, Float::with_val(prec, (j - 1) as u64) / j as u64).sqrt();
        let v = Float::with_val(prec, &a * t) * &out[j - 1] - Float::with_val(prec, &b * &out[j - 2]);
        out.push(v);
    }
    out
}

impl GaussHermiteRule {
    pub fn new(order: usize, ctx: &PrecisionContext) -> Result<Self> {
        if order < 2 {
            return Err(Error::QuadratureOrderTooLow { order, required: 2 });
        }
        let prec = ctx.prec();
        let tol = ctx.epsilon() * 1000u32;
        let m = order;
        let half = m.div_ceil(2);
        let mut pos_nodes: Vec<Float> = Vec::with_capacity(half);
        for j in 0..half {
            if m % 2 == 1 && j == half - 1 {
                pos_nodes.push(Float::new(prec));
                continue;
            }
            // j-th largest root, bracketed in double precision
            let guess = bisect_root(m, m - j);
            let mut x = Float::with_val(prec, guess);
            let mut converged = false;
            for _ in 0..200 {
                let phi = normalized_hermite(&x, m, prec);
                let deriv = Float::with_val(prec, Float::with_val(prec, 2 * m as u64).sqrt() * &phi[m - 1]);
                let step = Float::with_val(prec, &phi[m] / &deriv);
                x -= &step;
                if step.abs() <= tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::NoConvergence { iterations: 200 });
            }
            pos_nodes.push(x);
        }
        let mut nodes = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for x in pos_nodes.iter().rev() {
            nodes.push(Float::with_val(prec, -x));
            weights.push(weight_at(x, m, prec));
        }
        for x in pos_nodes.iter().filter(|x| !x.is_zero()) {
            nodes.push(x.clone());
            weights.push(weight_at(x, m, prec));
        }
        Ok(Self { nodes, weights })
    }
}

/// Number of roots of the degree-`m` Hermite polynomial below `x`, from the
/// sign changes of the three-term recurrence.
fn roots_below(m: usize, x: f64) -> usize {
    let mut changes = 0;
    let mut ratio = 2f64.sqrt() * x;
    if ratio < 0.0 {
        changes += 1;
    }
    for j in 2..=m {
        let a = (2.0 / j as f64).sqrt();
        let b = ((j - 1) as f64 / j as f64).sqrt();
        let r = if ratio == 0.0 { f64::MIN_POSITIVE } else { ratio };
        ratio = a * x - b / r;
        if ratio < 0.0 {
            changes += 1;
        }
    }
    m - changes
}

/// The `rank`-th smallest root (1-based) by bisection.
fn bisect_root(m: usize, rank: usize) -> f64 {
    let mut lo = -(2.0 * m as f64 + 2.0).sqrt();
    let mut hi = -lo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if roots_below(m, mid) >= rank {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn weight_at(x: &Float, m: usize, prec: u32) -> Float {
    let phi = normalized_hermite(x, m, prec);
    let deriv = Float::with_val(prec, Float::with_val(prec, 2 * m as u64).sqrt() * &phi[m - 1]);
    Float::with_val(prec, 2) / Float::with_val(prec, &deriv * &deriv)
}

/// Independent check of `<psi_i| op |psi_k>` by Gauss-Hermite quadrature.
///
/// The kinetic part uses `-psi_k'' = (sigma (2k+1) - sigma^2 x^2) psi_k`. The
/// integrand is a polynomial times the Gaussian weight, so any order above
/// `(i + k + 5) / 2` is exact; the result is confirmed against twice the
/// requested order.
pub fn quadrature_overlap_oracle(
    i: usize,
    k: usize,
    op: &QuarticOperator,
    basis: &BasisSpec,
    order: usize,
    ctx: &PrecisionContext,
) -> Result<Complex> {
    let required = 4 * (i.max(k) + 5);
    if order < required {
        return Err(Error::QuadratureOrderTooLow { order, required });
    }
    let a = quadrature_at_order(i, k, op, basis, order, ctx)?;
    let b = quadrature_at_order(i, k, op, basis, 2 * order, ctx)?;
    let prec = ctx.prec();
    let diff = Complex::with_val(prec, &a - &b).abs().real().clone();
    let scale = Complex::with_val(prec, a.abs_ref()).real().clone() + 1u32;
    if diff > Float::with_val(prec, ctx.newton_tol() * &scale) {
        return Err(Error::QuadratureOrderTooLow {
            order,
            required: 2 * order,
        });
    }
    Ok(a)
}

fn quadrature_at_order(
    i: usize,
    k: usize,
    op: &QuarticOperator,
    basis: &BasisSpec,
    order: usize,
    ctx: &PrecisionContext,
) -> Result<Complex> {
    let prec = ctx.prec();
    let rule = GaussHermiteRule::new(order, ctx)?;
    let sigma = basis.sigma();
    let root_sigma = Float::with_val(prec, sigma.sqrt_ref());
    let mut acc = Complex::new(prec);
    let top = i.max(k);
    for (t, w) in rule.nodes.iter().zip(&rule.weights) {
        let phi = normalized_hermite(t, top, prec);
        let x = Float::with_val(prec, t / &root_sigma);
        let x2 = Float::with_val(prec, &x * &x);
        let kin = Float::with_val(prec, sigma * (2 * k as u64 + 1))
            - Float::with_val(prec, sigma * sigma) * &x2;
        let mut f = Complex::with_val(prec, op.kinetic() * &kin);
        let mut xp = Float::with_val(prec, 1);
        for c in op.coeffs() {
            f += Complex::with_val(prec, c * &xp);
            xp *= &x;
        }
        let amp = Float::with_val(prec, &phi[i] * &phi[k]) * w;
        acc += f * amp;
    }
    Ok(acc)
}
