//! Self-consistent levels `E_n(Omega)` of `lambda_n(E) = E + Omega E^2`.
//!
//! `lambda_n(E)` is the n-th eigenvalue of the frame-resolved operator at
//! fixed `E`. The outer iteration is a fixed-point step
//! `E <- (sqrt(1 + 4 lambda Omega) - 1) / (2 Omega)` followed by secant
//! updates on `g(E) = lambda_n(E) - E - Omega E^2`; every inner eigenvalue
//! solve is warm-started from the previous one.

use rug::{Complex, Float};

use crate::error::{Error, Result};
use crate::hermite_basis::BasisMatrices;
use crate::moment_solver::{
    dense_eigensolve_oracle, find_eigenvalue_with, stabilization_scan, NewtonOptions, DEFAULT_PLATEAU_THRESHOLD,
};
use crate::operator_builder::{assemble_from_matrices, resolve_operator, Branch, Frame, ModelParams, Variant};
use crate::scalars::PrecisionContext;

pub const DEFAULT_THETA: f64 = 0.30;
pub const DEFAULT_Y: f64 = 5.0;
pub const DEFAULT_SIGMA: f64 = 1.0;
pub const THETA_PLATEAU_OFFSET: f64 = 0.05;
pub const SIGMA_GRID: [f64; 5] = [1.0, 1.25, 1.5, 1.75, 2.0];
pub const Y_GRID: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 5.0];

/// Block count of the low-precision dense solve that identifies a level
/// before it is continued to the full truncation.
const SEED_BLOCKS: usize = 12;
const MAX_OUTER_ITERATIONS: usize = 60;
const SEED_MAX_Y: f64 = 2.0;

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub ctx: PrecisionContext,
    pub variant: Variant,
    pub branch: Branch,
    pub sigma: Float,
    pub n_blocks: usize,
    pub newton: NewtonOptions,
    pub max_outer: usize,
    /// Re-solve resonances at a shifted angle and compare.
    pub theta_check: bool,
    /// Allowed `|E(theta) - E(theta')|`; defaults to `newton_tol (1 + |E|)`.
    pub theta_tolerance: Option<Float>,
    /// Block counts for the real-frame stabilization scan; derived from
    /// `n_blocks` when empty.
    pub stabilization_blocks: Vec<usize>,
    pub plateau_threshold: f64,
}

impl SolverConfig {
    pub fn new(ctx: PrecisionContext, n_blocks: usize) -> Self {
        let sigma = ctx.real(DEFAULT_SIGMA);
        Self {
            ctx,
            variant: Variant::DiracTitchmarsh,
            branch: Branch::Plus,
            sigma,
            n_blocks,
            newton: NewtonOptions::default(),
            max_outer: MAX_OUTER_ITERATIONS,
            theta_check: true,
            theta_tolerance: None,
            stabilization_blocks: Vec::new(),
            plateau_threshold: DEFAULT_PLATEAU_THRESHOLD,
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_branch(mut self, branch: Branch) -> Self {
        self.branch = branch;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = self.ctx.real(sigma);
        self
    }

    fn stabilization_sizes(&self) -> Vec<usize> {
        if !self.stabilization_blocks.is_empty() {
            return self.stabilization_blocks.clone();
        }
        let hi = self.n_blocks.max(4);
        let lo = (hi / 2).max(2);
        let steps = 6;
        let mut out: Vec<usize> = (0..steps).map(|j| lo + (hi - lo) * j / (steps - 1)).collect();
        out.dedup();
        out
    }
}

#[derive(Clone, Debug)]
pub struct TraceEntry {
    pub energy: Complex,
    pub lambda: Complex,
    /// `|lambda - E - Omega E^2|`.
    pub residual: Float,
}

#[derive(Clone, Debug)]
pub struct LevelResult {
    pub n: usize,
    pub omega: Float,
    pub energy: Complex,
    pub lambda: Complex,
    pub frame: Frame,
    pub variant: Variant,
    pub branch: Branch,
    pub trace: Vec<TraceEntry>,
    pub basis_blocks: usize,
    pub sigma: Float,
    pub y_or_theta: f64,
    /// Final `|lambda - E - Omega E^2|`.
    pub residual: Float,
}

impl LevelResult {
    /// `|lambda - E - Omega E^2| < newton_tol (1 + |lambda|)`.
    pub fn is_self_consistent(&self, ctx: &PrecisionContext) -> bool {
        let prec = ctx.prec();
        let bound = Float::with_val(prec, ctx.newton_tol() * (Float::with_val(prec, self.lambda.abs_ref()) + 1u32));
        self_consistency_residual(&self.omega, &self.energy, &self.lambda) < bound
    }
}

pub fn self_consistency_residual(omega: &Float, energy: &Complex, lambda: &Complex) -> Float {
    let prec = lambda.prec().0;
    let e2 = Complex::with_val(prec, energy * energy);
    let r = Complex::with_val(prec, lambda - energy) - Complex::with_val(prec, e2 * omega);
    Float::with_val(prec, r.abs_ref())
}

/// Leading large-E behaviour `sqrt(1 + 2 E Omega) (2n + 1)`.
pub fn asymptotic_lambda(omega: &Float, energy: &Float, n: usize) -> Float {
    let prec = omega.prec();
    let strength = Float::with_val(prec, energy * omega) * 2u32 + 1u32;
    strength.sqrt() * (2 * n as u64 + 1)
}

/// Principal root `E = (sqrt(1 + 4 lambda Omega) - 1) / (2 Omega)`.
pub fn energy_from_lambda(omega: &Float, lambda: &Complex, real_only: bool) -> Result<Complex> {
    let prec = lambda.prec().0;
    let disc = Complex::with_val(prec, lambda * omega) * 4u32 + 1u32;
    if real_only && (*disc.real() <= 0) {
        return Err(Error::NegativeDiscriminant);
    }
    if !real_only && disc.real().is_sign_negative() {
        return Err(Error::NegativeDiscriminant);
    }
    let root = disc.sqrt() - 1u32;
    let mut e = root / Float::with_val(prec, omega * 2u32);
    if real_only {
        e = Complex::with_val(prec, e.real());
    }
    Ok(e)
}

/// Eigenvalue solver bound to one basis (sigma, truncation, precision).
pub struct LevelSolver {
    cfg: SolverConfig,
    mats: BasisMatrices,
}

impl LevelSolver {
    pub fn new(cfg: SolverConfig) -> Result<Self> {
        if cfg.n_blocks < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 blocks, got {}",
                cfg.n_blocks
            )));
        }
        if !(cfg.sigma.is_finite() && cfg.sigma > 0) {
            return Err(Error::InvalidBasis(format!("sigma must be positive, got {}", cfg.sigma)));
        }
        let size = 4 * cfg.n_blocks.max(SEED_BLOCKS) + 4;
        let mats = BasisMatrices::new(&cfg.sigma, size, &cfg.ctx);
        Ok(Self { cfg, mats })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    fn params(&self, omega: &Float, energy: &Complex, frame: &Frame) -> ModelParams {
        ModelParams::new(
            Float::with_val(self.cfg.ctx.prec(), omega),
            Complex::with_val(self.cfg.ctx.prec(), energy),
            self.cfg.variant,
            self.cfg.branch,
            frame.clone(),
        )
    }

    /// Identifies level `n` by a low-precision dense solve on a small
    /// truncation: the eigenvalue closest to the harmonic estimate. Large
    /// translations converge slowly, and the translated spectrum does not
    /// depend on `y`, so identification uses `y <= 2`.
    fn seed_lambda(&self, params: &ModelParams, n: usize) -> Result<Complex> {
        let low = PrecisionContext::new(30)?;
        let mut p = params.clone();
        p.omega = Float::with_val(low.prec(), &params.omega);
        p.energy = Complex::with_val(low.prec(), &params.energy);
        p.frame = match &params.frame {
            Frame::Real => Frame::Real,
            Frame::Translated { y } => Frame::Translated {
                y: Float::with_val(low.prec(), y).min(&Float::with_val(low.prec(), SEED_MAX_Y)),
            },
            Frame::Dilated { theta } => Frame::Dilated {
                theta: Float::with_val(low.prec(), theta),
            },
        };
        let op = resolve_operator(&p, &low)?;
        let mats = BasisMatrices::new(&Float::with_val(low.prec(), &self.cfg.sigma), 4 * SEED_BLOCKS + 4, &low);
        let blocks = assemble_from_matrices(&op, &mats, SEED_BLOCKS)?;
        let eigs = dense_eigensolve_oracle(&blocks, SEED_BLOCKS)?;
        let target = asymptotic_lambda(&p.omega, p.energy.real(), n);
        let prec = low.prec();
        let best = eigs
            .into_iter()
            .min_by(|a, b| {
                let da = Float::with_val(prec, Complex::with_val(prec, a - &target).abs_ref());
                let db = Float::with_val(prec, Complex::with_val(prec, b - &target).abs_ref());
                da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
            })
            .ok_or_else(|| Error::InvalidParameter("empty seed spectrum".into()))?;
        Ok(Complex::with_val(self.cfg.ctx.prec(), &best))
    }

    /// `lambda_n(E)` in `frame`, continued from `seed` when given.
    pub fn lambda(
        &self,
        omega: &Float,
        energy: &Complex,
        n: usize,
        frame: &Frame,
        seed: Option<&Complex>,
    ) -> Result<Complex> {
        let ctx = &self.cfg.ctx;
        let params = self.params(omega, energy, frame);
        params.validate()?;
        let start = match seed {
            Some(s) => Complex::with_val(ctx.prec(), s),
            None => self.seed_lambda(&params, n)?,
        };
        let op = resolve_operator(&params, ctx)?;
        if *frame == Frame::Real {
            let sizes = self.cfg.stabilization_sizes();
            let scan = stabilization_scan(&op, &self.cfg.sigma, &sizes, &start, self.cfg.plateau_threshold, ctx)?;
            return Ok(scan.value);
        }
        let blocks = assemble_from_matrices(&op, &self.mats, self.cfg.n_blocks)?;
        let est = find_eigenvalue_with(&blocks, &start, self.cfg.n_blocks, ctx, &self.cfg.newton)?;
        Ok(est.lambda)
    }

    /// Self-consistent level in `frame` (real E unless dilated).
    pub fn solve(&self, omega: &Float, n: usize, frame: &Frame) -> Result<LevelResult> {
        let ctx = &self.cfg.ctx;
        let prec = ctx.prec();
        if !(omega.is_finite() && *omega > 0) {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
        }
        frame.validate()?;
        let omega = Float::with_val(prec, omega);
        let real_only = !matches!(frame, Frame::Dilated { .. });
        let mut trace = Vec::new();

        let harmonic = Complex::with_val(prec, 2 * n as u64 + 1);
        let e0 = energy_from_lambda(&omega, &harmonic, true)?;
        let mut lambda = self.lambda(&omega, &e0, n, frame, None)?;
        let g0 = self.record(&mut trace, &omega, &e0, &lambda, real_only);
        let mut e_prev = e0;
        let mut g_prev = g0;
        let mut e_cur = energy_from_lambda(&omega, &lambda, real_only)?;

        for _ in 0..self.cfg.max_outer {
            lambda = self.lambda(&omega, &e_cur, n, frame, Some(&lambda))?;
            let g = self.record(&mut trace, &omega, &e_cur, &lambda, real_only);
            let scale = Float::with_val(prec, lambda.abs_ref()) + 1u32;
            let tol = Float::with_val(prec, ctx.newton_tol() * &scale);
            let residual = Float::with_val(prec, g.abs_ref());
            if residual < tol {
                return Ok(LevelResult {
                    n,
                    omega: omega.clone(),
                    energy: e_cur,
                    lambda,
                    frame: frame.clone(),
                    variant: self.cfg.variant,
                    branch: self.cfg.branch,
                    trace,
                    basis_blocks: self.cfg.n_blocks,
                    sigma: self.cfg.sigma.clone(),
                    y_or_theta: frame.parameter(),
                    residual,
                });
            }
            let dg = Complex::with_val(prec, &g - &g_prev);
            let next = if dg.is_zero() {
                energy_from_lambda(&omega, &lambda, real_only)?
            } else {
                let de = Complex::with_val(prec, &e_cur - &e_prev);
                let step = Complex::with_val(prec, &g * &de) / dg;
                let mut e = Complex::with_val(prec, &e_cur - &step);
                if real_only {
                    e = Complex::with_val(prec, e.real());
                }
                e
            };
            e_prev = std::mem::replace(&mut e_cur, next);
            g_prev = g;
        }
        Err(Error::NoConvergence {
            iterations: self.cfg.max_outer,
        })
    }

    fn record(
        &self,
        trace: &mut Vec<TraceEntry>,
        omega: &Float,
        energy: &Complex,
        lambda: &Complex,
        real_only: bool,
    ) -> Complex {
        let prec = self.cfg.ctx.prec();
        let lam = if real_only {
            Complex::with_val(prec, lambda.real())
        } else {
            Complex::with_val(prec, lambda)
        };
        let e2 = Complex::with_val(prec, energy * energy);
        let g = Complex::with_val(prec, &lam - energy) - Complex::with_val(prec, e2 * omega);
        trace.push(TraceEntry {
            energy: energy.clone(),
            lambda: lam,
            residual: Float::with_val(prec, g.abs_ref()),
        });
        g
    }
}

/// `lambda_n(E)` for fixed `params`.
pub fn lambda_of(params: &ModelParams, n: usize, cfg: &SolverConfig) -> Result<Complex> {
    let mut cfg = cfg.clone();
    cfg.variant = params.variant;
    cfg.branch = params.branch;
    let solver = LevelSolver::new(cfg)?;
    solver.lambda(&params.omega, &params.energy, n, &params.frame, None)
}

/// Metastable level in the real or translated frame.
pub fn solve_level(omega: &Float, n: usize, frame: &Frame, cfg: &SolverConfig) -> Result<LevelResult> {
    if matches!(frame, Frame::Dilated { .. }) {
        return Err(Error::WrongFrame("solve_level takes the real or translated frame".into()));
    }
    LevelSolver::new(cfg.clone())?.solve(omega, n, frame)
}

/// Complex resonance in the dilated frame, checked for independence of the
/// dilation angle.
pub fn solve_resonance(omega: &Float, n: usize, theta: &Float, cfg: &SolverConfig) -> Result<LevelResult> {
    let t = theta.to_f64();
    if !(t > 0.0 && t < std::f64::consts::PI / 6.0) && !(t < 0.0 && t > -std::f64::consts::PI / 6.0) {
        return Err(Error::InvalidParameter(format!(
            "dilation angle must satisfy 0 < |theta| < pi/6, got {t}"
        )));
    }
    let solver = LevelSolver::new(cfg.clone())?;
    let frame = Frame::Dilated { theta: theta.clone() };
    let result = solver.solve(omega, n, &frame)?;
    if cfg.theta_check {
        let limit = std::f64::consts::PI / 6.0;
        let shifted = if (t.abs() + THETA_PLATEAU_OFFSET) < limit {
            t + THETA_PLATEAU_OFFSET * t.signum()
        } else {
            t - THETA_PLATEAU_OFFSET * t.signum()
        };
        let other = solver.solve(
            omega,
            n,
            &Frame::Dilated {
                theta: cfg.ctx.real(shifted),
            },
        )?;
        let prec = cfg.ctx.prec();
        let diff = Float::with_val(prec, Complex::with_val(prec, &result.energy - &other.energy).abs_ref());
        let allowed = match &cfg.theta_tolerance {
            Some(tol) => Float::with_val(prec, tol),
            None => Float::with_val(
                prec,
                cfg.ctx.newton_tol() * (Float::with_val(prec, result.energy.abs_ref()) + 1u32),
            ),
        } * 10u32;
        if diff > allowed {
            return Err(Error::ThetaPlateauFail {
                difference: diff.to_f64(),
                allowed: allowed.to_f64(),
            });
        }
    }
    Ok(result)
}

/// Picks `(sigma, y)` from the grid minimizing `|lambda(N) - lambda(N - dN)|`
/// at the harmonic estimate of `E`. `y` is ignored (returned as `None`) for
/// frames other than the translated one.
pub fn select_variational(
    omega: &Float,
    n: usize,
    frame: &Frame,
    cfg: &SolverConfig,
    sigmas: &[f64],
    ys: &[f64],
) -> Result<(f64, Option<f64>)> {
    let prec = cfg.ctx.prec();
    let translated = matches!(frame, Frame::Translated { .. });
    let y_list: Vec<Option<f64>> = if translated {
        ys.iter().copied().map(Some).collect()
    } else {
        vec![None]
    };
    let harmonic = Complex::with_val(prec, 2 * n as u64 + 1);
    let energy = energy_from_lambda(&Float::with_val(prec, omega), &harmonic, true)?;
    let step = (cfg.n_blocks / 10).max(1);
    let mut best: Option<(Float, f64, Option<f64>)> = None;
    for &sigma in sigmas {
        let mut big = cfg.clone().with_sigma(sigma);
        big.theta_check = false;
        let solver = LevelSolver::new(big.clone())?;
        let mut small = big.clone();
        small.n_blocks = cfg.n_blocks.saturating_sub(step).max(2);
        let small_solver = LevelSolver::new(small)?;
        for y in &y_list {
            let fr = match y {
                Some(y) => Frame::Translated { y: cfg.ctx.real(*y) },
                None => frame.clone(),
            };
            let a = match small_solver.lambda(omega, &energy, n, &fr, None) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let b = match solver.lambda(omega, &energy, n, &fr, Some(&a)) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let d = Float::with_val(prec, Complex::with_val(prec, &b - &a).abs_ref());
            if best.as_ref().map_or(true, |(bd, _, _)| d < *bd) {
                best = Some((d, sigma, *y));
            }
        }
    }
    best.map(|(_, s, y)| (s, y))
        .ok_or_else(|| Error::NoConvergence { iterations: sigmas.len() * y_list.len() })
}
