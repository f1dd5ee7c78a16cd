//! Self-consistent levels across frames, branches and limits.

use relosc::level_solver::{
    asymptotic_lambda, energy_from_lambda, lambda_of, solve_level, solve_resonance, LevelResult, SolverConfig,
};
use relosc::operator_builder::{Branch, Frame, ModelParams, Variant};
use relosc::PrecisionContext;
use rug::{Complex, Float};

fn ctx() -> PrecisionContext {
    PrecisionContext::new(40).unwrap()
}

fn translated(c: &PrecisionContext, y: f64) -> Frame {
    Frame::Translated { y: c.real(y) }
}

fn gap(a: &Complex, b: &Complex) -> f64 {
    let prec = a.prec().0;
    Complex::with_val(prec, a - b).abs().real().to_f64()
}

fn assert_consistent(r: &LevelResult, c: &PrecisionContext) {
    assert!(r.is_self_consistent(c), "residual {}", r.residual);
}

/// `lambda_n = 2n+1 + Omega (1 + E (2n+1) - 3/4 (2n^2 + 2n + 1))` to second
/// order, so `E_n = 2n+1 + Omega (1 - 3/4 (2n^2 + 2n + 1))`.
fn perturbative_slope(n: usize) -> f64 {
    let n = n as f64;
    1.0 - 0.75 * (2.0 * n * n + 2.0 * n + 1.0)
}

#[test]
fn translation_is_isospectral() {
    let c = ctx();
    let cfg = SolverConfig::new(c.clone(), 40);
    let omega = c.parse_real("0.002").unwrap();
    let tol = c.pow10(-(c.digits() as i32 - 15)).to_f64();
    let levels: Vec<_> = [1.0, 2.0, 3.0, 5.0]
        .iter()
        .map(|&y| solve_level(&omega, 0, &translated(&c, y), &cfg).unwrap())
        .collect();
    for r in &levels {
        assert_consistent(r, &c);
        assert!(r.energy.imag().is_zero());
        assert!(gap(&r.energy, &levels[0].energy) < tol, "y = {}: {}", r.y_or_theta, r.energy);
    }
}

#[test]
fn branches_share_real_levels() {
    let c = ctx();
    let omega = c.parse_real("0.004").unwrap();
    let plus = SolverConfig::new(c.clone(), 40);
    let minus = plus.clone().with_branch(Branch::Minus);
    for n in 0..2 {
        let a = solve_level(&omega, n, &translated(&c, 2.0), &plus).unwrap();
        let b = solve_level(&omega, n, &translated(&c, 2.0), &minus).unwrap();
        assert_eq!(b.branch, Branch::Minus);
        assert!(gap(&a.energy, &b.energy) < 1e-25, "n = {n}: {} vs {}", a.energy, b.energy);
    }
}

#[test]
fn negative_dilation_gives_conjugate_resonance() {
    let c = ctx();
    let cfg = SolverConfig::new(c.clone(), 40);
    let omega = c.parse_real("0.02").unwrap();
    let up = solve_resonance(&omega, 0, &c.real(0.3), &cfg).unwrap();
    let down = solve_resonance(&omega, 0, &c.real(-0.3), &cfg).unwrap();
    assert!(*up.energy.imag() > 0, "{}", up.energy);
    let mirrored = Complex::with_val(c.prec(), down.energy.conj_ref());
    let scale = up.energy.imag().to_f64();
    assert!(gap(&up.energy, &mirrored) < 1e-6 * scale, "{} vs {}", up.energy, down.energy);
    assert_consistent(&up, &c);
}

#[test]
fn low_levels_are_positive() {
    let c = ctx();
    let cfg = SolverConfig::new(c.clone(), 40);
    for omega in ["0.001", "0.005", "0.01"] {
        let w = c.parse_real(omega).unwrap();
        let mut previous = Float::new(c.prec());
        for n in 0..=3 {
            let r = solve_level(&w, n, &translated(&c, 1.0), &cfg).unwrap();
            assert_consistent(&r, &c);
            assert!(*r.energy.real() > previous, "Omega {omega}, n = {n}: {}", r.energy);
            let oracle = (2 * n + 1) as f64 + w.to_f64() * perturbative_slope(n);
            assert!((r.energy.real().to_f64() - oracle).abs() < 0.02, "Omega {omega}, n = {n}: {}", r.energy);
            previous = r.energy.real().clone();
        }
    }
}

#[test]
fn schroedinger_limit_slopes() {
    let c = ctx();
    let cfg = SolverConfig::new(c.clone(), 30);
    for n in 0..2usize {
        let mut last: Option<f64> = None;
        for omega in [4e-4, 2e-4, 1e-4] {
            let w = c.real(omega);
            let r = solve_level(&w, n, &translated(&c, 1.0), &cfg).unwrap();
            let e = r.energy.real().to_f64();
            let slope = (e - (2 * n + 1) as f64) / omega;
            assert!((slope - perturbative_slope(n)).abs() < 0.02, "n = {n}, Omega {omega}: {slope}");
            if let Some(prev) = last {
                // closer to the harmonic value as Omega shrinks
                assert!((e - (2 * n + 1) as f64).abs() < (prev - (2 * n + 1) as f64).abs());
            }
            last = Some(e);
        }
    }
}

#[test]
fn first_order_lambda_at_unit_energy() {
    let c = ctx();
    let cfg = SolverConfig::new(c.clone(), 30);
    let params = ModelParams::new(
        c.parse_real("0.002").unwrap(),
        c.complex(1.0, 0.0),
        Variant::DiracTitchmarsh,
        Branch::Plus,
        translated(&c, 1.0),
    );
    let lambda = lambda_of(&params, 0, &cfg).unwrap();
    assert!(gap(&lambda, &c.complex(1.0 + 1.25 * 0.002, 0.0)) < 1e-3, "{lambda}");
}

#[test]
fn branch_arithmetic_with_constant_lambda() {
    let c = ctx();
    let e = energy_from_lambda(&c.parse_real("0.001").unwrap(), &c.complex(1.0, 0.0), true).unwrap();
    let expect = (1.004f64.sqrt() - 1.0) / 0.002;
    assert!((e.real().to_f64() - expect).abs() < 1e-12);
    assert!((e.real().to_f64() - 0.99900).abs() < 1e-5);
}

#[test]
fn large_energy_follows_rescaled_oscillator() {
    let c = ctx();
    let cfg = SolverConfig::new(c.clone(), 30);
    let omega = c.parse_real("0.002").unwrap();
    assert!((asymptotic_lambda(&omega, &c.real(100.0), 0).to_f64() - 1.4f64.sqrt()).abs() < 1e-15);
    let mut points = Vec::new();
    for energy in [50.0, 100.0, 200.0] {
        let params = ModelParams::new(
            omega.clone(),
            c.complex(energy, 0.0),
            Variant::DiracTitchmarsh,
            Branch::Plus,
            translated(&c, 1.0),
        );
        let lambda = lambda_of(&params, 0, &cfg).unwrap();
        let lead = asymptotic_lambda(&omega, &c.real(energy), 0);
        let ratio = lambda.real().to_f64() / lead.to_f64();
        if energy == 100.0 {
            assert!(ratio > 0.99 && ratio < 1.01, "{ratio}");
        }
        let s = 1.0 + 2.0 * energy * 0.002;
        let remainder = (lambda.real().to_f64() - lead.to_f64()).abs();
        points.push((s.ln(), remainder.ln()));
    }
    // remainder ~ Omega / (1 + 2 E Omega)
    let slope = (points[2].1 - points[0].1) / (points[2].0 - points[0].0);
    assert!((slope + 1.0).abs() < 0.05, "{slope}");
}

#[test]
fn real_frame_plateau_sits_below_translated_level() {
    let c = ctx();
    let omega = c.parse_real("0.002").unwrap();
    let t = solve_level(&omega, 0, &translated(&c, 5.0), &SolverConfig::new(c.clone(), 40)).unwrap();
    let kg = SolverConfig::new(c.clone(), 40).with_variant(Variant::KleinGordon);
    let r = solve_level(&omega, 0, &Frame::Real, &kg).unwrap();
    assert_consistent(&r, &c);
    let kappa = (t.energy.real().to_f64() - r.energy.real().to_f64()) / 0.002;
    let fitted = 0.9999539755 + 0.0284823904 * 0.002;
    assert!((kappa - fitted).abs() < 5e-4, "{kappa}");
}

#[test]
fn dilated_real_part_matches_translated_level() {
    let c = ctx();
    let cfg = SolverConfig::new(c.clone(), 60);
    let omega = c.parse_real("0.005").unwrap();
    let t = solve_level(&omega, 0, &translated(&c, 5.0), &cfg).unwrap();
    let d = solve_resonance(&omega, 0, &c.real(0.3), &cfg).unwrap();
    assert!((t.energy.real().to_f64() - 1.0012611278).abs() < 1e-9);
    assert!((d.energy.real().to_f64() - 1.0012611278).abs() < 1e-9);
    assert!(!d.energy.imag().is_sign_negative());
}
