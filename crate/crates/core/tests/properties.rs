//! Randomized invariants across the numeric layers.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relosc::diagnostics::{sector_of, Sector};
use relosc::hermite_basis::{quadrature_overlap_oracle, BasisMatrices, BasisSpec};
use relosc::linalg::{mat4_zero, Mat4};
use relosc::moment_solver::{dense_eigensolve_oracle, find_eigenvalue, MomentEngine};
use relosc::operator_builder::{
    build_operator, shift_argument, BlockTridiagonal, Branch, Frame, ModelParams, QuarticOperator, Variant,
};
use relosc::scalars::{format_real, relative_difference};
use relosc::PrecisionContext;
use rug::{Complex, Float};

fn ctx() -> PrecisionContext {
    PrecisionContext::new(40).unwrap()
}

fn dist(a: &Complex, b: &Complex) -> Float {
    let prec = a.prec().0;
    Float::with_val(prec, Complex::with_val(prec, a - b).abs_ref())
}

/// Block-tridiagonal matrix with diagonally dominant `A` blocks and
/// invertible lower-triangular `B` blocks; `C = B^T` keeps it symmetric.
fn random_blocks(c: &PrecisionContext, n: usize, seed: u64, complex: bool) -> BlockTridiagonal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let im = |rng: &mut ChaCha8Rng| if complex { rng.gen_range(-0.3..0.3) } else { 0.0 };
    let (mut a, mut b, mut cc) = (Vec::new(), Vec::new(), Vec::new());
    for blk in 0..n {
        let mut m: Mat4 = mat4_zero(c.prec());
        for i in 0..4 {
            for k in 0..=i {
                let v = if i == k {
                    (4 * blk + i) as f64 * 2.0 + 1.0 + rng.gen_range(0.0..0.5)
                } else {
                    rng.gen_range(-0.3..0.3)
                };
                let z = c.complex(v, im(&mut rng));
                m[i][k] = z.clone();
                m[k][i] = z;
            }
        }
        a.push(m);
        let mut l: Mat4 = mat4_zero(c.prec());
        for i in 0..4 {
            for k in 0..=i {
                let v = if i == k { rng.gen_range(0.2..0.5) } else { rng.gen_range(-0.2..0.2) };
                l[i][k] = c.complex(v, im(&mut rng));
            }
        }
        let mut t: Mat4 = mat4_zero(c.prec());
        for i in 0..4 {
            for k in 0..4 {
                t[i][k] = l[k][i].clone();
            }
        }
        b.push(l);
        cc.push(t);
    }
    BlockTridiagonal::from_blocks(a, b, cc).unwrap()
}

fn shifted(blocks: &BlockTridiagonal, s: &Complex) -> BlockTridiagonal {
    let mut a = blocks.a.clone();
    for m in a.iter_mut() {
        for (i, row) in m.iter_mut().enumerate() {
            row[i] += s;
        }
    }
    BlockTridiagonal::from_blocks(a, blocks.b.clone(), blocks.c.clone()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decimal_round_trip(mantissa in 1.0f64..10.0, exp in -200i32..=200, digits in 5usize..35, neg: bool) {
        let c = ctx();
        let mut x = Float::with_val(c.prec(), mantissa) * c.pow10(exp);
        if neg {
            x = -x;
        }
        let text = format_real(&x, digits, false);
        let back = c.parse_real(&text).unwrap();
        let rel = relative_difference(&x, &back);
        prop_assert!(rel <= c.pow10(1 - digits as i32), "{text}: {rel}");
    }

    #[test]
    fn sectors_repeat_every_full_turn(phi in -10.0f64..10.0, turns in -3i32..=3) {
        let a = sector_of(phi);
        let b = sector_of(phi + turns as f64 * 2.0 * std::f64::consts::PI);
        if let (Sector::Index(i), Sector::Index(j)) = (a, b) {
            prop_assert_eq!(i, j);
            prop_assert!((-2..=3).contains(&i));
        }
    }

    #[test]
    fn power_columns_compose(sigma in 0.5f64..2.5, i in 0usize..20, k in 0usize..20) {
        let c = ctx();
        let m = BasisMatrices::new(&c.real(sigma), 32, &c);
        let tol = c.pow10(-(c.digits() as i32 - 5));
        for p in 2..=4usize {
            let mut acc = Float::new(c.prec());
            for j in 0..32 {
                acc += m.power(p - 1, i, j) * m.power(1, j, k);
            }
            let direct = m.power(p, i, k);
            prop_assert!(Float::with_val(c.prec(), acc - &direct).abs() < tol);
            prop_assert_eq!(direct.clone(), m.power(p, k, i));
            if i.abs_diff(k) > p {
                prop_assert!(direct.is_zero());
            }
        }
    }

    #[test]
    fn derivative_is_antisymmetric(sigma in 0.5f64..2.5) {
        let c = ctx();
        let d = BasisMatrices::new(&c.real(sigma), 24, &c).derivative_matrix();
        for i in 0..24 {
            for k in 0..24 {
                let sum = Complex::with_val(c.prec(), d.get(i, k) + d.get(k, i));
                prop_assert!(sum.is_zero(), "({i},{k})");
            }
        }
    }

    #[test]
    fn real_coefficients_give_real_symmetric_matrices(
        sigma in 0.5f64..2.0,
        coeffs in proptest::array::uniform5(-2.0f64..2.0),
    ) {
        let c = ctx();
        let op = QuarticOperator::new(c.complex(1.0, 0.0), coeffs.map(|v| c.complex(v, 0.0)));
        let h = BasisMatrices::new(&c.real(sigma), 20, &c).operator_matrix(&op);
        prop_assert!(h.is_symmetric());
        prop_assert!(h.bandwidth() <= 4);
        for i in 0..20 {
            for k in 0..20 {
                prop_assert!(h.get(i, k).imag().is_zero());
            }
        }
    }

    #[test]
    fn quadrature_matches_banded_elements(i in 0usize..=12, k in 0usize..=12, sigma in 0.8f64..1.6) {
        let c = ctx();
        let op = QuarticOperator::new(
            c.complex(1.0, 0.0),
            [c.complex(0.3, 0.0), c.complex(0.0, -0.2), c.complex(1.1, 0.0), c.complex(0.1, 0.0), c.complex(-0.01, 0.0)],
        );
        let basis = BasisSpec::new(c.real(sigma), 20).unwrap();
        let banded = BasisMatrices::new(&c.real(sigma), 20, &c).operator_matrix(&op);
        let quad = quadrature_overlap_oracle(i, k, &op, &basis, 4 * (i.max(k) + 5), &c).unwrap();
        prop_assert!(dist(&quad, &banded.get(i, k)) < c.pow10(-(c.digits() as i32 - 10)));
    }

    #[test]
    fn translation_round_trip(y in 0.5f64..5.0, omega in 0.001f64..0.05, energy in 0.5f64..3.0) {
        let c = ctx();
        let params = ModelParams::new(
            c.real(omega),
            c.complex(energy, 0.0),
            Variant::DiracTitchmarsh,
            Branch::Plus,
            Frame::Real,
        );
        let op = build_operator(&params, &c).unwrap();
        let there = shift_argument(&op, &c.complex(0.0, y));
        let back = shift_argument(&there, &c.complex(0.0, -y));
        let scale = c.real(1.0) + c.real(y.powi(4));
        for (a, b) in op.coeffs().iter().zip(back.coeffs()) {
            prop_assert!(dist(a, b) < Float::with_val(c.prec(), &scale * c.pow10(-(c.digits() as i32 - 3))));
        }
    }

    #[test]
    fn branch_minus_is_conjugate(omega in 0.001f64..0.05, energy in 0.5f64..3.0) {
        let c = ctx();
        let mk = |branch| {
            let params = ModelParams::new(c.real(omega), c.complex(energy, 0.0), Variant::DiracTitchmarsh, branch, Frame::Real);
            build_operator(&params, &c).unwrap()
        };
        let basis = BasisMatrices::new(&c.real(1.0), 16, &c);
        let plus = basis.operator_matrix(&mk(Branch::Plus));
        let minus = basis.operator_matrix(&mk(Branch::Minus));
        prop_assert!(plus.is_symmetric());
        for i in 0..16 {
            for k in 0..16 {
                prop_assert_eq!(Complex::with_val(c.prec(), plus.get(i, k).conj_ref()), minus.get(i, k));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn newton_zeros_match_dense_spectrum(seed in any::<u64>(), n in 2usize..=8, complex: bool) {
        let c = ctx();
        let blocks = random_blocks(&c, n, seed, complex);
        let dense = dense_eigensolve_oracle(&blocks, n).unwrap();
        let tol = c.pow10(-(c.digits() as i32 - 12));
        for ev in dense.iter().step_by(3) {
            let start = Complex::with_val(c.prec(), ev + c.real(1e-3));
            let est = find_eigenvalue(&blocks, &start, n, &c).unwrap();
            let scale = Float::with_val(c.prec(), ev.abs_ref()) + 1u32;
            prop_assert!(dist(&est.lambda, ev) / scale < tol, "{} vs {}", est.lambda, ev);
        }
    }

    #[test]
    fn zeros_scale_with_blocks(seed in any::<u64>(), re in 0.5f64..3.0, im in -1.0f64..1.0) {
        let c = ctx();
        let blocks = random_blocks(&c, 3, seed, false);
        let s = c.complex(re, im);
        let scaled = blocks.scale(&s);
        let dense = dense_eigensolve_oracle(&blocks, 3).unwrap();
        let target = &dense[0];
        let est = find_eigenvalue(&blocks, &Complex::with_val(c.prec(), target + c.real(1e-3)), 3, &c).unwrap();
        let mapped = Complex::with_val(c.prec(), &est.lambda * &s);
        let seed_scaled = Complex::with_val(c.prec(), &mapped + c.real(1e-3));
        let est_s = find_eigenvalue(&scaled, &seed_scaled, 3, &c).unwrap();
        let scale = Float::with_val(c.prec(), mapped.abs_ref()) + 1u32;
        prop_assert!(dist(&est_s.lambda, &mapped) / scale < c.pow10(-(c.digits() as i32 - 5)));
    }

    #[test]
    fn zeros_follow_diagonal_shift(seed in any::<u64>(), shift in -5.0f64..5.0) {
        let c = ctx();
        let blocks = random_blocks(&c, 3, seed, true);
        let s = c.complex(shift, 0.0);
        let moved = shifted(&blocks, &s);
        let dense = dense_eigensolve_oracle(&blocks, 3).unwrap();
        let target = &dense[5];
        let est = find_eigenvalue(&blocks, &Complex::with_val(c.prec(), target + c.real(1e-3)), 3, &c).unwrap();
        let expect = Complex::with_val(c.prec(), &est.lambda + &s);
        let est_m = find_eigenvalue(&moved, &Complex::with_val(c.prec(), &expect + c.real(1e-3)), 3, &c).unwrap();
        prop_assert!(dist(&est_m.lambda, &expect) < c.pow10(-(c.digits() as i32 - 5)));
    }

    #[test]
    fn rescaling_threshold_is_invisible(seed in any::<u64>(), threshold_exp in 3i32..30) {
        let c = ctx();
        let blocks = random_blocks(&c, 10, seed, true);
        let lambda = c.complex(17.25, 0.4);
        let a = MomentEngine::new(&blocks, 10, &c).unwrap().det(&lambda);
        let c2 = ctx().with_det_rescale_threshold(c.pow10(threshold_exp));
        let b = MomentEngine::new(&blocks, 10, &c2).unwrap().det(&lambda);
        let diff = Float::with_val(c.prec(), a.log_abs() - b.log_abs()).abs();
        prop_assert!(diff < c.pow10(-(c.digits() as i32 - 5)));
        let ratio = a.ratio(&b);
        prop_assert!(dist(&ratio, &c.complex(1.0, 0.0)) < c.pow10(-(c.digits() as i32 - 5)));
    }
}
