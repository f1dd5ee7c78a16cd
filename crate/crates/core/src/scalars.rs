//! Arbitrary-precision scalars and their decimal text form.
//!
//! All numerics run on MPFR floats (`rug::Float`) and MPC complex numbers
//! (`rug::Complex`) at the binary precision implied by a [`PrecisionContext`].
//! The decimal format mirrors the way energies are usually tabulated:
//! `1.0005017620 + i 1.17374083059e-144`. The real part carries an exponent
//! only when it is nonzero, the imaginary part always does.

use std::f64::consts::LOG2_10;

use rug::ops::Pow;
use rug::{Complex, Float};

use crate::error::{Error, Result};

pub type HpReal = Float;
pub type HpComplex = Complex;

pub const MIN_DIGITS: u32 = 30;
pub const MIN_GUARD_DIGITS: u32 = 5;
pub const DEFAULT_GUARD_DIGITS: u32 = 10;

/// Decimal-digit budget shared by every downstream computation.
#[derive(Clone, Debug)]
pub struct PrecisionContext {
    digits: u32,
    guard_digits: u32,
    newton_tol: Float,
    det_rescale_threshold: Float,
}

pub fn make_context(digits: u32) -> Result<PrecisionContext> {
    PrecisionContext::new(digits)
}

impl PrecisionContext {
    pub fn new(digits: u32) -> Result<Self> {
        Self::with_guard_digits(digits, DEFAULT_GUARD_DIGITS)
    }

    pub fn with_guard_digits(digits: u32, guard_digits: u32) -> Result<Self> {
        if digits < MIN_DIGITS {
            return Err(Error::DigitsBelowMinimum {
                digits,
                minimum: MIN_DIGITS,
            });
        }
        if guard_digits < MIN_GUARD_DIGITS {
            return Err(Error::GuardDigitsBelowMinimum {
                guard: guard_digits,
                minimum: MIN_GUARD_DIGITS,
            });
        }
        let prec = bits_for_digits(digits + guard_digits);
        let ten = Float::with_val(prec, 10);
        let newton_tol = ten.clone().pow(-(digits as i32 - 10));
        let det_rescale_threshold = ten.pow(100);
        Ok(Self {
            digits,
            guard_digits,
            newton_tol,
            det_rescale_threshold,
        })
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    pub fn guard_digits(&self) -> u32 {
        self.guard_digits
    }

    /// Decimal digits actually carried by every scalar.
    pub fn working_digits(&self) -> u32 {
        self.digits + self.guard_digits
    }

    /// Binary precision of every scalar created through this context.
    pub fn prec(&self) -> u32 {
        bits_for_digits(self.working_digits())
    }

    pub fn newton_tol(&self) -> &Float {
        &self.newton_tol
    }

    pub fn det_rescale_threshold(&self) -> &Float {
        &self.det_rescale_threshold
    }

    /// Replaces the renormalization threshold. Mostly useful to show that the
    /// determinant bookkeeping does not depend on it.
    pub fn with_det_rescale_threshold(mut self, threshold: Float) -> Self {
        self.det_rescale_threshold = Float::with_val(self.prec(), threshold);
        self
    }

    /// Unit roundoff at working precision, as a decimal power.
    pub fn epsilon(&self) -> Float {
        self.pow10(-(self.working_digits() as i32))
    }

    pub fn pow10(&self, exp: i32) -> Float {
        Float::with_val(self.prec(), 10).pow(exp)
    }

    pub fn real(&self, value: f64) -> Float {
        Float::with_val(self.prec(), value)
    }

    pub fn int(&self, value: i64) -> Float {
        Float::with_val(self.prec(), value)
    }

    pub fn parse_real(&self, text: &str) -> Result<Float> {
        parse_real(text.trim(), self.prec())
    }

    pub fn complex(&self, re: f64, im: f64) -> Complex {
        Complex::with_val(self.prec(), (re, im))
    }

    pub fn complex_from(&self, re: &Float, im: &Float) -> Complex {
        Complex::with_val(self.prec(), (re, im))
    }

    pub fn to_complex(&self, re: &Float) -> Complex {
        Complex::with_val(self.prec(), re)
    }

    pub fn czero(&self) -> Complex {
        Complex::new(self.prec())
    }

    pub fn pi(&self) -> Float {
        Float::with_val(self.prec(), rug::float::Constant::Pi)
    }

    pub fn parse_complex(&self, text: &str) -> Result<Complex> {
        parse_complex(text, self.prec())
    }
}

fn bits_for_digits(digits: u32) -> u32 {
    (digits as f64 * LOG2_10).ceil() as u32 + 8
}

fn parse_real(text: &str, prec: u32) -> Result<Float> {
    let parsed = Float::parse(text).map_err(|_| Error::Parse(text.to_string()))?;
    Ok(Float::with_val(prec, parsed))
}

/// Parses `a`, `a + i b` or `a - i b`.
pub fn parse_complex(text: &str, prec: u32) -> Result<Complex> {
    let text = text.trim();
    let Some(pos) = text.find('i') else {
        let re = parse_real(text, prec)?;
        return Ok(Complex::with_val(prec, re));
    };
    let head = text[..pos].trim_end();
    let (re_text, negative) = match head.chars().last() {
        Some('+') => (&head[..head.len() - 1], false),
        Some('-') => (&head[..head.len() - 1], true),
        _ => return Err(Error::Parse(text.to_string())),
    };
    let re = parse_real(re_text.trim(), prec)?;
    let mut im = parse_real(text[pos + 1..].trim(), prec)?;
    if negative {
        im = -im;
    }
    Ok(Complex::with_val(prec, (re, im)))
}

/// Formats a real number with `digits` significant digits as `d.ddd` or
/// `d.ddde<exp>`.
pub fn format_real(x: &Float, digits: usize, force_exponent: bool) -> String {
    let digits = digits.max(1);
    if x.is_zero() {
        let mut out = String::from("0");
        if digits > 1 {
            out.push('.');
            out.extend(std::iter::repeat('0').take(digits - 1));
        }
        if force_exponent {
            out.push_str("e0");
        }
        return out;
    }
    let (negative, mantissa, exp) = x.to_sign_string_exp(10, Some(digits));
    let exp10 = exp.map(|e| e as i64 - 1).unwrap_or(0);
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    out.push_str(&mantissa[..1]);
    if mantissa.len() > 1 {
        out.push('.');
        out.push_str(&mantissa[1..]);
    }
    if force_exponent || exp10 != 0 {
        out.push_str(&format!("e{exp10}"));
    }
    out
}

/// Complex value with separate significant-digit counts per component.
pub fn format_complex(x: &Complex, re_digits: usize, im_digits: usize) -> String {
    let re = format_real(x.real(), re_digits, false);
    let im = x.imag();
    let sign = if im.is_sign_negative() && !im.is_zero() {
        '-'
    } else {
        '+'
    };
    let im_abs = Float::with_val(im.prec(), im.abs_ref());
    format!("{re} {sign} i {}", format_real(&im_abs, im_digits, true))
}

pub fn to_decimal_string(x: &Complex, digits: usize) -> String {
    format_complex(x, digits, digits)
}

/// `|a - b| / max(|a|, |b|)` with zero treated as exact agreement.
pub fn relative_difference(a: &Float, b: &Float) -> Float {
    let diff = Float::with_val(a.prec(), a - b).abs();
    let scale = Float::with_val(a.prec(), a.abs_ref()).max(&Float::with_val(a.prec(), b.abs_ref()));
    if scale.is_zero() {
        return scale;
    }
    diff / scale
}

pub fn cabs(x: &Complex) -> Float {
    Float::with_val(x.prec().0, x.abs_ref())
}

pub fn to_f64(x: &Float) -> f64 {
    x.to_f64()
}
