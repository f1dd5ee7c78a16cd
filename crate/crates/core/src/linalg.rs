//! Small dense and banded complex linear algebra at arbitrary precision.
//!
//! Everything here works on `rug::Complex` values that all share one binary
//! precision. Summations run in ascending index order so results do not
//! depend on scheduling.

use rug::{Assign, Complex, Float};

use crate::error::{Error, Result};

pub type Mat4 = [[Complex; 4]; 4];

pub fn mat4_zero(prec: u32) -> Mat4 {
    std::array::from_fn(|_| std::array::from_fn(|_| Complex::new(prec)))
}

pub fn mat4_identity(prec: u32) -> Mat4 {
    let mut m = mat4_zero(prec);
    for (i, row) in m.iter_mut().enumerate() {
        row[i].assign(1);
    }
    m
}

pub fn mat4_mul(a: &Mat4, b: &Mat4, prec: u32) -> Mat4 {
    let mut out = mat4_zero(prec);
    for i in 0..4 {
        for j in 0..4 {
            let acc = &mut out[i][j];
            for k in 0..4 {
                *acc += &a[i][k] * &b[k][j];
            }
        }
    }
    out
}

pub fn mat4_sub(a: &Mat4, b: &Mat4, prec: u32) -> Mat4 {
    std::array::from_fn(|i| std::array::from_fn(|j| Complex::with_val(prec, &a[i][j] - &b[i][j])))
}

pub fn mat4_scale(a: &Mat4, s: &Complex, prec: u32) -> Mat4 {
    std::array::from_fn(|i| std::array::from_fn(|j| Complex::with_val(prec, &a[i][j] * s)))
}

pub fn mat4_transpose(a: &Mat4) -> Mat4 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[j][i].clone()))
}

/// Largest binary exponent over all entries (real and imaginary parts).
pub fn mat4_max_exp(a: &Mat4) -> Option<i32> {
    a.iter()
        .flatten()
        .flat_map(|z| [z.real().get_exp(), z.imag().get_exp()])
        .flatten()
        .max()
}

pub fn mat4_max_abs(a: &Mat4, prec: u32) -> Float {
    let mut best = Float::new(prec);
    for z in a.iter().flatten() {
        let m = Float::with_val(prec, z.abs_ref());
        if m > best {
            best = m;
        }
    }
    best
}

/// LU factorization of a 4x4 block with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu4 {
    lu: Mat4,
    perm: [usize; 4],
    swaps: usize,
}

impl Lu4 {
    /// Returns `None` when a pivot is at or below `tiny` (absolute).
    pub fn new(m: &Mat4, tiny: &Float) -> Option<Self> {
        let prec = m[0][0].prec().0;
        let mut lu = m.clone();
        let mut perm = [0, 1, 2, 3];
        let mut swaps = 0;
        for k in 0..4 {
            let mut piv = k;
            let mut best = Float::with_val(prec, lu[k][k].abs_ref());
            for r in k + 1..4 {
                let v = Float::with_val(prec, lu[r][k].abs_ref());
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best <= *tiny {
                return None;
            }
            if piv != k {
                lu.swap(piv, k);
                perm.swap(piv, k);
                swaps += 1;
            }
            let pivot = lu[k][k].clone();
            for r in k + 1..4 {
                let factor = Complex::with_val(prec, &lu[r][k] / &pivot);
                for c in k + 1..4 {
                    let t = Complex::with_val(prec, &factor * &lu[k][c]);
                    lu[r][c] -= t;
                }
                lu[r][k] = factor;
            }
        }
        Some(Self { lu, perm, swaps })
    }

    pub fn det(&self) -> Complex {
        let prec = self.lu[0][0].prec().0;
        let mut d = Complex::with_val(prec, 1);
        for k in 0..4 {
            d *= &self.lu[k][k];
        }
        if self.swaps % 2 == 1 {
            d = -d;
        }
        d
    }

    /// Solves `M X = rhs` column by column.
    pub fn solve(&self, rhs: &Mat4) -> Mat4 {
        let prec = self.lu[0][0].prec().0;
        let mut x: Mat4 = std::array::from_fn(|i| rhs[self.perm[i]].clone());
        for col in 0..4 {
            for i in 1..4 {
                for k in 0..i {
                    let t = Complex::with_val(prec, &self.lu[i][k] * &x[k][col]);
                    x[i][col] -= t;
                }
            }
            for i in (0..4).rev() {
                for k in i + 1..4 {
                    let t = Complex::with_val(prec, &self.lu[i][k] * &x[k][col]);
                    x[i][col] -= t;
                }
                x[i][col] /= &self.lu[i][i];
            }
        }
        x
    }
}

/// Determinant of a 4x4 block (zero if exactly singular).
pub fn mat4_det(m: &Mat4) -> Complex {
    let prec = m[0][0].prec().0;
    match Lu4::new(m, &Float::new(prec)) {
        Some(lu) => lu.det(),
        None => Complex::new(prec),
    }
}

/// Row-major dense complex matrix.
#[derive(Clone, Debug)]
pub struct DenseMatrix {
    n: usize,
    prec: u32,
    data: Vec<Complex>,
}

impl DenseMatrix {
    pub fn zeros(n: usize, prec: u32) -> Self {
        Self {
            n,
            prec,
            data: vec![Complex::new(prec); n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn get(&self, i: usize, j: usize) -> &Complex {
        &self.data[i * self.n + j]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut Complex {
        &mut self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: &Complex) {
        self.data[i * self.n + j].assign(v);
    }

    pub fn mul_vec(&self, v: &[Complex]) -> Vec<Complex> {
        (0..self.n)
            .map(|i| {
                let mut acc = Complex::new(self.prec);
                for (j, vj) in v.iter().enumerate() {
                    acc += self.get(i, j) * vj;
                }
                acc
            })
            .collect()
    }

    /// All eigenvalues via Householder reduction to Hessenberg form followed
    /// by single-shift complex QR with Wilkinson shifts. Sorted by real part,
    /// then imaginary part.
    pub fn eigenvalues(&self) -> Result<Vec<Complex>> {
        let mut h = self.clone();
        h.reduce_to_hessenberg();
        let mut eig = h.hessenberg_qr()?;
        eig.sort_by(|a, b| {
            a.real()
                .partial_cmp(b.real())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.imag().partial_cmp(b.imag()).unwrap_or(std::cmp::Ordering::Equal))
        });
        Ok(eig)
    }

    fn reduce_to_hessenberg(&mut self) {
        let n = self.n;
        let prec = self.prec;
        if n < 3 {
            return;
        }
        for k in 0..n - 2 {
            let mut norm2 = Float::new(prec);
            for i in k + 1..n {
                norm2 += self.get(i, k).clone().norm().real();
            }
            if norm2.is_zero() {
                continue;
            }
            let norm = norm2.sqrt();
            let x0 = self.get(k + 1, k).clone();
            let x0_abs = Float::with_val(prec, x0.abs_ref());
            let phase = if x0_abs.is_zero() {
                Complex::with_val(prec, 1)
            } else {
                Complex::with_val(prec, &x0 / &x0_abs)
            };
            let alpha = -Complex::with_val(prec, &phase * &norm);
            let mut v: Vec<Complex> = (k + 1..n).map(|i| self.get(i, k).clone()).collect();
            v[0] -= &alpha;
            let mut vnorm2 = Float::new(prec);
            for vi in &v {
                vnorm2 += vi.clone().norm().real();
            }
            if vnorm2.is_zero() {
                continue;
            }
            let two_over = Float::with_val(prec, 2) / vnorm2;
            // H <- (I - t v v^H) H
            for j in 0..n {
                let mut s = Complex::new(prec);
                for (idx, vi) in v.iter().enumerate() {
                    s += Complex::with_val(prec, vi.conj_ref()) * self.get(k + 1 + idx, j);
                }
                s *= &two_over;
                for (idx, vi) in v.iter().enumerate() {
                    let t = Complex::with_val(prec, vi * &s);
                    *self.get_mut(k + 1 + idx, j) -= t;
                }
            }
            // H <- H (I - t v v^H)
            for i in 0..n {
                let mut s = Complex::new(prec);
                for (idx, vi) in v.iter().enumerate() {
                    s += self.get(i, k + 1 + idx) * vi;
                }
                s *= &two_over;
                for (idx, vi) in v.iter().enumerate() {
                    let t = Complex::with_val(prec, &s * &Complex::with_val(prec, vi.conj_ref()));
                    *self.get_mut(i, k + 1 + idx) -= t;
                }
            }
            for i in k + 2..n {
                self.get_mut(i, k).assign(0);
            }
        }
    }

    fn hessenberg_qr(&mut self) -> Result<Vec<Complex>> {
        let n = self.n;
        let prec = self.prec;
        let eps = Float::with_val(prec, Float::i_exp(1, 2 - prec as i32));
        let mut eig = Vec::with_capacity(n);
        if n == 0 {
            return Ok(eig);
        }
        let mut hi = n - 1;
        let mut its = 0usize;
        let mut total = 0usize;
        loop {
            if hi == 0 {
                eig.push(self.get(0, 0).clone());
                break;
            }
            let mut l = hi;
            while l > 0 {
                let sub = Float::with_val(prec, self.get(l, l - 1).abs_ref());
                let scale = Float::with_val(prec, self.get(l, l).abs_ref())
                    + Float::with_val(prec, self.get(l - 1, l - 1).abs_ref());
                if sub <= Float::with_val(prec, &eps * &scale) || sub.is_zero() {
                    self.get_mut(l, l - 1).assign(0);
                    break;
                }
                l -= 1;
            }
            if l == hi {
                eig.push(self.get(hi, hi).clone());
                hi -= 1;
                its = 0;
                continue;
            }
            its += 1;
            total += 1;
            if total > 60 * n {
                return Err(Error::NoConvergence { iterations: total });
            }
            let shift = if its % 11 == 10 {
                let mut s = self.get(hi, hi).clone();
                s += Float::with_val(prec, self.get(hi, hi - 1).abs_ref());
                s
            } else {
                self.wilkinson_shift(hi)
            };
            for i in l..=hi {
                *self.get_mut(i, i) -= &shift;
            }
            let mut rotations = Vec::with_capacity(hi - l);
            for k in l..hi {
                let a = self.get(k, k).clone();
                let b = self.get(k + 1, k).clone();
                let r = (Complex::with_val(prec, a.norm_ref()).real().clone()
                    + Complex::with_val(prec, b.norm_ref()).real())
                .sqrt();
                let (c, s) = if r.is_zero() {
                    (Complex::with_val(prec, 1), Complex::new(prec))
                } else {
                    (Complex::with_val(prec, &a / &r), Complex::with_val(prec, &b / &r))
                };
                let cc = Complex::with_val(prec, c.conj_ref());
                let sc = Complex::with_val(prec, s.conj_ref());
                for j in k..=hi {
                    let x = self.get(k, j).clone();
                    let y = self.get(k + 1, j).clone();
                    let nx = Complex::with_val(prec, &cc * &x) + Complex::with_val(prec, &sc * &y);
                    let ny = Complex::with_val(prec, &c * &y) - Complex::with_val(prec, &s * &x);
                    self.set(k, j, &nx);
                    self.set(k + 1, j, &ny);
                }
                rotations.push((c, s));
            }
            for (offset, (c, s)) in rotations.iter().enumerate() {
                let k = l + offset;
                let cc = Complex::with_val(prec, c.conj_ref());
                let sc = Complex::with_val(prec, s.conj_ref());
                for i in l..=(k + 2).min(hi) {
                    let x = self.get(i, k).clone();
                    let y = self.get(i, k + 1).clone();
                    let nx = Complex::with_val(prec, &x * c) + Complex::with_val(prec, &y * s);
                    let ny = Complex::with_val(prec, &y * &cc) - Complex::with_val(prec, &x * &sc);
                    self.set(i, k, &nx);
                    self.set(i, k + 1, &ny);
                }
            }
            for i in l..=hi {
                *self.get_mut(i, i) += &shift;
            }
        }
        Ok(eig)
    }

    /// Eigenvalue of the trailing 2x2 block closest to its last diagonal entry.
    fn wilkinson_shift(&self, hi: usize) -> Complex {
        let prec = self.prec;
        let a = self.get(hi - 1, hi - 1);
        let b = self.get(hi - 1, hi);
        let c = self.get(hi, hi - 1);
        let d = self.get(hi, hi);
        let half_tr = Complex::with_val(prec, a + d) / 2;
        let det = Complex::with_val(prec, a * d) - Complex::with_val(prec, b * c);
        let disc = (Complex::with_val(prec, &half_tr * &half_tr) - det).sqrt();
        let r1 = Complex::with_val(prec, &half_tr + &disc);
        let r2 = Complex::with_val(prec, &half_tr - &disc);
        let d1 = Complex::with_val(prec, &r1 - d).abs().real().clone();
        let d2 = Complex::with_val(prec, &r2 - d).abs().real().clone();
        if d1 <= d2 {
            r1
        } else {
            r2
        }
    }

    /// Solves `self * x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[Complex]) -> Result<Vec<Complex>> {
        let n = self.n;
        let prec = self.prec;
        let mut a = self.data.clone();
        let mut x: Vec<Complex> = b.to_vec();
        for k in 0..n {
            let mut piv = k;
            let mut best = Float::with_val(prec, a[k * n + k].abs_ref());
            for r in k + 1..n {
                let v = Float::with_val(prec, a[r * n + k].abs_ref());
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best.is_zero() {
                return Err(Error::Domain("singular dense system".into()));
            }
            if piv != k {
                for c in 0..n {
                    a.swap(k * n + c, piv * n + c);
                }
                x.swap(k, piv);
            }
            let pivot = a[k * n + k].clone();
            for r in k + 1..n {
                let f = Complex::with_val(prec, &a[r * n + k] / &pivot);
                if f.is_zero() {
                    continue;
                }
                for c in k + 1..n {
                    let t = Complex::with_val(prec, &f * &a[k * n + c]);
                    a[r * n + c] -= t;
                }
                let t = Complex::with_val(prec, &f * &x[k]);
                x[r] -= t;
            }
        }
        for i in (0..n).rev() {
            for c in i + 1..n {
                let t = Complex::with_val(prec, &a[i * n + c] * &x[c]);
                x[i] -= t;
            }
            x[i] /= &a[i * n + i];
        }
        Ok(x)
    }
}

/// One row of a banded system, stored over an explicit column window.
#[derive(Clone, Debug)]
struct BandRow {
    start: usize,
    vals: Vec<Complex>,
}

impl BandRow {
    fn end(&self) -> usize {
        self.start + self.vals.len()
    }

    fn ensure(&mut self, lo: usize, hi: usize, prec: u32) {
        if lo < self.start {
            let mut v = vec![Complex::new(prec); self.start - lo];
            v.append(&mut self.vals);
            self.vals = v;
            self.start = lo;
        }
        if hi > self.end() {
            let extra = hi - self.end();
            self.vals.extend(std::iter::repeat_with(|| Complex::new(prec)).take(extra));
        }
    }

    fn at(&self, col: usize) -> Option<&Complex> {
        if col >= self.start && col < self.end() {
            Some(&self.vals[col - self.start])
        } else {
            None
        }
    }
}

/// Banded matrix with `lower` sub-diagonals and `upper` super-diagonals,
/// solved by Gaussian elimination with partial pivoting.
#[derive(Clone, Debug)]
pub struct BandedSystem {
    n: usize,
    lower: usize,
    prec: u32,
    rows: Vec<BandRow>,
}

impl BandedSystem {
    pub fn new(n: usize, lower: usize, upper: usize, prec: u32) -> Self {
        let rows = (0..n)
            .map(|i| {
                let start = i.saturating_sub(lower);
                let end = (i + upper + 1).min(n);
                BandRow {
                    start,
                    vals: vec![Complex::new(prec); end - start],
                }
            })
            .collect();
        Self { n, lower, prec, rows }
    }

    pub fn set(&mut self, i: usize, j: usize, v: &Complex) {
        let prec = self.prec;
        let row = &mut self.rows[i];
        row.ensure(j, j + 1, prec);
        let start = row.start;
        row.vals[j - start].assign(v);
    }

    pub fn solve(&self, b: &[Complex]) -> Result<Vec<Complex>> {
        let n = self.n;
        let prec = self.prec;
        let mut rows = self.rows.clone();
        let mut x: Vec<Complex> = b.to_vec();
        for k in 0..n {
            let last = (k + self.lower).min(n - 1);
            let mut piv = k;
            let mut best = Float::new(prec);
            for (r, row) in rows.iter().enumerate().take(last + 1).skip(k) {
                if let Some(v) = row.at(k) {
                    let m = Float::with_val(prec, v.abs_ref());
                    if m > best {
                        best = m;
                        piv = r;
                    }
                }
            }
            if best.is_zero() {
                return Err(Error::Domain("singular banded system".into()));
            }
            if piv != k {
                rows.swap(k, piv);
                x.swap(k, piv);
            }
            let (head, tail) = rows.split_at_mut(k + 1);
            let pivot_row = &head[k];
            let pivot = pivot_row.at(k).cloned().expect("pivot present");
            let pend = pivot_row.end();
            for (off, row) in tail.iter_mut().enumerate().take(last - k) {
                let Some(entry) = row.at(k) else { continue };
                if entry.is_zero() {
                    continue;
                }
                let f = Complex::with_val(prec, entry / &pivot);
                row.ensure(k, pend, prec);
                for c in k..pend {
                    if let Some(pv) = pivot_row.at(c) {
                        let t = Complex::with_val(prec, &f * pv);
                        let start = row.start;
                        row.vals[c - start] -= t;
                    }
                }
                let t = Complex::with_val(prec, &f * &x[k]);
                x[k + 1 + off] -= t;
            }
        }
        for i in (0..n).rev() {
            let row = &rows[i];
            for c in i + 1..row.end() {
                if let Some(v) = row.at(c) {
                    let t = Complex::with_val(prec, v * &x[c]);
                    x[i] -= t;
                }
            }
            let d = row.at(i).cloned().expect("diagonal present");
            x[i] /= &d;
        }
        Ok(x)
    }
}

pub fn vec_norm(v: &[Complex]) -> Float {
    let prec = v.first().map(|z| z.prec().0).unwrap_or(64);
    let mut acc = Float::new(prec);
    for z in v {
        acc += Complex::with_val(prec, z.norm_ref()).real();
    }
    acc.sqrt()
}
