//! Dense fp64 kernels shared by the model, the generator and the trainer.
//!
//! Vectors are plain `Vec<f64>` / `&[f64]`. [`Matrix`] is row-major. All
//! reductions accumulate in ascending column order so that results are
//! bitwise reproducible.

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for k in 0..n {
            m.data[k * n + k] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                context: "Matrix::from_vec",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Shape {
                    context: "Matrix::from_rows",
                    expected: cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Contiguous block of rows `start..end`, still row-major.
    pub fn row_block(&self, start: usize, end: usize) -> &[f64] {
        &self.data[start * self.cols..end * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `out[r] = Σ_c W[r,c]·x[c]`, accumulated in ascending `c`.
pub fn matvec(w: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    if w.cols != x.len() {
        return Err(Error::Shape {
            context: "matvec",
            expected: w.cols,
            actual: x.len(),
        });
    }
    let mut out = vec![0.0; w.rows];
    matvec_acc(w, x, &mut out);
    Ok(out)
}

/// `out += W·x`. Shapes are the caller's responsibility.
#[inline]
pub(crate) fn matvec_acc(w: &Matrix, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.cols, x.len());
    debug_assert_eq!(w.rows, out.len());
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w.data[r * w.cols..(r + 1) * w.cols];
        let mut s = 0.0;
        for (a, b) in row.iter().zip(x) {
            s += a * b;
        }
        *o += s;
    }
}

/// `out += Wᵀ·z`.
#[inline]
pub(crate) fn matvec_t_acc(w: &Matrix, z: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.rows, z.len());
    debug_assert_eq!(w.cols, out.len());
    for (r, &zr) in z.iter().enumerate() {
        if zr == 0.0 {
            continue;
        }
        let row = &w.data[r * w.cols..(r + 1) * w.cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * zr;
        }
    }
}

/// `M += a ⊗ b` (outer product).
#[inline]
pub(crate) fn outer_acc(m: &mut Matrix, a: &[f64], b: &[f64]) {
    debug_assert_eq!(m.rows, a.len());
    debug_assert_eq!(m.cols, b.len());
    for (r, &ar) in a.iter().enumerate() {
        if ar == 0.0 {
            continue;
        }
        let row = &mut m.data[r * m.cols..(r + 1) * m.cols];
        for (o, bc) in row.iter_mut().zip(b) {
            *o += ar * bc;
        }
    }
}

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn sigmoid(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| sigmoid_scalar(v)).collect()
}

/// Derivative of the logistic function expressed through its output `y`.
pub fn dsigmoid(y: &[f64]) -> Vec<f64> {
    y.iter().map(|&v| v * (1.0 - v)).collect()
}

pub fn tanh_v(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.tanh()).collect()
}

/// Derivative of tanh expressed through its output `y`.
pub fn dtanh(y: &[f64]) -> Vec<f64> {
    y.iter().map(|&v| 1.0 - v * v).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Seeded pseudo-random source.
///
/// The stream is ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`). Every
/// derived draw is defined here so other implementations can reproduce it:
///
/// * unit uniform: `(next_u64 >> 11) · 2⁻⁵³`, in `[0, 1)`;
/// * `uniform(lo, hi)`: `lo + (hi − lo)·u`, redrawn if rounding lands on `hi`;
/// * `below(n)`: high 64 bits of the 128-bit product `next_u64 · n`;
/// * `normal()`: Box–Muller cosine branch, `√(−2 ln(1 − u₁))·cos(2π u₂)`;
/// * `shuffle`: Fisher–Yates from the last index down using `below(i + 1)`.
pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent child stream for `(seed, stream)`, mixed with SplitMix64.
    pub fn derived(seed: u64, stream: u64) -> Self {
        let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        Self::new(z ^ (z >> 31))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        loop {
            let v = lo + (hi - lo) * self.unit();
            if v < hi {
                return v;
            }
        }
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.unit();
        let u2 = self.unit();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn exponential(&mut self, mean: f64) -> f64 {
        -mean * (1.0 - self.unit()).ln()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// `n` draws from `[lo, hi)` using [`SeededRng::uniform`].
pub fn rng_uniform(seed: u64, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Contract(format!(
            "rng_uniform requires finite lo < hi, got [{lo}, {hi})"
        )));
    }
    let mut rng = SeededRng::new(seed);
    Ok((0..n).map(|_| rng.uniform(lo, hi)).collect())
}
