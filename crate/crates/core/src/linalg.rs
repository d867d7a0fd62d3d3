//! Small dense linear-algebra helpers shared by the engines.
//!
//! Dense factorizations are delegated to `faer`; this module adds the pieces
//! the engines need on top: compensated summation, Lanczos tridiagonalization
//! with full reorthogonalization, and exponentials of real symmetric
//! generators.

use faer::{Mat, Side};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Neumaier-compensated accumulator. Sums are taken in the order values are
/// pushed, so a fixed push order gives bit-identical results.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of complex values (real and imaginary parts separately).
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedComplexSum {
    re: CompensatedSum,
    im: CompensatedSum,
}

impl CompensatedComplexSum {
    pub fn add(&mut self, z: C64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> C64 {
        C64::new(self.re.value(), self.im.value())
    }
}

/// Output of a Lanczos run: the tridiagonal coefficients and the orthonormal
/// Krylov basis (one vector per row).
#[derive(Clone, Debug)]
pub struct Tridiagonal {
    pub diagonal: Vec<f64>,
    pub off_diagonal: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
}

impl Tridiagonal {
    /// Largest deviation of the basis Gram matrix from the identity.
    pub fn orthogonality_error(&self) -> f64 {
        let k = self.basis.len();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in 0..=i {
                let dot: CompensatedSum = self.basis[i]
                    .iter()
                    .zip(&self.basis[j])
                    .map(|(a, b)| a * b)
                    .collect();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot.value() - target).abs());
            }
        }
        worst
    }

    /// Eigenvalues of the tridiagonal matrix, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.diagonal.len();
        let t = Mat::<f64>::from_fn(n, n, |i, j| {
            if i == j {
                self.diagonal[i]
            } else if i == j + 1 {
                self.off_diagonal[j]
            } else if j == i + 1 {
                self.off_diagonal[i]
            } else {
                0.0
            }
        });
        let mut ev = t
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Numeric(format!("tridiagonal eigenvalues: {e:?}")))?;
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x * y)
        .collect::<CompensatedSum>()
        .value()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Symmetric Lanczos with full (twice-iterated Gram-Schmidt)
/// reorthogonalization against every previous basis vector and against the
/// optional `deflate` vectors.
///
/// Stops after `steps` vectors or as soon as the Krylov space becomes
/// invariant.
pub fn lanczos(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    seed: &[f64],
    steps: usize,
    deflate: &[Vec<f64>],
) -> Result<Tridiagonal> {
    let n = seed.len();
    let mut q = seed.to_vec();
    for d in deflate {
        let c = dot(&q, d);
        q.iter_mut().zip(d).for_each(|(x, y)| *x -= c * y);
    }
    let q_norm = norm(&q);
    if !(q_norm > 0.0) {
        return Err(Error::InvalidParameter("Lanczos seed vector has zero norm".into()));
    }
    q.iter_mut().for_each(|x| *x /= q_norm);

    let mut out = Tridiagonal {
        diagonal: Vec::new(),
        off_diagonal: Vec::new(),
        basis: vec![q],
    };
    let mut w = vec![0.0; n];
    let scale_floor = 1e-12;
    let mut scale = 0.0f64;
    loop {
        let k = out.basis.len() - 1;
        apply(&out.basis[k], &mut w);
        let alpha = dot(&w, &out.basis[k]);
        out.diagonal.push(alpha);
        scale = scale.max(alpha.abs());
        if out.basis.len() >= steps.min(n) {
            break;
        }
        for _ in 0..2 {
            for v in deflate.iter().chain(out.basis.iter()) {
                let c = dot(&w, v);
                w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
            }
        }
        let beta = norm(&w);
        if beta <= scale_floor * scale.max(1.0) {
            break;
        }
        out.off_diagonal.push(beta);
        out.basis.push(w.iter().map(|x| x / beta).collect());
    }
    Ok(out)
}

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
pub fn symmetric_eigen(h: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("symmetric eigensolver: {e:?}")))?;
    let s = evd.S().column_vector();
    let values: Vec<f64> = (0..h.nrows()).map(|i| s[i]).collect();
    Ok((values, evd.U().to_owned()))
}

/// `exp(factor * h)` for real symmetric `h` and a complex scalar `factor`
/// (`-i dt` for real time, `-dt` for imaginary time).
pub fn exp_symmetric(h: &Mat<f64>, factor: C64) -> Result<Mat<C64>> {
    let (values, vectors) = symmetric_eigen(h)?;
    let n = h.nrows();
    let phases: Vec<C64> = values.iter().map(|&l| (factor * l).exp()).collect();
    Ok(Mat::from_fn(n, n, |i, j| {
        let mut acc = CompensatedComplexSum::default();
        for (k, p) in phases.iter().enumerate() {
            acc.add(p * (vectors[(i, k)] * vectors[(j, k)]));
        }
        acc.value()
    }))
}
