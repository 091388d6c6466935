//! Dense complex least squares for the combiner regression.
//!
//! Solves min ||A x - b||^2 (+ ridge ||x||^2) for tall complex matrices
//! via Householder QR; the contract is residual orthogonality
//! A^H (A x - b) ~ 0 at solver tolerance, checked in tests against an
//! independent normal-equations route.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Column-major dense complex matrix; rows are training frames, columns
/// are combining terms.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl DesignMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::ZERO; rows * cols],
        }
    }

    /// Builds from row slices; every row must have the same length.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::SizeMismatch {
                    what: "design matrix row",
                    expected: c,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[c * self.rows + r]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[c * self.rows + r] = v;
    }

    /// Writes one row; `values` must match the column count.
    pub fn set_row(&mut self, r: usize, values: &[Complex64]) -> Result<()> {
        if values.len() != self.cols {
            return Err(Error::SizeMismatch {
                what: "design matrix row",
                expected: self.cols,
                got: values.len(),
            });
        }
        for (c, &v) in values.iter().enumerate() {
            self.set(r, c, v);
        }
        Ok(())
    }

    fn col(&self, c: usize) -> &[Complex64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    /// A x for a coefficient vector x.
    pub fn mul_vec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.cols {
            return Err(Error::SizeMismatch {
                what: "matrix-vector product",
                expected: self.cols,
                got: x.len(),
            });
        }
        let mut y = vec![Complex64::ZERO; self.rows];
        for (c, &xc) in x.iter().enumerate() {
            if xc == Complex64::ZERO {
                continue;
            }
            for (yr, &a) in y.iter_mut().zip(self.col(c)) {
                *yr += a * xc;
            }
        }
        Ok(y)
    }
}

/// Least-squares solution plus diagnostics.
#[derive(Debug, Clone)]
pub struct Solution {
    pub coeffs: Vec<Complex64>,
    /// ||A x - b|| over the original (unaugmented) system.
    pub residual_norm: f64,
    /// max |R_ii| / min |R_ii| from the QR factor; a cheap conditioning
    /// indicator, not a tight condition number.
    pub condition_estimate: f64,
}

/// Result of RMS column equilibration.
#[derive(Debug, Clone)]
pub struct ScaledDesign {
    pub matrix: DesignMatrix,
    /// Per-column divisors; coefficients of the scaled system map back
    /// as x_original[c] = x_scaled[c] / scales[c].
    pub scales: Vec<f64>,
    /// Columns whose RMS was zero (scale left at 1 and reported).
    pub zero_columns: Vec<usize>,
}

impl ScaledDesign {
    /// Maps coefficients of the scaled system back to the original one.
    pub fn unscale_coeffs(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        coeffs
            .iter()
            .zip(&self.scales)
            .map(|(&c, &s)| c / s)
            .collect()
    }
}

/// Divides every column by its root-mean-square magnitude. Fifth-order
/// feature columns scale like |r|^5, so without this the QR pivots span
/// many decades for no numerical benefit.
pub fn column_scale(a: &DesignMatrix) -> ScaledDesign {
    let mut scaled = a.clone();
    let mut scales = vec![1.0; a.cols()];
    let mut zero_columns = Vec::new();
    for c in 0..a.cols() {
        let ss: f64 = a.col(c).iter().map(|v| v.norm_sqr()).sum();
        let rms = (ss / a.rows() as f64).sqrt();
        if rms == 0.0 {
            zero_columns.push(c);
            continue;
        }
        scales[c] = rms;
        let inv = 1.0 / rms;
        for r in 0..a.rows() {
            scaled.set(r, c, a.get(r, c) * inv);
        }
    }
    ScaledDesign {
        matrix: scaled,
        scales,
        zero_columns,
    }
}

/// Relative pivot threshold below which the matrix is reported
/// rank-deficient (ridge = 0 only).
const RANK_TOL: f64 = 1e-12;

/// Minimizes ||A x - b||^2 + ridge ||x||^2 by Householder QR.
///
/// Requires rows >= cols. With ridge = 0 a rank-deficient factorization
/// is reported as [`Error::RankDeficient`] rather than silently
/// regularized; the documented fallback is a small explicit ridge.
pub fn lstsq(a: &DesignMatrix, b: &[Complex64], ridge: f64) -> Result<Solution> {
    if b.len() != a.rows() {
        return Err(Error::SizeMismatch {
            what: "right-hand side",
            expected: a.rows(),
            got: b.len(),
        });
    }
    if a.rows() < a.cols() {
        return Err(Error::Underdetermined {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if ridge < 0.0 {
        return Err(Error::NonPositive("ridge (>= 0)"));
    }

    let n = a.cols();
    let (mut work, mut rhs) = if ridge > 0.0 {
        // Augment with sqrt(ridge) I rows: same minimizer, same QR path.
        let m = a.rows() + n;
        let mut w = DesignMatrix::zeros(m, n);
        for c in 0..n {
            for r in 0..a.rows() {
                w.set(r, c, a.get(r, c));
            }
            w.set(a.rows() + c, c, Complex64::new(ridge.sqrt(), 0.0));
        }
        let mut rhs = b.to_vec();
        rhs.resize(m, Complex64::ZERO);
        (w, rhs)
    } else {
        (a.clone(), b.to_vec())
    };

    let coeffs = qr_solve_in_place(&mut work, &mut rhs)?;

    let residual = a.mul_vec(&coeffs)?;
    let residual_norm = residual
        .iter()
        .zip(b)
        .map(|(ax, bb)| (ax - bb).norm_sqr())
        .sum::<f64>()
        .sqrt();

    // Diagonal of R sits in `work` after factorization.
    let mut dmax = 0.0f64;
    let mut dmin = f64::INFINITY;
    for c in 0..n {
        let d = work.get(c, c).norm();
        dmax = dmax.max(d);
        dmin = dmin.min(d);
    }
    let condition_estimate = if dmin > 0.0 { dmax / dmin } else { f64::INFINITY };

    Ok(Solution {
        coeffs,
        residual_norm,
        condition_estimate,
    })
}

/// Householder QR with immediate application to the right-hand side,
/// then back substitution. On return `a` holds R in its upper triangle.
fn qr_solve_in_place(a: &mut DesignMatrix, b: &mut [Complex64]) -> Result<Vec<Complex64>> {
    let m = a.rows();
    let n = a.cols();
    let mut v = vec![Complex64::ZERO; m];
    let mut diag_max = 0.0f64;

    for k in 0..n {
        // Householder vector for column k below the diagonal.
        let mut norm_sq = 0.0;
        for r in k..m {
            norm_sq += a.get(r, k).norm_sqr();
        }
        let norm = norm_sq.sqrt();
        let akk = a.get(k, k);
        diag_max = diag_max.max(norm);
        if norm <= RANK_TOL * diag_max.max(1e-300) {
            return Err(Error::RankDeficient { col: k });
        }
        // alpha = -sign(akk) * norm, with sign(0) = 1.
        let phase = if akk.norm() > 0.0 {
            akk / akk.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let alpha = -phase * norm;
        for r in k..m {
            v[r] = a.get(r, k);
        }
        v[k] -= alpha;
        let v_norm_sq: f64 = v[k..m].iter().map(|z| z.norm_sqr()).sum();
        if v_norm_sq == 0.0 {
            // Column already triangular; nothing to reflect.
            a.set(k, k, alpha);
            continue;
        }
        let beta = 2.0 / v_norm_sq;

        // Apply H = I - beta v v^H to the remaining columns.
        a.set(k, k, alpha);
        for r in k + 1..m {
            a.set(r, k, Complex64::ZERO);
        }
        for c in k + 1..n {
            let mut dot = Complex64::ZERO;
            for r in k..m {
                dot += v[r].conj() * a.get(r, c);
            }
            dot *= beta;
            for r in k..m {
                let val = a.get(r, c) - v[r] * dot;
                a.set(r, c, val);
            }
        }
        // And to the right-hand side.
        let mut dot = Complex64::ZERO;
        for r in k..m {
            dot += v[r].conj() * b[r];
        }
        dot *= beta;
        for r in k..m {
            b[r] -= v[r] * dot;
        }
    }

    // Back substitution on R x = Q^H b.
    let mut x = vec![Complex64::ZERO; n];
    for k in (0..n).rev() {
        let mut acc = b[k];
        for c in k + 1..n {
            acc -= a.get(k, c) * x[c];
        }
        x[k] = acc / a.get(k, k);
    }
    Ok(x)
}
