//! Dense complex LU factorisation with partial pivoting.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Square complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// `P A = L U` with unit lower `L` packed below the diagonal of `lu`.
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: ComplexMatrix,
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn factor(a: &ComplexMatrix) -> Result<Self> {
        let n = a.dim();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.norm_1();
        for k in 0..n {
            let (pivot_row, pivot_abs) = (k..n)
                .map(|i| (i, lu.get(i, k).norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs.is_nan() || pivot_abs <= f64::EPSILON * scale {
                return Err(Error::Numerical(format!("matrix is singular at column {k}")));
            }
            if pivot_row != k {
                for j in 0..n {
                    let tmp = lu.get(k, j);
                    lu.set(k, j, lu.get(pivot_row, j));
                    lu.set(pivot_row, j, tmp);
                }
                perm.swap(k, pivot_row);
            }
            let pivot = lu.get(k, k);
            for i in k + 1..n {
                let factor = lu.get(i, k) / pivot;
                lu.set(i, k, factor);
                for j in k + 1..n {
                    let v = lu.get(i, j) - factor * lu.get(k, j);
                    lu.set(i, j, v);
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.lu.dim();
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let v = x[i] - self.lu.get(i, j) * x[j];
                x[i] = v;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let v = x[i] - self.lu.get(i, j) * x[j];
                x[i] = v;
            }
            x[i] /= self.lu.get(i, i);
        }
        x
    }

    /// Solves `Aᴴ x = b`.
    pub fn solve_adjoint(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.lu.dim();
        // Aᴴ = Uᴴ Lᴴ P, so solve Uᴴ w = b, then Lᴴ v = w, then undo P.
        let mut w = b.to_vec();
        for i in 0..n {
            for j in 0..i {
                let v = w[i] - self.lu.get(j, i).conj() * w[j];
                w[i] = v;
            }
            w[i] /= self.lu.get(i, i).conj();
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let v = w[i] - self.lu.get(j, i).conj() * w[j];
                w[i] = v;
            }
        }
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = w[i];
        }
        x
    }

    /// Lower estimate of ‖A⁻¹‖₁ by Hager's method with Higham's
    /// refinements, using a handful of solves instead of the full inverse.
    pub fn inverse_norm_1_estimate(&self) -> f64 {
        let n = self.lu.dim();
        if n == 0 {
            return 0.0;
        }
        let norm_1 = |v: &[Complex64]| v.iter().map(|c| c.norm()).sum::<f64>();
        let sign = |v: &[Complex64]| -> Vec<Complex64> {
            v.iter()
                .map(|c| if c.norm() > 0.0 { c / c.norm() } else { Complex64::new(1.0, 0.0) })
                .collect()
        };
        let mut x = vec![Complex64::new(1.0 / n as f64, 0.0); n];
        let mut y = self.solve(&x);
        let mut estimate = norm_1(&y);
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let z = self.solve_adjoint(&sign(&y));
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, c)| (i, c.norm()))
                .fold((0, -1.0), |b, c| if c.1 > b.1 { c } else { b });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
            if zmax <= ztx || j == last_j {
                break;
            }
            last_j = j;
            x = vec![Complex64::new(0.0, 0.0); n];
            x[j] = Complex64::new(1.0, 0.0);
            y = self.solve(&x);
            let next = norm_1(&y);
            if next <= estimate {
                break;
            }
            estimate = next;
        }
        // Alternating probe guarding against unlucky cancellation.
        let alt: Vec<Complex64> = (0..n)
            .map(|i| {
                let mag = 1.0 + if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
                Complex64::new(if i % 2 == 0 { mag } else { -mag }, 0.0)
            })
            .collect();
        let alt_estimate = 2.0 * norm_1(&self.solve(&alt)) / (3.0 * n as f64);
        estimate.max(alt_estimate)
    }

    /// ‖A⁻¹‖₁, formed column by column from the factors.
    pub fn inverse_norm_1(&self) -> f64 {
        let n = self.lu.dim();
        let mut best: f64 = 0.0;
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            e[j] = Complex64::new(1.0, 0.0);
            let col = self.solve(&e);
            best = best.max(col.iter().map(|c| c.norm()).sum());
            e[j] = Complex64::new(0.0, 0.0);
        }
        best
    }
}

/// Solution of `A x = b` with diagnostics.
#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub x: Vec<Complex64>,
    /// ‖A x − b‖₂ / ‖b‖₂ after refinement.
    pub relative_residual: f64,
    /// Estimate of κ₁(A) = ‖A‖₁ ‖A⁻¹‖₁ (never above the true value).
    pub condition: f64,
}

fn norm_2(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn residual(a: &ComplexMatrix, x: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect()
}

/// LU solve followed by one step of iterative refinement.
pub fn solve(a: &ComplexMatrix, b: &[Complex64]) -> Result<LinearSolution> {
    assert_eq!(a.dim(), b.len(), "dimension mismatch");
    let lu = LuFactors::factor(a)?;
    let mut x = lu.solve(b);
    let r = residual(a, &x, b);
    let dx = lu.solve(&r);
    for (xi, d) in x.iter_mut().zip(&dx) {
        *xi += d;
    }
    let b_norm = norm_2(b);
    let r_norm = norm_2(&residual(a, &x, b));
    let relative_residual = if b_norm > 0.0 { r_norm / b_norm } else { r_norm };
    let condition = a.norm_1() * lu.inverse_norm_1_estimate();
    if !x.iter().all(|c| c.re.is_finite() && c.im.is_finite()) || !condition.is_finite() {
        return Err(Error::Numerical("linear solve produced non-finite values".to_string()));
    }
    Ok(LinearSolution {
        x,
        relative_residual,
        condition,
    })
}
