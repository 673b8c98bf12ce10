//! Small dense matrices, characteristic polynomials and eigen-decomposition.
//!
//! The matrices arising from jet-space linearisations are tiny (at most
//! a handful of rows), so everything here is direct: Faddeev-LeVerrier
//! for the characteristic polynomial, Durand-Kerner with Newton
//! polishing for its roots, Gaussian elimination for null spaces.  When
//! the matrix is exact the characteristic polynomial is exact too, and
//! roots are snapped to rationals that satisfy it exactly.

use num::complex::Complex64;
use num::rational::BigRational;
use num::{BigInt, Zero};

use crate::scalar::Scalar;

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn from_rows(rows: Vec<Vec<T>>) -> Matrix<T> {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Matrix {
            n,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn identity(n: usize) -> Matrix<T> {
        let mut m = Matrix {
            n,
            data: vec![T::zero(); n * n],
        };
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn matmul(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Matrix {
            n,
            data: vec![T::zero(); n * n],
        };
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k).clone();
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let cur = out.get(i, j).clone();
                    out.set(i, j, cur + a.clone() * other.get(k, j).clone());
                }
            }
        }
        out
    }

    pub fn trace(&self) -> T {
        let mut t = T::zero();
        for i in 0..self.n {
            t = t + self.get(i, i).clone();
        }
        t
    }

    pub fn to_f64(&self) -> Matrix<f64> {
        Matrix {
            n: self.n,
            data: self.data.iter().map(|x| x.to_f64()).collect(),
        }
    }
}

/// Monic characteristic polynomial of `m`, returned as coefficients
/// `c[0] + c[1] x + ... + c[n-1] x^(n-1) + x^n` (the leading 1 is
/// implicit).  Faddeev-LeVerrier; exact for exact scalars.
pub fn charpoly<T: Scalar>(m: &Matrix<T>) -> Vec<T> {
    let n = m.dim();
    let mut coeffs = vec![T::zero(); n];
    let mut mk = Matrix::<T>::identity(n);
    for k in 1..=n {
        mk = m.matmul(&mk);
        let c = -(mk.trace() / T::from_int(k as i64));
        for i in 0..n {
            let cur = mk.get(i, i).clone();
            mk.set(i, i, cur + c.clone());
        }
        coeffs[n - k] = c;
    }
    coeffs
}

fn poly_eval_c(coeffs: &[f64], z: Complex64) -> Complex64 {
    // monic with implicit leading 1
    let mut acc = Complex64::new(1.0, 0.0);
    for c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

fn poly_deriv_eval_c(coeffs: &[f64], z: Complex64) -> Complex64 {
    let n = coeffs.len();
    let mut acc = Complex64::new(n as f64, 0.0);
    for (k, c) in coeffs.iter().enumerate().skip(1).rev() {
        acc = acc * z + c * k as f64;
    }
    acc
}

/// All complex roots of a monic real polynomial (coefficients low to
/// high, leading 1 implicit).  Durand-Kerner followed by a few Newton
/// steps on each root.
pub fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len();
    if n == 0 {
        return vec![];
    }
    let radius = 1.0
        + coeffs
            .iter()
            .fold(0.0f64, |m, c| m.max(c.abs()));
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| seed.powu(k as u32 + 1) * radius)
        .collect();
    for _ in 0..300 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if j != i {
                    denom *= z[i] - z[j];
                }
            }
            if denom.norm() == 0.0 {
                continue;
            }
            let step = poly_eval_c(coeffs, z[i]) / denom;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-14 * radius {
            break;
        }
    }
    for zi in z.iter_mut() {
        for _ in 0..8 {
            let d = poly_deriv_eval_c(coeffs, *zi);
            if d.norm() < 1e-300 {
                break;
            }
            let step = poly_eval_c(coeffs, *zi) / d;
            *zi -= step;
            if step.norm() < 1e-16 * (1.0 + zi.norm()) {
                break;
            }
        }
        // real roots of real polynomials drift a hair off the axis
        if zi.im.abs() < 1e-9 * (1.0 + zi.re.abs()) {
            zi.im = 0.0;
        }
    }
    z
}

fn eval_exact(coeffs: &[BigRational], x: &BigRational) -> BigRational {
    let mut acc = BigRational::from_integer(BigInt::from(1));
    for c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

/// Snaps a numeric root to a nearby small-denominator rational when the
/// exact characteristic polynomial vanishes there.
fn snap_rational(coeffs: &[BigRational], z: Complex64) -> Option<BigRational> {
    if z.im != 0.0 {
        return None;
    }
    for den in 1..=12i64 {
        let num = (z.re * den as f64).round();
        if !num.is_finite() || (z.re * den as f64 - num).abs() > 1e-6 * den as f64 {
            continue;
        }
        let cand = BigRational::new(BigInt::from(num as i64), BigInt::from(den));
        if Zero::is_zero(&eval_exact(coeffs, &cand)) {
            return Some(cand);
        }
    }
    None
}

/// One eigenvalue with its multiplicity and, when available, an exact
/// rational value that the exact characteristic polynomial confirms.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenvalue {
    pub value: Complex64,
    pub multiplicity: usize,
    pub exact: Option<BigRational>,
}

/// Eigenvalues of `m`, sorted by real part descending then imaginary
/// part descending; numerically coincident roots are merged into one
/// entry with a multiplicity.
pub fn eigenvalues<T: Scalar>(m: &Matrix<T>) -> Vec<Eigenvalue> {
    let cp = charpoly(m);
    let cpf: Vec<f64> = cp.iter().map(|c| c.to_f64()).collect();
    let exact_cp: Option<Vec<BigRational>> = if T::EXACT {
        cp.iter().map(|c| c.to_rational()).collect()
    } else {
        None
    };
    let mut roots = poly_roots(&cpf);
    let scale = 1.0 + roots.iter().fold(0.0f64, |a, r| a.max(r.norm()));
    roots.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap()
            .then(b.im.partial_cmp(&a.im).unwrap())
    });
    let mut out: Vec<Eigenvalue> = Vec::new();
    for r in roots {
        if let Some(last) = out.last_mut() {
            if (last.value - r).norm() <= 1e-7 * scale {
                last.multiplicity += 1;
                continue;
            }
        }
        let exact = exact_cp.as_deref().and_then(|c| snap_rational(c, r));
        let value = match &exact {
            Some(q) => Complex64::new(Scalar::to_f64(q), 0.0),
            None => r,
        };
        out.push(Eigenvalue {
            value,
            multiplicity: 1,
            exact,
        });
    }
    out
}

/// A unit-scaled null vector of `a` (largest component 1), or None when
/// `a` has full numerical rank at the given tolerance.
pub fn null_vector(a: &Matrix<f64>, tol: f64) -> Option<Vec<f64>> {
    let n = a.dim();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| *a.get(i, j)).collect())
        .collect();
    let mut pivot_cols = Vec::new();
    let mut row = 0usize;
    for col in 0..n {
        let (best, bestval) = (row..n)
            .map(|r| (r, m[r][col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap_or((row, 0.0));
        if bestval <= tol {
            continue;
        }
        m.swap(row, best);
        let p = m[row][col];
        for j in 0..n {
            m[row][j] /= p;
        }
        for r in 0..n {
            if r != row {
                let factor = m[r][col];
                for j in 0..n {
                    m[r][j] -= factor * m[row][j];
                }
            }
        }
        pivot_cols.push(col);
        row += 1;
        if row == n {
            break;
        }
    }
    let free: Vec<usize> = (0..n).filter(|c| !pivot_cols.contains(c)).collect();
    let fcol = *free.first()?;
    let mut v = vec![0.0; n];
    v[fcol] = 1.0;
    for (r, &pc) in pivot_cols.iter().enumerate() {
        v[pc] = -m[r][fcol];
    }
    let mx = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    for x in v.iter_mut() {
        *x /= mx;
    }
    Some(v)
}

/// Eigenvector of `m` for the real eigenvalue `lambda`, scaled so the
/// largest component is 1.
pub fn eigenvector(m: &Matrix<f64>, lambda: f64) -> Option<Vec<f64>> {
    let n = m.dim();
    let mut a = m.clone();
    let mut scale = 1.0f64;
    for i in 0..n {
        for j in 0..n {
            scale = scale.max(m.get(i, j).abs());
        }
        a.set(i, i, m.get(i, i) - lambda);
    }
    null_vector(&a, 1e-8 * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn charpoly_matches_hand_expansion() {
        // [[2,1],[1,2]]: x^2 - 4x + 3
        let m = Matrix::from_rows(vec![vec![rat(2, 1), rat(1, 1)], vec![rat(1, 1), rat(2, 1)]]);
        assert_eq!(charpoly(&m), vec![rat(3, 1), rat(-4, 1)]);
    }

    #[test]
    fn roots_of_cubic() {
        // (x-1)(x-2)(x+3) = x^3 - 7x + 6
        let mut r = poly_roots(&[6.0, -7.0, 0.0]);
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((r[0] - Complex64::new(-3.0, 0.0)).norm() < 1e-10);
        assert!((r[1] - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        assert!((r[2] - Complex64::new(2.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn complex_pair() {
        // x^2 - x + 1: roots (1 ± sqrt(3) i)/2
        let r = poly_roots(&[1.0, -1.0]);
        let s3 = 3.0f64.sqrt() / 2.0;
        for root in r {
            assert!((root.re - 0.5).abs() < 1e-12);
            assert!((root.im.abs() - s3).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_eigenvalues_are_snapped() {
        let m = Matrix::from_rows(vec![
            vec![rat(0, 1), rat(1, 1), rat(0, 1)],
            vec![rat(0, 1), rat(0, 1), rat(1, 1)],
            vec![rat(6, 1), rat(1, 1), rat(0, 1)],
        ]);
        // companion matrix of x^3 - x - 6, rational root x = 2
        let ev = eigenvalues(&m);
        assert!(ev.iter().any(|e| e.exact == Some(rat(2, 1))));
    }

    #[test]
    fn multiplicity_is_merged() {
        let m = Matrix::from_rows(vec![
            vec![1.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 5.0],
        ]);
        let ev = eigenvalues(&m);
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[1].multiplicity, 2);
        assert!((ev[0].value.re - 5.0).abs() < 1e-9);
    }

    #[test]
    fn eigenvector_of_symmetric_matrix() {
        let m = Matrix::from_rows(vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
        let v = eigenvector(&m, 3.0).unwrap();
        assert!((v[0] - v[1]).abs() < 1e-9);
        let v = eigenvector(&m, 1.0).unwrap();
        assert!((v[0] + v[1]).abs() < 1e-9);
        assert!(eigenvector(&m, 1.5).is_none());
    }
}
