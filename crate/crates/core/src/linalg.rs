//! Small dense complex linear algebra on `ndarray` matrices.

use crate::{Error, Result, C64};
use ndarray::{s, Array1, Array2, ArrayView2};

pub type Mat = Array2<C64>;
pub type Mat2 = [[C64; 2]; 2];

pub fn eye(n: usize) -> Mat {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

pub fn norm1(a: &ArrayView2<C64>) -> f64 {
    (0..a.ncols()).map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn frob(a: &ArrayView2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &ArrayView2<C64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn adjoint(a: &ArrayView2<C64>) -> Mat {
    a.t().mapv(|z| z.conj())
}

/// LU factorisation with partial pivoting, stored in place.
pub struct Lu {
    lu: Mat,
    piv: Vec<usize>,
}

impl Lu {
    pub fn new(a: &ArrayView2<C64>) -> Result<Lu> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!("lu of {}x{}", n, a.ncols())));
        }
        let mut lu = a.to_owned();
        let mut piv: Vec<usize> = (0..n).collect();
        let scale = max_abs(a).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[[i, k]].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax <= scale * 1e-300 || pmax == 0.0 {
                return Err(Error::Singular(format!("zero pivot at column {k}")));
            }
            if p != k {
                piv.swap(p, k);
                for j in 0..n {
                    let t = lu[[p, j]];
                    lu[[p, j]] = lu[[k, j]];
                    lu[[k, j]] = t;
                }
            }
            let d = lu[[k, k]];
            for i in k + 1..n {
                let f = lu[[i, k]] / d;
                lu[[i, k]] = f;
                if f != C64::new(0.0, 0.0) {
                    for j in k + 1..n {
                        let t = lu[[k, j]];
                        lu[[i, j]] -= f * t;
                    }
                }
            }
        }
        Ok(Lu { lu, piv })
    }

    pub fn solve_vec(&self, b: &[C64]) -> Vec<C64> {
        let n = self.piv.len();
        let mut x: Vec<C64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[[i, j]] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[[i, j]] * x[j];
            }
            x[i] = acc / self.lu[[i, i]];
        }
        x
    }

    pub fn solve(&self, b: &ArrayView2<C64>) -> Mat {
        let mut out = Array2::zeros(b.raw_dim());
        for j in 0..b.ncols() {
            let col: Vec<C64> = b.column(j).to_vec();
            let x = self.solve_vec(&col);
            out.column_mut(j).assign(&Array1::from(x));
        }
        out
    }

    pub fn inverse(&self) -> Mat {
        self.solve(&eye(self.piv.len()).view())
    }
}

pub fn inv(a: &ArrayView2<C64>) -> Result<Mat> {
    Ok(Lu::new(a)?.inverse())
}

/// 1-norm condition number; infinite when singular.
pub fn cond1(a: &ArrayView2<C64>) -> f64 {
    match inv(a) {
        Ok(ai) => norm1(a) * norm1(&ai.view()),
        Err(_) => f64::INFINITY,
    }
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(a: &ArrayView2<C64>) -> Result<Mat> {
    let n = a.nrows();
    let nrm = norm1(a);
    let theta13 = 5.371920351148152;
    let sq = if nrm > theta13 { (nrm / theta13).log2().ceil() as i32 } else { 0 };
    let a = a.mapv(|z| z / 2f64.powi(sq));
    let id = eye(n);
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let b = &PADE13;
    let r = |x: f64| C64::new(x, 0.0);
    let u_in = &a6 * r(b[13]) + &a4 * r(b[11]) + &a2 * r(b[9]);
    let u_in = a6.dot(&u_in) + &a6 * r(b[7]) + &a4 * r(b[5]) + &a2 * r(b[3]) + &id * r(b[1]);
    let u = a.dot(&u_in);
    let v_in = &a6 * r(b[12]) + &a4 * r(b[10]) + &a2 * r(b[8]);
    let v = a6.dot(&v_in) + &a6 * r(b[6]) + &a4 * r(b[4]) + &a2 * r(b[2]) + &id * r(b[0]);
    let p = &v + &u;
    let q = &v - &u;
    let mut e = Lu::new(&q.view())?.solve(&p.view());
    for _ in 0..sq {
        e = e.dot(&e);
    }
    Ok(e)
}

/// φ₁(A) = A⁻¹(e^A − I), valid for singular A, via an augmented exponential.
pub fn phi1(a: &ArrayView2<C64>) -> Result<Mat> {
    let n = a.nrows();
    let mut aug = Array2::zeros((2 * n, 2 * n));
    aug.slice_mut(s![..n, ..n]).assign(a);
    aug.slice_mut(s![..n, n..]).assign(&eye(n));
    let e = expm(&aug.view())?;
    Ok(e.slice(s![..n, n..]).to_owned())
}

pub fn to_nalgebra(a: &ArrayView2<C64>) -> nalgebra::DMatrix<C64> {
    nalgebra::DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &ArrayView2<C64>) -> Vec<f64> {
    let m = to_nalgebra(a);
    let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

/// Singular values, descending.
pub fn singular_values(a: &ArrayView2<C64>) -> Vec<f64> {
    let m = to_nalgebra(a);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn mat2_apply(a: &Mat2, x: [C64; 2]) -> [C64; 2] {
    [a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]]
}

pub fn mat2_inv(a: &Mat2) -> Mat2 {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(16);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert_relative_eq!(s, 2.0 / 31.0, max_relative = 1e-13);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn expm_of_rotation_generator() {
        let t = 7.3;
        let a = ndarray::arr2(&[[C64::new(0.0, 0.0), C64::new(t, 0.0)], [C64::new(-t, 0.0), C64::new(0.0, 0.0)]]);
        let e = expm(&a.view()).unwrap();
        assert_relative_eq!(e[[0, 0]].re, t.cos(), epsilon = 1e-12);
        assert_relative_eq!(e[[0, 1]].re, t.sin(), epsilon = 1e-12);
    }

    #[test]
    fn phi1_matches_series_for_singular_matrix() {
        let a = ndarray::arr2(&[[C64::new(0.0, 0.3), C64::new(0.1, 0.0)], [C64::new(0.0, 0.0), C64::new(0.0, 0.0)]]);
        let p = phi1(&a.view()).unwrap();
        let mut series = eye(2);
        let mut term = eye(2);
        for k in 1..30 {
            term = term.dot(&a).mapv(|z| z / (k as f64 + 1.0));
            series = series + &term;
        }
        for (x, y) in p.iter().zip(series.iter()) {
            assert!((x - y).norm() < 1e-14);
        }
    }
}
