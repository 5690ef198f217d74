//! Dense complex linear algebra helpers shared by the numerical modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<Complex64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `alpha * a * b + beta * out`, column-major, through the blocked kernel.
pub fn gemm_into(alpha: C64, a: &CMat, b: &CMat, beta: C64, out: &mut CMat) {
    let (m, k) = a.shape();
    let (k2, n) = b.shape();
    assert_eq!(k, k2, "gemm: inner dimension mismatch");
    assert_eq!(out.shape(), (m, n), "gemm: output shape mismatch");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        *out *= beta;
        return;
    }
    // SAFETY: C64 is repr(C) {re, im}, layout-compatible with [f64; 2]; all
    // strides describe the contiguous column-major storage of each matrix.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [beta.re, beta.im],
            out.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
}

pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    let mut out = CMat::zeros(a.nrows(), b.ncols());
    gemm_into(C64::new(1.0, 0.0), a, b, C64::new(0.0, 0.0), &mut out);
    out
}

pub fn one_norm(a: &CMat) -> f64 {
    a.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest singular value.
pub fn op_norm(a: &CMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone().singular_values().max()
}

pub fn all_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
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
const THETA: [f64; 5] = [
    1.495585217958292e-2,
    2.539398330063230e-1,
    9.504178996162932e-1,
    2.097847961257068e0,
    5.371920351148152e0,
];

fn pade_low(a: &CMat, b: &[f64]) -> CMat {
    let n = a.nrows();
    let a2 = matmul(a, a);
    let mut even = CMat::identity(n, n) * C64::from(b[0]);
    let mut odd = CMat::identity(n, n) * C64::from(b[1]);
    let mut p = CMat::identity(n, n);
    let mut j = 2;
    while j < b.len() {
        p = matmul(&p, &a2);
        even += &p * C64::from(b[j]);
        if j + 1 < b.len() {
            odd += &p * C64::from(b[j + 1]);
        }
        j += 2;
    }
    let u = matmul(a, &odd);
    solve_pade(&even, &u)
}

fn pade13(a: &CMat) -> CMat {
    let n = a.nrows();
    let b = |i: usize| C64::from(PADE13[i]);
    let id = CMat::identity(n, n);
    let a2 = matmul(a, a);
    let a4 = matmul(&a2, &a2);
    let a6 = matmul(&a4, &a2);
    let inner_u = &a6 * b(13) + &a4 * b(11) + &a2 * b(9);
    let u_arg = matmul(&a6, &inner_u) + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1);
    let u = matmul(a, &u_arg);
    let inner_v = &a6 * b(12) + &a4 * b(10) + &a2 * b(8);
    let v = matmul(&a6, &inner_v) + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);
    solve_pade(&v, &u)
}

fn solve_pade(v: &CMat, u: &CMat) -> CMat {
    let num = v + u;
    let den = v - u;
    den.lu()
        .solve(&num)
        .unwrap_or_else(|| CMat::from_element(v.nrows(), v.ncols(), C64::new(f64::NAN, 0.0)))
}

/// Matrix exponential by Padé scaling and squaring (degrees 3..13).
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    let norm = one_norm(a);
    if norm == 0.0 {
        return CMat::identity(n, n);
    }
    let low: [&[f64]; 4] = [&PADE3, &PADE5, &PADE7, &PADE9];
    for (coeffs, theta) in low.iter().zip(THETA.iter()) {
        if norm <= *theta {
            return pade_low(a, coeffs);
        }
    }
    let s = (norm / THETA[4]).log2().ceil().max(0.0) as i32;
    let scaled = a * C64::from(0.5f64.powi(s));
    let mut r = pade13(&scaled);
    for _ in 0..s {
        r = matmul(&r, &r);
    }
    r
}

/// Finite-difference weights for the `order`-th derivative at `z` from nodes `x`.
pub fn fornberg_weights(z: f64, x: &[f64], order: usize) -> Vec<f64> {
    let n = x.len();
    let m = order;
    let mut cw = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    cw[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    cw[i][k] = c1 * (k as f64 * cw[i - 1][k - 1] - c5 * cw[i - 1][k]) / c2;
                }
                cw[i][0] = -c1 * c5 * cw[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                cw[j][k] = (c4 * cw[j][k] - k as f64 * cw[j][k - 1]) / c3;
            }
            cw[j][0] = c4 * cw[j][0] / c3;
        }
        c1 = c2;
    }
    cw.into_iter().map(|row| row[m]).collect()
}

/// Gauss–Legendre nodes and weights on [a, b].
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = (b - a) / 2.0;
    let mid = (b + a) / 2.0;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = mid - half * x;
        nodes[n - 1 - i] = mid + half * x;
        weights[i] = half * w;
        weights[n - 1 - i] = half * w;
    }
    (nodes, weights)
}

/// Quadrature weights on sample points: composite Simpson when the points are
/// uniform and odd in number, trapezoid otherwise.
pub fn sample_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    if n < 2 {
        return w;
    }
    let h = (x[n - 1] - x[0]) / (n - 1) as f64;
    let uniform = x
        .windows(2)
        .all(|p| ((p[1] - p[0]) - h).abs() <= 1e-12 * h.abs().max(1e-300));
    if uniform && n % 2 == 1 && n >= 3 {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = if i == 0 || i == n - 1 {
                h / 3.0
            } else if i % 2 == 1 {
                4.0 * h / 3.0
            } else {
                2.0 * h / 3.0
            };
        }
    } else {
        for i in 0..n - 1 {
            let d = x[i + 1] - x[i];
            w[i] += d / 2.0;
            w[i + 1] += d / 2.0;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_diagonal() {
        let d = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(-1.0, 0.5),
            c(0.3, 0.0),
            c(-7.0, 2.0),
        ]));
        let e = expm(&d);
        for i in 0..3 {
            assert!((e[(i, i)] - d[(i, i)].exp()).norm() < 1e-13 * d[(i, i)].exp().norm().max(1.0));
        }
    }

    #[test]
    fn expm_nilpotent() {
        let mut a = CMat::zeros(3, 3);
        a[(0, 1)] = c(2.0, 0.0);
        a[(1, 2)] = c(3.0, 0.0);
        let e = expm(&a);
        assert!((e[(0, 2)] - c(3.0, 0.0)).norm() < 1e-13);
        assert!((e[(0, 1)] - c(2.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn expm_rotation_generator() {
        let mut a = CMat::zeros(2, 2);
        a[(0, 1)] = c(-10.0, 0.0);
        a[(1, 0)] = c(10.0, 0.0);
        let e = expm(&a);
        assert!((e[(0, 0)].re - 10f64.cos()).abs() < 1e-12);
        assert!((e[(1, 0)].re - 10f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn fornberg_first_derivative() {
        let x = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let w = fornberg_weights(0.0, &x, 1);
        let expect = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6, 0.0, 2.0);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(11)).sum();
        assert!((s - 2f64.powi(12) / 12.0).abs() < 1e-10);
    }

    #[test]
    fn gemm_matches_naive() {
        let a = CMat::from_fn(4, 3, |i, j| c(i as f64 - j as f64, (i * j) as f64));
        let b = CMat::from_fn(3, 5, |i, j| c((i + j) as f64, 1.0 - i as f64));
        let naive = &a * &b;
        assert!(max_abs(&(matmul(&a, &b) - naive)) < 1e-12);
    }
}
