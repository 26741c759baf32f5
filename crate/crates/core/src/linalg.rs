//! Dense complex linear algebra for the harmonic systems.
//!
//! `LuFactors` is an LU factorization with partial pivoting that also
//! solves with the adjoint, which the 1-norm condition estimator needs.
//! `Resolvent` evaluates `c·(sI - A)⁻¹·b` for many `s` after a single
//! Hessenberg reduction of `A`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// `P·A = L·U` stored column-major; `L` has a unit diagonal.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    lu: Vec<Complex64>,
    /// Row `i` of `P·A` is row `perm[i]` of `A`.
    perm: Vec<usize>,
    singular: bool,
    norm1: f64,
}

fn norm1(a: &DMatrix<Complex64>) -> f64 {
    a.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl LuFactors {
    pub fn new(a: &DMatrix<Complex64>) -> Self {
        assert!(a.is_square(), "LU needs a square matrix");
        let n = a.nrows();
        let norm1 = norm1(a);
        let mut lu = a.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut singular = false;

        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[i + k * n].norm_sqr()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k + j * n, p + j * n);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k + k * n];
            for i in k + 1..n {
                lu[i + k * n] /= pivot;
            }
            let (left, right) = lu.split_at_mut((k + 1) * n);
            let lcol = &left[k * n + k + 1..k * n + n];
            for j in 0..n - k - 1 {
                let col = &mut right[j * n..(j + 1) * n];
                let akj = col[k];
                if akj == Complex64::default() {
                    continue;
                }
                for (x, l) in col[k + 1..].iter_mut().zip(lcol) {
                    *x -= l * akj;
                }
            }
        }
        Self {
            n,
            lu,
            perm,
            singular,
            norm1,
        }
    }

    fn at(&self, i: usize, j: usize) -> Complex64 {
        self.lu[i + j * self.n]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn solve(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        let n = self.n;
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for j in 0..n {
            let xj = x[j];
            if xj == Complex64::default() {
                continue;
            }
            for i in j + 1..n {
                x[i] -= self.at(i, j) * xj;
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.at(j, j);
            let xj = x[j];
            for i in 0..j {
                x[i] -= self.at(i, j) * xj;
            }
        }
        DVector::from_vec(x)
    }

    /// Solves `Aᴴ·x = b`.
    pub fn solve_adjoint(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        let n = self.n;
        // Uᴴ·y = b (lower triangular), then Lᴴ·z = y (unit upper).
        let mut y: Vec<Complex64> = b.iter().copied().collect();
        for i in 0..n {
            let mut acc = y[i];
            for k in 0..i {
                acc -= self.at(k, i).conj() * y[k];
            }
            y[i] = acc / self.at(i, i).conj();
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for k in i + 1..n {
                acc -= self.at(k, i).conj() * y[k];
            }
            y[i] = acc;
        }
        let mut x = vec![Complex64::default(); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        DVector::from_vec(x)
    }

    /// Estimate of the 1-norm condition number `‖A‖₁·‖A⁻¹‖₁` (Hager's method
    /// with Higham's complex sign vector and alternative lower bound).
    pub fn condition_estimate(&self) -> f64 {
        if self.singular {
            return f64::INFINITY;
        }
        let n = self.n;
        let one = |v: &DVector<Complex64>| v.iter().map(|z| z.norm()).sum::<f64>();
        let mut x = DVector::from_element(n, Complex64::new(1.0 / n as f64, 0.0));
        let mut est = 0.0;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = self.solve(&x);
            est = one(&y);
            let xi = y.map(|z| {
                let r = z.norm();
                if r == 0.0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    z / r
                }
            });
            let z = self.solve_adjoint(&xi);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.norm()))
                .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
            let ztx = z.dotc(&x).re;
            if zmax <= ztx || j == last_j {
                break;
            }
            last_j = j;
            x = DVector::from_element(n, Complex64::default());
            x[j] = Complex64::new(1.0, 0.0);
        }
        let alt = DVector::from_fn(n, |i, _| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            Complex64::new(sign * (1.0 + i as f64 / (n.max(2) - 1) as f64), 0.0)
        });
        let alt_est = 2.0 * one(&self.solve(&alt)) / (3.0 * n as f64);
        self.norm1 * est.max(alt_est)
    }
}

/// Transfer function `c·(sI - A)⁻¹·b` of a fixed state-space triple.
#[derive(Debug, Clone)]
pub struct Resolvent {
    n: usize,
    /// Upper Hessenberg form of `A`, row-major.
    h: Vec<Complex64>,
    qh_b: Vec<Complex64>,
    c_q: Vec<Complex64>,
}

impl Resolvent {
    pub fn new(a: &DMatrix<Complex64>, b: &DVector<Complex64>, c: &DVector<Complex64>) -> Self {
        let n = a.nrows();
        let (q, h) = nalgebra::linalg::Hessenberg::new(a.clone()).unpack();
        let qh_b = (q.adjoint() * b).iter().copied().collect();
        let c_q = (c.transpose() * &q).iter().copied().collect();
        let mut hr = vec![Complex64::default(); n * n];
        for i in 0..n {
            for j in i.saturating_sub(1)..n {
                hr[i * n + j] = h[(i, j)];
            }
        }
        Self {
            n,
            h: hr,
            qh_b,
            c_q,
        }
    }

    /// Evaluates the transfer function at complex frequency `s`.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        let n = self.n;
        let mut m: Vec<Complex64> = self.h.iter().map(|z| -z).collect();
        for i in 0..n {
            m[i * n + i] += s;
        }
        let mut y = self.qh_b.clone();
        // Elimination of the single subdiagonal with adjacent-row pivoting.
        for k in 0..n.saturating_sub(1) {
            let (top, bottom) = m.split_at_mut((k + 1) * n);
            let rk = &mut top[k * n..];
            let rn = &mut bottom[..n];
            if rn[k].norm_sqr() > rk[k].norm_sqr() {
                rk[k..].swap_with_slice(&mut rn[k..]);
                y.swap(k, k + 1);
            }
            if rk[k] == Complex64::default() {
                continue;
            }
            let l = rn[k] / rk[k];
            rn[k] = Complex64::default();
            for j in k + 1..n {
                rn[j] -= l * rk[j];
            }
            let yk = y[k];
            y[k + 1] -= l * yk;
        }
        for i in (0..n).rev() {
            let row = &m[i * n..(i + 1) * n];
            let mut acc = y[i];
            for j in i + 1..n {
                acc -= row[j] * y[j];
            }
            y[i] = acc / row[i];
        }
        self.c_q.iter().zip(&y).map(|(c, x)| c * x).sum()
    }
}
