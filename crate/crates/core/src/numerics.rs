//! Shared numerical kernels: signed powers, the fixed-step RK4 integrator,
//! 3×3 symmetric matrices and the chattering metric.

use crate::error::{domain, Error, Result};

/// `|x|^p · sign(x)`, with `p > 0`.
///
/// Odd in `x`, continuous, and exactly zero at the origin. For `p < 1` the
/// slope is unbounded at zero; callers only ever integrate it.
pub fn sig_pow(x: f64, p: f64) -> Result<f64> {
    if !x.is_finite() || !p.is_finite() {
        return Err(domain(format!("sig_pow({x}, {p}): non-finite argument")));
    }
    if p <= 0.0 {
        return Err(domain(format!("sig_pow exponent must be > 0, got {p}")));
    }
    Ok(sig_pow_unchecked(x, p))
}

/// Hot-path variant of [`sig_pow`] for callers that validated `p` up front.
/// Non-finite `x` propagates as NaN/inf and is caught by the integrator.
#[inline]
pub fn sig_pow_unchecked(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(p).copysign(x)
    }
}

/// Signum with `sgn(0) = 0`, the convention of the discontinuous laws.
#[inline]
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// A [`sig_pow`] exponent validated once at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedPower {
    exponent: f64,
}

impl SignedPower {
    pub fn new(exponent: f64) -> Result<Self> {
        if !exponent.is_finite() || exponent <= 0.0 {
            return Err(domain(format!(
                "signed power exponent must be finite and > 0, got {exponent}"
            )));
        }
        Ok(Self { exponent })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        sig_pow_unchecked(x, self.exponent)
    }
}

/// One classical four-stage Runge-Kutta step of `ẋ = f(t, x)`.
///
/// Fails with [`Error::NumericBlowup`] when the new state is not finite.
pub fn rk4_step<const N: usize, F>(mut f: F, x: &[f64; N], t: f64, h: f64) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(domain(format!("rk4 step size must be finite and > 0, got {h}")));
    }
    let k1 = f(t, x);
    let x2 = axpy(x, 0.5 * h, &k1);
    let k2 = f(t + 0.5 * h, &x2);
    let x3 = axpy(x, 0.5 * h, &k2);
    let k3 = f(t + 0.5 * h, &x3);
    let x4 = axpy(x, h, &k3);
    let k4 = f(t + h, &x4);

    let mut out = *x;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    if let Some(i) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NumericBlowup {
            time: t + h,
            term: format!("integrated state component {i}"),
        });
    }
    Ok(out)
}

#[inline]
fn axpy<const N: usize>(x: &[f64; N], a: f64, y: &[f64; N]) -> [f64; N] {
    let mut out = *x;
    for i in 0..N {
        out[i] += a * y[i];
    }
    out
}

/// Real symmetric 3×3 matrix stored as its upper triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix3 {
    // a00 a01 a02 a11 a12 a22
    e: [f64; 6],
}

impl SymMatrix3 {
    pub fn new(a00: f64, a01: f64, a02: f64, a11: f64, a12: f64, a22: f64) -> Self {
        Self { e: [a00, a01, a02, a11, a12, a22] }
    }

    pub fn diag(d0: f64, d1: f64, d2: f64) -> Self {
        Self::new(d0, 0.0, 0.0, d1, 0.0, d2)
    }

    pub fn identity() -> Self {
        Self::diag(1.0, 1.0, 1.0)
    }

    pub fn scaled(&self, k: f64) -> Self {
        let mut e = self.e;
        e.iter_mut().for_each(|v| *v *= k);
        Self { e }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        match (i, j) {
            (0, 0) => self.e[0],
            (0, 1) => self.e[1],
            (0, 2) => self.e[2],
            (1, 1) => self.e[3],
            (1, 2) => self.e[4],
            (2, 2) => self.e[5],
            _ => panic!("SymMatrix3 index ({i}, {j}) out of range"),
        }
    }

    pub fn to_array(&self) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.get(i, j);
            }
        }
        m
    }

    pub fn trace(&self) -> f64 {
        self.e[0] + self.e[3] + self.e[5]
    }

    pub fn determinant(&self) -> f64 {
        det3(&self.to_array())
    }

    pub fn mul_vec(&self, v: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|j| self.get(i, j) * v[j]).sum();
        }
        out
    }

    /// `vᵀ M v`.
    pub fn quadratic_form(&self, v: &[f64; 3]) -> f64 {
        let mv = self.mul_vec(v);
        (0..3).map(|i| v[i] * mv[i]).sum()
    }

    /// The three leading principal minors; positive definite iff all are > 0.
    pub fn leading_principal_minors(&self) -> (f64, f64, f64) {
        let a = &self.e;
        let m1 = a[0];
        let m2 = a[0] * a[3] - a[1] * a[1];
        (m1, m2, self.determinant())
    }

    pub fn is_positive_definite_by_minors(&self) -> bool {
        let (a, b, c) = self.leading_principal_minors();
        a > 0.0 && b > 0.0 && c > 0.0
    }

    /// Lower-triangular `L` with `M = L Lᵀ`, or `None` when a pivot is not
    /// strictly positive.
    pub fn cholesky(&self) -> Option<[[f64; 3]; 3]> {
        let a = self.to_array();
        let mut l = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..=i {
                let sum: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
                if i == j {
                    let d = a[i][i] - sum;
                    if !(d > 0.0) {
                        return None;
                    }
                    l[i][i] = d.sqrt();
                } else {
                    l[i][j] = (a[i][j] - sum) / l[j][j];
                }
            }
        }
        Some(l)
    }

    /// Eigenvalues in ascending order.
    ///
    /// Closed-form roots of the characteristic cubic; when two roots nearly
    /// coincide the well-separated one is kept and the remaining pair comes
    /// from the deflated 2×2 block.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let [a00, a01, a02, a11, a12, a22] = self.e;
        let off = a01 * a01 + a02 * a02 + a12 * a12;
        let scale = self.e.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return [0.0; 3];
        }
        if off <= (1e-300_f64).max(f64::EPSILON * f64::EPSILON * scale * scale) {
            let mut d = [a00, a11, a22];
            d.sort_by(f64::total_cmp);
            return d;
        }
        let q = self.trace() / 3.0;
        let p2 = (a00 - q).powi(2) + (a11 - q).powi(2) + (a22 - q).powi(2) + 2.0 * off;
        let p = (p2 / 6.0).sqrt();
        if p <= f64::EPSILON * scale {
            return [q; 3];
        }
        let b = SymMatrix3::new(
            (a00 - q) / p,
            a01 / p,
            a02 / p,
            (a11 - q) / p,
            a12 / p,
            (a22 - q) / p,
        );
        let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let hi = q + 2.0 * p * phi.cos();
        let lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();

        // acos loses accuracy as |r| → 1, i.e. near a repeated pair.
        const NEAR_REPEATED: f64 = 1.0 - 1e-8;
        if r > NEAR_REPEATED {
            self.deflate(hi)
        } else if r < -NEAR_REPEATED {
            self.deflate(lo)
        } else {
            let mid = 3.0 * q - hi - lo;
            let mut out = [lo, mid, hi];
            out.sort_by(f64::total_cmp);
            out
        }
    }

    /// Eigenvalues from a known simple eigenvalue `lambda` plus the
    /// eigenvalues of the matrix restricted to its orthogonal complement.
    fn deflate(&self, lambda: f64) -> [f64; 3] {
        let a = self.to_array();
        let rows: Vec<[f64; 3]> = (0..3)
            .map(|i| {
                let mut r = a[i];
                r[i] -= lambda;
                r
            })
            .collect();
        let candidates = [
            cross(&rows[0], &rows[1]),
            cross(&rows[0], &rows[2]),
            cross(&rows[1], &rows[2]),
        ];
        let v = candidates
            .iter()
            .copied()
            .max_by(|x, y| norm(x).total_cmp(&norm(y)))
            .expect("three candidates");
        let nv = norm(&v);
        if nv == 0.0 {
            return [lambda; 3];
        }
        let v = [v[0] / nv, v[1] / nv, v[2] / nv];
        // Any unit vector orthogonal to v, then complete the basis.
        let helper = if v[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let u = cross(&v, &helper);
        let nu = norm(&u);
        let u = [u[0] / nu, u[1] / nu, u[2] / nu];
        let w = cross(&v, &u);

        let au = self.mul_vec(&u);
        let aw = self.mul_vec(&w);
        let b00 = dot(&u, &au);
        let b01 = dot(&u, &aw);
        let b11 = dot(&w, &aw);
        let mean = 0.5 * (b00 + b11);
        let rad = (0.25 * (b00 - b11).powi(2) + b01 * b01).sqrt();
        let mut out = [lambda, mean - rad, mean + rad];
        out.sort_by(f64::total_cmp);
        out
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues()[2]
    }
}

pub fn leading_principal_minors(m: &SymMatrix3) -> (f64, f64, f64) {
    m.leading_principal_minors()
}

fn det3(a: &[[f64; 3]; 3]) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Σ|uₖ₊₁ − uₖ| over the samples whose time lies in `[t0, t1]`.
///
/// This is the chattering metric used throughout the crate.
pub fn total_variation(times: &[f64], values: &[f64], t0: f64, t1: f64) -> Result<f64> {
    if times.len() != values.len() {
        return Err(domain(format!(
            "total_variation: {} times but {} values",
            times.len(),
            values.len()
        )));
    }
    if !(t0 <= t1) {
        return Err(domain(format!("total_variation: empty window [{t0}, {t1}]")));
    }
    let window: Vec<f64> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t0 && **t <= t1)
        .map(|(_, v)| *v)
        .collect();
    if window.len() < 2 {
        return Err(domain(format!(
            "total_variation: window [{t0}, {t1}] holds {} sample(s), need at least 2",
            window.len()
        )));
    }
    Ok(window.windows(2).map(|w| (w[1] - w[0]).abs()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_pow_examples() {
        assert_eq!(sig_pow(4.0, 0.5).unwrap(), 2.0);
        assert_eq!(sig_pow(0.0, 0.3).unwrap(), 0.0);
        assert!((sig_pow(-8.0, 2.0 / 3.0).unwrap() + 4.0).abs() < 1e-12);
    }

    #[test]
    fn sig_pow_rejects_bad_arguments() {
        assert!(sig_pow(f64::NAN, 0.5).is_err());
        assert!(sig_pow(1.0, f64::INFINITY).is_err());
        assert!(sig_pow(1.0, 0.0).is_err());
        assert!(SignedPower::new(-1.0).is_err());
    }

    #[test]
    fn rk4_single_step_decay() {
        let x = rk4_step(|_, x: &[f64; 1]| [-x[0]], &[1.0], 0.0, 0.1).unwrap();
        assert!((x[0] - 0.904_837_5).abs() < 1e-7);
    }

    #[test]
    fn rk4_constant_dynamics_is_exact() {
        let c = [3.25, -7.5];
        let x = rk4_step(|_, _: &[f64; 2]| [0.0, 0.0], &c, 1.0, 0.37).unwrap();
        assert_eq!(x, c);
    }

    #[test]
    fn rk4_reports_blowup_time() {
        let err = rk4_step(|_, _: &[f64; 1]| [f64::INFINITY], &[0.0], 2.0, 0.5).unwrap_err();
        match err {
            Error::NumericBlowup { time, .. } => assert_eq!(time, 2.5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(rk4_step(|_, x: &[f64; 1]| [x[0]], &[1.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn minors_examples() {
        assert_eq!(SymMatrix3::identity().leading_principal_minors(), (1.0, 1.0, 1.0));
        assert_eq!(SymMatrix3::diag(2.0, 3.0, 4.0).leading_principal_minors(), (2.0, 6.0, 24.0));
    }

    #[test]
    fn eigenvalues_of_diagonal_and_repeated() {
        assert_eq!(SymMatrix3::diag(3.0, 1.0, 2.0).eigenvalues(), [1.0, 2.0, 3.0]);
        // [[2,1,1],[1,2,1],[1,1,2]] has eigenvalues 1, 1, 4.
        let m = SymMatrix3::new(2.0, 1.0, 1.0, 2.0, 1.0, 2.0);
        let ev = m.eigenvalues();
        for (got, want) in ev.iter().zip([1.0, 1.0, 4.0]) {
            assert!((got - want).abs() < 1e-10, "{ev:?}");
        }
        // Negated: -4, -1, -1 exercises the other deflation branch.
        let ev = m.scaled(-1.0).eigenvalues();
        for (got, want) in ev.iter().zip([-4.0, -1.0, -1.0]) {
            assert!((got - want).abs() < 1e-10, "{ev:?}");
        }
    }

    #[test]
    fn cholesky_detects_indefinite() {
        assert!(SymMatrix3::diag(1.0, 2.0, 3.0).cholesky().is_some());
        assert!(SymMatrix3::diag(1.0, -2.0, 3.0).cholesky().is_none());
        let l = SymMatrix3::new(4.0, 2.0, 0.0, 5.0, 1.0, 3.0).cholesky().unwrap();
        assert!((l[0][0] - 2.0).abs() < 1e-15 && (l[1][0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn total_variation_examples() {
        let t = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(total_variation(&t, &[5.0; 4], 0.0, 3.0).unwrap(), 0.0);
        assert_eq!(total_variation(&t, &[0.0, 1.0, 0.0, 1.0], 0.0, 3.0).unwrap(), 3.0);
        assert!(total_variation(&t, &[0.0; 4], 1.5, 1.7).is_err());
        assert!(total_variation(&t, &[0.0; 4], 2.0, 1.0).is_err());
    }
}
