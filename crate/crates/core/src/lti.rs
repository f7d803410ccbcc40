//! Scalar linear time-invariant blocks.
//!
//! [`RationalSiso`] stores a proper transfer function with coefficients in
//! ascending powers of `s` and a monic denominator. [`StateSpaceBlock`] is its
//! controllable-canonical realization, stepped with classical RK4 under a
//! zero-order-held input. [`svd6`] is a one-sided Jacobi SVD for the 6x6
//! gain matrices used by the decoupling controller.

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Leading coefficients at or below this magnitude are trimmed as zeros.
const TRIM_EPS: f64 = 1e-300;

fn trim(mut p: Vec<f64>) -> Vec<f64> {
    while p.len() > 1 && p.last().is_some_and(|c| c.abs() <= TRIM_EPS) {
        p.pop();
    }
    if p.is_empty() {
        p.push(0.0);
    }
    p
}

/// Product of two polynomials in ascending order.
pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Sum of two polynomials in ascending order.
pub fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n).map(|i| a.get(i).copied().unwrap_or(0.0) + b.get(i).copied().unwrap_or(0.0)).collect()
}

/// Evaluates an ascending polynomial at a complex point (Horner).
pub fn poly_eval(p: &[f64], s: Complex64) -> Complex64 {
    p.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// `(tau s + 1)^n` as an ascending coefficient list.
pub fn lag_power(tau: f64, n: usize) -> Vec<f64> {
    (0..n).fold(vec![1.0], |acc, _| poly_mul(&acc, &[1.0, tau]))
}

/// A proper scalar rational transfer function `num(s) / den(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalSiso {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl RationalSiso {
    /// Builds a canonical (monic denominator) proper transfer function.
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        let num = trim(num);
        let den = trim(den);
        let lead = *den.last().unwrap();
        if lead == 0.0 || !lead.is_finite() {
            return Err(Error::ZeroDenominator);
        }
        let num_deg = if num.iter().all(|c| *c == 0.0) { 0 } else { num.len() - 1 };
        if num_deg > den.len() - 1 {
            return Err(Error::ImproperTransferFunction { num: num_deg, den: den.len() - 1 });
        }
        if num.iter().chain(den.iter()).any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("transfer function coefficient".into()));
        }
        Ok(Self { num: num.iter().map(|c| c / lead).collect(), den: den.iter().map(|c| c / lead).collect() })
    }

    pub fn gain(k: f64) -> Self {
        Self { num: vec![k], den: vec![1.0] }
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn order(&self) -> usize {
        self.den.len() - 1
    }

    /// Series connection. Polynomials are multiplied; nothing is cancelled.
    pub fn series(&self, other: &Self) -> Self {
        Self::new(poly_mul(&self.num, &other.num), poly_mul(&self.den, &other.den))
            .expect("product of proper transfer functions is proper")
    }

    /// Unity negative feedback around `self`: `G / (1 + G)`.
    pub fn feedback(&self) -> Self {
        Self::new(self.num.clone(), poly_add(&self.den, &self.num))
            .expect("closed loop of a proper transfer function is proper")
    }

    pub fn scale(&self, k: f64) -> Self {
        Self { num: self.num.iter().map(|c| c * k).collect(), den: self.den.clone() }
    }

    /// Evaluates `num(s)/den(s)` at an arbitrary complex point.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        poly_eval(&self.num, s) / poly_eval(&self.den, s)
    }

    /// `G(j omega)`.
    pub fn freq_response(&self, omega: f64) -> Result<Complex64> {
        if !(omega >= 0.0) {
            return Err(Error::Config(format!("negative frequency {omega}")));
        }
        let s = Complex64::new(0.0, omega);
        let d = poly_eval(&self.den, s);
        let scale = self.den.iter().fold(0.0_f64, |m, c| m.max(c.abs())).max(1.0);
        if d.norm() <= 1e-14 * scale {
            return Err(Error::PoleOnAxis { omega });
        }
        Ok(poly_eval(&self.num, s) / d)
    }

    pub fn dc_gain(&self) -> f64 {
        self.num[0] / self.den[0]
    }

    /// Controllable canonical realization with zero initial state.
    pub fn realize(&self) -> StateSpaceBlock {
        let n = self.order();
        let d = if self.num.len() == n + 1 { self.num[n] } else { 0.0 };
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            a[(i, i + 1)] = 1.0;
        }
        let mut c = DVector::zeros(n);
        for k in 0..n {
            if n > 0 {
                a[(n - 1, k)] = -self.den[k];
            }
            c[k] = self.num.get(k).copied().unwrap_or(0.0) - d * self.den[k];
        }
        let mut b = DVector::zeros(n);
        if n > 0 {
            b[n - 1] = 1.0;
        }
        StateSpaceBlock { a, b, c, d, x: DVector::zeros(n) }
    }
}

/// A single-input single-output state-space block `x' = Ax + Bu, y = Cx + Du`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceBlock {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: f64,
    pub x: DVector<f64>,
}

impl StateSpaceBlock {
    pub fn order(&self) -> usize {
        self.x.len()
    }

    pub fn reset(&mut self) {
        self.x.fill(0.0);
    }

    /// Output for the current state with input `u`.
    pub fn output(&self, u: f64) -> f64 {
        self.c.dot(&self.x) + self.d * u
    }

    fn deriv(&self, x: &DVector<f64>, u: f64) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    /// Advances one RK4 step with `u` held constant and returns the output at
    /// the new state.
    pub fn step(&mut self, u: f64, dt: f64) -> Result<f64> {
        if !u.is_finite() {
            return Err(Error::NonFinite(format!("block input {u}")));
        }
        if self.order() > 0 {
            let k1 = self.deriv(&self.x, u);
            let k2 = self.deriv(&(&self.x + &k1 * (0.5 * dt)), u);
            let k3 = self.deriv(&(&self.x + &k2 * (0.5 * dt)), u);
            let k4 = self.deriv(&(&self.x + &k3 * dt), u);
            self.x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            if self.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("block state".into()));
            }
        }
        Ok(self.output(u))
    }

    /// Places the block at the equilibrium for a constant input `u`
    /// (`A x = -B u`). Fails if `A` is singular.
    pub fn set_steady_state(&mut self, u: f64) -> Result<()> {
        if self.order() == 0 {
            return Ok(());
        }
        let rhs = -&self.b * u;
        let x = self
            .a
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Config("block has a pole at the origin; no steady state".into()))?;
        self.x = x;
        Ok(())
    }

    /// `C (j omega I - A)^-1 B + D`.
    pub fn freq_response(&self, omega: f64) -> Result<Complex64> {
        let n = self.order();
        if n == 0 {
            return Ok(Complex64::new(self.d, 0.0));
        }
        let jw = Complex64::new(0.0, omega);
        let m = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { jw } else { Complex64::new(0.0, 0.0) };
            diag - Complex64::new(self.a[(i, j)], 0.0)
        });
        let b = DVector::from_fn(n, |i, _| Complex64::new(self.b[i], 0.0));
        let lu = m.clone().full_piv_lu();
        let mut sol = lu.solve(&b).ok_or(Error::PoleOnAxis { omega })?;
        // one refinement pass; companion matrices are badly scaled at high omega
        let r = &b - &m * &sol;
        if let Some(dx) = lu.solve(&r) {
            sol += dx;
        }
        let y = (0..n).fold(Complex64::new(self.d, 0.0), |acc, i| acc + sol[i] * self.c[i]);
        Ok(y)
    }

    /// Smallest time constant `1/|lambda|` over the nonzero eigenvalues of
    /// `A`; `None` for static or pure-integrator blocks.
    pub fn min_time_constant(&self) -> Option<f64> {
        if self.order() == 0 {
            return None;
        }
        self.a
            .complex_eigenvalues()
            .iter()
            .map(|l| l.norm())
            .filter(|m| *m > 1e-12)
            .fold(None, |acc: Option<f64>, m| Some(acc.map_or(1.0 / m, |a| a.min(1.0 / m))))
    }
}

/// Unity negative feedback of `controller` around a strictly proper `plant`,
/// realized as one block from reference to plant output.
pub fn close_loop(plant: &StateSpaceBlock, controller: &StateSpaceBlock) -> Result<StateSpaceBlock> {
    if plant.d != 0.0 {
        return Err(Error::Config("plant must be strictly proper to close the loop".into()));
    }
    let np = plant.order();
    let nc = controller.order();
    let n = np + nc;
    // e = r - Cp xp; u = Cc xc + Dc e
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    let mut c = DVector::zeros(n);
    for i in 0..np {
        for j in 0..np {
            a[(i, j)] = plant.a[(i, j)] - plant.b[i] * controller.d * plant.c[j];
        }
        for j in 0..nc {
            a[(i, np + j)] = plant.b[i] * controller.c[j];
        }
        b[i] = plant.b[i] * controller.d;
        c[i] = plant.c[i];
    }
    for i in 0..nc {
        for j in 0..np {
            a[(np + i, j)] = -controller.b[i] * plant.c[j];
        }
        for j in 0..nc {
            a[(np + i, np + j)] = controller.a[(i, j)];
        }
        b[np + i] = controller.b[i];
    }
    Ok(StateSpaceBlock { a, b, c, d: 0.0, x: DVector::zeros(n) })
}

/// Thin singular value decomposition `M = U diag(sigma) V^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    pub u: Matrix6<f64>,
    pub sigma: Vector6<f64>,
    pub v: Matrix6<f64>,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix6<f64> {
        self.u * Matrix6::from_diagonal(&self.sigma) * self.v.transpose()
    }
}

/// SVD of a 6x6 matrix by one-sided Jacobi rotations.
///
/// Singular values are sorted descending; each column of `U` is signed so its
/// largest-magnitude entry is non-negative (the matching `V` column follows).
pub fn svd6(m: &Matrix6<f64>) -> Result<SvdResult> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("svd input".into()));
    }
    let mut w = *m;
    let mut v = Matrix6::<f64>::identity();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..5 {
            for q in (p + 1)..6 {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..6 {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    w[(i, p)] = c * wp - s * wq;
                    w[(i, q)] = s * wp + c * wq;
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..6).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let smax = norms[order[0]];
    let mut u = Matrix6::<f64>::zeros();
    let mut sigma = Vector6::<f64>::zeros();
    let mut vs = Matrix6::<f64>::zeros();
    for (k, &j) in order.iter().enumerate() {
        sigma[k] = norms[j];
        vs.set_column(k, &v.column(j));
        let tiny = norms[j] <= 1e-12 * smax || norms[j] < 1e-300;
        let col = if tiny { complete_basis(&u, k, &w.column(j).into_owned()) } else { w.column(j) / norms[j] };
        u.set_column(k, &col);
    }

    for k in 0..6 {
        let col = u.column(k);
        let (imax, _) = col
            .iter()
            .enumerate()
            .fold((0, -1.0), |(bi, bv), (i, x)| if x.abs() > bv { (i, x.abs()) } else { (bi, bv) });
        if col[imax] < 0.0 {
            let flipped_u = -u.column(k);
            let flipped_v = -vs.column(k);
            u.set_column(k, &flipped_u);
            vs.set_column(k, &flipped_v);
        }
    }

    Ok(SvdResult { u, sigma, v: vs })
}

/// Unit vector orthogonal to the first `k` columns of `u`, preferring the
/// direction of `seed` when it is usable.
fn complete_basis(u: &Matrix6<f64>, k: usize, seed: &Vector6<f64>) -> Vector6<f64> {
    let seed_norm = seed.norm();
    let seeds = (seed_norm > 1e-300)
        .then(|| seed / seed_norm)
        .into_iter()
        .chain((0..6).map(|e| Vector6::from_fn(|i, _| if i == e { 1.0 } else { 0.0 })));
    for cand in seeds {
        let mut c = cand;
        for _ in 0..2 {
            for prev in 0..k {
                let uc = u.column(prev).into_owned();
                c -= uc * uc.dot(&c);
            }
        }
        let n = c.norm();
        if n > 0.1 {
            return c / n;
        }
    }
    unreachable!("a 6-dimensional space always has a vector orthogonal to fewer than 6 others")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn series_identity_and_square() {
        let one = RationalSiso::new(vec![1.0], vec![1.0]).unwrap();
        assert_eq!(one.series(&one), one);
        let tau = 0.3;
        let lag = RationalSiso::new(vec![1.0], vec![1.0, tau]).unwrap();
        let sq = lag.series(&lag);
        let expected = RationalSiso::new(vec![1.0], vec![1.0, 2.0 * tau, tau * tau]).unwrap();
        for (a, b) in sq.den().iter().zip(expected.den()) {
            assert!(close(*a, *b, 1e-12));
        }
    }

    #[test]
    fn improper_is_rejected() {
        let err = RationalSiso::new(vec![1.0, 1.0, 1.0], vec![1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::ImproperTransferFunction { num: 2, den: 1 }));
    }

    #[test]
    fn realize_constant_and_first_order() {
        let k = RationalSiso::gain(2.5).realize();
        assert_eq!(k.order(), 0);
        assert_eq!(k.d, 2.5);

        let lag = RationalSiso::new(vec![1.0], vec![1.0, 1.0]).unwrap().realize();
        assert_eq!(lag.a[(0, 0)], -1.0);
        assert_eq!(lag.b[0], 1.0);
        assert_eq!(lag.c[0], 1.0);
        assert_eq!(lag.d, 0.0);
    }

    #[test]
    fn companion_response_accurate_far_above_poles() {
        let tf = RationalSiso::new(
            vec![2.8452060008610673],
            vec![1070.5951780072821, 577.8090551052965, 92.7514254181459, 7.62549941447871, 1.0],
        )
        .unwrap();
        let blk = tf.realize();
        for w in [1.0, 100.0, 545.0, 1000.0] {
            let a = tf.freq_response(w).unwrap();
            let b = blk.freq_response(w).unwrap();
            assert!((a - b).norm() <= 1e-10 * a.norm(), "w {w}: {a} vs {b}");
        }
    }

    #[test]
    fn integrator_step_is_exact() {
        let mut integ = RationalSiso::new(vec![1.0], vec![0.0, 1.0]).unwrap().realize();
        let y = integ.step(1.0, 0.01).unwrap();
        assert!(close(y, 0.01, 1e-15));
    }

    #[test]
    fn zero_input_stays_zero() {
        let mut blk = RationalSiso::new(vec![1.0, 2.0], vec![3.0, 1.0, 0.5]).unwrap().realize();
        for _ in 0..10 {
            assert_eq!(blk.step(0.0, 0.01).unwrap(), 0.0);
        }
    }

    #[test]
    fn first_order_step_matches_analytic() {
        let mut lag = RationalSiso::new(vec![1.0], vec![1.0, 1.0]).unwrap().realize();
        let mut y = 0.0;
        for _ in 0..10_000 {
            y = lag.step(1.0, 1e-4).unwrap();
        }
        assert!(close(y, 1.0 - (-1.0f64).exp(), 1e-8));
    }

    #[test]
    fn non_finite_input_aborts() {
        let mut lag = RationalSiso::new(vec![1.0], vec![1.0, 1.0]).unwrap().realize();
        assert!(lag.step(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn steady_state_initialization() {
        let mut blk = RationalSiso::new(vec![2.0, 1.0], vec![1.0, 3.0, 1.0]).unwrap().realize();
        blk.set_steady_state(0.7).unwrap();
        assert!(close(blk.output(0.7), 1.4, 1e-12));
        let y = blk.step(0.7, 0.01).unwrap();
        assert!(close(y, 1.4, 1e-12));
    }

    #[test]
    fn pole_on_axis_is_reported() {
        let integ = RationalSiso::new(vec![1.0], vec![0.0, 1.0]).unwrap();
        assert!(matches!(integ.freq_response(0.0), Err(Error::PoleOnAxis { .. })));
        let osc = RationalSiso::new(vec![1.0], vec![4.0, 0.0, 1.0]).unwrap();
        assert!(osc.freq_response(2.0).is_err());
        assert!(osc.freq_response(1.0).is_ok());
    }

    #[test]
    fn svd_identity_and_diagonal() {
        let r = svd6(&Matrix6::identity()).unwrap();
        assert!(r.sigma.iter().all(|s| close(*s, 1.0, 1e-15)));
        assert!((r.u * r.v.transpose() - Matrix6::identity()).amax() < 1e-15);

        let d = Matrix6::from_diagonal(&Vector6::new(0.5, 3.0, 0.0, 1.0, 0.1, 2.0));
        let r = svd6(&d).unwrap();
        let expected = [3.0, 2.0, 1.0, 0.5, 0.1, 0.0];
        for (s, e) in r.sigma.iter().zip(expected) {
            assert!(close(*s, e, 1e-15));
        }
        assert!((r.u.transpose() * r.u - Matrix6::identity()).amax() < 1e-12);
        assert!((r.reconstruct() - d).amax() < 1e-12);
    }

    #[test]
    fn svd_zero_matrix() {
        let r = svd6(&Matrix6::zeros()).unwrap();
        assert!(r.sigma.iter().all(|s| *s == 0.0));
        assert!((r.u.transpose() * r.u - Matrix6::identity()).amax() < 1e-12);
        assert!((r.v.transpose() * r.v - Matrix6::identity()).amax() < 1e-12);
    }

    #[test]
    fn svd_rejects_nan() {
        let mut m = Matrix6::identity();
        m[(2, 3)] = f64::NAN;
        assert!(svd6(&m).is_err());
    }

    #[test]
    fn close_loop_double_integrator() {
        // lead (s + 1) / (0.1 s + 1) around 1/s^2
        let plant = RationalSiso::new(vec![1.0], vec![0.0, 0.0, 1.0]).unwrap();
        let ctrl = RationalSiso::new(vec![1.0, 1.0], vec![1.0, 0.1]).unwrap();
        let cl = close_loop(&plant.realize(), &ctrl.realize()).unwrap();
        let reference = plant.series(&ctrl).feedback();
        for w in [0.1, 1.0, 3.0, 10.0] {
            let a = cl.freq_response(w).unwrap();
            let b = reference.freq_response(w).unwrap();
            assert!((a - b).norm() <= 1e-10 * b.norm());
        }
    }
}
