//! Adaptive outer loop: the linearized feature map is decoupled by its SVD
//! and each singular direction gets its own Youla-designed SISO controller.

use nalgebra::{DMatrix, Matrix6, Vector6};
use num_complex::Complex64;

use crate::control::inner::inner_closed_loop;
use crate::error::{Error, Result};
use crate::kinematics::JointAngles;
use crate::lti::{lag_power, poly_mul, svd6, RationalSiso, StateSpaceBlock};
use crate::servo::LinearizedPlant;
use crate::stereo::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterParams {
    /// Outer-loop natural frequency, rad/s.
    pub omega_n: f64,
    pub zeta: f64,
    /// Inner-loop time constant, s.
    pub tau_in: f64,
    /// Channels with `sigma_i < sigma_tol * sigma_1` are switched off.
    pub sigma_tol: f64,
}

impl Default for OuterParams {
    fn default() -> Self {
        Self { omega_n: 10.0, zeta: 0.707, tau_in: 0.01, sigma_tol: 1e-6 }
    }
}

impl OuterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_in > 0.0) {
            return Err(Error::Config(format!("tau_in must be positive, got {}", self.tau_in)));
        }
        if !(self.omega_n > 0.0) || !(self.omega_n * self.tau_in < 1.0) {
            return Err(Error::Config(format!(
                "outer bandwidth must sit below the inner one: omega_n = {}, 1/tau_in = {}",
                self.omega_n,
                1.0 / self.tau_in
            )));
        }
        if !(self.zeta > 0.0) {
            return Err(Error::Config(format!("zeta must be positive, got {}", self.zeta)));
        }
        if !(self.sigma_tol >= 0.0 && self.sigma_tol < 1.0) {
            return Err(Error::Config(format!("sigma_tol must be in [0, 1), got {}", self.sigma_tol)));
        }
        Ok(())
    }
}

/// Desired feature-space closed loop `omega_n^2 / (s^2 + 2 zeta omega_n s + omega_n^2)`.
pub fn butterworth_target(omega_n: f64, zeta: f64) -> RationalSiso {
    let w2 = omega_n * omega_n;
    RationalSiso::new(vec![w2], vec![w2, 2.0 * zeta * omega_n, 1.0]).expect("proper")
}

/// Youla parameter of one channel, `M_T / (sigma T_inner)`.
pub fn youla_channel(sigma: f64, params: &OuterParams) -> Result<RationalSiso> {
    let t_in = inner_closed_loop(params.tau_in);
    let m_t = butterworth_target(params.omega_n, params.zeta);
    RationalSiso::new(poly_mul(m_t.num(), t_in.den()), poly_mul(&poly_mul(m_t.den(), t_in.num()), &[sigma]))
}

/// `omega_n^2 (tau s + 1)^3 / (sigma (3 tau s + 1) s (s + 2 zeta omega_n))`.
pub fn channel_controller(sigma: f64, params: &OuterParams) -> Result<RationalSiso> {
    unit_channel_controller(params).map(|g| g.scale(1.0 / sigma))
}

fn unit_channel_controller(params: &OuterParams) -> Result<RationalSiso> {
    let tau = params.tau_in;
    let w2 = params.omega_n * params.omega_n;
    let num = poly_mul(&[w2], &lag_power(tau, 3));
    let den = poly_mul(&[1.0, 3.0 * tau], &[0.0, 2.0 * params.zeta * params.omega_n, 1.0]);
    RationalSiso::new(num, den)
}

/// SVD-decoupled controller `V diag(G_c,i) U^T` with persistent channel states.
#[derive(Debug, Clone)]
pub struct OuterControllerBank {
    pub u: Matrix6<f64>,
    pub v: Matrix6<f64>,
    pub sigma: Vector6<f64>,
    pub active: [bool; 6],
    pub params: OuterParams,
    /// Unit-gain channel dynamics; channel `i` output is scaled by `1/sigma_i`.
    blocks: Vec<StateSpaceBlock>,
}

impl OuterControllerBank {
    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    /// Transfer function of channel `i` (zero when inactive).
    pub fn channel_transfer(&self, i: usize) -> Result<RationalSiso> {
        if self.active[i] {
            channel_controller(self.sigma[i], &self.params)
        } else {
            Ok(RationalSiso::gain(0.0))
        }
    }

    fn channel_gain(&self, i: usize) -> f64 {
        if self.active[i] {
            1.0 / self.sigma[i]
        } else {
            0.0
        }
    }

    /// Channel state matrix, one column per channel.
    fn states(&self) -> DMatrix<f64> {
        let n = self.blocks[0].order();
        DMatrix::from_fn(n, 6, |r, c| self.blocks[c].x[r])
    }

    fn set_states(&mut self, x: &DMatrix<f64>) {
        for (c, blk) in self.blocks.iter_mut().enumerate() {
            blk.x.copy_from(&x.column(c));
        }
    }

    /// Joint correction for feature error `e` (mm); the channel states then
    /// advance over `dt` with the error held.
    pub fn step(&mut self, e: &FeatureVector, dt: f64) -> Result<JointAngles> {
        if !e.is_finite() {
            return Err(Error::NonFinite(format!("feature error {:?}", e.0.as_slice())));
        }
        let e_ch = self.u.transpose() * e.0;
        let mut z = Vector6::zeros();
        for i in (0..6).filter(|i| self.active[*i]) {
            let blk = &mut self.blocks[i];
            z[i] = blk.output(e_ch[i]) / self.sigma[i];
            blk.step(e_ch[i], dt)?;
        }
        let out = self.v * z;
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("outer controller output".into()));
        }
        Ok(out)
    }

    /// Controller frequency response `V diag(G_c,i(j omega)) U^T`.
    pub fn freq_response(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        let mut diag = DMatrix::<Complex64>::zeros(6, 6);
        for i in 0..6 {
            diag[(i, i)] = self.blocks[i].freq_response(omega)? * self.channel_gain(i);
        }
        let v = self.v.map(|x| Complex64::new(x, 0.0));
        let ut = self.u.transpose().map(|x| Complex64::new(x, 0.0));
        Ok(DMatrix::from_column_slice(6, 6, v.as_slice()) * diag * DMatrix::from_column_slice(6, 6, ut.as_slice()))
    }
}

/// Builds the bank for the current linearization.
///
/// With `prev`, the singular vectors are sign-aligned to the previous ones
/// and the channel states are re-expressed in the new basis, so the filtered
/// feature-space error is preserved across the redesign.
pub fn design_outer_bank(
    lin: &LinearizedPlant,
    params: &OuterParams,
    prev: Option<&OuterControllerBank>,
) -> Result<OuterControllerBank> {
    params.validate()?;
    let svd = svd6(&lin.c1)?;
    let mut u = svd.u;
    let mut v = svd.v;
    let sigma = svd.sigma;
    if let Some(p) = prev {
        for j in 0..6 {
            if p.u.column(j).dot(&u.column(j)) < 0.0 {
                u.column_mut(j).neg_mut();
                v.column_mut(j).neg_mut();
            }
        }
    }
    let mut active = [false; 6];
    for i in 0..6 {
        active[i] = sigma[0] > 0.0 && sigma[i] >= params.sigma_tol * sigma[0];
    }
    if !active[0] {
        return Err(Error::DegenerateFeatures("all outer channels inactive".into()));
    }
    let reuse = prev.filter(|p| p.params == *params);
    let blocks = match reuse {
        Some(p) => p.blocks.clone(),
        None => vec![unit_channel_controller(params)?.realize(); 6],
    };
    let mut bank = OuterControllerBank { u, v, sigma, active, params: *params, blocks };
    if let Some(p) = reuse {
        // x_new = x_old * (U_old^T U_new)
        let r = p.u.transpose() * bank.u;
        let r = DMatrix::from_column_slice(6, 6, r.as_slice());
        let mut x = p.states() * r;
        for i in (0..6).filter(|i| !bank.active[*i]) {
            x.column_mut(i).fill(0.0);
        }
        bank.set_states(&x);
    }
    Ok(bank)
}

/// One row of the linearized-loop frequency check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopCheckRow {
    pub omega: f64,
    pub target: Complex64,
    /// Largest deviation of `U_a^T T U_a` from `M_T I`, relative to `|M_T|`.
    pub rel_error: f64,
    /// Mean diagonal entry of `U_a^T T U_a`.
    pub achieved: Complex64,
}

/// Closes the frozen linearized loop `C1 T_inner(s)` with `bank` and compares
/// the active-subspace response against the Butterworth target.
pub fn linearized_loop_check(
    lin: &LinearizedPlant,
    inner: &StateSpaceBlock,
    bank: &OuterControllerBank,
    omegas: &[f64],
) -> Result<Vec<LoopCheckRow>> {
    let m_t = butterworth_target(bank.params.omega_n, bank.params.zeta);
    let c1 = DMatrix::from_column_slice(6, 6, lin.c1.as_slice()).map(|x| Complex64::new(x, 0.0));
    let ua_cols: Vec<usize> = (0..6).filter(|i| bank.active[*i]).collect();
    let ua = DMatrix::from_fn(6, ua_cols.len(), |r, c| Complex64::new(bank.u[(r, ua_cols[c])], 0.0));
    let eye = DMatrix::<Complex64>::identity(6, 6);
    omegas
        .iter()
        .map(|&omega| {
            let gp = &c1 * inner.freq_response(omega)?;
            let l = gp * bank.freq_response(omega)?;
            let closed = (&eye + &l).lu().solve(&l).ok_or(Error::PoleOnAxis { omega })?;
            let sub = ua.adjoint() * closed * &ua;
            let target = m_t.freq_response(omega)?;
            let k = sub.nrows();
            let mut worst = 0.0_f64;
            let mut diag_sum = Complex64::new(0.0, 0.0);
            for r in 0..k {
                for c in 0..k {
                    let want = if r == c { target } else { Complex64::new(0.0, 0.0) };
                    worst = worst.max((sub[(r, c)] - want).norm());
                }
                diag_sum += sub[(r, r)];
            }
            Ok(LoopCheckRow { omega, target, rel_error: worst / target.norm(), achieved: diag_sum / k as f64 })
        })
        .collect()
}
