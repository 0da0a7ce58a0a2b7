//! Zero-order-hold and Dirac discretizations with the learnable scale `η`.

use ndarray::Array2;
use num_complex::{Complex, Complex64};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::ssm::{Discretization, SsmLayerParams};

/// Below this `|η Δ λ|` the ZOH input factor switches to its series.
pub const ZOH_SERIES_THRESHOLD: f64 = 1e-8;

/// Discrete diagonal recurrence `x_k = a_bar ⊙ x_{k-1} + b_bar u_k`.
#[derive(Debug, Clone)]
pub struct DiscreteSystem<T> {
    pub a_bar: Vec<Complex<T>>,
    /// Row scaling of the connection matrix, `b_bar = diag(input_scale) B`.
    pub input_scale: Vec<Complex<T>>,
    pub b_bar_re: Array2<T>,
    pub b_bar_im: Array2<T>,
    pub dt: T,
}

impl<T: Real> DiscreteSystem<T> {
    pub fn b_bar(&self, i: usize, j: usize) -> Complex<T> {
        Complex::new(self.b_bar_re[[i, j]], self.b_bar_im[[i, j]])
    }
}

fn check_dt<T: Real>(dt: T) -> Result<()> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::config(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

/// `(e^z - 1) / z`, the ZOH input factor divided by `η Δ`.
#[inline]
pub(crate) fn phi<T: Real>(z: Complex<T>) -> Complex<T> {
    if z.norm().f64() < ZOH_SERIES_THRESHOLD {
        Complex::new(T::one(), T::zero()) + z * T::of(0.5)
    } else {
        (z.exp() - T::one()) / z
    }
}

/// Derivative of [`phi`], `(e^z (z - 1) + 1) / z²`.
#[inline]
pub(crate) fn phi_prime<T: Real>(z: Complex<T>) -> Complex<T> {
    // the closed form loses ~eps/|z|^2 relative accuracy; use the series
    // 1/2 + z/3 + z²/8 + z³/30 below 1e-3
    if z.norm().f64() < 1e-3 {
        let half = Complex::new(T::of(0.5), T::zero());
        half + z / T::of(3.0) + z * z / T::of(8.0) + z * z * z / T::of(30.0)
    } else {
        (z.exp() * (z - T::one()) + T::one()) / (z * z)
    }
}

/// Per-state transition `a_bar = exp(η Δ λ)` and input scale for the
/// layer's discretization mode. This is the hot-path form used by the layer;
/// [`discretize`] additionally materializes `b_bar`.
pub fn coefficients<T: Real>(params: &SsmLayerParams<T>, dt: T) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
    let lambdas = params.lambdas();
    let mut a = Vec::with_capacity(lambdas.len());
    let mut scale = Vec::with_capacity(lambdas.len());
    for (lam, &le) in lambdas.iter().zip(params.log_eta.iter()) {
        let eta = le.exp();
        let z = *lam * (eta * dt);
        a.push(z.exp());
        scale.push(match params.mode {
            Discretization::Zoh => phi(z) * (eta * dt),
            Discretization::Dirac => Complex::new(eta, T::zero()),
        });
    }
    (a, scale)
}

/// Gradients of the real neuron parameters given cotangents of the
/// transition and input scale (convention: `g = ∂L/∂Re + i ∂L/∂Im`).
///
/// Returns `(d log_neg_real, d freq, d log_eta)`.
pub fn coefficients_vjp<T: Real>(
    params: &SsmLayerParams<T>,
    dt: T,
    grad_a: &[Complex<T>],
    grad_scale: &[Complex<T>],
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let h = params.state_dim();
    let (mut g_lnr, mut g_freq, mut g_le) = (vec![T::zero(); h], vec![T::zero(); h], vec![T::zero(); h]);
    // dL/dθ = Re(conj(g) · df/dθ)
    let contract = |g: Complex<T>, df: Complex<T>| g.re * df.re + g.im * df.im;
    for i in 0..h {
        let decay = params.log_neg_real[i].exp();
        let lam = Complex::new(-decay, params.freq[i]);
        let eta = params.log_eta[i].exp();
        let ed = eta * dt;
        let z = lam * ed;
        let a = z.exp();
        let dz_lnr = Complex::new(-decay * ed, T::zero());
        let dz_freq = Complex::new(T::zero(), ed);
        let dz_le = z;

        g_lnr[i] += contract(grad_a[i], a * dz_lnr);
        g_freq[i] += contract(grad_a[i], a * dz_freq);
        g_le[i] += contract(grad_a[i], a * dz_le);

        match params.mode {
            Discretization::Dirac => {
                g_le[i] += grad_scale[i].re * eta;
            }
            Discretization::Zoh => {
                // scale = ηΔ φ(z)
                let dphi = phi_prime(z) * ed;
                g_lnr[i] += contract(grad_scale[i], dphi * dz_lnr);
                g_freq[i] += contract(grad_scale[i], dphi * dz_freq);
                g_le[i] += contract(grad_scale[i], phi(z) * ed + dphi * dz_le);
            }
        }
    }
    (g_lnr, g_freq, g_le)
}

fn materialize<T: Real>(params: &SsmLayerParams<T>, dt: T) -> DiscreteSystem<T> {
    let (a_bar, input_scale) = coefficients(params, dt);
    let (h, n) = params.conn_re.dim();
    let mut b_bar_re = Array2::zeros((h, n));
    let mut b_bar_im = Array2::zeros((h, n));
    for i in 0..h {
        let s = input_scale[i];
        for j in 0..n {
            let b = Complex::new(params.conn_re[[i, j]], params.conn_im[[i, j]]) * s;
            b_bar_re[[i, j]] = b.re;
            b_bar_im[[i, j]] = b.im;
        }
    }
    DiscreteSystem { a_bar, input_scale, b_bar_re, b_bar_im, dt }
}

/// `a_bar = exp(η Δ λ)`, `b_bar = (a_bar - 1) / λ · B`.
pub fn discretize_zoh<T: Real>(params: &SsmLayerParams<T>, dt: T) -> Result<DiscreteSystem<T>> {
    check_dt(dt)?;
    let mut p = params.clone();
    p.mode = Discretization::Zoh;
    Ok(materialize(&p, dt))
}

/// `a_bar = exp(η Δ λ)`, `b_bar = η B`.
pub fn discretize_dirac<T: Real>(params: &SsmLayerParams<T>, dt: T) -> Result<DiscreteSystem<T>> {
    check_dt(dt)?;
    let mut p = params.clone();
    p.mode = Discretization::Dirac;
    Ok(materialize(&p, dt))
}

/// Discretize according to `params.mode`.
pub fn discretize<T: Real>(params: &SsmLayerParams<T>, dt: T) -> Result<DiscreteSystem<T>> {
    check_dt(dt)?;
    Ok(materialize(params, dt))
}

/// Exact response of `dx/dt = λ x + b u(t)` to the Dirac comb
/// `u(t) = Σ u_n δ(t - t_n)` from a zero initial state, evaluated at `t`.
pub fn analytic_state(lambda: Complex64, b: Complex64, events: &[(f64, f64)], t: f64) -> Result<Complex64> {
    if events.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(Error::input("events must be sorted by time"));
    }
    Ok(events
        .iter()
        .take_while(|(tn, _)| *tn <= t)
        .map(|&(tn, un)| (lambda * (t - tn)).exp() * b * un)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2};

    fn scalar(lambda: Complex64, log_eta: f64, b: f64) -> SsmLayerParams<f64> {
        SsmLayerParams {
            log_neg_real: arr1(&[(-lambda.re).ln()]),
            freq: arr1(&[lambda.im]),
            log_eta: arr1(&[log_eta]),
            conn_re: arr2(&[[b]]),
            conn_im: arr2(&[[0.0]]),
            threshold: 1.0,
            mode: Discretization::Dirac,
            fixed_basis: None,
        }
    }

    #[test]
    fn zoh_scalar_closed_form() {
        let p = scalar(Complex64::new(-1.0, 0.0), 0.0, 2.0);
        let d = discretize_zoh(&p, 1.0).unwrap();
        let e = (-1.0f64).exp();
        assert!((d.a_bar[0].re - e).abs() < 1e-15);
        assert!((d.b_bar(0, 0).re - (1.0 - e) * 2.0).abs() < 1e-15);
        assert!(d.b_bar(0, 0).im.abs() < 1e-15);
    }

    #[test]
    fn zoh_small_lambda_series() {
        // exp(-40) underflows nothing but makes |ηΔλ| ≈ 4e-18
        let p = scalar(Complex64::new(-(-40.0f64).exp(), 0.0), 0.0, 1.0);
        let d = discretize_zoh(&p, 1.0).unwrap();
        assert!((d.b_bar(0, 0).re - 1.0).abs() < 1e-15);
        let p = scalar(Complex64::new(-(-40.0f64).exp(), 0.0), 3.0f64.ln(), 1.0);
        let d = discretize_zoh(&p, 0.5).unwrap();
        assert!((d.b_bar(0, 0).re - 1.5).abs() < 1e-14);
    }

    #[test]
    fn dirac_half_period() {
        let p = scalar(Complex64::new(-0.5, std::f64::consts::PI), 0.0, 1.0);
        let d = discretize_dirac(&p, 1.0).unwrap();
        assert!((d.a_bar[0].re + 0.606_530_659_712_633_4).abs() < 1e-15);
        assert!(d.a_bar[0].im.abs() < 1e-15);
    }

    #[test]
    fn dirac_scales_input_by_eta() {
        let p = scalar(Complex64::new(-0.3, 1.0), 2.0f64.ln(), 0.7);
        let d = discretize_dirac(&p, 1.0).unwrap();
        assert!((d.b_bar(0, 0).re - 1.4).abs() < 1e-15);
    }

    #[test]
    fn nonpositive_dt_rejected() {
        let p = scalar(Complex64::new(-1.0, 0.0), 0.0, 1.0);
        assert!(matches!(discretize_dirac(&p, 0.0), Err(Error::InvalidConfig(_))));
        assert!(matches!(discretize_zoh(&p, -1.0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn analytic_state_basics() {
        let lam = Complex64::new(-0.5, 2.0);
        let b = Complex64::new(0.3, -0.1);
        assert_eq!(analytic_state(lam, b, &[], 3.0).unwrap(), Complex64::new(0.0, 0.0));
        let x = analytic_state(lam, b, &[(1.0, 2.0)], 1.0).unwrap();
        assert!((x - b * 2.0).norm() < 1e-15);
        assert!(analytic_state(lam, b, &[(2.0, 1.0), (1.0, 1.0)], 3.0).is_err());
    }

    #[test]
    fn phi_prime_matches_difference_quotient() {
        for &z in &[Complex64::new(-0.5, 2.0), Complex64::new(-1e-2, 3e-2), Complex64::new(-2.0, -7.0)] {
            let h = 1e-6;
            let fd = (phi(z + h) - phi(z - h)) / (2.0 * h);
            assert!((fd - phi_prime(z)).norm() < 1e-8 * (1.0 + fd.norm()), "{z}");
        }
    }
}
