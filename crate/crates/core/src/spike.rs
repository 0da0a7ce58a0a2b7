//! Threshold spiking on `Re(x)` and its multi-Gaussian surrogate derivative.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::real::Real;

/// Shape of the multi-Gaussian surrogate
/// `g(v) = (1+h) G(v; 0, σ) - h G(v; σ, sσ) - h G(v; -σ, sσ)`
/// with unnormalized Gaussians `G(v; μ, σ') = exp(-(v-μ)² / 2σ'²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Surrogate {
    pub h: f64,
    pub s: f64,
    pub sigma: f64,
}

impl Default for Surrogate {
    fn default() -> Self {
        Surrogate { h: 0.15, s: 6.0, sigma: 0.5 }
    }
}

fn gauss<T: Real>(v: T, mu: T, sd: T) -> T {
    let d = (v - mu) / sd;
    (-(d * d) * T::of(0.5)).exp()
}

/// `∫_{-∞}^{v} G(t; μ, σ') dt`
fn gauss_integral<T: Real>(v: T, mu: T, sd: T) -> T {
    let root_half_pi = T::of((std::f64::consts::PI / 2.0).sqrt());
    sd * root_half_pi * (T::one() + ((v - mu) / (sd * T::SQRT_2())).erf())
}

impl Surrogate {
    /// Surrogate for `dH/dv`, used only in the backward pass.
    pub fn grad<T: Real>(&self, v: T) -> T {
        let (h, sigma) = (T::of(self.h), T::of(self.sigma));
        let wide = sigma * T::of(self.s);
        (T::one() + h) * gauss(v, T::zero(), sigma) - h * gauss(v, sigma, wide) - h * gauss(v, -sigma, wide)
    }

    /// Smooth stand-in for the step whose exact derivative is [`Self::grad`].
    /// Only used by diagnostic forward passes.
    pub fn primitive<T: Real>(&self, v: T) -> T {
        let (h, sigma) = (T::of(self.h), T::of(self.sigma));
        let wide = sigma * T::of(self.s);
        (T::one() + h) * gauss_integral(v, T::zero(), sigma)
            - h * gauss_integral(v, sigma, wide)
            - h * gauss_integral(v, -sigma, wide)
    }
}

/// Multi-Gaussian surrogate with the default shape (`h=0.15, s=6, σ=0.5`).
pub fn surrogate_grad(v: f64) -> f64 {
    Surrogate::default().grad(v)
}

/// Forward nonlinearity applied to the pre-threshold signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpikeMode {
    /// Heaviside step; backward uses the surrogate.
    #[default]
    Hard,
    /// Integral of the surrogate; forward and backward agree exactly.
    Smooth,
    /// No threshold at all, `s = Re(x)`; makes the network linear.
    Identity,
}

/// Threshold `ξ` and surrogate shape of one spiking layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeFunction {
    pub threshold: f64,
    pub surrogate: Surrogate,
}

impl Default for SpikeFunction {
    fn default() -> Self {
        SpikeFunction { threshold: 1.0, surrogate: Surrogate::default() }
    }
}

impl SpikeFunction {
    #[inline]
    pub fn forward<T: Real>(&self, y: T, mode: SpikeMode) -> T {
        let v = y - T::of(self.threshold);
        match mode {
            SpikeMode::Hard => heaviside(v),
            SpikeMode::Smooth => self.surrogate.primitive(v),
            SpikeMode::Identity => y,
        }
    }

    #[inline]
    pub fn backward<T: Real>(&self, y: T, mode: SpikeMode) -> T {
        match mode {
            SpikeMode::Hard | SpikeMode::Smooth => self.surrogate.grad(y - T::of(self.threshold)),
            SpikeMode::Identity => T::one(),
        }
    }
}

/// `H(v)` with `H(0) = 1`.
#[inline]
pub fn heaviside<T: Real>(v: T) -> T {
    if v >= T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

/// Binary spikes `H(Re(x) - ξ)` for a state sequence `[L, H]`. No reset
/// follows a spike.
pub fn spike_forward<T: Real>(x: ArrayView2<Complex<T>>, xi: T) -> Array2<u8> {
    x.mapv(|z| u8::from(z.re - xi >= T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn threshold_boundary_spikes() {
        let x = arr2(&[[Complex::new(1.2, 0.0), Complex::new(0.99, 5.0), Complex::new(1.0, -3.0)]]);
        assert_eq!(spike_forward(x.view(), 1.0), arr2(&[[1u8, 0, 1]]));
    }

    #[test]
    fn surrogate_is_even_and_decays() {
        for v in [0.1, 0.5, 2.0] {
            assert_eq!(surrogate_grad(v), surrogate_grad(-v));
        }
        assert!(surrogate_grad(50.0).abs() < 1e-12);
    }

    #[test]
    fn surrogate_at_zero() {
        // 1.15 - 0.3 exp(-1/72)
        let expected = 1.15 - 0.3 * (-1.0f64 / 72.0).exp();
        assert!((surrogate_grad(0.0) - expected).abs() < 1e-15);
        assert!((surrogate_grad(0.0) - 0.854_138_1).abs() < 1e-6);
    }

    #[test]
    fn primitive_derivative_is_surrogate() {
        let s = Surrogate::default();
        for v in [-3.0f64, -0.7, 0.0, 0.2, 1.3, 4.0] {
            let h = 1e-5;
            let fd = (s.primitive(v + h) - s.primitive(v - h)) / (2.0 * h);
            assert!((fd - s.grad(v)).abs() < 1e-9, "v = {v}");
        }
    }
}
