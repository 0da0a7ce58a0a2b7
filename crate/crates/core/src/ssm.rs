//! Learnable parameters of one resonate-and-fire SSM layer.

use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// How continuous-time dynamics are turned into a discrete recurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discretization {
    /// Zero-order hold: input held constant over each step.
    Zoh,
    /// Exact for weighted Dirac combs on the step grid.
    Dirac,
}

/// Block-diagonal complex matrix, stored as real and imaginary blocks.
///
/// Used as the frozen eigenbasis applied before thresholding in a
/// continuous-input first layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockBasis<T> {
    /// `[num_blocks, block, block]`
    pub re: Array3<T>,
    pub im: Array3<T>,
}

impl<T: Real> BlockBasis<T> {
    pub fn block_size(&self) -> usize {
        self.re.shape()[1]
    }

    pub fn num_blocks(&self) -> usize {
        self.re.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.block_size() * self.num_blocks()
    }

    /// `Re(V x_k)` for every row `x_k` of a state sequence given as real and
    /// imaginary parts `[L, H]`.
    pub fn real_part_of_product(&self, x_re: ArrayView2<T>, x_im: ArrayView2<T>) -> Array2<T> {
        let bs = self.block_size();
        let mut out = Array2::zeros(x_re.raw_dim());
        for b in 0..self.num_blocks() {
            let cols = s![.., b * bs..(b + 1) * bs];
            let vre = self.re.index_axis(Axis(0), b);
            let vim = self.im.index_axis(Axis(0), b);
            // rows are x_k^T, so (V x)^T = x^T V^T
            let mut block = out.slice_mut(cols);
            ndarray::linalg::general_mat_mul(T::one(), &x_re.slice(cols), &vre.t(), T::zero(), &mut block);
            ndarray::linalg::general_mat_mul(-T::one(), &x_im.slice(cols), &vim.t(), T::one(), &mut block);
        }
        out
    }

    /// Adjoint of [`Self::real_part_of_product`]: maps a real cotangent
    /// `[L, H]` to the complex cotangent `V^H g` split into parts.
    pub fn real_part_adjoint(&self, g: ArrayView2<T>) -> (Array2<T>, Array2<T>) {
        let bs = self.block_size();
        let mut gre = Array2::zeros(g.raw_dim());
        let mut gim = Array2::zeros(g.raw_dim());
        for b in 0..self.num_blocks() {
            let cols = s![.., b * bs..(b + 1) * bs];
            let vre = self.re.index_axis(Axis(0), b);
            let vim = self.im.index_axis(Axis(0), b);
            let gb = g.slice(cols);
            ndarray::linalg::general_mat_mul(T::one(), &gb, &vre, T::zero(), &mut gre.slice_mut(cols));
            ndarray::linalg::general_mat_mul(-T::one(), &gb, &vim, T::zero(), &mut gim.slice_mut(cols));
        }
        (gre, gim)
    }

    pub fn cast<U: Real>(&self) -> BlockBasis<U> {
        BlockBasis {
            re: self.re.mapv(|v| U::of(v.f64())),
            im: self.im.mapv(|v| U::of(v.f64())),
        }
    }
}

/// Per-layer state of an RF layer.
///
/// Eigenvalues are stored as `log(-Re λ)` and `Im λ` so the decay stays
/// strictly positive under any update. The complex connection matrix
/// `[H, H_in]` is kept as two real arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct SsmLayerParams<T> {
    pub log_neg_real: Array1<T>,
    pub freq: Array1<T>,
    pub log_eta: Array1<T>,
    pub conn_re: Array2<T>,
    pub conn_im: Array2<T>,
    pub threshold: T,
    pub mode: Discretization,
    pub fixed_basis: Option<BlockBasis<T>>,
}

impl<T: Real> SsmLayerParams<T> {
    pub fn state_dim(&self) -> usize {
        self.freq.len()
    }

    pub fn input_dim(&self) -> usize {
        self.conn_re.ncols()
    }

    /// Continuous eigenvalues `λ = -exp(log_neg_real) + i·freq`.
    pub fn lambdas(&self) -> Vec<Complex<T>> {
        self.log_neg_real
            .iter()
            .zip(self.freq.iter())
            .map(|(&l, &w)| Complex::new(-l.exp(), w))
            .collect()
    }

    pub fn eta(&self) -> Array1<T> {
        self.log_eta.mapv(T::exp)
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.state_dim();
        if h == 0 || self.input_dim() == 0 {
            return Err(Error::dim("layer has zero width"));
        }
        if self.log_neg_real.len() != h || self.log_eta.len() != h {
            return Err(Error::dim("neuron parameter lengths disagree"));
        }
        if self.conn_re.dim() != (h, self.input_dim()) || self.conn_im.dim() != self.conn_re.dim() {
            return Err(Error::dim("connection shape disagrees with state size"));
        }
        if let Some(b) = &self.fixed_basis {
            if b.dim() != h {
                return Err(Error::dim("fixed basis size disagrees with state size"));
            }
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> SsmLayerParams<U> {
        let c = |a: &Array1<T>| a.mapv(|v| U::of(v.f64()));
        SsmLayerParams {
            log_neg_real: c(&self.log_neg_real),
            freq: c(&self.freq),
            log_eta: c(&self.log_eta),
            conn_re: self.conn_re.mapv(|v| U::of(v.f64())),
            conn_im: self.conn_im.mapv(|v| U::of(v.f64())),
            threshold: U::of(self.threshold.f64()),
            mode: self.mode,
            fixed_basis: self.fixed_basis.as_ref().map(BlockBasis::cast),
        }
    }
}
