//! HiPPO-normal matrix, its eigendecomposition and layer initialization.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, Array3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::ssm::{BlockBasis, Discretization, SsmLayerParams};

/// Normal part of the HiPPO-LegS matrix: skew-symmetric plus `-I/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct HippoNormal {
    pub entries: Array2<f64>,
}

impl HippoNormal {
    pub fn size(&self) -> usize {
        self.entries.nrows()
    }
}

/// Eigenvalues and unitary eigenbasis of a [`HippoNormal`] matrix.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub lambdas: Vec<Complex64>,
    pub basis: Array2<Complex64>,
    pub basis_inverse: Array2<Complex64>,
}

impl EigenSystem {
    /// `V diag(λ) V⁻¹`
    pub fn reconstruct(&self) -> Array2<Complex64> {
        let n = self.lambdas.len();
        let mut scaled = self.basis.clone();
        for j in 0..n {
            for i in 0..n {
                scaled[[i, j]] *= self.lambdas[j];
            }
        }
        scaled.dot(&self.basis_inverse)
    }

    /// Largest entry of `|V^H V - I|`.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.lambdas.len();
        let vh = self.basis.t().mapv(|z| z.conj());
        let g = vh.dot(&self.basis);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[[i, j]] - target).norm());
            }
        }
        worst
    }
}

/// Entry `(n, k)`: `-1/2` on the diagonal, `-sqrt((n+1/2)(k+1/2))` below it
/// and the positive value above it.
pub fn build_hippo_normal(size: usize) -> Result<HippoNormal> {
    if size == 0 {
        return Err(Error::dim("HiPPO size must be at least 1"));
    }
    let entries = Array2::from_shape_fn((size, size), |(n, k)| {
        let mag = ((n as f64 + 0.5) * (k as f64 + 0.5)).sqrt();
        match n.cmp(&k) {
            std::cmp::Ordering::Equal => -0.5,
            std::cmp::Ordering::Greater => -mag,
            std::cmp::Ordering::Less => mag,
        }
    });
    Ok(HippoNormal { entries })
}

/// Diagonalizes `A_N` through the Hermitian matrix `i (A_N + I/2)`.
///
/// If `i S v = μ v` then `A_N v = (-1/2 - iμ) v`, and the eigenvectors of a
/// Hermitian matrix form a unitary basis. Eigenpairs are sorted by ascending
/// imaginary part; each eigenvector is rotated so that its largest component
/// is real and positive.
pub fn eig_hippo_normal(m: &HippoNormal) -> Result<EigenSystem> {
    let n = m.size();
    let herm = DMatrix::from_fn(n, n, |i, j| {
        let shift = if i == j { 0.5 } else { 0.0 };
        Complex64::new(0.0, m.entries[[i, j]] + shift)
    });
    let eig = SymmetricEigen::try_new(herm.clone(), 1e-15, 10_000).ok_or_else(|| {
        Error::NumericFailure {
            message: "Hermitian eigensolver did not converge".into(),
            residual: f64::NAN,
        }
    })?;

    let mut order: Vec<usize> = (0..n).collect();
    let lambda_of = |j: usize| Complex64::new(-0.5, -eig.eigenvalues[j]);
    order.sort_by(|&a, &b| {
        let (la, lb) = (lambda_of(a), lambda_of(b));
        la.im.total_cmp(&lb.im).then(la.re.total_cmp(&lb.re))
    });

    let mut lambdas = Vec::with_capacity(n);
    let mut basis = Array2::<Complex64>::zeros((n, n));
    for (col, &j) in order.iter().enumerate() {
        lambdas.push(lambda_of(j));
        let v = eig.eigenvectors.column(j);
        let mut pivot = 0;
        for i in 1..n {
            if v[i].norm() > v[pivot].norm() {
                pivot = i;
            }
        }
        let phase = v[pivot].conj() / v[pivot].norm();
        for i in 0..n {
            basis[[i, col]] = v[i] * phase;
        }
    }
    let basis_inverse = basis.t().mapv(|z| z.conj());
    let sys = EigenSystem { lambdas, basis, basis_inverse };

    let source = m.entries.mapv(|x| Complex64::new(x, 0.0));
    let diff = &sys.reconstruct() - &source;
    let residual = frobenius(&diff) / frobenius(&source).max(f64::MIN_POSITIVE);
    if !(residual < 1e-8) {
        return Err(Error::NumericFailure {
            message: "eigendecomposition does not reconstruct A_N".into(),
            residual,
        });
    }
    Ok(sys)
}

fn frobenius(m: &Array2<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Block-diagonal eigenbasis `V_N` of size `h` built from `block_size` blocks.
pub fn hippo_block_basis(h: usize, block_size: usize) -> Result<BlockBasis<f64>> {
    check_blocks(h, block_size)?;
    let sys = eig_hippo_normal(&build_hippo_normal(block_size)?)?;
    let nb = h / block_size;
    let mut re = Array3::zeros((nb, block_size, block_size));
    let mut im = Array3::zeros((nb, block_size, block_size));
    for b in 0..nb {
        for i in 0..block_size {
            for j in 0..block_size {
                re[[b, i, j]] = sys.basis[[i, j]].re;
                im[[b, i, j]] = sys.basis[[i, j]].im;
            }
        }
    }
    Ok(BlockBasis { re, im })
}

fn check_blocks(h: usize, block_size: usize) -> Result<()> {
    if h == 0 || block_size == 0 {
        return Err(Error::dim("layer and block size must be positive"));
    }
    if !h.is_multiple_of(block_size) {
        return Err(Error::config(format!(
            "block size {block_size} does not divide state size {h}"
        )));
    }
    Ok(())
}

/// Complex Gaussian matrix with `E|z|^2 = 1 / h_in`.
fn random_connection(rng: &mut ChaCha8Rng, h: usize, h_in: usize) -> (Array2<f64>, Array2<f64>) {
    let normal = Normal::new(0.0, (0.5 / h_in as f64).sqrt()).expect("finite std");
    let mut re = Array2::zeros((h, h_in));
    let mut im = Array2::zeros((h, h_in));
    for i in 0..h {
        for j in 0..h_in {
            re[[i, j]] = normal.sample(rng);
            im[[i, j]] = normal.sample(rng);
        }
    }
    (re, im)
}

/// HiPPO initialization: the spectrum of `A_N(block_size)` tiled across the
/// state, `η = 1`, `ξ = 1`, and a random connection matrix rotated into the
/// eigenbasis block by block.
pub fn init_layer(
    h_in: usize,
    h: usize,
    block_size: usize,
    seed: u64,
    mode: Discretization,
) -> Result<SsmLayerParams<f64>> {
    check_blocks(h, block_size)?;
    if h_in == 0 {
        return Err(Error::dim("input width must be positive"));
    }
    let sys = eig_hippo_normal(&build_hippo_normal(block_size)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (b_re, b_im) = random_connection(&mut rng, h, h_in);

    let mut conn_re = Array2::zeros((h, h_in));
    let mut conn_im = Array2::zeros((h, h_in));
    for blk in 0..h / block_size {
        let off = blk * block_size;
        for i in 0..block_size {
            for j in 0..h_in {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..block_size {
                    acc += sys.basis_inverse[[i, k]] * Complex64::new(b_re[[off + k, j]], b_im[[off + k, j]]);
                }
                conn_re[[off + i, j]] = acc.re;
                conn_im[[off + i, j]] = acc.im;
            }
        }
    }

    let tiled = |f: &dyn Fn(Complex64) -> f64| -> Array1<f64> {
        Array1::from_shape_fn(h, |i| f(sys.lambdas[i % block_size]))
    };
    Ok(SsmLayerParams {
        log_neg_real: tiled(&|l| (-l.re).ln()),
        freq: tiled(&|l| l.im),
        log_eta: Array1::zeros(h),
        conn_re,
        conn_im,
        threshold: 1.0,
        mode,
        fixed_basis: None,
    })
}

/// Random-frequency initialization: decay `b ~ U(2, 3)`, frequency
/// `ω ~ U(5, 10)`, no eigenbasis rotation.
pub fn init_layer_random(h_in: usize, h: usize, seed: u64, mode: Discretization) -> Result<SsmLayerParams<f64>> {
    if h == 0 || h_in == 0 {
        return Err(Error::dim("layer widths must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (conn_re, conn_im) = random_connection(&mut rng, h, h_in);
    let decay = Uniform::new_inclusive(2.0, 3.0).expect("valid range");
    let omega = Uniform::new_inclusive(5.0, 10.0).expect("valid range");
    let log_neg_real = Array1::from_shape_fn(h, |_| rng.sample::<f64, _>(decay).ln());
    let freq = Array1::from_shape_fn(h, |_| rng.sample(omega));
    Ok(SsmLayerParams {
        log_neg_real,
        freq,
        log_eta: Array1::zeros(h),
        conn_re,
        conn_im,
        threshold: 1.0,
        mode,
        fixed_basis: None,
    })
}
