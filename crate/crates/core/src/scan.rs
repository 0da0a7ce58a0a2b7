//! Diagonal linear recurrence `x_k = a ⊙ x_{k-1} + b_k` over a sequence.
//!
//! [`scan_sequential`] is the left fold and serves as the oracle.
//! [`scan_parallel`] is a reduce-then-scan block scan: each fixed-size chunk
//! of rows is reduced to one [`ScanElement`], the chunk aggregates are
//! combined by an up-sweep/down-sweep tree, and every chunk is then replayed
//! from its carry. Chunk size and tree shape do not depend on the number of
//! workers, so results are bit-identical for any thread count.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::real::Real;

/// Rows per block in the parallel scan.
pub const CHUNK_ROWS: usize = 64;

/// Affine map `x ↦ a ⊙ x + b`; composition is associative.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanElement<T> {
    pub a: Vec<Complex<T>>,
    pub b: Vec<Complex<T>>,
}

impl<T: Real> ScanElement<T> {
    pub fn identity(h: usize) -> Self {
        ScanElement {
            a: vec![Complex::new(T::one(), T::zero()); h],
            b: vec![Complex::new(T::zero(), T::zero()); h],
        }
    }

    /// `self` applied first, then `later`: `(a1 a2, a2 b1 + b2)`.
    pub fn combine(&self, later: &Self) -> Self {
        let a = self.a.iter().zip(&later.a).map(|(x, y)| x * y).collect();
        let b = self
            .b
            .iter()
            .zip(&later.a)
            .zip(&later.b)
            .map(|((b1, a2), b2)| a2 * b1 + b2)
            .collect();
        ScanElement { a, b }
    }

    pub fn apply(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        x.iter().zip(&self.a).zip(&self.b).map(|((x, a), b)| a * x + b).collect()
    }
}

/// Which scan schedule to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanStrategy {
    Sequential,
    #[default]
    Parallel,
}

/// Hidden states `[L, H]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSequence<T> {
    pub states: Array2<Complex<T>>,
}

impl<T: Real> StateSequence<T> {
    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.nrows() == 0
    }
}

/// Gradients returned by [`scan_adjoint`].
#[derive(Debug, Clone)]
pub struct ScanGradients<T> {
    pub grad_a_bar: Vec<Complex<T>>,
    pub grad_inputs: Array2<Complex<T>>,
    pub grad_x0: Vec<Complex<T>>,
}

fn check_shapes<T>(a: &[Complex<T>], inputs: &ArrayView2<Complex<T>>, x0: &[Complex<T>]) -> Result<()> {
    let h = inputs.ncols();
    if a.len() != h || x0.len() != h {
        return Err(Error::input(format!(
            "scan shape mismatch: a_bar {} / x0 {} vs {} state columns",
            a.len(),
            x0.len(),
            h
        )));
    }
    Ok(())
}

fn replay<T: Real>(a: &[Complex<T>], rows: &mut [Complex<T>], carry: &[Complex<T>]) {
    let h = a.len();
    if rows.is_empty() {
        return;
    }
    for ((x, &ai), &p) in rows[..h].iter_mut().zip(a).zip(carry) {
        *x += ai * p;
    }
    for r in 1..rows.len() / h {
        let (done, rest) = rows.split_at_mut(r * h);
        let prev = &done[(r - 1) * h..];
        for ((x, &ai), &p) in rest[..h].iter_mut().zip(a).zip(prev) {
            *x += ai * p;
        }
    }
}

/// In-place left fold over the rows of `data` (`[L, H]` row-major).
pub(crate) fn fold_in_place<T: Real>(a: &[Complex<T>], data: &mut [Complex<T>], x0: &[Complex<T>]) {
    replay(a, data, x0);
}

/// Reduce one chunk (zero initial state) to its affine aggregate.
fn reduce_chunk<T: Real>(a: &[Complex<T>], rows: &[Complex<T>]) -> ScanElement<T> {
    let h = a.len();
    let mut agg = ScanElement::identity(h);
    for row in rows.chunks(h) {
        for i in 0..h {
            agg.a[i] *= a[i];
            agg.b[i] = a[i] * agg.b[i] + row[i];
        }
    }
    agg
}

/// Exclusive prefix over `elems` using a fixed up-sweep/down-sweep tree.
/// Entry `c` of the result is `elems[0] ∘ … ∘ elems[c-1]`.
pub(crate) fn exclusive_tree_scan<T: Real>(elems: &[ScanElement<T>], h: usize) -> Vec<ScanElement<T>> {
    let n = elems.len();
    let size = n.next_power_of_two().max(1);
    let mut tree: Vec<ScanElement<T>> = elems.to_vec();
    tree.resize(size, ScanElement::identity(h));

    let mut stride = 1;
    while stride < size {
        let mut i = 2 * stride - 1;
        while i < size {
            tree[i] = tree[i - stride].combine(&tree[i]);
            i += 2 * stride;
        }
        stride *= 2;
    }
    tree[size - 1] = ScanElement::identity(h);
    let mut stride = size / 2;
    while stride >= 1 {
        let mut i = 2 * stride - 1;
        while i < size {
            let left = tree[i - stride].clone();
            tree[i - stride] = tree[i].clone();
            tree[i] = tree[i].combine(&left);
            i += 2 * stride;
        }
        stride /= 2;
    }
    tree.truncate(n);
    tree
}

/// Block scan in place. Identical to the fold when `L <= CHUNK_ROWS`.
pub(crate) fn block_scan_in_place<T: Real>(a: &[Complex<T>], data: &mut [Complex<T>], x0: &[Complex<T>]) {
    let h = a.len();
    if h == 0 || data.is_empty() {
        return;
    }
    let chunk = CHUNK_ROWS * h;
    let nchunks = data.len().div_ceil(chunk);
    if nchunks == 1 {
        replay(a, data, x0);
        return;
    }
    let aggregates = {
        let view: &[Complex<T>] = data;
        exec::map_range(nchunks, |c| {
            let end = ((c + 1) * chunk).min(view.len());
            reduce_chunk(a, &view[c * chunk..end])
        })
    };
    let prefixes = exclusive_tree_scan(&aggregates, h);
    let carries: Vec<Vec<Complex<T>>> = prefixes.iter().map(|p| p.apply(x0)).collect();
    exec::for_each_chunk_mut(data, chunk, |c, rows| replay(a, rows, &carries[c]));
}

pub(crate) fn scan_in_place<T: Real>(
    a: &[Complex<T>],
    data: &mut [Complex<T>],
    x0: &[Complex<T>],
    strategy: ScanStrategy,
) {
    match strategy {
        ScanStrategy::Sequential => fold_in_place(a, data, x0),
        ScanStrategy::Parallel => block_scan_in_place(a, data, x0),
    }
}

/// Reverse-time scan in place: `y_k = a ⊙ y_{k+1} + data_k`, `y_L = 0`.
pub(crate) fn reverse_scan_in_place<T: Real>(a: &[Complex<T>], data: &mut Array2<Complex<T>>, strategy: ScanStrategy) {
    let h = a.len();
    let l = data.nrows();
    let mut rev = Array2::from_shape_fn((l, h), |(k, i)| data[[l - 1 - k, i]]);
    let zero = vec![Complex::new(T::zero(), T::zero()); h];
    scan_in_place(a, rev.as_slice_mut().expect("standard layout"), &zero, strategy);
    for k in 0..l {
        for i in 0..h {
            data[[k, i]] = rev[[l - 1 - k, i]];
        }
    }
}

fn to_owned_standard<T: Real>(inputs: ArrayView2<Complex<T>>) -> Array2<Complex<T>> {
    inputs.as_standard_layout().into_owned()
}

/// Sequential reference: `states[k] = a ⊙ states[k-1] + inputs[k]`, `states[-1] = x0`.
pub fn scan_sequential<T: Real>(
    a_bar: &[Complex<T>],
    inputs: ArrayView2<Complex<T>>,
    x0: &[Complex<T>],
) -> Result<StateSequence<T>> {
    check_shapes(a_bar, &inputs, x0)?;
    let mut states = to_owned_standard(inputs);
    fold_in_place(a_bar, states.as_slice_mut().expect("standard layout"), x0);
    Ok(StateSequence { states })
}

/// Block-parallel scan; matches [`scan_sequential`] up to rounding.
pub fn scan_parallel<T: Real>(
    a_bar: &[Complex<T>],
    inputs: ArrayView2<Complex<T>>,
    x0: &[Complex<T>],
) -> Result<StateSequence<T>> {
    check_shapes(a_bar, &inputs, x0)?;
    let mut states = to_owned_standard(inputs);
    block_scan_in_place(a_bar, states.as_slice_mut().expect("standard layout"), x0);
    Ok(StateSequence { states })
}

/// Reverse-mode pass of the recurrence.
///
/// With cotangent convention `g = ∂L/∂Re x + i ∂L/∂Im x`, the input
/// cotangents solve `λ_k = conj(a) ⊙ λ_{k+1} + upstream_k`, and
/// `grad_a = Σ_k λ_k ⊙ conj(x_{k-1})`.
pub fn scan_adjoint<T: Real>(
    a_bar: &[Complex<T>],
    inputs: ArrayView2<Complex<T>>,
    x0: &[Complex<T>],
    upstream: ArrayView2<Complex<T>>,
    strategy: ScanStrategy,
) -> Result<ScanGradients<T>> {
    check_shapes(a_bar, &inputs, x0)?;
    if upstream.dim() != inputs.dim() {
        return Err(Error::input("upstream gradient shape differs from inputs"));
    }
    let h = a_bar.len();
    let mut states = to_owned_standard(inputs);
    scan_in_place(a_bar, states.as_slice_mut().expect("standard layout"), x0, strategy);

    let conj_a: Vec<_> = a_bar.iter().map(|z| z.conj()).collect();
    let mut lam = to_owned_standard(upstream);
    reverse_scan_in_place(&conj_a, &mut lam, strategy);

    let mut grad_a = vec![Complex::new(T::zero(), T::zero()); h];
    for k in 0..lam.nrows() {
        for i in 0..h {
            let prev = if k == 0 { x0[i] } else { states[[k - 1, i]] };
            grad_a[i] += lam[[k, i]] * prev.conj();
        }
    }
    let grad_x0 = if lam.nrows() == 0 {
        vec![Complex::new(T::zero(), T::zero()); h]
    } else {
        (0..h).map(|i| conj_a[i] * lam[[0, i]]).collect()
    };
    Ok(ScanGradients { grad_a_bar: grad_a, grad_inputs: lam, grad_x0 })
}

/// Real leaky integration `y_k = d ⊙ y_{k-1} + v_k` in place over `[L, K]` rows.
pub(crate) fn leaky_in_place<T: Real>(decay: &[T], data: &mut Array2<T>) {
    let k = decay.len();
    let slice = data.as_slice_mut().expect("standard layout");
    for r in 1..slice.len() / k.max(1) {
        let (done, rest) = slice.split_at_mut(r * k);
        let prev = &done[(r - 1) * k..];
        for ((y, &p), &d) in rest[..k].iter_mut().zip(prev).zip(decay) {
            *y += d * p;
        }
    }
}

/// Reverse of [`leaky_in_place`]: `g_k = d ⊙ g_{k+1} + v_k`.
pub(crate) fn leaky_reverse_in_place<T: Real>(decay: &[T], data: &mut Array2<T>) {
    let k = decay.len();
    let slice = data.as_slice_mut().expect("standard layout");
    let rows = slice.len() / k.max(1);
    for r in (0..rows.saturating_sub(1)).rev() {
        let (head, tail) = slice.split_at_mut((r + 1) * k);
        let next = &tail[..k];
        for ((y, &n), &d) in head[r * k..].iter_mut().zip(next).zip(decay) {
            *y += d * n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_step_is_input() {
        let inputs = Array2::from_elem((1, 3), c(0.4, -1.0));
        let z = vec![c(0.0, 0.0); 3];
        let a = vec![c(0.9, 0.1); 3];
        let s = scan_sequential(&a, inputs.view(), &z).unwrap();
        assert_eq!(s.states, inputs);
        let p = scan_parallel(&a, inputs.view(), &z).unwrap();
        assert_eq!(p.states, inputs);
    }

    #[test]
    fn memoryless_and_cumsum() {
        let inputs = Array2::from_shape_fn((10, 2), |(k, i)| c(k as f64, i as f64));
        let z = vec![c(0.0, 0.0); 2];
        let s = scan_sequential(&[c(0.0, 0.0); 2], inputs.view(), &z).unwrap();
        assert_eq!(s.states, inputs);
        let ones = Array2::from_elem((300, 1), c(1.0, 0.0));
        let s = scan_parallel(&[c(1.0, 0.0)], ones.view(), &[c(0.0, 0.0)]).unwrap();
        for k in 0..300 {
            assert_eq!(s.states[[k, 0]], c((k + 1) as f64, 0.0));
        }
    }

    #[test]
    fn two_element_combine() {
        let e1 = ScanElement { a: vec![c(0.3, 0.2)], b: vec![c(1.0, -2.0)] };
        let e2 = ScanElement { a: vec![c(-0.5, 0.7)], b: vec![c(0.25, 0.5)] };
        let e = e1.combine(&e2);
        assert_eq!(e.b[0], e2.a[0] * e1.b[0] + e2.b[0]);
        assert_eq!(e.a[0], e1.a[0] * e2.a[0]);
    }

    #[test]
    fn shape_mismatch_is_error() {
        let inputs = Array2::from_elem((4, 3), c(1.0, 0.0));
        let r = scan_sequential(&[c(1.0, 0.0); 2], inputs.view(), &[c(0.0, 0.0); 3]);
        assert!(matches!(r, Err(Error::InvalidInput(_))));
        let r = scan_parallel(&[c(1.0, 0.0); 3], inputs.view(), &[c(0.0, 0.0); 2]);
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn tree_scan_matches_running_product() {
        let elems: Vec<_> = (0..7)
            .map(|i| ScanElement { a: vec![c(0.9, 0.1 * i as f64)], b: vec![c(i as f64, 1.0)] })
            .collect();
        let pre = exclusive_tree_scan(&elems, 1);
        let mut run = ScanElement::identity(1);
        for (i, e) in elems.iter().enumerate() {
            assert!((pre[i].a[0] - run.a[0]).norm() < 1e-12);
            assert!((pre[i].b[0] - run.b[0]).norm() < 1e-12);
            run = run.combine(e);
        }
    }

    #[test]
    fn adjoint_zero_and_single_step() {
        let inputs = Array2::from_shape_fn((5, 2), |(k, i)| c(k as f64, -(i as f64)));
        let a = [c(0.5, 0.5), c(-0.2, 0.9)];
        let z = [c(0.0, 0.0); 2];
        let g = scan_adjoint(&a, inputs.view(), &z, Array2::zeros((5, 2)).view(), ScanStrategy::Parallel).unwrap();
        assert!(g.grad_a_bar.iter().all(|v| v.norm() == 0.0));
        assert!(g.grad_inputs.iter().all(|v| v.norm() == 0.0));

        let one = Array2::from_elem((1, 2), c(2.0, 1.0));
        let up = Array2::from_elem((1, 2), c(-0.3, 0.8));
        let g = scan_adjoint(&a, one.view(), &z, up.view(), ScanStrategy::Sequential).unwrap();
        assert_eq!(g.grad_inputs, up);
    }

    #[test]
    fn leaky_forward_and_reverse() {
        let mut d = Array2::<f64>::zeros((5, 1));
        d[[0, 0]] = 2.0;
        leaky_in_place(&[0.9], &mut d);
        for k in 0..5 {
            assert!((d[[k, 0]] - 2.0 * 0.9f64.powi(k as i32)).abs() < 1e-15);
        }
        let mut g = Array2::<f64>::zeros((5, 1));
        g[[4, 0]] = 1.0;
        leaky_reverse_in_place(&[0.5], &mut g);
        assert!((g[[0, 0]] - 0.0625).abs() < 1e-15);
    }
}
