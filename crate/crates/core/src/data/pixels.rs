use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// Row-major flattening of an image into a single-channel sequence
/// `[rows·cols, 1]`. A 28×28 image gives 784 steps.
pub fn rasterize_pixel_stream(image: ArrayView2<f32>) -> Array2<f32> {
    let flat: Vec<f32> = image.iter().copied().collect();
    let n = flat.len();
    Array2::from_shape_vec((n, 1), flat).expect("length matches")
}

/// Seeded uniform permutation of `0..n`.
pub fn random_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng::stream(seed, &[0x9E4]));
    p
}

/// Step `k` of the output is step `perm[k]` of the input.
pub fn permute_pixels<T: Clone>(seq: ArrayView2<T>, perm: &[usize]) -> Result<Array2<T>> {
    let n = seq.nrows();
    if perm.len() != n {
        return Err(Error::config(format!("permutation has {} entries for {n} steps", perm.len())));
    }
    let mut seen = vec![false; n];
    for &i in perm {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(Error::config("permutation is not a bijection"));
        }
    }
    Ok(Array2::from_shape_fn(seq.raw_dim(), |(k, c)| seq[[perm[k], c]].clone()))
}

/// Inverse of a bijection.
pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &i) in perm.iter().enumerate() {
        inv[i] = k;
    }
    inv
}
