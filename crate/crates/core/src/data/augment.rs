use ndarray::{s, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EventSequence, Label};
use crate::error::{Error, Result};

fn default_max_shift() -> usize {
    2
}
fn default_shift_prob() -> f64 {
    0.2
}

/// Training-time augmentation switches. Both are off by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Augmentation {
    #[serde(default)]
    pub channel_shift: bool,
    #[serde(default = "default_max_shift")]
    pub max_shift: usize,
    #[serde(default = "default_shift_prob")]
    pub shift_prob: f64,
    /// Probability of mixing a sample with another one from the batch source.
    #[serde(default)]
    pub cutmix_prob: f64,
}

impl Default for Augmentation {
    fn default() -> Self {
        Augmentation { channel_shift: false, max_shift: 2, shift_prob: 0.2, cutmix_prob: 0.0 }
    }
}

impl Augmentation {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.shift_prob) || !(0.0..=1.0).contains(&self.cutmix_prob) {
            return Err(Error::config("augmentation probabilities must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn is_active(&self) -> bool {
        (self.channel_shift && self.shift_prob > 0.0) || self.cutmix_prob > 0.0
    }
}

/// Shift every channel by the same offset `d`: column `c` moves to `c + d`,
/// columns leaving the range are dropped.
pub fn shift_raster(raster: &Array2<u8>, d: isize) -> Array2<u8> {
    let c = raster.ncols() as isize;
    let mut out = Array2::zeros(raster.raw_dim());
    if d.abs() >= c {
        return out;
    }
    let (src, dst) = if d >= 0 { (0..c - d, d..c) } else { (-d..c, 0..c + d) };
    out.slice_mut(s![.., dst.start..dst.end]).assign(&raster.slice(s![.., src.start..src.end]));
    out
}

/// With probability `prob`, shift all channels by a uniform offset in
/// `[-max_shift, max_shift]`.
pub fn channel_shift(seq: &EventSequence, max_shift: usize, prob: f64, rng: &mut impl Rng) -> EventSequence {
    let mut out = seq.clone();
    if prob > 0.0 && rng.random::<f64>() < prob {
        let m = max_shift as i64;
        let d = rng.random_range(-m..=m);
        out.raster = shift_raster(&seq.raster, d as isize);
    }
    out
}

fn check_pair(a: &EventSequence, b: &EventSequence) -> Result<()> {
    if a.raster.dim() != b.raster.dim() {
        return Err(Error::input(format!(
            "cutmix needs equal shapes, got {:?} and {:?}",
            a.raster.dim(),
            b.raster.dim()
        )));
    }
    Ok(())
}

/// Replace steps `[k1, k2)` of `a` with those of `b`. The label mixes the two
/// labels by the share of spikes each source contributes; with no spikes at
/// all it is `a`'s label.
pub fn cutmix_interval(
    a: &EventSequence,
    b: &EventSequence,
    k1: usize,
    k2: usize,
    num_classes: usize,
) -> Result<EventSequence> {
    check_pair(a, b)?;
    if k1 > k2 || k2 > a.len() {
        return Err(Error::input(format!("cutmix interval [{k1}, {k2}) invalid for length {}", a.len())));
    }
    let la = a.label.as_ref().ok_or_else(|| Error::input("cutmix needs labelled sequences"))?.to_dense(num_classes)?;
    let lb = b.label.as_ref().ok_or_else(|| Error::input("cutmix needs labelled sequences"))?.to_dense(num_classes)?;

    let mut raster = a.raster.clone();
    raster.slice_mut(s![k1..k2, ..]).assign(&b.raster.slice(s![k1..k2, ..]));
    let inserted = b.raster.slice(s![k1..k2, ..]).iter().filter(|&&v| v != 0).count();
    let kept = a.event_count() - a.raster.slice(s![k1..k2, ..]).iter().filter(|&&v| v != 0).count();
    let total = kept + inserted;
    let label = if total == 0 {
        la
    } else {
        let (wa, wb) = (kept as f64 / total as f64, inserted as f64 / total as f64);
        la.iter().zip(&lb).map(|(x, y)| wa * x + wb * y).collect()
    };
    Ok(EventSequence {
        raster,
        label: Some(Label::Soft(label.into_iter().map(|v| v as f32).collect())),
        meta: a.meta.clone(),
    })
}

/// [`cutmix_interval`] with endpoints drawn uniformly from `[0, L]` and
/// ordered.
pub fn cutmix_events(
    a: &EventSequence,
    b: &EventSequence,
    num_classes: usize,
    rng: &mut impl Rng,
) -> Result<EventSequence> {
    check_pair(a, b)?;
    let l = a.len();
    let (x, y) = (rng.random_range(0..=l), rng.random_range(0..=l));
    cutmix_interval(a, b, x.min(y), x.max(y), num_classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn seq(raster: Array2<u8>, class: u16) -> EventSequence {
        EventSequence::new(raster, Some(Label::Class(class))).unwrap()
    }

    #[test]
    fn shift_by_one() {
        let r = Array2::from_shape_fn((3, 4), |(k, c)| u8::from((k + c) % 2 == 0));
        let s = shift_raster(&r, 1);
        for k in 0..3 {
            assert_eq!(s[[k, 0]], 0);
            for c in 1..4 {
                assert_eq!(s[[k, c]], r[[k, c - 1]]);
            }
        }
    }

    #[test]
    fn zero_probability_is_identity() {
        let a = seq(Array2::ones((5, 3)), 0);
        let mut rng = stream(0, &[]);
        assert_eq!(channel_shift(&a, 2, 0.0, &mut rng), a);
    }

    #[test]
    fn empty_and_full_intervals() {
        let a = seq(Array2::from_shape_fn((6, 2), |(k, _)| u8::from(k % 2 == 0)), 0);
        let b = seq(Array2::from_shape_fn((6, 2), |(k, _)| u8::from(k % 3 == 0)), 2);
        let e = cutmix_interval(&a, &b, 3, 3, 3).unwrap();
        assert_eq!(e.raster, a.raster);
        assert_eq!(e.label, Some(Label::Soft(vec![1.0, 0.0, 0.0])));
        let f = cutmix_interval(&a, &b, 0, 6, 3).unwrap();
        assert_eq!(f.raster, b.raster);
        assert_eq!(f.label, Some(Label::Soft(vec![0.0, 0.0, 1.0])));
    }

    #[test]
    fn spike_ratio_label() {
        // a: 60 spikes in steps 0..6, b: 40 spikes in steps 6..10
        let a = seq(Array2::from_shape_fn((10, 10), |(k, _)| u8::from(k < 6)), 1);
        let b = seq(Array2::from_shape_fn((10, 10), |(k, _)| u8::from(k >= 6)), 3);
        let m = cutmix_interval(&a, &b, 6, 10, 4).unwrap();
        let Some(Label::Soft(p)) = m.label else { panic!() };
        assert!((p[1] - 0.6).abs() < 1e-7 && (p[3] - 0.4).abs() < 1e-7);
    }

    #[test]
    fn silent_mix_keeps_first_label() {
        let a = seq(Array2::zeros((4, 2)), 1);
        let b = seq(Array2::zeros((4, 2)), 0);
        let m = cutmix_interval(&a, &b, 1, 3, 2).unwrap();
        assert_eq!(m.label, Some(Label::Soft(vec![0.0, 1.0])));
    }

    #[test]
    fn shape_mismatch_fails() {
        let a = seq(Array2::zeros((4, 2)), 0);
        let b = seq(Array2::zeros((5, 2)), 0);
        assert!(cutmix_interval(&a, &b, 0, 1, 2).is_err());
    }
}
