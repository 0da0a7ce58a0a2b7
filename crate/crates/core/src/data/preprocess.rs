use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{EventSequence, SeqMeta};
use crate::error::{Error, Result};

/// Left edge of bin `k`, computed the same way for every caller so that an
/// event stamped exactly on it lands in bin `k`.
#[inline]
fn bin_edge(k: usize, bins: usize, duration: f64) -> f64 {
    duration * k as f64 / bins as f64
}

/// Raster `[bins, channels]` with a 1 wherever at least one raw event
/// `(time, channel)` falls in the left-closed bin `[k·d/T, (k+1)·d/T)`.
pub fn bin_events(raw: &[(f64, u32)], bins: usize, duration: f64, channels: usize) -> Result<EventSequence> {
    if bins == 0 || channels == 0 {
        return Err(Error::config("bins and channels must be positive"));
    }
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::config("duration must be positive and finite"));
    }
    let mut raster = Array2::zeros((bins, channels));
    for &(t, c) in raw {
        if !(t >= 0.0 && t < duration) {
            return Err(Error::input(format!("event time {t} outside [0, {duration})")));
        }
        if c as usize >= channels {
            return Err(Error::input(format!("event channel {c} outside [0, {channels})")));
        }
        let mut k = ((t / duration) * bins as f64).floor() as usize;
        k = k.min(bins - 1);
        while k > 0 && t < bin_edge(k, bins, duration) {
            k -= 1;
        }
        while k + 1 < bins && t >= bin_edge(k + 1, bins, duration) {
            k += 1;
        }
        raster[[k, c as usize]] = 1;
    }
    Ok(EventSequence { raster, label: None, meta: SeqMeta { source_id: String::new(), original_length: raw.len() } })
}

/// How groups of input channels are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PoolMode {
    /// Active if any channel in the group is active.
    #[default]
    Or,
    /// Active if at least `min_count` channels in the group are active.
    SumThreshold { min_count: u32 },
    /// Keep the first channel of each group.
    Strided,
}

/// Merge consecutive groups of `factor` channels.
pub fn pool_channels(seq: &EventSequence, factor: usize, mode: PoolMode) -> Result<EventSequence> {
    let c = seq.channels();
    if factor == 0 || !c.is_multiple_of(factor) {
        return Err(Error::config(format!("pool factor {factor} does not divide {c} channels")));
    }
    let out_c = c / factor;
    let raster = Array2::from_shape_fn((seq.len(), out_c), |(k, j)| {
        let group = (0..factor).map(|i| seq.raster[[k, j * factor + i]]);
        let hit = match mode {
            PoolMode::Or => group.into_iter().any(|v| v != 0),
            PoolMode::SumThreshold { min_count } => group.map(u32::from).sum::<u32>() >= min_count.max(1),
            PoolMode::Strided => seq.raster[[k, j * factor]] != 0,
        };
        u8::from(hit)
    });
    Ok(EventSequence { raster, label: seq.label.clone(), meta: seq.meta.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_gives_zero_raster() {
        let s = bin_events(&[], 10, 1.0, 3).unwrap();
        assert_eq!(s.event_count(), 0);
        assert_eq!(s.raster.dim(), (10, 3));
    }

    #[test]
    fn repeated_events_saturate() {
        let s = bin_events(&[(0.11, 1), (0.12, 1), (0.13, 1)], 10, 1.0, 2).unwrap();
        assert_eq!(s.event_count(), 1);
        assert_eq!(s.raster[[1, 1]], 1);
    }

    #[test]
    fn bin_edges_are_left_closed() {
        let (bins, duration) = (250, 1.3e6);
        for k in 0..bins {
            let t = duration * k as f64 / bins as f64;
            let s = bin_events(&[(t, 0)], bins, duration, 1).unwrap();
            assert_eq!(s.raster[[k, 0]], 1, "edge {k}");
        }
    }

    #[test]
    fn out_of_range_time_is_rejected() {
        assert!(bin_events(&[(1.0, 0)], 4, 1.0, 1).is_err());
        assert!(bin_events(&[(-0.1, 0)], 4, 1.0, 1).is_err());
        assert!(bin_events(&[(0.5, 3)], 4, 1.0, 2).is_err());
    }

    #[test]
    fn pooling_shapes_and_semantics() {
        let mut r = Array2::zeros((2, 700));
        r[[0, 7]] = 1;
        let s = EventSequence::new(r, None).unwrap();
        let p = pool_channels(&s, 5, PoolMode::Or).unwrap();
        assert_eq!(p.channels(), 140);
        assert_eq!(p.raster[[0, 1]], 1);
        assert_eq!(p.event_count(), 1);
        assert_eq!(pool_channels(&s, 1, PoolMode::Or).unwrap(), s);
        assert!(pool_channels(&s, 3, PoolMode::Or).is_err());
        assert_eq!(pool_channels(&s, 5, PoolMode::Strided).unwrap().event_count(), 0);
        assert_eq!(pool_channels(&s, 5, PoolMode::SumThreshold { min_count: 2 }).unwrap().event_count(), 0);
    }
}
