use std::io::Write;

use ndarray::Array2;
use proptest::prelude::*;
use rfssm_core::data::{
    bin_events, convert_csv, cutmix_interval, gen_synthetic_freq_task, load_manifest, pool_channels, read_evsq,
    read_evsq_file, write_dataset, write_evsq, ConvertOptions, EventSequence, Label, PoolMode, SynthConfig,
};
use rfssm_core::Error;

fn raster() -> impl Strategy<Value = Array2<u8>> {
    (1usize..40, 1usize..24).prop_flat_map(|(l, c)| {
        prop::collection::vec(0u8..=1, l * c).prop_map(move |v| Array2::from_shape_vec((l, c), v).unwrap())
    })
}

proptest! {
    #[test]
    fn or_pooling_commutes_with_binning(
        events in prop::collection::vec((0.0f64..1000.0, 0u32..24), 0..200),
        bins in 1usize..30,
        factor in prop::sample::select(vec![1usize, 2, 3, 4, 6, 8]),
    ) {
        // pooling the binned raster equals binning the pooled channel ids
        let binned = bin_events(&events, bins, 1000.0, 24).unwrap();
        let pooled = pool_channels(&binned, factor, PoolMode::Or).unwrap();
        let merged: Vec<(f64, u32)> = events.iter().map(|&(t, c)| (t, c / factor as u32)).collect();
        let direct = bin_events(&merged, bins, 1000.0, 24 / factor).unwrap();
        prop_assert_eq!(pooled.raster, direct.raster);
    }

    #[test]
    fn cutmix_label_is_on_the_simplex(a in raster(), seed in any::<u64>(), ca in 0u16..5, cb in 0u16..5) {
        let b = a.mapv(|v| 1 - v);
        let (l, k) = (a.nrows(), 5);
        let k1 = (seed as usize) % (l + 1);
        let k2 = k1 + ((seed >> 32) as usize) % (l + 1 - k1);
        let sa = EventSequence::new(a, Some(Label::Class(ca))).unwrap();
        let sb = EventSequence::new(b, Some(Label::Class(cb))).unwrap();
        let mixed = cutmix_interval(&sa, &sb, k1, k2, k).unwrap();
        let dense = mixed.label.unwrap().to_dense(k).unwrap();
        prop_assert!(dense.iter().all(|&p| (0.0..=1.0).contains(&p)));
        prop_assert!((dense.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        prop_assert_eq!(mixed.raster.slice(ndarray::s![k1..k2, ..]), sb.raster.slice(ndarray::s![k1..k2, ..]));
    }

    #[test]
    fn evsq_round_trip(r in raster(), label in prop::option::of(0u16..0xFFF0)) {
        let seq = EventSequence::new(r, label.map(Label::Class)).unwrap();
        let mut buf = Vec::new();
        write_evsq(&seq, &mut buf).unwrap();
        let back = read_evsq(buf.as_slice()).unwrap();
        prop_assert_eq!(back.raster, seq.raster);
        prop_assert_eq!(back.label, seq.label);
    }
}

#[test]
fn truncated_and_trailing_evsq_are_rejected() {
    let seq = EventSequence::new(Array2::from_elem((9, 3), 1), Some(Label::Class(2))).unwrap();
    let mut buf = Vec::new();
    write_evsq(&seq, &mut buf).unwrap();
    assert!(read_evsq(&buf[..buf.len() - 1]).is_err());
    let mut extra = buf.clone();
    extra.push(0);
    assert!(matches!(read_evsq(extra.as_slice()), Err(Error::Format(_))));
    let mut bad_magic = buf;
    bad_magic[0] = b'X';
    assert!(read_evsq(bad_magic.as_slice()).is_err());
}

#[test]
fn synthetic_task_is_reproducible_and_balanced() {
    let cfg = SynthConfig::new(4, 64, 8, 40, 3);
    let a = gen_synthetic_freq_task(&cfg).unwrap();
    let b = gen_synthetic_freq_task(&cfg).unwrap();
    assert_eq!(a.len(), 40);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.raster, y.raster);
    }
    for k in 0..4 {
        assert_eq!(a.iter().filter(|s| s.label == Some(Label::Class(k))).count(), 10);
    }
    assert!(a.iter().all(|s| s.raster.dim() == (64, 8)));
}

#[test]
fn written_dataset_loads_through_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let seqs = gen_synthetic_freq_task(&SynthConfig::new(3, 32, 5, 9, 1)).unwrap();
    let manifest = write_dataset(&seqs, 3, dir.path(), "train").unwrap();
    let loaded = load_manifest(dir.path().join("train.tsv")).unwrap();
    assert_eq!(loaded.items, manifest.items);
    assert_eq!((loaded.num_channels, loaded.num_classes), (5, 3));
    let data = loaded.load().unwrap();
    assert_eq!(data.len(), 9);
    let first = read_evsq_file(loaded.resolve(&loaded.items[0])).unwrap();
    assert_eq!(first.raster, seqs[0].raster);
}

#[test]
fn csv_conversion_bins_and_pools() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("rec.csv");
    let mut f = std::fs::File::create(&input).unwrap();
    writeln!(f, "time_us,channel\n0,0\n99,1\n100,3\n999,2").unwrap();
    let opts = ConvertOptions { duration_us: 1000.0, bins: 10, channels: 4, pool_factor: 2, label: Some(1), ..Default::default() };
    let out = dir.path().join("rec.evsq");
    let seq = convert_csv(&input, &out, &opts).unwrap();
    assert_eq!(seq.raster.dim(), (10, 2));
    assert_eq!(seq.raster[[0, 0]], 1);
    assert_eq!(seq.raster[[1, 1]], 1);
    assert_eq!(seq.raster[[9, 1]], 1);
    assert_eq!(seq.event_count(), 3);
    assert_eq!(read_evsq_file(&out).unwrap().raster, seq.raster);

    std::fs::write(&input, "0,0\nabc,1\n").unwrap();
    assert!(convert_csv(&input, &out, &opts).is_err());
}

#[test]
fn out_of_range_channel_is_rejected() {
    assert!(bin_events(&[(1.0, 4)], 5, 10.0, 4).is_err());
}
