use rfssm_core::checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
use rfssm_core::config::{DataConfig, RunConfig};
use rfssm_core::model::{EtaInit, InitScheme, InputKind, Model, ModelConfig};
use rfssm_core::Error;

const MINIMAL: &str = r#"
[model]
input_dim = 8
layer_sizes = [32]
num_classes = 4
first_layer_mode = "dirac_event"

[data]
kind = "synth"
classes = 4
"#;

#[test]
fn minimal_config_takes_defaults() {
    let cfg = RunConfig::from_toml(MINIMAL).unwrap();
    assert_eq!(cfg.model.block_size, 32);
    assert_eq!(cfg.model.eta_init, EtaInit::default());
    assert_eq!(cfg.train.lr_connections, 1e-3);
    assert_eq!(cfg.train.lr_neuron, 1e-4);
    assert_eq!(cfg.train.adam.beta2, 0.999);
    assert!(matches!(cfg.data, DataConfig::Synth { length: 128, channels: 8, train_samples: 2000, .. }));
    assert_eq!(RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
}

#[test]
fn invalid_configs_are_config_errors() {
    let cases = [
        MINIMAL.replace("layer_sizes = [32]", "layer_sizes = [30]\nblock_size = 8"),
        MINIMAL.replace("\nclasses = 4", "\nclasses = 3"),
        MINIMAL.replace("[data]", "[train]\nlr_neuron = 1.0\n\n[data]"),
        MINIMAL.replace("[data]", "[train]\nmomentum = 0.9\n\n[data]"),
        MINIMAL.replace("num_classes = 4", "num_classes = \"four\""),
        MINIMAL.replace("[data]", "[train]\nepochs = -1\n\n[data]"),
    ];
    for text in cases {
        let err = RunConfig::from_toml(&text).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_) | Error::InvalidDimension(_)), "{err}");
    }
}

#[test]
fn random_init_ablation_reaches_the_model() {
    let text = MINIMAL.replace("[data]", "[train.ablation]\nrandom_init = true\n\n[data]");
    let cfg = RunConfig::from_toml(&text).unwrap();
    assert_eq!(cfg.effective_model().init, InitScheme::Random);
}

fn model() -> Model<f64> {
    let mut cfg = ModelConfig::new(1, vec![16, 16], 10, InputKind::ZohContinuous);
    cfg.block_size = 8;
    cfg.readout_bias = true;
    Model::init(&cfg).unwrap()
}

#[test]
fn checkpoint_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.rfck");
    let ck = Checkpoint { model: model(), meta: [("epoch".to_string(), "3".to_string())].into_iter().collect() };
    save_checkpoint(&ck, &path).unwrap();
    let back: Checkpoint<f64> = load_checkpoint(&path).unwrap();
    assert_eq!(back, ck);
    // the fixed eigenbasis of the first layer is restored too
    assert!(back.model.params.layers[0].fixed_basis.is_some());
}

#[test]
fn checkpoint_converts_precision_and_rejects_corruption() {
    let ck = Checkpoint { model: model(), meta: Default::default() };
    let mut buf = Vec::new();
    write_checkpoint(&ck, &mut buf).unwrap();
    // reading into single precision converts
    let single: Checkpoint<f32> = read_checkpoint(buf.as_slice()).unwrap();
    assert_eq!(single.model, ck.model.cast::<f32>());
    buf[4] = 9;
    assert!(read_checkpoint::<f64>(buf.as_slice()).is_err());
    buf[4] = 1;
    assert!(read_checkpoint::<f64>(&buf[..buf.len() - 3]).is_err());
    let mut extra = buf.clone();
    extra.push(1);
    assert!(read_checkpoint::<f64>(extra.as_slice()).is_err());
}
