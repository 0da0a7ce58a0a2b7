use ndarray::{Array1, Array2};
use rfssm_core::data::{gen_synthetic_freq_task, Dataset, Input, Label, Sample, SynthConfig};
use rfssm_core::model::{InputKind, Model, ModelConfig};
use rfssm_core::spike::SpikeMode;
use rfssm_core::train::{softmax_cross_entropy, TrainConfig, Trainer};
use rfssm_core::Error;

fn small_task(classes: usize, samples: usize, seed: u64) -> Dataset {
    let seqs = gen_synthetic_freq_task(&SynthConfig::new(classes, 48, 4, samples, seed)).unwrap();
    Dataset::from_events(seqs, classes).unwrap()
}

fn small_model(classes: usize) -> Model<f64> {
    let mut cfg = ModelConfig::new(4, vec![8], classes, InputKind::DiracEvent);
    cfg.block_size = 4;
    cfg.seed = 3;
    Model::init(&cfg).unwrap()
}

fn mean_loss(model: &Model<f64>, data: &Dataset, mode: SpikeMode) -> f64 {
    data.samples
        .iter()
        .map(|s| {
            let u: Array2<f64> = s.input.to_real();
            let logits = model.forward(u.view(), mode).unwrap().logits;
            let target = Array1::from(s.label.to_dense(data.num_classes).unwrap());
            softmax_cross_entropy(logits.view(), target.view()).0
        })
        .sum::<f64>()
        / data.samples.len() as f64
}

fn config(lr: f64, epochs: usize, batch: usize) -> TrainConfig {
    TrainConfig { lr_connections: lr, lr_neuron: lr, epochs, batch_size: batch, seed: 9, ..Default::default() }
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let data = small_task(2, 16, 1);
    let model = small_model(2);
    let mut t = Trainer::new(model.clone(), config(0.0, 2, 8)).unwrap();
    t.train_epoch(&data).unwrap();
    t.train_epoch(&data).unwrap();
    assert_eq!(t.model.params, model.params);
}

#[test]
fn single_full_batch_step_descends() {
    let data = small_task(2, 16, 2);
    let model = small_model(2);
    let before = mean_loss(&model, &data, SpikeMode::Hard);
    let mut t = Trainer::new(model, config(1e-4, 1, 16)).unwrap();
    let m = t.train_epoch(&data).unwrap();
    assert!((m.loss - before).abs() < 1e-12, "epoch loss {} vs {}", m.loss, before);
    let after = mean_loss(&t.model, &data, SpikeMode::Hard);
    assert!(after < before, "{after} !< {before}");
}

#[test]
fn fixed_eta_is_frozen() {
    let data = small_task(2, 16, 3);
    let mut cfg = config(1e-2, 2, 8);
    cfg.ablation.fix_eta = true;
    let model = small_model(2);
    let mut t = Trainer::new(model.clone(), cfg).unwrap();
    t.train_epoch(&data).unwrap();
    assert_eq!(t.model.params.layers[0].log_eta, model.params.layers[0].log_eta);
    assert_ne!(t.model.params.layers[0].conn_re, model.params.layers[0].conn_re);
}

#[test]
fn training_is_deterministic() {
    let data = small_task(2, 24, 4);
    let run = || {
        let mut t = Trainer::new(small_model(2).cast::<f32>(), config(5e-3, 3, 8)).unwrap();
        let losses: Vec<f64> = (0..3).map(|_| t.train_epoch(&data).unwrap().loss).collect();
        (t.model, losses)
    };
    let (a, la) = run();
    let (b, lb) = run();
    assert_eq!(a, b);
    assert_eq!(la, lb);
}

#[test]
fn loss_falls_on_a_two_class_task() {
    let seqs = gen_synthetic_freq_task(&SynthConfig::new(2, 64, 8, 128, 5)).unwrap();
    let data = Dataset::from_events(seqs, 2).unwrap();
    let mut cfg = ModelConfig::new(8, vec![16], 2, InputKind::DiracEvent);
    cfg.block_size = 8;
    let mut t = Trainer::new(Model::init(&cfg).unwrap(), config(5e-3, 15, 16)).unwrap();
    let losses: Vec<f64> = (0..15).map(|_| t.train_epoch(&data).unwrap().loss).collect();
    assert!(losses[14] < 0.5 * losses[0], "{losses:?}");
}

#[test]
fn non_finite_input_is_a_numeric_failure() {
    let mut u = Array2::<f32>::zeros((8, 4));
    u[[2, 1]] = f32::NAN;
    let samples = vec![Sample { input: Input::Dense(u), label: Label::Class(0) }];
    let data = Dataset::new(samples, 4, 2).unwrap();
    let mut t = Trainer::new(small_model(2), config(1e-3, 1, 1)).unwrap();
    assert!(matches!(t.train_epoch(&data), Err(Error::NumericFailure { .. })));
}

#[test]
fn invalid_learning_rates_are_rejected() {
    let cfg = TrainConfig { lr_connections: 1e-4, lr_neuron: 1e-3, ..Default::default() };
    assert!(matches!(Trainer::new(small_model(2), cfg), Err(Error::InvalidConfig(_))));
}
