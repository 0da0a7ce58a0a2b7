//! `rfssm`: train, evaluate and inspect resonate-and-fire SSM networks.
//!
//! Exit codes: 0 success, 1 other errors (I/O, bad input files),
//! 2 invalid configuration, 3 numeric failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rfssm_core::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use rfssm_core::config::RunConfig;
use rfssm_core::data::synth::{gen_synthetic_freq_task, write_dataset, SynthConfig};
use rfssm_core::data::{convert_csv, load_manifest, ConvertOptions, PoolMode};
use rfssm_core::metrics::{count_params, evaluate, export_raster, SopConvention};
use rfssm_core::model::Model;
use rfssm_core::spike::SpikeMode;
use rfssm_core::train::{grad_check_with, Stencil, Trainer};
use rfssm_core::{Error, Result};

const CONFIG_HELP: &str = "\
Config files are TOML with [model], [train], [data] and optional [output] tables:

[model]   input_dim, layer_sizes, num_classes, first_layer_mode
          (zoh_continuous | dirac_event) are required.
          block_size = min(layers, 32), skip_connections = true, seed = 0,
          init = \"hippo\" | \"random\", eta_init = { kind = \"constant\", value = 1.0 }
          or { kind = \"log_uniform\", min, max }, threshold = 1.0, dt = 1.0,
          encoder_bias = false, readout_bias = false, readout_tau_init = 10.0,
          fixed_basis = true, scan = \"parallel\" | \"sequential\",
          surrogate = { h = 0.15, s = 6.0, sigma = 0.5 }
[train]   lr_connections = 1e-3, lr_neuron = 1e-4, weight_decay = 1e-2,
          epochs = 10, batch_size = 32, min_lr_ratio = 0.01, seed = 0,
          grad_clip (unset = off),
          ablation = { fix_eta, random_init, enforce_positive_decay } (all false),
          augmentation = { channel_shift = false, max_shift = 2, shift_prob = 0.2,
                           cutmix_prob = 0.0 },
          adam = { beta1 = 0.9, beta2 = 0.999, eps = 1e-8 }
[data]    kind = \"synth\": classes, length = 128, channels = 8,
                 train_samples = 2000, test_samples = 400, seed = 0, p_max = 0.5
          kind = \"manifest\": train, test (manifest paths)
          kind = \"pixel_stream\": dir, train_samples, test_samples,
                 images/labels file names, permute_seed (unset = no permutation)
[output]  checkpoint_every = 1, sop_convention = \"spike_count\" | \"fan_out\",
          target_accuracy (unset = run all epochs)

Relative paths resolve against the config file's directory.";

#[derive(Parser)]
#[command(name = "rfssm", version, about = "Resonate-and-fire state space networks", after_help = CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Convention {
    SpikeCount,
    FanOut,
}

impl From<Convention> for SopConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::SpikeCount => SopConvention::SpikeCount,
            Convention::FanOut => SopConvention::FanOut,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Freq,
}

#[derive(Clone, Copy, ValueEnum)]
enum Pool {
    Or,
    Strided,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes config.toml, metrics.csv, seed.txt and checkpoints to OUT.
    #[command(after_help = CONFIG_HELP)]
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy, loss and spiking operations of a checkpoint on a manifest.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "spike-count")]
        sop_convention: Convention,
    },
    /// Parameter counts and eigenvalue summaries of a checkpoint.
    Inspect {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Bin a `time_us,channel` CSV recording into an EVSQ file.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Recording length in microseconds.
        #[arg(long)]
        duration_us: f64,
        #[arg(long, default_value_t = 250)]
        bins: usize,
        #[arg(long, default_value_t = 700)]
        channels: usize,
        #[arg(long, default_value_t = 1)]
        pool_factor: usize,
        #[arg(long, value_enum, default_value = "or")]
        pool: Pool,
        #[arg(long)]
        label: Option<u16>,
    },
    /// Compare backpropagated gradients with finite differences (double precision).
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
        /// Sequence length of the random probe input.
        #[arg(long, default_value_t = 16)]
        length: usize,
        #[arg(long, default_value_t = 200)]
        params: usize,
    },
    /// Generate a synthetic dataset as EVSQ files with train/test manifests.
    Synth {
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 128)]
        length: usize,
        #[arg(long, default_value_t = 8)]
        channels: usize,
        #[arg(long, default_value_t = 2000)]
        train: usize,
        #[arg(long, default_value_t = 400)]
        test: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Export the spike rasters of one sample as CSV and PNG.
    Raster {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Output stem; files are <out>_layer<N>.{csv,png}.
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) | Error::InvalidDimension(_) => 2,
        Error::NumericFailure { .. } => 3,
        _ => 1,
    }
}

fn train(config: &Path, out: &Path) -> Result<()> {
    let run = RunConfig::from_file(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let (train_set, test_set) = run.data.load(base)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config.toml"), run.to_toml()?)?;
    std::fs::write(out.join("seed.txt"), format!("model_seed = {}\ntrain_seed = {}\n", run.model.seed, run.train.seed))?;

    let model = Model::init(&run.effective_model())?.cast::<f32>();
    let mut trainer = Trainer::new(model, run.train.clone())?;
    let mut csv = String::from("epoch,train_loss,train_acc,val_acc,sops,lr\n");
    let epochs = run.train.epochs;
    for epoch in 0..epochs {
        let m = trainer.train_epoch(&train_set)?;
        let e = evaluate(&trainer.model, &test_set, run.output.sop_convention)?;
        writeln!(csv, "{},{},{},{},{},{}", m.epoch, m.loss, m.accuracy, e.accuracy, e.sops.total_sops, m.lr).ok();
        std::fs::write(out.join("metrics.csv"), &csv)?;
        println!(
            "epoch {:>3}  loss {:.4}  train {:.4}  val {:.4}  sops {:.1}  {:.1}s",
            m.epoch, m.loss, m.accuracy, e.accuracy, e.sops.total_sops, m.seconds
        );
        let done = epoch + 1 == epochs || run.output.target_accuracy.is_some_and(|t| e.accuracy >= t);
        if done || (epoch + 1) % run.output.checkpoint_every == 0 {
            let meta = [
                ("epoch".to_string(), m.epoch.to_string()),
                ("val_acc".to_string(), e.accuracy.to_string()),
            ]
            .into_iter()
            .collect();
            let ck = Checkpoint { model: trainer.model.clone(), meta };
            save_checkpoint(&ck, out.join(format!("epoch{:03}.rfck", m.epoch)))?;
            save_checkpoint(&ck, out.join("last.rfck"))?;
        }
        if done {
            break;
        }
    }
    Ok(())
}

fn eval(checkpoint: &Path, data: &Path, convention: SopConvention) -> Result<()> {
    let ck = load_checkpoint::<f32>(checkpoint)?;
    let ds = load_manifest(data)?.load()?;
    let r = evaluate(&ck.model, &ds, convention)?;
    println!("samples     {}", ds.len());
    println!("accuracy    {:.4}", r.accuracy);
    println!("loss        {:.4}", r.loss);
    println!("spike_rate  {:.4}", r.spike_rate);
    println!("sops        {:.1} ({})", r.sops.total_sops, r.sops.convention);
    for (l, s) in r.sops.per_layer_spikes.iter().enumerate() {
        println!("  layer {l}   {s:.1} spikes/sample");
    }
    Ok(())
}

fn inspect(checkpoint: &Path) -> Result<()> {
    let ck = load_checkpoint::<f64>(checkpoint)?;
    let cfg = &ck.model.config;
    println!("layers      {:?} (input {}, classes {}, block {})", cfg.layer_sizes, cfg.input_dim, cfg.num_classes, cfg.block_size);
    for (k, v) in &ck.meta {
        println!("{k:<11} {v}");
    }
    println!("parameters\n{}", count_params(cfg));
    for (l, p) in ck.model.params.layers.iter().enumerate() {
        let lam = p.lambdas();
        let eta = p.eta();
        let range = |it: &mut dyn Iterator<Item = f64>| {
            it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        };
        let re = range(&mut lam.iter().map(|z| z.re));
        let im = range(&mut lam.iter().map(|z| z.im));
        let et = range(&mut eta.iter().copied());
        println!(
            "layer {l} ({:?}, H={}): Re λ [{:.4}, {:.4}]  Im λ [{:.4}, {:.4}]  η [{:.4}, {:.4}]  ξ {}  fixed basis {}",
            p.mode,
            p.state_dim(),
            re.0,
            re.1,
            im.0,
            im.1,
            et.0,
            et.1,
            p.threshold,
            p.fixed_basis.is_some()
        );
    }
    let tau: Vec<String> = ck.model.params.readout.log_tau.iter().map(|v| format!("{:.3}", v.exp())).collect();
    println!("readout τ   [{}]", tau.join(", "));
    Ok(())
}

fn gradcheck(config: &Path, length: usize, params: usize) -> Result<()> {
    use rand::Rng;
    let run = RunConfig::from_file(config)?;
    let model = Model::init(&run.effective_model())?;
    let mut r = rfssm_core::rng::stream(run.model.seed, &[0x6C]);
    let u = ndarray::Array2::from_shape_fn((length.max(1), run.model.input_dim), |_| {
        if r.random::<f64>() < 0.3 {
            1.0
        } else {
            0.0
        }
    });
    let mut target = ndarray::Array1::zeros(run.model.num_classes);
    target[0] = 1.0;
    // five-point differences at a wide step: plain central differences at
    // 1e-6 drown in forward-pass rounding once layers are a few hundred wide
    let smooth =
        grad_check_with(&model, u.view(), target.view(), SpikeMode::Smooth, 1e-3, Stencil::Central4, 1e-8, params, 1)?;
    let linear =
        grad_check_with(&model, u.view(), target.view(), SpikeMode::Identity, 1e-3, Stencil::Central4, 1e-5, params, 2)?;
    println!(
        "smooth  max rel error {:.3e} over {} params (worst {}[{}]: analytic {:.6e}, numeric {:.6e})",
        smooth.max_rel_error, smooth.checked, smooth.worst.0, smooth.worst.1, smooth.worst_analytic, smooth.worst_numeric
    );
    println!(
        "linear  max rel error {:.3e} over {} params (worst {}[{}]: analytic {:.6e}, numeric {:.6e})",
        linear.max_rel_error, linear.checked, linear.worst.0, linear.worst.1, linear.worst_analytic, linear.worst_numeric
    );
    if smooth.max_rel_error >= 1e-4 || linear.max_rel_error >= 1e-7 {
        return Err(Error::NumericFailure {
            message: "gradient check above tolerance (smooth 1e-4, linear 1e-7)".into(),
            residual: smooth.max_rel_error.max(linear.max_rel_error),
        });
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn synth(classes: usize, out: &Path, length: usize, channels: usize, train: usize, test: usize, seed: u64) -> Result<()> {
    let tr = gen_synthetic_freq_task(&SynthConfig::new(classes, length, channels, train, seed))?;
    let te = gen_synthetic_freq_task(&SynthConfig::new(classes, length, channels, test, seed.wrapping_add(0x7E57)))?;
    write_dataset(&tr, classes, out, "train")?;
    write_dataset(&te, classes, out, "test")?;
    println!("wrote {} + {} samples to {}", tr.len(), te.len(), out.display());
    Ok(())
}

fn raster(checkpoint: &Path, data: &Path, index: usize, out: &Path) -> Result<()> {
    let ck = load_checkpoint::<f32>(checkpoint)?;
    let ds = load_manifest(data)?.load()?;
    let s = ds.samples.get(index).ok_or_else(|| Error::InvalidInput(format!("no sample {index}")))?;
    let trace = ck.model.forward(s.input.to_real::<f32>().view(), SpikeMode::Hard)?;
    for (l, t) in trace.layers.iter().enumerate() {
        let spikes = t.spikes.mapv(|v| u8::from(v != 0.0));
        let stem = PathBuf::from(format!("{}_layer{l}", out.display()));
        export_raster(&spikes, &stem)?;
        println!("layer {l}: {} spikes -> {}.{{csv,png}}", t.spike_count(), stem.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Command::Train { config, out } => train(&config, &out),
        Command::Eval { checkpoint, data, sop_convention } => eval(&checkpoint, &data, sop_convention.into()),
        Command::Inspect { checkpoint } => inspect(&checkpoint),
        Command::Convert { input, output, duration_us, bins, channels, pool_factor, pool, label } => {
            let opts = ConvertOptions {
                duration_us,
                bins,
                channels,
                pool_factor,
                pool_mode: match pool {
                    Pool::Or => PoolMode::Or,
                    Pool::Strided => PoolMode::Strided,
                },
                label,
            };
            let seq = convert_csv(&input, &output, &opts)?;
            println!("{} x {} raster, {} events -> {}", seq.len(), seq.channels(), seq.event_count(), output.display());
            Ok(())
        }
        Command::Gradcheck { config, length, params } => gradcheck(&config, length, params),
        Command::Synth { task: Task::Freq, classes, out, length, channels, train, test, seed } => {
            synth(classes, &out, length, channels, train, test, seed)
        }
        Command::Raster { checkpoint, data, index, out } => raster(&checkpoint, &data, index, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
