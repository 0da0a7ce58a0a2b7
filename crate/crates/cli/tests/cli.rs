use std::path::Path;
use std::process::{Command, Output};

fn rfssm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfssm")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const CONFIG: &str = r#"
[model]
input_dim = 4
layer_sizes = [8]
block_size = 4
num_classes = 2
first_layer_mode = "dirac_event"

[train]
lr_connections = 5e-3
lr_neuron = 5e-3
epochs = 2
batch_size = 8

[data]
kind = "synth"
classes = 2
length = 32
channels = 4
train_samples = 32
test_samples = 16
"#;

#[test]
fn synth_train_eval_inspect_raster() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let o = rfssm(&["synth", "--task", "freq", "--classes", "2", "--out", p(&data), "--length", "32", "--channels", "4", "--train", "12", "--test", "6"]);
    assert_eq!(code(&o), 0, "{o:?}");
    assert!(data.join("train.tsv").exists() && data.join("test.tsv").exists());

    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let out = dir.path().join("run");
    let o = rfssm(&["train", "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{o:?}");
    for f in ["config.toml", "seed.txt", "metrics.csv", "epoch000.rfck", "epoch001.rfck", "last.rfck"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 3);
    assert!(metrics.starts_with("epoch,train_loss,train_acc,val_acc,sops,lr"));

    let ck = out.join("last.rfck");
    let o = rfssm(&["eval", "--checkpoint", p(&ck), "--data", p(&data.join("test.tsv"))]);
    assert_eq!(code(&o), 0, "{o:?}");
    assert!(stdout(&o).contains("accuracy") && stdout(&o).contains("spike_count"));
    let o = rfssm(&["eval", "--checkpoint", p(&ck), "--data", p(&data.join("test.tsv")), "--sop-convention", "fan-out"]);
    assert!(stdout(&o).contains("fanout"));

    let o = rfssm(&["inspect", "--checkpoint", p(&ck)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("total") && stdout(&o).contains("Re λ"));

    let stem = dir.path().join("r");
    let o = rfssm(&["raster", "--checkpoint", p(&ck), "--data", p(&data.join("test.tsv")), "--out", p(&stem)]);
    assert_eq!(code(&o), 0, "{o:?}");
    assert!(dir.path().join("r_layer0.csv").exists() && dir.path().join("r_layer0.png").exists());
}

#[test]
fn rerun_with_saved_config_reproduces_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&rfssm(&["train", "--config", p(&cfg), "--out", p(&a)])), 0);
    assert_eq!(code(&rfssm(&["train", "--config", p(&a.join("config.toml")), "--out", p(&b)])), 0);
    let read = |d: &Path| std::fs::read(d.join("metrics.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(std::fs::read(a.join("last.rfck")).unwrap(), std::fs::read(b.join("last.rfck")).unwrap());
}

#[test]
fn convert_csv_to_evsq() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("rec.csv");
    std::fs::write(&input, "time_us,channel\n0,0\n500,3\n").unwrap();
    let out = dir.path().join("rec.evsq");
    let o = rfssm(&["convert", "--input", p(&input), "--output", p(&out), "--duration-us", "1000", "--bins", "4", "--channels", "4", "--label", "1"]);
    assert_eq!(code(&o), 0, "{o:?}");
    let seq = rfssm_core::data::read_evsq_file(&out).unwrap();
    assert_eq!(seq.raster.dim(), (4, 4));
    assert_eq!(seq.event_count(), 2);
}

#[test]
fn gradcheck_passes_on_a_small_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let o = rfssm(&["gradcheck", "--config", p(&cfg), "--params", "50"]);
    assert_eq!(code(&o), 0, "{o:?}");
    assert!(stdout(&o).contains("smooth") && stdout(&o).contains("linear"));
}

#[test]
fn invalid_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, CONFIG.replace("block_size = 4", "block_size = 3")).unwrap();
    let out = dir.path().join("run");
    assert_eq!(code(&rfssm(&["train", "--config", p(&cfg), "--out", p(&out)])), 2);
    std::fs::write(&cfg, "[model\n").unwrap();
    assert_eq!(code(&rfssm(&["train", "--config", p(&cfg), "--out", p(&out)])), 2);
}

#[test]
fn divergent_training_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let text = CONFIG.replace("lr_connections = 5e-3", "lr_connections = 1e300").replace("lr_neuron = 5e-3", "lr_neuron = 1e300");
    std::fs::write(&cfg, text).unwrap();
    let o = rfssm(&["train", "--config", p(&cfg), "--out", p(&dir.path().join("run"))]);
    assert_eq!(code(&o), 3, "{o:?}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("numeric failure"));
}
