use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use impedance_cli::commands::{crb_rows, CRB_HEADER, SWEEP_HEADER};
use impedance_cli::FileConfig;
use impedance_core::crb::fim_general;
use impedance_core::Experiment;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_impedance"))
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn run_to_file(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> (Output, String) {
    let mut args = vec![sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = run(&args);
    let text = std::fs::read_to_string(out).unwrap_or_default();
    (o, text)
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn minimal_zero_noise_sweep_hits_the_db_floor() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "min.toml", "f_true = [0.5, -0.25]\ntrials = 1\nzero_noise = true\n");
    let out = dir.path().join("sweep.csv");
    let (o, csv) = run_to_file("sweep", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(csv.ends_with('\n'));
    assert_eq!(csv.lines().next().unwrap(), SWEEP_HEADER);
    let r = rows(&csv);
    assert_eq!(r.len(), 1);
    assert_eq!(r[0][0], "20.0000");
    assert_eq!(r[0][1], "-999.0");
    assert_eq!(r[0][2], "-999.0");
    assert_eq!(&r[0][4..], ["0", "0", "1"]);
}

#[test]
fn iid_sweep_ml_and_mm_columns_agree() {
    let dir = TempDir::new().unwrap();
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/fig1-fast.toml")).unwrap();
    let cfg = write_config(&dir, "fast.toml", &text);
    let out = dir.path().join("fast.csv");
    let (o, csv) = run_to_file("sweep", &cfg, &out, &["--set", "trials=200"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&csv);
    assert_eq!(r.len(), 7);
    for row in r {
        let ml: f64 = row[1].parse().unwrap();
        let mm: f64 = row[2].parse().unwrap();
        assert!((ml - mm).abs() < 5e-5, "{row:?}");
    }
}

#[test]
fn missing_f_true_exits_2_naming_the_key() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bad.toml", "packets = 4\n");
    for sub in ["sweep", "crb", "trial"] {
        let o = run(&[sub, "--config", cfg.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&o.stderr).contains("f_true"));
    }
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "ok.toml", "f_true = [1.0, 0.0]\ntrials = 2\n");
    let c = cfg.to_str().unwrap();

    let o = run(&["sweep", "--config", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let unwritable = dir.path().join("no/such/dir/out.csv");
    let o = run(&["crb", "--config", c, "--out", unwritable.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));

    let o = run(&["sweep", "--config", c, "--set", "antennas=20"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["sweep", "--config", c, "--set", "fading=rician"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["sweep", "--config", c, "--set", "snr_db=4000"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("numeric"));

    let o = run(&["sweep", "--config", c, "--threads", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn crb_with_zero_f_has_no_cross_information() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "zero.toml", "f_true = [0.0, 0.0]\nsnr_db = [0, 10, 20]\n");
    let out = dir.path().join("crb.csv");
    let (o, csv) = run_to_file("crb", &cfg, &out, &[]);
    assert!(o.status.success());
    assert_eq!(csv.lines().next().unwrap(), CRB_HEADER);
    for row in rows(&csv) {
        assert_eq!(row[4], "0.00000");
        assert_eq!(row[5], "0.00000");
        assert_eq!(row[1], "nan");
    }
}

#[test]
fn crb_drops_about_3_db_when_packets_double_in_slow_fading() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "slow.toml",
        "f_true = [1.0, 0.0]\nfading = \"clarke\"\nvelocity_kmh = 5.0\nsnr_db = [10, 20, 30]\npackets = 5\n",
    );
    let (_, l5) = run_to_file("crb", &cfg, &dir.path().join("l5.csv"), &[]);
    let (_, l10) = run_to_file("crb", &cfg, &dir.path().join("l10.csv"), &["--set", "packets=10"]);
    for (a, b) in rows(&l5).iter().zip(rows(&l10).iter()) {
        let gap: f64 = b[1].parse::<f64>().unwrap() - a[1].parse::<f64>().unwrap();
        assert!((gap + 3.0).abs() < 0.7, "{gap}");
    }
}

#[test]
fn crb_rows_match_general_fim() {
    let file = FileConfig::from_str_with("f_true = [0.8, -0.6]\nsnr_db = [-5, 0, 10, 20, 30]\n", "crb", &[]).unwrap();
    let cfg = file.experiment().unwrap();
    assert_eq!((cfg.antennas, cfg.packets), (4, 10));
    let spec = Experiment::new(cfg.clone()).unwrap().correlation().clone();
    for row in crb_rows(&cfg).unwrap() {
        let g = fim_general(cfg.f_true, cfg.sigma_h2, &spec, cfg.antennas, cfg.sigma2(row.snr_db)).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        assert!(rel(row.fim_11, g.fim.s11) < 1e-8);
        assert!(rel(row.fim_22, g.fim.s22) < 1e-8);
        assert!((row.fim_12 - g.fim.s12()).norm() / g.fim.s12().norm() < 1e-8);
        let crb = g.crb_f().unwrap().sqrt() / cfg.f_true.norm();
        assert!(rel(row.crb_rel, crb) < 1e-8);
    }
}

fn trial_lines(text: &str) -> Vec<(String, String)> {
    text.lines()
        .map(|l| {
            let (k, v) = l.split_once(": ").unwrap();
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn value<'a>(lines: &'a [(String, String)], key: &str) -> &'a str {
    &lines.iter().find(|(k, _)| k == key).unwrap().1
}

#[test]
fn zero_noise_trial_recovers_f() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "t.toml", "f_true = [0.3, -1.2]\nfading = \"clarke\"\nvelocity_kmh = 50.0\n");
    let o = run(&["trial", "--config", cfg.to_str().unwrap(), "--zero-noise"]);
    assert!(o.status.success());
    let lines = trial_lines(&String::from_utf8(o.stdout).unwrap());
    let truth = value(&lines, "f_true");
    assert_eq!(truth, "0.30000-1.20000i");
    for est in ["ml", "mm"] {
        assert_eq!(value(&lines, &format!("{est}_f_hat")), truth);
        assert_eq!(value(&lines, &format!("{est}_status")), "Ok");
    }
}

#[test]
fn all_zero_observations_are_degenerate() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "z.toml", "f_true = [1.0, 0.0]\nsigma_h2 = 0.0\nzero_noise = true\n");
    let o = run(&["trial", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = trial_lines(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(value(&lines, "y1_norm"), "0.00000");
    assert_eq!(value(&lines, "ml_status"), "DegenerateZeroMu");
    assert_eq!(value(&lines, "mm_status"), "DegenerateZeroMu");
}

#[test]
fn trial_output_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "t.toml", "f_true = [1.0, 1.0]\nsnr_db = [5, 15]\nseed = 77\n");
    let args = ["trial", "--config", cfg.to_str().unwrap(), "--snr-index", "1", "--trial-index", "12"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let other = run(&["trial", "--config", cfg.to_str().unwrap(), "--snr-index", "1", "--trial-index", "12", "--seed", "78"]);
    assert_ne!(a.stdout, other.stdout);
    let o = run(&["trial", "--config", cfg.to_str().unwrap(), "--snr-index", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_is_thread_count_invariant() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "m.toml",
        "f_true = [1.0, 0.5]\nfading = \"clarke\"\nvelocity_kmh = 50.0\nsnr_db = [0, 20]\ntrials = 100\n",
    );
    let (_, one) = run_to_file("sweep", &cfg, &dir.path().join("1.csv"), &["--threads", "1"]);
    let (_, four) = run_to_file("sweep", &cfg, &dir.path().join("4.csv"), &["--threads", "4"]);
    assert_eq!(one, four);
    assert_eq!(rows(&one).len(), 2);
}

#[test]
fn dumped_config_reproduces_the_run() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "s.toml",
        "f_true = [1.0, 0.0]\ntrials = 50\nsnr_db = [10]\n[sweep]\npackets = 6\nfading = \"clarke\"\nvelocity_kmh = 5.0\n",
    );
    let dump = dir.path().join("dump.toml");
    let extra = ["--set", "trials=40", "--seed", "9"];
    let (o, dumped) = run_to_file("sweep", &cfg, &dump, &[&extra[..], &["--dump-config"]].concat());
    assert!(o.status.success());
    assert!(dumped.contains("packets = 6") && dumped.contains("trials = 40") && dumped.contains("seed = 9"));

    let (_, again) = run_to_file("sweep", &dump, &dir.path().join("again.toml"), &["--dump-config"]);
    assert_eq!(dumped, again);
    let (_, a) = run_to_file("sweep", &cfg, &dir.path().join("a.csv"), &extra);
    let (_, b) = run_to_file("sweep", &dump, &dir.path().join("b.csv"), &[]);
    assert_eq!(a, b);
}
