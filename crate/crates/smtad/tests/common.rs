#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smtad::cli::{run_command, Cli};

/// Normal rows cluster near 0.3 on every feature, anomalous rows near 0.8.
/// Label column `kind` holds `ok` or `bad`.
pub fn write_clustered(dir: &Path, normal: usize, anomalous: usize, features: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::new();
    let names: Vec<String> = (1..=features).map(|j| format!("f{j}")).collect();
    writeln!(text, "{},kind", names.join(",")).unwrap();
    for i in 0..normal + anomalous {
        let center = if i < normal { 0.3 } else { 0.8 };
        for _ in 0..features {
            write!(text, "{},", center + rng.random_range(-0.15..0.15f64)).unwrap();
        }
        writeln!(text, "{}", if i < normal { "ok" } else { "bad" }).unwrap();
    }
    let path = dir.join("data.csv");
    std::fs::write(&path, text).unwrap();
    path
}

pub fn run(args: &[&str]) -> smtad::Result<()> {
    let cli = Cli::try_parse_from(std::iter::once("smtad").chain(args.iter().copied())).expect("valid arguments");
    run_command(cli.command)
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn train_args<'a>(data: &'a str, out: &'a str, m: &'a str, p: &'a str) -> Vec<&'a str> {
    vec![
        "train", "--data", data, "--label-col", "kind", "--normal-labels", "ok", "--seed", "3", "--M", m, "--P", p,
        "--epochs", "30", "--out", out,
    ]
}
