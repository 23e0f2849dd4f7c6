#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seqexplain::dataset::{self, Dataset, GenConfig};
use seqexplain::features::FeatureConfig;
use seqexplain::network::{Architecture, Network, TrainConfig};
use seqexplain::pipeline;

pub const DATA_SEED: u64 = 7;
pub const INIT_SEED: u64 = 1;
pub const SPLIT: (f64, f64, f64) = (2.0 / 3.0, 2.0 / 15.0, 0.2);

pub struct Golden {
    pub all: Dataset,
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub net: Network,
}

pub fn golden_data() -> (Dataset, Dataset, Dataset, Dataset) {
    let all = dataset::generate_synthetic(&GenConfig {
        seed: DATA_SEED,
        ..GenConfig::default()
    })
    .expect("golden data");
    let (train, val, test) = dataset::split(&all, SPLIT, DATA_SEED).expect("golden split");
    (all, train, val, test)
}

pub fn train_golden(train: &Dataset, val: &Dataset) -> Network {
    let mut init = Network::init(Architecture::default_for(3, 50), INIT_SEED).expect("init");
    init.channel_schema = train.channel_schema.clone();
    pipeline::fit(&init, train, val, &TrainConfig::default(), &FeatureConfig::default())
        .expect("golden training")
}

/// The golden model, trained once per test binary.
pub fn golden() -> &'static Golden {
    static GOLDEN: OnceLock<Golden> = OnceLock::new();
    GOLDEN.get_or_init(|| {
        let (all, train, val, test) = golden_data();
        let net = train_golden(&train, &val);
        Golden { all, train, val, test, net }
    })
}

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Compares `content` with a recorded golden file. The file is written when
/// missing or when `UPDATE_GOLDEN` is set.
pub fn check_golden(name: &str, content: &str) -> Result<(), String> {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() || !path.exists() {
        std::fs::write(&path, content).map_err(|e| e.to_string())?;
        eprintln!("recorded golden file {}", path.display());
        return Ok(());
    }
    let recorded = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    if recorded == content {
        Ok(())
    } else {
        Err(format!("{name} differs from the recorded golden file"))
    }
}

/// A random sequence of length `len` mixing smooth signal, noise, spikes and
/// repeated values so that ties and plateaus occur.
pub fn random_sequence(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let kind = rng.random_range(0..4);
    let amp = rng.random_range(0.1..10.0);
    let offset = rng.random_range(-50.0..50.0);
    let freq = rng.random_range(0.5..5.0);
    let mut v: Vec<f64> = (0..len)
        .map(|t| {
            let base = match kind {
                0 => 0.0,
                1 => amp * (freq * t as f64 / len as f64 * std::f64::consts::TAU).sin(),
                2 => rng.random_range(-amp..amp),
                _ => (rng.random_range(-3.0..3.0) as f64).round(),
            };
            offset + base + rng.random_range(-0.1..0.1) * amp * (kind != 3) as u8 as f64
        })
        .collect();
    for _ in 0..rng.random_range(0..3) {
        let i = rng.random_range(0..len);
        v[i] += rng.random_range(-8.0..8.0) * amp;
    }
    v
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `|a - b| <= tol * max(|a|, |b|)`, with an absolute floor for values that
/// are zero up to rounding.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-6)
}
