//! Spread of the permuted-label CV AUC over 300 permutation seeds, for the
//! per-layer CENT features of one trained desk net.
//!
//! `cargo run --release --example permutation_null -- [seed]`

use cent_core::dataio::{generate_synthetic, ActivationDump, SyntheticSpec};
use cent_core::eval::{kfold_split, permutation_baseline, Permutation};
use cent_core::forest::ForestConfig;
use cent_core::infotheory::{CentMatrix, CentMode, RangeMode, DEFAULT_BINS};
use cent_core::net::{train, Network, SnapshotPoint, TrainConfig};
fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let data = generate_synthetic(&SyntheticSpec::two_class(32, 150, seed)).unwrap();
    let tr = data.select(&(0..200).collect::<Vec<_>>());
    let te = data.select(&(200..300).collect::<Vec<_>>());
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let net = train(Network::desk_2d(32, 2, seed).unwrap(), &tr, &cfg)
        .unwrap()
        .network;
    let dump = ActivationDump::collect(&net, &te, SnapshotPoint::PostRelu).unwrap();
    let m = CentMatrix::from_dump(
        &dump,
        CentMode::PerLayer,
        DEFAULT_BINS,
        RangeMode::PerSampleMinMax,
    )
    .unwrap();
    let plan = kfold_split(&m.labels, 5, seed, true).unwrap();
    let aucs: Vec<f64> = (0..300)
        .map(|s| {
            permutation_baseline(
                &m.rows,
                &m.labels,
                &ForestConfig::default(),
                &plan,
                Permutation::Seeded(s),
            )
            .unwrap()
            .mean_auc
        })
        .collect();
    let n = aucs.len() as f64;
    let mean = aucs.iter().sum::<f64>() / n;
    let sd = (aucs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let out = aucs.iter().filter(|a| !(0.35..=0.65).contains(*a)).count();
    println!("seed {seed}: mean {mean:.4} sd {sd:.4} outside {out}/300");
}
