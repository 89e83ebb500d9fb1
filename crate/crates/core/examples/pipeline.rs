//! Synthetic images -> trained desk CNN -> per-layer CENT -> random forest.
//!
//! `cargo run --release --example pipeline -- [seed]`

use std::time::Instant;

use cent_core::dataio::{generate_synthetic, ActivationDump, SyntheticSpec};
use cent_core::eval::{cross_validate, kfold_split, permutation_baseline, Permutation};
use cent_core::forest::ForestConfig;
use cent_core::infotheory::{
    expected_cent_from_dump, CentMatrix, CentMode, FilterSelector, RangeMode, DEFAULT_BINS,
};
use cent_core::net::{train, Network, SnapshotPoint, TrainConfig};

fn main() -> cent_core::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let t0 = Instant::now();

    let data = generate_synthetic(&SyntheticSpec::two_class(32, 150, seed))?;
    let train_set = data.select(&(0..200).collect::<Vec<_>>());
    let test_set = data.select(&(200..300).collect::<Vec<_>>());

    let net = Network::desk_2d(32, 2, seed)?;
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let out = train(net, &train_set, &cfg)?;
    println!(
        "trained in {:.1?}; loss {:.4} -> {:.4}",
        t0.elapsed(),
        out.loss_trace[0],
        out.loss_trace[out.loss_trace.len() - 1]
    );

    let dump = ActivationDump::collect(&out.network, &test_set, SnapshotPoint::PostRelu)?;
    for l in 0..dump.layer_count() {
        let e = expected_cent_from_dump(&dump, &FilterSelector::layer(l), DEFAULT_BINS)?;
        println!(
            "layer {l}: H(Y|C,F) {:.4}  H(Y|C) {:.4}  H(Y) {:.4}",
            e.expected, e.class_conditional, e.pooled
        );
    }

    let m = CentMatrix::from_dump(
        &dump,
        CentMode::PerLayer,
        DEFAULT_BINS,
        RangeMode::PerSampleMinMax,
    )?;
    let forest = ForestConfig {
        seed,
        ..ForestConfig::default()
    };
    let plan = kfold_split(&m.labels, 5, seed, true)?;
    let real = cross_validate(&m.rows, &m.labels, &forest, &plan)?;
    let null = permutation_baseline(
        &m.rows,
        &m.labels,
        &forest,
        &plan,
        Permutation::Seeded(seed + 1000),
    )?;
    println!(
        "CENT AUC {:.4} (folds {:?}); permuted {:.4}; total {:.1?}",
        real.mean_auc,
        real.fold_auc,
        null.mean_auc,
        t0.elapsed()
    );
    Ok(())
}
