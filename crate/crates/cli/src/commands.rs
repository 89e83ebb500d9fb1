//! One function per subcommand. Each writes its artifacts under `out` and
//! returns the JSON run summary printed on stdout.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cent_core::dataio::{
    export_activation_dump, generate_markov_chain, generate_synthetic, import_activation_dump,
    load_dataset, save_dataset, ActivationDump,
};
use cent_core::eval::{cross_validate, kfold_split, permutation_baseline, Metrics};
use cent_core::forest::{feature_importance, fit, save_forest};
use cent_core::infotheory::{
    dpi_check, expected_cent_from_dump, partition_check_from_dump, CentMatrix, ExpectedCent,
    FilterSelector, PartitionReport, ResponseHistograms,
};
use cent_core::net::{load_checkpoint, save_checkpoint, train, Network};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    Architecture, ConfigError, EvaluateSection, ExtractSection, PermuteSection, SourcePaths,
    SynthSection, TheorySection, TrainSection,
};

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn require<'a>(field: &str, path: Option<&'a Path>) -> Result<&'a Path, ConfigError> {
    let path = path.ok_or_else(|| ConfigError::MissingField {
        field: field.into(),
    })?;
    if !path.exists() {
        return Err(ConfigError::MissingInput {
            field: field.into(),
            path: path.to_path_buf(),
        });
    }
    Ok(path)
}

fn load_activations(src: SourcePaths<'_>) -> Result<ActivationDump> {
    let s = src.section;
    if let Some(dump) = src.dump {
        if src.checkpoint.is_some() || src.manifest.is_some() {
            return Err(ConfigError::Invalid(format!(
                "{s}: set either dump or checkpoint + manifest, not both"
            ))
            .into());
        }
        let dir = require(&format!("{s}.dump"), Some(dump))?;
        log::info!("reading activation dump {}", dir.display());
        return Ok(import_activation_dump(dir)?);
    }
    let ckpt = require(&format!("{s}.checkpoint"), src.checkpoint)?;
    let manifest = require(&format!("{s}.manifest"), src.manifest)?;
    let net = load_checkpoint(ckpt)?;
    let data = load_dataset(manifest)?;
    log::info!(
        "collecting {:?} activations for {} images",
        src.point,
        data.len()
    );
    Ok(ActivationDump::collect(&net, &data, src.point)?)
}

pub fn synth(cfg: &SynthSection, out: &Path) -> Result<Value> {
    let spec = cfg.spec();
    spec.validate().context("synth")?;
    let data = generate_synthetic(&spec)?;
    let manifest = save_dataset(out, "manifest.csv", &data)?;
    Ok(json!({
        "manifest": manifest,
        "images": data.len(),
        "classes": data.class_names,
    }))
}

pub fn train_cmd(cfg: &TrainSection, out: &Path) -> Result<Value> {
    let manifest = require("train.manifest", cfg.manifest.as_deref())?;
    let data = load_dataset(manifest)?;
    let shape = data
        .images
        .first()
        .ok_or_else(|| ConfigError::Invalid(format!("{} lists no images", manifest.display())))?
        .shape()
        .to_vec();
    let net = match cfg.architecture {
        Architecture::Desk2d => {
            if shape.len() != 3 || shape[0] != 1 || shape[1] != shape[2] {
                return Err(ConfigError::Invalid(format!(
                    "desk-2d needs [1, n, n] images, got {shape:?}"
                ))
                .into());
            }
            Network::desk_2d(shape[1], data.class_names.len(), cfg.seed)?
        }
        Architecture::Reference3d => Network::reference_3d(cfg.variant, cfg.seed)?,
    };
    log::info!(
        "training {} parameters on {} images for {} epochs",
        net.parameter_count(),
        data.len(),
        cfg.epochs
    );
    let outcome = train(net, &data, &cfg.train_config())?;

    let ckpt = out.join("model.ckpt");
    save_checkpoint(&outcome.network, &ckpt)?;
    let mut trace = String::from("epoch,mean_loss\n");
    for (e, l) in outcome.loss_trace.iter().enumerate() {
        writeln!(trace, "{e},{l}").unwrap();
    }
    let trace_path = out.join("loss_trace.csv");
    write(&trace_path, &trace)?;
    Ok(json!({
        "checkpoint": ckpt,
        "loss_trace": trace_path,
        "epochs": outcome.loss_trace.len(),
        "final_loss": outcome.loss_trace.last(),
        "parameters": outcome.network.parameter_count(),
    }))
}

pub fn extract(cfg: &ExtractSection, out: &Path) -> Result<Value> {
    let dump = load_activations(cfg.source())?;
    let mut summary = serde_json::Map::new();
    if cfg.export_dump {
        let path = export_activation_dump(out.join("dump"), &dump)?;
        summary.insert("dump".into(), json!(path));
    }
    let m = CentMatrix::from_dump(&dump, cfg.mode, cfg.bins, cfg.range)?;
    let path = out.join("features.csv");
    m.write(&path)?;
    summary.insert("features".into(), json!(path));
    summary.insert("images".into(), json!(m.len()));
    summary.insert("columns".into(), json!(m.feature_count()));
    Ok(Value::Object(summary))
}

fn read_features(cfg: &EvaluateSection) -> Result<CentMatrix> {
    let path = require("evaluate.features", cfg.features.as_deref())?;
    Ok(CentMatrix::read(path)?)
}

fn metrics_summary(m: &Metrics) -> Value {
    json!({ "fold_auc": m.fold_auc, "mean_auc": m.mean_auc })
}

pub fn evaluate(cfg: &EvaluateSection, out: &Path) -> Result<Value> {
    let m = read_features(cfg)?;
    let plan = kfold_split(&m.labels, cfg.k, cfg.seed, cfg.stratified)?;
    let forest = cfg.forest_config();
    let metrics = cross_validate(&m.rows, &m.labels, &forest, &plan)?;
    write(&out.join("metrics.csv"), &metrics.to_csv(None))?;

    let mut rocs = Vec::new();
    if metrics.class_count == 2 {
        for i in 0..metrics.folds.len() {
            let path = out.join(format!("roc_fold_{i}.csv"));
            write(&path, &metrics.fold_roc(i)?.to_csv())?;
            rocs.push(path);
        }
        let path = out.join("roc_pooled.csv");
        write(&path, &metrics.pooled_roc()?.to_csv())?;
        rocs.push(path);
    } else {
        log::warn!(
            "{} classes: ROC curves are only written for 2",
            metrics.class_count
        );
    }

    let model = fit(&m.rows, &m.labels, &forest)?;
    save_forest(&model, out.join("forest.bin"))?;
    let imp = feature_importance(&model)?;
    let mut csv = String::from("feature,split_count,impurity_decrease\n");
    for (i, (c, d)) in imp
        .split_counts
        .iter()
        .zip(&imp.impurity_decrease)
        .enumerate()
    {
        writeln!(csv, "feat_{i},{c},{d}").unwrap();
    }
    write(&out.join("importance.csv"), &csv)?;

    let mut s = metrics_summary(&metrics);
    s["metrics"] = json!(out.join("metrics.csv"));
    s["roc"] = json!(rocs);
    s["oob_accuracy"] = json!(model.oob_accuracy);
    Ok(s)
}

pub fn permute(eval: &EvaluateSection, cfg: &PermuteSection, out: &Path) -> Result<Value> {
    let m = read_features(eval)?;
    let plan = kfold_split(&m.labels, eval.k, eval.seed, eval.stratified)?;
    let metrics = permutation_baseline(
        &m.rows,
        &m.labels,
        &eval.forest_config(),
        &plan,
        cfg.permutation,
    )?;
    let path = out.join("metrics_permuted.csv");
    write(
        &path,
        &metrics.to_csv(Some(&format!("permutation: {}", cfg.permutation))),
    )?;
    let mut s = metrics_summary(&metrics);
    s["metrics"] = json!(path);
    s["permutation"] = json!(cfg.permutation.to_string());
    Ok(s)
}

#[derive(Serialize)]
struct LayerEntropy {
    layer: usize,
    #[serde(flatten)]
    report: ExpectedCent,
    /// `H(Y|C,F) <= H(Y|C) <= H(Y)`.
    ordering_holds: bool,
}

#[derive(Serialize)]
struct Partition {
    layer: usize,
    filter: Option<usize>,
    informative: Vec<usize>,
    uninformative: Vec<usize>,
    #[serde(flatten)]
    report: PartitionReport,
}

#[derive(Serialize)]
struct Dpi {
    samples: usize,
    i_xc: f64,
    i_yc: f64,
    slack: f64,
    holds: bool,
}

/// `theory.json` schema:
///
/// * `dpi`: `{samples, i_xc, i_yc, slack, holds}`, always present.
/// * `expected_cent`: `null` without an activation source, else one entry
///   per convolutional layer with `layer`, `expected`, `class_conditional`,
///   `pooled`, `lo`, `hi`, `cells`, `class_priors`, `ordering_holds`.
/// * `partition`: `null` without an activation source, else `layer`,
///   `filter`, `informative`, `uninformative` plus the fields of
///   `PartitionReport`.
#[derive(Serialize)]
struct TheoryReport {
    dpi: Dpi,
    expected_cent: Option<Vec<LayerEntropy>>,
    partition: Option<Partition>,
}

pub fn theory(cfg: &TheorySection, out: &Path) -> Result<Value> {
    let chain = generate_markov_chain(&cfg.markov)?;
    let d = dpi_check(&chain, cfg.dpi_slack)?;
    let dpi = Dpi {
        samples: chain.len(),
        i_xc: d.i_xc,
        i_yc: d.i_yc,
        slack: d.slack,
        holds: d.holds,
    };

    let mut histograms: Option<PathBuf> = None;
    let (expected_cent, partition) = if cfg.source().is_set() {
        let dump = load_activations(cfg.source())?;
        let mut layers = Vec::new();
        for l in 0..dump.layer_count() {
            if dump.layers[0][l].rank() < 2 {
                continue;
            }
            let e = expected_cent_from_dump(&dump, &FilterSelector::layer(l), cfg.bins)?;
            let tol = 1e-9;
            let ordering_holds =
                e.expected <= e.class_conditional + tol && e.class_conditional <= e.pooled + tol;
            layers.push(LayerEntropy {
                layer: l,
                report: e,
                ordering_holds,
            });
        }
        let selector = match cfg.partition_filter {
            Some(f) => FilterSelector::filter(cfg.partition_layer, f),
            None => FilterSelector::layer(cfg.partition_layer),
        };
        let report = partition_check_from_dump(
            &dump,
            &selector,
            &cfg.informative,
            &cfg.uninformative,
            cfg.bins,
        )?;
        let path = out.join("response_histograms.csv");
        write(
            &path,
            &ResponseHistograms::build(&dump, &selector, cfg.bins)?.to_csv(),
        )?;
        histograms = Some(path);
        let partition = Partition {
            layer: cfg.partition_layer,
            filter: cfg.partition_filter,
            informative: cfg.informative.clone(),
            uninformative: cfg.uninformative.clone(),
            report,
        };
        (Some(layers), Some(partition))
    } else {
        log::info!("no activation source configured; reporting the chain check only");
        (None, None)
    };

    let report = TheoryReport {
        dpi,
        expected_cent,
        partition,
    };
    let value = serde_json::to_value(&report)?;
    if let Some(bad) = first_non_finite(&value, "") {
        anyhow::bail!("theory report has a non-finite value at {bad}");
    }
    let path = out.join("theory.json");
    write(&path, &(serde_json::to_string_pretty(&value)? + "\n"))?;
    Ok(json!({
        "report": path,
        "response_histograms": histograms,
        "dpi_holds": report.dpi.holds,
    }))
}

/// serde_json turns NaN and infinities into `null`. Below the top-level
/// sections the only legitimately null field is `partition.filter`.
fn first_non_finite(v: &Value, at: &str) -> Option<String> {
    match v {
        Value::Null if at.matches('.').count() > 1 => Some(at.to_string()),
        Value::Array(a) => a
            .iter()
            .enumerate()
            .find_map(|(i, x)| first_non_finite(x, &format!("{at}[{i}]"))),
        Value::Object(o) => o
            .iter()
            .filter(|(k, _)| at != ".partition" || k.as_str() != "filter")
            .find_map(|(k, x)| first_non_finite(x, &format!("{at}.{k}"))),
        _ => None,
    }
}
