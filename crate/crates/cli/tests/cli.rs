use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;
use tempfile::TempDir;

fn cent(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cent"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "info")
        .output()
        .expect("spawn cent")
}

#[track_caller]
fn ok(out: &Output) -> Value {
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

#[track_caller]
fn code(out: &Output, expected: i32) -> String {
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    assert_eq!(out.status.code(), Some(expected), "stderr:\n{stderr}");
    stderr
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, acc: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, acc);
            } else {
                acc.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    let mut acc = BTreeMap::new();
    walk(root, root, &mut acc);
    acc
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

/// Synthetic data, a briefly trained desk network and its per-layer
/// features, built once and shared (read-only) by the tests below.
struct Pipeline {
    dir: TempDir,
}

impl Pipeline {
    fn path(&self, rel: &str) -> String {
        self.dir.path().join(rel).to_str().unwrap().to_string()
    }
}

fn pipeline() -> &'static Pipeline {
    static P: OnceLock<Pipeline> = OnceLock::new();
    P.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let d = dir.path();
        ok(&cent(
            d,
            &[
                "synth",
                "--out",
                "data",
                "--set",
                "synth.samples_per_class=20",
            ],
        ));
        ok(&cent(
            d,
            &[
                "train",
                "--out",
                "model",
                "--set",
                "train.manifest=data/manifest.csv",
                "--set",
                "train.epochs=3",
            ],
        ));
        ok(&cent(
            d,
            &[
                "extract",
                "--out",
                "feat",
                "--set",
                "extract.checkpoint=model/model.ckpt",
                "--set",
                "extract.manifest=data/manifest.csv",
                "--set",
                "extract.export_dump=true",
            ],
        ));
        Pipeline { dir }
    })
}

/// `rows` samples alternating between two classes; `feat_0` carries the
/// label exactly, `feat_1` is label-free filler.
fn leak_csv(rows: usize) -> String {
    let mut s = String::from("image_id,label,feat_0,feat_1\n");
    for i in 0..rows {
        let y = i % 2;
        s += &format!("r{i},{y},{y},{}\n", (i * 37 % 101) as f64 / 101.0);
    }
    s
}

/// Two classes with overlapping but shifted features: informative, yet far
/// from separable, with a deterministic filler sequence.
fn informative_csv(rows: usize) -> String {
    let mut s = String::from("image_id,label,feat_0,feat_1,feat_2\n");
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for i in 0..rows {
        let y = i % 2;
        let shift = y as f64 * 0.8;
        s += &format!(
            "r{i},{y},{},{},{}\n",
            next() + shift,
            next() + shift * 0.5,
            next()
        );
    }
    s
}

#[test]
fn synth_default_writes_two_class_manifest() {
    let t = TempDir::new().unwrap();
    let s = ok(&cent(t.path(), &["synth", "--out", "d"]));
    assert_eq!(s["command"], "synth");
    assert_eq!(s["classes"].as_array().unwrap().len(), 2);
    assert_eq!(s["images"], 100);
    let manifest = std::fs::read_to_string(t.path().join("d/manifest.csv")).unwrap();
    assert!(
        manifest.contains("smooth") && manifest.contains("textured"),
        "{manifest}"
    );
}

#[test]
fn synth_bad_extent_exits_2_naming_the_field() {
    let t = TempDir::new().unwrap();
    let err = code(
        &cent(
            t.path(),
            &["synth", "--out", "d", "--set", "synth.extent=0"],
        ),
        2,
    );
    assert!(err.contains("extent"), "{err}");
}

#[test]
fn synth_is_byte_reproducible() {
    let t = TempDir::new().unwrap();
    let args = |out: &'static str| {
        [
            "synth",
            "--out",
            out,
            "--seed",
            "7",
            "--set",
            "synth.samples_per_class=5",
        ]
    };
    ok(&cent(t.path(), &args("a")));
    ok(&cent(t.path(), &args("b")));
    let (a, b) = (tree(&t.path().join("a")), tree(&t.path().join("b")));
    assert_eq!(a.len(), 12);
    assert_eq!(a, b);
    let cfg = String::from_utf8(a[Path::new("synth_config.toml")].clone()).unwrap();
    assert!(cfg.contains("seed = 7"), "{cfg}");
}

#[test]
fn config_file_and_overrides_are_echoed() {
    let t = TempDir::new().unwrap();
    std::fs::write(
        t.path().join("run.toml"),
        "[synth]\nextent = 64\nsamples_per_class = 2\n",
    )
    .unwrap();
    let out = cent(
        t.path(),
        &[
            "synth",
            "--config",
            "run.toml",
            "--out",
            "d",
            "--set",
            "synth.seed=3",
        ],
    );
    ok(&out);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("extent = 64") && stderr.contains("seed = 3"),
        "{stderr}"
    );
    let img = cent_core::dataio::load_dataset(t.path().join("d/manifest.csv")).unwrap();
    assert_eq!(img.images[0].shape(), &[1, 64, 64]);
}

#[test]
fn unknown_field_and_unreadable_config_exit_2() {
    let t = TempDir::new().unwrap();
    let err = code(
        &cent(t.path(), &["synth", "--out", "d", "--set", "synth.extnt=4"]),
        2,
    );
    assert!(err.contains("extnt"), "{err}");
    code(&cent(t.path(), &["synth", "--config", "nope.toml"]), 2);
    std::fs::write(t.path().join("bad.toml"), "[synth\n").unwrap();
    code(&cent(t.path(), &["synth", "--config", "bad.toml"]), 2);
    code(&cent(t.path(), &["synth", "--set", "novalue"]), 2);
    code(&cent(t.path(), &["frobnicate"]), 2);
}

#[test]
fn train_without_manifest_exits_2() {
    let t = TempDir::new().unwrap();
    let err = code(&cent(t.path(), &["train", "--out", "m"]), 2);
    assert!(err.contains("train.manifest"), "{err}");
    let err = code(
        &cent(
            t.path(),
            &["train", "--out", "m", "--set", "train.manifest=missing.csv"],
        ),
        2,
    );
    assert!(err.contains("missing.csv"), "{err}");
}

#[test]
fn train_writes_checkpoint_and_loss_trace() {
    let p = pipeline();
    let ckpt = p.dir.path().join("model/model.ckpt");
    let net = cent_core::net::load_checkpoint(&ckpt).unwrap();
    assert_eq!(net.input_shape(), &[1, 32, 32]);
    let trace = std::fs::read_to_string(p.dir.path().join("model/loss_trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines[0], "epoch,mean_loss");
    assert_eq!(lines.len(), 1 + 3);
    for (e, l) in lines[1..].iter().enumerate() {
        let (epoch, loss) = l.split_once(',').unwrap();
        assert_eq!(epoch, e.to_string());
        assert!(loss.parse::<f64>().unwrap().is_finite());
    }
}

#[test]
fn train_is_byte_reproducible() {
    let p = pipeline();
    let d = p.dir.path();
    let t = TempDir::new().unwrap();
    let out = t.path().join("again");
    ok(&cent(
        d,
        &[
            "train",
            "--out",
            out.to_str().unwrap(),
            "--set",
            "train.manifest=data/manifest.csv",
            "--set",
            "train.epochs=3",
        ],
    ));
    assert_eq!(tree(&d.join("model")), tree(&out));
}

#[test]
fn train_on_wrong_architecture_exits_2() {
    let p = pipeline();
    let t = TempDir::new().unwrap();
    let manifest = p.path("data/manifest.csv");
    let err = code(
        &cent(
            t.path(),
            &[
                "train",
                "--out",
                "m",
                "--set",
                &format!("train.manifest={manifest:?}"),
                "--set",
                "train.architecture=reference-3d",
                "--set",
                "train.epochs=1",
            ],
        ),
        2,
    );
    assert!(err.contains("shape"), "{err}");
}

#[test]
fn per_layer_extract_has_three_columns() {
    let p = pipeline();
    let csv = std::fs::read_to_string(p.dir.path().join("feat/features.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(header, "image_id,label,feat_0,feat_1,feat_2");
    assert_eq!(csv.lines().count(), 1 + 40);
}

#[test]
fn dump_source_matches_checkpoint_source() {
    let p = pipeline();
    let d = p.dir.path();
    let t = TempDir::new().unwrap();
    let out = t.path().join("from_dump");
    ok(&cent(
        d,
        &[
            "extract",
            "--out",
            out.to_str().unwrap(),
            "--set",
            "extract.dump=feat/dump",
        ],
    ));
    let a = std::fs::read(d.join("feat/features.csv")).unwrap();
    let b = std::fs::read(out.join("features.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn extract_source_errors_exit_2() {
    let p = pipeline();
    let d = p.dir.path();
    let t = TempDir::new().unwrap();
    let o = t.path().to_str().unwrap();
    let err = code(&cent(d, &["extract", "--out", o]), 2);
    assert!(err.contains("extract.checkpoint"), "{err}");
    let err = code(
        &cent(
            d,
            &[
                "extract",
                "--out",
                o,
                "--set",
                "extract.checkpoint=model/model.ckpt",
            ],
        ),
        2,
    );
    assert!(err.contains("extract.manifest"), "{err}");
    code(
        &cent(
            d,
            &[
                "extract",
                "--out",
                o,
                "--set",
                "extract.dump=feat/dump",
                "--set",
                "extract.checkpoint=model/model.ckpt",
            ],
        ),
        2,
    );
    code(
        &cent(
            d,
            &[
                "extract",
                "--out",
                o,
                "--set",
                "extract.bins=0",
                "--set",
                "extract.dump=feat/dump",
            ],
        ),
        2,
    );
}

#[test]
fn corrupt_checkpoint_is_a_runtime_failure() {
    let p = pipeline();
    let t = TempDir::new().unwrap();
    let mut bytes = std::fs::read(p.dir.path().join("model/model.ckpt")).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    std::fs::write(t.path().join("bad.ckpt"), bytes).unwrap();
    let manifest = p.path("data/manifest.csv");
    let err = code(
        &cent(
            t.path(),
            &[
                "extract",
                "--set",
                "extract.checkpoint=bad.ckpt",
                "--set",
                &format!("extract.manifest={manifest:?}"),
            ],
        ),
        1,
    );
    assert!(err.contains("checksum"), "{err}");
}

#[test]
fn per_filter_extract_on_reference_net_has_21_columns() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    ok(&cent(
        d,
        &[
            "synth",
            "--out",
            "vol",
            "--set",
            "synth.dims=3",
            "--set",
            "synth.extent=64",
            "--set",
            "synth.samples_per_class=2",
        ],
    ));
    ok(&cent(
        d,
        &[
            "train",
            "--out",
            "ref",
            "--set",
            "train.manifest=vol/manifest.csv",
            "--set",
            "train.architecture=reference-3d",
            "--set",
            "train.epochs=1",
            "--set",
            "train.batch_size=2",
        ],
    ));
    let s = ok(&cent(
        d,
        &[
            "extract",
            "--out",
            "f",
            "--set",
            "extract.checkpoint=ref/model.ckpt",
            "--set",
            "extract.manifest=vol/manifest.csv",
            "--set",
            "extract.mode=per-filter",
        ],
    ));
    assert_eq!(s["columns"], 21);
    let csv = std::fs::read_to_string(d.join("f/features.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 2 + 21);
}

#[test]
fn evaluate_on_leaked_label_gives_auc_one() {
    let t = TempDir::new().unwrap();
    std::fs::write(t.path().join("leak.csv"), leak_csv(40)).unwrap();
    let s = ok(&cent(
        t.path(),
        &[
            "evaluate",
            "--out",
            "e",
            "--set",
            "evaluate.features=leak.csv",
        ],
    ));
    assert_eq!(s["command"], "evaluate");
    assert_eq!(s["mean_auc"], 1.0);
    let metrics = std::fs::read_to_string(t.path().join("e/metrics.csv")).unwrap();
    assert!(metrics.starts_with("fold,auc\n"), "{metrics}");
    assert!(metrics.ends_with("mean,1\n"), "{metrics}");
}

#[test]
fn evaluate_writes_one_roc_per_fold_plus_pooled() {
    let t = TempDir::new().unwrap();
    std::fs::write(t.path().join("leak.csv"), leak_csv(40)).unwrap();
    ok(&cent(
        t.path(),
        &[
            "evaluate",
            "--out",
            "e",
            "--set",
            "evaluate.features=leak.csv",
            "--set",
            "evaluate.k=4",
        ],
    ));
    let files = tree(&t.path().join("e"));
    for name in [
        "roc_fold_0.csv",
        "roc_fold_1.csv",
        "roc_fold_2.csv",
        "roc_fold_3.csv",
        "roc_pooled.csv",
    ] {
        let text = String::from_utf8(files[Path::new(name)].clone()).unwrap();
        assert!(text.starts_with("threshold,fpr,tpr\n"), "{name}");
        let last = text.lines().last().unwrap();
        assert!(last.ends_with(",1,1"), "{name}: {last}");
    }
    assert!(!files.contains_key(Path::new("roc_fold_4.csv")));
    let importance = String::from_utf8(files[Path::new("importance.csv")].clone()).unwrap();
    assert_eq!(importance.lines().count(), 3);
    let forest = cent_core::forest::load_forest(t.path().join("e/forest.bin")).unwrap();
    assert_eq!(forest.feature_count, 2);
}

#[test]
fn evaluate_and_permute_are_byte_reproducible() {
    let t = TempDir::new().unwrap();
    std::fs::write(t.path().join("x.csv"), informative_csv(60)).unwrap();
    for cmd in ["evaluate", "permute"] {
        ok(&cent(
            t.path(),
            &[cmd, "--out", "a", "--set", "evaluate.features=x.csv"],
        ));
        ok(&cent(
            t.path(),
            &[cmd, "--out", "b", "--set", "evaluate.features=x.csv"],
        ));
    }
    assert_eq!(tree(&t.path().join("a")), tree(&t.path().join("b")));
}

#[test]
fn evaluate_errors() {
    let t = TempDir::new().unwrap();
    let err = code(&cent(t.path(), &["evaluate"]), 2);
    assert!(err.contains("evaluate.features"), "{err}");
    std::fs::write(t.path().join("leak.csv"), leak_csv(40)).unwrap();
    code(
        &cent(
            t.path(),
            &[
                "evaluate",
                "--set",
                "evaluate.features=leak.csv",
                "--set",
                "evaluate.k=1",
            ],
        ),
        2,
    );
    std::fs::write(
        t.path().join("junk.csv"),
        "image_id,label,feat_0\nr0,0,abc\n",
    )
    .unwrap();
    code(
        &cent(
            t.path(),
            &["evaluate", "--set", "evaluate.features=junk.csv"],
        ),
        1,
    );
}

#[test]
fn identity_permutation_equals_evaluate() {
    let t = TempDir::new().unwrap();
    std::fs::write(t.path().join("x.csv"), informative_csv(60)).unwrap();
    ok(&cent(
        t.path(),
        &["evaluate", "--out", "e", "--set", "evaluate.features=x.csv"],
    ));
    let s = ok(&cent(
        t.path(),
        &[
            "permute",
            "--out",
            "p",
            "--set",
            "evaluate.features=x.csv",
            "--set",
            "permute.permutation=\"identity\"",
        ],
    ));
    assert_eq!(s["permutation"], "identity");
    let e = std::fs::read_to_string(t.path().join("e/metrics.csv")).unwrap();
    let p = std::fs::read_to_string(t.path().join("p/metrics_permuted.csv")).unwrap();
    assert!(p.starts_with("# permutation: identity\n"), "{p}");
    assert_eq!(data_lines(&e), data_lines(&p));
}

#[test]
fn permutation_seed_is_recorded_in_header() {
    let t = TempDir::new().unwrap();
    std::fs::write(t.path().join("x.csv"), informative_csv(60)).unwrap();
    let s = ok(&cent(
        t.path(),
        &[
            "permute",
            "--out",
            "p",
            "--seed",
            "42",
            "--set",
            "evaluate.features=x.csv",
        ],
    ));
    assert_eq!(s["permutation"], "seeded(42)");
    let p = std::fs::read_to_string(t.path().join("p/metrics_permuted.csv")).unwrap();
    assert_eq!(p.lines().next().unwrap(), "# permutation: seeded(42)");
}

#[test]
fn permuted_informative_features_give_chance_auc() {
    let t = TempDir::new().unwrap();
    std::fs::write(t.path().join("x.csv"), informative_csv(400)).unwrap();
    let e = ok(&cent(
        t.path(),
        &["evaluate", "--out", "e", "--set", "evaluate.features=x.csv"],
    ));
    assert!(e["mean_auc"].as_f64().unwrap() > 0.8, "{e}");
    let mut inside = 0;
    let mut aucs = Vec::new();
    for seed in 0..10 {
        let out = format!("p{seed}");
        let s = ok(&cent(
            t.path(),
            &[
                "permute",
                "--out",
                &out,
                "--seed",
                &seed.to_string(),
                "--set",
                "evaluate.features=x.csv",
            ],
        ));
        let a = s["mean_auc"].as_f64().unwrap();
        aucs.push(a);
        inside += usize::from((0.35..=0.65).contains(&a));
    }
    assert!(inside >= 9, "{aucs:?}");
}

fn assert_finite_numbers(v: &Value, at: &str) {
    match v {
        Value::Number(n) => assert!(n.as_f64().unwrap().is_finite(), "{at}"),
        Value::Array(a) => a
            .iter()
            .enumerate()
            .for_each(|(i, x)| assert_finite_numbers(x, &format!("{at}[{i}]"))),
        Value::Object(o) => o
            .iter()
            .for_each(|(k, x)| assert_finite_numbers(x, &format!("{at}.{k}"))),
        _ => {}
    }
}

#[test]
fn theory_default_chain_satisfies_dpi() {
    let t = TempDir::new().unwrap();
    let s = ok(&cent(t.path(), &["theory", "--out", "t"]));
    assert_eq!(s["dpi_holds"], true);
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(t.path().join("t/theory.json")).unwrap())
            .unwrap();
    let dpi = &report["dpi"];
    for key in ["samples", "i_xc", "i_yc", "slack"] {
        assert!(dpi[key].is_number(), "dpi.{key}");
    }
    assert_eq!(dpi["holds"], true);
    assert!(dpi["i_yc"].as_f64().unwrap() <= dpi["i_xc"].as_f64().unwrap() + 0.02);
    assert!(report["expected_cent"].is_null());
    assert!(report["partition"].is_null());
    assert_finite_numbers(&report, "");
}

#[test]
fn theory_report_on_activations_matches_schema() {
    let p = pipeline();
    let d = p.dir.path();
    let t = TempDir::new().unwrap();
    let out = t.path().to_str().unwrap();
    ok(&cent(
        d,
        &[
            "theory",
            "--out",
            out,
            "--set",
            "theory.dump=feat/dump",
            "--set",
            "theory.markov.samples=20000",
        ],
    ));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(t.path().join("theory.json")).unwrap())
            .unwrap();
    assert_finite_numbers(&report, "");

    let layers = report["expected_cent"].as_array().unwrap();
    assert_eq!(layers.len(), 2, "two convolutional layers");
    for (l, e) in layers.iter().enumerate() {
        assert_eq!(e["layer"], l);
        for key in ["expected", "class_conditional", "pooled", "lo", "hi"] {
            assert!(e[key].is_number(), "{key}");
        }
        assert_eq!(e["cells"].as_array().unwrap().len(), 2);
        assert_eq!(e["cells"][0].as_array().unwrap().len(), 10);
        assert_eq!(e["class_priors"].as_array().unwrap().len(), 2);
        assert_eq!(e["ordering_holds"], true);
    }

    let part = &report["partition"];
    assert_eq!(part["layer"], 0);
    assert!(part["filter"].is_null());
    assert_eq!(part["informative"], serde_json::json!([0]));
    assert_eq!(part["uninformative"], serde_json::json!([1]));
    for key in [
        "h_conditional",
        "p_informative",
        "p_uninformative",
        "h_informative",
        "h_uninformative",
    ] {
        assert!(part[key].is_number(), "{key}");
    }
    assert!(part["decomposition_residual"].as_f64().unwrap() < 1e-9);
    assert!(part["inequality_holds"].is_boolean());

    let hist = std::fs::read_to_string(t.path().join("response_histograms.csv")).unwrap();
    let mut lines = hist.lines();
    assert_eq!(lines.next().unwrap(), "class,filter,bin,lo,hi,count");
    // 2 classes x 10 filters x 256 bins.
    assert_eq!(lines.count(), 2 * 10 * 256);
}

#[test]
fn theory_bad_partition_exits_2() {
    let p = pipeline();
    let d = p.dir.path();
    let t = TempDir::new().unwrap();
    let out = t.path().to_str().unwrap();
    code(
        &cent(
            d,
            &[
                "theory",
                "--out",
                out,
                "--set",
                "theory.dump=feat/dump",
                "--set",
                "theory.uninformative=[0]",
            ],
        ),
        2,
    );
    code(
        &cent(
            d,
            &["theory", "--out", out, "--set", "theory.markov.samples=0"],
        ),
        2,
    );
}

#[test]
fn theory_is_byte_reproducible() {
    let p = pipeline();
    let d = p.dir.path();
    let t = TempDir::new().unwrap();
    for o in ["a", "b"] {
        let out = t.path().join(o);
        ok(&cent(
            d,
            &[
                "theory",
                "--out",
                out.to_str().unwrap(),
                "--seed",
                "5",
                "--set",
                "theory.dump=feat/dump",
            ],
        ));
    }
    assert_eq!(tree(&t.path().join("a")), tree(&t.path().join("b")));
}
