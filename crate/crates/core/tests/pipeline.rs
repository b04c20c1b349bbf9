mod common;

use std::collections::BTreeSet;

use ndarray::Array2;
use sha2::{Digest, Sha256};

use kdsense_core::augment::{apply_policy, AugmentKind, AugmentationPolicy};
use kdsense_core::config::ExperimentConfig;
use kdsense_core::dataio::{
    load_generic_csv, loso_splits, make_synthetic, normalize, read_cache, segment_windows,
    write_cache, CsvSchema, SyntheticConfig, WindowConfig,
};

#[test]
fn synthetic_two_class_is_linearly_separable() {
    let cfg = SyntheticConfig {
        n_classes: 2,
        separation: 3.0,
        noise_std: 0.3,
        windows_per_class: 20,
        ..SyntheticConfig::default()
    };
    let recs = make_synthetic(&cfg).unwrap();
    let wc = WindowConfig::new(cfg.t, cfg.t);
    let split = &loso_splits(&recs, &wc).unwrap()[0];
    let split = normalize(split.clone());

    // nearest class centroid on per-channel mean and spectral magnitude at
    // the two class frequencies
    let flat = |w: &kdsense_core::Window| {
        let t = w.data.ncols() as f64;
        let mut f = Vec::new();
        for row in w.data.rows() {
            f.push(row.sum() / t);
            for cycles in [1.0, 2.5] {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, v) in row.iter().enumerate() {
                    let a = 2.0 * std::f64::consts::PI * cycles * i as f64 / t;
                    re += v * a.cos();
                    im += v * a.sin();
                }
                f.push((re * re + im * im).sqrt() / t);
            }
        }
        f
    };
    let dim = flat(&split.train[0]).len();
    let mut centroids = vec![vec![0.0; dim]; 2];
    let mut counts = [0.0; 2];
    for w in &split.train {
        let c = split.class_index(w.label).unwrap();
        counts[c] += 1.0;
        for (a, b) in centroids[c].iter_mut().zip(flat(w)) {
            *a += b;
        }
    }
    for (c, n) in counts.iter().enumerate() {
        centroids[c].iter_mut().for_each(|v| *v /= n);
    }
    let correct = split
        .test
        .iter()
        .filter(|w| {
            let x = flat(w);
            let d: Vec<f64> = centroids
                .iter()
                .map(|c| c.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum())
                .collect();
            let pred = if d[0] <= d[1] { 0 } else { 1 };
            pred == split.class_index(w.label).unwrap()
        })
        .count();
    let acc = correct as f64 / split.test.len() as f64;
    assert!(acc > 0.95, "probe accuracy {acc}");
}

#[test]
fn cache_is_reproducible_and_lossless() {
    let toml = r#"
seeds = [0]
output_dir = "unused"
[dataset]
window_len = 64
step = 32
split = { mode = "loso" }
[dataset.source]
kind = "synthetic"
n_classes = 3
n_subjects = 4
channels = 2
t = 64
windows_per_class = 3
seed = 11
[models]
teacher = "wrn16-1"
student = "wrn16-1"
[schedule]
total_epochs = 2
initial_lr = 0.1
first_drop_factor = 0.5
batch_size = 8
"#;
    let cfg = ExperimentConfig::from_toml_str(toml).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ds = cfg.prepare_dataset().unwrap();
    write_cache(a.path(), &ds).unwrap();
    write_cache(b.path(), &cfg.prepare_dataset().unwrap()).unwrap();
    for f in ["windows.bin", "windows.json"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap()
        );
    }
    let back = read_cache(a.path()).unwrap();
    assert_eq!(back, ds);
    assert_eq!(back.splits.len(), 4);

    // every window is a test window in exactly one split
    let mut seen = 0;
    for i in 0..back.splits.len() {
        let s = back.materialize(i).unwrap();
        assert!(s.train_subjects().is_disjoint(&s.test_subjects()));
        seen += s.test.len();
    }
    assert_eq!(seen, back.windows.len());
}

#[test]
fn manifest_counts_match_recount() {
    // variable-length tri-axial recordings, 500-sample non-overlapping windows
    let lengths = [("a", 1700usize), ("b", 999), ("c", 2500), ("d", 501)];
    let mut csv = String::from("subject,label,x,y,z\n");
    for (s, n) in lengths {
        for i in 0..n {
            csv.push_str(&format!("{s},7,{},{},{}\n", i % 13, i % 7, i % 5));
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    std::fs::write(&path, csv).unwrap();
    let toml = format!(
        r#"
seeds = [0]
output_dir = "unused"
[dataset]
window_len = 500
step = 500
split = {{ mode = "holdout", test_subjects = ["d"] }}
[dataset.source]
kind = "csv"
path = {path:?}
schema = {{ subject_column = "subject", label_column = "label", channel_columns = ["x", "y", "z"], sample_rate_hz = 100.0 }}
[models]
teacher = "wrn16-1"
student = "wrn16-1"
[schedule]
total_epochs = 2
initial_lr = 0.1
first_drop_factor = 0.5
batch_size = 8
"#
    );
    let cfg = ExperimentConfig::from_toml_str(&toml).unwrap();
    let ds = cfg.prepare_dataset().unwrap();
    let per_subject = ds.per_subject_counts();
    for (s, n) in lengths {
        assert_eq!(per_subject[s], common::brute_force_windows(n, 500, 500), "subject {s}");
    }
    let total: usize = lengths.iter().map(|(_, n)| n / 500).sum();
    assert_eq!(ds.per_class_counts()[&7], total);

    let recs = load_generic_csv(&path, &CsvSchema::triaxial()).unwrap();
    let direct: usize = recs
        .iter()
        .map(|r| segment_windows(r, &WindowConfig::new(500, 500)).unwrap().len())
        .sum();
    assert_eq!(direct, total);
}

#[test]
fn epochs_give_different_batches() {
    let windows: Vec<kdsense_core::Window> = (0..16)
        .map(|i| kdsense_core::Window {
            data: Array2::from_shape_fn((3, 100), |(c, t)| ((i + 3 * c + t) as f64 * 0.37).sin()),
            label: 1,
            subject_id: "s".into(),
        })
        .collect();
    for kind in [AugmentKind::Removal, AugmentKind::Noise, AugmentKind::Shift, AugmentKind::Mix1, AugmentKind::Mix2] {
        let p = AugmentationPolicy::geneactiv(kind);
        let hashes: BTreeSet<String> = (0..10)
            .map(|epoch| {
                let mut h = Sha256::new();
                for w in apply_policy(&windows, &p, epoch, 42) {
                    for v in w.data.iter() {
                        h.update(v.to_le_bytes());
                    }
                }
                hex::encode(h.finalize())
            })
            .collect();
        assert_eq!(hashes.len(), 10, "{kind}");
        assert_eq!(apply_policy(&windows, &p, 3, 42), apply_policy(&windows, &p, 3, 42));
    }
}
