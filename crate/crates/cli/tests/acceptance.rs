//! Acceptance suite. Every criterion prints one `PASS`/`FAIL` line to the
//! real stdout (visible without `--nocapture`); the test fails if any
//! criterion fails.

use std::io::Write;
use std::path::Path;
use std::process::Command;

use haarseg::dataset::{synth_texture_dataset, DatasetManifest};
use haarseg::features::{feature_dimension, ExtractorConfig};
use haarseg::haar_swt::{bessel_energy_ratio, paper_op_count, swt2d, swt2d_direct};
use haarseg::linear_svm::{accuracy, hinge_objective, train_with_trace, LinearModel, TrainConfig, TrainingSet};
use haarseg::metrics::pixel_accuracy;
use haarseg::model::load_model;
use haarseg::pipeline::{evaluate, train, RunConfig, Segmenter};
use haarseg::rff::{generate, RffConfig};
use haarseg::Plane;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_plane(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Plane {
    Plane::from_fn(w, h, |_, _| rng.random_range(-1.0..1.0))
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let p = random_plane(&mut rng, 64, 64);
        let r = bessel_energy_ratio(&swt2d(&p, 4).map_err(|e| e.to_string())?, &p);
        worst = worst.max((r.ratio - 1.0).abs());
    }
    check(worst <= 1e-6, format!("max |ratio - 1| = {worst:.3e} over 50 planes (tol 1e-6)"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (w, h, j) = (rng.random_range(1..=32), rng.random_range(1..=32), rng.random_range(1..=3));
        let p = random_plane(&mut rng, w, h);
        let a = swt2d(&p, j).map_err(|e| e.to_string())?;
        let b = swt2d_direct(&p, j).map_err(|e| e.to_string())?;
        worst = worst.max(a.max_abs_diff(&b));
    }
    check(worst <= 1e-10, format!("max abs difference = {worst:.3e} over 100 planes (tol 1e-10)"))
}

fn criterion_3() -> Outcome {
    let one = ExtractorConfig::default();
    let three = ExtractorConfig::default().with_scales(vec![1, 2, 4]);
    let got = (feature_dimension(&one, 3), feature_dimension(&three, 3), feature_dimension(&one, 4));
    check(got == (309, 927, 412), format!("m = {}, {}, {} (expected 309, 927, 412)", got.0, got.1, got.2))
}

fn criterion_4() -> Outcome {
    let ops = paper_op_count(320, 240, 4, 3, 3).total_ops;
    let rel = (ops - 387.072e6).abs() / 387.072e6;
    check(rel <= 0.005, format!("{:.3} MOp, relative deviation {rel:.2e} (tol 0.5%)", ops / 1e6))
}

fn criterion_5() -> Outcome {
    let dim = 309;
    let gamma = 1.0;
    let proj = generate(&RffConfig { m_tilde: 5000, gamma, seed: 55 }, dim).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (mut sum, mut worst) = (0.0, 0.0f64);
    for _ in 0..200 {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..1.0)).collect();
        // Random direction, distance spread so the kernel covers (0, 1].
        let dir: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dist = rng.random_range(0.0..3.0);
        let y: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + dist * d / norm).collect();
        let d2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        let exact = (-gamma * gamma * d2 / 2.0).exp();
        let px = proj.transform(&x, gamma).map_err(|e| e.to_string())?;
        let py = proj.transform(&y, gamma).map_err(|e| e.to_string())?;
        let approx: f64 = px.iter().zip(&py).map(|(a, b)| a * b).sum();
        let err = (approx - exact).abs();
        sum += err;
        worst = worst.max(err);
    }
    let mean = sum / 200.0;
    check(
        mean <= 0.02 && worst <= 0.08,
        format!("mean error {mean:.4} (tol 0.02), max error {worst:.4} (tol 0.08)"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let centers = [[2.0, 0.0, 1.0], [-2.0, 0.5, -1.0], [0.0, -2.5, 0.0]];
    let pairs: Vec<(Vec<f64>, usize)> = (0..300)
        .map(|k| {
            let c = k % 3;
            (centers[c].iter().map(|m| m + rng.random_range(-0.5..0.5)).collect(), c)
        })
        .collect();
    let set = TrainingSet::from_pairs(&pairs).map_err(|e| e.to_string())?;
    let cfg = TrainConfig::default();
    let report = train_with_trace(&set, 3, &cfg).map_err(|e| e.to_string())?;
    let acc = accuracy(&report.model, &set).map_err(|e| e.to_string())?;
    let obj = hinge_objective(&report.model, &set, cfg.lambda).map_err(|e| e.to_string())?;
    let zero = hinge_objective(&LinearModel::zeros(3, 3), &set, cfg.lambda).map_err(|e| e.to_string())?;
    check(
        acc >= 0.99 && obj <= zero && zero == 1.0,
        format!("train accuracy {acc:.4} (tol 0.99), objective {obj:.4} <= zero-model {zero}"),
    )
}

fn criterion_7(all: &DatasetManifest) -> Outcome {
    let train_set = all.subset(&(0..20).collect::<Vec<_>>());
    let test_set = all.subset(&(20..25).collect::<Vec<_>>());
    let outcome = train(&train_set, &RunConfig::default()).map_err(|e| e.to_string())?;
    let seg = Segmenter::new(outcome.bundle).map_err(|e| e.to_string())?;
    let cm = evaluate(&seg, &test_set, 0.0).map_err(|e| e.to_string())?;
    let acc = pixel_accuracy(&cm).ok_or("no test pixels")?;
    let majority = (0..cm.classes()).map(|k| cm.row_sum(k)).max().unwrap_or(0) as f64 / cm.total() as f64;
    // With 3 classes the majority share is >= 1/3, so "3x the baseline" is
    // read on error rates: model error at most a third of the baseline's.
    let (err, base_err) = (1.0 - acc, 1.0 - majority);
    check(
        acc >= 0.90 && err * 3.0 <= base_err,
        format!(
            "test pixel accuracy {acc:.4} (tol 0.90); majority baseline {majority:.4}, \
             error {err:.4} vs baseline error {base_err:.4} (need <= 1/3)"
        ),
    )
}

/// Everything but the weight payload, following the documented layout.
fn expected_header_len(names: &[String], scales: usize) -> usize {
    let fixed = 4 + 4 + 4 * 4 + 1 + 1 + 4 + 4 * scales + 4 + 1 + 4 + 4 + 8 + 1 + 4;
    let names: usize = names.iter().map(|n| 4 + n.len()).sum();
    fixed + names + 8
}

fn cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_haarseg"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("haarseg {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn criterion_8(dir: &Path) -> Outcome {
    let data = dir.join("eight");
    synth_texture_dataset(8, 8, 32, 88, &data).map_err(|e| e.to_string())?;
    let model = dir.join("eight.wsg");
    let manifest = data.join("manifest.txt");
    cli(&["train", "--manifest", manifest.to_str().unwrap(), "--out", model.to_str().unwrap(), "--sample-frac", "0.2"])?;
    let len = std::fs::metadata(&model).map_err(|e| e.to_string())?.len() as usize;
    let bundle = load_model(&model).map_err(|e| e.to_string())?;
    let (k, m) = (bundle.class_count(), bundle.rff.m_tilde);
    let payload = 4 * k * (m + 1);
    let header = expected_header_len(&bundle.class_names, bundle.extractor.image_scales.len());
    check(
        k == 8 && m == 5000 && len < 350_000 && len == payload + header,
        format!("K = {k}, m_tilde = {m}: {len} bytes = payload {payload} + header {header} (limit 350000)"),
    )
}

fn criterion_9(dir: &Path, all: &DatasetManifest) -> Outcome {
    let data = dir.join("det");
    let sub = all.subset(&[0, 1, 2, 3, 4, 5]);
    std::fs::create_dir_all(&data).map_err(|e| e.to_string())?;
    let manifest = data.join("manifest.txt");
    std::fs::write(&manifest, sub.to_text(&data)).map_err(|e| e.to_string())?;
    let eval_manifest = data.join("eval.txt");
    std::fs::write(&eval_manifest, all.subset(&[20, 21]).to_text(&data)).map_err(|e| e.to_string())?;
    let (m, em) = (manifest.to_str().unwrap(), eval_manifest.to_str().unwrap());

    let a = data.join("a.wsg");
    let b = data.join("b.wsg");
    cli(&["--workers", "1", "train", "--manifest", m, "--out", a.to_str().unwrap()])?;
    cli(&["--workers", "3", "train", "--manifest", m, "--out", b.to_str().unwrap()])?;
    let same_model = std::fs::read(&a).map_err(|e| e.to_string())? == std::fs::read(&b).map_err(|e| e.to_string())?;

    let image = all.entries[20].0.to_str().unwrap().to_string();
    let mut labels = Vec::new();
    let mut reports = Vec::new();
    for workers in ["1", "3"] {
        let out = data.join(format!("pred_{workers}.png"));
        cli(&["--workers", workers, "predict", "--model", a.to_str().unwrap(), "--image", &image, "--out", out.to_str().unwrap()])?;
        labels.push(std::fs::read(&out).map_err(|e| e.to_string())?);
        reports.push(cli(&["--workers", workers, "eval", "--model", a.to_str().unwrap(), "--manifest", em])?);
    }
    check(
        same_model && labels[0] == labels[1] && reports[0] == reports[1],
        format!(
            "models identical: {same_model}; predict identical across 1/3 workers: {}; eval identical: {}",
            labels[0] == labels[1],
            reports[0] == reports[1]
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let textures = synth_texture_dataset(25, 3, 96, 7, dir.path().join("textures")).unwrap();

    let criteria: Vec<Criterion> = vec![
        ("tight-frame energy", Box::new(criterion_1)),
        ("a-trous oracle", Box::new(criterion_2)),
        ("feature dimensions", Box::new(criterion_3)),
        ("op count", Box::new(criterion_4)),
        ("random-feature kernel", Box::new(criterion_5)),
        ("svm sanity", Box::new(criterion_6)),
        ("synthetic segmentation", Box::new(|| criterion_7(&textures))),
        ("model footprint", Box::new(|| criterion_8(dir.path()))),
        ("determinism", Box::new(|| criterion_9(dir.path(), &textures))),
    ];

    let mut failed = Vec::new();
    let mut stdout = std::io::stdout().lock();
    for (n, (name, run)) in criteria.iter().enumerate() {
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed.push(n + 1);
                ("FAIL", d)
            }
        };
        writeln!(stdout, "criterion {} [{tag}] {name}: {detail}", n + 1).unwrap();
        stdout.flush().unwrap();
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
