//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use memeforge_cli::pipeline::{model_config, prepare_examples};
use memeforge_cli::{
    accuracy, cmd_eval, cmd_ingest, cmd_ocr, cmd_report, cmd_synth, cmd_train, history_path, EvalKind, Manifest,
    ManifestRecord, RunConfig, REPORT_SCHEMA,
};
use memeforge_core::baselines::{rf_predict, rf_train, standardize, svm_predict, svm_train};
use memeforge_core::metrics::{cohen_kappa, cross_validate, fleiss_kappa, m_index, AgreementTable};
use memeforge_core::nn::{
    build_model, checkpoint_to_bytes, cnn_geometry, conv2d_forward, maxpool2d, predict, Checkpoint, Example, Model,
    Trainer,
};
use memeforge_core::synth::{gaussian_blobs, SynthConfig};
use memeforge_core::text::{embed_sequence, EmbeddingTable, TokenSequence};
use memeforge_core::vision::emd::emd;
use memeforge_core::vision::{colorfulness, compute_glcm, estimate_skew, rotate};
use memeforge_core::{derive_seed, FeatureFamily, FusionModelConfig, ImageGray, ImageRgb, MemeClass, ModelKind, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure!(t < limit, "took {:.1}s, limit {}s", t.as_secs_f64(), limit.as_secs());
    Ok(())
}

fn main() {
    let checks: [(&str, Check); 11] = [
        ("gradient check", gradient_check),
        ("shape chain", shape_chain),
        ("overfit tiny set", overfit),
        ("end to end", end_to_end),
        ("glcm oracle", glcm_oracle),
        ("emd oracle", emd_oracle),
        ("deskew recovery", deskew),
        ("agreement values", agreement),
        ("baselines on blobs", baselines),
        ("determinism", determinism),
        ("class distribution table", distribution_table),
    ];
    let mut failed = 0;
    for (n, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{}] {name} ({detail}; {secs:.1}s)", n + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name} ({detail}; {secs:.1}s)", n + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---- 1. analytic gradients against central differences

const LOG_FLOOR: f64 = 1e-12;

fn is_weight(name: &str) -> bool {
    name.ends_with(".w") || name.ends_with(".w_x") || name.ends_with(".w_h")
}

/// Mean cross-entropy plus L2, computed forward-only.
fn oracle_loss(model: &Model, batch: &[Example], l2: f64) -> f64 {
    let data: f64 = batch
        .iter()
        .map(|ex| -(predict(model, &ex.image, &ex.sequence).unwrap()[ex.label] + LOG_FLOOR).ln())
        .sum::<f64>()
        / batch.len() as f64;
    let reg: f64 =
        model.params.iter().filter(|p| is_weight(&p.name)).flat_map(|p| p.value.data()).map(|w| w * w).sum();
    data + l2 * reg
}

fn gradient_check() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg =
        FusionModelConfig { img_h: 32, img_w: 32, embed_dim: 8, lstm_units: 16, max_len: 6, ..Default::default() }
            .without_dropout();
    let vocab: BTreeMap<String, Vec<f64>> =
        (0..20).map(|i| (format!("w{i}"), (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect())).collect();
    let table = EmbeddingTable::new("tiny", 8, vocab).unwrap();
    let batch: Vec<Example> = (0..3)
        .map(|label| {
            let image =
                Tensor::from_vec(&[32, 32, 3], (0..32 * 32 * 3).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
            let len = rng.gen_range(3..=6);
            let tokens = TokenSequence::new((0..len).map(|_| format!("w{}", rng.gen_range(0..20))).collect());
            Example { image, sequence: embed_sequence(&tokens, &table, cfg.max_len), label }
        })
        .collect();
    let mut model = build_model(ModelKind::Fusion, &cfg, 11).unwrap();
    for p in model.params.iter_mut().filter(|p| !is_weight(&p.name)) {
        p.value.data_mut().iter_mut().for_each(|b| *b = rng.gen_range(-0.1..0.1));
    }
    let l2 = 1e-3;
    let refs: Vec<&Example> = batch.iter().collect();
    let analytic = memeforge_core::nn::loss_and_grads(&model, &refs, l2, None).unwrap();
    let base = oracle_loss(&model, &batch, l2);
    ensure!((analytic.loss - base).abs() < 1e-12, "loss {} differs from oracle {}", analytic.loss, base);

    let eps = 1e-5;
    let (mut worst, mut checked) = (0f64, 0);
    let names: Vec<String> = model.params.iter().map(|p| p.name.clone()).collect();
    for name in &names {
        let len = model.params.get(name).unwrap().len();
        let idx: Vec<usize> = if len <= 25 { (0..len).collect() } else { (0..25).map(|_| rng.gen_range(0..len)).collect() };
        for i in idx {
            let orig = model.params.get(name).unwrap().data()[i];
            model.params.get_mut(name).unwrap().data_mut()[i] = orig + eps;
            let up = oracle_loss(&model, &batch, l2);
            model.params.get_mut(name).unwrap().data_mut()[i] = orig - eps;
            let down = oracle_loss(&model, &batch, l2);
            model.params.get_mut(name).unwrap().data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic.grads.get(name).unwrap().data()[i];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-6);
            ensure!(rel < 1e-4, "{name}[{i}]: analytic {a:e}, numeric {numeric:e}, rel {rel:e}");
            worst = worst.max(rel);
            checked += 1;
        }
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!("{checked} coordinates over {} tensors, max rel err {worst:.2e}", names.len()))
}

// ---- 2. tensor shapes along the default network

fn shape_chain() -> Result<String, String> {
    let cfg = FusionModelConfig::default();
    let g = cnn_geometry(&cfg).unwrap();
    ensure!(g.conv1 == (60, 60) && g.pool1 == (12, 12), "trunk {g:?}");
    ensure!(g.conv2 == (10, 10) && g.pool2 == (3, 3) && g.flatten == 288, "trunk {g:?}");

    let model = build_model(ModelKind::Fusion, &cfg, 0).unwrap();
    let p = |n: &str| model.params.get(n).unwrap();
    let x = Tensor::from_vec(&[64, 64, 3], (0..64 * 64 * 3).map(|i| (i % 255) as f64 / 255.0).collect()).unwrap();
    let c1 = conv2d_forward(&x, p("conv1.w"), p("conv1.b")).unwrap();
    let p1 = maxpool2d(&c1, cfg.pool1).unwrap();
    let c2 = conv2d_forward(&p1, p("conv2.w"), p("conv2.b")).unwrap();
    let p2 = maxpool2d(&c2, cfg.pool2).unwrap();
    let got = [c1.shape(), p1.shape(), c2.shape(), p2.shape()].map(|s| s.to_vec());
    let want = [vec![60, 60, 64], vec![12, 12, 64], vec![10, 10, 32], vec![3, 3, 32]];
    ensure!(got == want, "conv shapes {got:?}");
    for (name, shape) in [
        ("cnn_dense.w", vec![288, 32]),
        ("lstm.w_x", vec![100, 256]),
        ("lstm_dense2.w", vec![64, 32]),
        ("fuse_dense.w", vec![64, 32]),
        ("out.w", vec![32, 3]),
    ] {
        ensure!(p(name).shape() == shape.as_slice(), "{name} has shape {:?}, want {shape:?}", p(name).shape());
    }
    let seq = memeforge_core::SequenceMatrix::zeros(cfg.max_len, cfg.embed_dim);
    let probs = predict(&model, &x, &seq).unwrap();
    ensure!(probs.len() == 3, "{} probabilities", probs.len());
    ensure!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9, "probabilities sum to {}", probs.iter().sum::<f64>());
    Ok("64x64x3 -> 60x60x64 -> 12x12x64 -> 10x10x32 -> 3x3x32 -> 288 -> 32; concat 64 -> 32 -> 3".into())
}

// ---- 3. memorising 24 memes

struct Corpus {
    _dir: tempfile::TempDir,
    manifest: std::path::PathBuf,
    config: std::path::PathBuf,
}

fn corpus(per_class: usize, seed: u64, edit: impl FnOnce(&mut serde_json::Value)) -> Corpus {
    let dir = tempfile::tempdir().unwrap();
    let s = cmd_synth(dir.path(), &SynthConfig { per_class, seed, ..Default::default() }).unwrap();
    let manifest = dir.path().join("manifest.jsonl");
    cmd_ingest(&dir.path().join("images"), &s.labels_csv, &manifest).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&s.config).unwrap()).unwrap();
    edit(&mut v);
    std::fs::write(&s.config, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    let summary = cmd_ocr(&manifest, &RunConfig::load(&s.config).unwrap(), None, None).unwrap();
    assert_eq!(summary.filled, per_class * 3);
    Corpus { _dir: dir, manifest, config: s.config }
}

fn params_bytes(model: &Model) -> Vec<u8> {
    checkpoint_to_bytes(&Checkpoint { model: model.clone(), meta: serde_json::Value::Null })
}

fn overfit() -> Result<String, String> {
    let start = Instant::now();
    let c = corpus(8, 3, |_| {});
    let cfg = RunConfig::load(&c.config).unwrap();
    let manifest = Manifest::load(&c.manifest).unwrap();
    let set = cfg.embedding_variants()[0].clone();
    let table = cfg.load_embedding_set(&set).unwrap();
    let lex = cfg.lexicon().unwrap();
    let m = model_config(&cfg, ModelKind::Fusion, Some(&table)).unwrap();
    let data = prepare_examples(&manifest, ModelKind::Fusion, &m, &cfg.ocr_preprocess, Some((&lex, &table))).unwrap();
    ensure!(data.len() == 24, "{} examples", data.len());

    let run = |epochs: Option<usize>| {
        let model = build_model(ModelKind::Fusion, &m, derive_seed(cfg.seed, 1)).unwrap();
        let tcfg = memeforge_core::TrainConfig { seed: derive_seed(cfg.seed, 2), ..cfg.train.clone() };
        let mut t = Trainer::new(model, tcfg).unwrap();
        let mut acc = 0.0;
        for _ in 0..epochs.unwrap_or(300) {
            t.run_epoch(&data).unwrap();
            acc = accuracy(t.model(), &data).unwrap();
            if epochs.is_none() && acc >= 0.95 {
                break;
            }
        }
        (t.history().len(), acc, params_bytes(t.model()))
    };
    let (epochs, acc, first) = run(None);
    ensure!(acc >= 0.95, "accuracy {acc:.3} after {epochs} epochs");
    let (_, acc2, second) = run(Some(epochs));
    ensure!(first == second && acc == acc2, "rerun of {epochs} epochs gave different parameters");
    within(start, Duration::from_secs(300))?;
    Ok(format!("accuracy {acc:.3} after {epochs} epochs, rerun identical"))
}

// ---- 4. synth -> ingest -> ocr -> train -> eval

fn schema_check(json: &str) -> Result<(), String> {
    let schema: serde_json::Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
    let v: serde_json::Value = serde_json::from_str(json).unwrap();
    let validator = jsonschema::validator_for(&schema).map_err(|e| e.to_string())?;
    let errors: Vec<String> = validator.iter_errors(&v).map(|e| e.to_string()).collect();
    ensure!(errors.is_empty(), "schema: {}", errors.join("; "));
    Ok(())
}

fn metrics_in_unit(v: &serde_json::Value, bad: &mut Vec<f64>) {
    match v {
        serde_json::Value::Object(o) => {
            for (k, x) in o {
                match (k.as_str(), x.as_f64()) {
                    ("precision" | "recall" | "f1" | "accuracy", Some(f)) if !(0.0..=1.0).contains(&f) => bad.push(f),
                    _ => metrics_in_unit(x, bad),
                }
            }
        }
        serde_json::Value::Array(a) => a.iter().for_each(|x| metrics_in_unit(x, bad)),
        _ => {}
    }
}

fn end_to_end() -> Result<String, String> {
    let start = Instant::now();
    let c = corpus(10, 5, |_| {});
    let cfg = RunConfig::load(&c.config).unwrap();
    let out = c.manifest.parent().unwrap();
    let t = cmd_train(&c.manifest, &cfg, ModelKind::Fusion, None, &out.join("model.ckpt")).unwrap();
    ensure!(t.checkpoint.exists() && history_path(&t.checkpoint).exists(), "checkpoint or history missing");
    let report = cmd_eval(&c.manifest, &cfg, EvalKind::Fusion, &[], Some(3), &out.join("eval")).unwrap();
    let json = std::fs::read_to_string(out.join("eval/report.json")).unwrap();
    schema_check(&json)?;
    let mut bad = Vec::new();
    metrics_in_unit(&serde_json::from_str(&json).unwrap(), &mut bad);
    ensure!(bad.is_empty(), "metrics outside [0,1]: {bad:?}");
    let rows: Vec<&str> = report.entries.iter().map(|e| e.name.as_str()).collect();
    ensure!(rows == cfg.embedding_variants(), "rows {rows:?}");
    let text = std::fs::read_to_string(out.join("eval/report.txt")).unwrap();
    ensure!(text.contains("Precision") && text.contains("F1-Score"), "text report lacks the metric header");
    within(start, Duration::from_secs(600))?;
    let f1: Vec<String> = report.entries.iter().map(|e| format!("{} F1 {:.3}", e.name, e.pooled.f1)).collect();
    Ok(format!("30 memes, 3 folds, {}", f1.join(", ")))
}

// ---- 5. GLCM against direct pair enumeration

fn glcm_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..200 {
        let (w, h) = (rng.gen_range(2..=8), rng.gen_range(2..=8));
        let levels = [2usize, 4, 8][rng.gen_range(0..3)];
        let px: Vec<u8> = (0..w * h).map(|_| rng.gen()).collect();
        let img = ImageGray::new(w, h, px.clone()).unwrap();
        let width = 256 / levels;
        let q = |x: usize, y: usize| px[y * w + x] as usize / width;
        let mut counts = vec![0u64; levels * levels];
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                for dy in -1..=1i64 {
                    for dx in -1..=1i64 {
                        let (nx, ny) = (x + dx, y + dy);
                        if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        counts[q(x as usize, y as usize) * levels + q(nx as usize, ny as usize)] += 1;
                    }
                }
            }
        }
        let total: u64 = counts.iter().sum();
        let g = compute_glcm(&img, levels).unwrap();
        for i in 0..levels {
            for j in 0..levels {
                let want = counts[i * levels + j] as f64 / total as f64;
                ensure!(g.get(i, j) == want, "trial {trial} ({w}x{h}, {levels} levels): P[{i}][{j}] {} != {want}", g.get(i, j));
            }
        }
    }
    Ok("200 random images, exact match".into())
}

// ---- 6. EMD against spanning-tree basis enumeration

fn center(k: usize) -> [f64; 3] {
    [k / 16, (k / 4) % 4, k % 4].map(|v| (v as f64 + 0.5) / 4.0)
}

fn ground(a: usize, b: usize) -> f64 {
    let (p, q) = (center(a), center(b));
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
}

/// Flows on a candidate basis by repeatedly settling rows or columns with a
/// single unsettled cell. `None` if the cells do not form a spanning tree or
/// a flow is negative.
fn basis_flows(s: &[f64], d: &[f64], cells: &[(usize, usize)]) -> Option<Vec<f64>> {
    let (mut s, mut d) = (s.to_vec(), d.to_vec());
    let mut flow = vec![f64::NAN; cells.len()];
    let mut left = cells.len();
    while left > 0 {
        let mut progressed = false;
        for side in 0..2 {
            let n = if side == 0 { s.len() } else { d.len() };
            for line in 0..n {
                let open: Vec<usize> = (0..cells.len())
                    .filter(|&c| flow[c].is_nan() && if side == 0 { cells[c].0 == line } else { cells[c].1 == line })
                    .collect();
                if open.len() != 1 {
                    continue;
                }
                let c = open[0];
                let (i, j) = cells[c];
                let f = if side == 0 { s[i] } else { d[j] };
                flow[c] = f;
                s[i] -= f;
                d[j] -= f;
                left -= 1;
                progressed = true;
            }
        }
        if !progressed {
            return None;
        }
    }
    let tidy = s.iter().chain(&d).all(|r| r.abs() < 1e-12);
    (tidy && flow.iter().all(|&f| f >= -1e-12)).then_some(flow)
}

fn oracle_emd(s: &[f64], d: &[f64], cost: impl Fn(usize, usize) -> f64) -> f64 {
    let all: Vec<(usize, usize)> = (0..s.len()).flat_map(|i| (0..d.len()).map(move |j| (i, j))).collect();
    let size = s.len() + d.len() - 1;
    let mut best = f64::INFINITY;
    let mut pick = Vec::with_capacity(size);
    fn walk(
        all: &[(usize, usize)],
        from: usize,
        size: usize,
        pick: &mut Vec<(usize, usize)>,
        visit: &mut dyn FnMut(&[(usize, usize)]),
    ) {
        if pick.len() == size {
            visit(pick);
            return;
        }
        for k in from..all.len() {
            pick.push(all[k]);
            walk(all, k + 1, size, pick, visit);
            pick.pop();
        }
    }
    walk(&all, 0, size, &mut pick, &mut |cells| {
        if let Some(flow) = basis_flows(s, d, cells) {
            let c: f64 = cells.iter().zip(&flow).map(|(&(i, j), f)| f * cost(i, j)).sum();
            best = best.min(c);
        }
    });
    best
}

fn random_histogram(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut h = vec![0.0; 64];
    let active = rng.gen_range(1..=4);
    for _ in 0..active {
        h[rng.gen_range(0..64)] += rng.gen_range(0.05..1.0);
    }
    let total: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= total);
    h
}

fn emd_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0f64;
    for trial in 0..100 {
        let (a, b) = (random_histogram(&mut rng), random_histogram(&mut rng));
        let ia: Vec<usize> = (0..64).filter(|&k| a[k] > 0.0).collect();
        let ib: Vec<usize> = (0..64).filter(|&k| b[k] > 0.0).collect();
        let s: Vec<f64> = ia.iter().map(|&k| a[k]).collect();
        let d: Vec<f64> = ib.iter().map(|&k| b[k]).collect();
        let want = oracle_emd(&s, &d, |i, j| ground(ia[i], ib[j]));
        let got = emd(&a, &b, ground);
        ensure!((got - want).abs() <= 1e-9, "trial {trial}: emd {got} vs oracle {want}");
        worst = worst.max((got - want).abs());
    }
    let mut img = ImageRgb::filled(8, 8, [0, 0, 0]);
    for k in 0..64 {
        let (r, g, b) = (k / 16, (k / 4) % 4, k % 4);
        img.put_pixel(k % 8, k / 8, [(r * 64 + 10) as u8, (g * 64 + 20) as u8, (b * 64 + 30) as u8]);
    }
    let c = colorfulness(&img);
    ensure!(c == 0.0, "bin-uniform image has colourfulness {c}");
    Ok(format!("100 random pairs, max abs diff {worst:.1e}; bin-uniform colourfulness 0"))
}

// ---- 7. deskew

fn deskew() -> Result<String, String> {
    let stripes = ImageGray::from_fn(160, 160, |_, y| if y % 12 < 6 { 0 } else { 255 });
    let mut worst = 0f64;
    for theta in [-10.0, -5.0, -1.0, 0.0, 1.0, 5.0, 10.0] {
        let est = estimate_skew(&rotate(&stripes, theta));
        let err = (est.angle - theta).abs();
        ensure!(err <= 0.5, "rotated by {theta}: estimated {}", est.angle);
        worst = worst.max(err);
    }
    Ok(format!("7 angles, max error {worst:.2} deg"))
}

// ---- 8. agreement statistics

fn agreement() -> Result<String, String> {
    let zero = cohen_kappa(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
    ensure!(zero.abs() < 1e-12, "balanced disagreement kappa {zero}");
    let one = cohen_kappa(&[0, 1, 2, 2, 1, 0], &[0, 1, 2, 2, 1, 0]).unwrap();
    ensure!((one - 1.0).abs() < 1e-12, "perfect agreement kappa {one}");
    let perfect = AgreementTable::new(3, vec![vec![0, 0, 0], vec![1, 1, 1], vec![2, 2, 2], vec![1, 1, 1]]).unwrap();
    let pf = fleiss_kappa(&perfect).kappa;
    ensure!((pf - 1.0).abs() < 1e-12, "perfect agreement Fleiss kappa {pf}");
    let rows = vec![
        vec![0, 0, 0],
        vec![0, 0, 1],
        vec![1, 1, 1],
        vec![1, 1, 2],
        vec![2, 2, 2],
        vec![0, 1, 2],
        vec![0, 0, 0],
        vec![2, 2, 1],
        vec![1, 1, 1],
        vec![0, 2, 2],
    ];
    let fk = fleiss_kappa(&AgreementTable::new(3, rows).unwrap()).kappa;
    ensure!((fk - 268.0 / 598.0).abs() < 1e-9, "Fleiss kappa {fk}, want {}", 268.0 / 598.0);
    let m = m_index(&[50, 50]).unwrap();
    ensure!(m == 1.0, "M-index of an even split {m}");
    Ok(format!("Cohen 0 and 1, Fleiss {fk:.6} (268/598), M-index {m}"))
}

// ---- 9. SVM and random forest on separable blobs

fn baselines() -> Result<String, String> {
    let start = Instant::now();
    let h = 6.0 * 3f64.sqrt() / 2.0;
    let centers = vec![vec![0.0, 0.0], vec![6.0, 0.0], vec![3.0, h]];
    let (x, y) = gaussian_blobs(&centers, 100, 1.0, 9);
    let (x, _) = standardize(&x).unwrap();
    let svm = memeforge_core::SvmConfig::default();
    let rf = memeforge_core::RfConfig::default();
    ensure!(svm.kernel_degree == 3 && rf.n_estimators == 600 && rf.max_depth == 12, "defaults {svm:?} {rf:?}");
    let take = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) { idx.iter().map(|&i| (x[i].clone(), y[i])).unzip() };
    let s = cross_validate(&y, 3, 10, 1, |train, test, _| {
        let (tx, ty) = take(train);
        let m = svm_train(&tx, &ty, &svm)?;
        test.iter().map(|&i| svm_predict(&m, &x[i])).collect::<Result<Vec<_>, _>>()
    })
    .unwrap();
    let r = cross_validate(&y, 3, 10, 1, |train, test, seed| {
        let (tx, ty) = take(train);
        let m = rf_train(&tx, &ty, &memeforge_core::RfConfig { seed, ..rf.clone() })?;
        test.iter().map(|&i| rf_predict(&m, &x[i])).collect::<Result<Vec<_>, _>>()
    })
    .unwrap();
    let (sa, ra) = (s.pooled.accuracy, r.pooled.accuracy);
    ensure!(sa >= 0.9 && ra >= 0.9, "accuracy svm {sa:.3}, rf {ra:.3}");
    within(start, Duration::from_secs(120))?;
    Ok(format!("10-fold accuracy svm {sa:.3}, rf {ra:.3}"))
}

// ---- 10. repeated runs are byte-identical

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn determinism() -> Result<String, String> {
    let c = corpus(4, 8, |v| v["train"]["epochs"] = 5.into());
    let cfg = RunConfig::load(&c.config).unwrap();
    let dir = c.manifest.parent().unwrap();
    for run in ["a", "b"] {
        cmd_train(&c.manifest, &cfg, ModelKind::Fusion, None, &dir.join(run).join("model.ckpt")).unwrap();
        cmd_eval(&c.manifest, &cfg, EvalKind::Fusion, &[], Some(3), &dir.join(run).join("fusion")).unwrap();
        for kind in [EvalKind::Svm, EvalKind::Rf] {
            let name = format!("{kind:?}");
            cmd_eval(&c.manifest, &cfg, kind, &FeatureFamily::ALL, Some(3), &dir.join(run).join(name)).unwrap();
        }
    }
    let files = [
        "model.ckpt",
        "model.history.csv",
        "fusion/report.json",
        "fusion/report.txt",
        "fusion/predictions.csv",
        "Svm/report.json",
        "Svm/predictions.csv",
        "Rf/report.json",
        "Rf/predictions.csv",
    ];
    for f in files {
        ensure!(read(&dir.join("a").join(f)) == read(&dir.join("b").join(f)), "{f} differs between runs");
    }
    Ok(format!("{} artefacts byte-identical", files.len()))
}

// ---- 11. class distribution table

fn distribution_table() -> Result<String, String> {
    let dir = tempfile::tempdir().unwrap();
    let classes = [(MemeClass::Satirical, 452), (MemeClass::NonOffensive, 339), (MemeClass::HateInducing, 427)];
    let mut records = Vec::new();
    for i in 0..452 {
        for &(class, n) in &classes {
            if i < n {
                let mut r = ManifestRecord::new(format!("{}_{i}", class.as_str()), format!("{i}.png"));
                r.label = Some(class);
                records.push(r);
            }
        }
    }
    let manifest = Manifest { dir: dir.path().to_path_buf(), records };
    let path = dir.path().join("manifest.jsonl");
    manifest.save(&path).unwrap();
    let text = cmd_report(&path, &memeforge_cli::config::builtin_lexicon()).unwrap().to_text();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .filter_map(|l| {
            let (name, count) = l.trim().rsplit_once(char::is_whitespace)?;
            count.parse::<u64>().ok().map(|_| vec![name.trim(), count])
        })
        .collect();
    let want = [["Non-Offensive", "339"], ["Hate-Inducing", "427"], ["Satirical", "452"], ["Total", "1218"]];
    ensure!(rows.len() >= 4, "table rows {rows:?}");
    for (got, want) in rows.iter().zip(&want) {
        ensure!(got.as_slice() == want, "row {got:?}, want {want:?}");
    }
    Ok("339 / 427 / 452, total 1218".into())
}
