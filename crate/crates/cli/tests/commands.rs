mod common;

use std::path::Path;

use memeforge_cli::{
    cmd_eval, cmd_features, cmd_ingest, cmd_ocr, cmd_predict, cmd_report, cmd_train, corpus_report, history_path,
    CaptionInput, CliError, EvalKind, Layout, Manifest, ManifestRecord, RunConfig,
};
use memeforge_core::nn::{build_model, load_checkpoint};
use memeforge_core::ocr_client::OcrMode;
use memeforge_core::{derive_seed, FeatureFamily, ImageRgb, MemeClass, ModelKind};

fn write_png(path: &Path, rgb: [u8; 3]) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, ImageRgb::filled(40, 40, rgb).encode_png()).unwrap();
}

fn three_images(dir: &Path) {
    write_png(&dir.join("img/a.png"), [200, 10, 10]);
    write_png(&dir.join("img/b.png"), [10, 200, 10]);
    write_png(&dir.join("img/c.png"), [10, 10, 200]);
}

#[test]
fn ingest_writes_one_record_per_row() {
    let dir = tempfile::tempdir().unwrap();
    three_images(dir.path());
    let csv = dir.path().join("labels.csv");
    std::fs::write(&csv, "id,path,label\na,a.png,hate_inducing\nb,b.png,Satirical\nc,c.png,non-offensive\n").unwrap();
    let out = dir.path().join("m.jsonl");
    let m = cmd_ingest(&dir.path().join("img"), &csv, &out).unwrap();
    assert_eq!(m.records.len(), 3);

    let back = Manifest::load(&out).unwrap();
    let labels: Vec<_> = back.records.iter().map(|r| (r.id.as_str(), r.label.unwrap())).collect();
    assert_eq!(labels, [("a", MemeClass::HateInducing), ("b", MemeClass::Satirical), ("c", MemeClass::NonOffensive)]);
    assert_eq!(back.records[0].image_path, Path::new("img/a.png"));
    assert!(back.image_path(&back.records[2]).is_file());
}

#[test]
fn ingest_rejects_bad_rows() {
    let dir = tempfile::tempdir().unwrap();
    three_images(dir.path());
    let img = dir.path().join("img");
    let out = dir.path().join("m.jsonl");
    let run = |csv: &str| {
        let path = dir.path().join("labels.csv");
        std::fs::write(&path, csv).unwrap();
        cmd_ingest(&img, &path, &out).unwrap_err()
    };
    match run("a,a.png,satirical\nb,b.png,funny\n") {
        CliError::UnknownLabel { row: 2, label } => assert_eq!(label, "funny"),
        e => panic!("{e:?}"),
    }
    assert!(matches!(run("a,a.png,satirical\na,b.png,satirical\n"), CliError::DuplicateId { row: 2, .. }));
    assert!(matches!(run("a,zzz.png,satirical\n"), CliError::MissingImage { row: 1, .. }));
    assert!(matches!(run("a,a.png,satirical,satirical,funny,satirical\n"), CliError::UnknownLabel { row: 1, .. }));
    assert_eq!(run("a,a.png\n").exit_code(), 2);
}

fn manifest_of(dir: &Path, ids: &[&str]) -> std::path::PathBuf {
    let mut records = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        let p = dir.join(format!("{id}.png"));
        write_png(&p, [40 * i as u8, 90, 90]);
        records.push(ManifestRecord { label: Some(MemeClass::ALL[i % 3]), ..ManifestRecord::new(*id, format!("{id}.png")) });
    }
    let path = dir.join("m.jsonl");
    Manifest { dir: dir.to_path_buf(), records }.save(&path).unwrap();
    path
}

#[test]
fn offline_ocr_flags_missing_ids_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = manifest_of(dir.path(), &["m1", "m2", "m3"]);
    let captions = dir.path().join("c.jsonl");
    std::fs::write(&captions, "{\"id\":\"m1\",\"text\":\"kab milega\"}\n{\"id\":\"m3\",\"text\":\"nafrat\"}\n").unwrap();
    let s = cmd_ocr(&manifest, &RunConfig::default(), Some(&captions), None).unwrap();
    assert_eq!((s.records, s.filled), (3, 2));
    assert_eq!(s.warnings.len(), 1);
    assert_eq!(s.warnings[0].0, "m2");
    let m = Manifest::load(&manifest).unwrap();
    assert_eq!(m.records[0].caption_raw.as_deref(), Some("kab milega"));
    assert!(m.records[1].caption_raw.is_none() && m.records[1].ocr_warning.is_some());
}

#[test]
fn remote_ocr_against_dead_endpoint_flags_every_record() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = manifest_of(dir.path(), &["m1", "m2"]);
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut cfg = RunConfig::default();
    cfg.ocr.mode = OcrMode::Remote;
    cfg.ocr.endpoint = format!("http://127.0.0.1:{port}/parse");
    cfg.ocr.max_retries = 2;
    cfg.ocr.backoff_base = 0.01;
    cfg.ocr.timeout = 2.0;
    let s = cmd_ocr(&manifest, &cfg, None, None).unwrap();
    assert_eq!(s.filled, 0);
    assert_eq!(s.warnings.len(), 2);
    assert!(s.warnings.iter().all(|(_, w)| w.contains("timed out after 2")), "{:?}", s.warnings);
}

#[test]
fn ocr_fails_only_on_unreadable_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let err = cmd_ocr(&dir.path().join("none.jsonl"), &RunConfig::default(), None, None).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn feature_csv_columns_and_skips() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = manifest_of(dir.path(), &["m1", "m2", "m3"]);
    std::fs::write(dir.path().join("m3.png"), b"not a png").unwrap();
    std::fs::write(dir.path().join("m2.faces.json"), r#"[{"x":1,"y":1,"w":10,"h":20}]"#).unwrap();
    let out = dir.path().join("f.csv");

    let t = cmd_features(&manifest, &[FeatureFamily::Glcm], &out).unwrap();
    assert_eq!(t.columns.len(), 4);
    assert_eq!(t.skipped.len(), 1);

    let t = cmd_features(&manifest, &FeatureFamily::ALL, &out).unwrap();
    assert_eq!(t.columns.len(), 9);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("id,contrast,"));
    assert!(lines[1].starts_with("m1,") && lines[1].ends_with(",0,0"));
    assert!(lines[2].ends_with(&format!(",1,{}", 200.0 / 1600.0)));
}

#[test]
fn zero_epochs_saves_the_initial_weights() {
    let c = common::corpus(2, 5, 0);
    let mut cfg = c.run_config();
    cfg.seed = 9;
    let out = c.path().join("out/model.ckpt");
    let s = cmd_train(&c.manifest, &cfg, ModelKind::Fusion, None, &out).unwrap();
    assert_eq!(s.epochs, 0);
    assert_eq!(std::fs::read_to_string(history_path(&out)).unwrap(), "epoch,loss,accuracy\n");
    let ckpt = load_checkpoint(&out, Some(ModelKind::Fusion)).unwrap();
    let fresh = build_model(ModelKind::Fusion, &ckpt.model.config, derive_seed(9, 1)).unwrap();
    assert_eq!(ckpt.model, fresh);
    assert_eq!(ckpt.model.config.embed_dim, 16);
}

#[test]
fn lstm_without_embeddings_is_a_config_error() {
    let c = common::corpus(1, 1, 1);
    let cfg = RunConfig { embeddings: Default::default(), embedding_sets: vec![], ..c.run_config() };
    let err = cmd_train(&c.manifest, &cfg, ModelKind::LstmOnly, None, &c.path().join("x.ckpt")).unwrap_err();
    assert!(matches!(err, CliError::Config(_)), "{err:?}");
    assert!(!c.path().join("x.ckpt").exists());
}

#[test]
fn baseline_eval_shapes() {
    let c = common::corpus(4, 2, 1);
    let cfg = c.run_config();
    let out = c.path().join("rep");
    let r = cmd_eval(&c.manifest, &cfg, EvalKind::Svm, &[FeatureFamily::Glcm], Some(3), &out).unwrap();
    assert_eq!(r.layout, Layout::Baselines);
    assert_eq!(r.entries.len(), 1);
    assert_eq!(r.entries[0].folds.len(), 3);
    assert_eq!(r.entries[0].confusion.iter().flatten().sum::<u64>(), 12);
    for f in ["report.json", "report.txt", "predictions.csv"] {
        assert!(out.join(f).is_file());
    }

    let err = cmd_eval(&c.manifest, &cfg, EvalKind::Rf, &[], Some(5), &out).unwrap_err();
    assert!(err.to_string().contains("too few items"), "{err}");
}

fn schema_validator() -> jsonschema::Validator {
    let schema: serde_json::Value = serde_json::from_str(memeforge_cli::REPORT_SCHEMA).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

#[test]
fn fusion_eval_has_one_row_per_embedding_set_and_matches_its_text() {
    let c = common::corpus(3, 4, 3);
    let cfg = c.run_config();
    let out = c.path().join("rep");
    let r = cmd_eval(&c.manifest, &cfg, EvalKind::Fusion, &[], Some(3), &out).unwrap();
    let names: Vec<&str> = r.entries.iter().map(|e| e.name.as_str()).collect();
    assert_eq!(names, ["glove", "glove+fasttext"]);

    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let v = schema_validator();
    assert!(v.is_valid(&json), "{:?}", v.iter_errors(&json).map(|e| e.to_string()).collect::<Vec<_>>());

    // The embeddings table in the text file carries the JSON numbers.
    let text = std::fs::read_to_string(out.join("report.txt")).unwrap();
    for e in &json["entries"].as_array().unwrap()[..] {
        let name = e["name"].as_str().unwrap();
        let line = text.lines().find(|l| l.split_whitespace().next() == Some(name)).unwrap();
        let nums: Vec<f64> = line.split_whitespace().skip(1).map(|x| x.parse().unwrap()).collect();
        let p = &e["pooled"];
        assert_eq!(nums, [p["precision"].as_f64().unwrap(), p["recall"].as_f64().unwrap(), p["f1"].as_f64().unwrap()]);
    }

    let mut bad = json.clone();
    bad["entries"][0]["pooled"]["f1"] = 1.5.into();
    assert!(!v.is_valid(&bad));
}

#[test]
fn predict_outputs_a_distribution() {
    let c = common::corpus(2, 6, 2);
    let cfg = c.run_config();
    let ckpt = c.path().join("model.ckpt");
    cmd_train(&c.manifest, &cfg, ModelKind::Fusion, Some("glove+fasttext"), &ckpt).unwrap();
    let image = c.path().join("images/meme_0001.png");

    let p = cmd_predict(&ckpt, &image, Some(CaptionInput::Text("neta ka vaada :)")), &cfg).unwrap();
    assert_eq!(p.probabilities.len(), 3);
    assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    let best = (0..3).max_by(|&a, &b| p.probabilities[a].total_cmp(&p.probabilities[b])).unwrap();
    assert_eq!(p.label, MemeClass::ALL[best]);

    let via_ocr = cmd_predict(&ckpt, &image, Some(CaptionInput::Ocr), &cfg).unwrap();
    let m = Manifest::load(&c.manifest).unwrap();
    assert_eq!(via_ocr.caption, m.records[1].caption_raw);

    let missing = cmd_predict(&ckpt, &c.path().join("nope.png"), Some(CaptionInput::Text("x")), &cfg).unwrap_err();
    assert!(missing.to_string().contains("malformed image") && missing.to_string().contains("nope.png"), "{missing}");
    assert!(matches!(cmd_predict(&ckpt, &image, None, &cfg), Err(CliError::Usage(_))));

    std::fs::write(&ckpt, b"MEMEFORGE-CKPT\nbroken").unwrap();
    let corrupt = cmd_predict(&ckpt, &image, Some(CaptionInput::Text("x")), &cfg).unwrap_err();
    assert!(corrupt.to_string().contains("corrupt checkpoint"), "{corrupt}");
}

#[test]
fn report_sections() {
    let lex = memeforge_cli::config::builtin_lexicon();
    let dir = Path::new("/data");
    let mut records = Vec::new();
    for (i, class) in [MemeClass::Satirical, MemeClass::HateInducing, MemeClass::Satirical, MemeClass::NonOffensive]
        .into_iter()
        .enumerate()
    {
        records.push(ManifestRecord {
            label: Some(class),
            annotator_labels: Some(vec![class; 3]),
            caption_raw: Some("food party with friends".into()),
            ..ManifestRecord::new(format!("m{i}"), "x.png")
        });
    }
    let m = Manifest { dir: dir.to_path_buf(), records };
    let r = corpus_report(&m, &lex).unwrap();
    let a = r.agreement.as_ref().unwrap();
    assert!(a.cohen.iter().flatten().all(|&k| k == 1.0));
    assert_eq!(a.fleiss, 1.0);
    assert_eq!(r.multilingual.as_ref().unwrap().m_index, 0.0);

    let bare = Manifest {
        dir: dir.to_path_buf(),
        records: m.records.iter().map(|r| ManifestRecord { label: r.label, ..ManifestRecord::new(r.id.clone(), "x.png") }).collect(),
    };
    let r = corpus_report(&bare, &lex).unwrap();
    assert!(r.agreement.is_none() && r.multilingual.is_none());
    let text = r.to_text();
    assert!(!text.contains("kappa") && text.contains("Total                  4"), "{text}");
}

#[test]
fn report_reads_a_manifest_file() {
    let c = common::corpus(2, 3, 0);
    let r = cmd_report(&c.manifest, &memeforge_cli::config::builtin_lexicon()).unwrap();
    assert_eq!(r.total, 6);
    assert!(r.agreement.is_some());
    let m = r.multilingual.unwrap();
    assert!(m.hindi_tokens > 0 && m.english_tokens > 0 && (0.0..=1.0).contains(&m.m_index));
}
