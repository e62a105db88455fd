//! End-to-end runs of the owsm-kit binary against generated fixtures.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use owsm_kit::decoder::{write_lattice_json, write_table_scorer, LogProbLattice};
use owsm_kit::longform::scenario::{chunk_to_json, script_chunk, Scenario, ScenarioChunk, ScenarioVocab};
use owsm_kit::token_format::Vocabulary;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_owsm-kit"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let output = cmd.output().expect("spawn owsm-kit");
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn strs(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn char_pieces(corpus: &str) -> Vec<String> {
    let mut chars: Vec<String> = corpus.chars().map(String::from).collect();
    chars.sort();
    chars.dedup();
    chars
}

fn write(path: &Path, contents: &str) {
    std::fs::write(path, contents).unwrap();
}

fn test_vocab_file(dir: &Path, corpus: &str) -> (PathBuf, Vocabulary) {
    let vocab = Vocabulary::build(&char_pieces(corpus), &strs(&["en"]), &[]).unwrap();
    let path = dir.join("vocab.txt");
    vocab.write_to_file(&path).unwrap();
    (path, vocab)
}

#[test]
fn prepare_is_deterministic_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (vocab_path, _) = test_vocab_file(dir.path(), "abcdef");

    let manifest = dir.path().join("manifest.jsonl");
    write(
        &manifest,
        concat!(
            r#"{"talk_id":"T","start":0.0,"end":9.0,"text":"a","language":"en"}"#, "\n",
            r#"{"talk_id":"T","start":9.5,"end":20.0,"text":"b","language":"en"}"#, "\n",
            r#"{"talk_id":"T","start":20.5,"end":31.0,"text":"c","language":"en"}"#, "\n",
            r#"{"talk_id":"U","start":0.0,"end":40.0,"text":"d","language":"en"}"#, "\n",
            r#"{"talk_id":"U","start":41.0,"end":50.0,"text":"e","language":"en"}"#, "\n",
            r#"{"talk_id":"V","start":0.0,"end":8.0,"text":"f","language":"en"}"#, "\n",
        ),
    );

    let out_a = dir.path().join("shards-a");
    let out_b = dir.path().join("shards-b");
    let report_path = dir.path().join("report.json");
    let validation_path = dir.path().join("validation.jsonl");
    let run = |out_dir: &Path, report: Option<&Path>| {
        let mut cmd = bin();
        cmd.args(["prepare", "--manifest"])
            .arg(&manifest)
            .arg("--vocab")
            .arg(&vocab_path)
            .arg("--out-dir")
            .arg(out_dir)
            .args(["--n-shards", "5", "--seed", "7"])
            .arg("--validation-out")
            .arg(&validation_path)
            .args(["--validation-fraction", "0.5"]);
        if let Some(report) = report {
            cmd.arg("--report").arg(report);
        }
        run_ok(&mut cmd)
    };
    run(&out_a, Some(&report_path));
    run(&out_b, None);

    // ceil(0.5 * 5 kept samples) = 3 validation lines.
    let validation = std::fs::read_to_string(&validation_path).unwrap();
    assert_eq!(validation.lines().count(), 3);

    // Five shard files, byte-identical across reruns.
    for shard in 0..5 {
        let name = format!("shard-{shard:03}.jsonl");
        let a = std::fs::read(out_a.join(&name)).unwrap();
        let b = std::fs::read(out_b.join(&name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["input_segments"], 6);
    // T groups into [a,b] + [c]; U into [d(oversized)] + [e]; V into [f].
    assert_eq!(report["samples_built"], 5);
    assert_eq!(report["kept"], 5);
    assert_eq!(report["oversized"], 1);
    let sizes: Vec<u64> = report["shard_sizes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(sizes.iter().sum::<u64>(), 5);
    assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);

    // Shard lines carry the encoded ids.
    let first_shard = std::fs::read_to_string(out_a.join("shard-000.jsonl")).unwrap();
    let line: serde_json::Value = serde_json::from_str(first_shard.lines().next().unwrap()).unwrap();
    assert!(line["token_ids"].as_array().unwrap().len() >= 4);
}

#[test]
fn prepare_parallel_matches_serial() {
    let dir = tempfile::tempdir().unwrap();
    let (vocab_path, _) = test_vocab_file(dir.path(), "xyz");
    let manifest = dir.path().join("manifest.jsonl");
    let mut lines = String::new();
    for talk in 0..6 {
        for i in 0..8 {
            let start = i as f64 * 7.0;
            lines.push_str(&format!(
                "{{\"talk_id\":\"t{talk}\",\"start\":{start},\"end\":{},\"text\":\"xyz\",\"language\":\"en\"}}\n",
                start + 6.0
            ));
        }
    }
    write(&manifest, &lines);

    let run = |out: &Path, jobs: &str| {
        run_ok(
            bin()
                .args(["prepare", "--manifest"])
                .arg(&manifest)
                .arg("--vocab")
                .arg(&vocab_path)
                .arg("--out-dir")
                .arg(out)
                .args(["--n-shards", "5", "--jobs", jobs, "--report"])
                .arg(out.join("report.json")),
        );
    };
    let serial = dir.path().join("serial");
    let parallel = dir.path().join("parallel");
    run(&serial, "1");
    run(&parallel, "4");
    for shard in 0..5 {
        let name = format!("shard-{shard:03}.jsonl");
        assert_eq!(
            std::fs::read(serial.join(&name)).unwrap(),
            std::fs::read(parallel.join(&name)).unwrap(),
            "{name} differs between serial and parallel runs"
        );
    }
}

#[test]
fn prepare_prompt_previous_chains_samples() {
    let dir = tempfile::tempdir().unwrap();
    let (vocab_path, _) = test_vocab_file(dir.path(), "abc");
    let manifest = dir.path().join("manifest.jsonl");
    write(
        &manifest,
        concat!(
            r#"{"talk_id":"T","start":0.0,"end":20.0,"text":"aa","language":"en"}"#, "\n",
            r#"{"talk_id":"T","start":35.0,"end":55.0,"text":"bb","language":"en"}"#, "\n",
            r#"{"talk_id":"U","start":0.0,"end":20.0,"text":"cc","language":"en"}"#, "\n",
        ),
    );
    let out = dir.path().join("out");
    run_ok(
        bin()
            .args(["prepare", "--manifest"])
            .arg(&manifest)
            .arg("--vocab")
            .arg(&vocab_path)
            .arg("--out-dir")
            .arg(&out)
            .args(["--n-shards", "3", "--prompt-previous", "--report"])
            .arg(out.join("report.json")),
    );
    let mut prompts: Vec<(String, Option<String>)> = Vec::new();
    for shard in 0..3 {
        let text = std::fs::read_to_string(out.join(format!("shard-{shard:03}.jsonl"))).unwrap();
        for line in text.lines() {
            let value: serde_json::Value = serde_json::from_str(line).unwrap();
            prompts.push((
                value["id"].as_str().unwrap().to_string(),
                value["record"]["prompt"].as_str().map(String::from),
            ));
        }
    }
    prompts.sort();
    // First sample of each talk has no prompt; followers carry the
    // previous window's text.
    assert_eq!(
        prompts,
        vec![
            ("T-0000".to_string(), None),
            ("T-0001".to_string(), Some("aa".to_string())),
            ("U-0000".to_string(), None),
        ]
    );
}

#[test]
fn bpe_train_vocab_build_tokenize_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    write(&corpus, "the cat sat\nthe bat sat\nthe cat ate\n");

    let model_path = dir.path().join("model.bpe");
    run_ok(
        bin()
            .args(["bpe-train", "--input"])
            .arg(&corpus)
            .args(["--vocab-size", "14", "-o"])
            .arg(&model_path),
    );

    let vocab_path = dir.path().join("vocab.txt");
    run_ok(
        bin()
            .args(["vocab-build", "--bpe-model"])
            .arg(&model_path)
            .args(["--languages", "en,de", "-o"])
            .arg(&vocab_path),
    );

    let records = dir.path().join("records.jsonl");
    write(
        &records,
        concat!(
            r#"{"language":"en","task":{"kind":"asr"},"segments":[{"start":0.0,"text":"the cat sat","end":1.5}],"timestamps_enabled":true}"#,
            "\n",
            r#"{"prompt":"the bat","language":"de","task":{"kind":"asr"},"segments":[{"text":"the cat ate"}],"timestamps_enabled":false}"#,
            "\n",
        ),
    );

    let tokens = dir.path().join("tokens.jsonl");
    run_ok(
        bin()
            .args(["tokenize", "--vocab"])
            .arg(&vocab_path)
            .arg("--input")
            .arg(&records)
            .arg("-o")
            .arg(&tokens),
    );
    let back = dir.path().join("back.jsonl");
    run_ok(
        bin()
            .args(["detokenize", "--vocab"])
            .arg(&vocab_path)
            .arg("--input")
            .arg(&tokens)
            .arg("-o")
            .arg(&back),
    );

    let original = std::fs::read_to_string(&records).unwrap();
    let round_tripped = std::fs::read_to_string(&back).unwrap();
    for (a, b) in original.lines().zip(round_tripped.lines()) {
        let a: serde_json::Value = serde_json::from_str(a).unwrap();
        let b: serde_json::Value = serde_json::from_str(b).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn features_and_cmvn_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let wav_path = dir.path().join("tone.wav");
    let samples: Vec<f32> = (0..16_000)
        .map(|i| (2.0 * std::f32::consts::PI * 440.0 * i as f32 / 16_000.0).sin() * 0.5)
        .collect();
    owsm_kit::wav::write_wav_file(&wav_path, 16_000, &samples).unwrap();

    let feats_json = dir.path().join("feats.json");
    run_ok(
        bin()
            .args(["features", "--audio"])
            .arg(&wav_path)
            .arg("-o")
            .arg(&feats_json),
    );
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&feats_json).unwrap()).unwrap();
    assert_eq!(parsed["frames"].as_array().unwrap().len(), 98); // 1 + (16000-400)/160
    assert_eq!(parsed["frames"][0].as_array().unwrap().len(), 80);

    let stats_path = dir.path().join("cmvn.json");
    run_ok(
        bin()
            .args(["cmvn", "--features"])
            .arg(&feats_json)
            .arg("-o")
            .arg(&stats_path),
    );

    // Normalized + reduced binary output.
    let reduced = dir.path().join("reduced.owfm");
    run_ok(
        bin()
            .args(["features", "--audio"])
            .arg(&wav_path)
            .arg("--cmvn")
            .arg(&stats_path)
            .args(["--reduce", "4", "-o"])
            .arg(&reduced),
    );
    let features = owsm_kit::features::read_feature_matrix(&reduced).unwrap();
    assert_eq!(features.num_frames(), 24); // 98 / 4
    assert_eq!(features.dim(), 320);
    assert!((features.frame_shift() - 0.040).abs() < 1e-9);

    // Preset v2 implies factor 4 as well.
    let preset_out = dir.path().join("preset.owfm");
    run_ok(
        bin()
            .args(["features", "--audio"])
            .arg(&wav_path)
            .args(["--model-preset", "v2", "-o"])
            .arg(&preset_out),
    );
    let preset_features = owsm_kit::features::read_feature_matrix(&preset_out).unwrap();
    assert_eq!(preset_features.num_frames(), 24);

    // Unknown preset fails before writing.
    let bad_out = dir.path().join("bad.owfm");
    let output = bin()
        .args(["features", "--audio"])
        .arg(&wav_path)
        .args(["--model-preset", "v9", "-o"])
        .arg(&bad_out)
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(!bad_out.exists(), "failed command must not write outputs");
}

#[test]
fn decode_ctc_and_joint_degenerate_equivalence() {
    let dir = tempfile::tempdir().unwrap();
    let (vocab_path, vocab) = test_vocab_file(dir.path(), "hi");
    let context = [vocab.sos_id(), vocab.language_id("en").unwrap(), vocab.asr_id()];
    let tokens = vec![vocab.piece_id("h").unwrap(), vocab.piece_id("i").unwrap()];
    let (lattice, scorer) = script_chunk(&vocab, &context, &tokens);

    let lattice_path = dir.path().join("lattice.json");
    let mut buf = Vec::new();
    write_lattice_json(&lattice, &mut buf).unwrap();
    std::fs::write(&lattice_path, &buf).unwrap();
    let scorer_path = dir.path().join("scorer.json");
    let mut buf = Vec::new();
    write_table_scorer(&scorer, &mut buf).unwrap();
    std::fs::write(&scorer_path, &buf).unwrap();

    // CTC greedy on the near-one-hot lattice recovers the text.
    let output = run_ok(
        bin()
            .args(["decode", "--algorithm", "ctc", "--lattice"])
            .arg(&lattice_path)
            .arg("--vocab")
            .arg(&vocab_path),
    );
    let parsed: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(parsed["text"], "hi");

    // λ=0, beam 1 joint decoding equals attention greedy.
    let joint = run_ok(
        bin()
            .args([
                "decode",
                "--algorithm",
                "joint",
                "--ctc-weight",
                "0",
                "--beam-size",
                "1",
                "--lattice",
            ])
            .arg(&lattice_path)
            .arg("--scorer")
            .arg(&scorer_path)
            .arg("--vocab")
            .arg(&vocab_path),
    );
    let attention = run_ok(
        bin()
            .args(["decode", "--algorithm", "attention", "--lattice"])
            .arg(&lattice_path)
            .arg("--scorer")
            .arg(&scorer_path)
            .arg("--vocab")
            .arg(&vocab_path),
    );
    let joint: serde_json::Value = serde_json::from_slice(&joint.stdout).unwrap();
    let attention: serde_json::Value = serde_json::from_slice(&attention.stdout).unwrap();
    assert_eq!(joint["tokens"], attention["tokens"]);
    assert_eq!(joint["text"], attention["text"]);
    assert_eq!(joint["text"], "hi");

    // Joint with the built-in defaults (beam 10, λ 0.3) also lands on
    // the script.
    let defaults = run_ok(
        bin()
            .args(["decode", "--lattice"])
            .arg(&lattice_path)
            .arg("--scorer")
            .arg(&scorer_path)
            .arg("--vocab")
            .arg(&vocab_path),
    );
    let defaults: serde_json::Value = serde_json::from_slice(&defaults.stdout).unwrap();
    assert_eq!(defaults["text"], "hi");

    // Out-of-range λ is rejected up front.
    let bad = bin()
        .args(["decode", "--ctc-weight", "1.5", "--lattice"])
        .arg(&lattice_path)
        .arg("--scorer")
        .arg(&scorer_path)
        .arg("--vocab")
        .arg(&vocab_path)
        .output()
        .unwrap();
    assert!(!bad.status.success());
}

#[test]
fn transcribe_scenario_with_check() {
    let dir = tempfile::tempdir().unwrap();
    let texts = ["hello world", " second part", " tail end"];
    let all_text: String = texts.concat();
    let pieces = char_pieces(&all_text);
    let vocab = Vocabulary::build(&pieces, &strs(&["en"]), &[]).unwrap();
    let context = [vocab.sos_id(), vocab.language_id("en").unwrap(), vocab.asr_id()];
    let piece_ids = |text: &str| -> Vec<u32> {
        text.chars().map(|c| vocab.piece_id(&c.to_string()).unwrap()).collect()
    };

    let mut tokens1 = vec![vocab.timestamp_id(0)];
    tokens1.extend(piece_ids(texts[0]));
    tokens1.push(vocab.timestamp_id(1426)); // 28.52
    let mut tokens2 = vec![vocab.timestamp_id(0)];
    tokens2.extend(piece_ids(texts[1]));
    tokens2.push(vocab.timestamp_id(1450)); // 29.00
    let tokens3 = piece_ids(texts[2]);

    let chunk = |marker: u32, cursor: f64, tokens: &[u32]| -> ScenarioChunk {
        let (lattice, scorer) = script_chunk(&vocab, &context, tokens);
        let (lattice_json, scorer_json) = chunk_to_json(&lattice, &scorer);
        ScenarioChunk {
            marker,
            expected_cursor: cursor,
            lattice: Some(lattice_json),
            lattice_file: None,
            scorer: Some(scorer_json),
            scorer_file: None,
        }
    };
    let scenario = Scenario {
        sample_rate: 16_000,
        duration_seconds: 87.52,
        language: "en".into(),
        task: "asr".into(),
        vocab: ScenarioVocab {
            pieces,
            languages: strs(&["en"]),
            st_targets: vec![],
        },
        chunks: vec![
            chunk(1, 0.0, &tokens1),
            chunk(2, 28.52, &tokens2),
            chunk(3, 57.52, &tokens3),
        ],
    };
    let scenario_path = dir.path().join("scenario.json");
    std::fs::write(&scenario_path, serde_json::to_string_pretty(&scenario).unwrap()).unwrap();

    let segments_path = dir.path().join("segments.jsonl");
    run_ok(
        bin()
            .args(["transcribe", "--scenario"])
            .arg(&scenario_path)
            .args(["--no-condition", "--check", "-o"])
            .arg(&segments_path),
    );

    let segments = std::fs::read_to_string(&segments_path).unwrap();
    let texts_out: Vec<String> = segments
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["text"]
            .as_str()
            .unwrap()
            .to_string())
        .collect();
    assert_eq!(texts_out.concat(), all_text);

    let trace_path = segments_path.with_extension("trace.jsonl");
    let trace = std::fs::read_to_string(&trace_path).unwrap();
    let cursors: Vec<f64> = trace
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["cursor"].as_f64().unwrap())
        .collect();
    assert_eq!(cursors, vec![0.0, 28.52, 57.52]);
}

#[test]
fn score_wer_bleu_lid() {
    let dir = tempfile::tempdir().unwrap();
    let refs = dir.path().join("refs.txt");
    let hyps = dir.path().join("hyps.txt");

    write(&refs, "The cat sat\n");
    write(&hyps, "the cat sit\n");
    let output = run_ok(
        bin()
            .args(["score", "--metric", "wer", "--refs"])
            .arg(&refs)
            .arg("--hyps")
            .arg(&hyps),
    );
    let parsed: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let rate = parsed["corpus"]["rate"].as_f64().unwrap();
    assert!((rate - 1.0 / 3.0).abs() < 1e-9);

    write(&refs, "the quick brown fox jumps\n");
    write(&hyps, "the quick brown fox jumps\n");
    let output = run_ok(
        bin()
            .args(["score", "--metric", "bleu", "--refs"])
            .arg(&refs)
            .arg("--hyps")
            .arg(&hyps),
    );
    let parsed: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert!((parsed["corpus"]["bleu"].as_f64().unwrap() - 100.0).abs() < 1e-9);

    write(&refs, "en\nde\nzh\nja\n");
    write(&hyps, "en\nde\nzh\nen\n");
    let output = run_ok(
        bin()
            .args(["score", "--metric", "lid", "--normalizer", "none", "--refs"])
            .arg(&refs)
            .arg("--hyps")
            .arg(&hyps),
    );
    let parsed: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(parsed["corpus"]["accuracy"].as_f64().unwrap(), 0.75);
}

#[test]
fn config_file_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let (vocab_path, _) = test_vocab_file(dir.path(), "ab");
    let manifest = dir.path().join("manifest.jsonl");
    // Timed encodings: SOS lang task <ts> text <ts> EOS, so "a"/"b" give
    // 7 tokens and "ab" gives 8.
    write(
        &manifest,
        concat!(
            r#"{"talk_id":"T","start":0.0,"end":5.0,"text":"a","language":"en"}"#, "\n",
            r#"{"talk_id":"U","start":0.0,"end":5.0,"text":"b","language":"en"}"#, "\n",
            r#"{"talk_id":"V","start":0.0,"end":5.0,"text":"ab","language":"en"}"#, "\n",
        ),
    );
    let config_path = dir.path().join("owsm.cfg");
    write(
        &config_path,
        &format!(
            "# pipeline defaults\nvocab = {}\nn_shards = 2\nmax_tokens = 7\n",
            vocab_path.display()
        ),
    );

    // Config's max_tokens = 7 drops the 8-token sample and n_shards = 2
    // replaces the built-in 5.
    let out1 = dir.path().join("out1");
    run_ok(
        bin()
            .arg("--config")
            .arg(&config_path)
            .args(["prepare", "--manifest"])
            .arg(&manifest)
            .arg("--out-dir")
            .arg(&out1)
            .arg("--report")
            .arg(out1.join("report.json")),
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["kept"], 2);
    assert_eq!(report["dropped"], 1);
    assert!(out1.join("shard-001.jsonl").exists());
    assert!(!out1.join("shard-002.jsonl").exists(), "config n_shards = 2");

    // A flag overrides the config value.
    let out2 = dir.path().join("out2");
    run_ok(
        bin()
            .arg("--config")
            .arg(&config_path)
            .args(["prepare", "--manifest"])
            .arg(&manifest)
            .arg("--out-dir")
            .arg(&out2)
            .args(["--max-tokens", "600"])
            .arg("--report")
            .arg(out2.join("report.json")),
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out2.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["kept"], 3);
}

#[test]
fn seed_env_variable_is_the_default() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("corpus.txt");
    // One distinct character per line: the sampled line set is visible in
    // the trained model's character inventory.
    let lines: String = (0..500)
        .map(|i| format!("{}\n", char::from_u32(0x4E00 + i).unwrap()))
        .collect();
    write(&corpus_path, &lines);

    let train = |env_seed: Option<&str>, flag_seed: Option<&str>, out: &Path| {
        let mut cmd = bin();
        cmd.args(["bpe-train", "--input"])
            .arg(&corpus_path)
            .args(["--vocab-size", "50", "--sample-n", "50", "-o"])
            .arg(out);
        if let Some(seed) = flag_seed {
            cmd.args(["--seed", seed]);
        }
        match env_seed {
            Some(seed) => cmd.env("OWSM_KIT_SEED", seed),
            None => cmd.env_remove("OWSM_KIT_SEED"),
        };
        run_ok(&mut cmd);
    };

    let a = dir.path().join("a.bpe");
    let b = dir.path().join("b.bpe");
    let c = dir.path().join("c.bpe");
    let d = dir.path().join("d.bpe");
    train(Some("99"), None, &a);
    train(None, Some("99"), &b);
    train(None, Some("100"), &c);
    train(Some("100"), Some("99"), &d); // flag beats env
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&b).unwrap(), std::fs::read(&c).unwrap());
    assert_eq!(std::fs::read(&d).unwrap(), std::fs::read(&a).unwrap());
}

#[test]
fn one_hot_lattice_decodes_labels() {
    // A canonical one-hot alignment collapses back to its labels via the
    // file-based CLI path as well.
    let dir = tempfile::tempdir().unwrap();
    let (vocab_path, vocab) = test_vocab_file(dir.path(), "ok");
    let blank = vocab.blank_id();
    let o = vocab.piece_id("o").unwrap();
    let k = vocab.piece_id("k").unwrap();
    let frames = [o, blank, k, k];
    let vocab_size = vocab.len();
    let rows: Vec<Vec<f64>> = frames
        .iter()
        .map(|&t| {
            (0..vocab_size)
                .map(|v| if v as u32 == t { 1000.0 } else { 0.001 })
                .collect()
        })
        .collect();
    let lattice = LogProbLattice::from_probs(&rows, blank, 0.04).unwrap();
    let lattice_path = dir.path().join("lattice.json");
    let mut buf = Vec::new();
    write_lattice_json(&lattice, &mut buf).unwrap();
    std::fs::write(&lattice_path, &buf).unwrap();

    let output = run_ok(
        bin()
            .args(["decode", "--algorithm", "ctc", "--lattice"])
            .arg(&lattice_path)
            .arg("--vocab")
            .arg(&vocab_path),
    );
    let parsed: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(parsed["text"], "ok");
    assert_eq!(
        parsed["tokens"],
        serde_json::json!([o, k])
    );
}
