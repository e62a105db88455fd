//! Command-line pipeline around owsm-kit: data preparation, BPE training,
//! tokenization, feature extraction, decoding, long-form transcription on
//! mock scenarios, and scoring.
//!
//! Every command is deterministic given its flags and seeds. Data goes to
//! standard output or named files; progress and warnings go to standard
//! error. File outputs are written to a temp name and renamed into place.

mod config;
mod io_util;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use config::{default_seed, ConfigFile};
use io_util::{atomic_write, read_jsonl, read_lines, write_jsonl, write_output};
use owsm_kit::bpe::{train_bpe, BpeModel};
use owsm_kit::data_prep::{
    concatenate_segments, filter_by_length, partition_shards, sample_transcripts,
    subsample_validation, DroppedSample, LongFormSample, ShardPolicy,
};
use owsm_kit::decoder::{
    attention_greedy, ctc_greedy, joint_beam_search, read_lattice, read_table_scorer_file,
    Algorithm, DecodeOptions,
};
use owsm_kit::eval::{
    char_error_rate, corpus_bleu, lid_accuracy, normalize_english, normalize_text, EnglishTable,
    NormalizerMode, word_error_rate,
};
use owsm_kit::features::{
    accumulate_cmvn, apply_cmvn, log_mel, read_feature_matrix, reduce_time_resolution,
    spec_augment, write_feature_matrix_binary, write_feature_matrix_json, CmvnStats,
    SpecAugmentConfig, SAMPLE_RATE,
};
use owsm_kit::longform::scenario::Scenario;
use owsm_kit::longform::{transcribe_longform, LongFormOptions};
use owsm_kit::token_format::{
    decode_tokens, decode_tokens_lenient, encode_record, MultitaskRecord, Task, Vocabulary,
};

#[derive(Parser)]
#[command(
    name = "owsm-kit",
    about = "Deterministic speech-pipeline toolkit: multitask token formats, long-form data prep, features, joint CTC/attention decoding, and scoring",
    version
)]
struct Cli {
    /// Flat key=value config file; flags beat config, config beats defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build long-form training shards from a segment manifest
    Prepare(PrepareArgs),
    /// Train a BPE model on (a reservoir sample of) a text corpus
    BpeTrain(BpeTrainArgs),
    /// Encode record JSONL into token-id JSONL
    Tokenize(TokenizeArgs),
    /// Decode token-id JSONL back into record JSONL
    Detokenize(TokenizeArgs),
    /// Extract log-Mel features from a mono 16 kHz WAV file
    Features(FeaturesArgs),
    /// Accumulate global mean/variance stats over feature files
    Cmvn(CmvnArgs),
    /// Decode one utterance from a lattice and/or scorer table
    Decode(DecodeArgs),
    /// Transcribe a long-form mock scenario
    Transcribe(TranscribeArgs),
    /// Score hypotheses against references
    Score(ScoreArgs),
    /// Build a vocabulary file from BPE pieces and language lists
    VocabBuild(VocabBuildArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = (|| -> Result<()> {
        let config = ConfigFile::load(cli.config.as_deref())?;
        match cli.command {
            Command::Prepare(args) => cmd_prepare(args, &config),
            Command::BpeTrain(args) => cmd_bpe_train(args, &config),
            Command::Tokenize(args) => cmd_tokenize(args, true),
            Command::Detokenize(args) => cmd_tokenize(args, false),
            Command::Features(args) => cmd_features(args, &config),
            Command::Cmvn(args) => cmd_cmvn(args),
            Command::Decode(args) => cmd_decode(args, &config),
            Command::Transcribe(args) => cmd_transcribe(args, &config),
            Command::Score(args) => cmd_score(args),
            Command::VocabBuild(args) => cmd_vocab_build(args),
        }
    })();
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// prepare

#[derive(Args)]
struct PrepareArgs {
    /// Manifest JSONL, one utterance segment per line
    #[arg(long)]
    manifest: PathBuf,
    /// Vocabulary file (config key: vocab)
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Output directory for shard-{i:03}.jsonl files (config key: shard_dir)
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Number of shards; 5 to 12 recommended [default: 5]
    #[arg(long)]
    n_shards: Option<usize>,
    /// Shard assignment policy
    #[arg(long, value_enum, default_value_t = PolicyArg::RoundRobin)]
    policy: PolicyArg,
    /// Maximum window length in seconds [default: 30]
    #[arg(long)]
    max_duration: Option<f64>,
    /// Drop samples whose encoding exceeds this many tokens [default: 600]
    #[arg(long)]
    max_tokens: Option<usize>,
    /// Seed for hash sharding and validation subsampling [default: $OWSM_KIT_SEED or 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; output is identical to a serial run [default: 1]
    #[arg(long)]
    jobs: Option<usize>,
    /// Route oversized single segments to the dropped list
    #[arg(long)]
    drop_oversized: bool,
    /// Give each sample the previous same-talk sample's text as a prompt
    #[arg(long)]
    prompt_previous: bool,
    /// Also write a validation subsample of the kept samples
    #[arg(long)]
    validation_out: Option<PathBuf>,
    /// Fraction for --validation-out [default: 0.1]
    #[arg(long)]
    validation_fraction: Option<f64>,
    /// Write the preparation report here instead of standard output
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    RoundRobin,
    Hash,
}

#[derive(Serialize)]
struct ShardLine<'a> {
    #[serde(flatten)]
    sample: &'a LongFormSample,
    token_ids: &'a [u32],
}

#[derive(Serialize)]
struct PrepareReport {
    input_segments: usize,
    samples_built: usize,
    kept: usize,
    dropped: usize,
    oversized: usize,
    per_language: BTreeMap<String, LanguageCounts>,
    shard_sizes: Vec<usize>,
    dropped_details: Vec<DroppedSample>,
}

#[derive(Default, Serialize)]
struct LanguageCounts {
    segments: usize,
    kept_samples: usize,
    dropped_samples: usize,
}

fn cmd_prepare(args: PrepareArgs, config: &ConfigFile) -> Result<()> {
    // Resolve and validate every knob before touching the filesystem.
    let vocab_path: PathBuf = config
        .resolve_opt(args.vocab, "vocab")?
        .context("--vocab (or config key vocab) is required")?;
    let out_dir: PathBuf = config
        .resolve_opt(args.out_dir, "shard_dir")?
        .context("--out-dir (or config key shard_dir) is required")?;
    let n_shards = config.resolve(args.n_shards, "n_shards", 5)?;
    let max_duration = config.resolve(args.max_duration, "max_duration", 30.0)?;
    let max_tokens = config.resolve(args.max_tokens, "max_tokens", 600)?;
    let seed = config.resolve(args.seed, "seed", default_seed())?;
    let jobs = config.resolve(args.jobs, "jobs", 1)?.max(1);
    let validation_fraction =
        config.resolve(args.validation_fraction, "validation_fraction", 0.1)?;
    if n_shards < 1 {
        bail!("n_shards must be at least 1");
    }
    if max_duration <= 0.0 {
        bail!("max_duration must be positive");
    }
    config::check_fraction(validation_fraction)?;
    config::warn_shard_range(n_shards);

    let vocab = Vocabulary::read_from_file(&vocab_path)
        .with_context(|| format!("loading vocabulary {}", vocab_path.display()))?;
    let manifest_file = std::fs::File::open(&args.manifest)
        .with_context(|| format!("opening manifest {}", args.manifest.display()))?;
    let segments = owsm_kit::data_prep::read_manifest(std::io::BufReader::new(manifest_file))?;

    // Talks must form consecutive runs so parallel and serial grouping agree.
    let mut seen = BTreeSet::new();
    let mut runs: Vec<(usize, usize)> = Vec::new(); // (base index, len)
    for (i, segment) in segments.iter().enumerate() {
        match runs.last_mut() {
            Some((base, len)) if segments[*base].talk_id == segment.talk_id => {
                let _ = i;
                *len += 1;
            }
            _ => {
                if !seen.insert(segment.talk_id.clone()) {
                    bail!(
                        "manifest is not sorted: talk {:?} appears in two separate runs",
                        segment.talk_id
                    );
                }
                runs.push((i, 1));
            }
        }
    }

    let concatenate_run = |&(base, len): &(usize, usize)| -> Result<Vec<LongFormSample>> {
        let mut samples = concatenate_segments(&segments[base..base + len], max_duration)?;
        for sample in &mut samples {
            for id in &mut sample.source_segment_ids {
                *id += base;
            }
        }
        Ok(samples)
    };
    let samples: Vec<LongFormSample> = if jobs > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
        let nested: Vec<Vec<LongFormSample>> =
            pool.install(|| runs.par_iter().map(concatenate_run).collect::<Result<_>>())?;
        nested.into_iter().flatten().collect()
    } else {
        let mut all = Vec::new();
        for run in &runs {
            all.extend(concatenate_run(run)?);
        }
        all
    };
    let mut samples = samples;
    if args.prompt_previous {
        // Prompt tokens count toward the length filter below.
        let mut previous: Option<(String, String)> = None; // (talk, text)
        for sample in &mut samples {
            if let Some((talk, text)) = &previous {
                if *talk == sample.talk_id {
                    sample.record.prompt = Some(text.clone());
                }
            }
            previous = Some((sample.talk_id.clone(), sample.record.text()));
        }
    }
    let samples_built = samples.len();
    let oversized = samples.iter().filter(|s| s.oversized).count();
    let language_of_sample: BTreeMap<String, String> = samples
        .iter()
        .map(|s| (s.id.clone(), s.record.language.clone()))
        .collect();

    let mut per_language: BTreeMap<String, LanguageCounts> = BTreeMap::new();
    for segment in &segments {
        per_language.entry(segment.language.clone()).or_default().segments += 1;
    }

    let (mut kept, mut dropped) = filter_by_length(samples, &vocab, max_tokens);
    if args.drop_oversized {
        let (keep, drop): (Vec<_>, Vec<_>) = kept.into_iter().partition(|s| !s.oversized);
        kept = keep;
        dropped.extend(drop.into_iter().map(|s| DroppedSample {
            id: s.id,
            reason: format!("oversized single segment ({:.2} s)", s.duration),
        }));
    }
    for sample in &kept {
        per_language
            .entry(sample.record.language.clone())
            .or_default()
            .kept_samples += 1;
    }
    for item in &dropped {
        let language = language_of_sample
            .get(&item.id)
            .cloned()
            .unwrap_or_else(|| "unknown".into());
        per_language.entry(language).or_default().dropped_samples += 1;
    }

    // Encode once more for the shard lines; filtering already proved the
    // samples encodable.
    let encode_sample = |s: LongFormSample| -> (LongFormSample, Vec<u32>) {
        let ids = encode_record(&s.record, &vocab).expect("filtered samples encode");
        (s, ids)
    };
    let encoded: Vec<(LongFormSample, Vec<u32>)> = if jobs > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
        pool.install(|| kept.into_par_iter().map(encode_sample).collect())
    } else {
        kept.into_iter().map(encode_sample).collect()
    };

    let ids: Vec<String> = encoded.iter().map(|(s, _)| s.id.clone()).collect();
    let policy = match args.policy {
        PolicyArg::RoundRobin => ShardPolicy::RoundRobin,
        PolicyArg::Hash => ShardPolicy::Hash,
    };
    let assignment = partition_shards(&ids, n_shards, policy, seed)?;

    for shard in 0..n_shards {
        let path = out_dir.join(format!("shard-{shard:03}.jsonl"));
        let lines: Vec<ShardLine> = encoded
            .iter()
            .filter(|(s, _)| assignment.shard_of[&s.id] == shard)
            .map(|(s, ids)| ShardLine {
                sample: s,
                token_ids: ids,
            })
            .collect();
        atomic_write(&path, |w| write_jsonl(w, &lines))?;
        eprintln!("wrote {} ({} samples)", path.display(), lines.len());
    }

    if let Some(validation_path) = &args.validation_out {
        let subsample = subsample_validation(&encoded, validation_fraction, seed)?;
        let lines: Vec<ShardLine> = subsample
            .iter()
            .map(|(s, ids)| ShardLine {
                sample: s,
                token_ids: ids,
            })
            .collect();
        atomic_write(validation_path, |w| write_jsonl(w, &lines))?;
        eprintln!(
            "wrote {} ({} samples)",
            validation_path.display(),
            lines.len()
        );
    }

    let report = PrepareReport {
        input_segments: segments.len(),
        samples_built,
        kept: encoded.len(),
        dropped: dropped.len(),
        oversized,
        per_language,
        shard_sizes: assignment.shard_sizes(),
        dropped_details: dropped,
    };
    write_output(args.report.as_deref(), |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        writeln!(w)?;
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// bpe-train

#[derive(Args)]
struct BpeTrainArgs {
    /// Text corpus, one transcript per line
    #[arg(long)]
    input: PathBuf,
    /// Target number of pieces, characters included
    #[arg(long)]
    vocab_size: usize,
    /// Reservoir-sample this many lines before training [default: 10000000]
    #[arg(long)]
    sample_n: Option<usize>,
    /// Sampling seed [default: $OWSM_KIT_SEED or 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Output model file
    #[arg(short, long)]
    output: PathBuf,
}

fn cmd_bpe_train(args: BpeTrainArgs, config: &ConfigFile) -> Result<()> {
    let sample_n = config.resolve(args.sample_n, "sample_n", 10_000_000)?;
    let seed = config.resolve(args.seed, "seed", default_seed())?;
    let file = std::fs::File::open(&args.input)
        .with_context(|| format!("opening corpus {}", args.input.display()))?;
    let reader = std::io::BufReader::new(file);
    use std::io::BufRead;
    let texts = sample_transcripts(reader.lines(), sample_n, seed)?;
    eprintln!("training on {} sampled lines", texts.len());
    let model = train_bpe(&texts, args.vocab_size)?;
    atomic_write(&args.output, |w| {
        model.to_writer(w)?;
        Ok(())
    })?;
    eprintln!(
        "wrote {} ({} pieces, {} merges)",
        args.output.display(),
        model.pieces().len(),
        model.merges().len()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// tokenize / detokenize

#[derive(Args)]
struct TokenizeArgs {
    /// Vocabulary file
    #[arg(long)]
    vocab: PathBuf,
    /// Input JSONL (records for tokenize, integer arrays for detokenize)
    #[arg(long)]
    input: PathBuf,
    /// Output JSONL; standard output when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn cmd_tokenize(args: TokenizeArgs, encode: bool) -> Result<()> {
    let vocab = Vocabulary::read_from_file(&args.vocab)?;
    if encode {
        let records: Vec<MultitaskRecord> = read_jsonl(&args.input)?;
        let mut lines: Vec<Vec<u32>> = Vec::with_capacity(records.len());
        for (i, record) in records.iter().enumerate() {
            let ids = encode_record(record, &vocab)
                .with_context(|| format!("{}: record {}", args.input.display(), i + 1))?;
            lines.push(ids);
        }
        write_output(args.output.as_deref(), |w| write_jsonl(w, &lines))
    } else {
        let lines: Vec<Vec<u32>> = read_jsonl(&args.input)?;
        let mut records = Vec::with_capacity(lines.len());
        for (i, ids) in lines.iter().enumerate() {
            let record = decode_tokens(ids, &vocab)
                .with_context(|| format!("{}: sequence {}", args.input.display(), i + 1))?;
            records.push(record);
        }
        write_output(args.output.as_deref(), |w| write_jsonl(w, &records))
    }
}

// ---------------------------------------------------------------------------
// features / cmvn

#[derive(Args)]
struct FeaturesArgs {
    /// Input WAV (mono 16-bit PCM at 16 kHz)
    #[arg(long)]
    audio: PathBuf,
    /// Output path; .owfm writes the binary form, anything else JSON
    #[arg(short, long)]
    output: PathBuf,
    /// Pad or trim the audio to exactly 30 s first
    #[arg(long)]
    pad_to_30s: bool,
    /// Apply CMVN stats from this file (config key: cmvn)
    #[arg(long)]
    cmvn: Option<PathBuf>,
    /// SpecAugment as n_time,max_time_width,n_freq,max_freq_width
    #[arg(long)]
    spec_augment: Option<String>,
    /// SpecAugment seed [default: $OWSM_KIT_SEED or 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Stack frames to reduce time resolution (config key: time_reduction)
    #[arg(long)]
    reduce: Option<usize>,
    /// Validate and take the reduction factor from a model preset (v1/v2/v3)
    #[arg(long)]
    model_preset: Option<String>,
}

fn cmd_features(args: FeaturesArgs, config: &ConfigFile) -> Result<()> {
    let seed = config.resolve(args.seed, "seed", default_seed())?;
    let cmvn_path: Option<PathBuf> = config.resolve_opt(args.cmvn, "cmvn")?;
    let preset_name: Option<String> = config.resolve_opt(args.model_preset, "model_preset")?;
    let preset = preset_name
        .as_deref()
        .map(config::check_model_preset)
        .transpose()?;
    let reduce = match config.resolve_opt(args.reduce, "time_reduction")? {
        Some(factor) => Some(config::check_time_reduction(factor)?),
        None => preset.map(|p| p.time_reduction_factor()),
    };
    let augment = args
        .spec_augment
        .as_deref()
        .map(parse_spec_augment)
        .transpose()?;

    let wav = owsm_kit::wav::read_wav_file(&args.audio)?;
    if wav.sample_rate != SAMPLE_RATE {
        bail!(
            "{} is {} Hz; only {} Hz input is supported (resampling is out of scope)",
            args.audio.display(),
            wav.sample_rate,
            SAMPLE_RATE
        );
    }
    let samples = if args.pad_to_30s {
        owsm_kit::data_prep::pad_or_trim_audio(&wav.samples, 30.0, wav.sample_rate)
    } else {
        wav.samples
    };

    let mut features = log_mel(&samples, wav.sample_rate)?;
    if let Some(path) = cmvn_path {
        let stats: CmvnStats = serde_json::from_reader(std::io::BufReader::new(
            std::fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?,
        ))?;
        features = apply_cmvn(&features, &stats)?;
    }
    if let Some(augment_config) = augment {
        features = spec_augment(&features, &augment_config, seed);
    }
    if let Some(factor) = reduce {
        features = reduce_time_resolution(&features, factor)?;
    }

    let binary = args.output.extension().is_some_and(|e| e == "owfm");
    atomic_write(&args.output, |w| {
        if binary {
            write_feature_matrix_binary(&features, w)?;
        } else {
            write_feature_matrix_json(&features, w)?;
        }
        Ok(())
    })?;
    eprintln!(
        "wrote {} ({} frames x {}, shift {:.3} s)",
        args.output.display(),
        features.num_frames(),
        features.dim(),
        features.frame_shift()
    );
    Ok(())
}

fn parse_spec_augment(spec: &str) -> Result<SpecAugmentConfig> {
    let parts: Vec<usize> = spec
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("--spec-augment {spec:?}"))?;
    let [n_time_masks, max_time_width, n_freq_masks, max_freq_width] = parts[..] else {
        bail!("--spec-augment needs four comma-separated integers");
    };
    Ok(SpecAugmentConfig {
        n_time_masks,
        max_time_width,
        n_freq_masks,
        max_freq_width,
    })
}

#[derive(Args)]
struct CmvnArgs {
    /// Feature files (JSON or .owfm) to pool
    #[arg(long, num_args = 1.., required = true)]
    features: Vec<PathBuf>,
    /// Output stats JSON
    #[arg(short, long)]
    output: PathBuf,
}

fn cmd_cmvn(args: CmvnArgs) -> Result<()> {
    let mut matrices = Vec::new();
    for path in &args.features {
        matrices.push(
            read_feature_matrix(path).with_context(|| format!("reading {}", path.display()))?,
        );
    }
    let dim = matrices.first().map(|m| m.dim()).context("no feature files")?;
    let stats = accumulate_cmvn(matrices.iter(), dim)?;
    for d in stats.clamped_dims() {
        eprintln!("warning: dimension {d} has near-zero variance; clamped");
    }
    atomic_write(&args.output, |w| {
        serde_json::to_writer(&mut *w, &stats)?;
        Ok(())
    })?;
    eprintln!(
        "wrote {} ({} frames pooled)",
        args.output.display(),
        stats.count()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// decode

#[derive(Args)]
struct DecodeArgs {
    /// CTC lattice file (JSON or .owlt)
    #[arg(long)]
    lattice: PathBuf,
    /// Step-scorer table file; required for attention and joint decoding
    #[arg(long)]
    scorer: Option<PathBuf>,
    /// Vocabulary file (config key: vocab)
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = AlgorithmArg::Joint)]
    algorithm: AlgorithmArg,
    /// Beam width for joint decoding [default: 10]
    #[arg(long)]
    beam_size: Option<usize>,
    /// CTC weight λ in [0, 1] [default: 0.3]
    #[arg(long)]
    ctc_weight: Option<f64>,
    /// Maximum generated tokens [default: 220]
    #[arg(long)]
    max_len: Option<usize>,
    /// Hypotheses to report for joint decoding [default: 1]
    #[arg(long)]
    n_best: Option<usize>,
    /// Language of the forced context [default: en]
    #[arg(long)]
    language: Option<String>,
    /// Task of the forced context: "asr" or "st:<code>" [default: asr]
    #[arg(long)]
    task: Option<String>,
    /// Optional prompt text placed before SOS
    #[arg(long)]
    prompt: Option<String>,
    /// Output JSON; standard output when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Ctc,
    Attention,
    Joint,
}

#[derive(Serialize)]
struct DecodeOutput {
    algorithm: String,
    tokens: Vec<u32>,
    text: String,
    record: Option<MultitaskRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    parse_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    nbest: Vec<NBestEntry>,
}

#[derive(Serialize)]
struct NBestEntry {
    tokens: Vec<u32>,
    score: f64,
}

fn cmd_decode(args: DecodeArgs, config: &ConfigFile) -> Result<()> {
    let vocab_path: PathBuf = config
        .resolve_opt(args.vocab, "vocab")?
        .context("--vocab (or config key vocab) is required")?;
    let beam_size = config::check_beam_size(config.resolve(args.beam_size, "beam_size", 10)?)?;
    let ctc_weight =
        config::check_ctc_weight(config.resolve(args.ctc_weight, "ctc_weight", 0.3)?)?;
    let max_len = config.resolve(args.max_len, "max_len", 220)?;
    let n_best = config.resolve(args.n_best, "n_best", 1)?;
    let language = config.resolve(args.language, "language", "en".to_string())?;
    let task_text = config.resolve(args.task, "task", "asr".to_string())?;

    let vocab = Vocabulary::read_from_file(&vocab_path)?;
    let lattice = read_lattice(&args.lattice)?;
    let task = parse_task(&task_text)?;

    let mut context = Vec::new();
    if let Some(prompt) = &args.prompt {
        context.push(vocab.sop_id());
        let pieces = owsm_kit::bpe::segment_with_pieces(prompt, vocab.max_piece_len(), |s| {
            vocab.piece_id(s).is_some()
        })
        .map_err(|e| anyhow::anyhow!("prompt: {e}"))?;
        context.extend(pieces.iter().map(|p| vocab.piece_id(p).expect("known piece")));
    }
    context.push(vocab.sos_id());
    context.push(
        vocab
            .language_id(&language)
            .with_context(|| format!("language {language:?} is not in the vocabulary"))?,
    );
    match &task {
        Task::Asr => context.push(vocab.asr_id()),
        Task::St { target } => context.push(
            vocab
                .st_id(target)
                .with_context(|| format!("target {target:?} is not in the vocabulary"))?,
        ),
    }

    let mut opts = DecodeOptions::new(vocab.eos_id());
    opts.beam_size = beam_size;
    opts.ctc_weight = ctc_weight;
    opts.max_len = max_len;
    opts.n_best = n_best;
    opts.attention_only = BTreeSet::from_iter(vocab.timestamp_ids());

    let load_scorer = || -> Result<_> {
        let path = args
            .scorer
            .as_ref()
            .context("--scorer is required for attention and joint decoding")?;
        Ok(read_table_scorer_file(path)?)
    };

    let (algorithm_name, tokens, score, nbest) = match args.algorithm {
        AlgorithmArg::Ctc => ("ctc".to_string(), ctc_greedy(&lattice), None, Vec::new()),
        AlgorithmArg::Attention => {
            let scorer = load_scorer()?;
            let out = attention_greedy(&scorer, &context, opts.eos_id, opts.max_len);
            if out.truncated {
                eprintln!("warning: hit max length {max_len} before EOS");
            }
            (
                "attention".to_string(),
                out.tokens,
                Some(out.att_score),
                Vec::new(),
            )
        }
        AlgorithmArg::Joint => {
            opts.algorithm = Algorithm::Joint;
            let scorer = load_scorer()?;
            let nbest = joint_beam_search(&scorer, &lattice, &context, &opts)?;
            let top = nbest.first().cloned().context("empty n-best list")?;
            (
                "joint".to_string(),
                top.tokens,
                Some(top.score),
                nbest
                    .into_iter()
                    .map(|h| NBestEntry {
                        tokens: h.tokens,
                        score: h.score,
                    })
                    .collect(),
            )
        }
    };

    let mut full = context.clone();
    full.extend(&tokens);
    full.push(vocab.eos_id());
    let (record, parse_error, text) = match decode_tokens_lenient(&full, &vocab) {
        Ok(decoded) => {
            let text = decoded.record.text();
            (Some(decoded.record), None, text)
        }
        Err(e) => (None, Some(e.to_string()), String::new()),
    };

    let output = DecodeOutput {
        algorithm: algorithm_name,
        tokens,
        text,
        record,
        parse_error,
        score,
        nbest,
    };
    write_output(args.output.as_deref(), |w| {
        serde_json::to_writer_pretty(&mut *w, &output)?;
        writeln!(w)?;
        Ok(())
    })
}

fn parse_task(text: &str) -> Result<Task> {
    if text == "asr" {
        return Ok(Task::Asr);
    }
    if let Some(target) = text.strip_prefix("st:") {
        return Ok(Task::St {
            target: target.to_string(),
        });
    }
    bail!("task must be \"asr\" or \"st:<code>\", found {text:?}");
}

// ---------------------------------------------------------------------------
// transcribe

#[derive(Args)]
struct TranscribeArgs {
    /// Scenario JSON describing audio, vocabulary, and per-chunk mocks
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum, default_value_t = AlgorithmArg::Joint)]
    algorithm: AlgorithmArg,
    /// Beam width for joint decoding [default: 10]
    #[arg(long)]
    beam_size: Option<usize>,
    /// CTC weight λ in [0, 1] [default: 0.3]
    #[arg(long)]
    ctc_weight: Option<f64>,
    /// Maximum generated tokens per chunk [default: 220]
    #[arg(long)]
    max_len: Option<usize>,
    /// Do not condition chunks on previously emitted text
    #[arg(long)]
    no_condition: bool,
    /// Prompt budget in tokens when conditioning [default: 200]
    #[arg(long)]
    max_prompt_tokens: Option<usize>,
    /// Fail if the cursor trace differs from the scenario's expectations
    #[arg(long)]
    check: bool,
    /// Segments JSONL; standard output when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Trace JSONL sidecar [default: derived from --output]
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn cmd_transcribe(args: TranscribeArgs, config: &ConfigFile) -> Result<()> {
    let beam_size = config::check_beam_size(config.resolve(args.beam_size, "beam_size", 10)?)?;
    let ctc_weight =
        config::check_ctc_weight(config.resolve(args.ctc_weight, "ctc_weight", 0.3)?)?;
    let max_len = config.resolve(args.max_len, "max_len", 220)?;
    let max_prompt_tokens = config.resolve(args.max_prompt_tokens, "max_prompt_tokens", 200)?;

    let scenario = Scenario::read_from_file(&args.scenario)?;
    let base_dir = args.scenario.parent().unwrap_or(Path::new("."));
    let vocab = scenario.build_vocabulary()?;
    let audio = scenario.build_audio()?;
    let model = scenario.build_model(base_dir)?;

    let mut opts = DecodeOptions::new(vocab.eos_id());
    opts.algorithm = match args.algorithm {
        AlgorithmArg::Ctc => Algorithm::CtcGreedy,
        AlgorithmArg::Attention => Algorithm::AttentionGreedy,
        AlgorithmArg::Joint => Algorithm::Joint,
    };
    opts.beam_size = beam_size;
    opts.ctc_weight = ctc_weight;
    opts.max_len = max_len;

    let mut lf_opts = LongFormOptions::new(scenario.language.clone());
    lf_opts.task = scenario.parse_task()?;
    lf_opts.condition_on_previous = !args.no_condition;
    lf_opts.max_prompt_tokens = max_prompt_tokens;

    let result =
        transcribe_longform(&audio, scenario.sample_rate, &model, &vocab, &opts, &lf_opts)?;

    for trace in &result.chunk_trace {
        if let Some(warning) = &trace.warning {
            eprintln!("warning: chunk at {:.2} s: {warning}", trace.cursor);
        }
    }
    let expected = scenario.expected_cursors();
    let actual = result.cursors();
    if actual != expected {
        let message =
            format!("cursor trace {actual:?} differs from the scenario's expected {expected:?}");
        if args.check {
            bail!(message);
        }
        eprintln!("warning: {message}");
    }

    write_output(args.output.as_deref(), |w| write_jsonl(w, &result.segments))?;
    let trace_path = args.trace.clone().or_else(|| {
        args.output
            .as_ref()
            .map(|p| p.with_extension("trace.jsonl"))
    });
    if let Some(path) = trace_path {
        atomic_write(&path, |w| write_jsonl(w, &result.chunk_trace))?;
        eprintln!("wrote trace {}", path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// score

#[derive(Args)]
struct ScoreArgs {
    /// Reference file, one utterance (or language code) per line
    #[arg(long)]
    refs: PathBuf,
    /// Hypothesis file, aligned line by line with --refs
    #[arg(long)]
    hyps: PathBuf,
    #[arg(long, value_enum)]
    metric: MetricArg,
    /// Normalizer applied before WER/CER/BLEU scoring
    #[arg(long, value_enum, default_value_t = NormalizerArg::Basic)]
    normalizer: NormalizerArg,
    /// Replacement table for the english normalizer (JSON word map)
    #[arg(long)]
    english_table: Option<PathBuf>,
    /// Report JSON; standard output when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Wer,
    Cer,
    Bleu,
    Lid,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormalizerArg {
    None,
    Basic,
    English,
}

#[derive(Serialize)]
struct ScoreReport {
    metric: String,
    normalizer: String,
    corpus: serde_json::Value,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    utterances: Vec<serde_json::Value>,
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    let refs = read_lines(&args.refs)?;
    let hyps = read_lines(&args.hyps)?;
    if refs.len() != hyps.len() {
        bail!(
            "{} has {} lines but {} has {}",
            args.refs.display(),
            refs.len(),
            args.hyps.display(),
            hyps.len()
        );
    }
    if refs.is_empty() {
        bail!("no utterances to score");
    }

    let table = match &args.english_table {
        Some(path) => Some(EnglishTable::from_json(&std::fs::read_to_string(path)?)?),
        None => None,
    };
    let normalize = |s: &String| -> String {
        match args.normalizer {
            NormalizerArg::None => s.clone(),
            NormalizerArg::Basic => normalize_text(s, NormalizerMode::Basic),
            NormalizerArg::English => match &table {
                Some(table) => normalize_english(s, table),
                None => normalize_text(s, NormalizerMode::English),
            },
        }
    };

    let (metric_name, corpus, utterances) = match args.metric {
        MetricArg::Wer | MetricArg::Cer => {
            let is_wer = matches!(args.metric, MetricArg::Wer);
            let mut totals = (0usize, 0usize, 0usize, 0usize, 0usize); // S, I, D, H, ref_len
            let mut utterances = Vec::new();
            for (i, (r, h)) in refs.iter().zip(&hyps).enumerate() {
                let (r, h) = (normalize(r), normalize(h));
                let (rate, alignment) = if is_wer {
                    word_error_rate(&r, &h)
                } else {
                    char_error_rate(&r, &h)
                }
                .with_context(|| format!("utterance {}", i + 1))?;
                totals.0 += alignment.substitutions;
                totals.1 += alignment.insertions;
                totals.2 += alignment.deletions;
                totals.3 += alignment.hits;
                totals.4 += alignment.ref_len;
                utterances.push(serde_json::json!({
                    "index": i,
                    "rate": rate,
                    "alignment": alignment,
                }));
            }
            let corpus_rate = (totals.0 + totals.1 + totals.2) as f64 / totals.4 as f64;
            let name = if is_wer { "wer" } else { "cer" };
            (
                name.to_string(),
                serde_json::json!({
                    "rate": corpus_rate,
                    "substitutions": totals.0,
                    "insertions": totals.1,
                    "deletions": totals.2,
                    "hits": totals.3,
                    "ref_len": totals.4,
                }),
                utterances,
            )
        }
        MetricArg::Bleu => {
            let refs_n: Vec<String> = refs.iter().map(&normalize).collect();
            let hyps_n: Vec<String> = hyps.iter().map(&normalize).collect();
            let bleu = corpus_bleu(&refs_n, &hyps_n, 4)?;
            (
                "bleu".to_string(),
                serde_json::json!({ "bleu": bleu }),
                Vec::new(),
            )
        }
        MetricArg::Lid => {
            let refs_t: Vec<String> = refs.iter().map(|s| s.trim().to_string()).collect();
            let hyps_t: Vec<String> = hyps.iter().map(|s| s.trim().to_string()).collect();
            let accuracy = lid_accuracy(&refs_t, &hyps_t)?;
            let utterances = refs_t
                .iter()
                .zip(&hyps_t)
                .enumerate()
                .map(|(i, (r, h))| {
                    serde_json::json!({
                        "index": i, "reference": r, "predicted": h, "match": r == h,
                    })
                })
                .collect();
            (
                "lid".to_string(),
                serde_json::json!({ "accuracy": accuracy }),
                utterances,
            )
        }
    };

    let report = ScoreReport {
        metric: metric_name,
        normalizer: match args.normalizer {
            NormalizerArg::None => "none",
            NormalizerArg::Basic => "basic",
            NormalizerArg::English => "english",
        }
        .to_string(),
        corpus,
        utterances,
    };
    write_output(args.output.as_deref(), |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        writeln!(w)?;
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// vocab-build

#[derive(Args)]
struct VocabBuildArgs {
    /// Pieces file, one piece per line, verbatim
    #[arg(long, conflicts_with = "bpe_model")]
    pieces: Option<PathBuf>,
    /// Take the pieces from a trained BPE model instead
    #[arg(long)]
    bpe_model: Option<PathBuf>,
    /// Comma-separated speech language codes
    #[arg(long, default_value = "en")]
    languages: String,
    /// Comma-separated translation target codes
    #[arg(long, default_value = "")]
    st_targets: String,
    /// Output vocabulary file
    #[arg(short, long)]
    output: PathBuf,
}

fn cmd_vocab_build(args: VocabBuildArgs) -> Result<()> {
    let pieces: Vec<String> = match (&args.pieces, &args.bpe_model) {
        (Some(path), None) => read_lines(path)?,
        (None, Some(path)) => BpeModel::read_from_file(path)?.pieces().to_vec(),
        _ => bail!("exactly one of --pieces / --bpe-model is required"),
    };
    let split = |s: &str| -> Vec<String> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(str::to_string)
            .collect()
    };
    let vocab = Vocabulary::build(&pieces, &split(&args.languages), &split(&args.st_targets))?;
    atomic_write(&args.output, |w| {
        vocab.to_writer(w)?;
        Ok(())
    })?;
    eprintln!("wrote {} ({} tokens)", args.output.display(), vocab.len());
    Ok(())
}
