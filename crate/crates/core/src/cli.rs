//! The `gramctc` command line. Structured results go to stdout as JSON;
//! failures print `{"error": {"kind", "message"}}` and exit nonzero.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::checks::{self, CheckReport, InstanceShape};
use crate::decode::{beam_search, framewise_dump, greedy_decode};
use crate::error::{Error, Result};
use crate::gramselect::{
    count_corpus_grams, filter_grams, refine_pipeline, FilterPolicy, GramStats, RefineConfig,
    StatsSource,
};
use crate::loss::{
    gram_ctc_loss_grad, log_softmax, read_matrix, write_matrix, LogitsMatrix, MatrixFormat,
};
use crate::toytrain::{
    evaluate_cer, read_dataset, synth_dataset, train, write_dataset, LossSpec, Sample, SynthConfig,
    ToyModel, TrainConfig,
};
use crate::vocab::GramVocab;

#[derive(Parser, Debug)]
#[command(
    name = "gramctc",
    version,
    about = "Gram-CTC loss, decoders, gram selection and toy training"
)]
pub struct Cli {
    /// Gram vocabulary file.
    #[arg(long, global = true)]
    vocab: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Format for matrix files written by the command.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Overrides the command's default pass threshold.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Worker threads for per-file commands.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Binary,
    Csv,
    Json,
}

impl From<Format> for MatrixFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Binary => MatrixFormat::Binary,
            Format::Csv => MatrixFormat::Csv,
            Format::Json => MatrixFormat::Json,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Loss of one label under each logits file.
    Loss {
        #[arg(required = true)]
        logits: Vec<PathBuf>,
        #[arg(long)]
        label: String,
        /// Write the gradient (single input only).
        #[arg(long)]
        grad: Option<PathBuf>,
    },
    /// Analytic gradient against central differences on random instances.
    GradCheck {
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long, default_value_t = 50)]
        instances: usize,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
    },
    Decode {
        #[arg(required = true)]
        logits: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = DecodeMode::Greedy)]
        mode: DecodeMode,
        #[arg(long, default_value_t = 16)]
        beam_width: usize,
        #[arg(long, default_value_t = 1)]
        n_best: usize,
        /// Print the greedy per-frame grams as `_|th|th|e` lines instead of JSON.
        #[arg(long)]
        dump_framewise: bool,
    },
    /// DP likelihood against brute-force enumeration on random instances.
    OracleCheck {
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long, default_value_t = 200)]
        instances: usize,
    },
    /// Likelihoods of all producible labels sum to one.
    NormalizeCheck {
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long, default_value_t = 50)]
        instances: usize,
    },
    /// Writes a stats file (`count<TAB>gram`) for the corpora.
    GramCount {
        #[arg(required = true)]
        corpus: Vec<PathBuf>,
        #[arg(long, default_value_t = 3)]
        max_len: usize,
        /// Base units; inferred from the corpus when omitted.
        #[arg(long)]
        units: Option<String>,
    },
    /// Writes a vocab file selected from a stats file.
    GramFilter {
        stats: PathBuf,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Base units; defaults to the single-unit grams in the stats.
        #[arg(long)]
        units: Option<String>,
    },
    /// Count, filter, train, decode and refine; prints the report.
    GramRefine {
        corpus: PathBuf,
        #[arg(long, default_value_t = 2)]
        max_len: usize,
        #[arg(long, default_value_t = FilterPolicy::DEFAULT_MIN_COUNT)]
        min_count: u64,
        #[arg(long, default_value_t = FilterPolicy::DEFAULT_MIN_COUNT)]
        refine_min_count: u64,
        #[arg(long)]
        units: Option<String>,
        /// Comma-separated grams rendered as single sounds.
        #[arg(long, value_delimiter = ',')]
        fused: Vec<String>,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        vocab_out: Option<PathBuf>,
    },
    /// Writes a synthetic dataset as JSON lines.
    Synth {
        #[arg(long, default_value_t = 200)]
        num_samples: usize,
        #[arg(long, default_value = "abcde")]
        units: String,
        #[arg(long, default_value_t = 4)]
        frames_per_unit: usize,
        /// Defaults to one more than the number of prototypes.
        #[arg(long)]
        feature_dim: Option<usize>,
        #[arg(long, default_value_t = 0.3)]
        noise: f64,
        #[arg(long, default_value_t = 2)]
        min_len: usize,
        #[arg(long, default_value_t = 8)]
        max_len: usize,
        #[arg(long)]
        allow_repeats: bool,
        #[arg(long, value_delimiter = ',')]
        fused: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trains the toy model; prints the loss history.
    TrainToy {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = LossKind::Gram)]
        loss: LossKind,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, default_value_t = 1.0)]
        gram_weight: f64,
        #[arg(long, default_value_t = 1.0)]
        ctc_weight: f64,
        /// Base units for `--loss ctc`; inferred from the labels when omitted.
        #[arg(long)]
        units: Option<String>,
        #[arg(long)]
        model_out: Option<PathBuf>,
        /// `epoch,loss` CSV.
        #[arg(long)]
        history_out: Option<PathBuf>,
    },
    /// Held-out CER of a trained model on each dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(required = true)]
        data: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DecodeMode {
    Greedy,
    Beam,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
enum LossKind {
    Gram,
    Ctc,
    Joint,
}

#[derive(Args, Debug)]
struct ShapeArgs {
    #[arg(long = "max-T", default_value_t = 6)]
    max_frames: usize,
    /// Largest `|G'|`, blank included.
    #[arg(long, default_value_t = 4)]
    max_symbols: usize,
    #[arg(long, default_value_t = 2)]
    max_gram_len: usize,
    #[arg(long, default_value_t = 3)]
    max_label_len: usize,
}

impl ShapeArgs {
    fn shape(&self) -> InstanceShape {
        InstanceShape {
            max_symbols: self.max_symbols,
            max_gram_len: self.max_gram_len,
            max_frames: self.max_frames,
            max_label_len: self.max_label_len,
            feasible: false,
        }
    }
}

#[derive(Args, Debug)]
struct PolicyArgs {
    #[arg(long, conflicts_with_all = ["top_k", "keep_all"])]
    min_count: Option<u64>,
    /// Per-length quotas, e.g. `2:10,3:5`.
    #[arg(long, conflicts_with = "keep_all")]
    top_k: Option<String>,
    #[arg(long)]
    keep_all: bool,
}

impl PolicyArgs {
    fn policy(&self) -> Result<FilterPolicy> {
        if self.keep_all {
            return Ok(FilterPolicy::KeepAll);
        }
        if let Some(spec) = &self.top_k {
            let pairs = spec
                .split(',')
                .map(|p| {
                    let (len, k) = p
                        .split_once(':')
                        .ok_or_else(|| Error::InvalidConfig(format!("bad quota {p:?}")))?;
                    let parse = |s: &str| {
                        s.trim()
                            .parse::<usize>()
                            .map_err(|_| Error::InvalidConfig(format!("bad quota {p:?}")))
                    };
                    Ok((parse(len)?, parse(k)?))
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(FilterPolicy::top_k(&pairs));
        }
        Ok(FilterPolicy::MinCount(
            self.min_count.unwrap_or(FilterPolicy::DEFAULT_MIN_COUNT),
        ))
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.99)]
    momentum: f64,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Odd context width in strided frames.
    #[arg(long, default_value_t = 5)]
    window: usize,
}

impl TrainArgs {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            stride: self.stride,
            window: self.window,
            seed,
        }
    }
}

/// A trained model with what is needed to decode it.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    loss: LossKind,
    stride: usize,
    base_units: Vec<char>,
    /// Head-0 output grams in id order, blank excluded.
    grams: Vec<String>,
    model: ToyModel,
}

impl ModelFile {
    fn vocab(&self) -> Result<GramVocab> {
        GramVocab::build(&self.grams, &self.base_units)
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn error_record(e: &Error) -> Value {
    json!({ "kind": e.kind(), "message": e.to_string() })
}

fn print_json(out: &mut dyn Write, v: &impl Serialize) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, v)?;
    writeln!(out)?;
    Ok(())
}

fn load_vocab(cli: &Cli) -> Result<GramVocab> {
    let path = cli
        .vocab
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("--vocab is required".into()))?;
    GramVocab::read(open(path)?)
}

fn load_logits(path: &Path) -> Result<LogitsMatrix> {
    LogitsMatrix::new(read_matrix(open(path)?)?)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))
}

/// Applies `f` to every file on `jobs` threads; results keep input order.
fn per_file<T: Send>(
    jobs: usize,
    files: &[PathBuf],
    f: impl Fn(&Path) -> Result<T> + Sync,
) -> Result<Vec<Result<T>>> {
    Ok(pool(jobs)?.install(|| files.par_iter().map(|p| f(p)).collect()))
}

fn file_records<T: Serialize>(files: &[PathBuf], results: Vec<Result<T>>) -> (Value, bool) {
    let mut ok = true;
    let records = files
        .iter()
        .zip(results)
        .map(|(file, r)| match r {
            Ok(v) => json!({ "file": file, "result": v }),
            Err(e) => {
                ok = false;
                json!({ "file": file, "error": error_record(&e) })
            }
        })
        .collect::<Vec<_>>();
    (json!({ "results": records }), ok)
}

fn infer_units(text: impl Iterator<Item = char>) -> Vec<char> {
    let set: std::collections::BTreeSet<char> = text.filter(|c| !c.is_whitespace()).collect();
    set.into_iter().collect()
}

fn report(out: &mut dyn Write, r: &CheckReport) -> Result<bool> {
    print_json(out, &json!({ "summary": r.summary(), "report": r }))?;
    Ok(r.passed)
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<bool> {
    match &cli.command {
        Command::Loss {
            logits,
            label,
            grad,
        } => {
            let vocab = load_vocab(cli)?;
            let label = vocab.encode_label(label)?;
            if grad.is_some() && logits.len() != 1 {
                return Err(Error::InvalidConfig(
                    "--grad needs exactly one logits file".into(),
                ));
            }
            let results = per_file(cli.jobs, logits, |p| {
                gram_ctc_loss_grad(&load_logits(p)?, &label, &vocab)
            })?;
            if let (Some(path), Some(Ok(lg))) = (grad, results.first()) {
                write_matrix(&lg.grad, cli.format.into(), create(path)?)?;
            }
            let results = results
                .into_iter()
                .map(|r| r.map(|lg| json!({ "loss": lg.loss, "frames": lg.grad.rows() })))
                .collect();
            let (v, ok) = file_records(logits, results);
            print_json(out, &v)?;
            Ok(ok)
        }
        Command::GradCheck {
            shape,
            instances,
            step,
        } => {
            let tol = cli.tolerance.unwrap_or(1e-4);
            report(
                out,
                &checks::grad_check(cli.seed, *instances, &shape.shape(), *step, tol)?,
            )
        }
        Command::OracleCheck { shape, instances } => {
            let tol = cli.tolerance.unwrap_or(1e-9);
            report(
                out,
                &checks::oracle_check(cli.seed, *instances, &shape.shape(), tol)?,
            )
        }
        Command::NormalizeCheck { shape, instances } => {
            let tol = cli.tolerance.unwrap_or(1e-9);
            report(
                out,
                &checks::normalize_check(cli.seed, *instances, &shape.shape(), tol)?,
            )
        }
        Command::Decode {
            logits,
            mode,
            beam_width,
            n_best,
            dump_framewise,
        } => {
            let vocab = load_vocab(cli)?;
            if *dump_framewise {
                let lines = per_file(cli.jobs, logits, |p| {
                    let post = log_softmax(&load_logits(p)?);
                    Ok(framewise_dump(
                        &greedy_decode(&post, &vocab).framewise,
                        &vocab,
                    ))
                })?;
                for line in lines {
                    writeln!(out, "{}", line?)?;
                }
                return Ok(true);
            }
            let results = per_file(cli.jobs, logits, |p| {
                let post = log_softmax(&load_logits(p)?);
                Ok(match mode {
                    DecodeMode::Greedy => {
                        let g = greedy_decode(&post, &vocab);
                        json!({
                            "label": g.label.to_string(),
                            "path_log_prob": g.path_log_prob,
                            "framewise": framewise_dump(&g.framewise, &vocab),
                        })
                    }
                    DecodeMode::Beam => {
                        let hyps = beam_search(&post, &vocab, *beam_width, *n_best)?;
                        json!({
                            "hypotheses": hyps
                                .iter()
                                .map(|h| json!({ "label": h.label.to_string(), "log_prob": h.log_prob }))
                                .collect::<Vec<_>>(),
                        })
                    }
                })
            })?;
            let (v, ok) = file_records(logits, results);
            print_json(out, &v)?;
            Ok(ok)
        }
        Command::GramCount {
            corpus,
            max_len,
            units,
        } => {
            let base = match units {
                Some(u) => u.chars().collect(),
                None => {
                    let mut text = String::new();
                    for p in corpus {
                        text.push_str(&std::fs::read_to_string(p)?);
                    }
                    infer_units(text.chars())
                }
            };
            let mut stats = GramStats::new(StatsSource::CorpusFrequency);
            for s in per_file(cli.jobs, corpus, |p| {
                count_corpus_grams(open(p)?, *max_len, &base)
            })? {
                stats.merge(&s?);
            }
            stats.write(&mut *out)?;
            Ok(true)
        }
        Command::GramFilter {
            stats,
            policy,
            units,
        } => {
            let stats = GramStats::read(open(stats)?, StatsSource::CorpusFrequency)?;
            let base: Vec<char> = match units {
                Some(u) => u.chars().collect(),
                None => infer_units(
                    stats
                        .counts
                        .keys()
                        .filter(|g| g.chars().count() == 1)
                        .flat_map(|g| g.chars()),
                ),
            };
            let grams = filter_grams(&stats, &policy.policy()?, &base);
            GramVocab::build(&grams, &base)?.write(&mut *out)?;
            Ok(true)
        }
        Command::GramRefine {
            corpus,
            max_len,
            min_count,
            refine_min_count,
            units,
            fused,
            train,
            vocab_out,
        } => {
            let lines: Vec<String> = open(corpus)?.lines().collect::<std::io::Result<_>>()?;
            let base: Vec<char> = match units {
                Some(u) => u.chars().collect(),
                None => infer_units(lines.iter().flat_map(|l| l.chars())),
            };
            let config = RefineConfig {
                synth: SynthConfig {
                    feature_dim: base.len() + fused.len() + 1,
                    base_units: base,
                    fused_grams: fused.clone(),
                    ..SynthConfig::acceptance(0, cli.seed)
                },
                train: train.config(cli.seed),
            };
            let outcome = refine_pipeline(
                &lines,
                *max_len,
                &FilterPolicy::MinCount(*min_count),
                &config,
                &FilterPolicy::MinCount(*refine_min_count),
            )?;
            if let Some(path) = vocab_out {
                let mut w = create(path)?;
                outcome.vocab.write(&mut w)?;
                w.flush()?;
            }
            print_json(out, &outcome.report)?;
            Ok(true)
        }
        Command::Synth {
            num_samples,
            units,
            frames_per_unit,
            feature_dim,
            noise,
            min_len,
            max_len,
            allow_repeats,
            fused,
            out: path,
        } => {
            let base: Vec<char> = units.chars().collect();
            let cfg = SynthConfig {
                feature_dim: feature_dim.unwrap_or(base.len() + fused.len() + 1),
                base_units: base,
                frames_per_unit: *frames_per_unit,
                noise_sigma: *noise,
                num_samples: *num_samples,
                seed: cli.seed,
                min_label_len: *min_len,
                max_label_len: *max_len,
                distinct_adjacent: !allow_repeats,
                fused_grams: fused.clone(),
            };
            let data = synth_dataset(&cfg)?;
            match path {
                Some(p) => {
                    let mut w = create(p)?;
                    write_dataset(&data, &mut w)?;
                    w.flush()?;
                    print_json(out, &json!({ "samples": data.len(), "out": p }))?;
                }
                None => write_dataset(&data, &mut *out)?,
            }
            Ok(true)
        }
        Command::TrainToy {
            data,
            loss,
            train: targs,
            gram_weight,
            ctc_weight,
            units,
            model_out,
            history_out,
        } => {
            let samples = read_dataset(open(data)?)?;
            let spec = match loss {
                LossKind::Gram => LossSpec::Gram(load_vocab(cli)?),
                LossKind::Joint => LossSpec::Joint {
                    vocab: load_vocab(cli)?,
                    gram_weight: *gram_weight,
                    ctc_weight: *ctc_weight,
                },
                LossKind::Ctc => LossSpec::Ctc(match units {
                    Some(u) => u.chars().collect(),
                    None => {
                        infer_units(samples.iter().flat_map(|s| s.label.units().iter().copied()))
                    }
                }),
            };
            let config = targs.config(cli.seed);
            let input_dim = samples.first().map_or(0, |s| s.features.cols()) * config.stride;
            let model = ToyModel::new(config.window, input_dim, &spec.head_outputs(), cli.seed)?;
            let outcome = train(model, &samples, &spec, &config)?;
            if let Some(path) = history_out {
                std::fs::write(path, outcome.history_csv())?;
            }
            if let Some(path) = model_out {
                let vocab = spec.decode_vocab()?;
                let file = ModelFile {
                    loss: *loss,
                    stride: config.stride,
                    base_units: vocab.base_units().to_vec(),
                    grams: vocab.grams().iter().map(|g| g.text()).collect(),
                    model: outcome.model.clone(),
                };
                let mut w = create(path)?;
                serde_json::to_writer(&mut w, &file)?;
                w.flush()?;
            }
            print_json(
                out,
                &json!({
                    "history": outcome.history,
                    "skipped": outcome.skipped_total(),
                }),
            )?;
            Ok(true)
        }
        Command::Eval { model, data } => {
            let file: ModelFile = serde_json::from_reader(open(model)?)?;
            let vocab = file.vocab()?;
            let results = per_file(cli.jobs, data, |p| {
                let samples: Vec<Sample> = read_dataset(open(p)?)?;
                evaluate_cer(&file.model, &samples, &vocab, file.stride)
            })?;
            let (v, ok) = file_records(data, results);
            print_json(out, &v)?;
            Ok(ok)
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit
/// code: 0 when every requested check passes, 1 on failure or rejection, 2 on
/// a usage error.
pub fn run<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let record = json!({ "error": { "kind": "usage", "message": e.to_string() } });
            let _ = print_json(out, &record);
            return 2;
        }
    };
    match execute(&cli, out) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            let _ = print_json(out, &json!({ "error": error_record(&e) }));
            1
        }
    }
}
