use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bcrf_cli::bench::{bench, BenchConfig};
use bcrf_cli::data::{load_conll, predictions_to_conll, to_conll, Dataset, TagPolicy};
use bcrf_cli::decode::{decode_all, DecodeOptions, DecoderRegistry};
use bcrf_cli::error::{CliError, Result};
use bcrf_cli::metrics::{chunk_f1, token_accuracy};
use bcrf_cli::model::Model;
use bcrf_cli::scorer::EncodedSentence;
use bcrf_cli::synth::{partial_view, synth_bies, synth_generate};
use bcrf_cli::tensor_io::write_tensor;
use bcrf_cli::train::{init_model, train, RunConfig};
use bcrf_cli::{oracle_check, OracleCheckConfig};
use bcrf_core::ibp::{DEFAULT_SWEEPS, DEFAULT_TAU_INVERSE};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bcrf", version, about = "Sequence labeling with exact and Bregman CRF inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a linear scorer with SGD.
    Train(TrainArgs),
    /// Tag sentences with a trained model.
    Decode(DecodeArgs),
    /// Dump arc marginals in the wtensor v1 format.
    Marginals(DecodeArgs),
    /// Time forward-backward, IBP and mean field on random batches.
    Bench(BenchArgs),
    /// Compare exact and iterative inference against brute-force enumeration.
    OracleCheck(OracleArgs),
    /// Write a synthetic corpus as CoNLL.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Conll,
    Synth,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum MaskKind {
    None,
    Bies,
}

#[derive(Args)]
struct SynthSpec {
    /// Number of tags (or BIES segment types with --synth-bies).
    #[arg(long, default_value_t = 5)]
    synth_tags: usize,
    #[arg(long, default_value_t = 50)]
    synth_vocab: usize,
    #[arg(long, default_value_t = 5)]
    synth_min_len: usize,
    #[arg(long, default_value_t = 20)]
    synth_max_len: usize,
    /// Generate a BIES segmentation task instead of plain HMM tags.
    #[arg(long)]
    synth_bies: bool,
    /// Hide tag groups as in several partial annotations (0 keeps full labels).
    #[arg(long, default_value_t = 0)]
    partial_subsets: usize,
}

impl SynthSpec {
    fn generate(&self, seed: u64, count: usize) -> Result<Dataset> {
        if self.synth_min_len == 0 || self.synth_min_len > self.synth_max_len {
            return Err(CliError::Conflict("invalid synthetic length range".into()));
        }
        if self.synth_tags == 0 || self.synth_vocab == 0 {
            return Err(CliError::Conflict("synthetic tag and vocabulary sizes must be positive".into()));
        }
        let lengths = self.synth_min_len..=self.synth_max_len;
        let d = if self.synth_bies {
            synth_bies(seed, lengths, self.synth_tags, self.synth_vocab, count)
        } else {
            synth_generate(seed, lengths, self.synth_tags, self.synth_vocab, count)
        };
        Ok(d)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value = "conll")]
    format: Format,
    /// Training CoNLL file (with --format conll).
    #[arg(long, required_if_eq("format", "conll"))]
    data: Option<PathBuf>,
    /// Dev CoNLL file for per-epoch accuracy.
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Training sentences (with --format synth).
    #[arg(long, default_value_t = 2000)]
    synth_count: usize,
    /// Dev sentences drawn after the training ones (with --format synth).
    #[arg(long, default_value_t = 500)]
    synth_dev: usize,
    #[command(flatten)]
    synth: SynthSpec,
    #[arg(long, default_value = "crf")]
    inference: String,
    #[arg(long, default_value = "nll")]
    loss: String,
    #[arg(long, default_value_t = DEFAULT_SWEEPS)]
    iters: usize,
    /// Decoding temperature inverse.
    #[arg(long, default_value_t = DEFAULT_TAU_INVERSE)]
    tau_inv: f64,
    /// Temperature inverse of the IBP-based losses.
    #[arg(long, default_value_t = 1.0)]
    train_tau_inv: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long)]
    threads: Option<usize>,
    /// Structural constraints stored in the model.
    #[arg(long, value_enum, default_value = "none")]
    mask: MaskKind,
    /// Repair MBR outputs during dev decoding.
    #[arg(long)]
    repair: bool,
    /// Where to write the trained model.
    #[arg(long)]
    model: PathBuf,
    /// JSON-lines metrics log (default: stdout).
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value = "conll")]
    format: Format,
    #[arg(long, required_if_eq("format", "conll"))]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    synth_count: usize,
    /// Skip this many leading synthetic sentences (e.g. the training part).
    #[arg(long, default_value_t = 0)]
    synth_skip: usize,
    #[command(flatten)]
    synth: SynthSpec,
    #[arg(long, default_value = "crf")]
    inference: String,
    #[arg(long, default_value_t = DEFAULT_SWEEPS)]
    iters: usize,
    #[arg(long, default_value_t = DEFAULT_TAU_INVERSE)]
    tau_inv: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// Replace MBR outputs that use a forbidden transition by the best valid path.
    #[arg(long)]
    repair: bool,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [32, 128, 512])]
    lengths: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [8, 32])]
    tags: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [16, 64])]
    batches: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [5, 10])]
    ibp_iters: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [5, 10])]
    mf_iters: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// Machine-readable report.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[command(flatten)]
    synth: SynthSpec,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn set_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Other(e.to_string()))?;
    }
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io("<stdout>", e)),
    }
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    set_threads(a.threads)?;
    let (train_data, dev) = match a.format {
        Format::Conll => {
            let path = a.data.as_deref().expect("required by clap");
            let train_data = load_conll(path, TagPolicy::Grow)?;
            let dev = a
                .dev
                .as_deref()
                .map(|p| load_conll(p, TagPolicy::Fixed(&train_data.tags)))
                .transpose()?;
            (train_data, dev)
        }
        Format::Synth => {
            let all = a.synth.generate(a.seed, a.synth_count + a.synth_dev)?;
            let (tr, dev) = all.split_at(a.synth_count);
            let tr = if a.synth.partial_subsets > 0 {
                partial_view(&tr, a.synth.partial_subsets)
            } else {
                tr
            };
            (tr, (!dev.is_empty()).then_some(dev))
        }
    };
    let cfg = RunConfig {
        inference: a.inference,
        loss: a.loss,
        iters: a.iters,
        tau_inverse: a.tau_inv,
        train_tau_inverse: a.train_tau_inv,
        seed: a.seed,
        lr: a.lr,
        epochs: a.epochs,
        batch_size: a.batch_size,
        repair: a.repair,
    };
    let mut model = init_model(&train_data, a.mask == MaskKind::Bies)?;
    let mut sink: Box<dyn std::io::Write> = match &a.metrics {
        Some(p) => Box::new(fs::File::create(p).map_err(|e| CliError::io(p, e))?),
        None => Box::new(std::io::stdout()),
    };
    let log_path = a.metrics.clone().unwrap_or_else(|| "<stdout>".into());
    train(&cfg, &mut model, &train_data, dev.as_ref(), |m| {
        let line = serde_json::to_string(m).map_err(|e| CliError::Other(e.to_string()))?;
        writeln!(sink, "{line}").map_err(|e| CliError::io(&log_path, e))
    })?;
    model.save(&a.model)
}

fn load_for_decoding(a: &DecodeArgs) -> Result<(Model, Dataset)> {
    let model = Model::load(&a.model)?;
    let data = match a.format {
        Format::Conll => load_conll(a.data.as_deref().expect("required by clap"), TagPolicy::Fixed(&model.tags))?,
        Format::Synth => {
            let (_, d) = a.synth.generate(a.seed, a.synth_skip + a.synth_count)?.split_at(a.synth_skip);
            if d.tags != model.tags {
                return Err(CliError::Conflict("synthetic tag set does not match the model".into()));
            }
            d
        }
    };
    Ok((model, data))
}

fn options(a: &DecodeArgs) -> DecodeOptions {
    DecodeOptions {
        tau_inverse: a.tau_inv,
        iters: a.iters,
        repair: a.repair,
    }
}

fn cmd_decode(a: DecodeArgs) -> Result<()> {
    set_threads(a.threads)?;
    let (model, data) = load_for_decoding(&a)?;
    let registry = DecoderRegistry::standard();
    let decoder = registry.get(&a.inference)?;
    let sentences: Vec<EncodedSentence> = data.records.iter().map(|r| EncodedSentence::new(r, &model.tokens)).collect();
    let preds = decode_all(decoder, &model.scorer, &sentences, &options(&a))?;
    emit(a.out.as_deref(), &predictions_to_conll(&data, &preds))?;
    eprintln!("accuracy {:.4}", token_accuracy(&data, &preds));
    if model.scorer.mask.is_some() {
        eprintln!("chunk-f1 {:.4}", chunk_f1(&data, &preds));
    }
    Ok(())
}

fn cmd_marginals(a: DecodeArgs) -> Result<()> {
    set_threads(a.threads)?;
    let (model, data) = load_for_decoding(&a)?;
    let registry = DecoderRegistry::standard();
    let decoder = registry.get(&a.inference)?;
    decoder.check(&model.scorer)?;
    let opts = options(&a);
    let mut text = String::new();
    for r in &data.records {
        let q = decoder.marginals(&model.scorer, &EncodedSentence::new(r, &model.tokens), &opts)?;
        write_tensor(&mut text, q.shape(), q.values());
    }
    emit(a.out.as_deref(), &text)
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    set_threads(a.threads)?;
    let cfg = BenchConfig {
        lengths: a.lengths,
        tags: a.tags,
        batches: a.batches,
        ibp_iters: a.ibp_iters,
        mf_iters: a.mf_iters,
        warmup: a.warmup,
        reps: a.reps,
        seed: a.seed,
    };
    let report = bench(&cfg)?;
    print!("{}", report.to_text());
    if let Some(p) = &a.json {
        let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Other(e.to_string()))?;
        fs::write(p, json).map_err(|e| CliError::io(p, e))?;
    }
    Ok(())
}

fn cmd_oracle_check(a: OracleArgs) -> Result<()> {
    set_threads(a.threads)?;
    let report = oracle_check(&OracleCheckConfig {
        count: a.count,
        seed: a.seed,
    })?;
    print!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Other("oracle check failed".into()))
    }
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let mut d = a.synth.generate(a.seed, a.count)?;
    if a.synth.partial_subsets > 0 {
        d = partial_view(&d, a.synth.partial_subsets);
    }
    emit(a.out.as_deref(), &to_conll(&d))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Marginals(a) => cmd_marginals(a),
        Command::Bench(a) => cmd_bench(a),
        Command::OracleCheck(a) => cmd_oracle_check(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
