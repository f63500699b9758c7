use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use seqlab_core::data::{load_embeddings, read_conll_str, split_corpus, write_conll, Sentence, Task, Token};
use seqlab_core::pipeline::{AnnotatedDocument, PipelineBundle};
use seqlab_core::train::{evaluate_model, load_model_for, make_toy_corpus, save_model, train, TrainConfig};
use seqlab_core::Rng;

use crate::server::{self, CorsPolicy};

#[derive(Debug, Parser)]
#[command(
    name = "seqlab",
    version,
    about = "Char-CNN + Bi-LSTM + CRF taggers for POS, chunking and NER"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Train one task model on a CoNLL corpus.
    Train(TrainArgs),
    /// Score a model on a gold CoNLL file.
    Eval(EvalArgs),
    /// Annotate raw text with a pipeline bundle.
    Tag(TagArgs),
    /// Serve the JSON annotation API.
    Serve(ServeArgs),
    /// Shuffle a corpus and cut it 70/10/20 into train, dev and test files.
    Split(SplitArgs),
    /// Combine three trained models into a pipeline bundle directory.
    Bundle(BundleArgs),
    /// Write the small synthetic corpus used in tests and demos.
    Toy(ToyArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TaskArg {
    Pos,
    Chunk,
    Ner,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Pos => Task::Pos,
            TaskArg::Chunk => Task::Chunk,
            TaskArg::Ner => Task::Ner,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub task: TaskArg,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    /// Word vectors in text format (`count dim` header, then `word v1 .. vd`).
    /// Without it, word vectors start random.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the per-epoch history as JSON.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperParams,
}

/// Overrides for [`TrainConfig::for_task`].
#[derive(Debug, Default, Args)]
pub struct HyperParams {
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lr_decay: Option<f64>,
    #[arg(long)]
    pub clip: Option<f64>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Ignored when embeddings are given; the file decides.
    #[arg(long)]
    pub word_dim: Option<usize>,
    #[arg(long)]
    pub char_dim: Option<usize>,
    #[arg(long)]
    pub char_window: Option<usize>,
    #[arg(long)]
    pub char_filters: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub tag_dim: Option<usize>,
    /// Keep word vectors fixed during training.
    #[arg(long)]
    pub freeze_embeddings: bool,
    /// Let the CRF learn IOB2-invalid transitions.
    #[arg(long)]
    pub unconstrained: bool,
}

impl HyperParams {
    pub fn apply(&self, config: &mut TrainConfig) {
        let e = &mut config.encoder;
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value {
                    $field = v;
                }
            };
        }
        set!(config.learning_rate, self.lr);
        set!(config.lr_decay, self.lr_decay);
        set!(config.gradient_clip, self.clip);
        set!(config.max_epochs, self.max_epochs);
        set!(config.patience, self.patience);
        set!(e.dropout, self.dropout);
        set!(e.word_dim, self.word_dim);
        set!(e.char_cnn.char_dim, self.char_dim);
        set!(e.char_cnn.window, self.char_window);
        set!(e.char_cnn.filters, self.char_filters);
        set!(e.lstm_hidden, self.hidden);
        set!(e.tag_dim, self.tag_dim);
        if self.freeze_embeddings {
            e.train_word_embeddings = false;
        }
        if self.unconstrained {
            config.constrain_iob2 = false;
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub task: TaskArg,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Json,
    Conll,
}

#[derive(Debug, Args)]
pub struct TagArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Input text file; stdin when absent.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// 0 picks a free port; the bound address is printed on stdout.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Allowed browser origin; repeat for several. Any origin when absent.
    #[arg(long = "cors-origin", env = "SEQLAB_CORS_ORIGINS", value_delimiter = ',')]
    pub cors_origins: Vec<String>,
    /// Send no CORS headers at all.
    #[arg(long, conflicts_with = "cors_origins")]
    pub no_cors: bool,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Files are written as `<prefix>.train.conll`, `.dev.conll`, `.test.conll`.
    #[arg(long)]
    pub out_prefix: String,
}

#[derive(Debug, Args)]
pub struct BundleArgs {
    #[arg(long)]
    pub pos: PathBuf,
    #[arg(long)]
    pub chunk: PathBuf,
    #[arg(long)]
    pub ner: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Files are written as `<prefix>.train.conll` and `<prefix>.dev.conll`.
    #[arg(long)]
    pub out_prefix: String,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => run_train(a),
        Command::Eval(a) => run_eval(a),
        Command::Tag(a) => run_tag(a),
        Command::Serve(a) => run_serve(a),
        Command::Split(a) => run_split(a),
        Command::Bundle(a) => run_bundle(a),
        Command::Toy(a) => run_toy(a),
    }
}

/// Reads a CoNLL file, taking the column count from its first token line.
pub fn read_corpus(path: &Path) -> Result<(Vec<Sentence>, usize)> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let columns = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .map_or(1, |l| l.split_whitespace().count());
    let sentences = read_conll_str(&text, columns).with_context(|| format!("in {}", path.display()))?;
    Ok((sentences, columns))
}

/// Creates `path`, and its parent directories if needed.
fn create_file(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    File::create(path).with_context(|| format!("cannot create {}", path.display()))
}

fn write_corpus(path: &Path, sentences: &[Sentence], columns: usize) -> Result<()> {
    let mut out = BufWriter::new(create_file(path)?);
    write_conll(&mut out, sentences, columns)?;
    out.flush()?;
    Ok(())
}

fn run_train(args: TrainArgs) -> Result<()> {
    let task = Task::from(args.task);
    let mut config = TrainConfig::for_task(task);
    args.hyper.apply(&mut config);
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let (train_set, _) = read_corpus(&args.train)?;
    let (dev_set, _) = read_corpus(&args.dev)?;
    info!(
        "{task}: {} training and {} dev sentences",
        train_set.len(),
        dev_set.len()
    );
    let embeddings = match &args.embeddings {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            let mut rng = Rng::new(config.seed).fork(4);
            let table =
                load_embeddings(BufReader::new(file), &mut rng).with_context(|| format!("in {}", path.display()))?;
            info!("loaded {} word vectors of width {}", table.len(), table.dim());
            Some(table)
        }
        None => None,
    };
    let (model, history) = train(&train_set, &dev_set, embeddings.as_ref(), task, &config)?;
    let mut out = BufWriter::new(create_file(&args.out)?);
    save_model(&model, &mut out)?;
    out.flush()?;
    if let Some(path) = &args.history {
        fs::write(path, serde_json::to_string_pretty(&history)?)?;
    }
    println!(
        "best dev {} {:.2} at epoch {} of {}{}; model written to {}",
        if task.is_span() { "F1" } else { "accuracy" },
        history.best_metric,
        history.best_epoch,
        history.epochs.len(),
        if history.stopped_early { " (stopped early)" } else { "" },
        args.out.display()
    );
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let task = Task::from(args.task);
    let file = File::open(&args.model).with_context(|| format!("cannot open {}", args.model.display()))?;
    let model = load_model_for(BufReader::new(file), task).with_context(|| format!("in {}", args.model.display()))?;
    let (test, _) = read_corpus(&args.test)?;
    let report = evaluate_model(&model, &test)?;
    print!("{}", report.conlleval_text());
    if let Some(path) = &args.json {
        fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}

fn load_bundle(dir: &Path) -> Result<PipelineBundle> {
    PipelineBundle::load(dir).with_context(|| format!("cannot load bundle {}", dir.display()))
}

/// Rows of `word pos chunk ner`, blank line after each sentence.
pub fn document_to_conll(doc: &AnnotatedDocument) -> Result<String> {
    let sentences: Vec<Sentence> = doc
        .sentences
        .iter()
        .map(|records| {
            Sentence::new(
                records
                    .iter()
                    .map(|r| Token {
                        word: r.word.clone(),
                        pos: r.pos.clone(),
                        chunk: r.chunk.clone(),
                        ner: r.ner.clone(),
                    })
                    .collect(),
            )
        })
        .collect();
    let mut buf = Vec::new();
    write_conll(&mut buf, &sentences, 4)?;
    Ok(String::from_utf8(buf)?)
}

fn run_tag(args: TagArgs) -> Result<()> {
    let bundle = load_bundle(&args.bundle)?;
    let text = match &args.input {
        Some(path) => fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?,
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).context("cannot read stdin")?;
            s
        }
    };
    let doc = bundle.annotate(&text)?;
    let out = match args.format {
        OutputFormat::Json => doc.to_json()? + "\n",
        OutputFormat::Conll => document_to_conll(&doc)?,
    };
    io::stdout().write_all(out.as_bytes())?;
    Ok(())
}

fn run_serve(args: ServeArgs) -> Result<()> {
    let bundle = Arc::new(load_bundle(&args.bundle)?);
    let cors = if args.no_cors {
        CorsPolicy::Disabled
    } else if args.cors_origins.is_empty() {
        CorsPolicy::AnyOrigin
    } else {
        CorsPolicy::Origins(args.cors_origins.clone())
    };
    let app = server::router(bundle, &cors)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("cannot listen on {addr}"))?;
        let bound: SocketAddr = listener.local_addr()?;
        println!("listening on http://{bound}");
        io::stdout().flush()?;
        server::serve(listener, app).await?;
        info!("shut down");
        Ok(())
    })
}

fn run_split(args: SplitArgs) -> Result<()> {
    let (sentences, columns) = read_corpus(&args.input)?;
    let (train_set, dev, test) = split_corpus(&sentences, args.seed)?;
    for (name, part) in [("train", &train_set), ("dev", &dev), ("test", &test)] {
        let path = PathBuf::from(format!("{}.{name}.conll", args.out_prefix));
        write_corpus(&path, part, columns)?;
        println!("{name}: {} sentences -> {}", part.len(), path.display());
    }
    Ok(())
}

fn run_bundle(args: BundleArgs) -> Result<()> {
    let load = |path: &Path, task: Task| -> Result<_> {
        let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        load_model_for(BufReader::new(file), task).with_context(|| format!("in {}", path.display()))
    };
    let bundle = PipelineBundle::new(
        load(&args.pos, Task::Pos)?,
        load(&args.chunk, Task::Chunk)?,
        load(&args.ner, Task::Ner)?,
    )?;
    if args.out.exists() && fs::read_dir(&args.out)?.next().is_some() {
        bail!("{} exists and is not empty", args.out.display());
    }
    fs::create_dir_all(&args.out)?;
    bundle.save(&args.out)?;
    println!("bundle written to {}", args.out.display());
    Ok(())
}

fn run_toy(args: ToyArgs) -> Result<()> {
    let (train_set, dev) = make_toy_corpus(args.seed);
    for (name, part) in [("train", &train_set), ("dev", &dev)] {
        let path = PathBuf::from(format!("{}.{name}.conll", args.out_prefix));
        write_corpus(&path, part, 4)?;
        println!("{name}: {} sentences -> {}", part.len(), path.display());
    }
    Ok(())
}
