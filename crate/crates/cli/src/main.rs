use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use qaclust::embeddings::{embed_all, HashEmbedder, DEFAULT_DIM};
use qaclust::ingest::AnsweredPolicy;
use qaclust::report::render_clusters;
use qaclust::simgraph::write_edges_jsonl;
use qaclust::sweep::run_sweep_with_clusters;
use qaclust::{
    assign_to_cluster, build_graph, cluster, filter_questions, hash_embed, parse_posts, read_vectors, render_report,
    write_vectors, ClusterSet, Distance, FilterConfig, PostFormat, Question, ReportFormat, SweepConfig,
    VectorCollection, DEFAULT_THRESHOLDS,
};

#[derive(Parser)]
#[command(name = "qaclust", version, about = "Group duplicate-intent questions by similarity-threshold clustering")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter a posts dump down to answerable questions.
    Ingest(IngestArgs),
    /// Produce or validate a vector file for a questions file.
    Embed(EmbedArgs),
    /// Cluster at a single threshold.
    Cluster(ClusterArgs),
    /// Cluster and score at several thresholds.
    Sweep(SweepArgs),
    /// Find the cluster a new question belongs to.
    Assign(AssignArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Xml,
    Jsonl,
}

#[derive(clap::Args)]
struct IngestArgs {
    #[arg(long)]
    posts: PathBuf,
    #[arg(long, value_enum, default_value = "xml")]
    format: Format,
    /// Comma-separated tag whitelist.
    #[arg(long, value_delimiter = ',', default_value = "javascript,python")]
    tags: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    /// Keep questions whose body contains images.
    #[arg(long)]
    keep_images: bool,
    /// Longest allowed code block in characters; 0 drops any code block.
    #[arg(long, default_value_t = 0)]
    max_code_chars: usize,
    /// Only count a question as answered when it has an accepted answer.
    #[arg(long)]
    accepted_only: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Provider {
    Hash,
    File,
}

#[derive(clap::Args)]
struct EmbedArgs {
    #[arg(long)]
    questions: PathBuf,
    #[arg(long, value_enum, default_value = "hash")]
    provider: Provider,
    /// Output path for `hash`, input path for `file`.
    #[arg(long)]
    vectors: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DIM)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args)]
struct ClusterArgs {
    #[arg(long)]
    vectors: PathBuf,
    #[arg(long)]
    threshold: f64,
    #[arg(long)]
    out: PathBuf,
    /// Smallest similarity kept in the graph (default: the threshold).
    #[arg(long)]
    min_weight: Option<f64>,
    /// Also write the stored edges as JSON lines.
    #[arg(long)]
    edges_out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SweepArgs {
    #[arg(long)]
    vectors: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_THRESHOLDS)]
    thresholds: Vec<f64>,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Print a table to stdout.
    #[arg(long)]
    table: bool,
    #[arg(long, default_value = "euclidean")]
    distance: Distance,
    /// Smallest similarity kept in the graph (default: the smallest threshold).
    #[arg(long)]
    min_weight: Option<f64>,
    /// Include wall-clock timings in the report.
    #[arg(long)]
    timings: bool,
    /// Directory for one clusters file per threshold.
    #[arg(long)]
    clusters_dir: Option<PathBuf>,
}

#[derive(clap::Args)]
struct AssignArgs {
    #[arg(long)]
    vectors: PathBuf,
    #[arg(long)]
    clusters: PathBuf,
    #[arg(long)]
    query_text: String,
    #[arg(long)]
    threshold: f64,
    /// Seed of the hash embedder that produced the vectors.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Bad arguments that clap cannot catch on its own.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<Usage>() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(usage("--workers must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("starting worker pool")?;
    pool.install(|| match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Embed(a) => embed(a),
        Command::Cluster(a) => cluster_cmd(a),
        Command::Sweep(a) => sweep(a),
        Command::Assign(a) => assign(a),
    })
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

/// Writes through a temporary sibling so readers never see partial output.
fn write_atomic(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> anyhow::Result<()>) -> anyhow::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let file = File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    let mut out = BufWriter::new(file);
    let result = f(&mut out).and_then(|_| {
        out.flush()?;
        Ok(())
    });
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(e);
    }
    drop(out);
    std::fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))
}

fn load_vectors(path: &Path) -> anyhow::Result<VectorCollection> {
    let v = read_vectors(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    if v.is_empty() {
        bail!("{} holds no vectors", path.display());
    }
    Ok(v)
}

fn check_threshold(name: &str, t: f64) -> anyhow::Result<()> {
    if !(-1.0..=1.0).contains(&t) {
        return Err(usage(format!("{name} {t} outside [-1, 1]")));
    }
    Ok(())
}

fn ingest(a: IngestArgs) -> anyhow::Result<()> {
    if a.tags.iter().all(|t| t.trim().is_empty()) {
        return Err(usage("--tags needs at least one tag"));
    }
    let format = match a.format {
        Format::Xml => PostFormat::Xml,
        Format::Jsonl => PostFormat::Jsonl,
    };
    let cfg = FilterConfig {
        exclude_images: !a.keep_images,
        exclude_code_blocks: a.max_code_chars == 0,
        max_inline_code_chars: a.max_code_chars,
        answered_policy: if a.accepted_only { AnsweredPolicy::AcceptedOnly } else { AnsweredPolicy::AnyAnswer },
        ..FilterConfig::default()
    }
    .with_tags(a.tags.iter().map(|t| t.trim()).filter(|t| !t.is_empty()));

    let mut posts = parse_posts(open(&a.posts)?, format);
    let mut error = None;
    let mut read = 0u64;
    let mut kept = 0u64;
    write_atomic(&a.out, |out| {
        let stream = std::iter::from_fn(|| match posts.next()? {
            Ok(p) => {
                read += 1;
                Some(p)
            }
            Err(e) => {
                error = Some(e);
                None
            }
        });
        for q in filter_questions(stream, &cfg) {
            serde_json::to_writer(&mut *out, &q)?;
            out.write_all(b"\n")?;
            kept += 1;
        }
        match error.take() {
            Some(e) => Err(anyhow::Error::new(e).context(format!("parsing {}", a.posts.display()))),
            None => Ok(()),
        }
    })?;
    info!("read {read} posts, kept {kept} questions");
    eprintln!("{kept} questions written to {}", a.out.display());
    Ok(())
}

fn load_questions(path: &Path) -> anyhow::Result<Vec<Question>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}: line {}", path.display(), i + 1)))
        .collect()
}

fn embed(a: EmbedArgs) -> anyhow::Result<()> {
    if a.dim == 0 {
        return Err(usage("--dim must be positive"));
    }
    let questions = load_questions(&a.questions)?;
    match a.provider {
        Provider::Hash => {
            let embedder = HashEmbedder::new(a.dim, a.seed)?;
            let texts: Vec<(u64, String)> = questions.iter().map(|q| (q.id, q.embedding_text())).collect();
            let vectors = embed_all(&embedder, texts.iter().map(|(id, t)| (*id, t.as_str())))?;
            write_atomic(&a.vectors, |out| {
                write_vectors(&vectors, out)?;
                Ok(())
            })?;
            eprintln!("{} vectors of dim {} written to {}", vectors.len(), vectors.dim(), a.vectors.display());
        }
        Provider::File => {
            let vectors = read_vectors(open(&a.vectors)?).with_context(|| format!("reading {}", a.vectors.display()))?;
            if vectors.dim() != a.dim {
                bail!("{} has dim {}, expected {}", a.vectors.display(), vectors.dim(), a.dim);
            }
            if vectors.len() != questions.len() {
                bail!("{} holds {} vectors for {} questions", a.vectors.display(), vectors.len(), questions.len());
            }
            if let Some(q) = questions.iter().find(|q| vectors.get(q.id).is_none()) {
                bail!("question {} has no vector in {}", q.id, a.vectors.display());
            }
            eprintln!("{} vectors of dim {} match the questions", vectors.len(), vectors.dim());
        }
    }
    Ok(())
}

fn cluster_cmd(a: ClusterArgs) -> anyhow::Result<()> {
    check_threshold("--threshold", a.threshold)?;
    let floor = a.min_weight.unwrap_or(a.threshold);
    check_threshold("--min-weight", floor)?;
    if floor > a.threshold {
        return Err(usage(format!("--min-weight {floor} above --threshold {}", a.threshold)));
    }
    let vectors = load_vectors(&a.vectors)?;
    let started = Instant::now();
    let graph = build_graph(&vectors, floor)?;
    info!("graph: {} vertices, {} edges in {:.2?}", graph.len(), graph.edge_count(), started.elapsed());
    let clusters = cluster(&graph, a.threshold)?;
    write_atomic(&a.out, |out| Ok(out.write_all(render_clusters(&clusters).as_bytes())?))?;
    if let Some(path) = &a.edges_out {
        write_atomic(path, |out| Ok(write_edges_jsonl(&graph, out)?))?;
    }
    eprintln!("{} clusters over {} questions", clusters.len(), clusters.point_count());
    Ok(())
}

fn sweep(a: SweepArgs) -> anyhow::Result<()> {
    let cfg = SweepConfig { thresholds: a.thresholds, distance: a.distance, min_weight_stored: a.min_weight };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    if a.report.is_none() && !a.table && a.clusters_dir.is_none() {
        return Err(usage("nothing to write: pass --report, --table or --clusters-dir"));
    }
    let vectors = load_vectors(&a.vectors)?;
    let (mut report, sets) = run_sweep_with_clusters(&vectors, &cfg)?;
    if !a.timings {
        report.timing = None;
    }
    if let Some(path) = &a.report {
        write_atomic(path, |out| Ok(out.write_all(render_report(&report, ReportFormat::Json).as_bytes())?))?;
    }
    if let Some(dir) = &a.clusters_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for cs in &sets {
            let path = dir.join(format!("clusters_{}.json", cs.threshold()));
            write_atomic(&path, |out| Ok(out.write_all(render_clusters(cs).as_bytes())?))?;
        }
    }
    if a.table {
        io::stdout().lock().write_all(render_report(&report, ReportFormat::Table).as_bytes())?;
    }
    Ok(())
}

fn assign(a: AssignArgs) -> anyhow::Result<()> {
    check_threshold("--threshold", a.threshold)?;
    let vectors = load_vectors(&a.vectors)?;
    let clusters: ClusterSet = serde_json::from_reader(open(&a.clusters)?)
        .with_context(|| format!("reading {}", a.clusters.display()))?;
    let query = hash_embed(&a.query_text, vectors.dim(), a.seed).context("embedding query")?;
    let found = assign_to_cluster(&clusters, &vectors, &query, a.threshold)?;
    let out = match found {
        Some(i) => serde_json::json!({ "cluster": i, "members": clusters.clusters()[i] }),
        None => serde_json::json!({ "cluster": null }),
    };
    println!("{out}");
    Ok(())
}
