use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use kernel_treelets::datagen::{self, Shape, ShapeSpec};
use kernel_treelets::eval::{self, Reference};
use kernel_treelets::extend::{self, KtConfig, Stage, DEFAULT_KNN_K};
use kernel_treelets::io::{self, Columns, CsvOptions, LabelsFile, DEFAULT_MISSING_TOKENS};
use kernel_treelets::treelet::{PairSearch, DEFAULT_STOP_TOL};
use kernel_treelets::{ClusterLabels, Dataset, Dendrogram, KernelSpec, Observations};

use crate::kernel_arg::{self, KernelArg};
use crate::manifest::{Manifest, StageClock};

/// Bad invocation that clap itself cannot catch; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser)]
#[command(
    name = "kt",
    version,
    about = "Hierarchical clustering with kernel treelets"
)]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, value_parser = parse_positive)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded 2-D benchmark dataset as `x,y,label` CSV.
    Generate(GenerateArgs),
    /// Cluster a CSV table or an edge list with kernel treelets.
    Cluster(ClusterArgs),
    /// ROC curve and AUC of a hierarchy (or of several flat clusterings).
    Roc(RocArgs),
    /// Pairwise TPR/FPR of one flat clustering.
    Eval(EvalArgs),
    /// k-means baseline.
    Kmeans(KmeansArgs),
    /// Z-score each column over its observed entries.
    Normalize(NormalizeArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ShapeName {
    Circles,
    Moons,
    Blobs,
    Aniso,
    Varied,
    Uniform,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    shape: ShapeName,
    #[arg(long, value_parser = parse_positive)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Noise level for circles and moons.
    #[arg(long)]
    noise: Option<f64>,
    /// Inner radius for circles.
    #[arg(long)]
    factor: Option<f64>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum HeaderMode {
    /// Treat the first row as a header if any of its cells is not numeric.
    #[default]
    Auto,
    Yes,
    No,
}

#[derive(Args, Clone)]
struct TableArgs {
    /// Whether the CSV starts with a header row.
    #[arg(long, value_enum, default_value_t = HeaderMode::Auto)]
    header: HeaderMode,
    /// Zero-based columns to use, e.g. `0,2,3`. Default: all except a
    /// header column named `label` or `class`.
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum SampleSize {
    Full,
    Count(usize),
}

fn parse_sample_size(s: &str) -> Result<SampleSize, String> {
    if s == "full" {
        return Ok(SampleSize::Full);
    }
    match s.parse::<usize>() {
        Ok(n) if n >= 2 => Ok(SampleSize::Count(n)),
        _ => Err(format!("expected 'full' or an integer >= 2, found '{s}'")),
    }
}

fn parse_non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a non-negative number, found '{s}'")),
    }
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        Ok(_) => Err("must be at least 1".into()),
        Err(_) => Err(format!("expected a positive integer, found '{s}'")),
    }
}

fn parse_odd(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(k) if k % 2 == 1 => Ok(k),
        _ => Err(format!("expected an odd positive integer, found '{s}'")),
    }
}

#[derive(Args)]
#[command(after_help = format!("Kernels:\n{}", kernel_arg::GRAMMAR))]
struct ClusterArgs {
    /// CSV table, or an edge list (`u v` per line) for the graph kernel.
    #[arg(long)]
    input: PathBuf,
    /// Kernel, `name[:key=value,...]`; see below.
    #[arg(long, value_parser = kernel_arg::parse_kernel)]
    kernel: KernelArg,
    /// Number of flat clusters to cut the hierarchy into.
    #[arg(long, value_parser = parse_positive)]
    clusters: usize,
    /// Items clustered by treelets (`full` = all); the rest get labels by
    /// nearest neighbours in kernel distance.
    #[arg(long, value_parser = parse_sample_size, default_value = "full")]
    sample_size: SampleSize,
    /// Weight of the absolute covariance in the pair score.
    #[arg(long, value_parser = parse_non_negative, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, value_parser = parse_odd, default_value_t = DEFAULT_KNN_K)]
    knn_k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stop merging once the best pair score falls below this.
    #[arg(long, value_parser = parse_non_negative, default_value_t = DEFAULT_STOP_TOL)]
    stop_tol: f64,
    #[command(flatten)]
    table: TableArgs,
    /// Labels JSON.
    #[arg(short, long)]
    output: PathBuf,
    /// Also write the sample hierarchy as JSON.
    #[arg(long)]
    tree: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReferenceKind {
    /// `.csv` files are class labels, anything else an edge list.
    Auto,
    Classes,
    Graph,
}

#[derive(Args)]
struct ReferenceArgs {
    /// Ground truth: a CSV with a class column, or an edge list.
    #[arg(long)]
    reference: PathBuf,
    #[arg(long, value_enum, default_value_t = ReferenceKind::Auto)]
    reference_kind: ReferenceKind,
    /// Class column name (default `label`, `class`, else the last column).
    #[arg(long)]
    reference_column: Option<String>,
}

#[derive(Args)]
struct RocArgs {
    /// Hierarchy JSON written by `cluster --tree`.
    #[arg(long, conflicts_with = "pred", required_unless_present = "pred")]
    tree: Option<PathBuf>,
    /// Flat clusterings (labels JSON), one ROC point each.
    #[arg(long, num_args = 1..)]
    pred: Vec<PathBuf>,
    #[command(flatten)]
    reference: ReferenceArgs,
    /// Curve as `fpr,tpr` CSV (or JSON if the name ends in `.json`).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[command(flatten)]
    reference: ReferenceArgs,
    /// Matching matrix and rates as JSON.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct KmeansArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = parse_positive)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 300)]
    max_iters: usize,
    /// Replace missing cells by their column mean first.
    #[arg(long)]
    impute_mean: bool,
    #[command(flatten)]
    table: TableArgs,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct NormalizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    table: TableArgs,
    #[arg(short, long)]
    output: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("starting worker threads")?;
    }
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Cluster(a) => cluster(a),
        Command::Roc(a) => roc(a),
        Command::Eval(a) => evaluate(a),
        Command::Kmeans(a) => kmeans(a),
        Command::Normalize(a) => normalize(a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn generate(a: GenerateArgs) -> Result<()> {
    let n = a.n;
    let mut spec = match a.shape {
        ShapeName::Circles => ShapeSpec::named("circles", n, a.seed),
        ShapeName::Moons => ShapeSpec::named("moons", n, a.seed),
        ShapeName::Blobs => ShapeSpec::named("blobs", n, a.seed),
        ShapeName::Aniso => ShapeSpec::named("aniso", n, a.seed),
        ShapeName::Varied => ShapeSpec::named("varied", n, a.seed),
        ShapeName::Uniform => ShapeSpec::named("uniform", n, a.seed),
    }?;
    match (&mut spec.shape, a.noise, a.factor) {
        (_, None, None) => {}
        (Shape::Circles { factor, noise }, nz, f) => {
            *noise = nz.unwrap_or(*noise);
            *factor = f.unwrap_or(*factor);
        }
        (Shape::Moons { noise }, nz, None) => *noise = nz.unwrap_or(*noise),
        _ => {
            return Err(usage(
                "--noise applies to circles and moons, --factor to circles",
            ))
        }
    }
    let g = datagen::generate(&spec).map_err(|e| usage(e.to_string()))?;

    let mut m = Manifest::new("generate", serde_json::to_value(&spec)?);
    let mut clock = StageClock::new();
    clock.start("write");
    let mut w = create(&a.output)?;
    io::write_points_csv(&mut w, &g.data, &g.labels)?;
    w.flush()?;
    m.timings_ms = clock.finish();
    m.add_output(&a.output);
    m.write_for(&a.output)?;
    Ok(())
}

/// First-row header sniffing: a header has some non-numeric, non-missing cell.
fn sniff_header(path: &Path) -> Result<bool> {
    let mut first = String::new();
    BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?)
        .read_line(&mut first)?;
    Ok(first
        .trim_end_matches(['\r', '\n'])
        .split(',')
        .map(str::trim)
        .any(|cell| !DEFAULT_MISSING_TOKENS.contains(&cell) && cell.parse::<f64>().is_err()))
}

fn read_table(path: &Path, t: &TableArgs) -> Result<io::Table> {
    let has_header = match t.header {
        HeaderMode::Auto => sniff_header(path)?,
        HeaderMode::Yes => true,
        HeaderMode::No => false,
    };
    let columns = match &t.columns {
        Some(c) => Columns::Indices(c.clone()),
        None if has_header => Columns::ExceptNamed(vec!["label".into(), "class".into()]),
        None => Columns::All,
    };
    let opts = CsvOptions {
        has_header,
        columns,
        ..Default::default()
    };
    io::read_csv_table(path, &opts).with_context(|| format!("reading {}", path.display()))
}

fn looks_like_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn cluster(a: ClusterArgs) -> Result<()> {
    let mut clock = StageClock::new();
    clock.start("read");
    if a.kernel.is_graph() && looks_like_csv(&a.input) {
        return Err(usage(
            "the graph kernel needs an edge list, not a CSV table",
        ));
    }
    enum Input {
        Table(Dataset),
        Graph(kernel_treelets::Graph),
    }
    let input = if a.kernel.is_graph() {
        let g = io::read_edge_list(&a.input)
            .with_context(|| format!("reading {}", a.input.display()))?;
        Input::Graph(g)
    } else {
        Input::Table(read_table(&a.input, &a.table)?.data)
    };
    let kernel = match (&a.kernel, &input) {
        (KernelArg::GraphAuto, Input::Graph(g)) => {
            let spec = KernelSpec::graph_max_degree(g);
            if let KernelSpec::GraphAdjacency { diag } = spec {
                eprintln!("graph kernel diagonal = {diag} (max degree)");
            }
            spec
        }
        (KernelArg::Spec(s), _) => s.clone(),
        (KernelArg::GraphAuto, Input::Table(_)) => unreachable!("graph kernels read edge lists"),
    };
    let data: &dyn Observations = match &input {
        Input::Table(d) => d,
        Input::Graph(g) => g,
    };
    let n = data.len();
    let sample_size = match a.sample_size {
        SampleSize::Full => n,
        SampleSize::Count(s) if s > n => {
            return Err(usage(format!(
                "--sample-size {s} exceeds the {n} items in the input"
            )));
        }
        SampleSize::Count(s) => s,
    };
    let config = KtConfig {
        kernel: kernel.clone(),
        sample_size,
        n_clusters: a.clusters,
        lambda: a.lambda,
        knn_k: a.knn_k,
        seed: a.seed,
        stop_tol: a.stop_tol,
    };
    data.check_kernel(&config.kernel)
        .map_err(|e| usage(e.to_string()))?;
    config.validate(n).map_err(|e| usage(e.to_string()))?;

    let fit =
        extend::fit_predict_observed(data, &config, PairSearch::Cached, |stage| match stage {
            Stage::Done => clock.stop(),
            s => clock.start(
                serde_json::to_value(s)
                    .unwrap()
                    .as_str()
                    .unwrap()
                    .to_string(),
            ),
        })?;
    eprintln!(
        "clustered {n} items (sample {sample_size}, {} merges) into {} clusters",
        fit.decomposition.stop_level(),
        fit.labels.n_clusters()
    );

    clock.start("write");
    io::write_labels_json(
        &a.output,
        &LabelsFile::new(&fit.labels, a.seed, Some(kernel.clone())),
    )?;
    if let Some(tree_path) = &a.tree {
        let mut text = fit.tree.to_json()?;
        text.push('\n');
        write_text(tree_path, &text)?;
    }

    let mut m = Manifest::new(
        "cluster",
        json!({
            "kernel": kernel,
            "lambda": a.lambda,
            "sample_size": sample_size,
            "n_clusters": a.clusters,
            "knn_k": a.knn_k,
            "seed": a.seed,
            "stop_tol": a.stop_tol,
            "n_items": n,
            "merges": fit.decomposition.stop_level(),
        }),
    );
    m.add_input(&a.input)?;
    m.add_output(&a.output);
    if let Some(t) = &a.tree {
        m.add_output(t);
    }
    m.timings_ms = clock.finish();
    m.write_for(&a.output)?;
    if let Some(t) = &a.tree {
        m.write_for(t)?;
    }
    Ok(())
}

fn read_reference(r: &ReferenceArgs) -> Result<Reference> {
    let as_classes = match r.reference_kind {
        ReferenceKind::Auto => looks_like_csv(&r.reference),
        ReferenceKind::Classes => true,
        ReferenceKind::Graph => false,
    };
    let context = || format!("reading {}", r.reference.display());
    Ok(if as_classes {
        Reference::Classes(
            io::read_class_labels(&r.reference, r.reference_column.as_deref())
                .with_context(context)?,
        )
    } else {
        Reference::Graph(io::read_edge_list(&r.reference).with_context(context)?)
    })
}

fn read_pred(path: &Path) -> Result<ClusterLabels> {
    io::read_labels_json(path)
        .and_then(|f| f.cluster_labels())
        .with_context(|| format!("reading {}", path.display()))
}

fn roc(a: RocArgs) -> Result<()> {
    let mut clock = StageClock::new();
    clock.start("read");
    let reference = read_reference(&a.reference)?;
    let mut inputs = vec![a.reference.reference.clone()];
    clock.start("roc");
    let curve = match &a.tree {
        Some(tree_path) => {
            let text = std::fs::read_to_string(tree_path)
                .with_context(|| format!("reading {}", tree_path.display()))?;
            let tree = Dendrogram::from_json(&text)?;
            inputs.push(tree_path.clone());
            eval::roc_from_hierarchy(&tree, &reference)?
        }
        None => {
            let preds = a
                .pred
                .iter()
                .map(|p| read_pred(p))
                .collect::<Result<Vec<_>>>()?;
            inputs.extend(a.pred.iter().cloned());
            eval::roc_from_partitions(&preds, &reference)?
        }
    };
    println!("AUC {:.6}", curve.auc());

    if let Some(out) = &a.output {
        clock.start("write");
        let is_json = out
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let text = if is_json {
            curve.to_json()? + "\n"
        } else {
            curve.to_csv()
        };
        write_text(out, &text)?;
        let mut m = Manifest::new(
            "roc",
            json!({ "points": curve.points().len(), "auc": curve.auc() }),
        );
        for p in &inputs {
            m.add_input(p)?;
        }
        m.add_output(out);
        m.timings_ms = clock.finish();
        m.write_for(out)?;
    }
    Ok(())
}

fn evaluate(a: EvalArgs) -> Result<()> {
    let reference = read_reference(&a.reference)?;
    let pred = read_pred(&a.pred)?;
    let mm = eval::matching_matrix(&pred, &reference)?;
    println!("TP {} FP {} TN {} FN {}", mm.tp, mm.fp, mm.tn, mm.fn_);
    println!("TPR {:.6}", mm.tpr());
    println!("FPR {:.6}", mm.fpr());
    if let Some(out) = &a.output {
        let value = json!({ "matching_matrix": mm, "tpr": mm.tpr(), "fpr": mm.fpr() });
        write_text(out, &(serde_json::to_string(&value)? + "\n"))?;
        let mut m = Manifest::new("eval", json!({}));
        m.add_input(&a.pred)?;
        m.add_input(&a.reference.reference)?;
        m.add_output(out);
        m.write_for(out)?;
    }
    Ok(())
}

fn kmeans(a: KmeansArgs) -> Result<()> {
    let mut clock = StageClock::new();
    clock.start("read");
    let mut data = read_table(&a.input, &a.table)?.data;
    if a.impute_mean {
        data = eval::impute_mean(&data)?;
    }
    let k = a.k;
    if k > data.n_rows() {
        return Err(usage(format!(
            "--k {k} exceeds the {} rows in the input",
            data.n_rows()
        )));
    }
    clock.start("kmeans");
    let labels = eval::kmeans(&data, k, a.seed, a.max_iters)?;
    clock.start("write");
    io::write_labels_json(&a.output, &LabelsFile::new(&labels, a.seed, None))?;

    let mut m = Manifest::new(
        "kmeans",
        json!({ "k": k, "seed": a.seed, "max_iters": a.max_iters, "impute_mean": a.impute_mean }),
    );
    m.add_input(&a.input)?;
    m.add_output(&a.output);
    m.timings_ms = clock.finish();
    m.write_for(&a.output)?;
    Ok(())
}

fn normalize(a: NormalizeArgs) -> Result<()> {
    let mut clock = StageClock::new();
    clock.start("read");
    let table = read_table(&a.input, &a.table)?;
    clock.start("normalize");
    let data = eval::zscore_normalize(&table.data)?;
    if data.n_rows() == 0 {
        bail!("{} has no data rows", a.input.display());
    }
    clock.start("write");
    let mut w = create(&a.output)?;
    io::write_csv_dataset(&mut w, &data, table.header.as_deref())?;
    w.flush()?;

    let mut m = Manifest::new("normalize", json!({ "sd": "population" }));
    m.add_input(&a.input)?;
    m.add_output(&a.output);
    m.timings_ms = clock.finish();
    m.write_for(&a.output)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn sample_size_values() {
        assert_eq!(parse_sample_size("full"), Ok(SampleSize::Full));
        assert_eq!(parse_sample_size("1000"), Ok(SampleSize::Count(1000)));
        assert!(parse_sample_size("1").is_err());
        assert!(parse_sample_size("all").is_err());
    }

    #[test]
    fn knn_k_must_be_odd() {
        assert_eq!(parse_odd("5"), Ok(5));
        assert!(parse_odd("4").is_err());
        assert!(parse_odd("0").is_err());
    }
}
