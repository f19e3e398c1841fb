use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hera_core::{
    compute_errors, generate_truncated_normal, hera_quantize, load_artifact, load_matrix,
    pq_quantize, save_artifact, save_matrix, Artifact32, KMeansConfig, Matrix, PqConfig,
    TruncNormalSpec,
};

use crate::config::ExperimentConfig;
use crate::report::{write_rows, write_summary};
use crate::runner::{run_experiment, summarize};
use crate::BenchError;

#[derive(Debug, Parser)]
#[command(name = "hera", version, about = "Matrix compression with reordered product quantization")]
struct Cli {
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a truncated-normal dataset file.
    Gen(GenArgs),
    /// Quantize a dataset file into an artifact file.
    Quantize(QuantizeArgs),
    /// Reconstruct a dataset file from an artifact file.
    Dequantize(DequantizeArgs),
    /// Print MAE, MRE and MSE between two dataset files.
    Eval(EvalArgs),
    /// Run a sweep described by a config file and write result CSVs.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    mean: f64,
    #[arg(long, default_value_t = 0.16)]
    stddev: f64,
    #[arg(long, default_value_t = 0.0)]
    lower: f64,
    #[arg(long, default_value_t = 1.0)]
    upper: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct QuantizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Number of subspaces M.
    #[arg(long)]
    subspaces: usize,
    /// Centroids per subspace K_s.
    #[arg(long)]
    ks: usize,
    /// Reordering depth; 0 writes a plain PQ artifact.
    #[arg(long, default_value_t = 0)]
    levels: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    rel_tol: f64,
}

#[derive(Debug, Args)]
struct DequantizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    original: PathBuf,
    #[arg(long)]
    reconstructed: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// Per-cell CSV; overrides `output_path` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary CSV; defaults to the result path with a `.summary.csv` suffix.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Overrides `charge_fm_overhead` from the config.
    #[arg(long, value_enum)]
    charge_fm: Option<Switch>,
}

fn create(path: &Path) -> Result<BufWriter<File>, BenchError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))
}

fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "results".into(), |s| s.to_os_string());
    let mut name = stem;
    name.push(".summary.csv");
    out.with_file_name(name)
}

fn gen(args: GenArgs) -> Result<(), BenchError> {
    let spec = TruncNormalSpec {
        mean: args.mean,
        stddev: args.stddev,
        lower: args.lower,
        upper: args.upper,
        seed: args.seed,
    };
    let m: Matrix = generate_truncated_normal(&spec, args.rows, args.cols)?;
    save_matrix(&m, &args.out)?;
    Ok(())
}

fn quantize(args: QuantizeArgs) -> Result<(), BenchError> {
    let data: Matrix = load_matrix(&args.input)?;
    let cfg = PqConfig {
        num_subspaces: args.subspaces,
        centroids_per_subspace: args.ks,
        kmeans: KMeansConfig { k: args.ks, max_iters: args.max_iters, rel_tol: args.rel_tol, seed: args.seed },
    };
    let artifact: Artifact32 = if args.levels == 0 {
        pq_quantize(&data, &cfg)?.into()
    } else {
        hera_quantize(&data, args.levels, &cfg)?.into()
    };
    let file = save_artifact(&artifact, &args.out)?;
    eprintln!(
        "wrote {} bytes ({} codebook, {} code, {} feature-map bits)",
        file.file_bytes, file.codebook_bits, file.code_bits, file.feature_map_bits
    );
    Ok(())
}

fn dequantize(args: DequantizeArgs) -> Result<(), BenchError> {
    let artifact: Artifact32 = load_artifact(&args.input)?;
    save_matrix(&artifact.dequantize()?, &args.out)?;
    Ok(())
}

fn eval(args: EvalArgs, out: &mut dyn Write) -> Result<(), BenchError> {
    let a: Matrix = load_matrix(&args.original)?;
    let b: Matrix = load_matrix(&args.reconstructed)?;
    let r = compute_errors(&a, &b)?;
    let mre = r.mre.map_or("undefined".to_string(), |v| v.to_string());
    writeln!(out, "mae,mre,mse")?;
    writeln!(out, "{},{mre},{}", r.mae, r.mse)?;
    Ok(())
}

fn bench(args: BenchArgs, out: &mut dyn Write) -> Result<(), BenchError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(switch) = args.charge_fm {
        cfg.charge_fm_overhead = matches!(switch, Switch::On);
    }
    let csv_path = args
        .out
        .or_else(|| cfg.output_path.clone())
        .ok_or_else(|| BenchError::Usage("no output path: pass --out or set output_path".into()))?;
    let summary = args.summary.unwrap_or_else(|| summary_path(&csv_path));

    let rows = run_experiment(&cfg)?;
    let mut w = create(&csv_path)?;
    write_rows(&rows, &mut w)?;
    w.flush()?;

    let groups = summarize(&rows)?;
    let mut w = create(&summary)?;
    write_summary(&groups, &mut w)?;
    w.flush()?;
    write_summary(&groups, &mut *out)?;

    if rows.iter().all(|r| r.outcome.is_none()) {
        return Err(BenchError::AllInfeasible);
    }
    Ok(())
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<(), BenchError> {
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Quantize(a) => quantize(a),
        Command::Dequantize(a) => dequantize(a),
        Command::Eval(a) => eval(a, out),
        Command::Bench(a) => bench(a, out),
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Command output goes to `out`; errors are
/// reported on stderr.
pub fn cli_main<I, S>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return 1;
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let mut buf = Vec::new();
    let result = pool.install(|| run(cli, &mut buf));
    if let Err(e) = out.write_all(&buf) {
        eprintln!("error: {e}");
        return 2;
    }
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
