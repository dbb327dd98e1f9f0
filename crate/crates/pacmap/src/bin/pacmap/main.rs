//! Command-line front end: dataset generation, embedding, quality metrics,
//! weight-schedule inspection, and loss-function auditing.

mod manifest;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use manifest::Manifest;
use pacmap::datagen::{
    gen_hierarchical, gen_s_curve_with_hole, load_csv, save_csv, save_labeled_csv, save_labels_csv,
    CsvOptions, HierarchicalSpec, S_CURVE_HOLE_RADIUS,
};
use pacmap::principles::{
    builtin_surface, check_principles, rainbow_grid, write_rainbow_csv, AuditTolerances, GridSpec,
    Verdict,
};
use pacmap::{
    centroid_triplet_accuracy, fit, knn_accuracy, random_triplet_accuracy, weight_schedule, Error,
    FitConfig, Init, LabeledDataset, MetricReport, PairConfig, ScheduleConfig, Warning,
    DEFAULT_K_SET, DEFAULT_METRIC_REPEATS, DEFAULT_TRIPLETS_PER_POINT,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "pacmap", version, about = "Pair-based dimension reduction and loss auditing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed a CSV dataset into d_out dimensions.
    Embed(EmbedArgs),
    /// Evaluate embedding quality metrics.
    Metrics(MetricsArgs),
    /// Generate a synthetic benchmark dataset.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Evaluate a loss surface on a log-spaced grid, optionally auditing it.
    Rainbow(RainbowArgs),
    /// Print the three-phase weight schedule.
    Schedule(ScheduleArgs),
}

#[derive(Args)]
struct EmbedArgs {
    /// Input CSV of observations (rows) by features (columns).
    #[arg(long)]
    input: PathBuf,
    /// Output CSV of embedded coordinates.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 10)]
    n_neighbors: usize,
    #[arg(long, default_value_t = 0.5)]
    mn_ratio: f64,
    #[arg(long, default_value_t = 2.0)]
    fp_ratio: f64,
    /// Total optimizer iterations.
    #[arg(long, default_value_t = 450)]
    iters: usize,
    /// Phase boundaries tau1,tau2,tau3.
    #[arg(long, value_parser = parse_tau, default_value = "1,101,201")]
    tau: (usize, usize, usize),
    #[arg(long, value_enum, default_value_t = InitArg::Pca)]
    init: InitArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dimension.
    #[arg(long, default_value_t = 2)]
    d_out: usize,
    /// Treat the final input column as a class label ("last").
    #[arg(long, value_parser = parse_label_col)]
    label_col: Option<String>,
    /// Skip one header line in the input.
    #[arg(long)]
    header: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Pca,
    Random,
}

#[derive(Args)]
struct MetricsArgs {
    /// High-dimensional data CSV.
    #[arg(long)]
    high: PathBuf,
    /// Low-dimensional embedding CSV.
    #[arg(long)]
    low: PathBuf,
    /// Optional single-column integer label CSV.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Comma-separated metric list: knn, rt, ct.
    #[arg(long, default_value = "rt")]
    which: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Triplets per anchor for the rt metric.
    #[arg(long, default_value_t = DEFAULT_TRIPLETS_PER_POINT)]
    triplets_per_point: usize,
    /// Evaluation repeats for the rt metric.
    #[arg(long, default_value_t = DEFAULT_METRIC_REPEATS)]
    repeats: usize,
    /// Write a structured key=value report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Skip one header line in the data CSVs.
    #[arg(long)]
    header: bool,
}

#[derive(Subcommand)]
enum GenCommand {
    /// Three-level hierarchical Gaussian benchmark (features + micro label column).
    Hierarchical {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        points_per_micro: usize,
        /// Also write the labels alone to this single-column CSV.
        #[arg(long)]
        labels_out: Option<PathBuf>,
    },
    /// 3-D S-curve with a hole (no labels).
    ScurveHole {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 9500)]
        n: usize,
        #[arg(long, default_value_t = S_CURVE_HOLE_RADIUS)]
        hole_radius: f64,
    },
}

#[derive(Args)]
struct RainbowArgs {
    /// Surface name: pacmap, badloss1..badloss4, forceatlas2.
    #[arg(long)]
    loss: String,
    /// Output grid CSV (one row per cell).
    #[arg(long)]
    out: PathBuf,
    /// Audit the surface against the six principles and print the report.
    #[arg(long)]
    audit: bool,
    #[arg(long, default_value_t = 1e-2)]
    grid_min: f64,
    #[arg(long, default_value_t = 1e2)]
    grid_max: f64,
    #[arg(long, default_value_t = 200)]
    grid_points: usize,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long, default_value_t = 450)]
    iters: usize,
    #[arg(long, value_parser = parse_tau, default_value = "1,101,201")]
    tau: (usize, usize, usize),
}

fn parse_tau(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected three comma-separated iteration indices".into());
    }
    let parse = |p: &str| p.trim().parse::<usize>().map_err(|e| e.to_string());
    Ok((parse(parts[0])?, parse(parts[1])?, parse(parts[2])?))
}

fn parse_label_col(s: &str) -> Result<String, String> {
    if s == "last" {
        Ok(s.into())
    } else {
        Err("only `last` is supported".into())
    }
}

fn main() {
    if let Ok(threads) = std::env::var("PACMAP_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .expect("rayon pool not yet initialized");
            }
            _ => eprintln!("pacmap: ignoring invalid PACMAP_THREADS value `{threads}`"),
        }
    }
    let cli = Cli::parse();
    if let Err(err) = run(cli.command) {
        // A closed pipe (e.g. `pacmap schedule | head`) is not an error.
        if let Error::Io(io) = &err {
            if io.kind() == std::io::ErrorKind::BrokenPipe {
                return;
            }
        }
        eprintln!("pacmap: error: {err}");
        std::process::exit(1);
    }
}

fn print_warnings(warnings: &[Warning]) {
    for w in warnings {
        eprintln!("pacmap: warning: {w}");
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Embed(args) => cmd_embed(args),
        Command::Metrics(args) => cmd_metrics(args),
        Command::Gen(args) => cmd_gen(args),
        Command::Rainbow(args) => cmd_rainbow(args),
        Command::Schedule(args) => cmd_schedule(args),
    }
}

fn cmd_embed(args: EmbedArgs) -> Result<(), Error> {
    let mut manifest = Manifest::new("embed");
    manifest.push("input", args.input.display());
    manifest.push("output", args.output.display());
    manifest.push("n_neighbors", args.n_neighbors);
    manifest.push("mn_ratio", args.mn_ratio);
    manifest.push("fp_ratio", args.fp_ratio);
    manifest.push("iters", args.iters);
    manifest.push("tau", format!("{},{},{}", args.tau.0, args.tau.1, args.tau.2));
    manifest.push("init", match args.init { InitArg::Pca => "pca", InitArg::Random => "random" });
    manifest.push("seed", args.seed);
    manifest.push("d_out", args.d_out);
    manifest.push("label_col", args.label_col.as_deref().unwrap_or("none"));
    manifest.push("header", args.header);

    let data = load_csv(
        &args.input,
        &CsvOptions {
            header: args.header,
            label_col_last: args.label_col.is_some(),
        },
    )?;
    let cfg = FitConfig {
        pairs: PairConfig {
            n_nb: args.n_neighbors,
            mn_ratio: args.mn_ratio,
            fp_ratio: args.fp_ratio,
        },
        schedule: ScheduleConfig::new(args.tau.0, args.tau.1, args.tau.2, args.iters)?,
        init: match args.init {
            InitArg::Pca => Init::Pca,
            InitArg::Random => Init::Random,
        },
        seed: args.seed,
        d_out: args.d_out,
    };
    let result = fit(&data.x, &cfg)?;
    print_warnings(&result.warnings);
    save_csv(&args.output, result.embedding.values())?;
    manifest.push("rows", result.embedding.n());
    manifest.push("cols", result.embedding.d_out());
    manifest.write_alongside(&args.output)?;
    println!(
        "embedded {} observations into {} dims -> {}",
        result.embedding.n(),
        result.embedding.d_out(),
        args.output.display()
    );
    Ok(())
}

fn load_label_file(path: &Path) -> Result<Vec<i64>, Error> {
    let text = std::fs::read_to_string(path)?;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        labels.push(line.trim().parse::<i64>().map_err(|e| Error::CsvParse {
            path: path.display().to_string(),
            row: i + 1,
            col: 1,
            msg: e.to_string(),
        })?);
    }
    Ok(labels)
}

fn cmd_metrics(args: MetricsArgs) -> Result<(), Error> {
    let opts = CsvOptions {
        header: args.header,
        label_col_last: false,
    };
    let high = load_csv(&args.high, &opts)?;
    let low = load_csv(&args.low, &opts)?;
    let low = pacmap::Embedding::new(low.x.into_values())?;
    let labels = args.labels.as_deref().map(load_label_file).transpose()?;

    let mut requested: Vec<&str> = args.which.split(',').map(str::trim).collect();
    requested.retain(|s| !s.is_empty());
    if requested.is_empty() {
        return Err(Error::InvalidConfig("no metrics requested".into()));
    }

    let mut warnings = Vec::new();
    let mut reports: Vec<MetricReport> = Vec::new();
    for name in requested {
        let report = match name {
            "knn" => {
                let labels = labels.as_ref().ok_or(Error::MissingLabels("knn_accuracy"))?;
                let k_set: Vec<usize> =
                    DEFAULT_K_SET.iter().copied().filter(|&k| k < low.n()).collect();
                knn_accuracy(&low, labels, &k_set, &mut warnings)?
            }
            "rt" => random_triplet_accuracy(
                &high.x,
                &low,
                args.triplets_per_point,
                args.repeats,
                args.seed,
            )?,
            "ct" => {
                let labels = labels
                    .as_ref()
                    .ok_or(Error::MissingLabels("centroid_triplet_accuracy"))?;
                centroid_triplet_accuracy(&high.x, &low, labels)?
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown metric `{other}` (expected knn, rt, ct)"
                )))
            }
        };
        reports.push(report);
    }
    print_warnings(&warnings);
    for r in &reports {
        println!("{}: {:.6} \u{b1} {:.6}", r.name, r.mean, r.std);
    }

    if let Some(report_path) = &args.report {
        let mut file = std::fs::File::create(report_path)?;
        writeln!(file, "format=1")?;
        writeln!(file, "command=metrics")?;
        writeln!(file, "high={}", args.high.display())?;
        writeln!(file, "low={}", args.low.display())?;
        writeln!(file, "seed={}", args.seed)?;
        for r in &reports {
            writeln!(file, "metric.{}.mean={}", r.name, r.mean)?;
            writeln!(file, "metric.{}.std={}", r.name, r.std)?;
            for (k, v) in &r.params {
                writeln!(file, "metric.{}.param.{k}={v}", r.name)?;
            }
        }
    }
    Ok(())
}

fn cmd_gen(args: GenCommand) -> Result<(), Error> {
    match args {
        GenCommand::Hierarchical {
            out,
            seed,
            points_per_micro,
            labels_out,
        } => {
            let mut manifest = Manifest::new("gen hierarchical");
            manifest.push("out", out.display());
            manifest.push("seed", seed);
            manifest.push("points_per_micro", points_per_micro);

            let spec = HierarchicalSpec {
                points_per_micro,
                ..HierarchicalSpec::default()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let LabeledDataset { x, labels } = gen_hierarchical(&spec, &mut rng)?;
            let labels = labels.expect("hierarchical data is labeled");
            save_labeled_csv(&out, x.values(), &labels)?;
            if let Some(labels_path) = labels_out {
                save_labels_csv(&labels_path, &labels)?;
            }
            manifest.push("rows", x.n());
            manifest.push("cols", x.p() + 1);
            manifest.write_alongside(&out)?;
            println!("wrote {} rows x {} cols -> {}", x.n(), x.p() + 1, out.display());
        }
        GenCommand::ScurveHole {
            out,
            seed,
            n,
            hole_radius,
        } => {
            let mut manifest = Manifest::new("gen scurve-hole");
            manifest.push("out", out.display());
            manifest.push("seed", seed);
            manifest.push("n", n);
            manifest.push("hole_radius", hole_radius);

            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = gen_s_curve_with_hole(n, hole_radius, &mut rng)?;
            save_csv(&out, x.values())?;
            manifest.push("rows", x.n());
            manifest.push("cols", x.p());
            manifest.write_alongside(&out)?;
            println!("wrote {} rows x {} cols -> {}", x.n(), x.p(), out.display());
        }
    }
    Ok(())
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "FAIL",
        Verdict::Indeterminate => "indeterminate",
    }
}

fn cmd_rainbow(args: RainbowArgs) -> Result<(), Error> {
    let mut manifest = Manifest::new("rainbow");
    manifest.push("loss", &args.loss);
    manifest.push("out", args.out.display());
    manifest.push("audit", args.audit);
    manifest.push("grid", format!("[{}, {}] x {}", args.grid_min, args.grid_max, args.grid_points));

    let surface = builtin_surface(&args.loss)?;
    let spec = GridSpec::new(args.grid_min, args.grid_max, args.grid_points)?;
    let grid = rainbow_grid(&surface, &spec)?;
    let mut file = std::io::BufWriter::new(std::fs::File::create(&args.out)?);
    write_rainbow_csv(&grid, &mut file)?;
    file.flush()?;
    manifest.push("masked_cells", grid.masked_cells);
    println!(
        "wrote {}x{} grid ({} masked cells) -> {}",
        grid.rows(),
        grid.cols(),
        grid.masked_cells,
        args.out.display()
    );

    if args.audit {
        let report = check_principles(&surface, &spec, &AuditTolerances::default())?;
        println!("surface={}", report.surface);
        println!("masked_cells={}", report.masked_cells);
        for (i, check) in report.checks.iter().enumerate() {
            let mut line = format!("P{}: {}", i + 1, verdict_str(check.verdict));
            if check.verdict != Verdict::Pass {
                if let Some(w) = check.witnesses.first() {
                    line.push_str(&format!(
                        " ({} sites; first at d_ij={:.4}, d_ik={:.4}: {})",
                        check.violations.max(1),
                        w.d_ij,
                        w.d_ik,
                        w.detail
                    ));
                }
            }
            println!("{line}");
        }
    }
    manifest.write_alongside(&args.out)?;
    Ok(())
}

fn cmd_schedule(args: ScheduleArgs) -> Result<(), Error> {
    let cfg = ScheduleConfig::new(args.tau.0, args.tau.1, args.tau.2, args.iters)?;
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    writeln!(out, "t,w_nb,w_mn,w_fp")?;
    for t in 1..=cfg.n_iterations {
        let w = weight_schedule(t, &cfg);
        writeln!(out, "{t},{},{},{}", w.w_nb, w.w_mn, w.w_fp)?;
    }
    out.flush()?;
    Ok(())
}
