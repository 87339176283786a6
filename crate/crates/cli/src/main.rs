//! Command-line entry point tying the constructors, the trainer, and the
//! error measurement into reproducible runs.
//!
//! Exit codes: 0 success, 2 usage error, 3 validation error, 4 I/O error.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use config::{load_toml, ProbeConfig, ReproduceConfig, TrainFileConfig};
use widthnet::eval::{l1_distance, l1_distance_mc, mse_values, uniform_grid_capped, Domain};
use widthnet::train::{
    fit, init_network, layer_dims, phase_transition_probe, run_table1, table1_reference,
    ExperimentSpec, InitMode, TrainConfig,
};
use widthnet::{approximate_function, sample_e0, E0Vector, Error, GridSamples, Network, Result};
use widthnet::{build_wide_target, max_grid_relative_error};

#[derive(Parser)]
#[command(
    name = "widthnet",
    version,
    about = "Constructive width-bounded ReLU approximators and narrow-vs-wide training experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a width-(n+4) approximator from grid samples of a function.
    ConstructUniversal {
        /// CSV of samples: one `x1,...,xn,value` row per grid cell.
        #[arg(long)]
        samples: PathBuf,
        /// Input dimension.
        #[arg(long)]
        n: usize,
        /// Truncation half-width N; samples live in [-N, N]^n.
        #[arg(long = "N")]
        half_width: f64,
        /// Target L1 accuracy.
        #[arg(long)]
        epsilon: f64,
        /// Sample grid cells per axis.
        #[arg(long)]
        cells: usize,
        /// Where to write the network JSON.
        #[arg(long, default_value = "universal-net.json")]
        out_net: PathBuf,
        /// Where to write the plan JSON.
        #[arg(long, default_value = "universal-plan.json")]
        out_plan: PathBuf,
        /// Quadrature points per axis for the printed L1 estimate.
        #[arg(long, default_value_t = 1001)]
        quad: usize,
    },
    /// Build a wide interpolation target from a sampled admissible vector.
    ConstructWide {
        /// Width/grid scale; the network has width 2k^2 and depth 3.
        #[arg(long)]
        k: usize,
        /// Seed for the admissible-vector sampler.
        #[arg(long)]
        seed: u64,
        /// Input dimension (coordinates beyond the first are ignored).
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Where to write the network JSON.
        #[arg(long, default_value = "wide-net.json")]
        out_net: PathBuf,
        /// Where to write the sampled vector (one value per line).
        #[arg(long, default_value = "wide-e0.csv")]
        out_e0: PathBuf,
    },
    /// Check a grid-value vector for admissibility (positivity plus the
    /// strict per-group doubling chain).
    CheckE0 {
        #[arg(long)]
        k: usize,
        /// CSV with one value per line.
        #[arg(long)]
        input: PathBuf,
    },
    /// Train a ReLU network on CSV data.
    Train {
        /// TOML config with [data], [model], and [train] sections.
        #[arg(long)]
        config: PathBuf,
        /// Where to write the trained network.
        #[arg(long)]
        out_net: Option<PathBuf>,
        /// Write the per-epoch eval MSE curve here.
        #[arg(long)]
        curve_csv: Option<PathBuf>,
        /// Override the configured epoch count.
        #[arg(long)]
        epochs: Option<usize>,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the wide-target-vs-narrow-approximator experiment.
    ReproduceTable1 {
        /// TOML config with [experiment] and [train] sections.
        #[arg(long)]
        config: PathBuf,
        /// Trial-level worker threads (1 preserves byte-for-byte output
        /// trivially; results are seed-deterministic at any level).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Where to write the per-trial CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the configured trial count.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train several widths on a sampled function and report them next to
    /// the constructed width-(n+4) approximator.
    PhaseProbe {
        /// TOML config with [probe] and [train] sections.
        #[arg(long)]
        config: PathBuf,
        /// Where to write the report CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Measure a saved network against CSV data.
    Eval {
        /// Network JSON file.
        #[arg(long)]
        net: PathBuf,
        /// CSV of `x1,...,xn,target` rows.
        #[arg(long)]
        against: PathBuf,
        /// Metric: l1 or mse.
        #[arg(long)]
        metric: Metric,
        /// Write an `x...,target,approx` comparison CSV here.
        #[arg(long)]
        emit_csv: Option<PathBuf>,
        /// Domain lower corner (comma-separated) for the l1 volume factor;
        /// defaults to the data's bounding box.
        #[arg(long, value_delimiter = ',')]
        lower: Option<Vec<f64>>,
        /// Domain upper corner (comma-separated).
        #[arg(long, value_delimiter = ',')]
        upper: Option<Vec<f64>>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum Metric {
    L1,
    Mse,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err);
            match err {
                Error::Io { .. } => ExitCode::from(4),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::ConstructUniversal {
            samples,
            n,
            half_width,
            epsilon,
            cells,
            out_net,
            out_plan,
            quad,
        } => construct_universal(&samples, n, half_width, epsilon, cells, &out_net, &out_plan, quad),
        Command::ConstructWide {
            k,
            seed,
            n,
            out_net,
            out_e0,
        } => construct_wide(k, seed, n, &out_net, &out_e0),
        Command::CheckE0 { k, input } => check_e0_file(k, &input),
        Command::Train {
            config,
            out_net,
            curve_csv,
            epochs,
            seed,
        } => train_from_config(&config, out_net.as_deref(), curve_csv.as_deref(), epochs, seed),
        Command::ReproduceTable1 {
            config,
            jobs,
            out,
            trials,
            seed,
        } => reproduce_table1(&config, jobs, out.as_deref(), trials, seed),
        Command::PhaseProbe { config, out, seed } => phase_probe(&config, out.as_deref(), seed),
        Command::Eval {
            net,
            against,
            metric,
            emit_csv,
            lower,
            upper,
        } => eval_net(&net, &against, metric, emit_csv.as_deref(), lower, upper),
    }
}

#[allow(clippy::too_many_arguments)]
fn construct_universal(
    samples_path: &Path,
    n: usize,
    half_width: f64,
    epsilon: f64,
    cells: usize,
    out_net: &Path,
    out_plan: &Path,
    quad: usize,
) -> Result<()> {
    let domain = Domain::symmetric(n, half_width)?;
    let samples = GridSamples::from_csv(samples_path, domain.clone(), cells)?;
    let (net, plan) = approximate_function(&samples, half_width, epsilon)?;
    net.save(out_net)?;
    plan.save(out_plan)?;

    let target = samples.piecewise_constant();
    let approx = |x: &[f64]| net.forward_scalar(x).expect("constructed network forward");
    let lattice_cap = 1_000_000;
    println!("cubes: {}", plan.cubes.len());
    println!("delta: {}", plan.delta);
    println!("network: width {} depth {}", net.width(), net.depth());
    println!("analytic L1 budget: {}", plan.total_error_bound());
    if quad.pow(n as u32) <= lattice_cap {
        let points = uniform_grid_capped(&domain, quad, lattice_cap)?;
        let measured = l1_distance(&target, approx, &domain, &points)?;
        println!("measured L1 error vs samples ({} point lattice): {}", points.len(), measured);
    } else {
        let est = l1_distance_mc(&target, approx, &domain, 200_000, 0)?;
        println!(
            "measured L1 error vs samples (Monte Carlo, 200000 points): {} +/- {}",
            est.value, est.std_error
        );
    }
    println!("network written to {}", out_net.display());
    println!("plan written to {}", out_plan.display());
    Ok(())
}

fn construct_wide(k: usize, seed: u64, n: usize, out_net: &Path, out_e0: &Path) -> Result<()> {
    let vector = sample_e0(k, seed)?;
    let net = build_wide_target(k, &vector, n)?;
    let err = max_grid_relative_error(&net, &vector)?;
    net.save(out_net)?;
    vector.save_csv(out_e0)?;
    println!("network: width {} depth {}", net.width(), net.depth());
    println!("grid points: {}", vector.len());
    println!("max relative interpolation error: {:e}", err);
    println!("network written to {}", out_net.display());
    println!("vector written to {}", out_e0.display());
    Ok(())
}

fn check_e0_file(k: usize, input: &Path) -> Result<()> {
    let vector = E0Vector::load_csv(input, k)?;
    println!("OK: {} entries form an admissible vector for k = {}", vector.len(), k);
    Ok(())
}

/// Reads `x1,...,xn,value` rows.
fn read_points_csv(path: &Path, n: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let parse_err = |lineno: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {}: {}", lineno + 1, msg),
    };
    let mut points = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if lineno == 0 && fields[0].parse::<f64>().is_err() {
            continue; // header
        }
        if fields.len() != n + 1 {
            return Err(parse_err(
                lineno,
                format!("expected {} fields, found {}", n + 1, fields.len()),
            ));
        }
        let mut point = Vec::with_capacity(n);
        for f in &fields[..n] {
            point.push(
                f.parse::<f64>()
                    .map_err(|e| parse_err(lineno, e.to_string()))?,
            );
        }
        values.push(
            fields[n]
                .parse::<f64>()
                .map_err(|e| parse_err(lineno, e.to_string()))?,
        );
        points.push(point);
    }
    if points.is_empty() {
        return Err(parse_err(0, "no data rows".into()));
    }
    Ok((points, values))
}

fn train_from_config(
    config_path: &Path,
    out_net: Option<&Path>,
    curve_csv: Option<&Path>,
    epochs: Option<usize>,
    seed: Option<u64>,
) -> Result<()> {
    let file: TrainFileConfig = load_toml(config_path)?;
    let mut config = file.train.apply(TrainConfig::default());
    if let Some(e) = epochs {
        config.epochs = e;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    let (points, values) = read_points_csv(Path::new(&file.data.path), file.data.input_dim)?;
    let dims = layer_dims(file.data.input_dim, file.model.width, file.model.depth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let net = init_network(&dims, InitMode::HeNormal, &mut rng)?;
    let outcome = fit(&net, &points, &values, &points, &values, &config)?;
    println!("samples: {}", points.len());
    println!(
        "model: width {} depth {} ({} parameters)",
        file.model.width,
        file.model.depth,
        outcome.network.num_params()
    );
    println!("best MSE: {}", outcome.best_mse);
    println!(
        "final-epoch MSE: {}",
        outcome.loss_curve.last().copied().unwrap_or(f64::NAN)
    );
    if let Some(path) = out_net {
        outcome.network.save(path)?;
        println!("network written to {}", path.display());
    }
    if let Some(path) = curve_csv {
        let mut text = String::from("epoch,mse\n");
        for (epoch, mse) in outcome.loss_curve.iter().enumerate() {
            text.push_str(&format!("{},{}\n", epoch + 1, mse));
        }
        std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        println!("loss curve written to {}", path.display());
    }
    Ok(())
}

fn reproduce_table1(
    config_path: &Path,
    jobs: usize,
    out: Option<&Path>,
    trials: Option<usize>,
    seed: Option<u64>,
) -> Result<()> {
    let file: ReproduceConfig = load_toml(config_path)?;
    let mut spec: ExperimentSpec = file.experiment.to_spec();
    if let Some(t) = trials {
        spec.trials = t;
    }
    spec.validate()?;
    let mut config = file.train.apply(TrainConfig::default());
    if !file.train.has_epochs() {
        config.epochs = spec.default_epochs();
    }
    if let Some(s) = seed {
        config.seed = s;
    }

    let result = run_table1(&spec, &config, jobs)?;
    let csv = result.to_csv();
    if let Some(path) = out {
        std::fs::write(path, &csv).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        println!("per-trial results written to {}", path.display());
    } else {
        print!("{}", csv);
    }

    println!(
        "n={} k={} trials={} epochs={} seed={}",
        spec.n, spec.k, spec.trials, config.epochs, config.seed
    );
    println!(
        "target network: width {} depth {}",
        result.target_width, result.target_depth
    );
    println!(
        "approximator network: width {} depth {}",
        result.approx_width, result.approx_depth
    );
    println!("worst case error: {}", result.worst_case);
    println!("average case error: {}", result.average_case);
    if let Some(reference) = table1_reference(spec.n, spec.k) {
        println!(
            "reference (50-trial protocol): worst {} average {} (printed target width {})",
            reference.worst_case, reference.average_case, reference.printed_target_width
        );
    }
    println!("wall time: {:.1}s", result.wall_time.as_secs_f64());
    Ok(())
}

fn phase_probe(config_path: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let file: ProbeConfig = load_toml(config_path)?;
    let section = &file.probe;
    let mut config = file.train.apply(TrainConfig::default());
    if let Some(s) = seed {
        config.seed = s;
    }
    let target = section.target_fn()?;
    let domain = Domain::symmetric(section.n, section.half_width)?;
    let samples = GridSamples::from_fn(domain, section.cells_per_axis, |x| target(x))?;
    let report = phase_transition_probe(
        &samples,
        section.half_width,
        section.epsilon,
        &section.widths,
        section.depth,
        &config,
        section.quad_per_axis,
    )?;
    for row in &report.rows {
        println!("trained width {:>3}: best MSE {}", row.width, row.best_mse);
    }
    println!(
        "constructed width {}: measured L1 {} (plan epsilon {})",
        report.constructed_width, report.constructed_l1, report.plan_epsilon
    );
    if let Some(path) = out {
        std::fs::write(path, report.to_csv()).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

fn eval_net(
    net_path: &Path,
    against: &Path,
    metric: Metric,
    emit_csv: Option<&Path>,
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
) -> Result<()> {
    let net = Network::load(net_path)?;
    let n = net.input_dim();
    let (points, targets) = read_points_csv(against, n)?;
    let outputs: Vec<f64> = points
        .iter()
        .map(|p| net.forward_scalar(p))
        .collect::<Result<_>>()?;

    match metric {
        Metric::Mse => {
            let v = mse_values(&targets, &outputs)?;
            println!("mse: {}", v);
        }
        Metric::L1 => {
            let domain = match (lower, upper) {
                (Some(lo), Some(up)) => Domain::new(lo, up)?,
                (None, None) => bounding_box(&points)?,
                _ => {
                    return Err(Error::Invalid(
                        "--lower and --upper must be given together".into(),
                    ))
                }
            };
            if domain.dim() != n {
                return Err(Error::Shape(format!(
                    "domain has dimension {} but the network expects {}",
                    domain.dim(),
                    n
                )));
            }
            let mean_abs: f64 = targets
                .iter()
                .zip(&outputs)
                .map(|(t, o)| (t - o).abs())
                .sum::<f64>()
                / targets.len() as f64;
            let v = domain.volume() * mean_abs;
            println!("l1: {} (volume {})", v, domain.volume());
        }
    }

    if let Some(path) = emit_csv {
        let file = File::create(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut w = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            for i in 1..=n {
                write!(w, "x{},", i)?;
            }
            writeln!(w, "target,approx")?;
            for (p, (t, o)) in points.iter().zip(targets.iter().zip(&outputs)) {
                for v in p {
                    write!(w, "{},", v)?;
                }
                writeln!(w, "{},{}", t, o)?;
            }
            w.flush()
        };
        write().map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        println!("comparison written to {}", path.display());
    }
    Ok(())
}

/// Smallest box containing every point. The upper face is widened by a tiny
/// relative margin so the box has positive volume even for degenerate data.
fn bounding_box(points: &[Vec<f64>]) -> Result<Domain> {
    let n = points[0].len();
    let mut lower = vec![f64::INFINITY; n];
    let mut upper = vec![f64::NEG_INFINITY; n];
    for p in points {
        for i in 0..n {
            lower[i] = lower[i].min(p[i]);
            upper[i] = upper[i].max(p[i]);
        }
    }
    for i in 0..n {
        if upper[i] <= lower[i] {
            upper[i] = lower[i] + 1e-9;
        }
    }
    Domain::new(lower, upper)
}
