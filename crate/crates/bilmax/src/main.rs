//! Command-line front end: operator field dumps, overlap-norm
//! measurements, interval selection, weak-type sweeps, and the randomized
//! extremizer search. All file outputs are byte-reproducible for a fixed
//! seed; measured timings go to stderr.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use bilmax::covering::{
    fan_rectangles, overlap_l2_norm, parse_intervals, union_measure, LatticeSpec,
};
use bilmax::geometry::{DirectionSet, Interval, DEFAULT_QUADRATURE, DEFAULT_THETA_MAX};
use bilmax::harness::{
    function_grid_for_delta, parse_config, parse_delta_list, parse_jmax_list, reports_to_csv_string,
    sharpness_search, sharpness_to_json, sweep_delta, sweep_lacunary, SharpnessConfig, SweepConfig,
    SweepOp,
};
use bilmax::maximal::{
    default_parallelogram_schedules, default_radius_schedule, default_shape_schedules, m1_maximal,
    m_delta, m_diag, m_lac, MaximalField, Witness,
};
use bilmax::sampling::{sample_function, FunctionSpec, Grid1D, DEFAULT_GRID_N};

#[derive(Parser)]
#[command(
    name = "bilmax",
    version,
    about = "Bilinear directional maximal operators on the diagonal: fields, coverings, weak-type sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OpKind {
    M1,
    Mdelta,
    Mlac,
    Mdiag,
}

#[derive(Subcommand)]
enum Command {
    /// Compute one operator field and dump it as CSV
    /// (x, value, witness_angle, witness_length, witness_width).
    Compute {
        #[arg(long, value_enum)]
        op: OpKind,
        /// Function spec, e.g. indicator:0,1 | bump:0,0.5 | ramp | random:7 | const:1.
        #[arg(long)]
        f: String,
        /// Second function spec (bilinear operators only).
        #[arg(long)]
        g: Option<String>,
        /// Direction separation (mdelta).
        #[arg(long)]
        delta: Option<f64>,
        /// Lacunary depth (mlac).
        #[arg(long)]
        jmax: Option<u32>,
        /// Center grid size on [-5, 5].
        #[arg(long, default_value_t = DEFAULT_GRID_N)]
        grid: usize,
        /// Angular span of the separated direction set.
        #[arg(long, default_value_t = DEFAULT_THETA_MAX)]
        theta_max: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Overlap norm of separated-direction rectangle fans
    /// (CSV: delta, n_rects, sum_area, overlap_l2, cordoba_ratio).
    Cordoba {
        #[arg(long)]
        delta: f64,
        /// Number of fan centers, evenly spaced on [-1, 1].
        #[arg(long, default_value_t = 1)]
        centers: usize,
        /// Lattice spacing; defaults to delta / 8.
        #[arg(long)]
        resolution: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_THETA_MAX)]
        theta_max: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy disjoint selection from a text file of `lo,hi` lines; writes
    /// the selected intervals as CSV and prints the coverage ratio.
    Vitali {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Weak-type constant sweep over separations (mdelta) or lacunary
    /// depths (mlac); one CSV row per parameter value.
    Sweep {
        /// mdelta | mlac.
        #[arg(long)]
        op: Option<String>,
        /// Separation list, e.g. 2^-4..2^-9 or 0.0625,0.03125.
        #[arg(long)]
        deltas: Option<String>,
        /// Depth list, e.g. 4..10 or 4,6,10.
        #[arg(long)]
        jmaxs: Option<String>,
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        theta_max: Option<f64>,
        /// Optional key=value config file; explicit flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Randomized extremizer search at one separation; writes JSON.
    Sharpness {
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        budget: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 2048)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn witness_columns(w: &Witness) -> (f64, f64, f64) {
    match *w {
        Witness::Ball { radius } => (0.0, 2.0 * radius, 2.0 * radius),
        Witness::Par {
            half_length,
            half_height,
        } => (0.0, 2.0 * half_length, 2.0 * half_height),
        Witness::Rect {
            angle,
            length,
            width,
        } => (angle, length, width),
    }
}

fn field_to_csv(field: &MaximalField) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["x", "value", "witness_angle", "witness_length", "witness_width"])?;
    for i in 0..field.grid().n() {
        let (angle, length, width) = witness_columns(&field.witnesses()[i]);
        writer.write_record(&[
            format!("{}", field.grid().midpoint(i)),
            format!("{}", field.values()[i]),
            format!("{angle}"),
            format!("{length}"),
            format!("{width}"),
        ])?;
    }
    Ok(String::from_utf8(writer.into_inner()?)?)
}

fn run_compute(
    op: OpKind,
    f_spec: &str,
    g_spec: Option<&str>,
    delta: Option<f64>,
    jmax: Option<u32>,
    grid_n: usize,
    theta_max: f64,
) -> Result<MaximalField> {
    let centers = Grid1D::new(-5.0, 5.0, grid_n)?;
    let f_spec: FunctionSpec = f_spec.parse()?;
    let need_g = || -> Result<FunctionSpec> {
        Ok(g_spec
            .context("this operator needs --g")?
            .parse::<FunctionSpec>()?)
    };
    let field = match op {
        OpKind::M1 => {
            let f = sample_function(&f_spec, &centers)?;
            m1_maximal(&f, &default_radius_schedule(centers.h())?)?
        }
        OpKind::Mdelta => {
            let delta = delta.context("mdelta needs --delta")?;
            let g_spec = need_g()?;
            let fgrid = function_grid_for_delta(grid_n, delta)?;
            let f = sample_function(&f_spec, &fgrid)?;
            let g = sample_function(&g_spec, &fgrid)?;
            let omega = DirectionSet::separated(delta, theta_max)?;
            m_delta(&f, &g, &centers, delta, &omega, DEFAULT_QUADRATURE)?
        }
        OpKind::Mlac => {
            let jmax = jmax.context("mlac needs --jmax")?;
            let g_spec = need_g()?;
            let f = sample_function(&f_spec, &centers)?;
            let g = sample_function(&g_spec, &centers)?;
            let (lens, wids) = default_shape_schedules(centers.h())?;
            m_lac(&f, &g, &centers, jmax, &lens, &wids, DEFAULT_QUADRATURE)?
        }
        OpKind::Mdiag => {
            let g_spec = need_g()?;
            let f = sample_function(&f_spec, &centers)?;
            let g = sample_function(&g_spec, &centers)?;
            let (ls, ws) = default_parallelogram_schedules(centers.h())?;
            m_diag(&f, &g, &centers, &ls, &ws, DEFAULT_QUADRATURE)?
        }
    };
    Ok(field)
}

#[allow(clippy::too_many_arguments)]
fn apply_sweep_overrides(
    cfg: &mut SweepConfig,
    op: Option<String>,
    deltas: Option<String>,
    jmaxs: Option<String>,
    family: Option<String>,
    grid: Option<usize>,
    seed: Option<u64>,
    theta_max: Option<f64>,
) -> Result<()> {
    if let Some(op) = op {
        cfg.op = match op.as_str() {
            "mdelta" => SweepOp::MDelta,
            "mlac" => SweepOp::MLac,
            other => bail!("unknown sweep op '{other}' (expected mdelta or mlac)"),
        };
    }
    if let Some(s) = deltas {
        cfg.deltas = parse_delta_list(&s)?;
    }
    if let Some(s) = jmaxs {
        cfg.jmaxs = parse_jmax_list(&s)?;
    }
    if let Some(s) = family {
        cfg.family = s;
    }
    if let Some(n) = grid {
        cfg.grid_n = n;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = theta_max {
        cfg.theta_max = t;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Compute {
            op,
            f,
            g,
            delta,
            jmax,
            grid,
            theta_max,
            out,
        } => {
            let started = std::time::Instant::now();
            let field = run_compute(op, &f, g.as_deref(), delta, jmax, grid, theta_max)?;
            fs::write(&out, field_to_csv(&field)?)?;
            eprintln!(
                "wrote {} ({} points, max {}, {} ms)",
                out.display(),
                field.grid().n(),
                field.max_value(),
                started.elapsed().as_millis()
            );
        }
        Command::Cordoba {
            delta,
            centers,
            resolution,
            theta_max,
            out,
        } => {
            if centers == 0 {
                bail!("need at least one fan center");
            }
            let positions: Vec<f64> = if centers == 1 {
                vec![0.0]
            } else {
                (0..centers)
                    .map(|i| -1.0 + 2.0 * i as f64 / (centers - 1) as f64)
                    .collect()
            };
            let rects = fan_rectangles(delta, theta_max, &positions)?;
            let spacing = resolution.unwrap_or(delta / 8.0);
            let stats = overlap_l2_norm(&rects, &LatticeSpec { spacing })?;
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer.write_record(["delta", "n_rects", "sum_area", "overlap_l2", "cordoba_ratio"])?;
            writer.write_record(&[
                format!("{}", stats.delta),
                format!("{}", stats.n_rectangles),
                format!("{}", stats.total_area),
                format!("{}", stats.l2_norm),
                format!("{}", stats.cordoba_ratio),
            ])?;
            fs::write(&out, String::from_utf8(writer.into_inner()?)?)?;
            eprintln!(
                "wrote {} ({} rectangles, ratio {})",
                out.display(),
                stats.n_rectangles,
                stats.cordoba_ratio
            );
        }
        Command::Vitali { input, out } => {
            let text = fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let intervals = parse_intervals(&text)?;
            let selected = bilmax::covering::vitali_select(&intervals)?;
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer.write_record(["lo", "hi"])?;
            for iv in &selected {
                writer.write_record(&[format!("{}", iv.lo), format!("{}", iv.hi)])?;
            }
            fs::write(&out, String::from_utf8(writer.into_inner()?)?)?;
            let union = union_measure(&intervals);
            let picked: f64 = selected.iter().map(Interval::measure).sum();
            let ratio = if union > 0.0 { picked / union } else { 1.0 };
            println!("coverage_ratio={ratio}");
        }
        Command::Sweep {
            op,
            deltas,
            jmaxs,
            family,
            grid,
            seed,
            theta_max,
            config,
            out,
        } => {
            let started = std::time::Instant::now();
            let mut cfg = match config {
                Some(path) => {
                    let text = fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    parse_config(&text)?
                }
                None => SweepConfig::default(),
            };
            apply_sweep_overrides(&mut cfg, op, deltas, jmaxs, family, grid, seed, theta_max)?;
            let reports = match cfg.op {
                SweepOp::MDelta => sweep_delta(&cfg)?,
                SweepOp::MLac => sweep_lacunary(&cfg)?,
            };
            fs::write(&out, reports_to_csv_string(&reports)?)?;
            for r in &reports {
                eprintln!(
                    "{} {} constant={} lambda*={} ({} ms)",
                    r.operator, r.delta_or_jmax, r.constant, r.lambda_star, r.runtime_ms
                );
            }
            eprintln!(
                "wrote {} ({} reports, {} ms)",
                out.display(),
                reports.len(),
                started.elapsed().as_millis()
            );
        }
        Command::Sharpness {
            delta,
            budget,
            seed,
            grid,
            out,
        } => {
            let started = std::time::Instant::now();
            let cfg = SharpnessConfig {
                delta,
                budget,
                seed,
                grid_n: grid,
                ..SharpnessConfig::default()
            };
            let record = sharpness_search(&cfg)?;
            fs::write(&out, sharpness_to_json(&record)?)?;
            eprintln!(
                "best constant {} from {} trials ({} ms)",
                record.best_constant,
                record.trials,
                started.elapsed().as_millis()
            );
        }
    }
    Ok(())
}
