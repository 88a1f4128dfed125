mod output;

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use sponge_core::dimension::{solve_s0, solve_sn};
use sponge_core::distributions::convolution_smoothness_proxy;
use sponge_core::estimator::{
    cylinder_cover_bound, dyadic_radii, energy_profile, estimate_box_dimension, lebesgue_positivity_probe,
    sample_cloud, transversality_suite, PointCloud, TransversalityConfig,
};
use sponge_core::keys::{self, derive_seed, root_key};
use sponge_core::measure::{simulate_martingale, weights_from_dimension, MartingaleConfig};
use sponge_core::render::{render_cloud_ppm, render_iterates_svg, PRIMITIVE_CAP};
use sponge_core::rifs::{RealizationTree, SpongeSpec};
use sponge_core::{presets, Error, ErrorKind, Result};

use output::{envelope, json_text, rows_csv, sibling, table_csv, with_extension, write_bytes, Row};

/// Self-affine sponges with random contractions.
#[derive(Parser)]
#[command(name = "sponge", version, about)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SpecArgs {
    /// Spec JSON file.
    #[arg(long, conflicts_with = "preset")]
    spec: Option<PathBuf>,
    /// Bundled preset: example-line, four-corner, mod-four-corner.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, env = "SPONGE_SEED", default_value_t = 0)]
    seed: u64,
    /// JSON summary path; the CSV goes next to it with the same stem.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// List the bundled presets.
    Presets,
    /// Print the validated spec as JSON.
    ShowSpec {
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Solve the expected-pressure equation for s₀ (or s_n with --n).
    Solve {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Solve for the subsystem exponent s_n instead.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Sample projected points of one realization.
    Sample {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 10_000)]
        points: usize,
        #[arg(long, default_value_t = 14)]
        depth: usize,
    },
    /// Box-counting dimension of a sampled cloud.
    Boxcount {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 100_000)]
        points: usize,
        #[arg(long, default_value_t = 14)]
        depth: usize,
        /// Coarsest radius 2^-k.
        #[arg(long, default_value_t = 3)]
        coarse: u32,
        /// Finest radius 2^-k.
        #[arg(long, default_value_t = 8)]
        fine: u32,
    },
    /// Simulate the weight martingale X_k.
    Martingale {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Super-levels.
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Calibrate and test the transversality bound.
    Transversality {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        pairs: usize,
        #[arg(long, default_value_t = 2000)]
        resamples: usize,
        /// Projection depth in letters.
        #[arg(long, default_value_t = 48)]
        depth: usize,
    },
    /// Truncated t-energy of the weight measure.
    Energy {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Exponents; defaults to s_n − 0.1 and s_n + 0.3.
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        t: Vec<f64>,
        /// Truncation depth in letters; defaults to 8·q_n.
        #[arg(long)]
        depth: Option<usize>,
        /// Samples per split level.
        #[arg(long, default_value_t = 100)]
        pairs: usize,
    },
    /// Occupied-volume probe for positive Lebesgue measure.
    Positivity {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 100_000)]
        points: usize,
        #[arg(long, default_value_t = 14)]
        depth: usize,
        /// Mesh exponents k, one probe at h = 2^-k each.
        #[arg(long, num_args = 1.., default_values_t = [4u32, 5, 6, 7])]
        mesh: Vec<u32>,
    },
    /// Cylinder covering bound A_n·ᾱ^{ns} over a range of seeds.
    Cover {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 12)]
        n: usize,
        /// Exponent; defaults to s₀.
        #[arg(long, allow_negative_numbers = true)]
        s: Option<f64>,
        /// Number of realizations, seeds derived from --seed.
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long, default_value_t = 1_000_000_000)]
        cap: u64,
    },
    /// SVG of the first iterates.
    Render {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 2)]
        levels: usize,
    },
    /// PPM raster of a sampled planar cloud.
    RenderCloud {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 100_000)]
        points: usize,
        #[arg(long, default_value_t = 14)]
        depth: usize,
        #[arg(long, default_value_t = 1024)]
        res: usize,
    },
    /// Convolution smoothness proxy of one ratio marginal.
    Smoothness {
        #[command(flatten)]
        spec: SpecArgs,
        /// 1-based axis.
        #[arg(long, default_value_t = 1)]
        axis: usize,
        /// 1-based child.
        #[arg(long, default_value_t = 1)]
        child: usize,
        #[arg(long, default_value_t = 2)]
        folds: usize,
        #[arg(long, default_value_t = 256)]
        grid: usize,
    },
}

fn load_spec(args: &SpecArgs) -> Result<SpongeSpec> {
    match (&args.spec, &args.preset) {
        (Some(path), _) => SpongeSpec::from_json(&fs::read_to_string(path)?),
        (None, Some(name)) => presets::by_name(name),
        (None, None) => Err(Error::Argument("one of --spec or --preset is required".into())),
    }
}

/// Prints the summary and, with `--out`, writes it plus the CSV files.
fn emit(out: &Option<PathBuf>, summary: Value, rows: &[Row], extra: &[(&str, Vec<u8>)]) -> Result<()> {
    let text = json_text(&summary);
    if let Some(path) = out {
        write_bytes(path, text.as_bytes())?;
        write_bytes(&with_extension(path, "csv"), &rows_csv(rows)?)?;
        for (suffix, bytes) in extra {
            write_bytes(&sibling(path, suffix, "csv"), bytes)?;
        }
    }
    std::io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

fn cloud_for(spec: &SpongeSpec, seed: u64, points: usize, depth: usize) -> Result<PointCloud> {
    let tree = RealizationTree::realize(spec, seed);
    sample_cloud(&tree, points, depth, &keys::derive(&root_key(seed), b"cloud", 0))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Presets => {
            let list: Vec<Value> = presets::all()
                .iter()
                .map(|s| json!({"name": s.name, "d": s.d, "n": s.n, "spec_hash": s.hash_hex()}))
                .collect();
            emit(&None, envelope("presets", None, None, &list)?, &[], &[])
        }
        Command::ShowSpec { spec } => {
            let spec = load_spec(&spec)?;
            let mut text = spec.to_json();
            text.push('\n');
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
        Command::Solve { run, tol, n } => {
            let spec = load_spec(&run.spec)?;
            let report = match n {
                Some(n) => solve_sn(&spec, &spec.subsystem(n)?, tol)?,
                None => solve_s0(&spec, tol)?,
            };
            let rows = [Row::new("s_star", report.s_star, Some(report.tolerance))];
            emit(&run.out, envelope("solve", Some(&spec), Some(run.seed), &report)?, &rows, &[])
        }
        Command::Sample { run, points, depth } => {
            let spec = load_spec(&run.spec)?;
            let cloud = cloud_for(&spec, run.seed, points, depth)?;
            let hull = cloud.hull();
            let summary = json!({
                "count": cloud.count,
                "depth": depth,
                "error_radius": cloud.error_radius,
                "hull": hull,
            });
            let header: Vec<String> = (1..=spec.d).map(|k| format!("x{k}")).collect();
            let table = table_csv(&header, cloud.points.iter().cloned())?;
            let rows: Vec<Row> = (0..spec.d)
                .flat_map(|k| [Row::new(format!("hull_lo_{}", k + 1), hull.lo[k], None), Row::new(format!("hull_hi_{}", k + 1), hull.hi[k], None)])
                .collect();
            emit(&run.out, envelope("sample", Some(&spec), Some(run.seed), &summary)?, &rows, &[("points", table)])
        }
        Command::Boxcount { run, points, depth, coarse, fine } => {
            let spec = load_spec(&run.spec)?;
            let cloud = cloud_for(&spec, run.seed, points, depth)?;
            let est = estimate_box_dimension(&cloud, &dyadic_radii(coarse, fine))?;
            let mut rows = vec![Row::new("box_dimension", est.slope, Some(est.stderr))];
            rows.extend(est.radii.iter().zip(&est.counts).map(|(r, c)| Row::new(format!("count_r={r}"), *c as f64, None)));
            let summary = json!({"points": points, "depth": depth, "estimate": est});
            emit(&run.out, envelope("boxcount", Some(&spec), Some(run.seed), &summary)?, &rows, &[])
        }
        Command::Martingale { run, n, depth, trials, tol } => {
            let spec = load_spec(&run.spec)?;
            let sub = spec.subsystem(n)?;
            let family = weights_from_dimension(&sub, &solve_sn(&spec, &sub, tol)?)?;
            let report = simulate_martingale(&family, &spec, run.seed, &MartingaleConfig::new(depth, trials))?;
            let mut rows = Vec::new();
            for l in &report.levels {
                rows.push(Row::new(format!("mean_X{}", l.k), l.mean, Some(l.stderr)));
                rows.push(Row::new(format!("mean_sq_X{}", l.k), l.mean_sq, Some(l.mean_sq_stderr)));
                rows.push(Row::new(format!("min_X{}", l.k), l.min, None));
            }
            if let Some(b) = report.l2_bound {
                rows.push(Row::new("l2_bound", b, None));
            }
            for r in &report.regressions {
                rows.push(Row::new(format!("slope_X{}_on_X{}", r.k + 1, r.k), r.slope, Some(r.slope_stderr)));
            }
            let header: Vec<String> = std::iter::once("trial".to_string())
                .chain((1..=depth).map(|k| format!("X{k}")))
                .collect();
            let table = table_csv(
                &header,
                report.trial_values.iter().enumerate().map(|(t, v)| std::iter::once(t as f64).chain(v.iter().copied()).collect()),
            )?;
            emit(&run.out, envelope("martingale", Some(&spec), Some(run.seed), &report)?, &rows, &[("trials", table)])
        }
        Command::Transversality { run, n, pairs, resamples, depth } => {
            let spec = load_spec(&run.spec)?;
            let cfg = TransversalityConfig {
                pairs,
                resamples,
                depth,
                ..TransversalityConfig::new(n)
            };
            let report = transversality_suite(&spec, &cfg, run.seed)?;
            let mut rows = vec![Row::new("fitted_c", report.fitted_c, None)];
            for (p, rho, prob, bound) in report.max_probabilities() {
                let se = (prob * (1.0 - prob) / resamples as f64).sqrt();
                rows.push(Row::new(format!("pair{p}_rho={rho}_probability"), prob, Some(se)));
                rows.push(Row::new(format!("pair{p}_rho={rho}_bound"), bound, None));
            }
            emit(&run.out, envelope("transversality", Some(&spec), Some(run.seed), &report)?, &rows, &[])
        }
        Command::Energy { run, n, t, depth, pairs } => {
            let spec = load_spec(&run.spec)?;
            let sub = spec.subsystem(n)?;
            let dim = solve_sn(&spec, &sub, 1e-12)?;
            let family = weights_from_dimension(&sub, &dim)?;
            let ts = if t.is_empty() { vec![dim.s_star - 0.1, dim.s_star + 0.3] } else { t };
            let depth = depth.unwrap_or(8 * family.q());
            let tree = RealizationTree::realize(&spec, run.seed);
            let est = energy_profile(&family, &tree, &ts, pairs, depth, &keys::derive(&root_key(run.seed), b"energy", 0))?;
            let rows: Vec<Row> = est.iter().map(|e| Row::new(format!("energy_t={}", e.t), e.value, Some(e.stderr))).collect();
            let summary = json!({"s_n": dim.s_star, "q": family.q(), "estimates": est});
            emit(&run.out, envelope("energy", Some(&spec), Some(run.seed), &summary)?, &rows, &[])
        }
        Command::Positivity { run, points, depth, mesh } => {
            let spec = load_spec(&run.spec)?;
            let cloud = cloud_for(&spec, run.seed, points, depth)?;
            let bbox = spec.invariant_box();
            let reports = mesh
                .iter()
                .map(|&k| lebesgue_positivity_probe(&bbox, &cloud, 0.5f64.powi(k as i32)))
                .collect::<Result<Vec<_>>>()?;
            let rows: Vec<Row> = reports.iter().map(|r| Row::new(format!("volume_h={}", r.h), r.estimate, None)).collect();
            let s0 = solve_s0(&spec, 1e-10)?.s_star;
            let summary = json!({"s_star": s0, "box": bbox, "probes": reports});
            emit(&run.out, envelope("positivity", Some(&spec), Some(run.seed), &summary)?, &rows, &[])
        }
        Command::Cover { run, n, s, seeds, cap } => {
            let spec = load_spec(&run.spec)?;
            let s = match s {
                Some(s) => s,
                None => solve_s0(&spec, 1e-10)?.s_star,
            };
            let arc = std::sync::Arc::new(spec.clone());
            let covers = (0..seeds as u64)
                .map(|i| {
                    let tree = RealizationTree::new(arc.clone(), derive_seed(run.seed, b"cover", i));
                    cylinder_cover_bound(&tree, n, s, cap)
                })
                .collect::<Result<Vec<_>>>()?;
            let exceed = covers.iter().filter(|c| !c.holds).count() as f64 / seeds.max(1) as f64;
            let mut rows = vec![Row::new("exceed_frequency", exceed, Some((exceed * (1.0 - exceed) / seeds.max(1) as f64).sqrt()))];
            rows.extend(covers.iter().enumerate().map(|(i, c)| Row::new(format!("scaled_realization{i}"), c.scaled, None)));
            let summary = json!({"n": n, "s": s, "exceed_frequency": exceed, "covers": covers});
            emit(&run.out, envelope("cover", Some(&spec), Some(run.seed), &summary)?, &rows, &[])
        }
        Command::Render { run, levels } => {
            let spec = load_spec(&run.spec)?;
            let tree = RealizationTree::realize(&spec, run.seed);
            let svg = render_iterates_svg(&tree, levels, PRIMITIVE_CAP)?;
            match &run.out {
                Some(path) => write_bytes(path, svg.as_bytes())?,
                None => std::io::stdout().write_all(svg.as_bytes())?,
            }
            Ok(())
        }
        Command::RenderCloud { run, points, depth, res } => {
            let spec = load_spec(&run.spec)?;
            if spec.d != 2 {
                return Err(Error::Dimension { expected: 2, got: spec.d });
            }
            let cloud = cloud_for(&spec, run.seed, points, depth)?;
            let ppm = render_cloud_ppm(&cloud, &spec.invariant_box(), res)?;
            match &run.out {
                Some(path) => write_bytes(path, &ppm)?,
                None => std::io::stdout().write_all(&ppm)?,
            }
            Ok(())
        }
        Command::Smoothness { spec, axis, child, folds, grid } => {
            let spec = load_spec(&spec)?;
            let law = axis
                .checked_sub(1)
                .and_then(|a| spec.axis_laws.get(a))
                .and_then(|l| child.checked_sub(1).and_then(|c| l.marginals.get(c)))
                .ok_or_else(|| Error::Argument(format!("no marginal for axis {axis}, child {child}")))?;
            let report = convolution_smoothness_proxy(law, folds, grid);
            let rows = [Row::new("max_jump", report.max_jump, None)];
            emit(&None, envelope("smoothness", Some(&spec), None, &report)?, &rows, &[])
        }
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Schema => 2,
        ErrorKind::Budget => 3,
        ErrorKind::Numeric => 4,
        ErrorKind::Io => 5,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global() {
            eprintln!("error: worker pool: {e}");
            return ExitCode::from(5);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
