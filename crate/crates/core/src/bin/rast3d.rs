use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use rast3d::bench::{rows_csv, run_bench, BenchOp, BenchSpec, TrackingAllocator};
use rast3d::config::{read_config_file, FitConfig, SceneConfig, FIT_KEYS, SCENE_KEYS};
use rast3d::error::{Error, Result};
use rast3d::fit::run_fit_to_files;
use rast3d::grad::FdOptions;
use rast3d::ops::{gradcheck_suite, run_gradcheck, GRADCHECK_TOLERANCE};
use rast3d::render::render_to_png;

#[global_allocator]
static ALLOC: TrackingAllocator = TrackingAllocator;

#[derive(Parser)]
#[command(
    name = "rast3d",
    version,
    about = "Differentiable mesh and point-cloud rendering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a mesh or point cloud to PNG
    Render(RenderArgs),
    /// Fit an ico-sphere to multi-view silhouettes of a target mesh
    Fit(FitArgs),
    /// Time operators over synthetic batches and print CSV
    Bench(BenchArgs),
    /// Check every backward pass against finite differences
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct Common {
    /// key = value file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra key=value override, repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    image_size: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    blur_radius: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    common: Common,
    /// OBJ path or template such as sphere:2
    #[arg(long)]
    mesh: Option<String>,
    /// OBJ path or sampled template such as sphere:2:5000
    #[arg(long)]
    points: Option<String>,
    /// silhouette, hard or softmax
    #[arg(long)]
    shader: Option<String>,
    /// flat, gouraud or phong
    #[arg(long)]
    lighting: Option<String>,
    /// alpha or norm
    #[arg(long)]
    compositor: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// OBJ path or template such as cube:4
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    views: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    lambda_l: Option<f64>,
    #[arg(long)]
    lambda_e: Option<f64>,
    /// Loss trace CSV path
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// knn, chamfer, graph_conv, rasterize or composite
    #[arg(long)]
    op: String,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    /// Mean faces per mesh or points per cloud
    #[arg(long, default_value_t = 2000.0)]
    size: f64,
    /// Spread of sizes within a batch
    #[arg(long, default_value_t = 0.0)]
    spread: f64,
    /// Points in the second cloud (knn, chamfer)
    #[arg(long)]
    size_q: Option<usize>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 64)]
    image_size: usize,
    #[arg(long, default_value_t = 16)]
    feature_dim: usize,
    #[arg(long, default_value_t = 5)]
    batches: usize,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV path; stdout when omitted
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    directions: usize,
    #[arg(long, default_value_t = GRADCHECK_TOLERANCE)]
    tolerance: f64,
}

fn key_help(title: &str, keys: &[(&str, &str)]) -> String {
    let mut s = format!("{title}:\n");
    for (k, d) in keys {
        s.push_str(&format!("  {k:<16} {d}\n"));
    }
    s
}

fn pairs(common: &Common, extra: Vec<(&str, Option<String>)>) -> Result<Vec<(String, String)>> {
    let mut out = match &common.config {
        Some(p) => read_config_file(p)?,
        None => Vec::new(),
    };
    let flags = [
        ("image_size", common.image_size.map(|v| v.to_string())),
        ("k", common.k.map(|v| v.to_string())),
        ("sigma", common.sigma.map(|v| v.to_string())),
        ("blur_radius", common.blur_radius.map(|v| v.to_string())),
        (
            "output",
            common.output.as_ref().map(|p| p.display().to_string()),
        ),
    ];
    for (k, v) in flags.into_iter().chain(extra) {
        if let Some(v) = v {
            out.push((k.to_string(), v));
        }
    }
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn render(a: RenderArgs) -> Result<()> {
    let p = pairs(
        &a.common,
        vec![
            ("mesh", a.mesh),
            ("points", a.points),
            ("shader", a.shader),
            ("lighting", a.lighting),
            ("compositor", a.compositor),
            ("gamma", a.gamma.map(|v| v.to_string())),
            ("seed", a.seed.map(|v| v.to_string())),
        ],
    )?;
    let c = SceneConfig::from_pairs(&p)?;
    let out = render_to_png(&c, &c.output)?;
    for s in &out.stages {
        println!("{:<10} {:>9.3} ms", s.stage, s.elapsed.as_secs_f64() * 1e3);
    }
    println!("{:<10} {:>9.3} ms", "total", out.wall.as_secs_f64() * 1e3);
    println!("wrote {}", c.output.display());
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let p = pairs(
        &a.common,
        vec![
            ("target", a.target),
            ("views", a.views.map(|v| v.to_string())),
            ("iters", a.iters.map(|v| v.to_string())),
            ("step", a.step.map(|v| v.to_string())),
            ("lambda_l", a.lambda_l.map(|v| v.to_string())),
            ("lambda_e", a.lambda_e.map(|v| v.to_string())),
            ("trace", a.trace.map(|p| p.display().to_string())),
        ],
    )?;
    let c = FitConfig::from_pairs(&p)?;
    let every = (c.iters / 20).max(1);
    let report = run_fit_to_files(&c, |r| {
        if r.iter % every == 0 {
            println!(
                "iter {:>5}  L_s {:.5}  L_l {:.5}  L_e {:.5}  total {:.5}",
                r.iter, r.l_s, r.l_l, r.l_e, r.total
            );
        }
    })?;
    println!("final L_s {:.5}", report.final_l_s);
    println!("wrote {} and {}", c.output.display(), c.trace.display());
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let spec = BenchSpec {
        op: a.op.parse::<BenchOp>()?,
        batch_size: a.batch_size,
        size: a.size,
        sigma: a.spread,
        size_q: a.size_q,
        k: a.k,
        image_size: a.image_size,
        feature_dim: a.feature_dim,
        batches: a.batches,
        runs: a.runs,
        seed: a.seed,
    };
    let csv = rows_csv(&run_bench(&spec)?);
    match a.output {
        Some(p) => std::fs::write(p, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> Result<bool> {
    let opts = FdOptions {
        directions: a.directions,
        seed: a.seed,
        ..FdOptions::default()
    };
    let results = run_gradcheck(&gradcheck_suite(a.seed)?, opts, a.tolerance)?;
    for r in &results {
        println!(
            "{:<4} {:<34} max rel error {:.3e}  ({} directions, {} skipped)",
            if r.passed { "ok" } else { "FAIL" },
            r.report.op,
            r.report.max_rel_error,
            r.report.directions,
            r.report.unstable
        );
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    Ok(failed == 0)
}

fn main() -> ExitCode {
    let cmd = Cli::command()
        .mut_subcommand("render", |c| {
            c.after_help(key_help("Config keys", SCENE_KEYS))
        })
        .mut_subcommand("fit", |c| c.after_help(key_help("Config keys", FIT_KEYS)));
    let cli = match Cli::from_arg_matches(&cmd.get_matches()) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Render(a) => render(a),
        Command::Fit(a) => fit(a),
        Command::Bench(a) => bench(a),
        Command::Gradcheck(a) => gradcheck(a).map(|ok| {
            if !ok {
                std::process::exit(1);
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
