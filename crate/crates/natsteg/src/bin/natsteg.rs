//! Command-line frontend: noise-model estimation, difference-model
//! derivation, embedding, payload analytics, tiling and source-mimicry
//! verification.
//!
//! Exit codes: 0 success, 2 argument/parse errors, 3 I/O and format errors,
//! 4 model violations, 5 verification failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use natsteg::develop::{plan_embed, plan_payload};
use natsteg::error::Error;
use natsteg::eval::{mimicry_check, payload_sweep};
use natsteg::noise::{bin_photosites, diff_model, fit_noise_model, NoiseModel};
use natsteg::plan::{DevelopPlan, StageSpec};
use natsteg::raster::{read_raster, tile, write_raster, TileSpec};
use natsteg::stego::{embed_raw, probs_to_costs, StegoParams};
use natsteg::Raster16;

#[derive(Parser)]
#[command(name = "natsteg", version, about = "Sensor-noise-model steganography toolkit")]
struct Cli {
    /// Cap on data-parallel threads (falls back to NATSTEGO_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Print the fully resolved configuration before running.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a noise model from a registered flat-field stack.
    EstimateNoise(EstimateNoiseArgs),
    /// Derive embedding parameters from two noise models.
    DiffModel(DiffModelArgs),
    /// Embed (by simulation) into a cover under a developing plan.
    Embed(EmbedArgs),
    /// Report the payload a cover carries under a plan.
    Payload(PayloadArgs),
    /// Cut an image into a grid of tiles.
    Tile(TileArgs),
    /// Verify that a stego stack acquired the target noise model.
    Mimicry(MimicryArgs),
    /// Compare embedding rates across several plans.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct EstimateNoiseArgs {
    /// Glob matching the stack frames (single-channel PGM).
    #[arg(long)]
    stack: String,
    /// Intensity bin width on the normalized [0,1] scale.
    #[arg(long, default_value_t = 5e-5)]
    delta: f64,
    /// Label stored in the model file.
    #[arg(long, default_value = "")]
    iso: String,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiffModelArgs {
    /// Source (quieter) model file.
    #[arg(long)]
    model1: PathBuf,
    /// Target (noisier) model file.
    #[arg(long)]
    model2: PathBuf,
    #[arg(long, default_value_t = 16)]
    bit_depth: u8,
    /// Output params file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    /// Cover raster (PGM/PPM).
    #[arg(long)]
    cover: PathBuf,
    /// Params file from diff-model.
    #[arg(long)]
    params: PathBuf,
    /// Developing plan: inline ("downsample box 2; quantize8") or a file.
    #[arg(long, default_value = "quantize8")]
    plan: String,
    /// Embedding key; mandatory so runs are replayable.
    #[arg(long)]
    seed: u64,
    /// Change-probability support bound; derived from the variance if unset.
    #[arg(long, value_name = "K")]
    k_max: Option<usize>,
    /// Also wet every pixel at the image's minimum code.
    #[arg(long)]
    wet_dark: bool,
    /// Skip developing: add the raw-domain stego signal and write a 16-bit
    /// raster (for source-mimicry stacks).
    #[arg(long, conflicts_with = "plan")]
    raw: bool,
    /// Output stego raster.
    #[arg(long)]
    out: PathBuf,
    /// Optional change-probability container.
    #[arg(long)]
    out_probs: Option<PathBuf>,
    /// Optional additive-cost container.
    #[arg(long)]
    out_costs: Option<PathBuf>,
}

#[derive(Args)]
struct PayloadArgs {
    #[arg(long)]
    cover: PathBuf,
    #[arg(long)]
    params: PathBuf,
    #[arg(long, default_value = "quantize8")]
    plan: String,
    /// Required when the plan realizes its payload sequentially.
    #[arg(long)]
    seed: Option<u64>,
    /// Report file; stdout if unset.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TileArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    tile_w: usize,
    #[arg(long)]
    tile_h: usize,
    #[arg(long)]
    cols: usize,
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct MimicryArgs {
    /// Glob for the cover stack (geometry reference).
    #[arg(long)]
    cover_stack: String,
    /// Glob for the stego stack to re-estimate on.
    #[arg(long)]
    stego_stack: String,
    /// Model the stego stack should exhibit.
    #[arg(long)]
    target_model: PathBuf,
    /// Intensity bin width on the normalized scale.
    #[arg(long, default_value_t = 5e-5)]
    delta: f64,
    /// Relative tolerance on the slope.
    #[arg(long, default_value_t = 0.03)]
    tol: f64,
    /// Relative tolerance on the intercept.
    #[arg(long, default_value_t = 0.20)]
    tol_b: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    cover: PathBuf,
    #[arg(long)]
    params: PathBuf,
    /// Plan (inline or file); repeatable.
    #[arg(long = "plan", required = true)]
    plans: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("NATSTEGO_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread-pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = match e {
                Error::InvalidArgument(_) => 2,
                Error::Io { .. } | Error::Format(_) => 3,
                Error::ModelViolation(_) => 4,
                Error::Verification(_) => 5,
            };
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: &Cli) -> natsteg::Result<()> {
    match &cli.command {
        Command::EstimateNoise(a) => estimate_noise(cli, a),
        Command::DiffModel(a) => cmd_diff_model(cli, a),
        Command::Embed(a) => cmd_embed(cli, a),
        Command::Payload(a) => cmd_payload(cli, a),
        Command::Tile(a) => cmd_tile(cli, a),
        Command::Mimicry(a) => cmd_mimicry(cli, a),
        Command::Sweep(a) => cmd_sweep(cli, a),
    }
}

fn print_config(cli: &Cli, pairs: &[(&str, String)]) {
    if !cli.print_config {
        return;
    }
    println!("threads={}", cli.threads.map_or("auto".into(), |n| n.to_string()));
    for (k, v) in pairs {
        println!("{k}={v}");
    }
}

/// Expands a glob into a sorted list of frames.
fn read_stack(pattern: &str) -> natsteg::Result<Vec<Raster16>> {
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| Error::InvalidArgument(format!("bad glob {pattern:?}: {e}")))?
        .filter_map(|p| p.ok())
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "glob {pattern:?} matched no files"
        )));
    }
    paths.iter().map(read_raster).collect()
}

/// A plan argument is either a recipe file or the inline grammar.
fn load_plan(arg: &str) -> natsteg::Result<DevelopPlan> {
    if Path::new(arg).is_file() {
        let text = std::fs::read_to_string(arg).map_err(|e| Error::io(arg, e))?;
        DevelopPlan::parse(&text)
    } else {
        DevelopPlan::parse(arg)
    }
}

/// Plans whose payload realization draws noise need an explicit key even
/// when only the payload is reported.
fn plan_needs_seed(plan: &DevelopPlan) -> bool {
    plan.stages.iter().any(|s| {
        matches!(
            s,
            StageSpec::Demosaic { .. }
                | StageSpec::ColorMatrix { .. }
                | StageSpec::Downsample {
                    kind: natsteg::plan::DownsampleKind::Tent,
                    ..
                }
        )
    })
}

fn estimate_noise(cli: &Cli, a: &EstimateNoiseArgs) -> natsteg::Result<()> {
    print_config(
        cli,
        &[
            ("command", "estimate-noise".into()),
            ("stack", a.stack.clone()),
            ("delta", a.delta.to_string()),
            ("out", a.out.display().to_string()),
        ],
    );
    let stack = read_stack(&a.stack)?;
    let bins = bin_photosites(&stack, a.delta)?;
    let model = fit_noise_model(&bins, a.iso.clone())?;
    model.save(&a.out)?;
    println!("frames={}", stack.len());
    println!("bins={}", bins.len());
    println!("a={:e}", model.a);
    println!("b={:e}", model.b);
    Ok(())
}

fn cmd_diff_model(cli: &Cli, a: &DiffModelArgs) -> natsteg::Result<()> {
    print_config(
        cli,
        &[
            ("command", "diff-model".into()),
            ("model1", a.model1.display().to_string()),
            ("model2", a.model2.display().to_string()),
            ("bit_depth", a.bit_depth.to_string()),
        ],
    );
    let m1 = NoiseModel::load(&a.model1)?;
    let m2 = NoiseModel::load(&a.model2)?;
    let params = diff_model(&m1, &m2, a.bit_depth)?;
    params.save(&a.out)?;
    println!("a_dd={:e}", params.a_dd);
    println!("b_dd={:e}", params.b_dd);
    Ok(())
}

fn cmd_embed(cli: &Cli, a: &EmbedArgs) -> natsteg::Result<()> {
    print_config(
        cli,
        &[
            ("command", "embed".into()),
            ("cover", a.cover.display().to_string()),
            ("plan", if a.raw { "raw".into() } else { a.plan.clone() }),
            ("seed", a.seed.to_string()),
            ("wet_dark", a.wet_dark.to_string()),
        ],
    );
    let cover = read_raster(&a.cover)?;
    let mut params = StegoParams::load(&a.params)?;
    if a.wet_dark {
        params.wet_dark = true;
    }
    if a.raw {
        if a.out_probs.is_some() || a.out_costs.is_some() {
            return Err(Error::InvalidArgument(
                "raw embedding has no change-probability map".into(),
            ));
        }
        let stego = embed_raw(&cover, &params, a.seed)?;
        write_raster(&stego, &a.out)?;
        println!("out={}", a.out.display());
        return Ok(());
    }
    let plan = load_plan(&a.plan)?;
    let out = plan_embed(&cover, &params, &plan, a.seed, a.k_max)?;
    write_raster(&out.stego, &a.out)?;
    if let Some(path) = &a.out_probs {
        let map = out.probs.as_ref().ok_or_else(|| {
            Error::InvalidArgument("this plan produces no closed-form probability map".into())
        })?;
        std::fs::write(path, map.to_bytes()).map_err(|e| Error::io(path, e))?;
    }
    if let Some(path) = &a.out_costs {
        let map = out.probs.as_ref().ok_or_else(|| {
            Error::InvalidArgument("this plan produces no closed-form probability map".into())
        })?;
        std::fs::write(path, probs_to_costs(map).to_bytes()).map_err(|e| Error::io(path, e))?;
    }
    println!("payload_bits={:.3}", out.payload_bits);
    println!("bpp={:.6}", out.bits_per_pixel);
    println!("out={}", a.out.display());
    Ok(())
}

fn cmd_payload(cli: &Cli, a: &PayloadArgs) -> natsteg::Result<()> {
    print_config(
        cli,
        &[
            ("command", "payload".into()),
            ("cover", a.cover.display().to_string()),
            ("plan", a.plan.clone()),
        ],
    );
    let cover = read_raster(&a.cover)?;
    let params = StegoParams::load(&a.params)?;
    let plan = load_plan(&a.plan)?;
    let seed = match (a.seed, plan_needs_seed(&plan)) {
        (Some(s), _) => s,
        (None, false) => 0,
        (None, true) => {
            return Err(Error::InvalidArgument(
                "this plan realizes its payload sequentially; pass --seed".into(),
            ))
        }
    };
    let (bits, bpp) = plan_payload(&cover, &params, &plan, seed, None)?;
    let report = format!("plan={}\npayload_bits={bits:.3}\nbpp={bpp:.6}\n", plan.to_text().replace('\n', "; "));
    match &a.out {
        Some(path) => std::fs::write(path, report).map_err(|e| Error::io(path, e))?,
        None => print!("{report}"),
    }
    Ok(())
}

fn cmd_tile(cli: &Cli, a: &TileArgs) -> natsteg::Result<()> {
    print_config(
        cli,
        &[
            ("command", "tile".into()),
            ("input", a.input.display().to_string()),
            ("grid", format!("{}x{}", a.cols, a.rows)),
            ("tile", format!("{}x{}", a.tile_w, a.tile_h)),
        ],
    );
    let src = read_raster(&a.input)?;
    let spec = TileSpec {
        tile_w: a.tile_w,
        tile_h: a.tile_h,
        grid_cols: a.cols,
        grid_rows: a.rows,
    };
    let tiles = tile(&src, &spec)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let ext = if src.channels == 3 { "ppm" } else { "pgm" };
    let stem = a
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "tile".into());
    for (i, t) in tiles.iter().enumerate() {
        let path = a.out_dir.join(format!("{stem}_{i:04}.{ext}"));
        write_raster(t, &path)?;
    }
    println!("tiles={}", tiles.len());
    Ok(())
}

fn cmd_mimicry(cli: &Cli, a: &MimicryArgs) -> natsteg::Result<()> {
    print_config(
        cli,
        &[
            ("command", "mimicry".into()),
            ("cover_stack", a.cover_stack.clone()),
            ("stego_stack", a.stego_stack.clone()),
            ("tol", a.tol.to_string()),
            ("tol_b", a.tol_b.to_string()),
        ],
    );
    let cover = read_stack(&a.cover_stack)?;
    let stego = read_stack(&a.stego_stack)?;
    let target = NoiseModel::load(&a.target_model)?;
    let report = mimicry_check(&cover, &stego, &target, a.delta, a.tol, a.tol_b)?;
    print!("{}", report.to_text());
    if report.pass {
        Ok(())
    } else {
        Err(Error::Verification(format!(
            "recovered model off target: slope err {:.4}, intercept err {:.4}",
            report.rel_err_a, report.rel_err_b
        )))
    }
}

fn cmd_sweep(cli: &Cli, a: &SweepArgs) -> natsteg::Result<()> {
    print_config(
        cli,
        &[
            ("command", "sweep".into()),
            ("cover", a.cover.display().to_string()),
            ("plans", a.plans.len().to_string()),
        ],
    );
    let cover = read_raster(&a.cover)?;
    let params = StegoParams::load(&a.params)?;
    let plans: Vec<DevelopPlan> = a
        .plans
        .iter()
        .map(|p| load_plan(p))
        .collect::<natsteg::Result<_>>()?;
    let seed = match (a.seed, plans.iter().any(plan_needs_seed)) {
        (Some(s), _) => s,
        (None, false) => 0,
        (None, true) => {
            return Err(Error::InvalidArgument(
                "a listed plan realizes its payload sequentially; pass --seed".into(),
            ))
        }
    };
    let reports = payload_sweep(std::slice::from_ref(&cover), &params, &plans, seed)?;
    for r in &reports {
        print!("{}", r.to_text());
    }
    Ok(())
}
