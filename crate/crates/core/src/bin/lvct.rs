use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lvct_core::gradsuite::run_suite;
use lvct_core::io::{load_grid, save_grid, Grid};
use lvct_core::limited_view::{cut, merge_radon, CutMode, MaskedSinogram};
use lvct_core::metrics::MetricReport;
use lvct_core::phantom::{shepp_logan, volume_phantom};
use lvct_core::pipeline::{run_comparison, run_pipeline, train_comparison, train_stage, PipelineConfig, StageId};
use lvct_core::tomo::{degree_grid, fbp_reconstruct, radon_forward, sart_tv_reconstruct, FilterKind};
use lvct_core::{Error, Result};

const USAGE_CODE: u8 = 2;

#[derive(Parser)]
#[command(name = "lvct", version, about = "Limited-view CT restoration")]
struct Cli {
    /// TOML pipeline config
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed and LVCT_SEED
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a Shepp-Logan slice or a seeded ellipsoid volume
    Phantom(PhantomArgs),
    /// Parallel-beam projection of an image grid
    Radon(RadonArgs),
    /// Filtered backprojection of a sinogram grid
    Fbp(FbpArgs),
    /// SART with TV smoothing, optionally restricted to a mask
    SartTv(SartArgs),
    /// Zero-fill a contiguous angular range and write the mask
    Cut(CutArgs),
    /// Fill the masked views with the re-projection of the FBP
    Merge(MergeArgs),
    TrainStage1,
    TrainStage2,
    TrainStage3,
    /// Run the three stages over the test split
    Pipeline,
    /// Nine-way comparison table
    Compare {
        /// Train all networks first instead of loading checkpoints
        #[arg(long)]
        train: bool,
    },
    /// PSNR and SSIM of a test image against a reference
    Eval {
        test: PathBuf,
        reference: PathBuf,
    },
    /// Finite-difference gradient suite
    Gradcheck,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhantomKind {
    SheppLogan,
    Volume,
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long, value_enum, default_value = "shepp-logan")]
    kind: PhantomKind,
    #[arg(long)]
    size: Option<usize>,
    #[arg(long, default_value_t = 16)]
    slices: usize,
    #[arg(long, default_value_t = 6)]
    ellipsoids: usize,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct RadonArgs {
    input: PathBuf,
    #[arg(long)]
    angles: Option<usize>,
    #[arg(long)]
    detectors: Option<usize>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct FbpArgs {
    input: PathBuf,
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    filter: Option<FilterKind>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct SartArgs {
    input: PathBuf,
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct CutArgs {
    input: PathBuf,
    #[arg(long)]
    mode: Option<CutMode>,
    #[arg(long)]
    degrees: Option<f64>,
    #[arg(short, long)]
    out: PathBuf,
    /// Defaults to <out stem>.mask.grid
    #[arg(long)]
    mask_out: Option<PathBuf>,
}

#[derive(Args)]
struct MergeArgs {
    input: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    filter: Option<FilterKind>,
    #[arg(short, long)]
    out: PathBuf,
}

fn config(cli: &Cli) -> Result<PipelineConfig> {
    let cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let cfg = cfg.with_env_seed()?;
    Ok(match cli.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn save(path: &Path, grid: &Grid) -> Result<()> {
    save_grid(path, grid)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn mask_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "cut".into());
    out.with_file_name(format!("{stem}.mask.grid"))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = config(&cli)?;
    let g = &cfg.geometry;
    match cli.cmd {
        Cmd::Phantom(a) => {
            let size = a.size.unwrap_or(g.size);
            let grid = match a.kind {
                PhantomKind::SheppLogan => Grid::from_image(&shepp_logan(size)?),
                PhantomKind::Volume => Grid::from_volume(&volume_phantom(a.slices, size, a.ellipsoids, cfg.seed)?),
            };
            save(&a.out, &grid)?;
        }
        Cmd::Radon(a) => {
            let img = load_grid(&a.input)?.to_image()?;
            let angles = degree_grid(a.angles.unwrap_or(g.n_angles));
            let sino = radon_forward(&img, &angles, a.detectors.unwrap_or(g.n_detectors))?;
            save(&a.out, &Grid::from_sinogram(&sino))?;
        }
        Cmd::Fbp(a) => {
            let sino = load_grid(&a.input)?.to_sinogram()?;
            let n = a.size.unwrap_or(g.size);
            let img = fbp_reconstruct(&sino, a.filter.unwrap_or(cfg.filter), n, n)?;
            save(&a.out, &Grid::from_image(&img))?;
        }
        Cmd::SartTv(a) => {
            let sino = load_grid(&a.input)?.to_sinogram()?;
            let mask = a.mask.map(|p| load_grid(&p)?.to_mask()).transpose()?;
            let mut sc = cfg.sart;
            if let Some(k) = a.iterations {
                sc.n_iterations = k;
            }
            let n = a.size.unwrap_or(g.size);
            let out = sart_tv_reconstruct(&sino, mask.as_ref().map(|m| m.valid()), &sc, n, n)?;
            save(&a.out, &Grid::from_image(&out.image))?;
        }
        Cmd::Cut(a) => {
            let sino = load_grid(&a.input)?.to_sinogram()?;
            let m = cut(&sino, a.mode.unwrap_or(cfg.cut.mode), a.degrees.unwrap_or(cfg.cut.degrees))?;
            let mask_out = a.mask_out.unwrap_or_else(|| mask_path(&a.out));
            save(&a.out, &Grid::from_sinogram(m.sino()))?;
            save(&mask_out, &Grid::from_mask(m.mask()))?;
        }
        Cmd::Merge(a) => {
            let sino = load_grid(&a.input)?.to_sinogram()?;
            let mask = load_grid(&a.mask)?.to_mask()?;
            let merged = merge_radon(&MaskedSinogram::new(sino, mask)?, a.filter.unwrap_or(cfg.filter))?;
            save(&a.out, &Grid::from_sinogram(&merged))?;
        }
        Cmd::TrainStage1 | Cmd::TrainStage2 | Cmd::TrainStage3 => {
            let stage = match cli.cmd {
                Cmd::TrainStage1 => StageId::One,
                Cmd::TrainStage2 => StageId::Two,
                _ => StageId::Three,
            };
            let (ckpt, r) = train_stage(stage, &cfg)?;
            println!("{stage}: mse {:.6e} -> {:.6e} over {} iterations", r.mse_before, r.mse_after, r.iterations);
            println!("wrote {}", ckpt.display());
        }
        Cmd::Pipeline => {
            let r = run_pipeline(&cfg)?;
            println!("slices={} PSNR={:.3} SSIM={:.3}", r.slices.len(), r.mean.psnr, r.mean.ssim);
            println!("wrote {}", cfg.output_dir.display());
        }
        Cmd::Compare { train } => {
            let cmp = if train {
                let (cmp, ckpts) = train_comparison(&cfg)?;
                for p in ckpts {
                    println!("wrote {}", p.display());
                }
                cmp
            } else {
                run_comparison(&cfg)?
            };
            print!("{}", cmp.to_table());
            println!("{}", cmp.timing_line());
        }
        Cmd::Eval { test, reference } => {
            let a = load_grid(&test)?.to_image()?;
            let b = load_grid(&reference)?.to_image()?;
            let m = MetricReport::compare(&a, &b)?;
            println!("PSNR={:.3} SSIM={:.3}", m.psnr, m.ssim);
        }
        Cmd::Gradcheck => {
            let mut ok = true;
            for r in run_suite()? {
                let status = if r.passed() { "ok" } else { "FAIL" };
                ok &= r.passed();
                println!(
                    "{:<28} max_rel_error={:.3e} tol={:.0e} checked={} {status}",
                    r.name, r.report.max_rel_error, r.tolerance, r.report.n_checked
                );
            }
            if !ok {
                return Err(Error::GradCheck("one or more cases exceed tolerance".into()));
            }
        }
    }
    Ok(())
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("usage error").trim_start_matches("error: ");
            eprintln!("error: kind=usage code={USAGE_CODE} message={}", one_line(first));
            return ExitCode::from(USAGE_CODE);
        }
    };
    match run(cli) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: kind={} code={} message={}", e.kind(), e.code(), one_line(&e.to_string()));
            ExitCode::from(e.code() as u8)
        }
    }
}
