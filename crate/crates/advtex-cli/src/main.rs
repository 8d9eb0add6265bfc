//! Command-line driver for texture optimization experiments.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::{Path, PathBuf};

use advtex::geom::{vec3, Intrinsics};
use advtex::io::{self, Image};
use advtex::metrics::MetricReport;
use advtex::optim::{self, OptimConfig, OptimInput};
use advtex::synth;

#[derive(Parser)]
#[command(
    name = "advtex",
    version,
    about = "Adversarial texture optimization: synthetic datasets, optimization runs, evaluation"
)]
struct Cli {
    /// Force single-threaded execution for bitwise reproducibility.
    #[arg(long, global = true)]
    deterministic: bool,

    /// Worker threads (default: ADVTEX_THREADS or all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a 2D micro-translation dataset from a ground-truth image.
    Gen2d(Gen2dArgs),
    /// Generate a 3D virtual scan of a textured OBJ mesh.
    Gen3d(Gen3dArgs),
    /// Optimize a texture against a dataset.
    Optimize(OptimizeArgs),
    /// Compare a generated image/texture against a reference.
    Evaluate(EvaluateArgs),
    /// Rasterize a textured mesh into given camera views.
    Render(RenderArgs),
}

#[derive(Args)]
struct Gen2dArgs {
    /// Ground-truth PNG.
    #[arg(long)]
    input: PathBuf,
    /// Number of observations.
    #[arg(long, default_value_t = 16)]
    num: usize,
    /// Maximum translation per axis, pixels.
    #[arg(long, default_value_t = 16)]
    max_shift: i32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Gen3dArgs {
    /// UV-mapped mesh (ASCII OBJ subset).
    #[arg(long)]
    mesh: PathBuf,
    /// Ground-truth texture PNG.
    #[arg(long)]
    texture: PathBuf,
    /// Icosahedron subdivision level for hemisphere views.
    #[arg(long, default_value_t = 1)]
    level: u32,
    /// Keep at most this many views (in sampling order).
    #[arg(long)]
    max_views: Option<usize>,
    /// Camera distance from the target.
    #[arg(long, default_value_t = 2.5)]
    radius: f64,
    /// Square image size in pixels.
    #[arg(long, default_value_t = 128)]
    image_size: usize,
    /// Horizontal field of view, degrees.
    #[arg(long, default_value_t = 60.0)]
    fov: f64,
    /// Perturbation severity exponent n (translation bound 0.01*1.5^n m,
    /// geometry bound 0.02*1.5^n m, rotation 5 degrees); omit for an
    /// error-free dataset.
    #[arg(long)]
    severity: Option<f64>,
    /// Occlusion threshold in meters recorded for the optimizer.
    #[arg(long, default_value_t = advtex::geom::THETA_Z_OBJECT)]
    theta_z: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, serde::Serialize, serde::Deserialize, Clone)]
struct OptimizeParams {
    /// Optimization steps.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lambda0: Option<f64>,
    #[arg(long)]
    lambda_decay: Option<f64>,
    #[arg(long)]
    lambda_interval: Option<usize>,
    #[arg(long)]
    lr_texture: Option<f32>,
    #[arg(long)]
    lr_discriminator: Option<f32>,
    /// Texture resolution (3D datasets; 2D uses the observation size).
    #[arg(long)]
    texture_size: Option<usize>,
    /// Occlusion threshold override in meters.
    #[arg(long)]
    theta_z: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Keep every k-th view.
    #[arg(long)]
    frame_stride: Option<usize>,
    /// Disable the adversarial term (L1 baseline).
    #[arg(long, default_value_t = false)]
    #[serde(default)]
    l1_only: bool,
    /// Steps between texture snapshots / loss rows.
    #[arg(long)]
    snapshot_interval: Option<usize>,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Dataset directory (from gen2d/gen3d).
    #[arg(long)]
    dataset: PathBuf,
    /// Output run directory.
    #[arg(long)]
    out: PathBuf,
    /// JSON file with the same fields as the flags; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    params: OptimizeParams,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Generated image PNG.
    #[arg(long)]
    generated: PathBuf,
    /// Reference (ground truth) PNG.
    #[arg(long)]
    reference: PathBuf,
    /// Patch size (odd).
    #[arg(long, default_value_t = advtex::metrics::DEFAULT_PATCH_SIZE)]
    patch: usize,
    /// Nearest-search window radius in pixels.
    #[arg(long, default_value_t = advtex::metrics::DEFAULT_SEARCH_WINDOW)]
    window: usize,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// UV-mapped mesh (ASCII OBJ subset).
    #[arg(long)]
    mesh: PathBuf,
    /// Texture PNG to map onto the mesh.
    #[arg(long)]
    texture: PathBuf,
    /// Camera JSON files, one image per camera.
    #[arg(long, required = true, num_args = 1..)]
    camera: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    init_threads(&cli);
    let result = match cli.command {
        Command::Gen2d(args) => gen2d(args),
        Command::Gen3d(args) => gen3d(args),
        Command::Optimize(args) => optimize(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Render(args) => render(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn init_threads(cli: &Cli) {
    let threads = if cli.deterministic {
        1
    } else if let Some(n) = cli.threads {
        n.max(1)
    } else if let Ok(v) = std::env::var("ADVTEX_THREADS") {
        v.parse().unwrap_or(0)
    } else {
        0 // rayon default: all cores
    };
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }
}

/// Writes the reproduction stamp: effective config, seed, version.
fn write_stamp(dir: &Path, config_json: &serde_json::Value, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let config_path = dir.join("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(config_json)?)?;
    let version = format!(
        "advtex {}\nseed {}\nargs: {}\n",
        env!("CARGO_PKG_VERSION"),
        seed,
        std::env::args().collect::<Vec<_>>().join(" ")
    );
    std::fs::write(dir.join("version.txt"), version)?;
    Ok(())
}

fn gen2d(args: Gen2dArgs) -> Result<()> {
    let gt = io::read_png(&args.input)?;
    let observations = synth::make_2d_dataset(&gt, args.num, args.max_shift, args.seed)?;
    io::save_2d_dataset(&args.out, &observations, Some(&gt), args.seed)?;
    write_stamp(
        &args.out,
        &serde_json::json!({
            "command": "gen2d",
            "input": args.input,
            "num": args.num,
            "max_shift": args.max_shift,
            "seed": args.seed,
        }),
        args.seed,
    )?;
    eprintln!(
        "wrote {} observations ({}x{}) to {}",
        observations.len(),
        gt.width,
        gt.height,
        args.out.display()
    );
    Ok(())
}

fn gen3d(args: Gen3dArgs) -> Result<()> {
    let mesh = io::read_obj(&args.mesh)?;
    if !mesh.has_uvs() {
        bail!("mesh {} carries no texture coordinates", args.mesh.display());
    }
    let texture = io::read_png(&args.texture)?;
    let intr = Intrinsics::square(args.image_size, args.fov);
    let mut views =
        synth::sample_hemisphere_views(args.level, args.radius, vec3(0.0, 0.0, 0.0), intr);
    if let Some(cap) = args.max_views {
        views.truncate(cap);
    }
    if views.is_empty() {
        bail!("no views sampled");
    }
    let spec = match args.severity {
        Some(n) => synth::PerturbationSpec::from_severity(n, args.seed),
        None => synth::PerturbationSpec::zero(args.seed),
    };
    eprintln!(
        "rendering {} views at {}x{} (e_t={:.4} m, e_a={} deg, e_g={:.4} m)",
        views.len(),
        args.image_size,
        args.image_size,
        spec.e_t,
        spec.e_a_deg,
        spec.e_g
    );
    let (samples, gt) = synth::make_3d_dataset(&mesh, &texture, &views, &spec)?;
    io::save_3d_dataset(&args.out, &samples, Some(&gt), texture.width, args.theta_z, &spec)?;
    write_stamp(
        &args.out,
        &serde_json::json!({
            "command": "gen3d",
            "mesh": args.mesh,
            "texture": args.texture,
            "level": args.level,
            "max_views": args.max_views,
            "radius": args.radius,
            "image_size": args.image_size,
            "fov": args.fov,
            "severity": args.severity,
            "theta_z": args.theta_z,
            "seed": args.seed,
        }),
        args.seed,
    )?;
    eprintln!("wrote {} views to {}", samples.len(), args.out.display());
    Ok(())
}

fn merge_optimize_config(
    args: &OptimizeArgs,
    manifest: &io::Manifest,
) -> Result<(OptimConfig, serde_json::Value)> {
    // precedence: defaults < dataset manifest < config file < flags
    let mut config = OptimConfig {
        theta_z: manifest.theta_z.unwrap_or(advtex::geom::THETA_Z_SCENE),
        texture_size: manifest.texture_size.unwrap_or(128),
        ..OptimConfig::default()
    };
    let mut file_params: Option<OptimizeParams> = None;
    if let Some(path) = &args.config {
        let bytes = std::fs::read(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        file_params = Some(serde_json::from_slice(&bytes)?);
    }
    let apply = |config: &mut OptimConfig, p: &OptimizeParams| {
        if let Some(v) = p.steps {
            config.total_steps = v;
        }
        if let Some(v) = p.lambda0 {
            config.lambda0 = v;
        }
        if let Some(v) = p.lambda_decay {
            config.lambda_decay = v;
        }
        if let Some(v) = p.lambda_interval {
            config.lambda_interval = v;
        }
        if let Some(v) = p.lr_texture {
            config.lr_texture = v;
        }
        if let Some(v) = p.lr_discriminator {
            config.lr_discriminator = v;
        }
        if let Some(v) = p.texture_size {
            config.texture_size = v;
        }
        if let Some(v) = p.theta_z {
            config.theta_z = v;
        }
        if let Some(v) = p.seed {
            config.seed = v;
        }
        if let Some(v) = p.frame_stride {
            config.frame_stride = v;
        }
        if p.l1_only {
            config.l1_only = true;
        }
        if let Some(v) = p.snapshot_interval {
            config.snapshot_interval = v;
        }
    };
    if let Some(p) = &file_params {
        apply(&mut config, p);
    }
    apply(&mut config, &args.params);

    let echo = serde_json::json!({
        "command": "optimize",
        "dataset": args.dataset,
        "total_steps": config.total_steps,
        "lambda0": config.lambda0,
        "lambda_decay": config.lambda_decay,
        "lambda_interval": config.lambda_interval,
        "lr_texture": config.lr_texture,
        "lr_discriminator": config.lr_discriminator,
        "texture_size": config.texture_size,
        "theta_z": config.theta_z,
        "seed": config.seed,
        "frame_stride": config.frame_stride,
        "l1_only": config.l1_only,
        "snapshot_interval": config.snapshot_interval,
    });
    Ok((config, echo))
}

fn optimize(args: OptimizeArgs) -> Result<()> {
    let dataset = io::load_dataset(&args.dataset)?;
    let (config, echo) = merge_optimize_config(&args, dataset.manifest())?;
    // config echoed verbatim before any work begins
    write_stamp(&args.out, &echo, config.seed)?;

    let input = match &dataset {
        io::Dataset::TwoD { observations, .. } => OptimInput::TwoD { observations },
        io::Dataset::ThreeD { views, .. } => OptimInput::ThreeD { views },
    };

    let snapshots_dir = args.out.join("snapshots");
    std::fs::create_dir_all(&snapshots_dir)?;
    let mut csv = String::from(optim::HISTORY_HEADER);
    csv.push('\n');

    let started = std::time::Instant::now();
    let mut observer = |snap: optim::Snapshot| {
        csv.push_str(&snap.row.to_csv_row());
        csv.push('\n');
        let img = texture_to_image(snap.texture);
        let path = snapshots_dir.join(format!("step_{:06}.png", snap.step));
        if let Err(e) = io::write_png(&path, &img) {
            eprintln!("warning: snapshot write failed: {e}");
        }
        eprintln!(
            "step {:>7}  lambda {:.3}  L1 {:.5}  G_adv {:.4}  D_real {:.4}  D_fake {:.4}  [{:.1?}]",
            snap.step,
            snap.row.lambda,
            snap.row.loss_l1,
            snap.row.loss_g_adv,
            snap.row.loss_d_real,
            snap.row.loss_d_fake,
            started.elapsed()
        );
    };
    let (texture, _history) = optim::optimize_texture(&input, &config, Some(&mut observer))?;

    std::fs::write(args.out.join("loss.csv"), csv)?;
    io::write_png(&args.out.join("texture.png"), &texture_to_image(&texture))?;
    eprintln!(
        "optimization finished in {:.1?}; texture written to {}",
        started.elapsed(),
        args.out.join("texture.png").display()
    );
    Ok(())
}

fn texture_to_image(texture: &advtex::render::TextureState) -> Image {
    Image::from_planes(texture.size, texture.size, texture.image.data.clone())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let generated = io::read_png(&args.generated)?;
    let reference = io::read_png(&args.reference)?;
    let report = MetricReport::compute(&generated, &reference, args.patch, args.window)?;
    if let Some(parent) = args.out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&args.out, serde_json::to_string_pretty(&report)?)?;
    eprint!("{}", report.table());
    eprintln!("report written to {}", args.out.display());
    Ok(())
}

fn render(args: RenderArgs) -> Result<()> {
    let mesh = io::read_obj(&args.mesh)?;
    if !mesh.has_uvs() {
        bail!("mesh {} carries no texture coordinates", args.mesh.display());
    }
    let texture = io::read_png(&args.texture)?;
    std::fs::create_dir_all(&args.out)?;
    for (i, cam_path) in args.camera.iter().enumerate() {
        let camera = io::read_camera_json(cam_path)?;
        let maps = advtex::geom::rasterize_mesh(&mesh, &camera)?;
        let npix = camera.width * camera.height;
        let mut img = Image::zeros(camera.width, camera.height);
        for p in 0..npix {
            if maps.mask[p] == 0 {
                continue;
            }
            let rgb = synth::sample_image_bilinear(&texture, maps.uv[p], maps.uv[npix + p]);
            for ch in 0..3 {
                img.data[ch * npix + p] = rgb[ch];
            }
        }
        let out_path = args.out.join(format!("render_{i:04}.png"));
        io::write_png(&out_path, &img)?;
        eprintln!("rendered {}", out_path.display());
    }
    let mut f = std::fs::File::create(args.out.join("version.txt"))?;
    writeln!(f, "advtex {}", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
