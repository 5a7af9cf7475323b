use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use freespace_flow::flow_io::{self, Config};
use freespace_flow::{
    add_noise, estimate_pose, evaluate, fit_fv_curve, insert_obstacle, render_fitted_fv,
    render_flow_map, render_flow_map_par, row_projection, scene_synth, segment_freespace,
    synth_ground_truth, viz, Error, FlowVector, FreespaceMask, NoiseSpec, Rect, Result,
};

#[derive(Parser)]
#[command(
    name = "fsof",
    version,
    about = "Freespace optical flow models and tools"
)]
struct Cli {
    /// Worker threads for rendering and swarm evaluation.
    #[arg(long, global = true, env = "FSOF_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a closed-form flow map from a config.
    Model {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = ["full-disp", "full-vel", "simple-disp", "simple-vel", "simplest"])]
        model: String,
        /// Output flow file (.png for KITTI, .flo for Middlebury).
        #[arg(long)]
        out: PathBuf,
        /// Color-wheel PNG; defaults to `<out>_viz.png`.
        #[arg(long)]
        viz: Option<PathBuf>,
    },
    /// Synthesize ground-truth flow of the configured road patch.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_flow: PathBuf,
        #[arg(long)]
        out_mask: PathBuf,
        #[arg(long)]
        noise_sigma: Option<f64>,
        /// `u,v,width,height,du,dv`
        #[arg(long)]
        obstacle: Option<String>,
    },
    /// Fit the row profile of F_v and render the fitted map.
    Fit {
        #[arg(long)]
        flow: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_fit_json: PathBuf,
        #[arg(long)]
        out_fitted_flow: PathBuf,
        /// Optional grayscale |F_v - fitted| image.
        #[arg(long)]
        out_error_png: Option<PathBuf>,
    },
    /// Label pixels whose F_v is within tau of the fitted map.
    Segment {
        #[arg(long)]
        flow: PathBuf,
        #[arg(long)]
        fitted: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long)]
        out_mask: PathBuf,
    },
    /// Recover (x_d, z_d, phi) from observed freespace flow.
    EstimatePose {
        #[arg(long)]
        flow: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_json: Option<PathBuf>,
    },
    /// Score an estimated flow map against ground truth.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        out_json: Option<PathBuf>,
    },
    /// Measure dense rendering throughput.
    Bench {
        #[arg(long, default_value_t = 1242)]
        width: usize,
        #[arg(long, default_value_t = 375)]
        height: usize,
        #[arg(long, default_value_t = 100)]
        frames: usize,
        /// Config providing camera and motion; a KITTI-like default is used
        /// otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "full-disp")]
        model: String,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            emit_error("Usage", &e.to_string());
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            emit_error("Threads", &e.to_string());
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            emit_error(e.kind(), &e.to_string());
            ExitCode::FAILURE
        }
    }
}

fn emit_error(kind: &str, message: &str) {
    eprintln!(
        "{}",
        json!({ "error": kind, "message": message.trim_end() })
    );
}

fn write_json(value: &serde_json::Value, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    if let Some(p) = path {
        std::fs::write(p, &text).map_err(|e| Error::Io {
            path: p.to_owned(),
            source: e,
        })?;
    }
    // a closed stdout (e.g. piped into `head`) is not an error
    let _ = writeln!(std::io::stdout(), "{text}");
    Ok(())
}

fn default_viz_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("flow");
    out.with_file_name(format!("{stem}_viz.png"))
}

fn parse_obstacle(spec: &str) -> Result<(Rect, FlowVector)> {
    let bad =
        || Error::InvalidParameter(format!("obstacle must be u,v,width,height,du,dv: {spec:?}"));
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if parts.len() != 6 {
        return Err(bad());
    }
    let int = |s: &str| s.parse::<usize>().map_err(|_| bad());
    let float = |s: &str| s.parse::<f64>().map_err(|_| bad());
    Ok((
        Rect {
            u: int(parts[0])?,
            v: int(parts[1])?,
            width: int(parts[2])?,
            height: int(parts[3])?,
        },
        FlowVector::new(float(parts[4])?, float(parts[5])?),
    ))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Model {
            config,
            model,
            out,
            viz: viz_path,
        } => {
            let cfg = Config::from_path(&config)?;
            let model = cfg.model(&model)?;
            let map = render_flow_map_par(
                cfg.scene.width,
                cfg.scene.height,
                None,
                &model,
                &cfg.camera,
                &cfg.mount,
            )?;
            let saturated = flow_io::write_flow(&map, &out)?;
            let viz_path = viz_path.unwrap_or_else(|| default_viz_path(&out));
            viz::write_flow_png(&map, &viz_path)?;
            write_json(
                &json!({
                    "flow": out,
                    "visualization": viz_path,
                    "units": map.units,
                    "valid_pixels": map.valid_count(),
                    "max_magnitude": map.max_magnitude(),
                    "saturated": saturated,
                }),
                None,
            )
        }
        Command::Synth {
            config,
            out_flow,
            out_mask,
            noise_sigma,
            obstacle,
        } => {
            let cfg = Config::from_path(&config)?;
            let pose = cfg.motion()?.pose_delta();
            let mut map = synth_ground_truth(&cfg.scene_spec(), &pose)?;
            let mut truth = FreespaceMask::from_valid(&map);
            if let Some(spec) = obstacle {
                let (rect, offset) = parse_obstacle(&spec)?;
                (map, truth) = insert_obstacle(&map, rect, offset)?;
            }
            let noise = match (noise_sigma, cfg.noise) {
                (Some(sigma), n) => Some(NoiseSpec {
                    sigma,
                    seed: n.map_or(0, |n| n.seed),
                }),
                (None, n) => n,
            };
            if let Some(n) = &noise {
                map = add_noise(&map, n)?;
            }
            let saturated = flow_io::write_flow(&map, &out_flow)?;
            flow_io::write_mask_png(&truth, &out_mask)?;
            write_json(
                &json!({
                    "flow": out_flow,
                    "mask": out_mask,
                    "pose": pose,
                    "noise": noise,
                    "noise_algorithm": scene_synth::NOISE_ALGORITHM,
                    "valid_pixels": map.valid_count(),
                    "freespace_pixels": truth.count(),
                    "saturated": saturated,
                }),
                None,
            )
        }
        Command::Fit {
            flow,
            mask,
            config,
            out_fit_json,
            out_fitted_flow,
            out_error_png,
        } => {
            let cfg = Config::from_path(&config)?;
            let map = flow_io::read_flow(&flow)?;
            let mask = mask.map(|p| flow_io::read_mask_png(&p)).transpose()?;
            let rp = row_projection(&map, mask.as_ref(), &cfg.fit.projection())?;
            let fit = fit_fv_curve(&rp, &cfg.camera, cfg.fit.kind)?;
            let fitted = render_fitted_fv(&fit, map.width, map.height);
            flow_io::write_flow(&fitted, &out_fitted_flow)?;

            let in_mask = |i: usize| mask.as_ref().is_none_or(|m| m.mask[i]);
            let errors: Vec<f64> = (0..map.len())
                .map(|i| {
                    if map.valid[i] && fitted.valid[i] && in_mask(i) {
                        (map.fv[i] - fitted.fv[i]).abs()
                    } else {
                        f64::NAN
                    }
                })
                .collect();
            let max_error = errors
                .iter()
                .copied()
                .filter(|e| e.is_finite())
                .fold(0.0, f64::max);
            if let Some(p) = out_error_png {
                viz::write_error_png(&errors, map.width, map.height, max_error.max(1.0), &p)?;
            }
            write_json(
                &json!({
                    "fit": fit,
                    "row_range": rp.row_range(),
                    "max_abs_error": max_error,
                }),
                Some(&out_fit_json),
            )
        }
        Command::Segment {
            flow,
            fitted,
            tau,
            out_mask,
        } => {
            let observed = flow_io::read_flow(&flow)?;
            let fitted = flow_io::read_flow(&fitted)?;
            let mask = segment_freespace(&observed, &fitted, tau)?;
            flow_io::write_mask_png(&mask, &out_mask)?;
            write_json(
                &json!({ "mask": out_mask, "tau": tau, "freespace_pixels": mask.count() }),
                None,
            )
        }
        Command::EstimatePose {
            flow,
            mask,
            config,
            out_json,
        } => {
            let cfg = Config::from_path(&config)?;
            let map = flow_io::read_flow(&flow)?;
            let mask = mask.map(|p| flow_io::read_mask_png(&p)).transpose()?;
            let est = estimate_pose(&map, mask.as_ref(), &cfg.camera, &cfg.mount, &cfg.pso)?;
            write_json(&serde_json::to_value(est)?, out_json.as_deref())
        }
        Command::Eval {
            gt,
            est,
            mask,
            out_json,
        } => {
            let gt = flow_io::read_flow(&gt)?;
            let est = flow_io::read_flow(&est)?;
            let mask = mask.map(|p| flow_io::read_mask_png(&p)).transpose()?;
            let report = evaluate(&gt, &est, mask.as_ref())?;
            write_json(&serde_json::to_value(report)?, out_json.as_deref())
        }
        Command::Bench {
            width,
            height,
            frames,
            config,
            model,
        } => {
            let cfg = match config {
                Some(p) => Config::from_path(&p)?,
                None => Config::from_json(
                    r#"{
                        "camera": {"fx": 721.5377, "fy": 721.5377, "u0": 609.5593, "v0": 172.854},
                        "mount": {"h": 1.65, "theta": 0.01},
                        "motion": {"kind": "displacement", "x_d": 0.05, "z_d": 1.2, "phi": 0.01}
                    }"#,
                )?,
            };
            let model = cfg.model(&model)?;
            let threads = rayon::current_num_threads();
            let render = || {
                if threads == 1 {
                    render_flow_map(width, height, None, &model, &cfg.camera, &cfg.mount)
                } else {
                    render_flow_map_par(width, height, None, &model, &cfg.camera, &cfg.mount)
                }
            };
            render()?;
            let mut times = Vec::with_capacity(frames.max(1));
            let start = Instant::now();
            for _ in 0..frames.max(1) {
                let t = Instant::now();
                std::hint::black_box(render()?);
                times.push(t.elapsed().as_secs_f64());
            }
            let total = start.elapsed().as_secs_f64();
            let best = times.iter().copied().fold(f64::INFINITY, f64::min);
            write_json(
                &json!({
                    "width": width,
                    "height": height,
                    "threads": threads,
                    "frames": times.len(),
                    "fps": times.len() as f64 / total,
                    "mean_ms": 1e3 * total / times.len() as f64,
                    "best_ms": 1e3 * best,
                    "environment": environment(),
                }),
                None,
            )
        }
    }
}

fn environment() -> serde_json::Value {
    let cpu = std::fs::read_to_string("/proc/cpuinfo").ok().and_then(|s| {
        s.lines()
            .find(|l| l.starts_with("model name"))
            .and_then(|l| l.split(':').nth(1))
            .map(|s| s.trim().to_owned())
    });
    json!({
        "os": std::env::consts::OS,
        "arch": std::env::consts::ARCH,
        "cpu": cpu,
        "available_parallelism": std::thread::available_parallelism().map(|n| n.get()).ok(),
    })
}
