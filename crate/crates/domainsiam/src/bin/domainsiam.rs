//! Command-line harness: synthetic sequence generation, tracking runs with
//! metrics, the loss-convergence benchmark, and channel-score inspection.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use domainsiam::bench::{default_kinds, loss_bench};
use domainsiam::config::{format_real, HarnessConfig};
use domainsiam::error::Error;
use domainsiam::features::Frame;
use domainsiam::synth::{run_tracking, synth_sequence};
use domainsiam::tracker::{analyze_template, BBox};

#[derive(Parser)]
#[command(name = "domainsiam", about = "Domain-aware correlation tracker harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file; omitted sections take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override every seeded component with one seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Emit PGM frames and gt.csv for a synthetic sequence.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Override the configured frame count.
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Track a sequence directory (frame_*.pgm + gt.csv) and emit metrics.csv.
    Track {
        #[command(flatten)]
        common: Common,
        /// Sequence directory produced by `synth`.
        #[arg(long)]
        sequence: PathBuf,
    },
    /// Benchmark convergence speed of the configured losses; emits curves.csv
    /// and summary.csv.
    LossBench {
        #[command(flatten)]
        common: Common,
    },
    /// Score feature channels on one frame and emit channels.csv.
    Channels {
        #[command(flatten)]
        common: Common,
        /// PGM frame to analyze.
        #[arg(long)]
        frame: PathBuf,
        /// Target box as cx,cy,w,h.
        #[arg(long)]
        bbox: String,
    },
}

fn load_config(common: &Common) -> Result<HarnessConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => HarnessConfig::load(path)?,
        None => HarnessConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.override_seed(seed);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<(), Error> {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn parse_bbox(text: &str) -> Result<BBox, Error> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Error::InvalidConfig(format!("bad bbox '{text}', expected cx,cy,w,h")))?;
    if parts.len() != 4 {
        return Err(Error::InvalidConfig(format!("bad bbox '{text}', expected 4 fields")));
    }
    Ok(BBox::new(parts[0], parts[1], parts[2], parts[3]))
}

fn read_gt(path: &Path) -> Result<Vec<BBox>, Error> {
    let text = std::fs::read_to_string(path)?;
    let mut boxes = Vec::new();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Format(format!("bad gt row: {line}")));
        }
        let vals: Vec<f64> = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| Error::Format(format!("bad gt row: {line}")))?;
        boxes.push(BBox::new(vals[0], vals[1], vals[2], vals[3]));
    }
    Ok(boxes)
}

fn cmd_synth(common: &Common, frames: Option<usize>) -> Result<(), Error> {
    let mut cfg = load_config(common)?;
    if let Some(n) = frames {
        cfg.synth.frames = n;
    }
    let (seq, gt) = synth_sequence(&cfg.synth)?;
    std::fs::create_dir_all(&common.out)?;
    for (i, frame) in seq.iter().enumerate() {
        frame.write_pgm(&common.out.join(format!("frame_{i:04}.pgm")))?;
    }
    let rows: Vec<String> = gt
        .iter()
        .enumerate()
        .map(|(i, b)| {
            format!(
                "{i},{},{},{},{}",
                format_real(b.cx),
                format_real(b.cy),
                format_real(b.w),
                format_real(b.h)
            )
        })
        .collect();
    write_csv(&common.out.join("gt.csv"), "frame,cx,cy,w,h", &rows)?;
    println!("wrote {} frames to {}", seq.len(), common.out.display());
    Ok(())
}

fn cmd_track(common: &Common, sequence: &Path) -> Result<(), Error> {
    let cfg = load_config(common)?;
    let mut frame_paths: Vec<PathBuf> = std::fs::read_dir(sequence)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "pgm"))
        .collect();
    frame_paths.sort();
    if frame_paths.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no .pgm frames in {}",
            sequence.display()
        )));
    }
    let frames: Vec<Frame> = frame_paths
        .iter()
        .map(|p| Frame::read_pgm(p))
        .collect::<Result<_, _>>()?;
    let gt = read_gt(&sequence.join("gt.csv"))?;
    if gt.len() != frames.len() {
        return Err(Error::InvalidArgument(format!(
            "{} frames but {} gt boxes",
            frames.len(),
            gt.len()
        )));
    }
    let metrics = run_tracking(&frames, &gt, &cfg.tracker)?;
    std::fs::create_dir_all(&common.out)?;
    let rows: Vec<String> = metrics
        .center_errors
        .iter()
        .zip(&metrics.ious)
        .enumerate()
        .map(|(i, (err, iou))| format!("{},{},{}", i + 1, format_real(*err), format_real(*iou)))
        .collect();
    write_csv(&common.out.join("metrics.csv"), "frame,center_error,iou", &rows)?;
    write_csv(
        &common.out.join("summary.csv"),
        "mean_iou,success_at_0.5",
        &[format!(
            "{},{}",
            format_real(metrics.mean_iou),
            format_real(metrics.success_at_half)
        )],
    )?;
    // wall-clock rate is non-deterministic, so it stays out of the CSVs
    println!(
        "mean IoU {:.3}, success@0.5 {:.3}, {:.1} FPS",
        metrics.mean_iou, metrics.success_at_half, metrics.fps
    );
    Ok(())
}

fn cmd_loss_bench(common: &Common) -> Result<(), Error> {
    let cfg = load_config(common)?;
    let batch = domainsiam::bench::imbalanced_batch(cfg.bench.seed);
    let result = loss_bench(&batch, &default_kinds(), &cfg.bench)?;
    std::fs::create_dir_all(&common.out)?;
    let mut curve_rows = Vec::new();
    let mut summary_rows = Vec::new();
    for curve in &result.curves {
        for (i, loss) in curve.losses.iter().enumerate() {
            curve_rows.push(format!("{},{i},{}", curve.kind, format_real(*loss)));
        }
        let iters = curve
            .iters_to_threshold
            .map_or(-1i64, |n| n as i64);
        summary_rows.push(format!(
            "{},{},{},{iters}",
            curve.kind,
            format_real(curve.losses[0]),
            format_real(*curve.losses.last().unwrap()),
        ));
    }
    write_csv(&common.out.join("curves.csv"), "kind,iter,loss", &curve_rows)?;
    write_csv(
        &common.out.join("summary.csv"),
        "kind,initial_loss,final_loss,iters_to_threshold",
        &summary_rows,
    )?;
    for curve in &result.curves {
        println!(
            "{}: {} iterations to threshold",
            curve.kind,
            curve
                .iters_to_threshold
                .map_or("not reached".to_string(), |n| n.to_string())
        );
    }
    Ok(())
}

fn cmd_channels(common: &Common, frame: &Path, bbox: &str) -> Result<(), Error> {
    let cfg = load_config(common)?;
    let frame = Frame::read_pgm(frame)?;
    let bbox = parse_bbox(bbox)?;
    let (_, scores, selected) = analyze_template(&frame, bbox, &cfg.tracker)?;
    std::fs::create_dir_all(&common.out)?;
    let rows: Vec<String> = scores
        .ranking
        .iter()
        .enumerate()
        .map(|(rank, &ch)| {
            format!(
                "{ch},{},{},{}",
                format_real(scores.scores[ch]),
                rank + 1,
                selected.contains(&ch) as u8
            )
        })
        .collect();
    write_csv(&common.out.join("channels.csv"), "channel,score,rank,selected", &rows)?;
    println!("scored {} channels, selected {}", scores.scores.len(), selected.len());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Synth { common, frames } => cmd_synth(common, *frames),
        Command::Track { common, sequence } => cmd_track(common, sequence),
        Command::LossBench { common } => cmd_loss_bench(common),
        Command::Channels { common, frame, bbox } => cmd_channels(common, frame, bbox),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (Error::InvalidConfig(_) | Error::Domain(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
