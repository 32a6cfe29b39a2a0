use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use dvskit::blob::{detect_blobs, BlobParams, Connectivity};
use dvskit::codec::{parse_events_binary, parse_events_csv, write_events_binary, write_events_csv};
use dvskit::config::{PipelineConfig, Representation};
use dvskit::demo::{run_demo, DemoParams};
use dvskit::detections::{ingest_detections, write_detections_jsonl, DetectionSet};
use dvskit::eval::{
    fuse_all, set_analysis, threshold_block, EvalReport, Interpolation, MatchParams,
};
use dvskit::event::{EventStream, DEFAULT_SENSOR_HEIGHT, DEFAULT_SENSOR_WIDTH};
use dvskit::frame::{
    accumulate_window, binary_render, render_overlay, sigmoid_render, window_sequence, GrayFrame,
    PolarityGrid,
};
use dvskit::pgm::{decode_pgm, encode_pgm};
use dvskit::pseudolabel::{
    build_split_manifest, export_labels, filter_confidence, pair_frames, Alignment, RecordingInfo,
    RecordingManifest, Split,
};
use dvskit::sim::{load_intensity_sequence, simulate_events, SimParams};

#[derive(Parser)]
#[command(
    name = "dvskit",
    version,
    about = "Event-camera pipeline: codecs, simulation, binning, pseudo-labels, detection and evaluation"
)]
struct Cli {
    #[command(flatten)]
    overrides: ConfigOverrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigOverrides {
    /// JSON config file; individual flags below override its values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Event window length in microseconds
    #[arg(long, global = true, value_name = "US")]
    window_us: Option<u64>,
    /// Frame rendering for binned windows
    #[arg(long, global = true, value_enum)]
    representation: Option<ReprArg>,
    /// Minimum detection confidence kept by pseudo-labeling and overlays
    #[arg(long, global = true, value_name = "C")]
    confidence_threshold: Option<f64>,
    /// IoU threshold for non-maximum suppression during fusion
    #[arg(long, global = true, value_name = "IOU")]
    nms_iou: Option<f64>,
    /// Comma-separated evaluation IoU thresholds, e.g. 0.5,0.7
    #[arg(long, global = true, value_parser = parse_f64_list, value_name = "LIST")]
    eval_iou: Option<std::vec::Vec<f64>>,
    /// Minimum box height in pixels for evaluation
    #[arg(long, global = true, value_name = "PX")]
    min_height: Option<f64>,
    /// Train,val,test ratio, e.g. 71,15,14
    #[arg(long, global = true, value_parser = parse_ratios, value_name = "T,V,S")]
    split_ratios: Option<[f64; 3]>,
    /// Which side of an APS frame its event window covers
    #[arg(long, global = true, value_enum)]
    alignment: Option<AlignArg>,
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect()
}

fn parse_ratios(s: &str) -> Result<[f64; 3], String> {
    let v = parse_f64_list(s)?;
    <[f64; 3]>::try_from(v).map_err(|v| format!("expected 3 values, got {}", v.len()))
}

#[derive(Clone, Copy, ValueEnum)]
enum ReprArg {
    Sigmoid,
    Binary,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlignArg {
    Preceding,
    Following,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Evt1ToCsv,
    CsvToEvt1,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConnArg {
    #[value(name = "4")]
    Four,
    #[value(name = "8")]
    Eight,
}

#[derive(Subcommand)]
enum Command {
    /// Convert event streams between the binary container and CSV
    Convert {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, value_enum)]
        direction: DirectionArg,
        /// Sensor width (CSV input carries no dimensions)
        #[arg(long, default_value_t = DEFAULT_SENSOR_WIDTH)]
        width: u16,
        #[arg(long, default_value_t = DEFAULT_SENSOR_HEIGHT)]
        height: u16,
    },
    /// Simulate an event stream from a timestamped image sequence
    Simulate {
        /// JSON index of {"t_us", "path"} entries pointing at P5 images
        index: PathBuf,
        /// Output stream; .csv extension selects CSV, anything else binary
        output: PathBuf,
        #[arg(long, default_value_t = 0.15)]
        contrast_threshold: f64,
        #[arg(long, default_value_t = 0)]
        refractory_us: u64,
    },
    /// Bin an event stream into fixed windows and write one frame per window
    Bin {
        input: PathBuf,
        output_dir: PathBuf,
        /// Frame filename prefix; defaults to the input file stem
        #[arg(long)]
        recording: Option<String>,
        #[arg(long, default_value_t = DEFAULT_SENSOR_WIDTH)]
        width: u16,
        #[arg(long, default_value_t = DEFAULT_SENSOR_HEIGHT)]
        height: u16,
    },
    /// Burn detection boxes into a rendered frame
    Render {
        frame: PathBuf,
        detections: PathBuf,
        output: PathBuf,
        /// Which frame's detections to draw; defaults to the frame file stem,
        /// then to the stem's trailing window id
        #[arg(long)]
        frame_id: Option<String>,
    },
    /// Turn detector outputs into per-window label files
    Pseudolabel {
        detections: PathBuf,
        output_dir: PathBuf,
        /// Label filename prefix; defaults to the detections file stem
        #[arg(long)]
        recording: Option<String>,
        #[arg(long, default_value = "aps")]
        source: String,
        #[arg(long, default_value_t = DEFAULT_SENSOR_WIDTH)]
        width: u16,
        #[arg(long, default_value_t = DEFAULT_SENSOR_HEIGHT)]
        height: u16,
    },
    /// Assign whole recordings to train/val/test by duration
    Split {
        /// JSON array of {id, scene, condition, duration_us}
        recordings: PathBuf,
        output: PathBuf,
    },
    /// Run the blob baseline detector over binned windows
    Detect {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 20)]
        min_area: usize,
        #[arg(long, value_enum, default_value = "4")]
        connectivity: ConnArg,
        #[arg(long, default_value_t = 1)]
        activity_threshold: i32,
        #[arg(long, default_value_t = DEFAULT_SENSOR_WIDTH)]
        width: u16,
        #[arg(long, default_value_t = DEFAULT_SENSOR_HEIGHT)]
        height: u16,
    },
    /// Pool two detection files and resolve overlaps with NMS
    Fuse {
        a: PathBuf,
        b: PathBuf,
        output: PathBuf,
        #[arg(long, default_value = "a")]
        source_a: String,
        #[arg(long, default_value = "b")]
        source_b: String,
    },
    /// Score detections against ground truth
    Evaluate {
        detections: PathBuf,
        ground_truth: PathBuf,
        /// Second detector; adds union/intersection set analysis at the
        /// first eval IoU threshold
        #[arg(long)]
        detections_b: Option<PathBuf>,
        /// Write the JSON report here as well as to stdout
        #[arg(long)]
        output: Option<PathBuf>,
        /// 11-point PR interpolation instead of all-point
        #[arg(long)]
        eleven_point: bool,
        /// Ignore detections overlapping height-filtered ground truth
        /// instead of counting them as false positives
        #[arg(long)]
        ignore_filtered_gt: bool,
    },
    /// Synthetic end-to-end run: simulate, bin, detect, evaluate
    Demo { output_dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn effective_config(o: &ConfigOverrides) -> Result<PipelineConfig> {
    let mut cfg = match &o.config {
        Some(path) => PipelineConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = o.window_us {
        cfg.window_duration_us = v;
    }
    if let Some(v) = o.representation {
        cfg.representation = match v {
            ReprArg::Sigmoid => Representation::Sigmoid,
            ReprArg::Binary => Representation::Binary,
        };
    }
    if let Some(v) = o.confidence_threshold {
        cfg.confidence_threshold = v;
    }
    if let Some(v) = o.nms_iou {
        cfg.nms_iou = v;
    }
    if let Some(v) = &o.eval_iou {
        cfg.eval_iou = v.clone();
    }
    if let Some(v) = o.min_height {
        cfg.min_height_px = v;
    }
    if let Some(v) = o.split_ratios {
        cfg.split_ratios = v;
    }
    if let Some(v) = o.alignment {
        cfg.alignment = match v {
            AlignArg::Preceding => Alignment::Preceding,
            AlignArg::Following => Alignment::Following,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn read_stream(path: &Path, width: u16, height: u16) -> Result<EventStream> {
    let ctx = || format!("reading events from {}", path.display());
    if is_csv(path) {
        let text = fs::read_to_string(path).with_context(ctx)?;
        Ok(parse_events_csv(&text, width, height).with_context(ctx)?)
    } else {
        let data = fs::read(path).with_context(ctx)?;
        Ok(parse_events_binary(&data).with_context(ctx)?)
    }
}

fn write_stream(path: &Path, stream: &EventStream) -> Result<()> {
    let ctx = || format!("writing events to {}", path.display());
    if is_csv(path) {
        fs::write(path, write_events_csv(stream)).with_context(ctx)?;
    } else {
        fs::write(path, write_events_binary(stream)).with_context(ctx)?;
    }
    Ok(())
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "recording".into(), |s| s.to_string_lossy().into_owned())
}

fn render_grid(grid: &PolarityGrid, representation: Representation) -> GrayFrame {
    match representation {
        Representation::Sigmoid => sigmoid_render(grid),
        Representation::Binary => binary_render(grid),
    }
}

/// Windows anchored at t=0, covering every event in the stream.
fn covering_window_count(stream: &EventStream, duration: u64) -> usize {
    stream
        .events
        .last()
        .map_or(0, |e| (e.t_us / duration) as usize + 1)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = effective_config(&cli.overrides)?;
    match cli.command {
        Command::Convert {
            input,
            output,
            direction,
            width,
            height,
        } => {
            let stream = match direction {
                DirectionArg::Evt1ToCsv => {
                    let data =
                        fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
                    let stream = parse_events_binary(&data)?;
                    fs::write(&output, write_events_csv(&stream))?;
                    stream
                }
                DirectionArg::CsvToEvt1 => {
                    let text = fs::read_to_string(&input)
                        .with_context(|| format!("reading {}", input.display()))?;
                    let stream = parse_events_csv(&text, width, height)?;
                    fs::write(&output, write_events_binary(&stream))?;
                    stream
                }
            };
            println!(
                "converted {} events ({}x{})",
                stream.events.len(),
                stream.width,
                stream.height
            );
        }
        Command::Simulate {
            index,
            output,
            contrast_threshold,
            refractory_us,
        } => {
            let seq = load_intensity_sequence(&index)
                .with_context(|| format!("loading {}", index.display()))?;
            let params = SimParams {
                contrast_threshold,
                refractory_us,
            };
            let stream = simulate_events(&seq, &params)?;
            write_stream(&output, &stream)?;
            println!(
                "simulated {} events over {} frames ({}x{})",
                stream.events.len(),
                seq.frames.len(),
                seq.width,
                seq.height
            );
        }
        Command::Bin {
            input,
            output_dir,
            recording,
            width,
            height,
        } => {
            let stream = read_stream(&input, width, height)?;
            let recording = recording.unwrap_or_else(|| file_stem(&input));
            cfg.echo_into(&output_dir)?;
            let count = covering_window_count(&stream, cfg.window_duration_us);
            let grids = window_sequence(&stream, 0, cfg.window_duration_us, count);
            for grid in &grids {
                let frame = render_grid(grid, cfg.representation);
                let name = format!("{recording}_{:012}.pgm", grid.t0);
                fs::write(output_dir.join(name), encode_pgm(&frame))?;
            }
            println!("wrote {count} frames to {}", output_dir.display());
        }
        Command::Render {
            frame,
            detections,
            output,
            frame_id,
        } => {
            let mut image = decode_pgm(
                &fs::read(&frame).with_context(|| format!("reading {}", frame.display()))?,
            )?;
            let sets = ingest_detections(&detections, "overlay")?;
            let explicit = frame_id.is_some();
            let id = frame_id.unwrap_or_else(|| file_stem(&frame));
            // Binned frames are named "<recording>_<window>" while detector
            // output keys on the bare window id, so the default lookup also
            // tries the stem's final underscore-separated piece.
            let boxes = sets
                .iter()
                .find(|s| s.frame_id == id)
                .or_else(|| {
                    if explicit {
                        return None;
                    }
                    let (_, window) = id.rsplit_once('_')?;
                    sets.iter().find(|s| s.frame_id == window)
                })
                .map(|s| s.boxes.as_slice())
                .unwrap_or_default();
            render_overlay(&mut image, boxes, cfg.confidence_threshold, 255);
            fs::write(&output, encode_pgm(&image))?;
            println!("drew {} boxes onto {}", boxes.len(), output.display());
        }
        Command::Pseudolabel {
            detections,
            output_dir,
            recording,
            source,
            width,
            height,
        } => {
            let recording = recording.unwrap_or_else(|| file_stem(&detections));
            let sets = ingest_detections(&detections, &source)?;
            let filtered: Vec<DetectionSet> = sets
                .iter()
                .map(|s| filter_confidence(s, cfg.confidence_threshold))
                .collect();
            let timestamps: Vec<(String, u64)> = filtered
                .iter()
                .map(|s| (s.frame_id.clone(), s.t_us))
                .collect();
            let pairing = pair_frames(&timestamps, cfg.window_duration_us, cfg.alignment)?;
            let report = export_labels(
                &pairing,
                &filtered,
                &output_dir,
                &recording,
                (width, height),
            )?;
            cfg.echo_into(&output_dir)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Split { recordings, output } => {
            let text = fs::read_to_string(&recordings)
                .with_context(|| format!("reading {}", recordings.display()))?;
            let infos: Vec<RecordingInfo> =
                serde_json::from_str(&text).context("parsing recordings JSON")?;
            let ratios = (
                cfg.split_ratios[0],
                cfg.split_ratios[1],
                cfg.split_ratios[2],
            );
            let manifest = build_split_manifest(&infos, ratios)?;
            fs::write(&output, manifest.to_json() + "\n")?;
            print_split_summary(&manifest);
        }
        Command::Detect {
            input,
            output,
            min_area,
            connectivity,
            activity_threshold,
            width,
            height,
        } => {
            let stream = read_stream(&input, width, height)?;
            let params = BlobParams {
                min_area,
                connectivity: match connectivity {
                    ConnArg::Four => Connectivity::Four,
                    ConnArg::Eight => Connectivity::Eight,
                },
                activity_threshold,
            };
            if params.min_area == 0 || params.activity_threshold < 1 {
                bail!("min_area and activity_threshold must be at least 1");
            }
            let count = covering_window_count(&stream, cfg.window_duration_us);
            let grids = window_sequence(&stream, 0, cfg.window_duration_us, count);
            let sets: Vec<DetectionSet> = grids.iter().map(|g| detect_blobs(g, &params)).collect();
            let total: usize = sets.iter().map(|s| s.boxes.len()).sum();
            fs::write(&output, write_detections_jsonl(&sets)?)?;
            println!("detected {total} blobs across {count} windows");
        }
        Command::Fuse {
            a,
            b,
            output,
            source_a,
            source_b,
        } => {
            let sets_a = ingest_detections(&a, &source_a)?;
            let sets_b = ingest_detections(&b, &source_b)?;
            let fused = fuse_all(&sets_a, &sets_b, cfg.nms_iou)?;
            let total: usize = fused.iter().map(|s| s.boxes.len()).sum();
            fs::write(&output, write_detections_jsonl(&fused)?)?;
            println!("fused into {total} boxes across {} frames", fused.len());
        }
        Command::Evaluate {
            detections,
            ground_truth,
            detections_b,
            output,
            eleven_point,
            ignore_filtered_gt,
        } => {
            let dets = ingest_detections(&detections, "a")?;
            let gts = ingest_detections(&ground_truth, "gt")?;
            let interpolation = if eleven_point {
                Interpolation::ElevenPoint
            } else {
                Interpolation::AllPoint
            };
            let mut thresholds = Vec::new();
            for &iou in &cfg.eval_iou {
                let params = MatchParams {
                    iou_threshold: iou,
                    min_height: cfg.min_height_px,
                    ignore_filtered_gt,
                };
                thresholds.push(threshold_block(&dets, &gts, &params, interpolation)?);
            }
            let set = match &detections_b {
                Some(path) => {
                    let dets_b = ingest_detections(path, "b")?;
                    Some(set_analysis(
                        &dets,
                        &dets_b,
                        &gts,
                        cfg.eval_iou[0],
                        cfg.min_height_px,
                    )?)
                }
                None => None,
            };
            let report = EvalReport {
                thresholds,
                set_analysis: set,
            };
            let json = serde_json::to_string_pretty(&report)?;
            println!("{json}");
            if let Some(path) = output {
                fs::write(&path, json + "\n")?;
            }
        }
        Command::Demo { output_dir } => {
            let params = DemoParams::default();
            let out = run_demo(&params);
            cfg.echo_into(&output_dir)?;
            let json = serde_json::to_string_pretty(&out.report)?;
            fs::write(output_dir.join("report.json"), json.clone() + "\n")?;
            for k in [0, params.windows / 2, params.windows - 1] {
                let t0 = k as u64 * params.window_us;
                let grid = accumulate_window(&out.stream, t0, params.window_us);
                let mut frame = sigmoid_render(&grid);
                render_overlay(&mut frame, &out.detections[k].boxes, 0.5, 255);
                fs::write(
                    output_dir.join(format!("demo_{t0:012}.pgm")),
                    encode_pgm(&frame),
                )?;
            }
            println!("{json}");
        }
    }
    Ok(())
}

fn print_split_summary(manifest: &RecordingManifest) {
    let loads = manifest.split_durations();
    let total: u64 = loads.iter().sum();
    for (split, load) in Split::ALL.iter().zip(loads) {
        let n = manifest
            .entries
            .iter()
            .filter(|e| e.split == *split)
            .count();
        println!(
            "{split:?}: {n} recordings, {load} us ({:.1}%)",
            100.0 * load as f64 / total as f64
        );
    }
}
