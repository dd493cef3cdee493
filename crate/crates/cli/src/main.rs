//! `xclick`: segmentation, click simulation, evaluation, the annotation
//! server and offline reports.
//!
//! Exit status: 0 on success, 1 when some entries failed, 2 on usage or
//! input errors.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use xclick_core::edge::load_edge_map;
use xclick_core::evaluation::{
    load_manifest, run_experiment, voc_to_manifest, write_entries_csv, write_manifest, write_timings_csv, ManifestEntry,
    VocOptions,
};
use xclick_core::geometry::{box_from_clicks, simulate_extreme_clicks, tight_box_from_mask, BinaryMask, BoundingBox, ExtremeClicks};
use xclick_core::grabcut::{grabcut, EnergyConfig, Mode};
use xclick_core::protocol::{log_timing, read_log, AnnotationService, ProtocolConfig};
use xclick_service::ServiceConfig;

#[derive(Parser)]
#[command(name = "xclick", version, about = "Extreme-click boxes, segmentation and annotation tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment one object and write its mask plus a JSON sidecar.
    Segment(SegmentArgs),
    /// Write a manifest with clicks simulated from ground-truth masks.
    SimulateClicks(SimulateArgs),
    /// Segment every manifest entry and write a quality report.
    Evaluate(EvaluateArgs),
    /// Run the annotation HTTP service.
    Serve(ServeArgs),
    /// Summarize an annotation event log.
    Report(ReportArgs),
    /// Convert a PASCAL VOC directory into a manifest.
    VocToManifest(VocArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Box,
    Clicks,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Box => Mode::Box,
            ModeArg::Clicks => Mode::Clicks,
        }
    }
}

/// Energy settings: a JSON config file, then flags on top.
#[derive(Args)]
struct EnergyArgs {
    /// JSON file with energy settings and optionally "mode".
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Random seed [default: 0, or the config file's].
    #[arg(long)]
    seed: Option<u64>,
    /// Pairwise strength.
    #[arg(long)]
    lambda: Option<f64>,
    /// Edge sharpness of the pairwise term.
    #[arg(long)]
    beta: Option<f64>,
    /// Gaussians per appearance model.
    #[arg(long)]
    gmm_components: Option<usize>,
    /// Maximum cut/refit rounds.
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Box dilation, in pixels, for the boundary search.
    #[arg(long)]
    search_margin: Option<u32>,
}

impl EnergyArgs {
    /// Returns the configuration and the mode named in the file, if any.
    fn resolve(&self) -> Result<(EnergyConfig, Option<Mode>)> {
        let (mut cfg, mode) = match &self.config {
            Some(p) => load_energy_config(p)?,
            None => (EnergyConfig::default(), None),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.gmm_components {
            cfg.gmm_components = v;
        }
        if let Some(v) = self.max_iterations {
            cfg.max_iterations = v;
        }
        if let Some(v) = self.search_margin {
            cfg.search_margin = v;
        }
        cfg.validate().map_err(|e| anyhow!("{e}"))?;
        Ok((cfg, mode))
    }
}

fn load_energy_config(path: &Path) -> Result<(EnergyConfig, Option<Mode>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut v: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let obj = v.as_object_mut().ok_or_else(|| anyhow!("{}: expected a JSON object", path.display()))?;
    let mode = obj
        .remove("mode")
        .map(serde_json::from_value::<Mode>)
        .transpose()
        .with_context(|| format!("{}: mode", path.display()))?;
    let cfg = serde_json::from_value(v).with_context(|| format!("parsing {}", path.display()))?;
    Ok((cfg, mode))
}

#[derive(Args)]
struct SegmentArgs {
    /// Input image (PNG or JPEG).
    #[arg(long)]
    image: PathBuf,
    /// Four clicks as JSON, inline or a file path: {"points":[{"x":..,"y":..},..]}.
    #[arg(long, value_name = "JSON")]
    clicks: Option<String>,
    /// Box as x_min,y_min,x_max,y_max (inclusive).
    #[arg(long = "box", value_name = "X0,Y0,X1,Y1")]
    bbox: Option<BoundingBox>,
    /// 16-bit edge-map PNG; required in clicks mode.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Segmentation mode [default: the config file's, else clicks when --clicks is given].
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Output mask PNG; the sidecar goes next to it with a .json extension.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    energy: EnergyArgs,
}

#[derive(Serialize)]
struct Sidecar {
    mode: Mode,
    energy: f64,
    iterations: usize,
    #[serde(rename = "box")]
    bbox: BoundingBox,
    object_pixels: usize,
}

fn parse_clicks(arg: &str) -> Result<ExtremeClicks> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).with_context(|| format!("reading --clicks file {arg}"))?
    };
    serde_json::from_str(&text).context("parsing --clicks")
}

fn segment(a: &SegmentArgs) -> Result<()> {
    let (cfg, file_mode) = a.energy.resolve()?;
    let mode = a
        .mode
        .map(Mode::from)
        .or(file_mode)
        .unwrap_or(if a.clicks.is_some() { Mode::Clicks } else { Mode::Box });
    let clicks = a.clicks.as_deref().map(parse_clicks).transpose()?;
    let image = image::open(&a.image)
        .with_context(|| format!("reading --image {}", a.image.display()))?
        .to_rgb8();
    let edges = a
        .edges
        .as_ref()
        .map(|p| load_edge_map(p, Some(image.dimensions())).with_context(|| format!("reading --edges {}", p.display())))
        .transpose()?;
    let result = match mode {
        Mode::Clicks => {
            let c = clicks.as_ref().ok_or_else(|| anyhow!("clicks mode needs --clicks"))?;
            if edges.is_none() {
                bail!("clicks mode needs --edges");
            }
            grabcut(&image, &box_from_clicks(c), Some(c), edges.as_ref(), &cfg)?
        }
        Mode::Box => {
            let b = match (a.bbox, &clicks) {
                (Some(b), _) => b,
                (None, Some(c)) => box_from_clicks(c),
                (None, None) => bail!("box mode needs --box or --clicks"),
            };
            grabcut(&image, &b, None, edges.as_ref(), &cfg)?
        }
    };
    let mask = result.labeling.to_mask();
    mask.save_png(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let sidecar = Sidecar {
        mode: result.mode,
        energy: result.energy,
        iterations: result.iterations,
        bbox: tight_box_from_mask(&mask)?,
        object_pixels: mask.object_count(),
    };
    let side = a.out.with_extension("json");
    std::fs::write(&side, serde_json::to_string_pretty(&sidecar)? + "\n")
        .with_context(|| format!("writing {}", side.display()))?;
    println!("{} mode: {} object pixels, energy {:.4}, {} iterations", sidecar.mode, sidecar.object_pixels, sidecar.energy, sidecar.iterations);
    Ok(())
}

#[derive(Args)]
struct SimulateArgs {
    /// Directory of mask PNGs (0 background, 255 object, 128 ignore).
    #[arg(long)]
    masks: PathBuf,
    /// Manifest to write.
    #[arg(long)]
    out: PathBuf,
    /// Class label for every entry.
    #[arg(long, default_value = "object")]
    class: String,
    /// Where the images live [default: the masks directory]. A mask
    /// NAME_mask.png or NAME.png pairs with image NAME.png or NAME.jpg.
    #[arg(long)]
    images: Option<PathBuf>,
}

/// Returns `Ok(true)` when every mask was used.
/// Manifest paths are read relative to the manifest, so written ones are
/// made absolute rather than left relative to the working directory.
fn absolute(p: &Path) -> Result<PathBuf> {
    std::path::absolute(p).with_context(|| format!("resolving {}", p.display()))
}

fn simulate_clicks(a: &SimulateArgs) -> Result<bool> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(&a.masks)
        .with_context(|| format!("reading --masks {}", a.masks.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    files.sort();
    // Images may share the directory; then only NAME_mask.png files count.
    let is_mask = |p: &PathBuf| p.file_stem().is_some_and(|s| s.to_string_lossy().ends_with("_mask"));
    if files.iter().any(is_mask) {
        files.retain(is_mask);
    }
    if files.is_empty() {
        bail!("no mask PNGs in {}", a.masks.display());
    }
    let images = absolute(a.images.as_ref().unwrap_or(&a.masks))?;
    let mut entries = Vec::new();
    let mut skipped = 0;
    for f in &files {
        let stem = f.file_stem().unwrap_or_default().to_string_lossy();
        let name = stem.strip_suffix("_mask").unwrap_or(&stem).to_string();
        let mask = match BinaryMask::load_png(f).map_err(|e| e.to_string()).and_then(|m| {
            let c = simulate_extreme_clicks(&m).map_err(|e| e.to_string())?;
            Ok((m, c))
        }) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("skipping {}: {e}", f.display());
                skipped += 1;
                continue;
            }
        };
        let jpg = images.join(format!("{name}.jpg"));
        let image = if jpg.is_file() { jpg } else { images.join(format!("{name}.png")) };
        if image == *f {
            log::warn!("{}: mask and image are the same file", f.display());
        }
        let mut e = ManifestEntry::new(image, a.class.clone());
        e.id = Some(name.clone());
        e.bbox = Some(box_from_clicks(&mask.1));
        e.mask = Some(absolute(f)?);
        e.clicks = Some(mask.1);
        let edges = images.join(format!("{name}_edges.png"));
        if edges.is_file() {
            e.edges = Some(edges);
        }
        entries.push(e);
    }
    if entries.is_empty() {
        bail!("no readable masks in {}", a.masks.display());
    }
    let file = File::create(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    write_manifest(&entries, BufWriter::new(file))?;
    println!("{} entries written to {}", entries.len(), a.out.display());
    Ok(skipped == 0)
}

#[derive(Args)]
struct EvaluateArgs {
    /// JSON-lines manifest.
    #[arg(long)]
    manifest: PathBuf,
    /// Segmentation mode [default: the config file's, else box].
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Output directory for report.json, entries.csv and timings.csv.
    #[arg(long)]
    report: PathBuf,
    /// Worker threads; 0 uses one per core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[command(flatten)]
    energy: EnergyArgs,
}

fn evaluate(a: &EvaluateArgs) -> Result<bool> {
    let (cfg, file_mode) = a.energy.resolve()?;
    let mode = a.mode.map(Mode::from).or(file_mode).unwrap_or_default();
    let manifest = load_manifest(&a.manifest)?;
    let exp = run_experiment(&manifest, mode, &cfg, a.jobs)?;
    std::fs::create_dir_all(&a.report).with_context(|| format!("creating {}", a.report.display()))?;
    let create = |name: &str| -> Result<BufWriter<File>> {
        let p = a.report.join(name);
        Ok(BufWriter::new(File::create(&p).with_context(|| format!("writing {}", p.display()))?))
    };
    let mut r = create("report.json")?;
    serde_json::to_writer_pretty(&mut r, &exp.report)?;
    writeln!(r)?;
    r.flush()?;
    write_entries_csv(&exp.records, create("entries.csv")?)?;
    write_timings_csv(&exp.records, create("timings.csv")?)?;
    for f in &exp.report.failures {
        eprintln!("failed {}: {}", f.id, f.error);
    }
    println!(
        "{mode} mode: macro mIoU {:.4} over {} entries, {} failed",
        exp.report.quality.macro_mean_iou,
        exp.report.evaluated,
        exp.report.failures.len()
    );
    Ok(exp.report.failures.is_empty())
}

#[derive(Args)]
struct ServeArgs {
    /// Service configuration JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Port to listen on [default: the config's, else 8080].
    #[arg(long)]
    port: Option<u16>,
    /// Address to bind [default: the config's, else 127.0.0.1].
    #[arg(long)]
    bind: Option<String>,
}

fn service_config(path: Option<&Path>) -> Result<ServiceConfig> {
    Ok(match path {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    })
}

fn serve(a: &ServeArgs) -> Result<()> {
    let mut config = service_config(a.config.as_deref())?;
    if let Some(p) = a.port {
        config.port = p;
    }
    if let Some(b) = &a.bind {
        config.bind = b.clone();
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(xclick_service::serve(&config))?;
    Ok(())
}

#[derive(Args)]
struct ReportArgs {
    /// Event log written by the service.
    #[arg(long)]
    log: PathBuf,
    /// Service configuration; adds quality figures, which need the reference boxes.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

fn report(a: &ReportArgs) -> Result<()> {
    if !a.log.is_file() {
        bail!("no log at {}", a.log.display());
    }
    let events = read_log(&a.log)?;
    let (timing, quality) = match &a.config {
        Some(p) => {
            let cfg = ServiceConfig::load(p)?;
            let m = AnnotationService::replay(cfg.setup()?, events)?.metrics();
            (m.timing, Some(m.quality))
        }
        None => (log_timing(&events, ProtocolConfig::default().pay_per_batch), None),
    };
    if a.json {
        let v = serde_json::json!({ "timing": timing, "quality": quality });
        println!("{}", serde_json::to_string_pretty(&v)?);
        return Ok(());
    }
    println!("instances: {} ({} incomplete)", timing.instances, timing.incomplete);
    println!("mean {:.1} s/instance", timing.mean_total_s);
    println!(
        "first click {:.1} s, later clicks {:.1} s",
        timing.mean_first_click_s, timing.mean_later_click_s
    );
    println!("total {:.2} hours, {} batches, cost ${:.2}", timing.total_hours, timing.batches, timing.cost);
    if let Some(q) = quality {
        for c in &q.classes {
            println!(
                "{}: {} boxes, mIoU {:.4}, >0.5 {:.3}, >0.7 {:.3}",
                c.class, c.count, c.mean_iou, c.above[0], c.above[1]
            );
        }
        println!("macro mIoU {:.4}", q.macro_mean_iou);
    }
    Ok(())
}

#[derive(Args)]
struct VocArgs {
    /// VOC year directory holding Annotations/, JPEGImages/ and optionally SegmentationObject/.
    #[arg(long)]
    voc: PathBuf,
    /// Manifest to write.
    #[arg(long)]
    out: PathBuf,
    /// Keep only ids listed in ImageSets/Segmentation/NAME.txt.
    #[arg(long, value_name = "NAME")]
    image_set: Option<String>,
    /// Write per-instance masks here.
    #[arg(long)]
    masks_out: Option<PathBuf>,
    /// Keep objects marked difficult.
    #[arg(long)]
    include_difficult: bool,
}

fn voc(a: &VocArgs) -> Result<()> {
    let opts = VocOptions {
        image_set: a.image_set.clone(),
        masks_out: a.masks_out.as_deref().map(absolute).transpose()?,
        include_difficult: a.include_difficult,
    };
    let entries = voc_to_manifest(&absolute(&a.voc)?, &opts)?;
    let file = File::create(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    write_manifest(&entries, BufWriter::new(file))?;
    println!("{} entries written to {}", entries.len(), a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Segment(a) => segment(a).map(|_| true),
        Command::SimulateClicks(a) => simulate_clicks(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Serve(a) => serve(a).map(|_| true),
        Command::Report(a) => report(a).map(|_| true),
        Command::VocToManifest(a) => voc(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
