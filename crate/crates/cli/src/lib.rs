//! Command-line front end for `planar-ranging`.
//!
//! [`run`] parses arguments, executes one command and writes either
//! `key=value` lines or a JSON object. Exit codes: 0 success, 1 domain
//! error, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use planar_ranging::PixelPoint;

mod commands;
mod error;
mod output;

pub use commands::CorrectionFile;
pub use error::CliError;
pub use output::{Report, Unit};

#[derive(Debug, Parser)]
#[command(
    name = "planar-ranging",
    version,
    about = "Metric measurement on a ground plane from camera pixels"
)]
pub struct Cli {
    /// Emit one JSON object instead of key=value lines.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Locate the ground point seen at one pixel.
    Mono {
        #[arg(long)]
        camera: PathBuf,
        #[arg(long, value_parser = parse_pixel, allow_hyphen_values = true)]
        pixel: PixelPoint,
        /// Corrections written by `calibrate`.
        #[arg(long)]
        calib: Option<PathBuf>,
    },
    /// Range a target seen by both cameras of a rig.
    Stereo {
        #[arg(long)]
        rig: PathBuf,
        #[arg(long, value_parser = parse_pixel, allow_hyphen_values = true)]
        pixel_a: PixelPoint,
        #[arg(long, value_parser = parse_pixel, allow_hyphen_values = true)]
        pixel_b: PixelPoint,
    },
    /// Ground distance Y = H / tan(alpha) over a pitch sweep.
    Sensitivity {
        #[arg(long, default_value_t = 8.24)]
        height: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha_min: f64,
        #[arg(long, default_value_t = 30.0)]
        alpha_max: f64,
        /// Degrees.
        #[arg(long, default_value_t = 0.1)]
        step: f64,
        /// CSV destination; the table goes to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit pitch and principal-point corrections from surveyed points.
    Calibrate {
        #[arg(long)]
        camera: PathBuf,
        /// `u,v,X,Y` CSV.
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also fit a height correction (needs 4 points).
        #[arg(long)]
        fit_height: bool,
    },
    /// Bird's-eye view of one pixel or a whole image.
    Bev(BevArgs),
    /// Bundle adjustment of image-to-plane homographies.
    #[command(subcommand)]
    Mosaic(MosaicCommand),
    /// Synthetic scenes and Monte-Carlo error campaigns.
    #[command(subcommand)]
    Sim(SimCommand),
}

#[derive(Debug, Args)]
pub struct BevArgs {
    #[arg(long)]
    pub camera: PathBuf,
    /// Output raster resolution, pixels per meter.
    #[arg(long)]
    pub scale: f64,
    #[arg(long, value_parser = parse_pixel, allow_hyphen_values = true, conflicts_with_all = ["image", "out"])]
    pub pixel: Option<PixelPoint>,
    #[arg(long, requires = "out", required_unless_present = "pixel")]
    pub image: Option<PathBuf>,
    #[arg(long, requires = "image")]
    pub out: Option<PathBuf>,
    /// Ground beyond this range from the camera is left blank, meters.
    #[arg(long, default_value_t = 200.0)]
    pub max_range: f64,
    #[arg(long, value_enum, default_value_t = Interp::Bilinear)]
    pub interp: Interp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Interp {
    Nearest,
    Bilinear,
}

#[derive(Debug, Subcommand)]
pub enum MosaicCommand {
    /// Initialize and refine every homography of a correspondence graph.
    Solve {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// World error of a solution on surveyed holdout points.
    Eval {
        #[arg(long)]
        solution: PathBuf,
        /// `image_id,u,v,X,Y` CSV.
        #[arg(long)]
        holdout: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// One camera, H = 8.24 m, principal ray at 30 deg.
    Mono30,
    /// One camera, H = 8.24 m, principal ray at 2 deg.
    Mono2,
    /// Two cameras 220 m apart on the reservoir shore.
    StereoReservoir,
    /// 5 x 8 downward-looking camera grid.
    Grid40,
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    /// Scene spec JSON.
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    pub spec: Option<PathBuf>,
    /// Built-in scene instead of a spec file.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Noise model JSON; no noise when absent.
    #[arg(long)]
    pub noise: Option<PathBuf>,
    /// Overrides the noise model seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SimCommand {
    /// One trial of noisy observations.
    Generate(SceneArgs),
    EvaluateMono {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    EvaluateStereo {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Correspondence graph, holdout points and truth for a camera grid.
    MakeGraph(SceneArgs),
}

fn parse_pixel(s: &str) -> Result<PixelPoint, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [u, v] = parts.as_slice() else {
        return Err(format!("expected u,v but got '{s}'"));
    };
    let parse = |t: &str| t.parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    let p = PixelPoint::new(parse(u)?, parse(v)?);
    if !p.is_finite() {
        return Err(format!("non-finite pixel '{s}'"));
    }
    Ok(p)
}

/// Runs one invocation and returns its exit code. Results go to `out`,
/// diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    2
                }
            };
        }
    };
    let mut warnings = Vec::new();
    match commands::execute(&cli.command, &mut warnings) {
        Ok(report) => {
            for w in &warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            let text = if cli.json {
                report.render_json()
            } else {
                report.render_text()
            };
            let _ = out.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
