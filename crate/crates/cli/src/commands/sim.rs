use std::collections::BTreeMap;
use std::path::PathBuf;

use planar_ranging::mosaic::HoldoutPoint;
use planar_ranging::sim::{
    evaluate_mono, evaluate_stereo, generate_ba_graph, generate_observations, ErrorReport, NoiseModel, SceneSpec,
};

use super::{read, write};
use crate::{CliError, Preset, Report, SceneArgs, SimCommand, Unit};

pub(crate) fn preset_scene(p: Preset) -> SceneSpec {
    match p {
        Preset::Mono30 => SceneSpec::mono_target(8.24, 30.0, 1000.0),
        Preset::Mono2 => SceneSpec::mono_target(8.24, 2.0, 1000.0),
        Preset::StereoReservoir => SceneSpec::stereo_reservoir(),
        Preset::Grid40 => SceneSpec::camera_grid(5, 8, [27.5, 60.0], 30.0, 50.0, 1000.0),
    }
}

fn load(a: &SceneArgs) -> Result<(SceneSpec, NoiseModel), CliError> {
    let spec = match (&a.spec, a.preset) {
        (Some(path), _) => SceneSpec::from_json(&read(path)?)?,
        (None, Some(p)) => preset_scene(p),
        (None, None) => return Err(CliError::Usage("one of --spec or --preset is required".into())),
    };
    let mut noise = match &a.noise {
        Some(path) => NoiseModel::from_json(&read(path)?)?,
        None => NoiseModel::default(),
    };
    if let Some(seed) = a.seed {
        noise.seed = seed;
    }
    Ok((spec, noise))
}

fn out_file(a: &SceneArgs, name: &str) -> Option<PathBuf> {
    a.out.as_ref().map(|d| d.join(name))
}

fn error_report(a: &SceneArgs, rep: &ErrorReport) -> Result<Report, CliError> {
    if let Some(dir) = &a.out {
        write(&dir.join("errors.csv"), &rep.to_csv())?;
        write(&dir.join("summary.json"), &(rep.summary_json() + "\n"))?;
    }
    let mut r = Report::new()
        .int("trials", rep.trials)
        .int("count", rep.records.len())
        .int("omitted", rep.omitted)
        .int("failures", rep.failures);
    if let (Some(abs), Some(rel)) = (rep.abs, rep.rel) {
        r = r
            .m("mean_abs_m", abs.mean)
            .m("median_abs_m", abs.median)
            .m("p95_abs_m", abs.p95)
            .m("max_abs_m", abs.max)
            .num("median_rel", rel.median, Unit::Plain)
            .num("p95_rel", rel.p95, Unit::Plain);
    }
    Ok(r)
}

pub(super) fn execute(cmd: &SimCommand) -> Result<Report, CliError> {
    match cmd {
        SimCommand::Generate(a) => {
            let (spec, noise) = load(a)?;
            let obs = generate_observations(&spec, &noise)?;
            let count: usize = obs.cameras.iter().map(|c| c.points.len()).sum();
            let mut r = Report::new()
                .int("cameras", obs.cameras.len())
                .int("observations", count)
                .int("omitted", obs.omitted)
                .int("seed", noise.seed as usize);
            match out_file(a, "observations.csv") {
                Some(path) => {
                    write(&path, &obs.to_csv())?;
                    r = r.text("out", path.display().to_string());
                }
                None => r.body = Some(obs.to_csv()),
            }
            Ok(r)
        }
        SimCommand::EvaluateMono { scene, trials } => {
            let (spec, noise) = load(scene)?;
            error_report(scene, &evaluate_mono(&spec, &noise, *trials)?)
        }
        SimCommand::EvaluateStereo { scene, trials } => {
            let (spec, noise) = load(scene)?;
            error_report(scene, &evaluate_stereo(&spec, &noise, *trials)?)
        }
        SimCommand::MakeGraph(a) => {
            let Some(dir) = &a.out else {
                return Err(CliError::Usage("make-graph needs --out DIR".into()));
            };
            let (spec, noise) = load(a)?;
            let sc = generate_ba_graph(&spec, &noise)?;
            let truth: BTreeMap<&str, [f64; 9]> = sc
                .graph
                .images
                .iter()
                .zip(&sc.truth)
                .map(|(im, h)| (im.id.as_str(), h.to_row_array()))
                .collect();
            write(&dir.join("graph.json"), &(sc.graph.to_file().to_json() + "\n"))?;
            write(&dir.join("holdout.csv"), &HoldoutPoint::write_csv(&sc.holdout))?;
            write(
                &dir.join("truth.json"),
                &(serde_json::to_string_pretty(&truth).expect("plain data serializes") + "\n"),
            )?;
            Ok(Report::new()
                .int("images", sc.graph.images.len())
                .int("edges", sc.graph.edges.len())
                .int("controls", sc.graph.controls.len())
                .int("holdout", sc.holdout.len())
                .text("out", dir.display().to_string()))
        }
    }
}
