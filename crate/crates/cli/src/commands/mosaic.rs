use planar_ranging::mosaic::{evaluate, solve, BaConfig, BaSolution, CorrespondenceGraph, HoldoutPoint};

use super::{read, write};
use crate::{CliError, MosaicCommand, Report, Unit};

pub(super) fn execute(cmd: &MosaicCommand) -> Result<Report, CliError> {
    match cmd {
        MosaicCommand::Solve { graph, out, config } => {
            let g = CorrespondenceGraph::load(graph)?;
            let cfg = match config {
                Some(path) => BaConfig::from_json(&read(path)?)?,
                None => BaConfig::default(),
            };
            let sol = solve(&g, &cfg)?;
            write(out, &(sol.to_json() + "\n"))?;
            Ok(Report::new()
                .int("images", g.images.len())
                .int("edges", g.edges.len())
                .int("controls", g.controls.len())
                .int("iterations", sol.iterations)
                .num("initial_cost", sol.initial_cost, Unit::Plain)
                .num("final_cost", sol.final_cost, Unit::Plain)
                .flag("converged", sol.converged)
                .text("termination", format!("{:?}", sol.termination))
                .px("max_edge_rms_px", sol.max_edge_rms())
                .flag("cost_monotone", sol.trace_is_monotone())
                .text("out", out.display().to_string())
                .extra("cost_trace", sol.cost_trace.clone().into()))
        }
        MosaicCommand::Eval { solution, holdout } => {
            let sol = BaSolution::from_json(&read(solution)?)?;
            let points = HoldoutPoint::parse_csv(&read(holdout)?)?;
            let ev = evaluate(&sol, &points)?;
            let mut report = Report::new().int("points", ev.errors.len());
            if let (Some(rms), Some(max)) = (ev.rms, ev.max) {
                report = report.m("rms_m", rms).m("max_m", max);
            }
            Ok(report.extra("errors_m", ev.errors.clone().into()))
        }
    }
}
