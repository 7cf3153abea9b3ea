use std::path::{Path, PathBuf};

use nonmarkov::propagate::{propagate_local_on, StepControl, TimeLocalGenerator};
use nonmarkov::spectra::{tcl_generator_from_map, INVERTIBILITY_TOL};
use nonmarkov::trajectory::MapTrajectory;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::output;

/// Relative spread of grid spacings accepted as uniform.
pub const UNIFORM_GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum RoundTrip {
    /// Sup-Frobenius distance between the input and the re-propagated maps.
    Checked { sup_distance: f64 },
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractReport {
    pub input: String,
    pub points: usize,
    pub singular_times: Vec<f64>,
    pub max_trace_defect: f64,
    pub round_trip: RoundTrip,
    pub warnings: Vec<String>,
}

pub struct ExtractOutput {
    pub report: ExtractReport,
    pub files: Vec<PathBuf>,
}

fn check_uniform(traj: &MapTrajectory) -> CliResult<()> {
    let g = traj.grid();
    if g.len() < 2 {
        return Ok(());
    }
    let h = (g[g.len() - 1] - g[0]) / (g.len() - 1) as f64;
    let worst = g.windows(2).map(|w| ((w[1] - w[0]) - h).abs()).fold(0.0, f64::max);
    if worst > UNIFORM_GRID_TOL * h.abs().max(1.0) {
        return Err(CliError::Validation(format!("grid is not uniform (spacing deviates by {worst:e})")));
    }
    Ok(())
}

pub fn extract(input: &Path, out: &Path) -> CliResult<ExtractOutput> {
    let traj = output::read_map_trajectory(input)?;
    check_uniform(&traj)?;
    let mut warnings = Vec::new();
    match traj.len() {
        0..=2 => {
            return Err(CliError::Validation(format!(
                "{} samples; the three-point derivative needs at least 3",
                traj.len()
            )))
        }
        3 => warnings.push("only 3 samples: one-sided differences everywhere, expect first-order accuracy".into()),
        _ => {}
    }
    let gens = tcl_generator_from_map(&traj, INVERTIBILITY_TOL).map_err(CliError::Solver)?;
    let singular_times = gens.singular_times();
    let round_trip = if singular_times.is_empty() {
        let gen = TimeLocalGenerator::interpolated(&gens).map_err(CliError::Solver)?;
        let again = propagate_local_on(&gen, traj.t0(), traj.grid(), &StepControl::default()).map_err(CliError::Solver)?;
        RoundTrip::Checked {
            sup_distance: again.sup_distance(&traj).expect("same grid"),
        }
    } else {
        RoundTrip::Skipped {
            reason: format!("{} singular points; the generator is undefined there", singular_times.len()),
        }
    };

    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectory");
    let csv_path = out.join(format!("{stem}_generator.csv"));
    let json_path = out.join(format!("{stem}_generator.json"));
    let report_path = out.join(format!("{stem}_extract_report.json"));
    output::write_atomic(&csv_path, output::generator_trajectory_csv(&gens, traj.dim()).as_bytes())?;
    output::write_json(&json_path, &gens)?;
    let report = ExtractReport {
        input: input.display().to_string(),
        points: traj.len(),
        singular_times,
        max_trace_defect: gens.max_trace_defect(),
        round_trip,
        warnings,
    };
    output::write_json(&report_path, &report)?;
    Ok(ExtractOutput {
        report,
        files: vec![csv_path, json_path, report_path],
    })
}
