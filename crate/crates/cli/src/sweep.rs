use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::SweepConfig;
use crate::error::{CliError, CliResult, EXIT_OK};
use crate::output::{self, fmt_f64};
use crate::run::{run, DiagnosticsReport};

pub struct SweepOutput {
    pub points: usize,
    pub failures: Vec<(usize, CliError)>,
    pub summary: PathBuf,
}

/// One run per grid point into `out/point_NNNN`, plus `out/summary.csv`.
/// Points run in parallel; the summary is ordered by point index.
pub fn sweep(config: &SweepConfig, out: &Path) -> CliResult<SweepOutput> {
    let points = config.points();
    let configs = points
        .iter()
        .map(|p| config.instantiate(p))
        .collect::<CliResult<Vec<_>>>()?;
    let results: Vec<CliResult<DiagnosticsReport>> = configs
        .par_iter()
        .enumerate()
        .map(|(k, c)| run(c, Some(&out.join(format!("point_{k:04}")))).map(|o| o.report))
        .collect();

    let solvers = config.base.dedup_solvers();
    let mut header: Vec<String> = vec!["point".into()];
    header.extend(config.grid.keys().cloned());
    header.push("exit_code".into());
    for s in &solvers {
        header.push(format!("{}.max_tp_drift", s.name()));
        header.push(format!("{}.min_choi_eigenvalue", s.name()));
    }
    let mut pairs = Vec::new();
    for (i, a) in solvers.iter().enumerate() {
        for b in &solvers[i + 1..] {
            header.push(format!("cross.{}.{}", a.name(), b.name()));
            pairs.push((*a, *b));
        }
    }
    header.push("error".into());

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    let mut failures = Vec::new();
    for (k, (point, result)) in points.iter().zip(results).enumerate() {
        let mut rec = vec![k.to_string()];
        rec.extend(point.iter().map(|(_, v)| v.to_string()));
        match result {
            Ok(report) => {
                rec.push(EXIT_OK.to_string());
                for s in &solvers {
                    let d = &report.solvers[s];
                    rec.push(fmt_f64(d.max_tp_drift));
                    rec.push(fmt_f64(d.min_choi_eigenvalue));
                }
                for (a, b) in &pairs {
                    let c = report
                        .cross_solver
                        .iter()
                        .find(|c| c.first == *a && c.second == *b)
                        .expect("all pairs reported");
                    rec.push(fmt_f64(c.sup_distance));
                }
                rec.push(String::new());
            }
            Err(e) => {
                rec.push(e.exit_code().to_string());
                rec.extend(std::iter::repeat_n(String::new(), 2 * solvers.len() + pairs.len()));
                rec.push(e.to_string());
                failures.push((k, e));
            }
        }
        w.write_record(&rec).expect("in-memory write");
    }
    let summary = out.join("summary.csv");
    output::write_atomic(&summary, &w.into_inner().expect("in-memory flush"))?;
    Ok(SweepOutput {
        points: points.len(),
        failures,
        summary,
    })
}
