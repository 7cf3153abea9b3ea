//! Trajectory files. CSV: header row, column `t` first, then the map entries
//! `L_{ij,kl}.re` / `L_{ij,kl}.im` for `i, j, k, l` in lexicographic order,
//! where `L_{ij,kl}` is the `(i, j)` entry of the image of `|k><l|`; observable
//! columns follow. Numbers use `{:.16e}` (17 significant digits), which
//! round-trips every finite `f64`.

use std::io::Write;
use std::path::Path;

use nonmarkov::linalg::{c64, CMatrix};
use nonmarkov::superop::{vec_index, Superoperator};
use nonmarkov::trajectory::{GeneratorTrajectory, MapTrajectory};

use crate::error::{CliError, CliResult};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn entry_columns(prefix: &str, d: usize) -> Vec<(String, usize, usize)> {
    let mut cols = Vec::with_capacity(d.pow(4));
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    cols.push((format!("{prefix}_{{{i}{j},{k}{l}}}"), vec_index(d, i, j), vec_index(d, k, l)));
                }
            }
        }
    }
    cols
}

/// Extra per-row columns appended after the map entries.
pub struct ObservableColumns {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn map_trajectory_csv(traj: &MapTrajectory, extra: Option<&ObservableColumns>) -> String {
    let d = traj.dim();
    let cols = entry_columns("L", d);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    for (name, _, _) in &cols {
        header.push(format!("{name}.re"));
        header.push(format!("{name}.im"));
    }
    if let Some(x) = extra {
        header.extend(x.names.iter().cloned());
    }
    w.write_record(&header).expect("in-memory write");
    for (n, (t, map)) in traj.grid().iter().zip(traj.maps()).enumerate() {
        let m = map.matrix();
        let mut rec = vec![fmt_f64(*t)];
        for (_, r, c) in &cols {
            rec.push(fmt_f64(m[(*r, *c)].re));
            rec.push(fmt_f64(m[(*r, *c)].im));
        }
        if let Some(x) = extra {
            rec.extend(x.rows[n].iter().map(|v| fmt_f64(*v)));
        }
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(text: &str) -> CliResult<Table> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r
        .headers()
        .map_err(CliError::validation)?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<Result<Vec<Vec<String>>, _>>()
        .map_err(CliError::validation)?;
    Ok(Table { header, rows })
}

fn parse(s: &str) -> CliResult<f64> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Validation(format!("not a number: {s:?}")))
}

/// Map dimension from the number of `<prefix>_{..}.re` columns.
fn entry_dim(header: &[String], prefix: &str) -> CliResult<usize> {
    let n = header.iter().filter(|h| h.starts_with(&format!("{prefix}_{{")) && h.ends_with(".re")).count();
    let d = (n as f64).powf(0.25).round() as usize;
    if d == 0 || d.pow(4) != n {
        return Err(CliError::Validation(format!("{n} {prefix} columns do not form a d^4 block")));
    }
    Ok(d)
}

fn column_indices(header: &[String], prefix: &str, d: usize) -> CliResult<Vec<(usize, usize, usize, usize)>> {
    entry_columns(prefix, d)
        .into_iter()
        .map(|(name, r, c)| {
            let find = |suffix: &str| {
                let full = format!("{name}.{suffix}");
                header
                    .iter()
                    .position(|h| *h == full)
                    .ok_or_else(|| CliError::Validation(format!("missing column {full}")))
            };
            Ok((find("re")?, find("im")?, r, c))
        })
        .collect()
}

fn time_column(header: &[String]) -> CliResult<usize> {
    match header.first() {
        Some(h) if h == "t" => Ok(0),
        _ => Err(CliError::Validation("first column must be t".into())),
    }
}

fn read_matrix(row: &[String], cols: &[(usize, usize, usize, usize)], n: usize) -> CliResult<CMatrix> {
    let mut m = CMatrix::zeros(n, n);
    for &(re, im, r, c) in cols {
        m[(r, c)] = c64(parse(&row[re])?, parse(&row[im])?);
    }
    Ok(m)
}

pub fn map_trajectory_from_csv(text: &str) -> CliResult<MapTrajectory> {
    let table = read_table(text)?;
    time_column(&table.header)?;
    let d = entry_dim(&table.header, "L")?;
    let cols = column_indices(&table.header, "L", d)?;
    let mut grid = Vec::with_capacity(table.rows.len());
    let mut maps = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        grid.push(parse(&row[0])?);
        let m = read_matrix(row, &cols, d * d)?;
        maps.push(Superoperator::from_matrix(d, m).map_err(CliError::validation)?);
    }
    let t0 = *grid.first().ok_or_else(|| CliError::Validation("trajectory has no rows".into()))?;
    MapTrajectory::new(t0, grid, maps).map_err(CliError::validation)
}

/// Generator rows carry a `singular` flag (0/1); singular rows hold `nan` entries.
pub fn generator_trajectory_csv(traj: &GeneratorTrajectory, dim: usize) -> String {
    let cols = entry_columns("G", dim);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string(), "singular".to_string()];
    for (name, _, _) in &cols {
        header.push(format!("{name}.re"));
        header.push(format!("{name}.im"));
    }
    w.write_record(&header).expect("in-memory write");
    for (t, g) in traj.grid().iter().zip(traj.generators()) {
        let mut rec = vec![fmt_f64(*t), if g.is_some() { "0" } else { "1" }.to_string()];
        for (_, r, c) in &cols {
            match g {
                Some(g) => {
                    rec.push(fmt_f64(g.matrix()[(*r, *c)].re));
                    rec.push(fmt_f64(g.matrix()[(*r, *c)].im));
                }
                None => rec.extend(["nan".to_string(), "nan".to_string()]),
            }
        }
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
}

pub fn generator_trajectory_from_csv(text: &str) -> CliResult<GeneratorTrajectory> {
    let table = read_table(text)?;
    time_column(&table.header)?;
    if table.header.get(1).map(String::as_str) != Some("singular") {
        return Err(CliError::Validation("second column must be singular".into()));
    }
    let d = entry_dim(&table.header, "G")?;
    let cols = column_indices(&table.header, "G", d)?;
    let mut grid = Vec::new();
    let mut gens = Vec::new();
    for row in &table.rows {
        grid.push(parse(&row[0])?);
        gens.push(match row[1].trim() {
            "1" => None,
            "0" => Some(Superoperator::from_matrix(d, read_matrix(row, &cols, d * d)?).map_err(CliError::validation)?),
            other => return Err(CliError::Validation(format!("singular flag {other:?}"))),
        });
    }
    GeneratorTrajectory::new(grid, gens).map_err(CliError::validation)
}

/// Map trajectory from a `.csv` or `.json` file.
pub fn read_map_trajectory(path: &Path) -> CliResult<MapTrajectory> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => map_trajectory_from_csv(&text),
        Some("json") => serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display()))),
        _ => Err(CliError::Validation(format!("{}: expected a .csv or .json file", path.display()))),
    }
}

/// Writes via a temporary file in the same directory and renames into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let out_err = |source| CliError::Output {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(out_err)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(out_err)?;
    tmp.write_all(contents).map_err(out_err)?;
    tmp.as_file().sync_all().map_err(out_err)?;
    tmp.persist(path).map_err(|e| out_err(e.error))?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}
