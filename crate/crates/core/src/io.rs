//! CSV and JSON files: sampled functions, conjugates, envelopes. Every
//! writer goes through a temporary file and a rename.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::legendre::{Conjugate, Grid, SampledFunction};
use crate::polarity::Envelope;

/// Replaces `path` with `bytes` via a sibling temporary file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_json_string(value)?.as_bytes())
}

fn fmt_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v}")
    }
}

fn parse_field(field: &str, row: usize, column: &str) -> Result<f64> {
    let t = field.trim();
    match t.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => return Ok(f64::INFINITY),
        _ => {}
    }
    t.parse::<f64>()
        .map_err(|_| Error::InvalidInput(format!("row {row}, column {column}: cannot parse {t:?}")))
}

fn indexed_columns(headers: &[String], prefix: &str) -> Result<Vec<usize>> {
    let mut cols = Vec::new();
    for k in 1.. {
        match headers.iter().position(|h| *h == format!("{prefix}_{k}")) {
            Some(c) => cols.push(c),
            None => break,
        }
    }
    if headers
        .iter()
        .filter(|h| h.starts_with(&format!("{prefix}_")))
        .count()
        != cols.len()
    {
        return Err(Error::InvalidInput(format!(
            "{prefix}_* columns must be numbered 1..n without gaps"
        )));
    }
    Ok(cols)
}

/// Rectangular row-major grid when the points form one, scattered otherwise.
fn grid_from_points(dim: usize, points: Vec<Vec<f64>>) -> Result<Grid> {
    if dim == 1 {
        return Grid::line(points.into_iter().map(|p| p[0]).collect());
    }
    let axes: Vec<Vec<f64>> = (0..dim)
        .map(|k| {
            let mut axis: Vec<f64> = points.iter().map(|p| p[k]).collect();
            axis.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            axis.dedup();
            axis
        })
        .collect();
    if axes.iter().map(Vec::len).product::<usize>() == points.len() {
        if let Ok(grid) = Grid::from_axes(axes) {
            if grid.points().zip(&points).all(|(a, b)| a == b.as_slice()) {
                return Ok(grid);
            }
        }
    }
    Grid::scattered(dim, points)
}

/// Reads `prefix_1..prefix_n, value[, grad_1..grad_n][, infinite]`.
pub fn read_sampled_csv<R: Read>(reader: R, prefix: &str) -> Result<SampledFunction> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let theta_cols = indexed_columns(&headers, prefix)?;
    let n = theta_cols.len();
    if n == 0 {
        return Err(Error::InvalidInput(format!("no {prefix}_1 column")));
    }
    let value_col = headers
        .iter()
        .position(|h| h == "value")
        .ok_or_else(|| Error::InvalidInput("no value column".into()))?;
    let grad_cols = indexed_columns(&headers, "grad")?;
    if !grad_cols.is_empty() && grad_cols.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: grad_cols.len(),
        });
    }
    let inf_col = headers.iter().position(|h| h == "infinite");

    let mut points = Vec::new();
    let mut values = Vec::new();
    let mut grads = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let row = row + 1;
        let get = |c: usize| {
            record.get(c).ok_or_else(|| {
                Error::InvalidInput(format!("row {row}: missing column {}", headers[c]))
            })
        };
        let theta = theta_cols
            .iter()
            .map(|&c| parse_field(get(c)?, row, &headers[c]))
            .collect::<Result<Vec<f64>>>()?;
        let infinite = match inf_col {
            Some(c) => match get(c)? {
                "0" | "" => false,
                "1" => true,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "row {row}: infinite must be 0 or 1, got {other:?}"
                    )))
                }
            },
            None => false,
        };
        let value = if infinite {
            f64::INFINITY
        } else {
            parse_field(get(value_col)?, row, "value")?
        };
        for &c in &grad_cols {
            let field = get(c)?;
            grads.push(if infinite && field.is_empty() {
                0.0
            } else {
                parse_field(field, row, &headers[c])?
            });
        }
        points.push(theta);
        values.push(value);
    }
    if points.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    let f = SampledFunction::new(grid_from_points(n, points)?, values)?;
    if grad_cols.is_empty() {
        Ok(f)
    } else {
        f.with_gradients(grads)
    }
}

pub fn read_sampled_function(path: &Path) -> Result<SampledFunction> {
    read_sampled_csv(fs::File::open(path)?, "theta")
}

/// CSV text with columns `prefix_1..prefix_n, value[, grad_*], infinite`.
pub fn sampled_csv(f: &SampledFunction, prefix: &str) -> Result<String> {
    let n = f.dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=n).map(|k| format!("{prefix}_{k}")).collect();
    header.push("value".into());
    if f.has_gradients() {
        header.extend((1..=n).map(|k| format!("grad_{k}")));
    }
    header.push("infinite".into());
    w.write_record(&header)?;
    for i in 0..f.len() {
        let mut row: Vec<String> = f.theta(i).iter().map(|x| format!("{x}")).collect();
        row.push(fmt_value(f.value(i)));
        if let Some(g) = f.gradient(i) {
            row.extend(g.iter().map(|x| format!("{x}")));
        }
        row.push(if f.is_infinite(i) { "1" } else { "0" }.into());
        w.write_record(&row)?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
}

pub fn write_sampled_function(path: &Path, f: &SampledFunction) -> Result<()> {
    write_atomic(path, sampled_csv(f, "theta")?.as_bytes())
}

pub fn conjugate_csv(c: &Conjugate) -> Result<String> {
    sampled_csv(&c.dual, "eta")
}

pub fn read_conjugate_csv<R: Read>(reader: R) -> Result<SampledFunction> {
    read_sampled_csv(reader, "eta")
}

/// One row per envelope point: `index, x_1..x_{n+1}, ideal, degenerate`.
/// Finite points are dehomogenized; ideal ones give the unit direction.
pub fn envelope_csv(env: &Envelope, n: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["index".to_string()];
    header.extend((1..=n + 1).map(|k| format!("x_{k}")));
    header.push("ideal".into());
    header.push("degenerate".into());
    w.write_record(&header)?;
    for p in &env.points {
        let coords: Vec<f64> = match p.dehomogenize() {
            Some(x) => x,
            None => p.point().coords()[..n + 1].to_vec(),
        };
        let mut row = vec![p.index.to_string()];
        row.extend(coords.iter().map(|x| format!("{x}")));
        row.push(u8::from(p.ideal).to_string());
        row.push(u8::from(p.degenerate).to_string());
        w.write_record(&row)?;
    }
    finish(w)
}

/// Long-format table `theta_*, eta_*, gap` of
/// `F(theta_i) + F*(eta_j) - <theta_i, eta_j>` over finite pairs.
pub fn fenchel_young_gap_csv(primal: &SampledFunction, dual: &SampledFunction) -> Result<String> {
    let n = primal.dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=n).map(|k| format!("theta_{k}")).collect();
    header.extend((1..=n).map(|k| format!("eta_{k}")));
    header.push("gap".into());
    w.write_record(&header)?;
    for i in 0..primal.len() {
        if primal.is_infinite(i) {
            continue;
        }
        for j in 0..dual.len() {
            if dual.is_infinite(j) {
                continue;
            }
            let gap = crate::divergences::fenchel_young(
                primal.value(i),
                dual.value(j),
                primal.theta(i),
                dual.theta(j),
            );
            let mut row: Vec<String> = primal.theta(i).iter().map(|x| format!("{x}")).collect();
            row.extend(dual.theta(j).iter().map(|x| format!("{x}")));
            row.push(format!("{gap}"));
            w.write_record(&row)?;
        }
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::legendre::conjugate_bruteforce;
    use crate::polarity::{polar_boundary_envelope, ConvexBody, CostMatrix};

    #[test]
    fn round_trip_1d_with_mask_and_gradients() {
        let f =
            SampledFunction::from_1d(vec![-1.0, 0.0, 0.5], vec![f64::INFINITY, 0.25, 1.0 / 3.0])
                .unwrap()
                .with_gradients(vec![0.0, 1.0, -2.5])
                .unwrap();
        let text = sampled_csv(&f, "theta").unwrap();
        assert!(text.starts_with("theta_1,value,grad_1,infinite\n-1,inf,0,1\n"));
        let back = read_sampled_csv(text.as_bytes(), "theta").unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn rectangular_grids_are_recognized() {
        let text = "theta_1,theta_2,value\n0,0,0\n0,1,1\n1,0,1\n1,1,2\n";
        let f = read_sampled_csv(text.as_bytes(), "theta").unwrap();
        assert_eq!(f.grid().shape(), Some(vec![2, 2]));
        let shuffled = "theta_1,theta_2,value\n0,1,1\n0,0,0\n1,0,1\n";
        let g = read_sampled_csv(shuffled.as_bytes(), "theta").unwrap();
        assert_eq!(g.grid().shape(), None);
        assert_eq!(g.theta(0), &[0.0, 1.0]);
    }

    #[test]
    fn infinite_flag_overrides_value() {
        let text = "theta_1, value, infinite\n0, 1, 0\n1, 7, 1\n2, 4, 0\n";
        let f = read_sampled_csv(text.as_bytes(), "theta").unwrap();
        assert!(f.is_infinite(1));
        assert_eq!(f.value(2), 4.0);
    }

    #[test]
    fn malformed_files() {
        for bad in [
            "",
            "theta_1,value\n",
            "value\n1\n",
            "theta_1\n1\n",
            "theta_1,value\nx,1\n",
            "theta_1,value\n1,2\n0,3\n",
            "theta_1,theta_3,value\n1,2,3\n",
            "theta_1,value,grad_1,grad_2\n0,0,0,0\n",
            "theta_1,value,infinite\n0,1,2\n",
            "theta_1,value\n0,nan\n",
        ] {
            let err = read_sampled_csv(bad.as_bytes(), "theta").unwrap_err();
            assert!(err.is_input_error(), "{bad:?}: {err}");
        }
    }

    #[test]
    fn conjugate_and_gap_tables() {
        let f = SampledFunction::from_1d(vec![-1.0, 0.0, 1.0], vec![0.5, 0.0, 0.5]).unwrap();
        let c = conjugate_bruteforce(&f, &Grid::line(vec![0.0, 1.0]).unwrap()).unwrap();
        let text = conjugate_csv(&c).unwrap();
        assert_eq!(text, "eta_1,value,infinite\n0,0,0\n1,0.5,0\n");
        assert_eq!(read_conjugate_csv(text.as_bytes()).unwrap(), c.dual);
        let gaps = fenchel_young_gap_csv(&f, &c.dual).unwrap();
        assert_eq!(gaps.lines().count(), 7);
        assert!(gaps.lines().nth(6).unwrap() == "1,1,0");
    }

    #[test]
    fn envelope_table() {
        let body = ConvexBody::unit_disk(4);
        let env = polar_boundary_envelope(&CostMatrix::identity(1), &body).unwrap();
        let text = envelope_csv(&env, 1).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("index,x_1,x_2,ideal,degenerate"));
        assert_eq!(lines.count(), 4);
    }

    #[test]
    fn atomic_writes_replace_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_json(&path, &vec![1, 2]).unwrap();
        write_json(&path, &vec![3]).unwrap();
        let back: Vec<i32> = read_json(&path).unwrap();
        assert_eq!(back, vec![3]);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
