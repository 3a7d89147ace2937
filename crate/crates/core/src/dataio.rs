//! Text formats: trajectory CSV, error-grid tables.
//!
//! Trajectory files have a header `t,<state columns...>` and optionally an
//! integer `traj` column that splits the rows into several trajectories.
//! Numbers are written in the shortest decimal form that parses back to the
//! same double, so a write/read cycle is lossless.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::ErrorGrid;
use crate::timeseries::TimeSeries;

/// Relative tolerance on the spacing of the time column.
pub const GRID_TOLERANCE: f64 = 1e-9;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Reads every trajectory in the file.
pub fn read_timeseries_csv(path: impl AsRef<Path>) -> Result<Vec<TimeSeries>> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    parse_timeseries_csv(&text)
}

/// Reads a file that must hold exactly one trajectory.
pub fn read_single_timeseries(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let mut all = read_timeseries_csv(path)?;
    if all.len() != 1 {
        return Err(Error::Config(format!(
            "expected one trajectory, found {}",
            all.len()
        )));
    }
    Ok(all.remove(0))
}

pub fn parse_timeseries_csv(text: &str) -> Result<Vec<TimeSeries>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.is_empty() || header.iter().all(str::is_empty) {
        return Err(Error::EmptyFile);
    }
    let t_col = header
        .iter()
        .position(|h| h == "t")
        .ok_or_else(|| parse_err(1, "header has no `t` column"))?;
    let traj_col = header.iter().position(|h| h == "traj");
    let state_cols: Vec<usize> = (0..header.len())
        .filter(|&i| i != t_col && Some(i) != traj_col)
        .collect();
    if state_cols.is_empty() {
        return Err(parse_err(1, "header has no state columns"));
    }

    // (trajectory id, times, states)
    let mut groups: Vec<(i64, Vec<f64>, Vec<f64>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let number = |i: usize| -> Result<f64> {
            let field = &record[i];
            field
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("`{field}` in column `{}` is not a number", &header[i])))
        };
        let id = match traj_col {
            Some(c) => record[c]
                .parse::<i64>()
                .map_err(|_| parse_err(line, format!("trajectory id `{}` is not an integer", &record[c])))?,
            None => 0,
        };
        let t = number(t_col)?;
        if groups.last().is_none_or(|g| g.0 != id) {
            if groups.iter().any(|g| g.0 == id) {
                return Err(parse_err(line, format!("rows of trajectory {id} are not contiguous")));
            }
            groups.push((id, Vec::new(), Vec::new()));
        }
        let group = groups.last_mut().expect("just pushed");
        group.1.push(t);
        for &c in &state_cols {
            group.2.push(number(c)?);
        }
    }
    if groups.is_empty() {
        return Err(Error::EmptyFile);
    }
    let dim = state_cols.len();
    groups
        .into_iter()
        .map(|(_, times, states)| {
            let dt = infer_step(&times)?;
            TimeSeries::new(times[0], dt, dim, states)
        })
        .collect()
}

/// Recovers the step of a uniform time column, preferring a value that
/// reproduces every stamp exactly as `t0 + n * dt`.
fn infer_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::TooShort {
            rows: times.len(),
            cols: 0,
        });
    }
    let t0 = times[0];
    let last = times.len() - 1;
    let raw = [(times[last] - t0) / last as f64, times[1] - t0];
    // Writers stamp rows as `t0 + n * dt`, so the true step is usually a short
    // decimal or within a few ulps of the measured spacing; the shortest
    // decimal that fits wins.
    let reproduces = |dt: f64| times.iter().enumerate().all(|(n, &t)| t0 + n as f64 * dt == t);
    for &r in &raw {
        if !(r > 0.0 && r.is_finite()) {
            continue;
        }
        let rounded = (0..17).filter_map(|digits| format!("{r:.digits$e}").parse::<f64>().ok());
        for base in rounded.chain(std::iter::once(r)) {
            let mut below = base;
            let mut above = base;
            if reproduces(base) {
                return Ok(base);
            }
            for _ in 0..4 {
                below = f64::from_bits(below.to_bits() - 1);
                above = f64::from_bits(above.to_bits() + 1);
                for dt in [below, above] {
                    if reproduces(dt) {
                        return Ok(dt);
                    }
                }
            }
        }
    }
    let dt = raw[0];
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::BadStep(dt));
    }
    for (n, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > GRID_TOLERANCE * dt {
            return Err(Error::NonUniformGrid { row: n + 1 });
        }
    }
    for (n, &t) in times.iter().enumerate() {
        if (t - (t0 + n as f64 * dt)).abs() > GRID_TOLERANCE * dt.max(t.abs()) {
            return Err(Error::NonUniformGrid { row: n });
        }
    }
    Ok(dt)
}

fn header(dim: usize, with_traj: bool) -> String {
    let mut cols: Vec<String> = Vec::with_capacity(dim + 2);
    if with_traj {
        cols.push("traj".into());
    }
    cols.push("t".into());
    cols.extend((1..=dim).map(|i| format!("x{i}")));
    cols.join(",")
}

fn write_rows(w: &mut impl Write, ts: &TimeSeries, traj: Option<usize>) -> std::io::Result<()> {
    for (n, row) in ts.rows().enumerate() {
        if let Some(id) = traj {
            write!(w, "{id},")?;
        }
        write!(w, "{}", ts.time(n))?;
        for v in row {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_timeseries_csv(ts: &TimeSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{}", header(ts.dim(), false))
        .and_then(|_| write_rows(&mut w, ts, None))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Writes a bundle with a leading `traj` column.
pub fn write_trajectories_csv(bundle: &[TimeSeries], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let first = bundle.first().ok_or(Error::EmptyInput)?;
    if bundle.iter().any(|ts| ts.dim() != first.dim()) {
        return Err(Error::MixedDims {
            what: "state dimension",
            first: first.dim() as f64,
            other: bundle.iter().find(|ts| ts.dim() != first.dim()).unwrap().dim() as f64,
        });
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let result: std::io::Result<()> = (|| {
        writeln!(w, "{}", header(first.dim(), true))?;
        for (id, ts) in bundle.iter().enumerate() {
            write_rows(&mut w, ts, Some(id))?;
        }
        w.flush()
    })();
    result.map_err(|e| Error::io(path, e))
}

/// Two significant digits with a signed two-digit exponent, e.g. `8.8e-03`.
pub fn format_sci(v: f64) -> String {
    let s = format!("{v:.1e}");
    match s.split_once('e') {
        Some((mantissa, exp)) => {
            let exp: i32 = exp.parse().expect("float exponent");
            let sign = if exp < 0 { '-' } else { '+' };
            format!("{mantissa}e{sign}{:02}", exp.abs())
        }
        None => s,
    }
}

pub const FAILED_MARKER: &str = "failed";

/// Renders a grid as `row_label\col_label,<col keys>` followed by one line per row.
pub fn render_error_grid(grid: &ErrorGrid) -> Result<String> {
    grid.check()?;
    let mut out = format!("{}\\{}", grid.row_label, grid.col_label);
    for key in &grid.col_keys {
        out.push(',');
        out.push_str(key);
    }
    out.push('\n');
    for (r, key) in grid.row_keys.iter().enumerate() {
        out.push_str(key);
        for c in 0..grid.col_keys.len() {
            out.push(',');
            match grid.get(r, c) {
                Some(v) => out.push_str(&format_sci(v)),
                None => out.push_str(FAILED_MARKER),
            }
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_error_grid(grid: &ErrorGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = render_error_grid(grid)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reads_three_row_file() {
        let ts = parse_timeseries_csv("t,x1,x2,x3\n0,1,2,3\n0.02,4,5,6\n0.04,7,8,9\n").unwrap();
        assert_eq!(ts.len(), 1);
        let ts = &ts[0];
        assert_eq!((ts.len(), ts.dim()), (3, 3));
        assert_eq!(ts.dt(), 0.02);
        assert_eq!(ts.row(2), &[7.0, 8.0, 9.0]);
    }

    #[test]
    fn rejects_non_uniform_grid() {
        let err = parse_timeseries_csv("t,x1\n0,1\n0.01,2\n0.03,3\n").unwrap_err();
        assert!(matches!(err, Error::NonUniformGrid { .. }), "{err:?}");
    }

    #[test]
    fn header_only_is_empty() {
        assert!(matches!(parse_timeseries_csv("t,x1,x2\n").unwrap_err(), Error::EmptyFile));
        assert!(matches!(parse_timeseries_csv("").unwrap_err(), Error::EmptyFile));
    }

    #[test]
    fn malformed_rows_are_rejected() {
        assert!(matches!(
            parse_timeseries_csv("t,x1\n0,1\n0.1,abc\n").unwrap_err(),
            Error::Parse { line: 3, .. }
        ));
        assert!(matches!(
            parse_timeseries_csv("t,x1\n0,1\n0.1,2,3\n").unwrap_err(),
            Error::Parse { .. }
        ));
        assert!(matches!(
            parse_timeseries_csv("time,x1\n0,1\n0.1,2\n").unwrap_err(),
            Error::Parse { line: 1, .. }
        ));
        assert!(matches!(
            parse_timeseries_csv("t,x1\n0,1\n0.1,nan\n").unwrap_err(),
            Error::NonFinite { .. }
        ));
    }

    #[test]
    fn traj_column_splits_bundle() {
        let text = "traj,t,x1\n0,0,1\n0,0.5,2\n0,1,3\n1,0,4\n1,0.5,5\n";
        let all = parse_timeseries_csv(text).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].states(), &[1.0, 2.0, 3.0]);
        assert_eq!(all[1].states(), &[4.0, 5.0]);
        assert_eq!(all[1].dt(), 0.5);
        let split = "traj,t,x1\n0,0,1\n0,0.5,2\n1,0,4\n1,0.5,5\n0,1,3\n";
        assert!(parse_timeseries_csv(split).is_err());
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let ts = TimeSeries::new(
            0.3,
            0.01,
            2,
            vec![1.0 / 3.0, -2e-300, f64::MAX, 5e-324, std::f64::consts::PI, -0.0],
        )
        .unwrap();
        write_timeseries_csv(&ts, &path).unwrap();
        let back = read_single_timeseries(&path).unwrap();
        assert_eq!(back.t0(), ts.t0());
        assert_eq!(back.dt(), ts.dt());
        for (a, b) in ts.states().iter().zip(back.states()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }

        let bundle = vec![ts.clone(), ts.subsample(2).unwrap_or(ts.clone())];
        let path = dir.path().join("b.csv");
        write_trajectories_csv(&bundle, &path).unwrap();
        assert_eq!(read_timeseries_csv(&path).unwrap(), bundle);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_timeseries_csv("/nonexistent/file.csv").unwrap_err(),
            Error::Io { .. }
        ));
    }

    #[test]
    fn scientific_formatting() {
        assert_eq!(format_sci(0.0088), "8.8e-03");
        assert_eq!(format_sci(1.5), "1.5e+00");
        assert_eq!(format_sci(0.00996), "1.0e-02");
        assert_eq!(format_sci(123.0), "1.2e+02");
        assert_eq!(format_sci(0.0), "0.0e+00");
    }

    fn series() -> impl Strategy<Value = TimeSeries> {
        (1usize..4, 2usize..30, -10.0f64..10.0, 1e-4f64..1.0).prop_flat_map(|(dim, len, t0, dt)| {
            prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), dim * len)
                .prop_map(move |s| TimeSeries::new(t0, dt, dim, s).unwrap())
        })
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(ts in series()) {
            let mut buf = Vec::new();
            writeln!(buf, "{}", header(ts.dim(), false)).unwrap();
            write_rows(&mut buf, &ts, None).unwrap();
            let back = parse_timeseries_csv(std::str::from_utf8(&buf).unwrap()).unwrap().remove(0);
            prop_assert_eq!(back.len(), ts.len());
            for (a, b) in ts.states().iter().zip(back.states()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            prop_assert_eq!(back.t0().to_bits(), ts.t0().to_bits());
            prop_assert!((back.dt() - ts.dt()).abs() <= 1e-12 * ts.dt());
        }
    }
}
