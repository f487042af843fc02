//! Plain-text file formats: trajectory CSV, matrix arguments, number formatting.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::types::Trajectory;

/// Format with 9 significant digits, dropping trailing zeros.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { format!("{x}") };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        trim_zeros(&s).to_string()
    } else {
        let s = format!("{x:.8e}");
        let (mant, e) = s.split_once('e').expect("exponent");
        format!("{}e{e}", trim_zeros(mant))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `x` rounded to the precision that [`fmt_num`] prints.
pub fn round_num(x: f64) -> f64 {
    fmt_num(x).parse().unwrap_or(x)
}

/// Header `t,x1,...,xn`, then one row per sample with `t = k·dt`.
pub fn trajectory_to_csv(t: &Trajectory<f64>) -> String {
    let n = t.dim();
    let mut out = String::from("t");
    for i in 1..=n {
        out.push_str(&format!(",x{i}"));
    }
    out.push('\n');
    for (k, x) in t.observations().iter().enumerate() {
        out.push_str(&fmt_num(k as f64 * t.dt()));
        for v in x.iter() {
            out.push(',');
            out.push_str(&fmt_num(*v));
        }
        out.push('\n');
    }
    out
}

pub fn write_trajectory(path: &Path, t: &Trajectory<f64>) -> Result<()> {
    fs::write(path, trajectory_to_csv(t))?;
    Ok(())
}

/// Parse a trajectory CSV. The sampling interval comes from the `t` column
/// and must be constant.
pub fn parse_trajectory(text: &str, name: &str) -> Result<Trajectory<f64>> {
    let err = |line: usize, message: String| Error::Parse {
        path: name.to_string(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 2
        || cols[0] != "t"
        || cols[1..]
            .iter()
            .enumerate()
            .any(|(i, c)| *c != format!("x{}", i + 1))
    {
        return Err(err(
            1,
            format!("expected header t,x1,...,xn, found '{header}'"),
        ));
    }
    let n_x = cols.len() - 1;
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (idx, line) in lines {
        let vals = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| err(idx + 1, format!("bad number: {e}")))?;
        if vals.len() != n_x + 1 {
            return Err(err(
                idx + 1,
                format!("expected {} columns, found {}", n_x + 1, vals.len()),
            ));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(err(idx + 1, "non-finite value".into()));
        }
        times.push(vals[0]);
        states.push(DVector::from_column_slice(&vals[1..]));
    }
    if states.len() < 2 {
        return Err(err(
            1,
            format!("need at least 2 rows, found {}", states.len()),
        ));
    }
    let dt = times[1] - times[0];
    for (k, w) in times.windows(2).enumerate() {
        let step = w[1] - w[0];
        if !((step - dt).abs() <= 1e-6 * dt.abs().max(1e-12)) {
            return Err(err(
                k + 3,
                format!("sampling interval {step} differs from {dt}"),
            ));
        }
    }
    // t is printed with 9 digits; recover dt from the whole span
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    Trajectory::new(states, round_num(dt)).map_err(|e| err(1, e.to_string()))
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    parse_trajectory(&text, &path.display().to_string())
}

/// A covariance given either as a scalar `s` (meaning `s·I`) or as a path to
/// a CSV file with one matrix row per line.
pub fn parse_covariance(arg: &str, n_x: usize) -> Result<DMatrix<f64>> {
    if let Ok(s) = arg.trim().parse::<f64>() {
        return Ok(DMatrix::identity(n_x, n_x) * s);
    }
    let path = Path::new(arg);
    let text = fs::read_to_string(path).map_err(|e| {
        Error::Usage(format!(
            "'{arg}' is neither a number nor a readable matrix file: {e}"
        ))
    })?;
    let mut rows = Vec::new();
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let r = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                path: arg.to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
        rows.push(r);
    }
    if rows.len() != n_x || rows.iter().any(|r| r.len() != n_x) {
        return Err(Error::Usage(format!(
            "matrix file {arg} must be {n_x}x{n_x}"
        )));
    }
    Ok(DMatrix::from_fn(n_x, n_x, |i, j| rows[i][j]))
}
