//! Plain-text file formats for fields, trajectories, tracks and solutions.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::fft;
use crate::lattice::GridField;
use crate::modulation::ModulationTrack;
use crate::solver::{GevreyFit, SolitonSolution};
use crate::spectral::SpectralField;

/// Shortest round-trip decimal for `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Compact decimal used in headers and file names.
pub fn dec(x: f64) -> String {
    format!("{x}")
}

pub fn grid_field_csv(f: &GridField) -> String {
    let mut s = format!("# h={} n={}\nindex,re,im\n", dec(f.h()), f.n_points());
    for (j, v) in f.values().iter().enumerate() {
        let _ = writeln!(s, "{j},{},{}", num(v.re), num(v.im));
    }
    s
}

pub fn spectral_field_csv(u: &SpectralField) -> String {
    let n = u.n_points();
    let mut s = format!("# h={} n={} convention=forward-h\nk,re,im\n", dec(u.h()), n);
    // ascending k
    for i in (n / 2..n).chain(0..n / 2) {
        let c = u.coeffs()[i];
        let _ = writeln!(s, "{},{},{}", fft::mode(i, n), num(c.re), num(c.im));
    }
    s
}

fn parse_header(line: &str) -> Result<(f64, usize, Option<String>)> {
    let body = line.strip_prefix('#').ok_or_else(|| Error::Parse(format!("missing header: `{line}`")))?;
    let (mut h, mut n, mut conv) = (None, None, None);
    for tok in body.split_whitespace() {
        match tok.split_once('=') {
            Some(("h", v)) => h = Some(v.parse::<f64>().map_err(|e| Error::Parse(format!("h: {e}")))?),
            Some(("n", v)) => n = Some(v.parse::<usize>().map_err(|e| Error::Parse(format!("n: {e}")))?),
            Some(("convention", v)) => conv = Some(v.to_string()),
            _ => return Err(Error::Parse(format!("unexpected header token `{tok}`"))),
        }
    }
    Ok((h.ok_or_else(|| Error::Parse("header lacks h".into()))?, n.ok_or_else(|| Error::Parse("header lacks n".into()))?, conv))
}

fn parse_rows(lines: std::str::Lines<'_>, n: usize) -> Result<Vec<(i64, Complex64)>> {
    let mut rows = Vec::with_capacity(n);
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("bad row `{line}`")));
        }
        let idx = parts[0].trim().parse::<i64>().map_err(|e| Error::Parse(format!("index `{}`: {e}", parts[0])))?;
        let re = parts[1].trim().parse::<f64>().map_err(|e| Error::Parse(format!("`{}`: {e}", parts[1])))?;
        let im = parts[2].trim().parse::<f64>().map_err(|e| Error::Parse(format!("`{}`: {e}", parts[2])))?;
        rows.push((idx, Complex64::new(re, im)));
    }
    if rows.len() != n {
        return Err(Error::SizeMismatch { expected: n, actual: rows.len() });
    }
    Ok(rows)
}

pub fn parse_grid_field(text: &str) -> Result<GridField> {
    let mut lines = text.lines();
    let (h, n, _) = parse_header(lines.next().unwrap_or_default())?;
    if lines.next().map(str::trim) != Some("index,re,im") {
        return Err(Error::Parse("expected column header `index,re,im`".into()));
    }
    let rows = parse_rows(lines, n)?;
    let mut values = vec![Complex64::default(); n];
    for (j, v) in rows {
        let slot = usize::try_from(j).ok().filter(|&j| j < n).ok_or_else(|| Error::Parse(format!("index {j} out of range")))?;
        values[slot] = v;
    }
    GridField::new(h, values)
}

pub fn parse_spectral_field(text: &str) -> Result<SpectralField> {
    let mut lines = text.lines();
    let (h, n, conv) = parse_header(lines.next().unwrap_or_default())?;
    if conv.as_deref() != Some("forward-h") {
        return Err(Error::Parse(format!("unsupported convention {conv:?}")));
    }
    if lines.next().map(str::trim) != Some("k,re,im") {
        return Err(Error::Parse("expected column header `k,re,im`".into()));
    }
    let rows = parse_rows(lines, n)?;
    let mut coeffs = vec![Complex64::default(); n];
    let half = n as i64 / 2;
    for (k, c) in rows {
        if k < -half || k >= half {
            return Err(Error::Parse(format!("mode {k} outside the band")));
        }
        coeffs[fft::slot(k, n)] = c;
    }
    SpectralField::new(h, coeffs)
}

pub fn write_grid_field(path: &Path, f: &GridField) -> Result<()> {
    fs::write(path, grid_field_csv(f))?;
    Ok(())
}

pub fn read_grid_field(path: &Path) -> Result<GridField> {
    parse_grid_field(&fs::read_to_string(path)?)
}

pub fn write_spectral_field(path: &Path, u: &SpectralField) -> Result<()> {
    fs::write(path, spectral_field_csv(u))?;
    Ok(())
}

pub fn read_spectral_field(path: &Path) -> Result<SpectralField> {
    parse_spectral_field(&fs::read_to_string(path)?)
}

/// One row per save: `t,mass,H_grid,H_dealiased,momentum,E1_re,E3_re,E3_im,Hn_1,…`.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let orders: Vec<u32> = traj.reports.first().map(|r| r.sobolev.iter().map(|(n, _)| *n).collect()).unwrap_or_default();
    let mut s = String::from("t,mass,H_grid,H_dealiased,momentum,E1_re,E3_re,E3_im");
    for n in &orders {
        let _ = write!(s, ",Hn_{n}");
    }
    s.push('\n');
    for (t, r) in traj.times.iter().zip(&traj.reports) {
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{}",
            num(*t),
            num(r.mass),
            num(r.hamiltonian_grid),
            num(r.hamiltonian_dealiased),
            num(r.momentum),
            num(r.e1),
            num(r.e3.re),
            num(r.e3.im)
        );
        for (_, v) in &r.sobolev {
            let _ = write!(s, ",{}", num(*v));
        }
        s.push('\n');
    }
    s
}

/// Write the trajectory CSV and, if asked, one GridField file per save under `snapshots/`.
pub fn write_trajectory(dir: &Path, traj: &Trajectory, snapshots: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("trajectory.csv"), trajectory_csv(traj))?;
    if snapshots {
        let snap = dir.join("snapshots");
        fs::create_dir_all(&snap)?;
        for (t, f) in traj.times.iter().zip(&traj.frames) {
            write_grid_field(&snap.join(format!("t={}.csv", dec(*t))), f)?;
        }
    }
    Ok(())
}

pub fn track_csv(track: &ModulationTrack) -> String {
    let mut s = String::from("t,gamma,x0,gamma_dot,x0_dot,delta\n");
    for i in 0..track.times.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            num(track.times[i]),
            num(track.states[i].gamma),
            num(track.states[i].x0),
            num(track.rates[i].0),
            num(track.rates[i].1),
            num(track.delta[i])
        );
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GevreyJson {
    #[serde(rename = "C")]
    pub c: f64,
    pub eps: f64,
    pub r2: f64,
}

/// Scalar summary stored next to a solution's spectral CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionManifest {
    pub xi1: f64,
    pub xi2: f64,
    pub h: f64,
    pub n: usize,
    pub residual: f64,
    pub alpha: Option<f64>,
    pub gevrey: GevreyJson,
}

impl SolutionManifest {
    pub fn from_solution(sol: &SolitonSolution) -> Self {
        let GevreyFit { c, eps, r2, .. } = sol.gevrey;
        Self {
            xi1: sol.params.xi1(),
            xi2: sol.params.xi2(),
            h: sol.field.h(),
            n: sol.field.n_points(),
            residual: sol.residual_norm,
            alpha: sol.coercivity_alpha,
            gevrey: GevreyJson { c, eps, r2 },
        }
    }
}

/// Write `<stem>.json` and `<stem>.csv` into `dir`.
pub fn write_solution(dir: &Path, stem: &str, sol: &SolitonSolution) -> Result<()> {
    fs::create_dir_all(dir)?;
    let manifest = SolutionManifest::from_solution(sol);
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&manifest)?)?;
    write_spectral_field(&dir.join(format!("{stem}.csv")), &sol.field)
}
