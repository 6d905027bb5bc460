//! CSV file formats. Every float is written with 17 significant digits so
//! that files round-trip bit for bit.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use ftl_particles::{ParticleState, PiecewiseConstantDensity, VelocityModel};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))
}

fn expect_header(rdr: &mut csv::Reader<std::fs::File>, path: &Path, want: &[&str]) -> Result<()> {
    let got: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    ensure!(
        got == want,
        "{}: expected header `{}`, found `{}`",
        path.display(),
        want.join(","),
        got.join(",")
    );
    Ok(())
}

fn parse_row(rec: &csv::StringRecord, path: &Path) -> Result<Vec<f64>> {
    let line = rec.position().map_or(0, |p| p.line());
    rec.iter()
        .map(|f| f.parse::<f64>().with_context(|| format!("{}:{line}: bad number `{f}`", path.display())))
        .collect()
}

/// `rho,v` table; `rho` must start at 0 and increase strictly.
pub fn read_velocity_table(path: &Path) -> Result<VelocityModel> {
    let mut rdr = reader(path)?;
    expect_header(&mut rdr, path, &["rho", "v"])?;
    let (mut rho, mut v) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let row = parse_row(&rec?, path)?;
        rho.push(row[0]);
        v.push(row[1]);
    }
    VelocityModel::tabulated(rho, v).with_context(|| format!("{}: invalid velocity table", path.display()))
}

/// `x_left,x_right,value` rows.
pub fn read_density_csv(path: &Path) -> Result<PiecewiseConstantDensity> {
    let mut rdr = reader(path)?;
    expect_header(&mut rdr, path, &["x_left", "x_right", "value"])?;
    let mut pieces = Vec::new();
    for rec in rdr.records() {
        let row = parse_row(&rec?, path)?;
        pieces.push((row[0], row[1], row[2]));
    }
    PiecewiseConstantDensity::from_pieces(&pieces).with_context(|| format!("{}: invalid density", path.display()))
}

pub fn write_density_csv(path: &Path, d: &PiecewiseConstantDensity) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(["x_left", "x_right", "value"])?;
    for (a, b, c) in d.cells() {
        w.write_record([fmt_f64(a), fmt_f64(b), fmt_f64(c)])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per snapshot: `t,x_0,...,x_N`.
pub fn write_trajectory_csv(path: &Path, snapshots: &[&ParticleState]) -> Result<()> {
    ensure!(!snapshots.is_empty(), "no snapshots to write");
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    let n = snapshots[0].positions().len();
    let mut header = vec!["t".to_owned()];
    header.extend((0..n).map(|i| format!("x_{i}")));
    w.write_record(&header)?;
    for s in snapshots {
        let mut row = vec![fmt_f64(s.t())];
        row.extend(s.positions().iter().map(|&x| fmt_f64(x)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Raw `(t, positions)` rows; ordering is checked by the caller.
pub fn read_trajectory_csv(path: &Path) -> Result<Vec<(f64, Vec<f64>)>> {
    let mut rdr = reader(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    ensure!(header.first().map(String::as_str) == Some("t"), "{}: first column must be `t`", path.display());
    for (i, h) in header.iter().skip(1).enumerate() {
        ensure!(*h == format!("x_{i}"), "{}: column {} should be `x_{i}`, found `{h}`", path.display(), i + 1);
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let row = parse_row(&rec?, path)?;
        rows.push((row[0], row[1..].to_vec()));
    }
    if rows.is_empty() {
        bail!("{}: trajectory has no rows", path.display());
    }
    Ok(rows)
}
