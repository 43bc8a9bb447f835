//! CSV and JSON persistence. Floats are written in shortest round-trip form
//! so outputs are byte-stable.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::stepper::Trajectory;
use crate::{Error, Result};

pub const HASH_PREFIX: &str = "# config_sha256: ";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

/// Trajectory table `t,residual,energy,u_i...`, preceded by a provenance comment.
/// `probes` restricts the state columns; `None` writes the full state.
pub fn write_trajectory_csv<W: Write>(
    traj: &Trajectory,
    config_hash: &str,
    probes: Option<&[usize]>,
    mut out: W,
) -> Result<()> {
    writeln!(out, "{HASH_PREFIX}{config_hash}").map_err(io_err)?;
    let dim = traj.space.dim;
    let cols: Vec<usize> = match probes {
        Some(p) => {
            if let Some(&bad) = p.iter().find(|&&i| i >= dim) {
                return Err(Error::invalid("probes", format!("index {bad} out of range for dimension {dim}")));
            }
            p.to_vec()
        }
        None => (0..dim).collect(),
    };
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string(), "residual".into(), "energy".into()];
    header.extend(cols.iter().map(|i| format!("u_{i}")));
    w.write_record(&header).map_err(io_err)?;
    for (n, u) in traj.u.iter().enumerate() {
        let mut row = vec![
            traj.grid.node(n).to_string(),
            traj.residual[n].to_string(),
            traj.energy[n].to_string(),
        ];
        row.extend(cols.iter().map(|&i| u[i].to_string()));
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Columns of a trajectory file written with the full state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub config_hash: Option<String>,
    pub t: Vec<f64>,
    pub residual: Vec<f64>,
    pub energy: Vec<f64>,
    pub u: Vec<Vec<f64>>,
}

pub fn read_trajectory_csv<R: Read>(input: R) -> Result<TrajectoryTable> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(io_err)?;
    let (config_hash, rest): (Option<String>, String) = match first.strip_prefix(HASH_PREFIX) {
        Some(h) => (Some(h.trim().to_string()), String::new()),
        None => (None, first),
    };
    let chained = rest.as_bytes().chain(reader);
    let mut r = csv::Reader::from_reader(chained);
    let header = r.headers().map_err(io_err)?.clone();
    if header.len() < 4 || &header[0] != "t" || &header[1] != "residual" || &header[2] != "energy" {
        return Err(Error::invalid("trajectory", "expected columns t,residual,energy,u_0,..."));
    }
    for (k, name) in header.iter().skip(3).enumerate() {
        if name != format!("u_{k}") {
            return Err(Error::invalid("trajectory", "offline verification needs the full state"));
        }
    }
    let mut table = TrajectoryTable {
        config_hash,
        t: vec![],
        residual: vec![],
        energy: vec![],
        u: vec![],
    };
    for rec in r.records() {
        let rec = rec.map_err(io_err)?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::invalid("trajectory", format!("bad number: {e}")))?;
        table.t.push(vals[0]);
        table.residual.push(vals[1]);
        table.energy.push(vals[2]);
        table.u.push(vals[3..].to_vec());
    }
    if table.u.len() < 2 {
        return Err(Error::invalid("trajectory", "needs at least two rows"));
    }
    Ok(table)
}

/// Writes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(io_err)?;
    s.push('\n');
    fs::write(path, s).map_err(io_err)
}

pub fn create_file(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| io_err(format!("{}: {e}", path.display())))
}

/// Rows `(t_n, x_i, u)` for the requested step indices.
pub fn write_snapshots_csv<W: Write>(
    traj: &Trajectory,
    x: &[f64],
    steps: &[usize],
    config_hash: &str,
    mut out: W,
) -> Result<()> {
    writeln!(out, "{HASH_PREFIX}{config_hash}").map_err(io_err)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x", "u"]).map_err(io_err)?;
    for &n in steps {
        let t = traj.grid.node(n).to_string();
        for (xi, ui) in x.iter().zip(&traj.u[n]) {
            w.write_record([t.clone(), xi.to_string(), ui.to_string()]).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}
