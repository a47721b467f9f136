//! File formats: metric CSV, JSON reports, binary snapshots.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::Serialize;

use sdwave_core::diagnostics::{energy, lyapunov};
use sdwave_core::dynamics::TrajectoryRecord;
use sdwave_core::spectral::{BasisSpec, SpectralField};
use sdwave_core::{ModelSpec, State};

pub const CSV_HEADER: [&str; 8] = ["time", "E", "L", "diss_grad", "diss_sigma", "residual", "H1_norm", "H2xH1_norm"];

/// One CSV row; `None` becomes an empty cell.
pub type Row = [Option<f64>; 8];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn render_csv(rows: &[Row]) -> String {
    let mut out = CSV_HEADER.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|c| c.map(format_value).unwrap_or_default()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<Row>, String> {
    let mut lines = text.split('\n');
    if lines.next() != Some(CSV_HEADER.join(",").as_str()) {
        return Err("unexpected header".into());
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != CSV_HEADER.len() {
                return Err(format!("expected {} cells in {line:?}", CSV_HEADER.len()));
            }
            let mut row: Row = [None; 8];
            for (slot, cell) in row.iter_mut().zip(cells) {
                if !cell.is_empty() {
                    *slot = Some(cell.parse::<f64>().map_err(|e| format!("{cell:?}: {e}"))?);
                }
            }
            Ok(row)
        })
        .collect()
}

/// Metric rows for a trajectory. The residual column is `|L(t) + D(t) − L(0)|`.
pub fn trajectory_rows(model: &ModelSpec, rec: &TrajectoryRecord) -> Vec<Row> {
    let lyap: Vec<Option<f64>> = rec.states.iter().map(|s| lyapunov(model, s).ok()).collect();
    let l0 = lyap[0];
    rec.times
        .iter()
        .zip(&rec.states)
        .enumerate()
        .map(|(i, (t, s))| {
            let dissipated = rec.diss_grad[i] + rec.diss_sigma[i];
            let residual = match (lyap[i], l0) {
                (Some(l), Some(l0)) => Some((l + dissipated - l0).abs()),
                _ => None,
            };
            [
                Some(*t),
                Some(energy(s)),
                lyap[i],
                Some(rec.diss_grad[i]),
                Some(rec.diss_sigma[i]),
                residual,
                Some(s.h_norm()),
                Some(s.h1_norm()),
            ]
        })
        .collect()
}

pub fn write_text(path: &Path, text: &str) -> io::Result<()> {
    fs::write(path, text.as_bytes())
}

pub fn to_json<T: Serialize>(value: &T) -> io::Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    s.push('\n');
    Ok(s)
}

/// Write through a temporary sibling and rename, so the file appears complete or not at all.
pub fn write_atomic(path: &Path, text: &str) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"SDWAVE01";

/// Header (magic, d, N, count as little-endian u64) followed, per snapshot,
/// by the time, the position coefficients and the velocity coefficients.
pub fn encode_snapshots(basis: &BasisSpec, times: &[f64], states: &[State]) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + states.len() * (1 + 2 * basis.len()) * 8);
    out.extend_from_slice(SNAPSHOT_MAGIC);
    for x in [basis.dimension(), basis.modes(), states.len()] {
        out.extend_from_slice(&(x as u64).to_le_bytes());
    }
    for (t, s) in times.iter().zip(states) {
        out.extend_from_slice(&t.to_le_bytes());
        for c in s.w.coeffs().iter().chain(s.v.coeffs()) {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshots {
    pub dimension: usize,
    pub modes: usize,
    pub times: Vec<f64>,
    pub states: Vec<State>,
}

pub fn decode_snapshots(bytes: &[u8], oversampling: f64) -> Result<Snapshots, String> {
    if bytes.len() < 32 || &bytes[..8] != SNAPSHOT_MAGIC {
        return Err("not a snapshot file".into());
    }
    let word = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes")) as usize;
    let (d, n, count) = (word(8), word(16), word(24));
    let basis = BasisSpec::with_oversampling(d, n, oversampling).map_err(|e| e.to_string())?;
    let len = basis.len();
    let record = 8 * (1 + 2 * len);
    if bytes.len() != 32 + count * record {
        return Err(format!("expected {} bytes, found {}", 32 + count * record, bytes.len()));
    }
    let float = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
    let mut times = Vec::with_capacity(count);
    let mut states = Vec::with_capacity(count);
    for j in 0..count {
        let base = 32 + j * record;
        times.push(float(base));
        let w = (0..len).map(|i| float(base + 8 * (1 + i))).collect();
        let v = (0..len).map(|i| float(base + 8 * (1 + len + i))).collect();
        let w = SpectralField::from_coeffs(basis, w).map_err(|e| e.to_string())?;
        let v = SpectralField::from_coeffs(basis, v).map_err(|e| e.to_string())?;
        states.push(State::new(w, v).map_err(|e| e.to_string())?);
    }
    Ok(Snapshots { dimension: d, modes: n, times, states })
}

pub fn read_snapshots(path: &Path, oversampling: f64) -> Result<Snapshots, String> {
    let mut bytes = Vec::new();
    fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| e.to_string())?;
    decode_snapshots(&bytes, oversampling)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sdwave_core::dynamics::{simulate, SolverConfig};

    #[test]
    fn single_snapshot_gives_two_lines() {
        let b = BasisSpec::new(1, 4).unwrap();
        let model = ModelSpec::linear(b);
        let rec = simulate(&model, &State::zeros(b), &SolverConfig::new(0.5, 0.5).with_stride(10)).unwrap();
        let rows = trajectory_rows(&model, &rec);
        let csv = render_csv(&rows[..1]);
        assert_eq!(csv.lines().count(), 2);
        assert!(!csv.contains('\r'));
        assert_eq!(csv.lines().next().unwrap(), "time,E,L,diss_grad,diss_sigma,residual,H1_norm,H2xH1_norm");
    }

    #[test]
    fn zero_trajectory_has_zero_metrics() {
        let b = BasisSpec::new(1, 4).unwrap();
        let model = ModelSpec::linear(b);
        let rec = simulate(&model, &State::zeros(b), &SolverConfig::new(0.1, 1.0)).unwrap();
        for row in trajectory_rows(&model, &rec) {
            assert!(row[1..].iter().all(|c| *c == Some(0.0)));
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let values = [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 123456789.12345679];
        let rows: Vec<Row> = values.iter().map(|&v| [Some(v), Some(-v), None, Some(v * v), None, Some(0.0), Some(v), Some(1e-17)]).collect();
        let parsed = parse_csv(&render_csv(&rows)).unwrap();
        for (a, b) in rows.iter().zip(&parsed) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.map(f64::to_bits), y.map(f64::to_bits));
            }
        }
    }

    #[test]
    fn snapshots_round_trip() {
        let b = BasisSpec::new(2, 3).unwrap();
        let w = SpectralField::from_coeffs(b, (0..9).map(|i| i as f64 / 7.0).collect()).unwrap();
        let s = State::new(w.clone(), w.scaled(-0.3)).unwrap();
        let bytes = encode_snapshots(&b, &[0.0, 0.25], &[s.clone(), s.scaled(2.0)]);
        assert_eq!(&bytes[..8], b"SDWAVE01");
        assert_eq!(bytes.len(), 32 + 2 * 8 * 19);
        let back = decode_snapshots(&bytes, 1.5).unwrap();
        assert_eq!(back.states, vec![s.clone(), s.scaled(2.0)]);
        assert_eq!(back.times, vec![0.0, 0.25]);
        assert!(decode_snapshots(&bytes[..40], 1.5).is_err());
    }
}
