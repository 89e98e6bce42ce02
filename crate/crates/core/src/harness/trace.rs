//! Objective traces and CSV emission.
//!
//! CSVs are RFC-4180 style with a header row; floats print in Rust's
//! shortest round-trip form so write-then-parse reproduces every value
//! exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::{Error, Result};

/// One evaluated iteration of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: u64,
    pub wall_ms: f64,
    pub elbo: f64,
    pub batch_size: usize,
    pub effective_batch: usize,
    pub rho: f64,
    pub seed: u64,
}

/// Time series of objective evaluations; iterations strictly increase
/// and wall time never decreases.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ElboTrace {
    pub rows: Vec<TraceRow>,
}

impl ElboTrace {
    pub const HEADER: [&'static str; 7] = [
        "iteration",
        "wall_ms",
        "elbo",
        "batch_size",
        "m",
        "rho",
        "seed",
    ];

    pub fn push(&mut self, row: TraceRow) {
        if let Some(last) = self.rows.last() {
            debug_assert!(row.iteration > last.iteration);
            debug_assert!(row.wall_ms >= last.wall_ms);
        }
        self.rows.push(row);
    }

    pub fn final_elbo(&self) -> Option<f64> {
        self.rows.last().map(|r| r.elbo)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_csv(
            path,
            &Self::HEADER.map(String::from),
            self.rows.iter().map(|r| {
                vec![
                    r.iteration.to_string(),
                    r.wall_ms.to_string(),
                    r.elbo.to_string(),
                    r.batch_size.to_string(),
                    r.effective_batch.to_string(),
                    r.rho.to_string(),
                    r.seed.to_string(),
                ]
            }),
        )
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<ElboTrace> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rows = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != Self::HEADER.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected {} fields, got {}", Self::HEADER.len(), fields.len()),
                });
            }
            let parse_err = |what: &str| Error::Parse {
                line: i + 1,
                msg: format!("cannot parse {what}"),
            };
            rows.push(TraceRow {
                iteration: fields[0].parse().map_err(|_| parse_err("iteration"))?,
                wall_ms: fields[1].parse().map_err(|_| parse_err("wall_ms"))?,
                elbo: fields[2].parse().map_err(|_| parse_err("elbo"))?,
                batch_size: fields[3].parse().map_err(|_| parse_err("batch_size"))?,
                effective_batch: fields[4].parse().map_err(|_| parse_err("m"))?,
                rho: fields[5].parse().map_err(|_| parse_err("rho"))?,
                seed: fields[6].parse().map_err(|_| parse_err("seed"))?,
            });
        }
        Ok(ElboTrace { rows })
    }
}

fn escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Writes a header row and data rows as CSV.
pub fn write_csv(
    path: impl AsRef<Path>,
    header: &[String],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    let render = |fields: &[String]| fields.iter().map(|f| escape(f)).collect::<Vec<_>>().join(",");
    writeln!(w, "{}", render(header)).map_err(io_err)?;
    for row in rows {
        writeln!(w, "{}", render(&row)).map_err(io_err)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: u64, elbo: f64, wall: f64) -> TraceRow {
        TraceRow {
            iteration: t,
            wall_ms: wall,
            elbo,
            batch_size: 50,
            effective_batch: 10,
            rho: 0.85,
            seed: 7,
        }
    }

    #[test]
    fn empty_trace_writes_header_only() {
        let f = tempfile::NamedTempFile::new().unwrap();
        ElboTrace::default().write_csv(f.path()).unwrap();
        let content = std::fs::read_to_string(f.path()).unwrap();
        assert_eq!(content, "iteration,wall_ms,elbo,batch_size,m,rho,seed\n");
    }

    #[test]
    fn csv_round_trips_exactly() {
        let mut trace = ElboTrace::default();
        trace.push(row(1, -1234.567890123456789, 0.25));
        trace.push(row(2, 1.0 / 3.0, 0.5));
        trace.push(row(10, f64::MIN_POSITIVE, 0.5));
        let f = tempfile::NamedTempFile::new().unwrap();
        trace.write_csv(f.path()).unwrap();
        let again = ElboTrace::read_csv(f.path()).unwrap();
        assert_eq!(trace, again);
    }

    #[test]
    fn wall_clock_is_monotone_in_traces() {
        let mut trace = ElboTrace::default();
        trace.push(row(1, 0.0, 1.0));
        trace.push(row(2, 0.0, 1.5));
        assert!(trace
            .rows
            .windows(2)
            .all(|w| w[1].wall_ms >= w[0].wall_ms && w[1].iteration > w[0].iteration));
    }
}
