use std::io::{Read, Write};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::model::{Joints, Wrench};

/// One loaded-deflection experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflectionRecord {
    /// Joint angles, rad.
    pub q: Joints,
    /// Tool wrench (N, N·mm), base frame.
    pub wrench: Wrench,
    /// Deflection of each marker (after − before loading), mm.
    pub deflections: Vec<Vector3<f64>>,
    pub repeat: usize,
}

impl DeflectionRecord {
    pub fn validate(&self, index: usize) -> Result<()> {
        if !(self.wrench.norm() > 0.0) {
            return Err(Error::Record {
                index,
                message: "applied wrench is zero".into(),
            });
        }
        if self.deflections.is_empty() {
            return Err(Error::Record {
                index,
                message: "no marker deflections".into(),
            });
        }
        Ok(())
    }
}

const HEADER: [&str; 17] = [
    "q1_deg", "q2_deg", "q3_deg", "q4_deg", "q5_deg", "q6_deg", "Fx_N", "Fy_N", "Fz_N", "Mx_Nmm", "My_Nmm",
    "Mz_Nmm", "marker_id", "dx_mm", "dy_mm", "dz_mm", "repeat",
];

/// One row per marker; consecutive rows sharing `(q, F, repeat)` form a
/// record and must list markers `1..n` in order.
pub fn read_records_csv<R: Read>(reader: R) -> Result<Vec<DeflectionRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv {
            context: "records header".into(),
            source: e,
        })?
        .clone();
    let mut cols = [0usize; 17];
    for (slot, name) in cols.iter_mut().zip(HEADER) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::invalid(name, "missing column"))?;
    }

    let mut out: Vec<DeflectionRecord> = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 1;
        let rec = rec.map_err(|e| Error::Csv {
            context: format!("records row {line}"),
            source: e,
        })?;
        let num = |c: usize| -> Result<f64> {
            let s = rec.get(cols[c]).unwrap_or("");
            s.parse::<f64>().map_err(|_| Error::Record {
                index: line,
                message: format!("column '{}': cannot parse '{s}'", HEADER[c]),
            })
        };
        let int = |c: usize| -> Result<usize> {
            let s = rec.get(cols[c]).unwrap_or("");
            s.parse::<usize>().map_err(|_| Error::Record {
                index: line,
                message: format!("column '{}': expected a non-negative integer, got '{s}'", HEADER[c]),
            })
        };
        let q = Joints::from_vec((0..6).map(|i| num(i).map(f64::to_radians)).collect::<Result<Vec<_>>>()?);
        let wrench = Wrench::from_vec((6..12).map(num).collect::<Result<Vec<_>>>()?);
        let marker = int(12)?;
        let d = Vector3::new(num(13)?, num(14)?, num(15)?);
        let repeat = int(16)?;

        let continues = out
            .last()
            .is_some_and(|r| r.q == q && r.wrench == wrench && r.repeat == repeat && marker == r.deflections.len() + 1);
        if continues {
            out.last_mut().unwrap().deflections.push(d);
        } else if marker == 1 {
            out.push(DeflectionRecord {
                q,
                wrench,
                deflections: vec![d],
                repeat,
            });
        } else {
            return Err(Error::Record {
                index: line,
                message: format!("marker_id {marker} does not continue a record (markers must run 1..n)"),
            });
        }
    }
    Ok(out)
}

pub fn write_records_csv<W: Write>(records: &[DeflectionRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e| Error::Csv {
        context: "records output".into(),
        source: e,
    };
    w.write_record(HEADER).map_err(csv_err)?;
    for r in records {
        for (m, d) in r.deflections.iter().enumerate() {
            let mut row: Vec<String> = r.q.iter().map(|v| format!("{:.9}", v.to_degrees())).collect();
            row.extend(r.wrench.iter().map(|v| format!("{v:.6}")));
            row.push((m + 1).to_string());
            row.extend(d.iter().map(|v| format!("{v:.9}")));
            row.push(r.repeat.to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Csv {
        context: "records output".into(),
        source: e.into(),
    })
}
