use std::io::{Read, Write};

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Minimum number of distinct `q2` poses.
pub const MIN_POSES: usize = 3;
/// Minimum `q2` span, degrees.
pub const MIN_ANGLE_SPAN_DEG: f64 = 30.0;

/// Angle-annotated marker tracks: one crank marker `P1` plus `k ≥ 2`
/// satellite markers circling `P0`. Positions in mm, angles in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerDataset {
    q2_deg: Vec<f64>,
    crank: Vec<Vector3<f64>>,
    satellites: Vec<Vec<Vector3<f64>>>,
    has_z: bool,
}

impl MarkerDataset {
    pub fn new(
        q2_deg: Vec<f64>,
        crank: Vec<Vector3<f64>>,
        satellites: Vec<Vec<Vector3<f64>>>,
        has_z: bool,
    ) -> Result<Self> {
        let n = q2_deg.len();
        if crank.len() != n || satellites.iter().any(|s| s.len() != n) {
            return Err(Error::invalid(
                "markers",
                "inconsistent marker sets: every marker needs one position per q2 row",
            ));
        }
        if satellites.len() < 2 {
            return Err(Error::invalid("markers", "at least 2 satellite markers (P01, P02) required"));
        }
        if q2_deg.iter().chain(crank.iter().flat_map(|p| p.iter())).any(|v| !v.is_finite())
            || satellites.iter().flatten().flat_map(|p| p.iter()).any(|v| !v.is_finite())
        {
            return Err(Error::invalid("markers", "non-finite value"));
        }
        let mut sorted = q2_deg.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        if sorted.len() < MIN_POSES {
            return Err(Error::InsufficientData(format!(
                "need >= {MIN_POSES} distinct q2 values (got {})",
                sorted.len()
            )));
        }
        let span = sorted[sorted.len() - 1] - sorted[0];
        if span < MIN_ANGLE_SPAN_DEG {
            return Err(Error::InsufficientData(format!(
                "q2 span {span:.3} deg is below the {MIN_ANGLE_SPAN_DEG} deg minimum"
            )));
        }
        Ok(Self {
            q2_deg,
            crank,
            satellites,
            has_z,
        })
    }

    pub fn len(&self) -> usize {
        self.q2_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q2_deg.is_empty()
    }

    pub fn q2_deg(&self) -> &[f64] {
        &self.q2_deg
    }

    pub fn q2_rad(&self) -> Vec<f64> {
        self.q2_deg.iter().map(|d| d.to_radians()).collect()
    }

    /// `P1` track.
    pub fn crank(&self) -> &[Vector3<f64>] {
        &self.crank
    }

    /// `P0k` tracks, one per satellite marker.
    pub fn satellites(&self) -> &[Vec<Vector3<f64>>] {
        &self.satellites
    }

    /// Whether Z coordinates were supplied.
    pub fn has_z(&self) -> bool {
        self.has_z
    }

    /// Same dataset with every position shifted by `v`.
    pub fn translated(&self, v: &Vector3<f64>) -> Self {
        let mut out = self.clone();
        out.crank.iter_mut().for_each(|p| *p += v);
        out.satellites.iter_mut().flatten().for_each(|p| *p += v);
        out
    }
}

fn marker_names(k: usize) -> Vec<String> {
    std::iter::once("P1".to_string())
        .chain((1..=k).map(|i| format!("P0{i}")))
        .collect()
}

/// Reads the `q2_deg,P1_x,P1_y,P01_x,P01_y,P02_x,P02_y[,…]` layout.
/// `_z` columns are optional but must be present for all markers or none.
pub fn read_marker_csv<R: Read>(reader: R) -> Result<MarkerDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv {
            context: "marker header".into(),
            source: e,
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let q2_col = col("q2_deg").ok_or_else(|| Error::invalid("q2_deg", "missing column"))?;
    let k = (1..).take_while(|i| col(&format!("P0{i}_x")).is_some()).count();
    let names = marker_names(k);
    let has_z = col("P1_z").is_some();
    let mut cols = Vec::new();
    for name in &names {
        let mut c = Vec::new();
        for axis in ["x", "y", "z"] {
            let field = format!("{name}_{axis}");
            match col(&field) {
                Some(i) => c.push(Some(i)),
                None if axis == "z" && !has_z => c.push(None),
                None => return Err(Error::invalid(field, "missing column")),
            }
        }
        cols.push(c);
    }

    let mut q2 = Vec::new();
    let mut tracks: Vec<Vec<Vector3<f64>>> = vec![Vec::new(); names.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv {
            context: format!("marker row {}", row + 1),
            source: e,
        })?;
        let num = |i: usize| -> Result<f64> {
            let s = rec.get(i).unwrap_or("");
            s.parse::<f64>().map_err(|_| Error::Record {
                index: row + 1,
                message: format!("column '{}': cannot parse '{s}'", &headers[i]),
            })
        };
        q2.push(num(q2_col)?);
        for (track, c) in tracks.iter_mut().zip(&cols) {
            let z = match c[2] {
                Some(i) => num(i)?,
                None => 0.0,
            };
            track.push(Vector3::new(num(c[0].unwrap())?, num(c[1].unwrap())?, z));
        }
    }
    let crank = tracks.remove(0);
    MarkerDataset::new(q2, crank, tracks, has_z)
}

/// Writes the layout read by [`read_marker_csv`]; fixed 6-decimal formatting.
pub fn write_marker_csv<W: Write>(data: &MarkerDataset, writer: W) -> Result<()> {
    let names = marker_names(data.satellites.len());
    let axes: &[&str] = if data.has_z { &["x", "y", "z"] } else { &["x", "y"] };
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["q2_deg".to_string()];
    for n in &names {
        header.extend(axes.iter().map(|a| format!("{n}_{a}")));
    }
    let csv_err = |e| Error::Csv {
        context: "marker output".into(),
        source: e,
    };
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..data.len() {
        let mut row = vec![format!("{:.6}", data.q2_deg[i])];
        for p in std::iter::once(&data.crank[i]).chain(data.satellites.iter().map(|s| &s[i])) {
            row.extend(p.iter().take(axes.len()).map(|v| format!("{v:.6}")));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Csv {
        context: "marker output".into(),
        source: e.into(),
    })
}
