//! Text tables and CSV payloads.

use std::fmt::Write;

/// One reported parameter with its ±3σ half-width.
pub struct Row {
    pub name: String,
    pub unit: &'static str,
    pub value: f64,
    pub ci: f64,
}

impl Row {
    pub fn new(name: impl Into<String>, unit: &'static str, value: f64, ci: f64) -> Self {
        Self {
            name: name.into(),
            unit,
            value,
            ci,
        }
    }

    fn percent(&self) -> f64 {
        if self.value != 0.0 {
            100.0 * self.ci / self.value.abs()
        } else {
            f64::NAN
        }
    }
}

fn sig(v: f64) -> String {
    if v == 0.0 || (1e-3..1e6).contains(&v.abs()) {
        format!("{v:.4}")
    } else {
        format!("{v:.4e}")
    }
}

/// Parameter | value | CI table.
pub fn table(title: &str, rows: &[Row]) -> String {
    let cells: Vec<[String; 3]> = rows
        .iter()
        .map(|r| {
            [
                format!("{}, [{}]", r.name, r.unit),
                sig(r.value),
                format!("± {} ({:.2}%)", sig(r.ci), r.percent()),
            ]
        })
        .collect();
    let w0 = cells.iter().map(|c| c[0].chars().count()).max().unwrap_or(0).max(9);
    let w1 = cells.iter().map(|c| c[1].len()).max().unwrap_or(0).max(5);
    let mut out = String::new();
    writeln!(out, "{title}\n").unwrap();
    writeln!(out, "{:<w0$}  {:>w1$}  CI", "Parameter", "value").unwrap();
    for c in &cells {
        writeln!(out, "{:<w0$}  {:>w1$}  {}", c[0], c[1], c[2]).unwrap();
    }
    out
}

pub fn rows_csv(rows: &[Row]) -> String {
    let mut out = String::from("parameter,unit,value,ci,ci_pct\n");
    for r in rows {
        writeln!(out, "{},{},{:e},{:e},{:.3}", r.name, r.unit, r.value, r.ci, r.percent()).unwrap();
    }
    out
}

/// Long-format plot data: one `(x, series, y)` row per point.
pub fn long_csv(points: impl IntoIterator<Item = (f64, String, f64)>) -> String {
    let mut out = String::from("x,series,y\n");
    for (x, series, y) in points {
        writeln!(out, "{x:.6},{series},{y:e}").unwrap();
    }
    out
}
