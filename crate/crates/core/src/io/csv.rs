//! Diagnostics CSV: a schema row, a header row, then one row per record.

use std::io::Write;

/// First line of every diagnostics file.
pub const SCHEMA: &str = "# schema: alfven-diagnostics v1";

/// One time sample of every diagnostic functional.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagRecord {
    pub t: f64,
    pub e: [f64; 2],
    /// `e_order[s][k]` for `k = 0..=K`.
    pub e_order: [Vec<f64>; 2],
    pub f: [f64; 2],
    pub d: [f64; 2],
    pub total_e: f64,
    pub basic_residual: [f64; 2],
    pub sep_min: f64,
    pub sep_max: f64,
    pub weight_product_min: f64,
    pub low_freq_mass: f64,
    pub e_lin_total: f64,
    pub e_non_total: f64,
}

pub fn header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t", "E_plus", "E_minus"].iter().map(|s| s.to_string()).collect();
    for j in 0..=k {
        h.push(format!("E{j}_plus"));
        h.push(format!("E{j}_minus"));
    }
    for s in [
        "F_plus",
        "F_minus",
        "D_plus",
        "D_minus",
        "total_E",
        "basic_residual_plus",
        "basic_residual_minus",
        "sep_min",
        "sep_max",
        "weight_product_min",
        "low_freq_mass",
        "E_lin_total",
        "E_non_total",
    ] {
        h.push(s.to_string());
    }
    h
}

impl DiagRecord {
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![self.t, self.e[0], self.e[1]];
        for (a, b) in self.e_order[0].iter().zip(&self.e_order[1]) {
            v.push(*a);
            v.push(*b);
        }
        v.extend([
            self.f[0],
            self.f[1],
            self.d[0],
            self.d[1],
            self.total_e,
            self.basic_residual[0],
            self.basic_residual[1],
            self.sep_min,
            self.sep_max,
            self.weight_product_min,
            self.low_freq_mass,
            self.e_lin_total,
            self.e_non_total,
        ]);
        v
    }
}

/// Streaming writer. `partial` lists columns integrated over a truncated span.
pub struct DiagWriter<W: Write> {
    out: W,
    width: usize,
}

impl<W: Write> DiagWriter<W> {
    pub fn new(mut out: W, k: usize, partial: &[&str]) -> std::io::Result<Self> {
        if partial.is_empty() {
            writeln!(out, "{SCHEMA}")?;
        } else {
            writeln!(out, "{SCHEMA}; partial={}", partial.join(","))?;
        }
        let h = header(k);
        writeln!(out, "{}", h.join(","))?;
        Ok(Self { out, width: h.len() })
    }

    pub fn write(&mut self, r: &DiagRecord) -> std::io::Result<()> {
        let v = r.values();
        debug_assert_eq!(v.len(), self.width);
        let cells: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        writeln!(self.out, "{}", cells.join(","))
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Parsed diagnostics file.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagTable {
    pub schema: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl DiagTable {
    pub fn parse(text: &str) -> Option<Self> {
        let mut lines = text.lines();
        let schema = lines.next()?.to_string();
        let columns = lines.next()?.split(',').map(str::to_string).collect();
        let rows = lines
            .filter(|l| !l.is_empty())
            .map(|l| l.split(',').map(|c| c.parse().ok()).collect::<Option<Vec<f64>>>())
            .collect::<Option<_>>()?;
        Some(Self { schema, columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}
