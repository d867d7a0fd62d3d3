//! Sampled observables with provenance.

use serde::{Deserialize, Serialize};

/// Engine that produced a record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Analytic,
    Mps,
    Exact,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Analytic => "analytic",
            Source::Mps => "mps",
            Source::Exact => "exact",
        }
    }
}

/// Floats in CSV output: 17 significant digits, exact round trip.
pub fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Named columns sampled on a time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub source: Source,
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    /// One row per time, one entry per label.
    pub rows: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn new(source: Source, labels: Vec<String>) -> Self {
        Self { source, labels, times: Vec::new(), rows: Vec::new() }
    }

    pub fn push(&mut self, t: f64, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.labels.len());
        self.times.push(t);
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn column(&self, label: &str) -> Option<Vec<f64>> {
        let k = self.labels.iter().position(|l| l == label)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Wide CSV: `t` followed by every label.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (t, row) in self.times.iter().zip(&self.rows) {
            out.push_str(&csv_float(*t));
            for v in row {
                out.push(',');
                out.push_str(&csv_float(*v));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrips_floats() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, std::f64::consts::PI] {
            assert_eq!(csv_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn columns_and_csv() {
        let mut s = TimeSeries::new(Source::Analytic, vec!["a".into(), "b".into()]);
        s.push(0.0, vec![1.0, 2.0]);
        s.push(0.5, vec![3.0, 4.0]);
        assert_eq!(s.column("b").unwrap(), vec![2.0, 4.0]);
        assert!(s.column("c").is_none());
        let csv = s.to_csv();
        assert!(csv.starts_with("t,a,b\n"));
        assert_eq!(csv.lines().count(), 3);
        assert!(!csv.contains('\r'));
    }
}
