//! Sampled coherence records shared by simulation, analytics and fitting.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{QpsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// Swept control parameter (τ or t_wait, µs).
    pub control: f64,
    pub x: f64,
    pub y: f64,
}

impl TracePoint {
    pub fn w_mag(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Φ with W = X − iY = |W| e^{−iΦ}.
    pub fn phi(&self) -> f64 {
        self.y.atan2(self.x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceTrace {
    pub control_name: String,
    pub points: Vec<TracePoint>,
}

impl CoherenceTrace {
    pub fn new(control_name: impl Into<String>, points: Vec<TracePoint>) -> Self {
        Self {
            control_name: control_name.into(),
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn controls(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.control).collect()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.y).collect()
    }

    /// Unwrapped phase Φ along the trace.
    pub fn phases(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::with_capacity(self.len());
        for p in &self.points {
            let mut phi = p.phi();
            if let Some(&prev) = out.last() {
                let tau = std::f64::consts::TAU;
                phi += tau * ((prev - phi) / tau).round();
            }
            out.push(phi);
        }
        out
    }

    /// CSV with columns `control_value,x,y`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("control_value,x,y\n");
        for p in &self.points {
            let _ = writeln!(s, "{:.12e},{:.12e},{:.12e}", p.control, p.x, p.y);
        }
        s
    }

    /// Parse CSV text. Lines starting with `#` and blank lines are skipped.
    /// The header must name `x` and `y`; the control column is
    /// `control_value` if present, otherwise the first column.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(QpsError::Parse {
            line: 0,
            message: "no header row".into(),
        })?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let find = |name: &str| cols.iter().position(|c| *c == name);
        let xi = find("x").ok_or_else(|| QpsError::Parse {
            line: hline,
            message: "missing column `x`".into(),
        })?;
        let yi = find("y").ok_or_else(|| QpsError::Parse {
            line: hline,
            message: "missing column `y`".into(),
        })?;
        let ci = find("control_value").unwrap_or(0);
        if ci == xi || ci == yi {
            return Err(QpsError::Parse {
                line: hline,
                message: "missing control column".into(),
            });
        }
        let mut points = Vec::new();
        for (ln, line) in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != cols.len() {
                return Err(QpsError::Parse {
                    line: ln,
                    message: format!("expected {} fields, found {}", cols.len(), fields.len()),
                });
            }
            let num = |i: usize| -> Result<f64> {
                fields[i].parse::<f64>().map_err(|_| QpsError::Parse {
                    line: ln,
                    message: format!("`{}` is not a number", fields[i]),
                })
            };
            points.push(TracePoint {
                control: num(ci)?,
                x: num(xi)?,
                y: num(yi)?,
            });
        }
        Ok(Self::new(cols[ci].to_string(), points))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let t = CoherenceTrace::new(
            "tau_us",
            vec![
                TracePoint { control: 0.5, x: 0.9, y: -0.01 },
                TracePoint { control: 1.0, x: 0.7, y: 0.02 },
            ],
        );
        let back = CoherenceTrace::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back.points, t.points);
    }

    #[test]
    fn accepts_sweep_columns_and_comments() {
        let text = "# seed=1\ntau_us,x,y,w_mag,phi\n0.1,1.0,0.0,1.0,0.0\n0.2,0.5,0.5,0.7,0.78\n";
        let t = CoherenceTrace::from_csv(text).unwrap();
        assert_eq!(t.control_name, "tau_us");
        assert_eq!(t.xs(), vec![1.0, 0.5]);
    }

    #[test]
    fn reports_line_numbers() {
        let err = CoherenceTrace::from_csv("control_value,x,y\n1,2,3\n4,oops,6\n").unwrap_err();
        assert!(matches!(err, QpsError::Parse { line: 3, .. }), "{err}");
        let err = CoherenceTrace::from_csv("control_value,x\n1,2\n").unwrap_err();
        assert!(err.to_string().contains("missing column `y`"));
        let err = CoherenceTrace::from_csv("control_value,x,y\n1,2\n").unwrap_err();
        assert!(matches!(err, QpsError::Parse { line: 2, .. }));
    }

    #[test]
    fn phase_unwraps_across_branch_cut() {
        let pts = [3.0f64, 3.1, -3.1, -3.0]
            .iter()
            .enumerate()
            .map(|(i, &phi)| TracePoint { control: i as f64, x: phi.cos(), y: phi.sin() })
            .collect();
        let ph = CoherenceTrace::new("c", pts).phases();
        assert!(ph.windows(2).all(|w| (w[1] - w[0]).abs() < 0.5));
    }
}
