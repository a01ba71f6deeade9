//! Named analytic profiles for initial densities and test functions.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Lattice};

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

/// A function on `T^d`, either analytic or read from a CSV field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `mean + amplitude * cos(2 pi (frequency x_axis + phase))`.
    Cosine {
        #[serde(default)]
        mean: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `mean + amplitude * sin(2 pi (frequency x_axis + phase))`.
    Sine {
        #[serde(default)]
        mean: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `low` for `x_axis < at`, `high` otherwise.
    Step {
        low: f64,
        high: f64,
        #[serde(default = "half")]
        at: f64,
        #[serde(default)]
        axis: usize,
    },
    /// One value per site in row-major order, optionally under a header
    /// line; the last comma-separated column is read.
    Csv {
        path: PathBuf,
    },
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    pub fn cosine(mean: f64, amplitude: f64) -> Self {
        Profile::Cosine {
            mean,
            amplitude,
            frequency: 1.0,
            phase: 0.0,
            axis: 0,
        }
    }

    pub fn sine(mean: f64, amplitude: f64) -> Self {
        Profile::Sine {
            mean,
            amplitude,
            frequency: 1.0,
            phase: 0.0,
            axis: 0,
        }
    }

    /// Short identifier for reports.
    pub fn label(&self) -> String {
        match self {
            Profile::Constant { value } => format!("const({value})"),
            Profile::Cosine {
                mean,
                amplitude,
                frequency,
                axis,
                ..
            } => format!("{mean}+{amplitude}cos({frequency}x{axis})"),
            Profile::Sine {
                mean,
                amplitude,
                frequency,
                axis,
                ..
            } => format!("{mean}+{amplitude}sin({frequency}x{axis})"),
            Profile::Step {
                low,
                high,
                at,
                axis,
            } => format!("step({low},{high}@{at}x{axis})"),
            Profile::Csv { path } => format!("csv({})", path.display()),
        }
    }

    fn axis(&self) -> Option<usize> {
        match self {
            Profile::Cosine { axis, .. }
            | Profile::Sine { axis, .. }
            | Profile::Step { axis, .. } => Some(*axis),
            _ => None,
        }
    }

    /// Value at a macroscopic point; `None` for CSV profiles.
    pub fn eval(&self, x: &[f64]) -> Option<f64> {
        let v = match *self {
            Profile::Constant { value } => value,
            Profile::Cosine {
                mean,
                amplitude,
                frequency,
                phase,
                axis,
            } => mean + amplitude * (TAU * (frequency * x[axis] + phase)).cos(),
            Profile::Sine {
                mean,
                amplitude,
                frequency,
                phase,
                axis,
            } => mean + amplitude * (TAU * (frequency * x[axis] + phase)).sin(),
            Profile::Step {
                low,
                high,
                at,
                axis,
            } => {
                if x[axis] < at {
                    low
                } else {
                    high
                }
            }
            Profile::Csv { .. } => return None,
        };
        Some(v)
    }

    /// Samples the profile on `T_N^d`. Relative CSV paths resolve against
    /// `base`.
    pub fn field(&self, dim: usize, n: usize, base: Option<&Path>) -> Result<Field> {
        if let Some(axis) = self.axis() {
            if axis >= dim {
                return Err(Error::Config(format!("profile axis {axis} >= dim {dim}")));
            }
        }
        match self {
            Profile::Csv { path } => {
                let full = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                read_csv_field(&full, dim, n)
            }
            _ => Ok(Field::from_fn(dim, n, |x| {
                self.eval(x).expect("analytic profile")
            })),
        }
    }
}

fn read_csv_field(path: &Path, dim: usize, n: usize) -> Result<Field> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let last = line.rsplit(',').next().unwrap_or(line).trim();
        match last.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::Config(format!(
                    "{}:{}: cannot parse {last:?}",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Field::new(dim, n, values)
}

/// Site lookup `x -> field(round(N x))`, for samplers that take a function
/// of the macroscopic position.
pub fn field_lookup(field: &Field) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
    let l: Lattice = field.lattice();
    move |x: &[f64]| {
        let c: Vec<usize> = x
            .iter()
            .map(|v| ((v * l.n as f64).round() as usize) % l.n)
            .collect();
        field.values()[l.site(&c)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_forms() {
        let p: Profile =
            serde_json::from_str(r#"{"kind": "cosine", "mean": 0.5, "amplitude": 0.3}"#).unwrap();
        assert_eq!(p, Profile::cosine(0.5, 0.3));
        let p: Profile =
            serde_json::from_str(r#"{"kind": "step", "low": 0.2, "high": 0.8}"#).unwrap();
        assert_eq!(p.eval(&[0.49]), Some(0.2));
        assert_eq!(p.eval(&[0.5]), Some(0.8));
        assert!(serde_json::from_str::<Profile>(r#"{"kind": "gauss"}"#).is_err());
    }

    #[test]
    fn sampled_values() {
        let f = Profile::cosine(0.5, 0.3).field(1, 4, None).unwrap();
        let expect = [0.8, 0.5, 0.2, 0.5];
        for (a, b) in f.values().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let s = Profile::Sine {
            mean: 0.0,
            amplitude: 1.0,
            frequency: 1.0,
            phase: 0.0,
            axis: 1,
        };
        let f = s.field(2, 4, None).unwrap();
        assert!((f.values()[1] - 1.0).abs() < 1e-15);
        assert!(s.field(1, 4, None).is_err());
    }

    #[test]
    fn csv_profile() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("g.csv"),
            "site_index,rho\n0,0.1\n1,0.2\n2,0.3\n3,0.4\n",
        )
        .unwrap();
        let p = Profile::Csv {
            path: "g.csv".into(),
        };
        let f = p.field(1, 4, Some(dir.path())).unwrap();
        assert_eq!(f.values(), &[0.1, 0.2, 0.3, 0.4]);
        assert!(p.field(1, 8, Some(dir.path())).is_err());
        let look = field_lookup(&f);
        assert_eq!(look(&[0.5]), 0.3);
        assert_eq!(look(&[0.75]), 0.4);
    }
}
