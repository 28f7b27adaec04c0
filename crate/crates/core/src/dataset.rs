//! Sample storage, delimited-file loading and the synthetic grid problems.
//!
//! A [`Dataset`] is immutable once built. Sample order is fixed at
//! construction; every per-sample index used elsewhere in the crate refers
//! to this order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// One data point: a feature vector and its target value.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    d: usize,
    samples: Vec<Sample>,
}

impl Dataset {
    /// Builds a dataset, checking that it is nonempty, rectangular and finite.
    pub fn new(name: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyDataset)?;
        let d = first.features.len();
        if d == 0 {
            return Err(Error::Config(
                "samples must have at least one feature".into(),
            ));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: s.features.len(),
                });
            }
            if !s.target.is_finite() || s.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("sample {i} has a non-finite entry")));
            }
        }
        Ok(Dataset {
            name: name.into(),
            d,
            samples,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Feature dimension.
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> Result<&Sample> {
        self.samples.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.samples.len(),
        })
    }

    /// Returns a copy with every target multiplied by `factor`.
    pub fn scale_targets(&self, factor: f64) -> Dataset {
        let samples = self
            .samples
            .iter()
            .map(|s| Sample {
                features: s.features.clone(),
                target: s.target * factor,
            })
            .collect();
        Dataset {
            name: self.name.clone(),
            d: self.d,
            samples,
        }
    }

    /// Appends a constant `1.0` feature to every sample, giving each hidden
    /// unit an intercept.
    pub fn with_bias_feature(&self) -> Dataset {
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let mut features = s.features.clone();
                features.push(1.0);
                Sample {
                    features,
                    target: s.target,
                }
            })
            .collect();
        Dataset {
            name: format!("{}+bias", self.name),
            d: self.d + 1,
            samples,
        }
    }
}

/// Parses delimited text with one sample per line.
///
/// With `label_first` the first column is the target (UCR archive layout),
/// otherwise the last column is. Blank lines are skipped.
pub fn parse_delimited(
    name: &str,
    text: &str,
    delimiter: char,
    label_first: bool,
) -> Result<Dataset> {
    let mut samples = Vec::new();
    let mut width = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let split: Box<dyn Iterator<Item = &str>> = if delimiter.is_whitespace() {
            Box::new(line.split_whitespace())
        } else {
            Box::new(line.split(delimiter))
        };
        let fields: Vec<f64> = split
            .map(|f| {
                let f = f.trim();
                f.parse::<f64>()
                    .map_err(|_| Error::parse(line_no, format!("non-numeric field {f:?}")))
            })
            .collect::<Result<_>>()?;
        if fields.len() < 2 {
            return Err(Error::parse(line_no, "need at least two fields"));
        }
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(Error::parse(
                    line_no,
                    format!("expected {w} fields, found {}", fields.len()),
                ))
            }
            _ => {}
        }
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(line_no, "non-finite value"));
        }
        let sample = if label_first {
            Sample {
                target: fields[0],
                features: fields[1..].to_vec(),
            }
        } else {
            let (last, rest) = fields.split_last().expect("len >= 2");
            Sample {
                target: *last,
                features: rest.to_vec(),
            }
        };
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Dataset::new(name, samples)
}

/// Loads a delimited file. See [`parse_delimited`].
pub fn load_delimited(path: &Path, delimiter: char, label_first: bool) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".to_string());
    let data = parse_delimited(&name, &text, delimiter, label_first)?;
    log::info!(
        "loaded {}: N = {}, d = {} ({} columns per line)",
        path.display(),
        data.len(),
        data.dim(),
        data.dim() + 1
    );
    Ok(data)
}

/// Picks TAB if the text contains one, then comma, then runs of spaces.
/// Any whitespace delimiter splits on runs of whitespace.
pub fn sniff_delimiter(text: &str) -> char {
    if text.contains('\t') {
        '\t'
    } else if text.contains(',') {
        ','
    } else {
        ' '
    }
}

/// Serializes in the same layout [`parse_delimited`] reads. Values use the
/// shortest representation that parses back to the identical `f64`.
pub fn to_delimited(data: &Dataset, delimiter: char, label_first: bool) -> String {
    let mut out = String::new();
    for s in data.samples() {
        let mut fields: Vec<f64> = Vec::with_capacity(s.features.len() + 1);
        if label_first {
            fields.push(s.target);
            fields.extend_from_slice(&s.features);
        } else {
            fields.extend_from_slice(&s.features);
            fields.push(s.target);
        }
        for (k, v) in fields.iter().enumerate() {
            if k > 0 {
                out.push(delimiter);
            }
            write!(out, "{v:?}").expect("write to String");
        }
        out.push('\n');
    }
    out
}

/// Axis discretisation for the synthetic problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub points_per_axis: usize,
    pub lo: f64,
    pub hi: f64,
}

impl GridSpec {
    pub fn new(points_per_axis: usize, lo: f64, hi: f64) -> Result<Self> {
        let spec = GridSpec {
            points_per_axis,
            lo,
            hi,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The 50 x 50 inclusive grid on [-1, 1]^2 (2500 points).
    pub fn default_square() -> Self {
        GridSpec {
            points_per_axis: 50,
            lo: -1.0,
            hi: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points_per_axis < 2 {
            return Err(Error::Config(
                "grid needs at least 2 points per axis".into(),
            ));
        }
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::Config(format!(
                "grid bounds must satisfy lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points_per_axis - 1) as f64
    }

    /// Axis coordinates, inclusive of both endpoints.
    pub fn axis(&self) -> Vec<f64> {
        let last = self.points_per_axis - 1;
        (0..self.points_per_axis)
            .map(|k| {
                if k == last {
                    self.hi
                } else {
                    self.lo + (self.hi - self.lo) * (k as f64) / (last as f64)
                }
            })
            .collect()
    }
}

/// sqrt(|x - 0.5| + 3|y|): a single deep minimum at (0.5, 0).
pub fn phi1(x: f64, y: f64) -> f64 {
    ((x - 0.5).abs() + 3.0 * y.abs()).sqrt()
}

/// sin(5x - 0.5) - sqrt(|cos 7y|): several shallow local minima.
pub fn phi2(x: f64, y: f64) -> f64 {
    (5.0 * x - 0.5).sin() - (7.0 * y).cos().abs().sqrt()
}

/// Tabulates `f` on the square grid, row-major in x then y.
pub fn make_grid(spec: GridSpec, f: impl Fn(f64, f64) -> f64, name: &str) -> Result<Dataset> {
    spec.validate()?;
    let axis = spec.axis();
    let mut samples = Vec::with_capacity(axis.len() * axis.len());
    for &x in &axis {
        for &y in &axis {
            samples.push(Sample {
                features: vec![x, y],
                target: f(x, y),
            });
        }
    }
    log::debug!(
        "grid {name}: {} points, step {}",
        samples.len(),
        spec.step()
    );
    Dataset::new(name, samples)
}

/// Which built-in surface a synthetic data source refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Synthetic {
    Phi1,
    Phi2,
}

impl Synthetic {
    pub fn name(self) -> &'static str {
        match self {
            Synthetic::Phi1 => "phi1",
            Synthetic::Phi2 => "phi2",
        }
    }

    pub fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            Synthetic::Phi1 => phi1(x, y),
            Synthetic::Phi2 => phi2(x, y),
        }
    }

    pub fn dataset(self, spec: GridSpec) -> Result<Dataset> {
        make_grid(spec, |x, y| self.eval(x, y), self.name())
    }
}
