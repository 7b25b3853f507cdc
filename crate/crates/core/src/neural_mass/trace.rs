use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

/// Uniformly sampled multichannel EEG with an optional aligned input channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub sample_rate: f64,
    /// Time of the first sample (s).
    pub t0: f64,
    pub channels: Vec<Vec<f64>>,
    /// Input applied over `[t_i, t_{i+1})`, one entry per sample.
    pub input: Option<Vec<f64>>,
}

/// Sidecar metadata stored next to a trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub sample_rate_hz: f64,
    pub t0: f64,
    pub channels: usize,
    pub samples: usize,
    pub has_input: bool,
}

impl SimTrace {
    pub fn new(sample_rate: f64, t0: f64, channels: Vec<Vec<f64>>, input: Option<Vec<f64>>) -> Result<Self> {
        let trace = Self { sample_rate, t0, channels, input };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("sample rate must be > 0, got {}", self.sample_rate)));
        }
        if self.channels.is_empty() {
            return Err(Error::InvalidParameter("trace has no channels".into()));
        }
        let n = self.channels[0].len();
        for (i, ch) in self.channels.iter().enumerate() {
            if ch.len() != n {
                return Err(Error::Format(format!(
                    "channel {i} has {} samples, channel 0 has {n}",
                    ch.len()
                )));
            }
        }
        if let Some(u) = &self.input {
            if u.len() != n {
                return Err(Error::Dimension { context: "SimTrace input", expected: n, actual: u.len() });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.sample_rate
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Index of the first sample at or after `t`.
    pub fn index_at(&self, t: f64) -> usize {
        let raw = ((t - self.t0) * self.sample_rate - 1e-9).ceil();
        if raw <= 0.0 {
            0
        } else {
            raw as usize
        }
    }

    /// All channels at sample `i`.
    pub fn sample(&self, i: usize) -> Vec<f64> {
        self.channels.iter().map(|c| c[i]).collect()
    }

    /// Samples `[start, end)` as a new trace.
    pub fn slice(&self, start: usize, end: usize) -> SimTrace {
        let end = end.min(self.len());
        let start = start.min(end);
        SimTrace {
            sample_rate: self.sample_rate,
            t0: self.time(start),
            channels: self.channels.iter().map(|c| c[start..end].to_vec()).collect(),
            input: self.input.as_ref().map(|u| u[start..end].to_vec()),
        }
    }

    pub fn meta(&self) -> TraceMeta {
        TraceMeta {
            sample_rate_hz: self.sample_rate,
            t0: self.t0,
            channels: self.n_channels(),
            samples: self.len(),
            has_input: self.input.is_some(),
        }
    }

    /// CSV body with header `t,ch0[,ch1],u`. Missing input is written as 0.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.len() * 48);
        out.push('t');
        for i in 0..self.n_channels() {
            out.push_str(&format!(",ch{i}"));
        }
        out.push_str(",u\n");
        for i in 0..self.len() {
            out.push_str(&format!("{}", self.time(i)));
            for ch in &self.channels {
                out.push_str(&format!(",{}", ch[i]));
            }
            let u = self.input.as_ref().map_or(0.0, |u| u[i]);
            out.push_str(&format!(",{u}\n"));
        }
        out
    }

    /// Parse a CSV body; the sampling rate comes from the metadata.
    pub fn from_csv_str(body: &str, meta: &TraceMeta) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let headers = rdr.headers()?.clone();
        let n_cols = headers.len();
        if n_cols < 3 || &headers[0] != "t" || &headers[n_cols - 1] != "u" {
            return Err(Error::Format(format!("unexpected trace header: {headers:?}")));
        }
        let n_ch = n_cols - 2;
        for (i, h) in headers.iter().skip(1).take(n_ch).enumerate() {
            if h != format!("ch{i}") {
                return Err(Error::Format(format!("unexpected channel column `{h}`")));
            }
        }
        let mut channels = vec![Vec::new(); n_ch];
        let mut input = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::Format(format!("bad number `{s}`: {e}")));
            for (c, ch) in channels.iter_mut().enumerate() {
                ch.push(parse(&rec[c + 1])?);
            }
            input.push(parse(&rec[n_cols - 1])?);
        }
        if n_ch != meta.channels || input.len() != meta.samples {
            return Err(Error::Format("trace CSV disagrees with its metadata".into()));
        }
        SimTrace::new(meta.sample_rate_hz, meta.t0, channels, meta.has_input.then_some(input))
    }

    /// Write `<path>` (CSV) and `<path>.meta.json`.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv_string().as_bytes())?;
        let meta = serde_json::to_vec_pretty(&self.meta())?;
        write_atomic(&meta_path(path), &meta)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let meta_file = meta_path(path);
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        if !meta_file.exists() {
            return Err(Error::MissingArtifact(meta_file));
        }
        let meta: TraceMeta = serde_json::from_slice(&std::fs::read(&meta_file)?)?;
        Self::from_csv_str(&std::fs::read_to_string(path)?, &meta)
    }
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}
