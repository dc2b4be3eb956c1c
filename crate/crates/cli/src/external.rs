//! Limit states evaluated by an external program.
//!
//! The program receives one comma-separated input row per line on stdin and
//! must print one `g` value per line, in order.

use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};

use sashpcfe::probspace::{SampleMatrix, Space};
use sashpcfe::reliability::{CostClass, LimitState};
use sashpcfe::{Error, Result};

pub struct ExternalLimitState {
    name: String,
    command: Vec<String>,
    dim: usize,
}

impl ExternalLimitState {
    pub fn new(name: String, command: Vec<String>, dim: usize) -> Self {
        Self { name, command, dim }
    }

    fn run(&self, rows: &[f64]) -> Result<Vec<f64>> {
        let n = rows.len() / self.dim.max(1);
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Evaluation(format!("cannot start {:?}: {e}", self.command[0])))?;
        let mut stdin = child.stdin.take().expect("piped");
        let input: String = rows
            .chunks(self.dim.max(1))
            .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",") + "\n")
            .collect();
        // feed stdin from a thread so a chatty child cannot deadlock on a full pipe
        let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
        let stdout = child.stdout.take().expect("piped");
        let mut out = Vec::with_capacity(n);
        for (i, line) in BufReader::new(stdout).lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let v: f64 = t
                .parse()
                .map_err(|_| Error::Evaluation(format!("line {}: cannot parse {t:?} as a number", i + 1)))?;
            out.push(v);
        }
        let status = child.wait()?;
        // a child that exits early closes the pipe; its exit status says more
        let _ = writer.join();
        if !status.success() {
            return Err(Error::Evaluation(format!("{} exited with {status}", self.command[0])));
        }
        if out.len() != n {
            return Err(Error::Evaluation(format!("expected {n} values, got {}", out.len())));
        }
        Ok(out)
    }
}

impl LimitState for ExternalLimitState {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn cost_class(&self) -> CostClass {
        CostClass::Expensive
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(self.run(x)?[0])
    }

    fn evaluate_batch(&self, x: &SampleMatrix) -> Result<Vec<f64>> {
        if x.cols() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.cols() });
        }
        if x.space() != Space::Physical {
            return Err(Error::InvalidConfig("limit states take physical-space samples".into()));
        }
        let g = self.run(x.as_slice())?;
        if let Some(index) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "limit-state value", index });
        }
        Ok(g)
    }
}
