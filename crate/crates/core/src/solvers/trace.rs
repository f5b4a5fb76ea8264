use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::composite::{CounterSnapshot, ProblemSetup};
use crate::error::{Error, Result};
use crate::optical::CoefficientPair;

/// Scores an iterate as `(RE(μ), RE(κ))` in percent.
pub type Monitor<'a> = dyn Fn(&CoefficientPair) -> (f64, f64) + 'a;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub epsilon: f64,
    pub re_mu: f64,
    pub re_kappa: f64,
    pub inner_iterations: usize,
    pub seconds: f64,
    pub acoustic_forward: usize,
    pub acoustic_adjoint: usize,
    /// False for an outer step that was evaluated and then discarded.
    pub accepted: bool,
    /// Largest `|χ_j|` seen during the iteration (primal-dual only).
    pub max_dual: f64,
}

/// Append-only record of a driver run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<IterationRecord>,
    pub warnings: Vec<String>,
}

impl SolveTrace {
    pub fn accepted(&self) -> impl Iterator<Item = &IterationRecord> {
        self.records.iter().filter(|r| r.accepted)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.records {
            wr.serialize(r).map_err(|e| Error::config(format!("trace serialisation: {e}")))?;
        }
        wr.flush().map_err(|e| Error::config(format!("trace serialisation: {e}")))?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> std::result::Result<Self, String> {
        let mut rd = csv::Reader::from_reader(r);
        let records = rd
            .deserialize()
            .collect::<std::result::Result<Vec<IterationRecord>, _>>()
            .map_err(|e| e.to_string())?;
        Ok(SolveTrace {
            records,
            warnings: Vec::new(),
        })
    }
}

/// Shared bookkeeping for the drivers.
pub(crate) struct Recorder<'a> {
    pub trace: SolveTrace,
    monitor: Option<&'a Monitor<'a>>,
    start: Instant,
    timing: bool,
    base: CounterSnapshot,
}

impl<'a> Recorder<'a> {
    pub fn new(setup: &ProblemSetup, monitor: Option<&'a Monitor<'a>>, timing: bool) -> Self {
        Recorder {
            trace: SolveTrace::default(),
            monitor,
            start: Instant::now(),
            timing,
            base: setup.counters.snapshot(),
        }
    }

    pub fn record(
        &mut self,
        setup: &ProblemSetup,
        iteration: usize,
        epsilon: f64,
        coeffs: &CoefficientPair,
        inner_iterations: usize,
        accepted: bool,
        max_dual: f64,
    ) {
        let (re_mu, re_kappa) = self.monitor.map(|m| m(coeffs)).unwrap_or((f64::NAN, f64::NAN));
        let used = setup.counters.snapshot() - self.base;
        self.trace.records.push(IterationRecord {
            iteration,
            epsilon,
            re_mu,
            re_kappa,
            inner_iterations,
            seconds: if self.timing { self.start.elapsed().as_secs_f64() } else { 0.0 },
            acoustic_forward: used.acoustic_forward,
            acoustic_adjoint: used.acoustic_adjoint,
            accepted,
            max_dual,
        });
    }

    pub fn warn(&mut self, msg: String) {
        self.trace.warnings.push(msg);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut t = SolveTrace::default();
        for k in 0..3 {
            t.records.push(IterationRecord {
                iteration: k,
                epsilon: 1.0 / (k + 1) as f64,
                re_mu: 10.5,
                re_kappa: f64::NAN,
                inner_iterations: 7,
                seconds: 0.0,
                acoustic_forward: 4 * k,
                acoustic_adjoint: 4 * k,
                accepted: k != 2,
                max_dual: 0.5,
            });
        }
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("iteration,epsilon,re_mu,re_kappa,inner_iterations,seconds"));
        let back = SolveTrace::read_csv(&buf[..]).unwrap();
        assert_eq!(back.records.len(), 3);
        assert_eq!(back.records[1].epsilon, 0.5);
        assert!(back.records[0].re_kappa.is_nan());
        assert!(!back.records[2].accepted);
    }
}
