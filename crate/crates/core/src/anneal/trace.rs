use std::io::Write;

use serde::{Deserialize, Serialize};

/// State at the end of one equilibrium loop (before cooling).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based outer iteration.
    pub iteration: usize,
    pub energy: f64,
    pub kinetic: f64,
    pub temperature: f64,
    pub accepts: usize,
    pub rejects: usize,
    pub best_energy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnealTrace {
    pub records: Vec<IterationRecord>,
}

impl AnnealTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// Number of candidates drawn over the whole run.
    pub fn candidate_count(&self) -> usize {
        self.records.iter().map(|r| r.accepts + r.rejects).sum()
    }

    pub fn accept_count(&self) -> usize {
        self.records.iter().map(|r| r.accepts).sum()
    }

    /// CSV with columns `iteration,energy,kinetic,temperature,accepts,rejects`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "iteration",
            "energy",
            "kinetic",
            "temperature",
            "accepts",
            "rejects",
        ])?;
        for r in &self.records {
            w.serialize((
                r.iteration,
                r.energy,
                r.kinetic,
                r.temperature,
                r.accepts,
                r.rejects,
            ))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}
