use std::io::Write;

use crate::error::{Error, Result};

pub const STATS_HEADER: [&str; 7] = ["step", "t", "dt", "eta", "c_iters", "schur_iters", "div_norm"];

/// Per-step solver statistics. `eta` is empty for schemes without an error
/// estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub eta: Option<f64>,
    pub c_iters: usize,
    pub schur_iters: usize,
    pub div_norm: f64,
}

impl StepRecord {
    fn fields(&self) -> [String; 7] {
        [
            self.step.to_string(),
            format!("{:e}", self.t),
            format!("{:e}", self.dt),
            self.eta.map(|e| format!("{e:e}")).unwrap_or_default(),
            self.c_iters.to_string(),
            self.schur_iters.to_string(),
            format!("{:e}", self.div_norm),
        ]
    }

    /// Parses one data row of a stats file.
    pub fn parse(fields: &[&str]) -> Result<Self> {
        let bad = |what: &str| Error::Config(format!("malformed stats field '{what}'"));
        if fields.len() != STATS_HEADER.len() {
            return Err(bad(&fields.join(",")));
        }
        let f = |i: usize| fields[i].parse::<f64>().map_err(|_| bad(fields[i]));
        let n = |i: usize| fields[i].parse::<usize>().map_err(|_| bad(fields[i]));
        Ok(StepRecord {
            step: fields[0].parse().map_err(|_| bad(fields[0]))?,
            t: f(1)?,
            dt: f(2)?,
            eta: if fields[3].is_empty() { None } else { Some(f(3)?) },
            c_iters: n(4)?,
            schur_iters: n(5)?,
            div_norm: f(6)?,
        })
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

/// CSV writer for [`StepRecord`]s; the header goes out on construction.
pub struct StatsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> StatsWriter<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(STATS_HEADER).map_err(csv_err)?;
        Ok(StatsWriter { inner })
    }

    /// Continues an existing file without repeating the header.
    pub fn resume(w: W) -> Self {
        StatsWriter { inner: csv::Writer::from_writer(w) }
    }

    pub fn write(&mut self, r: &StepRecord) -> Result<()> {
        self.inner.write_record(r.fields()).map_err(csv_err)?;
        self.inner.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.inner.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}
