use std::io::Write;
use std::path::Path;

use crate::error::{CliError, CliResult};

pub const HEADER: [&str; 12] = [
    "task",
    "snr_db",
    "method",
    "scheme",
    "L",
    "T",
    "U",
    "n_symbols",
    "errors",
    "ser_or_nmse",
    "wall_ns_per_symbol",
    "seed",
];

/// One CSV line. `snr_db` is empty for tasks without an SNR axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub task: String,
    pub snr_db: Option<f64>,
    pub method: String,
    pub scheme: String,
    pub levels: usize,
    pub t_inner: usize,
    pub trajectories: usize,
    pub n_symbols: u64,
    pub errors: u64,
    pub ser_or_nmse: f64,
    pub wall_ns_per_symbol: f64,
    pub seed: u64,
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

impl ResultRow {
    fn record(&self) -> [String; 12] {
        [
            self.task.clone(),
            self.snr_db.map(format_float).unwrap_or_default(),
            self.method.clone(),
            self.scheme.clone(),
            self.levels.to_string(),
            self.t_inner.to_string(),
            self.trajectories.to_string(),
            self.n_symbols.to_string(),
            self.errors.to_string(),
            format_float(self.ser_or_nmse),
            format_float(self.wall_ns_per_symbol),
            self.seed.to_string(),
        ]
    }

    fn from_record(r: &csv::StringRecord) -> CliResult<Self> {
        let bad = |what: &str| CliError::Config(format!("malformed `{what}` in result row"));
        let field = |i: usize| r.get(i).ok_or_else(|| bad(HEADER[i]));
        let num = |i: usize| field(i)?.parse::<u64>().map_err(|_| bad(HEADER[i]));
        let float = |i: usize| field(i)?.parse::<f64>().map_err(|_| bad(HEADER[i]));
        Ok(Self {
            task: field(0)?.to_string(),
            snr_db: if field(1)?.is_empty() {
                None
            } else {
                Some(float(1)?)
            },
            method: field(2)?.to_string(),
            scheme: field(3)?.to_string(),
            levels: num(4)? as usize,
            t_inner: num(5)? as usize,
            trajectories: num(6)? as usize,
            n_symbols: num(7)?,
            errors: num(8)?,
            ser_or_nmse: float(9)?,
            wall_ns_per_symbol: float(10)?,
            seed: num(11)?,
        })
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], w: W) -> CliResult<()> {
    let mut wr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(w);
    wr.write_record(HEADER)?;
    for row in rows {
        wr.write_record(row.record())?;
    }
    wr.flush()?;
    Ok(())
}

/// Header plus rows at `path`.
pub fn emit_csv(rows: &[ResultRow], path: &Path) -> CliResult<()> {
    let file = std::fs::File::create(path)?;
    write_csv(rows, std::io::BufWriter::new(file))
}

pub fn read_csv(path: &Path) -> CliResult<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rd.records() {
        out.push(ResultRow::from_record(&rec?)?);
    }
    Ok(out)
}
