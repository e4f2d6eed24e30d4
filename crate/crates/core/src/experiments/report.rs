use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SweepResult;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 17] = [
    "sweep_id",
    "tau",
    "sigma_L",
    "sigma_eta",
    "n",
    "r",
    "replicates",
    "success_rate",
    "n_care_failed",
    "n_overflow",
    "n_unstable",
    "err_mean",
    "err_median",
    "err_q25",
    "err_q75",
    "abscissa_median",
    "seed",
];

/// One CSV row per grid point.
///
/// `abscissa_median` is the median spectral abscissa of the sampled closed
/// loop `Â + B̂K̂` over replicates where a gain was synthesized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub sweep_id: String,
    pub tau: f64,
    #[serde(rename = "sigma_L")]
    pub sigma_l: f64,
    pub sigma_eta: f64,
    pub n: usize,
    pub r: f64,
    pub replicates: usize,
    pub success_rate: f64,
    pub n_care_failed: usize,
    pub n_overflow: usize,
    pub n_unstable: usize,
    pub err_mean: f64,
    pub err_median: f64,
    pub err_q25: f64,
    pub err_q75: f64,
    pub abscissa_median: f64,
    pub seed: u64,
}

impl From<&SweepResult> for CsvRow {
    fn from(r: &SweepResult) -> Self {
        CsvRow {
            sweep_id: r.sweep_id.clone(),
            tau: r.point.tau,
            sigma_l: r.point.sigma_l,
            sigma_eta: r.point.sigma_eta,
            n: r.point.n,
            r: r.point.r,
            replicates: r.replicates,
            success_rate: r.success_rate,
            n_care_failed: r.n_care_failed,
            n_overflow: r.n_overflow,
            n_unstable: r.n_unstable,
            err_mean: r.error.mean,
            err_median: r.error.median,
            err_q25: r.error.q25,
            err_q75: r.error.q75,
            abscissa_median: r.sampled_abscissa.median,
            seed: r.seed,
        }
    }
}

/// Writes the sweep table to any writer.
pub fn write_csv_to<W: Write>(results: &[SweepResult], out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in results {
        w.serialize(CsvRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(results: &[SweepResult], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(results, file).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<CsvRow>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::io(path, e))?;
    let header = rdr.headers().map_err(|e| Error::io(path, e))?.clone();
    if !header.iter().eq(CSV_HEADER) {
        return Err(Error::io(path, "unexpected CSV header"));
    }
    rdr.deserialize()
        .collect::<std::result::Result<Vec<CsvRow>, _>>()
        .map_err(|e| Error::io(path, e))
}
