//! JSON ensemble specs and the binary matrix format (little-endian f64,
//! interleaved `(re, im)`, row-major) with its JSON sidecar.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sample::{EnsembleSpec, MatrixSample};
use super::truncate::TruncationInfo;
use crate::{CMat, Error, Result, C64};

pub const MATRIX_FORMAT: &str = "f64le-interleaved-row-major";

pub fn read_spec(path: &Path) -> Result<EnsembleSpec> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_spec(path: &Path, spec: &EnsembleSpec) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(spec)? + "\n")?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixSidecar {
    pub format: String,
    pub n: usize,
    pub seed: u64,
    pub trial_index: u64,
    pub factor: u64,
    pub degree: usize,
    pub scale: f64,
    pub spec: EnsembleSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<TruncationInfo>,
}

impl MatrixSidecar {
    pub fn of(sample: &MatrixSample) -> Self {
        Self {
            format: MATRIX_FORMAT.to_string(),
            n: sample.n,
            seed: sample.seed,
            trial_index: sample.trial_index,
            factor: sample.factor,
            degree: sample.degree,
            scale: sample.scale,
            spec: sample.spec.clone(),
            truncation: sample.truncation.clone(),
        }
    }
}

pub fn write_matrix_bin<W: Write>(out: W, m: &CMat) -> Result<()> {
    let mut out = BufWriter::new(out);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            out.write_all(&v.re.to_le_bytes())?;
            out.write_all(&v.im.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_matrix_bin<R: Read>(input: R, n: usize) -> Result<CMat> {
    let mut input = BufReader::new(input);
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != n * n * 16 {
        return Err(Error::DimensionMismatch(format!(
            "matrix file has {} bytes, expected {} for n = {n}",
            bytes.len(),
            n * n * 16
        )));
    }
    let word = |k: usize| f64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
    Ok(CMat::from_fn(n, n, |i, j| {
        let k = 2 * (i * n + j);
        C64::new(word(k), word(k + 1))
    }))
}

/// Writes `<stem>.bin` and `<stem>.json` next to each other.
pub fn save_sample(stem: &Path, sample: &MatrixSample) -> Result<()> {
    write_matrix_bin(
        fs::File::create(stem.with_extension("bin"))?,
        &sample.entries,
    )?;
    let sidecar = serde_json::to_string_pretty(&MatrixSidecar::of(sample))?;
    fs::write(stem.with_extension("json"), sidecar + "\n")?;
    Ok(())
}

pub fn load_sample(stem: &Path) -> Result<MatrixSample> {
    let sidecar: MatrixSidecar =
        serde_json::from_str(&fs::read_to_string(stem.with_extension("json"))?)?;
    if sidecar.format != MATRIX_FORMAT {
        return Err(Error::InvalidArgument(format!(
            "unknown matrix format {}",
            sidecar.format
        )));
    }
    let entries = read_matrix_bin(fs::File::open(stem.with_extension("bin"))?, sidecar.n)?;
    Ok(MatrixSample {
        n: sidecar.n,
        entries,
        seed: sidecar.seed,
        trial_index: sidecar.trial_index,
        factor: sidecar.factor,
        spec: sidecar.spec,
        degree: sidecar.degree,
        scale: sidecar.scale,
        truncation: sidecar.truncation,
    })
}
