//! CSV formats: distributions (`k,p`), coefficients (`k,a`), kernel rows
//! (`i,j,T`) and trajectories.
//!
//! Floats are written with the shortest representation that parses back to
//! the same value, so files round-trip bit for bit.

use std::io::{Read, Write};

use crate::dynamics::Trajectory;
use crate::error::{Result, UcError};
use crate::genfunc::CoeffVector;
use crate::kernel::KernelQ;
use crate::measure::{Distribution, DEFAULT_LEAK_THRESHOLD, INPUT_TOLERANCE};

/// Reads a `k,p` table. Rows must have strictly increasing `k`; missing
/// copy numbers are zero. A mass deficit up to the default leak threshold
/// is taken as truncation tail.
pub fn read_distribution<R: Read>(reader: R) -> Result<Distribution> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "k" || &headers[1] != "p" {
        return Err(UcError::Format(format!(
            "expected header `k,p`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut values: Vec<f64> = Vec::new();
    for (line, record) in csv.records().enumerate() {
        let record = record?;
        let k: usize = record[0]
            .parse()
            .map_err(|_| UcError::Format(format!("row {}: bad copy number `{}`", line + 1, &record[0])))?;
        let p: f64 = record[1]
            .parse()
            .map_err(|_| UcError::Format(format!("row {}: bad probability `{}`", line + 1, &record[1])))?;
        if k < values.len() {
            return Err(UcError::Format(format!(
                "row {}: copy numbers must increase (k = {k})",
                line + 1
            )));
        }
        values.resize(k, 0.0);
        values.push(p);
    }
    let deficit = 1.0 - values.iter().sum::<f64>();
    let tail = if deficit > INPUT_TOLERANCE && deficit <= DEFAULT_LEAK_THRESHOLD {
        deficit
    } else {
        0.0
    };
    Distribution::with_tail(values, tail)
}

pub fn write_distribution<W: Write>(writer: W, p: &Distribution) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["k", "p"])?;
    for (k, v) in p.values().iter().enumerate() {
        csv.write_record([k.to_string(), v.to_string()])?;
    }
    csv.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_coeffs<W: Write>(writer: W, a: &CoeffVector) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["k", "a"])?;
    for (k, v) in a.values().iter().enumerate() {
        csv.write_record([k.to_string(), v.to_string()])?;
    }
    csv.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// All outcomes `(i, k + l - i)` of the pair `(k, l)`.
pub fn write_kernel_row<W: Write>(writer: W, kernel: &KernelQ, k: usize, l: usize) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["i", "j", "T"])?;
    for (i, t) in kernel.row(k, l).iter().enumerate() {
        csv.write_record([i.to_string(), (k + l - i).to_string(), t.to_string()])?;
    }
    csv.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Monitored functionals, one row per sample; `tv_to_target` is empty
/// when no target was given.
pub fn write_trajectory<W: Write>(writer: W, trajectory: &Trajectory) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["t", "mean", "M1", "Mr", "tv_to_target", "tail_mass"])?;
    for s in &trajectory.samples {
        csv.write_record([
            s.t.to_string(),
            s.mean.to_string(),
            s.m1.to_string(),
            s.mr.to_string(),
            s.tv_to_target.map(|v| v.to_string()).unwrap_or_default(),
            s.tail_mass.to_string(),
        ])?;
    }
    csv.flush().map_err(csv::Error::from)?;
    Ok(())
}
