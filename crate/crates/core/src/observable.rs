//! Observables, expectation values and the trajectory record shared by the
//! circuit simulator and the master-equation oracle.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMatrix, SparseOp};

#[derive(Clone, Debug)]
pub struct Observable {
    pub name: String,
    pub op: SparseOp,
}

impl Observable {
    pub fn new(name: impl Into<String>, op: SparseOp) -> Result<Self> {
        if op.hermiticity_error() > 1e-12 {
            return invalid("observable must be Hermitian");
        }
        Ok(Observable { name: name.into(), op })
    }

    /// Local operator on a subset of sites of a product space.
    pub fn local(name: impl Into<String>, local: &CMatrix, sites: &[usize], dims: &[usize]) -> Result<Self> {
        Self::new(name, SparseOp::embed(local, sites, dims))
    }

    pub fn on_qubits(name: impl Into<String>, local: &CMatrix, qubits: &[usize], n: usize) -> Result<Self> {
        Self::local(name, local, qubits, &vec![2; n])
    }

    pub fn expectation(&self, rho: &CMatrix) -> Result<f64> {
        let v = self.op.trace_with(rho);
        if v.im.abs() > 1e-10 {
            return Err(Error::Invariant(format!("⟨{}⟩ has imaginary part {:.3e}", self.name, v.im)));
        }
        Ok(v.re)
    }
}

/// Tr(Oρ) for a dense Hermitian observable.
pub fn expectation(rho: &CMatrix, observable: &CMatrix) -> Result<f64> {
    if linalg::hermiticity_error(observable) > 1e-12 {
        return invalid("observable must be Hermitian");
    }
    let v = (observable * rho).trace();
    if v.im.abs() > 1e-10 {
        return Err(Error::Invariant(format!("expectation has imaginary part {:.3e}", v.im)));
    }
    Ok(v.re)
}

/// Worst-case invariant measurements collected along a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub positivity_checks: usize,
    /// eigenvalue that failed a positivity checkpoint; stays 0 while every
    /// checkpoint passes the shifted-Cholesky test
    pub min_eigenvalue: f64,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Diagnostics { max_trace_error: 0.0, max_hermiticity_error: 0.0, positivity_checks: 0, min_eigenvalue: 0.0 }
    }
}

impl Diagnostics {
    /// Records trace and Hermiticity of a state; positivity when `check_positivity`.
    pub fn record(&mut self, rho: &CMatrix, check_positivity: bool, positivity_tol: f64) -> Result<()> {
        let tr = linalg::trace(rho);
        self.max_trace_error = self.max_trace_error.max((tr - 1.0).norm());
        self.max_hermiticity_error = self.max_hermiticity_error.max(linalg::hermiticity_error(rho));
        if check_positivity {
            self.positivity_checks += 1;
            if !linalg::is_psd_within(rho, positivity_tol) {
                let ev = linalg::min_eigenvalue(rho);
                self.min_eigenvalue = self.min_eigenvalue.min(ev);
                return Err(Error::Invariant(format!("density matrix has eigenvalue {ev:.3e}")));
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &Diagnostics) {
        self.max_trace_error = self.max_trace_error.max(other.max_trace_error);
        self.max_hermiticity_error = self.max_hermiticity_error.max(other.max_hermiticity_error);
        self.positivity_checks += other.positivity_checks;
        self.min_eigenvalue = self.min_eigenvalue.min(other.min_eigenvalue);
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    /// values[k][o]: observable o at times[k]
    pub values: Vec<Vec<f64>>,
    pub states: Option<Vec<CMatrix>>,
    pub diagnostics: Diagnostics,
}

impl Trajectory {
    pub fn new(names: Vec<String>) -> Self {
        Trajectory { times: Vec::new(), names, values: Vec::new(), states: None, diagnostics: Diagnostics::default() }
    }

    pub fn push(&mut self, t: f64, row: Vec<f64>) {
        self.times.push(t);
        self.values.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.names.iter().position(|n| n == name)?;
        Some(self.values.iter().map(|r| r[idx]).collect())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with header `t,<name>,...` and 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend(self.names.iter().cloned());
        wr.write_record(&header)?;
        for (t, row) in self.times.iter().zip(&self.values) {
            let mut rec = vec![format_float(*t)];
            rec.extend(row.iter().map(|v| format_float(*v)));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.is_empty() || &headers[0] != "t" {
            return Err(Error::Parse("trajectory CSV must start with a `t` column".into()));
        }
        let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut traj = Trajectory::new(names);
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            if rec.len() != headers.len() {
                return Err(Error::Parse(format!("row {i}: expected {} columns", headers.len())));
            }
            let nums: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            let nums = nums.map_err(|e| Error::Parse(format!("row {i}: {e}")))?;
            traj.push(nums[0], nums[1..].to_vec());
        }
        if traj.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parse("time column must be strictly increasing".into()));
        }
        Ok(traj)
    }
}

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, sigma_x, sigma_y, sigma_z};

    #[test]
    fn expectation_examples() {
        let ground = linalg::ground_projector();
        assert_eq!(expectation(&ground, &linalg::identity(2)).unwrap(), 1.0);
        assert_eq!(expectation(&ground, &sigma_z()).unwrap(), 1.0);
        let plus = CMatrix::from_element(2, 2, c(0.5, 0.0));
        assert!((expectation(&plus, &sigma_x()).unwrap() - 1.0).abs() < 1e-15);
        assert!(expectation(&plus, &linalg::sigma_minus()).is_err());
    }

    #[test]
    fn sparse_observable_matches_dense() {
        let rho = CMatrix::from_fn(4, 4, |i, j| if i == j { c(0.25, 0.0) } else { c(0.01 * (i + j) as f64, 0.02 * (i as f64 - j as f64)) });
        let o = Observable::on_qubits("y1", &sigma_y(), &[1], 2).unwrap();
        let dense = linalg::embed_qubits(&sigma_y(), &[1], 2);
        let a = o.expectation(&rho).unwrap();
        let b = expectation(&rho, &dense).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn csv_roundtrip_is_lossless() {
        let mut t = Trajectory::new(vec!["sx".into(), "n".into()]);
        t.push(0.0, vec![1.0, 0.1]);
        t.push(0.1, vec![std::f64::consts::PI, 1.0 / 3.0]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = Trajectory::read_csv(&buf[..]).unwrap();
        assert_eq!(back.times, t.times);
        assert_eq!(back.values, t.values);
        assert_eq!(back.names, t.names);
        assert!(String::from_utf8(buf).unwrap().starts_with("t,sx,n\n"));
    }
}
