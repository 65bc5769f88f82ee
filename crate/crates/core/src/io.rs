//! Problem files (JSON), trace tables (CSV) and the full-trace sidecar (JSON).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::broyden::record_step;
use crate::driver::{StepDetail, StepRecord, StepType};
use crate::error::{CoreError, Result};
use crate::generate::{GeneratedInstance, InstanceKind};
use crate::kkt::newton_rhs;
use crate::lp::{Direction, IteratePoint, Problem};
use crate::neighborhood::Proximity;

pub const FORMAT_VERSION: u32 = 1;

pub const TRACE_HEADER: [&str; 14] = [
    "k",
    "step_type",
    "alpha",
    "sigma",
    "mu_before",
    "mu_after",
    "prox_n2",
    "ns_min_ratio",
    "ns_max_ratio",
    "norm_rb",
    "norm_rc",
    "nu",
    "gamma1",
    "dx_dot_dz",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFile {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub z: Vec<f64>,
}

impl From<&IteratePoint> for PointFile {
    fn from(p: &IteratePoint) -> Self {
        Self { x: p.x.as_slice().to_vec(), lambda: p.lambda.as_slice().to_vec(), z: p.z.as_slice().to_vec() }
    }
}

impl PointFile {
    pub fn to_point(&self, n: usize, m: usize) -> Result<IteratePoint> {
        if self.x.len() != n || self.z.len() != n || self.lambda.len() != m {
            return Err(CoreError::Dimension(format!(
                "stored point has lengths ({}, {}, {}), expected ({n}, {m}, {n})",
                self.x.len(),
                self.lambda.len(),
                self.z.len()
            )));
        }
        IteratePoint::new(
            DVector::from_vec(self.x.clone()),
            DVector::from_vec(self.lambda.clone()),
            DVector::from_vec(self.z.clone()),
        )
    }
}

/// On-disk problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub format_version: u32,
    pub m: usize,
    pub n: usize,
    /// Rows of the constraint matrix.
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimal: Option<PointFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub central_start: Option<PointFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ProblemFile {
    pub fn from_problem(p: &Problem) -> Self {
        let a = (0..p.m()).map(|i| p.a().row(i).iter().copied().collect()).collect();
        Self {
            format_version: FORMAT_VERSION,
            m: p.m(),
            n: p.n(),
            a,
            b: p.b().as_slice().to_vec(),
            c: p.c().as_slice().to_vec(),
            kind: None,
            optimal: None,
            central_start: None,
            xi: None,
            seed: None,
        }
    }

    pub fn from_instance(g: &GeneratedInstance) -> Self {
        let mut f = Self::from_problem(&g.problem);
        f.kind = Some(match g.kind {
            InstanceKind::Centered => "centered".into(),
            InstanceKind::Solved => "solved".into(),
        });
        f.optimal = g.optimal.as_ref().map(PointFile::from);
        f.central_start = g.central_start.as_ref().map(PointFile::from);
        f.xi = g.xi;
        f.seed = Some(g.seed);
        f
    }

    pub fn to_problem(&self) -> Result<Problem> {
        if self.format_version != FORMAT_VERSION {
            return Err(CoreError::Parse(format!("unsupported format_version {}", self.format_version)));
        }
        if self.a.len() != self.m || self.a.iter().any(|r| r.len() != self.n) {
            return Err(CoreError::Dimension(format!("A does not have shape {}x{}", self.m, self.n)));
        }
        let flat: Vec<f64> = self.a.iter().flatten().copied().collect();
        Problem::new(
            DMatrix::from_row_slice(self.m, self.n, &flat),
            DVector::from_vec(self.b.clone()),
            DVector::from_vec(self.c.clone()),
        )
    }

    pub fn central_start(&self) -> Result<Option<IteratePoint>> {
        self.central_start.as_ref().map(|p| p.to_point(self.n, self.m)).transpose()
    }

    pub fn optimal(&self) -> Result<Option<IteratePoint>> {
        self.optimal.as_ref().map(|p| p.to_point(self.n, self.m)).transpose()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| CoreError::Io(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_reader(BufReader::new(f))?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path).map_err(|e| CoreError::Io(format!("{}: {e}", path.display())))?);
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the trace table; floats carry 17 significant digits.
pub fn write_trace<W: Write>(out: W, records: &[StepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in records {
        w.write_record([
            r.k.to_string(),
            r.step_type.code().to_string(),
            fmt_f64(r.alpha),
            fmt_f64(r.sigma),
            fmt_f64(r.mu_before),
            fmt_f64(r.mu_after),
            fmt_f64(r.prox.n2),
            fmt_f64(r.prox.ns_min),
            fmt_f64(r.prox.ns_max),
            fmt_f64(r.norm_rb),
            fmt_f64(r.norm_rc),
            fmt_f64(r.nu),
            r.gamma1.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.dx_dot_dz),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_f64(field: &str, name: &str, line: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| CoreError::Parse(format!("row {line}: bad {name} value '{field}'")))
}

/// Reads a trace table. Direction-dependent fields stay empty until a sidecar is attached.
pub fn read_trace<R: Read>(input: R) -> Result<Vec<StepRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(CoreError::Parse(format!(
            "trace header must be {}, found {}",
            TRACE_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out: Vec<StepRecord> = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let f = |j: usize| parse_f64(&row[j], TRACE_HEADER[j], line);
        let k = row[0].trim().parse::<usize>().map_err(|_| CoreError::Parse(format!("row {line}: bad k")))?;
        let step_type = match row[1].trim() {
            "N" => StepType::Newton,
            "Q" => StepType::QuasiNewton,
            other => return Err(CoreError::Parse(format!("row {line}: unknown step type '{other}'"))),
        };
        let ell = match step_type {
            StepType::Newton => 0,
            StepType::QuasiNewton => out.last().map_or(1, |p| p.ell + 1),
        };
        let mu_before = f(4)?;
        out.push(StepRecord {
            k,
            step_type,
            ell,
            alpha: f(2)?,
            sigma: f(3)?,
            mu_before,
            mu_after: f(5)?,
            prox: Proximity { mu: mu_before, n2: f(6)?, ns_min: f(7)?, ns_max: f(8)? },
            norm_rb: f(9)?,
            norm_rc: f(10)?,
            nu: f(11)?,
            gamma1: if row[12].trim().is_empty() { None } else { Some(f(12)?) },
            dx_dot_dz: f(13)?,
            dx_norm: None,
            dz_norm: None,
            secant_norm: None,
            rhs_norm: None,
            detail: None,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullStep {
    pub k: usize,
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub z: Vec<f64>,
    pub dx: Vec<f64>,
    pub dlambda: Vec<f64>,
    pub dz: Vec<f64>,
}

/// Points and directions of every step, stored next to the trace table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullTrace {
    pub format_version: u32,
    pub n: usize,
    pub m: usize,
    pub steps: Vec<FullStep>,
}

impl FullTrace {
    /// Collects the details of `records`; `None` if any record lacks them.
    pub fn from_records(n: usize, m: usize, records: &[StepRecord]) -> Option<Self> {
        let steps = records
            .iter()
            .map(|r| {
                r.detail.as_ref().map(|d| FullStep {
                    k: r.k,
                    x: d.point.x.as_slice().to_vec(),
                    lambda: d.point.lambda.as_slice().to_vec(),
                    z: d.point.z.as_slice().to_vec(),
                    dx: d.direction.dx.as_slice().to_vec(),
                    dlambda: d.direction.dlambda.as_slice().to_vec(),
                    dz: d.direction.dz.as_slice().to_vec(),
                })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Self { format_version: FORMAT_VERSION, n, m, steps })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| CoreError::Io(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_reader(BufReader::new(f))?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path).map_err(|e| CoreError::Io(format!("{}: {e}", path.display())))?);
        serde_json::to_writer(&mut w, self)?;
        w.flush()?;
        Ok(())
    }
}

/// Default location of the sidecar belonging to a trace table.
pub fn full_sidecar_path(trace: &Path) -> PathBuf {
    let mut s = trace.as_os_str().to_owned();
    s.push(".full.json");
    PathBuf::from(s)
}

/// Restores points, directions and the norms derived from them into records read from a table.
pub fn attach_full(problem: &Problem, records: &mut [StepRecord], full: &FullTrace) -> Result<()> {
    let (n, m) = (problem.n(), problem.m());
    if full.n != n || full.m != m {
        return Err(CoreError::TraceMismatch(format!(
            "sidecar is for m = {}, n = {} but the problem has m = {m}, n = {n}",
            full.m, full.n
        )));
    }
    if full.steps.len() != records.len() {
        return Err(CoreError::TraceMismatch(format!(
            "sidecar has {} steps but the table has {} rows",
            full.steps.len(),
            records.len()
        )));
    }
    for (r, s) in records.iter_mut().zip(&full.steps) {
        if s.k != r.k {
            return Err(CoreError::TraceMismatch(format!("sidecar step {} lines up with table row {}", s.k, r.k)));
        }
        let point = PointFile { x: s.x.clone(), lambda: s.lambda.clone(), z: s.z.clone() }
            .to_point(n, m)
            .map_err(|e| CoreError::TraceMismatch(e.to_string()))?;
        let direction = PointFile { x: s.dx.clone(), lambda: s.dlambda.clone(), z: s.dz.clone() }
            .to_point(n, m)
            .map_err(|e| CoreError::TraceMismatch(e.to_string()))?;
        let direction = Direction { dx: direction.x, dlambda: direction.lambda, dz: direction.z };
        r.dx_norm = Some(direction.dx.norm());
        r.dz_norm = Some(direction.dz.norm());
        r.detail = Some(StepDetail { point, direction });
    }
    for i in 0..records.len() {
        if records[i].step_type != StepType::QuasiNewton {
            continue;
        }
        let here = records[i].detail.as_ref().expect("attached above");
        let rhs = newton_rhs(problem, &here.point, records[i].sigma)?.norm();
        let secant = if i > 0 {
            let prev = records[i - 1].detail.as_ref().expect("attached above");
            match record_step(problem, &prev.point, &here.point, &prev.direction, records[i - 1].alpha) {
                Ok(p) => Some(p.rho.sqrt()),
                Err(_) => None,
            }
        } else {
            None
        };
        records[i].rhs_norm = Some(rhs);
        records[i].secant_norm = secant;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::generate_solved;

    #[test]
    fn problem_file_round_trips_exactly() {
        let g = generate_solved(5, 2, 99).unwrap();
        let f = ProblemFile::from_instance(&g);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        f.write(&path).unwrap();
        let back = ProblemFile::read(&path).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_problem().unwrap(), g.problem);
        assert_eq!(back.optimal().unwrap(), g.optimal);
    }

    #[test]
    fn rejects_wrong_version_and_shape() {
        let g = generate_solved(4, 1, 1).unwrap();
        let mut f = ProblemFile::from_instance(&g);
        f.format_version = 2;
        assert!(f.to_problem().is_err());
        f.format_version = 1;
        f.a[0].pop();
        assert!(matches!(f.to_problem(), Err(CoreError::Dimension(_))));
    }

    #[test]
    fn empty_trace_has_only_the_header() {
        let mut buf = Vec::new();
        write_trace(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap().trim(), TRACE_HEADER.join(","));
        assert!(read_trace(buf.as_slice()).unwrap().is_empty());
    }

    #[test]
    fn bad_header_is_rejected() {
        let text = "k,step_type\n0,N\n";
        assert!(matches!(read_trace(text.as_bytes()), Err(CoreError::Parse(_))));
    }
}
