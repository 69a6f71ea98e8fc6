//! On-disk formats for point maps, functional maps, soft maps, loss reports,
//! adaptation traces and evaluation results.
//!
//! Binary functional map layout (little endian):
//!
//! ```text
//! "FMAP" | u32 version | u64 k_y | u64 k_x | u8 provenance | k_y·k_x f64, row-major
//! ```
//!
//! Binary soft map layout:
//!
//! ```text
//! "FMSM" | u32 version | u64 n_y | u64 n_x | u8 kind
//!   kind 0 (dense): n_y·n_x f64, row-major
//!   kind 1 (top-t): u64 t | n_y·t u64 indices | n_y·t f64 weights
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use fmapkit_core::adapt::TraceEntry;
use fmapkit_core::conversion::{PointMap, SoftMap};
use fmapkit_core::eval::EvalResult;
use fmapkit_core::fmap::{FunctionalMap, Provenance};
use fmapkit_core::losses::LossReport;
use fmapkit_core::Mat;
use serde::{Deserialize, Serialize};

use crate::mesh_io::write_atomic;
use crate::{Error, Result};

const FMAP_MAGIC: &[u8; 4] = b"FMAP";
const SOFT_MAGIC: &[u8; 4] = b"FMSM";
const FORMAT_VERSION: u32 = 1;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// One target index per line, line `i` holding the X vertex matched to Y
/// vertex `i`.
pub fn write_pointmap(targets: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::with_capacity(targets.len() * 6);
    for t in targets {
        writeln!(out, "{t}").expect("writing to a String");
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

pub fn read_pointmap(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("invalid vertex index '{}'", l.trim())))
        })
        .collect()
}

/// Reads a point map and checks it against the mesh sizes.
pub fn read_pointmap_checked(path: impl AsRef<Path>, n_y: usize, n_x: usize) -> Result<PointMap> {
    let path = path.as_ref();
    let targets = read_pointmap(path)?;
    if targets.len() != n_y {
        return Err(Error::Validation(format!(
            "{}: {} entries but the target mesh has {n_y} vertices",
            path.display(),
            targets.len()
        )));
    }
    Ok(PointMap::hard(targets, n_x)?)
}

pub fn write_matrix_csv(m: &Mat, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::with_capacity(m.rows() * m.cols() * 24);
    for i in 0..m.rows() {
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v:?}").expect("writing to a String");
        }
        out.push('\n');
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Mat> {
    let path = path.as_ref();
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, line) in read_text(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let values = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(path, i + 1, format!("invalid number '{}'", t.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        match cols {
            None => cols = Some(values.len()),
            Some(c) if c != values.len() => {
                return Err(Error::parse(path, i + 1, format!("expected {c} columns, found {}", values.len())));
            }
            _ => {}
        }
        data.extend(values);
        rows += 1;
    }
    Ok(Mat::from_vec(rows, cols.unwrap_or(0), data))
}

pub fn write_fmap_csv(c: &FunctionalMap, path: impl AsRef<Path>) -> Result<()> {
    write_matrix_csv(c.matrix(), path)
}

pub fn read_fmap_csv(path: impl AsRef<Path>, provenance: Provenance) -> Result<FunctionalMap> {
    Ok(FunctionalMap::new(read_matrix_csv(path)?, provenance)?)
}

fn provenance_code(p: Provenance) -> u8 {
    match p {
        Provenance::Solved => 0,
        Provenance::ConvertedFromPointwise => 1,
    }
}

pub fn encode_fmap(c: &FunctionalMap) -> Vec<u8> {
    let m = c.matrix();
    let mut out = Vec::with_capacity(25 + 8 * m.as_slice().len());
    out.extend_from_slice(FMAP_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    out.push(provenance_code(c.provenance()));
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Little-endian cursor over a byte buffer.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let slice = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(slice)
    }

    pub(crate) fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    pub(crate) fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    pub(crate) fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    pub(crate) fn usize(&mut self) -> Option<usize> {
        self.u64().and_then(|v| usize::try_from(v).ok())
    }

    pub(crate) fn f64s(&mut self, n: usize) -> Option<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8)?)?;
        Some(
            bytes
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect(),
        )
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

pub fn decode_fmap(bytes: &[u8]) -> std::result::Result<FunctionalMap, String> {
    let mut r = Reader::new(bytes);
    if r.take(4) != Some(FMAP_MAGIC.as_slice()) {
        return Err("bad magic".into());
    }
    let version = r.u32().ok_or("truncated header")?;
    if version != FORMAT_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let k_y = r.usize().ok_or("truncated header")?;
    let k_x = r.usize().ok_or("truncated header")?;
    let provenance = match r.u8().ok_or("truncated header")? {
        0 => Provenance::Solved,
        1 => Provenance::ConvertedFromPointwise,
        other => return Err(format!("unknown provenance code {other}")),
    };
    let len = k_y.checked_mul(k_x).ok_or("size overflow")?;
    let values = r.f64s(len).ok_or("truncated matrix data")?;
    if !r.at_end() {
        return Err("trailing bytes".into());
    }
    FunctionalMap::new(Mat::from_vec(k_y, k_x, values), provenance).map_err(|e| e.to_string())
}

pub fn write_fmap_binary(c: &FunctionalMap, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_fmap(c))
}

pub fn read_fmap_binary(path: impl AsRef<Path>) -> Result<FunctionalMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_fmap(&bytes).map_err(|message| Error::Validation(format!("{}: {message}", path.display())))
}

pub fn encode_soft_map(map: &SoftMap) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(SOFT_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(map.n_y() as u64).to_le_bytes());
    out.extend_from_slice(&(map.n_x() as u64).to_le_bytes());
    match map {
        SoftMap::Dense(m) => {
            out.push(0);
            for v in m.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        SoftMap::TopT { t, indices, weights, .. } => {
            out.push(1);
            out.extend_from_slice(&(*t as u64).to_le_bytes());
            for i in indices {
                out.extend_from_slice(&(*i as u64).to_le_bytes());
            }
            for w in weights {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_soft_map(bytes: &[u8]) -> std::result::Result<SoftMap, String> {
    let mut r = Reader::new(bytes);
    if r.take(4) != Some(SOFT_MAGIC.as_slice()) {
        return Err("bad magic".into());
    }
    let version = r.u32().ok_or("truncated header")?;
    if version != FORMAT_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let n_y = r.usize().ok_or("truncated header")?;
    let n_x = r.usize().ok_or("truncated header")?;
    let map = match r.u8().ok_or("truncated header")? {
        0 => {
            let values = r.f64s(n_y.checked_mul(n_x).ok_or("size overflow")?).ok_or("truncated data")?;
            SoftMap::Dense(Mat::from_vec(n_y, n_x, values))
        }
        1 => {
            let t = r.usize().ok_or("truncated header")?;
            let len = n_y.checked_mul(t).ok_or("size overflow")?;
            let indices = (0..len)
                .map(|_| r.usize().ok_or("truncated indices"))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let weights = r.f64s(len).ok_or("truncated weights")?;
            SoftMap::TopT { n_x, t, indices, weights }
        }
        other => return Err(format!("unknown soft map kind {other}")),
    };
    if !r.at_end() {
        return Err("trailing bytes".into());
    }
    // PointMap::soft validates stochasticity and index ranges
    match PointMap::soft(map).map_err(|e| e.to_string())? {
        PointMap::Soft(map) => Ok(map),
        PointMap::Hard { .. } => unreachable!("soft constructor returns a soft map"),
    }
}

pub fn write_soft_map(map: &SoftMap, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_soft_map(map))
}

pub fn read_soft_map(path: impl AsRef<Path>) -> Result<SoftMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_soft_map(&bytes).map_err(|message| Error::Validation(format!("{}: {message}", path.display())))
}

/// Loss breakdown rows, one per labelled report.
pub fn write_loss_reports(reports: &[(&str, &LossReport)], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("label,total,bij,orth,couple,contrast_x,contrast_y\n");
    for (label, r) in reports {
        writeln!(
            out,
            "{label},{:?},{:?},{:?},{:?},{:?},{:?}",
            r.total, r.bij, r.orth, r.couple, r.contrast_x, r.contrast_y
        )
        .expect("writing to a String");
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

pub const TRACE_HEADER: &str = "step,lambda,gamma,total,bij,orth,couple,contrast";

pub fn write_trace(trace: &[TraceEntry], path: impl AsRef<Path>) -> Result<()> {
    let mut out = format!("{TRACE_HEADER}\n");
    for e in trace {
        let r = &e.report;
        writeln!(
            out,
            "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            e.step,
            e.lambda,
            e.gamma,
            r.total,
            r.bij,
            r.orth,
            r.couple,
            r.contrast()
        )
        .expect("writing to a String");
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

/// `(step, lambda, gamma, total)` columns of a trace file.
pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<(usize, f64, f64, f64)>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == TRACE_HEADER => {}
        _ => return Err(Error::parse(path, 1, "missing trace header")),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 8 {
                return Err(Error::parse(path, i + 1, format!("expected 8 fields, found {}", fields.len())));
            }
            let num = |j: usize| {
                fields[j]
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(path, i + 1, format!("invalid number '{}'", fields[j])))
            };
            let step = fields[0]
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, i + 1, "invalid step"))?;
            Ok((step, num(1)?, num(2)?, num(3)?))
        })
        .collect()
}

pub fn write_per_vertex_errors(result: &EvalResult, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("vertex,error\n");
    for (i, e) in result.per_vertex_error.iter().enumerate() {
        writeln!(out, "{i},{e:?}").expect("writing to a String");
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

pub const PCK_HEADER: &str = "threshold,fraction";

pub fn write_pck(pck: &[(f64, f64)], path: impl AsRef<Path>) -> Result<()> {
    let mut out = format!("{PCK_HEADER}\n");
    for (t, f) in pck {
        writeln!(out, "{t:?},{f:?}").expect("writing to a String");
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

/// Parses a PCK curve, rejecting anything that is not a well-formed,
/// ascending, `[0, 1]`-valued curve.
pub fn parse_pck(text: &str) -> std::result::Result<Vec<(f64, f64)>, String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == PCK_HEADER => {}
        _ => return Err("missing 'threshold,fraction' header".into()),
    }
    let mut curve = Vec::new();
    for (i, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match fields.as_slice() {
            [t, f] => t.parse::<f64>().ok().zip(f.parse::<f64>().ok()),
            _ => None,
        };
        let (t, f) = parsed.ok_or_else(|| format!("line {}: expected two numbers", i + 1))?;
        if !(t.is_finite() && (0.0..=1.0).contains(&f)) {
            return Err(format!("line {}: value out of range", i + 1));
        }
        if curve.last().is_some_and(|&(prev, _): &(f64, f64)| t < prev) {
            return Err(format!("line {}: thresholds not ascending", i + 1));
        }
        curve.push((t, f));
    }
    if curve.is_empty() {
        return Err("no data rows".into());
    }
    Ok(curve)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub label: String,
    pub mean_error: f64,
    pub auc: f64,
    pub unreachable: usize,
    pub vertices: usize,
}

impl EvalSummary {
    pub fn new(label: impl Into<String>, result: &EvalResult) -> Self {
        Self {
            label: label.into(),
            mean_error: result.mean_error,
            auc: result.auc,
            unreachable: result.unreachable.len(),
            vertices: result.per_vertex_error.len(),
        }
    }
}

pub fn write_eval_summaries(rows: &[EvalSummary], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("label,mean_error,auc,unreachable,vertices\n");
    for r in rows {
        writeln!(out, "{},{:?},{:?},{},{}", r.label, r.mean_error, r.auc, r.unreachable, r.vertices).expect("writing to a String");
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

/// Adapted `(λ, γ)` of one collection, stored as TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptedParams {
    pub collection: String,
    pub lambda: f64,
    pub gamma: f64,
    pub steps: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub stalled: bool,
    /// Set when the run stopped on a non-finite loss and these are the last
    /// good values.
    #[serde(default)]
    pub aborted: bool,
}

pub fn write_adapted_params(params: &AdaptedParams, path: impl AsRef<Path>) -> Result<()> {
    let text = toml::to_string_pretty(params).map_err(|e| Error::Validation(format!("serializing parameters: {e}")))?;
    write_atomic(path.as_ref(), text.as_bytes())
}

pub fn parse_adapted_params(text: &str) -> std::result::Result<AdaptedParams, String> {
    let params: AdaptedParams = toml::from_str(text).map_err(|e| e.to_string())?;
    if !(params.lambda > 0.0 && params.lambda.is_finite() && params.gamma > 0.0 && params.gamma < 1.0) {
        return Err("lambda/gamma out of range".into());
    }
    Ok(params)
}

pub fn read_adapted_params(path: impl AsRef<Path>) -> Result<AdaptedParams> {
    let path = path.as_ref();
    parse_adapted_params(&read_text(path)?).map_err(|m| Error::Validation(format!("{}: {m}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmap_binary_rejects_corruption() {
        let c = FunctionalMap::new(Mat::from_fn(2, 3, |i, j| (i * 3 + j) as f64), Provenance::Solved).unwrap();
        let bytes = encode_fmap(&c);
        assert_eq!(decode_fmap(&bytes).unwrap(), c);
        assert!(decode_fmap(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_fmap(&bad).is_err());
        let mut bad = bytes;
        bad[24] = 9;
        assert!(decode_fmap(&bad).is_err());
    }

    #[test]
    fn pck_parsing_rejects_malformed_curves() {
        assert!(parse_pck("threshold,fraction\n0.0,0.5\n0.1,1.0\n").is_ok());
        assert!(parse_pck("t,f\n0.0,0.5\n").is_err());
        assert!(parse_pck("threshold,fraction\n0.1,0.5\n0.0,1.0\n").is_err());
        assert!(parse_pck("threshold,fraction\n0.0,1.5\n").is_err());
        assert!(parse_pck("threshold,fraction\n").is_err());
        assert!(parse_pck("threshold,fraction\n0.0\n").is_err());
    }
}
