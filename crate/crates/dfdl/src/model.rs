//! Bit-exact `.dfdl` model files and plain-text training trace logs.
//!
//! Layout, all integers little-endian: magic "DFDL", version u32, then
//! u64 header fields (class count c, dimension d, per-class atom counts),
//! lambda as f64, the decision rule (mode u64: 0 = proportion_vote,
//! 1 = region_detect; threshold f64; min_region_patches u64; connectivity
//! u64: 4 or 8), c length-prefixed UTF-8 labels, and finally each class
//! dictionary as column-major f64 payloads of exactly d*k*8 bytes.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::classify::{ClassifierModel, Connectivity, DecisionMode, ImageDecisionRule};
use crate::error::{Error, Result};
use crate::sparse::Dictionary;
use crate::train::TrainTrace;

pub const MODEL_MAGIC: [u8; 4] = *b"DFDL";
pub const MODEL_VERSION: u32 = 1;

/// Serializes the model and decision rule, returning the byte count
/// written.
pub fn save_model(
    model: &ClassifierModel,
    rule: &ImageDecisionRule,
    destination: &Path,
) -> Result<u64> {
    rule.validate()?;
    let mut out = Vec::new();
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    push_u64(&mut out, model.class_count() as u64);
    push_u64(&mut out, model.dim() as u64);
    for dict in model.dictionaries() {
        push_u64(&mut out, dict.atom_count() as u64);
    }
    out.extend_from_slice(&model.lambda().to_le_bytes());
    let mode = match rule.mode {
        DecisionMode::ProportionVote => 0u64,
        DecisionMode::RegionDetect => 1u64,
    };
    push_u64(&mut out, mode);
    out.extend_from_slice(&rule.threshold.to_le_bytes());
    push_u64(&mut out, rule.min_region_patches as u64);
    let connectivity = match rule.connectivity {
        Connectivity::Four => 4u64,
        Connectivity::Eight => 8u64,
    };
    push_u64(&mut out, connectivity);
    for label in model.class_labels() {
        push_u64(&mut out, label.len() as u64);
        out.extend_from_slice(label.as_bytes());
    }
    for dict in model.dictionaries() {
        let atoms = dict.atoms();
        for j in 0..dict.atom_count() {
            for i in 0..dict.dim() {
                out.extend_from_slice(&atoms[(i, j)].to_le_bytes());
            }
        }
    }
    let byte_count = out.len() as u64;
    fs::write(destination, out).map_err(|e| Error::io(destination, e))?;
    Ok(byte_count)
}

/// Exact inverse of [`save_model`]; every ClassifierModel invariant is
/// re-validated before anything is returned.
pub fn load_model(source: &Path) -> Result<(ClassifierModel, ImageDecisionRule)> {
    let bytes = fs::read(source).map_err(|e| Error::io(source, e))?;
    parse_model(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", source.display())),
        other => other,
    })
}

/// Parses model bytes; the whole buffer must be consumed exactly.
pub fn parse_model(bytes: &[u8]) -> Result<(ClassifierModel, ImageDecisionRule)> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4)?;
    if magic != MODEL_MAGIC {
        return Err(Error::Format(format!(
            "bad magic {magic:02x?}, expected {MODEL_MAGIC:02x?}"
        )));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let c = r.u64_as_usize("class count")?;
    if c == 0 || c > 1_000_000 {
        return Err(Error::Format(format!("implausible class count {c}")));
    }
    let d = r.u64_as_usize("dimension")?;
    let mut atom_counts = Vec::with_capacity(c);
    for _ in 0..c {
        atom_counts.push(r.u64_as_usize("atom count")?);
    }
    let lambda = r.f64()?;
    let mode = match r.u64()? {
        0 => DecisionMode::ProportionVote,
        1 => DecisionMode::RegionDetect,
        other => return Err(Error::Format(format!("unknown decision mode {other}"))),
    };
    let threshold = r.f64()?;
    let min_region_patches = r.u64_as_usize("min_region_patches")?;
    let connectivity = match r.u64()? {
        4 => Connectivity::Four,
        8 => Connectivity::Eight,
        other => return Err(Error::Format(format!("unknown connectivity {other}"))),
    };
    let mut labels = Vec::with_capacity(c);
    for i in 0..c {
        let len = r.u64_as_usize("label length")?;
        let raw = r.take(len)?;
        let label = std::str::from_utf8(raw)
            .map_err(|_| Error::Format(format!("label {i} is not UTF-8")))?;
        labels.push(label.to_string());
    }
    let mut dictionaries = Vec::with_capacity(c);
    for &k in &atom_counts {
        let entries = d
            .checked_mul(k)
            .ok_or_else(|| Error::Format("dictionary size overflows".into()))?;
        if (bytes.len() - r.pos) / 8 < entries {
            return Err(Error::Format(format!(
                "truncated dictionary payload: need {entries} values"
            )));
        }
        let mut atoms = Array2::zeros((d, k));
        for j in 0..k {
            for i in 0..d {
                atoms[(i, j)] = r.f64()?;
            }
        }
        dictionaries.push(Dictionary::new(atoms)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after the model payload",
            bytes.len() - r.pos
        )));
    }
    let rule = ImageDecisionRule {
        mode,
        threshold,
        min_region_patches,
        connectivity,
    };
    rule.validate()?;
    let model = ClassifierModel::new(dictionaries, lambda, labels)?;
    Ok((model, rule))
}

/// Writes per-class training traces as line-delimited key=value text,
/// one line per outer iteration.
pub fn write_trace(traces: &[(String, TrainTrace)], destination: &Path) -> Result<()> {
    let mut out = String::new();
    for (label, trace) in traces {
        for (i, rec) in trace.iterations.iter().enumerate() {
            let weyl = rec
                .psd
                .weyl_lower_bound
                .map(|w| w.to_string())
                .unwrap_or_else(|| "nan".into());
            out.push_str(&format!(
                "class={label} iter={i} objective={} rho={} lambda_min={} weyl={weyl} is_psd={} shrink_events={} surrogate_before={} surrogate_after={} degenerate_atoms={} wall_secs={}\n",
                rec.objective,
                rec.rho,
                rec.psd.min_eigenvalue,
                rec.psd.is_psd,
                rec.shrink_events,
                rec.surrogate_before,
                rec.surrogate_after,
                rec.degenerate_atoms.len(),
                rec.wall_secs,
            ));
        }
        out.push_str(&format!(
            "class={label} converged={} iterations={}\n",
            trace.converged,
            trace.iterations.len()
        ));
    }
    fs::write(destination, out).map_err(|e| Error::io(destination, e))
}

fn push_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format(format!(
                "truncated: wanted {n} bytes at offset {}, have {}",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u64_as_usize(&mut self, what: &str) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::Format(format!("{what} {v} overflows usize")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
