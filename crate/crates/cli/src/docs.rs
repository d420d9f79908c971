//! On-disk document formats: the JSON system definition consumed by every
//! subcommand and the spectrum documents (JSON and CSV) the commands emit.
//! Writers and readers round-trip losslessly; all frequencies on this
//! surface are ordinary frequencies (cycles per time unit) with
//! `ω = 2π·f` applied internally.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use ltispec_core::LtiSystem;

pub const FREQ_CONVENTION: &str =
    "freq in cycles/time-unit; omega = 2*pi*freq; two-sided spectral density";

/// JSON description of an LTI system:
/// `{ "n": int, "m": int, "J": [[...]], "L": [[...]]?, "D": [...]?, "labels": [...]? }`.
/// `L` defaults to the identity and `D` to ones.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemDocument {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "J")]
    pub j: Vec<Vec<f64>>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<Vec<Vec<f64>>>,
    #[serde(rename = "D", skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

fn matrix_from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize, name: &str) -> Result<DMatrix<f64>, String> {
    if rows.len() != nrows {
        return Err(format!("field '{name}': expected {nrows} rows, got {}", rows.len()));
    }
    for (k, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(format!(
                "field '{name}', row {}: expected {ncols} entries, got {}",
                k + 1,
                row.len()
            ));
        }
    }
    Ok(DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
}

impl SystemDocument {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("system document: {e}"))
    }

    pub fn to_system(&self) -> Result<LtiSystem, String> {
        let j = matrix_from_rows(&self.j, self.n, self.n, "J")?;
        let l = match &self.l {
            Some(rows) => matrix_from_rows(rows, self.n, self.m, "L")?,
            None => {
                if self.m != self.n {
                    return Err(format!(
                        "field 'L' omitted: identity default needs m == n, got m={} n={}",
                        self.m, self.n
                    ));
                }
                DMatrix::identity(self.n, self.n)
            }
        };
        let d = match &self.d {
            Some(v) => {
                if v.len() != self.m {
                    return Err(format!(
                        "field 'D': expected {} diagonal entries, got {}",
                        self.m,
                        v.len()
                    ));
                }
                DVector::from_vec(v.clone())
            }
            None => DVector::from_element(self.m, 1.0),
        };
        LtiSystem::new(j, l, d, self.labels.clone()).map_err(|e| e.to_string())
    }

    pub fn from_system(sys: &LtiSystem) -> Self {
        let j = sys.jacobian();
        let l = sys.dispersion();
        Self {
            n: sys.n(),
            m: sys.m(),
            j: (0..sys.n())
                .map(|r| (0..sys.n()).map(|c| j[(r, c)]).collect())
                .collect(),
            l: Some(
                (0..sys.n())
                    .map(|r| (0..sys.m()).map(|c| l[(r, c)]).collect())
                    .collect(),
            ),
            d: Some(sys.diffusion_diag().iter().copied().collect()),
            labels: sys.labels().map(|s| s.to_vec()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct Metadata {
    pub method: String,
    pub system: String,
    pub version: String,
    pub convention: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_segments: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rng: Option<String>,
}

/// Coefficient dump carried by spectrum/coeffs documents: denominator and
/// either the full matrix stacks or a single element's polynomials.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoeffDump {
    pub q: Vec<f64>,
    #[serde(rename = "P", skip_serializing_if = "Option::is_none")]
    pub p_mats: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(rename = "Pp", skip_serializing_if = "Option::is_none")]
    pub pp_mats: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub element: Option<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pp: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<ResidualDump>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualDump {
    pub r1_rel: f64,
    pub r2_rel: f64,
    pub healthy: bool,
}

/// Spectrum values over a frequency grid for a list of (1-based) pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumDocument {
    pub metadata: Metadata,
    pub freqs: Vec<f64>,
    /// 1-based (i, j) pairs.
    pub pairs: Vec<(usize, usize)>,
    /// values[pair][k] = (re, im) at freqs[k].
    pub values: Vec<Vec<(f64, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<CoeffDump>,
}

impl SpectrumDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spectrum document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("spectrum document: {e}"))
    }

    /// CSV with `#`-prefixed metadata lines and one `S_<i>_<j>_{re,im}`
    /// column pair per requested element.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# method: {}\n", self.metadata.method));
        out.push_str(&format!("# system: {}\n", self.metadata.system));
        out.push_str(&format!("# version: {}\n", self.metadata.version));
        out.push_str(&format!("# convention: {}\n", self.metadata.convention));
        if let Some(seed) = self.metadata.seed {
            out.push_str(&format!("# seed: {seed}\n"));
        }
        if let Some(dt) = self.metadata.dt {
            out.push_str(&format!("# dt: {dt}\n"));
        }
        if let Some(ns) = self.metadata.n_segments {
            out.push_str(&format!("# n_segments: {ns}\n"));
        }
        if let Some(ref rng) = self.metadata.rng {
            out.push_str(&format!("# rng: {rng}\n"));
        }
        out.push_str("freq");
        for &(i, j) in &self.pairs {
            out.push_str(&format!(",S_{i}_{j}_re,S_{i}_{j}_im"));
        }
        out.push('\n');
        for (k, f) in self.freqs.iter().enumerate() {
            out.push_str(&format!("{f:.17e}"));
            for row in &self.values {
                out.push_str(&format!(",{:.17e},{:.17e}", row[k].0, row[k].1));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut metadata = Metadata {
            convention: FREQ_CONVENTION.to_string(),
            ..Metadata::default()
        };
        let mut pairs = Vec::new();
        let mut freqs = Vec::new();
        let mut values: Vec<Vec<(f64, f64)>> = Vec::new();
        let mut saw_header = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some((key, val)) = rest.split_once(':') {
                    let val = val.trim();
                    match key.trim() {
                        "method" => metadata.method = val.to_string(),
                        "system" => metadata.system = val.to_string(),
                        "version" => metadata.version = val.to_string(),
                        "convention" => metadata.convention = val.to_string(),
                        "seed" => metadata.seed = val.parse().ok(),
                        "dt" => metadata.dt = val.parse().ok(),
                        "n_segments" => metadata.n_segments = val.parse().ok(),
                        "rng" => metadata.rng = Some(val.to_string()),
                        _ => {}
                    }
                }
                continue;
            }
            if !saw_header {
                for col in line.split(',').skip(1).step_by(2) {
                    let parts: Vec<&str> = col.split('_').collect();
                    if parts.len() != 4 || parts[0] != "S" {
                        return Err(format!("line {}: bad column header '{col}'", lineno + 1));
                    }
                    let i = parts[1].parse().map_err(|_| format!("bad pair in '{col}'"))?;
                    let j = parts[2].parse().map_err(|_| format!("bad pair in '{col}'"))?;
                    pairs.push((i, j));
                    values.push(Vec::new());
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 1 + 2 * pairs.len() {
                return Err(format!(
                    "line {}: expected {} fields, got {}",
                    lineno + 1,
                    1 + 2 * pairs.len(),
                    fields.len()
                ));
            }
            let parse = |s: &str| -> Result<f64, String> {
                s.parse().map_err(|_| format!("line {}: bad number '{s}'", lineno + 1))
            };
            freqs.push(parse(fields[0])?);
            for (p, chunk) in fields[1..].chunks(2).enumerate() {
                values[p].push((parse(chunk[0])?, parse(chunk[1])?));
            }
        }
        if !saw_header {
            return Err("missing CSV header".into());
        }
        Ok(Self {
            metadata,
            freqs,
            pairs,
            values,
            coeffs: None,
        })
    }
}

/// Helper shared by commands: complex grid values for one pair.
pub fn pair_column(values: &[Complex<f64>]) -> Vec<(f64, f64)> {
    values.iter().map(|z| (z.re, z.im)).collect()
}
