//! Strictly causal linear Gaussian generative models.
//!
//! A model over `m` processes and `n` timesteps is `x = A·x + noise` where
//! `A` may couple a variable only to strictly earlier-time variables. Under
//! the time-major variable ordering `flat(i, t) = t·m + i` this makes
//! `I - A` unit-lower-triangular, so the joint covariance is
//! `Σ = (I-A)⁻¹ · diag(noise_vars) · (I-A)⁻ᵀ` and sampling is a forward
//! substitution that never divides.

use std::fmt;
use std::io::{self, BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Maps (process index, time index) to a flat variable index, time-major:
/// `flat(i, t) = t·m + i`. All earlier-time variables precede later-time
/// variables, which makes strict causality equivalent to strict
/// lower-triangularity of the coefficient matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProcessLayout {
    m: usize,
    n: usize,
}

impl ProcessLayout {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Parse(format!(
                "layout needs m >= 1 and n >= 1, got m={m}, n={n}"
            )));
        }
        Ok(ProcessLayout { m, n })
    }

    pub fn processes(&self) -> usize {
        self.m
    }

    pub fn timesteps(&self) -> usize {
        self.n
    }

    pub fn var_count(&self) -> usize {
        self.m * self.n
    }

    #[inline]
    pub fn flat(&self, process: usize, time: usize) -> usize {
        debug_assert!(process < self.m && time < self.n);
        time * self.m + process
    }

    #[inline]
    pub fn coords(&self, flat: usize) -> (usize, usize) {
        debug_assert!(flat < self.var_count());
        (flat % self.m, flat / self.m)
    }

    /// Column label for the variable, e.g. `p2_t7`.
    pub fn var_label(&self, flat: usize) -> String {
        let (i, t) = self.coords(flat);
        format!("p{i}_t{t}")
    }

    pub fn process_label(&self, process: usize) -> String {
        format!("p{process}")
    }

    /// Flat indices of the variables of one process up to (exclusive) the
    /// given time, in time order.
    pub fn process_prefix(&self, process: usize, time_end: usize) -> Vec<usize> {
        (0..time_end).map(|t| self.flat(process, t)).collect()
    }
}

/// One structural defect found while validating a model.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Coefficient couples a variable to the same or a later timestep.
    NonCausalCoeff {
        to: (usize, usize),
        from: (usize, usize),
        value: f64,
    },
    /// Noise variance must be strictly positive.
    NonPositiveNoise { at: (usize, usize), value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonCausalCoeff { to, from, value } => write!(
                f,
                "coefficient {value} into (process {}, time {}) from (process {}, time {}) is not strictly causal",
                to.0, to.1, from.0, from.1
            ),
            Violation::NonPositiveNoise { at, value } => write!(
                f,
                "noise variance {value} at (process {}, time {}) is not positive",
                at.0, at.1
            ),
        }
    }
}

/// Every violation found in a candidate model, with coordinates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Check a candidate coefficient matrix and noise vector against the
/// strict-causality and positivity invariants. Returns every violation
/// rather than stopping at the first.
pub fn validate(layout: ProcessLayout, coeffs: &[f64], noise_vars: &[f64]) -> ValidationReport {
    let d = layout.var_count();
    let mut violations = Vec::new();
    if coeffs.len() == d * d {
        for to in 0..d {
            for from in 0..d {
                let value = coeffs[to * d + from];
                if value != 0.0 {
                    let (_, t_to) = layout.coords(to);
                    let (_, t_from) = layout.coords(from);
                    if t_from >= t_to {
                        violations.push(Violation::NonCausalCoeff {
                            to: layout.coords(to),
                            from: layout.coords(from),
                            value,
                        });
                    }
                }
            }
        }
    }
    for (k, &v) in noise_vars.iter().enumerate() {
        if v.is_nan() || v <= 0.0 {
            violations.push(Violation::NonPositiveNoise {
                at: layout.coords(k),
                value: v,
            });
        }
    }
    ValidationReport { violations }
}

/// Strictly causal coefficient matrix plus per-variable noise variances,
/// defining a zero-mean jointly Gaussian law over all `m·n` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeModel {
    layout: ProcessLayout,
    coeffs: Vec<f64>,
    noise_vars: Vec<f64>,
}

impl GenerativeModel {
    /// Validates strict causality and noise positivity; the error carries
    /// the full violation report.
    pub fn new(layout: ProcessLayout, coeffs: Vec<f64>, noise_vars: Vec<f64>) -> Result<Self> {
        let d = layout.var_count();
        if coeffs.len() != d * d {
            return Err(Error::DimMismatch {
                expected: d * d,
                actual: coeffs.len(),
            });
        }
        if noise_vars.len() != d {
            return Err(Error::DimMismatch {
                expected: d,
                actual: noise_vars.len(),
            });
        }
        let report = validate(layout, &coeffs, &noise_vars);
        if !report.is_ok() {
            return Err(Error::InvalidModel { report });
        }
        Ok(GenerativeModel {
            layout,
            coeffs,
            noise_vars,
        })
    }

    /// All-noise model: no coupling, the given variances on the diagonal.
    pub fn independent(layout: ProcessLayout, noise_var: f64) -> Result<Self> {
        let d = layout.var_count();
        Self::new(layout, vec![0.0; d * d], vec![noise_var; d])
    }

    pub fn layout(&self) -> ProcessLayout {
        self.layout
    }

    #[inline]
    pub fn coeff(&self, to: usize, from: usize) -> f64 {
        self.coeffs[to * self.layout.var_count() + from]
    }

    pub fn noise_vars(&self) -> &[f64] {
        &self.noise_vars
    }

    /// Processes with a direct coefficient into `process` at any lag,
    /// excluding itself. Used for edge-direction checks on learned trees.
    pub fn driving_processes(&self, process: usize) -> Vec<usize> {
        let d = self.layout.var_count();
        let mut out = Vec::new();
        for src in 0..self.layout.processes() {
            if src == process {
                continue;
            }
            'scan: for t_to in 0..self.layout.timesteps() {
                for t_from in 0..t_to {
                    let to = self.layout.flat(process, t_to);
                    let from = self.layout.flat(src, t_from);
                    if self.coeffs[to * d + from] != 0.0 {
                        out.push(src);
                        break 'scan;
                    }
                }
            }
        }
        out
    }
}

/// Joint covariance of all variables of a model, layout attached.
/// Positive-definiteness is checked at construction.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    layout: ProcessLayout,
    sigma: SymMatrix,
}

impl CovarianceMatrix {
    pub fn new(layout: ProcessLayout, sigma: SymMatrix) -> Result<Self> {
        if sigma.dim() != layout.var_count() {
            return Err(Error::DimMismatch {
                expected: layout.var_count(),
                actual: sigma.dim(),
            });
        }
        sigma.cholesky()?;
        Ok(CovarianceMatrix { layout, sigma })
    }

    pub fn layout(&self) -> ProcessLayout {
        self.layout
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.sigma
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }
}

/// Exact joint covariance `Σ = (I-A)⁻¹ · diag(noise_vars) · (I-A)⁻ᵀ`.
pub fn build_covariance(model: &GenerativeModel) -> Result<CovarianceMatrix> {
    let d = model.layout.var_count();
    // Columns of (I-A)⁻¹ by forward substitution; unit diagonal, so no
    // division happens. The inverse is again unit lower triangular.
    let mut minv = vec![0.0; d * d];
    for c in 0..d {
        minv[c * d + c] = 1.0;
        for r in (c + 1)..d {
            let mut s = 0.0;
            for u in c..r {
                let a = model.coeffs[r * d + u];
                if a != 0.0 {
                    s += a * minv[u * d + c];
                }
            }
            minv[r * d + c] = s;
        }
    }
    let noise = &model.noise_vars;
    let sigma = SymMatrix::from_fn(d, |i, j| {
        let upper = i.min(j);
        (0..=upper)
            .map(|k| minv[i * d + k] * noise[k] * minv[j * d + k])
            .sum()
    });
    CovarianceMatrix::new(model.layout, sigma)
}

/// A batch of samples, one row per draw, columns in time-major variable
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    layout: ProcessLayout,
    count: usize,
    values: Vec<f64>,
}

impl Samples {
    pub fn layout(&self) -> ProcessLayout {
        self.layout
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let d = self.layout.var_count();
        &self.values[k * d..(k + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.layout.var_count())
    }
}

/// Draw `count` vectors from the model's joint law.
///
/// Stream splitting: sample `k` uses the ChaCha12 stream with id `k` under
/// the given seed, so parallel sampling is bit-identical to sequential.
pub fn sample(model: &GenerativeModel, seed: u64, count: usize) -> Samples {
    let d = model.layout.var_count();
    let mut values = vec![0.0; count * d];

    let fill = |k: usize, row: &mut [f64]| {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        // Draw noise in flat variable order, then solve (I-A)x = noise in
        // place; strict causality means the diagonal stays 1.
        for (v, slot) in row.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *slot = z * model.noise_vars[v].sqrt();
        }
        for v in 0..d {
            let mut acc = row[v];
            for (u, &value) in row[..v].iter().enumerate() {
                let a = model.coeffs[v * d + u];
                if a != 0.0 {
                    acc += a * value;
                }
            }
            row[v] = acc;
        }
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        values
            .par_chunks_mut(d)
            .enumerate()
            .for_each(|(k, row)| fill(k, row));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (k, row) in values.chunks_mut(d).enumerate() {
            fill(k, row);
        }
    }

    Samples {
        layout: model.layout,
        count,
        values,
    }
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// Sparse on-disk model description. Coefficients absent from the list are
/// zero; `noise_vars` is either one scalar for all variables or a full
/// length-`m·n` array.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub m: usize,
    pub n: usize,
    #[serde(default)]
    pub coeffs: Vec<CoeffEntry>,
    pub noise_vars: NoiseSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

/// One coefficient: variable `to = [process, time]` picks up
/// `value · x[from]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoeffEntry {
    pub to: [usize; 2],
    pub from: [usize; 2],
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Scalar(f64),
    PerVariable(Vec<f64>),
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("model JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model file serializes")
    }

    /// Expand the sparse description into a dense validated model.
    pub fn into_model(self) -> Result<GenerativeModel> {
        let layout = ProcessLayout::new(self.m, self.n)?;
        let d = layout.var_count();
        let mut coeffs = vec![0.0; d * d];
        for (k, entry) in self.coeffs.iter().enumerate() {
            let check = |what: &str, pair: [usize; 2]| -> Result<usize> {
                let [i, t] = pair;
                if i >= self.m || t >= self.n {
                    return Err(Error::Parse(format!(
                        "coeffs[{k}].{what} = [{i}, {t}] out of range for m={}, n={}",
                        self.m, self.n
                    )));
                }
                Ok(layout.flat(i, t))
            };
            let to = check("to", entry.to)?;
            let from = check("from", entry.from)?;
            if coeffs[to * d + from] != 0.0 {
                return Err(Error::Parse(format!(
                    "coeffs[{k}] duplicates entry to=[{},{}] from=[{},{}]",
                    entry.to[0], entry.to[1], entry.from[0], entry.from[1]
                )));
            }
            coeffs[to * d + from] = entry.value;
        }
        let noise_vars = match self.noise_vars {
            NoiseSpec::Scalar(v) => vec![v; d],
            NoiseSpec::PerVariable(v) => {
                if v.len() != d {
                    return Err(Error::Parse(format!(
                        "noise_vars has {} entries, expected m·n = {d}",
                        v.len()
                    )));
                }
                v
            }
        };
        GenerativeModel::new(layout, coeffs, noise_vars)
    }

    /// Sparse description of an in-memory model.
    pub fn from_model(model: &GenerativeModel) -> Self {
        let layout = model.layout();
        let d = layout.var_count();
        let mut coeffs = Vec::new();
        for to in 0..d {
            for from in 0..d {
                let value = model.coeffs[to * d + from];
                if value != 0.0 {
                    let (pi, ti) = layout.coords(to);
                    let (pj, tj) = layout.coords(from);
                    coeffs.push(CoeffEntry {
                        to: [pi, ti],
                        from: [pj, tj],
                        value,
                    });
                }
            }
        }
        let first = model.noise_vars[0];
        let noise_vars = if model.noise_vars.iter().all(|&v| v == first) {
            NoiseSpec::Scalar(first)
        } else {
            NoiseSpec::PerVariable(model.noise_vars.clone())
        };
        ModelFile {
            m: layout.processes(),
            n: layout.timesteps(),
            coeffs,
            noise_vars,
            comment: None,
        }
    }
}

/// Write samples as CSV: optional leading `#` comment lines, one header row
/// of `p<i>_t<t>` labels in time-major order, one row per sample.
pub fn write_samples_csv<W: Write + ?Sized>(
    out: &mut W,
    samples: &Samples,
    comments: &[String],
) -> io::Result<()> {
    for line in comments {
        writeln!(out, "# {line}")?;
    }
    let d = samples.layout().var_count();
    let header: Vec<String> = (0..d).map(|v| samples.layout().var_label(v)).collect();
    writeln!(out, "{}", header.join(","))?;
    for row in samples.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Read a samples CSV produced by [`write_samples_csv`]; `#` lines are
/// skipped wherever they appear.
pub fn read_samples_csv<R: BufRead>(input: R, layout: ProcessLayout) -> Result<Samples> {
    let d = layout.var_count();
    let mut values = Vec::new();
    let mut count = 0;
    let mut saw_header = false;
    for line in input.lines() {
        let line = line.map_err(|e| Error::Parse(format!("samples CSV: {e}")))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !saw_header {
            saw_header = true;
            let cols = trimmed.split(',').count();
            if cols != d {
                return Err(Error::Parse(format!(
                    "samples CSV header has {cols} columns, expected {d}"
                )));
            }
            continue;
        }
        let mut row = Vec::with_capacity(d);
        for cell in trimmed.split(',') {
            row.push(
                cell.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("samples CSV value {cell:?}: {e}")))?,
            );
        }
        if row.len() != d {
            return Err(Error::Parse(format!(
                "samples CSV row has {} columns, expected {d}",
                row.len()
            )));
        }
        values.extend_from_slice(&row);
        count += 1;
    }
    Ok(Samples {
        layout,
        count,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn chain_pair_model(a: f64) -> GenerativeModel {
        // One process, two timesteps: x1 = a·x0 + noise.
        let layout = ProcessLayout::new(1, 2).unwrap();
        let d = layout.var_count();
        let mut coeffs = vec![0.0; d * d];
        coeffs[layout.flat(0, 1) * d + layout.flat(0, 0)] = a;
        GenerativeModel::new(layout, coeffs, vec![1.0; d]).unwrap()
    }

    #[test]
    fn layout_is_time_major_bijection() {
        let layout = ProcessLayout::new(3, 4).unwrap();
        let mut seen = [false; 12];
        for i in 0..3 {
            for t in 0..4 {
                let f = layout.flat(i, t);
                assert!(!seen[f]);
                seen[f] = true;
                assert_eq!(layout.coords(f), (i, t));
            }
        }
        assert!(seen.iter().all(|&s| s));
        // Earlier time always precedes later time.
        for i in 0..3 {
            for j in 0..3 {
                assert!(layout.flat(i, 1) < layout.flat(j, 2));
            }
        }
    }

    #[test]
    fn identity_covariance_for_independent_model() {
        let layout = ProcessLayout::new(3, 2).unwrap();
        let model = GenerativeModel::independent(layout, 1.0).unwrap();
        let cov = build_covariance(&model).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(cov.matrix().get(i, j), expect);
            }
        }
    }

    #[test]
    fn chain_covariance_hand_case() {
        // Expanding (I-A)⁻¹(I-A)⁻ᵀ for the 2x2 chain gives
        // [[1, a], [a, 1 + a²]].
        let a = 0.7;
        let cov = build_covariance(&chain_pair_model(a)).unwrap();
        assert_relative_eq!(cov.matrix().get(0, 0), 1.0);
        assert_relative_eq!(cov.matrix().get(0, 1), a);
        assert_relative_eq!(cov.matrix().get(1, 1), 1.0 + a * a);
    }

    #[test]
    fn validation_reports_every_defect() {
        let layout = ProcessLayout::new(2, 2).unwrap();
        let d = layout.var_count();
        let mut coeffs = vec![0.0; d * d];
        // Same-time coupling (0,1) <- (1,1).
        coeffs[layout.flat(0, 1) * d + layout.flat(1, 1)] = 0.5;
        // Future-to-past coupling (1,0) <- (0,1).
        coeffs[layout.flat(1, 0) * d + layout.flat(0, 1)] = 0.3;
        let mut noise = vec![1.0; d];
        noise[2] = 0.0;
        let report = validate(layout, &coeffs, &noise);
        assert_eq!(report.violations.len(), 3);
        assert!(report.violations.iter().any(|v| matches!(
            v,
            Violation::NonCausalCoeff { to: (0, 1), from: (1, 1), .. }
        )));
        assert!(report.violations.iter().any(|v| matches!(
            v,
            Violation::NonCausalCoeff { to: (1, 0), from: (0, 1), .. }
        )));
        assert!(report.violations.iter().any(|v| matches!(
            v,
            Violation::NonPositiveNoise { at: (0, 1), .. }
        )));
        assert!(matches!(
            GenerativeModel::new(layout, coeffs, noise),
            Err(Error::InvalidModel { .. })
        ));

        let clean = validate(layout, &vec![0.0; d * d], &vec![1.0; d]);
        assert!(clean.is_ok());
    }

    #[test]
    fn sampling_is_deterministic() {
        let model = chain_pair_model(0.6);
        let s1 = sample(&model, 42, 5);
        let s2 = sample(&model, 42, 5);
        assert_eq!(s1, s2);
        let s3 = sample(&model, 43, 5);
        assert_ne!(s1, s3);
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn sampling_stream_is_pinned() {
        // Frozen values: the per-index ChaCha12 substream rule means these
        // must not change across releases or between the parallel and
        // sequential builds.
        let s = sample(&chain_pair_model(0.6), 42, 2);
        let expect = [
            [6.94279183619633533e-2, 1.74594873011303442e-1],
            [-7.54705946210922574e-1, -5.59241298733981096e-1],
        ];
        for (k, row) in expect.iter().enumerate() {
            for (v, value) in row.iter().enumerate() {
                assert_eq!(s.row(k)[v], *value, "sample[{k}][{v}] drifted");
            }
        }
    }

    #[test]
    fn sample_prefix_matches_smaller_count() {
        // Per-index substreams: the first k samples do not depend on count.
        let model = chain_pair_model(0.6);
        let s5 = sample(&model, 7, 5);
        let s3 = sample(&model, 7, 3);
        for k in 0..3 {
            assert_eq!(s5.row(k), s3.row(k));
        }
    }

    #[test]
    fn independent_model_unit_variances() {
        let layout = ProcessLayout::new(2, 2).unwrap();
        let model = GenerativeModel::independent(layout, 1.0).unwrap();
        let count = 100_000;
        let s = sample(&model, 0, count);
        for v in 0..4 {
            let mean: f64 = s.rows().map(|r| r[v]).sum::<f64>() / count as f64;
            let var: f64 =
                s.rows().map(|r| (r[v] - mean).powi(2)).sum::<f64>() / count as f64;
            assert!(
                (0.97..=1.03).contains(&var),
                "variance {var} outside [0.97, 1.03]"
            );
        }
    }

    #[test]
    fn chain_empirical_correlation() {
        let a = 0.8;
        let model = chain_pair_model(a);
        let count = 100_000;
        let s = sample(&model, 1, count);
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for r in s.rows() {
            sx += r[0];
            sy += r[1];
            sxx += r[0] * r[0];
            syy += r[1] * r[1];
            sxy += r[0] * r[1];
        }
        let nf = count as f64;
        let cov = sxy / nf - sx / nf * (sy / nf);
        let vx = sxx / nf - (sx / nf).powi(2);
        let vy = syy / nf - (sy / nf).powi(2);
        let corr = cov / (vx * vy).sqrt();
        let expect = a / (1.0 + a * a).sqrt();
        assert!(
            (corr - expect).abs() < 0.02,
            "corr {corr} vs expected {expect}"
        );
    }

    #[test]
    fn model_file_roundtrip_and_noise_broadcast() {
        let text = r#"{
            "m": 2, "n": 2,
            "coeffs": [{"to": [1, 1], "from": [0, 0], "value": 0.5}],
            "noise_vars": 2.0
        }"#;
        let model = ModelFile::from_json(text).unwrap().into_model().unwrap();
        assert_eq!(model.noise_vars(), &[2.0; 4]);
        let layout = model.layout();
        assert_eq!(model.coeff(layout.flat(1, 1), layout.flat(0, 0)), 0.5);

        let back = ModelFile::from_model(&model);
        let again = back.clone().into_model().unwrap();
        assert_eq!(model, again);
        let reparsed = ModelFile::from_json(&back.to_json())
            .unwrap()
            .into_model()
            .unwrap();
        assert_eq!(model, reparsed);
    }

    #[test]
    fn coefficient_order_does_not_matter() {
        let forward = r#"{
            "m": 2, "n": 2,
            "coeffs": [{"to": [1, 1], "from": [0, 0], "value": 0.5},
                       {"to": [0, 1], "from": [1, 0], "value": -0.3}],
            "noise_vars": 1.0
        }"#;
        let shuffled = r#"{
            "m": 2, "n": 2,
            "coeffs": [{"to": [0, 1], "from": [1, 0], "value": -0.3},
                       {"to": [1, 1], "from": [0, 0], "value": 0.5}],
            "noise_vars": 1.0
        }"#;
        let a = ModelFile::from_json(forward).unwrap().into_model().unwrap();
        let b = ModelFile::from_json(shuffled).unwrap().into_model().unwrap();
        assert_eq!(a, b);
        let ca = build_covariance(&a).unwrap();
        let cb = build_covariance(&b).unwrap();
        assert_eq!(ca.matrix().entries(), cb.matrix().entries());
    }

    #[test]
    fn model_file_names_offending_field() {
        let bad_index = r#"{
            "m": 2, "n": 2,
            "coeffs": [{"to": [5, 0], "from": [0, 0], "value": 0.5}],
            "noise_vars": 1.0
        }"#;
        let err = ModelFile::from_json(bad_index)
            .unwrap()
            .into_model()
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("coeffs[0].to"), "got: {msg}");

        let bad_noise = r#"{"m": 2, "n": 2, "noise_vars": [1.0, 1.0]}"#;
        let err = ModelFile::from_json(bad_noise)
            .unwrap()
            .into_model()
            .unwrap_err();
        assert!(err.to_string().contains("noise_vars"));

        let malformed = r#"{"m": 2, "coeffs": []}"#;
        assert!(ModelFile::from_json(malformed).is_err());
    }

    #[test]
    fn samples_csv_roundtrip() {
        let model = chain_pair_model(0.4);
        let s = sample(&model, 3, 4);
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, &s, &["made by test".to_string()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# made by test\np0_t0,p0_t1\n"));
        let back = read_samples_csv(buf.as_slice(), model.layout()).unwrap();
        assert_eq!(back.count(), 4);
        for k in 0..4 {
            for v in 0..2 {
                assert_relative_eq!(back.row(k)[v], s.row(k)[v]);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        /// Empirical covariance of a random strictly-causal model converges
        /// to the analytic covariance (fast version; the 1e6-draw check
        /// lives in the acceptance suite).
        #[test]
        fn sample_covariance_tracks_analytic(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let layout = ProcessLayout::new(2, 2).unwrap();
            let d = layout.var_count();
            let mut coeffs = vec![0.0; d * d];
            for to_t in 1..2 {
                for to_p in 0..2 {
                    for from_p in 0..2 {
                        if rng.gen_bool(0.7) {
                            let to = layout.flat(to_p, to_t);
                            let from = layout.flat(from_p, to_t - 1);
                            coeffs[to * d + from] = rng.gen_range(-0.9..0.9);
                        }
                    }
                }
            }
            let model = GenerativeModel::new(layout, coeffs, vec![1.0; d]).unwrap();
            let cov = build_covariance(&model).unwrap();
            let count = 60_000;
            let s = sample(&model, seed ^ 0xdead, count);
            for i in 0..d {
                for j in 0..=i {
                    let emp: f64 = s.rows().map(|r| r[i] * r[j]).sum::<f64>() / count as f64;
                    let truth = cov.matrix().get(i, j);
                    // Sampling noise at this count is ~0.01; stay well clear.
                    prop_assert!(
                        (emp - truth).abs() <= 0.04 + 0.05 * truth.abs(),
                        "entry ({i},{j}): empirical {emp} vs analytic {truth}"
                    );
                }
            }
        }
    }
}
