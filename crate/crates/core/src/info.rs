//! Exact information measures for jointly Gaussian processes, in nats.
//!
//! Directed information from process X to process Y over n steps is
//! `I(X→Y) = Σᵢ I(Yᵢ; X^i | Y^{i-1})`, evaluated here through principal
//! submatrix log-determinants of the joint covariance:
//!
//! `I(X→Y) = ½·log|K_{Y^n}| − Σᵢ ½·log( |K_{Y^i,X^i}| / |K_{Y^{i-1},X^i}| )`
//!
//! Causal conditioning is present-inclusive: the i-th term conditions on
//! the source up to and including time i, never on its future. Mutual
//! information between processes conditions on the whole source block
//! instead, which is why `I(X;Y) ≥ I(X→Y)` term by term.
//!
//! [`tree_to_gaussian`] materializes a tree approximation as the covariance
//! of the linear-Gaussian network whose conditionals are read off the true
//! covariance, restricted to the parents the tree allows.

use std::io::{self, BufRead, Write};

use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, PIVOT_TOL};
use crate::model::CovarianceMatrix;
use crate::trees::ProcessTree;

/// Negative values above this are floating-point noise and clamp to zero;
/// anything below raises [`Error::NumericalInconsistency`].
pub const CLAMP_TOL: f64 = -1e-9;

fn clamp_information(value: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= CLAMP_TOL {
        Ok(0.0)
    } else {
        Err(Error::NumericalInconsistency { value })
    }
}

/// What a weight matrix measures, and between what kind of node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    /// Mutual information between whole processes (symmetric, m×m).
    ProcessMi,
    /// Directed information between processes (asymmetric, m×m).
    ProcessDi,
    /// Mutual information between single variables (symmetric, mn×mn).
    VariableMi,
}

impl WeightKind {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightKind::ProcessMi => "MI",
            WeightKind::ProcessDi => "DI",
            WeightKind::VariableMi => "MIvar",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "MI" => Ok(WeightKind::ProcessMi),
            "DI" => Ok(WeightKind::ProcessDi),
            "MIvar" => Ok(WeightKind::VariableMi),
            other => Err(Error::Parse(format!("unknown weight kind {other:?}"))),
        }
    }

    pub fn is_symmetric(self) -> bool {
        !matches!(self, WeightKind::ProcessDi)
    }
}

/// Square matrix of pairwise information weights in nats. Rows index the
/// source node, columns the target, diagonal fixed at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    kind: WeightKind,
    size: usize,
    labels: Vec<String>,
    weights: Vec<f64>,
}

impl WeightMatrix {
    /// Validate and normalize raw weights: all entries finite and no more
    /// negative than the clamp tolerance (then clamped to 0), diagonal
    /// zero, symmetric kinds symmetric within 1e-9 (then averaged exact).
    pub fn from_parts(
        kind: WeightKind,
        labels: Vec<String>,
        mut weights: Vec<f64>,
    ) -> Result<Self> {
        let size = labels.len();
        if weights.len() != size * size {
            return Err(Error::DimMismatch {
                expected: size * size,
                actual: weights.len(),
            });
        }
        for (k, w) in weights.iter_mut().enumerate() {
            if !w.is_finite() {
                return Err(Error::Parse(format!(
                    "weight at [{}][{}] is not finite",
                    k / size,
                    k % size
                )));
            }
            if *w < 0.0 {
                *w = clamp_information(*w)?;
            }
        }
        for i in 0..size {
            let d = weights[i * size + i];
            if d.abs() > 1e-9 {
                return Err(Error::Parse(format!(
                    "diagonal weight at [{i}][{i}] must be 0, got {d}"
                )));
            }
            weights[i * size + i] = 0.0;
        }
        if kind.is_symmetric() {
            for i in 0..size {
                for j in (i + 1)..size {
                    let a = weights[i * size + j];
                    let b = weights[j * size + i];
                    if (a - b).abs() > 1e-9 {
                        return Err(Error::Parse(format!(
                            "{} weights must be symmetric: [{i}][{j}]={a} vs [{j}][{i}]={b}",
                            kind.as_str()
                        )));
                    }
                    let avg = 0.5 * (a + b);
                    weights[i * size + j] = avg;
                    weights[j * size + i] = avg;
                }
            }
        }
        Ok(WeightMatrix {
            kind,
            size,
            labels,
            weights,
        })
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Weight of the edge source → target.
    #[inline]
    pub fn get(&self, source: usize, target: usize) -> f64 {
        self.weights[source * self.size + target]
    }
}

fn process_vars(cov: &CovarianceMatrix, process: usize) -> Vec<usize> {
    cov.layout().process_prefix(process, cov.layout().timesteps())
}

/// Mutual information between two whole processes:
/// `½(log|K_A| + log|K_B| − log|K_{AB}|)`.
pub fn gaussian_mi(cov: &CovarianceMatrix, a: usize, b: usize) -> Result<f64> {
    assert_ne!(a, b, "mutual information needs two distinct processes");
    let ia = process_vars(cov, a);
    let ib = process_vars(cov, b);
    let mut joint = ia.clone();
    joint.extend_from_slice(&ib);
    let m = cov.matrix();
    let mi = 0.5
        * (m.submatrix(&ia)?.log_det()? + m.submatrix(&ib)?.log_det()?
            - m.submatrix(&joint)?.log_det()?);
    clamp_information(mi)
}

/// Directed information from `src` to `dst`:
/// `½·log|K_{Y^n}| − Σᵢ ½·log(|K_{Y^i,X^i}| / |K_{Y^{i-1},X^i}|)`
/// with Y = dst, X = src; for i = 1 the denominator block is `K_{X^1}`
/// alone.
pub fn gaussian_di(cov: &CovarianceMatrix, src: usize, dst: usize) -> Result<f64> {
    assert_ne!(src, dst, "directed information needs two distinct processes");
    let layout = cov.layout();
    let n = layout.timesteps();
    let m = cov.matrix();
    let mut di = 0.5 * m.submatrix(&layout.process_prefix(dst, n))?.log_det()?;
    for i in 1..=n {
        let mut num = layout.process_prefix(dst, i);
        num.extend(layout.process_prefix(src, i));
        let num_ld = m.submatrix(&num)?.log_det()?;

        let mut den = layout.process_prefix(dst, i - 1);
        den.extend(layout.process_prefix(src, i));
        let den_ld = m.submatrix(&den)?.log_det()?;

        di -= 0.5 * (num_ld - den_ld);
    }
    clamp_information(di)
}

/// Mutual information between two single variables (flat indices):
/// `-½·log(1 - ρ²)` evaluated through log-determinants.
pub fn variable_mi(cov: &CovarianceMatrix, u: usize, v: usize) -> Result<f64> {
    assert_ne!(u, v, "mutual information needs two distinct variables");
    let m = cov.matrix();
    let mi = 0.5
        * (m.submatrix(&[u])?.log_det()? + m.submatrix(&[v])?.log_det()?
            - m.submatrix(&[u, v])?.log_det()?);
    clamp_information(mi)
}

/// Pairwise weights of the requested kind: m×m for process kinds, mn×mn
/// for variable-level mutual information. Symmetric kinds evaluate each
/// unordered pair once; DI evaluates all m(m-1) ordered pairs. Pairs are
/// independent, so evaluation parallelizes without affecting the result.
pub fn build_weights(cov: &CovarianceMatrix, kind: WeightKind) -> Result<WeightMatrix> {
    let layout = cov.layout();
    let (size, labels): (usize, Vec<String>) = match kind {
        WeightKind::ProcessMi | WeightKind::ProcessDi => (
            layout.processes(),
            (0..layout.processes())
                .map(|p| layout.process_label(p))
                .collect(),
        ),
        WeightKind::VariableMi => (
            layout.var_count(),
            (0..layout.var_count())
                .map(|v| layout.var_label(v))
                .collect(),
        ),
    };

    let pairs: Vec<(usize, usize)> = match kind {
        WeightKind::ProcessDi => (0..size)
            .flat_map(|a| (0..size).filter(move |&b| b != a).map(move |b| (a, b)))
            .collect(),
        _ => (0..size)
            .flat_map(|a| ((a + 1)..size).map(move |b| (a, b)))
            .collect(),
    };

    let eval = |&(a, b): &(usize, usize)| -> Result<f64> {
        match kind {
            WeightKind::ProcessMi => gaussian_mi(cov, a, b),
            WeightKind::ProcessDi => gaussian_di(cov, a, b),
            WeightKind::VariableMi => variable_mi(cov, a, b),
        }
    };

    #[cfg(feature = "parallel")]
    let values: Vec<f64> = {
        use rayon::prelude::*;
        pairs.par_iter().map(eval).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let values: Vec<f64> = pairs.iter().map(eval).collect::<Result<_>>()?;

    let mut weights = vec![0.0; size * size];
    for (&(a, b), w) in pairs.iter().zip(values) {
        weights[a * size + b] = w;
        if kind.is_symmetric() {
            weights[b * size + a] = w;
        }
    }
    WeightMatrix::from_parts(kind, labels, weights)
}

/// Flat parent sets allowed for each variable under a tree, plus a
/// deterministic topological order (Kahn, smallest index first).
fn tree_parent_sets(cov: &CovarianceMatrix, tree: &ProcessTree) -> Result<Vec<Vec<usize>>> {
    let layout = cov.layout();
    let m = layout.processes();
    let n = layout.timesteps();
    let d = layout.var_count();

    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); d];
    if tree.node_count() == m && tree.directed() {
        // Causal dependence tree: own strict past plus the parent
        // process's present-inclusive past.
        for i in 0..m {
            for t in 0..n {
                let v = layout.flat(i, t);
                sets[v] = layout.process_prefix(i, t);
                if let Some(p) = tree.parent_of(i) {
                    sets[v].extend(layout.process_prefix(p, t + 1));
                }
            }
        }
    } else if tree.node_count() == d && !tree.directed() {
        // Chow-Liu variable tree: exactly one parent variable under any
        // rooted orientation (the factorization is root-invariant).
        for (v, set) in sets.iter_mut().enumerate() {
            if let Some(p) = tree.parent_of(v) {
                *set = vec![p];
            }
        }
    } else if tree.node_count() == m && !tree.directed() {
        // Process-level undirected tree: each process block is fully
        // conditioned on its parent block.
        for i in 0..m {
            for t in 0..n {
                let v = layout.flat(i, t);
                sets[v] = layout.process_prefix(i, t);
                if let Some(p) = tree.parent_of(i) {
                    sets[v].extend(layout.process_prefix(p, n));
                }
            }
        }
    } else {
        return Err(Error::InvalidTree {
            reason: format!(
                "tree over {} nodes (directed={}) does not match layout with {m} processes and {d} variables",
                tree.node_count(),
                tree.directed()
            ),
        });
    }
    Ok(sets)
}

fn topological_order(sets: &[Vec<usize>]) -> Result<Vec<usize>> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let d = sets.len();
    let mut indegree = vec![0usize; d];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); d];
    for (v, parents) in sets.iter().enumerate() {
        indegree[v] = parents.len();
        for &u in parents {
            children[u].push(v);
        }
    }
    let mut heap: BinaryHeap<Reverse<usize>> = (0..d)
        .filter(|&v| indegree[v] == 0)
        .map(Reverse)
        .collect();
    let mut order = Vec::with_capacity(d);
    while let Some(Reverse(v)) = heap.pop() {
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                heap.push(Reverse(c));
            }
        }
    }
    if order.len() != d {
        return Err(Error::InvalidTree {
            reason: "tree induces a cyclic variable dependency".to_string(),
        });
    }
    Ok(order)
}

/// Covariance of the tree approximation.
///
/// In topological order, each variable keeps its true conditional law given
/// the parents the tree allows: regression coefficients `β = K_SS⁻¹ K_Sv`
/// and residual variance `K_vv − K_vS β` are read off the true covariance
/// via Cholesky solves, and the induced linear network's covariance is
/// assembled as `(I−B)⁻¹·diag(residuals)·(I−B)⁻ᵀ`.
pub fn tree_to_gaussian(cov: &CovarianceMatrix, tree: &ProcessTree) -> Result<CovarianceMatrix> {
    let d = cov.dim();
    let k = cov.matrix();
    let sets = tree_parent_sets(cov, tree)?;
    let order = topological_order(&sets)?;

    // Per-variable regression on its allowed parents.
    let mut coeff_rows: Vec<Vec<f64>> = vec![Vec::new(); d];
    let mut residual = vec![0.0; d];
    for v in 0..d {
        let parents = &sets[v];
        if parents.is_empty() {
            residual[v] = k.get(v, v);
        } else {
            let kss = k.submatrix(parents)?;
            let ksv: Vec<f64> = parents.iter().map(|&u| k.get(u, v)).collect();
            let beta = kss.cholesky()?.solve(&ksv);
            let explained: f64 = ksv.iter().zip(&beta).map(|(a, b)| a * b).sum();
            residual[v] = k.get(v, v) - explained;
            coeff_rows[v] = beta;
        }
        if residual[v] <= PIVOT_TOL {
            return Err(Error::NotPositiveDefinite {
                index: v,
                pivot: residual[v],
            });
        }
    }

    // Columns of (I−B)⁻¹ by forward substitution along the topological
    // order; B has unit-free diagonal so no division happens.
    let mut minv = vec![0.0; d * d];
    for c in 0..d {
        for &v in &order {
            let mut s = if v == c { 1.0 } else { 0.0 };
            for (pos, &u) in sets[v].iter().enumerate() {
                let b = coeff_rows[v][pos];
                if b != 0.0 {
                    s += b * minv[u * d + c];
                }
            }
            minv[v * d + c] = s;
        }
    }
    let sigma = SymMatrix::from_fn(d, |i, j| {
        (0..d)
            .map(|c| minv[i * d + c] * residual[c] * minv[j * d + c])
            .sum()
    });
    CovarianceMatrix::new(cov.layout(), sigma)
}

/// Closed-form KL divergence between two zero-mean Gaussians:
/// `½(tr(K_approx⁻¹·K_true) − d + log|K_approx| − log|K_true|)`.
pub fn gaussian_kl(k_true: &CovarianceMatrix, k_approx: &CovarianceMatrix) -> Result<f64> {
    let d = k_true.dim();
    if k_approx.dim() != d {
        return Err(Error::DimMismatch {
            expected: d,
            actual: k_approx.dim(),
        });
    }
    let chol = k_approx.matrix().cholesky()?;
    let mut trace = 0.0;
    let mut col = vec![0.0; d];
    for j in 0..d {
        for (i, slot) in col.iter_mut().enumerate() {
            *slot = k_true.matrix().get(i, j);
        }
        trace += chol.solve(&col)[j];
    }
    let ld_true = k_true.matrix().log_det()?;
    let kl = 0.5 * (trace - d as f64 + chol.log_det() - ld_true);
    clamp_information(kl)
}

// ---------------------------------------------------------------------------
// Weight matrix CSV
// ---------------------------------------------------------------------------

/// CSV layout: optional leading `#` comments, a header row of labels with
/// an empty corner cell, one labelled row per source node, and the footer
/// comment `# units=nats; kind=<MI|DI|MIvar>`.
pub fn write_weights_csv<W: Write + ?Sized>(
    out: &mut W,
    weights: &WeightMatrix,
    comments: &[String],
) -> io::Result<()> {
    for line in comments {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, ",{}", weights.labels().join(","))?;
    for r in 0..weights.size() {
        let cells: Vec<String> = (0..weights.size())
            .map(|c| format!("{}", weights.get(r, c)))
            .collect();
        writeln!(out, "{},{}", weights.labels()[r], cells.join(","))?;
    }
    writeln!(out, "# units=nats; kind={}", weights.kind().as_str())?;
    Ok(())
}

/// Read a weights CSV written by [`write_weights_csv`]. The kind footer is
/// required; other `#` lines are ignored.
pub fn read_weights_csv<R: BufRead>(input: R) -> Result<WeightMatrix> {
    let mut kind: Option<WeightKind> = None;
    let mut labels: Option<Vec<String>> = None;
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();

    for line in input.lines() {
        let line = line.map_err(|e| Error::Parse(format!("weights CSV: {e}")))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(k) = comment.strip_prefix("units=nats; kind=") {
                kind = Some(WeightKind::parse(k.trim())?);
            }
            continue;
        }
        if labels.is_none() {
            let mut cells = trimmed.split(',');
            let corner = cells.next().unwrap_or_default();
            if !corner.is_empty() {
                return Err(Error::Parse(
                    "weights CSV header must start with an empty corner cell".to_string(),
                ));
            }
            labels = Some(cells.map(str::to_string).collect());
            continue;
        }
        let mut cells = trimmed.split(',');
        let label = cells
            .next()
            .ok_or_else(|| Error::Parse("weights CSV row missing label".to_string()))?
            .to_string();
        let values: Vec<f64> = cells
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("weights CSV value {c:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        rows.push((label, values));
    }

    let labels = labels.ok_or_else(|| Error::Parse("weights CSV has no header".to_string()))?;
    let kind = kind.ok_or_else(|| {
        Error::Parse("weights CSV missing '# units=nats; kind=...' footer".to_string())
    })?;
    let size = labels.len();
    if rows.len() != size {
        return Err(Error::Parse(format!(
            "weights CSV has {} rows for {size} labels",
            rows.len()
        )));
    }
    let mut weights = Vec::with_capacity(size * size);
    for (r, (label, values)) in rows.iter().enumerate() {
        if *label != labels[r] {
            return Err(Error::Parse(format!(
                "weights CSV row label {label:?} does not match header {:?}",
                labels[r]
            )));
        }
        if values.len() != size {
            return Err(Error::Parse(format!(
                "weights CSV row {label:?} has {} values, expected {size}",
                values.len()
            )));
        }
        weights.extend_from_slice(values);
    }
    WeightMatrix::from_parts(kind, labels, weights)
}
