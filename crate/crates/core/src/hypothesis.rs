//! Binary hypothesis testing between two generative models, scored with
//! log-likelihood ratios under the full joint laws and under their causal
//! dependence tree and Chow-Liu tree approximations.
//!
//! The threshold sweep uses the exact empirical score set plus ±∞
//! sentinels, so the ROC is the exact step function of the scores with no
//! binning choices.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::info::{build_weights, gaussian_kl, tree_to_gaussian, WeightKind};
use crate::linalg::CholeskyFactor;
use crate::model::{build_covariance, sample, CovarianceMatrix, GenerativeModel};
use crate::trees::{best_causal_tree, kruskal_max_tree};

const LN_2PI: f64 = 1.8378770664093453;

/// Zero-mean Gaussian log-density at `x`:
/// `-½(xᵀK⁻¹x + log|K| + d·log 2π)`, solved through the Cholesky factor.
pub fn loglik(cov: &CovarianceMatrix, x: &[f64]) -> Result<f64> {
    if x.len() != cov.dim() {
        return Err(Error::DimMismatch {
            expected: cov.dim(),
            actual: x.len(),
        });
    }
    Ok(Scorer::prepare(cov)?.loglik(x))
}

/// Log-likelihood ratio `log p1(x) − log p0(x)`; decide the alternative
/// when the score exceeds the threshold.
pub fn llr(x: &[f64], k0: &CovarianceMatrix, k1: &CovarianceMatrix) -> Result<f64> {
    Ok(loglik(k1, x)? - loglik(k0, x)?)
}

/// Cached factorization for repeated density evaluations.
struct Scorer {
    chol: CholeskyFactor,
    log_norm: f64,
}

impl Scorer {
    fn prepare(cov: &CovarianceMatrix) -> Result<Self> {
        let chol = cov.matrix().cholesky()?;
        let log_norm = 0.5 * (chol.log_det() + cov.dim() as f64 * LN_2PI);
        Ok(Scorer { chol, log_norm })
    }

    fn loglik(&self, x: &[f64]) -> f64 {
        // xᵀK⁻¹x = |L⁻¹x|².
        let z = self.chol.solve_lower(x);
        let quad: f64 = z.iter().map(|v| v * v).sum();
        -0.5 * quad - self.log_norm
    }
}

/// One point of an ROC sweep at threshold `threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Empirical ROC curve of one scorer: points ordered by ascending
/// threshold, so rates are nonincreasing, from (1,1) at −∞ down to (0,0)
/// at +∞. `auc` is the trapezoidal integral of the points.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub scorer_label: String,
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    /// Exact empirical sweep: thresholds are the observed scores plus ±∞.
    pub fn from_scores(label: &str, h0_scores: &[f64], h1_scores: &[f64]) -> Self {
        let mut neg = h0_scores.to_vec();
        let mut pos = h1_scores.to_vec();
        neg.sort_unstable_by(f64::total_cmp);
        pos.sort_unstable_by(f64::total_cmp);

        let mut thresholds = Vec::with_capacity(neg.len() + pos.len() + 2);
        thresholds.push(f64::NEG_INFINITY);
        thresholds.extend_from_slice(&neg);
        thresholds.extend_from_slice(&pos);
        thresholds.push(f64::INFINITY);
        thresholds.sort_unstable_by(f64::total_cmp);
        thresholds.dedup();

        let frac_above = |sorted: &[f64], tau: f64| -> f64 {
            let above = sorted.len() - sorted.partition_point(|&s| s <= tau);
            above as f64 / sorted.len() as f64
        };

        let points: Vec<RocPoint> = thresholds
            .iter()
            .map(|&tau| RocPoint {
                threshold: tau,
                fpr: frac_above(&neg, tau),
                tpr: frac_above(&pos, tau),
            })
            .collect();

        let auc = trapezoid_auc(&points);
        RocCurve {
            scorer_label: label.to_string(),
            points,
            auc,
        }
    }

    /// Check the structural invariants: monotone rates, (1,1) and (0,0)
    /// endpoints, AUC consistent with the points.
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::Parse(format!("ROC {}: {reason}", self.scorer_label));
        let first = self.points.first().ok_or_else(|| fail("empty".into()))?;
        let last = self.points.last().unwrap();
        if first.threshold != f64::NEG_INFINITY || first.fpr != 1.0 || first.tpr != 1.0 {
            return Err(fail(format!("bad low endpoint {first:?}")));
        }
        if last.threshold != f64::INFINITY || last.fpr != 0.0 || last.tpr != 0.0 {
            return Err(fail(format!("bad high endpoint {last:?}")));
        }
        for w in self.points.windows(2) {
            if w[1].threshold <= w[0].threshold {
                return Err(fail("thresholds not strictly increasing".into()));
            }
            if w[1].fpr > w[0].fpr || w[1].tpr > w[0].tpr {
                return Err(fail("rates not nonincreasing".into()));
            }
        }
        let auc = trapezoid_auc(&self.points);
        if (auc - self.auc).abs() > 1e-12 {
            return Err(fail(format!("auc {} != trapezoid {auc}", self.auc)));
        }
        Ok(())
    }

    /// True positive rate at the largest sweep point with FPR ≤ the target:
    /// the achievable operating point at that false-positive budget.
    pub fn tpr_at_fpr(&self, fpr: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.fpr <= fpr)
            .map(|p| p.tpr)
            .fold(0.0, f64::max)
    }
}

fn trapezoid_auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[0].fpr - w[1].fpr) * 0.5 * (w[0].tpr + w[1].tpr))
        .sum()
}

/// Everything produced by one experiment: ROC curves for the full
/// distributions and for each approximation family, plus the learned
/// approximation quality per hypothesis.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub full: RocCurve,
    pub causal: RocCurve,
    pub chowliu: RocCurve,
    /// KL of (causal tree, Chow-Liu) approximation per hypothesis, nats.
    pub approx_kl: [(f64, f64); 2],
}

impl ExperimentResult {
    pub fn curves(&self) -> [&RocCurve; 3] {
        [&self.full, &self.causal, &self.chowliu]
    }
}

/// Seed the sampling stream of one hypothesis from the experiment seed and
/// the model's own parameters (FNV-1a over the exact bit patterns). Tying
/// the stream to the model rather than to the hypothesis slot makes label
/// swaps produce exactly negated score sets.
fn model_stream_seed(model: &GenerativeModel, seed: u64) -> u64 {
    const OFFSET: u64 = 0xcbf29ce484222325;
    const PRIME: u64 = 0x100000001b3;
    let mut h = OFFSET;
    let mut eat = |bits: u64| {
        for byte in bits.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(PRIME);
        }
    };
    eat(model.layout().processes() as u64);
    eat(model.layout().timesteps() as u64);
    let d = model.layout().var_count();
    for to in 0..d {
        for from in 0..d {
            let c = model.coeff(to, from);
            if c != 0.0 {
                eat(to as u64);
                eat(from as u64);
                eat(c.to_bits());
            }
        }
    }
    for &v in model.noise_vars() {
        eat(v.to_bits());
    }
    seed ^ h
}

/// Learn both approximations of one hypothesis from its exact covariance.
fn approximations(cov: &CovarianceMatrix) -> Result<(CovarianceMatrix, CovarianceMatrix)> {
    let di = build_weights(cov, WeightKind::ProcessDi)?;
    let causal_tree = best_causal_tree(&di)?;
    let causal = tree_to_gaussian(cov, &causal_tree)?;

    let mivar = build_weights(cov, WeightKind::VariableMi)?;
    let chowliu_tree = kruskal_max_tree(&mivar)?;
    let chowliu = tree_to_gaussian(cov, &chowliu_tree)?;
    Ok((causal, chowliu))
}

/// Run the binary hypothesis test: build both joint laws, learn each
/// hypothesis's tree approximations from its own covariance, draw `trials`
/// samples under each hypothesis, score every sample with the
/// log-likelihood ratio under each (K0-variant, K1-variant) pair, and
/// sweep the threshold over all observed scores.
pub fn run_experiment(
    model0: &GenerativeModel,
    model1: &GenerativeModel,
    trials: usize,
    seed: u64,
) -> Result<ExperimentResult> {
    if trials == 0 {
        return Err(Error::Parse("trials must be at least 1".to_string()));
    }
    if model0.layout() != model1.layout() {
        return Err(Error::DimMismatch {
            expected: model0.layout().var_count(),
            actual: model1.layout().var_count(),
        });
    }

    let k0 = build_covariance(model0)?;
    let k1 = build_covariance(model1)?;
    let (k0_causal, k0_chowliu) = approximations(&k0)?;
    let (k1_causal, k1_chowliu) = approximations(&k1)?;
    let approx_kl = [
        (gaussian_kl(&k0, &k0_causal)?, gaussian_kl(&k0, &k0_chowliu)?),
        (gaussian_kl(&k1, &k1_causal)?, gaussian_kl(&k1, &k1_chowliu)?),
    ];

    let samples0 = sample(model0, model_stream_seed(model0, seed), trials);
    let samples1 = sample(model1, model_stream_seed(model1, seed), trials);

    let scorers: [(&str, &CovarianceMatrix, &CovarianceMatrix); 3] = [
        ("full", &k0, &k1),
        ("causal", &k0_causal, &k1_causal),
        ("chowliu", &k0_chowliu, &k1_chowliu),
    ];

    let mut curves = Vec::with_capacity(3);
    for (label, c0, c1) in scorers {
        let s0 = Scorer::prepare(c0)?;
        let s1 = Scorer::prepare(c1)?;
        let score = |row: &[f64]| s1.loglik(row) - s0.loglik(row);

        #[cfg(feature = "parallel")]
        let (h0_scores, h1_scores): (Vec<f64>, Vec<f64>) = {
            use rayon::prelude::*;
            let h0 = (0..trials)
                .into_par_iter()
                .map(|k| score(samples0.row(k)))
                .collect();
            let h1 = (0..trials)
                .into_par_iter()
                .map(|k| score(samples1.row(k)))
                .collect();
            (h0, h1)
        };
        #[cfg(not(feature = "parallel"))]
        let (h0_scores, h1_scores): (Vec<f64>, Vec<f64>) = (
            samples0.rows().map(&score).collect(),
            samples1.rows().map(&score).collect(),
        );

        curves.push(RocCurve::from_scores(label, &h0_scores, &h1_scores));
    }

    let chowliu = curves.pop().unwrap();
    let causal = curves.pop().unwrap();
    let full = curves.pop().unwrap();
    Ok(ExperimentResult {
        full,
        causal,
        chowliu,
        approx_kl,
    })
}

/// CSV with columns `scorer,threshold,fpr,tpr` and one trailing
/// `# auc_<scorer>=<value>` comment per curve.
pub fn write_roc_csv<W: Write + ?Sized>(
    out: &mut W,
    curves: &[&RocCurve],
    comments: &[String],
) -> io::Result<()> {
    for line in comments {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "scorer,threshold,fpr,tpr")?;
    for curve in curves {
        for p in &curve.points {
            writeln!(
                out,
                "{},{},{},{}",
                curve.scorer_label, p.threshold, p.fpr, p.tpr
            )?;
        }
    }
    for curve in curves {
        writeln!(out, "# auc_{}={}", curve.scorer_label, curve.auc)?;
    }
    Ok(())
}
