//! Distances between consecutive TPR snapshot vectors.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DriftKind {
    Mss,
    Mss2,
    Cosine,
    JaccardTopK,
    Euclidean,
    Jsd,
    Kl,
    Chebyshev,
    Wasserstein,
}

impl DriftKind {
    pub const ALL: [DriftKind; 9] = [
        DriftKind::Mss,
        DriftKind::Mss2,
        DriftKind::Cosine,
        DriftKind::JaccardTopK,
        DriftKind::Euclidean,
        DriftKind::Jsd,
        DriftKind::Kl,
        DriftKind::Chebyshev,
        DriftKind::Wasserstein,
    ];

    /// Suffix used in strategy names (`TPR-<suffix>`).
    pub fn label(self) -> &'static str {
        match self {
            DriftKind::Mss => "MSS",
            DriftKind::Mss2 => "MSS2",
            DriftKind::Cosine => "Cosine",
            DriftKind::JaccardTopK => "Jaccard",
            DriftKind::Euclidean => "Euclidean",
            DriftKind::Jsd => "JSD",
            DriftKind::Kl => "KL",
            DriftKind::Chebyshev => "Chebyshev",
            DriftKind::Wasserstein => "Wasserstein",
        }
    }

    pub fn is_symmetric(self) -> bool {
        self != DriftKind::Kl
    }
}

impl fmt::Display for DriftKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DriftKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DriftKind::ALL
            .into_iter()
            .find(|k| k.label().eq_ignore_ascii_case(s) || (s == "MSS²" && *k == DriftKind::Mss2))
            .ok_or_else(|| Error::UnknownStrategy(s.to_string()))
    }
}

pub const DEFAULT_KL_EPSILON: f64 = 1e-12;
pub const DEFAULT_TOPK_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftMetric {
    pub kind: DriftKind,
    /// Support size for `JaccardTopK`; `None` means `max(1, ⌈0.1·|V|⌉)`.
    pub topk: Option<usize>,
    /// Denominator smoothing for `Kl`.
    pub epsilon: f64,
}

impl DriftMetric {
    pub fn new(kind: DriftKind) -> Self {
        Self {
            kind,
            topk: None,
            epsilon: DEFAULT_KL_EPSILON,
        }
    }

    pub fn with_topk(mut self, k: usize) -> Self {
        self.topk = Some(k);
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.topk == Some(0) {
            return Err(Error::InvalidParameter("topk must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }

    pub fn resolved_topk(&self, len: usize) -> usize {
        self.topk
            .unwrap_or_else(|| ((DEFAULT_TOPK_FRACTION * len as f64).ceil() as usize).max(1))
    }
}

/// Drift between two snapshot vectors.
pub fn drift(prev: &[f64], curr: &[f64], metric: &DriftMetric) -> Result<f64> {
    metric.validate()?;
    if prev.len() != curr.len() {
        return Err(Error::LengthMismatch {
            left: prev.len(),
            right: curr.len(),
        });
    }
    let n = prev.len();
    if n == 0 {
        return Ok(0.0);
    }
    let value = match metric.kind {
        DriftKind::Mss => prev.iter().zip(curr).map(|(p, c)| (c - p).abs()).sum::<f64>() / n as f64,
        DriftKind::Mss2 => {
            let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
            (mean(curr) - mean(prev)).abs()
        }
        DriftKind::Cosine => cosine_distance(prev, curr),
        DriftKind::JaccardTopK => {
            let k = metric.resolved_topk(n);
            let a = binarize_topk(prev, k)?;
            let b = binarize_topk(curr, k)?;
            let union = a.union(&b).count();
            1.0 - a.intersection(&b).count() as f64 / union as f64
        }
        DriftKind::Euclidean => prev
            .iter()
            .zip(curr)
            .map(|(p, c)| (p - c) * (p - c))
            .sum::<f64>()
            .sqrt(),
        DriftKind::Chebyshev => prev
            .iter()
            .zip(curr)
            .map(|(p, c)| (p - c).abs())
            .fold(0.0, f64::max),
        DriftKind::Jsd => match probability_pair(prev, curr)? {
            None => 0.0,
            Some((p, q)) => {
                let m: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
                (0.5 * kl_terms(&p, &m, 0.0) + 0.5 * kl_terms(&q, &m, 0.0)).max(0.0)
            }
        },
        DriftKind::Kl => match probability_pair(prev, curr)? {
            None => 0.0,
            Some((p, q)) => kl_terms(&p, &q, metric.epsilon).max(0.0),
        },
        DriftKind::Wasserstein => match probability_pair(prev, curr)? {
            None => 0.0,
            Some((p, q)) => {
                // Unit-spaced support: W1 is the L1 distance between CDFs.
                let mut cp = 0.0;
                let mut cq = 0.0;
                let mut total = 0.0;
                for i in 0..n - 1 {
                    cp += p[i];
                    cq += q[i];
                    total += (cp - cq).abs();
                }
                total
            }
        },
    };
    Ok(value)
}

fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    match (na > 0.0, nb > 0.0) {
        (false, false) => 0.0,
        (true, true) => (1.0 - dot / (na * nb)).max(0.0),
        _ => 1.0,
    }
}

/// `Σ pᵢ ln(pᵢ / (qᵢ + ε))` with `0 · ln 0 = 0`.
fn kl_terms(p: &[f64], q: &[f64], epsilon: f64) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / (qi + epsilon)).ln())
        .sum()
}

/// Both vectors normalized to sum 1; `None` when both are all-zero.
fn probability_pair(a: &[f64], b: &[f64]) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    if a.iter().chain(b).any(|x| *x < 0.0) {
        return Err(Error::InvalidParameter("distribution metrics need non-negative vectors".into()));
    }
    match (sa > 0.0, sb > 0.0) {
        (false, false) => Ok(None),
        (true, true) => Ok(Some((
            a.iter().map(|x| x / sa).collect(),
            b.iter().map(|x| x / sb).collect(),
        ))),
        _ => Err(Error::ZeroMass),
    }
}

/// Indices of the `k` largest entries; ties go to the lower index.
pub fn binarize_topk(vector: &[f64], k: usize) -> Result<BTreeSet<usize>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > vector.len() {
        log::warn!("top-{k} requested from a vector of length {}; returning all", vector.len());
    }
    let mut order: Vec<usize> = (0..vector.len()).collect();
    order.sort_by(|&i, &j| vector[j].total_cmp(&vector[i]).then(i.cmp(&j)));
    Ok(order.into_iter().take(k).collect())
}
