//! Dataset difference measures computed from distance matrices.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::distance::{distance_matrix, intra_distance_matrix, DistanceKind, DistanceMatrix};
use crate::error::{Error, Result};
use crate::features::{extract_features, feature_column, FeatureBundle, FeatureKind};
use crate::model::Dataset;
use crate::transport::{solve_uniform_transport, TransportPlan};

/// Gaussian kernel bandwidth: a fixed value or the median of all positive distances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    #[default]
    MedianHeuristic,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "measure", rename_all = "snake_case")]
pub enum SimilarityMeasure {
    MeanDistance,
    Mmd { bandwidth: Bandwidth },
    Nnca,
    Wasserstein { p: f64 },
}

impl SimilarityMeasure {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SimilarityMeasure::Mmd {
                bandwidth: Bandwidth::Fixed(s),
            } if !(s > 0.0 && s.is_finite()) => Err(Error::invalid(format!(
                "MMD bandwidth must be > 0, got {s}"
            ))),
            SimilarityMeasure::Wasserstein { p } if !(p >= 1.0 && p.is_finite()) => Err(
                Error::invalid(format!("Wasserstein order must be >= 1, got {p}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SimilarityMeasure::MeanDistance => "mean",
            SimilarityMeasure::Mmd { .. } => "mmd",
            SimilarityMeasure::Nnca => "nnca",
            SimilarityMeasure::Wasserstein { .. } => "wasserstein",
        }
    }
}

impl fmt::Display for SimilarityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimilarityMeasure::Wasserstein { p } => write!(f, "wasserstein(p={p})"),
            SimilarityMeasure::Mmd {
                bandwidth: Bandwidth::Fixed(s),
            } => write!(f, "mmd(sigma={s})"),
            other => f.write_str(other.name()),
        }
    }
}

/// `(1 / (n_x n_y)) sum_ij D_ij`
pub fn mean_distance(d: &DistanceMatrix) -> Result<f64> {
    if d.values().is_empty() {
        return Err(Error::invalid("mean distance of an empty matrix"));
    }
    Ok(d.values().iter().sum::<f64>() / d.values().len() as f64)
}

fn check_triplet(dxx: &DistanceMatrix, dxy: &DistanceMatrix, dyy: &DistanceMatrix) -> Result<()> {
    dxx.check_intra("Dxx")?;
    dyy.check_intra("Dyy")?;
    if dxy.rows() != dxx.rows() || dxy.cols() != dyy.rows() {
        return Err(Error::shape(format!(
            "Dxy is {}x{} but Dxx is {}x{} and Dyy is {}x{}",
            dxy.rows(),
            dxy.cols(),
            dxx.rows(),
            dxx.cols(),
            dyy.rows(),
            dyy.cols()
        )));
    }
    Ok(())
}

/// Median of all strictly positive entries of the three matrices.
pub fn median_heuristic_bandwidth(
    dxx: &DistanceMatrix,
    dxy: &DistanceMatrix,
    dyy: &DistanceMatrix,
) -> Result<f64> {
    let mut pos: Vec<f64> = [dxx, dxy, dyy]
        .iter()
        .flat_map(|m| m.values().iter().copied())
        .filter(|v| *v > 0.0)
        .collect();
    median_of(&mut pos)
        .ok_or_else(|| Error::degenerate("all distances are zero; median bandwidth undefined"))
}

pub(crate) fn median_of(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Biased empirical MMD with Gaussian kernel `exp(-d^2 / (2 sigma^2))`.
///
/// The bracket is clamped at zero before the square root.
pub fn mmd(
    dxx: &DistanceMatrix,
    dxy: &DistanceMatrix,
    dyy: &DistanceMatrix,
    bandwidth: f64,
) -> Result<f64> {
    check_triplet(dxx, dxy, dyy)?;
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::invalid(format!(
            "MMD bandwidth must be > 0, got {bandwidth}"
        )));
    }
    let denom = 2.0 * bandwidth * bandwidth;
    let kernel_mean = |m: &DistanceMatrix| {
        m.values()
            .iter()
            .map(|d| (-d * d / denom).exp())
            .sum::<f64>()
            / m.values().len() as f64
    };
    let bracket = kernel_mean(dxx) - 2.0 * kernel_mean(dxy) + kernel_mean(dyy);
    Ok(bracket.max(0.0).sqrt())
}

/// Leave-one-out accuracy of the 1-nearest-neighbour classifier separating the
/// two sets. Ties go to the candidate with the smallest `(set, index)` key,
/// the first set before the second.
pub fn nnca(dxx: &DistanceMatrix, dxy: &DistanceMatrix, dyy: &DistanceMatrix) -> Result<f64> {
    check_triplet(dxx, dxy, dyy)?;
    let (nx, ny) = (dxx.rows(), dyy.rows());
    if nx + ny < 2 {
        return Err(Error::invalid("NNCA needs at least two samples in total"));
    }
    let mut correct = 0usize;
    for i in 0..nx {
        let mut best = f64::INFINITY;
        let mut same_set = false;
        for k in (0..nx).filter(|&k| k != i) {
            if dxx.get(i, k) < best {
                best = dxx.get(i, k);
                same_set = true;
            }
        }
        for j in 0..ny {
            if dxy.get(i, j) < best {
                best = dxy.get(i, j);
                same_set = false;
            }
        }
        correct += same_set as usize;
    }
    for j in 0..ny {
        let mut best = f64::INFINITY;
        let mut same_set = false;
        for k in 0..nx {
            if dxy.get(k, j) < best {
                best = dxy.get(k, j);
                same_set = false;
            }
        }
        for k in (0..ny).filter(|&k| k != j) {
            if dyy.get(j, k) < best {
                best = dyy.get(j, k);
                same_set = true;
            }
        }
        correct += same_set as usize;
    }
    Ok(correct as f64 / (nx + ny) as f64)
}

/// Order-`p` Wasserstein distance between the uniform empirical measures whose
/// pairwise distances are `d`. Returns `W_p` and the optimal plan for `D^p`.
pub fn wasserstein(d: &DistanceMatrix, p: f64) -> Result<(f64, TransportPlan)> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!(
            "Wasserstein order must be >= 1, got {p}"
        )));
    }
    let costs = d.powf(p);
    let plan = solve_uniform_transport(d.rows(), d.cols(), costs.values())?;
    Ok((plan.cost.max(0.0).powf(1.0 / p), plan))
}

/// Apply a measure to the features of two datasets.
pub fn feature_difference(
    x: &[FeatureBundle],
    y: &[FeatureBundle],
    feature: FeatureKind,
    kind: DistanceKind,
    measure: SimilarityMeasure,
) -> Result<f64> {
    measure.validate()?;
    let fx = feature_column(x, feature)?;
    let fy = feature_column(y, feature)?;
    let dxy = distance_matrix(&fx, &fy, kind)?;
    match measure {
        SimilarityMeasure::MeanDistance => mean_distance(&dxy),
        SimilarityMeasure::Wasserstein { p } => wasserstein(&dxy, p).map(|(w, _)| w),
        SimilarityMeasure::Mmd { bandwidth } => {
            let dxx = intra_distance_matrix(&fx, kind)?;
            let dyy = intra_distance_matrix(&fy, kind)?;
            let sigma = match bandwidth {
                Bandwidth::Fixed(s) => s,
                Bandwidth::MedianHeuristic => median_heuristic_bandwidth(&dxx, &dxy, &dyy)?,
            };
            mmd(&dxx, &dxy, &dyy, sigma)
        }
        SimilarityMeasure::Nnca => {
            let dxx = intra_distance_matrix(&fx, kind)?;
            let dyy = intra_distance_matrix(&fy, kind)?;
            nnca(&dxx, &dxy, &dyy)
        }
    }
}

/// Extract features from both datasets, then measure their difference on one feature.
pub fn dataset_difference(
    x: &Dataset,
    y: &Dataset,
    feature: FeatureKind,
    kind: DistanceKind,
    measure: SimilarityMeasure,
) -> Result<f64> {
    if x.shape() != y.shape() {
        return Err(Error::shape(format!(
            "datasets have different sample shapes: {:?} vs {:?}",
            x.shape(),
            y.shape()
        )));
    }
    let bx = extract_features(x)?;
    let by = extract_features(y)?;
    feature_difference(&bx, &by, feature, kind, measure)
}
