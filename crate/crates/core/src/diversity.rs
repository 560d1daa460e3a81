//! Intra-dataset diversity: histogram entropy for scalar features; pairwise
//! distance, DPP log-determinant and JPEG size of the mean image for spectra.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::distance::{intra_distance_matrix, DistanceKind, DistanceMatrix};
use crate::error::{Error, Result};
use crate::features::{
    extract_features, feature_column, FeatureBundle, FeatureKind, FeatureView, RealMatrix,
};
use crate::jpeg;
use crate::model::Dataset;
use crate::similarity::{median_of, Bandwidth};

pub const DEFAULT_BINS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinEdges {
    /// `bins` equal-width bins spanning the observed `[min, max]`.
    Uniform { bins: usize },
    /// Strictly increasing edges; `edges.len() - 1` bins, last bin right-closed.
    Explicit(Vec<f64>),
}

impl BinEdges {
    pub fn bin_count(&self) -> usize {
        match self {
            BinEdges::Uniform { bins } => *bins,
            BinEdges::Explicit(e) => e.len().saturating_sub(1),
        }
    }
}

impl Default for BinEdges {
    fn default() -> Self {
        BinEdges::Uniform { bins: DEFAULT_BINS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum DiversityMeasure {
    Entropy {
        edges: BinEdges,
    },
    DistanceBased {
        distance: DistanceKind,
    },
    Dpp {
        distance: DistanceKind,
        bandwidth: Bandwidth,
        jitter: f64,
    },
    Compression {
        quality: u8,
    },
}

impl DiversityMeasure {
    pub fn name(&self) -> &'static str {
        match self {
            DiversityMeasure::Entropy { .. } => "entropy",
            DiversityMeasure::DistanceBased { .. } => "distance",
            DiversityMeasure::Dpp { .. } => "dpp",
            DiversityMeasure::Compression { .. } => "compression",
        }
    }

    /// Entropy for scalar features, ECS distance-based otherwise.
    pub fn default_for(feature: FeatureKind) -> Self {
        if feature.is_scalar() {
            DiversityMeasure::Entropy {
                edges: BinEdges::default(),
            }
        } else {
            DiversityMeasure::DistanceBased {
                distance: DistanceKind::Ecs,
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DiversityMeasure::Entropy { edges } => match edges {
                BinEdges::Uniform { bins } if *bins < 2 => Err(Error::invalid(format!(
                    "entropy needs at least 2 bins, got {bins}"
                ))),
                BinEdges::Explicit(e) if e.len() < 3 => {
                    Err(Error::invalid("explicit edges must define at least 2 bins"))
                }
                BinEdges::Explicit(e)
                    if e.windows(2).any(|w| !(w[0] < w[1])) || e.iter().any(|v| !v.is_finite()) =>
                {
                    Err(Error::invalid(
                        "explicit bin edges must be finite and strictly increasing",
                    ))
                }
                _ => Ok(()),
            },
            DiversityMeasure::Dpp {
                bandwidth, jitter, ..
            } => {
                if let Bandwidth::Fixed(s) = bandwidth {
                    if !(*s > 0.0 && s.is_finite()) {
                        return Err(Error::invalid(format!(
                            "DPP bandwidth must be > 0, got {s}"
                        )));
                    }
                }
                if !(*jitter >= 0.0 && jitter.is_finite()) {
                    return Err(Error::invalid(format!(
                        "DPP jitter must be >= 0, got {jitter}"
                    )));
                }
                Ok(())
            }
            DiversityMeasure::Compression { quality } if !(1..=100).contains(quality) => Err(
                Error::invalid(format!("JPEG quality must be in 1..=100, got {quality}")),
            ),
            _ => Ok(()),
        }
    }
}

fn histogram(values: &[f64], edges: &BinEdges) -> Result<Vec<usize>> {
    let s = edges.bin_count();
    let mut counts = vec![0usize; s];
    match edges {
        BinEdges::Uniform { .. } => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            for v in values {
                let bin = if span > 0.0 {
                    (((v - lo) / span * s as f64).floor() as usize).min(s - 1)
                } else {
                    0
                };
                counts[bin] += 1;
            }
        }
        BinEdges::Explicit(e) => {
            let (lo, hi) = (e[0], e[e.len() - 1]);
            for &v in values {
                if v < lo || v > hi {
                    return Err(Error::invalid(format!(
                        "value {v} outside bin edges [{lo}, {hi}]"
                    )));
                }
                // first edge strictly greater than v, minus one; right-closed last bin
                let bin = e
                    .partition_point(|&edge| edge <= v)
                    .saturating_sub(1)
                    .min(s - 1);
                counts[bin] += 1;
            }
        }
    }
    Ok(counts)
}

/// Shannon entropy of the histogram divided by `log S`, in `[0, 1]`.
pub fn diversity_entropy(values: &[f64], edges: &BinEdges) -> Result<f64> {
    DiversityMeasure::Entropy {
        edges: edges.clone(),
    }
    .validate()?;
    if values.is_empty() {
        return Err(Error::invalid("entropy of an empty sample"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("entropy input must be finite"));
    }
    let counts = histogram(values, edges)?;
    let n = values.len() as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    Ok((h / (edges.bin_count() as f64).ln()).clamp(0.0, 1.0))
}

/// Mean of the `n(n-1)/2` distinct pairwise distances.
pub fn diversity_distance(d: &DistanceMatrix) -> Result<f64> {
    d.check_intra("intra-set distance matrix")?;
    let n = d.rows();
    if n < 2 {
        return Err(Error::invalid(
            "distance-based diversity needs at least 2 samples",
        ));
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            sum += d.get(i, j);
        }
    }
    Ok(sum / (n * (n - 1) / 2) as f64)
}

/// `log det(L + jitter I)` with `L_ij = exp(-D_ij^2 / (2 sigma^2))`, via Cholesky.
pub fn diversity_dpp(d: &DistanceMatrix, bandwidth: f64, jitter: f64) -> Result<f64> {
    d.check_intra("intra-set distance matrix")?;
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::invalid(format!(
            "DPP bandwidth must be > 0, got {bandwidth}"
        )));
    }
    if !(jitter >= 0.0 && jitter.is_finite()) {
        return Err(Error::invalid(format!(
            "DPP jitter must be >= 0, got {jitter}"
        )));
    }
    let n = d.rows();
    if n == 0 {
        return Err(Error::invalid("DPP diversity of an empty set"));
    }
    let denom = 2.0 * bandwidth * bandwidth;
    let kernel = DMatrix::from_fn(n, n, |i, j| {
        let v = d.get(i, j);
        (-v * v / denom).exp() + if i == j { jitter } else { 0.0 }
    });
    let chol = kernel.cholesky().ok_or_else(|| {
        Error::degenerate(
            "DPP kernel is singular (log det = -inf); duplicate samples or too small jitter",
        )
    })?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    if !log_det.is_finite() {
        return Err(Error::degenerate("DPP log determinant is not finite"));
    }
    Ok(log_det)
}

/// Entrywise mean of equally shaped matrices.
pub fn mean_matrix(features: &[FeatureView<'_>]) -> Result<RealMatrix> {
    let first = features
        .first()
        .ok_or_else(|| Error::invalid("mean of an empty feature set"))?;
    let (rows, cols) = first.shape();
    let mut acc = vec![0.0; rows * cols];
    for f in features {
        if f.shape() != (rows, cols) {
            return Err(Error::shape(format!(
                "feature shapes differ: {:?} vs {:?}",
                (rows, cols),
                f.shape()
            )));
        }
        for (a, v) in acc.iter_mut().zip(f.as_slice()) {
            *a += v;
        }
    }
    let n = features.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    RealMatrix::new(rows, cols, acc)
}

/// Map entries affinely from `[min, max]` to gray levels 0..=255. Constant images map to 128.
pub fn to_gray_levels(m: &RealMatrix) -> Vec<u8> {
    let lo = m.data().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = m.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    m.data()
        .iter()
        .map(|v| {
            if span > 0.0 {
                ((v - lo) / span * 255.0).round() as u8
            } else {
                128
            }
        })
        .collect()
}

/// `1 / bytes` of the JPEG encoding of the mean feature image.
pub fn diversity_compression(features: &[FeatureView<'_>], quality: u8) -> Result<f64> {
    let mean = mean_matrix(features)?;
    let pixels = to_gray_levels(&mean);
    let bytes = jpeg::encode_grayscale(&pixels, mean.cols(), mean.rows(), quality)?;
    Ok(1.0 / bytes.len() as f64)
}

/// Apply a diversity measure to one feature of pre-extracted bundles.
pub fn feature_diversity(
    bundles: &[FeatureBundle],
    feature: FeatureKind,
    measure: &DiversityMeasure,
) -> Result<f64> {
    measure.validate()?;
    let column = feature_column(bundles, feature)?;
    match measure {
        DiversityMeasure::Entropy { edges } => {
            if !feature.is_scalar() {
                return Err(Error::Incompatible(format!(
                    "entropy diversity needs a scalar feature, '{feature}' is a spectrum"
                )));
            }
            let values: Vec<f64> = column.iter().map(|v| v.as_slice()[0]).collect();
            diversity_entropy(&values, edges)
        }
        _ if feature.is_scalar() => Err(Error::Incompatible(format!(
            "{} diversity needs a spectral feature, '{feature}' is a scalar",
            measure.name()
        ))),
        DiversityMeasure::DistanceBased { distance } => {
            diversity_distance(&intra_distance_matrix(&column, *distance)?)
        }
        DiversityMeasure::Dpp {
            distance,
            bandwidth,
            jitter,
        } => {
            let d = intra_distance_matrix(&column, *distance)?;
            let sigma = match bandwidth {
                Bandwidth::Fixed(s) => *s,
                Bandwidth::MedianHeuristic => {
                    let mut pos: Vec<f64> =
                        d.values().iter().copied().filter(|v| *v > 0.0).collect();
                    median_of(&mut pos).ok_or_else(|| {
                        Error::degenerate("all distances are zero; median bandwidth undefined")
                    })?
                }
            };
            diversity_dpp(&d, sigma, *jitter)
        }
        DiversityMeasure::Compression { quality } => diversity_compression(&column, *quality),
    }
}

pub fn dataset_diversity(
    dataset: &Dataset,
    feature: FeatureKind,
    measure: &DiversityMeasure,
) -> Result<f64> {
    measure.validate()?;
    let bundles = extract_features(dataset)?;
    feature_diversity(&bundles, feature, measure)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_values() {
        let uniform = BinEdges::Uniform { bins: 4 };
        // one value per bin
        assert!((diversity_entropy(&[0.0, 1.0, 2.0, 3.0], &uniform).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(diversity_entropy(&[0.4, 0.4, 0.4], &uniform).unwrap(), 0.0);
        // frequencies (0.5, 0.5, 0, 0) over 4 explicit bins -> log 2 / log 4
        let explicit = BinEdges::Explicit(vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        let v = diversity_entropy(&[0.5, 0.5, 1.5, 1.5], &explicit).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn entropy_right_closed_last_bin() {
        let explicit = BinEdges::Explicit(vec![0.0, 0.5, 1.0]);
        let counts = histogram(&[0.0, 0.5, 1.0], &explicit).unwrap();
        assert_eq!(counts, vec![1, 2]);
        assert!(diversity_entropy(&[1.5], &explicit).is_err());
    }

    #[test]
    fn entropy_errors() {
        assert!(diversity_entropy(&[1.0], &BinEdges::Uniform { bins: 1 }).is_err());
        assert!(diversity_entropy(&[], &BinEdges::Uniform { bins: 4 }).is_err());
        assert!(diversity_entropy(&[0.1], &BinEdges::Explicit(vec![0.0, 0.0, 1.0])).is_err());
    }

    #[test]
    fn distance_diversity_values() {
        let d = DistanceMatrix::from_scalars(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).unwrap();
        assert!((diversity_distance(&d).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        let two = DistanceMatrix::from_scalars(&[0.0, 0.7], &[0.0, 0.7]).unwrap();
        assert!((diversity_distance(&two).unwrap() - 0.7).abs() < 1e-15);
        let same = DistanceMatrix::new(3, 3, vec![0.0; 9]).unwrap();
        assert_eq!(diversity_distance(&same).unwrap(), 0.0);
        assert!(diversity_distance(&DistanceMatrix::new(1, 1, vec![0.0]).unwrap()).is_err());
        assert!((diversity_distance(&d.scaled(2.5)).unwrap() - 2.5 * 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn dpp_values() {
        let one = DistanceMatrix::new(1, 1, vec![0.0]).unwrap();
        assert_eq!(diversity_dpp(&one, 1.0, 0.0).unwrap(), 0.0);
        // 2x2: det = 1 - exp(-d^2 / sigma^2)
        let (dist, sigma) = (0.9, 0.6);
        let two = DistanceMatrix::from_scalars(&[0.0, dist], &[0.0, dist]).unwrap();
        let expected = (1.0 - (-dist * dist / (sigma * sigma)).exp()).ln();
        assert!((diversity_dpp(&two, sigma, 0.0).unwrap() - expected).abs() < 1e-12);
        let dup = DistanceMatrix::new(2, 2, vec![0.0; 4]).unwrap();
        assert!(matches!(
            diversity_dpp(&dup, 1.0, 0.0),
            Err(Error::Degenerate(_))
        ));
        assert!(diversity_dpp(&dup, 1.0, 1e-3).is_ok());
    }

    #[test]
    fn dpp_nonpositive_without_jitter() {
        let pts = [0.0, 0.3, 1.1, 2.0, 4.5];
        let d = DistanceMatrix::from_scalars(&pts, &pts).unwrap();
        let v = diversity_dpp(&d, 1.0, 0.0).unwrap();
        assert!(v <= 0.0);
        let with_dup = [0.0, 0.3, 1.1, 2.0, 4.5, 2.0];
        let dd = DistanceMatrix::from_scalars(&with_dup, &with_dup).unwrap();
        assert!(diversity_dpp(&dd, 1.0, 0.0).is_err());
        let jitter = 1e-9;
        assert!(
            diversity_dpp(&dd, 1.0, jitter).unwrap() <= diversity_dpp(&d, 1.0, jitter).unwrap()
        );
    }

    #[test]
    fn gray_levels() {
        let m = RealMatrix::new(1, 3, vec![-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(to_gray_levels(&m), vec![0, 128, 255]);
        let c = RealMatrix::new(2, 2, vec![0.3; 4]).unwrap();
        assert_eq!(to_gray_levels(&c), vec![128; 4]);
    }

    #[test]
    fn compression_positive_and_mean_only() {
        let a = RealMatrix::new(2, 8, (0..16).map(|v| (v * 7 % 5) as f64).collect()).unwrap();
        let b = RealMatrix::new(2, 8, (0..16).map(|v| (v * 3 % 4) as f64).collect()).unwrap();
        let fwd = [FeatureView::Matrix(&a), FeatureView::Matrix(&b)];
        let rev = [FeatureView::Matrix(&b), FeatureView::Matrix(&a)];
        let v = diversity_compression(&fwd, 75).unwrap();
        assert!(v > 0.0);
        assert_eq!(v, diversity_compression(&rev, 75).unwrap());
        let c = RealMatrix::new(1, 3, vec![0.0; 3]).unwrap();
        assert!(
            diversity_compression(&[FeatureView::Matrix(&a), FeatureView::Matrix(&c)], 75).is_err()
        );
    }

    #[test]
    fn measure_validation() {
        assert!(DiversityMeasure::Compression { quality: 0 }
            .validate()
            .is_err());
        assert!(DiversityMeasure::Dpp {
            distance: DistanceKind::Euclidean,
            bandwidth: Bandwidth::Fixed(0.0),
            jitter: 0.0
        }
        .validate()
        .is_err());
        assert!(DiversityMeasure::Entropy {
            edges: BinEdges::Explicit(vec![0.0, 2.0, 1.0])
        }
        .validate()
        .is_err());
    }
}
