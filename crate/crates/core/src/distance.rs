//! Sample-to-sample distances and dense distance matrices.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureView, RealMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Euclidean,
    Gmc,
    /// Euclidean distance between cumulative sums. Real inputs only.
    Ecs,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 3] = [
        DistanceKind::Euclidean,
        DistanceKind::Gmc,
        DistanceKind::Ecs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistanceKind::Euclidean => "euclidean",
            DistanceKind::Gmc => "gmc",
            DistanceKind::Ecs => "ecs",
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DistanceKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown distance '{s}', expected euclidean, gmc or ecs"
                ))
            })
    }
}

/// Entries that admit an absolute difference: real or complex scalars.
pub trait Entry: Copy {
    fn abs_diff_sqr(self, other: Self) -> f64;
}

impl Entry for f64 {
    #[inline]
    fn abs_diff_sqr(self, other: Self) -> f64 {
        let d = self - other;
        d * d
    }
}

impl Entry for Complex64 {
    #[inline]
    fn abs_diff_sqr(self, other: Self) -> f64 {
        (self - other).norm_sqr()
    }
}

fn check_len(x: usize, y: usize) -> Result<()> {
    if x != y {
        return Err(Error::shape(format!("length mismatch: {x} vs {y}")));
    }
    Ok(())
}

/// `|x - y|_2`
pub fn dist_euclidean<T: Entry>(x: &[T], y: &[T]) -> Result<f64> {
    check_len(x.len(), y.len())?;
    Ok(x.iter()
        .zip(y)
        .map(|(a, b)| a.abs_diff_sqr(*b))
        .sum::<f64>()
        .sqrt())
}

/// Geman-McClure: `sum |x_i - y_i|^2 / (1 + |x_i - y_i|^2)`
pub fn dist_gmc<T: Entry>(x: &[T], y: &[T]) -> Result<f64> {
    check_len(x.len(), y.len())?;
    Ok(x.iter()
        .zip(y)
        .map(|(a, b)| {
            let d = a.abs_diff_sqr(*b);
            d / (1.0 + d)
        })
        .sum())
}

/// Euclidean distance between the running sums of `x` and `y`.
///
/// Only defined for real vectors; the signature enforces that.
pub fn dist_ecs(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(x.len(), y.len())?;
    let (mut cx, mut cy, mut acc) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        cx += a;
        cy += b;
        acc += (cx - cy) * (cx - cy);
    }
    Ok(acc.sqrt())
}

/// Frobenius distance between the 2-D cumulative sums `C_ij = sum_{l<=i, k<=j} X_lk`.
pub fn dist_ecs_matrix(x: &RealMatrix, y: &RealMatrix) -> Result<f64> {
    if (x.rows(), x.cols()) != (y.rows(), y.cols()) {
        return Err(Error::shape(format!(
            "matrix shapes differ: {}x{} vs {}x{}",
            x.rows(),
            x.cols(),
            y.rows(),
            y.cols()
        )));
    }
    Ok(ecs_2d(x.data(), y.data(), x.rows(), x.cols()))
}

fn ecs_2d(x: &[f64], y: &[f64], rows: usize, cols: usize) -> f64 {
    // cumulative sum of the difference equals the difference of cumulative sums
    let mut above = vec![0.0; cols];
    let mut acc = 0.0;
    for r in 0..rows {
        let mut row_run = 0.0;
        for c in 0..cols {
            row_run += x[r * cols + c] - y[r * cols + c];
            above[c] += row_run;
            acc += above[c] * above[c];
        }
    }
    acc.sqrt()
}

/// Distance between two feature values of the same shape.
pub fn feature_distance(
    x: &FeatureView<'_>,
    y: &FeatureView<'_>,
    kind: DistanceKind,
) -> Result<f64> {
    if x.shape() != y.shape() {
        return Err(Error::shape(format!(
            "feature shapes differ: {:?} vs {:?}",
            x.shape(),
            y.shape()
        )));
    }
    match kind {
        DistanceKind::Euclidean => dist_euclidean(x.as_slice(), y.as_slice()),
        DistanceKind::Gmc => dist_gmc(x.as_slice(), y.as_slice()),
        DistanceKind::Ecs => match (x, y) {
            (FeatureView::Matrix(a), FeatureView::Matrix(b)) => dist_ecs_matrix(a, b),
            _ => dist_ecs(x.as_slice(), y.as_slice()),
        },
    }
}

/// Dense `rows x cols` matrix of nonnegative pairwise distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    pub kind: Option<DistanceKind>,
    pub feature: Option<FeatureKind>,
}

impl DistanceMatrix {
    /// Wrap raw row-major values. Entries must be finite and nonnegative.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::shape(format!(
                "{rows}x{cols} distance matrix needs {} entries, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(format!(
                "distance entries must be finite and >= 0, found {v}"
            )));
        }
        Ok(DistanceMatrix {
            rows,
            cols,
            values,
            kind: None,
            feature: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("ragged distance matrix rows"));
        }
        DistanceMatrix::new(rows.len(), cols, rows.concat())
    }

    /// Pairwise distances between scalar points under `|x - y|`.
    pub fn from_scalars(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let values = xs
            .iter()
            .flat_map(|x| ys.iter().map(move |y| (x - y).abs()))
            .collect();
        DistanceMatrix::new(xs.len(), ys.len(), values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> DistanceMatrix {
        let mut values = Vec::with_capacity(self.values.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                values.push(self.get(i, j));
            }
        }
        DistanceMatrix {
            rows: self.cols,
            cols: self.rows,
            values,
            kind: self.kind,
            feature: self.feature,
        }
    }

    /// Elementwise power `D^p`.
    pub fn powf(&self, p: f64) -> DistanceMatrix {
        DistanceMatrix {
            values: self.values.iter().map(|v| v.powf(p)).collect(),
            ..self.clone()
        }
    }

    /// Elementwise scaling by `c >= 0`.
    pub fn scaled(&self, c: f64) -> DistanceMatrix {
        DistanceMatrix {
            values: self.values.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    /// Square, symmetric (to rounding) and zero on the diagonal.
    pub fn check_intra(&self, name: &str) -> Result<()> {
        if self.rows != self.cols {
            return Err(Error::shape(format!(
                "{name} must be square, got {}x{}",
                self.rows, self.cols
            )));
        }
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(*v)).max(1.0);
        for i in 0..self.rows {
            if self.get(i, i) != 0.0 {
                return Err(Error::invalid(format!(
                    "{name} has nonzero diagonal entry at {i}"
                )));
            }
            for j in (i + 1)..self.cols {
                if (self.get(i, j) - self.get(j, i)).abs() > 1e-12 * scale {
                    return Err(Error::invalid(format!(
                        "{name} is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `values[i][j] = d(a_i, b_j)`. Rows are computed in parallel; the result does
/// not depend on scheduling.
pub fn distance_matrix(
    a: &[FeatureView<'_>],
    b: &[FeatureView<'_>],
    kind: DistanceKind,
) -> Result<DistanceMatrix> {
    let mut all = a.iter().chain(b);
    if let Some(x) = all.next() {
        if let Some(bad) = all.find(|v| v.shape() != x.shape()) {
            return Err(Error::shape(format!(
                "heterogeneous feature shapes: {:?} vs {:?}",
                x.shape(),
                bad.shape()
            )));
        }
    }
    let rows: Vec<Vec<f64>> = a
        .par_iter()
        .map(|x| {
            b.iter()
                .map(|y| feature_distance(x, y, kind))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut m = DistanceMatrix::new(a.len(), b.len(), rows.concat())?;
    m.kind = Some(kind);
    Ok(m)
}

/// Intra-set matrix: computes the upper triangle and mirrors it, so the result
/// is exactly symmetric with a zero diagonal.
pub fn intra_distance_matrix(a: &[FeatureView<'_>], kind: DistanceKind) -> Result<DistanceMatrix> {
    if let Some(x) = a.first() {
        if let Some(bad) = a.iter().find(|v| v.shape() != x.shape()) {
            return Err(Error::shape(format!(
                "heterogeneous feature shapes: {:?} vs {:?}",
                x.shape(),
                bad.shape()
            )));
        }
    }
    let n = a.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| feature_distance(&a[i], &a[j], kind))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut values = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (off, d) in row.iter().enumerate() {
            let j = i + 1 + off;
            values[i * n + j] = *d;
            values[j * n + i] = *d;
        }
    }
    let mut m = DistanceMatrix::new(n, n, values)?;
    m.kind = Some(kind);
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_values() {
        assert_eq!(dist_euclidean(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 5.0);
        assert_eq!(dist_euclidean(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        let x = [Complex64::new(3.0, 0.0), Complex64::new(0.0, 4.0)];
        let y = [Complex64::new(0.0, 0.0); 2];
        assert_eq!(dist_euclidean(&x, &y).unwrap(), 5.0);
        assert!(dist_euclidean(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn gmc_values() {
        assert_eq!(dist_gmc(&[0.0], &[1.0]).unwrap(), 0.5);
        assert_eq!(dist_gmc(&[2.0, 3.0], &[2.0, 3.0]).unwrap(), 0.0);
        let x = [Complex64::new(0.0, 0.0)];
        let y = [Complex64::new(0.0, 1.0)];
        assert_eq!(dist_gmc(&x, &y).unwrap(), 0.5);
        // each term is below 1
        assert!(dist_gmc(&[0.0, 0.0, 0.0], &[1e3, -1e3, 7.0]).unwrap() < 3.0);
        assert!(dist_gmc(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn ecs_values() {
        assert!((dist_ecs(&[0.5, 0.5], &[1.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(dist_ecs(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert!(dist_ecs(&[0.2], &[0.2, 0.8]).is_err());
    }

    #[test]
    fn ecs_matrix_values() {
        let x = RealMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let y = RealMatrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((dist_ecs_matrix(&x, &y).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(dist_ecs_matrix(&x, &x).unwrap(), 0.0);
        let z = RealMatrix::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap();
        assert!(dist_ecs_matrix(&x, &z).is_err());
    }

    #[test]
    fn ecs_matrix_single_row_is_vector_ecs() {
        let a = [0.1, 0.4, 0.2, 0.3];
        let b = [0.3, 0.3, 0.0, 0.4];
        let ma = RealMatrix::new(1, 4, a.to_vec()).unwrap();
        let mb = RealMatrix::new(1, 4, b.to_vec()).unwrap();
        let d1 = dist_ecs_matrix(&ma, &mb).unwrap();
        let d2 = dist_ecs(&a, &b).unwrap();
        assert!((d1 - d2).abs() < 1e-15);
    }

    #[test]
    fn ecs_ignores_trailing_zero_mass() {
        let a = [0.1, 0.4, 0.5];
        let b = [0.5, 0.25, 0.25];
        let d = dist_ecs(&a, &b).unwrap();
        let d_pad = dist_ecs(&[0.1, 0.4, 0.5, 0.0, 0.0], &[0.5, 0.25, 0.25, 0.0, 0.0]).unwrap();
        assert!((d - d_pad).abs() < 1e-15);
    }

    #[test]
    fn matrix_shapes_and_spot_checks() {
        let xs = [vec![0.2, 0.8], vec![0.5, 0.5]];
        let ys = [vec![1.0, 0.0], vec![0.0, 1.0], vec![0.3, 0.7]];
        let a: Vec<_> = xs.iter().map(|v| FeatureView::Vector(v)).collect();
        let b: Vec<_> = ys.iter().map(|v| FeatureView::Vector(v)).collect();
        for kind in DistanceKind::ALL {
            let m = distance_matrix(&a, &b, kind).unwrap();
            assert_eq!((m.rows(), m.cols()), (2, 3));
            for i in 0..2 {
                for j in 0..3 {
                    assert_eq!(m.get(i, j), feature_distance(&a[i], &b[j], kind).unwrap());
                }
            }
        }
    }

    #[test]
    fn intra_matrix_symmetric_zero_diagonal() {
        let xs = [vec![0.2, 0.8], vec![0.5, 0.5], vec![0.9, 0.1]];
        let a: Vec<_> = xs.iter().map(|v| FeatureView::Vector(v)).collect();
        let m = intra_distance_matrix(&a, DistanceKind::Ecs).unwrap();
        m.check_intra("m").unwrap();
        let full = distance_matrix(&a, &a, DistanceKind::Ecs).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((m.get(i, j) - full.get(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn heterogeneous_shapes_rejected() {
        let xs = [vec![0.2, 0.8], vec![0.5, 0.25, 0.25]];
        let a: Vec<_> = xs.iter().map(|v| FeatureView::Vector(v)).collect();
        assert!(distance_matrix(&a, &a, DistanceKind::Euclidean).is_err());
    }

    #[test]
    fn check_intra_detects_asymmetry() {
        let m = DistanceMatrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        assert!(m.check_intra("m").is_err());
        let m = DistanceMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(m.check_intra("m").is_err());
    }

    #[test]
    fn negative_entries_rejected() {
        assert!(DistanceMatrix::new(1, 1, vec![-1.0]).is_err());
        assert!(DistanceMatrix::new(1, 1, vec![f64::NAN]).is_err());
    }
}
