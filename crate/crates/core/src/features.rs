//! Spectral features of channel samples: power delay profile, angular power
//! spectrum, Doppler spectrum and their Hoyer sparsities.
//!
//! Every spectrum is the mean squared magnitude of an unnormalized DFT, scaled
//! to unit sum.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelSample, Dataset};

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(RealMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("ragged matrix rows"));
        }
        RealMatrix::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.cols.max(1))
            .map(<[f64]>::to_vec)
            .collect()
    }
}

impl Serialize for RealMatrix {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RealMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        RealMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// The features a dataset can be assessed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Pdp,
    Aps,
    Doppler,
    PdpSparsity,
    ApsSparsity,
    DopplerSparsity,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 6] = [
        FeatureKind::Pdp,
        FeatureKind::Aps,
        FeatureKind::Doppler,
        FeatureKind::PdpSparsity,
        FeatureKind::ApsSparsity,
        FeatureKind::DopplerSparsity,
    ];

    /// PDP, APS and their sparsities: the default feature set for single-snapshot CSI.
    pub const DEFAULT: [FeatureKind; 4] = [
        FeatureKind::Pdp,
        FeatureKind::Aps,
        FeatureKind::PdpSparsity,
        FeatureKind::ApsSparsity,
    ];

    pub fn is_scalar(self) -> bool {
        matches!(
            self,
            FeatureKind::PdpSparsity | FeatureKind::ApsSparsity | FeatureKind::DopplerSparsity
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Pdp => "pdp",
            FeatureKind::Aps => "aps",
            FeatureKind::Doppler => "doppler",
            FeatureKind::PdpSparsity => "pdp_sparsity",
            FeatureKind::ApsSparsity => "aps_sparsity",
            FeatureKind::DopplerSparsity => "doppler_sparsity",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = FeatureKind::ALL.iter().map(|k| k.name()).collect();
                Error::invalid(format!(
                    "unknown feature '{s}', expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// Borrowed view of one feature of one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureView<'a> {
    Scalar(f64),
    Vector(&'a [f64]),
    Matrix(&'a RealMatrix),
}

impl<'a> FeatureView<'a> {
    /// Flattened entries (row-major for matrices).
    pub fn as_slice(&self) -> &[f64] {
        match self {
            FeatureView::Scalar(v) => std::slice::from_ref(v),
            FeatureView::Vector(v) => v,
            FeatureView::Matrix(m) => m.data(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            FeatureView::Scalar(_) => (1, 1),
            FeatureView::Vector(v) => (1, v.len()),
            FeatureView::Matrix(m) => (m.rows(), m.cols()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBundle {
    pub pdp: Vec<f64>,
    pub aps: RealMatrix,
    pub doppler: Option<Vec<f64>>,
    pub pdp_sparsity: f64,
    pub aps_sparsity: f64,
    pub doppler_sparsity: Option<f64>,
}

impl FeatureBundle {
    pub fn get(&self, kind: FeatureKind) -> Option<FeatureView<'_>> {
        match kind {
            FeatureKind::Pdp => Some(FeatureView::Vector(&self.pdp)),
            FeatureKind::Aps => Some(FeatureView::Matrix(&self.aps)),
            FeatureKind::Doppler => self.doppler.as_deref().map(FeatureView::Vector),
            FeatureKind::PdpSparsity => Some(FeatureView::Scalar(self.pdp_sparsity)),
            FeatureKind::ApsSparsity => Some(FeatureView::Scalar(self.aps_sparsity)),
            FeatureKind::DopplerSparsity => self.doppler_sparsity.map(FeatureView::Scalar),
        }
    }
}

/// Collect one feature across bundles, failing if any bundle lacks it.
pub fn feature_column(
    bundles: &[FeatureBundle],
    kind: FeatureKind,
) -> Result<Vec<FeatureView<'_>>> {
    bundles
        .iter()
        .map(|b| {
            b.get(kind).ok_or_else(|| {
                Error::Incompatible(format!(
                    "feature '{kind}' is unavailable (single-snapshot samples have no Doppler)"
                ))
            })
        })
        .collect()
}

fn dft_in_place(buf: &mut [Complex64], direction: FftDirection, planner: &mut FftPlanner<f64>) {
    if buf.len() > 1 {
        planner.plan_fft(buf.len(), direction).process(buf);
    }
}

fn unit_sum(mut power: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    let total: f64 = power.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::degenerate(format!(
            "{what}: sample carries no power"
        )));
    }
    power.iter_mut().for_each(|p| *p /= total);
    Ok(power)
}

/// Power delay profile: inverse DFT along subcarriers, power averaged over
/// antennas and snapshots.
pub fn extract_pdp(sample: &ChannelSample) -> Result<Vec<f64>> {
    let s = sample.shape();
    let mut planner = FftPlanner::new();
    let mut power = vec![0.0; s.subcarriers];
    let mut buf = vec![Complex64::default(); s.subcarriers];
    for a in 0..s.antennas() {
        for t in 0..s.snapshots {
            for (k, slot) in buf.iter_mut().enumerate() {
                let v = sample.get(a, k, t);
                *slot = Complex64::new(v.re as f64, v.im as f64);
            }
            dft_in_place(&mut buf, FftDirection::Inverse, &mut planner);
            for (p, v) in power.iter_mut().zip(&buf) {
                *p += v.norm_sqr();
            }
        }
    }
    unit_sum(power, "PDP")
}

/// Angular power spectrum: 2-D DFT over the antenna grid, power averaged over
/// subcarriers and snapshots. Returned as a `grid_rows x grid_cols` matrix.
pub fn extract_aps(sample: &ChannelSample) -> Result<RealMatrix> {
    let s = sample.shape();
    let (rows, cols) = (s.grid_rows, s.grid_cols);
    let mut planner = FftPlanner::new();
    let mut power = vec![0.0; rows * cols];
    let mut grid = vec![Complex64::default(); rows * cols];
    let mut column = vec![Complex64::default(); rows];
    for k in 0..s.subcarriers {
        for t in 0..s.snapshots {
            for (a, slot) in grid.iter_mut().enumerate() {
                let v = sample.get(a, k, t);
                *slot = Complex64::new(v.re as f64, v.im as f64);
            }
            for row in grid.chunks_mut(cols) {
                dft_in_place(row, FftDirection::Forward, &mut planner);
            }
            for c in 0..cols {
                for r in 0..rows {
                    column[r] = grid[r * cols + c];
                }
                dft_in_place(&mut column, FftDirection::Forward, &mut planner);
                for r in 0..rows {
                    grid[r * cols + c] = column[r];
                }
            }
            for (p, v) in power.iter_mut().zip(&grid) {
                *p += v.norm_sqr();
            }
        }
    }
    RealMatrix::new(rows, cols, unit_sum(power, "APS")?)
}

/// Doppler spectrum: DFT along snapshots, power averaged over antennas and
/// subcarriers. `None` for single-snapshot samples.
pub fn extract_doppler(sample: &ChannelSample) -> Result<Option<Vec<f64>>> {
    let s = sample.shape();
    if s.snapshots < 2 {
        return Ok(None);
    }
    let mut planner = FftPlanner::new();
    let mut power = vec![0.0; s.snapshots];
    let mut buf = vec![Complex64::default(); s.snapshots];
    for a in 0..s.antennas() {
        for k in 0..s.subcarriers {
            for (t, slot) in buf.iter_mut().enumerate() {
                let v = sample.get(a, k, t);
                *slot = Complex64::new(v.re as f64, v.im as f64);
            }
            dft_in_place(&mut buf, FftDirection::Forward, &mut planner);
            for (p, v) in power.iter_mut().zip(&buf) {
                *p += v.norm_sqr();
            }
        }
    }
    unit_sum(power, "Doppler").map(Some)
}

/// Hoyer sparsity `(sqrt(n) - |v|_1 / |v|_2) / (sqrt(n) - 1)`: 1 for a single
/// nonzero entry, 0 for a flat vector.
pub fn hoyer_sparsity(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::invalid("Hoyer sparsity needs at least 2 entries"));
    }
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid(
            "Hoyer sparsity needs finite nonnegative entries",
        ));
    }
    let l1: f64 = values.iter().sum();
    let l2 = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if l2 == 0.0 {
        return Err(Error::degenerate("Hoyer sparsity of an all-zero vector"));
    }
    let root_n = (n as f64).sqrt();
    Ok(((root_n - l1 / l2) / (root_n - 1.0)).clamp(0.0, 1.0))
}

pub fn extract_bundle(sample: &ChannelSample) -> Result<FeatureBundle> {
    let pdp = extract_pdp(sample)?;
    let aps = extract_aps(sample)?;
    let doppler = extract_doppler(sample)?;
    let pdp_sparsity = hoyer_sparsity(&pdp)?;
    // a 1x1 array has no angular structure; treat it as maximally sparse
    let aps_sparsity = if aps.data().len() < 2 {
        1.0
    } else {
        hoyer_sparsity(aps.data())?
    };
    let doppler_sparsity = doppler.as_deref().map(hoyer_sparsity).transpose()?;
    Ok(FeatureBundle {
        pdp,
        aps,
        doppler,
        pdp_sparsity,
        aps_sparsity,
        doppler_sparsity,
    })
}

/// One bundle per sample, in sample order.
pub fn extract_features(dataset: &Dataset) -> Result<Vec<FeatureBundle>> {
    dataset
        .samples()
        .par_iter()
        .enumerate()
        .map(|(i, s)| extract_bundle(s).map_err(|e| e.at_sample(i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use num_complex::Complex32;

    use super::*;
    use crate::model::SampleShape;

    fn cis(phase: f64) -> Complex32 {
        Complex32::new(phase.cos() as f32, phase.sin() as f32)
    }

    #[test]
    fn pdp_of_on_grid_path_is_indicator() {
        // H[f] = exp(-i 2 pi f f0 tau) with tau = d0 / (F f0)
        let shape = SampleShape::new((2, 2), 16, 2).unwrap();
        let d0 = 5;
        let s =
            ChannelSample::from_fn(
                shape,
                |_, f, _| cis(-2.0 * PI * f as f64 * d0 as f64 / 16.0),
            )
            .unwrap();
        let pdp = extract_pdp(&s).unwrap();
        for (d, p) in pdp.iter().enumerate() {
            let expected = if d == d0 { 1.0 } else { 0.0 };
            assert!((p - expected).abs() < 1e-12, "tap {d}: {p}");
        }
    }

    #[test]
    fn pdp_zero_delay_is_tap_zero() {
        let shape = SampleShape::new((1, 1), 8, 1).unwrap();
        let s = ChannelSample::from_fn(shape, |_, _, _| Complex32::new(0.3, -0.1)).unwrap();
        let pdp = extract_pdp(&s).unwrap();
        assert!((pdp[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_zero_sample_is_degenerate() {
        let shape = SampleShape::new((1, 2), 4, 2).unwrap();
        let s = ChannelSample::from_fn(shape, |_, _, _| Complex32::new(0.0, 0.0)).unwrap();
        assert!(matches!(extract_pdp(&s), Err(Error::Degenerate(_))));
        assert!(matches!(extract_aps(&s), Err(Error::Degenerate(_))));
        assert!(matches!(extract_doppler(&s), Err(Error::Degenerate(_))));
    }

    #[test]
    fn broadside_aps_is_bin_origin() {
        let shape = SampleShape::new((4, 8), 3, 1).unwrap();
        let s = ChannelSample::from_fn(shape, |_, f, _| cis(0.4 * f as f64)).unwrap();
        let aps = extract_aps(&s).unwrap();
        assert!((aps.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((aps.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conjugated_steering_mirrors_bins() {
        // steering exp(i 2 pi (r kr / R + c kc / C)) lands on bin (kr, kc);
        // its conjugate lands on (-kr mod R, -kc mod C)
        let (rows, cols, kr, kc) = (4usize, 8usize, 1usize, 3usize);
        let shape = SampleShape::new((rows, cols), 2, 1).unwrap();
        let phase = |a: usize| {
            let (r, c) = (a / cols, a % cols);
            2.0 * PI * (r as f64 * kr as f64 / rows as f64 + c as f64 * kc as f64 / cols as f64)
        };
        let plain = ChannelSample::from_fn(shape, |a, _, _| cis(phase(a))).unwrap();
        let conj = ChannelSample::from_fn(shape, |a, _, _| cis(-phase(a))).unwrap();
        let ap = extract_aps(&plain).unwrap();
        let ac = extract_aps(&conj).unwrap();
        assert!((ap.get(kr, kc) - 1.0).abs() < 1e-9);
        assert!((ac.get((rows - kr) % rows, (cols - kc) % cols) - 1.0).abs() < 1e-9);
        for r in 0..rows {
            for c in 0..cols {
                let mirrored = ac.get((rows - r) % rows, (cols - c) % cols);
                assert!((ap.get(r, c) - mirrored).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn doppler_absent_for_single_snapshot() {
        let shape = SampleShape::new((1, 1), 4, 1).unwrap();
        let s = ChannelSample::from_fn(shape, |_, _, _| Complex32::new(1.0, 0.0)).unwrap();
        assert_eq!(extract_doppler(&s).unwrap(), None);
        let b = extract_bundle(&s).unwrap();
        assert!(b.doppler.is_none() && b.doppler_sparsity.is_none());
        assert!(b.get(FeatureKind::Doppler).is_none());
    }

    #[test]
    fn static_channel_doppler_at_dc() {
        let shape = SampleShape::new((1, 2), 3, 4).unwrap();
        let s = ChannelSample::from_fn(shape, |a, f, _| cis(a as f64 + 0.7 * f as f64)).unwrap();
        let dop = extract_doppler(&s).unwrap().unwrap();
        assert!((dop[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn doppler_single_exponential() {
        let t_len = 8;
        let shape = SampleShape::new((1, 1), 2, t_len).unwrap();
        let s = ChannelSample::from_fn(shape, |_, _, t| cis(2.0 * PI * t as f64 / t_len as f64))
            .unwrap();
        let dop = extract_doppler(&s).unwrap().unwrap();
        assert!((dop[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hoyer_values() {
        assert!((hoyer_sparsity(&[1.0, 0.0, 0.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(hoyer_sparsity(&[1.0, 1.0, 1.0, 1.0]).unwrap().abs() < 1e-15);
        let expected = 2.0 - 2f64.sqrt();
        assert!((hoyer_sparsity(&[1.0, 1.0, 0.0, 0.0]).unwrap() - expected).abs() < 1e-12);
        assert!((hoyer_sparsity(&[1.0, 1.0, 0.0, 0.0]).unwrap() - 0.5858).abs() < 1e-4);
    }

    #[test]
    fn hoyer_errors() {
        assert!(hoyer_sparsity(&[0.0, 0.0]).is_err());
        assert!(hoyer_sparsity(&[1.0]).is_err());
        assert!(hoyer_sparsity(&[1.0, -0.5]).is_err());
    }

    #[test]
    fn feature_kind_parse() {
        for k in FeatureKind::ALL {
            assert_eq!(k.name().parse::<FeatureKind>().unwrap(), k);
        }
        assert!("psd".parse::<FeatureKind>().is_err());
    }

    #[test]
    fn bundle_json_field_names() {
        let shape = SampleShape::new((2, 2), 4, 1).unwrap();
        let s = ChannelSample::from_fn(shape, |a, f, _| cis(a as f64 * 0.3 + f as f64)).unwrap();
        let b = extract_bundle(&s).unwrap();
        let v: serde_json::Value = serde_json::to_value(&b).unwrap();
        let obj = v.as_object().unwrap();
        for key in [
            "pdp",
            "aps",
            "doppler",
            "pdp_sparsity",
            "aps_sparsity",
            "doppler_sparsity",
        ] {
            assert!(obj.contains_key(key), "missing {key}");
        }
        assert_eq!(obj["aps"].as_array().unwrap().len(), 2);
        assert!(obj["doppler"].is_null());
        let back: FeatureBundle = serde_json::from_value(v).unwrap();
        assert_eq!(back, b);
    }
}
