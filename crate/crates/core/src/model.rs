//! Channel samples, datasets and the CSID on-disk format.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use num_complex::Complex32;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSID_MAGIC: &[u8; 4] = b"CSID";
pub const CSID_VERSION: u16 = 1;
/// Fixed header size before the metadata block.
const HEADER_LEN: usize = 4 + 2 + 4 + 2 * 5 + 4;

/// Seed for every random draw in the crate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RandomSeed(pub u64);

impl RandomSeed {
    pub fn rng(self) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(self.0)
    }

    /// Independent stream `index` of this seed.
    pub fn stream(self, index: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.0);
        rng.set_stream(index);
        rng
    }

    /// Deterministically derive a child seed (splitmix64 finalizer).
    pub fn derive(self, index: u64) -> RandomSeed {
        let mut z = self
            .0
            .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RandomSeed(z ^ (z >> 31))
    }
}

/// Dimensions shared by every sample of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleShape {
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub subcarriers: usize,
    pub snapshots: usize,
}

impl SampleShape {
    pub fn new(grid: (usize, usize), subcarriers: usize, snapshots: usize) -> Result<Self> {
        let shape = SampleShape {
            grid_rows: grid.0,
            grid_cols: grid.1,
            subcarriers,
            snapshots,
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn antennas(&self) -> usize {
        self.grid_rows * self.grid_cols
    }

    pub fn len(&self) -> usize {
        self.antennas() * self.subcarriers * self.snapshots
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        if self.grid_rows == 0
            || self.grid_cols == 0
            || self.subcarriers == 0
            || self.snapshots == 0
        {
            return Err(Error::invalid(format!(
                "all sample dimensions must be >= 1, got {self:?}"
            )));
        }
        let limit = u16::MAX as usize;
        if self.antennas() > limit || self.subcarriers > limit || self.snapshots > limit {
            return Err(Error::invalid(format!(
                "sample dimensions exceed u16 range: {self:?}"
            )));
        }
        Ok(())
    }
}

/// One CSI measurement: complex gains indexed `[antenna][subcarrier][snapshot]`.
///
/// Antenna `a` sits at grid position `(a / grid_cols, a % grid_cols)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    shape: SampleShape,
    values: Vec<Complex32>,
}

impl ChannelSample {
    pub fn new(shape: SampleShape, values: Vec<Complex32>) -> Result<Self> {
        shape.validate()?;
        if values.len() != shape.len() {
            return Err(Error::shape(format!(
                "expected {} values for {shape:?}, got {}",
                shape.len(),
                values.len()
            )));
        }
        if let Some(pos) = values
            .iter()
            .position(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::invalid(format!(
                "non-finite channel value at flat index {pos}"
            )));
        }
        Ok(ChannelSample { shape, values })
    }

    /// Build a sample from a closure over `(antenna, subcarrier, snapshot)`.
    pub fn from_fn(
        shape: SampleShape,
        mut f: impl FnMut(usize, usize, usize) -> Complex32,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(shape.len());
        for a in 0..shape.antennas() {
            for k in 0..shape.subcarriers {
                for t in 0..shape.snapshots {
                    values.push(f(a, k, t));
                }
            }
        }
        ChannelSample::new(shape, values)
    }

    pub fn shape(&self) -> SampleShape {
        self.shape
    }

    pub fn values(&self) -> &[Complex32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, antenna: usize, subcarrier: usize, snapshot: usize) -> Complex32 {
        let s = &self.shape;
        self.values[(antenna * s.subcarriers + subcarrier) * s.snapshots + snapshot]
    }

    /// Multiply every entry by `factor`.
    pub fn scaled(&self, factor: Complex32) -> Result<Self> {
        ChannelSample::new(self.shape, self.values.iter().map(|v| v * factor).collect())
    }

    pub fn max_abs(&self) -> f32 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f32::max)
    }
}

/// An ordered, non-empty, shape-homogeneous collection of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    shape: SampleShape,
    samples: Vec<ChannelSample>,
    metadata: BTreeMap<String, String>,
}

impl Dataset {
    pub fn new(samples: Vec<ChannelSample>, metadata: BTreeMap<String, String>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::invalid("a dataset needs at least one sample"))?;
        let shape = first.shape();
        if let Some(i) = samples.iter().position(|s| s.shape() != shape) {
            return Err(Error::shape(format!(
                "sample {i} has shape {:?}, dataset shape is {shape:?}",
                samples[i].shape()
            )));
        }
        Ok(Dataset {
            shape,
            samples,
            metadata,
        })
    }

    pub fn shape(&self) -> SampleShape {
        self.shape
    }

    pub fn samples(&self) -> &[ChannelSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    /// Divide every sample by its own largest entry magnitude. All-zero samples are left as is.
    pub fn normalized_by_max(&self) -> Result<Dataset> {
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let m = s.max_abs();
                if m > 0.0 {
                    s.scaled(Complex32::new(1.0 / m, 0.0))
                } else {
                    Ok(s.clone())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mut metadata = self.metadata.clone();
        metadata.insert("normalized".into(), "max-entry".into());
        Dataset::new(samples, metadata)
    }

    /// Encode to CSID bytes.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let s = self.shape;
        s.validate()?;
        let n = u32::try_from(self.samples.len())
            .map_err(|_| Error::invalid("too many samples for CSID"))?;
        let meta = serde_json::to_vec(&self.metadata)?;
        let meta_len =
            u32::try_from(meta.len()).map_err(|_| Error::invalid("metadata block too large"))?;

        let mut out =
            Vec::with_capacity(HEADER_LEN + meta.len() + self.samples.len() * s.len() * 8);
        out.extend_from_slice(CSID_MAGIC);
        out.extend_from_slice(&CSID_VERSION.to_le_bytes());
        out.extend_from_slice(&n.to_le_bytes());
        for dim in [
            s.antennas(),
            s.grid_rows,
            s.grid_cols,
            s.subcarriers,
            s.snapshots,
        ] {
            out.extend_from_slice(&(dim as u16).to_le_bytes());
        }
        out.extend_from_slice(&meta_len.to_le_bytes());
        out.extend_from_slice(&meta);
        for sample in &self.samples {
            for v in &sample.values {
                out.extend_from_slice(&v.re.to_le_bytes());
                out.extend_from_slice(&v.im.to_le_bytes());
            }
        }
        Ok(out)
    }

    /// Decode CSID bytes. Errors carry the byte offset of the offending field.
    pub fn from_bytes(bytes: &[u8]) -> Result<Dataset> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4, "magic")?;
        if magic != CSID_MAGIC {
            return Err(Error::format(
                0,
                format!("bad magic {magic:?}, expected \"CSID\""),
            ));
        }
        let version = r.u16("version")?;
        if version != CSID_VERSION {
            return Err(Error::format(4, format!("unsupported version {version}")));
        }
        let n_pos = r.pos;
        let n = r.u32("n_samples")? as usize;
        if n == 0 {
            return Err(Error::format(n_pos as u64, "dataset declares zero samples"));
        }
        let dims_pos = r.pos;
        let antennas = r.u16("A")? as usize;
        let rows = r.u16("N_v")? as usize;
        let cols = r.u16("N_h")? as usize;
        let subcarriers = r.u16("F")? as usize;
        let snapshots = r.u16("T")? as usize;
        if antennas == 0 || rows * cols != antennas {
            return Err(Error::format(
                dims_pos as u64,
                format!("antenna count {antennas} inconsistent with grid {rows}x{cols}"),
            ));
        }
        if subcarriers == 0 || snapshots == 0 {
            return Err(Error::format(dims_pos as u64, "F and T must be >= 1"));
        }
        let shape = SampleShape {
            grid_rows: rows,
            grid_cols: cols,
            subcarriers,
            snapshots,
        };

        let meta_len = r.u32("metadata_len")? as usize;
        let meta_pos = r.pos;
        let meta = r.take(meta_len, "metadata")?;
        let metadata: BTreeMap<String, String> = if meta.is_empty() {
            BTreeMap::new()
        } else {
            serde_json::from_slice(meta)
                .map_err(|e| Error::format(meta_pos as u64, format!("metadata block: {e}")))?
        };

        let per_sample = shape.len();
        let needed = n
            .checked_mul(per_sample)
            .and_then(|v| v.checked_mul(8))
            .ok_or_else(|| Error::format(n_pos as u64, "payload size overflows"))?;
        let available = bytes.len() - r.pos;
        if available < needed {
            return Err(Error::format(
                (r.pos + available) as u64,
                format!("truncated payload: need {needed} bytes, found {available}"),
            ));
        }
        if available > needed {
            return Err(Error::format(
                (r.pos + needed) as u64,
                format!("{} trailing bytes after payload", available - needed),
            ));
        }

        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let mut values = Vec::with_capacity(per_sample);
            for _ in 0..per_sample {
                let at = r.pos;
                let re = f32::from_le_bytes(r.take(4, "payload")?.try_into().unwrap());
                let im = f32::from_le_bytes(r.take(4, "payload")?.try_into().unwrap());
                if !re.is_finite() || !im.is_finite() {
                    return Err(Error::format(at as u64, "non-finite value in payload"));
                }
                values.push(Complex32::new(re, im));
            }
            samples.push(ChannelSample { shape, values });
        }
        Ok(Dataset {
            shape,
            samples,
            metadata,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::format(
                self.bytes.len() as u64,
                format!("unexpected end of file while reading {what}"),
            )),
        }
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let bytes = fs::read(path)?;
    Dataset::from_bytes(&bytes)
}

pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let bytes = dataset.to_bytes()?;
    fs::write(path, bytes)?;
    Ok(())
}

/// Seeded partition into two disjoint parts. The first part gets `round(fraction * n)`
/// samples; both parts keep the original relative order.
pub fn split_dataset(
    dataset: &Dataset,
    fraction: f64,
    seed: RandomSeed,
) -> Result<(Dataset, Dataset)> {
    let n = dataset.len();
    if n < 2 {
        return Err(Error::invalid("splitting needs at least 2 samples"));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!(
            "fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let k = (fraction * n as f64).round() as usize;
    if k == 0 || k == n {
        return Err(Error::invalid(format!(
            "fraction {fraction} of {n} samples leaves an empty part"
        )));
    }
    let mut rng = seed.rng();
    let mut chosen = vec![false; n];
    for i in rand::seq::index::sample(&mut rng, n, k) {
        chosen[i] = true;
    }
    let (mut first, mut second) = (Vec::with_capacity(k), Vec::with_capacity(n - k));
    for (sample, &pick) in dataset.samples.iter().zip(&chosen) {
        if pick {
            first.push(sample.clone());
        } else {
            second.push(sample.clone());
        }
    }
    let mut meta_a = dataset.metadata.clone();
    meta_a.insert(
        "split".into(),
        format!("first;fraction={fraction};seed={}", seed.0),
    );
    let mut meta_b = dataset.metadata.clone();
    meta_b.insert(
        "split".into(),
        format!("second;fraction={fraction};seed={}", seed.0),
    );
    Ok((Dataset::new(first, meta_a)?, Dataset::new(second, meta_b)?))
}
