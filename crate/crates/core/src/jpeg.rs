//! Minimal baseline JPEG encoder for 8-bit grayscale images.
//!
//! Standard luminance quantization table scaled by quality, standard Huffman
//! tables, single component, 8x8 blocks with edge replication. The forward DCT
//! is the classic integer "slow" transform, so the output is bit-identical on
//! every platform.

use crate::error::{Error, Result};

const STD_LUMA_QUANT: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Zigzag position -> natural (row-major) position.
const NATURAL_ORDER: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, //
    12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6, 7, 14, 21, 28, //
    35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51, //
    58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
];

const DC_LUMA_BITS: [u8; 16] = [0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0];
const DC_LUMA_VALS: [u8; 12] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11];
const AC_LUMA_BITS: [u8; 16] = [0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7d];
const AC_LUMA_VALS: [u8; 162] = [
    0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61,
    0x07, //
    0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xa1, 0x08, 0x23, 0x42, 0xb1, 0xc1, 0x15, 0x52, 0xd1,
    0xf0, //
    0x24, 0x33, 0x62, 0x72, 0x82, 0x09, 0x0a, 0x16, 0x17, 0x18, 0x19, 0x1a, 0x25, 0x26, 0x27,
    0x28, //
    0x29, 0x2a, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3a, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48,
    0x49, //
    0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59, 0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68,
    0x69, //
    0x6a, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7a, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88,
    0x89, //
    0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9a, 0xa2, 0xa3, 0xa4, 0xa5, 0xa6,
    0xa7, //
    0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3, 0xc4,
    0xc5, //
    0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2, 0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda, 0xe1,
    0xe2, //
    0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea, 0xf1, 0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7,
    0xf8, //
    0xf9, 0xfa,
];

pub const DEFAULT_QUALITY: u8 = 75;

/// Quantization table (natural order) for `quality` in 1..=100, using the
/// usual 5000/q and 200-2q scaling.
pub fn quant_table(quality: u8) -> Result<[u16; 64]> {
    if !(1..=100).contains(&quality) {
        return Err(Error::invalid(format!(
            "JPEG quality must be in 1..=100, got {quality}"
        )));
    }
    let q = quality as u32;
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let mut out = [0u16; 64];
    for (o, &base) in out.iter_mut().zip(&STD_LUMA_QUANT) {
        *o = ((base as u32 * scale + 50) / 100).clamp(1, 255) as u16;
    }
    Ok(out)
}

/// `(code, length)` indexed by symbol.
struct HuffTable {
    codes: [(u16, u8); 256],
}

impl HuffTable {
    fn new(bits: &[u8; 16], vals: &[u8]) -> Self {
        let mut codes = [(0u16, 0u8); 256];
        let mut code = 0u16;
        let mut k = 0;
        for (len_minus_one, &count) in bits.iter().enumerate() {
            for _ in 0..count {
                codes[vals[k] as usize] = (code, len_minus_one as u8 + 1);
                code += 1;
                k += 1;
            }
            code <<= 1;
        }
        HuffTable { codes }
    }
}

struct BitWriter {
    out: Vec<u8>,
    acc: u32,
    n: u32,
}

impl BitWriter {
    fn write(&mut self, bits: u16, len: u8) {
        if len == 0 {
            return;
        }
        self.acc = (self.acc << len) | (bits as u32 & ((1u32 << len) - 1));
        self.n += len as u32;
        while self.n >= 8 {
            let byte = (self.acc >> (self.n - 8)) as u8;
            self.out.push(byte);
            if byte == 0xff {
                self.out.push(0x00);
            }
            self.n -= 8;
        }
        self.acc &= (1u32 << self.n) - 1;
    }

    fn flush(&mut self) {
        if self.n > 0 {
            let pad = 8 - self.n as u8;
            self.write((1u16 << pad) - 1, pad);
        }
    }
}

const CONST_BITS: i32 = 13;
const PASS1_BITS: i32 = 2;
const FIX_0_298631336: i64 = 2446;
const FIX_0_390180644: i64 = 3196;
const FIX_0_541196100: i64 = 4433;
const FIX_0_765366865: i64 = 6270;
const FIX_0_899976223: i64 = 7373;
const FIX_1_175875602: i64 = 9633;
const FIX_1_501321110: i64 = 12299;
const FIX_1_847759065: i64 = 15137;
const FIX_1_961570560: i64 = 16069;
const FIX_2_053119869: i64 = 16819;
const FIX_2_562915447: i64 = 20995;
const FIX_3_072711026: i64 = 25172;

#[inline]
fn descale(x: i64, n: i32) -> i64 {
    (x + (1 << (n - 1))) >> n
}

/// One 1-D pass of the integer DCT over 8 entries at `stride`.
fn fdct_pass(d: &mut [i64; 64], start: usize, stride: usize, first_pass: bool) {
    let at = |k: usize| start + k * stride;
    let tmp0 = d[at(0)] + d[at(7)];
    let tmp7 = d[at(0)] - d[at(7)];
    let tmp1 = d[at(1)] + d[at(6)];
    let tmp6 = d[at(1)] - d[at(6)];
    let tmp2 = d[at(2)] + d[at(5)];
    let tmp5 = d[at(2)] - d[at(5)];
    let tmp3 = d[at(3)] + d[at(4)];
    let tmp4 = d[at(3)] - d[at(4)];

    let tmp10 = tmp0 + tmp3;
    let tmp13 = tmp0 - tmp3;
    let tmp11 = tmp1 + tmp2;
    let tmp12 = tmp1 - tmp2;

    let odd_shift = if first_pass {
        CONST_BITS - PASS1_BITS
    } else {
        CONST_BITS + PASS1_BITS
    };
    if first_pass {
        d[at(0)] = (tmp10 + tmp11) << PASS1_BITS;
        d[at(4)] = (tmp10 - tmp11) << PASS1_BITS;
    } else {
        d[at(0)] = descale(tmp10 + tmp11, PASS1_BITS);
        d[at(4)] = descale(tmp10 - tmp11, PASS1_BITS);
    }
    let z1 = (tmp12 + tmp13) * FIX_0_541196100;
    d[at(2)] = descale(z1 + tmp13 * FIX_0_765366865, odd_shift);
    d[at(6)] = descale(z1 - tmp12 * FIX_1_847759065, odd_shift);

    let z1 = tmp4 + tmp7;
    let z2 = tmp5 + tmp6;
    let z3 = tmp4 + tmp6;
    let z4 = tmp5 + tmp7;
    let z5 = (z3 + z4) * FIX_1_175875602;
    let tmp4 = tmp4 * FIX_0_298631336;
    let tmp5 = tmp5 * FIX_2_053119869;
    let tmp6 = tmp6 * FIX_3_072711026;
    let tmp7 = tmp7 * FIX_1_501321110;
    let z1 = -z1 * FIX_0_899976223;
    let z2 = -z2 * FIX_2_562915447;
    let z3 = -z3 * FIX_1_961570560 + z5;
    let z4 = -z4 * FIX_0_390180644 + z5;

    d[at(7)] = descale(tmp4 + z1 + z3, odd_shift);
    d[at(5)] = descale(tmp5 + z2 + z4, odd_shift);
    d[at(3)] = descale(tmp6 + z2 + z3, odd_shift);
    d[at(1)] = descale(tmp7 + z1 + z4, odd_shift);
}

/// Integer forward DCT of level-shifted samples; outputs are 8x the orthonormal coefficients.
pub(crate) fn fdct_islow(block: &mut [i64; 64]) {
    for row in 0..8 {
        fdct_pass(block, row * 8, 1, true);
    }
    for col in 0..8 {
        fdct_pass(block, col, 8, false);
    }
}

fn magnitude_category(v: i64) -> (u8, u16) {
    let abs = v.unsigned_abs();
    let size = (64 - abs.leading_zeros()) as u8;
    let mask = ((1u32 << size) - 1) as i64;
    let bits = (if v < 0 { v - 1 } else { v } & mask) as u16;
    (size, bits)
}

fn marker(out: &mut Vec<u8>, code: u8, payload: &[u8]) {
    out.extend_from_slice(&[0xff, code]);
    out.extend_from_slice(&((payload.len() + 2) as u16).to_be_bytes());
    out.extend_from_slice(payload);
}

fn dht_payload(class_id: u8, bits: &[u8; 16], vals: &[u8]) -> Vec<u8> {
    let mut p = vec![class_id];
    p.extend_from_slice(bits);
    p.extend_from_slice(vals);
    p
}

/// Encode a row-major 8-bit grayscale image.
pub fn encode_grayscale(
    pixels: &[u8],
    width: usize,
    height: usize,
    quality: u8,
) -> Result<Vec<u8>> {
    if width == 0 || height == 0 || width > u16::MAX as usize || height > u16::MAX as usize {
        return Err(Error::invalid(format!(
            "unsupported image size {width}x{height}"
        )));
    }
    if pixels.len() != width * height {
        return Err(Error::shape(format!(
            "{width}x{height} image needs {} pixels, got {}",
            width * height,
            pixels.len()
        )));
    }
    let qt = quant_table(quality)?;
    let dc = HuffTable::new(&DC_LUMA_BITS, &DC_LUMA_VALS);
    let ac = HuffTable::new(&AC_LUMA_BITS, &AC_LUMA_VALS);

    let mut out = Vec::with_capacity(640 + width * height / 4);
    out.extend_from_slice(&[0xff, 0xd8]);
    marker(
        &mut out,
        0xe0,
        &[b'J', b'F', b'I', b'F', 0, 1, 1, 0, 0, 1, 0, 1, 0, 0],
    );
    let mut dqt = vec![0u8];
    dqt.extend(NATURAL_ORDER.iter().map(|&k| qt[k] as u8));
    marker(&mut out, 0xdb, &dqt);
    let mut sof = vec![8u8];
    sof.extend_from_slice(&(height as u16).to_be_bytes());
    sof.extend_from_slice(&(width as u16).to_be_bytes());
    sof.extend_from_slice(&[1, 1, 0x11, 0]);
    marker(&mut out, 0xc0, &sof);
    marker(
        &mut out,
        0xc4,
        &dht_payload(0x00, &DC_LUMA_BITS, &DC_LUMA_VALS),
    );
    marker(
        &mut out,
        0xc4,
        &dht_payload(0x10, &AC_LUMA_BITS, &AC_LUMA_VALS),
    );
    marker(&mut out, 0xda, &[1, 1, 0x00, 0, 63, 0]);

    let mut bw = BitWriter { out, acc: 0, n: 0 };
    let mut prev_dc = 0i64;
    let mut block = [0i64; 64];
    for by in (0..height).step_by(8) {
        for bx in (0..width).step_by(8) {
            for r in 0..8 {
                let y = (by + r).min(height - 1);
                for c in 0..8 {
                    let x = (bx + c).min(width - 1);
                    block[r * 8 + c] = pixels[y * width + x] as i64 - 128;
                }
            }
            fdct_islow(&mut block);

            let mut zz = [0i64; 64];
            for (k, &nat) in NATURAL_ORDER.iter().enumerate() {
                let q = (qt[nat] as i64) << 3;
                let v = block[nat];
                zz[k] = if v < 0 {
                    -((-v + (q >> 1)) / q)
                } else {
                    (v + (q >> 1)) / q
                };
            }

            let diff = zz[0] - prev_dc;
            prev_dc = zz[0];
            let (size, bits) = magnitude_category(diff);
            let (code, len) = dc.codes[size as usize];
            bw.write(code, len);
            bw.write(bits, size);

            let mut run = 0u8;
            for &v in &zz[1..] {
                if v == 0 {
                    run += 1;
                    continue;
                }
                while run > 15 {
                    let (code, len) = ac.codes[0xf0];
                    bw.write(code, len);
                    run -= 16;
                }
                let (size, bits) = magnitude_category(v);
                let (code, len) = ac.codes[((run << 4) | size) as usize];
                bw.write(code, len);
                bw.write(bits, size);
                run = 0;
            }
            if run > 0 {
                let (code, len) = ac.codes[0x00];
                bw.write(code, len);
            }
        }
    }
    bw.flush();
    let mut out = bw.out;
    out.extend_from_slice(&[0xff, 0xd9]);
    Ok(out)
}
