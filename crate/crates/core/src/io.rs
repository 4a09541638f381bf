//! File formats: PGM images, the CBIM raw image dump and the CBSS sample
//! container. All binary fields are little-endian.

use std::io::{BufRead, Read, Write};

use ndarray::Array2;

use crate::acquisition::{Lattice, SampleSet, SampleValues};
use crate::error::{Error, Result};

pub const CBIM_MAGIC: &[u8; 4] = b"CBIM";
pub const CBSS_MAGIC: &[u8; 4] = b"CBSS";
pub const CBSS_VERSION: u16 = 1;

/// Preview byte for an amplitude in `[-1, 1]`: `clamp(round((v + 1) / 2 * 255))`.
pub fn preview_byte(v: f64) -> u8 {
    ((v + 1.0) / 2.0 * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Writes a binary (P5) PGM preview of an amplitude image.
pub fn write_pgm<W: Write>(mut out: W, image: &Array2<f64>) -> Result<()> {
    let (rows, cols) = image.dim();
    write!(out, "P5\n{cols} {rows}\n255\n")?;
    let bytes: Vec<u8> = image.iter().map(|&v| preview_byte(v)).collect();
    out.write_all(&bytes)?;
    Ok(())
}

/// Reads a P5 or P2 PGM with maxval 255 into gray levels `0..=255`,
/// indexed `[row, column]`.
pub fn read_pgm<R: BufRead>(mut input: R) -> Result<Array2<f64>> {
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    let mut pos = 0;
    let magic = header_token(&data, &mut pos)?;
    let binary = match magic.as_str() {
        "P5" => true,
        "P2" => false,
        other => return Err(Error::format("PGM", format!("unsupported magic `{other}`"))),
    };
    let width = header_number(&data, &mut pos, "width")?;
    let height = header_number(&data, &mut pos, "height")?;
    let maxval = header_number(&data, &mut pos, "maxval")?;
    if maxval != 255 {
        return Err(Error::format("PGM", format!("maxval {maxval}, expected 255")));
    }
    if width == 0 || height == 0 {
        return Err(Error::format("PGM", "empty image"));
    }
    let count = width * height;
    let values: Vec<f64> = if binary {
        // Exactly one whitespace byte separates the header from the raster.
        let start = pos + 1;
        let raster = data
            .get(start..start + count)
            .ok_or_else(|| Error::format("PGM", format!("raster shorter than {count} bytes")))?;
        raster.iter().map(|&b| b as f64).collect()
    } else {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let v = header_number(&data, &mut pos, "pixel")?;
            if v > 255 {
                return Err(Error::format("PGM", format!("pixel {v} exceeds maxval")));
            }
            out.push(v as f64);
        }
        out
    };
    Ok(Array2::from_shape_vec((height, width), values).expect("raster length checked"))
}

fn header_token(data: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() && data[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::format("PGM", "truncated header"));
    }
    Ok(String::from_utf8_lossy(&data[start..*pos]).into_owned())
}

fn header_number(data: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let token = header_token(data, pos)?;
    token
        .parse()
        .map_err(|_| Error::format("PGM", format!("{what} `{token}` is not a number")))
}

/// Writes a square image as `CBIM`, `n: u32`, `reserved: u64`, then `f64`
/// values in row-major order.
pub fn write_cbim<W: Write>(mut out: W, image: &Array2<f64>) -> Result<()> {
    let (rows, cols) = image.dim();
    if rows != cols {
        return Err(Error::DimensionMismatch {
            expected: "square image".into(),
            found: format!("{rows}x{cols}"),
        });
    }
    let n = u32::try_from(rows).map_err(|_| Error::param("n", "does not fit in u32"))?;
    out.write_all(CBIM_MAGIC)?;
    out.write_all(&n.to_le_bytes())?;
    out.write_all(&0u64.to_le_bytes())?;
    let mut buf = Vec::with_capacity(rows * cols * 8);
    for v in image.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_cbim<R: Read>(mut input: R) -> Result<Array2<f64>> {
    let mut header = [0u8; 16];
    input.read_exact(&mut header).map_err(|_| Error::format("CBIM", "truncated header"))?;
    if &header[..4] != CBIM_MAGIC {
        return Err(Error::format("CBIM", "bad magic"));
    }
    let n = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes")) as usize;
    let values = read_f64s(&mut input, n * n, "CBIM")?;
    Ok(Array2::from_shape_vec((n, n), values).expect("length checked"))
}

fn read_f64s<R: Read>(input: &mut R, count: usize, what: &'static str) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    input
        .read_exact(&mut bytes)
        .map_err(|_| Error::format(what, format!("payload shorter than {count} values")))?;
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::format(what, format!("{} trailing bytes", rest.len())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

/// Header fields of a CBSS container.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CbssHeader {
    pub version: u16,
    /// 0 full precision, 1 single bit, 2 uniform.
    pub quantizer_code: u8,
    /// Samples per axis.
    pub count: u32,
    pub stride: u32,
    pub seed: u64,
}

const CBSS_HEADER_LEN: usize = 4 + 2 + 1 + 4 + 4 + 8;

/// Writes the sample container. Real values are stored as `f64`; bits are
/// packed most-significant-bit first, each row padded to a whole byte.
pub fn write_cbss<W: Write>(mut out: W, samples: &SampleSet) -> Result<()> {
    let m = samples.lattice.count;
    let to_u32 = |v: usize, name| u32::try_from(v).map_err(|_| Error::param(name, "does not fit in u32"));
    let mut buf = Vec::with_capacity(CBSS_HEADER_LEN + m * m * 8);
    buf.extend_from_slice(CBSS_MAGIC);
    buf.extend_from_slice(&CBSS_VERSION.to_le_bytes());
    buf.push(samples.config.quantizer.code());
    buf.extend_from_slice(&to_u32(m, "M_s")?.to_le_bytes());
    buf.extend_from_slice(&to_u32(samples.lattice.stride, "stride")?.to_le_bytes());
    buf.extend_from_slice(&samples.config.seed.to_le_bytes());
    if samples.values.dim() != (m, m) {
        return Err(Error::DimensionMismatch {
            expected: format!("{m}x{m} samples"),
            found: format!("{:?}", samples.values.dim()),
        });
    }
    match &samples.values {
        SampleValues::Real(values) => {
            for v in values.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        SampleValues::Bits(bits) => {
            for row in bits.rows() {
                for chunk in row.as_slice().expect("standard layout").chunks(8) {
                    let byte = chunk
                        .iter()
                        .enumerate()
                        .fold(0u8, |acc, (i, &b)| acc | (u8::from(b != 0) << (7 - i)));
                    buf.push(byte);
                }
            }
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Contents of a CBSS container. The lattice is recovered from the stride
/// and the grid size, which the container does not store.
#[derive(Debug, Clone, PartialEq)]
pub struct CbssContents {
    pub header: CbssHeader,
    pub lattice: Lattice,
    pub values: SampleValues,
}

pub fn read_cbss<R: Read>(mut input: R, grid_n: usize) -> Result<CbssContents> {
    let mut raw = [0u8; CBSS_HEADER_LEN];
    input.read_exact(&mut raw).map_err(|_| Error::format("CBSS", "truncated header"))?;
    if &raw[..4] != CBSS_MAGIC {
        return Err(Error::format("CBSS", "bad magic"));
    }
    let header = CbssHeader {
        version: u16::from_le_bytes([raw[4], raw[5]]),
        quantizer_code: raw[6],
        count: u32::from_le_bytes(raw[7..11].try_into().expect("4 bytes")),
        stride: u32::from_le_bytes(raw[11..15].try_into().expect("4 bytes")),
        seed: u64::from_le_bytes(raw[15..23].try_into().expect("8 bytes")),
    };
    if header.version != CBSS_VERSION {
        return Err(Error::format("CBSS", format!("unsupported version {}", header.version)));
    }
    let lattice = Lattice::centered(grid_n, header.stride as usize)?;
    let m = header.count as usize;
    if lattice.count != m {
        return Err(Error::IncompatibleLattice(format!(
            "container holds {m} samples per axis, stride {} on {grid_n} points gives {}",
            header.stride, lattice.count
        )));
    }
    let values = match header.quantizer_code {
        0 | 2 => SampleValues::Real(
            Array2::from_shape_vec((m, m), read_f64s(&mut input, m * m, "CBSS")?).expect("length checked"),
        ),
        1 => {
            let row_bytes = m.div_ceil(8);
            let mut packed = vec![0u8; row_bytes * m];
            input
                .read_exact(&mut packed)
                .map_err(|_| Error::format("CBSS", "bit payload truncated"))?;
            let mut rest = Vec::new();
            input.read_to_end(&mut rest)?;
            if !rest.is_empty() {
                return Err(Error::format("CBSS", format!("{} trailing bytes", rest.len())));
            }
            SampleValues::Bits(Array2::from_shape_fn((m, m), |(r, c)| {
                (packed[r * row_bytes + c / 8] >> (7 - c % 8)) & 1
            }))
        }
        other => return Err(Error::format("CBSS", format!("unknown quantizer tag {other}"))),
    };
    Ok(CbssContents {
        header,
        lattice,
        values,
    })
}
