//! File formats.
//!
//! * `NMAT`: 16-byte header (`b"NMAT"`, `u32` rows, `u32` cols, `u32` reserved = 0,
//!   all little-endian) followed by `rows * cols` little-endian `f64`, row-major.
//! * CSV: one matrix row per line, comma separated, `#` comment lines.
//! * 16-bit mono WAV for waveforms and 8-bit binary PGM for maps.
//!
//! Every writer goes through [`write_atomic`]: the bytes land in a temporary file
//! next to the target which is then renamed over it.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::NonnegMatrix;

pub const NMAT_MAGIC: &[u8; 4] = b"NMAT";
const NMAT_HEADER_LEN: usize = 16;

/// Writes `bytes` to a sibling temporary file, then renames it onto `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::format(path, "not a file path"))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn encode_nmat(m: &NonnegMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(NMAT_HEADER_LEN + 8 * m.as_slice().len());
    out.extend_from_slice(NMAT_MAGIC);
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_nmat(bytes: &[u8]) -> std::result::Result<NonnegMatrix, String> {
    if bytes.len() < NMAT_HEADER_LEN || &bytes[..4] != NMAT_MAGIC {
        return Err("missing NMAT header".into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (rows, cols) = (word(4), word(8));
    let expected = NMAT_HEADER_LEN + 8 * rows * cols;
    if bytes.len() != expected {
        return Err(format!(
            "{rows}x{cols} matrix needs {expected} bytes, file has {}",
            bytes.len()
        ));
    }
    let data = bytes[NMAT_HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    NonnegMatrix::new(rows, cols, data).map_err(|e| e.to_string())
}

pub fn write_nmat(path: impl AsRef<Path>, m: &NonnegMatrix) -> Result<()> {
    write_atomic(path, &encode_nmat(m))
}

pub fn read_nmat(path: impl AsRef<Path>) -> Result<NonnegMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_nmat(&bytes).map_err(|msg| Error::format(path, msg))
}

/// Parses a headerless CSV matrix. Ragged rows and negative entries are errors.
pub fn parse_csv(text: &str) -> std::result::Result<NonnegMatrix, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|_| format!("row {line}: cannot parse {field:?} as a number"))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(format!(
                    "row {line} has {} fields, expected {}",
                    row.len(),
                    first.len()
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err("no data rows".into());
    }
    NonnegMatrix::from_rows(&rows).map_err(|e| e.to_string())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<NonnegMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text).map_err(|msg| Error::format(path, msg))
}

pub fn encode_csv(m: &NonnegMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(path: impl AsRef<Path>, m: &NonnegMatrix) -> Result<()> {
    write_atomic(path, encode_csv(m).as_bytes())
}

/// Writes a mono 16-bit PCM WAV. Samples are clipped to `[-1, 1]`.
pub fn write_wav(path: impl AsRef<Path>, samples: &[f64], sample_rate: u32) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cursor = std::io::Cursor::new(Vec::new());
    {
        let mut writer = hound::WavWriter::new(&mut cursor, spec)
            .map_err(|e| Error::format(path, e.to_string()))?;
        for s in samples {
            let q = (s.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16;
            writer
                .write_sample(q)
                .map_err(|e| Error::format(path, e.to_string()))?;
        }
        writer
            .finalize()
            .map_err(|e| Error::format(path, e.to_string()))?;
    }
    write_atomic(path, &cursor.into_inner())
}

/// Reads a mono 16-bit WAV into samples in `[-1, 1]` and its sample rate.
pub fn read_wav(path: impl AsRef<Path>) -> Result<(Vec<f64>, u32)> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path).map_err(|e| Error::format(path, e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 {
        return Err(Error::format(path, "expected mono 16-bit PCM"));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / i16::MAX as f64))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::format(path, e.to_string()))?;
    Ok((samples, spec.sample_rate))
}

/// Encodes `values` (row-major `height x width`) as a binary PGM. Values are mapped
/// linearly from `[0, max_value]` onto `0..=255` and clipped; the mapping is
/// recorded in a comment line.
pub fn encode_pgm(values: &[f64], height: usize, width: usize, max_value: f64) -> Vec<u8> {
    assert_eq!(values.len(), height * width, "PGM size mismatch");
    let mut out = format!(
        "P5\n# gray = round(255 * clamp(value / {max_value}, 0, 1))\n{width} {height}\n255\n"
    )
    .into_bytes();
    out.extend(values.iter().map(|v| {
        let t = if max_value > 0.0 { v / max_value } else { 0.0 };
        (255.0 * t.clamp(0.0, 1.0)).round() as u8
    }));
    out
}

pub fn write_pgm(
    path: impl AsRef<Path>,
    values: &[f64],
    height: usize,
    width: usize,
    max_value: f64,
) -> Result<()> {
    write_atomic(path, &encode_pgm(values, height, width, max_value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nmat_header_layout() {
        let m = NonnegMatrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 0.5]]).unwrap();
        let bytes = encode_nmat(&m);
        assert_eq!(&bytes[..4], b"NMAT");
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &3u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &[0, 0, 0, 0]);
        assert_eq!(&bytes[16..24], &1.0f64.to_le_bytes());
        assert_eq!(&bytes[56..64], &0.5f64.to_le_bytes());
        assert_eq!(bytes.len(), 16 + 6 * 8);
    }

    #[test]
    fn nmat_rejects_truncated_and_negative() {
        let m = NonnegMatrix::filled(2, 2, 1.0);
        let bytes = encode_nmat(&m);
        assert!(decode_nmat(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_nmat(b"XMAT0000000000000").is_err());
        let mut neg = bytes.clone();
        neg[16..24].copy_from_slice(&(-1.0f64).to_le_bytes());
        assert!(decode_nmat(&neg).is_err());
    }

    #[test]
    fn csv_parsing() {
        let m = parse_csv("# response\n1, 0, 0\n0,1,0\n0,0,1\n").unwrap();
        assert_eq!(m, NonnegMatrix::identity(3));
        assert!(parse_csv("1,2\n3\n").unwrap_err().contains("fields"));
        assert!(parse_csv("1,-2\n").is_err());
        assert!(parse_csv("").is_err());
    }

    #[test]
    fn pgm_header_and_mapping() {
        let bytes = encode_pgm(&[0.0, 1.0, 2.0, 4.0], 2, 2, 2.0);
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.starts_with("P5\n# gray"));
        assert!(text.contains("\n2 2\n255\n"));
        assert_eq!(&bytes[bytes.len() - 4..], &[0, 128, 255, 255]);
    }

    #[test]
    fn files_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let m = NonnegMatrix::from_rows(&[[0.1, 2.5], [3.0, 1e-300]]).unwrap();
        write_nmat(dir.path().join("m.nmat"), &m).unwrap();
        assert_eq!(read_nmat(dir.path().join("m.nmat")).unwrap(), m);
        write_csv(dir.path().join("m.csv"), &m).unwrap();
        assert_eq!(read_csv(dir.path().join("m.csv")).unwrap(), m);
        assert!(matches!(read_nmat(dir.path().join("missing.nmat")), Err(Error::Io { .. })));

        let wave: Vec<f64> = (0..100).map(|i| (i as f64 * 0.1).sin() * 0.5).collect();
        write_wav(dir.path().join("w.wav"), &wave, 44100).unwrap();
        let (back, fs) = read_wav(dir.path().join("w.wav")).unwrap();
        assert_eq!(fs, 44100);
        assert!(wave.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-4));
    }

    proptest! {
        #[test]
        fn nmat_is_lossless(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
            let m = NonnegMatrix::from_fn(rows, cols, |i, j| {
                let h = seed.wrapping_mul(6364136223846793005).wrapping_add((i * cols + j) as u64);
                (h >> 11) as f64 / (1u64 << 53) as f64 * 1e3
            });
            prop_assert_eq!(decode_nmat(&encode_nmat(&m)).unwrap(), m);
        }
    }
}
