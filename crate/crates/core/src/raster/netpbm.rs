//! Binary Netpbm readers and writers: 8-bit P6 color images and 16-bit
//! big-endian P5 grayscale maps.

use super::{BinaryMask, BoundaryMap, ColorImage, LabelMap, RasterError};
use std::fs;
use std::path::Path;

/// Grayscale payloads use the full 16-bit range so label ids and quantized
/// boundary strengths survive a round trip unchanged.
const GRAY_MAXVAL: u32 = 65535;
const COLOR_MAXVAL: u32 = 255;

struct Header {
    width: usize,
    height: usize,
    payload_start: usize,
}

/// Parses a Netpbm header, accepting `#` comments between tokens. Exactly one
/// whitespace byte separates the maxval token from the payload.
fn parse_header(bytes: &[u8], magic: &str, maxval: u32) -> Result<Header, RasterError> {
    let malformed = |msg: &str| RasterError::MalformedHeader(msg.to_string());
    if bytes.len() < 2 || &bytes[0..2] != magic.as_bytes() {
        return Err(malformed(&format!("expected magic {magic}")));
    }
    let mut pos = 2;
    let next_token = |pos: &mut usize| -> Result<u32, RasterError> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
            *pos += 1;
        }
        if *pos == start {
            return Err(RasterError::MalformedHeader("expected numeric token".to_string()));
        }
        std::str::from_utf8(&bytes[start..*pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| RasterError::MalformedHeader("numeric token overflow".to_string()))
    };
    let width = next_token(&mut pos)? as usize;
    let height = next_token(&mut pos)? as usize;
    let got_maxval = next_token(&mut pos)?;
    if width == 0 || height == 0 {
        return Err(malformed("zero dimension"));
    }
    if got_maxval != maxval {
        return Err(malformed(&format!("maxval must be {maxval}, got {got_maxval}")));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(malformed("missing whitespace after maxval"));
    }
    Ok(Header { width, height, payload_start: pos + 1 })
}

fn payload<'a>(bytes: &'a [u8], header: &Header, expected: usize) -> Result<&'a [u8], RasterError> {
    let avail = bytes.len() - header.payload_start;
    if avail < expected {
        return Err(RasterError::TruncatedPayload { expected, got: avail });
    }
    Ok(&bytes[header.payload_start..header.payload_start + expected])
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<ColorImage, RasterError> {
    let bytes = fs::read(path)?;
    let header = parse_header(&bytes, "P6", COLOR_MAXVAL)?;
    let expected = header.width * header.height * 3;
    let data = payload(&bytes, &header, expected)?.to_vec();
    Ok(ColorImage::from_raw(header.width, header.height, data))
}

pub fn write_ppm(path: impl AsRef<Path>, image: &ColorImage) -> Result<(), RasterError> {
    let mut out = format!("P6\n{} {}\n{}\n", image.width(), image.height(), COLOR_MAXVAL)
        .into_bytes();
    out.extend_from_slice(image.data());
    fs::write(path, out)?;
    Ok(())
}

fn read_gray16(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u16>), RasterError> {
    let bytes = fs::read(path)?;
    let header = parse_header(&bytes, "P5", GRAY_MAXVAL)?;
    let expected = header.width * header.height * 2;
    let raw = payload(&bytes, &header, expected)?;
    let values = raw
        .chunks_exact(2)
        .map(|pair| u16::from_be_bytes([pair[0], pair[1]]))
        .collect();
    Ok((header.width, header.height, values))
}

fn write_gray16(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    values: impl Iterator<Item = u16>,
) -> Result<(), RasterError> {
    let mut out = format!("P5\n{width} {height}\n{GRAY_MAXVAL}\n").into_bytes();
    for v in values {
        out.extend_from_slice(&v.to_be_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_pgm16_labels(path: impl AsRef<Path>) -> Result<LabelMap, RasterError> {
    let (width, height, values) = read_gray16(path)?;
    Ok(LabelMap::from_raw(width, height, values.into_iter().map(u32::from).collect()))
}

pub fn write_pgm16_labels(path: impl AsRef<Path>, map: &LabelMap) -> Result<(), RasterError> {
    if let Some(&id) = map.data().iter().find(|&&id| id > GRAY_MAXVAL) {
        return Err(RasterError::ValueOutOfRange(format!(
            "label id {id} exceeds the 16-bit payload limit {GRAY_MAXVAL}"
        )));
    }
    write_gray16(path, map.width(), map.height(), map.data().iter().map(|&id| id as u16))
}

/// Reads a 16-bit grayscale file as boundary strengths, mapping the raw range
/// [0, 65535] linearly onto [0, 1].
pub fn read_pgm16_boundary(path: impl AsRef<Path>) -> Result<BoundaryMap, RasterError> {
    let (width, height, values) = read_gray16(path)?;
    let data = values.into_iter().map(|v| f64::from(v) / f64::from(GRAY_MAXVAL)).collect();
    Ok(BoundaryMap::from_raw(width, height, data))
}

pub fn write_pgm16_boundary(path: impl AsRef<Path>, map: &BoundaryMap) -> Result<(), RasterError> {
    write_gray16(
        path,
        map.width(),
        map.height(),
        map.data().iter().map(|&v| (v * f64::from(GRAY_MAXVAL)).round() as u16),
    )
}

/// Reads a 16-bit grayscale file as a mask. Any nonzero sample is foreground.
pub fn read_pgm16_mask(path: impl AsRef<Path>) -> Result<BinaryMask, RasterError> {
    let (width, height, values) = read_gray16(path)?;
    Ok(BinaryMask::from_raw(width, height, values.into_iter().map(|v| v != 0).collect()))
}

pub fn write_pgm16_mask(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<(), RasterError> {
    write_gray16(
        path,
        mask.width(),
        mask.height(),
        mask.data().iter().map(|&b| if b { GRAY_MAXVAL as u16 } else { 0 }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn ppm_round_trip_preserves_payload_bytes() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("img.ppm");
        let data: Vec<u8> = (0..2 * 3 * 3).map(|i| (i * 7 % 251) as u8).collect();
        let image = ColorImage::from_raw(2, 3, data.clone());
        write_ppm(&path, &image).unwrap();
        let back = read_ppm(&path).unwrap();
        assert_eq!(back.data(), &data[..], "payload must survive a round trip unchanged");

        write_ppm(&path, &back).unwrap();
        let again = read_ppm(&path).unwrap();
        assert_eq!(again, back, "second round trip must be byte-identical");
    }

    #[test]
    fn ppm_rejects_wrong_maxval() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.ppm");
        fs::write(&path, b"P6\n1 1\n254\n\xff\xff\xff").unwrap();
        match read_ppm(&path) {
            Err(RasterError::MalformedHeader(msg)) => assert!(msg.contains("maxval")),
            other => panic!("expected MalformedHeader, got {other:?}"),
        }
    }

    #[test]
    fn ppm_accepts_header_comments() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("comment.ppm");
        fs::write(&path, b"P6\n# made by hand\n2 # width\n1\n255\n\x01\x02\x03\x04\x05\x06")
            .unwrap();
        let image = read_ppm(&path).unwrap();
        assert_eq!((image.width(), image.height()), (2, 1));
        assert_eq!(image.pixel(1, 0), [4, 5, 6]);
    }

    #[test]
    fn truncated_payload_reports_expected_and_got() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("short.ppm");
        fs::write(&path, b"P6\n2 2\n255\n\x00\x01\x02").unwrap();
        match read_ppm(&path) {
            Err(RasterError::TruncatedPayload { expected, got }) => {
                assert_eq!((expected, got), (12, 3));
            }
            other => panic!("expected TruncatedPayload, got {other:?}"),
        }
    }

    #[test]
    fn trailing_bytes_after_payload_are_ignored() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("long.pgm");
        fs::write(&path, b"P5\n1 1\n65535\n\x12\x34extra").unwrap();
        let map = read_pgm16_labels(&path).unwrap();
        assert_eq!(map.get(0, 0), 0x1234);
    }

    #[test]
    fn labels_round_trip_and_clamp_check() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("labels.pgm");
        let map = LabelMap::from_raw(3, 1, vec![0, 40, 65535]);
        write_pgm16_labels(&path, &map).unwrap();
        assert_eq!(read_pgm16_labels(&path).unwrap(), map);

        let too_big = LabelMap::from_raw(1, 1, vec![65536]);
        match write_pgm16_labels(&path, &too_big) {
            Err(RasterError::ValueOutOfRange(_)) => {}
            other => panic!("expected ValueOutOfRange, got {other:?}"),
        }
    }

    #[test]
    fn boundary_quantization_round_trips_within_half_step() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("edges.pgm");
        let values = vec![0.0, 0.25, 0.5, 1.0, 0.123456];
        let map = BoundaryMap::from_raw(5, 1, values.clone());
        write_pgm16_boundary(&path, &map).unwrap();
        let back = read_pgm16_boundary(&path).unwrap();
        for (a, b) in values.iter().zip(back.data()) {
            assert!(
                (a - b).abs() <= 0.5 / 65535.0,
                "quantization error for {a} was {}",
                (a - b).abs()
            );
        }
        assert_eq!(back.get(0, 0), 0.0);
        assert_eq!(back.get(3, 0), 1.0);
    }

    #[test]
    fn mask_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("mask.pgm");
        let mask = BinaryMask::from_raw(2, 2, vec![true, false, false, true]);
        write_pgm16_mask(&path, &mask).unwrap();
        assert_eq!(read_pgm16_mask(&path).unwrap(), mask);
    }

    #[test]
    fn missing_file_surfaces_io_error() {
        match read_ppm("/nonexistent/definitely/missing.ppm") {
            Err(RasterError::Io(_)) => {}
            other => panic!("expected Io error, got {other:?}"),
        }
    }
}
