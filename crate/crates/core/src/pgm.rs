//! Binary PGM (P5, 8-bit) frame I/O.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::frame::Frame;

pub fn encode(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend(frame.to_u8());
    out
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Frame, String> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos).ok_or("missing magic number")?;
    if magic != b"P5" {
        return Err(format!(
            "expected magic P5, found {:?}",
            String::from_utf8_lossy(magic)
        ));
    }
    let mut header = [0usize; 3];
    for (slot, name) in header.iter_mut().zip(["width", "height", "maxval"]) {
        let tok = next_token(bytes, &mut pos).ok_or(format!("missing {name}"))?;
        *slot = std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(format!("bad {name} {:?}", String::from_utf8_lossy(tok)))?;
    }
    let [width, height, maxval] = header;
    if maxval == 0 || maxval > 255 {
        return Err(format!("only 8-bit PGM is supported, maxval {maxval}"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let n = width * height;
    let raster = bytes
        .get(pos..pos + n)
        .ok_or(format!("raster truncated: need {n} bytes"))?;
    let scale = maxval as f64;
    let pixels = raster
        .iter()
        .map(|&v| (f64::from(v) / scale).min(1.0))
        .collect();
    Frame::new(width, height, pixels).map_err(|e| e.to_string())
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
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
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (*pos > start).then(|| &bytes[start..*pos])
}

pub fn read(path: &Path) -> Result<Frame> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|reason| Error::Pgm {
        path: path.to_path_buf(),
        reason,
    })
}

/// Writes via a temporary sibling file and a rename, so readers never see a
/// partial frame.
pub fn write(path: &Path, frame: &Frame) -> Result<()> {
    write_atomic(path, &encode(frame))
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// File name of a 1-based frame number, e.g. `frame_000001.pgm`.
pub fn frame_file_name(number: usize) -> String {
    format!("frame_{number:06}.pgm")
}

/// All `.pgm` files in a directory, sorted by name.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    Ok(paths)
}

pub fn read_dir(dir: &Path) -> Result<Vec<Frame>> {
    list_frames(dir)?.iter().map(|p| read(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_with_comments() {
        let mut bytes = b"P5\n# made by hand\n3 2\n# max\n255\n".to_vec();
        bytes.extend([0, 51, 102, 153, 204, 255]);
        let frame = decode(&bytes).unwrap();
        assert_eq!((frame.width(), frame.height()), (3, 2));
        assert_eq!(frame.get(1, 0), 0.2);
        assert_eq!(frame.get(2, 1), 1.0);
    }

    #[test]
    fn encode_is_exact_p5() {
        let frame = Frame::from_u8(2, 1, &[7, 250]).unwrap();
        assert_eq!(encode(&frame), b"P5\n2 1\n255\n\x07\xfa".to_vec());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decode(b"P2\n1 1\n255\n0").is_err());
        assert!(decode(b"P5\n4 4\n255\n\x00\x00").is_err());
        assert!(decode(b"P5\n1 1\n65535\n\x00\x00").is_err());
        assert!(decode(b"P5\n1").is_err());
    }

    #[test]
    fn roundtrip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let data: Vec<u8> = (0..=255).collect();
        let frame = Frame::from_u8(16, 16, &data).unwrap();
        let path = dir.path().join(frame_file_name(1));
        write(&path, &frame).unwrap();
        assert_eq!(read(&path).unwrap(), frame);
        assert_eq!(list_frames(dir.path()).unwrap(), vec![path]);
    }

    #[test]
    fn missing_file_reports_path() {
        let err = read(Path::new("/nonexistent/frame.pgm")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/frame.pgm"));
    }
}
