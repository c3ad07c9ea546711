//! Minimal reader/writer for NumPy `.npy` (format 1.0) float arrays, used for
//! media sidecar files. Writes little-endian f64 (`<f8`); reads `<f4` or `<f8`
//! in C order.

use std::io::{Read, Write};
use std::path::Path;

use crate::{Error, Result};

const MAGIC: &[u8] = b"\x93NUMPY";

#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NpyArray {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::ShapeMismatch(format!("npy shape {shape:?} vs {} values", data.len())));
        }
        Ok(NpyArray { shape, data })
    }
}

pub fn write(path: &Path, array: &NpyArray) -> Result<()> {
    let mut buf = Vec::new();
    to_writer(&mut buf, array)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn to_writer<W: Write>(mut w: W, array: &NpyArray) -> Result<()> {
    let shape = match array.shape.len() {
        1 => format!("({},)", array.shape[0]),
        _ => format!(
            "({})",
            array.shape.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut header = format!("{{'descr': '<f8', 'fortran_order': False, 'shape': {shape}, }}");
    // magic(6) + version(2) + len(2) + header + '\n' must be a multiple of 64
    let unpadded = 10 + header.len() + 1;
    header.push_str(&" ".repeat((64 - unpadded % 64) % 64));
    header.push('\n');
    w.write_all(MAGIC)?;
    w.write_all(&[1, 0])?;
    w.write_all(&(header.len() as u16).to_le_bytes())?;
    w.write_all(header.as_bytes())?;
    for v in &array.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read(path: &Path) -> Result<NpyArray> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    from_reader(&bytes[..]).map_err(|e| match e {
        Error::ShapeMismatch(m) => Error::ShapeMismatch(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn from_reader<R: Read>(mut r: R) -> Result<NpyArray> {
    let bad = |m: &str| Error::ShapeMismatch(format!("invalid npy: {m}"));
    let mut pre = [0u8; 10];
    r.read_exact(&mut pre)?;
    if &pre[..6] != MAGIC {
        return Err(bad("magic"));
    }
    let header_len = match pre[6] {
        1 => u16::from_le_bytes([pre[8], pre[9]]) as usize,
        2 | 3 => {
            let mut rest = [0u8; 2];
            r.read_exact(&mut rest)?;
            u32::from_le_bytes([pre[8], pre[9], rest[0], rest[1]]) as usize
        }
        _ => return Err(bad("version")),
    };
    let mut header = vec![0u8; header_len];
    r.read_exact(&mut header)?;
    let header = String::from_utf8(header).map_err(|_| bad("header utf8"))?;
    let descr = dict_value(&header, "descr").ok_or_else(|| bad("descr"))?;
    if dict_value(&header, "fortran_order").map(|v| v.trim()) == Some("True") {
        return Err(bad("fortran order unsupported"));
    }
    let shape_txt = dict_value(&header, "shape").ok_or_else(|| bad("shape"))?;
    let shape: Vec<usize> = shape_txt
        .trim_matches(|c| c == '(' || c == ')' || c == ' ')
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| bad("shape entry")))
        .collect::<Result<_>>()?;
    let n: usize = shape.iter().product();
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)?;
    let data: Vec<f64> = match descr.trim_matches(|c| c == '\'' || c == ' ') {
        "<f8" => {
            if raw.len() < n * 8 {
                return Err(bad("truncated data"));
            }
            raw.chunks_exact(8).take(n).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
        }
        "<f4" => {
            if raw.len() < n * 4 {
                return Err(bad("truncated data"));
            }
            raw.chunks_exact(4)
                .take(n)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect()
        }
        other => return Err(bad(&format!("unsupported dtype {other}"))),
    };
    NpyArray::new(shape, data)
}

fn dict_value<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    let pat = format!("'{key}':");
    let start = header.find(&pat)? + pat.len();
    let rest = &header[start..];
    let rest_trim = rest.trim_start();
    if rest_trim.starts_with('(') {
        let end = rest_trim.find(')')?;
        Some(&rest_trim[..=end])
    } else {
        let end = rest_trim.find(',').unwrap_or(rest_trim.len());
        Some(&rest_trim[..end])
    }
}
