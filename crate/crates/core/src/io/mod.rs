//! DensityGrid and field file formats.
//!
//! Text layout: a header line `nx ny dx x0 y0`, then `ny` lines of `nx`
//! whitespace-separated values (row `j` holds cells `(0..nx, j)`).
//!
//! Binary layout, little endian: magic `FDG1`, `u32 nx`, `u32 ny`,
//! `f64 dx, x0, y0`, then `nx·ny` `f64` values in the same order.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::em::FieldSolution;
use crate::geometry::{DensityGrid, GridSpec};
use crate::scalar::Real;

pub const MAGIC: &[u8; 4] = b"FDG1";
const BINARY_HEADER: usize = 4 + 4 + 4 + 3 * 8;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("byte {offset}: {message}")]
    Malformed { offset: usize, message: String },
    #[error("expected a {expected_nx}x{expected_ny} grid, file holds {nx}x{ny}")]
    ShapeMismatch { expected_nx: usize, expected_ny: usize, nx: usize, ny: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn malformed(offset: usize, message: impl Into<String>) -> FormatError {
    FormatError::Malformed { offset, message: message.into() }
}

pub fn to_text<T: Real>(rho: &DensityGrid<T>) -> String {
    let g = rho.grid;
    let mut s = format!("{} {} {} {} {}\n", g.nx, g.ny, g.dx.to_f64_lossy(), g.x0.to_f64_lossy(), g.y0.to_f64_lossy());
    for row in rho.values.chunks(g.nx) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{}", v.to_f64_lossy());
        }
        s.push('\n');
    }
    s
}

pub fn to_binary<T: Real>(rho: &DensityGrid<T>) -> Vec<u8> {
    let g = rho.grid;
    let mut out = Vec::with_capacity(BINARY_HEADER + 8 * rho.values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.nx as u32).to_le_bytes());
    out.extend_from_slice(&(g.ny as u32).to_le_bytes());
    for v in [g.dx, g.x0, g.y0] {
        out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
    for v in &rho.values {
        out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
    out
}

/// Whitespace-separated tokens with their byte offsets.
fn tokens(s: &str) -> impl Iterator<Item = (usize, &str)> {
    s.split_ascii_whitespace().map(move |t| (t.as_ptr() as usize - s.as_ptr() as usize, t))
}

fn grid_from<T: Real>(nx: usize, ny: usize, dx: f64, x0: f64, y0: f64, offset: usize) -> Result<GridSpec<T>, FormatError> {
    GridSpec::new(nx, ny, T::lit(dx), T::lit(x0), T::lit(y0)).map_err(|e| malformed(offset, e.to_string()))
}

fn check_value(v: f64, offset: usize) -> Result<(), FormatError> {
    if !(0.0..=1.0).contains(&v) {
        return Err(malformed(offset, format!("density {v} outside [0, 1]")));
    }
    Ok(())
}

pub fn from_text<T: Real>(s: &str) -> Result<DensityGrid<T>, FormatError> {
    let mut it = tokens(s);
    let mut next = |what: &str| it.next().ok_or_else(|| malformed(s.len(), format!("unexpected end of file, expected {what}")));
    let int = |(o, t): (usize, &str)| t.parse::<usize>().map_err(|_| malformed(o, format!("expected an integer, found '{t}'")));
    let real = |(o, t): (usize, &str)| t.parse::<f64>().map_err(|_| malformed(o, format!("expected a number, found '{t}'")));
    let nx = int(next("nx")?)?;
    let ny = int(next("ny")?)?;
    let dx = real(next("dx")?)?;
    let x0 = real(next("x0")?)?;
    let (o, t) = next("y0")?;
    let y0 = real((o, t))?;
    let grid = grid_from(nx, ny, dx, x0, y0, o)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let tok = next("a value")?;
        let v = real(tok)?;
        check_value(v, tok.0)?;
        values.push(T::lit(v));
    }
    drop(next);
    if let Some((o, t)) = it.next() {
        return Err(malformed(o, format!("trailing data '{t}'")));
    }
    Ok(DensityGrid { grid, values })
}

pub fn from_binary<T: Real>(b: &[u8]) -> Result<DensityGrid<T>, FormatError> {
    if b.len() < BINARY_HEADER {
        return Err(malformed(b.len(), "truncated header"));
    }
    if &b[..4] != MAGIC {
        return Err(malformed(0, "bad magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().unwrap());
    let (nx, ny) = (u32_at(4), u32_at(8));
    let grid = grid_from(nx, ny, f64_at(12), f64_at(20), f64_at(28), 4)?;
    let need = BINARY_HEADER + 8 * grid.len();
    if b.len() != need {
        return Err(malformed(b.len().min(need), format!("expected {need} bytes, file has {}", b.len())));
    }
    let mut values = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let o = BINARY_HEADER + 8 * k;
        let v = f64_at(o);
        check_value(v, o)?;
        values.push(T::lit(v));
    }
    Ok(DensityGrid { grid, values })
}

/// Reads either layout, chosen by the magic bytes.
pub fn read_density<T: Real>(path: &Path) -> Result<DensityGrid<T>, FormatError> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        return from_binary(&bytes);
    }
    let s = std::str::from_utf8(&bytes).map_err(|e| malformed(e.valid_up_to(), "invalid UTF-8"))?;
    from_text(s)
}

/// Writes via a temporary sibling and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn write_density<T: Real>(path: &Path, rho: &DensityGrid<T>, binary: bool) -> std::io::Result<()> {
    if binary {
        write_atomic(path, &to_binary(rho))
    } else {
        write_atomic(path, to_text(rho).as_bytes())
    }
}

/// Complex field in the text layout with `re im` pairs per cell.
pub fn field_to_text<T: Real>(x: &FieldSolution<T>) -> String {
    let g = x.grid;
    let mut s = format!("{} {} {} {} {}\n", g.nx, g.ny, g.dx.to_f64_lossy(), g.x0.to_f64_lossy(), g.y0.to_f64_lossy());
    for row in x.values.chunks(g.nx) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{} {}", v.re.to_f64_lossy(), v.im.to_f64_lossy());
        }
        s.push('\n');
    }
    s
}
