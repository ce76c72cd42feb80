//! Tensor files.
//!
//! Binary layout (`.tns`): the 4-byte magic `TNS1`, then `m`, `n`, `l` as
//! little-endian u64, then `m·n·l` little-endian f64 entries in row-major
//! (i, j, k) order, i.e. the last index varies fastest.
//!
//! CSV slice stacks: each frontal slice is `m` lines of `n` comma-separated
//! values; consecutive slices are separated by one blank line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::algebra::TubalMatrix;
use crate::error::{Result, TspError};

const MAGIC: &[u8; 4] = b"TNS1";

pub fn write_tensor<W: Write>(mut w: W, x: &TubalMatrix) -> Result<()> {
    let (m, n, l) = x.dims();
    w.write_all(MAGIC)?;
    for d in [m, n, l] {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for i in 0..m {
        for j in 0..n {
            for k in 0..l {
                w.write_all(&x.get(i, j, k).to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_tensor<R: Read>(mut r: R) -> Result<TubalMatrix> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(TspError::Parse("not a TNS1 tensor file".into()));
    }
    let mut dims = [0usize; 3];
    let mut word = [0u8; 8];
    for d in dims.iter_mut() {
        r.read_exact(&mut word)?;
        *d = usize::try_from(u64::from_le_bytes(word))
            .map_err(|_| TspError::Parse("dimension overflows usize".into()))?;
    }
    let [m, n, l] = dims;
    let count = m
        .checked_mul(n)
        .and_then(|v| v.checked_mul(l))
        .filter(|&c| c > 0)
        .ok_or_else(|| TspError::Parse(format!("bad dimensions {m}x{n}x{l}")))?;
    let mut raw = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut word)?;
        raw.push(f64::from_le_bytes(word));
    }
    Ok(TubalMatrix::from_fn(m, n, l, |i, j, k| raw[(i * n + j) * l + k]))
}

pub fn save_tensor(path: &Path, x: &TubalMatrix) -> Result<()> {
    write_tensor(BufWriter::new(File::create(path)?), x)
}

pub fn load_tensor(path: &Path) -> Result<TubalMatrix> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let file = BufReader::new(File::open(path)?);
    if is_csv { read_csv_slices(file) } else { read_tensor(file) }
}

pub fn read_csv_slices<R: BufRead>(r: R) -> Result<TubalMatrix> {
    let mut slices: Vec<Vec<Vec<f64>>> = vec![Vec::new()];
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            if !slices.last().is_some_and(|s| s.is_empty()) {
                slices.push(Vec::new());
            }
            continue;
        }
        let row = trimmed
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| TspError::Parse(format!("line {}: {e}", lineno + 1)))?;
        slices.last_mut().expect("nonempty").push(row);
    }
    if slices.last().is_some_and(|s| s.is_empty()) {
        slices.pop();
    }
    let l = slices.len();
    let m = slices.first().map_or(0, |s| s.len());
    let n = slices.first().and_then(|s| s.first()).map_or(0, |r| r.len());
    if l == 0 || m == 0 || n == 0 {
        return Err(TspError::Parse("empty slice stack".into()));
    }
    if slices.iter().any(|s| s.len() != m || s.iter().any(|row| row.len() != n)) {
        return Err(TspError::Parse("ragged slice stack".into()));
    }
    Ok(TubalMatrix::from_fn(m, n, l, |i, j, k| slices[k][i][j]))
}

pub fn write_csv_slices<W: Write>(mut w: W, x: &TubalMatrix) -> Result<()> {
    let (m, n, l) = x.dims();
    for k in 0..l {
        if k > 0 {
            writeln!(w)?;
        }
        for i in 0..m {
            let row: Vec<String> = (0..n).map(|j| format!("{:e}", x.get(i, j, k))).collect();
            writeln!(w, "{}", row.join(","))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn binary_round_trip_is_exact() {
        let x = TubalMatrix::random_normal(3, 2, 4, &mut ChaCha8Rng::seed_from_u64(1));
        let mut buf = Vec::new();
        write_tensor(&mut buf, &x).unwrap();
        assert_eq!(buf.len(), 4 + 24 + 8 * 24);
        assert_eq!(read_tensor(buf.as_slice()).unwrap(), x);
        assert!(read_tensor(&b"NOPE"[..]).is_err());
    }

    #[test]
    fn binary_layout_is_row_major() {
        let x = TubalMatrix::from_fn(1, 2, 2, |_, j, k| (10 * j + k) as f64);
        let mut buf = Vec::new();
        write_tensor(&mut buf, &x).unwrap();
        let vals: Vec<f64> =
            buf[28..].chunks(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        assert_eq!(vals, vec![0.0, 1.0, 10.0, 11.0]);
    }

    #[test]
    fn csv_round_trip() {
        let x = TubalMatrix::random_normal(2, 3, 3, &mut ChaCha8Rng::seed_from_u64(2));
        let mut buf = Vec::new();
        write_csv_slices(&mut buf, &x).unwrap();
        let y = read_csv_slices(buf.as_slice()).unwrap();
        assert!(y.max_abs_diff(&x) < 1e-12);
        assert!(read_csv_slices("1,2\n3\n".as_bytes()).is_err());
    }
}
