//! Trajectory interchange formats.
//!
//! * CSV: header `t,x1,...,xQ`, one row per time step, values written with
//!   the shortest representation that parses back to the identical `f64`.
//! * `CCTS` binary snapshot, little-endian:
//!
//! ```text
//! offset  size   field
//! 0       4      magic "CCTS"
//! 4       4      format version (u32, currently 1)
//! 8       4      Q (u32)
//! 12      8      T (u64)
//! 20      8      dt (f64)
//! 28      8*Q*T  data, row-major: all T values of dimension 1, then dimension 2, ...
//! ```

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::series::TimeSeries;

pub const CCTS_MAGIC: &[u8; 4] = b"CCTS";
pub const CCTS_VERSION: u32 = 1;
const CCTS_HEADER_LEN: usize = 28;

pub fn write_csv<W: Write>(series: &TimeSeries, mut w: W) -> Result<()> {
    let q = series.dim();
    let mut header = String::from("t");
    for i in 1..=q {
        header.push_str(&format!(",x{i}"));
    }
    writeln!(w, "{header}")?;
    let mut line = String::new();
    for (t, col) in series.columns().enumerate() {
        line.clear();
        line.push_str(&format!("{:?}", series.time(t)));
        for v in col {
            line.push(',');
            line.push_str(&format!("{v:?}"));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Parses the CSV layout written by [`write_csv`].
///
/// When `dt` is `None` the step is recovered from the time column, which
/// needs at least two rows.
pub fn read_csv<R: Read>(r: R, dt: Option<f64>) -> Result<TimeSeries> {
    let mut lines = BufReader::new(r).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format("empty CSV"))??;
    let names: Vec<&str> = header.trim().split(',').collect();
    if names.first() != Some(&"t") || names.len() < 2 {
        return Err(Error::format(format!("bad CSV header {header:?}")));
    }
    for (i, n) in names[1..].iter().enumerate() {
        if *n != format!("x{}", i + 1) {
            return Err(Error::format(format!("bad CSV column name {n:?}")));
        }
    }
    let q = names.len() - 1;
    let mut times = Vec::new();
    let mut data = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != q + 1 {
            return Err(Error::format(format!(
                "row {} has {} fields, expected {}",
                lineno + 2,
                fields.len(),
                q + 1
            )));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::format(format!("row {}: {e}: {s:?}", lineno + 2)))
        };
        times.push(parse(fields[0])?);
        for f in &fields[1..] {
            data.push(parse(f)?);
        }
    }
    if times.is_empty() {
        return Err(Error::format("CSV has no data rows"));
    }
    let dt = match dt {
        Some(dt) => dt,
        None if times.len() >= 2 => (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64,
        None => return Err(Error::format("cannot infer dt from a single-row CSV")),
    };
    TimeSeries::new(q, dt, times[0], data)
}

pub fn write_ccts<W: Write>(series: &TimeSeries, mut w: W) -> Result<()> {
    let q = series.dim();
    let t = series.len();
    let mut buf = Vec::with_capacity(CCTS_HEADER_LEN + 8 * q * t);
    buf.extend_from_slice(CCTS_MAGIC);
    buf.extend_from_slice(&CCTS_VERSION.to_le_bytes());
    buf.extend_from_slice(&(q as u32).to_le_bytes());
    buf.extend_from_slice(&(t as u64).to_le_bytes());
    buf.extend_from_slice(&series.dt().to_le_bytes());
    for i in 0..q {
        for col in series.columns() {
            buf.extend_from_slice(&col[i].to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_ccts<R: Read>(mut r: R) -> Result<TimeSeries> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_ccts(&bytes)
}

pub fn decode_ccts(bytes: &[u8]) -> Result<TimeSeries> {
    if bytes.len() < CCTS_HEADER_LEN {
        return Err(Error::format("CCTS file shorter than its header"));
    }
    if &bytes[0..4] != CCTS_MAGIC {
        return Err(Error::format("missing CCTS magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CCTS_VERSION {
        return Err(Error::format(format!("unsupported CCTS version {version}")));
    }
    let q = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let t = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let dt = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
    let expected = q
        .checked_mul(t)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(CCTS_HEADER_LEN))
        .ok_or_else(|| Error::format("CCTS dimensions overflow"))?;
    if bytes.len() != expected {
        return Err(Error::format(format!(
            "CCTS payload is {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let payload = &bytes[CCTS_HEADER_LEN..];
    let mut data = vec![0.0; q * t];
    for (k, chunk) in payload.chunks_exact(8).enumerate() {
        let (i, step) = (k / t, k % t);
        data[step * q + i] = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    TimeSeries::new(q, dt, 0.0, data)
}

/// Trajectory file flavour, chosen from the extension when not given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesFormat {
    Ccts,
    Csv,
}

impl SeriesFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => SeriesFormat::Csv,
            _ => SeriesFormat::Ccts,
        }
    }
}

pub fn save_series(series: &TimeSeries, path: &Path, format: SeriesFormat) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    match format {
        SeriesFormat::Csv => write_csv(series, &mut w)?,
        SeriesFormat::Ccts => write_ccts(series, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

pub fn load_series(path: &Path) -> Result<TimeSeries> {
    let f = fs::File::open(path)?;
    match SeriesFormat::from_path(path) {
        SeriesFormat::Csv => read_csv(f, None),
        SeriesFormat::Ccts => read_ccts(f),
    }
}

/// Writes one value per line under a single-column header.
pub fn write_curve_csv<W: Write>(name: &str, dt: f64, values: &[f64], mut w: W) -> Result<()> {
    writeln!(w, "t,{name}")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(w, "{:?},{v:?}", i as f64 * dt)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TimeSeries {
        TimeSeries::from_rows(
            &[vec![0.1, -2.5e-300, 3.0], vec![1.0 / 3.0, 7.0, -0.0]],
            0.01,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let s = sample();
        let mut buf = Vec::new();
        write_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x1,x2\n"));
        let back = read_csv(&buf[..], Some(0.01)).unwrap();
        let a: Vec<u64> = s.as_slice().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = back.as_slice().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn ccts_layout_is_row_major_little_endian() {
        let s = sample();
        let mut buf = Vec::new();
        write_ccts(&s, &mut buf).unwrap();
        assert_eq!(&buf[0..4], b"CCTS");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(buf[12..20].try_into().unwrap()), 3);
        assert_eq!(f64::from_le_bytes(buf[20..28].try_into().unwrap()), 0.01);
        // second value of the payload is dimension 1 at t = 1
        assert_eq!(f64::from_le_bytes(buf[36..44].try_into().unwrap()), -2.5e-300);
        assert_eq!(buf.len(), 28 + 8 * 6);
        let back = decode_ccts(&buf).unwrap();
        assert_eq!(back.as_slice(), s.as_slice());
        assert_eq!(back.dt(), 0.01);
    }

    #[test]
    fn ccts_rejects_corruption() {
        let mut buf = Vec::new();
        write_ccts(&sample(), &mut buf).unwrap();
        assert!(decode_ccts(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(decode_ccts(&bad).is_err());
        let mut bad = buf;
        bad[4] = 9;
        assert!(decode_ccts(&bad).is_err());
    }

    #[test]
    fn csv_rejects_ragged_rows() {
        let text = "t,x1,x2\n0,1,2\n0.1,3\n";
        assert!(read_csv(text.as_bytes(), None).is_err());
        assert!(read_csv("t,y1\n0,1\n".as_bytes(), Some(1.0)).is_err());
    }
}
