//! Plain-text `.tns` tensor files.
//!
//! ```text
//! order 3
//! dims 2 2 2
//! 1.0
//! ...
//! ```
//!
//! Values follow in row-major order, one per line. Writing uses the shortest
//! round-trip representation of each `f64`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

pub fn to_string(t: &DenseTensor) -> String {
    let mut s = String::with_capacity(16 * t.data().len() + 32);
    let _ = writeln!(s, "order {}", t.order());
    let dims: Vec<String> = t.dims().iter().map(|d| d.to_string()).collect();
    let _ = writeln!(s, "dims {}", dims.join(" "));
    for v in t.data() {
        let _ = writeln!(s, "{v:e}");
    }
    s
}

pub fn write<W: Write>(mut w: W, t: &DenseTensor) -> Result<()> {
    w.write_all(to_string(t).as_bytes())?;
    Ok(())
}

pub fn write_file(path: impl AsRef<Path>, t: &DenseTensor) -> Result<()> {
    std::fs::write(path, to_string(t))?;
    Ok(())
}

pub fn read<R: BufRead>(reader: R) -> Result<DenseTensor> {
    let mut lines = reader
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)))
        .filter(|r| r.as_ref().map_or(true, |(_, l)| !l.trim().is_empty()));

    let (ln, header) = lines.next().ok_or_else(|| Error::Parse("empty file".into()))??;
    let order = parse_keyword_line(&header, "order", ln)?;
    let order = match order.as_slice() {
        [k] => *k,
        _ => return Err(Error::Parse(format!("line {ln}: expected `order k`"))),
    };
    let (ln, dims_line) = lines.next().ok_or_else(|| Error::Parse("missing dims line".into()))??;
    let dims = parse_keyword_line(&dims_line, "dims", ln)?;
    if dims.len() != order {
        return Err(Error::Parse(format!(
            "line {ln}: order {order} but {} dims listed",
            dims.len()
        )));
    }
    let mut data = Vec::new();
    for line in lines {
        let (ln, line) = line?;
        let v: f64 = line
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("line {ln}: `{}` is not a number", line.trim())))?;
        data.push(v);
    }
    let expected: usize = dims.iter().product();
    if data.len() != expected {
        return Err(Error::Parse(format!("expected {expected} values, found {}", data.len())));
    }
    DenseTensor::new(&dims, data)
}

pub fn read_file(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let f = std::fs::File::open(path)?;
    read(std::io::BufReader::new(f))
}

fn parse_keyword_line(line: &str, keyword: &str, ln: usize) -> Result<Vec<usize>> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(keyword) {
        return Err(Error::Parse(format!("line {ln}: expected `{keyword}`")));
    }
    parts
        .map(|p| p.parse::<usize>().map_err(|_| Error::Parse(format!("line {ln}: bad integer `{p}`"))))
        .collect()
}
