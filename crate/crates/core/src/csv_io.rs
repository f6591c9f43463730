//! CSV dataset format.
//!
//! Header `x0,..,x{n-1},y0,..,y{d-1},z`; attribute cells are exactly `0` or
//! `1`; floats are written in shortest round-trip form. Labeled data uses
//! `x0,..,x{n-1},b`.

use std::io::{Read, Write};
use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kdnf::MAX_ATTRIBUTES;
use crate::synthetic::LabeledExample;

fn csv_err(line: u64, column: usize, reason: impl Into<String>) -> Error {
    Error::Csv {
        line,
        column,
        reason: reason.into(),
    }
}

fn from_csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => csv_err(
            line,
            len as usize + 1,
            format!("expected {expected_len} fields, found {len}"),
        ),
        csv::ErrorKind::Utf8 { err, .. } => csv_err(line, err.field() + 1, "invalid UTF-8"),
        other => csv_err(line, 0, format!("{other:?}")),
    }
}

/// Parses the header and returns `(n, d)`.
fn dataset_header(header: &csv::StringRecord) -> Result<(usize, usize)> {
    let fields: Vec<&str> = header.iter().collect();
    let n = fields.iter().take_while(|f| f.starts_with('x')).count();
    if fields.last() != Some(&"z") {
        return Err(csv_err(1, fields.len(), "last column must be `z`"));
    }
    let d = fields.len() - n - 1;
    for (i, f) in fields[..n].iter().enumerate() {
        if *f != format!("x{i}") {
            return Err(csv_err(1, i + 1, format!("expected `x{i}`, found `{f}`")));
        }
    }
    for (i, f) in fields[n..n + d].iter().enumerate() {
        if *f != format!("y{i}") {
            return Err(csv_err(
                1,
                n + i + 1,
                format!("expected `y{i}`, found `{f}`"),
            ));
        }
    }
    if n > MAX_ATTRIBUTES {
        return Err(Error::TooManyAttributes {
            n,
            max: MAX_ATTRIBUTES,
        });
    }
    Ok((n, d))
}

fn parse_bit(cell: &str, line: u64, column: usize) -> Result<bool> {
    match cell {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(csv_err(
            line,
            column,
            format!("attribute must be 0 or 1, found `{cell}`"),
        )),
    }
}

fn parse_float(cell: &str, line: u64, column: usize) -> Result<f64> {
    let v: f64 = cell
        .parse()
        .map_err(|_| csv_err(line, column, format!("not a number: `{cell}`")))?;
    if !v.is_finite() {
        return Err(csv_err(line, column, format!("non-finite value `{cell}`")));
    }
    Ok(v)
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).from_reader(r)
}

pub fn read_dataset<R: Read>(r: R) -> Result<Dataset<f64>> {
    let mut rdr = reader(r);
    let header = rdr.headers().map_err(from_csv_error)?.clone();
    let (n, d) = dataset_header(&header)?;
    let mut data = Dataset::new(n, d)?;
    let mut y = vec![0.0; d];
    for record in rdr.records() {
        let record = record.map_err(from_csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let mut x = 0u64;
        for i in 0..n {
            if parse_bit(&record[i], line, i + 1)? {
                x |= 1 << i;
            }
        }
        for (i, v) in y.iter_mut().enumerate() {
            *v = parse_float(&record[n + i], line, n + i + 1)?;
        }
        let z = parse_float(&record[n + d], line, n + d + 1)?;
        data.push(x, &y, z)?;
    }
    Ok(data)
}

pub fn write_dataset<W: Write>(data: &Dataset<f64>, w: W) -> Result<()> {
    let mut out = std::io::BufWriter::new(w);
    let (n, d) = (data.n(), data.d());
    let header: Vec<String> = (0..n)
        .map(|i| format!("x{i}"))
        .chain((0..d).map(|i| format!("y{i}")))
        .chain(std::iter::once("z".to_string()))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    let z = data.targets();
    let cols: Vec<&[f64]> = (0..d).map(|i| data.y_column(i)).collect();
    let mut line = String::new();
    for j in 0..data.len() {
        line.clear();
        let x = data.x_row(j);
        for i in 0..n {
            line.push(if x >> i & 1 == 1 { '1' } else { '0' });
            line.push(',');
        }
        for col in &cols {
            line.push_str(&col[j].to_string());
            line.push(',');
        }
        line.push_str(&z[j].to_string());
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset_file(path: impl AsRef<Path>) -> Result<Dataset<f64>> {
    read_dataset(std::fs::File::open(path)?)
}

pub fn write_dataset_file(data: &Dataset<f64>, path: impl AsRef<Path>) -> Result<()> {
    write_dataset(data, std::fs::File::create(path)?)
}

/// Reads `x0,..,x{n-1},b` rows; returns `n` and the examples.
pub fn read_labeled<R: Read>(r: R) -> Result<(usize, Vec<LabeledExample>)> {
    let mut rdr = reader(r);
    let header = rdr.headers().map_err(from_csv_error)?.clone();
    let fields: Vec<&str> = header.iter().collect();
    if fields.last() != Some(&"b") {
        return Err(csv_err(1, fields.len(), "last column must be `b`"));
    }
    let n = fields.len() - 1;
    for (i, f) in fields[..n].iter().enumerate() {
        if *f != format!("x{i}") {
            return Err(csv_err(1, i + 1, format!("expected `x{i}`, found `{f}`")));
        }
    }
    if n > MAX_ATTRIBUTES {
        return Err(Error::TooManyAttributes {
            n,
            max: MAX_ATTRIBUTES,
        });
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(from_csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let mut x = 0u64;
        for i in 0..n {
            if parse_bit(&record[i], line, i + 1)? {
                x |= 1 << i;
            }
        }
        let b = parse_bit(&record[n], line, n + 1)?;
        out.push(LabeledExample { x, b });
    }
    Ok((n, out))
}

pub fn write_labeled<W: Write>(n: usize, data: &[LabeledExample], w: W) -> Result<()> {
    let mut out = std::io::BufWriter::new(w);
    let header: Vec<String> = (0..n)
        .map(|i| format!("x{i}"))
        .chain(["b".to_string()])
        .collect();
    writeln!(out, "{}", header.join(","))?;
    let mut line = String::new();
    for ex in data {
        line.clear();
        for i in 0..n {
            line.push(if ex.x >> i & 1 == 1 { '1' } else { '0' });
            line.push(',');
        }
        line.push(if ex.b { '1' } else { '0' });
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut d = Dataset::new(3, 2).unwrap();
        d.push(0b101, &[0.1, -1.0 / 3.0], 1e-300).unwrap();
        d.push(0b010, &[f64::MAX, -0.0], 2.5).unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x0,x1,x2,y0,y1,z\n1,0,1,"));
        assert_eq!(read_dataset(&buf[..]).unwrap(), d);
    }

    #[test]
    fn bad_cells_report_position() {
        let err = read_dataset("x0,y0,z\n1,0.5,1\n2,0.5,1\n".as_bytes()).unwrap_err();
        assert!(
            matches!(
                err,
                Error::Csv {
                    line: 3,
                    column: 1,
                    ..
                }
            ),
            "{err:?}"
        );
        let err = read_dataset("x0,y0,z\n1,abc,1\n".as_bytes()).unwrap_err();
        assert!(
            matches!(
                err,
                Error::Csv {
                    line: 2,
                    column: 2,
                    ..
                }
            ),
            "{err:?}"
        );
        let err = read_dataset("x0,y0,z\n1,0.5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Csv { line: 2, .. }), "{err:?}");
        let err = read_dataset("x0,y1,z\n".as_bytes()).unwrap_err();
        assert!(
            matches!(
                err,
                Error::Csv {
                    line: 1,
                    column: 2,
                    ..
                }
            ),
            "{err:?}"
        );
        assert!(read_dataset("x0,y0,z\n1,inf,0\n".as_bytes()).is_err());
    }

    #[test]
    fn empty_feature_set() {
        let d = read_dataset("x0,x1,z\n1,1,0.25\n".as_bytes()).unwrap();
        assert_eq!((d.n(), d.d(), d.len()), (2, 0, 1));
    }

    #[test]
    fn labeled_round_trip() {
        let data = vec![
            LabeledExample { x: 5, b: true },
            LabeledExample { x: 2, b: false },
        ];
        let mut buf = Vec::new();
        write_labeled(3, &data, &mut buf).unwrap();
        assert_eq!(read_labeled(&buf[..]).unwrap(), (3, data));
    }
}
