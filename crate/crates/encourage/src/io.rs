//! Sample CSV files: header `y,d,x1,..,xK,z1,..,zL[,u]`, one row per unit.
//! Columns may appear in any order; lines starting with `#` are skipped.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use encourage_core::linalg::RowMatrix;
use encourage_core::Sample;

use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    Y,
    D,
    X(usize),
    Z(usize),
    U,
}

fn parse_header(name: &str) -> Option<Column> {
    let name = name.trim();
    match name {
        "y" => return Some(Column::Y),
        "d" => return Some(Column::D),
        "u" => return Some(Column::U),
        _ => {}
    }
    let (head, idx) = name.split_at(name.len().min(1));
    let j: usize = idx.parse().ok().filter(|&j| j > 0)?;
    match head {
        "x" => Some(Column::X(j - 1)),
        "z" => Some(Column::Z(j - 1)),
        _ => None,
    }
}

pub fn read_sample(path: &Path) -> Result<Sample> {
    let file = File::open(path).map_err(io_err(path))?;
    read_sample_from(file, &path.display().to_string())
}

/// Reads a sample; `origin` names the source in error messages.
pub fn read_sample_from<R: Read>(reader: R, origin: &str) -> Result<Sample> {
    let csv_err = |source| Error::Csv { path: origin.into(), source };
    let schema = |msg: String| Error::Schema(format!("{origin}: {msg}"));
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).flexible(true).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let mut cols = Vec::with_capacity(headers.len());
    for h in &headers {
        let c = parse_header(h).ok_or_else(|| schema(format!("unknown column {h:?}")))?;
        if cols.contains(&c) {
            return Err(schema(format!("duplicate column {h:?}")));
        }
        cols.push(c);
    }
    let count = |f: fn(&Column) -> bool| cols.iter().filter(|c| f(c)).count();
    let dx = count(|c| matches!(c, Column::X(_)));
    let dz = count(|c| matches!(c, Column::Z(_)));
    for (name, k, is) in [("x", dx, true), ("z", dz, false)] {
        for j in 0..k {
            let want = if is { Column::X(j) } else { Column::Z(j) };
            if !cols.contains(&want) {
                return Err(schema(format!("{name} columns must be numbered 1..{k}; {name}{} is missing", j + 1)));
            }
        }
    }
    for (c, name) in [(Column::Y, "y"), (Column::D, "d")] {
        if !cols.contains(&c) {
            return Err(schema(format!("required column {name:?} is missing")));
        }
    }
    if dz == 0 {
        return Err(schema("at least one instrument column z1 is required".into()));
    }
    let has_u = cols.contains(&Column::U);
    let (mut y, mut d, mut x, mut z, mut u) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut xrow = vec![0.0; dx];
    let mut zrow = vec![0.0; dz];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != cols.len() {
            return Err(schema(format!("row {row} has {} fields, expected {}", rec.len(), cols.len())));
        }
        for (field, col) in rec.iter().zip(&cols) {
            let v: f64 = field
                .parse()
                .map_err(|_| schema(format!("row {row}: {field:?} is not a number")))?;
            if !v.is_finite() {
                return Err(schema(format!("row {row}: non-finite value")));
            }
            match *col {
                Column::Y => y.push(v),
                Column::D => {
                    if v != 0.0 && v != 1.0 {
                        return Err(schema(format!("row {row}: d = {v} is not 0 or 1")));
                    }
                    d.push(v);
                }
                Column::X(j) => xrow[j] = v,
                Column::Z(k) => zrow[k] = v,
                Column::U => {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(schema(format!("row {row}: u = {v} is outside [0, 1]")));
                    }
                    u.push(v);
                }
            }
        }
        x.extend_from_slice(&xrow);
        z.extend_from_slice(&zrow);
    }
    let n = y.len();
    if n == 0 {
        return Err(schema("no data rows".into()));
    }
    let x = RowMatrix::from_vec(n, dx, x)?;
    let z = RowMatrix::from_vec(n, dz, z)?;
    Ok(Sample::new(y, d, x, z, has_u.then_some(u))?)
}

pub fn write_sample(path: &Path, sample: &Sample) -> Result<()> {
    let mut buf = Vec::new();
    write_sample_to(&mut buf, sample)?;
    std::fs::write(path, buf).map_err(io_err(path))
}

/// Writes `y,d,x..,z..[,u]` with shortest round-trip float formatting.
pub fn write_sample_to<W: Write>(out: W, sample: &Sample) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["y".to_string(), "d".to_string()];
    header.extend((1..=sample.dx()).map(|j| format!("x{j}")));
    header.extend((1..=sample.dz()).map(|k| format!("z{k}")));
    if sample.latent_u().is_some() {
        header.push("u".into());
    }
    let wrap = |source| Error::Csv { path: "<output>".into(), source };
    w.write_record(&header).map_err(wrap)?;
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for i in 0..sample.n() {
        rec.clear();
        rec.push(sample.y()[i].to_string());
        rec.push(sample.d()[i].to_string());
        rec.extend(sample.x_row(i).iter().map(f64::to_string));
        rec.extend(sample.z_row(i).iter().map(f64::to_string));
        if let Some(u) = sample.latent_u() {
            rec.push(u[i].to_string());
        }
        w.write_record(&rec).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::Io { path: "<output>".into(), source: e })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_parse() {
        assert_eq!(parse_header("x2"), Some(Column::X(1)));
        assert_eq!(parse_header("z1"), Some(Column::Z(0)));
        assert_eq!(parse_header("x0"), None);
        assert_eq!(parse_header("w1"), None);
    }

    #[test]
    fn schema_errors_name_the_row() {
        let text = "y,d,x1,z1\n1,0,1,2\n2,3,1,2\n";
        let err = read_sample_from(text.as_bytes(), "t.csv").unwrap_err().to_string();
        assert!(err.contains("row 1") && err.contains("d = 3"), "{err}");
        let text = "y,d,x2,z1\n1,0,1,2\n";
        assert!(read_sample_from(text.as_bytes(), "t.csv").unwrap_err().to_string().contains("x1 is missing"));
        let text = "y,d,x1\n1,0,1\n";
        assert!(matches!(read_sample_from(text.as_bytes(), "t.csv"), Err(Error::Schema(_))));
    }

    #[test]
    fn columns_in_any_order_with_comments() {
        let text = "# note\nz1,y,x1,d\n0.5,2,1,1\n";
        let s = read_sample_from(text.as_bytes(), "t.csv").unwrap();
        assert_eq!(s.y(), &[2.0]);
        assert_eq!(s.z_row(0), &[0.5]);
    }
}
