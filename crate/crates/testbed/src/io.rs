//! Headered CSV datasets: columns `x1..xd,y` for training corpora, or
//! `x1..xd` alone for prediction inputs. Values are written in shortest
//! round-trip decimal form, so write-then-read reproduces every float
//! bit for bit.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use palm::error::{PalmError, Result};

fn input_headers(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

/// Writes a dataset as `x1..xd,y` rows.
pub fn write_dataset_csv(path: &Path, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(PalmError::DimensionMismatch {
            context: "dataset responses",
            expected: x.nrows(),
            found: y.len(),
        });
    }
    if x.ncols() == 0 {
        return Err(PalmError::InvalidArgument(
            "a dataset needs at least one input column".into(),
        ));
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(PalmError::NonFinite("csv dataset"));
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = input_headers(x.ncols());
    header.push("y".into());
    w.write_record(&header)?;
    for (row, &yi) in x.rows().into_iter().zip(y.iter()) {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        rec.push(format!("{yi}"));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_field(field: &str, row: usize, col: &str) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| {
        PalmError::InvalidArgument(format!("row {row}: column {col} is not a number: {field:?}"))
    })?;
    if !v.is_finite() {
        return Err(PalmError::NonFinite("csv dataset"));
    }
    Ok(v)
}

fn check_input_headers(found: &[&str], want_y: bool, path: &Path) -> Result<usize> {
    let bad = || {
        PalmError::InvalidArgument(format!(
            "{}: expected headers x1..xd{}, got {:?}",
            path.display(),
            if want_y { ",y" } else { "" },
            found
        ))
    };
    let d = if want_y {
        found.len().checked_sub(1).ok_or_else(bad)?
    } else {
        found.len()
    };
    if d == 0 {
        return Err(bad());
    }
    for (j, name) in found.iter().take(d).enumerate() {
        if *name != format!("x{}", j + 1) {
            return Err(bad());
        }
    }
    if want_y && found[d] != "y" {
        return Err(bad());
    }
    Ok(d)
}

/// Reads an `x1..xd,y` dataset. A header-only file yields zero rows.
pub fn read_dataset_csv(path: &Path) -> Result<(Array2<f64>, Array1<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let fields: Vec<&str> = headers.iter().collect();
    let d = check_input_headers(&fields, true, path)?;
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != d + 1 {
            return Err(PalmError::InvalidArgument(format!(
                "row {}: expected {} fields, got {}",
                i + 1,
                d + 1,
                rec.len()
            )));
        }
        for j in 0..d {
            xs.push(parse_field(&rec[j], i + 1, fields[j])?);
        }
        ys.push(parse_field(&rec[d], i + 1, "y")?);
    }
    let n = ys.len();
    let x = Array2::from_shape_vec((n, d), xs).expect("row-major fill");
    Ok((x, Array1::from_vec(ys)))
}

/// Reads prediction inputs: headers `x1..xd`, or a full `x1..xd,y`
/// dataset whose response column is ignored.
pub fn read_inputs_csv(path: &Path) -> Result<Array2<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let fields: Vec<&str> = headers.iter().collect();
    let has_y = fields.last() == Some(&"y") && fields.len() >= 2;
    let d = check_input_headers(&fields, has_y, path)?;
    let mut xs: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let want = d + usize::from(has_y);
        if rec.len() != want {
            return Err(PalmError::InvalidArgument(format!(
                "row {}: expected {} fields, got {}",
                i + 1,
                want,
                rec.len()
            )));
        }
        for j in 0..d {
            xs.push(parse_field(&rec[j], i + 1, fields[j])?);
        }
        n += 1;
    }
    Ok(Array2::from_shape_vec((n, d), xs).expect("row-major fill"))
}
