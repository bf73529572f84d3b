//! Point-cloud readers.
//!
//! CSV: UTF-8, optional single header `x1,…,xn,p1,…,pn` (exactly that order),
//! one measurement per row, `.` as decimal separator.
//! JSON: `{"n": int, "points": [[…2n reals…], …]}`.

use std::fs;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::phase_space::{PhaseVector, PointCloud, Units};

/// Reads a cloud from `path`, choosing JSON for `.json` files or content
/// starting with `{`, CSV otherwise.
pub fn load_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Ingest {
        row: 0,
        col: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
        || text.trim_start().starts_with('{');
    if is_json {
        parse_json(&text)
    } else {
        parse_csv(text.as_bytes())
    }
}

fn ingest(row: usize, col: Option<usize>, message: impl Into<String>) -> Error {
    Error::Ingest { row, col, message: message.into() }
}

fn expected_header(n: usize) -> Vec<String> {
    (1..=n)
        .map(|i| format!("x{i}"))
        .chain((1..=n).map(|i| format!("p{i}")))
        .collect()
}

fn check_header(fields: &[String]) -> Result<usize> {
    if fields.len() % 2 != 0 || fields.is_empty() {
        return Err(ingest(1, None, format!("header has {} columns, expected an even count", fields.len())));
    }
    let n = fields.len() / 2;
    let want = expected_header(n);
    for (c, (got, want)) in fields.iter().zip(&want).enumerate() {
        if !got.eq_ignore_ascii_case(want) {
            let hint = if n > 1 && fields.get(1).is_some_and(|f| f.eq_ignore_ascii_case("p1")) {
                " (interleaved x/p ordering is not accepted; list all positions first)"
            } else {
                ""
            };
            return Err(ingest(1, Some(c + 1), format!("header column '{got}', expected '{want}'{hint}")));
        }
    }
    Ok(n)
}

/// Parses CSV text. Row numbers in errors are 1-based source lines.
pub fn parse_csv<R: Read>(reader: R) -> Result<PointCloud> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut n: Option<usize> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(idx + 1, |p| p.line() as usize);
            ingest(line, None, e.to_string())
        })?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        let fields: Vec<String> = record.iter().map(str::to_owned).collect();
        if fields.iter().all(String::is_empty) {
            continue;
        }

        if idx == 0 && fields[0].parse::<f64>().is_err() {
            n = Some(check_header(&fields)?);
            continue;
        }

        let width = match n {
            Some(n) => 2 * n,
            None => {
                if fields.len() % 2 != 0 {
                    return Err(ingest(line, None, format!("{} columns, expected an even count", fields.len())));
                }
                n = Some(fields.len() / 2);
                fields.len()
            }
        };
        if fields.len() != width {
            return Err(ingest(line, None, format!("ragged row: {} columns, expected {width}", fields.len())));
        }
        let mut coords = Vec::with_capacity(width);
        for (c, f) in fields.iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| ingest(line, Some(c + 1), format!("'{f}' is not a number")))?;
            if !v.is_finite() {
                return Err(ingest(line, Some(c + 1), format!("'{f}' is not finite")));
            }
            coords.push(v);
        }
        rows.push(coords);
    }

    let n = n.ok_or_else(|| ingest(1, None, "no data rows"))?;
    finish(n, rows)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CloudJson {
    n: usize,
    points: Vec<Vec<f64>>,
    #[serde(default)]
    units: Units,
}

/// Parses the JSON cloud format. Row numbers count points from 1.
pub fn parse_json(text: &str) -> Result<PointCloud> {
    // non-finite literals are not valid JSON, so serde rejects them here
    let doc: CloudJson =
        serde_json::from_str(text).map_err(|e| ingest(e.line(), Some(e.column()), e.to_string()))?;
    if doc.n == 0 {
        return Err(ingest(0, None, "n must be positive"));
    }
    for (i, p) in doc.points.iter().enumerate() {
        if p.len() != 2 * doc.n {
            return Err(ingest(i + 1, None, format!("point has {} coordinates, expected {}", p.len(), 2 * doc.n)));
        }
    }
    let mut cloud = finish(doc.n, doc.points)?;
    cloud.units = doc.units;
    Ok(cloud)
}

fn finish(n: usize, rows: Vec<Vec<f64>>) -> Result<PointCloud> {
    let min = PointCloud::min_estimation_size(n);
    if rows.len() < min {
        return Err(ingest(
            rows.len(),
            None,
            format!("{} points with n = {n}; at least 2n+2 = {min} are required", rows.len()),
        ));
    }
    let points = rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| PhaseVector::new(n, r).map_err(|e| ingest(i + 1, None, e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    PointCloud::new(n, points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_rows(header: Option<&str>, rows: usize, cols: usize) -> String {
        let mut s = String::new();
        if let Some(h) = header {
            s.push_str(h);
            s.push('\n');
        }
        for r in 0..rows {
            let line: Vec<String> = (0..cols).map(|c| format!("{}.5", r * cols + c)).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    #[test]
    fn two_column_with_header() {
        let cloud = parse_csv(csv_rows(Some("x1,p1"), 10, 2).as_bytes()).unwrap();
        assert_eq!(cloud.n(), 1);
        assert_eq!(cloud.len(), 10);
        assert_eq!(cloud.points()[1].coords(), &[2.5, 3.5]);
    }

    #[test]
    fn headerless_infers_n() {
        let cloud = parse_csv(csv_rows(None, 6, 4).as_bytes()).unwrap();
        assert_eq!(cloud.n(), 2);
    }

    #[test]
    fn nan_row_is_located() {
        let text = "x1,p1\n1,2\n3,4\n5,NaN\n7,8\n9,10\n11,12\n";
        match parse_csv(text.as_bytes()) {
            Err(Error::Ingest { row, col, .. }) => {
                assert_eq!(row, 4);
                assert_eq!(col, Some(2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn too_few_rows() {
        let err = parse_csv(csv_rows(Some("x1,x2,p1,p2"), 5, 4).as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Ingest { .. }));
        assert!(err.to_string().contains("2n+2 = 6"));
    }

    #[test]
    fn ragged_and_non_numeric() {
        let err = parse_csv("1,2\n3,4,5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Ingest { row: 2, .. }), "{err}");
        let err = parse_csv("1,2\n3,abc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Ingest { row: 2, col: Some(2), .. }), "{err}");
    }

    #[test]
    fn interleaved_header_rejected() {
        let err = parse_csv(csv_rows(Some("x1,p1,x2,p2"), 8, 4).as_bytes()).unwrap_err();
        assert!(err.to_string().contains("interleaved"), "{err}");
    }

    #[test]
    fn json_format() {
        let text = r#"{"n": 1, "points": [[0,1],[1,0],[2,2],[3,1],[0.5,0.25]]}"#;
        let cloud = parse_json(text).unwrap();
        assert_eq!(cloud.len(), 5);
        let bad = r#"{"n": 1, "points": [[0,1],[1,0,3],[2,2],[3,1]]}"#;
        assert!(matches!(parse_json(bad), Err(Error::Ingest { row: 2, .. })));
    }
}
