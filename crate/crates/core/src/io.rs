//! CSV ingestion and emission of unit datasets.
//!
//! Normal data uses the columns `id,x,sigma2`, binomial data `id,y,n`, and
//! posterior draws either one row per unit (`id` followed by draw columns) or
//! an id list plus a sidecar matrix with one row of draws per unit. A header
//! row is required; lines starting with `#` are comments.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Payload, PayloadKind, UnitRecord};

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn parse_f64(field: &str, what: &str, line: u64) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}: {what} '{field}' is not a number")))
}

fn parse_u64(field: &str, what: &str, line: u64) -> Result<u64> {
    field
        .parse::<u64>()
        .map_err(|_| Error::Parse(format!("line {line}: {what} '{field}' is not a nonnegative integer")))
}

/// Infer the payload kind from a header row.
pub fn detect_kind(headers: &[&str]) -> Option<PayloadKind> {
    match headers {
        ["id", "x", "sigma2"] => Some(PayloadKind::Normal),
        ["id", "y", "n"] => Some(PayloadKind::Binomial),
        ["id", rest @ ..] if !rest.is_empty() => Some(PayloadKind::Draws),
        _ => None,
    }
}

/// Parse units from CSV text. `kind` is inferred from the header when `None`.
pub fn read_units<R: Read>(input: R, kind: Option<PayloadKind>) -> Result<Vec<UnitRecord>> {
    let mut rdr = reader(input);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) if e.is_io_error() => return Err(e.into()),
        Err(_) => return Err(Error::EmptyDataset),
    };
    let names: Vec<&str> = headers.iter().collect();
    if names.iter().all(|h| h.is_empty()) {
        return Err(Error::EmptyDataset);
    }
    let detected = detect_kind(&names)
        .ok_or_else(|| Error::Parse(format!("unrecognised header '{}'", names.join(","))))?;
    let kind = kind.unwrap_or(detected);
    if kind != detected && !(kind == PayloadKind::Draws && names.first() == Some(&"id")) {
        return Err(Error::ModelMismatch(format!(
            "header '{}' does not match model '{}'",
            names.join(","),
            kind.name()
        )));
    }
    let mut units = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let id = rec.get(0).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(Error::Parse(format!("line {line}: missing id")));
        }
        let field = |i: usize| {
            rec.get(i)
                .ok_or_else(|| Error::Parse(format!("line {line}: missing column {}", i + 1)))
        };
        let payload = match kind {
            PayloadKind::Normal => Payload::Normal {
                x: parse_f64(field(1)?, "x", line)?,
                sigma2: parse_f64(field(2)?, "sigma2", line)?,
            },
            PayloadKind::Binomial => Payload::Binomial {
                y: parse_u64(field(1)?, "y", line)?,
                n: parse_u64(field(2)?, "n", line)?,
            },
            PayloadKind::Draws => Payload::Draws {
                draws: rec
                    .iter()
                    .skip(1)
                    .filter(|f| !f.is_empty())
                    .map(|f| parse_f64(f, "draw", line))
                    .collect::<Result<_>>()?,
            },
        };
        units.push(UnitRecord { id, payload });
    }
    if units.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(units)
}

pub fn read_units_path(path: &Path, kind: Option<PayloadKind>) -> Result<Vec<UnitRecord>> {
    read_units(std::fs::File::open(path)?, kind)
}

/// Posterior draws given as an `id` list plus a matrix with one row per unit.
pub fn read_draws_sidecar<R1: Read, R2: Read>(ids: R1, matrix: R2) -> Result<Vec<UnitRecord>> {
    let mut id_rdr = reader(ids);
    let mut id_list = Vec::new();
    for rec in id_rdr.records() {
        let rec = rec?;
        id_list.push(rec.get(0).unwrap_or("").to_string());
    }
    let mut m_rdr = reader(matrix);
    let mut units = Vec::with_capacity(id_list.len());
    let mut rows = m_rdr.records();
    for id in id_list {
        let rec = rows
            .next()
            .ok_or_else(|| Error::Parse(format!("draw matrix has no row for unit {id}")))??;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let draws = rec
            .iter()
            .filter(|f| !f.is_empty())
            .map(|f| parse_f64(f, "draw", line))
            .collect::<Result<Vec<_>>>()?;
        units.push(UnitRecord::draws(id, draws));
    }
    if rows.next().is_some() {
        return Err(Error::Parse("draw matrix has more rows than ids".into()));
    }
    if units.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(units)
}

/// Write units as CSV in the format [`read_units`] accepts. Reals use the
/// shortest representation that round-trips exactly.
pub fn write_units<W: Write>(out: W, units: &[UnitRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    let Some(first) = units.first() else {
        return Err(Error::EmptyDataset);
    };
    match first.payload.kind() {
        PayloadKind::Normal => w.write_record(["id", "x", "sigma2"])?,
        PayloadKind::Binomial => w.write_record(["id", "y", "n"])?,
        PayloadKind::Draws => {
            let width = units
                .iter()
                .map(|u| match &u.payload {
                    Payload::Draws { draws } => draws.len(),
                    _ => 0,
                })
                .max()
                .unwrap_or(0);
            let mut head = vec!["id".to_string()];
            head.extend((1..=width).map(|k| format!("draw_{k}")));
            w.write_record(&head)?;
        }
    }
    for u in units {
        let mut row = vec![u.id.clone()];
        match &u.payload {
            Payload::Normal { x, sigma2 } => {
                row.push(x.to_string());
                row.push(sigma2.to_string());
            }
            Payload::Binomial { y, n } => {
                row.push(y.to_string());
                row.push(n.to_string());
            }
            Payload::Draws { draws } => row.extend(draws.iter().map(|d| d.to_string())),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// A real with 6 significant digits, in the style of C's `%g`.
pub fn fmt_sig6(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent");
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-4..6).contains(&exp) {
        trim(format!("{v:.*}", (5 - exp).max(0) as usize))
    } else {
        format!("{}e{exp}", trim(mant.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reads_each_kind() {
        let n = read_units("id,x,sigma2\na,0.5,1\nb,-1e-3,2.5\n".as_bytes(), None).unwrap();
        assert_eq!(n[1], UnitRecord::normal("b", -1e-3, 2.5));
        let b = read_units("# note\nid,y,n\nRoberts,125,133\n".as_bytes(), None).unwrap();
        assert_eq!(b[0], UnitRecord::binomial("Roberts", 125, 133));
        let d = read_units("id,d1,d2,d3\nu,1,2,3\nv,4,5,\n".as_bytes(), None).unwrap();
        assert_eq!(d[1], UnitRecord::draws("v", vec![4.0, 5.0]));
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_sig6(0.913_839_1), "0.913839");
        assert_eq!(fmt_sig6(0.016), "0.016");
        assert_eq!(fmt_sig6(123456.7), "123457");
        assert_eq!(fmt_sig6(1.0), "1");
        assert_eq!(fmt_sig6(2.5e-7), "2.5e-7");
        assert_eq!(fmt_sig6(-1234567.0), "-1.23457e6");
        assert_eq!(fmt_sig6(0.00012345678), "0.000123457");
        assert_eq!(fmt_sig6(5.967_94e-5), "5.96794e-5");
        assert_eq!(fmt_sig6(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn empty_input_is_empty_dataset() {
        assert!(matches!(read_units("".as_bytes(), None), Err(Error::EmptyDataset)));
        assert!(matches!(read_units("id,y,n\n".as_bytes(), None), Err(Error::EmptyDataset)));
    }

    #[test]
    fn bad_fields_and_kind_mismatch() {
        assert!(matches!(read_units("id,y,n\na,1.5,3\n".as_bytes(), None), Err(Error::Parse(_))));
        assert!(matches!(
            read_units("id,y,n\na,1,3\n".as_bytes(), Some(PayloadKind::Normal)),
            Err(Error::ModelMismatch(_))
        ));
    }

    #[test]
    fn sidecar_matrix() {
        let units = read_draws_sidecar("id\nu\nv\n".as_bytes(), "d1,d2\n1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!(units[1], UnitRecord::draws("v", vec![3.0, 4.0]));
        assert!(read_draws_sidecar("id\nu\nv\n".as_bytes(), "d1\n1\n".as_bytes()).is_err());
    }

    fn unit_strategy() -> impl Strategy<Value = Vec<UnitRecord>> {
        prop_oneof![
            prop::collection::vec((-1e6f64..1e6, 1e-9f64..1e6), 1..20).prop_map(|v| v
                .into_iter()
                .enumerate()
                .map(|(i, (x, s))| UnitRecord::normal(format!("u{i}"), x, s))
                .collect()),
            prop::collection::vec((0u64..1000, 0u64..1000), 1..20).prop_map(|v| v
                .into_iter()
                .enumerate()
                .map(|(i, (y, extra))| UnitRecord::binomial(format!("u{i}"), y, y + extra + 1))
                .collect()),
            prop::collection::vec(prop::collection::vec(any::<f64>().prop_filter("finite", |f| f.is_finite()), 1..8), 1..6)
                .prop_map(|v| v
                    .into_iter()
                    .enumerate()
                    .map(|(i, d)| UnitRecord::draws(format!("u{i}"), d))
                    .collect()),
        ]
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_identity(units in unit_strategy()) {
            let mut buf = Vec::new();
            write_units(&mut buf, &units).unwrap();
            let back = read_units(buf.as_slice(), Some(units[0].payload.kind())).unwrap();
            prop_assert_eq!(back, units);
        }
    }
}
