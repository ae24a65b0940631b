//! Plain-text matrix records.
//!
//! ```text
//! # comment lines start with '#'
//! name: W            (optional)
//! systems: A_I:2 A_O:2
//! 1,0 0,0 0,0 0,0    (row-major `re,im` tokens, any whitespace)
//! ...
//! ```
//!
//! A file may hold several records; each begins at an optional `name:` line
//! or a `systems:` line and ends after exactly D*D entries. An operator on no
//! systems is written `systems:` followed by one entry.

use std::fmt::Write as _;
use std::path::Path;

use super::{CMat, LabeledOperator, SystemLabel, C64};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct NamedOperator {
    pub name: Option<String>,
    pub operator: LabeledOperator,
}

pub fn format_operator(op: &LabeledOperator, name: Option<&str>) -> String {
    let mut s = String::new();
    if let Some(n) = name {
        let _ = writeln!(s, "name: {}", n);
    }
    let labels: Vec<String> = op.systems().iter().map(|l| l.to_string()).collect();
    let _ = writeln!(s, "systems: {}", labels.join(" "));
    let m = op.matrix();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?},{:?}", m[(i, j)].re, m[(i, j)].im)).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

pub fn format_records(records: &[NamedOperator]) -> String {
    records
        .iter()
        .map(|r| format_operator(&r.operator, r.name.as_deref()))
        .collect::<Vec<_>>()
        .join("\n")
}

fn parse_label(tok: &str, line: usize) -> Result<SystemLabel> {
    let (name, dim) = tok
        .rsplit_once(':')
        .ok_or_else(|| Error::Parse(format!("line {}: expected label:dim, got `{}`", line, tok)))?;
    let dim: usize = dim
        .parse()
        .map_err(|_| Error::Parse(format!("line {}: bad dimension in `{}`", line, tok)))?;
    if name.is_empty() || dim == 0 {
        return Err(Error::Parse(format!("line {}: bad label `{}`", line, tok)));
    }
    Ok(SystemLabel::new(name, dim))
}

fn parse_entry(tok: &str, line: usize) -> Result<C64> {
    let (re, im) = tok
        .split_once(',')
        .ok_or_else(|| Error::Parse(format!("line {}: expected re,im, got `{}`", line, tok)))?;
    let p = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("line {}: bad number in `{}`", line, tok)))
    };
    Ok(C64::new(p(re)?, p(im)?))
}

struct Pending {
    name: Option<String>,
    systems: Vec<SystemLabel>,
    entries: Vec<C64>,
    need: usize,
}

pub fn parse_records(text: &str) -> Result<Vec<NamedOperator>> {
    let mut out = Vec::new();
    let mut name: Option<String> = None;
    let mut cur: Option<Pending> = None;
    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("name:") {
            if cur.is_some() {
                return Err(Error::Parse(format!("line {}: new record before previous one is complete", ln)));
            }
            name = Some(rest.trim().to_string());
            continue;
        }
        if let Some(rest) = line.strip_prefix("systems:") {
            if cur.is_some() {
                return Err(Error::Parse(format!("line {}: new record before previous one is complete", ln)));
            }
            let systems = rest
                .split_whitespace()
                .map(|t| parse_label(t, ln))
                .collect::<Result<Vec<_>>>()?;
            let d: usize = systems.iter().map(|s| s.dim).product();
            cur = Some(Pending {
                name: name.take(),
                systems,
                entries: Vec::with_capacity(d * d),
                need: d * d,
            });
            continue;
        }
        let p = cur
            .as_mut()
            .ok_or_else(|| Error::Parse(format!("line {}: entries before a systems: header", ln)))?;
        for tok in line.split_whitespace() {
            if p.entries.len() == p.need {
                return Err(Error::Parse(format!("line {}: too many entries", ln)));
            }
            p.entries.push(parse_entry(tok, ln)?);
        }
        if p.entries.len() == p.need {
            let p = cur.take().unwrap();
            let d = (p.need as f64).sqrt().round() as usize;
            let m = CMat::from_row_slice(d, d, &p.entries);
            out.push(NamedOperator {
                name: p.name,
                operator: LabeledOperator::new(p.systems, m)?,
            });
        }
    }
    if let Some(p) = cur {
        return Err(Error::Parse(format!("record truncated: {} of {} entries", p.entries.len(), p.need)));
    }
    if name.is_some() {
        return Err(Error::Parse("trailing name: line without a record".into()));
    }
    Ok(out)
}

pub fn parse_operator(text: &str) -> Result<LabeledOperator> {
    let mut recs = parse_records(text)?;
    match recs.len() {
        1 => Ok(recs.remove(0).operator),
        n => Err(Error::Parse(format!("expected one record, found {}", n))),
    }
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<NamedOperator>> {
    parse_records(&std::fs::read_to_string(path)?)
}

pub fn read_operator(path: impl AsRef<Path>) -> Result<LabeledOperator> {
    parse_operator(&std::fs::read_to_string(path)?)
}

pub fn write_operator(path: impl AsRef<Path>, op: &LabeledOperator, name: Option<&str>) -> Result<()> {
    std::fs::write(path, format_operator(op, name))?;
    Ok(())
}

pub fn write_records(path: impl AsRef<Path>, records: &[NamedOperator]) -> Result<()> {
    std::fs::write(path, format_records(records))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_core::maximally_entangled;
    use proptest::prelude::*;

    #[test]
    fn roundtrip_single() {
        let phi = maximally_entangled(SystemLabel::new("A", 2), SystemLabel::new("B", 2)).unwrap();
        let s = format_operator(&phi, Some("phi"));
        assert!(s.starts_with("name: phi\nsystems: A:2 B:2\n"));
        assert_eq!(parse_operator(&s).unwrap(), phi);
    }

    #[test]
    fn multiple_records_and_comments() {
        let text = "# two records\nsystems: X:1\n2,0\n\nname: y\nsystems: Y:2\n1,0 0,-1\n0,1 1,0\n";
        let recs = parse_records(text).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].name, None);
        assert_eq!(recs[1].name.as_deref(), Some("y"));
        assert_eq!(recs[1].operator.matrix()[(0, 1)], C64::new(0.0, -1.0));
    }

    #[test]
    fn parse_errors() {
        assert!(parse_records("1,0").is_err());
        assert!(parse_records("systems: X:2\n1,0 0,0 0,0").is_err());
        assert!(parse_records("systems: X:1\n1,0 2,0").is_err());
        assert!(parse_records("systems: X\n1,0").is_err());
        assert!(parse_records("systems: X:1\n1;0").is_err());
        assert!(parse_records("systems: X:1 X:1\n1,0").is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(vals in proptest::collection::vec(-1e6f64..1e6, 18)) {
            let m = CMat::from_fn(3, 3, |i, j| C64::new(vals[2 * (3 * i + j)], vals[2 * (3 * i + j) + 1]));
            let op = LabeledOperator::new(vec![SystemLabel::new("Q", 3)], m).unwrap();
            let back = parse_operator(&format_operator(&op, None)).unwrap();
            prop_assert_eq!(back, op);
        }
    }
}
