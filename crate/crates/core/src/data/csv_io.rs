//! CSV dialect: comma separated, header row first, then an optional
//! `#kind:` row declaring each column as `cat`, `cat:<arity>`, `num` or `weight`.
//! Other lines starting with `#` are comments.

use std::io::Write;
use std::path::Path;

use super::{Column, ColumnKind, Dataset, MAX_ARITY};
use crate::error::{Error, Result};
use crate::info::JointDistribution;

const KIND_PREFIX: &str = "#kind:";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KindDecl {
    Categorical(Option<usize>),
    Numeric,
    Weight,
}

impl KindDecl {
    fn parse(s: &str, column: usize) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse {
            row: 2,
            column,
            message: format!("unknown column kind `{s}`"),
        };
        Ok(match s {
            "num" | "numeric" => KindDecl::Numeric,
            "weight" => KindDecl::Weight,
            "cat" | "categorical" => KindDecl::Categorical(None),
            other => {
                let arity = other
                    .strip_prefix("cat:")
                    .or_else(|| other.strip_prefix("categorical:"))
                    .ok_or_else(bad)?;
                KindDecl::Categorical(Some(arity.parse().map_err(|_| bad())?))
            }
        })
    }
}

struct RawTable {
    header: Vec<String>,
    kinds: Option<Vec<KindDecl>>,
    /// (file line number, fields)
    rows: Vec<(usize, Vec<String>)>,
}

fn read_table(text: &str) -> Result<RawTable> {
    let mut header: Option<Vec<String>> = None;
    let mut kinds = None;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix(KIND_PREFIX) {
            if header.is_none() || kinds.is_some() || !rows.is_empty() {
                return Err(Error::Parse {
                    row: lineno,
                    column: 0,
                    message: "`#kind:` row must directly follow the header".into(),
                });
            }
            kinds = Some(
                split_fields(rest, lineno)?
                    .iter()
                    .enumerate()
                    .map(|(c, s)| KindDecl::parse(s, c + 1))
                    .collect::<Result<Vec<_>>>()?,
            );
            continue;
        }
        if trimmed.starts_with('#') {
            continue;
        }
        let fields = split_fields(line, lineno)?;
        if header.is_none() {
            header = Some(fields.into_iter().map(|f| f.trim().to_string()).collect());
        } else {
            rows.push((lineno, fields));
        }
    }
    let header = header.ok_or_else(|| Error::Parse {
        row: 1,
        column: 0,
        message: "missing header row".into(),
    })?;
    if let Some(k) = &kinds {
        if k.len() != header.len() {
            return Err(Error::Parse {
                row: 2,
                column: 0,
                message: format!("{} kinds for {} columns", k.len(), header.len()),
            });
        }
    }
    for (lineno, fields) in &rows {
        if fields.len() != header.len() {
            return Err(Error::Parse {
                row: *lineno,
                column: fields.len().min(header.len()) + 1,
                message: format!("expected {} fields, found {}", header.len(), fields.len()),
            });
        }
    }
    Ok(RawTable { header, kinds, rows })
}

fn split_fields(line: &str, lineno: usize) -> Result<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(line.as_bytes());
    match reader.records().next() {
        Some(Ok(rec)) => Ok(rec.iter().map(|s| s.to_string()).collect()),
        Some(Err(e)) => Err(Error::Parse {
            row: lineno,
            column: 0,
            message: e.to_string(),
        }),
        None => Ok(Vec::new()),
    }
}

fn parse_number(s: &str, row: usize, column: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse {
        row,
        column,
        message: format!("`{s}` is not a number"),
    })
}

/// Parses a dataset; `schema` overrides any `#kind:` row.
pub fn load_csv_str(text: &str, schema: Option<&[KindDecl]>) -> Result<Dataset> {
    let table = read_table(text)?;
    let ncol = table.header.len();
    let mut values = vec![Vec::with_capacity(table.rows.len()); ncol];
    for (lineno, fields) in &table.rows {
        for (c, f) in fields.iter().enumerate() {
            values[c].push(parse_number(f, *lineno, c + 1)?);
        }
    }
    let kinds: Vec<KindDecl> = match schema.map(<[KindDecl]>::to_vec).or(table.kinds) {
        Some(k) => {
            if k.len() != ncol {
                return Err(Error::ShapeMismatch(format!("{} kinds for {ncol} columns", k.len())));
            }
            k
        }
        None => values.iter().map(|v| infer_kind(v)).collect(),
    };
    let mut columns = Vec::new();
    let mut weights = None;
    for (c, (kind, vals)) in kinds.iter().zip(values).enumerate() {
        let name = table.header[c].clone();
        match *kind {
            KindDecl::Weight => {
                if weights.is_some() {
                    return Err(Error::Parse {
                        row: 2,
                        column: c + 1,
                        message: "more than one weight column".into(),
                    });
                }
                weights = Some(vals);
            }
            KindDecl::Numeric => columns.push(Column::numeric(name, vals)),
            KindDecl::Categorical(declared) => {
                if let Some((i, v)) = vals.iter().enumerate().find(|(_, v)| !(v.fract() == 0.0 && **v >= 0.0)) {
                    return Err(Error::Parse {
                        row: table.rows[i].0,
                        column: c + 1,
                        message: format!("`{v}` is not a category code"),
                    });
                }
                let observed = vals.iter().fold(0.0f64, |m, v| m.max(*v)) as usize + 1;
                let arity = declared.unwrap_or(observed);
                if arity > MAX_ARITY || observed > MAX_ARITY {
                    return Err(Error::ArityOverflow(name));
                }
                if observed > arity {
                    let i = vals.iter().position(|&v| v as usize >= arity).unwrap_or(0);
                    return Err(Error::Parse {
                        row: table.rows[i].0,
                        column: c + 1,
                        message: format!("code {} exceeds declared arity {arity}", vals[i]),
                    });
                }
                columns.push(Column {
                    name,
                    kind: ColumnKind::Categorical { arity },
                    values: vals,
                    bin_edges: None,
                });
            }
        }
    }
    Dataset::new(columns, weights)
}

fn infer_kind(values: &[f64]) -> KindDecl {
    let integral = values.iter().all(|v| v.fract() == 0.0 && *v >= 0.0);
    let max = values.iter().fold(0.0f64, |m, v| m.max(*v));
    if integral && (max as usize) < MAX_ARITY {
        KindDecl::Categorical(None)
    } else {
        KindDecl::Numeric
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: Option<&[KindDecl]>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    load_csv_str(&text, schema)
}

/// Writes the dataset in the dialect accepted by [`load_csv`]; `comments` are
/// emitted first as `# ` lines.
pub fn write_csv<W: Write>(dataset: &Dataset, comments: &[String], out: W) -> Result<()> {
    let mut out = out;
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = dataset.columns().iter().map(|c| c.name.clone()).collect();
    let mut kinds: Vec<String> = dataset
        .columns()
        .iter()
        .map(|c| match c.kind {
            ColumnKind::Categorical { arity } => format!("cat:{arity}"),
            ColumnKind::Numeric => "num".into(),
        })
        .collect();
    if dataset.weights().is_some() {
        header.push("weight".into());
        kinds.push("weight".into());
    }
    w.write_record(&header)?;
    kinds[0] = format!("{KIND_PREFIX}{}", kinds[0]);
    w.write_record(&kinds)?;
    for i in 0..dataset.n_rows() {
        let mut rec: Vec<String> = dataset
            .columns()
            .iter()
            .map(|c| format_value(c.values[i], c.is_categorical()))
            .collect();
        if let Some(ws) = dataset.weights() {
            rec.push(format!("{}", ws[i]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn format_value(v: f64, categorical: bool) -> String {
    if categorical {
        format!("{}", v as u64)
    } else {
        format!("{v}")
    }
}

/// Joint table: one column per variable (inputs then output) plus a final
/// `probability` column. Arities come from `cat:<n>` kinds or the largest code.
pub fn load_joint_csv_str(text: &str) -> Result<JointDistribution> {
    let table = read_table(text)?;
    let ncol = table.header.len();
    if ncol < 3 {
        return Err(Error::Parse {
            row: 1,
            column: 0,
            message: "joint CSV needs inputs, an output and a probability column".into(),
        });
    }
    let nvar = ncol - 1;
    let mut arities = vec![0usize; nvar];
    if let Some(kinds) = &table.kinds {
        for (c, k) in kinds[..nvar].iter().enumerate() {
            if let KindDecl::Categorical(Some(a)) = k {
                arities[c] = *a;
            }
        }
    }
    let mut cells = Vec::with_capacity(table.rows.len());
    for (lineno, fields) in &table.rows {
        let mut config = Vec::with_capacity(nvar);
        for (c, f) in fields[..nvar].iter().enumerate() {
            let v = parse_number(f, *lineno, c + 1)?;
            if !(v.fract() == 0.0 && v >= 0.0) {
                return Err(Error::Parse {
                    row: *lineno,
                    column: c + 1,
                    message: format!("`{f}` is not a category code"),
                });
            }
            config.push(v as usize);
        }
        let q = parse_number(&fields[nvar], *lineno, ncol)?;
        cells.push((config, q));
    }
    let declared = arities.clone();
    for (config, _) in &cells {
        for (c, &v) in config.iter().enumerate() {
            if declared[c] > 0 && v >= declared[c] {
                return Err(Error::Parse {
                    row: 0,
                    column: c + 1,
                    message: format!("code {v} exceeds declared arity {}", declared[c]),
                });
            }
            arities[c] = arities[c].max(v + 1);
        }
    }
    if arities.iter().any(|&a| a > MAX_ARITY) {
        return Err(Error::ArityOverflow("joint".into()));
    }
    let size = arities
        .iter()
        .try_fold(1usize, |acc, &a| {
            acc.checked_mul(a.max(1)).filter(|&c| c <= crate::info::MAX_CELLS)
        })
        .ok_or_else(|| Error::InvalidJoint("table too large".into()))?;
    let mut probs = vec![0.0; size];
    for (config, q) in cells {
        let idx = config.iter().zip(&arities).fold(0, |acc, (&v, &a)| acc * a + v);
        probs[idx] += q;
    }
    let names = table.header[..nvar].to_vec();
    JointDistribution::new(arities, probs)?.with_names(names)
}

pub fn load_joint_csv(path: impl AsRef<Path>) -> Result<JointDistribution> {
    let text = std::fs::read_to_string(path)?;
    load_joint_csv_str(&text)
}

/// Writes every positive-probability cell of `j`.
pub fn write_joint_csv<W: Write>(j: &JointDistribution, comments: &[String], out: W) -> Result<()> {
    let mut out = out;
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = j.names().to_vec();
    header.push("probability".into());
    w.write_record(&header)?;
    let mut kinds: Vec<String> = j.arities().iter().map(|a| format!("cat:{a}")).collect();
    kinds.push("num".into());
    kinds[0] = format!("{KIND_PREFIX}{}", kinds[0]);
    w.write_record(&kinds)?;
    let mut config = vec![0; j.arities().len()];
    for (idx, &q) in j.probs().iter().enumerate() {
        if q > 0.0 {
            j.decode(idx, &mut config);
            let mut rec: Vec<String> = config.iter().map(|v| v.to_string()).collect();
            rec.push(format!("{q}"));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::builtin::{led_population, table1_y1};

    #[test]
    fn infers_categorical_columns() {
        let d = load_csv_str("a,b,y\n0,1,0\n1,2,1\n0,0,1\n", None).unwrap();
        assert_eq!(d.n_rows(), 3);
        assert_eq!(d.feature(0).arity(), Some(2));
        assert_eq!(d.feature(1).arity(), Some(3));
        assert_eq!(d.output().arity(), Some(2));
    }

    #[test]
    fn kind_row_and_weights() {
        let text = "# generated\nx,v,y,w\n#kind:cat:3,num,cat,weight\n0,0.5,1,2\n2,1.5,0,1\n";
        let d = load_csv_str(text, None).unwrap();
        assert_eq!(d.n_features(), 2);
        assert_eq!(d.feature(0).arity(), Some(3));
        assert!(!d.feature(1).is_categorical());
        assert_eq!(d.weights(), Some(&[2.0, 1.0][..]));
    }

    #[test]
    fn parse_error_reports_position() {
        let err = load_csv_str("a,y\n0,1\n0,x\n", None).unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                row: 3,
                column: 2,
                message: "`x` is not a number".into()
            }
        );
        assert!(matches!(
            load_csv_str("a,y\n0,1\n0\n", None),
            Err(Error::Parse { row: 3, .. })
        ));
    }

    #[test]
    fn arity_overflow() {
        let text = "a,y\n#kind:cat:65,cat\n0,1\n";
        assert!(matches!(load_csv_str(text, None), Err(Error::ArityOverflow(_))));
    }

    #[test]
    fn dataset_roundtrip() {
        let d = led_population();
        let mut buf = Vec::new();
        write_csv(&d, &["seed=0".into()], &mut buf).unwrap();
        let back = load_csv_str(std::str::from_utf8(&buf).unwrap(), None).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn joint_roundtrip() {
        let j = table1_y1();
        let mut buf = Vec::new();
        write_joint_csv(&j, &[], &mut buf).unwrap();
        let back = load_joint_csv_str(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.arities(), j.arities());
        for (a, b) in back.probs().iter().zip(j.probs()) {
            assert_eq!(a, b);
        }
    }
}
