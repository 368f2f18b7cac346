use std::path::Path;

use impshap::data::{
    builtin, joint_from_samples, load_csv_str, load_joint_csv_str, population_dataset, quantize_all, BUILTIN_NAMES,
};
use impshap::{Dataset, JointDistribution};

use crate::{CliError, DataArgs, InstanceArgs};

pub struct Source {
    pub name: String,
    pub dataset: Dataset,
    pub joint: Option<JointDistribution>,
}

impl Source {
    pub fn require_joint(&self) -> Result<&JointDistribution, CliError> {
        self.joint.as_ref().ok_or_else(|| {
            CliError::Usage(format!(
                "`{}` has no finite joint table (needs all-categorical columns; try --bins)",
                self.name
            ))
        })
    }
}

fn is_joint_csv(text: &str) -> bool {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .and_then(|header| header.rsplit(',').next())
        .is_some_and(|last| last.trim() == "probability")
}

pub fn load(args: &DataArgs) -> Result<Source, CliError> {
    if args.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    if let Some(b) = args.bins {
        if b < 2 {
            return Err(CliError::Usage("--bins must be at least 2".into()));
        }
    }
    let mut source = if BUILTIN_NAMES.contains(&args.data.as_str()) {
        let b = builtin(&args.data, args.n, args.seed)?;
        Source {
            name: b.name,
            dataset: b.dataset,
            joint: b.joint,
        }
    } else {
        let path = Path::new(&args.data);
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                CliError::Usage(format!(
                    "`{}` is neither a builtin ({}) nor a readable file",
                    args.data,
                    BUILTIN_NAMES.join(", ")
                ))
            } else {
                CliError::Io(format!("{}: {e}", path.display()))
            }
        })?;
        if is_joint_csv(&text) {
            let j = load_joint_csv_str(&text)?;
            Source {
                name: args.data.clone(),
                dataset: population_dataset(&j)?,
                joint: Some(j),
            }
        } else {
            Source {
                name: args.data.clone(),
                dataset: load_csv_str(&text, None)?,
                joint: None,
            }
        }
    };
    if let Some(bins) = args.bins {
        if !source.dataset.is_all_categorical() {
            source.dataset = quantize_all(&source.dataset, bins)?;
            source.joint = None;
        }
    }
    if source.joint.is_none() && source.dataset.is_all_categorical() {
        source.joint = joint_from_samples(&source.dataset).ok();
    }
    Ok(source)
}

pub fn parse_values(raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("`{s}` in --instance is not a number")))
        })
        .collect()
}

pub fn parse_codes(raw: &str, p: usize) -> Result<Vec<usize>, CliError> {
    let values = parse_values(raw)?;
    if values.len() != p {
        return Err(CliError::Usage(format!(
            "--instance needs {p} values, got {}",
            values.len()
        )));
    }
    values
        .iter()
        .map(|&v| {
            if v.fract() == 0.0 && v >= 0.0 {
                Ok(v as usize)
            } else {
                Err(CliError::Usage(format!("{v} is not a category code")))
            }
        })
        .collect()
}

/// Rows of an instance file: header first, `#` lines ignored, first `p` columns kept.
fn read_instance_file(path: &Path, p: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            header_seen = true;
            continue;
        }
        let values =
            parse_values(line).map_err(|e| CliError::Usage(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        if values.len() < p {
            return Err(CliError::Usage(format!(
                "{}:{}: expected at least {p} values",
                path.display(),
                lineno + 1
            )));
        }
        rows.push(values[..p].to_vec());
    }
    if rows.is_empty() {
        return Err(CliError::Usage(format!("{} contains no instances", path.display())));
    }
    Ok(rows)
}

/// Instances to score: a file, a single `--instance`, or every training row.
pub fn instances(args: &InstanceArgs, dataset: &Dataset) -> Result<Vec<Vec<f64>>, CliError> {
    let p = dataset.n_features();
    match (&args.instances, &args.instance) {
        (Some(_), Some(_)) => Err(CliError::Usage("use either --instances or --instance".into())),
        (Some(path), None) => read_instance_file(path, p),
        (None, Some(raw)) => {
            let v = parse_values(raw)?;
            if v.len() != p {
                return Err(CliError::Usage(format!("--instance needs {p} values, got {}", v.len())));
            }
            Ok(vec![v])
        }
        (None, None) => Ok(dataset
            .instances()
            .into_iter()
            .map(|mut r| {
                r.truncate(p);
                r
            })
            .collect()),
    }
}
