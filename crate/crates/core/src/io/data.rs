use std::io::Read;
use std::path::Path;

use nalgebra::DVector;

use crate::datasets;
use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;
use crate::model::{Dataset, GroupObservation};

#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    /// Per-unit covariance shipped with some builtins.
    pub sigma: Option<SpdMatrix>,
}

/// A builtin name, or a path to a CSV file.
pub fn load_dataset(source: &str) -> Result<LoadedDataset> {
    if datasets::BUILTIN_NAMES.contains(&source) {
        let b = datasets::builtin(source)?;
        return Ok(LoadedDataset {
            dataset: b.dataset,
            sigma: b.sigma,
        });
    }
    let path = Path::new(source);
    if !path.exists() {
        return Err(Error::Config(format!(
            "dataset {source:?} is neither a builtin ({}) nor an existing file",
            datasets::BUILTIN_NAMES.join(", ")
        )));
    }
    let label = path.file_stem().and_then(|s| s.to_str()).unwrap_or(source).to_string();
    let file = std::fs::File::open(path)?;
    Ok(LoadedDataset {
        dataset: parse_dataset_csv(file, &label)?,
        sigma: None,
    })
}

struct Layout {
    y: Vec<usize>,
    v: Vec<usize>,
    x: Vec<usize>,
}

fn indexed_columns(headers: &csv::StringRecord, prefix: char) -> Vec<(String, usize)> {
    headers
        .iter()
        .enumerate()
        .filter(|(_, h)| {
            let h = h.trim();
            h.starts_with(prefix) && h.len() > 1 && h[1..].chars().all(|c| c.is_ascii_digit())
        })
        .map(|(i, h)| (h.trim().to_string(), i))
        .collect()
}

fn layout(headers: &csv::StringRecord) -> Result<Layout> {
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    let find = |n: &str| names.iter().position(|h| *h == n);
    if names.first() != Some(&"group") {
        return Err(Error::Parse {
            line: 1,
            message: "first column must be `group`".into(),
        });
    }
    if let (Some(y), Some(v)) = (find("y"), find("V")) {
        return Ok(Layout {
            y: vec![y],
            v: vec![v],
            x: vec![],
        });
    }
    let ys = indexed_columns(headers, 'y');
    let p = ys.len();
    let column = |name: String| {
        find(&name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column `{name}`"),
        })
    };
    if p == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "expected columns group,y,V or group,y1..yp,v11..vpp,x1..xm".into(),
        });
    }
    let y = (1..=p).map(|l| column(format!("y{l}"))).collect::<Result<Vec<_>>>()?;
    let v = (1..=p)
        .flat_map(|r| (1..=p).map(move |c| format!("v{r}{c}")))
        .map(column)
        .collect::<Result<Vec<_>>>()?;
    let m = indexed_columns(headers, 'x').len();
    if m == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "multivariate layout needs covariate columns x1..xm".into(),
        });
    }
    let x = (1..=m).map(|i| column(format!("x{i}"))).collect::<Result<Vec<_>>>()?;
    Ok(Layout { y, v, x })
}

/// Parses `group,y,V` (univariate, intercept only) or
/// `group,y1..yp,v11..vpp,x1..xm` with `V_j` given row-major.
pub fn parse_dataset_csv<R: Read>(reader: R, label: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let layout = layout(&headers)?;
    let p = layout.y.len();
    let mut groups = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map(|pos| pos.line() as usize).unwrap_or(row + 2);
        let num = |i: usize| -> Result<f64> {
            let field = record.get(i).unwrap_or("");
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!("column `{}`: cannot read {field:?} as a number", &headers[i]),
                })
        };
        let y = layout.y.iter().map(|&i| num(i)).collect::<Result<Vec<_>>>()?;
        let v = layout.v.iter().map(|&i| num(i)).collect::<Result<Vec<_>>>()?;
        let x = if layout.x.is_empty() {
            vec![1.0]
        } else {
            layout.x.iter().map(|&i| num(i)).collect::<Result<Vec<_>>>()?
        };
        let group = row + 1;
        let invalid = |e: Error| Error::InvalidGroup {
            group,
            message: format!("line {line}: {e}"),
        };
        let v = SpdMatrix::from_row_slice(p, &v).map_err(invalid)?;
        let obs = GroupObservation::new(DVector::from_vec(y), v, DVector::from_vec(x)).map_err(invalid)?;
        groups.push(obs);
    }
    Dataset::new(label, groups)
}
