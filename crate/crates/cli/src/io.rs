use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use csph::{BivariateDataset, CsphModel, ModelFile};

/// Fixed 17-significant-digit rendering, lossless for every finite `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)
        .with_context(|| format!("cannot open {}", path.display()))?
        .read_to_string(&mut s)
        .with_context(|| format!("cannot read {}", path.display()))?;
    Ok(s)
}

pub fn read_model_file(path: &Path) -> Result<ModelFile> {
    serde_json::from_str(&read_text(path)?).with_context(|| format!("{} is not a valid model file", path.display()))
}

pub fn load_model(path: &Path) -> Result<CsphModel> {
    read_model_file(path)?
        .to_model()
        .map_err(|e| anyhow!("{}: {e}", path.display()))
}

/// Two numeric columns. A first row whose leading field is not a number is
/// taken as a header; when it names `x1`/`x2` (or `z1`/`z2`) those columns
/// are used, otherwise the first two.
pub fn read_pairs(path: &Path) -> Result<Vec<[f64; 2]>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut cols = (0, 1);
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 1;
        let rec = rec.with_context(|| format!("{}: malformed CSV at line {line}", path.display()))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if i == 0 && rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            let find = |names: &[&str]| rec.iter().position(|f| names.contains(&f.to_ascii_lowercase().as_str()));
            if let (Some(a), Some(b)) = (find(&["x1", "z1"]), find(&["x2", "z2"])) {
                cols = (a, b);
            }
            continue;
        }
        let field = |c: usize| -> Result<f64> {
            let raw = rec
                .get(c)
                .ok_or_else(|| anyhow!("{}: line {line} has fewer than {} columns", path.display(), c + 1))?;
            raw.parse::<f64>()
                .map_err(|_| anyhow!("{}: line {line}: cannot parse {raw:?} as a number", path.display()))
        };
        out.push([field(cols.0)?, field(cols.1)?]);
    }
    Ok(out)
}

pub fn read_dataset(path: &Path) -> Result<BivariateDataset> {
    let pts = read_pairs(path)?;
    if pts.is_empty() {
        bail!("{} contains no observations", path.display());
    }
    BivariateDataset::new(pts).map_err(|e| anyhow!("{}: {e}", path.display()))
}

/// Comma-separated values, or `start:stop:count` for an evenly spaced grid.
/// The empty string is the empty grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if spec.is_empty() || spec == "none" {
        return Ok(vec![]);
    }
    if let [a, b, n] = spec.split(':').collect::<Vec<_>>()[..] {
        let (a, b): (f64, f64) = (a.trim().parse()?, b.trim().parse()?);
        let n: usize = n.trim().parse()?;
        return Ok(match n {
            0 => vec![],
            1 => vec![a],
            n => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
        });
    }
    spec.split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad grid value {s:?}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("").unwrap(), Vec::<f64>::new());
        assert_eq!(parse_grid("0, 1.5,3").unwrap(), vec![0.0, 1.5, 3.0]);
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_grid("a,b").is_err());
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 12345.678901234567, 5e-300] {
            assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn header_detection_and_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "id,x2,x1\n1,2.0,3.0\n2,4.0,5.0\n").unwrap();
        assert_eq!(read_pairs(&p).unwrap(), vec![[3.0, 2.0], [5.0, 4.0]]);
        std::fs::write(&p, "1,2\n3,oops\n").unwrap();
        let err = read_pairs(&p).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }
}
