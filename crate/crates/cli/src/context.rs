use std::path::Path;

use clipgeom_core::{decode_emb, pair, EmbeddingSet, Error, PairedEmbeddings};

use crate::error::{CliError, CliResult};
use crate::output::{sha256_hex, InputRecord};

/// Tracks every input file read by a command, with its hash.
#[derive(Default)]
pub struct Context {
    pub inputs: Vec<InputRecord>,
}

impl Context {
    pub fn read(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|e| CliError::from(Error::Io {
            path: path.to_path_buf(),
            source: e,
        }))?;
        self.inputs.push(InputRecord {
            path: path.to_path_buf(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    pub fn load(&mut self, path: &Path) -> CliResult<EmbeddingSet> {
        let bytes = self.read(path)?;
        decode_emb(&bytes).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    pub fn load_pair(&mut self, images: &Path, texts: &Path) -> CliResult<PairedEmbeddings> {
        let i = self.load(images)?;
        let t = self.load(texts)?;
        Ok(pair(i, t)?)
    }
}

/// `lo:hi:step` with both ends included, or a comma list, or one value.
/// Grid points are rounded to 1e-12 so that `−1:1:0.05` hits 0 exactly.
pub fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::usage(format!("bad grid {spec:?}: expected lo:hi:step, a comma list or a number"));
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [lo, hi, step] => {
            let (lo, hi, step): (f64, f64, f64) = (
                lo.trim().parse().map_err(|_| bad())?,
                hi.trim().parse().map_err(|_| bad())?,
                step.trim().parse().map_err(|_| bad())?,
            );
            if !(step > 0.0 && lo.is_finite() && hi.is_finite() && hi >= lo) {
                return Err(bad());
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            if n > 1_000_000 {
                return Err(CliError::usage(format!("grid {spec:?} has too many points")));
            }
            (0..=n).map(|k| lo + k as f64 * step).collect::<Vec<f64>>()
        }
        [_] => spec
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<CliResult<Vec<f64>>>()?,
        _ => return Err(bad()),
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(values.into_iter().map(|v| (v * 1e12).round() / 1e12).collect())
}

pub fn parse_indices(spec: &str) -> CliResult<Vec<usize>> {
    spec.split(',')
        .map(|v| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| CliError::usage(format!("bad feature index {v:?}")))
        })
        .collect()
}

/// Leading coordinates padded with zeros to `dim`.
pub fn parse_center(spec: Option<&str>, dim: usize) -> CliResult<Vec<f64>> {
    let mut out = vec![0.0; dim];
    if let Some(spec) = spec.filter(|s| !s.trim().is_empty()) {
        let head: Vec<f64> = spec
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| CliError::usage(format!("bad center coordinate {v:?}")))
            })
            .collect::<CliResult<_>>()?;
        if head.len() > dim {
            return Err(CliError::usage(format!(
                "center has {} coordinates but dim is {dim}",
                head.len()
            )));
        }
        out[..head.len()].copy_from_slice(&head);
    }
    Ok(out)
}

pub fn resolve(set: &EmbeddingSet, key: &str, path: &Path) -> CliResult<usize> {
    set.resolve_row(key)
        .ok_or_else(|| CliError::usage(format!("no row {key:?} in {}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        let g = parse_grid("-1:1:0.05").unwrap();
        assert_eq!(g.len(), 41);
        assert_eq!(g[0], -1.0);
        assert_eq!(g[20], 0.0);
        assert_eq!(g[40], 1.0);
        assert_eq!(parse_grid("0:1:0.3").unwrap(), vec![0.0, 0.3, 0.6, 0.9]);
        assert_eq!(parse_grid("0.5").unwrap(), vec![0.5]);
        assert_eq!(parse_grid("0,0.25,1").unwrap(), vec![0.0, 0.25, 1.0]);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("a:b").is_err());
    }

    #[test]
    fn centers_and_indices() {
        assert_eq!(parse_center(Some("10,5,5"), 4).unwrap(), vec![10.0, 5.0, 5.0, 0.0]);
        assert_eq!(parse_center(None, 2).unwrap(), vec![0.0, 0.0]);
        assert!(parse_center(Some("1,2,3"), 2).is_err());
        assert_eq!(parse_indices("93, 134").unwrap(), vec![93, 134]);
        assert!(parse_indices("x").is_err());
    }
}
