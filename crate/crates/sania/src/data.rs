//! Dataset resolution and LibSVM file IO.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use sania_core::datasets::{generate_synthetic, to_libsvm, LibsvmParser};
use sania_core::{DatasetError, LabelEncoding, SparseDataset};

/// Directory searched for named datasets.
pub const DATA_DIR_ENV: &str = "SANIA_DATA_DIR";
pub const DEFAULT_DATA_DIR: &str = "data";
pub const SYNTHETIC_DEFAULT_SHAPE: (usize, usize) = (1000, 1000);

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("dataset `{name}` not found (looked for {path})")]
    Missing { name: String, path: PathBuf },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: DatasetError },
    #[error("invalid synthetic spec `{0}` (expected synthetic[:N:D])")]
    SyntheticSpec(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Where a dataset comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic { n: usize, d: usize, seed: u64 },
    File(PathBuf),
}

pub fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR))
}

/// `synthetic`, `synthetic:N:D`, an existing path, or a file name inside
/// the data directory.
pub fn resolve(name: &str, data_seed: u64) -> Result<DatasetSource, DataError> {
    if let Some(rest) = name.strip_prefix("synthetic") {
        let (n, d) = match rest {
            "" => SYNTHETIC_DEFAULT_SHAPE,
            r => {
                let mut parts = r.strip_prefix(':').unwrap_or("x").split(':');
                let mut next = || parts.next().and_then(|p| p.parse::<usize>().ok());
                match (next(), next(), next()) {
                    (Some(n), Some(d), None) if n > 0 && d > 0 => (n, d),
                    _ => return Err(DataError::SyntheticSpec(name.to_string())),
                }
            }
        };
        return Ok(DatasetSource::Synthetic { n, d, seed: data_seed });
    }
    let direct = Path::new(name);
    if direct.is_file() {
        return Ok(DatasetSource::File(direct.to_path_buf()));
    }
    let path = data_dir().join(name);
    if path.is_file() {
        Ok(DatasetSource::File(path))
    } else {
        Err(DataError::Missing { name: name.to_string(), path })
    }
}

pub fn load(source: &DatasetSource, enc: LabelEncoding) -> Result<SparseDataset, DataError> {
    match source {
        DatasetSource::Synthetic { n, d, seed } => Ok(generate_synthetic(*n, *d, *seed)?.relabel(enc)?),
        DatasetSource::File(path) => read_libsvm(path, enc),
    }
}

pub fn read_libsvm(path: &Path, enc: LabelEncoding) -> Result<SparseDataset, DataError> {
    let io = |source| DataError::Io { path: path.to_path_buf(), source };
    let parse = |source| DataError::Parse { path: path.to_path_buf(), source };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut parser = LibsvmParser::new();
    for line in reader.lines() {
        parser.push_line(&line.map_err(io)?).map_err(parse)?;
    }
    parser.finish(enc).map_err(parse)
}

pub fn write_libsvm(path: &Path, ds: &SparseDataset) -> Result<(), DataError> {
    let io = |source| DataError::Io { path: path.to_path_buf(), source };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    out.write_all(to_libsvm(ds).as_bytes()).map_err(io)?;
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_specs() {
        assert_eq!(
            resolve("synthetic", 3).unwrap(),
            DatasetSource::Synthetic { n: 1000, d: 1000, seed: 3 }
        );
        assert_eq!(
            resolve("synthetic:50:10", 0).unwrap(),
            DatasetSource::Synthetic { n: 50, d: 10, seed: 0 }
        );
        for bad in ["synthetic:50", "synthetic:0:3", "synthetic:1:2:3", "synthetic50:10"] {
            assert!(matches!(resolve(bad, 0), Err(DataError::SyntheticSpec(_))), "{bad}");
        }
    }
}
