//! Named parameter matrices and their checkpoint format.
//!
//! A checkpoint is a headerless CSV with one record per matrix:
//! `name,rows,cols,v0,v1,...` with values in row-major order.

use std::fs::File;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    entries: Vec<(String, Array2<f64>)>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array2<f64>) {
        let name = name.into();
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((name, value)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Array2<f64>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Array2<f64>> {
        self.entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn values(&self) -> impl Iterator<Item = &Array2<f64>> {
        self.entries.iter().map(|(_, v)| v)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut Array2<f64>> {
        self.entries.iter_mut().map(|(_, v)| v)
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|(_, v)| v.len()).sum()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .flexible(true)
            .has_headers(false)
            .from_writer(File::create(path)?);
        for (name, v) in &self.entries {
            let mut rec = vec![name.clone(), v.nrows().to_string(), v.ncols().to_string()];
            rec.extend(v.iter().map(|x| format!("{x:?}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::ReaderBuilder::new()
            .flexible(true)
            .has_headers(false)
            .from_path(path)?;
        let mut store = ParamStore::new();
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |message: String| Error::Ingest {
                path: path.to_path_buf(),
                line: k + 1,
                message,
            };
            if rec.len() < 3 {
                return Err(bad("expected name,rows,cols,values".into()));
            }
            let dims: Vec<usize> = rec
                .iter()
                .skip(1)
                .take(2)
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| bad(format!("bad dimension {s:?}")))
                })
                .collect::<Result<_>>()?;
            let values: Vec<f64> = rec
                .iter()
                .skip(3)
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| bad(format!("bad value {s:?}")))
                })
                .collect::<Result<_>>()?;
            if values.len() != dims[0] * dims[1] {
                return Err(bad(format!(
                    "{} values for a {}x{} matrix",
                    values.len(),
                    dims[0],
                    dims[1]
                )));
            }
            let m = Array2::from_shape_vec((dims[0], dims[1]), values)
                .map_err(|e| bad(e.to_string()))?;
            store.insert(rec[0].to_string(), m);
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.csv");
        let mut p = ParamStore::new();
        p.insert("a", array![[0.1, -2.5e-17], [3.0, 1.0 / 3.0]]);
        p.insert("b", array![[7.0]]);
        p.write_csv(&path).unwrap();
        let q = ParamStore::read_csv(&path).unwrap();
        assert_eq!(p, q);
        assert_eq!(q.num_scalars(), 5);
    }

    #[test]
    fn malformed_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.csv");
        std::fs::write(&path, "a,2,2,1,2,3\n").unwrap();
        assert!(matches!(
            ParamStore::read_csv(&path),
            Err(Error::Ingest { line: 1, .. })
        ));
    }
}
