use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Feature rows with integer class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        Ok(Dataset { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.features.cols()
    }

    pub fn class_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Rows at the given indices, in order.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        let f = self.features.cols();
        Dataset {
            features: Matrix::from_fn(idx.len(), f, |i, j| self.features.get(idx[i], j)),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn concat(parts: &[Dataset]) -> Result<Dataset> {
        let f = parts.first().map_or(0, |d| d.feature_count());
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut labels = Vec::new();
        for d in parts {
            if d.feature_count() != f {
                return Err(Error::DimensionMismatch(
                    "datasets differ in feature count".into(),
                ));
            }
            for i in 0..d.len() {
                rows.push(d.features.row(i).to_vec());
            }
            labels.extend_from_slice(&d.labels);
        }
        if rows.is_empty() {
            return Dataset::new(Matrix::zeros(0, f), labels);
        }
        Dataset::new(Matrix::from_rows(&rows)?, labels)
    }

    /// CSV with a header row; the last column is the integer label.
    pub fn load_csv(path: &Path) -> Result<Dataset> {
        let csv_err = |msg: String| Error::Csv {
            path: path.to_path_buf(),
            msg,
        };
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(file);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut labels = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_err(e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() < 2 {
                return Err(csv_err(format!(
                    "line {line}: need at least one feature and a label"
                )));
            }
            let mut row = Vec::with_capacity(rec.len() - 1);
            for f in rec.iter().take(rec.len() - 1) {
                row.push(
                    f.parse::<f64>()
                        .map_err(|_| csv_err(format!("line {line}: bad number {f:?}")))?,
                );
            }
            let lab = &rec[rec.len() - 1];
            let lab = lab
                .parse::<usize>()
                .map_err(|_| csv_err(format!("line {line}: bad label {lab:?}")))?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(csv_err(format!(
                        "line {line}: {} features, expected {}",
                        row.len(),
                        first.len()
                    )));
                }
            }
            rows.push(row);
            labels.push(lab);
        }
        if rows.is_empty() {
            return Err(csv_err("no data rows".into()));
        }
        Dataset::new(Matrix::from_rows(&rows)?, labels)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let err = |e: csv::Error| Error::Csv {
            path: path.to_path_buf(),
            msg: e.to_string(),
        };
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        let mut header: Vec<String> = (0..self.feature_count()).map(|j| format!("x{j}")).collect();
        header.push("label".into());
        w.write_record(&header).map_err(err)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self
                .features
                .row(i)
                .iter()
                .map(|x| format!("{x}"))
                .collect();
            rec.push(self.labels[i].to_string());
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Round-robin split into `n` shards.
    pub fn partition(&self, n: usize) -> Vec<Dataset> {
        (0..n)
            .map(|p| {
                let idx: Vec<usize> = (p..self.len()).step_by(n).collect();
                self.select(&idx)
            })
            .collect()
    }
}

/// Party shards and optional held-out set of a dataset directory.
#[derive(Clone, Debug)]
pub struct FederatedData {
    pub parties: Vec<Dataset>,
    pub test: Option<Dataset>,
}

pub fn party_file(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("party_{i}.csv"))
}

impl FederatedData {
    /// Reads `party_0.csv .. party_{n-1}.csv` and `test.csv` if present.
    pub fn load_dir(dir: &Path, parties: usize) -> Result<Self> {
        let shards = (0..parties)
            .map(|i| Dataset::load_csv(&party_file(dir, i)))
            .collect::<Result<Vec<_>>>()?;
        let test_path = dir.join("test.csv");
        let test = if test_path.exists() {
            Some(Dataset::load_csv(&test_path)?)
        } else {
            None
        };
        Ok(FederatedData {
            parties: shards,
            test,
        })
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, d) in self.parties.iter().enumerate() {
            d.write_csv(&party_file(dir, i))?;
        }
        if let Some(t) = &self.test {
            t.write_csv(&dir.join("test.csv"))?;
        }
        Ok(())
    }

    pub fn train_union(&self) -> Result<Dataset> {
        Dataset::concat(&self.parties)
    }
}

/// Synthetic stand-in for the 699 x 9 breast-cancer table: two classes
/// (458 / 241) of integer scores 1..=10, divided by 10.
pub fn synthetic_bcw(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(699);
    let mut labels = Vec::with_capacity(699);
    let benign = Normal::new(3.0, 2.2).expect("finite");
    let malignant = Normal::new(6.0, 2.6).expect("finite");
    for i in 0..699 {
        let class = usize::from(i >= 458);
        let dist = if class == 0 { benign } else { malignant };
        let row: Vec<f64> = (0..9)
            .map(|_| {
                let v: f64 = dist.sample(&mut rng);
                v.round().clamp(1.0, 10.0) / 10.0
            })
            .collect();
        rows.push(row);
        labels.push(class);
    }
    // shuffle so shards and the test split see both classes
    let mut order: Vec<usize> = (0..699).collect();
    order.shuffle(&mut rng);
    let rows: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
    let labels = order.iter().map(|&i| labels[i]).collect();
    Dataset::new(Matrix::from_rows(&rows).expect("rectangular"), labels).expect("aligned")
}

/// Two Gaussian blobs in 2-D separated by a wide margin along x + y.
pub fn separable_2d(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let c = if class == 0 { -0.5 } else { 0.5 };
        loop {
            let x: f64 = c + rng.random_range(-0.35..0.35);
            let y: f64 = c + rng.random_range(-0.35..0.35);
            if (x + y).abs() > 0.2 {
                rows.push(vec![x, y]);
                break;
            }
        }
        labels.push(class);
    }
    Dataset::new(Matrix::from_rows(&rows).expect("rectangular"), labels).expect("aligned")
}

/// BCW-like data split into `parties` shards and an 80/20 test holdout.
pub fn synthetic_federated(parties: usize, seed: u64) -> FederatedData {
    let all = synthetic_bcw(seed);
    let cut = all.len() * 4 / 5;
    let train = all.select(&(0..cut).collect::<Vec<_>>());
    let test = all.select(&(cut..all.len()).collect::<Vec<_>>());
    FederatedData {
        parties: train.partition(parties),
        test: Some(test),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bcw_shape_and_determinism() {
        let d = synthetic_bcw(1);
        assert_eq!((d.len(), d.feature_count()), (699, 9));
        assert_eq!(d.labels.iter().filter(|&&l| l == 1).count(), 241);
        assert_eq!(d, synthetic_bcw(1));
        assert!(d
            .features
            .as_slice()
            .iter()
            .all(|&x| (0.1..=1.0).contains(&x)));
    }

    #[test]
    fn dir_roundtrip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let fd = synthetic_federated(3, 2);
        fd.write_dir(dir.path()).unwrap();
        let back = FederatedData::load_dir(dir.path(), 3).unwrap();
        assert_eq!(back.parties, fd.parties);
        assert_eq!(back.test, fd.test);
        let err = FederatedData::load_dir(dir.path(), 4)
            .unwrap_err()
            .to_string();
        assert!(err.contains("party_3.csv"), "{err}");

        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "a,b,label\n1,2,0\n1,x,1\n").unwrap();
        let err = Dataset::load_csv(&p).unwrap_err().to_string();
        assert!(err.contains("bad.csv") && err.contains("line 3"), "{err}");
    }

    #[test]
    fn partition_is_round_robin() {
        let d = separable_2d(10, 0);
        let parts = d.partition(3);
        assert_eq!(parts.iter().map(|p| p.len()).collect::<Vec<_>>(), [4, 3, 3]);
        assert_eq!(parts[1].features.row(0), d.features.row(1));
    }
}
