//! Permutation maps on row-major h x h vectors and their diagonal masks.
//!
//! A linear map U on length-h^2 vectors is stored as its nonzero generalized
//! diagonals: `U.m = sum_k u_k (.) R(m, k)` with `R(m, k)[t] = m[(t + k) mod h^2]`.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PermKind {
    Identity,
    SigmaMu,
    TauZeta,
    ColShift(usize),
    RowShift(usize),
    Transpose,
    /// Built from an arbitrary index map; never cached.
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PermutationSpec {
    pub kind: PermKind,
    pub dim_h: usize,
    /// Diagonal offset (matrix-index units) to a 0/1 mask of length h^2.
    pub diagonals: BTreeMap<i64, Vec<f64>>,
}

impl PermutationSpec {
    pub fn nonzero_diagonals(&self) -> usize {
        self.diagonals
            .values()
            .filter(|m| m.iter().any(|&x| x != 0.0))
            .count()
    }

    pub fn mask(&self, offset: i64) -> Option<&[f64]> {
        self.diagonals.get(&offset).map(Vec::as_slice)
    }

    /// Spec of the map whose output position t reads input position `src(t)`.
    pub fn from_index_map(h: usize, src: impl Fn(usize) -> usize) -> Self {
        let n = (h * h) as i64;
        let mut diagonals: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
        for t in 0..h * h {
            let k = (src(t) as i64 - t as i64).rem_euclid(n);
            diagonals.entry(k).or_insert_with(|| vec![0.0; h * h])[t] = 1.0;
        }
        PermutationSpec {
            kind: PermKind::Custom,
            dim_h: h,
            diagonals,
        }
    }

    /// Masked-rotation evaluation on a plain length-h^2 vector.
    pub fn apply_plain<T>(&self, v: &[T]) -> Vec<T>
    where
        T: Clone + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        let n = self.dim_h * self.dim_h;
        assert_eq!(v.len(), n, "vector length must be h^2");
        let mut out = vec![T::default(); n];
        for (&k, mask) in &self.diagonals {
            for t in 0..n {
                if mask[t] != 0.0 {
                    let src = (t as i64 + k).rem_euclid(n as i64) as usize;
                    out[t] = out[t].clone() + v[src].clone() * mask[t];
                }
            }
        }
        out
    }

    /// Dense h^2 x h^2 matrix form (row = output index).
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim_h * self.dim_h;
        let mut m = vec![vec![0.0; n]; n];
        for (&k, mask) in &self.diagonals {
            for t in 0..n {
                if mask[t] != 0.0 {
                    m[t][(t as i64 + k).rem_euclid(n as i64) as usize] = mask[t];
                }
            }
        }
        m
    }
}

/// Closed-form diagonal masks for the named permutations.
pub fn build_permutation(kind: PermKind, h: usize) -> Result<PermutationSpec> {
    if h < 2 {
        return Err(Error::InvalidParams(format!(
            "matrix dimension must be >= 2, got {h}"
        )));
    }
    let n = h * h;
    let hi = h as i64;
    let mut diagonals = BTreeMap::new();
    let mut put = |k: i64, f: &dyn Fn(usize) -> bool| {
        let mask: Vec<f64> = (0..n).map(|t| if f(t) { 1.0 } else { 0.0 }).collect();
        diagonals.insert(k, mask);
    };
    match kind {
        PermKind::Identity => put(0, &|_| true),
        PermKind::SigmaMu => {
            for k in -(hi - 1)..hi {
                if k >= 0 {
                    put(k, &|t| {
                        let d = t as i64 - hi * k;
                        0 <= d && d < hi - k
                    });
                } else {
                    put(k, &|t| {
                        let d = t as i64 - (hi + k) * hi;
                        -k <= d && d < hi
                    });
                }
            }
        }
        PermKind::TauZeta => {
            for k in 0..h {
                put(hi * k as i64, &|t| t % h == k);
            }
        }
        PermKind::ColShift(k) => {
            if k == 0 || k >= h {
                return Err(Error::InvalidParams(format!(
                    "column shift {k} outside [1, {h})"
                )));
            }
            put(k as i64, &|t| t % h < h - k);
            put(k as i64 - hi, &|t| t % h >= h - k);
        }
        PermKind::RowShift(k) => {
            if k == 0 || k >= h {
                return Err(Error::InvalidParams(format!(
                    "row shift {k} outside [1, {h})"
                )));
            }
            put(hi * k as i64, &|_| true);
        }
        PermKind::Transpose => {
            for i in -(hi - 1)..hi {
                if i >= 0 {
                    put((hi - 1) * i, &|t| {
                        let d = t as i64 - i;
                        d >= 0 && d % (hi + 1) == 0 && d / (hi + 1) < hi - i
                    });
                } else {
                    put((hi - 1) * i, &|t| {
                        let d = t as i64 + hi * i;
                        d >= 0 && d % (hi + 1) == 0 && d / (hi + 1) < hi + i
                    });
                }
            }
        }
        PermKind::Custom => {
            return Err(Error::InvalidParams(
                "custom permutations are built with from_index_map".into(),
            ))
        }
    }
    Ok(PermutationSpec {
        kind,
        dim_h: h,
        diagonals,
    })
}

/// Index map (output t reads input src) of each named permutation.
pub fn index_map(kind: PermKind, h: usize) -> Option<Box<dyn Fn(usize) -> usize>> {
    Some(match kind {
        PermKind::Identity => Box::new(|t| t),
        PermKind::SigmaMu => Box::new(move |t| {
            let (i, j) = (t / h, t % h);
            h * i + (i + j) % h
        }),
        PermKind::TauZeta => Box::new(move |t| {
            let (i, j) = (t / h, t % h);
            h * ((i + j) % h) + j
        }),
        PermKind::ColShift(k) => Box::new(move |t| {
            let (i, j) = (t / h, t % h);
            h * i + (j + k) % h
        }),
        PermKind::RowShift(k) => Box::new(move |t| {
            let (i, j) = (t / h, t % h);
            h * ((i + k) % h) + j
        }),
        PermKind::Transpose => Box::new(move |t| {
            let (i, j) = (t / h, t % h);
            h * j + i
        }),
        PermKind::Custom => return None,
    })
}

type Cache = Mutex<HashMap<(PermKind, usize), Arc<PermutationSpec>>>;

/// Shared read-only spec for (kind, h), built once.
pub fn cached(kind: PermKind, h: usize) -> Result<Arc<PermutationSpec>> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(s) = cache.lock().expect("cache poisoned").get(&(kind, h)) {
        return Ok(s.clone());
    }
    let spec = Arc::new(build_permutation(kind, h)?);
    cache
        .lock()
        .expect("cache poisoned")
        .insert((kind, h), spec.clone());
    Ok(spec)
}
