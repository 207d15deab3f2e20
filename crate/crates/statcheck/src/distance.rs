use rayon::prelude::*;
use serde::Serialize;

use crate::dtw::DtwOptions;
use crate::error::{Result, StatError};
use crate::metric::{distance, Observation};

/// Quantile with linear interpolation between order statistics at
/// position `(n - 1) * q`.
pub fn quantile(data: &[f64], q: f64) -> Result<f64> {
    let mut buf = data.to_vec();
    quantile_in_place(&mut buf, q)
}

/// Like [`quantile`] but reorders `data` instead of copying it.
pub fn quantile_in_place(data: &mut [f64], q: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(StatError::EmptyData);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(StatError::BadQuantile(q));
    }
    let pos = (data.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    let (_, &mut lo_val, upper) = data.select_nth_unstable_by(lo, f64::total_cmp);
    if frac == 0.0 || upper.is_empty() {
        return Ok(lo_val);
    }
    let hi_val = upper.iter().copied().min_by(f64::total_cmp).unwrap();
    Ok(lo_val + frac * (hi_val - lo_val))
}

/// Within-group and cross-group distance collections.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DistanceSets {
    pub within_m: Vec<f64>,
    pub within_k: Vec<f64>,
    pub cross: Vec<f64>,
}

/// All pairwise distances over the union of two groups.
///
/// Indices `0..n_m` are group M, `n_m..n_m + n_k` group K. Computing the
/// matrix once lets bootstrap replicates reuse it.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n_m: usize,
    n_k: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    pub fn compute(
        group_m: &[Observation],
        group_k: &[Observation],
        opts: DtwOptions,
    ) -> Result<Self> {
        if group_m.is_empty() {
            return Err(StatError::EmptyGroup("M"));
        }
        if group_k.is_empty() {
            return Err(StatError::EmptyGroup("K"));
        }
        let all: Vec<&Observation> = group_m.iter().chain(group_k).collect();
        for o in &all {
            o.validate()?;
        }
        let n = all.len();
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        let values: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| distance(all[i], all[j], opts))
            .collect::<Result<_>>()?;
        let mut d = vec![0.0; n * n];
        for (&(i, j), v) in pairs.iter().zip(values) {
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
        Ok(DistanceMatrix {
            n_m: group_m.len(),
            n_k: group_k.len(),
            d,
        })
    }

    pub fn n_m(&self) -> usize {
        self.n_m
    }

    pub fn n_k(&self) -> usize {
        self.n_k
    }

    fn n(&self) -> usize {
        self.n_m + self.n_k
    }

    /// Distance between union indices `i` and `j`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n() + j]
    }

    /// The first `n_m` runs of M and the first `n_k` runs of K.
    pub fn prefix(&self, n_m: usize, n_k: usize) -> Result<Self> {
        if n_m > self.n_m || n_k > self.n_k {
            return Err(StatError::InvalidArgument(format!(
                "requested {n_m}+{n_k} runs, have {}+{}",
                self.n_m, self.n_k
            )));
        }
        if n_m == 0 || n_k == 0 {
            return Err(StatError::InvalidArgument(
                "prefix must keep at least one run".into(),
            ));
        }
        let keep: Vec<usize> = (0..n_m).chain(self.n_m..self.n_m + n_k).collect();
        let n = keep.len();
        let mut d = vec![0.0; n * n];
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                d[a * n + b] = self.get(i, j);
            }
        }
        Ok(DistanceMatrix { n_m, n_k, d })
    }

    /// Distance sets for a selection of runs, given as union indices.
    /// Repeated indices are allowed (bootstrap resamples).
    pub fn sets_for(&self, idx_m: &[usize], idx_k: &[usize]) -> DistanceSets {
        let within = |idx: &[usize]| {
            let mut v = Vec::with_capacity(idx.len() * idx.len().saturating_sub(1) / 2);
            for (a, &i) in idx.iter().enumerate() {
                for &j in &idx[a + 1..] {
                    v.push(self.get(i, j));
                }
            }
            v
        };
        let mut cross = Vec::with_capacity(idx_m.len() * idx_k.len());
        for &i in idx_m {
            for &j in idx_k {
                cross.push(self.get(i, j));
            }
        }
        DistanceSets {
            within_m: within(idx_m),
            within_k: within(idx_k),
            cross,
        }
    }

    pub fn sets(&self) -> DistanceSets {
        let idx_m: Vec<usize> = (0..self.n_m).collect();
        let idx_k: Vec<usize> = (self.n_m..self.n()).collect();
        self.sets_for(&idx_m, &idx_k)
    }
}

/// Within sets over `i < j` pairs and the full cross product.
pub fn build_distances(
    group_m: &[Observation],
    group_k: &[Observation],
    opts: DtwOptions,
) -> Result<DistanceSets> {
    Ok(DistanceMatrix::compute(group_m, group_k, opts)?.sets())
}
