//! The stacked-marginal query operator and its sensitivity.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Result};
use crate::grid::{
    empirical_measure, linear_index, multi_index, Dataset, GridHistogram, GridSpec, SnakeOrder,
};

/// All discretized `s`-marginals stacked block by block, each block in snake
/// order. Blocks follow the lexicographic subset order of [`GridSpec::subsets`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalBlockVector {
    spec: GridSpec,
    data: Vec<f64>,
}

impl MarginalBlockVector {
    pub fn zeros(spec: GridSpec) -> Result<Self> {
        Ok(MarginalBlockVector {
            data: vec![0.0; spec.vector_len()?],
            spec,
        })
    }

    pub fn from_vec(spec: GridSpec, data: Vec<f64>) -> Result<Self> {
        let len = spec.vector_len()?;
        if data.len() != len {
            return Err(mismatch(format!(
                "marginal vector has length {}, expected {len}",
                data.len()
            )));
        }
        Ok(MarginalBlockVector { spec, data })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn block_len(&self) -> usize {
        self.data.len() / self.spec.num_blocks()
    }

    pub fn num_blocks(&self) -> usize {
        self.spec.num_blocks()
    }

    pub fn block(&self, j: usize) -> &[f64] {
        let b = self.block_len();
        &self.data[j * b..(j + 1) * b]
    }

    pub fn block_mut(&mut self, j: usize) -> &mut [f64] {
        let b = self.block_len();
        &mut self.data[j * b..(j + 1) * b]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.block_len())
    }

    /// Entrywise `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(MarginalBlockVector {
            spec: self.spec,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    /// Entrywise `self + other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(MarginalBlockVector {
            spec: self.spec,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn scale(&self, c: f64) -> Self {
        MarginalBlockVector {
            spec: self.spec,
            data: self.data.iter().map(|a| a * c).collect(),
        }
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self.spec != other.spec || self.data.len() != other.data.len() {
            return Err(mismatch(format!(
                "marginal vectors disagree: {:?} vs {:?}",
                self.spec, other.spec
            )));
        }
        Ok(())
    }

    /// Block `j` as an `s`-dimensional histogram.
    pub fn block_histogram(&self, j: usize, order: &SnakeOrder) -> Result<GridHistogram> {
        let mut h = GridHistogram::new(self.spec.k, self.spec.s)?;
        for (p, &w) in self.block(j).iter().enumerate() {
            if w != 0.0 {
                h.add_linear(order.cell_at(p), w);
            }
        }
        Ok(h)
    }
}

/// Precomputed map from full-dimensional cells to their entries in `T`.
#[derive(Debug, Clone)]
pub struct QueryOperator {
    spec: GridSpec,
    subsets: Vec<Vec<usize>>,
    order: SnakeOrder,
    block_len: usize,
}

impl QueryOperator {
    pub fn new(spec: GridSpec) -> Result<Self> {
        let order = SnakeOrder::new(spec.k, spec.s)?;
        spec.vector_len()?;
        Ok(QueryOperator {
            spec,
            subsets: spec.subsets(),
            block_len: order.len(),
            order,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn snake(&self) -> &SnakeOrder {
        &self.order
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    /// Global positions in the stacked vector touched by a `d`-dimensional
    /// cell, one per block.
    pub fn positions_of(&self, cell: &[usize]) -> Vec<usize> {
        let mut proj = Vec::with_capacity(self.spec.s);
        self.subsets
            .iter()
            .enumerate()
            .map(|(j, sub)| {
                proj.clear();
                proj.extend(sub.iter().map(|&a| cell[a]));
                j * self.block_len + self.order.position_of(linear_index(&proj, self.spec.k))
            })
            .collect()
    }

    pub fn positions_of_linear(&self, lin: usize) -> Vec<usize> {
        self.positions_of(&multi_index(lin, self.spec.k, self.spec.d))
    }

    /// Applies `T` to a histogram on the full `k`-grid.
    pub fn apply(&self, h: &GridHistogram) -> Result<MarginalBlockVector> {
        if h.k() != self.spec.k || h.dim() != self.spec.d {
            return Err(mismatch(format!(
                "histogram lives on a {}-dimensional grid with k={}, spec is {:?}",
                h.dim(),
                h.k(),
                self.spec
            )));
        }
        let mut out = MarginalBlockVector::zeros(self.spec)?;
        for (cell, w) in h.iter() {
            for pos in self.positions_of(&cell) {
                out.data[pos] += w;
            }
        }
        Ok(out)
    }
}

/// `T h`: block `j` holds the marginal of `h` on subset `S_j` in snake order.
pub fn apply_t(h: &GridHistogram, spec: &GridSpec) -> Result<MarginalBlockVector> {
    QueryOperator::new(*spec)?.apply(h)
}

/// `T` of the discretized empirical measure of `data`.
pub fn apply_t_dataset(data: &Dataset, spec: &GridSpec) -> Result<MarginalBlockVector> {
    apply_t(&empirical_measure(data, spec)?, spec)
}

/// Right-inverse of `T` for full-dimensional queries (`s = d`).
///
/// For `s < d` a joint measure with prescribed marginals is not unique; the
/// optimizer works with joint histograms directly, so that case is refused.
pub fn right_inverse(v: &MarginalBlockVector) -> Result<GridHistogram> {
    let spec = v.spec();
    if spec.s != spec.d {
        return Err(invalid(format!(
            "right inverse is only materialized for s = d (got s={}, d={})",
            spec.s, spec.d
        )));
    }
    let order = SnakeOrder::new(spec.k, spec.s)?;
    v.block_histogram(0, &order)
}

/// Worst-case ℓ1 sensitivity of `T` under replacement of one of `n` records.
pub fn sensitivity(spec: &GridSpec, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(invalid("dataset size n must be at least 1"));
    }
    Ok(2.0 * spec.num_blocks() as f64 / n as f64)
}

/// Largest `‖T μ_D − T μ_D'‖₁` over all single-record replacements drawn
/// from `candidates`. Exhaustive; meant for small datasets.
pub fn brute_force_sensitivity(
    data: &Dataset,
    spec: &GridSpec,
    candidates: &[Vec<f64>],
) -> Result<f64> {
    let op = QueryOperator::new(*spec)?;
    let base = op.apply(&empirical_measure(data, spec)?)?;
    let mut worst: f64 = 0.0;
    for i in 0..data.len() {
        for c in candidates {
            let mut other = data.clone();
            other.replace(i, c)?;
            let v = op.apply(&empirical_measure(&other, spec)?)?;
            let dist: f64 = base
                .as_slice()
                .iter()
                .zip(v.as_slice())
                .map(|(a, b)| (a - b).abs())
                .sum();
            worst = worst.max(dist);
        }
    }
    Ok(worst)
}
