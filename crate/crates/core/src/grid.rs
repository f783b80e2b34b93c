//! Uniform grids on the unit cube under the ℓ∞ metric.
//!
//! A grid with `k` cells per axis has centers `(2i + 1) / 2k`, so every point
//! of `[0, 1]^r` lies within ℓ∞ distance `1/2k` of its cell center. Cells are
//! addressed either by a multi-index (one axis index per dimension) or by a
//! mixed-radix linear index with axis 0 as the least significant digit.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Error, Result};

/// Upper bound on the number of grid points any operation will materialize.
pub const MAX_GRID_POINTS: usize = 1 << 20;

/// Returns `k^r` if it does not exceed [`MAX_GRID_POINTS`].
pub fn checked_cells(k: usize, r: usize) -> Result<usize> {
    checked_cells_with_limit(k, r, MAX_GRID_POINTS, "grid points")
}

pub(crate) fn checked_cells_with_limit(
    k: usize,
    r: usize,
    limit: usize,
    what: &'static str,
) -> Result<usize> {
    let mut total: u128 = 1;
    for _ in 0..r {
        total = total.saturating_mul(k as u128);
    }
    if total > limit as u128 {
        return Err(Error::Capacity {
            what,
            requested: total,
            limit: limit as u128,
        });
    }
    Ok(total as usize)
}

/// Center coordinate of axis cell `i` on a grid with `k` cells per axis.
#[inline]
pub fn center(k: usize, i: usize) -> f64 {
    (2 * i + 1) as f64 / (2 * k) as f64
}

/// Binomial coefficient, exact in `u128` for the sizes used here.
pub fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// All size-`s` subsets of `{0, …, d-1}` in lexicographic order.
pub fn subsets(d: usize, s: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if s > d {
        return out;
    }
    let mut cur: Vec<usize> = (0..s).collect();
    loop {
        out.push(cur.clone());
        // advance to the next combination
        let mut i = s;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < d - s + i {
                cur[i] += 1;
                for j in i + 1..s {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Ambient dimension `d`, marginal sparsity `s` and cells per axis `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub s: usize,
    pub k: usize,
}

impl GridSpec {
    pub fn new(d: usize, s: usize, k: usize) -> Result<Self> {
        if d == 0 {
            return Err(invalid("dimension d must be at least 1"));
        }
        if s == 0 || s > d {
            return Err(invalid(format!("sparsity s must satisfy 1 <= s <= d, got s={s}, d={d}")));
        }
        if k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        let spec = GridSpec { d, s, k };
        spec.block_len()?;
        Ok(spec)
    }

    /// Number of marginal blocks, `C(d, s)`.
    pub fn num_blocks(&self) -> usize {
        binomial(self.d, self.s) as usize
    }

    /// Length of one marginal block, `k^s`.
    pub fn block_len(&self) -> Result<usize> {
        checked_cells(self.k, self.s)
    }

    /// Total length of the stacked marginal vector.
    pub fn vector_len(&self) -> Result<usize> {
        let total = self.block_len()? as u128 * self.num_blocks() as u128;
        if total > MAX_GRID_POINTS as u128 * 64 {
            return Err(Error::Capacity {
                what: "marginal vector",
                requested: total,
                limit: MAX_GRID_POINTS as u128 * 64,
            });
        }
        Ok(total as usize)
    }

    pub fn subsets(&self) -> Vec<Vec<usize>> {
        subsets(self.d, self.s)
    }

    /// Largest discretization error of the grid, `1/2k`.
    pub fn discretization_error(&self) -> f64 {
        1.0 / (2 * self.k) as f64
    }
}

/// A nonempty collection of points in `[0, 1]^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    coords: Vec<f64>,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points
            .first()
            .map(|p| p.len())
            .ok_or_else(|| Error::Domain("dataset must contain at least one point".into()))?;
        if dim == 0 {
            return Err(Error::Domain("points must have at least one coordinate".into()));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (row, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(mismatch(format!(
                    "point {row} has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            for (col, &x) in p.iter().enumerate() {
                check_unit(x).map_err(|_| {
                    Error::Domain(format!("point {row}, coordinate {col} = {x} is outside [0, 1]"))
                })?;
            }
            coords.extend_from_slice(p);
        }
        Ok(Dataset { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.points().map(|p| p.to_vec()).collect()
    }

    /// Replaces point `i`, keeping the dataset valid.
    pub fn replace(&mut self, i: usize, point: &[f64]) -> Result<()> {
        if point.len() != self.dim {
            return Err(mismatch("replacement point has the wrong dimension"));
        }
        for &x in point {
            check_unit(x)?;
        }
        self.coords[i * self.dim..(i + 1) * self.dim].copy_from_slice(point);
        Ok(())
    }

    /// Moves every point to the center of its grid cell.
    pub fn snap_to_grid(&self, k: usize) -> Dataset {
        let coords = self
            .coords
            .iter()
            .map(|&x| center(k, axis_index(x, k)))
            .collect();
        Dataset {
            dim: self.dim,
            coords,
        }
    }
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("coordinate {x} is outside [0, 1]")))
    }
}

#[inline]
fn axis_index(x: f64, k: usize) -> usize {
    ((x * k as f64).floor() as usize).min(k - 1)
}

/// Cell index of a single coordinate; `1.0` clamps into the last cell.
pub fn discretize_coord(x: f64, k: usize) -> Result<usize> {
    check_unit(x)?;
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    Ok(axis_index(x, k))
}

/// Multi-index of the cell containing `x`.
pub fn discretize_point(x: &[f64], k: usize) -> Result<Vec<usize>> {
    x.iter().map(|&c| discretize_coord(c, k)).collect()
}

/// Linear index of a multi-index, axis 0 least significant.
pub fn linear_index(index: &[usize], k: usize) -> usize {
    index.iter().rev().fold(0, |acc, &i| acc * k + i)
}

/// Inverse of [`linear_index`].
pub fn multi_index(mut lin: usize, k: usize, r: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(r);
    for _ in 0..r {
        out.push(lin % k);
        lin /= k;
    }
    out
}

/// Boustrophedon traversal of `{0, …, k-1}^s`.
///
/// Axis 0 moves fastest; its direction flips with the parity of the sum of
/// the remaining indices, which are themselves traversed in snake order.
/// Consecutive cells differ by exactly one in exactly one axis.
#[derive(Debug, Clone)]
pub struct SnakeOrder {
    k: usize,
    s: usize,
    /// position -> linear cell index
    forward: Vec<usize>,
    /// linear cell index -> position
    inverse: Vec<usize>,
}

impl SnakeOrder {
    pub fn new(k: usize, s: usize) -> Result<Self> {
        if k == 0 || s == 0 {
            return Err(invalid("snake order needs k >= 1 and s >= 1"));
        }
        let len = checked_cells(k, s)?;
        let mut forward = Vec::with_capacity(len);
        let mut idx = vec![0usize; s];
        for p in 0..len {
            snake_multi_index(p, k, &mut idx);
            forward.push(linear_index(&idx, k));
        }
        let mut inverse = vec![0usize; len];
        for (p, &lin) in forward.iter().enumerate() {
            inverse[lin] = p;
        }
        Ok(SnakeOrder {
            k,
            s,
            forward,
            inverse,
        })
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dims(&self) -> usize {
        self.s
    }

    /// Linear cell index at path position `p`.
    pub fn cell_at(&self, p: usize) -> usize {
        self.forward[p]
    }

    /// Multi-index at path position `p`.
    pub fn index_at(&self, p: usize) -> Vec<usize> {
        multi_index(self.forward[p], self.k, self.s)
    }

    /// Path position of a linear cell index.
    pub fn position_of(&self, lin: usize) -> usize {
        self.inverse[lin]
    }

    pub fn position_of_index(&self, index: &[usize]) -> usize {
        self.inverse[linear_index(index, self.k)]
    }
}

fn snake_multi_index(p: usize, k: usize, out: &mut [usize]) {
    if out.len() == 1 {
        out[0] = p;
        return;
    }
    let (first, rest) = out.split_at_mut(1);
    snake_multi_index(p / k, k, rest);
    let r = p % k;
    let parity: usize = rest.iter().sum::<usize>() % 2;
    first[0] = if parity == 0 { r } else { k - 1 - r };
}

/// All `k^r` centers of the grid in snake order.
pub fn grid_centers(k: usize, r: usize) -> Result<Vec<Vec<f64>>> {
    let order = SnakeOrder::new(k, r)?;
    Ok((0..order.len())
        .map(|p| order.index_at(p).into_iter().map(|i| center(k, i)).collect())
        .collect())
}

/// A signed measure supported on the centers of a grid in `[0, 1]^dim`.
///
/// Weights are keyed by linear cell index, so iteration order is
/// deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHistogram {
    k: usize,
    dim: usize,
    weights: BTreeMap<usize, f64>,
}

impl GridHistogram {
    pub fn new(k: usize, dim: usize) -> Result<Self> {
        if k == 0 || dim == 0 {
            return Err(invalid("histogram needs k >= 1 and dim >= 1"));
        }
        let mut total: u128 = 1;
        for _ in 0..dim {
            total = total.saturating_mul(k as u128);
        }
        if total > usize::MAX as u128 {
            return Err(Error::Capacity {
                what: "histogram index space",
                requested: total,
                limit: usize::MAX as u128,
            });
        }
        Ok(GridHistogram {
            k,
            dim,
            weights: BTreeMap::new(),
        })
    }

    pub fn point_mass(k: usize, index: &[usize]) -> Result<Self> {
        let mut h = GridHistogram::new(k, index.len())?;
        h.add(index, 1.0)?;
        Ok(h)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn add(&mut self, index: &[usize], w: f64) -> Result<()> {
        if index.len() != self.dim || index.iter().any(|&i| i >= self.k) {
            return Err(mismatch(format!(
                "cell {index:?} is not on a {}-dimensional grid with k={}",
                self.dim, self.k
            )));
        }
        self.add_linear(linear_index(index, self.k), w);
        Ok(())
    }

    pub(crate) fn add_linear(&mut self, lin: usize, w: f64) {
        *self.weights.entry(lin).or_insert(0.0) += w;
    }

    pub fn weight(&self, index: &[usize]) -> f64 {
        if index.len() != self.dim || index.iter().any(|&i| i >= self.k) {
            return 0.0;
        }
        self.weights
            .get(&linear_index(index, self.k))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn weight_linear(&self, lin: usize) -> f64 {
        self.weights.get(&lin).copied().unwrap_or(0.0)
    }

    /// `(linear index, weight)` pairs in increasing index order.
    pub fn iter_linear(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights.iter().map(|(&i, &w)| (i, w))
    }

    /// `(multi-index, weight)` pairs in increasing linear index order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.weights
            .iter()
            .map(move |(&i, &w)| (multi_index(i, self.k, self.dim), w))
    }

    pub fn support_len(&self) -> usize {
        self.weights.values().filter(|w| **w != 0.0).count()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.values().sum()
    }

    pub fn center_of(&self, index: &[usize]) -> Vec<f64> {
        index.iter().map(|&i| center(self.k, i)).collect()
    }

    /// Checks nonnegativity and unit mass within `1e-12`.
    pub fn validate_probability(&self) -> Result<()> {
        if let Some((i, w)) = self.weights.iter().find(|(_, w)| **w < 0.0 || !w.is_finite()) {
            return Err(Error::Domain(format!(
                "cell {:?} has weight {w}; a probability measure needs nonnegative weights",
                multi_index(*i, self.k, self.dim)
            )));
        }
        let mass = self.total_mass();
        if (mass - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("total mass {mass} differs from 1")));
        }
        Ok(())
    }

    pub fn is_probability(&self) -> bool {
        self.validate_probability().is_ok()
    }

    /// Drops exact zeros so that equality compares supports.
    pub fn prune_zeros(&mut self) {
        self.weights.retain(|_, w| *w != 0.0);
    }

    /// Dense weights in snake order.
    pub fn to_snake_vec(&self, order: &SnakeOrder) -> Result<Vec<f64>> {
        if order.k() != self.k || order.dims() != self.dim {
            return Err(mismatch("snake order does not match histogram grid"));
        }
        let mut out = vec![0.0; order.len()];
        for (&lin, &w) in &self.weights {
            out[order.position_of(lin)] += w;
        }
        Ok(out)
    }
}

/// Empirical measure of a dataset, discretized onto the `k`-grid of `spec`.
pub fn empirical_measure(data: &Dataset, spec: &GridSpec) -> Result<GridHistogram> {
    if data.dim() != spec.d {
        return Err(mismatch(format!(
            "dataset has dimension {}, spec expects {}",
            data.dim(),
            spec.d
        )));
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut idx = vec![0usize; spec.d];
    for p in data.points() {
        for (slot, &x) in idx.iter_mut().zip(p) {
            *slot = axis_index(x, spec.k);
        }
        *counts.entry(linear_index(&idx, spec.k)).or_insert(0) += 1;
    }
    let n = data.len() as f64;
    let mut h = GridHistogram::new(spec.k, spec.d)?;
    for (lin, c) in counts {
        h.add_linear(lin, c as f64 / n);
    }
    Ok(h)
}

/// Pushes a histogram forward onto the coordinates in `subset`.
pub fn marginal_project(h: &GridHistogram, subset: &[usize]) -> Result<GridHistogram> {
    validate_subset(subset, h.dim())?;
    let mut out = GridHistogram::new(h.k(), subset.len())?;
    for (idx, w) in h.iter() {
        let proj: Vec<usize> = subset.iter().map(|&a| idx[a]).collect();
        out.add_linear(linear_index(&proj, h.k()), w);
    }
    Ok(out)
}

pub(crate) fn validate_subset(subset: &[usize], dim: usize) -> Result<()> {
    if subset.is_empty() {
        return Err(invalid("subset must be nonempty"));
    }
    if subset.windows(2).any(|w| w[0] >= w[1]) || subset.iter().any(|&a| a >= dim) {
        return Err(invalid(format!(
            "subset {subset:?} must be strictly increasing coordinates below {dim}"
        )));
    }
    Ok(())
}

/// Number of distinct occupied cells of the `k`-grid.
pub fn support_count(data: &Dataset, k: usize) -> Result<usize> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let cells: HashSet<Vec<usize>> = data
        .points()
        .map(|p| p.iter().map(|&x| axis_index(x, k)).collect())
        .collect();
    Ok(cells.len())
}
