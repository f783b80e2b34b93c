//! Scaled transposed Haar operator used to correlate the Laplace noise.
//!
//! For `kappa` levels the unscaled matrix `M` is `2^kappa × 2^kappa`. Column
//! 0 is level 0 (constant); level `l ≥ 1` holds the `2^(l-1)` columns
//! `2^(l-1) + c`, each supported on the contiguous block
//! `[c·2^(kappa-l+1), (c+1)·2^(kappa-l+1))`, positive on the first half and
//! negative on the second, with magnitude `2^(l-1) / 2^kappa`. Every column has
//! unit ℓ1 norm. The operator is `Φ = (kappa + 1)·M`.

use crate::error::{mismatch, Error, Result};

/// Largest operator order the constructor accepts.
pub const MAX_ORDER: usize = 1 << 20;

/// Largest operator order for which [`verify_phi_lemma`] runs.
pub const MAX_VERIFY_ORDER: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaarOperator {
    kappa: u32,
    scale: f64,
}

/// Smallest `kappa` with `2^kappa >= m`.
fn ceil_log2(m: usize) -> u32 {
    if m <= 1 {
        0
    } else {
        usize::BITS - (m - 1).leading_zeros()
    }
}

impl HaarOperator {
    /// Operator for signals of length `m`, zero-padded to the next power of two.
    pub fn for_length(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("block length must be at least 1".into()));
        }
        if m > MAX_ORDER {
            return Err(Error::Capacity {
                what: "Haar operator order",
                requested: m as u128,
                limit: MAX_ORDER as u128,
            });
        }
        let kappa = ceil_log2(m);
        Ok(HaarOperator {
            kappa,
            scale: (kappa + 1) as f64,
        })
    }

    pub fn kappa(&self) -> u32 {
        self.kappa
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Matrix order `2^kappa`.
    pub fn order(&self) -> usize {
        1 << self.kappa
    }

    /// Computes `Φ x` level by level in `O(order)` operations.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = self.order();
        if x.len() != m {
            return Err(mismatch(format!(
                "Haar operator of order {m} applied to a vector of length {}",
                x.len()
            )));
        }
        let inv = 1.0 / m as f64;
        let mut vals = Vec::with_capacity(m);
        vals.push(x[0] * inv);
        let mut next = Vec::with_capacity(m);
        for l in 1..=self.kappa {
            let half = 1usize << (l - 1);
            let mag = half as f64 * inv;
            next.clear();
            for (c, &v) in vals.iter().enumerate() {
                let h = x[half + c] * mag;
                next.push(v + h);
                next.push(v - h);
            }
            std::mem::swap(&mut vals, &mut next);
        }
        for v in &mut vals {
            *v *= self.scale;
        }
        Ok(vals)
    }

    /// `[Φ x]_{1:len}`.
    pub fn apply_truncated(&self, x: &[f64], len: usize) -> Result<Vec<f64>> {
        let mut y = self.apply(x)?;
        y.truncate(len);
        Ok(y)
    }

    /// Level of column `j`.
    pub fn level_of(&self, j: usize) -> u32 {
        if j == 0 {
            0
        } else {
            usize::BITS - j.leading_zeros()
        }
    }

    /// Support of column `j` as `(start, midpoint, end)`; entries are positive
    /// on `start..mid` and negative on `mid..end`.
    pub fn column_support(&self, j: usize) -> (usize, usize, usize) {
        let m = self.order();
        let l = self.level_of(j);
        if l == 0 {
            return (0, m, m);
        }
        let width = m >> (l - 1);
        let c = j - (1 << (l - 1));
        let start = c * width;
        (start, start + width / 2, start + width)
    }

    /// Entries of `M` times `2^kappa` on column `j`: the nonzero magnitude.
    fn integer_magnitude(&self, j: usize) -> i64 {
        let l = self.level_of(j);
        if l == 0 {
            1
        } else {
            1i64 << (l - 1)
        }
    }
}

pub fn build_phi(m: usize) -> Result<HaarOperator> {
    HaarOperator::for_length(m)
}

/// The three quantities bounded by the Haar norm lemma.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiLemmaReport {
    /// Largest column ℓ1 norm of `Φ^{-1}`.
    pub inv_col_norm_max: f64,
    /// `max_i ‖Σ_{j≤i} Φ_j‖₁` over rows `Φ_j`.
    pub partial_row_sum_l1_max: f64,
    /// `max_i ‖Σ_{j≤i} Φ_j‖₂`.
    pub partial_row_sum_l2_max: f64,
}

/// Evaluates the lemma quantities exactly via integer arithmetic on `2^kappa·M`.
pub fn verify_phi_lemma(op: &HaarOperator) -> Result<PhiLemmaReport> {
    let m = op.order();
    if m > MAX_VERIFY_ORDER {
        return Err(Error::Capacity {
            what: "Haar lemma verification",
            requested: m as u128,
            limit: MAX_VERIFY_ORDER as u128,
        });
    }
    // Φ^{-1} = sign pattern of Mᵀ divided by (kappa + 1); a column's ℓ1 norm
    // counts how many Haar columns cover that row position.
    let mut cover = vec![0i64; m + 1];
    for j in 0..m {
        let (start, _, end) = op.column_support(j);
        cover[start] += 1;
        cover[end] -= 1;
    }
    let mut running = 0i64;
    let mut max_cover = 0i64;
    for c in cover.iter().take(m) {
        running += c;
        max_cover = max_cover.max(running);
    }
    let inv_col_norm_max = max_cover as f64 / op.scale();

    // rows of 2^kappa·M: row i has one nonzero per level
    let mut acc = vec![0i64; m];
    let mut l1: i128 = 0;
    let mut l2: i128 = 0;
    let mut best_l1: i128 = 0;
    let mut best_l2: i128 = 0;
    for i in 0..m {
        for j in covering_columns(op, i) {
            let (_, mid, _) = op.column_support(j);
            let mag = op.integer_magnitude(j);
            let entry = if i < mid { mag } else { -mag };
            let old = acc[j] as i128;
            let new = old + entry as i128;
            l1 += new.abs() - old.abs();
            l2 += new * new - old * old;
            acc[j] = new as i64;
        }
        best_l1 = best_l1.max(l1);
        best_l2 = best_l2.max(l2);
    }
    let unit = op.scale() / m as f64;
    Ok(PhiLemmaReport {
        inv_col_norm_max,
        partial_row_sum_l1_max: best_l1 as f64 * unit,
        partial_row_sum_l2_max: (best_l2 as f64).sqrt() * unit,
    })
}

/// Columns whose support contains row `i`, one per level.
fn covering_columns(op: &HaarOperator, i: usize) -> impl Iterator<Item = usize> + '_ {
    let m = op.order();
    (0..=op.kappa()).map(move |l| {
        if l == 0 {
            0
        } else {
            let width = m >> (l - 1);
            (1 << (l - 1)) + i / width
        }
    })
}
