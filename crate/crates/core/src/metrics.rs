//! OSPA distance with an exact minimum-cost assignment, decomposed into
//! localization and cardinality terms.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{self, Matrix};
use crate::simulator::GroundTruthFrame;
use crate::{FilterError, Result};

/// Minimum-cost perfect matching on a square cost matrix via the
/// shortest-augmenting-path formulation (O(n³)).
///
/// Returns `assignment[row] = col`. Ties resolve toward the
/// lowest-index-lexicographic assignment. Entries must be finite and
/// nonnegative.
pub fn hungarian(cost: &Matrix) -> Result<Vec<usize>> {
    let n = cost.rows();
    if cost.cols() != n {
        return Err(FilterError::NotSquare { rows: n, cols: cost.cols() });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    debug_assert!(cost.data().iter().all(|v| v.is_finite() && *v >= 0.0));

    // Dual potentials and matching over 1-based columns; column 0 is virtual.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched_row = vec![0usize; n + 1]; // row (1-based) matched to each column
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        matched_row[0] = row;
        let mut j0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if reduced < min_slack[j] {
                    min_slack[j] = reduced;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        // Augment along the alternating path back to the virtual column.
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[matched_row[j] - 1] = j - 1;
    }
    Ok(assignment)
}

/// OSPA between two point sets, split into its localization and cardinality
/// terms. For `p = 1` the terms add up to the total exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct OspaResult {
    pub total: f64,
    pub loc: f64,
    pub card: f64,
    /// Optimal pairs as `(x index, y index)` in caller argument order; every
    /// point of the smaller set appears once, including cutoff-priced pairs.
    pub matched_pairs: Vec<(usize, usize)>,
}

impl OspaResult {
    fn zero() -> Self {
        OspaResult { total: 0.0, loc: 0.0, card: 0.0, matched_pairs: Vec::new() }
    }
}

/// Standard OSPA of order `p` with cutoff `c`. Distances are truncated at the
/// cutoff before the assignment, so the matching optimizes the truncated
/// cost. Two empty sets are distance zero by convention.
// Negated comparisons so NaN parameters are rejected too.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn ospa(x: &[Vec<f64>], y: &[Vec<f64>], p: f64, c: f64) -> Result<OspaResult> {
    if !(p >= 1.0) {
        return Err(FilterError::InvalidConfig("ospa_p must be >= 1"));
    }
    if !(c > 0.0) {
        return Err(FilterError::InvalidConfig("ospa_c must be > 0"));
    }
    if x.is_empty() && y.is_empty() {
        return Ok(OspaResult::zero());
    }
    if let Some(d) = x.first().or_else(|| y.first()).map(Vec::len) {
        for pt in x.iter().chain(y) {
            if pt.len() != d {
                return Err(FilterError::DimensionMismatch { expected: d, got: pt.len() });
            }
        }
    }

    // Work with small = the smaller set so unmatched points live in `big`.
    let swapped = x.len() > y.len();
    let (small, big) = if swapped { (y, x) } else { (x, y) };
    let (m, n) = (small.len(), big.len());

    let cutoff_p = math::powf(c, p);
    let mut loc_sum = 0.0;
    let mut pairs = Vec::with_capacity(m);
    if m > 0 {
        // Pad to n×n with cutoff-cost rows so unmatched points of the larger
        // set price in at exactly c^p.
        let cost = Matrix::from_fn(n, n, |r, col| {
            if r < m {
                let d = math::l2_distance(&small[r], &big[col]);
                math::powf(if d < c { d } else { c }, p)
            } else {
                cutoff_p
            }
        });
        let assignment = hungarian(&cost)?;
        for (i, &j) in assignment.iter().enumerate().take(m) {
            loc_sum += cost[(i, j)];
            pairs.push(if swapped { (j, i) } else { (i, j) });
        }
    }

    let card_sum = cutoff_p * (n - m) as f64;
    let denom = n as f64;
    let (loc, card, total) = if p == 1.0 {
        let loc = loc_sum / denom;
        let card = card_sum / denom;
        (loc, card, loc + card)
    } else {
        (
            math::powf(loc_sum / denom, 1.0 / p),
            math::powf(card_sum / denom, 1.0 / p),
            math::powf((loc_sum + card_sum) / denom, 1.0 / p),
        )
    };
    Ok(OspaResult { total: total.min(c), loc, card, matched_pairs: pairs })
}

/// Per-frame OSPA results and their arithmetic means.
#[derive(Clone, Debug, PartialEq)]
pub struct OspaSeries {
    pub per_frame: Vec<OspaResult>,
    pub avg_total: f64,
    pub avg_loc: f64,
    pub avg_card: f64,
}

/// Evaluates an estimate sequence against ground truth, frame by frame.
pub fn ospa_series(
    truth: &[GroundTruthFrame],
    estimates: &[Vec<Vec<f64>>],
    p: f64,
    c: f64,
) -> Result<OspaSeries> {
    if truth.len() != estimates.len() {
        return Err(FilterError::LengthMismatch { left: truth.len(), right: estimates.len() });
    }
    let mut per_frame = Vec::with_capacity(truth.len());
    for (gt, est) in truth.iter().zip(estimates) {
        let positions: Vec<Vec<f64>> = gt.truths.iter().map(|(_, pos)| pos.clone()).collect();
        per_frame.push(ospa(&positions, est, p, c)?);
    }
    let count = per_frame.len().max(1) as f64;
    let avg = |f: fn(&OspaResult) -> f64| per_frame.iter().map(f).sum::<f64>() / count;
    Ok(OspaSeries {
        avg_total: avg(|r| r.total),
        avg_loc: avg(|r| r.loc),
        avg_card: avg(|r| r.card),
        per_frame,
    })
}
