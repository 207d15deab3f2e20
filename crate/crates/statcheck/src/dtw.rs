//! Dynamic time warping with path-length normalization.

use crate::error::{Result, StatError};

/// Optimal alignment of two series: total cost and number of aligned pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    pub cost: f64,
    pub path_len: usize,
}

impl Alignment {
    pub fn normalized(&self) -> f64 {
        self.cost / self.path_len as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DtwOptions {
    /// Sakoe-Chiba half width. Widened to the length difference so a path
    /// always exists. `None` is unconstrained.
    pub band: Option<usize>,
}

pub fn check_series(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(StatError::EmptySeries);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(StatError::NonFinite);
    }
    Ok(())
}

#[derive(Clone, Copy)]
struct Cell {
    cost: f64,
    len: u32,
}

const UNREACHABLE: Cell = Cell {
    cost: f64::INFINITY,
    len: u32::MAX,
};

#[inline]
fn better(a: Cell, b: Cell) -> Cell {
    if a.cost < b.cost || (a.cost == b.cost && a.len < b.len) {
        a
    } else {
        b
    }
}

/// DTW with local cost `|x_i - y_j|` and steps (1,0), (0,1), (1,1).
///
/// Among minimum-cost warping paths the shortest one defines `path_len`.
/// The choice depends only on the set of optimal paths, so the result is
/// symmetric in its arguments.
pub fn align(x: &[f64], y: &[f64], opts: DtwOptions) -> Result<Alignment> {
    check_series(x)?;
    check_series(y)?;
    let (n, m) = (x.len(), y.len());
    let band = opts.band.map(|w| w.max(n.abs_diff(m)));
    let mut prev = vec![UNREACHABLE; m];
    let mut cur = vec![UNREACHABLE; m];
    for (i, &xi) in x.iter().enumerate() {
        let (lo, hi) = match band {
            Some(w) => (i.saturating_sub(w), (i + w).min(m - 1)),
            None => (0, m - 1),
        };
        cur.fill(UNREACHABLE);
        for j in lo..=hi {
            let local = (xi - y[j]).abs();
            let best = if i == 0 && j == 0 {
                Cell { cost: 0.0, len: 0 }
            } else {
                let mut b = UNREACHABLE;
                if i > 0 && j > 0 {
                    b = better(b, prev[j - 1]);
                }
                if i > 0 {
                    b = better(b, prev[j]);
                }
                if j > 0 {
                    b = better(b, cur[j - 1]);
                }
                b
            };
            cur[j] = Cell {
                cost: best.cost + local,
                len: best.len.saturating_add(1),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let end = prev[m - 1];
    Ok(Alignment {
        cost: end.cost,
        path_len: end.len as usize,
    })
}

/// Raw DTW cost.
pub fn dtw(x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(align(x, y, DtwOptions::default())?.cost)
}

/// DTW cost divided by the warping path length.
pub fn dtw_norm(x: &[f64], y: &[f64]) -> Result<f64> {
    dtw_norm_with(x, y, DtwOptions::default())
}

pub fn dtw_norm_with(x: &[f64], y: &[f64], opts: DtwOptions) -> Result<f64> {
    Ok(align(x, y, opts)?.normalized())
}
