//! Quality-guided two-dimensional phase unwrapping.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::TAU;

use ndarray::Array2;

use crate::error::{Error, Result};

struct Candidate {
    quality: f64,
    at: (usize, usize),
    from: (usize, usize),
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // highest quality first; ties broken by position for determinism
    fn cmp(&self, other: &Self) -> Ordering {
        self.quality
            .total_cmp(&other.quality)
            .then_with(|| other.at.cmp(&self.at))
            .then_with(|| other.from.cmp(&self.from))
    }
}

/// Unwraps `phase` on the `mask` region.
///
/// Starting from the masked pixel of highest `quality`, pixels are visited
/// best-quality-first; each is shifted by the multiple of 2 pi closest to
/// the already unwrapped neighbour it was reached from. Pixels outside the
/// mask are returned unchanged. Masked regions not connected to the start
/// are unwrapped from their own best pixel.
pub fn unwrap_phase_2d(phase: &Array2<f64>, mask: &Array2<bool>, quality: &Array2<f64>) -> Result<Array2<f64>> {
    if phase.dim() != mask.dim() || phase.dim() != quality.dim() {
        return Err(Error::Input(
            "phase, mask and quality grids must have equal shapes".into(),
        ));
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::Input("cannot unwrap on an empty mask".into()));
    }
    let (n_r, n_c) = phase.dim();
    let mut out = phase.clone();
    let mut done = Array2::from_elem(phase.dim(), false);
    let mut heap = BinaryHeap::new();
    let push = |heap: &mut BinaryHeap<Candidate>, done: &Array2<bool>, from: (usize, usize)| {
        let (r, c) = from;
        let neighbours = [(r.wrapping_sub(1), c), (r + 1, c), (r, c.wrapping_sub(1)), (r, c + 1)];
        for at in neighbours {
            if at.0 < n_r && at.1 < n_c && mask[at] && !done[at] {
                heap.push(Candidate {
                    quality: quality[at],
                    at,
                    from,
                });
            }
        }
    };
    loop {
        // seed: best remaining masked pixel
        let seed = mask
            .indexed_iter()
            .filter(|(p, &m)| m && !done[*p])
            .max_by(|(p, _), (q, _)| quality[*p].total_cmp(&quality[*q]).then_with(|| q.cmp(p)))
            .map(|(p, _)| p);
        let Some(seed) = seed else { break };
        done[seed] = true;
        push(&mut heap, &done, seed);
        while let Some(Candidate { at, from, .. }) = heap.pop() {
            if done[at] {
                continue;
            }
            let k = ((out[from] - phase[at]) / TAU).round();
            out[at] = phase[at] + TAU * k;
            done[at] = true;
            push(&mut heap, &done, at);
        }
    }
    Ok(out)
}

/// Wraps into `(-pi, pi]`.
pub fn wrap(phase: f64) -> f64 {
    let w = phase - TAU * (phase / TAU).round();
    if w <= -std::f64::consts::PI {
        w + TAU
    } else {
        w
    }
}
