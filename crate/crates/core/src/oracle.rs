//! Independent reference implementations used to cross-check the fast paths.
//!
//! Everything here recomputes results from first principles: classification
//! by scanning every band instead of binary-searching, disjointness by
//! comparing all pairs, gradients by central finite differences. None of it
//! shares code with the structures under test beyond the public band
//! accessors, so agreement is evidence rather than tautology.

use crate::index::{Band, BandedIndex, Neighbor, Outcome, PersonId};

/// Classifies a distance by examining every band, in any order, with no
/// sortedness assumption. Mirrors the documented decision surface: inside a
/// band wins outright; otherwise the nearest band below and the nearest band
/// above compete, and gaps within `tie_tolerance` of each other tie.
pub fn linear_scan_classify(bands: &[Band], d: f64, tie_tolerance: f64) -> Outcome {
    if bands.is_empty() {
        return Outcome::EmptyIndex;
    }
    let mut below: Option<&Band> = None;
    let mut above: Option<&Band> = None;
    for band in bands {
        if band.low() <= d && d <= band.high() {
            return Outcome::InBand(band.person().clone());
        }
        if band.high() < d {
            let better = match below {
                Some(b) => band.high() > b.high(),
                None => true,
            };
            if better {
                below = Some(band);
            }
        } else {
            let better = match above {
                Some(b) => band.low() < b.low(),
                None => true,
            };
            if better {
                above = Some(band);
            }
        }
    }
    match (below, above) {
        (Some(l), Some(r)) => {
            let left_gap = d - l.high();
            let right_gap = r.low() - d;
            if (left_gap - right_gap).abs() <= tie_tolerance {
                let (a, b) = if l.person() <= r.person() {
                    (l.person().clone(), r.person().clone())
                } else {
                    (r.person().clone(), l.person().clone())
                };
                Outcome::AmbiguousTie(a, b)
            } else if left_gap < right_gap {
                Outcome::NearestBand {
                    person: l.person().clone(),
                    gap: left_gap,
                }
            } else {
                Outcome::NearestBand {
                    person: r.person().clone(),
                    gap: right_gap,
                }
            }
        }
        (Some(l), None) => Outcome::NearestBand {
            person: l.person().clone(),
            gap: d - l.high(),
        },
        (None, Some(r)) => Outcome::NearestBand {
            person: r.person().clone(),
            gap: r.low() - d,
        },
        (None, None) => unreachable!("every band is below, above, or contains d"),
    }
}

/// Full ranking by interval distance via selection over all bands, with the
/// same tie-fronting rule as the indexed implementation.
pub fn linear_scan_identify(
    bands: &[Band],
    d: f64,
    max_neighbors: usize,
    tie_tolerance: f64,
) -> Vec<Neighbor> {
    let mut remaining: Vec<(f64, PersonId)> = bands
        .iter()
        .map(|b| {
            let gap = if d < b.low() {
                b.low() - d
            } else if d > b.high() {
                d - b.high()
            } else {
                0.0
            };
            (gap, b.person().clone())
        })
        .collect();
    let mut ranked = Vec::with_capacity(remaining.len());
    if let Outcome::AmbiguousTie(first, second) = linear_scan_classify(bands, d, tie_tolerance) {
        for id in [first, second] {
            let pos = remaining
                .iter()
                .position(|(_, p)| *p == id)
                .expect("tied person has a band");
            ranked.push(remaining.remove(pos));
        }
    }
    // Repeated minimum selection instead of a sort.
    while !remaining.is_empty() {
        let mut best = 0;
        for i in 1..remaining.len() {
            let (gi, pi) = &remaining[i];
            let (gb, pb) = &remaining[best];
            if gi < gb || (gi == gb && pi < pb) {
                best = i;
            }
        }
        ranked.push(remaining.remove(best));
    }
    ranked.truncate(max_neighbors);
    ranked
        .into_iter()
        .map(|(gap, person)| Neighbor {
            person,
            interval_distance: gap,
        })
        .collect()
}

/// All-pairs overlap check. Returns the indices (into `bands`) of every
/// overlapping pair; empty means pairwise disjoint.
pub fn verify_disjoint(bands: &[Band]) -> Vec<(usize, usize)> {
    let mut overlaps = Vec::new();
    for i in 0..bands.len() {
        for j in (i + 1)..bands.len() {
            if bands[i].low() <= bands[j].high() && bands[j].low() <= bands[i].high() {
                overlaps.push((i, j));
            }
        }
    }
    overlaps
}

/// Central-difference gradient of `f` at `point`.
pub fn finite_difference_gradient<F>(mut f: F, point: &[f64], epsilon: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut grad = Vec::with_capacity(point.len());
    let mut probe = point.to_vec();
    for i in 0..point.len() {
        probe[i] = point[i] + epsilon;
        let plus = f(&probe);
        probe[i] = point[i] - epsilon;
        let minus = f(&probe);
        probe[i] = point[i];
        grad.push((plus - minus) / (2.0 * epsilon));
    }
    grad
}

/// Relative error between an analytic and a numeric value, floored so that
/// near-zero pairs compare absolutely.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-5)
}

/// Largest componentwise [`relative_error`] between two gradients.
pub fn max_gradient_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient lengths differ");
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// Outcome of replaying probes through both the indexed and the scanning
/// classifier, plus the all-pairs disjointness check.
#[derive(Debug, Clone)]
pub struct AgreementReport {
    pub probes: usize,
    /// Distances at which the two classifiers disagreed.
    pub disagreements: Vec<f64>,
    /// Overlapping band index pairs found by the all-pairs check.
    pub overlaps: Vec<(usize, usize)>,
}

impl AgreementReport {
    pub fn passed(&self) -> bool {
        self.disagreements.is_empty() && self.overlaps.is_empty()
    }
}

/// Replays every distance through [`BandedIndex::classify_distance`] and
/// [`linear_scan_classify`] and cross-checks band disjointness.
pub fn verify_index(index: &BandedIndex, distances: &[f64]) -> AgreementReport {
    let mut disagreements = Vec::new();
    for &d in distances {
        let fast = index.classify_distance(d).outcome;
        let slow = linear_scan_classify(index.bands(), d, index.tie_tolerance());
        if !outcomes_agree(&fast, &slow) {
            disagreements.push(d);
        }
    }
    AgreementReport {
        probes: distances.len(),
        disagreements,
        overlaps: verify_disjoint(index.bands()),
    }
}

/// Equality on outcomes with exact persons and exact gaps. Both sides compute
/// the gap as one subtraction from the same inputs, so even the floating
/// point must match bit for bit.
fn outcomes_agree(a: &Outcome, b: &Outcome) -> bool {
    a == b
}
