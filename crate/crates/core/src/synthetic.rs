//! Deterministic synthetic galleries with known ground truth.
//!
//! Two generators with different guarantees:
//!
//! * [`exact_distance_gallery`] places antipodal sample pairs around a shared
//!   center on a dyadic grid (all values multiples of 1/64, centers multiples
//!   of 1/2). Sums, the mean, and every distance-to-mean then round to
//!   nothing: the gallery mean equals the center bit for bit and each
//!   sample's distance equals its requested value bit for bit. Use this when
//!   a test needs exact distances, exact band endpoints, or exact ties.
//! * [`unit_cluster_gallery`] produces unit-L2-normalized vectors whose
//!   per-person distance ranges approximate requested intervals, via a
//!   fixed-point iteration against the moving mean. Use this to shape
//!   galleries that look like the production pipeline's output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::index::{Gallery, PersonId};
use crate::vector::{l1_distance, mean_vector, normalize, FeatureVector};

/// Grid unit for exact constructions: all offsets are multiples of this.
pub const GRID: f64 = 1.0 / 64.0;

/// Per-coordinate offset headroom in grid units. Centers are at least 8.5,
/// so offsets up to 8.0 keep every entry positive.
const CAP_UNITS: u64 = 512;

/// An exactly constructed gallery: antipodal pairs around `center`.
#[derive(Debug, Clone)]
pub struct ExactGallery {
    pub gallery: Gallery,
    /// Equals the gallery mean exactly, by construction.
    pub center: FeatureVector,
    /// Requested (and achieved) per-person distance extremes, sorted as given.
    pub persons: Vec<ExactPerson>,
}

#[derive(Debug, Clone)]
pub struct ExactPerson {
    pub person: PersonId,
    pub min_distance: f64,
    pub max_distance: f64,
}

/// True when `x` lies on the 1/64 grid (and is nonnegative and finite).
pub fn on_grid(x: f64) -> bool {
    x.is_finite() && x >= 0.0 && (x / GRID).fract() == 0.0
}

/// Builds a gallery whose mean and per-sample distances are exact.
///
/// Each `(min, max)` pair describes one person's distance extremes; both must
/// lie on the 1/64 grid with `0 < min <= max <= dimension * 8`. A person with
/// `min < max` gets two antipodal pairs (four samples), one at each extreme;
/// `min == max` gets a single pair. Person ids are `s000`, `s001`, ...
pub fn exact_distance_gallery(
    specs: &[(f64, f64)],
    dimension: usize,
    seed: u64,
) -> Result<ExactGallery> {
    if specs.is_empty() {
        return Err(Error::EmptyGallery);
    }
    let budget = dimension as f64 * (CAP_UNITS as f64) * GRID;
    for &(min, max) in specs {
        if !on_grid(min) || !on_grid(max) || min <= 0.0 || min > max || max > budget {
            return Err(Error::InvariantViolation(format!(
                "distance spec ({min}, {max}) must be on the 1/64 grid with 0 < min <= max <= {budget}"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center: Vec<f64> = (0..dimension)
        .map(|_| f64::from(rng.random_range(17u32..=32)) * 0.5)
        .collect();
    let mut gallery = Gallery::new(dimension);
    let mut persons = Vec::with_capacity(specs.len());
    for (j, &(min, max)) in specs.iter().enumerate() {
        let person = PersonId::new(format!("s{j:03}"))?;
        let mut distances = vec![min];
        if max > min {
            distances.push(max);
        }
        for d in distances {
            let offset = grid_offset(&mut rng, dimension, d);
            let mut plus = Vec::with_capacity(dimension);
            let mut minus = Vec::with_capacity(dimension);
            for i in 0..dimension {
                plus.push(center[i] + offset[i]);
                minus.push(center[i] - offset[i]);
            }
            gallery.insert(person.clone(), FeatureVector::new(plus)?)?;
            gallery.insert(person.clone(), FeatureVector::new(minus)?)?;
        }
        persons.push(ExactPerson {
            person,
            min_distance: min,
            max_distance: max,
        });
    }
    Ok(ExactGallery {
        gallery,
        center: FeatureVector::new(center)?,
        persons,
    })
}

/// A probe at exactly `distance` from the gallery center (offset added on
/// the positive side only). Same grid rules as [`exact_distance_gallery`].
pub fn probe_at_distance(
    center: &FeatureVector,
    distance: f64,
    seed: u64,
) -> Result<FeatureVector> {
    let dimension = center.dimension();
    let budget = dimension as f64 * (CAP_UNITS as f64) * GRID;
    if !on_grid(distance) || distance > budget {
        return Err(Error::InvariantViolation(format!(
            "probe distance {distance} must be on the 1/64 grid, at most {budget}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = grid_offset(&mut rng, dimension, distance);
    let values = center
        .values()
        .iter()
        .zip(&offset)
        .map(|(c, o)| c + o)
        .collect();
    FeatureVector::new(values)
}

/// Splits `distance` into per-coordinate offsets on the grid: a randomized
/// spreading pass followed by a deterministic exhaustion pass. The returned
/// offsets are nonnegative multiples of [`GRID`] summing to `distance`
/// exactly, each at most `CAP_UNITS` grid units.
fn grid_offset(rng: &mut ChaCha8Rng, dimension: usize, distance: f64) -> Vec<f64> {
    let total_units = (distance / GRID).round() as u64;
    let mut alloc = vec![0u64; dimension];
    let mut remaining = total_units;
    for _ in 0..dimension {
        if remaining == 0 {
            break;
        }
        let i = rng.random_range(0..dimension);
        let head = CAP_UNITS - alloc[i];
        if head == 0 {
            continue;
        }
        let take = rng.random_range(1..=head.min(remaining));
        alloc[i] += take;
        remaining -= take;
    }
    let mut i = 0;
    while remaining > 0 {
        let take = (CAP_UNITS - alloc[i]).min(remaining);
        alloc[i] += take;
        remaining -= take;
        i += 1;
    }
    alloc.into_iter().map(|u| u as f64 * GRID).collect()
}

/// Evenly spaced `(min, max)` distance specs: person `j` spans
/// `[start + j*pitch, start + j*pitch + width]`. All arguments must be on
/// the 1/64 grid; `width < pitch` keeps the resulting bands disjoint.
pub fn evenly_spaced_specs(m: usize, start: f64, pitch: f64, width: f64) -> Vec<(f64, f64)> {
    (0..m)
        .map(|j| {
            let lo = start + j as f64 * pitch;
            (lo, lo + width)
        })
        .collect()
}

/// One person's requested cluster in a normalized gallery.
#[derive(Debug, Clone)]
pub struct ClusterSpec {
    pub person: PersonId,
    /// Requested distance-to-mean interval for this person's samples.
    pub low: f64,
    pub high: f64,
    pub samples: usize,
}

/// Builds a gallery of unit-L2-normalized vectors whose per-person
/// distances-to-mean fall inside each requested `[low, high]` and spread
/// across most of it.
///
/// Vectors start as small perturbations of one shared direction and are
/// repeatedly rescaled along their ray from the current mean toward their
/// target distance, re-normalized, and re-measured; the mean moves each
/// round until targets and measurements agree. Seeds that fail to converge
/// are retried deterministically; persistent failure (infeasible specs)
/// is an error.
pub fn unit_cluster_gallery(specs: &[ClusterSpec], dimension: usize, seed: u64) -> Result<Gallery> {
    if specs.is_empty() {
        return Err(Error::EmptyGallery);
    }
    for s in specs {
        if !(s.low.is_finite() && s.high.is_finite()) || s.low <= 0.0 || s.low > s.high {
            return Err(Error::InvariantViolation(format!(
                "cluster for {} must satisfy 0 < low <= high",
                s.person
            )));
        }
        if s.samples == 0 {
            return Err(Error::InvariantViolation(format!(
                "cluster for {} must request at least one sample",
                s.person
            )));
        }
    }
    for attempt in 0..8u64 {
        if let Some(gallery) = try_cluster_gallery(specs, dimension, seed ^ (attempt * 0x9e37)) {
            return Ok(gallery);
        }
    }
    Err(Error::InvariantViolation(
        "cluster generation did not converge; requested ranges are too tight or infeasible".into(),
    ))
}

fn try_cluster_gallery(specs: &[ClusterSpec], dimension: usize, seed: u64) -> Option<Gallery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<f64> = (0..dimension).map(|_| rng.random_range(0.3..1.0)).collect();
    let base = normalize(&FeatureVector::new(base).ok()?).ok()?;

    // (spec index, target distance, current vector)
    let mut work: Vec<(usize, f64, FeatureVector)> = Vec::new();
    for (si, s) in specs.iter().enumerate() {
        let w = s.high - s.low;
        for k in 0..s.samples {
            // Targets sweep the interior of the interval, endpoints pulled
            // in by 2% so convergence wobble stays inside [low, high].
            let frac = if s.samples == 1 {
                0.5
            } else {
                0.02 + 0.96 * (k as f64 / (s.samples - 1) as f64)
            };
            let target = s.low + frac * w;
            let perturbed: Vec<f64> = base
                .values()
                .iter()
                .map(|b| (b + rng.random_range(-0.02..0.02)).max(1e-6))
                .collect();
            let v = normalize(&FeatureVector::new(perturbed).ok()?).ok()?;
            work.push((si, target, v));
        }
    }

    let mut converged = false;
    for _ in 0..80 {
        let mean = mean_vector(work.iter().map(|(_, _, v)| v)).ok()?;
        let mean_fv = FeatureVector::new(mean.values().to_vec()).ok()?;
        let mut worst = 0.0f64;
        for (_, target, v) in work.iter_mut() {
            let d = l1_distance(&mean_fv, v).ok()?;
            worst = worst.max((d - *target).abs() / *target);
            if d <= 0.0 {
                continue;
            }
            let scale = *target / d;
            let moved: Vec<f64> = mean_fv
                .values()
                .iter()
                .zip(v.values())
                .map(|(m, x)| (m + scale * (x - m)).max(0.0))
                .collect();
            *v = normalize(&FeatureVector::new(moved).ok()?).ok()?;
        }
        if worst < 5e-4 {
            converged = true;
            break;
        }
    }
    if !converged {
        return None;
    }

    // Verify against the final mean before handing the gallery out.
    let mean = mean_vector(work.iter().map(|(_, _, v)| v)).ok()?;
    let mean_fv = FeatureVector::new(mean.values().to_vec()).ok()?;
    for (si, _, v) in &work {
        let d = l1_distance(&mean_fv, v).ok()?;
        let s = &specs[*si];
        if d < s.low || d > s.high {
            return None;
        }
    }
    let mut gallery = Gallery::new(dimension);
    for (si, _, v) in work {
        gallery.insert(specs[si].person.clone(), v).ok()?;
    }
    Some(gallery)
}

/// Grayscale quadrant-pattern images for classifier tests: class `k` of 4
/// brightens quadrant `k` and leaves the rest dim, plus uniform noise.
/// Returns row-major `size*size` images in [0, 1] and their labels.
pub fn quadrant_images(per_class: usize, size: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(per_class * 4);
    let mut labels = Vec::with_capacity(per_class * 4);
    let half = size / 2;
    for class in 0..4usize {
        for _ in 0..per_class {
            let mut img = vec![0.0f64; size * size];
            for r in 0..size {
                for c in 0..size {
                    let quadrant = usize::from(r >= half) * 2 + usize::from(c >= half);
                    let bright = quadrant == class;
                    let base: f64 = if bright { 0.8 } else { 0.1 };
                    img[r * size + c] = (base + rng.random_range(-0.08..0.08)).clamp(0.0, 1.0);
                }
            }
            images.push(img);
            labels.push(class);
        }
    }
    (images, labels)
}

/// A gallery whose samples all lie on one line through a positive base
/// point, plus the distance interval each person was asked to occupy.
#[derive(Debug, Clone)]
pub struct ColinearGallery {
    pub gallery: Gallery,
    /// Requested `[low, high]` distance-to-mean interval per person, in the
    /// order of `sample_counts`. Achieved distances lie inside these up to
    /// float dust far below the inter-band gaps.
    pub ranges: Vec<(PersonId, f64, f64)>,
}

/// Builds a gallery with arbitrary per-person sample counts (odd counts and
/// singletons included) whose per-person distances-to-mean occupy disjoint
/// random intervals.
///
/// Every sample is `base + t*direction` for one shared positive `direction`,
/// so the gallery mean is also on that line and each distance-to-mean is
/// `|t - mean(t)| * ||direction||_1`. The scalar offsets are sign-balanced to
/// sum to zero, pinning the mean at `base`: signs are assigned greedily in
/// decreasing magnitude (bounding the residual by the smallest magnitude)
/// and the residual is then absorbed by nudging offsets within their bands.
/// Needs at least two persons and three samples total: with two samples the
/// mean is the midpoint and both distances coincide, so no assignment of
/// disjoint bands exists.
pub fn colinear_banded_gallery(
    sample_counts: &[usize],
    dimension: usize,
    seed: u64,
) -> Result<ColinearGallery> {
    if sample_counts.len() < 2 {
        return Err(Error::InvariantViolation(
            "need at least two persons".into(),
        ));
    }
    if sample_counts.contains(&0) {
        return Err(Error::InvariantViolation(
            "every person needs at least one sample".into(),
        ));
    }
    let total: usize = sample_counts.iter().sum();
    if total < 3 {
        return Err(Error::InvariantViolation(
            "two samples are always equidistant from their mean; need three or more".into(),
        ));
    }
    if dimension == 0 {
        return Err(Error::InvariantViolation(
            "dimension must be positive".into(),
        ));
    }

    for attempt in 0..64u64 {
        let attempt_seed = seed ^ attempt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        if let Some(result) = try_colinear_gallery(sample_counts, dimension, attempt_seed) {
            return Ok(result);
        }
    }
    Err(Error::InvariantViolation(format!(
        "no colinear gallery found for {} persons after 64 attempts",
        sample_counts.len()
    )))
}

fn try_colinear_gallery(
    sample_counts: &[usize],
    dimension: usize,
    seed: u64,
) -> Option<ColinearGallery> {
    let m = sample_counts.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Random disjoint ladder of distance intervals. The ladder starts low:
    // zero-sum balancing needs the smallest magnitudes to fit inside the
    // slack of the others, which fails for shapes like one singleton plus
    // one pair whenever the first band's low exceeds the second band's
    // width.
    let mut bands = Vec::with_capacity(m);
    let mut pos = rng.random_range(0.04..0.08);
    for _ in 0..m {
        let width = rng.random_range(0.08..0.3);
        bands.push((pos, pos + width));
        pos += width + rng.random_range(0.05..0.2);
    }

    // Target distances: multi-sample persons pin both interval endpoints so
    // the achieved range covers the request; singletons sit at the middle,
    // away from the single-sample band widening.
    let mut magnitudes: Vec<(usize, f64)> = Vec::with_capacity(sample_counts.iter().sum());
    for (j, &k) in sample_counts.iter().enumerate() {
        let (low, high) = bands[j];
        if k == 1 {
            magnitudes.push((j, 0.5 * (low + high)));
            continue;
        }
        magnitudes.push((j, low));
        magnitudes.push((j, high));
        for _ in 2..k {
            magnitudes.push((j, rng.random_range(low..high)));
        }
    }

    // Greedy sign balancing over decreasing magnitude: the running signed
    // sum never exceeds the current magnitude, so the final residual is at
    // most the smallest magnitude.
    let mut order: Vec<usize> = (0..magnitudes.len()).collect();
    order.sort_by(|&a, &b| magnitudes[b].1.total_cmp(&magnitudes[a].1));
    let mut signed: Vec<(usize, f64, f64)> = vec![(0, 0.0, 0.0); magnitudes.len()];
    let mut running = 0.0;
    for &i in &order {
        let (person, d) = magnitudes[i];
        let sign = if running > 0.0 { -1.0 } else { 1.0 };
        running += sign * d;
        signed[i] = (person, d, sign);
    }

    // Absorb the residual by nudging magnitudes within their intervals.
    let mut needed = running;
    for (person, d, sign) in signed.iter_mut() {
        if needed.abs() < 1e-12 {
            break;
        }
        // Moving this magnitude by `take` in the right direction reduces
        // the signed sum by `take`.
        let shrink = (*sign > 0.0) == (needed > 0.0);
        let (low, high) = bands[*person];
        let room = if shrink { *d - low } else { high - *d };
        let take = needed.abs().min(room * 0.95);
        *d += if shrink { -take } else { take };
        needed -= needed.signum() * take;
    }
    if needed.abs() > 1e-12 {
        return None;
    }

    // Shared positive direction and a base far enough from the axes that
    // every sample stays nonnegative.
    let direction: Vec<f64> = (0..dimension).map(|_| rng.random_range(0.2..1.0)).collect();
    let norm: f64 = direction.iter().sum();
    let max_t = bands[m - 1].1 / norm;
    let base: Vec<f64> = direction.iter().map(|u| u * (max_t + 1.0) + 0.5).collect();

    let ids: Vec<PersonId> = (0..m)
        .map(|j| PersonId::new(format!("c{j:03}")).unwrap())
        .collect();
    let mut gallery = Gallery::new(dimension);
    for (person, d, sign) in &signed {
        let t = sign * d / norm;
        let values: Vec<f64> = base
            .iter()
            .zip(&direction)
            .map(|(c, u)| c + t * u)
            .collect();
        gallery
            .insert(ids[*person].clone(), FeatureVector::new(values).ok()?)
            .ok()?;
    }

    // Verify achieved distances: inside the requested interval (with dust
    // slack) and still separated between persons.
    let mean = mean_vector(gallery.all_samples()).ok()?;
    let mut achieved = vec![(f64::INFINITY, f64::NEG_INFINITY); m];
    for (person, samples) in gallery.iter() {
        let j = ids.iter().position(|id| id == person)?;
        for s in samples {
            let d = crate::vector::distance_to_mean(&mean, s).ok()?;
            achieved[j].0 = achieved[j].0.min(d);
            achieved[j].1 = achieved[j].1.max(d);
        }
    }
    for (j, &(lo, hi)) in achieved.iter().enumerate() {
        let (low, high) = bands[j];
        if lo < low - 1e-9 || hi > high + 1e-9 {
            return None;
        }
        if j + 1 < m && bands[j + 1].0 - hi < 0.045 {
            return None;
        }
    }

    let ranges = ids
        .into_iter()
        .zip(&bands)
        .map(|(id, &(low, high))| (id, low, high))
        .collect();
    Some(ColinearGallery { gallery, ranges })
}
