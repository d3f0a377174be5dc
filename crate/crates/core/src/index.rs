//! Distance-band index over a gallery of feature vectors.
//!
//! The gallery mean is the single reference point. Every enrolled person owns
//! one closed interval of distances-to-mean (their band); bands are pairwise
//! disjoint and kept sorted, so membership queries run as a binary search over
//! interval endpoints instead of a scan over stored vectors. A probe is
//! answered entirely from the scalar `d(mean, probe)`: inside a band it
//! identifies the owner, outside all bands the nearest interval is reported,
//! and an exact tie between two intervals is surfaced to the caller rather
//! than silently resolved.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::vector::{distance_to_mean, mean_vector, FeatureVector, MeanVector};

/// Default relative widening applied to each band beyond the observed
/// min/max sample distance.
pub const DEFAULT_MARGIN: f64 = 0.05;

/// Absolute half-width given to a band whose samples all sit at one distance
/// (single-sample persons in particular), where relative widening degenerates.
pub const SINGLE_SAMPLE_HALF_WIDTH: f64 = 0.02;

/// Opaque, non-empty person identifier, unique within a gallery.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PersonId(String);

impl PersonId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::InvariantViolation(
                "person id must be non-empty".into(),
            ));
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PersonId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Closed interval `[low, high]` of distances-to-mean owned by one person.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    person: PersonId,
    low: f64,
    high: f64,
}

impl Band {
    pub fn new(person: PersonId, low: f64, high: f64) -> Result<Self> {
        if !(low.is_finite() && high.is_finite()) || low < 0.0 || low > high {
            return Err(Error::InvariantViolation(format!(
                "band for {person} must satisfy 0 <= low <= high, got [{low}, {high}]"
            )));
        }
        Ok(Self { person, low, high })
    }

    pub fn person(&self) -> &PersonId {
        &self.person
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    pub fn contains(&self, d: f64) -> bool {
        self.low <= d && d <= self.high
    }

    /// Distance from `d` to the nearest point of the interval; 0 when inside.
    pub fn gap_to(&self, d: f64) -> f64 {
        if d < self.low {
            self.low - d
        } else if d > self.high {
            d - self.high
        } else {
            0.0
        }
    }

    fn overlaps(&self, other: &Band) -> bool {
        self.low <= other.high && other.low <= self.high
    }
}

/// Labeled enrollment vectors, grouped per person. The source of truth every
/// index is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Gallery {
    dimension: usize,
    members: BTreeMap<PersonId, Vec<FeatureVector>>,
}

impl Gallery {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            members: BTreeMap::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Adds one sample for a person, creating the person on first insert.
    pub fn insert(&mut self, person: PersonId, vector: FeatureVector) -> Result<()> {
        vector.expect_dimension(self.dimension)?;
        self.members.entry(person).or_default().push(vector);
        Ok(())
    }

    pub fn contains(&self, person: &PersonId) -> bool {
        self.members.contains_key(person)
    }

    pub fn persons(&self) -> impl Iterator<Item = &PersonId> {
        self.members.keys()
    }

    pub fn person_count(&self) -> usize {
        self.members.len()
    }

    pub fn samples(&self, person: &PersonId) -> Option<&[FeatureVector]> {
        self.members.get(person).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PersonId, &[FeatureVector])> {
        self.members.iter().map(|(p, v)| (p, v.as_slice()))
    }

    /// Every sample of every person, in person order.
    pub fn all_samples(&self) -> impl Iterator<Item = &FeatureVector> {
        self.members.values().flatten()
    }

    pub fn sample_count(&self) -> usize {
        self.members.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// How enrollment treats the gallery mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanPolicy {
    /// Keep the existing mean and bands; only insert the new band.
    Frozen,
    /// Recompute the mean over the grown gallery and rebuild every band.
    Recompute,
}

/// Outcome of classifying one probe.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    /// The distance fell inside this person's band.
    InBand(PersonId),
    /// Outside all bands; this band's endpoint was strictly nearest.
    NearestBand { person: PersonId, gap: f64 },
    /// Exactly two bands are equidistant; surfaced, never auto-resolved.
    /// Persons are ordered by id.
    AmbiguousTie(PersonId, PersonId),
    /// The index holds no bands.
    EmptyIndex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationResult {
    pub outcome: Outcome,
    pub distance_to_mean: f64,
}

/// One entry of an identification ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub person: PersonId,
    /// Distance from the probe's distance-to-mean to the nearest point of
    /// this person's band; 0 when the probe lies inside it.
    pub interval_distance: f64,
}

/// Authentication decision for a claimed identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accept,
    Reject,
}

/// The searchable structure: one mean vector plus sorted, disjoint bands.
///
/// Immutable; every mutation constructs a new index and bumps `version`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedIndex {
    mean: MeanVector,
    bands: Vec<Band>,
    dimension: usize,
    version: u64,
    margin: f64,
    tie_tolerance: f64,
}

impl BandedIndex {
    /// Builds an index from a gallery with the given relative band margin and
    /// a zero tie tolerance.
    pub fn build(gallery: &Gallery, margin: f64) -> Result<Self> {
        Self::build_with(gallery, margin, 0.0)
    }

    /// As [`BandedIndex::build`], with an explicit tie tolerance: probes whose
    /// two nearest-band gaps differ by at most this much classify as ties.
    pub fn build_with(gallery: &Gallery, margin: f64, tie_tolerance: f64) -> Result<Self> {
        Self::build_versioned(gallery, margin, tie_tolerance, 1)
    }

    fn build_versioned(
        gallery: &Gallery,
        margin: f64,
        tie_tolerance: f64,
        version: u64,
    ) -> Result<Self> {
        check_params(margin, tie_tolerance)?;
        if gallery.is_empty() {
            return Err(Error::EmptyGallery);
        }
        let mean = mean_vector(gallery.all_samples())?;
        let mut bands = Vec::with_capacity(gallery.person_count());
        for (person, samples) in gallery.iter() {
            let mut distances = Vec::with_capacity(samples.len());
            for s in samples {
                distances.push(distance_to_mean(&mean, s)?);
            }
            bands.push(band_from_distances(person.clone(), &distances, margin)?);
        }
        let bands = sort_and_check_disjoint(bands)?;
        Ok(Self {
            dimension: gallery.dimension(),
            mean,
            bands,
            version,
            margin,
            tie_tolerance,
        })
    }

    /// Reassembles an index from persisted or test-constructed parts,
    /// re-validating every invariant (band ordering, disjointness, bounds).
    pub fn from_parts(
        mean: MeanVector,
        bands: Vec<Band>,
        version: u64,
        margin: f64,
        tie_tolerance: f64,
    ) -> Result<Self> {
        check_params(margin, tie_tolerance)?;
        let bands = sort_and_check_disjoint(bands)?;
        Ok(Self {
            dimension: mean.dimension(),
            mean,
            bands,
            version,
            margin,
            tie_tolerance,
        })
    }

    pub fn mean(&self) -> &MeanVector {
        &self.mean
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn band_of(&self, person: &PersonId) -> Option<&Band> {
        self.bands.iter().find(|b| &b.person == person)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn tie_tolerance(&self) -> f64 {
        self.tie_tolerance
    }

    pub fn person_count(&self) -> usize {
        self.bands.len()
    }

    /// Smallest gap between adjacent bands: a diagnostic for how much slack
    /// the current mean leaves between persons. `None` with fewer than two
    /// bands.
    pub fn min_inter_band_gap(&self) -> Option<f64> {
        self.bands
            .windows(2)
            .map(|w| w[1].low - w[0].high)
            .min_by(|a, b| a.total_cmp(b))
    }

    /// Classifies a probe by its distance to the mean.
    pub fn classify(&self, probe: &FeatureVector) -> Result<ClassificationResult> {
        probe.expect_dimension(self.dimension)?;
        let d = distance_to_mean(&self.mean, probe)?;
        Ok(self.classify_distance(d))
    }

    /// Classifies a precomputed distance-to-mean. This is the whole search:
    /// everything about the probe beyond this one scalar is irrelevant.
    pub fn classify_distance(&self, d: f64) -> ClassificationResult {
        let (outcome, _) = self.classify_counted(d);
        ClassificationResult {
            outcome,
            distance_to_mean: d,
        }
    }

    /// Number of interval comparisons the banded search spends on one probe.
    /// Bounded by `ceil(log2 m) + 2` for `m` bands.
    pub fn lookup_cost(&self, probe: &FeatureVector) -> Result<usize> {
        probe.expect_dimension(self.dimension)?;
        let d = distance_to_mean(&self.mean, probe)?;
        Ok(self.lookup_cost_distance(d))
    }

    pub fn lookup_cost_distance(&self, d: f64) -> usize {
        self.classify_counted(d).1
    }

    /// Binary search over the sorted disjoint bands. The count increments
    /// once per band examined in the loop, plus once for the nearest-neighbor
    /// resolution when the probe lands between bands.
    fn classify_counted(&self, d: f64) -> (Outcome, usize) {
        let m = self.bands.len();
        if m == 0 {
            return (Outcome::EmptyIndex, 0);
        }
        let mut count = 0usize;
        let mut lo: isize = 0;
        let mut hi: isize = m as isize - 1;
        while lo <= hi {
            let mid = lo + (hi - lo) / 2;
            let band = &self.bands[mid as usize];
            count += 1;
            if d < band.low {
                hi = mid - 1;
            } else if d > band.high {
                lo = mid + 1;
            } else {
                return (Outcome::InBand(band.person.clone()), count);
            }
        }
        // Not in any band. bands[..lo] lie entirely below d, bands[lo..]
        // entirely above; resolving between the two flanking bands is the
        // final comparison.
        count += 1;
        let below = hi;
        let above = lo as usize;
        let outcome = if below < 0 {
            let band = &self.bands[0];
            Outcome::NearestBand {
                person: band.person.clone(),
                gap: band.low - d,
            }
        } else if above >= m {
            let band = &self.bands[m - 1];
            Outcome::NearestBand {
                person: band.person.clone(),
                gap: d - band.high,
            }
        } else {
            let left = &self.bands[below as usize];
            let right = &self.bands[above];
            let left_gap = d - left.high;
            let right_gap = right.low - d;
            if (left_gap - right_gap).abs() <= self.tie_tolerance {
                let (a, b) = if left.person <= right.person {
                    (left.person.clone(), right.person.clone())
                } else {
                    (right.person.clone(), left.person.clone())
                };
                Outcome::AmbiguousTie(a, b)
            } else if left_gap < right_gap {
                Outcome::NearestBand {
                    person: left.person.clone(),
                    gap: left_gap,
                }
            } else {
                Outcome::NearestBand {
                    person: right.person.clone(),
                    gap: right_gap,
                }
            }
        };
        (outcome, count)
    }

    /// Adds a person to the gallery and index. Under [`MeanPolicy::Frozen`]
    /// the mean and existing bands stay untouched and only the new band is
    /// inserted; under [`MeanPolicy::Recompute`] the mean and all bands are
    /// rebuilt over the grown gallery. Fails atomically: on any error the
    /// existing index and gallery are unchanged (both are left untouched
    /// regardless; a new pair is returned on success).
    pub fn enroll(
        &self,
        gallery: &Gallery,
        person: PersonId,
        samples: &[FeatureVector],
        policy: MeanPolicy,
    ) -> Result<(BandedIndex, Gallery)> {
        if gallery.contains(&person) || self.band_of(&person).is_some() {
            return Err(Error::DuplicatePerson(person));
        }
        if samples.is_empty() {
            return Err(Error::EmptyGallery);
        }
        for s in samples {
            s.expect_dimension(self.dimension)?;
        }

        let mut grown = gallery.clone();
        for s in samples {
            grown.insert(person.clone(), s.clone())?;
        }

        match policy {
            MeanPolicy::Frozen => {
                let mut distances = Vec::with_capacity(samples.len());
                for s in samples {
                    distances.push(distance_to_mean(&self.mean, s)?);
                }
                let band = band_from_distances(person, &distances, self.margin)?;
                let mut bands = self.bands.clone();
                bands.push(band);
                let bands = sort_and_check_disjoint(bands)?;
                Ok((
                    Self {
                        mean: self.mean.clone(),
                        bands,
                        dimension: self.dimension,
                        version: self.version + 1,
                        margin: self.margin,
                        tie_tolerance: self.tie_tolerance,
                    },
                    grown,
                ))
            }
            MeanPolicy::Recompute => {
                let rebuilt = Self::build_versioned(
                    &grown,
                    self.margin,
                    self.tie_tolerance,
                    self.version + 1,
                )?;
                Ok((rebuilt, grown))
            }
        }
    }

    /// One-to-one check: accept iff the probe's distance-to-mean lies in the
    /// claimed person's band. Landing in a different person's band is a
    /// reject, never a re-identification.
    pub fn authenticate(&self, claimed: &PersonId, probe: &FeatureVector) -> Result<Decision> {
        let band = self
            .band_of(claimed)
            .ok_or_else(|| Error::UnknownPerson(claimed.clone()))?;
        probe.expect_dimension(self.dimension)?;
        let d = distance_to_mean(&self.mean, probe)?;
        Ok(if band.contains(d) {
            Decision::Accept
        } else {
            Decision::Reject
        })
    }

    /// Same decision surface as [`BandedIndex::authenticate`] for a
    /// precomputed distance.
    pub fn authenticate_distance(&self, claimed: &PersonId, d: f64) -> Result<Decision> {
        let band = self
            .band_of(claimed)
            .ok_or_else(|| Error::UnknownPerson(claimed.clone()))?;
        Ok(if band.contains(d) {
            Decision::Accept
        } else {
            Decision::Reject
        })
    }

    /// One-to-many search: the classify result's person first, then bands by
    /// increasing distance from the probe's distance-to-mean, at most
    /// `max_neighbors` entries. A tie puts both tied persons first, ordered
    /// by id.
    pub fn identify(&self, probe: &FeatureVector, max_neighbors: usize) -> Result<Vec<Neighbor>> {
        probe.expect_dimension(self.dimension)?;
        let d = distance_to_mean(&self.mean, probe)?;
        Ok(self.identify_distance(d, max_neighbors))
    }

    pub fn identify_distance(&self, d: f64, max_neighbors: usize) -> Vec<Neighbor> {
        let mut entries: Vec<Neighbor> = self
            .bands
            .iter()
            .map(|b| Neighbor {
                person: b.person.clone(),
                interval_distance: b.gap_to(d),
            })
            .collect();
        entries.sort_by(|a, b| {
            a.interval_distance
                .total_cmp(&b.interval_distance)
                .then_with(|| a.person.cmp(&b.person))
        });
        // With a nonzero tie tolerance the two tied persons may have slightly
        // different gaps; force them to the front in id order so the ranking
        // agrees with the classification outcome.
        if let (Outcome::AmbiguousTie(first, second), _) = self.classify_counted(d) {
            let mut reordered = Vec::with_capacity(entries.len());
            for id in [&first, &second] {
                let pos = entries
                    .iter()
                    .position(|n| &n.person == id)
                    .expect("tied person is indexed");
                reordered.push(entries.remove(pos));
            }
            reordered.append(&mut entries);
            entries = reordered;
        }
        entries.truncate(max_neighbors);
        entries
    }
}

fn check_params(margin: f64, tie_tolerance: f64) -> Result<()> {
    if !margin.is_finite() || margin < 0.0 {
        return Err(Error::InvariantViolation(format!(
            "margin must be a nonnegative real, got {margin}"
        )));
    }
    if !tie_tolerance.is_finite() || tie_tolerance < 0.0 {
        return Err(Error::InvariantViolation(format!(
            "tie tolerance must be a nonnegative real, got {tie_tolerance}"
        )));
    }
    Ok(())
}

/// Expands the observed `[min, max]` distance range by `margin * width`;
/// a zero-width range (single sample, or identical samples) instead gets the
/// fixed absolute half-width. The lower endpoint is clamped at 0.
fn band_from_distances(person: PersonId, distances: &[f64], margin: f64) -> Result<Band> {
    debug_assert!(!distances.is_empty());
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &d in distances {
        min = min.min(d);
        max = max.max(d);
    }
    let width = max - min;
    let (low, high) = if width == 0.0 {
        (
            min - SINGLE_SAMPLE_HALF_WIDTH,
            max + SINGLE_SAMPLE_HALF_WIDTH,
        )
    } else {
        (min - margin * width, max + margin * width)
    };
    Band::new(person, low.max(0.0), high)
}

/// Sorts bands by their low endpoint and verifies pairwise disjointness,
/// reporting every overlapping person pair on failure. Duplicate persons are
/// rejected as well.
fn sort_and_check_disjoint(mut bands: Vec<Band>) -> Result<Vec<Band>> {
    bands.sort_by(|a, b| {
        a.low
            .total_cmp(&b.low)
            .then_with(|| a.person.cmp(&b.person))
    });
    for w in bands.windows(2) {
        if w[0].person == w[1].person {
            return Err(Error::DuplicatePerson(w[0].person.clone()));
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    for b in &bands {
        if !seen.insert(b.person.clone()) {
            return Err(Error::DuplicatePerson(b.person.clone()));
        }
    }
    let mut collisions = Vec::new();
    for i in 0..bands.len() {
        for j in (i + 1)..bands.len() {
            if bands[j].low > bands[i].high {
                break;
            }
            if bands[i].overlaps(&bands[j]) {
                collisions.push((bands[i].person.clone(), bands[j].person.clone()));
            }
        }
    }
    if !collisions.is_empty() {
        return Err(Error::BandCollision(collisions));
    }
    Ok(bands)
}
