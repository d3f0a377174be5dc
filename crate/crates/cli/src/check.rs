//! The `verify` verb: replay a snapshot through the scanning reference
//! classifier and cross-check the stored state against itself.

use emfv_core::oracle::{linear_scan_identify, verify_index};
use emfv_core::{distance_to_mean, load_snapshot, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::VerifyArgs;

/// Neighbors requested from both rankers during the identify cross-check.
const RANK_DEPTH: usize = 5;

pub fn verify(args: &VerifyArgs, seed: u64) -> Result<()> {
    let loaded = load_snapshot(&args.snapshot)?;
    let index = loaded.index;
    let bands = index.bands();
    if bands.is_empty() {
        return Err(Error::EmptyGallery);
    }
    let top = bands[bands.len() - 1].high();

    // Structural sweep: band endpoints and midpoints, both sides of every
    // endpoint, gap midpoints (the tie candidates), and the outer edges.
    let mut distances = vec![0.0, top * 1.1 + 1.0];
    for band in bands {
        distances.extend([
            band.low(),
            band.high(),
            0.5 * (band.low() + band.high()),
            band.low() - 1e-9,
            band.high() + 1e-9,
        ]);
    }
    for pair in bands.windows(2) {
        let mid = 0.5 * (pair[0].high() + pair[1].low());
        distances.extend([mid, mid - 1e-6, mid + 1e-6]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..args.probes {
        distances.push(rng.random_range(0.0..top * 1.25));
    }
    distances.retain(|d| *d >= 0.0);

    let report = verify_index(&index, &distances);
    if !report.overlaps.is_empty() {
        return Err(Error::InvariantViolation(format!(
            "{} overlapping band pairs, first at positions {:?}",
            report.overlaps.len(),
            report.overlaps[0]
        )));
    }
    if !report.disagreements.is_empty() {
        return Err(Error::InvariantViolation(format!(
            "{} of {} probes disagree with the scanning classifier, first at distance {}",
            report.disagreements.len(),
            report.probes,
            report.disagreements[0]
        )));
    }

    for &d in &distances {
        let fast = index.identify_distance(d, RANK_DEPTH);
        let slow = linear_scan_identify(bands, d, RANK_DEPTH, index.tie_tolerance());
        if fast != slow {
            return Err(Error::InvariantViolation(format!(
                "identify ranking disagrees with the scanning ranker at distance {d}"
            )));
        }
    }

    // Every stored sample must fall inside its person's band: bands are
    // derived from sample distances by outward-only widening, so containment
    // is exact, not approximate.
    let mut contained = 0usize;
    for (person, samples) in loaded.gallery.iter() {
        let band = index.band_of(person).ok_or_else(|| {
            Error::InvariantViolation(format!("person {person} has samples but no band"))
        })?;
        for sample in samples {
            let d = distance_to_mean(index.mean(), sample)?;
            if !band.contains(d) {
                return Err(Error::InvariantViolation(format!(
                    "stored sample of {person} at distance {d} escapes its band [{}, {}]",
                    band.low(),
                    band.high()
                )));
            }
            contained += 1;
        }
    }

    println!("0 mismatches over {} probes", report.probes);
    println!("bands disjoint ({} persons)", index.person_count());
    println!("stored samples in band: {contained}/{contained}");
    Ok(())
}
