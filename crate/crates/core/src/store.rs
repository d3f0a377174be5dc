//! JSON snapshot of a banded index and its gallery.
//!
//! A snapshot is the entire persistent state of the matcher: the mean
//! vector, each person's band and enrolled feature vectors, and the index
//! metadata. Feature vectors are the only biometric representation that
//! ever reaches disk; no image bytes pass through this module, and the text
//! format keeps that auditable. Writes go to a temp file in the target
//! directory and rename into place, so readers see either the old snapshot
//! or the new one, never a half-written file. The serialized form carries no
//! trailing newline: every proper prefix of a snapshot is unparseable, so
//! truncation surfaces as a format error rather than a quietly degraded
//! index.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{Band, BandedIndex, Gallery, PersonId};
use crate::vector::{FeatureVector, MeanVector};

/// The one snapshot layout this build reads and writes.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotFile {
    format_version: u32,
    created_at: String,
    dimension: usize,
    index_version: u64,
    margin: f64,
    tie_tolerance: f64,
    mean_source_count: usize,
    mean: Vec<f64>,
    persons: Vec<PersonEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PersonEntry {
    id: String,
    band: [f64; 2],
    samples: Vec<Vec<f64>>,
}

/// Snapshot fields that describe the file rather than the state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotMeta {
    pub format_version: u32,
    /// RFC 3339 write timestamp.
    pub created_at: String,
}

#[derive(Debug, Clone)]
pub struct LoadedSnapshot {
    pub index: BandedIndex,
    pub gallery: Gallery,
    pub meta: SnapshotMeta,
}

/// Serializes index and gallery; see [`save_snapshot`] for the file-level
/// contract. Fails if the two disagree on their person sets.
pub fn snapshot_to_string(index: &BandedIndex, gallery: &Gallery) -> Result<String> {
    let mut persons = Vec::with_capacity(index.bands().len());
    for band in index.bands() {
        let samples = gallery.samples(band.person()).ok_or_else(|| {
            Error::InvariantViolation(format!(
                "gallery is missing samples for indexed person {}",
                band.person()
            ))
        })?;
        persons.push(PersonEntry {
            id: band.person().as_str().to_string(),
            band: [band.low(), band.high()],
            samples: samples.iter().map(|s| s.values().to_vec()).collect(),
        });
    }
    if gallery.person_count() != index.bands().len() {
        return Err(Error::InvariantViolation(format!(
            "gallery has {} persons but the index has {} bands",
            gallery.person_count(),
            index.bands().len()
        )));
    }
    let file = SnapshotFile {
        format_version: FORMAT_VERSION,
        created_at: chrono::Utc::now().to_rfc3339(),
        dimension: index.dimension(),
        index_version: index.version(),
        margin: index.margin(),
        tie_tolerance: index.tie_tolerance(),
        mean_source_count: index.mean().source_count(),
        mean: index.mean().values().to_vec(),
        persons,
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Serialization(e.to_string()))
}

/// Atomically writes the snapshot: temp file in the same directory, flush,
/// rename over the target.
pub fn save_snapshot(index: &BandedIndex, gallery: &Gallery, path: &Path) -> Result<()> {
    let json = snapshot_to_string(index, gallery)?;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    tmp.write_all(json.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Parses and re-validates a snapshot: band ordering and disjointness,
/// finite nonnegative endpoints, unique non-empty person ids, nonempty
/// per-person samples, and dimension agreement are all re-established from
/// scratch. Band endpoints are authoritative as stored; they are not
/// recomputed from the samples, because bands created under a frozen mean
/// are not reproducible from the current mean.
pub fn snapshot_from_str(json: &str) -> Result<LoadedSnapshot> {
    let file: SnapshotFile =
        serde_json::from_str(json).map_err(|e| Error::Format(e.to_string()))?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format_version {}, this build reads version {FORMAT_VERSION}",
            file.format_version
        )));
    }
    if file.mean.len() != file.dimension {
        return Err(Error::Format(format!(
            "mean has {} entries but dimension says {}",
            file.mean.len(),
            file.dimension
        )));
    }
    let mean = MeanVector::from_raw(file.mean, file.mean_source_count)?;
    let mut bands = Vec::with_capacity(file.persons.len());
    let mut gallery = Gallery::new(file.dimension);
    for p in file.persons {
        let person = PersonId::new(p.id)?;
        if p.samples.is_empty() {
            return Err(Error::InvariantViolation(format!(
                "person {person} has no samples"
            )));
        }
        for s in p.samples {
            gallery.insert(person.clone(), FeatureVector::new(s)?)?;
        }
        bands.push(Band::new(person, p.band[0], p.band[1])?);
    }
    let index = BandedIndex::from_parts(
        mean,
        bands,
        file.index_version,
        file.margin,
        file.tie_tolerance,
    )?;
    Ok(LoadedSnapshot {
        index,
        gallery,
        meta: SnapshotMeta {
            format_version: file.format_version,
            created_at: file.created_at,
        },
    })
}

pub fn load_snapshot(path: &Path) -> Result<LoadedSnapshot> {
    let json = fs::read_to_string(path)?;
    snapshot_from_str(&json)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::MeanPolicy;
    use crate::vector::distance_to_mean;
    use tempfile::tempdir;

    fn pid(s: &str) -> PersonId {
        PersonId::new(s).unwrap()
    }

    fn fv(values: &[f64]) -> FeatureVector {
        FeatureVector::new(values.to_vec()).unwrap()
    }

    fn sample_state() -> (BandedIndex, Gallery) {
        let mut g = Gallery::new(3);
        g.insert(pid("ada"), fv(&[1.0, 2.0, 0.5])).unwrap();
        g.insert(pid("ada"), fv(&[1.2, 1.9, 0.6])).unwrap();
        g.insert(pid("bob"), fv(&[5.0, 4.0, 3.0])).unwrap();
        g.insert(pid("bob"), fv(&[5.5, 4.2, 2.9])).unwrap();
        g.insert(pid("eve"), fv(&[9.0, 9.0, 9.0])).unwrap();
        let idx = BandedIndex::build_with(&g, 0.05, 1e-9).unwrap();
        (idx, g)
    }

    #[test]
    fn round_trip_preserves_every_field() {
        let (index, gallery) = sample_state();
        let dir = tempdir().unwrap();
        let path = dir.path().join("snap.json");
        save_snapshot(&index, &gallery, &path).unwrap();
        let loaded = load_snapshot(&path).unwrap();
        assert_eq!(loaded.index, index);
        assert_eq!(loaded.gallery, gallery);
        assert_eq!(loaded.meta.format_version, FORMAT_VERSION);
        assert!(chrono::DateTime::parse_from_rfc3339(&loaded.meta.created_at).is_ok());
    }

    #[test]
    fn recomputed_distances_match_bit_for_bit() {
        let (index, gallery) = sample_state();
        let json = snapshot_to_string(&index, &gallery).unwrap();
        let loaded = snapshot_from_str(&json).unwrap();
        for (person, samples) in gallery.iter() {
            let reloaded = loaded.gallery.samples(person).unwrap();
            for (a, b) in samples.iter().zip(reloaded) {
                let da = distance_to_mean(index.mean(), a).unwrap();
                let db = distance_to_mean(loaded.index.mean(), b).unwrap();
                assert_eq!(da.to_bits(), db.to_bits());
            }
        }
    }

    #[test]
    fn round_trip_survives_enrollment() {
        let (index, gallery) = sample_state();
        let (index, gallery) = index
            .enroll(
                &gallery,
                pid("zoe"),
                &[fv(&[20.0, 20.0, 20.0])],
                MeanPolicy::Frozen,
            )
            .unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("snap.json");
        save_snapshot(&index, &gallery, &path).unwrap();
        let loaded = load_snapshot(&path).unwrap();
        assert_eq!(loaded.index, index);
        assert_eq!(loaded.gallery, gallery);
        assert_eq!(loaded.index.version(), 2);
        // Recompute enrollment keeps working from restored state.
        let (idx2, _) = loaded
            .index
            .enroll(
                &loaded.gallery,
                pid("yan"),
                &[fv(&[40.0, 40.0, 40.0])],
                MeanPolicy::Recompute,
            )
            .unwrap();
        assert_eq!(idx2.version(), 3);
    }

    #[test]
    fn snapshot_stores_only_feature_vectors() {
        let (index, gallery) = sample_state();
        let json = snapshot_to_string(&index, &gallery).unwrap();
        // The audit property of the text format: the only array-valued keys
        // are the mean, the bands, and the per-person samples.
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        let keys: Vec<&str> = parsed
            .as_object()
            .unwrap()
            .keys()
            .map(String::as_str)
            .collect();
        assert!(keys.contains(&"mean") && keys.contains(&"persons"));
        for p in parsed["persons"].as_array().unwrap() {
            let pk: Vec<&str> = p.as_object().unwrap().keys().map(String::as_str).collect();
            let mut sorted = pk.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, ["band", "id", "samples"]);
        }
    }

    #[test]
    fn snapshot_has_no_trailing_newline() {
        let (index, gallery) = sample_state();
        let json = snapshot_to_string(&index, &gallery).unwrap();
        assert!(!json.ends_with('\n'));
        assert!(json.ends_with('}'));
    }

    #[test]
    fn every_truncation_is_a_format_error() {
        let (index, gallery) = sample_state();
        let json = snapshot_to_string(&index, &gallery).unwrap();
        for cut in 0..json.len() {
            let r = snapshot_from_str(&json[..cut]);
            assert!(
                matches!(r, Err(Error::Format(_))),
                "prefix of {cut} bytes gave {:?}",
                r.map(|_| ())
            );
        }
    }

    #[test]
    fn save_replaces_existing_snapshot_and_leaves_no_temp_files() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("snap.json");
        let (index, gallery) = sample_state();
        save_snapshot(&index, &gallery, &path).unwrap();
        let mut g2 = Gallery::new(3);
        g2.insert(pid("solo"), fv(&[1.0, 1.0, 1.0])).unwrap();
        let other = BandedIndex::build(&g2, 0.05).unwrap();
        save_snapshot(&other, &g2, &path).unwrap();
        let loaded = load_snapshot(&path).unwrap();
        assert_eq!(loaded.index, other);
        let entries: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(entries.len(), 1, "stray files: {entries:?}");
    }

    #[test]
    fn unsupported_version_names_the_supported_one() {
        let (index, gallery) = sample_state();
        let json = snapshot_to_string(&index, &gallery).unwrap();
        let bumped = json.replace("\"format_version\": 1", "\"format_version\": 2");
        match snapshot_from_str(&bumped) {
            Err(Error::Format(msg)) => {
                assert!(msg.contains('2') && msg.contains('1'), "message: {msg}");
            }
            other => panic!("expected Format error, got {other:?}"),
        }
    }

    #[test]
    fn overlapping_bands_are_rejected_on_load() {
        let json = r#"{
            "format_version": 1,
            "created_at": "2026-01-01T00:00:00Z",
            "dimension": 2,
            "index_version": 1,
            "margin": 0.05,
            "tie_tolerance": 0.0,
            "mean_source_count": 4,
            "mean": [1.0, 1.0],
            "persons": [
                {"id": "a", "band": [0.0, 1.0], "samples": [[1.0, 1.5]]},
                {"id": "b", "band": [0.5, 2.0], "samples": [[2.0, 1.0]]}
            ]
        }"#;
        assert!(matches!(
            snapshot_from_str(json),
            Err(Error::BandCollision(_))
        ));
    }

    #[test]
    fn malformed_fields_are_rejected_on_load() {
        let base = r#"{
            "format_version": 1,
            "created_at": "2026-01-01T00:00:00Z",
            "dimension": 2,
            "index_version": 1,
            "margin": 0.05,
            "tie_tolerance": 0.0,
            "mean_source_count": 2,
            "mean": [1.0, 1.0],
            "persons": [{"id": "ID", "band": [BAND], "samples": [SAMPLES]}]
        }"#;
        // Inverted interval, negative low, empty id, NaN token, negative
        // sample entry, empty samples, sample dimension mismatch.
        for (id, band, samples) in [
            ("a", "2.0, 1.0", "[1.0, 1.0]"),
            ("a", "-0.5, 1.0", "[1.0, 1.0]"),
            ("", "0.5, 1.0", "[1.0, 1.0]"),
            ("a", "0.5, NaN", "[1.0, 1.0]"),
            ("a", "0.5, 1.0", "[-1.0, 1.0]"),
            ("a", "0.5, 1.0", ""),
            ("a", "0.5, 1.0", "[1.0, 1.0, 1.0]"),
        ] {
            let json = base
                .replace("ID", id)
                .replace("BAND", band)
                .replace("SAMPLES", samples);
            assert!(snapshot_from_str(&json).is_err(), "accepted: {json}");
        }
        // Dimension disagreeing with the mean length.
        let json = base
            .replace("\"dimension\": 2", "\"dimension\": 3")
            .replace("ID", "a")
            .replace("BAND", "0.5, 1.0")
            .replace("SAMPLES", "[1.0, 1.0]");
        assert!(matches!(snapshot_from_str(&json), Err(Error::Format(_))));
        // Duplicate person ids.
        let json = base.replace(
            r#"[{"id": "ID", "band": [BAND], "samples": [SAMPLES]}]"#,
            r#"[{"id": "x", "band": [0.0, 1.0], "samples": [[1.0, 1.0]]},
                {"id": "x", "band": [2.0, 3.0], "samples": [[3.0, 1.0]]}]"#,
        );
        assert!(matches!(
            snapshot_from_str(&json),
            Err(Error::DuplicatePerson(_))
        ));
    }

    #[test]
    fn empty_person_list_loads_as_empty_index() {
        let json = r#"{
            "format_version": 1,
            "created_at": "2026-01-01T00:00:00Z",
            "dimension": 2,
            "index_version": 3,
            "margin": 0.05,
            "tie_tolerance": 0.0,
            "mean_source_count": 1,
            "mean": [0.5, 0.5],
            "persons": []
        }"#;
        let loaded = snapshot_from_str(json).unwrap();
        assert_eq!(loaded.index.person_count(), 0);
        assert_eq!(loaded.gallery.person_count(), 0);
        assert_eq!(loaded.index.version(), 3);
        assert!(matches!(
            loaded.index.classify_distance(1.0).outcome,
            crate::index::Outcome::EmptyIndex
        ));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let dir = tempdir().unwrap();
        assert!(matches!(
            load_snapshot(&dir.path().join("absent.json")),
            Err(Error::Io(_))
        ));
    }
}
