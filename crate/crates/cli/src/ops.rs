//! One function per pipeline verb, sharing the snapshot and vector-file
//! formats with the service.

use std::io::Write;
use std::path::Path;

use emfv_core::{
    load_snapshot, load_weights, normalize, pgm::decode_pgm, save_snapshot, save_weights,
    vector::distance_to_mean, BandedIndex, Dataset, Error, FeatureVector, Gallery, Network,
    NetworkBuilder, Outcome, PersonId, Result, Tensor, TrainingConfig,
};
use serde_json::json;

use crate::jsonl;
use crate::{AuthenticateArgs, BuildArgs, EnrollArgs, ExtractArgs, IdentifyArgs, TrainArgs};

/// Feature width of the rectified layer the extractor reads.
const FEATURE_UNITS: usize = 64;

/// A directory of class subdirectories, flattened for training.
struct LabeledImages {
    classes: Vec<String>,
    pixels: Vec<Vec<f64>>,
    labels: Vec<usize>,
    height: usize,
    width: usize,
}

pub fn train(args: &TrainArgs, seed: u64) -> Result<()> {
    let LabeledImages {
        classes,
        pixels,
        labels,
        height,
        width,
    } = load_labeled_images(&args.images)?;
    let dataset = Dataset::from_grayscale(&pixels, height, width, &labels, classes.len())?;
    let mut net = NetworkBuilder::new(height, width)
        .conv(4, 3, 1, 1)
        .relu()
        .maxpool(2)
        .dense(FEATURE_UNITS)
        .relu()
        .dense(classes.len())
        .softmax()
        .build(seed)?;
    let config = TrainingConfig {
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed,
    };
    let report = emfv_core::train(&mut net, &dataset, &config)?;
    save_weights(&net, &args.weights)?;
    println!(
        "{}",
        json!({
            "classes": classes,
            "images": dataset.len(),
            "feature_dimension": net.feature_dimension(),
            "initial_loss": report.loss_history.first(),
            "final_loss": report.loss_history.last(),
            "accuracy": report.accuracy,
        })
    );
    Ok(())
}

/// Reads a directory of class subdirectories of PGM images. Subdirectory
/// names in lexicographic order define the labels; file order inside a
/// class is lexicographic too, so the dataset is stable across runs.
fn load_labeled_images(root: &Path) -> Result<LabeledImages> {
    let mut classes: Vec<String> = Vec::new();
    for entry in std::fs::read_dir(root)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            classes.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    classes.sort();
    if classes.len() < 2 {
        return Err(Error::Format(format!(
            "{}: need at least two class subdirectories, found {}",
            root.display(),
            classes.len()
        )));
    }

    let mut images = Vec::new();
    let mut image_labels = Vec::new();
    let mut extent: Option<(usize, usize)> = None;
    for (label, class) in classes.iter().enumerate() {
        let dir = root.join(class);
        let mut files: Vec<_> = std::fs::read_dir(&dir)?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "pgm"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::Format(format!(
                "{}: class has no .pgm images",
                dir.display()
            )));
        }
        for file in files {
            let bytes = std::fs::read(&file)?;
            let (pixels, height, width) = decode_pgm(&bytes)
                .map_err(|e| Error::Format(format!("{}: {e}", file.display())))?;
            match extent {
                None => extent = Some((height, width)),
                Some(e) if e != (height, width) => {
                    return Err(Error::Format(format!(
                        "{}: image is {height}x{width}, expected {}x{}",
                        file.display(),
                        e.0,
                        e.1
                    )));
                }
                Some(_) => {}
            }
            images.push(pixels);
            image_labels.push(label);
        }
    }
    let (height, width) = extent.expect("classes are non-empty");
    Ok(LabeledImages {
        classes,
        pixels: images,
        labels: image_labels,
        height,
        width,
    })
}

pub fn extract(args: &ExtractArgs) -> Result<()> {
    let mut out: Box<dyn Write> = match &args.output {
        Some(path) => Box::new(std::io::BufWriter::new(std::fs::File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    if let Some(image) = &args.image {
        let weights = args
            .weights
            .as_ref()
            .ok_or_else(|| Error::Format("--image input needs --weights".into()))?;
        let net = load_weights(weights)?;
        let vector = extract_from_image(&net, image)?;
        jsonl::write_record(&mut out, &args.id, &vector)?;
    } else {
        let path = args.vectors.as_ref().expect("clap enforces the pair");
        for (id, vector) in jsonl::read_vectors(path)? {
            jsonl::write_record(&mut out, &id, &normalize(&vector)?)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn extract_from_image(net: &Network, path: &Path) -> Result<FeatureVector> {
    let bytes = std::fs::read(path)?;
    let (pixels, height, width) =
        decode_pgm(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let input = Tensor::from_grayscale(&pixels, height, width)?;
    normalize(&net.extract_features(&input)?)
}

pub fn build(args: &BuildArgs) -> Result<()> {
    let rows = jsonl::read_vectors(&args.gallery)?;
    let mut gallery = Gallery::new(rows[0].1.dimension());
    for (id, vector) in rows {
        gallery.insert(PersonId::new(id)?, vector)?;
    }
    let index = BandedIndex::build_with(&gallery, args.margin, args.tie_tolerance)?;
    save_snapshot(&index, &gallery, &args.snapshot)?;
    println!(
        "{}",
        json!({
            "version": index.version(),
            "persons": index.person_count(),
            "samples": gallery.sample_count(),
            "dimension": index.dimension(),
        })
    );
    Ok(())
}

pub fn enroll(args: &EnrollArgs) -> Result<()> {
    let loaded = load_snapshot(&args.snapshot)?;
    let person = PersonId::new(args.person.clone())?;
    let samples: Vec<FeatureVector> = jsonl::read_vectors(&args.samples)?
        .into_iter()
        .map(|(_, v)| v)
        .collect();
    let (index, gallery) = loaded.index.enroll(
        &loaded.gallery,
        person.clone(),
        &samples,
        args.policy.policy(),
    )?;
    save_snapshot(&index, &gallery, &args.snapshot)?;
    let band = index.band_of(&person).expect("person was just enrolled");
    println!(
        "{}",
        json!({
            "version": index.version(),
            "band": [band.low(), band.high()],
        })
    );
    Ok(())
}

pub fn identify(args: &IdentifyArgs) -> Result<()> {
    let loaded = load_snapshot(&args.snapshot)?;
    let index = loaded.index;
    if let Some(d) = args.distance {
        let result = index.classify_distance(d);
        let line = identify_line(&index, result.outcome, d, args.max_neighbors, None);
        println!("{line}");
        return Ok(());
    }
    let path = args.probe.as_ref().expect("clap enforces the pair");
    for (id, vector) in jsonl::read_vectors(path)? {
        let result = index.classify(&vector)?;
        let line = identify_line(
            &index,
            result.outcome,
            result.distance_to_mean,
            args.max_neighbors,
            Some(&id),
        );
        println!("{line}");
    }
    Ok(())
}

fn identify_line(
    index: &BandedIndex,
    outcome: Outcome,
    distance: f64,
    max_neighbors: usize,
    probe: Option<&str>,
) -> String {
    let matches: Vec<_> = index
        .identify_distance(distance, max_neighbors)
        .into_iter()
        .map(|n| {
            json!({
                "person": n.person.as_str(),
                "interval_distance": n.interval_distance,
            })
        })
        .collect();
    let mut line = json!({ "distance": distance, "matches": matches });
    let object = line.as_object_mut().expect("literal is an object");
    if let Some(id) = probe {
        object.insert("probe".into(), json!(id));
    }
    match outcome {
        Outcome::InBand(person) => {
            object.insert("outcome".into(), json!("in_band"));
            object.insert("person".into(), json!(person.as_str()));
        }
        Outcome::NearestBand { person, gap } => {
            object.insert("outcome".into(), json!("nearest_band"));
            object.insert("person".into(), json!(person.as_str()));
            object.insert("gap".into(), json!(gap));
        }
        Outcome::AmbiguousTie(a, b) => {
            object.insert("outcome".into(), json!("ambiguous_tie"));
            object.insert("tie".into(), json!([a.as_str(), b.as_str()]));
        }
        Outcome::EmptyIndex => {
            object.insert("outcome".into(), json!("empty_index"));
        }
    }
    line.to_string()
}

pub fn authenticate(args: &AuthenticateArgs) -> Result<()> {
    let loaded = load_snapshot(&args.snapshot)?;
    let index = loaded.index;
    let person = PersonId::new(args.person.clone())?;
    if let Some(d) = args.distance {
        let decision = index.authenticate_distance(&person, d)?;
        println!(
            "{}",
            json!({ "decision": decision_str(decision), "distance": d })
        );
        return Ok(());
    }
    let path = args.probe.as_ref().expect("clap enforces the pair");
    for (id, vector) in jsonl::read_vectors(path)? {
        let decision = index.authenticate(&person, &vector)?;
        let distance = distance_to_mean(index.mean(), &vector)?;
        println!(
            "{}",
            json!({ "decision": decision_str(decision), "distance": distance, "probe": id })
        );
    }
    Ok(())
}

fn decision_str(decision: emfv_core::Decision) -> &'static str {
    match decision {
        emfv_core::Decision::Accept => "accept",
        emfv_core::Decision::Reject => "reject",
    }
}
