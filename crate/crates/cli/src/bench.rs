//! The `bench` verb: comparison counts per query across gallery sizes.
//!
//! Comparison counts are deterministic for a fixed seed, so they go to
//! stdout; wall-clock timings are not, so they go to stderr.

use std::time::Instant;

use clap::{Args, ValueEnum};
use emfv_core::synthetic::colinear_banded_gallery;
use emfv_core::{BandedIndex, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Args)]
pub struct BenchArgs {
    /// Largest gallery size; rows cover powers of two up to it.
    #[arg(long, default_value_t = 512)]
    pub persons: usize,
    /// Probes per gallery size.
    #[arg(long, default_value_t = 1000)]
    pub probes: usize,
    #[arg(long, default_value_t = 8)]
    pub dimension: usize,
    /// Samples per person in the generated galleries.
    #[arg(long, default_value_t = 3)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    pub format: OutputFormat,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum OutputFormat {
    Table,
    Csv,
}

struct Row {
    persons: usize,
    probes: usize,
    mean: f64,
    max: usize,
    bound: usize,
}

pub fn bench(args: &BenchArgs, seed: u64) -> Result<()> {
    if args.persons < 2 {
        return Err(Error::InvariantViolation(
            "need at least two persons".into(),
        ));
    }
    if args.probes == 0 {
        return Err(Error::InvariantViolation("need at least one probe".into()));
    }

    let mut sizes = Vec::new();
    let mut m = 2;
    while m < args.persons {
        sizes.push(m);
        m *= 2;
    }
    sizes.push(args.persons);

    let mut rows = Vec::with_capacity(sizes.len());
    for &persons in &sizes {
        rows.push(measure(persons, args, seed)?);
    }

    match args.format {
        OutputFormat::Table => {
            println!(
                "{:>8}  {:>8}  {:>16}  {:>15}  {:>5}",
                "persons", "probes", "mean_comparisons", "max_comparisons", "bound"
            );
            for r in rows {
                println!(
                    "{:>8}  {:>8}  {:>16.2}  {:>15}  {:>5}",
                    r.persons, r.probes, r.mean, r.max, r.bound
                );
            }
        }
        OutputFormat::Csv => {
            println!("persons,probes,mean_comparisons,max_comparisons,bound");
            for r in rows {
                println!(
                    "{},{},{:.2},{},{}",
                    r.persons, r.probes, r.mean, r.max, r.bound
                );
            }
        }
    }
    Ok(())
}

fn measure(persons: usize, args: &BenchArgs, seed: u64) -> Result<Row> {
    let counts = vec![args.samples; persons];
    let built = Instant::now();
    let generated = colinear_banded_gallery(&counts, args.dimension, seed ^ persons as u64)?;
    let index = BandedIndex::build(&generated.gallery, 0.0)?;
    let build_ms = built.elapsed().as_secs_f64() * 1e3;

    let bands = index.bands();
    let top = bands[bands.len() - 1].high();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(persons as u64));
    let started = Instant::now();
    let mut total = 0usize;
    let mut max = 0usize;
    for _ in 0..args.probes {
        let d = rng.random_range(0.0..top * 1.2);
        let cost = index.lookup_cost_distance(d);
        total += cost;
        max = max.max(cost);
    }
    let query_ms = started.elapsed().as_secs_f64() * 1e3;
    eprintln!(
        "persons={persons} build {build_ms:.3} ms, {} probes in {query_ms:.3} ms",
        args.probes
    );

    Ok(Row {
        persons,
        probes: args.probes,
        mean: total as f64 / args.probes as f64,
        max,
        bound: ceil_log2(persons) + 2,
    })
}

/// Exact integer ceil(log2 n) for n >= 1.
fn ceil_log2(n: usize) -> usize {
    (usize::BITS - (n - 1).leading_zeros()) as usize
}
