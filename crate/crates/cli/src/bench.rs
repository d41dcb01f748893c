//! Pipeline throughput benchmark on synthetic volumes. Results are
//! hardware-dependent and reported, never gated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::time::Instant;
use voxelforge_core::augment3d::{item_seed, pipeline_run, AugmentSpec, Range};
use voxelforge_core::volgrid::Geometry;
use voxelforge_core::{Dtype, Error, LabelMap, Result, Volume};

#[derive(Serialize)]
struct BatchResult {
    batch_size: usize,
    /// Pipelined timing at the configured depth.
    ms_per_volume_mean: f64,
    ms_per_volume_stddev: f64,
    volumes_per_second: f64,
    /// Same batch at depth 1 (no overlap).
    depth1_ms_per_volume_mean: f64,
    pipelining_speedup: f64,
}

#[derive(Serialize)]
struct BenchReport {
    schema: u32,
    command: &'static str,
    machine: String,
    volume_dims: [usize; 3],
    pipeline_depth: usize,
    repetitions: usize,
    seed: u64,
    results: Vec<BatchResult>,
}

fn time_batch(
    batch: &[(Volume, LabelMap)],
    spec: &AugmentSpec,
    depth: usize,
    repetitions: usize,
) -> Result<(f64, f64)> {
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let started = Instant::now();
        let out = pipeline_run(batch, spec, depth)?;
        debug_assert_eq!(out.len(), batch.len());
        samples.push(started.elapsed().as_secs_f64() * 1e3 / batch.len() as f64);
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / samples.len() as f64;
    Ok((mean, var.sqrt()))
}

pub fn run(
    batch_sizes: &[usize],
    repetitions: usize,
    depth: usize,
    dims: &[usize],
    seed: u64,
) -> Result<i32> {
    if batch_sizes.is_empty() || batch_sizes.contains(&0) {
        return Err(Error::InvalidParameter(
            "batch sizes must be nonempty and positive".into(),
        ));
    }
    if repetitions < 5 {
        return Err(Error::InvalidParameter(
            "at least 5 repetitions are required".into(),
        ));
    }
    if depth < 1 {
        return Err(Error::InvalidParameter("depth must be >= 1".into()));
    }
    let dims: [usize; 3] = dims
        .try_into()
        .map_err(|_| Error::InvalidParameter("dims must be three values".into()))?;

    let geometry = Geometry::new(dims, [3.0; 3])?;
    let max_batch = *batch_sizes.iter().max().expect("nonempty");
    let batch: Vec<(Volume, LabelMap)> = (0..max_batch)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(item_seed(seed, i as u64));
            let data: Vec<f32> = (0..geometry.len())
                .map(|_| rng.gen_range(-1000.0..2000.0))
                .collect();
            Ok((
                Volume::new(geometry, Dtype::F32, data)?,
                LabelMap::zeros(geometry),
            ))
        })
        .collect::<Result<_>>()?;

    let spec = AugmentSpec {
        rotation_rad: [Range::new(-0.3, 0.3); 3],
        scale: [Range::new(0.9, 1.1); 3],
        displacement_vox: [Range::new(-4.0, 4.0); 3],
        occlusion_max_vox: 8.0,
        noise_sigma: Range::new(10.0, 60.0),
        window_a_hu: Range::new(-200.0, -100.0),
        window_b_hu: Range::new(200.0, 400.0),
        seed,
        ..Default::default()
    };

    // Warm-up touches code paths and the allocator once.
    let _ = pipeline_run(&batch[..1.min(batch.len())], &spec, depth)?;

    let mut results = Vec::with_capacity(batch_sizes.len());
    for &batch_size in batch_sizes {
        let items = &batch[..batch_size.min(batch.len())];
        let (piped_mean, piped_sd) = time_batch(items, &spec, depth, repetitions)?;
        let (serial_mean, _) = time_batch(items, &spec, 1, repetitions)?;
        results.push(BatchResult {
            batch_size,
            ms_per_volume_mean: piped_mean,
            ms_per_volume_stddev: piped_sd,
            volumes_per_second: 1e3 / piped_mean,
            depth1_ms_per_volume_mean: serial_mean,
            pipelining_speedup: serial_mean / piped_mean,
        });
    }

    let report = BenchReport {
        schema: super::commands::REPORT_SCHEMA,
        command: "bench",
        machine: format!(
            "{} {}, {} cores",
            std::env::consts::OS,
            std::env::consts::ARCH,
            std::thread::available_parallelism().map_or(1, |n| n.get())
        ),
        volume_dims: dims,
        pipeline_depth: depth,
        repetitions,
        seed,
        results,
    };
    println!("{}", serde_json::to_string_pretty(&report).expect("report"));
    Ok(0)
}
