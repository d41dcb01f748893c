//! Batch augmentation through a bounded in-order FIFO.
//!
//! Each batch item derives its own seed from the master seed and its
//! position, so outputs depend only on (inputs, spec, master seed) -- never
//! on pipeline depth, thread timing, or how the batch is partitioned. The
//! FIFO admits up to `depth` items in flight at once; while one item is
//! being transformed the next ones are already queued, which overlaps work
//! across items with no observable effect besides throughput.

use super::noise::prf;
use super::{apply_with_options, sample_params, ApplyOptions, AugmentSpec, AugmentedPair};
use crate::error::{Error, Result};
use crate::volgrid::{LabelMap, Volume};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Per-item seed: a keyed hash of the master seed and the batch position.
pub fn item_seed(master_seed: u64, index: u64) -> u64 {
    prf(master_seed, index)
}

fn transform_item(
    index: usize,
    image: &Volume,
    labels: &LabelMap,
    spec: &AugmentSpec,
    options: &ApplyOptions,
) -> Result<AugmentedPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(item_seed(spec.seed, index as u64));
    let params = sample_params(spec, image.dims(), &mut rng)?;
    apply_with_options(image, labels, &params, options)
}

/// Augment a batch. Outputs are in submission order; failures carry the
/// offending item index. `depth` is the FIFO capacity: 1 runs strictly
/// serially, 2 or more overlaps items.
pub fn pipeline_run(
    batch: &[(Volume, LabelMap)],
    spec: &AugmentSpec,
    depth: usize,
) -> Result<Vec<AugmentedPair>> {
    pipeline_run_from(batch, spec, depth, 0)
}

/// [`pipeline_run`] for a slice of a larger logical batch: items are seeded
/// by their global position `first_index + k`, so splitting a long run into
/// chunks changes nothing about the outputs.
pub fn pipeline_run_from(
    batch: &[(Volume, LabelMap)],
    spec: &AugmentSpec,
    depth: usize,
    first_index: usize,
) -> Result<Vec<AugmentedPair>> {
    pipeline_run_with(batch, spec, depth, first_index, &ApplyOptions::default())
}

/// Full-control variant taking per-voxel [`ApplyOptions`].
pub fn pipeline_run_with(
    batch: &[(Volume, LabelMap)],
    spec: &AugmentSpec,
    depth: usize,
    first_index: usize,
    options: &ApplyOptions,
) -> Result<Vec<AugmentedPair>> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if depth == 0 {
        return Err(Error::InvalidParameter(
            "pipeline depth must be >= 1".into(),
        ));
    }
    spec.validate()?;

    let mut slots: Vec<Option<Result<AugmentedPair>>> = Vec::new();
    slots.resize_with(batch.len(), || None);

    if depth == 1 || batch.len() == 1 {
        for (k, (image, labels)) in batch.iter().enumerate() {
            slots[k] = Some(transform_item(
                first_index + k,
                image,
                labels,
                spec,
                options,
            ));
        }
    } else {
        let workers = depth.min(batch.len());
        let (job_tx, job_rx) = crossbeam_channel::bounded::<usize>(depth);
        let (done_tx, done_rx) = crossbeam_channel::unbounded();

        std::thread::scope(|scope| {
            for _ in 0..workers {
                let job_rx = job_rx.clone();
                let done_tx = done_tx.clone();
                scope.spawn(move || {
                    while let Ok(k) = job_rx.recv() {
                        let (image, labels) = &batch[k];
                        let result = transform_item(first_index + k, image, labels, spec, options);
                        if done_tx.send((k, result)).is_err() {
                            break;
                        }
                    }
                });
            }
            drop(job_rx);
            drop(done_tx);

            for k in 0..batch.len() {
                job_tx.send(k).expect("workers outlive submission");
            }
            drop(job_tx);

            for (k, result) in done_rx {
                slots[k] = Some(result);
            }
        });
    }

    let mut out = Vec::with_capacity(batch.len());
    for (k, slot) in slots.into_iter().enumerate() {
        match slot.expect("every item processed") {
            Ok(pair) => out.push(pair),
            Err(source) => {
                return Err(Error::PipelineItem {
                    index: first_index + k,
                    source: Box::new(source),
                })
            }
        }
    }
    Ok(out)
}
