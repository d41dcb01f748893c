//! Counter-based Gaussian noise.
//!
//! Every voxel's noise value is a pure function of (seed, voxel index), so
//! the field is identical no matter how the computation is split across
//! threads, and no generator state is carried between voxels. Two mixed
//! 64-bit words per voxel feed a Box-Muller transform.

use crate::volgrid::{Dtype, Geometry, Volume};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Keyed counter PRF: word `counter` of the stream identified by `seed`.
#[inline]
pub(crate) fn prf(seed: u64, counter: u64) -> u64 {
    mix64(seed.wrapping_add(counter.wrapping_mul(GOLDEN_GAMMA)))
}

/// Standard normal variate for one voxel, keyed by (seed, linear index).
#[inline]
pub fn standard_normal(seed: u64, index: u64) -> f64 {
    let a = prf(seed, 2 * index);
    let b = prf(seed, 2 * index + 1);
    // u1 in (0, 1] keeps the log finite; u2 in [0, 1).
    let u1 = ((a >> 11) as f64 + 1.0) / (1u64 << 53) as f64;
    let u2 = (b >> 11) as f64 / (1u64 << 53) as f64;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Deterministic IID Gaussian noise field with standard deviation `sigma`.
pub fn generate_noise(dims: [usize; 3], sigma: f64, seed: u64) -> Volume {
    generate_noise_threaded(dims, sigma, seed, 1)
}

/// Same field as [`generate_noise`], computed on `threads` worker threads.
/// The output is bit-identical for any thread count.
pub fn generate_noise_threaded(dims: [usize; 3], sigma: f64, seed: u64, threads: usize) -> Volume {
    let geometry = Geometry {
        dims,
        spacing_mm: [1.0; 3],
    };
    let n = geometry.len();
    let mut data = vec![0.0f32; n];
    if sigma != 0.0 {
        let threads = threads.max(1).min(n.max(1));
        if threads <= 1 {
            for (i, v) in data.iter_mut().enumerate() {
                *v = (sigma * standard_normal(seed, i as u64)) as f32;
            }
        } else {
            let chunk = n.div_ceil(threads);
            std::thread::scope(|s| {
                for (c, slice) in data.chunks_mut(chunk).enumerate() {
                    let start = c * chunk;
                    s.spawn(move || {
                        for (off, v) in slice.iter_mut().enumerate() {
                            *v = (sigma * standard_normal(seed, (start + off) as u64)) as f32;
                        }
                    });
                }
            });
        }
    }
    Volume::new(geometry, Dtype::F32, data).expect("matching length")
}
