//! Minimal 3D complex FFT on x-fastest buffers, built on rustfft.
//!
//! Plans are cached in a process-wide planner behind a mutex; callers never
//! see it.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

type PlanKey = (usize, bool);

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<(FftPlanner<f64>, HashMap<PlanKey, Arc<dyn Fft<f64>>>)>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = cache.lock().expect("fft planner lock");
    let (planner, plans) = &mut *guard;
    plans
        .entry((len, inverse))
        .or_insert_with(|| {
            let direction = if inverse {
                FftDirection::Inverse
            } else {
                FftDirection::Forward
            };
            planner.plan_fft(len, direction)
        })
        .clone()
}

/// Smallest integer >= `n` whose prime factors are all in {2, 3, 5}.
pub(crate) fn next_fast_len(n: usize) -> usize {
    let mut candidate = n.max(1);
    loop {
        let mut m = candidate;
        for p in [2, 3, 5] {
            while m % p == 0 {
                m /= p;
            }
        }
        if m == 1 {
            return candidate;
        }
        candidate += 1;
    }
}

/// In-place 3D FFT over an x-fastest `dims` buffer. The inverse transform is
/// unnormalized; callers divide by the total length.
pub(crate) fn fft3_in_place(data: &mut [Complex64], dims: [usize; 3], inverse: bool) {
    let [nx, ny, nz] = dims;
    assert_eq!(data.len(), nx * ny * nz);

    // x lines are contiguous.
    let fx = plan(nx, inverse);
    for line in data.chunks_exact_mut(nx) {
        fx.process(line);
    }

    // y and z lines are strided; gather into scratch, transform, scatter.
    let fy = plan(ny, inverse);
    let mut scratch = vec![Complex64::default(); ny.max(nz)];
    for z in 0..nz {
        for x in 0..nx {
            let base = x + nx * ny * z;
            for y in 0..ny {
                scratch[y] = data[base + nx * y];
            }
            fy.process(&mut scratch[..ny]);
            for y in 0..ny {
                data[base + nx * y] = scratch[y];
            }
        }
    }

    let fz = plan(nz, inverse);
    let plane = nx * ny;
    for y in 0..ny {
        for x in 0..nx {
            let base = x + nx * y;
            for z in 0..nz {
                scratch[z] = data[base + plane * z];
            }
            fz.process(&mut scratch[..nz]);
            for z in 0..nz {
                data[base + plane * z] = scratch[z];
            }
        }
    }
}
