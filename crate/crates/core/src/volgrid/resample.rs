//! Anti-aliased resampling to an isotropic target resolution.
//!
//! Images are lowpass-filtered with a separable Gaussian before
//! interpolation; the per-axis smoothing factor is derived from the ratio of
//! target to source spacing, `sigma_k = (1/3) * max(r/u_k - 1, 0)`, so no
//! smoothing happens when the grid is not being coarsened along an axis.
//! Label volumes use nearest-neighbor interpolation and are never smoothed.

use super::{Dtype, Geometry, Volume};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// For images; output dtype becomes float32.
    Trilinear,
    /// For labels; values pass through untouched.
    Nearest,
}

/// Per-axis Gaussian smoothing factors for resampling `spacing_mm` to `r`.
pub fn smoothing_sigmas(spacing_mm: [f64; 3], target_res_mm: f64) -> [f64; 3] {
    let mut s = [0.0; 3];
    for k in 0..3 {
        s[k] = (target_res_mm / spacing_mm[k] - 1.0).max(0.0) / 3.0;
    }
    s
}

/// Output dimensions after resampling: `round(dim_k * u_k / r)`, clamped to
/// at least 1 voxel per axis.
pub fn resampled_dims(dims: [usize; 3], spacing_mm: [f64; 3], target_res_mm: f64) -> [usize; 3] {
    let mut out = [1usize; 3];
    for k in 0..3 {
        let ideal = (dims[k] as f64 * spacing_mm[k] / target_res_mm).round() as i64;
        if ideal < 1 {
            log::warn!(
                "axis {k}: {} voxels at {} mm collapse below one voxel at {} mm; clamping to 1",
                dims[k],
                spacing_mm[k],
                target_res_mm
            );
        }
        out[k] = ideal.max(1) as usize;
    }
    out
}

/// Resample a volume to isotropic `target_res_mm` spacing.
pub fn resample(
    volume: &Volume,
    target_res_mm: f64,
    interpolation: Interpolation,
) -> Result<Volume> {
    if !(target_res_mm > 0.0) || !target_res_mm.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "target resolution must be positive, got {target_res_mm}"
        )));
    }
    let in_dims = volume.dims();
    let spacing = volume.spacing_mm();
    let out_dims = resampled_dims(in_dims, spacing, target_res_mm);
    let out_geom = Geometry::new(out_dims, [target_res_mm; 3])?;

    let (source, out_dtype) = match interpolation {
        Interpolation::Trilinear => {
            let sigmas = smoothing_sigmas(spacing, target_res_mm);
            (gaussian_smooth(volume, sigmas), Dtype::F32)
        }
        Interpolation::Nearest => (volume.clone(), volume.dtype()),
    };

    let mut out = vec![0.0f32; out_geom.len()];
    // Output voxel i sits at physical position i*r along axis k, which is
    // input coordinate i*r/u_k; boundary coordinates clamp (edge replication).
    let scale = [
        target_res_mm / spacing[0],
        target_res_mm / spacing[1],
        target_res_mm / spacing[2],
    ];
    for z in 0..out_dims[2] {
        let cz = z as f64 * scale[2];
        for y in 0..out_dims[1] {
            let cy = y as f64 * scale[1];
            for x in 0..out_dims[0] {
                let cx = x as f64 * scale[0];
                let v = match interpolation {
                    Interpolation::Trilinear => sample_trilinear_clamped(&source, cx, cy, cz),
                    Interpolation::Nearest => sample_nearest(&source, cx, cy, cz),
                };
                out[out_geom.index(x, y, z)] = v;
            }
        }
    }
    Volume::new(out_geom, out_dtype, out)
}

/// Separable Gaussian smoothing with kernel `exp(-x^2 / sigma^2)`, truncated
/// at 4 sigma (odd length), normalized to sum 1, edge-replicated boundaries.
pub fn gaussian_smooth(volume: &Volume, sigmas: [f64; 3]) -> Volume {
    let mut current = volume.clone();
    for axis in 0..3 {
        if sigmas[axis] > 0.0 {
            current = smooth_axis(&current, axis, sigmas[axis]);
        }
    }
    current
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil().max(1.0) as i64;
    let mut weights: Vec<f64> = (-radius..=radius)
        .map(|j| (-((j * j) as f64) / (sigma * sigma)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    weights
}

fn smooth_axis(volume: &Volume, axis: usize, sigma: f64) -> Volume {
    let geom = *volume.geometry();
    let dims = geom.dims;
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as i64;
    let n_axis = dims[axis] as i64;
    let src = volume.data();
    let mut dst = vec![0.0f32; src.len()];

    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let pos = [x as i64, y as i64, z as i64];
                let mut acc = 0.0f64;
                for (ki, &w) in kernel.iter().enumerate() {
                    let mut p = pos;
                    p[axis] = (pos[axis] + ki as i64 - radius).clamp(0, n_axis - 1);
                    acc +=
                        w * f64::from(src[geom.index(p[0] as usize, p[1] as usize, p[2] as usize)]);
                }
                dst[geom.index(x, y, z)] = acc as f32;
            }
        }
    }
    Volume::new(geom, volume.dtype(), dst).expect("same geometry")
}

fn sample_trilinear_clamped(volume: &Volume, x: f64, y: f64, z: f64) -> f32 {
    let dims = volume.dims();
    let cx = x.clamp(0.0, (dims[0] - 1) as f64);
    let cy = y.clamp(0.0, (dims[1] - 1) as f64);
    let cz = z.clamp(0.0, (dims[2] - 1) as f64);

    let (x0, fx) = split_coord(cx, dims[0]);
    let (y0, fy) = split_coord(cy, dims[1]);
    let (z0, fz) = split_coord(cz, dims[2]);
    let x1 = (x0 + 1).min(dims[0] - 1);
    let y1 = (y0 + 1).min(dims[1] - 1);
    let z1 = (z0 + 1).min(dims[2] - 1);

    let g = volume.geometry();
    let d = volume.data();
    let at = |x: usize, y: usize, z: usize| f64::from(d[g.index(x, y, z)]);

    let c00 = at(x0, y0, z0) * (1.0 - fx) + at(x1, y0, z0) * fx;
    let c10 = at(x0, y1, z0) * (1.0 - fx) + at(x1, y1, z0) * fx;
    let c01 = at(x0, y0, z1) * (1.0 - fx) + at(x1, y0, z1) * fx;
    let c11 = at(x0, y1, z1) * (1.0 - fx) + at(x1, y1, z1) * fx;
    let c0 = c00 * (1.0 - fy) + c10 * fy;
    let c1 = c01 * (1.0 - fy) + c11 * fy;
    (c0 * (1.0 - fz) + c1 * fz) as f32
}

fn split_coord(c: f64, dim: usize) -> (usize, f64) {
    let floor = c.floor();
    let mut i = floor as usize;
    let mut frac = c - floor;
    if i >= dim - 1 {
        i = dim - 1;
        frac = 0.0;
    }
    (i, frac)
}

fn sample_nearest(volume: &Volume, x: f64, y: f64, z: f64) -> f32 {
    let dims = volume.dims();
    let xi = (x.round() as i64).clamp(0, dims[0] as i64 - 1) as usize;
    let yi = (y.round() as i64).clamp(0, dims[1] as i64 - 1) as usize;
    let zi = (z.round() as i64).clamp(0, dims[2] as i64 - 1) as usize;
    volume.data()[volume.geometry().index(xi, yi, zi)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sigma_formula() {
        assert_eq!(smoothing_sigmas([1.0; 3], 3.0), [2.0 / 3.0; 3]);
        assert_eq!(smoothing_sigmas([3.0; 3], 3.0), [0.0; 3]);
        // Upsampling never smooths.
        assert_eq!(
            smoothing_sigmas([4.0, 2.0, 1.0], 2.0),
            [0.0, 0.0, 1.0 / 3.0]
        );
    }

    #[test]
    fn dims_formula() {
        assert_eq!(
            resampled_dims([240, 240, 480], [1.5; 3], 3.0),
            [120, 120, 240]
        );
        assert_eq!(resampled_dims([10, 10, 10], [1.0; 3], 3.0), [3, 3, 3]);
        // Collapse clamps to one voxel.
        assert_eq!(resampled_dims([2, 2, 2], [1.0; 3], 10.0), [1, 1, 1]);
    }

    #[test]
    fn constant_volume_stays_constant() {
        let g = Geometry::new([6, 6, 6], [3.0; 3]).unwrap();
        let v = Volume::filled(g, Dtype::F32, 7.0);
        let out = resample(&v, 3.0, Interpolation::Trilinear).unwrap();
        assert_eq!(out.dims(), [6, 6, 6]);
        assert!(out.data().iter().all(|&x| x == 7.0));
        // Even when smoothing kicks in, a constant is preserved up to
        // normalization rounding.
        let coarse = resample(&v, 6.0, Interpolation::Trilinear).unwrap();
        assert_eq!(coarse.dims(), [3, 3, 3]);
        for &x in coarse.data() {
            assert!((x - 7.0).abs() < 1e-4, "{x}");
        }
    }

    #[test]
    fn identity_at_matching_isotropic_resolution() {
        let g = Geometry::new([5, 4, 3], [2.0; 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data: Vec<f32> = (0..g.len()).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let v = Volume::new(g, Dtype::F32, data).unwrap();
        let out = resample(&v, 2.0, Interpolation::Trilinear).unwrap();
        assert_eq!(out.dims(), v.dims());
        assert_eq!(out.data(), v.data());
    }

    #[test]
    fn nearest_preserves_label_values() {
        let g = Geometry::new([9, 9, 9], [1.0; 3]).unwrap();
        let data: Vec<f32> = (0..g.len())
            .map(|i| if i % 7 == 0 { 5.0 } else { 0.0 })
            .collect();
        let v = Volume::new(g, Dtype::U8, data).unwrap();
        let out = resample(&v, 3.0, Interpolation::Nearest).unwrap();
        assert_eq!(out.dims(), [3, 3, 3]);
        assert_eq!(out.dtype(), Dtype::U8);
        assert!(out.data().iter().all(|&x| x == 0.0 || x == 5.0));
    }

    #[test]
    fn rejects_nonpositive_resolution() {
        let g = Geometry::new([2, 2, 2], [1.0; 3]).unwrap();
        let v = Volume::zeros(g, Dtype::F32);
        assert!(resample(&v, 0.0, Interpolation::Trilinear).is_err());
        assert!(resample(&v, -1.0, Interpolation::Trilinear).is_err());
    }

    #[test]
    fn kernel_is_odd_normalized_and_symmetric() {
        let k = gaussian_kernel(2.0 / 3.0);
        assert_eq!(k.len() % 2, 1);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..k.len() / 2 {
            assert_eq!(k[i], k[k.len() - 1 - i]);
        }
    }
}
