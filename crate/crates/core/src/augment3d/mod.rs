//! Randomized 3D augmentation: affine warp, occlusion, additive Gaussian
//! noise, and window/level normalization, evaluated in a single pass per
//! output voxel.
//!
//! Coordinates follow the pull-back convention: for output voxel `x` the
//! input is sampled at `A*x + b`, with voxel centers at integer coordinates.
//! The offset is derived as `b = c + d - A*c` where `c` is the volume center
//! and `d` the sampled displacement, which guarantees `A*c + b = c + d`:
//! the center of the image is displaced by exactly `d`.
//!
//! Per-voxel evaluation order: the occlusion prism is tested first, and an
//! occluded voxel is written as exactly 0 with every later step skipped,
//! including the input fetch. Otherwise the image is sampled trilinearly
//! (labels by nearest neighbor), noise keyed by the output voxel index is
//! added, and the window `[a, b]` clamps and rescales intensities to
//! `[0, 1]`. Labels see only the geometric steps, never noise or window.

mod affine;
pub mod noise;
mod pipeline;

pub use affine::Mat3;
pub use noise::{generate_noise, generate_noise_threaded, standard_normal};
pub use pipeline::{item_seed, pipeline_run, pipeline_run_from, pipeline_run_with};

use crate::error::{Error, Result};
use crate::volgrid::{Dtype, LabelMap, Volume};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Closed interval for uniform sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    pub fn fixed(v: f64) -> Self {
        Range { lo: v, hi: v }
    }

    fn well_ordered(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.gen_range(self.lo..=self.hi)
        }
    }
}

/// User-facing augmentation ranges; every parameter of a transform is drawn
/// uniformly from one of these. Missing JSON fields default to the identity;
/// unknown fields are rejected rather than silently ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSpec {
    /// Rotation angle range per axis, radians.
    pub rotation_rad: [Range; 3],
    /// Scale factor range per axis.
    pub scale: [Range; 3],
    /// Range for each of the six off-diagonal shear entries.
    pub shear: Range,
    /// Probability of reflecting about each axis.
    pub reflect_prob: [f64; 3],
    /// Range for each entry of a generic perturbation added to the identity.
    pub generic_affine: Range,
    /// Center displacement range per axis, voxels.
    pub displacement_vox: [Range; 3],
    /// Maximum occlusion prism height, voxels.
    pub occlusion_max_vox: f64,
    /// Noise standard deviation range, intensity units.
    pub noise_sigma: Range,
    /// Window lower limit range, HU.
    pub window_a_hu: Range,
    /// Window upper limit range, HU. Draws are rejected until `a < b`.
    pub window_b_hu: Range,
    /// Master seed; item k of a batch derives its own stream from it.
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec {
            rotation_rad: [Range::fixed(0.0); 3],
            scale: [Range::fixed(1.0); 3],
            shear: Range::fixed(0.0),
            reflect_prob: [0.0; 3],
            generic_affine: Range::fixed(0.0),
            displacement_vox: [Range::fixed(0.0); 3],
            occlusion_max_vox: 0.0,
            noise_sigma: Range::fixed(0.0),
            window_a_hu: Range::fixed(0.0),
            window_b_hu: Range::fixed(1.0),
            seed: 0,
        }
    }
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("rotation_rad[0]", &self.rotation_rad[0]),
            ("rotation_rad[1]", &self.rotation_rad[1]),
            ("rotation_rad[2]", &self.rotation_rad[2]),
            ("scale[0]", &self.scale[0]),
            ("scale[1]", &self.scale[1]),
            ("scale[2]", &self.scale[2]),
            ("shear", &self.shear),
            ("generic_affine", &self.generic_affine),
            ("displacement_vox[0]", &self.displacement_vox[0]),
            ("displacement_vox[1]", &self.displacement_vox[1]),
            ("displacement_vox[2]", &self.displacement_vox[2]),
            ("noise_sigma", &self.noise_sigma),
            ("window_a_hu", &self.window_a_hu),
            ("window_b_hu", &self.window_b_hu),
        ];
        for (name, r) in ranges {
            if !r.well_ordered() {
                return Err(Error::InvalidParameter(format!(
                    "{name} range [{}, {}] is not well-ordered",
                    r.lo, r.hi
                )));
            }
        }
        for (axis, &p) in self.reflect_prob.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "reflect_prob[{axis}] = {p} outside [0, 1]"
                )));
            }
        }
        if !(self.occlusion_max_vox >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "occlusion_max_vox = {} must be nonnegative",
                self.occlusion_max_vox
            )));
        }
        if self.noise_sigma.lo < 0.0 {
            return Err(Error::InvalidParameter(
                "noise sigma range must be nonnegative".into(),
            ));
        }
        if !(self.window_a_hu.lo < self.window_b_hu.hi) {
            return Err(Error::InvalidParameter(
                "window ranges cannot produce a < b".into(),
            ));
        }
        Ok(())
    }
}

/// A fully resolved transform: everything [`apply`] needs, and a
/// self-contained provenance record for reproducing one augmented pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformParams {
    /// Output-to-input coordinate matrix A.
    pub matrix: Mat3,
    /// Offset b of the coordinate map.
    pub offset: [f64; 3],
    /// The center displacement d that produced the offset.
    pub displacement: [f64; 3],
    /// Occlusion prism start z0 (may lie below 0; clipped by the volume).
    pub occlusion_start: f64,
    /// Occlusion prism height.
    pub occlusion_height: f64,
    pub noise_sigma: f64,
    /// Window limits (a, b), a < b.
    pub window: (f64, f64),
    pub noise_seed: u64,
}

impl TransformParams {
    pub fn identity() -> Self {
        TransformParams {
            matrix: Mat3::IDENTITY,
            offset: [0.0; 3],
            displacement: [0.0; 3],
            occlusion_start: -1.0,
            occlusion_height: 0.0,
            noise_sigma: 0.0,
            window: (0.0, 1.0),
            noise_seed: 0,
        }
    }
}

/// Volume center in voxel coordinates, `((nx-1)/2, (ny-1)/2, (nz-1)/2)`.
pub fn volume_center(dims: [usize; 3]) -> [f64; 3] {
    [
        (dims[0] as f64 - 1.0) / 2.0,
        (dims[1] as f64 - 1.0) / 2.0,
        (dims[2] as f64 - 1.0) / 2.0,
    ]
}

/// Draw one transform. The composition order of the affine factors is fixed:
/// `A = reflection * rot_z * rot_y * rot_x * shear * scale * generic`, and
/// parameters are drawn in a fixed sequence (rotations, scales, shears,
/// reflections, generic entries, displacement, occlusion, noise, window,
/// noise seed) so a given rng state always yields the same params.
pub fn sample_params<R: Rng>(
    spec: &AugmentSpec,
    dims: [usize; 3],
    rng: &mut R,
) -> Result<TransformParams> {
    spec.validate()?;

    let matrix = loop {
        let angles = [
            spec.rotation_rad[0].sample(rng),
            spec.rotation_rad[1].sample(rng),
            spec.rotation_rad[2].sample(rng),
        ];
        let scales = [
            spec.scale[0].sample(rng),
            spec.scale[1].sample(rng),
            spec.scale[2].sample(rng),
        ];
        let mut shear = Mat3::IDENTITY;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    shear.0[i][j] = spec.shear.sample(rng);
                }
            }
        }
        let flip = [
            rng.gen_bool(spec.reflect_prob[0]),
            rng.gen_bool(spec.reflect_prob[1]),
            rng.gen_bool(spec.reflect_prob[2]),
        ];
        let mut generic = Mat3::IDENTITY;
        for row in &mut generic.0 {
            for cell in row.iter_mut() {
                *cell += spec.generic_affine.sample(rng);
            }
        }

        let m = Mat3::reflection(flip)
            .mul(&Mat3::rotation_z(angles[2]))
            .mul(&Mat3::rotation_y(angles[1]))
            .mul(&Mat3::rotation_x(angles[0]))
            .mul(&shear)
            .mul(&Mat3::scaling(scales))
            .mul(&generic);
        if m.det() != 0.0 {
            break m;
        }
    };

    let displacement = [
        spec.displacement_vox[0].sample(rng),
        spec.displacement_vox[1].sample(rng),
        spec.displacement_vox[2].sample(rng),
    ];
    let center = volume_center(dims);
    let moved = matrix.apply(center);
    let offset = [
        center[0] + displacement[0] - moved[0],
        center[1] + displacement[1] - moved[1],
        center[2] + displacement[2] - moved[2],
    ];

    let occlusion_height = Range::new(0.0, spec.occlusion_max_vox).sample(rng);
    let z_max = dims[2] as f64 - 1.0;
    let occlusion_start = Range::new(-spec.occlusion_max_vox, z_max).sample(rng);

    let noise_sigma = spec.noise_sigma.sample(rng);

    let mut attempts = 0;
    let window = loop {
        let a = spec.window_a_hu.sample(rng);
        let b = spec.window_b_hu.sample(rng);
        if a < b {
            break (a, b);
        }
        attempts += 1;
        if attempts > 10_000 {
            return Err(Error::InvalidParameter(
                "window ranges rejected 10000 draws without producing a < b".into(),
            ));
        }
    };

    Ok(TransformParams {
        matrix,
        offset,
        displacement,
        occlusion_start,
        occlusion_height,
        noise_sigma,
        window,
        noise_seed: rng.gen(),
    })
}

/// One augmented training example plus the parameters that produced it.
#[derive(Debug, Clone)]
pub struct AugmentedPair {
    /// Float32 image with values in [0, 1].
    pub image: Volume,
    pub labels: LabelMap,
    pub params: TransformParams,
}

/// Knobs that are not part of the transform itself.
#[derive(Debug, Clone, Copy)]
pub struct ApplyOptions {
    /// Value written (on the normalized output scale) for voxels whose
    /// source coordinate falls outside the input volume.
    pub oob_fill: f64,
    /// Zero labels inside the occlusion prism instead of keeping the
    /// geometrically sampled class.
    pub occlude_labels: bool,
}

impl Default for ApplyOptions {
    fn default() -> Self {
        ApplyOptions {
            oob_fill: 0.0,
            occlude_labels: false,
        }
    }
}

/// Apply a transform with default options.
pub fn apply(image: &Volume, labels: &LabelMap, params: &TransformParams) -> Result<AugmentedPair> {
    apply_with_options(image, labels, params, &ApplyOptions::default())
}

/// Apply a transform to an image/label pair.
pub fn apply_with_options(
    image: &Volume,
    labels: &LabelMap,
    params: &TransformParams,
    options: &ApplyOptions,
) -> Result<AugmentedPair> {
    if image.geometry() != labels.geometry() {
        return Err(Error::GeometryMismatch(format!(
            "image {:?} vs labels {:?}",
            image.geometry(),
            labels.geometry()
        )));
    }
    if params.matrix.det() == 0.0 {
        return Err(Error::InvalidParameter("singular affine matrix".into()));
    }
    let (win_a, win_b) = params.window;
    if !(win_a < win_b) {
        return Err(Error::InvalidParameter(format!(
            "window ({win_a}, {win_b}) must satisfy a < b"
        )));
    }

    let geom = *image.geometry();
    let dims = geom.dims;
    let z_lo = params.occlusion_start;
    let z_hi = params.occlusion_start + params.occlusion_height;
    let sigma = params.noise_sigma;
    let win_scale = 1.0 / (win_b - win_a);
    let fill = options.oob_fill.clamp(0.0, 1.0) as f32;

    let mut out_image = vec![0.0f32; geom.len()];
    let mut out_labels = vec![0u8; geom.len()];

    let mut idx = 0usize;
    for z in 0..dims[2] {
        let occluded_plane = z as f64 >= z_lo && z as f64 <= z_hi;
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let coord = {
                    let p = params.matrix.apply([x as f64, y as f64, z as f64]);
                    [
                        p[0] + params.offset[0],
                        p[1] + params.offset[1],
                        p[2] + params.offset[2],
                    ]
                };

                // Labels take the geometric steps only.
                if !(occluded_plane && options.occlude_labels) {
                    out_labels[idx] = sample_label_nearest(labels, coord);
                }

                if occluded_plane {
                    // Exactly zero; noise, window and the input fetch are
                    // all skipped.
                    idx += 1;
                    continue;
                }

                out_image[idx] = match sample_trilinear(image, coord) {
                    Some(mut v) => {
                        if sigma != 0.0 {
                            v += sigma * standard_normal(params.noise_seed, idx as u64);
                        }
                        ((v.clamp(win_a, win_b) - win_a) * win_scale) as f32
                    }
                    None => fill,
                };
                idx += 1;
            }
        }
    }

    let image = Volume::new(geom, Dtype::F32, out_image)?;
    let labels = LabelMap::new(geom, out_labels)?;
    Ok(AugmentedPair {
        image,
        labels,
        params: params.clone(),
    })
}

/// Trilinear sample at `coord`; `None` outside `[0, dim-1]` on any axis.
/// Exact at integer coordinates.
fn sample_trilinear(volume: &Volume, coord: [f64; 3]) -> Option<f64> {
    let dims = volume.dims();
    for k in 0..3 {
        if !(coord[k] >= 0.0 && coord[k] <= (dims[k] - 1) as f64) {
            return None;
        }
    }
    let (x0, fx) = floor_frac(coord[0], dims[0]);
    let (y0, fy) = floor_frac(coord[1], dims[1]);
    let (z0, fz) = floor_frac(coord[2], dims[2]);
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
    Some(c0 * (1.0 - fz) + c1 * fz)
}

fn floor_frac(c: f64, dim: usize) -> (usize, f64) {
    let floor = c.floor();
    let mut i = floor as usize;
    let mut frac = c - floor;
    if i >= dim - 1 {
        i = dim - 1;
        frac = 0.0;
    }
    (i, frac)
}

fn sample_label_nearest(labels: &LabelMap, coord: [f64; 3]) -> u8 {
    let dims = labels.dims();
    let mut rounded = [0usize; 3];
    for k in 0..3 {
        let r = coord[k].round();
        if r < 0.0 || r > (dims[k] - 1) as f64 {
            return 0;
        }
        rounded[k] = r as usize;
    }
    labels.data()[labels.geometry().index(rounded[0], rounded[1], rounded[2])]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volgrid::Geometry;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn geom(dims: [usize; 3]) -> Geometry {
        Geometry::new(dims, [1.0; 3]).unwrap()
    }

    fn normalized_random_pair(dims: [usize; 3], seed: u64) -> (Volume, LabelMap) {
        use rand::Rng;
        let g = geom(dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f32> = (0..g.len()).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let labels: Vec<u8> = (0..g.len()).map(|_| rng.gen_range(0..6)).collect();
        (
            Volume::new(g, Dtype::F32, data).unwrap(),
            LabelMap::new(g, labels).unwrap(),
        )
    }

    #[test]
    fn degenerate_spec_samples_identity() {
        let spec = AugmentSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = sample_params(&spec, [10, 10, 10], &mut rng).unwrap();
        assert_eq!(p.matrix, Mat3::IDENTITY);
        assert_eq!(p.offset, [0.0; 3]);
        assert_eq!(p.displacement, [0.0; 3]);
        assert_eq!(p.occlusion_height, 0.0);
        assert_eq!(p.noise_sigma, 0.0);
    }

    #[test]
    fn displacement_becomes_the_offset_under_identity() {
        let spec = AugmentSpec {
            displacement_vox: [Range::fixed(5.0), Range::fixed(0.0), Range::fixed(0.0)],
            ..AugmentSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = sample_params(&spec, [11, 11, 11], &mut rng).unwrap();
        assert_eq!(p.offset, [5.0, 0.0, 0.0]);
        let c = volume_center([11, 11, 11]);
        let mapped = p.matrix.apply(c);
        assert_eq!(
            [
                mapped[0] + p.offset[0],
                mapped[1] + p.offset[1],
                mapped[2] + p.offset[2]
            ],
            [c[0] + 5.0, c[1], c[2]]
        );
    }

    #[test]
    fn reflection_guarantee_holds() {
        let spec = AugmentSpec {
            reflect_prob: [1.0, 0.0, 0.0],
            displacement_vox: [Range::fixed(2.0), Range::fixed(-1.0), Range::fixed(0.5)],
            ..AugmentSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dims = [16, 12, 9];
        let p = sample_params(&spec, dims, &mut rng).unwrap();
        assert_eq!(p.matrix, Mat3::scaling([-1.0, 1.0, 1.0]));
        let c = volume_center(dims);
        let mapped = p.matrix.apply(c);
        for k in 0..3 {
            let lhs = mapped[k] + p.offset[k];
            let rhs = c[k] + p.displacement[k];
            assert!((lhs - rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn affine_guarantee_over_random_specs() {
        let spec = AugmentSpec {
            rotation_rad: [Range::new(-0.4, 0.4); 3],
            scale: [Range::new(0.8, 1.2); 3],
            shear: Range::new(-0.1, 0.1),
            reflect_prob: [0.5; 3],
            generic_affine: Range::new(-0.05, 0.05),
            displacement_vox: [Range::new(-8.0, 8.0); 3],
            occlusion_max_vox: 20.0,
            noise_sigma: Range::new(0.0, 50.0),
            window_a_hu: Range::new(-1000.0, 0.0),
            window_b_hu: Range::new(-500.0, 1500.0),
            seed: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let dims = [120, 120, 160];
        let c = volume_center(dims);
        for _ in 0..500 {
            let p = sample_params(&spec, dims, &mut rng).unwrap();
            let mapped = p.matrix.apply(c);
            let err = (0..3)
                .map(|k| (mapped[k] + p.offset[k] - (c[k] + p.displacement[k])).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(err < 1e-9, "center guarantee violated: {err}");
            assert!(p.occlusion_height >= 0.0 && p.occlusion_height <= 20.0);
            assert!(p.occlusion_start >= -20.0 && p.occlusion_start <= 159.0);
            assert!(p.window.0 < p.window.1);
            assert!(p.matrix.det() != 0.0);
        }
    }

    #[test]
    fn identity_apply_is_exact() {
        let (image, labels) = normalized_random_pair([7, 6, 5], 3);
        let out = apply(&image, &labels, &TransformParams::identity()).unwrap();
        assert_eq!(out.image.data(), image.data());
        assert_eq!(out.labels.data(), labels.data());
    }

    #[test]
    fn integer_translation_shifts_exactly() {
        let (image, labels) = normalized_random_pair([8, 8, 8], 4);
        let mut params = TransformParams::identity();
        params.offset = [1.0, 0.0, 0.0];
        let out = apply(&image, &labels, &params).unwrap();
        // Output voxel x samples input x+1; the final x column is OOB.
        for z in 0..8 {
            for y in 0..8 {
                for x in 0..7 {
                    assert_eq!(out.image.at(x, y, z), image.at(x + 1, y, z));
                    assert_eq!(
                        out.labels.data()[out.labels.geometry().index(x, y, z)],
                        labels.data()[labels.geometry().index(x + 1, y, z)]
                    );
                }
                assert_eq!(out.image.at(7, y, z), 0.0);
                assert_eq!(out.labels.data()[out.labels.geometry().index(7, y, z)], 0);
            }
        }
    }

    #[test]
    fn quarter_turn_is_an_exact_permutation() {
        let dims = [12, 12, 10];
        let (image, labels) = normalized_random_pair(dims, 5);
        // Exact 90-degree rotation about z as a signed permutation matrix.
        let mut params = TransformParams::identity();
        params.matrix = Mat3([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        let c = volume_center(dims);
        let mc = params.matrix.apply(c);
        params.offset = [c[0] - mc[0], c[1] - mc[1], c[2] - mc[2]];

        let out = apply(&image, &labels, &params).unwrap();
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let src = params.matrix.apply([x as f64, y as f64, z as f64]);
                    let sx = (src[0] + params.offset[0]).round() as usize;
                    let sy = (src[1] + params.offset[1]).round() as usize;
                    let sz = (src[2] + params.offset[2]).round() as usize;
                    assert_eq!(out.image.at(x, y, z), image.at(sx, sy, sz));
                }
            }
        }
    }

    #[test]
    fn window_maps_40_to_half() {
        let g = geom([4, 4, 4]);
        let image = Volume::filled(g, Dtype::F32, 40.0);
        let labels = LabelMap::zeros(g);
        let mut params = TransformParams::identity();
        params.window = (-150.0, 230.0);
        let out = apply(&image, &labels, &params).unwrap();
        for &v in out.image.data() {
            assert_eq!(v, 0.5);
        }
    }

    #[test]
    fn window_output_is_monotone_and_clamped() {
        let g = geom([5, 1, 1]);
        let image = Volume::new(g, Dtype::F32, vec![-500.0, -150.0, 40.0, 230.0, 900.0]).unwrap();
        let labels = LabelMap::zeros(g);
        let mut params = TransformParams::identity();
        params.window = (-150.0, 230.0);
        let out = apply(&image, &labels, &params).unwrap();
        let d = out.image.data();
        assert_eq!(d[0], 0.0);
        assert_eq!(d[1], 0.0);
        assert_eq!(d[3], 1.0);
        assert_eq!(d[4], 1.0);
        for w in d.windows(2) {
            assert!(w[0] <= w[1]);
        }
        assert!(d.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn full_height_occlusion_zeroes_everything() {
        let (image, labels) = normalized_random_pair([6, 6, 6], 6);
        let mut params = TransformParams::identity();
        params.occlusion_start = 0.0;
        params.occlusion_height = 6.0;
        let out = apply(&image, &labels, &params).unwrap();
        assert!(out.image.data().iter().all(|&v| v == 0.0));
        // Labels keep their geometric sample by default.
        assert_eq!(out.labels.data(), labels.data());
        // ... unless occlusion is propagated to them.
        let opts = ApplyOptions {
            occlude_labels: true,
            ..Default::default()
        };
        let out = apply_with_options(&image, &labels, &params, &opts).unwrap();
        assert!(out.labels.data().iter().all(|&v| v == 0));
    }

    #[test]
    fn occlusion_region_is_input_independent() {
        let (image_a, labels) = normalized_random_pair([6, 6, 8], 7);
        let (image_b, _) = normalized_random_pair([6, 6, 8], 8);
        let mut params = TransformParams::identity();
        params.occlusion_start = 2.0;
        params.occlusion_height = 3.0;
        params.noise_sigma = 0.2;
        params.noise_seed = 55;
        let out_a = apply(&image_a, &labels, &params).unwrap();
        let out_b = apply(&image_b, &labels, &params).unwrap();
        for z in 2..=5usize {
            for y in 0..6 {
                for x in 0..6 {
                    assert_eq!(out_a.image.at(x, y, z), 0.0);
                    assert_eq!(out_b.image.at(x, y, z), 0.0);
                }
            }
        }
        // Prism start below the volume clips cleanly.
        params.occlusion_start = -2.0;
        params.occlusion_height = 3.0;
        params.noise_sigma = 0.0;
        let out = apply(&image_a, &labels, &params).unwrap();
        for y in 0..6 {
            for x in 0..6 {
                assert_eq!(out.image.at(x, y, 0), 0.0);
                assert_eq!(out.image.at(x, y, 1), 0.0);
                assert_eq!(out.image.at(x, y, 2), image_a.at(x, y, 2));
            }
        }
    }

    #[test]
    fn labels_are_photometric_invariant() {
        let (image, labels) = normalized_random_pair([9, 9, 9], 9);
        let spec = AugmentSpec {
            rotation_rad: [Range::new(-0.3, 0.3); 3],
            displacement_vox: [Range::new(-2.0, 2.0); 3],
            noise_sigma: Range::new(5.0, 10.0),
            window_a_hu: Range::new(-200.0, -100.0),
            window_b_hu: Range::new(100.0, 300.0),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut params = sample_params(&spec, [9, 9, 9], &mut rng).unwrap();
        let base = apply(&image, &labels, &params).unwrap();
        params.noise_sigma = 0.0;
        params.window = (-1000.0, 1500.0);
        params.noise_seed = 777;
        let photo = apply(&image, &labels, &params).unwrap();
        assert_eq!(base.labels.data(), photo.labels.data());
    }

    #[test]
    fn oob_fill_value_is_used() {
        let (image, labels) = normalized_random_pair([5, 5, 5], 11);
        let mut params = TransformParams::identity();
        params.offset = [10.0, 0.0, 0.0];
        let opts = ApplyOptions {
            oob_fill: 0.25,
            ..Default::default()
        };
        let out = apply_with_options(&image, &labels, &params, &opts).unwrap();
        assert!(out.image.data().iter().all(|&v| v == 0.25));
        assert!(out.labels.data().iter().all(|&v| v == 0));
    }

    #[test]
    fn singular_matrix_rejected() {
        let (image, labels) = normalized_random_pair([4, 4, 4], 12);
        let mut params = TransformParams::identity();
        params.matrix = Mat3::scaling([0.0, 1.0, 1.0]);
        assert!(apply(&image, &labels, &params).is_err());
    }

    #[test]
    fn geometry_mismatch_rejected() {
        let (image, _) = normalized_random_pair([4, 4, 4], 13);
        let labels = LabelMap::zeros(geom([4, 4, 5]));
        assert!(matches!(
            apply(&image, &labels, &TransformParams::identity()),
            Err(Error::GeometryMismatch(_))
        ));
    }

    #[test]
    fn spec_validation_catches_bad_ranges() {
        let mut spec = AugmentSpec::default();
        spec.noise_sigma = Range::new(2.0, 1.0);
        assert!(spec.validate().is_err());

        let mut spec = AugmentSpec::default();
        spec.reflect_prob = [0.0, 1.5, 0.0];
        assert!(spec.validate().is_err());

        let mut spec = AugmentSpec::default();
        spec.window_a_hu = Range::fixed(5.0);
        spec.window_b_hu = Range::fixed(5.0);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = AugmentSpec {
            rotation_rad: [Range::new(-0.1, 0.1); 3],
            occlusion_max_vox: 12.0,
            seed: 99,
            ..Default::default()
        };
        let text = serde_json::to_string(&spec).unwrap();
        let back: AugmentSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);

        // Partial specs default the rest; misspelled fields are rejected.
        let partial: AugmentSpec = serde_json::from_str(r#"{"seed": 3}"#).unwrap();
        assert_eq!(partial.scale, [Range::fixed(1.0); 3]);
        assert!(serde_json::from_str::<AugmentSpec>(r#"{"rotaton": 1}"#).is_err());
    }
}
