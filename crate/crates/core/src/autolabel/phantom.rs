//! Synthetic CT phantoms with known ground truth.
//!
//! A phantom is a soft-tissue body ellipsoid in background air, holding two
//! air-filled lung ellipsoids, a connected skeleton (two marrow-filled femur
//! rods joined by a pelvis bar), and optional distractors: a small air
//! pocket that erosion must discard, a bright contrast blob disconnected
//! from the skeleton, and an exam-table slab floating in the air. Geometry
//! lives in voxel coordinates; all shapes are checked against the volume
//! bounds and lungs against the body.

use crate::augment3d::standard_normal;
use crate::error::{Error, Result};
use crate::volgrid::{Dtype, Geometry, Mask, Volume};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct Ellipsoid {
    pub center: [f64; 3],
    pub semi_axes: [f64; 3],
}

impl Ellipsoid {
    pub fn contains(&self, p: [f64; 3]) -> bool {
        let mut q = 0.0;
        for k in 0..3 {
            let t = (p[k] - self.center[k]) / self.semi_axes[k];
            q += t * t;
        }
        q <= 1.0
    }

    fn within_bounds(&self, dims: [usize; 3]) -> bool {
        (0..3).all(|k| {
            self.center[k] - self.semi_axes[k] >= 0.0
                && self.center[k] + self.semi_axes[k] <= dims[k] as f64 - 1.0
        })
    }

    /// Sufficient condition for `self` lying entirely inside `outer`.
    fn inside(&self, outer: &Ellipsoid) -> bool {
        let mut q = 0.0;
        for k in 0..3 {
            let t =
                ((self.center[k] - outer.center[k]).abs() + self.semi_axes[k]) / outer.semi_axes[k];
            q += t * t;
        }
        q <= 1.0
    }
}

/// Capsule-shaped bone: hard shell outside `marrow_radius`, marrow inside.
#[derive(Debug, Clone, Copy)]
pub struct BoneRod {
    pub start: [f64; 3],
    pub end: [f64; 3],
    pub radius: f64,
    pub marrow_radius: f64,
}

impl BoneRod {
    fn distance(&self, p: [f64; 3]) -> f64 {
        let d = [
            self.end[0] - self.start[0],
            self.end[1] - self.start[1],
            self.end[2] - self.start[2],
        ];
        let w = [
            p[0] - self.start[0],
            p[1] - self.start[1],
            p[2] - self.start[2],
        ];
        let len2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        let t = if len2 == 0.0 {
            0.0
        } else {
            ((w[0] * d[0] + w[1] * d[1] + w[2] * d[2]) / len2).clamp(0.0, 1.0)
        };
        let mut q = 0.0;
        for k in 0..3 {
            let diff = w[k] - t * d[k];
            q += diff * diff;
        }
        q.sqrt()
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        self.distance(p) <= self.radius
    }

    fn in_marrow(&self, p: [f64; 3]) -> bool {
        self.distance(p) <= self.marrow_radius
    }

    fn within_bounds(&self, dims: [usize; 3]) -> bool {
        [self.start, self.end].iter().all(|e| {
            (0..3).all(|k| e[k] - self.radius >= 0.0 && e[k] + self.radius <= dims[k] as f64 - 1.0)
        })
    }
}

/// Tissue intensities in HU.
#[derive(Debug, Clone, Copy)]
pub struct PhantomIntensities {
    pub background_air: f32,
    pub tissue: f32,
    pub lung_air: f32,
    pub bone_shell: f32,
    pub marrow: f32,
    pub contrast: f32,
    pub table: f32,
}

impl Default for PhantomIntensities {
    fn default() -> Self {
        PhantomIntensities {
            background_air: -1000.0,
            tissue: 40.0,
            lung_air: -800.0,
            bone_shell: 300.0,
            marrow: 100.0,
            contrast: 350.0,
            table: 100.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub body: Ellipsoid,
    pub lungs: Vec<Ellipsoid>,
    pub bones: Vec<BoneRod>,
    /// Small interior air pockets that are not lungs (erosion fodder).
    pub air_pockets: Vec<Ellipsoid>,
    /// Bright blobs (contrast-filled organs) disconnected from the skeleton.
    pub contrast_blobs: Vec<Ellipsoid>,
    pub table: bool,
    pub noise_sigma: f64,
    pub intensities: PhantomIntensities,
}

/// Ground-truth masks matching the emitted intensities.
#[derive(Debug, Clone)]
pub struct PhantomTruth {
    pub lungs: Mask,
    pub bones: Mask,
}

impl PhantomSpec {
    /// A fixed, solvable mid-size phantom.
    pub fn default_spec() -> PhantomSpec {
        PhantomSpec::randomized(0)
    }

    /// A randomized phantom whose geometry stays within safe margins: lungs
    /// big enough to survive the 10 mm erosion, bones connected and clear of
    /// the lungs, distractors clear of everything.
    pub fn randomized(seed: u64) -> PhantomSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nx = rng.gen_range(56..=68) as f64;
        let ny = rng.gen_range(56..=68) as f64;
        let nz = rng.gen_range(72..=88) as f64;
        let dims = [nx as usize, ny as usize, nz as usize];
        let (cx, cy, cz) = (nx / 2.0, ny / 2.0, nz / 2.0);

        let body = Ellipsoid {
            center: [cx, cy, cz],
            semi_axes: [
                0.44 * nx * rng.gen_range(0.97..=1.0),
                0.42 * ny * rng.gen_range(0.97..=1.0),
                0.48 * nz,
            ],
        };

        let lung_dz = rng.gen_range(0.13..=0.16) * nz;
        let mut lungs = Vec::new();
        for side in [-1.0, 1.0] {
            lungs.push(Ellipsoid {
                center: [
                    cx + side * rng.gen_range(0.14..=0.17) * nx,
                    cy + rng.gen_range(-0.02..=0.02) * ny,
                    cz + lung_dz,
                ],
                semi_axes: [
                    rng.gen_range(0.08..=0.10) * nx,
                    rng.gen_range(0.10..=0.13) * ny,
                    rng.gen_range(0.12..=0.14) * nz,
                ],
            });
        }

        let femur_dx = rng.gen_range(0.12..=0.15) * nx;
        let femur_y = cy + rng.gen_range(-0.02..=0.02) * ny;
        let z_low = 0.12 * nz;
        let z_high = 0.34 * nz;
        let mut bones = Vec::new();
        for side in [-1.0, 1.0] {
            bones.push(BoneRod {
                start: [cx + side * femur_dx, femur_y, z_low],
                end: [cx + side * femur_dx, femur_y, z_high],
                radius: rng.gen_range(4.5..=5.5),
                marrow_radius: rng.gen_range(2.0..=2.5),
            });
        }
        // Pelvis bar joining the femurs keeps the skeleton one component.
        bones.push(BoneRod {
            start: [cx - femur_dx, femur_y, 0.32 * nz],
            end: [cx + femur_dx, femur_y, 0.32 * nz],
            radius: rng.gen_range(4.0..=4.5),
            marrow_radius: 0.0,
        });

        let air_pockets = vec![Ellipsoid {
            center: [
                cx + rng.gen_range(0.05..=0.08) * nx,
                cy + 0.25 * ny,
                0.60 * nz,
            ],
            semi_axes: [1.1; 3],
        }];
        let contrast_blobs = vec![Ellipsoid {
            center: [cx, cy - 0.22 * ny, 0.55 * nz],
            semi_axes: [rng.gen_range(2.5..=3.5); 3],
        }];

        PhantomSpec {
            dims,
            spacing_mm: [3.0; 3],
            body,
            lungs,
            bones,
            air_pockets,
            contrast_blobs,
            table: seed % 2 == 0,
            noise_sigma: rng.gen_range(0.0..=18.0),
            intensities: PhantomIntensities::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.body.within_bounds(self.dims) {
            return Err(Error::InvalidParameter("body out of bounds".into()));
        }
        for (i, lung) in self.lungs.iter().enumerate() {
            if !lung.within_bounds(self.dims) {
                return Err(Error::InvalidParameter(format!("lung {i} out of bounds")));
            }
            if !lung.inside(&self.body) {
                return Err(Error::InvalidParameter(format!(
                    "lung {i} not inside the body"
                )));
            }
        }
        for (i, rod) in self.bones.iter().enumerate() {
            if !rod.within_bounds(self.dims) {
                return Err(Error::InvalidParameter(format!("bone {i} out of bounds")));
            }
            if rod.marrow_radius >= rod.radius {
                return Err(Error::InvalidParameter(format!(
                    "bone {i} marrow radius must be below the outer radius"
                )));
            }
        }
        for (i, shape) in self
            .air_pockets
            .iter()
            .chain(&self.contrast_blobs)
            .enumerate()
        {
            if !shape.within_bounds(self.dims) {
                return Err(Error::InvalidParameter(format!(
                    "distractor {i} out of bounds"
                )));
            }
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::InvalidParameter("noise sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// Render a phantom. Deterministic in (spec, seed): the noise field is
/// counter-based off `seed`.
pub fn make_phantom(spec: &PhantomSpec, seed: u64) -> Result<(Volume, PhantomTruth)> {
    spec.validate()?;
    let geometry = Geometry::new(spec.dims, spec.spacing_mm)?;
    let [nx, ny, nz] = spec.dims;
    let hu = &spec.intensities;

    let mut data = vec![0.0f32; geometry.len()];
    let mut lung_truth = Mask::zeros(geometry);
    let mut bone_truth = Mask::zeros(geometry);

    let table_y = ny as f64 - 4.0;
    let mut idx = 0usize;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let p = [x as f64, y as f64, z as f64];

                let mut in_marrow = false;
                let mut in_shell = false;
                for rod in &spec.bones {
                    if rod.contains(p) {
                        if rod.in_marrow(p) {
                            in_marrow = true;
                        } else {
                            in_shell = true;
                        }
                    }
                }
                let in_bone = in_shell || in_marrow;
                let in_lung = !in_bone && spec.lungs.iter().any(|l| l.contains(p));

                let value = if in_shell {
                    hu.bone_shell
                } else if in_marrow {
                    hu.marrow
                } else if in_lung || spec.air_pockets.iter().any(|a| a.contains(p)) {
                    hu.lung_air
                } else if spec.contrast_blobs.iter().any(|b| b.contains(p)) {
                    hu.contrast
                } else if spec.body.contains(p) {
                    hu.tissue
                } else if spec.table
                    && p[1] >= table_y
                    && p[1] < table_y + 2.0
                    && p[0] >= 0.2 * nx as f64
                    && p[0] <= 0.8 * nx as f64
                {
                    hu.table
                } else {
                    hu.background_air
                };

                let noise = if spec.noise_sigma > 0.0 {
                    (spec.noise_sigma * standard_normal(seed, idx as u64)) as f32
                } else {
                    0.0
                };
                data[idx] = value + noise;
                if in_lung {
                    lung_truth.data_mut()[idx] = 1;
                }
                if in_bone {
                    bone_truth.data_mut()[idx] = 1;
                }
                idx += 1;
            }
        }
    }

    let volume = Volume::new(geometry, Dtype::F32, data)?;
    Ok((
        volume,
        PhantomTruth {
            lungs: lung_truth,
            bones: bone_truth,
        },
    ))
}
