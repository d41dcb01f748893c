//! Core volume and mask representation.
//!
//! A [`Volume`] is a dense 3D scalar grid with per-axis millimeter spacing,
//! stored x-fastest (x, then y, then z). [`Mask`] and [`LabelMap`] share the
//! same geometry but restrict voxel values to {0,1} and class codes
//! respectively. All types are immutable after construction and cheap to
//! share across threads.

mod components;
mod io;
mod resample;
mod tiles;

pub use components::{connected_components, largest_components, Components, Connectivity};
pub use io::{read_volume, write_volume, VolumeFormat};
pub use resample::{gaussian_smooth, resample, resampled_dims, smoothing_sigmas, Interpolation};
pub use tiles::{make_tile_cover, TileCover};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Number of segmentation classes: 0=other/background, 1=lung, 2=liver,
/// 3=bone, 4=kidney, 5=bladder.
pub const NUM_CLASSES: u8 = 6;

/// Element type tag recorded in volume headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    #[serde(rename = "float32")]
    F32,
    #[serde(rename = "int16")]
    I16,
    #[serde(rename = "uint8")]
    U8,
}

impl Dtype {
    pub fn bytes_per_element(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::I16 => 2,
            Dtype::U8 => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dtype::F32 => "float32",
            Dtype::I16 => "int16",
            Dtype::U8 => "uint8",
        }
    }
}

/// Grid dimensions plus physical voxel spacing in millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing_mm: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidVolume(format!("zero dimension in {dims:?}")));
        }
        if spacing_mm.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidVolume(format!(
                "spacing must be strictly positive and finite, got {spacing_mm:?}"
            )));
        }
        Ok(Geometry { dims, spacing_mm })
    }

    /// Total number of voxels.
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Linear index of voxel (x, y, z) in x-fastest order.
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    /// Inverse of [`Geometry::index`].
    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize, usize) {
        let x = index % self.dims[0];
        let rest = index / self.dims[0];
        (x, rest % self.dims[1], rest / self.dims[1])
    }
}

/// A 3D scalar grid (CT intensities in HU, probabilities, noise fields).
///
/// Data is held as `f32` regardless of the dtype tag; `int16` and `uint8`
/// payloads are exactly representable, so file round-trips are lossless.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    geometry: Geometry,
    dtype: Dtype,
    data: Vec<f32>,
}

impl Volume {
    pub fn new(geometry: Geometry, dtype: Dtype, data: Vec<f32>) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::InvalidVolume(format!(
                "data length {} does not match dims {:?} ({} voxels)",
                data.len(),
                geometry.dims,
                geometry.len()
            )));
        }
        Ok(Volume {
            geometry,
            dtype,
            data,
        })
    }

    pub fn zeros(geometry: Geometry, dtype: Dtype) -> Self {
        let n = geometry.len();
        Volume {
            geometry,
            dtype,
            data: vec![0.0; n],
        }
    }

    /// Constant-valued volume, mostly useful in tests and phantoms.
    pub fn filled(geometry: Geometry, dtype: Dtype, value: f32) -> Self {
        let n = geometry.len();
        Volume {
            geometry,
            dtype,
            data: vec![value; n],
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    pub fn spacing_mm(&self) -> [f64; 3] {
        self.geometry.spacing_mm
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.geometry.index(x, y, z)]
    }

    pub fn with_dtype(mut self, dtype: Dtype) -> Self {
        self.dtype = dtype;
        self
    }
}

/// Open/closed interval ends for [`threshold_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Unbounded,
    /// Keep values equal to the bound.
    Inclusive(f32),
    /// Drop values equal to the bound.
    Exclusive(f32),
}

/// Keep voxels with `lo <= v <= hi` (both ends inclusive; pass infinities
/// for open ends).
pub fn threshold(volume: &Volume, lo: f32, hi: f32) -> Mask {
    threshold_with(volume, Bound::Inclusive(lo), Bound::Inclusive(hi))
}

/// Threshold with explicit inclusive/exclusive bound semantics.
pub fn threshold_with(volume: &Volume, lo: Bound, hi: Bound) -> Mask {
    let data = volume
        .data()
        .iter()
        .map(|&v| {
            let above = match lo {
                Bound::Unbounded => true,
                Bound::Inclusive(b) => v >= b,
                Bound::Exclusive(b) => v > b,
            };
            let below = match hi {
                Bound::Unbounded => true,
                Bound::Inclusive(b) => v <= b,
                Bound::Exclusive(b) => v < b,
            };
            u8::from(above && below)
        })
        .collect();
    Mask {
        geometry: volume.geometry,
        data,
    }
}

/// A binary grid sharing [`Volume`] geometry; every voxel is 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    geometry: Geometry,
    data: Vec<u8>,
}

impl Mask {
    pub fn new(geometry: Geometry, data: Vec<u8>) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::InvalidVolume(format!(
                "mask length {} does not match dims {:?}",
                data.len(),
                geometry.dims
            )));
        }
        if let Some(&bad) = data.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidVolume(format!(
                "mask values must be 0 or 1, found {bad}"
            )));
        }
        Ok(Mask { geometry, data })
    }

    pub fn zeros(geometry: Geometry) -> Self {
        let n = geometry.len();
        Mask {
            geometry,
            data: vec![0; n],
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> u8 {
        self.data[self.geometry.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, value: u8) {
        debug_assert!(value <= 1);
        let idx = self.geometry.index(x, y, z);
        self.data[idx] = value;
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn complement(&self) -> Mask {
        Mask {
            geometry: self.geometry,
            data: self.data.iter().map(|&v| 1 - v).collect(),
        }
    }

    /// Voxelwise AND. Panics on geometry mismatch.
    pub fn intersect(&self, other: &Mask) -> Mask {
        assert_eq!(self.geometry.dims, other.geometry.dims);
        Mask {
            geometry: self.geometry,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a & b)
                .collect(),
        }
    }

    /// Voxelwise OR. Panics on geometry mismatch.
    pub fn union(&self, other: &Mask) -> Mask {
        assert_eq!(self.geometry.dims, other.geometry.dims);
        Mask {
            geometry: self.geometry,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a | b)
                .collect(),
        }
    }

    /// True if every foreground voxel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.data
            .iter()
            .zip(&other.data)
            .all(|(&a, &b)| a == 0 || b == 1)
    }

    pub fn to_volume(&self, dtype: Dtype) -> Volume {
        Volume {
            geometry: self.geometry,
            dtype,
            data: self.data.iter().map(|&v| f32::from(v)).collect(),
        }
    }

    /// Reinterpret a volume as a mask; every voxel must already be 0 or 1.
    pub fn from_volume(volume: &Volume) -> Result<Self> {
        let mut data = Vec::with_capacity(volume.data.len());
        for &v in &volume.data {
            if v == 0.0 {
                data.push(0);
            } else if v == 1.0 {
                data.push(1);
            } else {
                return Err(Error::InvalidVolume(format!(
                    "volume is not binary: found {v}"
                )));
            }
        }
        Ok(Mask {
            geometry: volume.geometry,
            data,
        })
    }
}

/// Per-voxel class codes in `0..NUM_CLASSES`, sharing [`Volume`] geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    geometry: Geometry,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn new(geometry: Geometry, data: Vec<u8>) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::InvalidVolume(format!(
                "label map length {} does not match dims {:?}",
                data.len(),
                geometry.dims
            )));
        }
        if let Some(&bad) = data.iter().find(|&&v| v >= NUM_CLASSES) {
            return Err(Error::InvalidVolume(format!(
                "class code {bad} out of range (max {})",
                NUM_CLASSES - 1
            )));
        }
        Ok(LabelMap { geometry, data })
    }

    pub fn zeros(geometry: Geometry) -> Self {
        let n = geometry.len();
        LabelMap {
            geometry,
            data: vec![0; n],
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    /// Binary mask of one class.
    pub fn class_mask(&self, class: u8) -> Mask {
        Mask {
            geometry: self.geometry,
            data: self.data.iter().map(|&v| u8::from(v == class)).collect(),
        }
    }

    pub fn to_volume(&self) -> Volume {
        Volume {
            geometry: self.geometry,
            dtype: Dtype::U8,
            data: self.data.iter().map(|&v| f32::from(v)).collect(),
        }
    }

    pub fn from_volume(volume: &Volume) -> Result<Self> {
        let mut data = Vec::with_capacity(volume.data.len());
        for &v in &volume.data {
            let code = v as u8;
            if f32::from(code) != v || code >= NUM_CLASSES {
                return Err(Error::InvalidVolume(format!(
                    "volume holds non-class value {v}"
                )));
            }
            data.push(code);
        }
        Ok(LabelMap {
            geometry: volume.geometry,
            data,
        })
    }
}
