//! Binary morphology computed by FFT convolution.
//!
//! Dilation marks every voxel where the convolution of the mask with the
//! structuring element is positive; erosion is its dual through the binary
//! complement, which for the zero-padded boundary model reduces to demanding
//! the full element count. Both therefore come from one linear convolution,
//! evaluated by forward transforms, a pointwise product, and an inverse
//! transform. Convolution is always linear (zero-padded), never circular, so
//! nothing leaks across opposite volume faces.
//!
//! The [`spatial`] submodule holds the brute-force oracle; the FFT path must
//! agree with it exactly. Note the classical algebraic identities
//! (extensivity of closing, idempotence of opening) hold for foreground at
//! least one element half-extent away from the volume boundary; structures
//! touching the boundary erode inward by construction.

mod fft;
pub mod spatial;

use crate::error::{Error, Result};
use crate::volgrid::Mask;
use fft::{fft3_in_place, next_fast_len};
use rustfft::num_complex::Complex64;

/// Binary 3D kernel with an unambiguous center voxel (all dims odd).
#[derive(Debug, Clone, PartialEq)]
pub struct StructuringElement {
    dims: [usize; 3],
    data: Vec<u8>,
    provenance: Option<BallProvenance>,
}

/// Physical parameters a ball element was realized from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallProvenance {
    pub diameter_mm: f64,
    pub spacing_mm: [f64; 3],
}

impl StructuringElement {
    pub fn new(dims: [usize; 3], data: Vec<u8>) -> Result<Self> {
        if dims.iter().any(|d| d % 2 == 0 || *d == 0) {
            return Err(Error::InvalidParameter(format!(
                "structuring element dims must be odd, got {dims:?}"
            )));
        }
        if data.len() != dims.iter().product::<usize>() {
            return Err(Error::InvalidParameter(
                "structuring element data length does not match dims".into(),
            ));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::InvalidParameter(
                "structuring element must be binary".into(),
            ));
        }
        if !data.contains(&1) {
            return Err(Error::InvalidParameter(
                "structuring element must have at least one set voxel".into(),
            ));
        }
        Ok(StructuringElement {
            dims,
            data,
            provenance: None,
        })
    }

    /// Single-voxel identity element.
    pub fn single_voxel() -> Self {
        StructuringElement {
            dims: [1, 1, 1],
            data: vec![1],
            provenance: None,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Center voxel coordinates.
    pub fn anchor(&self) -> [usize; 3] {
        [self.dims[0] / 2, self.dims[1] / 2, self.dims[2] / 2]
    }

    pub fn provenance(&self) -> Option<BallProvenance> {
        self.provenance
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn anchor_is_set(&self) -> bool {
        let a = self.anchor();
        self.at(a[0], a[1], a[2]) == 1
    }

    #[inline]
    fn at(&self, x: usize, y: usize, z: usize) -> u8 {
        self.data[x + self.dims[0] * (y + self.dims[1] * z)]
    }

    /// Set offsets relative to the anchor.
    pub fn offsets(&self) -> Vec<(i32, i32, i32)> {
        let a = self.anchor();
        let mut out = Vec::with_capacity(self.count_ones());
        for z in 0..self.dims[2] {
            for y in 0..self.dims[1] {
                for x in 0..self.dims[0] {
                    if self.at(x, y, z) == 1 {
                        out.push((
                            x as i32 - a[0] as i32,
                            y as i32 - a[1] as i32,
                            z as i32 - a[2] as i32,
                        ));
                    }
                }
            }
        }
        out
    }

    /// Point reflection through the anchor; a no-op for symmetric balls.
    pub fn reflect(&self) -> StructuringElement {
        let [ex, ey, ez] = self.dims;
        let mut data = vec![0u8; self.data.len()];
        for z in 0..ez {
            for y in 0..ey {
                for x in 0..ex {
                    data[(ex - 1 - x) + ex * ((ey - 1 - y) + ey * (ez - 1 - z))] = self.at(x, y, z);
                }
            }
        }
        StructuringElement {
            dims: self.dims,
            data,
            provenance: self.provenance,
        }
    }
}

/// Spherical structuring element: the anchor-centered voxel (i,j,k) is set
/// iff its physical offset lies within `diameter_mm / 2` of the center.
/// Dims are the smallest odd sizes containing the ball. A ball smaller than
/// one voxel in every axis degenerates to the single-voxel element.
pub fn ball_element(diameter_mm: f64, spacing_mm: [f64; 3]) -> Result<StructuringElement> {
    if !(diameter_mm > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ball diameter must be positive, got {diameter_mm}"
        )));
    }
    if spacing_mm.iter().any(|&u| !(u > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "spacing must be positive, got {spacing_mm:?}"
        )));
    }
    let radius = diameter_mm / 2.0;
    let half: [i64; 3] = [
        (radius / spacing_mm[0]).floor() as i64,
        (radius / spacing_mm[1]).floor() as i64,
        (radius / spacing_mm[2]).floor() as i64,
    ];
    let dims = [
        (2 * half[0] + 1) as usize,
        (2 * half[1] + 1) as usize,
        (2 * half[2] + 1) as usize,
    ];
    let r2 = radius * radius;
    let mut data = Vec::with_capacity(dims.iter().product());
    for k in -half[2]..=half[2] {
        for j in -half[1]..=half[1] {
            for i in -half[0]..=half[0] {
                let d2 = (i as f64 * spacing_mm[0]).powi(2)
                    + (j as f64 * spacing_mm[1]).powi(2)
                    + (k as f64 * spacing_mm[2]).powi(2);
                data.push(u8::from(d2 <= r2));
            }
        }
    }
    if dims == [1, 1, 1] {
        log::warn!(
            "ball of diameter {diameter_mm} mm at spacing {spacing_mm:?} is smaller than one \
             voxel; degenerating to the single-voxel element"
        );
    }
    let mut element = StructuringElement::new(dims, data)?;
    element.provenance = Some(BallProvenance {
        diameter_mm,
        spacing_mm,
    });
    Ok(element)
}

fn check_fits(mask: &Mask, element: &StructuringElement) -> Result<()> {
    let m = mask.dims();
    let e = element.dims();
    if (0..3).any(|k| e[k] > m[k]) {
        return Err(Error::InvalidParameter(format!(
            "element dims {e:?} exceed mask dims {m:?}"
        )));
    }
    Ok(())
}

/// Linear convolution of mask and element, cropped to the mask grid. Every
/// entry is (up to FFT round-off) the integer count of element voxels
/// covering foreground.
fn count_convolution(mask: &Mask, element: &StructuringElement) -> Vec<f64> {
    let [nx, ny, nz] = mask.dims();
    let e = element.dims();
    let pdims = [
        next_fast_len(nx + e[0] - 1),
        next_fast_len(ny + e[1] - 1),
        next_fast_len(nz + e[2] - 1),
    ];
    let plen = pdims[0] * pdims[1] * pdims[2];

    let mut fbuf = vec![Complex64::default(); plen];
    for z in 0..nz {
        for y in 0..ny {
            let src_row = mask.geometry().index(0, y, z);
            let dst_row = pdims[0] * (y + pdims[1] * z);
            for x in 0..nx {
                fbuf[dst_row + x].re = f64::from(mask.data()[src_row + x]);
            }
        }
    }

    // Element goes in anchored at the origin, negative offsets wrapped; the
    // padded size has >= nx + e - 1 samples per axis, so wrapped entries
    // never alias back into the cropped region.
    let mut kbuf = vec![Complex64::default(); plen];
    for (ox, oy, oz) in element.offsets() {
        let px = (ox as i64).rem_euclid(pdims[0] as i64) as usize;
        let py = (oy as i64).rem_euclid(pdims[1] as i64) as usize;
        let pz = (oz as i64).rem_euclid(pdims[2] as i64) as usize;
        kbuf[px + pdims[0] * (py + pdims[1] * pz)].re = 1.0;
    }

    fft3_in_place(&mut fbuf, pdims, false);
    fft3_in_place(&mut kbuf, pdims, false);
    for (a, b) in fbuf.iter_mut().zip(&kbuf) {
        *a *= b;
    }
    fft3_in_place(&mut fbuf, pdims, true);

    let scale = 1.0 / plen as f64;
    let mut counts = vec![0.0f64; nx * ny * nz];
    for z in 0..nz {
        for y in 0..ny {
            let src_row = pdims[0] * (y + pdims[1] * z);
            let dst_row = mask.geometry().index(0, y, z);
            for x in 0..nx {
                counts[dst_row + x] = fbuf[src_row + x].re * scale;
            }
        }
    }
    counts
}

fn binarize(mask: &Mask, counts: &[f64], cutoff: f64) -> Mask {
    let data = counts.iter().map(|&c| u8::from(c > cutoff)).collect();
    Mask::new(*mask.geometry(), data).expect("same geometry")
}

/// Dilation: voxels where the convolution count exceeds zero. The 0.5 cutoff
/// sits halfway between the exact integer counts 0 and 1.
pub fn dilate(mask: &Mask, element: &StructuringElement) -> Result<Mask> {
    check_fits(mask, element)?;
    let counts = count_convolution(mask, element);
    Ok(binarize(mask, &counts, 0.5))
}

/// Erosion: the complement of dilating the complement (which is 1 outside
/// the volume). Through that identity the count of the complement is
/// |element| minus the count of the mask, so erosion keeps voxels whose
/// count reaches the full element size.
pub fn erode(mask: &Mask, element: &StructuringElement) -> Result<Mask> {
    check_fits(mask, element)?;
    let counts = count_convolution(mask, element);
    let full = element.count_ones() as f64;
    Ok(binarize(mask, &counts, full - 0.5))
}

/// Opening: erosion followed by dilation.
pub fn open(mask: &Mask, element: &StructuringElement) -> Result<Mask> {
    dilate(&erode(mask, element)?, element)
}

/// Closing: dilation followed by erosion.
pub fn close(mask: &Mask, element: &StructuringElement) -> Result<Mask> {
    erode(&dilate(mask, element)?, element)
}
