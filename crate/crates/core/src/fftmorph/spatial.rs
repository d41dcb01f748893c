//! Brute-force spatial morphology. This is the ground-truth oracle the FFT
//! path must match exactly, voxel for voxel.
//!
//! Boundary model: the image is zero outside its bounds for dilation, so
//! erosion (which demands full element coverage) removes foreground within
//! element reach of the boundary.

use super::StructuringElement;
use crate::volgrid::Mask;

/// Dilation by direct neighborhood scan: output voxel x is on iff some
/// element offset o has an in-bounds foreground voxel at x - o.
pub fn dilate_spatial(mask: &Mask, element: &StructuringElement) -> Mask {
    let geom = *mask.geometry();
    let [nx, ny, nz] = geom.dims;
    let offsets = element.offsets();
    let src = mask.data();
    let mut out = Mask::zeros(geom);

    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let hit = offsets.iter().any(|&(ox, oy, oz)| {
                    let sx = x as i64 - ox as i64;
                    let sy = y as i64 - oy as i64;
                    let sz = z as i64 - oz as i64;
                    in_bounds(sx, sy, sz, nx, ny, nz)
                        && src[geom.index(sx as usize, sy as usize, sz as usize)] == 1
                });
                if hit {
                    out.set(x, y, z, 1);
                }
            }
        }
    }
    out
}

/// Erosion by direct scan: output voxel x is on iff every element offset o
/// has an in-bounds foreground voxel at x - o.
pub fn erode_spatial(mask: &Mask, element: &StructuringElement) -> Mask {
    let geom = *mask.geometry();
    let [nx, ny, nz] = geom.dims;
    let offsets = element.offsets();
    let src = mask.data();
    let mut out = Mask::zeros(geom);

    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let covered = offsets.iter().all(|&(ox, oy, oz)| {
                    let sx = x as i64 - ox as i64;
                    let sy = y as i64 - oy as i64;
                    let sz = z as i64 - oz as i64;
                    in_bounds(sx, sy, sz, nx, ny, nz)
                        && src[geom.index(sx as usize, sy as usize, sz as usize)] == 1
                });
                if covered {
                    out.set(x, y, z, 1);
                }
            }
        }
    }
    out
}

#[inline]
fn in_bounds(x: i64, y: i64, z: i64, nx: usize, ny: usize, nz: usize) -> bool {
    x >= 0 && y >= 0 && z >= 0 && (x as usize) < nx && (y as usize) < ny && (z as usize) < nz
}
