//! Inference tiling: cover a volume with fixed-size, partially-overlapping
//! tiles. Tiles advance by their own size; the final tile per axis is pulled
//! back so it abuts the boundary, which is where overlap comes from.
//! Predictions in overlapping regions are meant to be averaged.

use super::Geometry;

/// How voxels covered by several tiles combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlapPolicy {
    Average,
}

#[derive(Debug, Clone)]
pub struct TileCover {
    pub tile_dims: [usize; 3],
    pub offsets: Vec<[usize; 3]>,
    pub overlap: OverlapPolicy,
}

impl TileCover {
    /// Number of tiles covering each voxel; every entry is at least 1.
    pub fn coverage_counts(&self, dims: [usize; 3]) -> Vec<u32> {
        let geom = Geometry {
            dims,
            spacing_mm: [1.0; 3],
        };
        let mut counts = vec![0u32; geom.len()];
        for off in &self.offsets {
            for z in off[2]..off[2] + self.tile_dims[2] {
                for y in off[1]..off[1] + self.tile_dims[1] {
                    let row = geom.index(off[0], y, z);
                    for c in &mut counts[row..row + self.tile_dims[0]] {
                        *c += 1;
                    }
                }
            }
        }
        counts
    }
}

fn axis_offsets(dim: usize, tile: usize) -> Vec<usize> {
    let mut offsets = Vec::new();
    let mut k = 0;
    while k + tile < dim {
        offsets.push(k);
        k += tile;
    }
    offsets.push(dim - tile);
    offsets
}

/// Cover `dims` with tiles of `tile_dims`. Tiles larger than the volume are
/// clamped to it with a warning.
pub fn make_tile_cover(dims: [usize; 3], tile_dims: [usize; 3]) -> TileCover {
    let mut tile = tile_dims;
    for k in 0..3 {
        if tile[k] > dims[k] {
            log::warn!(
                "tile size {} exceeds volume extent {} on axis {k}; clamping",
                tile[k],
                dims[k]
            );
            tile[k] = dims[k];
        }
        tile[k] = tile[k].max(1);
    }
    let per_axis: [Vec<usize>; 3] = [
        axis_offsets(dims[0], tile[0]),
        axis_offsets(dims[1], tile[1]),
        axis_offsets(dims[2], tile[2]),
    ];
    let mut offsets = Vec::with_capacity(per_axis[0].len() * per_axis[1].len() * per_axis[2].len());
    for &z in &per_axis[2] {
        for &y in &per_axis[1] {
            for &x in &per_axis[0] {
                offsets.push([x, y, z]);
            }
        }
    }
    TileCover {
        tile_dims: tile,
        offsets,
        overlap: OverlapPolicy::Average,
    }
}
