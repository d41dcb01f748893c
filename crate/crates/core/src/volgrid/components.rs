//! Connected component labeling for binary masks.

use super::{Geometry, Mask};

/// Voxel adjacency. `Four`/`Eight` stay within each xy-plane, so labeling a
/// 3D mask with them yields independent per-slice 2D components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Six,
    Eight,
    TwentySix,
}

impl Connectivity {
    fn offsets(self) -> &'static [(i32, i32, i32)] {
        const FOUR: [(i32, i32, i32); 4] = [(-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0)];
        const SIX: [(i32, i32, i32); 6] = [
            (-1, 0, 0),
            (1, 0, 0),
            (0, -1, 0),
            (0, 1, 0),
            (0, 0, -1),
            (0, 0, 1),
        ];
        const EIGHT: [(i32, i32, i32); 8] = [
            (-1, 0, 0),
            (1, 0, 0),
            (0, -1, 0),
            (0, 1, 0),
            (-1, -1, 0),
            (1, -1, 0),
            (-1, 1, 0),
            (1, 1, 0),
        ];
        const TWENTY_SIX: [(i32, i32, i32); 26] = {
            let mut out = [(0, 0, 0); 26];
            let mut n = 0;
            let mut dz = -1;
            while dz <= 1 {
                let mut dy = -1;
                while dy <= 1 {
                    let mut dx = -1;
                    while dx <= 1 {
                        if dx != 0 || dy != 0 || dz != 0 {
                            out[n] = (dx, dy, dz);
                            n += 1;
                        }
                        dx += 1;
                    }
                    dy += 1;
                }
                dz += 1;
            }
            out
        };
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Six => &SIX,
            Connectivity::Eight => &EIGHT,
            Connectivity::TwentySix => &TWENTY_SIX,
        }
    }
}

/// Result of [`connected_components`]: a per-voxel id map (0 = background,
/// ids `1..=count` ordered by decreasing voxel count, ties broken by the
/// smallest minimum linear index) plus the matching size table.
#[derive(Debug, Clone)]
pub struct Components {
    geometry: Geometry,
    labels: Vec<u32>,
    sizes: Vec<usize>,
}

impl Components {
    /// Number of components.
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Component sizes in voxels, index `id - 1`, sorted descending.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Mask of a single component (ids start at 1).
    pub fn component_mask(&self, id: u32) -> Mask {
        self.mask_where(|v| v == id)
    }

    /// Mask of the union of up to `count` largest components.
    pub fn keep_largest(&self, count: usize) -> Mask {
        let cutoff = count.min(self.sizes.len()) as u32;
        self.mask_where(|v| v >= 1 && v <= cutoff)
    }

    /// Mask of all components whose id satisfies the predicate.
    pub fn mask_where(&self, keep: impl Fn(u32) -> bool) -> Mask {
        let data = self
            .labels
            .iter()
            .map(|&v| u8::from(v != 0 && keep(v)))
            .collect();
        Mask::new(self.geometry, data).expect("labels derive from a valid mask")
    }

    /// Ids of components containing at least one foreground voxel of `other`.
    pub fn ids_intersecting(&self, other: &Mask) -> Vec<u32> {
        let mut hit = vec![false; self.sizes.len() + 1];
        for (&id, &m) in self.labels.iter().zip(other.data()) {
            if id != 0 && m == 1 {
                hit[id as usize] = true;
            }
        }
        (1..hit.len() as u32)
            .filter(|&id| hit[id as usize])
            .collect()
    }
}

/// Label connected components of the foreground.
///
/// Components are discovered by flood fill in increasing linear index order,
/// then re-numbered so id 1 is the largest. The discovery order makes the
/// size tie-break (smallest minimum linear index first) fall out for free.
pub fn connected_components(mask: &Mask, connectivity: Connectivity) -> Components {
    let geometry = *mask.geometry();
    let [nx, ny, nz] = geometry.dims;
    let offsets = connectivity.offsets();
    let data = mask.data();

    let mut provisional = vec![0u32; data.len()];
    let mut sizes_by_provisional: Vec<usize> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();

    for start in 0..data.len() {
        if data[start] == 0 || provisional[start] != 0 {
            continue;
        }
        let id = sizes_by_provisional.len() as u32 + 1;
        let mut size = 0usize;
        provisional[start] = id;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            size += 1;
            let (x, y, z) = geometry.coords(idx);
            for &(dx, dy, dz) in offsets {
                let xx = x as i64 + dx as i64;
                let yy = y as i64 + dy as i64;
                let zz = z as i64 + dz as i64;
                if xx < 0 || yy < 0 || zz < 0 {
                    continue;
                }
                let (xx, yy, zz) = (xx as usize, yy as usize, zz as usize);
                if xx >= nx || yy >= ny || zz >= nz {
                    continue;
                }
                let nidx = geometry.index(xx, yy, zz);
                if data[nidx] == 1 && provisional[nidx] == 0 {
                    provisional[nidx] = id;
                    stack.push(nidx);
                }
            }
        }
        sizes_by_provisional.push(size);
    }

    // Sort by (size desc, provisional id asc); provisional ids are ordered by
    // minimum linear index, which gives the deterministic tie-break.
    let mut order: Vec<usize> = (0..sizes_by_provisional.len()).collect();
    order.sort_by(|&a, &b| {
        sizes_by_provisional[b]
            .cmp(&sizes_by_provisional[a])
            .then(a.cmp(&b))
    });
    let mut remap = vec![0u32; sizes_by_provisional.len() + 1];
    for (rank, &prov) in order.iter().enumerate() {
        remap[prov + 1] = rank as u32 + 1;
    }

    let labels = provisional.iter().map(|&p| remap[p as usize]).collect();
    let sizes = order.iter().map(|&p| sizes_by_provisional[p]).collect();
    Components {
        geometry,
        labels,
        sizes,
    }
}

/// Union of up to `count` largest components; all of them if fewer exist.
pub fn largest_components(mask: &Mask, count: usize, connectivity: Connectivity) -> Mask {
    connected_components(mask, connectivity).keep_largest(count)
}
