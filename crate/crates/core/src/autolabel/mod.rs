//! Unsupervised lung and skeleton labelers for CT volumes, composed from
//! thresholding, FFT morphology and connected-component selection.
//!
//! Lungs: air is everything at or below `air_hu_max`. Erosion discards small
//! pockets, components reaching the x/y image boundary are discarded as
//! outside-the-body air, the largest surviving pockets are the lungs, and
//! finally the erosion is undone by taking every thresholded component
//! connected to a detected lung.
//!
//! Bones: voxels at or above `tau2` are hard bone exterior; the largest
//! connected component of those is the skeleton. Morphological closing seals
//! the cortical shells, the `tau1` threshold strips soft tissue swallowed by
//! the closing, and a per-slice hole fill recovers marrow cavities.

pub mod phantom;

pub use phantom::{make_phantom, PhantomSpec, PhantomTruth};

use crate::error::{Error, Result};
use crate::fftmorph::{ball_element, close, dilate};
use crate::volgrid::{
    connected_components, largest_components, threshold, Connectivity, Mask, Volume,
};

/// Parameters of the lung labeler.
#[derive(Debug, Clone, Copy)]
pub struct LungParams {
    /// Upper HU bound for air; voxels with `v <= air_hu_max` are candidates.
    pub air_hu_max: f32,
    /// Diameter of the erosion ball that removes small pockets.
    pub erosion_diameter_mm: f64,
    /// How many pockets to keep.
    pub n_lungs: usize,
}

impl Default for LungParams {
    fn default() -> Self {
        LungParams {
            air_hu_max: -150.0,
            erosion_diameter_mm: 10.0,
            n_lungs: 2,
        }
    }
}

/// Parameters of the skeleton labeler.
#[derive(Debug, Clone, Copy)]
pub struct BoneParams {
    /// Retention threshold applied after closing (`v >= tau1`).
    pub tau1: f32,
    /// Hard bone exterior threshold (`v >= tau2`).
    pub tau2: f32,
    /// Diameter of the closing ball that seals cortical shells.
    pub closing_diameter_mm: f64,
    /// Connectivity for the skeleton's largest-component selection. Defaults
    /// to 26 so joints and thin cartilage gaps do not split the skeleton.
    pub skeleton_connectivity: Connectivity,
}

impl Default for BoneParams {
    fn default() -> Self {
        BoneParams {
            tau1: 0.0,
            tau2: 200.0,
            closing_diameter_mm: 25.0,
            skeleton_connectivity: Connectivity::TwentySix,
        }
    }
}

/// Erosion that treats everything beyond the volume as foreground: the
/// complement of the zero-padded dilation of the in-volume complement. The
/// lung step needs this convention; air physically continues past the scan
/// edges, and eroding it away from the faces would make the
/// boundary-connectivity test vacuous.
fn erode_outside_foreground(
    mask: &Mask,
    element: &crate::fftmorph::StructuringElement,
) -> Result<Mask> {
    Ok(dilate(&mask.complement(), element)?.complement())
}

/// Segment the lungs as the largest interior air pockets.
pub fn label_lungs(ct: &Volume, params: &LungParams) -> Result<Mask> {
    if params.n_lungs < 1 {
        return Err(Error::InvalidParameter("n_lungs must be at least 1".into()));
    }
    let air = threshold(ct, f32::NEG_INFINITY, params.air_hu_max);
    let ball = ball_element(params.erosion_diameter_mm, ct.spacing_mm())?;
    let eroded = erode_outside_foreground(&air, &ball)?;
    let interior = remove_boundary_connected(&eroded);

    let pockets = connected_components(&interior, Connectivity::Six);
    if pockets.count() == 0 {
        return Err(Error::NoCandidate(
            "no air pockets survive erosion and boundary removal".into(),
        ));
    }
    let detected = pockets.keep_largest(params.n_lungs);

    // Undo the erosion: keep every thresholded component connected to a
    // detected lung.
    let air_components = connected_components(&air, Connectivity::Six);
    let ids = air_components.ids_intersecting(&detected);
    Ok(air_components.mask_where(|id| ids.contains(&id)))
}

/// Segment the skeleton.
pub fn label_bones(ct: &Volume, params: &BoneParams) -> Result<Mask> {
    if !(params.tau1 < params.tau2) {
        return Err(Error::InvalidParameter(format!(
            "tau1 ({}) must be below tau2 ({})",
            params.tau1, params.tau2
        )));
    }
    let exterior = threshold(ct, params.tau2, f32::INFINITY);
    if exterior.count_ones() == 0 {
        return Err(Error::NoCandidate(format!(
            "nothing above the bone exterior threshold {} HU",
            params.tau2
        )));
    }
    let skeleton = largest_components(&exterior, 1, params.skeleton_connectivity);
    let ball = ball_element(params.closing_diameter_mm, ct.spacing_mm())?;
    let closed = close(&skeleton, &ball)?;
    let retained = closed.intersect(&threshold(ct, params.tau1, f32::INFINITY));
    Ok(fill_slice_holes(&retained))
}

/// Fill 2D holes independently in every axial (xy) slice: background
/// components under 4-connectivity that do not touch the slice border become
/// foreground.
pub fn fill_slice_holes(mask: &Mask) -> Mask {
    let geom = *mask.geometry();
    let [nx, ny, nz] = geom.dims;
    let mut out = mask.clone();
    let mut reachable = vec![false; nx * ny];
    let mut stack: Vec<(usize, usize)> = Vec::new();

    for z in 0..nz {
        reachable.iter_mut().for_each(|v| *v = false);
        // Flood the background from the slice border.
        for x in 0..nx {
            for y in [0, ny - 1] {
                if mask.at(x, y, z) == 0 && !reachable[x + nx * y] {
                    reachable[x + nx * y] = true;
                    stack.push((x, y));
                }
            }
        }
        for y in 0..ny {
            for x in [0, nx - 1] {
                if mask.at(x, y, z) == 0 && !reachable[x + nx * y] {
                    reachable[x + nx * y] = true;
                    stack.push((x, y));
                }
            }
        }
        while let Some((x, y)) = stack.pop() {
            let neighbors = [
                (x.wrapping_sub(1), y),
                (x + 1, y),
                (x, y.wrapping_sub(1)),
                (x, y + 1),
            ];
            for (qx, qy) in neighbors {
                if qx < nx && qy < ny && mask.at(qx, qy, z) == 0 && !reachable[qx + nx * qy] {
                    reachable[qx + nx * qy] = true;
                    stack.push((qx, qy));
                }
            }
        }
        for y in 0..ny {
            for x in 0..nx {
                if mask.at(x, y, z) == 0 && !reachable[x + nx * y] {
                    out.set(x, y, z, 1);
                }
            }
        }
    }
    out
}

/// Remove 3D components (6-connectivity) containing any voxel on the minimum
/// or maximum x or y face. The z faces are not treated as boundary: the
/// patient extends past the scan in z.
pub fn remove_boundary_connected(mask: &Mask) -> Mask {
    let components = connected_components(mask, Connectivity::Six);
    let [nx, ny, nz] = mask.dims();
    let labels = components.labels();
    let geom = mask.geometry();
    let mut touches = vec![false; components.count() + 1];
    for z in 0..nz {
        for y in 0..ny {
            for x in [0, nx - 1] {
                touches[labels[geom.index(x, y, z)] as usize] = true;
            }
        }
        for x in 0..nx {
            for y in [0, ny - 1] {
                touches[labels[geom.index(x, y, z)] as usize] = true;
            }
        }
    }
    components.mask_where(|id| !touches[id as usize])
}
