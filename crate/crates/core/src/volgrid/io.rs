//! Volume file I/O.
//!
//! Two on-disk forms are supported:
//!
//! * native VGRID: a `<name>.vgrid.json` sidecar describing geometry and
//!   dtype, plus `<name>.vgrid.raw` holding exactly `nx*ny*nz` little-endian
//!   elements in x-fastest order;
//! * a NIfTI-1 subset: single-file `.nii`, 348-byte little-endian header,
//!   datatype uint8/int16/float32, spacing from `pixdim[1..3]`. Orientation
//!   matrices are ignored; axes are taken as stored.

use super::{Dtype, Geometry, Volume};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

/// On-disk format selector for [`write_volume`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeFormat {
    Vgrid,
    Nifti,
}

const VGRID_JSON_SUFFIX: &str = ".vgrid.json";
const VGRID_RAW_SUFFIX: &str = ".vgrid.raw";

#[derive(Serialize, Deserialize)]
struct VgridHeader {
    dims: [usize; 3],
    spacing_mm: [f64; 3],
    dtype: Dtype,
    order: String,
    endianness: String,
}

/// Read a volume from a `.vgrid.json` sidecar or a `.nii` file.
pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let name = path.to_string_lossy();
    if name.ends_with(VGRID_JSON_SUFFIX) {
        read_vgrid(path)
    } else if name.ends_with(".nii") {
        read_nifti(path)
    } else {
        Err(Error::header(
            path,
            "unrecognized extension (expected .vgrid.json or .nii)",
        ))
    }
}

/// Write a volume. For VGRID the sidecar suffix is appended when missing and
/// the raw payload lands next to it; for NIfTI the `.nii` suffix is appended
/// when missing.
pub fn write_volume(volume: &Volume, path: impl AsRef<Path>, format: VolumeFormat) -> Result<()> {
    let path = path.as_ref();
    match format {
        VolumeFormat::Vgrid => write_vgrid(volume, path),
        VolumeFormat::Nifti => write_nifti(volume, path),
    }
}

fn raw_path_for(json_path: &Path) -> PathBuf {
    let name = json_path.to_string_lossy();
    PathBuf::from(format!(
        "{}{}",
        name.strip_suffix(VGRID_JSON_SUFFIX).unwrap_or(&name),
        VGRID_RAW_SUFFIX
    ))
}

fn read_vgrid(json_path: &Path) -> Result<Volume> {
    let text = fs::read_to_string(json_path).map_err(|e| Error::io(json_path, e))?;
    let header: VgridHeader =
        serde_json::from_str(&text).map_err(|e| Error::header(json_path, e.to_string()))?;
    if header.order != "x-fastest" {
        return Err(Error::header(
            json_path,
            format!("unsupported order {:?}", header.order),
        ));
    }
    if header.endianness != "little" {
        return Err(Error::header(
            json_path,
            format!("unsupported endianness {:?}", header.endianness),
        ));
    }
    let geometry = Geometry::new(header.dims, header.spacing_mm)
        .map_err(|e| Error::header(json_path, e.to_string()))?;

    let raw_path = raw_path_for(json_path);
    let bytes = fs::read(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
    let data = decode_elements(&bytes, header.dtype, geometry.len(), &raw_path)?;
    Volume::new(geometry, header.dtype, data)
}

fn write_vgrid(volume: &Volume, path: &Path) -> Result<()> {
    let name = path.to_string_lossy();
    let json_path = if name.ends_with(VGRID_JSON_SUFFIX) {
        path.to_path_buf()
    } else {
        PathBuf::from(format!("{name}{VGRID_JSON_SUFFIX}"))
    };
    let header = VgridHeader {
        dims: volume.dims(),
        spacing_mm: volume.spacing_mm(),
        dtype: volume.dtype(),
        order: "x-fastest".to_owned(),
        endianness: "little".to_owned(),
    };
    let text = serde_json::to_string_pretty(&header).expect("header serializes");
    fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;

    let raw_path = raw_path_for(&json_path);
    let bytes = encode_elements(volume.data(), volume.dtype());
    fs::write(&raw_path, bytes).map_err(|e| Error::io(&raw_path, e))
}

fn encode_elements(data: &[f32], dtype: Dtype) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(data.len() * dtype.bytes_per_element());
    match dtype {
        Dtype::F32 => {
            for &v in data {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        Dtype::I16 => {
            for &v in data {
                bytes.extend_from_slice(&(v as i16).to_le_bytes());
            }
        }
        Dtype::U8 => {
            for &v in data {
                bytes.push(v as u8);
            }
        }
    }
    bytes
}

fn decode_elements(bytes: &[u8], dtype: Dtype, expected: usize, path: &Path) -> Result<Vec<f32>> {
    let bpe = dtype.bytes_per_element();
    if bytes.len() != expected * bpe {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len() / bpe,
        });
    }
    let data = match dtype {
        Dtype::F32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
        Dtype::I16 => bytes
            .chunks_exact(2)
            .map(|c| f32::from(i16::from_le_bytes([c[0], c[1]])))
            .collect(),
        Dtype::U8 => bytes.iter().map(|&b| f32::from(b)).collect(),
    };
    Ok(data)
}

// NIfTI-1 header layout constants (byte offsets into the 348-byte header).
const NIFTI_HEADER_LEN: usize = 348;
const OFF_SIZEOF_HDR: usize = 0;
const OFF_DIM: usize = 40;
const OFF_DATATYPE: usize = 70;
const OFF_BITPIX: usize = 72;
const OFF_PIXDIM: usize = 76;
const OFF_VOX_OFFSET: usize = 108;
const OFF_SCL_SLOPE: usize = 112;
const OFF_SCL_INTER: usize = 116;
const OFF_MAGIC: usize = 344;

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_FLOAT32: i16 = 16;

fn get_i16(buf: &[u8], off: usize) -> i16 {
    i16::from_le_bytes([buf[off], buf[off + 1]])
}

fn get_i32(buf: &[u8], off: usize) -> i32 {
    i32::from_le_bytes([buf[off], buf[off + 1], buf[off + 2], buf[off + 3]])
}

fn get_f32(buf: &[u8], off: usize) -> f32 {
    f32::from_le_bytes([buf[off], buf[off + 1], buf[off + 2], buf[off + 3]])
}

fn read_nifti(path: &Path) -> Result<Volume> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < NIFTI_HEADER_LEN {
        return Err(Error::header(path, "file shorter than the 348-byte header"));
    }
    if get_i32(&bytes, OFF_SIZEOF_HDR) != 348 {
        return Err(Error::header(
            path,
            "sizeof_hdr != 348 (big-endian files are not supported)",
        ));
    }
    let magic = &bytes[OFF_MAGIC..OFF_MAGIC + 4];
    let single_file = match magic {
        b"n+1\0" => true,
        b"ni1\0" => false,
        _ => return Err(Error::header(path, "bad magic (expected n+1 or ni1)")),
    };

    let ndim = get_i16(&bytes, OFF_DIM);
    if !(1..=7).contains(&ndim) {
        return Err(Error::header(path, format!("dim[0] = {ndim} out of range")));
    }
    let mut dims = [1usize; 3];
    for axis in 0..3 {
        if i16::try_from(axis + 1).unwrap() <= ndim {
            let d = get_i16(&bytes, OFF_DIM + 2 * (axis + 1));
            if d < 1 {
                return Err(Error::header(path, format!("dim[{}] = {d}", axis + 1)));
            }
            dims[axis] = d as usize;
        }
    }
    for axis in 4..=usize::try_from(ndim).unwrap() {
        let d = get_i16(&bytes, OFF_DIM + 2 * axis);
        if d > 1 {
            return Err(Error::header(
                path,
                format!("dim[{axis}] = {d}: only 3D volumes are supported"),
            ));
        }
    }

    let datatype = get_i16(&bytes, OFF_DATATYPE);
    let dtype = match datatype {
        DT_UINT8 => Dtype::U8,
        DT_INT16 => Dtype::I16,
        DT_FLOAT32 => Dtype::F32,
        other => return Err(Error::UnsupportedDtype(format!("NIfTI datatype {other}"))),
    };

    let mut spacing = [1.0f64; 3];
    for axis in 0..3 {
        let p = get_f32(&bytes, OFF_PIXDIM + 4 * (axis + 1));
        if p > 0.0 && p.is_finite() {
            spacing[axis] = f64::from(p);
        } else if i16::try_from(axis + 1).unwrap() <= ndim {
            return Err(Error::header(
                path,
                format!("pixdim[{}] = {p} must be positive", axis + 1),
            ));
        }
    }
    let geometry = Geometry::new(dims, spacing).map_err(|e| Error::header(path, e.to_string()))?;

    let vox_offset = get_f32(&bytes, OFF_VOX_OFFSET);
    let min_offset = if single_file { 352 } else { NIFTI_HEADER_LEN };
    let offset = (vox_offset.max(0.0) as usize).max(min_offset);
    if bytes.len() < offset {
        return Err(Error::header(path, "vox_offset beyond end of file"));
    }
    let mut data = decode_elements(&bytes[offset..], dtype, geometry.len(), path)?;

    let slope = get_f32(&bytes, OFF_SCL_SLOPE);
    let inter = get_f32(&bytes, OFF_SCL_INTER);
    let rescaled = slope != 0.0 && !(slope == 1.0 && inter == 0.0);
    if rescaled {
        for v in &mut data {
            *v = *v * slope + inter;
        }
    }
    // Rescaled integer payloads are no longer representable in their
    // original dtype, so the tag becomes float32.
    let dtype = if rescaled { Dtype::F32 } else { dtype };
    Volume::new(geometry, dtype, data)
}

fn write_nifti(volume: &Volume, path: &Path) -> Result<()> {
    let name = path.to_string_lossy();
    let path = if name.ends_with(".nii") {
        path.to_path_buf()
    } else {
        PathBuf::from(format!("{name}.nii"))
    };

    let mut header = [0u8; 352];
    header[OFF_SIZEOF_HDR..OFF_SIZEOF_HDR + 4].copy_from_slice(&348i32.to_le_bytes());
    let dims = volume.dims();
    if dims.iter().any(|&d| d > i16::MAX as usize) {
        return Err(Error::InvalidVolume(format!(
            "dims {dims:?} exceed the NIfTI-1 16-bit dimension limit"
        )));
    }
    let dim_words: [i16; 8] = [
        3,
        dims[0] as i16,
        dims[1] as i16,
        dims[2] as i16,
        1,
        1,
        1,
        1,
    ];
    for (i, d) in dim_words.iter().enumerate() {
        header[OFF_DIM + 2 * i..OFF_DIM + 2 * i + 2].copy_from_slice(&d.to_le_bytes());
    }
    let (datatype, bitpix): (i16, i16) = match volume.dtype() {
        Dtype::U8 => (DT_UINT8, 8),
        Dtype::I16 => (DT_INT16, 16),
        Dtype::F32 => (DT_FLOAT32, 32),
    };
    header[OFF_DATATYPE..OFF_DATATYPE + 2].copy_from_slice(&datatype.to_le_bytes());
    header[OFF_BITPIX..OFF_BITPIX + 2].copy_from_slice(&bitpix.to_le_bytes());
    let spacing = volume.spacing_mm();
    let pixdim: [f32; 8] = [
        1.0,
        spacing[0] as f32,
        spacing[1] as f32,
        spacing[2] as f32,
        0.0,
        0.0,
        0.0,
        0.0,
    ];
    for (i, p) in pixdim.iter().enumerate() {
        header[OFF_PIXDIM + 4 * i..OFF_PIXDIM + 4 * i + 4].copy_from_slice(&p.to_le_bytes());
    }
    header[OFF_VOX_OFFSET..OFF_VOX_OFFSET + 4].copy_from_slice(&352.0f32.to_le_bytes());
    header[OFF_SCL_SLOPE..OFF_SCL_SLOPE + 4].copy_from_slice(&0.0f32.to_le_bytes());
    header[OFF_SCL_INTER..OFF_SCL_INTER + 4].copy_from_slice(&0.0f32.to_le_bytes());
    header[OFF_MAGIC..OFF_MAGIC + 4].copy_from_slice(b"n+1\0");

    let mut bytes = header.to_vec();
    bytes.extend(encode_elements(volume.data(), volume.dtype()));
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
}
