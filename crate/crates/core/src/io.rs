//! Grid files and PGM previews.
//!
//! Grid layout (little-endian): magic `LVCT1\0`, `u32` rank, `rank` x `u32`
//! dims, then row-major `f32` values. Images are `[height, width]`,
//! sinograms `[n_detectors, n_angles]`, masks `[n_angles]` of 0/1, volumes
//! `[n_slices, height, width]`.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::limited_view::AngularMask;
use crate::phantom::SliceVolume;
use crate::tomo::{degree_grid, ImageSlice, Sinogram};

pub const GRID_MAGIC: &[u8; 6] = b"LVCT1\0";
pub const MAX_RANK: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Grid {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if dims.is_empty() || dims.len() > MAX_RANK {
            return Err(Error::InvalidArgument(format!("grid rank {} not in 1..={MAX_RANK}", dims.len())));
        }
        if dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(Error::InvalidArgument(format!("grid dims {dims:?} exceed u32")));
        }
        if dims.iter().product::<usize>() != data.len() {
            return Err(Error::ShapeMismatch(format!("grid dims {dims:?} vs {} values", data.len())));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("grid value {i} is {}", data[i])));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(10 + 4 * (self.dims.len() + self.data.len()));
        out.extend_from_slice(GRID_MAGIC);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let truncated = |detail: String| Error::Truncated { path: path.to_path_buf(), detail };
        if bytes.len() < GRID_MAGIC.len() || &bytes[..6] != GRID_MAGIC {
            return Err(Error::BadMagic { path: path.to_path_buf(), expected: "LVCT1\\0" });
        }
        let word = |i: usize| -> Result<usize> {
            let at = 6 + 4 * i;
            bytes
                .get(at..at + 4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
                .ok_or_else(|| truncated(format!("header ends at byte {}", bytes.len())))
        };
        let rank = word(0)?;
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::DimOverflow { path: path.to_path_buf(), detail: format!("rank {rank}") });
        }
        let dims = (1..=rank).map(word).collect::<Result<Vec<_>>>()?;
        let header = 6 + 4 * (rank + 1);
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|n| n.checked_mul(4).and_then(|b| b.checked_add(header)).is_some())
            .ok_or_else(|| Error::DimOverflow { path: path.to_path_buf(), detail: format!("dims {dims:?}") })?;
        let body = &bytes[header..];
        if body.len() < count * 4 {
            return Err(truncated(format!("dims {dims:?} need {} data bytes, found {}", count * 4, body.len())));
        }
        if body.len() > count * 4 {
            return Err(Error::Format(format!(
                "{}: {} trailing bytes after grid data",
                path.display(),
                body.len() - count * 4
            )));
        }
        let data = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Grid::new(dims, data).map_err(|e| match e {
            Error::NonFinite(m) => Error::NonFinite(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_image(img: &ImageSlice) -> Self {
        Self { dims: vec![img.height(), img.width()], data: img.data().iter().map(|&v| v as f32).collect() }
    }

    pub fn to_image(&self) -> Result<ImageSlice> {
        match self.dims[..] {
            [h, w] => ImageSlice::new(w, h, self.data.iter().map(|&v| v as f64).collect()),
            _ => Err(Error::ShapeMismatch(format!("expected a rank-2 image grid, got {:?}", self.dims))),
        }
    }

    pub fn from_sinogram(s: &Sinogram) -> Self {
        Self { dims: vec![s.n_detectors(), s.n_angles()], data: s.data().iter().map(|&v| v as f32).collect() }
    }

    /// Sinogram on the uniform one-view-per-`180/n` degree grid.
    pub fn to_sinogram(&self) -> Result<Sinogram> {
        match self.dims[..] {
            [nd, na] => Sinogram::new(nd, degree_grid(na), self.data.iter().map(|&v| v as f64).collect()),
            _ => Err(Error::ShapeMismatch(format!("expected a rank-2 sinogram grid, got {:?}", self.dims))),
        }
    }

    pub fn from_mask(m: &AngularMask) -> Self {
        Self { dims: vec![m.len()], data: m.as_f32() }
    }

    pub fn to_mask(&self) -> Result<AngularMask> {
        match self.dims[..] {
            [_] => AngularMask::from_f32(&self.data),
            _ => Err(Error::ShapeMismatch(format!("expected a rank-1 mask grid, got {:?}", self.dims))),
        }
    }

    pub fn from_volume(v: &SliceVolume) -> Self {
        let data = v.slices().iter().flat_map(|s| s.data().iter().map(|&x| x as f32)).collect();
        Self { dims: vec![v.len(), v.height(), v.width()], data }
    }

    pub fn to_volume(&self, case_id: &str) -> Result<SliceVolume> {
        match self.dims[..] {
            [n, h, w] => {
                let slices = (0..n)
                    .map(|k| {
                        let src = &self.data[k * h * w..(k + 1) * h * w];
                        ImageSlice::new(w, h, src.iter().map(|&v| v as f64).collect())
                    })
                    .collect::<Result<Vec<_>>>()?;
                SliceVolume::new(case_id, slices)
            }
            _ => Err(Error::ShapeMismatch(format!("expected a rank-3 volume grid, got {:?}", self.dims))),
        }
    }
}

pub fn save_grid(path: &Path, grid: &Grid) -> Result<()> {
    std::fs::write(path, grid.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_grid(path: &Path) -> Result<Grid> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Grid::from_bytes(&bytes, path)
}

/// Min-max scaled 8-bit gray levels; a constant image maps to 128.
pub fn to_gray8(img: &ImageSlice) -> Vec<u8> {
    let (lo, hi) = img.min_max();
    if hi <= lo {
        return vec![128; img.data().len()];
    }
    img.data().iter().map(|&v| ((v - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8).collect()
}

pub fn pgm_bytes(img: &ImageSlice) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(to_gray8(img));
    out
}

/// Binary PGM (P5) preview.
pub fn export_pgm(img: &ImageSlice, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&pgm_bytes(img)).map_err(|e| Error::io(path, e))
}
