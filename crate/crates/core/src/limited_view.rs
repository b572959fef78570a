//! Limited-view masking and merge-Radon preprocessing.
//!
//! Missing projections are kept on the full angle grid as zero-filled
//! columns plus an explicit per-angle mask, so every downstream array keeps
//! the full-view shape.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tomo::{fbp_reconstruct, radon_forward, FilterKind, Sinogram};

/// Angular span covered by a parallel-beam angle grid, in degrees.
pub const ANGULAR_SPAN: f64 = 180.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AngularMask {
    valid: Vec<bool>,
}

impl AngularMask {
    pub fn new(valid: Vec<bool>) -> Result<Self> {
        if !valid.iter().any(|&v| v) {
            return Err(Error::InvalidArgument("mask has no valid angle".into()));
        }
        Ok(Self { valid })
    }

    pub fn all_valid(n: usize) -> Self {
        Self { valid: vec![true; n] }
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn len(&self) -> usize {
        self.valid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid.is_empty()
    }

    pub fn n_valid(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn is_full(&self) -> bool {
        self.valid.iter().all(|&v| v)
    }

    /// 1.0 for valid angles, 0.0 for masked ones.
    pub fn as_f32(&self) -> Vec<f32> {
        self.valid.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect()
    }

    pub fn from_f32(values: &[f32]) -> Result<Self> {
        let valid = values
            .iter()
            .map(|&x| {
                if x == 1.0 {
                    Ok(true)
                } else if x == 0.0 {
                    Ok(false)
                } else {
                    Err(Error::Format(format!("mask value {x} is not 0 or 1")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(valid)
    }
}

/// Sinogram with masked columns zero-filled.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedSinogram {
    sino: Sinogram,
    mask: AngularMask,
}

impl MaskedSinogram {
    /// Pair `sino` with `mask`, zero-filling the masked columns.
    pub fn new(mut sino: Sinogram, mask: AngularMask) -> Result<Self> {
        if mask.len() != sino.n_angles() {
            return Err(Error::ShapeMismatch(format!(
                "mask has {} angles, sinogram has {}",
                mask.len(),
                sino.n_angles()
            )));
        }
        let na = sino.n_angles();
        let nd = sino.n_detectors();
        let data = sino.data_mut();
        for (a, &ok) in mask.valid().iter().enumerate() {
            if !ok {
                for d in 0..nd {
                    data[d * na + a] = 0.0;
                }
            }
        }
        Ok(Self { sino, mask })
    }

    pub fn sino(&self) -> &Sinogram {
        &self.sino
    }

    pub fn mask(&self) -> &AngularMask {
        &self.mask
    }

    pub fn into_parts(self) -> (Sinogram, AngularMask) {
        (self.sino, self.mask)
    }
}

/// Which contiguous wedge is removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutMode {
    Rear,
    Middle,
}

impl FromStr for CutMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rear" | "post" => Ok(CutMode::Rear),
            "middle" | "mid" => Ok(CutMode::Middle),
            other => Err(Error::InvalidArgument(format!("unknown cut mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for CutMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CutMode::Rear => "rear",
            CutMode::Middle => "middle",
        })
    }
}

fn whole_degrees(degrees: f64) -> Result<f64> {
    if !degrees.is_finite() || !(0.0..ANGULAR_SPAN).contains(&degrees) {
        return Err(Error::InvalidArgument(format!("cut of {degrees} degrees outside [0, {ANGULAR_SPAN})")));
    }
    Ok(degrees.ceil())
}

/// Build the mask for a cut without touching any data.
pub fn cut_mask(angles: &[f64], mode: CutMode, degrees: f64) -> Result<AngularMask> {
    let d = whole_degrees(degrees)?;
    let (lo, hi) = match mode {
        CutMode::Rear => (ANGULAR_SPAN - d, f64::INFINITY),
        CutMode::Middle => ((ANGULAR_SPAN - d) / 2.0, (ANGULAR_SPAN + d) / 2.0),
    };
    let valid = angles.iter().map(|&a| d == 0.0 || !(a >= lo && a < hi)).collect();
    AngularMask::new(valid)
}

/// Invalidate the last `degrees` (rounded up) of the angular range.
pub fn cut_rear(sino: &Sinogram, degrees: f64) -> Result<MaskedSinogram> {
    let mask = cut_mask(sino.angles(), CutMode::Rear, degrees)?;
    MaskedSinogram::new(sino.clone(), mask)
}

/// Invalidate the centred wedge `[(180 - d) / 2, (180 + d) / 2)`.
pub fn cut_middle(sino: &Sinogram, degrees: f64) -> Result<MaskedSinogram> {
    let mask = cut_mask(sino.angles(), CutMode::Middle, degrees)?;
    MaskedSinogram::new(sino.clone(), mask)
}

pub fn cut(sino: &Sinogram, mode: CutMode, degrees: f64) -> Result<MaskedSinogram> {
    match mode {
        CutMode::Rear => cut_rear(sino, degrees),
        CutMode::Middle => cut_middle(sino, degrees),
    }
}

/// Fill the masked wedge with the re-projection of the limited-view FBP.
///
/// The reconstruction grid is square with side `n_detectors`. Valid columns
/// are copied from the input unchanged.
pub fn merge_radon(masked: &MaskedSinogram, kind: FilterKind) -> Result<Sinogram> {
    if masked.mask.is_full() {
        return Ok(masked.sino.clone());
    }
    let sino = &masked.sino;
    let nd = sino.n_detectors();
    let recon = fbp_reconstruct(sino, kind, nd, nd)?;
    let reproj = radon_forward(&recon, sino.angles(), nd)?;
    Ok(splice_columns(sino, &reproj, masked.mask.valid()))
}

/// Columns from `known` where `valid`, from `fill` elsewhere.
pub fn splice_columns(known: &Sinogram, fill: &Sinogram, valid: &[bool]) -> Sinogram {
    let na = known.n_angles();
    let mut out = fill.clone();
    let data = out.data_mut();
    for (i, v) in data.iter_mut().enumerate() {
        if valid[i % na] {
            *v = known.data()[i];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tomo::{degree_grid, ImageSlice};

    fn ramp_sino(nd: usize, na: usize) -> Sinogram {
        let data = (0..nd * na).map(|i| 1.0 + (i % 97) as f64 * 0.25).collect();
        Sinogram::new(nd, degree_grid(na), data).unwrap()
    }

    fn masked_range(m: &MaskedSinogram) -> Vec<usize> {
        m.mask().valid().iter().enumerate().filter(|(_, &v)| !v).map(|(i, _)| i).collect()
    }

    #[test]
    fn rear_cuts() {
        let s = ramp_sino(8, 180);
        let m = cut_rear(&s, 60.0).unwrap();
        assert_eq!(masked_range(&m), (120..180).collect::<Vec<_>>());
        let m = cut_rear(&s, 120.0).unwrap();
        assert_eq!(m.mask().n_valid(), 60);
        for a in 60..180 {
            assert!(m.sino().column(a).iter().all(|&v| v == 0.0));
        }
        let m = cut_rear(&s, 0.0).unwrap();
        assert!(m.mask().is_full());
        assert_eq!(m.sino(), &s);
    }

    #[test]
    fn middle_cuts() {
        let s = ramp_sino(4, 180);
        for (deg, lo, hi) in [(60.0, 60, 120), (90.0, 45, 135), (120.0, 30, 150)] {
            let m = cut_middle(&s, deg).unwrap();
            assert_eq!(masked_range(&m), (lo..hi).collect::<Vec<_>>(), "cut {deg}");
        }
    }

    #[test]
    fn fractional_degrees_round_up() {
        let s = ramp_sino(4, 180);
        assert_eq!(cut_rear(&s, 59.2).unwrap().mask().n_valid(), 120);
    }

    #[test]
    fn rejects_full_span() {
        let s = ramp_sino(4, 180);
        assert!(cut_rear(&s, 180.0).is_err());
        assert!(cut_middle(&s, 200.0).is_err());
        assert!(cut_rear(&s, -1.0).is_err());
    }

    #[test]
    fn valid_columns_untouched() {
        let s = ramp_sino(6, 180);
        let m = cut_middle(&s, 90.0).unwrap();
        for a in (0..45).chain(135..180) {
            assert_eq!(m.sino().column(a), s.column(a));
        }
    }

    #[test]
    fn merge_is_identity_on_full_view() {
        let s = ramp_sino(16, 30);
        let m = MaskedSinogram::new(s.clone(), AngularMask::all_valid(30)).unwrap();
        assert_eq!(merge_radon(&m, FilterKind::RamLak).unwrap(), s);
    }

    #[test]
    fn merge_fills_gap_and_keeps_known() {
        let n = 32;
        let c = (n as f64 - 1.0) / 2.0;
        let img = ImageSlice::new(
            n,
            n,
            (0..n * n)
                .map(|i| {
                    let (y, x) = ((i / n) as f64 - c, (i % n) as f64 - c - 3.0);
                    if x * x / 100.0 + y * y / 49.0 <= 1.0 {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
        )
        .unwrap();
        let s = radon_forward(&img, &degree_grid(180), n).unwrap();
        let m = cut_rear(&s, 60.0).unwrap();
        let merged = merge_radon(&m, FilterKind::RamLak).unwrap();
        for a in 0..120 {
            assert_eq!(merged.column(a), s.column(a));
        }
        for a in 120..180 {
            assert!(merged.column(a).iter().any(|&v| v != 0.0), "column {a} empty");
        }
    }

    #[test]
    fn mask_f32_roundtrip() {
        let m = AngularMask::new(vec![true, false, true]).unwrap();
        assert_eq!(AngularMask::from_f32(&m.as_f32()).unwrap(), m);
        assert!(AngularMask::from_f32(&[0.5]).is_err());
        assert!(AngularMask::from_f32(&[0.0, 0.0]).is_err());
    }
}
