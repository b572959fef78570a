//! Synthetic phantoms: the 2-D Shepp-Logan slice and random ellipsoid
//! volumes with inter-slice continuity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tomo::ImageSlice;

/// (intensity, a, b, x0, y0, phi degrees) in the unit square [-1,1]^2,
/// modified-contrast variant whose values span [0,1].
pub const SHEPP_LOGAN_ELLIPSES: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
];

/// Unit-square coordinates of a pixel centre; y points up.
pub fn unit_coords(size: usize, row: usize, col: usize) -> (f64, f64) {
    let half = size as f64 / 2.0;
    let c = (size as f64 - 1.0) / 2.0;
    ((col as f64 - c) / half, (c - row as f64) / half)
}

fn inside_ellipse(e: &[f64; 6], x: f64, y: f64) -> bool {
    let (s, c) = e[5].to_radians().sin_cos();
    let (dx, dy) = (x - e[3], y - e[4]);
    let u = dx * c + dy * s;
    let v = -dx * s + dy * c;
    (u / e[1]).powi(2) + (v / e[2]).powi(2) <= 1.0
}

/// Sum of the intensities of every ellipse covering `(x, y)`.
pub fn shepp_logan_value(x: f64, y: f64) -> f64 {
    SHEPP_LOGAN_ELLIPSES.iter().filter(|e| inside_ellipse(e, x, y)).map(|e| e[0]).sum()
}

/// Shepp-Logan sampled at pixel centres, clamped to [0,1].
pub fn shepp_logan(size: usize) -> Result<ImageSlice> {
    if size < 32 {
        return Err(Error::InvalidArgument(format!("shepp_logan size {size} < 32")));
    }
    let mut data = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            let (x, y) = unit_coords(size, r, c);
            data.push(shepp_logan_value(x, y).clamp(0.0, 1.0));
        }
    }
    ImageSlice::new(size, size, data)
}

/// Ellipsoid in pixel units: x, y centred on the slice, z in slice indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidSpec {
    pub center: [f64; 3],
    pub semi_axes: [f64; 3],
    /// Rotation about z, radians.
    pub rotation: f64,
    pub intensity: f64,
}

impl EllipsoidSpec {
    pub fn validate(&self) -> Result<()> {
        if self.semi_axes.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::InvalidArgument(format!("semi-axes {:?} must be positive", self.semi_axes)));
        }
        if !(self.center.iter().all(|v| v.is_finite()) && self.rotation.is_finite() && self.intensity.is_finite()) {
            return Err(Error::NonFinite("ellipsoid parameters".into()));
        }
        Ok(())
    }

    fn contains(&self, x: f64, y: f64, z: f64) -> bool {
        let (s, c) = self.rotation.sin_cos();
        let (dx, dy, dz) = (x - self.center[0], y - self.center[1], z - self.center[2]);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.semi_axes[0]).powi(2) + (v / self.semi_axes[1]).powi(2) + (dz / self.semi_axes[2]).powi(2) <= 1.0
    }
}

/// Cross-section of a set of ellipsoids at height `z`, clamped to [0,1].
pub fn render_slice(ellipsoids: &[EllipsoidSpec], size: usize, z: f64) -> Result<ImageSlice> {
    let c = (size as f64 - 1.0) / 2.0;
    let mut data = vec![0.0; size * size];
    for (i, v) in data.iter_mut().enumerate() {
        let (x, y) = ((i % size) as f64 - c, c - (i / size) as f64);
        let s: f64 = ellipsoids.iter().filter(|e| e.contains(x, y, z)).map(|e| e.intensity).sum();
        *v = s.clamp(0.0, 1.0);
    }
    ImageSlice::new(size, size, data)
}

/// Ordered stack of equally sized slices from one case.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceVolume {
    case_id: String,
    slices: Vec<ImageSlice>,
}

pub const MIN_SLICES: usize = 5;

impl SliceVolume {
    pub fn new(case_id: impl Into<String>, slices: Vec<ImageSlice>) -> Result<Self> {
        if slices.len() < MIN_SLICES {
            return Err(Error::InvalidArgument(format!("volume needs >= {MIN_SLICES} slices, got {}", slices.len())));
        }
        if slices.iter().any(|s| !s.same_dims(&slices[0])) {
            return Err(Error::ShapeMismatch("volume slices differ in size".into()));
        }
        Ok(Self { case_id: case_id.into(), slices })
    }

    pub fn case_id(&self) -> &str {
        &self.case_id
    }

    pub fn slices(&self) -> &[ImageSlice] {
        &self.slices
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn width(&self) -> usize {
        self.slices[0].width()
    }

    pub fn height(&self) -> usize {
        self.slices[0].height()
    }

    pub fn into_slices(self) -> Vec<ImageSlice> {
        self.slices
    }

    /// Mean absolute difference between consecutive slices, per pair.
    pub fn adjacent_differences(&self) -> Vec<f64> {
        self.slices
            .windows(2)
            .map(|p| {
                let n = p[0].data().len() as f64;
                p[0].data().iter().zip(p[1].data()).map(|(a, b)| (a - b).abs()).sum::<f64>() / n
            })
            .collect()
    }
}

/// Render `n_slices` unit-spaced cross-sections of `ellipsoids`.
pub fn volume_from_ellipsoids(
    case_id: impl Into<String>,
    ellipsoids: &[EllipsoidSpec],
    n_slices: usize,
    size: usize,
) -> Result<SliceVolume> {
    for e in ellipsoids {
        e.validate()?;
    }
    let slices = (0..n_slices).map(|k| render_slice(ellipsoids, size, k as f64)).collect::<Result<Vec<_>>>()?;
    SliceVolume::new(case_id, slices)
}

/// Random ellipsoids for a volume: one body ellipsoid spanning every slice
/// plus `n_ellipsoids` inner structures.
pub fn random_ellipsoids(n_slices: usize, size: usize, n_ellipsoids: usize, seed: u64) -> Vec<EllipsoidSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = size as f64 / 2.0;
    let zc = (n_slices as f64 - 1.0) / 2.0;
    let body_a = half * rng.gen_range(0.72..0.9);
    let body_b = half * rng.gen_range(0.6..0.85);
    let mut out = vec![EllipsoidSpec {
        center: [0.0, 0.0, zc],
        semi_axes: [body_a, body_b, n_slices as f64 * 4.0],
        rotation: rng.gen_range(-0.3..0.3),
        intensity: rng.gen_range(0.25..0.4),
    }];
    for _ in 0..n_ellipsoids {
        let r = rng.gen_range(0.0..0.7f64).sqrt();
        let t = rng.gen_range(0.0..std::f64::consts::TAU);
        out.push(EllipsoidSpec {
            center: [r * body_a * t.cos(), r * body_b * t.sin(), rng.gen_range(-2.0..n_slices as f64 + 1.0)],
            semi_axes: [
                half * rng.gen_range(0.05..0.3),
                half * rng.gen_range(0.05..0.3),
                rng.gen_range(3.0..(n_slices as f64).max(4.0)),
            ],
            rotation: rng.gen_range(0.0..std::f64::consts::PI),
            intensity: if rng.gen_bool(0.7) { rng.gen_range(0.15..0.6) } else { -rng.gen_range(0.1..0.25) },
        });
    }
    out
}

/// Seeded random ellipsoid volume; slices are z = 0, 1, .., n_slices-1.
pub fn volume_phantom(n_slices: usize, size: usize, n_ellipsoids: usize, seed: u64) -> Result<SliceVolume> {
    if n_slices < MIN_SLICES {
        return Err(Error::InvalidArgument(format!("n_slices {n_slices} < {MIN_SLICES}")));
    }
    if size < 16 {
        return Err(Error::InvalidArgument(format!("phantom size {size} < 16")));
    }
    let specs = random_ellipsoids(n_slices, size, n_ellipsoids, seed);
    let vol = volume_from_ellipsoids(format!("case{seed:05}"), &specs, n_slices, size)?;
    let range = vol
        .slices()
        .iter()
        .map(|s| {
            let (lo, hi) = s.min_max();
            hi - lo
        })
        .fold(f64::INFINITY, f64::min);
    if vol.adjacent_differences().iter().any(|&d| d >= range) {
        return Err(Error::InvalidArgument(format!("seed {seed} produced a discontinuous volume")));
    }
    Ok(vol)
}

/// Disjoint case-id lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplit {
    pub fn new(train: Vec<String>, val: Vec<String>, test: Vec<String>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for id in train.iter().chain(&val).chain(&test) {
            if !seen.insert(id) {
                return Err(Error::InvalidArgument(format!("case {id} appears in more than one split")));
            }
        }
        Ok(Self { train, val, test })
    }

    /// Consecutive split: first `n_train`, then `n_val`, then the rest.
    pub fn sequential(ids: &[String], n_train: usize, n_val: usize) -> Result<Self> {
        if n_train + n_val > ids.len() {
            return Err(Error::InvalidArgument(format!(
                "{n_train} train + {n_val} val cases exceed {} available",
                ids.len()
            )));
        }
        Self::new(ids[..n_train].to_vec(), ids[n_train..n_train + n_val].to_vec(), ids[n_train + n_val..].to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::psnr;

    #[test]
    fn shepp_logan_outside_and_centre() {
        let n = 129;
        let img = shepp_logan(n).unwrap();
        assert_eq!(img.get(0, 0), 0.0);
        assert_eq!(img.get(n / 2, 0), 0.0);
        // at the origin only the two outer ellipses cover: 1 - 0.8
        assert!((img.get(n / 2, n / 2) - 0.2).abs() < 1e-12);
        let (lo, hi) = img.min_max();
        assert!(lo >= 0.0 && hi <= 1.0);
        assert!(shepp_logan(31).is_err());
    }

    #[test]
    fn shepp_logan_mirror_symmetric_off_asymmetric_ellipses() {
        let n = 128;
        let img = shepp_logan(n).unwrap();
        let asym = [2usize, 3, 7, 9];
        let mut compared = 0;
        for r in 0..n {
            for c in 0..n {
                let (x, y) = unit_coords(n, r, c);
                let touched = asym.iter().any(|&k| {
                    let e = &SHEPP_LOGAN_ELLIPSES[k];
                    inside_ellipse(e, x, y) || inside_ellipse(e, -x, y)
                });
                if !touched {
                    assert!((img.get(r, c) - img.get(r, n - 1 - c)).abs() <= 1e-12);
                    compared += 1;
                }
            }
        }
        assert!(compared > n * n * 3 / 4);
    }

    #[test]
    fn volume_is_seed_deterministic() {
        let a = volume_phantom(6, 32, 5, 7).unwrap();
        let b = volume_phantom(6, 32, 5, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, volume_phantom(6, 32, 5, 8).unwrap());
        assert!(volume_phantom(4, 32, 5, 7).is_err());
    }

    #[test]
    fn cross_section_radius_follows_ellipsoid() {
        let (a, c, z0) = (20.0, 8.0, 10.0);
        let e = EllipsoidSpec { center: [0.0, 0.0, z0], semi_axes: [a, a, c], rotation: 0.0, intensity: 1.0 };
        let vol = volume_from_ellipsoids("single", &[e], 21, 64).unwrap();
        for z in [10usize, 14, 16] {
            let count = vol.slices()[z].data().iter().filter(|&&v| v > 0.5).count() as f64;
            let measured = (count / std::f64::consts::PI).sqrt();
            let dz = z as f64 - z0;
            let expected = a * (1.0 - dz * dz / (c * c)).sqrt();
            assert!((measured - expected).abs() < 0.5, "z={z}: {measured} vs {expected}");
        }
    }

    #[test]
    fn adjacent_slices_more_similar_than_distant() {
        let (mut near, mut far) = (0.0, 0.0);
        for seed in 0..20 {
            let v = volume_phantom(16, 32, 8, seed).unwrap();
            let s = v.slices();
            near += psnr(&s[3], &s[4], 1.0).unwrap();
            far += psnr(&s[3], &s[13], 1.0).unwrap();
        }
        assert!(near > far, "{near} vs {far}");
    }

    #[test]
    fn split_must_be_disjoint() {
        let ids: Vec<String> = (0..6).map(|i| format!("c{i}")).collect();
        let s = DatasetSplit::sequential(&ids, 3, 1).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (3, 1, 2));
        assert!(DatasetSplit::new(vec!["a".into()], vec!["a".into()], vec![]).is_err());
        assert!(DatasetSplit::sequential(&ids, 5, 2).is_err());
    }
}
