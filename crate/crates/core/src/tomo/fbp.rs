use super::filter::ProjectionFilter;
use super::{FilterKind, ImageSlice, Sinogram};
use crate::error::{Error, Result};

/// Filtered backprojection onto an `out_w x out_h` grid.
///
/// Each pixel accumulates linearly interpolated filtered samples over the
/// angles in index order, scaled by `pi / n_angles`. Zero-filled projections
/// still count towards `n_angles`.
pub fn fbp_reconstruct(sino: &Sinogram, kind: FilterKind, out_w: usize, out_h: usize) -> Result<ImageSlice> {
    let na = sino.n_angles();
    if na < 2 {
        return Err(Error::InvalidArgument(format!("FBP needs at least 2 angles, got {na}")));
    }
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidArgument("output dims must be positive".into()));
    }
    let nd = sino.n_detectors();
    let mut filter = ProjectionFilter::new(kind, nd);
    let filtered: Vec<Vec<f64>> = (0..na).map(|a| filter.filter(&sino.column(a))).collect();
    let trig: Vec<(f64, f64)> = sino.angles().iter().map(|a| a.to_radians().sin_cos()).collect();

    let cx = (out_w as f64 - 1.0) / 2.0;
    let cy = (out_h as f64 - 1.0) / 2.0;
    let det_center = (nd as f64 - 1.0) / 2.0;
    let scale = std::f64::consts::PI / na as f64;
    let mut out = vec![0.0; out_w * out_h];
    for row in 0..out_h {
        let y = row as f64 - cy;
        for col in 0..out_w {
            let x = col as f64 - cx;
            let mut acc = 0.0;
            for (proj, &(sin, cos)) in filtered.iter().zip(&trig) {
                let pos = x * cos + y * sin + det_center;
                let p0 = pos.floor();
                let frac = pos - p0;
                let i0 = p0 as i64;
                if i0 >= 0 && (i0 as usize) < nd {
                    acc += (1.0 - frac) * proj[i0 as usize];
                }
                let i1 = i0 + 1;
                if i1 >= 0 && (i1 as usize) < nd {
                    acc += frac * proj[i1 as usize];
                }
            }
            out[row * out_w + col] = acc * scale;
        }
    }
    ImageSlice::new(out_w, out_h, out)
}
