use std::str::FromStr;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::Sinogram;
use crate::error::Error;

/// Ramp filter window used by FBP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    #[default]
    RamLak,
    SheppLogan,
    Hann,
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "ramlak" | "ramp" => Ok(FilterKind::RamLak),
            "shepplogan" => Ok(FilterKind::SheppLogan),
            "hann" | "hanning" => Ok(FilterKind::Hann),
            other => Err(Error::InvalidArgument(format!("unknown filter {other:?}"))),
        }
    }
}

/// Length of the zero-padded transform: next power of two `>= 2 n`, at least 64.
pub(crate) fn padded_len(n_detectors: usize) -> usize {
    (2 * n_detectors).max(64).next_power_of_two()
}

/// Frequency response sampled on the FFT grid: `|u|` for `u` in cycles per
/// detector, times the window. The DC bin is exactly zero.
pub(crate) fn frequency_response(kind: FilterKind, len: usize) -> Vec<f64> {
    (0..len)
        .map(|f| {
            let u = if f < len / 2 { f as f64 } else { f as f64 - len as f64 } / len as f64;
            let ramp = u.abs();
            let window = match kind {
                FilterKind::RamLak => 1.0,
                FilterKind::SheppLogan if u != 0.0 => {
                    let x = std::f64::consts::PI * u;
                    x.sin() / x
                }
                FilterKind::SheppLogan => 1.0,
                FilterKind::Hann => 0.5 * (1.0 + (2.0 * std::f64::consts::PI * u).cos()),
            };
            ramp * window
        })
        .collect()
}

/// Reusable filter for one detector count.
pub(crate) struct ProjectionFilter {
    n: usize,
    response: Vec<f64>,
    fwd: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inv: std::sync::Arc<dyn rustfft::Fft<f64>>,
    buf: Vec<Complex<f64>>,
}

impl ProjectionFilter {
    pub(crate) fn new(kind: FilterKind, n_detectors: usize) -> Self {
        let len = padded_len(n_detectors);
        let mut planner = FftPlanner::new();
        Self {
            n: n_detectors,
            response: frequency_response(kind, len),
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
            buf: vec![Complex::new(0.0, 0.0); len],
        }
    }

    /// Filter one projection and return the whole padded result.
    pub(crate) fn filter_padded(&mut self, projection: &[f64]) -> Vec<f64> {
        let len = self.buf.len();
        for (i, b) in self.buf.iter_mut().enumerate() {
            *b = Complex::new(if i < self.n { projection[i] } else { 0.0 }, 0.0);
        }
        self.fwd.process(&mut self.buf);
        for (b, &r) in self.buf.iter_mut().zip(&self.response) {
            *b *= r;
        }
        self.inv.process(&mut self.buf);
        let scale = 1.0 / len as f64;
        self.buf.iter().map(|c| c.re * scale).collect()
    }

    pub(crate) fn filter(&mut self, projection: &[f64]) -> Vec<f64> {
        let mut out = self.filter_padded(projection);
        out.truncate(self.n);
        out
    }
}

/// Ramp-filter every projection of `sino` along the detector axis.
pub fn apply_filter(sino: &Sinogram, kind: FilterKind) -> Sinogram {
    let nd = sino.n_detectors();
    let mut filter = ProjectionFilter::new(kind, nd);
    let mut out = sino.clone();
    for a in 0..sino.n_angles() {
        let col = filter.filter(&sino.column(a));
        out.set_column(a, &col);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tomo::degree_grid;
    use std::f64::consts::PI;

    /// Closed-form discrete Ram-Lak kernel at integer offset `k`.
    fn ramlak_kernel(k: i64) -> f64 {
        if k == 0 {
            0.25
        } else if k % 2 == 0 {
            0.0
        } else {
            -1.0 / (PI * PI * (k * k) as f64)
        }
    }

    #[test]
    fn impulse_matches_closed_form_kernel() {
        let n = 64;
        let mut sino = Sinogram::zeros(n, vec![0.0]).unwrap();
        let c = n / 2;
        sino.data_mut()[c] = 1.0;
        let out = apply_filter(&sino, FilterKind::RamLak);
        let len = padded_len(n) as f64;
        for d in 0..n {
            let k = d as i64 - c as i64;
            let diff = (out.get(d, 0) - ramlak_kernel(k)).abs();
            // sampling |u| instead of the infinite-support kernel leaves an
            // O(1/len^2) discrepancy
            assert!(diff <= 1.0 / (len * len), "offset {k}: {} vs {}", out.get(d, 0), ramlak_kernel(k));
        }
        assert!((out.get(c, 0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn constant_projection_has_zero_dc_before_cropping() {
        let n = 48;
        let mut f = ProjectionFilter::new(FilterKind::RamLak, n);
        for c in [1.0, -3.5, 1e3] {
            let padded = f.filter_padded(&vec![c; n]);
            let mean = padded.iter().sum::<f64>() / padded.len() as f64;
            assert!(mean.abs() <= 1e-8 * c.abs(), "mean {mean}");
        }
    }

    #[test]
    fn linear() {
        let n = 32;
        let angles = degree_grid(5);
        let x: Vec<f64> = (0..n * 5).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let y: Vec<f64> = (0..n * 5).map(|i| ((i * 13) % 7) as f64 * 0.5).collect();
        let sx = Sinogram::new(n, angles.clone(), x.clone()).unwrap();
        let sy = Sinogram::new(n, angles.clone(), y.clone()).unwrap();
        let comb: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
        let sc = Sinogram::new(n, angles, comb).unwrap();
        for kind in [FilterKind::RamLak, FilterKind::SheppLogan, FilterKind::Hann] {
            let fx = apply_filter(&sx, kind);
            let fy = apply_filter(&sy, kind);
            let fc = apply_filter(&sc, kind);
            let scale = fc.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..fc.data().len() {
                let want = 2.0 * fx.data()[i] - 3.0 * fy.data()[i];
                assert!((fc.data()[i] - want).abs() <= 1e-6 * scale);
            }
        }
    }

    #[test]
    fn windows_attenuate_high_frequencies() {
        let len = 128;
        let ram = frequency_response(FilterKind::RamLak, len);
        let sl = frequency_response(FilterKind::SheppLogan, len);
        let hann = frequency_response(FilterKind::Hann, len);
        assert_eq!(ram[0], 0.0);
        let nyq = len / 2;
        assert!((ram[nyq] - 0.5).abs() < 1e-12);
        assert!(sl[nyq] < ram[nyq]);
        assert!(hann[nyq].abs() < 1e-12);
    }

    #[test]
    fn parses_names() {
        assert_eq!("ram-lak".parse::<FilterKind>().unwrap(), FilterKind::RamLak);
        assert_eq!("SheppLogan".parse::<FilterKind>().unwrap(), FilterKind::SheppLogan);
        assert_eq!("hann".parse::<FilterKind>().unwrap(), FilterKind::Hann);
        assert!("cosine".parse::<FilterKind>().is_err());
    }
}
