use crate::error::{Error, Result};
use crate::nn::{Scalar, Tensor};

/// Original spatial size and the bottom/right padding that was added.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PadRecord {
    pub height: usize,
    pub width: usize,
    pub pad_bottom: usize,
    pub pad_right: usize,
}

fn reflect(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i % period;
    if m < n {
        m
    } else {
        period - m
    }
}

/// Mirror-pad the bottom and right edges (edge sample not repeated) up to
/// the next multiple of `multiple`.
pub fn pad_reflect<T: Scalar>(x: &Tensor<T>, multiple: usize) -> Result<(Tensor<T>, PadRecord)> {
    if multiple == 0 {
        return Err(Error::InvalidArgument("pad multiple must be >= 1".into()));
    }
    let (n, c, h, w) = x.nchw();
    let (hp, wp) = (h.div_ceil(multiple) * multiple, w.div_ceil(multiple) * multiple);
    let rec = PadRecord { height: h, width: w, pad_bottom: hp - h, pad_right: wp - w };
    if hp == h && wp == w {
        return Ok((x.clone(), rec));
    }
    let mut out = Vec::with_capacity(n * c * hp * wp);
    for p in 0..n * c {
        let plane = &x.data()[p * h * w..(p + 1) * h * w];
        for r in 0..hp {
            let row = &plane[reflect(r, h) * w..(reflect(r, h) + 1) * w];
            out.extend_from_slice(row);
            out.extend((w..wp).map(|cc| row[reflect(cc, w)]));
        }
    }
    Ok((Tensor::from_vec(&[n, c, hp, wp], out)?, rec))
}

pub fn unpad<T: Scalar>(x: &Tensor<T>, rec: &PadRecord) -> Result<Tensor<T>> {
    let (n, c, hp, wp) = x.nchw();
    if hp != rec.height + rec.pad_bottom || wp != rec.width + rec.pad_right {
        return Err(Error::ShapeMismatch(format!("unpad of {hp}x{wp} with record {rec:?}")));
    }
    let (h, w) = (rec.height, rec.width);
    let mut out = Vec::with_capacity(n * c * h * w);
    for p in 0..n * c {
        let plane = &x.data()[p * hp * wp..(p + 1) * hp * wp];
        for r in 0..h {
            out.extend_from_slice(&plane[r * wp..r * wp + w]);
        }
    }
    Tensor::from_vec(&[n, c, h, w], out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sinogram_shape_record() {
        let x: Tensor<f32> = Tensor::zeros(&[1, 1, 512, 180]);
        let (p, rec) = pad_reflect(&x, 16).unwrap();
        assert_eq!(p.dims(), &[1, 1, 512, 192]);
        assert_eq!((rec.pad_bottom, rec.pad_right), (0, 12));
        let sq: Tensor<f32> = Tensor::zeros(&[1, 1, 512, 512]);
        let (p, rec) = pad_reflect(&sq, 16).unwrap();
        assert_eq!(p.dims(), sq.dims());
        assert_eq!((rec.pad_bottom, rec.pad_right), (0, 0));
    }

    #[test]
    fn roundtrip_and_mirror() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::from_vec(&[2, 3, 13, 7], (0..2 * 3 * 13 * 7).map(|_| rng.gen::<f64>()).collect()).unwrap();
        let (p, rec) = pad_reflect(&x, 16).unwrap();
        assert_eq!(p.dims(), &[2, 3, 16, 16]);
        assert_eq!(unpad(&p, &rec).unwrap(), x);
        // column 7 mirrors column 5, row 13 mirrors row 11
        assert_eq!(p.data()[7], x.data()[5]);
        assert_eq!(p.data()[13 * 16], x.data()[11 * 7]);
    }
}
