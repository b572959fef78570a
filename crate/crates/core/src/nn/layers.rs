//! Layers with hand-written backward passes.
//!
//! Each layer caches what its backward pass needs during `forward`, so one
//! instance serves one forward/backward pair at a time. `backward` adds into
//! the parameter gradients and returns the gradient w.r.t. the input.

use rand::Rng;

use super::{Module, Param, Scalar, Tensor};
use crate::error::{Error, Result};

/// 3x3 convolution, stride 1, zero padding 1.
#[derive(Debug, Clone)]
pub struct Conv3x3<T> {
    pub w: Param<T>,
    pub b: Param<T>,
    input: Option<Tensor<T>>,
}

fn im2col<T: Scalar>(x: &[T], c: usize, h: usize, w: usize, cols: &mut [T]) {
    let hw = h * w;
    for ch in 0..c {
        let plane = &x[ch * hw..(ch + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[(ch * 9 + ky * 3 + kx) * hw..(ch * 9 + ky * 3 + kx + 1) * hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    let dst = &mut row[y * w..(y + 1) * w];
                    if sy < 0 || sy >= h as isize {
                        dst.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => {
                            dst[0] = T::zero();
                            dst[1..].copy_from_slice(&src[..w - 1]);
                        }
                        1 => dst.copy_from_slice(src),
                        _ => {
                            dst[..w - 1].copy_from_slice(&src[1..]);
                            dst[w - 1] = T::zero();
                        }
                    }
                }
            }
        }
    }
}

fn col2im<T: Scalar>(cols: &[T], c: usize, h: usize, w: usize, dx: &mut [T]) {
    let hw = h * w;
    for ch in 0..c {
        let plane = &mut dx[ch * hw..(ch + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[(ch * 9 + ky * 3 + kx) * hw..(ch * 9 + ky * 3 + kx + 1) * hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &row[y * w..(y + 1) * w];
                    let dst = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => {
                            for i in 1..w {
                                dst[i - 1] += src[i];
                            }
                        }
                        1 => {
                            for i in 0..w {
                                dst[i] += src[i];
                            }
                        }
                        _ => {
                            for i in 0..w - 1 {
                                dst[i + 1] += src[i];
                            }
                        }
                    }
                }
            }
        }
    }
}

impl<T: Scalar> Conv3x3<T> {
    pub fn new(name: &str, in_c: usize, out_c: usize, rng: &mut impl Rng) -> Self {
        Self {
            w: Param::he_uniform(format!("{name}.weight"), &[out_c, in_c, 3, 3], in_c * 9, rng),
            b: Param::zeros(format!("{name}.bias"), &[out_c]),
            input: None,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.w.value.dims()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.w.value.dims()[0]
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, c, h, w) = x.nchw();
        let (oc, ic) = (self.out_channels(), self.in_channels());
        if c != ic {
            return Err(Error::ShapeMismatch(format!("conv expects {ic} channels, got {c}")));
        }
        let hw = h * w;
        let mut out = Tensor::zeros(&[n, oc, h, w]);
        let mut cols = vec![T::zero(); ic * 9 * hw];
        for b in 0..n {
            im2col(&x.data()[b * c * hw..(b + 1) * c * hw], c, h, w, &mut cols);
            let y = &mut out.data_mut()[b * oc * hw..(b + 1) * oc * hw];
            T::gemm(oc, ic * 9, hw, self.w.value.data(), false, &cols, false, y, false);
            for (o, plane) in y.chunks_mut(hw).enumerate() {
                let bias = self.b.value.data()[o];
                plane.iter_mut().for_each(|v| *v += bias);
            }
        }
        self.input = Some(x.clone());
        Ok(out)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Tensor<T> {
        let x = self.input.take().expect("conv backward without forward");
        let (n, c, h, w) = x.nchw();
        let oc = self.out_channels();
        let hw = h * w;
        let mut dx = Tensor::zeros(x.dims());
        let mut cols = vec![T::zero(); c * 9 * hw];
        let mut dcols = vec![T::zero(); c * 9 * hw];
        for b in 0..n {
            let g = &dy.data()[b * oc * hw..(b + 1) * oc * hw];
            im2col(&x.data()[b * c * hw..(b + 1) * c * hw], c, h, w, &mut cols);
            T::gemm(oc, hw, c * 9, g, false, &cols, true, self.w.grad.data_mut(), true);
            for (o, plane) in g.chunks(hw).enumerate() {
                let s: T = plane.iter().copied().sum();
                self.b.grad.data_mut()[o] += s;
            }
            T::gemm(c * 9, oc, hw, self.w.value.data(), true, g, false, &mut dcols, false);
            col2im(&dcols, c, h, w, &mut dx.data_mut()[b * c * hw..(b + 1) * c * hw]);
        }
        dx
    }
}

impl<T: Scalar> Module<T> for Conv3x3<T> {
    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.w, &self.b]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.w, &mut self.b]
    }
}

/// 2x2 transposed convolution with stride 2: spatial dims double.
#[derive(Debug, Clone)]
pub struct UpConv2x2<T> {
    /// `(in, out, 2, 2)`
    pub w: Param<T>,
    pub b: Param<T>,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> UpConv2x2<T> {
    pub fn new(name: &str, in_c: usize, out_c: usize, rng: &mut impl Rng) -> Self {
        Self {
            w: Param::he_uniform(format!("{name}.weight"), &[in_c, out_c, 2, 2], in_c, rng),
            b: Param::zeros(format!("{name}.bias"), &[out_c]),
            input: None,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.w.value.dims()[0]
    }

    pub fn out_channels(&self) -> usize {
        self.w.value.dims()[1]
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, c, h, w) = x.nchw();
        let (ic, oc) = (self.in_channels(), self.out_channels());
        if c != ic {
            return Err(Error::ShapeMismatch(format!("upconv expects {ic} channels, got {c}")));
        }
        let hw = h * w;
        let (h2, w2) = (2 * h, 2 * w);
        let mut out = Tensor::zeros(&[n, oc, h2, w2]);
        let mut y4 = vec![T::zero(); oc * 4 * hw];
        for b in 0..n {
            let xb = &x.data()[b * c * hw..(b + 1) * c * hw];
            // y4[(o, dy, dx), p] = sum_c w[c, (o, dy, dx)] x[c, p]
            T::gemm(oc * 4, ic, hw, self.w.value.data(), true, xb, false, &mut y4, false);
            let ob = &mut out.data_mut()[b * oc * h2 * w2..(b + 1) * oc * h2 * w2];
            for o in 0..oc {
                let bias = self.b.value.data()[o];
                for k in 0..4 {
                    let (ky, kx) = (k / 2, k % 2);
                    let src = &y4[(o * 4 + k) * hw..(o * 4 + k + 1) * hw];
                    for i in 0..h {
                        for j in 0..w {
                            ob[o * h2 * w2 + (2 * i + ky) * w2 + 2 * j + kx] = src[i * w + j] + bias;
                        }
                    }
                }
            }
        }
        self.input = Some(x.clone());
        Ok(out)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Tensor<T> {
        let x = self.input.take().expect("upconv backward without forward");
        let (n, c, h, w) = x.nchw();
        let oc = self.out_channels();
        let hw = h * w;
        let (h2, w2) = (2 * h, 2 * w);
        let mut dx = Tensor::zeros(x.dims());
        let mut g4 = vec![T::zero(); oc * 4 * hw];
        for b in 0..n {
            let gb = &dy.data()[b * oc * h2 * w2..(b + 1) * oc * h2 * w2];
            for o in 0..oc {
                let mut bsum = T::zero();
                for k in 0..4 {
                    let (ky, kx) = (k / 2, k % 2);
                    let dst = &mut g4[(o * 4 + k) * hw..(o * 4 + k + 1) * hw];
                    for i in 0..h {
                        for j in 0..w {
                            let v = gb[o * h2 * w2 + (2 * i + ky) * w2 + 2 * j + kx];
                            dst[i * w + j] = v;
                            bsum += v;
                        }
                    }
                }
                self.b.grad.data_mut()[o] += bsum;
            }
            let xb = &x.data()[b * c * hw..(b + 1) * c * hw];
            T::gemm(c, hw, oc * 4, xb, false, &g4, true, self.w.grad.data_mut(), true);
            T::gemm(
                c,
                oc * 4,
                hw,
                self.w.value.data(),
                false,
                &g4,
                false,
                &mut dx.data_mut()[b * c * hw..(b + 1) * c * hw],
                false,
            );
        }
        dx
    }
}

impl<T: Scalar> Module<T> for UpConv2x2<T> {
    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.w, &self.b]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.w, &mut self.b]
    }
}

/// 2x2 max pooling, stride 2. Ties resolve to the first element in
/// row-major scan order of the window.
#[derive(Debug, Clone, Default)]
pub struct MaxPool2 {
    argmax: Vec<usize>,
    in_dims: Vec<usize>,
}

impl MaxPool2 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, c, h, w) = x.nchw();
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::ShapeMismatch(format!("maxpool needs even dims, got {h}x{w}")));
        }
        let (ho, wo) = (h / 2, w / 2);
        let mut out = Tensor::zeros(&[n, c, ho, wo]);
        self.argmax = vec![0; n * c * ho * wo];
        let xd = x.data();
        for p in 0..n * c {
            let base = p * h * w;
            for i in 0..ho {
                for j in 0..wo {
                    let mut best = base + 2 * i * w + 2 * j;
                    for idx in [
                        base + 2 * i * w + 2 * j + 1,
                        base + (2 * i + 1) * w + 2 * j,
                        base + (2 * i + 1) * w + 2 * j + 1,
                    ] {
                        if xd[idx] > xd[best] {
                            best = idx;
                        }
                    }
                    let o = p * ho * wo + i * wo + j;
                    out.data_mut()[o] = xd[best];
                    self.argmax[o] = best;
                }
            }
        }
        self.in_dims = x.dims().to_vec();
        Ok(out)
    }

    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }

    pub fn backward<T: Scalar>(&mut self, dy: &Tensor<T>) -> Tensor<T> {
        let mut dx = Tensor::zeros(&self.in_dims);
        for (o, &src) in self.argmax.iter().enumerate() {
            dx.data_mut()[src] += dy.data()[o];
        }
        dx
    }
}

/// `y = x` for `x > 0`, `slope * x` otherwise (derivative at 0 is `slope`).
#[derive(Debug, Clone)]
pub struct LeakyRelu<T> {
    pub slope: T,
    positive: Vec<bool>,
}

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

impl<T: Scalar> LeakyRelu<T> {
    pub fn new(slope: f64) -> Self {
        Self { slope: T::from_f64_lossy(slope), positive: Vec::new() }
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Tensor<T> {
        let mut y = x.clone();
        self.positive.clear();
        self.positive.reserve(x.len());
        for v in y.data_mut() {
            let pos = *v > T::zero();
            self.positive.push(pos);
            if !pos {
                *v *= self.slope;
            }
        }
        y
    }

    /// In-place variant of `forward`.
    pub fn forward_owned(&mut self, mut x: Tensor<T>) -> Tensor<T> {
        self.positive.clear();
        self.positive.reserve(x.len());
        for v in x.data_mut() {
            let pos = *v > T::zero();
            self.positive.push(pos);
            if !pos {
                *v *= self.slope;
            }
        }
        x
    }

    pub fn backward(&mut self, mut dy: Tensor<T>) -> Tensor<T> {
        for (g, &pos) in dy.data_mut().iter_mut().zip(&self.positive) {
            if !pos {
                *g *= self.slope;
            }
        }
        dy
    }
}

/// Concatenate along the channel axis.
pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (na, ca, ha, wa) = a.nchw();
    let (nb, cb, hb, wb) = b.nchw();
    if na != nb || ha != hb || wa != wb {
        return Err(Error::ShapeMismatch(format!("concat {:?} with {:?}", a.dims(), b.dims())));
    }
    let plane = ha * wa;
    let mut out = Vec::with_capacity(a.len() + b.len());
    for n in 0..na {
        out.extend_from_slice(&a.data()[n * ca * plane..(n + 1) * ca * plane]);
        out.extend_from_slice(&b.data()[n * cb * plane..(n + 1) * cb * plane]);
    }
    Tensor::from_vec(&[na, ca + cb, ha, wa], out)
}

/// Backward of `concat_channels`: split the gradient after `ca` channels.
pub fn split_channels<T: Scalar>(dy: &Tensor<T>, ca: usize) -> (Tensor<T>, Tensor<T>) {
    let (n, c, h, w) = dy.nchw();
    let cb = c - ca;
    let plane = h * w;
    let mut da = Vec::with_capacity(n * ca * plane);
    let mut db = Vec::with_capacity(n * cb * plane);
    for b in 0..n {
        let item = &dy.data()[b * c * plane..(b + 1) * c * plane];
        da.extend_from_slice(&item[..ca * plane]);
        db.extend_from_slice(&item[ca * plane..]);
    }
    (
        Tensor::from_vec(&[n, ca, h, w], da).expect("split dims"),
        Tensor::from_vec(&[n, cb, h, w], db).expect("split dims"),
    )
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Elementwise logistic function; returns the output, which is also what
/// `sigmoid_backward` needs.
pub fn sigmoid_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v));
    y
}

pub fn sigmoid_backward<T: Scalar>(y: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    let mut dx = dy.clone();
    for (g, &s) in dx.data_mut().iter_mut().zip(y.data()) {
        *g *= s * (T::one() - s);
    }
    dx
}

/// Mean over channels and space, one value per batch item.
pub fn global_mean<T: Scalar>(x: &Tensor<T>) -> Vec<T> {
    let (n, c, h, w) = x.nchw();
    let m = c * h * w;
    let denom = T::from_usize(m).unwrap();
    (0..n).map(|b| x.data()[b * m..(b + 1) * m].iter().copied().sum::<T>() / denom).collect()
}

pub fn global_mean_backward<T: Scalar>(dims: &[usize], dy: &[T]) -> Tensor<T> {
    let mut dx = Tensor::zeros(dims);
    let m = dims[1..].iter().product::<usize>();
    let denom = T::from_usize(m).unwrap();
    for (b, &g) in dy.iter().enumerate() {
        dx.data_mut()[b * m..(b + 1) * m].iter_mut().for_each(|v| *v = g / denom);
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn identity_kernel_is_identity() {
        let mut conv = Conv3x3::<f64>::new("c", 1, 1, &mut rng());
        conv.w.value.fill(0.0);
        conv.w.value.data_mut()[4] = 1.0;
        let x = Tensor::from_vec(&[1, 1, 3, 4], (0..12).map(|v| v as f64 - 3.0).collect()).unwrap();
        assert_eq!(conv.forward(&x).unwrap(), x);
    }

    #[test]
    fn ones_kernel_counts_taps() {
        let mut conv = Conv3x3::<f64>::new("c", 1, 1, &mut rng());
        conv.w.value.fill(1.0);
        let x = Tensor::full(&[1, 1, 5, 5], 1.0);
        let y = conv.forward(&x).unwrap();
        assert_eq!(y.data()[2 * 5 + 2], 9.0);
        assert_eq!(y.data()[0], 4.0);
        assert_eq!(y.data()[2], 6.0);
    }

    #[test]
    fn conv_rejects_channel_mismatch() {
        let mut conv = Conv3x3::<f32>::new("c", 2, 4, &mut rng());
        assert!(conv.forward(&Tensor::zeros(&[1, 3, 4, 4])).is_err());
    }

    #[test]
    fn upconv_doubles() {
        let mut up = UpConv2x2::<f64>::new("u", 1, 1, &mut rng());
        up.w.value.fill(1.0);
        let y = up.forward(&Tensor::full(&[1, 1, 1, 1], 2.5)).unwrap();
        assert_eq!(y.dims(), &[1, 1, 2, 2]);
        assert!(y.data().iter().all(|&v| v == 2.5));

        let mut up = UpConv2x2::<f32>::new("u", 256, 128, &mut rng());
        let y = up.forward(&Tensor::zeros(&[1, 256, 16, 16])).unwrap();
        assert_eq!(y.dims(), &[1, 128, 32, 32]);
        assert!(up.forward(&Tensor::zeros(&[1, 8, 2, 2])).is_err());
    }

    #[test]
    fn maxpool_routes_to_max() {
        let mut p = MaxPool2::new();
        let x = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0f64]).unwrap();
        let y = p.forward(&x).unwrap();
        assert_eq!(y.data(), &[4.0]);
        let dx = p.backward(&Tensor::full(&[1, 1, 1, 1], 1.0));
        assert_eq!(dx.data(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn maxpool_tie_picks_first() {
        let mut p = MaxPool2::new();
        let x = Tensor::full(&[1, 1, 4, 4], 7.0f64);
        let y = p.forward(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 7.0));
        assert_eq!(p.argmax(), &[0, 2, 8, 10]);
        assert!(p.forward(&Tensor::<f64>::zeros(&[1, 1, 3, 4])).is_err());
    }

    #[test]
    fn leaky_relu_values() {
        let mut a = LeakyRelu::<f64>::new(0.01);
        let y = a.forward(&Tensor::from_vec(&[1, 1, 1, 3], vec![2.0, -2.0, 0.0]).unwrap());
        assert_eq!(y.data(), &[2.0, -0.02, 0.0]);
        let g = a.backward(Tensor::full(&[1, 1, 1, 3], 1.0));
        assert_eq!(g.data(), &[1.0, 0.01, 0.01]);
        let mut id = LeakyRelu::<f64>::new(1.0);
        let x = Tensor::from_vec(&[1, 1, 1, 2], vec![-3.0, 4.0]).unwrap();
        assert_eq!(id.forward(&x), x);
    }

    #[test]
    fn concat_and_split() {
        let a = Tensor::<f32>::full(&[1, 256, 2, 2], 1.0);
        let b = Tensor::<f32>::full(&[1, 256, 2, 2], 2.0);
        let c = concat_channels(&a, &b).unwrap();
        assert_eq!(c.dims(), &[1, 512, 2, 2]);
        let (da, db) = split_channels(&c, 256);
        assert_eq!(da, a);
        assert_eq!(db, b);
        let empty = Tensor::<f32>::zeros(&[1, 0, 2, 2]);
        assert_eq!(concat_channels(&a, &empty).unwrap(), a);
        assert!(concat_channels(&a, &Tensor::zeros(&[1, 1, 3, 2])).is_err());
    }

    #[test]
    fn head_values() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        let x = Tensor::full(&[2, 3, 2, 2], 1.25f64);
        assert_eq!(global_mean(&x), vec![1.25, 1.25]);
    }
}
