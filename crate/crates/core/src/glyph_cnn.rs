//! LeNet-style glyph encoder with hand-written backpropagation.
//!
//! Layout: `28×28 → conv5×5(6) → ReLU → maxpool2 → conv5×5(16) → ReLU →
//! maxpool2 → 256 → fc(120) → ReLU → fc(84) → ReLU → fc(d)`.
//! Convolutions are valid with stride 1; pooling is 2×2 with stride 2 and
//! breaks ties toward the first position in row-major order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DweError, Result};
use crate::morphology::{GlyphBitmap, GLYPH_PIXELS, GLYPH_SIDE};
use crate::real::Real;

pub const KERNEL: usize = 5;
pub const CONV1_OUT: usize = 6;
pub const CONV2_OUT: usize = 16;
pub const CONV1_SIDE: usize = GLYPH_SIDE - KERNEL + 1; // 24
pub const POOL1_SIDE: usize = CONV1_SIDE / 2; // 12
pub const CONV2_SIDE: usize = POOL1_SIDE - KERNEL + 1; // 8
pub const POOL2_SIDE: usize = CONV2_SIDE / 2; // 4
pub const FLAT: usize = CONV2_OUT * POOL2_SIDE * POOL2_SIDE; // 256
pub const FC1_OUT: usize = 120;
pub const FC2_OUT: usize = 84;

const KK: usize = KERNEL * KERNEL;

pub const TENSOR_NAMES: [&str; 10] = [
    "conv1.weight",
    "conv1.bias",
    "conv2.weight",
    "conv2.bias",
    "fc1.weight",
    "fc1.bias",
    "fc2.weight",
    "fc2.bias",
    "fc3.weight",
    "fc3.bias",
];

/// Shared CNN parameters. Gradients use the same type.
///
/// `generation` changes whenever the tensors are borrowed mutably, which lets
/// [`CnnParams::backward`] reject tapes recorded against older weights.
#[derive(Clone, Debug)]
pub struct CnnParams<F> {
    out_dim: usize,
    conv1_w: Vec<F>,
    conv1_b: Vec<F>,
    conv2_w: Vec<F>,
    conv2_b: Vec<F>,
    fc1_w: Vec<F>,
    fc1_b: Vec<F>,
    fc2_w: Vec<F>,
    fc2_b: Vec<F>,
    fc3_w: Vec<F>,
    fc3_b: Vec<F>,
    generation: u64,
}

pub type CnnParamGrads<F> = CnnParams<F>;

impl<F: Real> PartialEq for CnnParams<F> {
    fn eq(&self, other: &Self) -> bool {
        self.out_dim == other.out_dim && self.tensors() == other.tensors()
    }
}

/// Expected length of each tensor, in [`TENSOR_NAMES`] order.
pub fn tensor_lens(out_dim: usize) -> [usize; 10] {
    [
        CONV1_OUT * KK,
        CONV1_OUT,
        CONV2_OUT * CONV1_OUT * KK,
        CONV2_OUT,
        FC1_OUT * FLAT,
        FC1_OUT,
        FC2_OUT * FC1_OUT,
        FC2_OUT,
        out_dim * FC2_OUT,
        out_dim,
    ]
}

/// `(fan_in, fan_out)` used for the uniform initialization bound of each weight tensor.
pub fn fan_in_out(out_dim: usize) -> [(usize, usize); 5] {
    [
        (KK, CONV1_OUT * KK),
        (CONV1_OUT * KK, CONV2_OUT * KK),
        (FLAT, FC1_OUT),
        (FC1_OUT, FC2_OUT),
        (FC2_OUT, out_dim),
    ]
}

impl<F: Real> CnnParams<F> {
    pub fn zeros(out_dim: usize) -> Self {
        let l = tensor_lens(out_dim);
        CnnParams {
            out_dim,
            conv1_w: vec![F::zero(); l[0]],
            conv1_b: vec![F::zero(); l[1]],
            conv2_w: vec![F::zero(); l[2]],
            conv2_b: vec![F::zero(); l[3]],
            fc1_w: vec![F::zero(); l[4]],
            fc1_b: vec![F::zero(); l[5]],
            fc2_w: vec![F::zero(); l[6]],
            fc2_b: vec![F::zero(); l[7]],
            fc3_w: vec![F::zero(); l[8]],
            fc3_b: vec![F::zero(); l[9]],
            generation: 0,
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(seed: u64, out_dim: usize) -> Self {
        assert!(out_dim >= 1, "output dimension must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(out_dim);
        let fans = fan_in_out(out_dim);
        let weights = [&mut p.conv1_w, &mut p.conv2_w, &mut p.fc1_w, &mut p.fc2_w, &mut p.fc3_w];
        for (w, (fan_in, fan_out)) in weights.into_iter().zip(fans) {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for x in w.iter_mut() {
                *x = F::of(rng.gen_range(-bound..bound));
            }
        }
        p
    }

    /// Rebuilds parameters from tensors in [`TENSOR_NAMES`] order.
    pub fn from_tensors(out_dim: usize, tensors: Vec<Vec<F>>) -> Result<Self> {
        let lens = tensor_lens(out_dim);
        if tensors.len() != lens.len() {
            return Err(DweError::Shape(format!(
                "expected 10 CNN tensors, got {}",
                tensors.len()
            )));
        }
        for ((t, &want), name) in tensors.iter().zip(&lens).zip(TENSOR_NAMES) {
            if t.len() != want {
                return Err(DweError::Shape(format!(
                    "{name}: expected {want} values, got {}",
                    t.len()
                )));
            }
        }
        let mut it = tensors.into_iter();
        let mut next = || it.next().unwrap();
        Ok(CnnParams {
            out_dim,
            conv1_w: next(),
            conv1_b: next(),
            conv2_w: next(),
            conv2_b: next(),
            fc1_w: next(),
            fc1_b: next(),
            fc2_w: next(),
            fc2_b: next(),
            fc3_w: next(),
            fc3_b: next(),
            generation: 0,
        })
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn num_params(&self) -> usize {
        tensor_lens(self.out_dim).iter().sum()
    }

    pub fn tensors(&self) -> [&[F]; 10] {
        [
            &self.conv1_w,
            &self.conv1_b,
            &self.conv2_w,
            &self.conv2_b,
            &self.fc1_w,
            &self.fc1_b,
            &self.fc2_w,
            &self.fc2_b,
            &self.fc3_w,
            &self.fc3_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [F]; 10] {
        self.generation = self.generation.wrapping_add(1);
        [
            &mut self.conv1_w,
            &mut self.conv1_b,
            &mut self.conv2_w,
            &mut self.conv2_b,
            &mut self.fc1_w,
            &mut self.fc1_b,
            &mut self.fc2_w,
            &mut self.fc2_b,
            &mut self.fc3_w,
            &mut self.fc3_b,
        ]
    }

    pub fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(F::zero());
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn cast<G: Real>(&self) -> CnnParams<G> {
        let tensors = self
            .tensors()
            .iter()
            .map(|t| t.iter().map(|&x| G::of(x.as_f64())).collect())
            .collect();
        CnnParams::from_tensors(self.out_dim, tensors).expect("same shapes")
    }

    /// Adds `other` elementwise.
    pub fn accumulate(&mut self, other: &Self) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    pub fn forward(&self, bitmap: &GlyphBitmap) -> (Vec<F>, CnnTape<F>) {
        let input: Vec<F> = bitmap
            .pixels()
            .iter()
            .map(|&p| if p != 0 { F::one() } else { F::zero() })
            .collect();
        self.forward_pixels(&input).expect("bitmap has 784 pixels")
    }

    /// Forward pass over raw pixel intensities.
    pub fn forward_pixels(&self, input: &[F]) -> Result<(Vec<F>, CnnTape<F>)> {
        if input.len() != GLYPH_PIXELS {
            return Err(DweError::Shape(format!(
                "CNN input needs {GLYPH_PIXELS} values, got {}",
                input.len()
            )));
        }
        let z1 = conv_valid(input, 1, GLYPH_SIDE, &self.conv1_w, &self.conv1_b, CONV1_OUT);
        let (p1, arg1) = relu_maxpool(&z1, CONV1_OUT, CONV1_SIDE);
        let z2 = conv_valid(&p1, CONV1_OUT, POOL1_SIDE, &self.conv2_w, &self.conv2_b, CONV2_OUT);
        let (p2, arg2) = relu_maxpool(&z2, CONV2_OUT, CONV2_SIDE);
        let z3 = affine(&self.fc1_w, &self.fc1_b, &p2);
        let a3 = relu(&z3);
        let z4 = affine(&self.fc2_w, &self.fc2_b, &a3);
        let a4 = relu(&z4);
        let out = affine(&self.fc3_w, &self.fc3_b, &a4);
        let tape = CnnTape {
            generation: self.generation,
            out_dim: self.out_dim,
            input: input.to_vec(),
            z1,
            p1,
            arg1,
            z2,
            p2,
            arg2,
            z3,
            a3,
            z4,
            a4,
        };
        Ok((out, tape))
    }

    /// Adds the gradient of `grad_output · forward(x)` with respect to every
    /// parameter into `grads`.
    pub fn backward(&self, tape: &CnnTape<F>, grad_output: &[F], grads: &mut CnnParamGrads<F>) -> Result<()> {
        if tape.generation != self.generation || tape.out_dim != self.out_dim {
            return Err(DweError::StaleTape);
        }
        if grad_output.len() != self.out_dim || grads.out_dim != self.out_dim {
            return Err(DweError::Shape(format!(
                "grad_output has {} values, network output is {}",
                grad_output.len(),
                self.out_dim
            )));
        }

        let ga4 = affine_backward(&self.fc3_w, &tape.a4, grad_output, &mut grads.fc3_w, &mut grads.fc3_b);
        let gz4 = relu_gate(&ga4, &tape.z4);
        let ga3 = affine_backward(&self.fc2_w, &tape.a3, &gz4, &mut grads.fc2_w, &mut grads.fc2_b);
        let gz3 = relu_gate(&ga3, &tape.z3);
        let gp2 = affine_backward(&self.fc1_w, &tape.p2, &gz3, &mut grads.fc1_w, &mut grads.fc1_b);

        let gz2 = unpool(&gp2, &tape.arg2, &tape.z2);
        let mut gp1 = vec![F::zero(); tape.p1.len()];
        conv_backward(
            &tape.p1,
            CONV1_OUT,
            POOL1_SIDE,
            &self.conv2_w,
            &gz2,
            CONV2_OUT,
            &mut grads.conv2_w,
            &mut grads.conv2_b,
            Some(&mut gp1),
        );
        let gz1 = unpool(&gp1, &tape.arg1, &tape.z1);
        conv_backward(
            &tape.input,
            1,
            GLYPH_SIDE,
            &self.conv1_w,
            &gz1,
            CONV1_OUT,
            &mut grads.conv1_w,
            &mut grads.conv1_b,
            None,
        );
        Ok(())
    }

    pub fn zeros_like(&self) -> CnnParamGrads<F> {
        Self::zeros(self.out_dim)
    }
}

/// Activations cached by one forward pass.
#[derive(Clone, Debug)]
pub struct CnnTape<F> {
    generation: u64,
    out_dim: usize,
    input: Vec<F>,
    z1: Vec<F>,
    p1: Vec<F>,
    arg1: Vec<usize>,
    z2: Vec<F>,
    p2: Vec<F>,
    arg2: Vec<usize>,
    z3: Vec<F>,
    a3: Vec<F>,
    z4: Vec<F>,
    a4: Vec<F>,
}

impl<F: Real> CnnTape<F> {
    /// Spatial/feature sizes after each stage: conv1, pool1, conv2, pool2, fc1, fc2.
    pub fn stage_lens(&self) -> [usize; 6] {
        [
            self.z1.len(),
            self.p1.len(),
            self.z2.len(),
            self.p2.len(),
            self.z3.len(),
            self.z4.len(),
        ]
    }
}

fn conv_valid<F: Real>(input: &[F], in_ch: usize, side: usize, weight: &[F], bias: &[F], out_ch: usize) -> Vec<F> {
    let out_side = side - KERNEL + 1;
    let plane = out_side * out_side;
    let mut out = vec![F::zero(); out_ch * plane];
    for o in 0..out_ch {
        let dst = &mut out[o * plane..(o + 1) * plane];
        dst.fill(bias[o]);
        for c in 0..in_ch {
            let src = &input[c * side * side..(c + 1) * side * side];
            let kernel = &weight[(o * in_ch + c) * KK..(o * in_ch + c + 1) * KK];
            for ki in 0..KERNEL {
                for kj in 0..KERNEL {
                    let w = kernel[ki * KERNEL + kj];
                    for y in 0..out_side {
                        let row = &src[(y + ki) * side + kj..(y + ki) * side + kj + out_side];
                        let drow = &mut dst[y * out_side..(y + 1) * out_side];
                        for (d, &s) in drow.iter_mut().zip(row) {
                            *d += w * s;
                        }
                    }
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn conv_backward<F: Real>(
    input: &[F],
    in_ch: usize,
    side: usize,
    weight: &[F],
    grad_out: &[F],
    out_ch: usize,
    grad_w: &mut [F],
    grad_b: &mut [F],
    mut grad_in: Option<&mut Vec<F>>,
) {
    let out_side = side - KERNEL + 1;
    let plane = out_side * out_side;
    for o in 0..out_ch {
        let g = &grad_out[o * plane..(o + 1) * plane];
        if g.iter().all(|x| x.is_zero()) {
            continue;
        }
        grad_b[o] += g.iter().copied().sum::<F>();
        for c in 0..in_ch {
            let src_off = c * side * side;
            let k_off = (o * in_ch + c) * KK;
            for ki in 0..KERNEL {
                for kj in 0..KERNEL {
                    let w = weight[k_off + ki * KERNEL + kj];
                    let mut acc = F::zero();
                    for y in 0..out_side {
                        let base = src_off + (y + ki) * side + kj;
                        let grow = &g[y * out_side..(y + 1) * out_side];
                        let row = &input[base..base + out_side];
                        for (&gv, &s) in grow.iter().zip(row) {
                            acc += gv * s;
                        }
                        if let Some(gi) = grad_in.as_deref_mut() {
                            for (d, &gv) in gi[base..base + out_side].iter_mut().zip(grow) {
                                *d += w * gv;
                            }
                        }
                    }
                    grad_w[k_off + ki * KERNEL + kj] += acc;
                }
            }
        }
    }
}

/// ReLU then 2×2 max pooling; returns pooled values and, per pooled cell, the
/// flat index of the winning pre-pool position.
fn relu_maxpool<F: Real>(z: &[F], channels: usize, side: usize) -> (Vec<F>, Vec<usize>) {
    let half = side / 2;
    let mut out = Vec::with_capacity(channels * half * half);
    let mut arg = Vec::with_capacity(channels * half * half);
    for c in 0..channels {
        let base = c * side * side;
        for py in 0..half {
            for px in 0..half {
                let mut best_i = base + (2 * py) * side + 2 * px;
                let mut best = z[best_i].max(F::zero());
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = base + (2 * py + dy) * side + 2 * px + dx;
                    let v = z[i].max(F::zero());
                    if v > best {
                        best = v;
                        best_i = i;
                    }
                }
                out.push(best);
                arg.push(best_i);
            }
        }
    }
    (out, arg)
}

/// Routes pooled gradients back to their argmax and applies the ReLU gate.
fn unpool<F: Real>(grad_pooled: &[F], arg: &[usize], z: &[F]) -> Vec<F> {
    let mut g = vec![F::zero(); z.len()];
    for (&gp, &i) in grad_pooled.iter().zip(arg) {
        if z[i] > F::zero() {
            g[i] += gp;
        }
    }
    g
}

fn affine<F: Real>(w: &[F], b: &[F], x: &[F]) -> Vec<F> {
    let n_in = x.len();
    b.iter()
        .enumerate()
        .map(|(o, &bias)| {
            let row = &w[o * n_in..(o + 1) * n_in];
            row.iter().zip(x).fold(bias, |acc, (&wv, &xv)| acc + wv * xv)
        })
        .collect()
}

/// Accumulates weight/bias gradients and returns the input gradient.
fn affine_backward<F: Real>(w: &[F], x: &[F], g: &[F], grad_w: &mut [F], grad_b: &mut [F]) -> Vec<F> {
    let n_in = x.len();
    let mut gx = vec![F::zero(); n_in];
    for (o, &go) in g.iter().enumerate() {
        grad_b[o] += go;
        if go.is_zero() {
            continue;
        }
        let row = &w[o * n_in..(o + 1) * n_in];
        let grow = &mut grad_w[o * n_in..(o + 1) * n_in];
        for i in 0..n_in {
            grow[i] += go * x[i];
            gx[i] += go * row[i];
        }
    }
    gx
}

fn relu<F: Real>(z: &[F]) -> Vec<F> {
    z.iter().map(|&v| v.max(F::zero())).collect()
}

fn relu_gate<F: Real>(g: &[F], z: &[F]) -> Vec<F> {
    g.iter()
        .zip(z)
        .map(|(&gv, &zv)| if zv > F::zero() { gv } else { F::zero() })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_bitmap(seed: u64) -> GlyphBitmap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GlyphBitmap::from_fn(|_, _| rng.gen_bool(0.35))
    }

    /// Parameters with nonzero biases so no pre-activation sits exactly on a ReLU kink.
    fn jittered(seed: u64, d: usize) -> CnnParams<f64> {
        let mut p = CnnParams::<f64>::init(seed, d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xB1A5);
        for (i, t) in p.tensors_mut().into_iter().enumerate() {
            if i % 2 == 1 {
                for x in t.iter_mut() {
                    *x = rng.gen_range(-0.1..0.1);
                }
            }
        }
        p
    }

    fn objective(p: &CnnParams<f64>, bm: &GlyphBitmap, g: &[f64]) -> f64 {
        let (out, _) = p.forward(bm);
        out.iter().zip(g).map(|(a, b)| a * b).sum()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn shapes_follow_valid_convolution_arithmetic() {
        assert_eq!(
            (CONV1_SIDE, POOL1_SIDE, CONV2_SIDE, POOL2_SIDE, FLAT),
            (24, 12, 8, 4, 256)
        );
        let p = CnnParams::<f64>::init(1, 7);
        let (out, tape) = p.forward(&random_bitmap(3));
        assert_eq!(out.len(), 7);
        assert_eq!(
            tape.stage_lens(),
            [24 * 24 * 6, 12 * 12 * 6, 8 * 8 * 16, 4 * 4 * 16, 120, 84]
        );
    }

    #[test]
    fn blank_input_with_zero_biases_yields_fc3_bias() {
        let mut p = CnnParams::<f64>::init(5, 4);
        p.tensors_mut()[9].copy_from_slice(&[0.5, -1.0, 2.0, 0.25]);
        let (out, _) = p.forward(&GlyphBitmap::blank());
        assert_eq!(out, vec![0.5, -1.0, 2.0, 0.25]);
    }

    #[test]
    fn forward_is_pure() {
        let p = CnnParams::<f32>::init(2, 8);
        let bm = random_bitmap(11);
        assert_eq!(p.forward(&bm).0, p.forward(&bm).0);
        assert_eq!(p.forward(&bm).0, p.forward(&bm.clone()).0);
    }

    #[test]
    fn init_is_seeded_with_zero_biases_and_bounded_weights() {
        let a = CnnParams::<f32>::init(9, 16);
        assert_eq!(a, CnnParams::<f32>::init(9, 16));
        assert_ne!(a, CnnParams::<f32>::init(10, 16));
        let t = a.tensors();
        for (layer, (fan_in, fan_out)) in fan_in_out(16).into_iter().enumerate() {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt() as f32;
            assert!(
                t[2 * layer].iter().all(|w| w.abs() <= bound),
                "{}",
                TENSOR_NAMES[2 * layer]
            );
            assert!(t[2 * layer].iter().any(|&w| w != 0.0));
            assert!(t[2 * layer + 1].iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let p = jittered(4, 8);
        let (_, tape) = p.forward(&random_bitmap(1));
        let mut g = p.zeros_like();
        p.backward(&tape, &[0.0; 8], &mut g).unwrap();
        assert!(g.tensors().iter().all(|t| t.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn fc3_bias_gradient_is_upstream() {
        let p = jittered(4, 8);
        let (_, tape) = p.forward(&random_bitmap(2));
        let up: Vec<f64> = (0..8).map(|i| i as f64 - 3.5).collect();
        let mut g = p.zeros_like();
        p.backward(&tape, &up, &mut g).unwrap();
        assert_eq!(g.tensors()[9], &up[..]);
    }

    #[test]
    fn stale_and_mismatched_tapes_are_rejected() {
        let mut p = jittered(4, 8);
        let (_, tape) = p.forward(&random_bitmap(2));
        let mut g = p.zeros_like();
        assert!(matches!(p.backward(&tape, &[1.0; 7], &mut g), Err(DweError::Shape(_))));
        p.tensors_mut()[0][0] += 1.0;
        assert!(matches!(p.backward(&tape, &[1.0; 8], &mut g), Err(DweError::StaleTape)));
        let other = jittered(4, 6);
        assert!(other.backward(&tape, &[1.0; 6], &mut other.zeros_like()).is_err());
        assert!(p.forward_pixels(&[0.0; 10]).is_err());
    }

    #[test]
    fn maxpool_routes_to_one_position_per_window() {
        let p = jittered(8, 8);
        let (_, tape) = p.forward(&random_bitmap(5));
        let gp: Vec<f64> = (0..tape.p1.len()).map(|i| 1.0 + i as f64).collect();
        let g = unpool(&gp, &tape.arg1, &tape.z1);
        for c in 0..CONV1_OUT {
            for py in 0..POOL1_SIDE {
                for px in 0..POOL1_SIDE {
                    let nonzero = [(0, 0), (0, 1), (1, 0), (1, 1)]
                        .iter()
                        .filter(|(dy, dx)| g[c * 576 + (2 * py + dy) * CONV1_SIDE + 2 * px + dx] != 0.0)
                        .count();
                    assert!(nonzero <= 1);
                }
            }
        }
    }

    #[test]
    fn maxpool_ties_pick_first_position() {
        let z = vec![1.0f64, 1.0, 1.0, 1.0];
        let (out, arg) = relu_maxpool(&z, 1, 2);
        assert_eq!(out, vec![1.0]);
        assert_eq!(arg, vec![0]);
        let z = vec![0.5f64, 2.0, 2.0, 1.0];
        assert_eq!(relu_maxpool(&z, 1, 2).1, vec![1]);
    }

    /// Central differences over a sample of entries from every tensor.
    fn check_against_finite_differences(seed: u64, per_tensor: usize) {
        let d = 8;
        let p = jittered(seed, d);
        let bm = random_bitmap(seed + 100);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 7);
        let up: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, tape) = p.forward(&bm);
        let mut analytic = p.zeros_like();
        p.backward(&tape, &up, &mut analytic).unwrap();

        let h = 1e-5;
        let lens = tensor_lens(d);
        for t in 0..10 {
            let idx: Vec<usize> = if lens[t] <= per_tensor {
                (0..lens[t]).collect()
            } else {
                (0..per_tensor).map(|_| rng.gen_range(0..lens[t])).collect()
            };
            for i in idx {
                let mut plus = p.clone();
                plus.tensors_mut()[t][i] += h;
                let mut minus = p.clone();
                minus.tensors_mut()[t][i] -= h;
                let fd = (objective(&plus, &bm, &up) - objective(&minus, &bm, &up)) / (2.0 * h);
                let an = analytic.tensors()[t][i];
                assert!(
                    rel_err(an, fd) <= 1e-4,
                    "{}[{i}]: analytic {an} vs numeric {fd}",
                    TENSOR_NAMES[t]
                );
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in [1, 2, 3] {
            check_against_finite_differences(seed, 120);
        }
    }

    #[test]
    #[ignore = "exhaustive sweep over all ~45k parameters; run with --ignored"]
    fn gradients_match_finite_differences_exhaustive() {
        check_against_finite_differences(1, usize::MAX);
    }
}
