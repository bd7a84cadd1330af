use serde::{Deserialize, Serialize};

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Mish,
    Relu,
    Identity,
}

// Above this, tanh(softplus(x)) == 1 in f32.
const MISH_LINEAR_CUTOFF: f32 = 20.0;

/// `e^x` for `x` in roughly `[-87, 20]`, accurate to a couple of ulps.
///
/// Cephes-style range reduction with a degree-6 polynomial. Written without
/// branches so slice loops over it auto-vectorize.
#[inline(always)]
fn exp_f32(x: f32) -> f32 {
    const LOG2E: f32 = std::f32::consts::LOG2_E;
    const LN2_HI: f32 = 0.693_359_4;
    const LN2_LO: f32 = -2.121_944_4e-4;
    // 1.5 * 2^23: adding and subtracting rounds to the nearest integer.
    const ROUND: f32 = 12_582_912.0;

    let x = x.max(-87.0).min(88.0);
    let shifted = x * LOG2E + ROUND;
    let k = shifted - ROUND;
    // The low mantissa bits of `shifted` hold k; build 2^k from them directly.
    let k_bits = shifted.to_bits().wrapping_sub(ROUND.to_bits());
    let scale = f32::from_bits(k_bits.wrapping_add(127) << 23);
    let r = x - k * LN2_HI - k * LN2_LO;
    let mut p = 1.987_569_1e-4f32;
    p = p * r + 1.398_199_9e-3;
    p = p * r + 8.333_452e-3;
    p = p * r + 4.166_579_6e-2;
    p = p * r + 1.666_666_5e-1;
    p = p * r + 5.000_000_1e-1;
    let y = p * r * r + r + 1.0;
    y * scale
}

/// `x * tanh(ln(1 + e^x))`, computed with a single exponential.
///
/// With `n = e^x (e^x + 2)`, `tanh(softplus(x)) = n / (n + 2)`.
#[inline(always)]
pub fn mish(x: f32) -> f32 {
    let e = exp_f32(x.min(MISH_LINEAR_CUTOFF));
    let n = e * (e + 2.0);
    let y = x * n / (n + 2.0);
    if x > MISH_LINEAR_CUTOFF {
        x
    } else {
        y
    }
}

#[inline(always)]
fn mish_with_derivative(x: f32) -> (f32, f32) {
    let e = exp_f32(x.min(MISH_LINEAR_CUTOFF));
    let n = e * (e + 2.0);
    let d = n + 2.0;
    let t = n / d;
    let y = x * t;
    let dy = t + 4.0 * x * e * (e + 1.0) / (d * d);
    if x > MISH_LINEAR_CUTOFF {
        (x, 1.0)
    } else {
        (y, dy)
    }
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f32) -> f32 {
        match self {
            Activation::Mish => mish(x),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Overwrites `z` with the activation and `deriv` with its derivative at the old `z`.
    pub(crate) fn apply_with_derivative(self, z: &mut [f32], deriv: &mut [f32]) {
        debug_assert_eq!(z.len(), deriv.len());
        match self {
            Activation::Mish => {
                for (x, d) in z.iter_mut().zip(deriv.iter_mut()) {
                    let (y, dy) = mish_with_derivative(*x);
                    *x = y;
                    *d = dy;
                }
            }
            Activation::Relu => {
                for (x, d) in z.iter_mut().zip(deriv.iter_mut()) {
                    if *x > 0.0 {
                        *d = 1.0;
                    } else {
                        *x = 0.0;
                        *d = 0.0;
                    }
                }
            }
            Activation::Identity => deriv.fill(1.0),
        }
    }

    pub(crate) fn apply_slice(self, z: &mut [f32]) {
        match self {
            Activation::Identity => {}
            _ => z.iter_mut().for_each(|x| *x = self.apply(*x)),
        }
    }
}
