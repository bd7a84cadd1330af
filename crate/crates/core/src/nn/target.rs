use super::{Mlp, QNetwork};
use crate::error::{check_len, Error, Result};

/// `shadow <- (1 - tau) * shadow + tau * source`, elementwise.
pub fn polyak_update(shadow: &mut Mlp, source: &Mlp, tau: f32) -> Result<()> {
    if shadow.widths() != source.widths() {
        return Err(Error::Shape {
            context: "polyak parameter count",
            expected: shadow.parameter_count(),
            actual: source.parameter_count(),
        });
    }
    for (dst, src) in shadow.param_slices_mut().zip(source.param_slices()) {
        check_len("polyak block", dst.len(), src.len())?;
        for (d, &s) in dst.iter_mut().zip(src) {
            // same as (1 - tau) * d + tau * s, but rounds toward s in f32
            *d += tau * (s - *d);
        }
    }
    Ok(())
}

/// Polyak-averaged shadow of a critic, used for bootstrap targets.
#[derive(Debug, Clone)]
pub struct TargetCopy {
    network: QNetwork,
    tau: f32,
}

impl TargetCopy {
    pub fn new(source: &QNetwork, tau: f32) -> Result<Self> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::Config(format!(
                "target update rate must be in (0, 1], got {tau}"
            )));
        }
        Ok(Self {
            network: source.clone(),
            tau,
        })
    }

    pub fn tau(&self) -> f32 {
        self.tau
    }

    pub fn network(&self) -> &QNetwork {
        &self.network
    }

    pub fn update(&mut self, source: &QNetwork) -> Result<()> {
        polyak_update(self.network.mlp_mut(), source.mlp(), self.tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Dense};
    use ndarray::{Array1, Array2};

    fn constant(value: f32) -> Mlp {
        let layer = Dense {
            weight: Array2::from_elem((1, 2), value),
            bias: Array1::from_elem(1, value),
        };
        Mlp::from_layers(vec![layer], Activation::Identity).unwrap()
    }

    #[test]
    fn tau_one_copies_source() {
        let mut shadow = constant(0.0);
        let source = constant(3.5);
        polyak_update(&mut shadow, &source, 1.0).unwrap();
        assert_eq!(shadow, source);
    }

    #[test]
    fn single_step_arithmetic() {
        let mut shadow = constant(0.0);
        polyak_update(&mut shadow, &constant(1.0), 0.005).unwrap();
        assert!(shadow.param_slices().flatten().all(|&x| x == 0.005));
    }

    #[test]
    fn repeated_updates_converge_monotonically() {
        let mut shadow = constant(0.0);
        let source = constant(1.0);
        let mut last = f32::INFINITY;
        for _ in 0..3000 {
            polyak_update(&mut shadow, &source, 0.005).unwrap();
            let dist = shadow
                .param_slices()
                .flatten()
                .map(|x| (1.0 - x).abs())
                .fold(0.0f32, f32::max);
            assert!(dist <= last);
            last = dist;
        }
        // Exact arithmetic gives 0.995^3000 ~ 2.9e-7, but an f32 shadow next to 1.0
        // stops moving once tau * gap drops below half an ulp: gap ~ 2^-24 / 0.005.
        assert!(0.995f64.powi(3000) < 1e-6);
        let f32_floor = f32::EPSILON as f64 / 2.0 / 0.005;
        assert!((last as f64) <= f32_floor + 1e-9, "{last}");
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let mut shadow = constant(0.0);
        let other = Mlp::from_layers(vec![Dense::zeros(3, 1)], Activation::Identity).unwrap();
        assert!(polyak_update(&mut shadow, &other, 0.5).is_err());
    }
}
