use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::linalg::CVec;

/// Shape of the convolutional denoiser: `depth` conv layers of `width`
/// channels, relu between layers, and an optional residual connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenoiserArch {
    pub depth: usize,
    pub width: usize,
    pub kernel_size: usize,
    pub residual: bool,
}

impl DenoiserArch {
    pub fn desk_scale() -> Self {
        Self {
            depth: 6,
            width: 16,
            kernel_size: 3,
            residual: true,
        }
    }

    pub fn paper_scale() -> Self {
        Self {
            depth: 16,
            width: 32,
            kernel_size: 3,
            residual: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.width == 0 {
            return Err(Error::invalid("denoiser depth and width must be positive"));
        }
        if self.kernel_size % 2 == 0 {
            return Err(Error::invalid("denoiser kernel size must be odd"));
        }
        Ok(())
    }

    /// `(in_channels, out_channels)` of every layer.
    pub fn layer_channels(&self) -> Vec<(usize, usize)> {
        (0..self.depth)
            .map(|i| {
                let c_in = if i == 0 { 2 } else { self.width };
                let c_out = if i + 1 == self.depth { 2 } else { self.width };
                (c_in, c_out)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams {
    pub arch: DenoiserArch,
    pub layers: Vec<ConvLayer>,
}

/// Tape handles for one layer's parameters.
#[derive(Debug, Clone, Copy)]
pub struct LayerVars {
    pub weight: Var,
    pub bias: Var,
}

impl DenoiserParams {
    /// All-zero parameters. With a residual connection this is the identity.
    pub fn zeros(arch: DenoiserArch) -> Result<Self> {
        arch.validate()?;
        let k = arch.kernel_size;
        let layers = arch
            .layer_channels()
            .into_iter()
            .map(|(c_in, c_out)| ConvLayer {
                weight: Tensor::zeros(&[c_out, c_in, k, k]),
                bias: Tensor::zeros(&[c_out]),
            })
            .collect();
        Ok(Self { arch, layers })
    }

    /// Weights uniform in `±1/√fan_in`. The last layer starts at zero when
    /// the architecture is residual, so the initial network is the identity.
    pub fn init(arch: DenoiserArch, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let depth = params.layers.len();
        for (i, layer) in params.layers.iter_mut().enumerate() {
            if arch.residual && i + 1 == depth {
                continue;
            }
            let s = layer.weight.shape();
            let bound = 1.0 / ((s[1] * s[2] * s[3]) as f64).sqrt();
            for w in layer.weight.data_mut() {
                *w = rng.random_range(-bound..bound);
            }
            for b in layer.bias.data_mut() {
                *b = rng.random_range(-bound..bound);
            }
        }
        Ok(params)
    }

    /// Checks layer shapes against the architecture.
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        let k = self.arch.kernel_size;
        let channels = self.arch.layer_channels();
        if channels.len() != self.layers.len() {
            return Err(Error::invalid("layer count does not match architecture"));
        }
        for ((c_in, c_out), layer) in channels.into_iter().zip(&self.layers) {
            if layer.weight.shape() != [c_out, c_in, k, k] || layer.bias.shape() != [c_out] {
                return Err(Error::invalid("layer shape does not match architecture"));
            }
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Weight and bias tensors in layer order.
    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    pub fn register<'a>(&self, tape: &mut Tape<'a>) -> Result<Vec<LayerVars>> {
        self.layers
            .iter()
            .map(|l| {
                Ok(LayerVars {
                    weight: tape.leaf(l.weight.clone())?,
                    bias: tape.leaf(l.bias.clone())?,
                })
            })
            .collect()
    }

    /// Runs the network on a `[B, 2, H, W]` input already on the tape.
    pub fn forward<'a>(
        &self,
        tape: &mut Tape<'a>,
        vars: &[LayerVars],
        input: Var,
    ) -> Result<Var> {
        let mut x = input;
        for (i, lv) in vars.iter().enumerate() {
            x = tape.conv2d(x, lv.weight, lv.bias)?;
            if i + 1 < vars.len() {
                x = tape.relu(x)?;
            }
        }
        if self.arch.residual {
            x = tape.add(x, input)?;
        }
        Ok(x)
    }
}

/// Stacks a complex image into a `[1, 2, n, n]` tensor of real and imaginary planes.
pub fn complex_to_planes(v: &[Complex64], n_side: usize) -> Result<Tensor> {
    let plane = n_side * n_side;
    if v.len() != plane {
        return Err(Error::invalid(format!(
            "image of length {} is not {n_side}×{n_side}",
            v.len()
        )));
    }
    let mut data = Vec::with_capacity(2 * plane);
    data.extend(v.iter().map(|z| z.re));
    data.extend(v.iter().map(|z| z.im));
    Tensor::new(&[1, 2, n_side, n_side], data)
}

/// Inverse of [`complex_to_planes`] for any tensor whose data is two equal halves.
pub fn planes_to_complex(t: &Tensor) -> CVec {
    let half = t.len() / 2;
    let (re, im) = t.data().split_at(half);
    re.iter().zip(im).map(|(a, b)| Complex64::new(*a, *b)).collect()
}

/// Applies the denoiser to a complex `n_side × n_side` image.
pub fn denoiser_apply(params: &DenoiserParams, image: &[Complex64], n_side: usize) -> Result<CVec> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape)?;
    let x = tape.leaf(complex_to_planes(image, n_side)?)?;
    let y = params.forward(&mut tape, &vars, x)?;
    Ok(planes_to_complex(tape.value(y)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_residual_network_is_identity() {
        let params = DenoiserParams::zeros(DenoiserArch::desk_scale()).unwrap();
        let img: CVec = (0..25)
            .map(|i| Complex64::new(i as f64 - 3.0, 0.5 * i as f64))
            .collect();
        assert_eq!(denoiser_apply(&params, &img, 5).unwrap(), img);
    }

    #[test]
    fn initialized_residual_network_is_identity() {
        let params = DenoiserParams::init(DenoiserArch::desk_scale(), 3).unwrap();
        assert!(params.layers[0].weight.data().iter().any(|w| *w != 0.0));
        let img: CVec = (0..16).map(|i| Complex64::new(i as f64, -1.0)).collect();
        assert_eq!(denoiser_apply(&params, &img, 4).unwrap(), img);
    }

    #[test]
    fn init_is_bounded_and_seeded() {
        let arch = DenoiserArch {
            residual: false,
            ..DenoiserArch::desk_scale()
        };
        let a = DenoiserParams::init(arch, 9).unwrap();
        assert_eq!(a, DenoiserParams::init(arch, 9).unwrap());
        assert_ne!(a, DenoiserParams::init(arch, 10).unwrap());
        for layer in &a.layers {
            let s = layer.weight.shape();
            let bound = 1.0 / ((s[1] * s[2] * s[3]) as f64).sqrt();
            assert!(layer.weight.data().iter().all(|w| w.abs() <= bound));
            assert!(layer.weight.data().iter().any(|w| *w != 0.0));
        }
    }

    #[test]
    fn architecture_channels() {
        let arch = DenoiserArch::desk_scale();
        let ch = arch.layer_channels();
        assert_eq!(ch.first(), Some(&(2, 16)));
        assert_eq!(ch.last(), Some(&(16, 2)));
        assert_eq!(ch.len(), 6);
        let single = DenoiserArch { depth: 1, ..arch };
        assert_eq!(single.layer_channels(), vec![(2, 2)]);
        assert!(DenoiserArch { kernel_size: 4, ..arch }.validate().is_err());
        assert!(DenoiserArch { depth: 0, ..arch }.validate().is_err());
        let p = DenoiserParams::zeros(arch).unwrap();
        assert_eq!(
            p.parameter_count(),
            2 * 16 * 9 + 16 + 4 * (16 * 16 * 9 + 16) + 16 * 2 * 9 + 2
        );
        p.validate().unwrap();
    }

    #[test]
    fn rejects_non_square_images() {
        let params = DenoiserParams::zeros(DenoiserArch::desk_scale()).unwrap();
        assert!(denoiser_apply(&params, &[Complex64::new(0.0, 0.0); 10], 3).is_err());
    }

    #[test]
    fn planes_round_trip() {
        let img: CVec = (0..9).map(|i| Complex64::new(i as f64, -(i as f64))).collect();
        let t = complex_to_planes(&img, 3).unwrap();
        assert_eq!(t.shape(), &[1, 2, 3, 3]);
        assert_eq!(&t.data()[..3], &[0.0, 1.0, 2.0]);
        assert_eq!(t.data()[9], -0.0);
        assert_eq!(planes_to_complex(&t), img);
    }
}
