//! Same-padded 2-D cross-correlation kernels.

use super::Tensor;
use crate::error::{Error, Result};

struct Dims {
    batch: usize,
    c_in: usize,
    c_out: usize,
    h: usize,
    w: usize,
    k: usize,
}

fn dims(input: &Tensor, weight: &Tensor, bias: Option<&Tensor>) -> Result<Dims> {
    let (&[batch, c_in, h, w], &[c_out, wc_in, k, k2]) = (input.shape(), weight.shape()) else {
        return Err(Error::invalid(format!(
            "conv2d expects 4-D input and weight, got {:?} and {:?}",
            input.shape(),
            weight.shape()
        )));
    };
    if wc_in != c_in {
        return Err(Error::DimensionMismatch {
            context: "conv2d input channels",
            expected: wc_in,
            got: c_in,
        });
    }
    if k != k2 || k % 2 == 0 {
        return Err(Error::invalid(format!("conv2d kernel must be odd and square, got {k}×{k2}")));
    }
    if let Some(b) = bias {
        if b.shape() != [c_out] {
            return Err(Error::invalid(format!(
                "conv2d bias must have shape [{c_out}], got {:?}",
                b.shape()
            )));
        }
    }
    Ok(Dims {
        batch,
        c_in,
        c_out,
        h,
        w,
        k,
    })
}

/// Row and column ranges of output positions whose shifted input position
/// `(y + dy, x + dx)` lies inside the image.
#[inline]
fn valid_range(len: usize, shift: isize) -> (usize, usize) {
    let lo = (-shift).max(0) as usize;
    let hi = (len as isize - shift).clamp(0, len as isize) as usize;
    (lo, hi.max(lo))
}

pub(super) fn forward(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let d = dims(input, weight, Some(bias))?;
    let (h, w, k) = (d.h, d.w, d.k);
    let pad = (k / 2) as isize;
    let plane = h * w;
    let x = input.data();
    let wt = weight.data();
    let mut out = vec![0.0; d.batch * d.c_out * plane];
    for b in 0..d.batch {
        for oc in 0..d.c_out {
            let o = &mut out[(b * d.c_out + oc) * plane..][..plane];
            o.fill(bias.data()[oc]);
            for ic in 0..d.c_in {
                let xi = &x[(b * d.c_in + ic) * plane..][..plane];
                let kern = &wt[(oc * d.c_in + ic) * k * k..][..k * k];
                for ky in 0..k {
                    let dy = ky as isize - pad;
                    let (y0, y1) = valid_range(h, dy);
                    for kx in 0..k {
                        let coef = kern[ky * k + kx];
                        if coef == 0.0 {
                            continue;
                        }
                        let dx = kx as isize - pad;
                        let (x0, x1) = valid_range(w, dx);
                        for y in y0..y1 {
                            let src_row = (y as isize + dy) as usize * w;
                            let src = &xi[(src_row as isize + x0 as isize + dx) as usize..][..x1 - x0];
                            let dst = &mut o[y * w + x0..y * w + x1];
                            for (a, s) in dst.iter_mut().zip(src) {
                                *a += coef * s;
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(&[d.batch, d.c_out, h, w], out)
}

/// Returns gradients with respect to input, weight and bias.
pub(super) fn backward(
    input: &Tensor,
    weight: &Tensor,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let d = dims(input, weight, None)?;
    let (h, w, k) = (d.h, d.w, d.k);
    let pad = (k / 2) as isize;
    let plane = h * w;
    let x = input.data();
    let wt = weight.data();
    let g = grad_out.data();
    let mut gx = vec![0.0; x.len()];
    let mut gw = vec![0.0; wt.len()];
    let mut gb = vec![0.0; d.c_out];
    for b in 0..d.batch {
        for oc in 0..d.c_out {
            let go = &g[(b * d.c_out + oc) * plane..][..plane];
            gb[oc] += go.iter().sum::<f64>();
            for ic in 0..d.c_in {
                let xi = &x[(b * d.c_in + ic) * plane..][..plane];
                let gxi = &mut gx[(b * d.c_in + ic) * plane..][..plane];
                let base = (oc * d.c_in + ic) * k * k;
                for ky in 0..k {
                    let dy = ky as isize - pad;
                    let (y0, y1) = valid_range(h, dy);
                    for kx in 0..k {
                        let dx = kx as isize - pad;
                        let (x0, x1) = valid_range(w, dx);
                        let coef = wt[base + ky * k + kx];
                        let mut acc = 0.0;
                        for y in y0..y1 {
                            let off = ((y as isize + dy) as usize * w) as isize + x0 as isize + dx;
                            let src = &xi[off as usize..][..x1 - x0];
                            let gsrc = &go[y * w + x0..y * w + x1];
                            acc += gsrc.iter().zip(src).map(|(a, s)| a * s).sum::<f64>();
                            let dst = &mut gxi[off as usize..][..x1 - x0];
                            for (t, a) in dst.iter_mut().zip(gsrc) {
                                *t += coef * a;
                            }
                        }
                        gw[base + ky * k + kx] += acc;
                    }
                }
            }
        }
    }
    Ok((
        Tensor::new(input.shape(), gx)?,
        Tensor::new(weight.shape(), gw)?,
        Tensor::new(&[d.c_out], gb)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_kernel_is_identity() {
        let input = Tensor::new(&[1, 1, 2, 3], vec![1.0, -2.0, 3.0, 4.0, 5.0, -6.0]).unwrap();
        let out = forward(
            &input,
            &Tensor::full(&[1, 1, 1, 1], 1.0),
            &Tensor::zeros(&[1]),
        )
        .unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn zero_kernel_gives_bias() {
        let input = Tensor::full(&[2, 3, 4, 4], 1.7);
        let bias = Tensor::new(&[2], vec![0.5, -3.0]).unwrap();
        let out = forward(&input, &Tensor::zeros(&[2, 3, 3, 3]), &bias).unwrap();
        assert_eq!(out.shape(), &[2, 2, 4, 4]);
        for (i, v) in out.data().iter().enumerate() {
            let oc = (i / 16) % 2;
            assert_eq!(*v, bias.data()[oc]);
        }
    }

    #[test]
    fn shape_errors() {
        let input = Tensor::zeros(&[1, 2, 4, 4]);
        assert!(forward(&input, &Tensor::zeros(&[1, 3, 3, 3]), &Tensor::zeros(&[1])).is_err());
        assert!(forward(&input, &Tensor::zeros(&[1, 2, 2, 2]), &Tensor::zeros(&[1])).is_err());
        assert!(forward(&input, &Tensor::zeros(&[1, 2, 3, 3]), &Tensor::zeros(&[2])).is_err());
        assert!(forward(&Tensor::zeros(&[2, 4, 4]), &Tensor::zeros(&[1, 2, 3, 3]), &Tensor::zeros(&[1])).is_err());
    }

    #[test]
    fn kernel_wider_than_image() {
        // 5×5 kernel on a 2×2 image: every tap outside the image is skipped.
        let input = Tensor::new(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let weight = Tensor::full(&[1, 1, 5, 5], 1.0);
        let out = forward(&input, &weight, &Tensor::zeros(&[1])).unwrap();
        assert_eq!(out.data(), &[10.0; 4]);
    }
}
