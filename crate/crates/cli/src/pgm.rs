//! 8-bit binary PGM (P5) export of magnitude images.

use num_complex::Complex64;

/// Row-major `|ρ|` scaled so the brightest pixel is 255. An all-zero image
/// stays black.
pub fn magnitude_pixels(rho: &[Complex64]) -> Vec<u8> {
    let mags: Vec<f64> = rho.iter().map(|z| z.norm()).collect();
    let peak = mags.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0 && peak.is_finite()) {
        return vec![0; mags.len()];
    }
    mags.iter()
        .map(|m| (m / peak * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}

pub fn encode(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height, "pixel count does not match image size");
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn magnitude_image(side: usize, rho: &[Complex64]) -> Vec<u8> {
    encode(side, side, &magnitude_pixels(rho))
}

/// Inverse of [`encode`]; returns `(width, height, pixels)`.
pub fn decode(bytes: &[u8]) -> Option<(usize, usize, Vec<u8>)> {
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return None;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).ok()?);
    }
    if fields[0] != "P5" || fields[3] != "255" {
        return None;
    }
    let (w, h): (usize, usize) = (fields[1].parse().ok()?, fields[2].parse().ok()?);
    let pixels = bytes.get(pos + 1..)?;
    (pixels.len() == w * h).then(|| (w, h, pixels.to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_scaling() {
        let rho = [
            Complex64::new(0.0, 2.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(-0.5, 0.0),
        ];
        let img = magnitude_image(2, &rho);
        assert!(img.starts_with(b"P5\n2 2\n255\n"));
        let (w, h, px) = decode(&img).unwrap();
        assert_eq!((w, h), (2, 2));
        assert_eq!(px, vec![255, 128, 0, 64]);
    }

    #[test]
    fn zero_image_is_black() {
        let img = magnitude_image(3, &[Complex64::new(0.0, 0.0); 9]);
        assert_eq!(decode(&img).unwrap().2, vec![0; 9]);
    }

    #[test]
    fn rejects_wrong_header() {
        assert!(decode(b"P6\n1 1\n255\n\x00").is_none());
        assert!(decode(b"P5\n2 2\n255\n\x00").is_none());
    }
}
