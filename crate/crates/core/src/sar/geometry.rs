use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vacuum speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Slow-time platform positions and fast-time frequency samples.
///
/// Measurement `m` (0-based) corresponds to slow-time `s = m / K` and
/// frequency `k = m % K`.
#[derive(Debug, Clone, PartialEq)]
pub struct SarGeometry {
    transmit_positions: Vec<[f64; 3]>,
    receive_positions: Vec<[f64; 3]>,
    angular_frequencies: Vec<f64>,
    wave_speed: f64,
}

impl SarGeometry {
    pub fn new(
        transmit_positions: Vec<[f64; 3]>,
        receive_positions: Vec<[f64; 3]>,
        angular_frequencies: Vec<f64>,
        wave_speed: f64,
    ) -> Result<Self> {
        if transmit_positions.is_empty() {
            return Err(Error::invalid("geometry needs at least one slow-time sample"));
        }
        if transmit_positions.len() != receive_positions.len() {
            return Err(Error::invalid(
                "transmit and receive trajectories differ in length",
            ));
        }
        if angular_frequencies.is_empty() {
            return Err(Error::invalid("geometry needs at least one frequency"));
        }
        if !(wave_speed > 0.0 && wave_speed.is_finite()) {
            return Err(Error::invalid("wave speed must be positive"));
        }
        for p in transmit_positions.iter().chain(&receive_positions) {
            if !(p[2] > 0.0) || p.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid(format!(
                    "sensor position {p:?} must be finite with positive altitude"
                )));
            }
        }
        if let [first, second, ..] = angular_frequencies[..] {
            let step = second - first;
            if !(step > 0.0) {
                return Err(Error::invalid("frequencies must be strictly increasing"));
            }
            for (i, w) in angular_frequencies.iter().enumerate() {
                let expected = first + step * i as f64;
                if (w - expected).abs() > 1e-9 * expected.abs().max(step) {
                    return Err(Error::invalid("frequencies must be equi-spaced"));
                }
            }
        }
        Ok(Self {
            transmit_positions,
            receive_positions,
            angular_frequencies,
            wave_speed,
        })
    }

    pub fn transmit_positions(&self) -> &[[f64; 3]] {
        &self.transmit_positions
    }

    pub fn receive_positions(&self) -> &[[f64; 3]] {
        &self.receive_positions
    }

    pub fn angular_frequencies(&self) -> &[f64] {
        &self.angular_frequencies
    }

    pub fn wave_speed(&self) -> f64 {
        self.wave_speed
    }

    /// Number of slow-time samples `S`.
    pub fn slow_time_count(&self) -> usize {
        self.transmit_positions.len()
    }

    /// Number of frequency samples `K`.
    pub fn frequency_count(&self) -> usize {
        self.angular_frequencies.len()
    }

    /// Total measurement count `M = S·K`.
    pub fn measurement_count(&self) -> usize {
        self.slow_time_count() * self.frequency_count()
    }

    pub fn is_monostatic(&self) -> bool {
        self.transmit_positions == self.receive_positions
    }
}

pub(crate) fn unit(p: &[f64; 3]) -> [f64; 3] {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / n, p[1] / n, p[2] / n]
}

/// Parameters of a monostatic spotlight collection on a circular orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircularGeometry {
    pub radius_m: f64,
    pub altitude_m: f64,
    pub aperture_rad: f64,
    pub slow_time_samples: usize,
    pub center_freq_hz: f64,
    pub bandwidth_hz: f64,
    pub frequency_samples: usize,
    #[serde(default = "default_wave_speed")]
    pub wave_speed: f64,
}

fn default_wave_speed() -> f64 {
    SPEED_OF_LIGHT
}

impl CircularGeometry {
    /// 10 km orbit radius, 7 km altitude, half-circle aperture, 9.9 GHz
    /// carrier with 75 MHz bandwidth, 62 slow-time × 31 frequency samples.
    pub fn paper_scale() -> Self {
        Self {
            radius_m: 10_000.0,
            altitude_m: 7_000.0,
            aperture_rad: PI,
            slow_time_samples: 62,
            center_freq_hz: 9.9e9,
            bandwidth_hz: 75e6,
            frequency_samples: 31,
            wave_speed: SPEED_OF_LIGHT,
        }
    }

    /// Same orbit and band with `S·K = 512`, i.e. `M/N = 2` on a 16×16 grid.
    pub fn desk_scale() -> Self {
        Self {
            slow_time_samples: 32,
            frequency_samples: 16,
            ..Self::paper_scale()
        }
    }

    pub fn build(&self) -> Result<SarGeometry> {
        make_circular_geometry(self)
    }
}

/// Builds the circular-orbit geometry. Slow-time angles include both
/// aperture endpoints; frequencies span `[f_c − B/2, f_c + B/2]` inclusively.
pub fn make_circular_geometry(params: &CircularGeometry) -> Result<SarGeometry> {
    let CircularGeometry {
        radius_m,
        altitude_m,
        aperture_rad,
        slow_time_samples: s,
        center_freq_hz,
        bandwidth_hz,
        frequency_samples: k,
        wave_speed,
    } = *params;
    if !(radius_m > 0.0) {
        return Err(Error::invalid("orbit radius must be positive"));
    }
    if !(altitude_m > 0.0) {
        return Err(Error::invalid("altitude must be positive"));
    }
    if s < 1 || k < 1 {
        return Err(Error::invalid(
            "slow-time and frequency sample counts must be at least 1",
        ));
    }
    if !(bandwidth_hz >= 0.0) || !(center_freq_hz > 0.0) {
        return Err(Error::invalid(
            "center frequency must be positive and bandwidth non-negative",
        ));
    }
    if k > 1 && bandwidth_hz == 0.0 {
        return Err(Error::invalid(
            "several frequency samples need a positive bandwidth",
        ));
    }
    if !aperture_rad.is_finite() {
        return Err(Error::invalid("aperture must be finite"));
    }

    let positions: Vec<[f64; 3]> = (0..s)
        .map(|i| {
            let theta = if s == 1 {
                0.0
            } else {
                aperture_rad * i as f64 / (s - 1) as f64
            };
            [radius_m * theta.cos(), radius_m * theta.sin(), altitude_m]
        })
        .collect();
    let omegas: Vec<f64> = (0..k)
        .map(|i| {
            let f = if k == 1 {
                center_freq_hz
            } else {
                center_freq_hz - bandwidth_hz / 2.0 + bandwidth_hz * i as f64 / (k - 1) as f64
            };
            TAU * f
        })
        .collect();
    SarGeometry::new(positions.clone(), positions, omegas, wave_speed)
}

/// Square, origin-centered pixel grid on flat ground.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGrid {
    extent: f64,
    pixels_per_side: usize,
    positions: Vec<[f64; 2]>,
}

impl SceneGrid {
    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn pixels_per_side(&self) -> usize {
        self.pixels_per_side
    }

    /// Pixel count `N`.
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.extent / (self.pixels_per_side - 1) as f64
    }

    /// Pixel positions, row-major: index `row·n_side + col` sits at
    /// `(x, y) = (col coordinate, row coordinate)`.
    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            extent_m: self.extent,
            pixels_per_side: self.pixels_per_side,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub extent_m: f64,
    pub pixels_per_side: usize,
}

impl GridSpec {
    pub fn paper_scale() -> Self {
        Self {
            extent_m: 62.0,
            pixels_per_side: 31,
        }
    }

    /// 16×16 pixels at the same spacing as the 31×31 grid.
    pub fn desk_scale() -> Self {
        Self {
            extent_m: 31.0,
            pixels_per_side: 16,
        }
    }

    pub fn build(&self) -> Result<SceneGrid> {
        make_scene_grid(self.extent_m, self.pixels_per_side)
    }
}

pub fn make_scene_grid(extent_m: f64, pixels_per_side: usize) -> Result<SceneGrid> {
    if !(extent_m > 0.0) || !extent_m.is_finite() {
        return Err(Error::invalid("grid extent must be positive"));
    }
    if pixels_per_side < 2 {
        return Err(Error::invalid("grid needs at least 2 pixels per side"));
    }
    let n = pixels_per_side;
    let coord = |i: usize| extent_m * (i as f64 / (n - 1) as f64 - 0.5);
    let positions = (0..n)
        .flat_map(|row| (0..n).map(move |col| (row, col)))
        .map(|(row, col)| [coord(col), coord(row)])
        .collect();
    Ok(SceneGrid {
        extent: extent_m,
        pixels_per_side: n,
        positions,
    })
}
