use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SceneGrid;
use crate::error::{Error, Result};
use crate::linalg::{self, CVec};

/// Axis-aligned pixel rectangle: rows `row..row+height`, cols `col..col+width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl Rect {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row..self.row + self.height).contains(&row)
            && (self.col..self.col + self.width).contains(&col)
    }

    pub fn area(&self) -> usize {
        self.height * self.width
    }
}

/// A complex reflectivity image over a [`SceneGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub reflectivity: CVec,
    pub rect: Option<Rect>,
    pub amplitude: f64,
}

impl Scene {
    pub fn from_reflectivity(reflectivity: CVec) -> Self {
        Self {
            reflectivity,
            rect: None,
            amplitude: 1.0,
        }
    }

    /// `ρ*/‖ρ*‖`, or `None` for the zero scene.
    pub fn normalized(&self) -> Option<CVec> {
        linalg::normalized(&self.reflectivity)
    }
}

/// One binary rectangle of amplitude 1 at a uniformly drawn size and position.
pub fn random_rectangle_scene(
    grid: &SceneGrid,
    seed: u64,
    min_side_px: usize,
    max_side_px: usize,
) -> Result<Scene> {
    let n = grid.pixels_per_side();
    if min_side_px < 1 || min_side_px > max_side_px || max_side_px > n {
        return Err(Error::invalid(format!(
            "rectangle sides [{min_side_px}, {max_side_px}] must satisfy 1 ≤ min ≤ max ≤ {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = rng.random_range(min_side_px..=max_side_px);
    let height = rng.random_range(min_side_px..=max_side_px);
    let col = rng.random_range(0..=n - width);
    let row = rng.random_range(0..=n - height);
    let rect = Rect {
        row,
        col,
        height,
        width,
    };
    let amplitude = 1.0;
    let reflectivity = (0..n * n)
        .map(|i| {
            if rect.contains(i / n, i % n) {
                Complex64::new(amplitude, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(Scene {
        reflectivity,
        rect: Some(rect),
        amplitude,
    })
}
