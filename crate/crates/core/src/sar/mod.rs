//! Acquisition geometry, imaging grid, synthetic scenes and datasets.

mod dataset;
mod geometry;
mod scene;

pub use dataset::{
    generate_dataset, noise_seed, Acquisition, Dataset, DatasetSpec, RectangleLimits, Sample, Setup,
};
pub use geometry::{
    make_circular_geometry, make_scene_grid, CircularGeometry, GridSpec, SarGeometry, SceneGrid,
    SPEED_OF_LIGHT,
};
pub use scene::{random_rectangle_scene, Rect, Scene};

pub(crate) use geometry::unit as geometry_unit;
