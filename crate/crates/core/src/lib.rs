//! Phase-less far-field SAR imaging: forward model, spectral estimation,
//! an unrolled plug-and-play network with its own reverse-mode autodiff,
//! and a Wirtinger-flow baseline.

pub mod autodiff;
pub mod container;
pub mod error;
pub mod fixtures;
pub mod forward;
pub mod io;
pub mod linalg;
pub mod pnp;
pub mod sar;
pub mod spectral;
pub mod wf;

pub use error::{Error, Result};
pub use forward::{add_intensity_noise, IntensityMeasurements, PhaseModel, SamplingMatrix};
pub use linalg::CVec;
pub use spectral::{power_method, spectral_estimate, PowerMethodReport, SpectralOperator};
pub use wf::{wf_run, WfConfig, WfTrace};
