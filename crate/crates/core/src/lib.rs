pub mod baselines;
pub mod error;
pub mod experiment;
pub mod framelet;
pub mod image;
pub mod linalg;
pub mod operators;
pub mod pd;
pub mod pgm;
pub mod prox;
pub mod qp;
pub mod separable;
pub mod telemetry;

pub use error::{RestoreError, Result};
pub use framelet::{FilterBank, FrameCoefficients, Framelet, FrameletKind};
pub use image::{psnr, Image, NoiseSpec, PsnrMode};
pub use operators::LinearOperator;
