pub mod bounds;
pub mod contour;
pub mod error;
pub mod experiments;
pub mod matrix;
pub mod noise;
pub mod skewness;
pub mod spectral;

pub use error::{Error, Result};
pub use matrix::DenseMatrix;
