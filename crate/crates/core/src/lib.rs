pub mod error;
pub mod kernels;
pub mod linalg;
pub mod matrix_json;
pub mod models;
pub mod propagate;
pub mod spectra;
pub mod superop;
pub mod trajectory;

pub use error::{Error, Result};
