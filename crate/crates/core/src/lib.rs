pub mod besov;
pub mod bilinear;
pub mod error;
pub mod expansion;
pub mod fft;
pub mod field;
pub mod generate;
pub mod grid;
pub mod heat;
pub mod leray;
pub mod lp;
pub mod paraproduct;
pub mod profiles;
pub mod snapshot;
pub mod solver;
pub mod spaces;

pub use besov::{besov_norm, BesovIndex};
pub use error::{Error, Result};
pub use field::SpectralField;
pub use grid::GridSpec;
pub use lp::{lp_decompose, LPBlockSet};
pub use rustfft::num_complex::Complex64;
