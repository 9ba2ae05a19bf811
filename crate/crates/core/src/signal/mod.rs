//! Feature grids and the translation-equivariance toolbox: global-coordinate
//! Fourier features, windowed-sinc low-pass filters, anti-aliased resampling
//! and bilinear feature lookup.

mod encoding;
mod fir;
mod fourier;
mod grid;
mod resample;

pub use encoding::{bilinear_sample, bilinear_sample_into, pe, pe_into, PeConfig};
pub use fir::{design_lowpass, filter2d, Boundary, FirDesign, FirFilter, DEFAULT_BETA, DEFAULT_HALF_WIDTH};
pub use fourier::{fourier_grid, FourierConfig};
pub use grid::{FeatureGrid, FGRID_MAGIC};
pub use resample::{downsample, downsample_with, subsample, upsample};
