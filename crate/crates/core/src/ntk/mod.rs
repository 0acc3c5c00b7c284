//! Tangent kernels of Fourier feature networks: the infinite-width closed
//! form, empirical kernels of finite networks, spectra on the circle, deep
//! ReLU stacks, gradient-flow residuals and the Bellman contraction
//! conditions.

mod contraction;
mod deep;
mod empirical;
mod flow;
mod kernel;
mod spectrum;

pub use contraction::{contraction_check, min_separation, sigma_contraction_bound, ContractionReport, ContractionRow};
pub use deep::{deep_ntk, deep_ntk_kernel};
pub use empirical::{deep_fourier_model, empirical_ntk, ntk_relu_model, two_layer_fourier_model};
pub use flow::{flow_residual, integrate_residual_rk4, lazy_training_check, FlowResidual, FrequencyFit, LazyTrainingReport};
pub use kernel::{
    analytic_kernel_matrix, analytic_lff_kernel, analytic_lff_kernel_angle, cosine_expectation_check,
    lff_kernel_parts, sphere_sample, CircleDataset, KernelParts,
};
pub use spectrum::{
    circulant_deviation, circulant_spectrum, frequency_magnitudes, kernel_spectrum, lff_circle_log_spectrum,
    log_bessel_i, KernelSpectrum,
};
