//! Distribution primitives driven by an explicit [`RngStream`].

mod gaussian;
mod normal;
mod rng;
mod summary;
mod wishart;

pub use gaussian::{log_mvn_density, sample_mvn, standard_normal_vector};
pub use normal::{bivariate_normal_cdf, bivariate_upper_orthant, mvn_rectangle_prob, std_normal_cdf};
pub use rng::{derive_seed, RngStream};
pub use summary::{effective_sample_size, empirical_quantile, quantile_sorted, Chain};
pub use wishart::{ln_multivariate_gamma, log_inverse_wishart_density, sample_inverse_wishart};
