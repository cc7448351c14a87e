//! Polynomial approximation of sign, |x|, max, ReLU and smooth activations.

mod chebyshev;
mod composite;
mod gd;
mod he;
mod interval;

pub use chebyshev::{
    chebyshev_to_monomial, smooth_fit, SmoothFit, SmoothTarget, ERROR_GRID, MAX_FIT_DEGREE,
};
pub use composite::{
    closeness_grid, default_grid, eval_composite, eval_composite_power, eval_g, eval_g_power,
    max_sign_error, min_depth, theorem_bound, CompositePolySpec, DEPTH_SLACK, GRID_GEOMETRIC,
    GRID_UNIFORM,
};
pub use gd::{gd_coefficients, gd_numerators, pd_constant, MAX_D};
pub use he::{
    app_abs, app_max, app_relu, app_sign, ensure_level, eval_g_ct, eval_poly_ct, plain_app_abs,
    plain_app_max, plain_app_relu, plain_app_sign, plain_poly, poly_depth,
};
pub use interval::{interval_denormalize, interval_normalize, IntervalMap};
