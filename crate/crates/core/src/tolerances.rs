//! Numerical tolerances shared by algorithms and their tests.

/// Absolute tolerance for closed-form identities.
pub const CLOSED_FORM: f64 = 1e-12;

/// Truncation threshold for heat-kernel and Legendre series terms.
pub const SERIES_TERM: f64 = 1e-12;

/// Smallest number of series terms evaluated before truncation is allowed.
pub const SERIES_MIN_DEGREE: usize = 8;

/// Times below this value are accepted but flagged as numerically delicate.
pub const SMALL_TIME: f64 = 1e-4;

/// Monte Carlo agreement is judged at this many standard errors.
pub const MC_SIGMAS: f64 = 3.0;
