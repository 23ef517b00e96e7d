//! Young integration, g-jets and fixed-point solvers for rough Pfaff systems.
//!
//! The library is generic over the scalar type through [`Real`]; the
//! `*64` aliases at the crate root fix it to `f64`.

pub mod calculus;
pub mod driver;
pub mod error;
pub mod jets;
pub mod rates;
pub mod scalar;
pub mod signals;
pub mod solvers;
pub mod young;

pub use calculus::{
    delta, delta2, holder_seminorm, Domain, Field, Grid, HolderOptions, HolderReport,
    HolderScheme, Rectangle, Segment,
};
pub use error::{Error, Result};
pub use rates::{fit_power_law, PowerFit};
pub use scalar::Real;
pub use solvers::{
    solve_frobenius_diagonal, solve_frobenius_wedge_null, solve_implicit, solve_yde, verify_gronwall,
    Diagnostics, PfaffProblem, SolveResult,
};
pub use young::{
    boundary_integral, check_dyadic_additivity, germ_remainder_sweep, young_integral_1d, young_integral_segment,
    AdditivityOptions, AdditivityReport, GermSweep, IntegralResult, Rule, YoungOptions,
};

pub type Domain64 = Domain<f64>;
pub type Grid64 = Grid<f64>;
pub type Field64 = Field<f64>;
pub type Segment64 = Segment<f64>;
pub type Rectangle64 = Rectangle<f64>;
pub type PfaffProblem64 = PfaffProblem<f64>;
pub type SolveResult64 = SolveResult<f64>;
pub type Domain32 = Domain<f32>;
pub type Grid32 = Grid<f32>;
pub type Field32 = Field<f32>;
pub type Segment32 = Segment<f32>;
pub type Rectangle32 = Rectangle<f32>;
pub type PfaffProblem32 = PfaffProblem<f32>;
pub type SolveResult32 = SolveResult<f32>;
