pub mod entropy;
pub mod error;
pub mod estimates;
pub mod grid;
pub mod helmholtz;
pub mod io;
pub mod noise;
pub mod scenario;
pub mod spectral;
pub mod stepper;

pub use error::{Error, Result};
pub use grid::{DerivBackend, Field, Grid};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/pressure.md")]
    mod pressure {}
    #[doc = include_str!("../../../book/src/noise.md")]
    mod noise {}
    #[doc = include_str!("../../../book/src/stepper.md")]
    mod stepper {}
    #[doc = include_str!("../../../book/src/estimates.md")]
    mod estimates {}
    #[doc = include_str!("../../../book/src/entropy.md")]
    mod entropy {}
    #[doc = include_str!("../../../book/src/studies.md")]
    mod studies {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
