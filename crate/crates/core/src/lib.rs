//! Voxel-wise activation prevalence from subject-level effect maps.

pub mod efficiency;
pub mod em;
pub mod error;
pub mod gof;
pub mod inference;
pub mod model;
pub mod pipeline;
pub mod quad;
pub mod rng;
pub mod regions;
pub mod simulate;
pub mod volio;
pub mod volume;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/mixture-model.md")]
    mod mixture_model {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/testing.md")]
    mod testing {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/goodness-of-fit.md")]
    mod goodness_of_fit {}
    #[doc = include_str!("../../../book/src/regions.md")]
    mod regions {}
    #[doc = include_str!("../../../book/src/efficiency.md")]
    mod efficiency {}
    #[doc = include_str!("../../../book/src/file-formats.md")]
    mod file_formats {}
    #[doc = include_str!("../../../book/src/command-line.md")]
    mod command_line {}
}
