//! The chapters of `book/` as doc modules, so `cargo test` runs every
//! snippet in the guide.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/polynomials.md")]
pub mod polynomials {}
#[doc = include_str!("../../../book/src/moments.md")]
pub mod moments {}
#[doc = include_str!("../../../book/src/sdp.md")]
pub mod sdp {}
#[doc = include_str!("../../../book/src/lme.md")]
pub mod lme {}
#[doc = include_str!("../../../book/src/solving.md")]
pub mod solving {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
