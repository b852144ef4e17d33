//! Doctest harness for the guide.

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/sets-and-weights.md")]
pub mod sets_and_weights {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/densities.md")]
pub mod densities {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/forge.md")]
pub mod forge {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/families.md")]
pub mod families {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/ctype.md")]
pub mod ctype {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/audits.md")]
pub mod audits {}
