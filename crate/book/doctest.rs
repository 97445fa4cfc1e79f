// Book chapters as module docs; `cargo test --doc` runs their listings.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/network.md")]
pub mod network {}
#[doc = include_str!("src/region.md")]
pub mod region {}
#[doc = include_str!("src/objectives.md")]
pub mod objectives {}
#[doc = include_str!("src/boosting.md")]
pub mod boosting {}
#[doc = include_str!("src/algorithms.md")]
pub mod algorithms {}
#[doc = include_str!("src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("src/experiments.md")]
pub mod experiments {}
