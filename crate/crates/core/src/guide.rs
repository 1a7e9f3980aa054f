//! Compiles the guide's code blocks as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../../book/src/population.md")]
mod population {}

#[doc = include_str!("../../../book/src/prediction.md")]
mod prediction {}

#[doc = include_str!("../../../book/src/market.md")]
mod market {}

#[doc = include_str!("../../../book/src/intervention.md")]
mod intervention {}

#[doc = include_str!("../../../book/src/engine.md")]
mod engine {}

#[doc = include_str!("../../../book/src/metrics.md")]
mod metrics {}

#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
