// Each chapter becomes a module so that `cargo test --doc` runs its snippets
// and a failure names the chapter it came from.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/plants.md")]
pub mod plants {}
#[doc = include_str!("../../../book/src/margin.md")]
pub mod margin {}
#[doc = include_str!("../../../book/src/multipliers.md")]
pub mod multipliers {}
#[doc = include_str!("../../../book/src/destabilize.md")]
pub mod destabilize {}
#[doc = include_str!("../../../book/src/sweep.md")]
pub mod sweep {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../README.md")]
pub mod readme {}
