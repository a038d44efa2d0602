//! Library side of the `csymmpi` binary: dataset readers, the prediction
//! and calibration commands, and the parallel simulation driver.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod predict;
pub mod simulate;
