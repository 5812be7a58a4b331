//! Constellation-domain multiple access over non-coherent massive MIMO.
//!
//! Each user transmits differentially encoded PSK from its own unit-circle
//! constellation. The receiver averages the product of consecutive samples
//! over its antennas, which concentrates on a point of the additive joint
//! constellation, and separates users by nearest-point demapping.
//!
//! The signal-processing modules are generic over [`Scalar`] (`f32`/`f64`);
//! the aliases below fix the common `f64` instantiation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod constellation;
pub mod error;
pub mod hybrid;
pub mod receiver;
pub mod satplan;
mod scalar;
pub mod simkit;
pub mod txchain;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Complex<T> = num_complex::Complex<T>;

pub type IndividualConstellation = constellation::IndividualConstellation<f64>;
pub type JointConstellation = constellation::JointConstellation<f64>;
pub type DesignReport = constellation::DesignReport<f64>;
pub type DiffFrame = txchain::DiffFrame<f64>;
pub type ChannelConfig = channel::ChannelConfig<f64>;
pub type ChannelRealization = channel::ChannelRealization<f64>;
pub type ReceivedMatrix = channel::ReceivedMatrix<f64>;
pub type DetectionStat = receiver::DetectionStat<f64>;
pub type SimPoint = simkit::SimPoint<f64>;

pub type IndividualConstellation32 = constellation::IndividualConstellation<f32>;
pub type JointConstellation32 = constellation::JointConstellation<f32>;
pub type ChannelConfig32 = channel::ChannelConfig<f32>;
pub type SimPoint32 = simkit::SimPoint<f32>;
