//! Closed-form evaluation of arbitrarily complex connections of multi-port
//! networks, with reducibility, low-rank updating of previous evaluations,
//! recovery of the power waves at connected ports, and an analytic
//! transmission-line-graph oracle for self-validation.
//!
//! The core objects are [`network::NetworkSystem`] (a multi-port system in
//! scattering, impedance or admittance form with a named port partition),
//! [`connection::ConnectionScheme`] (which port sets are joined), and the
//! evaluators in [`cascade`]. A [`cascade::CascadeCache`] retains the
//! factorized interaction state so that [`update::update_subsystem`] can
//! refresh a result after one subsystem changes, and [`waves`] can recover
//! the waves traveling through the connected ports.

pub mod bench;
pub mod cascade;
pub mod connection;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod network;
pub mod testkit;
pub mod update;
pub mod waves;

pub use error::{Error, Result};
pub use linalg::ComplexMatrix;
pub use network::{NetworkSystem, PortPartition, Representation};
