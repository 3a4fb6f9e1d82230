//! Command-line driver for the reaction-diffusion solver and its verification
//! chain: configuration files, run directories, sweeps and plot tables.

pub mod commands;
pub mod config;
pub mod formats;
