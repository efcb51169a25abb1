//! Error types shared across the simulation modules.

use alloc::string::String;
use core::fmt;

/// A periodic operation was invoked off its schedule. The engine owns the
/// schedule, so seeing this outside of tests indicates a driver bug.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScheduleError {
    pub step: u64,
    pub period: u64,
    pub context: &'static str,
}

impl fmt::Display for ScheduleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} invoked at step {} which is not on the period-{} schedule",
            self.context, self.step, self.period
        )
    }
}

impl core::error::Error for ScheduleError {}

/// A configuration field failed validation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: &'static str, message: impl Into<String>) -> Self {
        ConfigError { field, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config: {}: {}", self.field, self.message)
    }
}

impl core::error::Error for ConfigError {}
