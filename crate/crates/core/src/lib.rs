//! Ambient sensor analytics for single-occupant homes: sensor events are
//! segmented into daily-living episodes, summarised as daily profiles,
//! compared against a case base and scored on six fall-risk factors.

pub mod cbr;
pub mod clock;
pub mod config;
pub mod event;
pub mod pipeline;
pub mod profile;
pub mod radar;
pub mod report;
pub mod risk;
pub mod segment;
pub mod sim;

pub use config::AppConfig;
