//! Desk-scale simulator and benchmark harness for sound-triggered mobile manipulation.

pub mod acoustics;
pub mod episodes;
pub mod harness;
pub mod learning;
pub mod perception;
pub mod planner;
pub mod skills;
pub mod soundbank;
pub mod world;
