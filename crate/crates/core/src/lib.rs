pub mod event;
pub mod graph;
pub mod lifecycle;
pub mod pipeline;
pub mod role;
pub mod activity;
pub mod classify;
pub mod config;
pub mod sna;
pub mod steering;
pub mod synth;
