//! Sidewalk walkability analysis from delivery-robot sensor logs.

pub mod geo;
pub mod model;
pub mod series;
pub mod ingest;
pub mod pedestrians;
pub mod surface;
pub mod trip_features;
pub mod analytics;
pub mod simulator;
pub mod features;
pub mod report;
