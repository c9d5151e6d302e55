//! Link-level channel: antenna pattern, propagation, gain tables.

pub mod antenna;
pub mod constants;
pub mod gain;
pub mod pathloss;

pub use antenna::{antenna_gain, max_gain, AntennaPattern};
pub use gain::{build_gain_table, GainTable, LinkBudget};
pub use pathloss::{
    los_draw, los_probability, path_loss, shadow_fading, shadow_sigma_db, small_scale, FadingDraw, LinkGeometry,
};
