//! Outage diversity tradeoffs of MIMO block-fading channels with causal or
//! predictive, possibly mismatched, channel state information at the
//! transmitter.

pub mod cli;
pub mod dmt;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod rdt;
pub mod sim;
pub mod sweep;
pub mod validate;
