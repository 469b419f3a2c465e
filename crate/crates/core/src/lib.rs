//! Revealed-preference and stochastic-choice tests for repeated,
//! non-forced choice between money lotteries.

pub mod axioms;
pub mod choice;
pub mod design;
pub mod dominance;
pub mod eu;
pub mod hm;
pub mod lottery;
pub mod lp;
pub mod orders;
pub mod par;
pub mod rational;
pub mod report;
pub mod sim;
pub mod stats;
