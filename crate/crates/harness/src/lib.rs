//! Verification campaigns and reporting for the `c3dsm` command-line tool.

pub mod campaigns;
pub mod counts;
pub mod pool;
pub mod report;

pub use campaigns::{oracle_equivalence, remark1_check, verify_exhaustive, OracleConfig};
pub use report::CampaignReport;
