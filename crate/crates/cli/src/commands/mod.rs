pub mod dispatch;
pub mod probe;
pub mod report;
pub mod track;

pub use dispatch::cmd_dispatch;
pub use probe::{cmd_probe, ProbeArgs};
pub use report::cmd_report;
pub use track::{cmd_track, TrackSummary};
