pub use quantprobe_core as core;
