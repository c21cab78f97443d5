//! Command-line lab around `thinlab-core`: deterministic CSV output with run
//! manifests, thread-pool drivers for the chunked enumerations, and the
//! verification suites.

pub mod commands;
pub mod format;
pub mod manifest;
pub mod parallel;
pub mod verify;

/// Exit status of a run: 0 on success, 1 when verification checks fail, 2 on
/// usage or runtime errors.
pub fn exit_code(outcome: &anyhow::Result<bool>) -> u8 {
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(_) => 2,
    }
}
