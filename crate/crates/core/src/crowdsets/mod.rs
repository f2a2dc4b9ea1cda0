//! Crowd recordings: parsing, ego-centric windowing, leave-one-out splits,
//! a line-oriented sample archive and a synthetic crowd generator.

mod archive;
mod sample;
mod scene;
pub mod synth;

pub use archive::{read_archive, write_archive, ARCHIVE_HEADER};
pub use sample::{
    anchor_heading, extract_samples, leave_one_out, neighbors_at, to_world_frame, ExtractConfig, Extraction,
    SocialSample, Split, SplitSpec,
};
pub use scene::{load_dir, load_scene, parse_records, parse_scene, FormatSpec, Record, Scene, Track};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CrowdError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("scene '{0}' has no records")]
    EmptyScene(String),
    #[error("unknown scene '{0}'")]
    UnknownScene(String),
    #[error("sidecar: {0}")]
    Sidecar(String),
    #[error("archive line {line}: {msg}")]
    Archive { line: usize, msg: String },
    #[error("io: {0}")]
    Io(String),
}
