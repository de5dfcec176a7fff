//! Turning a replay log into one PPM frame per step.

use std::fs;
use std::path::{Path, PathBuf};

use crate::engine::{render_frame, Replay};

use super::EvalError;

pub const INDEX_FILE: &str = "index.txt";

pub fn frame_name(step: usize) -> String {
    format!("frame_{step:05}.ppm")
}

/// Re-simulates the log in `text` and writes the world after each step to
/// `frames_dir`, plus an index listing the frame files in order. Returns
/// the frame paths.
pub fn render_replay(text: &str, frames_dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    let replay = Replay::parse(text)?;
    fs::create_dir_all(frames_dir).map_err(EvalError::file(frames_dir))?;
    let mut frames = Vec::with_capacity(replay.records.len());
    let mut io_error = None;
    replay.replay(|world| {
        let path = frames_dir.join(frame_name(frames.len()));
        if let Err(e) = fs::write(&path, render_frame(world)) {
            io_error.get_or_insert(EvalError::File { path: path.clone(), source: e });
        }
        frames.push(path);
        Ok(())
    })?;
    if let Some(e) = io_error {
        return Err(e);
    }
    let index: String = frames
        .iter()
        .map(|p| format!("{}\n", p.file_name().and_then(|n| n.to_str()).unwrap_or_default()))
        .collect();
    let index_path = frames_dir.join(INDEX_FILE);
    fs::write(&index_path, index).map_err(EvalError::file(&index_path))?;
    Ok(frames)
}
