//! Per-frame pose tracks and their CSV form `frame,id,x,y,theta`.
//!
//! Frame numbers in files are 1-based, matching `frame_000001.pgm`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::TargetState;

/// Poses of every target in every frame. Groundtruth and stored tracker
/// estimates share this shape.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoseTrack {
    frames: Vec<Vec<TargetState>>,
}

pub type GroundTruthTrack = PoseTrack;

#[derive(Debug, Serialize, Deserialize)]
struct PoseRow {
    frame: usize,
    id: usize,
    x: f64,
    y: f64,
    theta: f64,
}

impl PoseTrack {
    pub fn new() -> Self {
        PoseTrack::default()
    }

    /// Panics if the frame's target count differs from earlier frames.
    pub fn push(&mut self, poses: Vec<TargetState>) {
        if let Some(first) = self.frames.first() {
            assert_eq!(first.len(), poses.len(), "every frame must list the same targets");
        }
        self.frames.push(poses);
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn n_targets(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }

    /// Poses at 0-based frame index `k`.
    pub fn frame(&self, k: usize) -> &[TargetState] {
        &self.frames[k]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[TargetState]> {
        self.frames.iter().map(Vec::as_slice)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (k, poses) in self.frames.iter().enumerate() {
            for (id, s) in poses.iter().enumerate() {
                w.serialize(PoseRow {
                    frame: k + 1,
                    id,
                    x: s.x,
                    y: s.y,
                    theta: s.theta,
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::pgm::write_atomic(path, self.to_csv_string().as_bytes())
    }

    /// Reads a track; every `(frame, id)` pair from 1..=F x 0..n must appear
    /// exactly once, in any order.
    pub fn load(path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Csv {
            path: path.to_path_buf(),
            reason,
        };
        let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => bad(format!("{other:?}")),
        })?;
        let mut rows = Vec::new();
        for (line, row) in reader.deserialize::<PoseRow>().enumerate() {
            let row = row.map_err(|e| bad(format!("row {}: {e}", line + 1)))?;
            if !(row.x.is_finite() && row.y.is_finite() && row.theta.is_finite()) {
                return Err(bad(format!("row {}: non-finite pose", line + 1)));
            }
            if row.frame == 0 {
                return Err(bad(format!("row {}: frame numbers start at 1", line + 1)));
            }
            rows.push(row);
        }
        let n_frames = rows.iter().map(|r| r.frame).max().unwrap_or(0);
        let n_targets = rows.iter().map(|r| r.id + 1).max().unwrap_or(0);
        let mut grid: Vec<Vec<Option<TargetState>>> = vec![vec![None; n_targets]; n_frames];
        for r in rows {
            let slot = &mut grid[r.frame - 1][r.id];
            if slot.is_some() {
                return Err(bad(format!("duplicate entry for frame {} id {}", r.frame, r.id)));
            }
            *slot = Some(TargetState::new(r.x, r.y, r.theta));
        }
        let mut track = PoseTrack::new();
        for (k, poses) in grid.into_iter().enumerate() {
            let poses: Option<Vec<TargetState>> = poses.into_iter().collect();
            track.push(poses.ok_or_else(|| bad(format!("frame {} is missing targets", k + 1)))?);
        }
        Ok(track)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_and_roundtrip() {
        let mut t = PoseTrack::new();
        t.push(vec![TargetState::new(1.5, 2.0, 0.25), TargetState::new(3.0, 4.0, -1.0)]);
        t.push(vec![TargetState::new(1.75, 2.0, 0.5), TargetState::new(3.0, 4.5, -1.0)]);
        let text = t.to_csv_string();
        assert!(text.starts_with("frame,id,x,y,theta\n1,0,1.5,2.0,0.25\n"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.csv");
        t.save(&path).unwrap();
        assert_eq!(PoseTrack::load(&path).unwrap(), t);
    }

    #[test]
    fn incomplete_track_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.csv");
        std::fs::write(&path, "frame,id,x,y,theta\n1,0,1,1,0\n1,1,2,2,0\n2,0,1,1,0\n").unwrap();
        let err = PoseTrack::load(&path).unwrap_err();
        assert!(err.to_string().contains("frame 2 is missing"), "{err}");
        std::fs::write(&path, "frame,id,x,y,theta\n1,0,1,1,0\n1,0,2,2,0\n").unwrap();
        assert!(PoseTrack::load(&path).is_err());
        std::fs::write(&path, "frame,id,x,y,theta\n1,0,abc,1,0\n").unwrap();
        assert!(PoseTrack::load(&path).is_err());
    }
}
