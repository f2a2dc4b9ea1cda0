use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::trajectory::{Point, DEFAULT_DT};

use super::CrowdError;

/// How a recording file maps native frame numbers onto sample steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormatSpec {
    /// Scene name; defaults to the file stem.
    #[serde(default)]
    pub name: Option<String>,
    /// Native frame-number increment corresponding to one sample step.
    pub frame_step: f64,
    /// Seconds per sample step.
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

impl Default for FormatSpec {
    fn default() -> Self {
        Self {
            name: None,
            frame_step: 10.0,
            dt: DEFAULT_DT,
        }
    }
}

impl FormatSpec {
    /// Sidecar path for a recording: `<file>.toml` next to it.
    pub fn sidecar_path(recording: &Path) -> PathBuf {
        let mut s = recording.as_os_str().to_owned();
        s.push(".toml");
        PathBuf::from(s)
    }

    pub fn from_sidecar(recording: &Path) -> Result<Self, CrowdError> {
        let path = Self::sidecar_path(recording);
        let text = fs::read_to_string(&path).map_err(|e| CrowdError::Io(format!("{}: {e}", path.display())))?;
        let spec: FormatSpec = toml::from_str(&text).map_err(|e| CrowdError::Sidecar(format!("{}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CrowdError> {
        if !(self.frame_step > 0.0) || !(self.dt > 0.0) {
            return Err(CrowdError::Sidecar(format!(
                "frame_step and dt must be positive (got {}, {})",
                self.frame_step, self.dt
            )));
        }
        Ok(())
    }
}

/// One gap-free stretch of a pedestrian's recording.
#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    pub ped_id: i64,
    /// Step index of the first point.
    pub start: usize,
    pub points: Vec<Point>,
}

impl Track {
    /// Step index one past the last point.
    pub fn end(&self) -> usize {
        self.start + self.points.len()
    }

    pub fn at(&self, t: usize) -> Option<Point> {
        if t >= self.start && t < self.end() {
            Some(self.points[t - self.start])
        } else {
            None
        }
    }
}

/// A recording aligned to a fixed timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub name: String,
    pub dt: f64,
    /// Sorted by `(ped_id, start)`.
    pub tracks: Vec<Track>,
}

/// A raw `(frame, ped, x, y)` record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Record {
    pub frame: f64,
    pub ped_id: i64,
    pub pos: Point,
}

impl Scene {
    /// Groups records by pedestrian, aligns frames to the nearest step and
    /// splits tracks at gaps.
    pub fn from_records(name: &str, records: &[Record], spec: &FormatSpec) -> Result<Self, CrowdError> {
        spec.validate()?;
        if records.is_empty() {
            return Err(CrowdError::EmptyScene(name.to_string()));
        }
        let min_frame = records.iter().map(|r| r.frame).fold(f64::INFINITY, f64::min);
        // ped -> step -> (alignment offset, position); the smallest offset wins
        let mut by_ped: BTreeMap<i64, BTreeMap<usize, (f64, Point)>> = BTreeMap::new();
        for r in records {
            let rel = (r.frame - min_frame) / spec.frame_step;
            let step = rel.round() as usize;
            let off = (rel - step as f64).abs();
            let slot = by_ped.entry(r.ped_id).or_default();
            let better = match slot.get(&step) {
                None => true,
                Some((o, p)) => (off, r.pos[0], r.pos[1]).partial_cmp(&(*o, p[0], p[1])) == Some(std::cmp::Ordering::Less),
            };
            if better {
                slot.insert(step, (off, r.pos));
            }
        }
        let mut tracks = Vec::new();
        for (ped_id, steps) in by_ped {
            let mut cur: Option<Track> = None;
            for (step, (_, pos)) in steps {
                match cur.as_mut() {
                    Some(t) if t.end() == step => t.points.push(pos),
                    _ => {
                        if let Some(t) = cur.take() {
                            tracks.push(t);
                        }
                        cur = Some(Track {
                            ped_id,
                            start: step,
                            points: vec![pos],
                        });
                    }
                }
            }
            tracks.extend(cur);
        }
        Ok(Self {
            name: name.to_string(),
            dt: spec.dt,
            tracks,
        })
    }

    /// Number of steps spanned by the recording.
    pub fn n_steps(&self) -> usize {
        self.tracks.iter().map(Track::end).max().unwrap_or(0)
    }

    pub fn pedestrian_ids(&self) -> Vec<i64> {
        let mut ids: Vec<i64> = self.tracks.iter().map(|t| t.ped_id).collect();
        ids.dedup();
        ids
    }

    /// Longest track of the given pedestrian.
    pub fn track_of(&self, ped_id: i64) -> Option<&Track> {
        self.tracks
            .iter()
            .filter(|t| t.ped_id == ped_id)
            .max_by_key(|t| t.points.len())
    }

    /// Positions of every pedestrian except `exclude` present at step `t`.
    pub fn positions_at(&self, t: usize, exclude: Option<i64>) -> Vec<(i64, Point)> {
        self.tracks
            .iter()
            .filter(|tr| Some(tr.ped_id) != exclude)
            .filter_map(|tr| tr.at(t).map(|p| (tr.ped_id, p)))
            .collect()
    }

    /// Writes the scene back out as `frame ped x y` lines.
    pub fn to_text(&self, frame_step: f64) -> String {
        let mut rows: Vec<(usize, i64, Point)> = self
            .tracks
            .iter()
            .flat_map(|tr| (0..tr.points.len()).map(move |k| (tr.start + k, tr.ped_id, tr.points[k])))
            .collect();
        rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut out = String::new();
        for (step, ped, p) in rows {
            let frame = step as f64 * frame_step;
            out.push_str(&format!("{frame} {ped} {:.4} {:.4}\n", p[0], p[1]));
        }
        out
    }
}

/// Parses `frame ped x y` records. Blank lines and `#` comments are ignored.
pub fn parse_records(text: &str) -> Result<Vec<Record>, CrowdError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| CrowdError::Parse {
            line: i + 1,
            msg: format!("{what}: '{line}'"),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        let frame: f64 = fields[0].parse().map_err(|_| bad("bad frame"))?;
        let ped: f64 = fields[1].parse().map_err(|_| bad("bad pedestrian id"))?;
        if !frame.is_finite() || frame.fract() != 0.0 || ped.fract() != 0.0 {
            return Err(bad("frame and id must be integers"));
        }
        let x: f64 = fields[2].parse().map_err(|_| bad("bad x"))?;
        let y: f64 = fields[3].parse().map_err(|_| bad("bad y"))?;
        if !x.is_finite() || !y.is_finite() {
            return Err(bad("non-finite coordinate"));
        }
        out.push(Record {
            frame,
            ped_id: ped as i64,
            pos: [x, y],
        });
    }
    Ok(out)
}

pub fn parse_scene(path: &Path, spec: &FormatSpec) -> Result<Scene, CrowdError> {
    let text = fs::read_to_string(path).map_err(|e| CrowdError::Io(format!("{}: {e}", path.display())))?;
    let name = spec.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scene".into())
    });
    let records = parse_records(&text)?;
    Scene::from_records(&name, &records, spec)
}

/// Parses a recording using its `<file>.toml` sidecar.
pub fn load_scene(path: &Path) -> Result<Scene, CrowdError> {
    let spec = FormatSpec::from_sidecar(path)?;
    parse_scene(path, &spec)
}

/// Loads every recording in `dir` that has a sidecar, sorted by name.
pub fn load_dir(dir: &Path) -> Result<Vec<Scene>, CrowdError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CrowdError::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_none_or(|e| e != "toml") && FormatSpec::sidecar_path(p).exists())
        .collect();
    paths.sort();
    let mut scenes = paths.iter().map(|p| load_scene(p)).collect::<Result<Vec<_>, _>>()?;
    scenes.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(scenes)
}
