//! Line-oriented sample archive.
//!
//! ```text
//! # socialnav-samples v1
//! <scene> <ego_id> <t_anchor> <n_neighbors> <n_obs> <n_pred> <theta0> <anchor_x> <anchor_y> <goal_x> <goal_y> <future...> <neighbors...>
//! ```
//!
//! One sample per line. `future` holds `2*n_pred` interleaved coordinates,
//! `neighbors` holds `2*n_obs` coordinates per neighbor. Floats use the
//! shortest representation that round-trips exactly.

use std::fmt::Write as _;

use crate::trajectory::Point;

use super::{CrowdError, SocialSample};

pub const ARCHIVE_HEADER: &str = "# socialnav-samples v1";

pub fn write_archive(samples: &[SocialSample]) -> Result<String, CrowdError> {
    let mut out = String::from(ARCHIVE_HEADER);
    out.push('\n');
    for s in samples {
        if s.scene.is_empty() || s.scene.contains(char::is_whitespace) {
            return Err(CrowdError::Archive {
                line: 0,
                msg: format!("scene name '{}' cannot be archived", s.scene),
            });
        }
        let n_obs = s.neighbors.first().map_or(0, Vec::len);
        if s.neighbors.iter().any(|n| n.len() != n_obs) {
            return Err(CrowdError::Archive {
                line: 0,
                msg: format!("sample {} has ragged neighbor histories", s.id()),
            });
        }
        let _ = write!(
            out,
            "{} {} {} {} {} {} {} {} {} {} {}",
            s.scene,
            s.ego_id,
            s.t_anchor,
            s.neighbors.len(),
            n_obs,
            s.ego_future.len(),
            s.theta0,
            s.anchor_world[0],
            s.anchor_world[1],
            s.goal[0],
            s.goal[1]
        );
        for p in s.ego_future.iter().chain(s.neighbors.iter().flatten()) {
            let _ = write!(out, " {} {}", p[0], p[1]);
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn read_archive(text: &str) -> Result<Vec<SocialSample>, CrowdError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == ARCHIVE_HEADER => {}
        Some((_, h)) if h.starts_with("# socialnav-samples") => {
            return Err(CrowdError::Archive {
                line: 1,
                msg: format!("unsupported archive version '{}'", h.trim()),
            })
        }
        _ => {
            return Err(CrowdError::Archive {
                line: 1,
                msg: "missing archive header".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| CrowdError::Archive { line: i + 1, msg };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() < 11 {
            return Err(err("truncated record".into()));
        }
        let int = |k: usize| f[k].parse::<usize>().map_err(|_| err(format!("bad integer '{}'", f[k])));
        let num = |k: usize| f[k].parse::<f64>().map_err(|_| err(format!("bad number '{}'", f[k])));
        let ego_id: i64 = f[1].parse().map_err(|_| err(format!("bad id '{}'", f[1])))?;
        let (t_anchor, k, n_obs, n_pred) = (int(2)?, int(3)?, int(4)?, int(5)?);
        let expect = 11 + 2 * n_pred + 2 * k * n_obs;
        if f.len() != expect {
            return Err(err(format!("expected {expect} fields, found {}", f.len())));
        }
        let pts = |from: usize, n: usize| -> Result<Vec<Point>, CrowdError> {
            (0..n).map(|j| Ok([num(from + 2 * j)?, num(from + 2 * j + 1)?])).collect()
        };
        let ego_future = pts(11, n_pred)?;
        let base = 11 + 2 * n_pred;
        let neighbors = (0..k)
            .map(|j| pts(base + 2 * j * n_obs, n_obs))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(SocialSample {
            scene: f[0].to_string(),
            ego_id,
            t_anchor,
            neighbors,
            goal: [num(9)?, num(10)?],
            ego_future,
            theta0: num(6)?,
            anchor_world: [num(7)?, num(8)?],
        });
    }
    Ok(out)
}
