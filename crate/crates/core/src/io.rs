//! Line-oriented text formats for maps, session logs and id-keyed tables.
//!
//! Map lines are `id,x,y,class[,persistent]`. Session files are named
//! `session_<id>.log` and hold `P,t,x,y,heading` and
//! `D,pose_index,landmark_id,range,bearing` records. `#` starts a comment.
//! Floats are written with Rust's shortest round-trip formatting, so a
//! save/load cycle is lossless.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::types::{
    DetectionEvent, FeatureMap, Landmark, LandmarkClass, LandmarkId, SessionLog, VehiclePose,
};

const FRAME_TAG: &str = "# frame=";

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_string(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Yields `(line_number, trimmed_content)` for non-blank, non-comment lines.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn field<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    raw: Option<&str>,
    name: &str,
) -> Result<T> {
    let raw = raw.ok_or_else(|| Error::parse(path, line, format!("missing field `{name}`")))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("bad value `{}` for `{name}`", raw.trim())))
}

fn parse_bool(raw: &str) -> Option<bool> {
    match raw.trim() {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

pub fn parse_map(text: &str, path: &Path) -> Result<FeatureMap> {
    let frame = text
        .lines()
        .find_map(|l| l.trim().strip_prefix(FRAME_TAG))
        .unwrap_or("map")
        .to_string();
    let mut landmarks = Vec::new();
    for (ln, line) in data_lines(text) {
        let mut parts = line.split(',');
        let id: u32 = field(path, ln, parts.next(), "id")?;
        let x: f64 = field(path, ln, parts.next(), "x")?;
        let y: f64 = field(path, ln, parts.next(), "y")?;
        let class_raw = parts
            .next()
            .ok_or_else(|| Error::parse(path, ln, "missing field `class`"))?;
        let class: LandmarkClass = class_raw
            .trim()
            .parse()
            .map_err(|m: String| Error::parse(path, ln, m))?;
        let persistent = match parts.next() {
            None => None,
            Some(raw) => Some(parse_bool(raw).ok_or_else(|| {
                Error::parse(path, ln, format!("bad persistent flag `{}`", raw.trim()))
            })?),
        };
        if parts.next().is_some() {
            return Err(Error::parse(path, ln, "too many fields"));
        }
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::parse(path, ln, "non-finite coordinate"));
        }
        landmarks.push(Landmark {
            id: LandmarkId(id),
            x,
            y,
            class,
            persistent,
        });
    }
    FeatureMap::new(frame, landmarks)
}

pub fn format_map(map: &FeatureMap) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{FRAME_TAG}{}", map.frame_name());
    out.push_str("# id,x,y,class[,persistent]\n");
    for lm in map.landmarks() {
        let _ = write!(out, "{},{},{},{}", lm.id, lm.x, lm.y, lm.class.as_str());
        if let Some(p) = lm.persistent {
            let _ = write!(out, ",{p}");
        }
        out.push('\n');
    }
    out
}

pub fn load_map(path: impl AsRef<Path>) -> Result<FeatureMap> {
    let path = path.as_ref();
    parse_map(&read_to_string(path)?, path)
}

pub fn save_map(map: &FeatureMap, path: impl AsRef<Path>) -> Result<()> {
    write_string(path.as_ref(), &format_map(map))
}

pub fn session_file_name(id: u32) -> String {
    format!("session_{id}.log")
}

fn session_id_from_name(name: &str) -> Option<u32> {
    name.strip_prefix("session_")?.strip_suffix(".log")?.parse().ok()
}

pub fn parse_session(text: &str, session_id: u32, path: &Path) -> Result<SessionLog> {
    let mut poses = Vec::new();
    let mut events = Vec::new();
    for (ln, line) in data_lines(text) {
        let mut parts = line.split(',');
        match parts.next().map(str::trim) {
            Some("P") => {
                let t = field(path, ln, parts.next(), "t")?;
                let x = field(path, ln, parts.next(), "x")?;
                let y = field(path, ln, parts.next(), "y")?;
                let heading = field(path, ln, parts.next(), "heading")?;
                poses.push(VehiclePose { t, x, y, heading });
            }
            Some("D") => {
                let pose_index = field(path, ln, parts.next(), "pose_index")?;
                let id: u32 = field(path, ln, parts.next(), "landmark_id")?;
                let range = field(path, ln, parts.next(), "range")?;
                let bearing = field(path, ln, parts.next(), "bearing")?;
                events.push(DetectionEvent {
                    pose_index,
                    landmark_id: LandmarkId(id),
                    range,
                    bearing,
                });
            }
            Some(other) => {
                return Err(Error::parse(path, ln, format!("unknown record kind `{other}`")))
            }
            None => unreachable!("data_lines skips blank lines"),
        }
        if parts.next().is_some() {
            return Err(Error::parse(path, ln, "too many fields"));
        }
    }
    SessionLog::new(session_id, poses, events)
}

pub fn format_session(session: &SessionLog) -> String {
    let mut out = String::with_capacity(64 * (session.poses.len() + session.events.len()));
    let _ = writeln!(out, "# session {}", session.session_id);
    for p in &session.poses {
        let _ = writeln!(out, "P,{},{},{},{}", p.t, p.x, p.y, p.heading);
    }
    for e in &session.events {
        let _ = writeln!(
            out,
            "D,{},{},{},{}",
            e.pose_index, e.landmark_id, e.range, e.bearing
        );
    }
    out
}

pub fn load_session(path: impl AsRef<Path>) -> Result<SessionLog> {
    let path = path.as_ref();
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let id = session_id_from_name(name).ok_or_else(|| {
        Error::InvalidInput(format!(
            "{}: session files must be named session_<id>.log",
            path.display()
        ))
    })?;
    parse_session(&read_to_string(path)?, id, path)
}

pub fn save_session(session: &SessionLog, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let path = dir.as_ref().join(session_file_name(session.session_id.0));
    write_string(&path, &format_session(session))?;
    Ok(path)
}

/// Loads every `session_<id>.log` in `dir`, ordered by session id.
pub fn load_sessions(dir: impl AsRef<Path>) -> Result<Vec<SessionLog>> {
    let dir = dir.as_ref();
    let mut found = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        if let Some(id) = name.to_str().and_then(session_id_from_name) {
            found.push((id, entry.path()));
        }
    }
    found.sort_by_key(|(id, _)| *id);
    if let Some(w) = found.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Validation(format!("duplicate session id {}", w[0].0)));
    }
    found
        .into_iter()
        .map(|(id, path)| parse_session(&read_to_string(&path)?, id, &path))
        .collect()
}

pub fn save_sessions(sessions: &[SessionLog], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for s in sessions {
        save_session(s, dir)?;
    }
    Ok(())
}

/// Two-column `landmark_id,<value_name>` CSV.
pub fn format_id_values(value_name: &str, ids: &[LandmarkId], values: &[f64]) -> String {
    let mut out = format!("landmark_id,{value_name}\n");
    for (id, v) in ids.iter().zip(values) {
        let _ = writeln!(out, "{id},{v}");
    }
    out
}

pub fn save_id_values(
    path: impl AsRef<Path>,
    value_name: &str,
    ids: &[LandmarkId],
    values: &[f64],
) -> Result<()> {
    write_string(path.as_ref(), &format_id_values(value_name, ids, values))
}

/// Reads a headered `landmark_id,<value>` CSV. Extra columns are ignored.
pub fn load_id_values(path: impl AsRef<Path>) -> Result<Vec<(LandmarkId, f64)>> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut rows = Vec::new();
    for (ln, line) in data_lines(&text).skip(1) {
        let mut parts = line.split(',');
        let id: u32 = field(path, ln, parts.next(), "landmark_id")?;
        let v: f64 = field(path, ln, parts.next(), "value")?;
        rows.push((LandmarkId(id), v));
    }
    Ok(rows)
}

/// Aligns an id-keyed table to map order; every map landmark must appear.
pub fn align_to_map(map: &FeatureMap, rows: &[(LandmarkId, f64)], what: &str) -> Result<Vec<f64>> {
    let mut out = vec![f64::NAN; map.len()];
    let mut filled = vec![false; map.len()];
    for (id, v) in rows {
        let i = map.index_of(*id).ok_or_else(|| {
            Error::Validation(format!("{what} lists landmark {id} which is not in the map"))
        })?;
        if filled[i] {
            return Err(Error::Validation(format!("{what} lists landmark {id} twice")));
        }
        out[i] = *v;
        filled[i] = true;
    }
    if let Some(i) = filled.iter().position(|f| !f) {
        return Err(Error::Validation(format!(
            "{what} has no entry for landmark {}",
            map.landmarks()[i].id
        )));
    }
    Ok(out)
}
