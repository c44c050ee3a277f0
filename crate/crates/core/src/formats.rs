//! Versioned on-disk formats.
//!
//! Every artifact starts with a one-line JSON header
//! `{"format":"keytrace/<kind>","version":N}`. Sessions follow it with a
//! metadata line and then one frame per line; every other artifact follows it
//! with a single pretty-printed JSON document.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HandLayout, Session, Space, TelemetryFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormatId {
    pub format: &'static str,
    pub version: u32,
}

pub const SESSION: FormatId = FormatId {
    format: "keytrace/session",
    version: 1,
};
pub const GROUND_TRUTH: FormatId = FormatId {
    format: "keytrace/ground-truth",
    version: 1,
};
pub const KEYBOARD: FormatId = FormatId {
    format: "keytrace/keyboard",
    version: 1,
};
pub const EVENTS: FormatId = FormatId {
    format: "keytrace/events",
    version: 1,
};
pub const ATTACK: FormatId = FormatId {
    format: "keytrace/attack",
    version: 1,
};
pub const TEXT: FormatId = FormatId {
    format: "keytrace/text",
    version: 1,
};
pub const EVAL: FormatId = FormatId {
    format: "keytrace/eval",
    version: 1,
};
pub const RUN_REPORT: FormatId = FormatId {
    format: "keytrace/run-report",
    version: 1,
};
pub const CALIBRATION: FormatId = FormatId {
    format: "keytrace/calibration",
    version: 1,
};
pub const CAMERAS: FormatId = FormatId {
    format: "keytrace/cameras",
    version: 1,
};

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct SessionMeta {
    space: Space,
    nominal_fps: f64,
    layout: HandLayout,
    has_depth: bool,
    frames: usize,
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::format(path, message)
}

fn header_line(id: FormatId) -> String {
    serde_json::to_string(&Header {
        format: id.format.to_string(),
        version: id.version,
    })
    .expect("header serializes")
}

fn check_header(path: &Path, line: Option<&str>, id: FormatId) -> Result<()> {
    let line = line.ok_or_else(|| format_err(path, "empty file"))?;
    let h: Header = serde_json::from_str(line).map_err(|e| format_err(path, format!("missing format header: {e}")))?;
    if h.format != id.format {
        return Err(format_err(path, format!("expected {}, found {}", id.format, h.format)));
    }
    if h.version != id.version {
        return Err(format_err(
            path,
            format!(
                "unsupported {} version {} (expected {})",
                id.format, h.version, id.version
            ),
        ));
    }
    Ok(())
}

/// Reads the format name from a file header without parsing the rest.
pub fn peek_format(path: &Path) -> Result<String> {
    let f = fs::File::open(path)?;
    let mut line = String::new();
    BufReader::new(f).read_line(&mut line)?;
    let h: Header =
        serde_json::from_str(line.trim_end()).map_err(|e| format_err(path, format!("missing format header: {e}")))?;
    Ok(h.format)
}

pub fn write_json<T: Serialize>(path: &Path, id: FormatId, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value).map_err(|e| format_err(path, e.to_string()))?;
    fs::write(path, format!("{}\n{body}\n", header_line(id)))?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path, id: FormatId) -> Result<T> {
    let raw = fs::read_to_string(path)?;
    let (first, rest) = raw.split_once('\n').unwrap_or((raw.as_str(), ""));
    check_header(path, Some(first), id)?;
    serde_json::from_str(rest).map_err(|e| format_err(path, e.to_string()))
}

fn json_line<T: Serialize>(path: &Path, v: &T) -> Result<String> {
    serde_json::to_string(v).map_err(|e| format_err(path, e.to_string()))
}

pub fn write_session(path: &Path, s: &Session) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", header_line(SESSION))?;
    let meta = SessionMeta {
        space: s.space,
        nominal_fps: s.nominal_fps,
        layout: s.layout,
        has_depth: s.has_depth,
        frames: s.len(),
    };
    writeln!(w, "{}", json_line(path, &meta)?)?;
    for f in &s.frames {
        writeln!(w, "{}", json_line(path, f)?)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_session(path: &Path) -> Result<Session> {
    let f = fs::File::open(path)?;
    let mut lines = BufReader::new(f).lines();
    let first = lines.next().transpose()?;
    check_header(path, first.as_deref(), SESSION)?;
    let meta_line = lines
        .next()
        .transpose()?
        .ok_or_else(|| format_err(path, "missing session metadata"))?;
    let meta: SessionMeta = serde_json::from_str(&meta_line).map_err(|e| format_err(path, format!("metadata: {e}")))?;
    let mut frames = Vec::with_capacity(meta.frames);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let frame: TelemetryFrame =
            serde_json::from_str(&line).map_err(|e| format_err(path, format!("frame {i}: {e}")))?;
        if frame.coords.len() != meta.layout.joint_count() {
            return Err(format_err(
                path,
                format!(
                    "frame {i} has {} joints, layout expects {}",
                    frame.coords.len(),
                    meta.layout.joint_count()
                ),
            ));
        }
        frames.push(frame);
    }
    if frames.len() != meta.frames {
        return Err(format_err(
            path,
            format!("header announces {} frames, found {}", meta.frames, frames.len()),
        ));
    }
    Ok(Session {
        frames,
        space: meta.space,
        nominal_fps: meta.nominal_fps,
        layout: meta.layout,
        has_depth: meta.has_depth,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_json(path, TEXT, &text)
}

/// Reads a text artifact. Files without a header are read as plain UTF-8.
pub fn read_text(path: &Path) -> Result<String> {
    let raw = fs::read_to_string(path)?;
    let first = raw.lines().next().unwrap_or("");
    match serde_json::from_str::<Header>(first) {
        Ok(_) => read_json(path, TEXT),
        Err(_) => Ok(raw),
    }
}
