//! Shared data model: joints, frames, sessions, keyboards, ground truth and
//! detected keystroke events.
//!
//! Coordinates are meters and times are seconds. In the original telemetry
//! space `x` runs left to right across the keyboard, `z` runs from the user
//! towards the far edge of the keyboard, and `y` is height: a fingertip on the
//! keyboard plane has `y == plane_y` and lifting a finger increases `y`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of frames in a keystroke window: 7 before the press, the press, 8 after.
pub const WINDOW_LEN: usize = 16;
pub const WINDOW_BEFORE: usize = 7;
pub const WINDOW_AFTER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    pub const BOTH: [Hand; 2] = [Hand::Left, Hand::Right];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Finger {
    Thumb,
    Index,
    Middle,
    Ring,
    Pinky,
}

impl Finger {
    pub const ALL: [Finger; 5] = [
        Finger::Thumb,
        Finger::Index,
        Finger::Middle,
        Finger::Ring,
        Finger::Pinky,
    ];
    pub const NON_THUMB: [Finger; 4] = [Finger::Index, Finger::Middle, Finger::Ring, Finger::Pinky];

    fn slot(self) -> usize {
        self as usize
    }
}

/// A tracked joint: hand plus index within that hand's joint list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JointId {
    pub hand: Hand,
    pub index: usize,
}

impl JointId {
    pub fn new(hand: Hand, index: usize) -> Self {
        JointId { hand, index }
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hand = match self.hand {
            Hand::Left => "L",
            Hand::Right => "R",
        };
        write!(f, "{hand}{}", self.index)
    }
}

/// Joint ordering of one hand.
///
/// Each finger is a chain of four joints ending at its tip, so the tip index
/// identifies the whole chain. Two layouts are known:
///
/// * 23 joints: wrist 0, palm 1, thumb 2..=5, index 6..=9, middle 10..=13,
///   ring 14..=17, pinky 18..=21, forearm 22.
/// * 21 joints: wrist 0, thumb 1..=4, index 5..=8, middle 9..=12,
///   ring 13..=16, pinky 17..=20.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandLayout {
    pub joints_per_hand: usize,
    /// Tip index for thumb, index, middle, ring, pinky.
    pub fingertips: [usize; 5],
}

impl Default for HandLayout {
    fn default() -> Self {
        HandLayout::STANDARD
    }
}

impl HandLayout {
    pub const STANDARD: HandLayout = HandLayout {
        joints_per_hand: 23,
        fingertips: [5, 9, 13, 17, 21],
    };
    pub const COMPACT: HandLayout = HandLayout {
        joints_per_hand: 21,
        fingertips: [4, 8, 12, 16, 20],
    };
    pub const CHAIN_LEN: usize = 4;

    pub fn from_joint_count(joints_per_hand: usize) -> Result<Self> {
        match joints_per_hand {
            23 => Ok(Self::STANDARD),
            21 => Ok(Self::COMPACT),
            n => Err(Error::InvalidArgument(format!(
                "no known hand layout with {n} joints per hand"
            ))),
        }
    }

    pub fn joint_count(&self) -> usize {
        2 * self.joints_per_hand
    }

    pub fn flat_index(&self, joint: JointId) -> usize {
        match joint.hand {
            Hand::Left => joint.index,
            Hand::Right => self.joints_per_hand + joint.index,
        }
    }

    pub fn joint_at(&self, flat: usize) -> JointId {
        if flat < self.joints_per_hand {
            JointId::new(Hand::Left, flat)
        } else {
            JointId::new(Hand::Right, flat - self.joints_per_hand)
        }
    }

    pub fn fingertip(&self, hand: Hand, finger: Finger) -> JointId {
        JointId::new(hand, self.fingertips[finger.slot()])
    }

    /// All ten fingertips, left hand first, thumb to pinky.
    pub fn fingertips(&self) -> Vec<JointId> {
        Hand::BOTH
            .iter()
            .flat_map(|&h| Finger::ALL.iter().map(move |&f| self.fingertip(h, f)))
            .collect()
    }

    /// The eight fingertips that are not thumbs, left hand first.
    pub fn non_thumb_fingertips(&self) -> Vec<JointId> {
        Hand::BOTH
            .iter()
            .flat_map(|&h| Finger::NON_THUMB.iter().map(move |&f| self.fingertip(h, f)))
            .collect()
    }

    pub fn finger_of_tip(&self, joint: JointId) -> Option<Finger> {
        Finger::ALL
            .iter()
            .copied()
            .find(|f| self.fingertips[f.slot()] == joint.index)
    }

    pub fn is_fingertip(&self, joint: JointId) -> bool {
        joint.index < self.joints_per_hand && self.finger_of_tip(joint).is_some()
    }

    /// Finger chain membership of a joint: the finger and the position along
    /// the chain (0 = closest to the palm, 3 = tip).
    pub fn chain_position(&self, index: usize) -> Option<(Finger, usize)> {
        Finger::ALL.iter().find_map(|&f| {
            let tip = self.fingertips[f.slot()];
            (index + Self::CHAIN_LEN > tip && index <= tip).then(|| (f, Self::CHAIN_LEN - 1 - (tip - index)))
        })
    }
}

/// Camera placement relative to the typing hands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoV {
    pub horizontal_deg: f64,
    pub vertical_deg: f64,
    pub distance: f64,
}

impl PoV {
    pub fn new(horizontal_deg: f64, vertical_deg: f64, distance: f64) -> Self {
        PoV {
            horizontal_deg,
            vertical_deg,
            distance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Space {
    Original,
    Observed { pov: PoV },
    Projected2d { pov: PoV },
}

impl Space {
    pub fn kind(&self) -> SpaceKind {
        match self {
            Space::Original => SpaceKind::Original,
            Space::Observed { .. } => SpaceKind::Observed,
            Space::Projected2d { .. } => SpaceKind::Projected2d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    Original,
    Observed,
    Projected2d,
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpaceKind::Original => "original",
            SpaceKind::Observed => "observed",
            SpaceKind::Projected2d => "projected-2d",
        })
    }
}

/// One telemetry sample: time plus `(x, y, z)` for every joint in layout order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    pub t: f64,
    pub coords: Vec<[f64; 3]>,
}

/// An ordered sequence of frames in one coordinate space.
///
/// In observed space the coordinates are `(u, camera_depth, v)`; in projected
/// 2D space they are `(u, 0, v)` with `has_depth == false`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub frames: Vec<TelemetryFrame>,
    pub space: Space,
    pub nominal_fps: f64,
    pub layout: HandLayout,
    pub has_depth: bool,
}

impl Session {
    pub fn new(space: Space, nominal_fps: f64, layout: HandLayout) -> Self {
        Session {
            frames: Vec::new(),
            has_depth: !matches!(space, Space::Projected2d { .. }),
            space,
            nominal_fps,
            layout,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn joint(&self, frame: usize, joint: JointId) -> [f64; 3] {
        self.frames[frame].coords[self.layout.flat_index(joint)]
    }

    pub fn require_space(&self, expected: SpaceKind) -> Result<()> {
        let found = self.space.kind();
        if found == expected {
            Ok(())
        } else {
            Err(Error::WrongSpace { expected, found })
        }
    }

    /// 16-frame window around `frame_idx`, clamped at the session edges by
    /// repeating the boundary frame.
    pub fn window(&self, frame_idx: usize) -> [usize; WINDOW_LEN] {
        let last = self.frames.len().saturating_sub(1);
        let mut w = [0; WINDOW_LEN];
        for (k, slot) in w.iter_mut().enumerate() {
            let raw = frame_idx as i64 - WINDOW_BEFORE as i64 + k as i64;
            *slot = raw.clamp(0, last as i64) as usize;
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    NonMonotoneTime,
    JointCount { expected: usize, found: usize },
    NonFinite,
    DepthPresentIn2d,
    DepthMissing,
    NonPositiveFps,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::NonMonotoneTime => f.write_str("non-monotone time"),
            Rule::JointCount { expected, found } => {
                write!(f, "joint count {found}, expected {expected}")
            }
            Rule::NonFinite => f.write_str("non-finite coordinate"),
            Rule::DepthPresentIn2d => f.write_str("depth present in 2D space"),
            Rule::DepthMissing => f.write_str("depth missing in 3D space"),
            Rule::NonPositiveFps => f.write_str("nominal fps must be positive"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub frame: Option<usize>,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.frame {
            Some(i) => write!(f, "frame {i}: {}", self.rule),
            None => write!(f, "session: {}", self.rule),
        }
    }
}

/// Checks every session invariant; an empty result means the session is well formed.
pub fn validate_session(s: &Session) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(s.nominal_fps > 0.0) || !s.nominal_fps.is_finite() {
        out.push(Violation {
            frame: None,
            rule: Rule::NonPositiveFps,
        });
    }
    match (s.space.kind(), s.has_depth) {
        (SpaceKind::Projected2d, true) => out.push(Violation {
            frame: None,
            rule: Rule::DepthPresentIn2d,
        }),
        (SpaceKind::Original | SpaceKind::Observed, false) => out.push(Violation {
            frame: None,
            rule: Rule::DepthMissing,
        }),
        _ => {}
    }
    let expected = s.layout.joint_count();
    for (i, frame) in s.frames.iter().enumerate() {
        if i > 0 && frame.t < s.frames[i - 1].t {
            out.push(Violation {
                frame: Some(i),
                rule: Rule::NonMonotoneTime,
            });
        }
        if frame.coords.len() != expected {
            out.push(Violation {
                frame: Some(i),
                rule: Rule::JointCount {
                    expected,
                    found: frame.coords.len(),
                },
            });
        }
        if !frame.t.is_finite() || frame.coords.iter().flatten().any(|v| !v.is_finite()) {
            out.push(Violation {
                frame: Some(i),
                rule: Rule::NonFinite,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Position of one fingertip in every frame of an original-space session.
pub fn fingertip_series(s: &Session, tip: JointId) -> Result<Vec<Sample>> {
    if !s.layout.is_fingertip(tip) {
        return Err(Error::NotFingertip(tip));
    }
    s.require_space(SpaceKind::Original)?;
    let flat = s.layout.flat_index(tip);
    Ok(s.frames
        .iter()
        .map(|f| {
            let [x, y, z] = f.coords[flat];
            Sample { t: f.t, x, y, z }
        })
        .collect())
}

/// Linearly interpolates the session onto an exact `1/fps` grid starting at the first frame.
pub fn resample_uniform(s: &Session, fps: f64) -> Result<Session> {
    if s.frames.len() < 2 {
        return Err(Error::TooFewFrames {
            needed: 2,
            got: s.frames.len(),
        });
    }
    if !(fps > 0.0) {
        return Err(Error::InvalidArgument(format!("fps must be positive, got {fps}")));
    }
    let t0 = s.frames[0].t;
    let t_end = s.frames[s.frames.len() - 1].t;
    let n = ((t_end - t0) * fps + 1e-9).floor() as usize + 1;
    let mut frames = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        let t = t0 + k as f64 / fps;
        while seg + 2 < s.frames.len() && s.frames[seg + 1].t <= t {
            seg += 1;
        }
        let a = &s.frames[seg];
        let b = &s.frames[seg + 1];
        let span = b.t - a.t;
        let w = if span > 0.0 {
            ((t - a.t) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let coords = if w == 0.0 {
            a.coords.clone()
        } else if w == 1.0 {
            b.coords.clone()
        } else {
            a.coords
                .iter()
                .zip(&b.coords)
                .map(|(p, q)| std::array::from_fn(|d| p[d] + w * (q[d] - p[d])))
                .collect()
        };
        frames.push(TelemetryFrame { t, coords });
    }
    Ok(Session {
        frames,
        nominal_fps: fps,
        ..s.clone_header()
    })
}

impl Session {
    /// Same header (space, rate, layout, depth flag) with no frames.
    pub fn clone_header(&self) -> Session {
        Session {
            frames: Vec::new(),
            space: self.space,
            nominal_fps: self.nominal_fps,
            layout: self.layout,
            has_depth: self.has_depth,
        }
    }
}

/// A key on the keyboard. Ids 0..=25 are `a..=z`, then space, period, comma,
/// and finally backspace, which is outside the decoding alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct KeyId(u8);

impl KeyId {
    pub const SPACE: KeyId = KeyId(26);
    pub const PERIOD: KeyId = KeyId(27);
    pub const COMMA: KeyId = KeyId(28);
    pub const BACKSPACE: KeyId = KeyId(29);
    /// Size of the decoding alphabet (letters, space, period, comma).
    pub const ALPHABET: usize = 29;

    pub fn from_index(i: usize) -> Option<KeyId> {
        (i <= 29).then_some(KeyId(i as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_char(c: char) -> Option<KeyId> {
        match c {
            'a'..='z' => Some(KeyId(c as u8 - b'a')),
            'A'..='Z' => Some(KeyId(c as u8 - b'A')),
            ' ' => Some(Self::SPACE),
            '.' => Some(Self::PERIOD),
            ',' => Some(Self::COMMA),
            '\u{8}' => Some(Self::BACKSPACE),
            _ => None,
        }
    }

    /// Printable character; backspace maps to `'\u{8}'`.
    pub fn to_char(self) -> char {
        match self.0 {
            0..=25 => (b'a' + self.0) as char,
            26 => ' ',
            27 => '.',
            28 => ',',
            _ => '\u{8}',
        }
    }

    pub fn is_backspace(self) -> bool {
        self == Self::BACKSPACE
    }

    pub fn name(self) -> String {
        match self.0 {
            26 => "space".into(),
            27 => "period".into(),
            28 => "comma".into(),
            29 => "backspace".into(),
            _ => self.to_char().to_string(),
        }
    }

    pub fn alphabet() -> impl Iterator<Item = KeyId> {
        (0..Self::ALPHABET as u8).map(KeyId)
    }
}

impl fmt::Display for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl From<KeyId> for String {
    fn from(k: KeyId) -> String {
        k.name()
    }
}

impl TryFrom<String> for KeyId {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        match s.as_str() {
            "space" => Ok(KeyId::SPACE),
            "period" => Ok(KeyId::PERIOD),
            "comma" => Ok(KeyId::COMMA),
            "backspace" => Ok(KeyId::BACKSPACE),
            _ => {
                let mut chars = s.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) if c.is_ascii_lowercase() => Ok(KeyId(c as u8 - b'a')),
                    _ => Err(format!("unknown key name {s:?}")),
                }
            }
        }
    }
}

/// Maps text onto the decoding alphabet: lowercase letters, space, period and
/// comma are kept, every other run of characters becomes a single space.
pub fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        let c = c.to_ascii_lowercase();
        if c.is_ascii_lowercase() || c == '.' || c == ',' {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        } else {
            pending_space = true;
        }
    }
    out
}

/// Decodes a key sequence into text, applying backspace deletions.
pub fn apply_backspaces(keys: impl IntoIterator<Item = KeyId>) -> String {
    let mut out: Vec<char> = Vec::new();
    for k in keys {
        if k.is_backspace() {
            out.pop();
        } else {
            out.push(k.to_char());
        }
    }
    out.into_iter().collect()
}

/// Physical keyboard: key centers on the keyboard plane plus key geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyboardModel {
    /// Key center `(x, z)` in meters.
    pub keys: BTreeMap<KeyId, [f64; 2]>,
    pub key_width: f64,
    pub key_pitch: f64,
    pub key_height: f64,
    pub plane_y: f64,
    /// Outline `(width, depth)` in meters, centered on the origin of the `(x, z)` plane.
    pub dimensions: [f64; 2],
}

impl KeyboardModel {
    pub fn center(&self, key: KeyId) -> Option<[f64; 2]> {
        self.keys.get(&key).copied()
    }

    /// Checks the keyboard invariants, returning a description of the first violation.
    pub fn check(&self) -> std::result::Result<(), String> {
        if !(self.key_height > 0.0 && self.key_width > 0.0 && self.key_pitch > 0.0) {
            return Err("key geometry must be positive".into());
        }
        let [w, d] = self.dimensions;
        let centers: Vec<_> = self.keys.iter().collect();
        for (i, (k, c)) in centers.iter().enumerate() {
            if c[0].abs() > w / 2.0 || c[1].abs() > d / 2.0 {
                return Err(format!("key {k} lies outside the keyboard outline"));
            }
            for (k2, c2) in &centers[i + 1..] {
                if c == c2 {
                    return Err(format!("keys {k} and {k2} share a center"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthEvent {
    pub t: f64,
    pub key: KeyId,
    pub finger: JointId,
}

/// What was typed: the final text plus every key press including typos and backspaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub text: String,
    pub events: Vec<GroundTruthEvent>,
}

impl GroundTruth {
    pub fn replay(&self) -> String {
        apply_backspaces(self.events.iter().map(|e| e.key))
    }
}

/// A detected key press.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeystrokeEvent {
    pub frame_idx: usize,
    pub window: [usize; WINDOW_LEN],
    /// Peak acceleration that triggered the detection, m/s².
    pub amplitude: f64,
    pub finger: Option<JointId>,
    pub thumb: bool,
    pub touchpoint: Option<[f64; 2]>,
    pub cluster: Option<usize>,
    pub label: Option<KeyId>,
}

impl KeystrokeEvent {
    pub fn new(s: &Session, frame_idx: usize, amplitude: f64) -> Self {
        KeystrokeEvent {
            frame_idx,
            window: s.window(frame_idx),
            amplitude,
            finger: None,
            thumb: false,
            touchpoint: None,
            cluster: None,
            label: None,
        }
    }
}
