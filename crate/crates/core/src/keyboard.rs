//! The reference QWERTY keyboard and the touch-typing finger assignment that
//! ships with the simulator.

use std::collections::BTreeMap;

use crate::model::{Finger, Hand, HandLayout, JointId, KeyId, KeyboardModel};

/// Center-to-center key spacing of a full-size keyboard.
pub const KEY_PITCH: f64 = 0.019;
pub const KEY_WIDTH: f64 = 0.0155;
/// Key travel height; depth errors are reported in multiples of this.
pub const KEY_HEIGHT: f64 = 0.0044;
pub const PLANE_Y: f64 = -0.40;
/// Outline of the reference keyboard, 42.7 cm by 13.0 cm.
pub const DIMENSIONS: [f64; 2] = [0.427, 0.130];

// Key centers in key units: x from the left edge of the main block, row 0 is the
// number row and row 4 the space-bar row.
const ROWS: &[(&str, f64, f64)] = &[
    ("qwertyuiop", 2.0, 1.0),
    ("asdfghjkl", 2.25, 2.0),
    ("zxcvbnm,.", 2.75, 3.0),
];
const BACKSPACE_UNITS: (f64, f64) = (14.0, 0.0);
const SPACE_UNITS: (f64, f64) = (6.875, 4.0);
const BLOCK_WIDTH_UNITS: f64 = 15.0;
const HOME_ROW: f64 = 2.0;

fn to_plane(ux: f64, row: f64) -> [f64; 2] {
    [(ux - BLOCK_WIDTH_UNITS / 2.0) * KEY_PITCH, (HOME_ROW - row) * KEY_PITCH]
}

/// Standard US QWERTY keyboard restricted to the letters, space, period,
/// comma and backspace.
pub fn qwerty() -> KeyboardModel {
    let mut keys = BTreeMap::new();
    for &(row_keys, start, row) in ROWS {
        for (i, c) in row_keys.chars().enumerate() {
            let key = KeyId::from_char(c).expect("layout uses alphabet characters");
            keys.insert(key, to_plane(start + i as f64, row));
        }
    }
    keys.insert(KeyId::SPACE, to_plane(SPACE_UNITS.0, SPACE_UNITS.1));
    keys.insert(KeyId::BACKSPACE, to_plane(BACKSPACE_UNITS.0, BACKSPACE_UNITS.1));
    KeyboardModel {
        keys,
        key_width: KEY_WIDTH,
        key_pitch: KEY_PITCH,
        key_height: KEY_HEIGHT,
        plane_y: PLANE_Y,
        dimensions: DIMENSIONS,
    }
}

/// Touch-typing finger for every key of [`qwerty`].
///
/// | finger        | keys           |
/// |---------------|----------------|
/// | left pinky    | q a z          |
/// | left ring     | w s x          |
/// | left middle   | e d c          |
/// | left index    | r f v t g b    |
/// | right index   | y h n u j m    |
/// | right middle  | i k ,          |
/// | right ring    | o l .          |
/// | right pinky   | p backspace    |
/// | right thumb   | space          |
pub fn touch_typing_fingers(layout: &HandLayout) -> BTreeMap<KeyId, JointId> {
    let table: &[(&str, Hand, Finger)] = &[
        ("qaz", Hand::Left, Finger::Pinky),
        ("wsx", Hand::Left, Finger::Ring),
        ("edc", Hand::Left, Finger::Middle),
        ("rfvtgb", Hand::Left, Finger::Index),
        ("yhnujm", Hand::Right, Finger::Index),
        ("ik,", Hand::Right, Finger::Middle),
        ("ol.", Hand::Right, Finger::Ring),
        ("p\u{8}", Hand::Right, Finger::Pinky),
        (" ", Hand::Right, Finger::Thumb),
    ];
    let mut map = BTreeMap::new();
    for &(keys, hand, finger) in table {
        for c in keys.chars() {
            map.insert(
                KeyId::from_char(c).expect("table uses known keys"),
                layout.fingertip(hand, finger),
            );
        }
    }
    map
}

/// Home-row resting position `(x, z)` of each fingertip.
pub fn home_positions(layout: &HandLayout) -> BTreeMap<JointId, [f64; 2]> {
    let home: &[(Hand, Finger, f64, f64)] = &[
        (Hand::Left, Finger::Pinky, 2.25, HOME_ROW),
        (Hand::Left, Finger::Ring, 3.25, HOME_ROW),
        (Hand::Left, Finger::Middle, 4.25, HOME_ROW),
        (Hand::Left, Finger::Index, 5.25, HOME_ROW),
        (Hand::Left, Finger::Thumb, 5.5, 4.0),
        (Hand::Right, Finger::Index, 8.25, HOME_ROW),
        (Hand::Right, Finger::Middle, 9.25, HOME_ROW),
        (Hand::Right, Finger::Ring, 10.25, HOME_ROW),
        (Hand::Right, Finger::Pinky, 11.25, HOME_ROW),
        (Hand::Right, Finger::Thumb, 8.25, 4.0),
    ];
    home.iter()
        .map(|&(h, f, ux, row)| (layout.fingertip(h, f), to_plane(ux, row)))
        .collect()
}

/// Keys adjacent to `key` left, right, above and below, restricted to the
/// decoding alphabet without space.
pub fn neighbors(kb: &KeyboardModel, key: KeyId) -> Vec<KeyId> {
    let Some(c) = kb.center(key) else {
        return Vec::new();
    };
    let pitch = kb.key_pitch;
    let candidates: Vec<(KeyId, [f64; 2])> = kb
        .keys
        .iter()
        .filter(|(k, _)| **k != key && k.index() < KeyId::ALPHABET && **k != KeyId::SPACE)
        .map(|(k, p)| (*k, *p))
        .collect();
    let mut out = Vec::new();
    for dir in [-1.0, 1.0] {
        let side = candidates
            .iter()
            .filter(|(_, p)| (p[1] - c[1]).abs() < 0.1 * pitch && ((p[0] - c[0]) * dir - pitch).abs() < 0.1 * pitch)
            .map(|(k, _)| *k)
            .next();
        out.extend(side);
        let vertical = candidates
            .iter()
            .filter(|(_, p)| ((p[1] - c[1]) * dir - pitch).abs() < 0.1 * pitch && (p[0] - c[0]).abs() <= 0.75 * pitch)
            .min_by(|a, b| (a.1[0] - c[0]).abs().total_cmp(&(b.1[0] - c[0]).abs()))
            .map(|(k, _)| *k);
        out.extend(vertical);
    }
    out.sort();
    out
}
