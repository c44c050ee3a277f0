//! Camera transforms between the three telemetry surfaces.
//!
//! A camera looks at `target` from `distance` meters away. At PoV `(0, 0)` it
//! sits on the far side of the keyboard (`+z`) at hand height, looking back at
//! the typist; the horizontal angle turns it about the vertical axis and the
//! vertical angle then raises it, so `(0, 90)` looks straight down.
//!
//! With `q = Rx(vertical) · Ry(horizontal) · (p - target)`, the camera depth is
//! `distance - q.z` and the screen coordinates are
//! `u = focal · q.x / depth + u0`, `v = focal · q.y / depth + v0`.
//! Observed frames store `(u, depth, v)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PoV, Session, Space, SpaceKind, TelemetryFrame};
use crate::rng;

/// Minimum angular separation for stereo reconstruction, degrees.
pub const MIN_BASELINE_DEG: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub pov: PoV,
    pub focal: f64,
    pub principal: [f64; 2],
    /// Point the camera is aimed at, in original coordinates.
    pub target: [f64; 3],
}

type Mat3 = [[f64; 3]; 3];

fn mul(m: &Mat3, p: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2],
        m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2],
        m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2],
    ]
}

fn mul_t(m: &Mat3, p: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * p[0] + m[1][0] * p[1] + m[2][0] * p[2],
        m[0][1] * p[0] + m[1][1] * p[1] + m[2][1] * p[2],
        m[0][2] * p[0] + m[1][2] * p[1] + m[2][2] * p[2],
    ]
}

impl CameraModel {
    pub fn new(pov: PoV, target: [f64; 3]) -> Self {
        CameraModel {
            pov,
            focal: 1.0,
            principal: [0.0, 0.0],
            target,
        }
    }

    /// Camera aimed at the centroid of all joints over the whole session.
    pub fn aimed_at(pov: PoV, s: &Session) -> Self {
        CameraModel::new(pov, centroid(s))
    }

    fn check(&self) -> Result<()> {
        if !(self.focal > 0.0) || !(self.pov.distance > 0.0) {
            return Err(Error::InvalidArgument(
                "camera focal length and distance must be positive".into(),
            ));
        }
        Ok(())
    }

    /// World-to-camera rotation.
    pub fn rotation(&self) -> Mat3 {
        let (sh, ch) = self.pov.horizontal_deg.to_radians().sin_cos();
        let (sv, cv) = self.pov.vertical_deg.to_radians().sin_cos();
        // Rx(v) * Ry(h)
        [[ch, 0.0, sh], [sv * sh, cv, -sv * ch], [-cv * sh, sv, cv * ch]]
    }

    pub fn project(&self, p: [f64; 3]) -> Option<[f64; 3]> {
        let r = self.rotation();
        let q = mul(&r, sub(p, self.target));
        let depth = self.pov.distance - q[2];
        if !(depth > 0.0) {
            return None;
        }
        Some([
            self.focal * q[0] / depth + self.principal[0],
            depth,
            self.focal * q[1] / depth + self.principal[1],
        ])
    }

    pub fn unproject(&self, o: [f64; 3]) -> [f64; 3] {
        let depth = o[1];
        let q = [
            (o[0] - self.principal[0]) * depth / self.focal,
            (o[2] - self.principal[1]) * depth / self.focal,
            self.pov.distance - depth,
        ];
        add(mul_t(&self.rotation(), q), self.target)
    }

    /// Camera center and unit-free ray direction through screen point `(u, v)`, world coordinates.
    pub fn ray(&self, u: f64, v: f64) -> ([f64; 3], [f64; 3]) {
        let r = self.rotation();
        let center = add(mul_t(&r, [0.0, 0.0, self.pov.distance]), self.target);
        let dir = mul_t(
            &r,
            [
                (u - self.principal[0]) / self.focal,
                (v - self.principal[1]) / self.focal,
                -1.0,
            ],
        );
        (center, dir)
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn centroid(s: &Session) -> [f64; 3] {
    let mut sum = [0.0; 3];
    let mut n = 0usize;
    for f in &s.frames {
        for c in &f.coords {
            sum = add(sum, *c);
            n += 1;
        }
    }
    if n == 0 {
        return sum;
    }
    sum.map(|v| v / n as f64)
}

pub fn to_observed(s: &Session, cam: &CameraModel) -> Result<Session> {
    s.require_space(SpaceKind::Original)?;
    cam.check()?;
    let mut out = Session::new(Space::Observed { pov: cam.pov }, s.nominal_fps, s.layout);
    out.frames.reserve(s.len());
    for (i, f) in s.frames.iter().enumerate() {
        let coords = f
            .coords
            .iter()
            .enumerate()
            .map(|(j, &p)| cam.project(p).ok_or(Error::JointBehindCamera { frame: i, joint: j }))
            .collect::<Result<_>>()?;
        out.frames.push(TelemetryFrame { t: f.t, coords });
    }
    Ok(out)
}

pub fn project_2d(s: &Session) -> Result<Session> {
    let Space::Observed { pov } = s.space else {
        return Err(Error::WrongSpace {
            expected: SpaceKind::Observed,
            found: s.space.kind(),
        });
    };
    let mut out = Session::new(Space::Projected2d { pov }, s.nominal_fps, s.layout);
    out.frames = s
        .frames
        .iter()
        .map(|f| TelemetryFrame {
            t: f.t,
            coords: f.coords.iter().map(|c| [c[0], 0.0, c[2]]).collect(),
        })
        .collect();
    Ok(out)
}

pub fn invert_observed(s: &Session, cam: &CameraModel) -> Result<Session> {
    match s.space {
        Space::Observed { .. } if s.has_depth => {}
        Space::Observed { .. } | Space::Projected2d { .. } => return Err(Error::MissingDepth),
        Space::Original => {
            return Err(Error::WrongSpace {
                expected: SpaceKind::Observed,
                found: SpaceKind::Original,
            })
        }
    }
    cam.check()?;
    let mut out = Session::new(Space::Original, s.nominal_fps, s.layout);
    out.frames = s
        .frames
        .iter()
        .map(|f| TelemetryFrame {
            t: f.t,
            coords: f.coords.iter().map(|&o| cam.unproject(o)).collect(),
        })
        .collect();
    Ok(out)
}

/// Single-camera inverse of a 2D session that assumes every joint lies at the
/// camera's aim distance. Geometry along the viewing axis is lost.
pub fn invert_flat(s: &Session, cam: &CameraModel) -> Result<Session> {
    s.require_space(SpaceKind::Projected2d)?;
    cam.check()?;
    let d = cam.pov.distance;
    let mut out = Session::new(Space::Original, s.nominal_fps, s.layout);
    out.frames = s
        .frames
        .iter()
        .map(|f| TelemetryFrame {
            t: f.t,
            coords: f.coords.iter().map(|c| cam.unproject([c[0], d, c[2]])).collect(),
        })
        .collect();
    Ok(out)
}

pub fn stereo_reconstruct(a: &Session, cam_a: &CameraModel, b: &Session, cam_b: &CameraModel) -> Result<Session> {
    a.require_space(SpaceKind::Projected2d)?;
    b.require_space(SpaceKind::Projected2d)?;
    cam_a.check()?;
    cam_b.check()?;
    let separation = (cam_a.pov.horizontal_deg - cam_b.pov.horizontal_deg)
        .abs()
        .max((cam_a.pov.vertical_deg - cam_b.pov.vertical_deg).abs());
    if separation < MIN_BASELINE_DEG {
        return Err(Error::DegenerateBaseline {
            separation_deg: separation,
            min_deg: MIN_BASELINE_DEG,
        });
    }
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "camera sessions have {} and {} frames",
            a.len(),
            b.len()
        )));
    }
    let tol = 0.5 / a.nominal_fps;
    let mut out = Session::new(Space::Original, a.nominal_fps, a.layout);
    out.frames.reserve(a.len());
    for (i, (fa, fb)) in a.frames.iter().zip(&b.frames).enumerate() {
        let delta = (fa.t - fb.t).abs();
        if delta > tol {
            return Err(Error::TimestampMismatch { frame: i, delta });
        }
        let coords = fa
            .coords
            .iter()
            .zip(&fb.coords)
            .map(|(pa, pb)| {
                let (c1, d1) = cam_a.ray(pa[0], pa[2]);
                let (c2, d2) = cam_b.ray(pb[0], pb[2]);
                midpoint(c1, d1, c2, d2)
            })
            .collect();
        out.frames.push(TelemetryFrame { t: fa.t, coords });
    }
    Ok(out)
}

/// Midpoint of the shortest segment between two rays.
fn midpoint(c1: [f64; 3], d1: [f64; 3], c2: [f64; 3], d2: [f64; 3]) -> [f64; 3] {
    let w = sub(c1, c2);
    let a = dot(d1, d1);
    let b = dot(d1, d2);
    let c = dot(d2, d2);
    let d = dot(d1, w);
    let e = dot(d2, w);
    let den = a * c - b * b;
    let (s, t) = if den.abs() < 1e-15 * a * c {
        (0.0, e / c)
    } else {
        ((b * e - c * d) / den, (a * e - b * d) / den)
    };
    let p1 = add(c1, d1.map(|v| v * s));
    let p2 = add(c2, d2.map(|v| v * t));
    [0.5 * (p1[0] + p2[0]), 0.5 * (p1[1] + p2[1]), 0.5 * (p1[2] + p2[2])]
}

/// Adds i.i.d. Gaussian noise of std `sigma` (screen units) to both screen coordinates.
pub fn add_screen_noise(s: &Session, sigma: f64, seed: u64) -> Result<Session> {
    s.require_space(SpaceKind::Projected2d)?;
    let mut r = rng::stream(seed, "transforms/screen-noise");
    let mut out = s.clone();
    for f in &mut out.frames {
        for c in &mut f.coords {
            let du: f64 = r.sample(StandardNormal);
            let dv: f64 = r.sample(StandardNormal);
            c[0] += sigma * du;
            c[2] += sigma * dv;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HandLayout;

    fn one_frame(points: &[[f64; 3]]) -> Session {
        let layout = HandLayout::COMPACT;
        let mut s = Session::new(Space::Original, 60.0, layout);
        let mut coords = vec![[0.0, 0.0, 0.0]; layout.joint_count()];
        coords[..points.len()].copy_from_slice(points);
        s.frames.push(TelemetryFrame { t: 0.0, coords });
        s
    }

    #[test]
    fn rotation_is_orthonormal() {
        let cam = CameraModel::new(PoV::new(33.0, 71.0, 1.0), [0.0; 3]);
        let r = cam.rotation();
        for i in 0..3 {
            for j in 0..3 {
                let d: f64 = (0..3).map(|k| r[i][k] * r[j][k]).sum();
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn optical_axis_maps_to_principal_point() {
        let mut cam = CameraModel::new(PoV::new(0.0, 0.0, 0.7), [0.1, -0.3, 0.05]);
        cam.principal = [0.2, -0.1];
        let o = cam.project(cam.target).unwrap();
        assert!((o[0] - 0.2).abs() < 1e-15);
        assert!((o[1] - 0.7).abs() < 1e-15);
        assert!((o[2] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn top_down_view_matches_hand_rotation() {
        // At (0, 90) the rotation maps (x, y, z) to (x, -z, y).
        let cam = CameraModel::new(PoV::new(0.0, 90.0, 2.0), [0.0; 3]);
        let p = [0.3, 0.5, -0.2];
        let o = cam.project(p).unwrap();
        let depth = 2.0 - 0.5;
        assert!((o[1] - depth).abs() < 1e-12);
        assert!((o[0] - 0.3 / depth).abs() < 1e-12);
        assert!((o[2] - 0.2 / depth).abs() < 1e-12);
    }

    #[test]
    fn frontal_inverse_matches_closed_form() {
        let cam = CameraModel::new(PoV::new(0.0, 0.0, 1.0), [0.0; 3]);
        let pts = [[0.1, 0.2, 0.3], [-0.2, 0.05, -0.4], [0.0, -0.1, 0.25]];
        let obs = to_observed(&one_frame(&pts), &cam).unwrap();
        for (o, p) in obs.frames[0].coords.iter().zip(&pts) {
            // depth = 1 - z, u = x / depth, v = y / depth
            let x = o[0] * o[1];
            let y = o[2] * o[1];
            let z = 1.0 - o[1];
            assert!((x - p[0]).abs() < 1e-12 && (y - p[1]).abs() < 1e-12 && (z - p[2]).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_at_camera_is_rejected() {
        let cam = CameraModel::new(PoV::new(0.0, 0.0, 1.0), [0.0; 3]);
        let s = one_frame(&[[0.0, 0.0, 1.0]]);
        assert!(matches!(
            to_observed(&s, &cam),
            Err(Error::JointBehindCamera { frame: 0, joint: 0 })
        ));
    }

    #[test]
    fn projection_keeps_screen_coordinates() {
        let cam = CameraModel::new(PoV::new(15.0, 30.0, 1.0), [0.0; 3]);
        let obs = to_observed(&one_frame(&[[0.1, 0.1, 0.1]]), &cam).unwrap();
        let flat = project_2d(&obs).unwrap();
        assert!(!flat.has_depth);
        assert_eq!(flat.frames[0].coords[0][0], obs.frames[0].coords[0][0]);
        assert_eq!(flat.frames[0].coords[0][2], obs.frames[0].coords[0][2]);
        assert!(matches!(project_2d(&one_frame(&[])), Err(Error::WrongSpace { .. })));
        assert!(matches!(invert_observed(&flat, &cam), Err(Error::MissingDepth)));
    }

    #[test]
    fn empty_sessions_pass_through() {
        let mut s = one_frame(&[]);
        s.frames.clear();
        let cam = CameraModel::new(PoV::new(0.0, 0.0, 1.0), [0.0; 3]);
        let flat = project_2d(&to_observed(&s, &cam).unwrap()).unwrap();
        assert!(flat.is_empty());
    }

    #[test]
    fn stereo_requires_separated_views() {
        let s = one_frame(&[[0.1, 0.0, 0.0]]);
        let cam = CameraModel::new(PoV::new(0.0, 0.0, 1.0), [0.0; 3]);
        let flat = project_2d(&to_observed(&s, &cam).unwrap()).unwrap();
        assert!(matches!(
            stereo_reconstruct(&flat, &cam, &flat, &cam),
            Err(Error::DegenerateBaseline { .. })
        ));
    }

    #[test]
    fn stereo_rejects_misaligned_timestamps() {
        let s = one_frame(&[[0.1, 0.0, 0.0]]);
        let ca = CameraModel::new(PoV::new(0.0, 0.0, 1.0), [0.0; 3]);
        let cb = CameraModel::new(PoV::new(0.0, 45.0, 1.0), [0.0; 3]);
        let a = project_2d(&to_observed(&s, &ca).unwrap()).unwrap();
        let mut b = project_2d(&to_observed(&s, &cb).unwrap()).unwrap();
        b.frames[0].t += 0.1;
        assert!(matches!(
            stereo_reconstruct(&a, &ca, &b, &cb),
            Err(Error::TimestampMismatch { frame: 0, .. })
        ));
    }

    #[test]
    fn flat_inverse_is_exact_at_aim_depth() {
        let cam = CameraModel::new(PoV::new(20.0, 10.0, 1.0), [0.0; 3]);
        let s = one_frame(&[[0.0, 0.0, 0.0]]);
        let flat = project_2d(&to_observed(&s, &cam).unwrap()).unwrap();
        let back = invert_flat(&flat, &cam).unwrap();
        assert!(back.frames[0].coords[0].iter().all(|v| v.abs() < 1e-12));
    }
}
