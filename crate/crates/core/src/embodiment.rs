//! Embodiment configurations: collider box, yaw pivot and one or two cameras.
//!
//! Configurations are sampled from [`SamplingRanges`], loaded from the
//! real-robot presets, or read from JSON. Camera placement ranges are stored
//! relative to the collider (fractions of its extent, or capped by its
//! height) so that any collider draw leaves them satisfiable.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Length of [`config_vector`].
pub const CONFIG_VECTOR_LEN: usize = 24;
const CAMERA_SLOT_LEN: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    /// Lateral offset from the collider center, meters (right positive).
    pub pos_x: f64,
    /// Height above the floor, meters.
    pub pos_y: f64,
    /// Longitudinal offset from the collider center, meters (forward positive).
    pub pos_z: f64,
    /// Degrees, downward positive.
    pub pitch: f64,
    /// Degrees clockwise from the body's forward axis.
    pub yaw: f64,
    pub hfov: f64,
    pub vfov: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Collider {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Offset of the rotation center from the collider footprint center, in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pivot {
    pub x: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbodimentConfig {
    pub id: String,
    pub collider: Collider,
    pub pivot: Pivot,
    pub cameras: Vec<CameraConfig>,
}

impl EmbodimentConfig {
    pub fn camera_count(&self) -> usize {
        self.cameras.len()
    }

    /// Radius of the smallest pivot-centered disc containing the collider at every heading.
    pub fn sweep_radius(&self) -> f64 {
        let hx = self.collider.x / 2.0 + self.pivot.x.abs();
        let hz = self.collider.z / 2.0 + self.pivot.z.abs();
        (hx * hx + hz * hz).sqrt()
    }

    pub fn to_json(&self) -> Result<String> {
        crate::canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// A single invariant violated by an [`EmbodimentConfig`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveCollider,
    PivotOutsideFootprint,
    CameraCount(usize),
    FirstCameraYaw(f64),
    SecondCameraYaw(f64),
    FieldOfView { camera: usize },
    Resolution { camera: usize },
    CameraAboveCollider { camera: usize },
    CameraBelowFloor { camera: usize },
    CameraOutsideFootprint { camera: usize },
    NonFinite,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveCollider => write!(f, "collider dimensions must be positive"),
            Violation::PivotOutsideFootprint => write!(f, "pivot outside footprint"),
            Violation::CameraCount(n) => write!(f, "expected 1 or 2 cameras, found {n}"),
            Violation::FirstCameraYaw(y) => write!(f, "first camera yaw must be 0, found {y}"),
            Violation::SecondCameraYaw(y) => write!(f, "second camera yaw {y} outside [0, 360)"),
            Violation::FieldOfView { camera } => {
                write!(f, "camera {camera} field of view outside (0, 180)")
            }
            Violation::Resolution { camera } => write!(f, "camera {camera} resolution below 1"),
            Violation::CameraAboveCollider { camera } => {
                write!(f, "camera above collider (camera {camera})")
            }
            Violation::CameraBelowFloor { camera } => {
                write!(f, "camera {camera} height must be positive")
            }
            Violation::CameraOutsideFootprint { camera } => {
                write!(f, "camera {camera} outside collider footprint")
            }
            Violation::NonFinite => write!(f, "non-finite parameter"),
        }
    }
}

/// Every invariant `e` violates; empty when valid.
pub fn validate(e: &EmbodimentConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let c = e.collider;
    let scalars = [c.x, c.y, c.z, e.pivot.x, e.pivot.z];
    let cam_scalars = e
        .cameras
        .iter()
        .flat_map(|k| [k.pos_x, k.pos_y, k.pos_z, k.pitch, k.yaw, k.hfov, k.vfov]);
    if scalars.iter().copied().chain(cam_scalars).any(|v| !v.is_finite()) {
        out.push(Violation::NonFinite);
        return out;
    }
    if c.x <= 0.0 || c.y <= 0.0 || c.z <= 0.0 {
        out.push(Violation::NonPositiveCollider);
    }
    if e.pivot.x.abs() > c.x / 2.0 || e.pivot.z.abs() > c.z / 2.0 {
        out.push(Violation::PivotOutsideFootprint);
    }
    if e.cameras.is_empty() || e.cameras.len() > 2 {
        out.push(Violation::CameraCount(e.cameras.len()));
    }
    for (i, cam) in e.cameras.iter().enumerate() {
        if i == 0 && cam.yaw != 0.0 {
            out.push(Violation::FirstCameraYaw(cam.yaw));
        }
        if i == 1 && !(0.0..360.0).contains(&cam.yaw) {
            out.push(Violation::SecondCameraYaw(cam.yaw));
        }
        let fov_ok = |v: f64| v > 0.0 && v < 180.0;
        if !fov_ok(cam.hfov) || !fov_ok(cam.vfov) {
            out.push(Violation::FieldOfView { camera: i });
        }
        if cam.width < 1 || cam.height < 1 {
            out.push(Violation::Resolution { camera: i });
        }
        if cam.pos_y > c.y {
            out.push(Violation::CameraAboveCollider { camera: i });
        }
        if cam.pos_y <= 0.0 {
            out.push(Violation::CameraBelowFloor { camera: i });
        }
        if cam.pos_x.abs() > c.x / 2.0 || cam.pos_z.abs() > c.z / 2.0 {
            out.push(Violation::CameraOutsideFootprint { camera: i });
        }
    }
    out
}

pub fn ensure_valid(e: &EmbodimentConfig) -> Result<()> {
    let violations = validate(e);
    if violations.is_empty() {
        return Ok(());
    }
    let joined = violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ");
    Err(Error::validation(format!("embodiment `{}`", e.id), joined))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        other.lo >= self.lo && other.hi <= self.hi
    }

    fn check(&self, name: &str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo > self.hi {
            return Err(Error::Range(format!(
                "{name}: interval [{}, {}] is empty or non-finite",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

/// Per-camera sampling ranges.
///
/// `pos_x_frac` and `pos_z_frac` are fractions of the collider extent;
/// `pos_y` is absolute but additionally capped by the sampled collider height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraRanges {
    pub pos_x_frac: Interval,
    pub pos_y: Interval,
    pub pos_z_frac: Interval,
    pub pitch: Interval,
    pub yaw: Interval,
    pub hfov: Interval,
    pub vfov: Interval,
    pub width: Interval,
    pub height: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingRanges {
    pub collider_x: Interval,
    pub collider_y: Interval,
    pub collider_z: Interval,
    /// Fraction of `collider_x`.
    pub pivot_x_frac: Interval,
    /// Fraction of `collider_z`.
    pub pivot_z_frac: Interval,
    pub camera1: CameraRanges,
    pub camera2: CameraRanges,
    /// Probability that a sampled embodiment carries a second camera.
    pub two_camera_prob: f64,
}

impl Default for SamplingRanges {
    fn default() -> Self {
        let camera = CameraRanges {
            pos_x_frac: Interval::new(-0.5, 0.5),
            pos_y: Interval::new(0.3, 1.5),
            pos_z_frac: Interval::new(-0.5, 0.5),
            pitch: Interval::new(-20.0, 40.0),
            yaw: Interval::new(0.0, 0.0),
            hfov: Interval::new(40.0, 120.0),
            vfov: Interval::new(40.0, 100.0),
            width: Interval::new(112.0, 448.0),
            height: Interval::new(112.0, 448.0),
        };
        Self {
            collider_x: Interval::new(0.2, 0.5),
            collider_y: Interval::new(0.3, 1.5),
            collider_z: Interval::new(0.2, 0.5),
            pivot_x_frac: Interval::new(-1.0 / 3.0, 1.0 / 3.0),
            pivot_z_frac: Interval::new(-1.0 / 3.0, 1.0 / 3.0),
            camera1: camera,
            camera2: CameraRanges {
                pitch: Interval::new(-20.0, 60.0),
                // Sampled half-open; 360 itself is never produced.
                yaw: Interval::new(0.0, 360.0),
                ..camera
            },
            two_camera_prob: 0.5,
        }
    }
}

impl SamplingRanges {
    pub fn validate(&self) -> Result<()> {
        self.collider_x.check("collider_x")?;
        self.collider_y.check("collider_y")?;
        self.collider_z.check("collider_z")?;
        self.pivot_x_frac.check("pivot_x")?;
        self.pivot_z_frac.check("pivot_z")?;
        if self.collider_x.lo <= 0.0 || self.collider_y.lo <= 0.0 || self.collider_z.lo <= 0.0 {
            return Err(Error::Range("collider ranges must be positive".into()));
        }
        let half = Interval::new(-0.5, 0.5);
        if !half.contains_interval(&self.pivot_x_frac) || !half.contains_interval(&self.pivot_z_frac)
        {
            return Err(Error::Range("pivot fractions must lie in [-0.5, 0.5]".into()));
        }
        if !(0.0..=1.0).contains(&self.two_camera_prob) {
            return Err(Error::Range("two_camera_prob must lie in [0, 1]".into()));
        }
        for (i, cam) in [&self.camera1, &self.camera2].into_iter().enumerate() {
            let name = |f: &str| format!("camera{}.{f}", i + 1);
            for (f, iv) in [
                ("pos_x", cam.pos_x_frac),
                ("pos_y", cam.pos_y),
                ("pos_z", cam.pos_z_frac),
                ("pitch", cam.pitch),
                ("yaw", cam.yaw),
                ("hfov", cam.hfov),
                ("vfov", cam.vfov),
                ("width", cam.width),
                ("height", cam.height),
            ] {
                iv.check(&name(f))?;
            }
            if !half.contains_interval(&cam.pos_x_frac) || !half.contains_interval(&cam.pos_z_frac)
            {
                return Err(Error::Range(format!("{} fraction outside [-0.5, 0.5]", name("pos"))));
            }
            if cam.pos_y.lo <= 0.0 {
                return Err(Error::Range(format!("{} must be positive", name("pos_y"))));
            }
            if cam.pos_y.lo > self.collider_y.hi {
                return Err(Error::Range(format!(
                    "{} lower bound exceeds the tallest collider",
                    name("pos_y")
                )));
            }
            if cam.hfov.lo <= 0.0 || cam.hfov.hi >= 180.0 || cam.vfov.lo <= 0.0 || cam.vfov.hi >= 180.0
            {
                return Err(Error::Range(format!("{} outside (0, 180)", name("fov"))));
            }
            if cam.width.lo < 1.0 || cam.height.lo < 1.0 {
                return Err(Error::Range(format!("{} below 1 pixel", name("resolution"))));
            }
            if cam.width.lo.fract() != 0.0
                || cam.width.hi.fract() != 0.0
                || cam.height.lo.fract() != 0.0
                || cam.height.hi.fract() != 0.0
            {
                return Err(Error::Range(format!("{} bounds must be integers", name("resolution"))));
            }
        }
        if self.camera1.yaw != Interval::new(0.0, 0.0) {
            return Err(Error::Range("camera1.yaw must be fixed at 0".into()));
        }
        if self.camera2.yaw.lo < 0.0 || self.camera2.yaw.hi > 360.0 {
            return Err(Error::Range("camera2.yaw outside [0, 360]".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        crate::canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ranges: Self = serde_json::from_str(text)?;
        ranges.validate()?;
        Ok(ranges)
    }

    fn intervals_mut(&mut self, param: RangeParam) -> Vec<&mut Interval> {
        use RangeParam::*;
        let (c1, c2) = (&mut self.camera1, &mut self.camera2);
        match param {
            ColliderX => vec![&mut self.collider_x],
            ColliderY => vec![&mut self.collider_y],
            ColliderZ => vec![&mut self.collider_z],
            Collider => vec![&mut self.collider_x, &mut self.collider_z],
            PivotX => vec![&mut self.pivot_x_frac],
            PivotZ => vec![&mut self.pivot_z_frac],
            CamHeight => vec![&mut c1.pos_y, &mut c2.pos_y],
            Cam1Height => vec![&mut c1.pos_y],
            Cam2Height => vec![&mut c2.pos_y],
            CamVfov => vec![&mut c1.vfov, &mut c2.vfov],
            CamHfov => vec![&mut c1.hfov, &mut c2.hfov],
            CamPitch => vec![&mut c1.pitch, &mut c2.pitch],
            Cam1Pitch => vec![&mut c1.pitch],
            Cam2Pitch => vec![&mut c2.pitch],
            Cam2Yaw => vec![&mut c2.yaw],
            CamPosX => vec![&mut c1.pos_x_frac, &mut c2.pos_x_frac],
            CamPosZ => vec![&mut c1.pos_z_frac, &mut c2.pos_z_frac],
            Width => vec![&mut c1.width, &mut c2.width],
            Height => vec![&mut c1.height, &mut c2.height],
        }
    }
}

/// A narrowable sampling parameter (see [`filter_ranges`]).
///
/// Fraction-valued parameters (`pivot_*`, `cam_pos_*`) take fractions of the
/// collider extent; everything else is in meters, degrees or pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeParam {
    ColliderX,
    ColliderY,
    ColliderZ,
    /// Both horizontal collider extents.
    Collider,
    PivotX,
    PivotZ,
    CamHeight,
    Cam1Height,
    Cam2Height,
    CamVfov,
    CamHfov,
    CamPitch,
    Cam1Pitch,
    Cam2Pitch,
    Cam2Yaw,
    CamPosX,
    CamPosZ,
    Width,
    Height,
}

impl RangeParam {
    pub const NAMES: &'static [(&'static str, RangeParam)] = &[
        ("collider_x", RangeParam::ColliderX),
        ("collider_y", RangeParam::ColliderY),
        ("collider_z", RangeParam::ColliderZ),
        ("collider", RangeParam::Collider),
        ("pivot_x", RangeParam::PivotX),
        ("pivot_z", RangeParam::PivotZ),
        ("cam_height", RangeParam::CamHeight),
        ("cam1_height", RangeParam::Cam1Height),
        ("cam2_height", RangeParam::Cam2Height),
        ("cam_fov", RangeParam::CamVfov),
        ("cam_vfov", RangeParam::CamVfov),
        ("cam_hfov", RangeParam::CamHfov),
        ("cam_pitch", RangeParam::CamPitch),
        ("cam1_pitch", RangeParam::Cam1Pitch),
        ("cam2_pitch", RangeParam::Cam2Pitch),
        ("cam2_yaw", RangeParam::Cam2Yaw),
        ("cam_pos_x", RangeParam::CamPosX),
        ("cam_pos_z", RangeParam::CamPosZ),
        ("width", RangeParam::Width),
        ("height", RangeParam::Height),
    ];
}

impl FromStr for RangeParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RangeParam::NAMES
            .iter()
            .find(|(n, _)| *n == s)
            .map(|(_, p)| *p)
            .ok_or_else(|| Error::Argument(format!("unknown range parameter `{s}`")))
    }
}

/// Returns `ranges` with only `param` narrowed to `interval`.
pub fn filter_ranges(
    ranges: &SamplingRanges,
    param: RangeParam,
    interval: Interval,
) -> Result<SamplingRanges> {
    interval.check("filter interval")?;
    let mut out = ranges.clone();
    let collider_y_hi = ranges.collider_y.hi;
    for iv in out.intervals_mut(param) {
        // Camera heights are additionally bounded by the tallest collider.
        let existing = match param {
            RangeParam::CamHeight | RangeParam::Cam1Height | RangeParam::Cam2Height => {
                Interval::new(iv.lo, iv.hi.min(collider_y_hi))
            }
            _ => *iv,
        };
        if !existing.contains_interval(&interval) {
            return Err(Error::Range(format!(
                "{param:?}: [{}, {}] is not inside the existing range [{}, {}]",
                interval.lo, interval.hi, existing.lo, existing.hi
            )));
        }
        *iv = interval;
    }
    out.validate()?;
    Ok(out)
}

fn sample_camera(rng: &mut SeededRng, r: &CameraRanges, collider: Collider) -> CameraConfig {
    let pos_x = rng.uniform(r.pos_x_frac.lo, r.pos_x_frac.hi) * collider.x;
    let pos_y = rng.uniform(r.pos_y.lo, r.pos_y.hi.min(collider.y));
    let pos_z = rng.uniform(r.pos_z_frac.lo, r.pos_z_frac.hi) * collider.z;
    let pitch = rng.uniform(r.pitch.lo, r.pitch.hi);
    let mut yaw = rng.uniform(r.yaw.lo, r.yaw.hi);
    if yaw >= 360.0 {
        yaw -= 360.0;
    }
    let hfov = rng.uniform(r.hfov.lo, r.hfov.hi);
    let vfov = rng.uniform(r.vfov.lo, r.vfov.hi);
    let width = rng.int_inclusive(r.width.lo as u64, r.width.hi as u64) as u32;
    let height = rng.int_inclusive(r.height.lo as u64, r.height.hi as u64) as u32;
    CameraConfig {
        pos_x,
        pos_y,
        pos_z,
        pitch,
        yaw,
        hfov,
        vfov,
        width,
        height,
    }
}

/// Draws one embodiment. The draw order is fixed, so a seed maps to the same
/// configuration everywhere.
pub fn sample_embodiment(seed: u64, ranges: &SamplingRanges) -> Result<EmbodimentConfig> {
    ranges.validate()?;
    let mut rng = SeededRng::new(seed);
    let two = rng.bernoulli(ranges.two_camera_prob);

    // The collider must be tall enough for every present camera's minimum height.
    let mut y_lo = ranges.collider_y.lo.max(ranges.camera1.pos_y.lo);
    if two {
        y_lo = y_lo.max(ranges.camera2.pos_y.lo);
    }
    let collider = Collider {
        x: rng.uniform(ranges.collider_x.lo, ranges.collider_x.hi),
        y: rng.uniform(y_lo, ranges.collider_y.hi),
        z: rng.uniform(ranges.collider_z.lo, ranges.collider_z.hi),
    };
    let pivot = Pivot {
        x: rng.uniform(ranges.pivot_x_frac.lo, ranges.pivot_x_frac.hi) * collider.x,
        z: rng.uniform(ranges.pivot_z_frac.lo, ranges.pivot_z_frac.hi) * collider.z,
    };
    let mut cameras = vec![sample_camera(&mut rng, &ranges.camera1, collider)];
    if two {
        cameras.push(sample_camera(&mut rng, &ranges.camera2, collider));
    }
    Ok(EmbodimentConfig {
        id: format!("random-{seed:016x}"),
        collider,
        pivot,
        cameras,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    StretchRe1,
    StretchFactory,
    Locobot,
    UnitreeGo1,
    Rby1Standing,
    Rby1Seated,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::StretchRe1,
        Preset::StretchFactory,
        Preset::Locobot,
        Preset::UnitreeGo1,
        Preset::Rby1Standing,
        Preset::Rby1Seated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::StretchRe1 => "stretch_re1",
            Preset::StretchFactory => "stretch_factory",
            Preset::Locobot => "locobot",
            Preset::UnitreeGo1 => "unitree_go1",
            Preset::Rby1Standing => "rby1_standing",
            Preset::Rby1Seated => "rby1_seated",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Lookup(s.to_string()))
    }
}

fn forward_camera(height: f64, pitch: f64, hfov: f64, vfov: f64, width: u32, h: u32) -> CameraConfig {
    CameraConfig {
        pos_x: 0.0,
        pos_y: height,
        pos_z: 0.0,
        pitch,
        yaw: 0.0,
        hfov,
        vfov,
        width,
        height: h,
    }
}

/// Real-robot platform parameters (body size, camera height, pitch and FoV).
pub fn preset_embodiment(name: &str) -> Result<EmbodimentConfig> {
    let preset: Preset = name.parse()?;
    let (collider, cameras) = match preset {
        // Two forward-facing D455s.
        Preset::StretchRe1 => {
            let cam = forward_camera(1.40, 27.0, 90.0, 59.0, 396, 224);
            ((0.33, 1.41, 0.34), vec![cam, cam])
        }
        // Portrait-mounted D435.
        Preset::StretchFactory => (
            (0.33, 1.41, 0.34),
            vec![forward_camera(1.30, 30.0, 42.0, 69.0, 224, 396)],
        ),
        Preset::Locobot => (
            (0.35, 0.89, 0.35),
            vec![forward_camera(0.87, 0.0, 68.0, 42.0, 396, 224)],
        ),
        // 64.5 cm long, 28 cm wide, 40 cm tall; length runs along the forward axis.
        Preset::UnitreeGo1 => (
            (0.28, 0.40, 0.645),
            vec![forward_camera(0.28, 0.0, 68.0, 42.0, 396, 224)],
        ),
        Preset::Rby1Standing => (
            (0.60, 1.40, 0.69),
            vec![forward_camera(1.40, 0.0, 53.0, 73.0, 224, 396)],
        ),
        Preset::Rby1Seated => (
            (0.60, 0.92, 0.69),
            vec![forward_camera(0.92, 0.0, 53.0, 73.0, 224, 396)],
        ),
    };
    Ok(EmbodimentConfig {
        id: preset.name().to_string(),
        collider: Collider {
            x: collider.0,
            y: collider.1,
            z: collider.2,
        },
        pivot: Pivot { x: 0.0, z: 0.0 },
        cameras,
    })
}

/// Fixed-layout numeric description of an embodiment.
///
/// Layout: `[αx, αy, αz, ox, oz]`, then two camera slots of
/// `[present, pos_x, pos_y, pos_z, pitch, yaw, hfov, vfov, width/height]`
/// (an absent camera is all zeros), then the camera count.
pub fn config_vector(e: &EmbodimentConfig) -> [f64; CONFIG_VECTOR_LEN] {
    let mut v = [0.0; CONFIG_VECTOR_LEN];
    v[0] = e.collider.x;
    v[1] = e.collider.y;
    v[2] = e.collider.z;
    v[3] = e.pivot.x;
    v[4] = e.pivot.z;
    for (slot, cam) in e.cameras.iter().take(2).enumerate() {
        let b = 5 + slot * CAMERA_SLOT_LEN;
        v[b..b + CAMERA_SLOT_LEN].copy_from_slice(&[
            1.0,
            cam.pos_x,
            cam.pos_y,
            cam.pos_z,
            cam.pitch,
            cam.yaw,
            cam.hfov,
            cam.vfov,
            cam.width as f64 / cam.height as f64,
        ]);
    }
    v[CONFIG_VECTOR_LEN - 1] = e.cameras.len() as f64;
    v
}

/// Per-dimension scale used by [`embodiment_distance`]: the width of the
/// default sampling range for that entry (1 where the range is a point).
pub fn distance_scales() -> [f64; CONFIG_VECTOR_LEN] {
    let r = SamplingRanges::default();
    let mut s = [1.0; CONFIG_VECTOR_LEN];
    s[0] = r.collider_x.width();
    s[1] = r.collider_y.width();
    s[2] = r.collider_z.width();
    s[3] = r.pivot_x_frac.width() * r.collider_x.hi;
    s[4] = r.pivot_z_frac.width() * r.collider_z.hi;
    for (slot, cam) in [r.camera1, r.camera2].iter().enumerate() {
        let b = 5 + slot * CAMERA_SLOT_LEN;
        let aspect = Interval::new(cam.width.lo / cam.height.hi, cam.width.hi / cam.height.lo);
        let widths = [
            1.0,
            cam.pos_x_frac.width() * r.collider_x.hi,
            r.collider_y.hi.min(cam.pos_y.hi) - cam.pos_y.lo,
            cam.pos_z_frac.width() * r.collider_z.hi,
            cam.pitch.width(),
            cam.yaw.width(),
            cam.hfov.width(),
            cam.vfov.width(),
            aspect.width(),
        ];
        for (k, w) in widths.into_iter().enumerate() {
            s[b + k] = if w > 0.0 { w } else { 1.0 };
        }
    }
    s
}

/// Euclidean distance between range-normalized configuration vectors.
pub fn embodiment_distance(a: &EmbodimentConfig, b: &EmbodimentConfig) -> f64 {
    normalized_distance(&config_vector(a), &config_vector(b), &distance_scales())
}

pub fn normalized_distance(
    a: &[f64; CONFIG_VECTOR_LEN],
    b: &[f64; CONFIG_VECTOR_LEN],
    scales: &[f64; CONFIG_VECTOR_LEN],
) -> f64 {
    a.iter()
        .zip(b)
        .zip(scales)
        .map(|((x, y), s)| {
            let d = (x - y) / s;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sample_respects_table_ranges() {
        let r = SamplingRanges::default();
        for seed in 0..200 {
            let e = sample_embodiment(seed, &r).unwrap();
            assert!((0.3..=1.5).contains(&e.collider.y));
            let c = e.cameras[0];
            assert!((40.0..=100.0).contains(&c.vfov));
            assert!((-20.0..=40.0).contains(&c.pitch));
            assert!(validate(&e).is_empty(), "{:?}", validate(&e));
        }
    }

    #[test]
    fn same_seed_same_config() {
        let r = SamplingRanges::default();
        let a = sample_embodiment(42, &r).unwrap();
        let b = sample_embodiment(42, &r).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn point_ranges_give_point_config() {
        let p = |v| Interval::new(v, v);
        let cam = CameraRanges {
            pos_x_frac: p(0.25),
            pos_y: p(0.5),
            pos_z_frac: p(-0.25),
            pitch: p(10.0),
            yaw: p(0.0),
            hfov: p(90.0),
            vfov: p(60.0),
            width: p(200.0),
            height: p(100.0),
        };
        let r = SamplingRanges {
            collider_x: p(0.4),
            collider_y: p(1.0),
            collider_z: p(0.3),
            pivot_x_frac: p(0.1),
            pivot_z_frac: p(0.0),
            camera1: cam,
            camera2: CameraRanges { yaw: p(90.0), ..cam },
            two_camera_prob: 1.0,
        };
        let e = sample_embodiment(9, &r).unwrap();
        assert_eq!(e.collider, Collider { x: 0.4, y: 1.0, z: 0.3 });
        assert_eq!(e.pivot.x, 0.1 * 0.4);
        assert_eq!(e.cameras.len(), 2);
        let c = e.cameras[0];
        assert_eq!((c.pos_x, c.pos_y, c.pos_z), (0.25 * 0.4, 0.5, -0.25 * 0.3));
        assert_eq!((c.pitch, c.hfov, c.vfov, c.width, c.height), (10.0, 90.0, 60.0, 200, 100));
        assert_eq!(e.cameras[1].yaw, 90.0);
    }

    #[test]
    fn invalid_ranges_rejected() {
        let mut r = SamplingRanges::default();
        r.collider_x = Interval::new(0.5, 0.2);
        assert!(matches!(sample_embodiment(1, &r), Err(Error::Range(_))));
        let mut r = SamplingRanges::default();
        r.camera1.yaw = Interval::new(0.0, 10.0);
        assert!(matches!(sample_embodiment(1, &r), Err(Error::Range(_))));
    }

    #[test]
    fn presets_match_platform_table() {
        let l = preset_embodiment("locobot").unwrap();
        assert_eq!((l.collider.x, l.collider.y, l.collider.z), (0.35, 0.89, 0.35));
        assert_eq!(l.cameras[0].pos_y, 0.87);
        assert_eq!(l.cameras[0].vfov, 42.0);
        assert_eq!(l.cameras[0].pitch, 0.0);

        let s = preset_embodiment("stretch_re1").unwrap();
        assert_eq!((s.collider.x, s.collider.y, s.collider.z), (0.33, 1.41, 0.34));
        assert_eq!(s.cameras[0].pos_y, 1.40);
        assert_eq!(s.cameras[0].pitch, 27.0);
        assert_eq!(s.cameras.len(), 2);

        let u = preset_embodiment("unitree_go1").unwrap();
        assert_eq!(u.cameras[0].pos_y, 0.28);
        assert_eq!(u.cameras[0].vfov, 42.0);

        for p in Preset::ALL {
            let e = preset_embodiment(p.name()).unwrap();
            assert!(validate(&e).is_empty(), "{}: {:?}", p.name(), validate(&e));
        }
        assert!(matches!(preset_embodiment("roomba"), Err(Error::Lookup(_))));
    }

    #[test]
    fn config_vector_layout() {
        let l = preset_embodiment("locobot").unwrap();
        let v = config_vector(&l);
        assert_eq!(v.len(), 24);
        assert_eq!(v[0], 0.35);
        assert_eq!(v[1], 0.89);
        assert_eq!(v[5], 1.0);
        assert!(v[14..23].iter().all(|&x| x == 0.0));
        assert_eq!(v[23], 1.0);
    }

    #[test]
    fn distance_basics() {
        let a = preset_embodiment("locobot").unwrap();
        let b = preset_embodiment("stretch_re1").unwrap();
        assert_eq!(embodiment_distance(&a, &a), 0.0);
        assert_eq!(embodiment_distance(&a, &b), embodiment_distance(&b, &a));
        assert!(embodiment_distance(&a, &b) > 0.0);
    }

    #[test]
    fn validate_reports_violations() {
        let mut e = preset_embodiment("locobot").unwrap();
        e.cameras[0].pos_y = e.collider.y + 0.1;
        let v = validate(&e);
        assert_eq!(v, vec![Violation::CameraAboveCollider { camera: 0 }]);
        assert!(v[0].to_string().contains("camera above collider"));

        let mut e = preset_embodiment("locobot").unwrap();
        e.pivot.x = e.collider.x;
        let v = validate(&e);
        assert_eq!(v, vec![Violation::PivotOutsideFootprint]);
        assert_eq!(v[0].to_string(), "pivot outside footprint");

        let mut e = preset_embodiment("locobot").unwrap();
        e.cameras[0].yaw = 10.0;
        assert_eq!(validate(&e), vec![Violation::FirstCameraYaw(10.0)]);
    }

    #[test]
    fn filter_narrows_only_the_parameter() {
        let r = SamplingRanges::default();
        let f = filter_ranges(&r, RangeParam::CamHeight, Interval::new(0.4, 0.8)).unwrap();
        assert_eq!(f.camera1.pos_y, Interval::new(0.4, 0.8));
        assert_eq!(f.collider_x, r.collider_x);
        for seed in 0..300 {
            let e = sample_embodiment(seed, &f).unwrap();
            for c in &e.cameras {
                assert!((0.4..=0.8).contains(&c.pos_y));
            }
        }
        let same = filter_ranges(&r, RangeParam::CamVfov, r.camera1.vfov).unwrap();
        assert_eq!(same, r);
        assert!(filter_ranges(&r, RangeParam::CamVfov, Interval::new(30.0, 60.0)).is_err());
    }

    #[test]
    fn json_is_key_sorted_and_round_trips() {
        let e = sample_embodiment(5, &SamplingRanges::default()).unwrap();
        let text = e.to_json().unwrap();
        let back = EmbodimentConfig::from_json(&text).unwrap();
        assert_eq!(back, e);
        let c = text.find("\"cameras\"").unwrap();
        let i = text.find("\"id\"").unwrap();
        assert!(c < i);
        let r = SamplingRanges::default();
        assert_eq!(SamplingRanges::from_json(&r.to_json().unwrap()).unwrap(), r);
    }
}
