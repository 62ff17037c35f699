//! Ground-truth trajectories: a stationary ego vehicle observing a target
//! driving a figure-eight, plus CSV ingest/export of recorded trajectories.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Planar pose: position in meters, heading counterclockwise from +x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw: wrap_angle(yaw),
        }
    }

    pub fn origin() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

/// Target vehicle footprint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleShape {
    pub length: f64,
    pub width: f64,
}

impl VehicleShape {
    pub fn new(length: f64, width: f64) -> Result<Self> {
        if length <= 0.0 || width <= 0.0 {
            return Err(Error::validation(format!(
                "vehicle shape must be positive, got length {length}, width {width}"
            )));
        }
        Ok(Self { length, width })
    }

    /// Typical passenger car.
    pub fn default_car() -> Self {
        Self {
            length: 4.5,
            width: 1.8,
        }
    }

    pub fn half_diagonal(&self) -> f64 {
        0.5 * (self.length * self.length + self.width * self.width).sqrt()
    }
}

/// One simulation step: timestamp plus ego and target poses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub ego: Pose2D,
    pub target: Pose2D,
}

/// A whole run: uniformly spaced frames and the target footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub frames: Vec<Frame>,
    pub target_shape: VehicleShape,
    pub dt: f64,
}

const DT_TOLERANCE: f64 = 1e-9;

impl Scenario {
    pub fn new(frames: Vec<Frame>, target_shape: VehicleShape) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::validation(format!(
                "scenario needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        let dt = frames[1].t - frames[0].t;
        for (i, pair) in frames.windows(2).enumerate() {
            let step = pair[1].t - pair[0].t;
            if step <= 0.0 {
                return Err(Error::validation(format!(
                    "frame times must be strictly increasing, violated at frame {}",
                    i + 1
                )));
            }
            if (step - dt).abs() > DT_TOLERANCE {
                return Err(Error::validation(format!(
                    "frame spacing must be constant ({dt} s), frame {} has {step} s",
                    i + 1
                )));
            }
        }
        if frames[0].t < 0.0 {
            return Err(Error::validation("frame times must be non-negative"));
        }
        Ok(Self {
            frames,
            target_shape,
            dt,
        })
    }
}

/// Gerono lemniscate point and tangent for curve parameter `u` and
/// half-length `a`: x = a sin u, y = a sin u cos u.
fn lemniscate(a: f64, u: f64) -> ((f64, f64), (f64, f64)) {
    let p = (a * u.sin(), a * u.sin() * u.cos());
    // dx/du = a cos u, dy/du = a cos 2u
    let d = (a * u.cos(), a * (2.0 * u).cos());
    (p, d)
}

/// Generate a figure-eight target trajectory with a stationary ego at the
/// origin. The target traces a Gerono lemniscate of half-length
/// `half_length`, rigidly transformed by `offset`, with the curve parameter
/// advanced so the target moves at approximately `speed` (piecewise-constant
/// arc-length stepping). One full period is covered.
pub fn generate_figure_eight(
    half_length: f64,
    offset: Pose2D,
    speed: f64,
    dt: f64,
    target_shape: VehicleShape,
) -> Result<Scenario> {
    if half_length <= 0.0 {
        return Err(Error::validation("half_length must be positive"));
    }
    if speed <= 0.0 {
        return Err(Error::validation("speed must be positive"));
    }
    if dt <= 0.0 {
        return Err(Error::validation("dt must be positive"));
    }

    let (cos_o, sin_o) = (offset.yaw.cos(), offset.yaw.sin());
    let mut frames = Vec::new();
    let mut u = 0.0_f64;
    let mut k = 0_usize;
    loop {
        let ((px, py), (dx, dy)) = lemniscate(half_length, u);
        let x = offset.x + cos_o * px - sin_o * py;
        let y = offset.y + sin_o * px + cos_o * py;
        let yaw = wrap_angle(dy.atan2(dx) + offset.yaw);
        frames.push(Frame {
            t: k as f64 * dt,
            ego: Pose2D::origin(),
            target: Pose2D { x, y, yaw },
        });
        if u >= 2.0 * PI {
            break;
        }
        let tangent_norm = (dx * dx + dy * dy).sqrt();
        u += speed * dt / tangent_norm;
        k += 1;
    }
    Scenario::new(frames, target_shape)
}

const TRAJECTORY_HEADER: [&str; 7] = [
    "t", "ego_x", "ego_y", "ego_yaw", "target_x", "target_y", "target_yaw",
];

/// Load a trajectory CSV (`t,ego_x,ego_y,ego_yaw,target_x,target_y,target_yaw`).
pub fn load_trajectory(path: impl AsRef<Path>, target_shape: VehicleShape) -> Result<Scenario> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != TRAJECTORY_HEADER {
            return Err(Error::parse(
                format!("{}:header", path.display()),
                format!("expected columns {TRAJECTORY_HEADER:?}, got {got:?}"),
            ));
        }
    }

    let mut frames = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1; // 1-based data row
        let record =
            record.map_err(|e| Error::parse(format!("{}:row {row}", path.display()), e.to_string()))?;
        let field = |idx: usize| -> Result<f64> {
            record
                .get(idx)
                .ok_or_else(|| {
                    Error::parse(
                        format!("{}:row {row}", path.display()),
                        format!("missing column {}", TRAJECTORY_HEADER[idx]),
                    )
                })?
                .trim()
                .parse::<f64>()
                .map_err(|e| {
                    Error::parse(
                        format!("{}:row {row}", path.display()),
                        format!("column {}: {e}", TRAJECTORY_HEADER[idx]),
                    )
                })
        };
        let t = field(0)?;
        if let Some(prev) = frames.last() {
            let prev: &Frame = prev;
            if t <= prev.t {
                return Err(Error::parse(
                    format!("{}:row {row}", path.display()),
                    format!("t must be strictly increasing, got {t} after {}", prev.t),
                ));
            }
        }
        frames.push(Frame {
            t,
            ego: Pose2D::new(field(1)?, field(2)?, field(3)?),
            target: Pose2D::new(field(4)?, field(5)?, field(6)?),
        });
    }
    if frames.len() < 2 {
        return Err(Error::parse(
            path.display().to_string(),
            format!("need at least 2 data rows, got {}", frames.len()),
        ));
    }
    Scenario::new(frames, target_shape)
}

/// Write a scenario in the trajectory CSV format.
pub fn save_trajectory(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(TRAJECTORY_HEADER)?;
    for f in &scenario.frames {
        writer.write_record([
            format!("{:.12}", f.t),
            format!("{:.12}", f.ego.x),
            format!("{:.12}", f.ego.y),
            format!("{:.12}", f.ego.yaw),
            format!("{:.12}", f.target.x),
            format!("{:.12}", f.target.y),
            format!("{:.12}", f.target.yaw),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
