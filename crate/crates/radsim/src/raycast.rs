//! Geometric scene interrogation: a fan of azimuth rays from the sensor is
//! intersected with the target vehicle's oriented footprint rectangle.

use crate::scenario::{wrap_angle, Pose2D, VehicleShape};
use crate::{Error, Result};

/// A ray in world coordinates. `azimuth` is in the sensor frame,
/// 0 = boresight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: (f64, f64),
    pub azimuth: f64,
    /// World-frame direction angle (sensor yaw + azimuth).
    pub direction: f64,
}

/// First intersection of a ray with the target footprint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub point: (f64, f64),
    pub range: f64,
    /// Sensor-frame azimuth of the ray that produced the hit.
    pub azimuth: f64,
    /// Angle of the sensor as seen from the target's forward axis;
    /// 0 = front view, pi = rear view.
    pub aspect_angle: f64,
}

/// Aspect angle of the sensor as seen from the target: the wrapped angle
/// between the target's heading axis and the direction from target to
/// sensor.
pub fn aspect_angle(target: Pose2D, sensor_position: (f64, f64)) -> Result<f64> {
    let dx = sensor_position.0 - target.x;
    let dy = sensor_position.1 - target.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::validation(
            "aspect angle undefined for coincident sensor and target positions",
        ));
    }
    Ok(wrap_angle(dy.atan2(dx) - target.yaw))
}

/// Nearest intersection of `ray` with the oriented rectangle boundary, or
/// `None` if the ray misses or the rectangle lies behind the origin.
pub fn ray_rect_intersect(ray: &Ray, rect_pose: Pose2D, shape: VehicleShape) -> Option<RayHit> {
    // Transform the ray into the rectangle's frame, then slab-test the
    // axis-aligned box [-l/2, l/2] x [-w/2, w/2].
    let (cos_r, sin_r) = (rect_pose.yaw.cos(), rect_pose.yaw.sin());
    let ox = ray.origin.0 - rect_pose.x;
    let oy = ray.origin.1 - rect_pose.y;
    let local_origin = (cos_r * ox + sin_r * oy, -sin_r * ox + cos_r * oy);
    let (dx, dy) = (ray.direction.cos(), ray.direction.sin());
    let local_dir = (cos_r * dx + sin_r * dy, -sin_r * dx + cos_r * dy);

    let half = (shape.length / 2.0, shape.width / 2.0);
    let mut t_min = f64::NEG_INFINITY;
    let mut t_max = f64::INFINITY;
    for axis in 0..2 {
        let (o, d, h) = match axis {
            0 => (local_origin.0, local_dir.0, half.0),
            _ => (local_origin.1, local_dir.1, half.1),
        };
        if d.abs() < 1e-15 {
            if o.abs() > h {
                return None;
            }
            continue;
        }
        let (t0, t1) = ((-h - o) / d, (h - o) / d);
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        t_min = t_min.max(lo);
        t_max = t_max.min(hi);
        if t_min > t_max {
            return None;
        }
    }
    // first boundary crossing with positive ray parameter
    let t = if t_min > 0.0 {
        t_min
    } else if t_max > 0.0 {
        t_max
    } else {
        return None;
    };

    let point = (ray.origin.0 + t * dx, ray.origin.1 + t * dy);
    let aspect = aspect_angle(rect_pose, ray.origin).ok()?;
    Some(RayHit {
        point,
        range: t,
        azimuth: ray.azimuth,
        aspect_angle: aspect,
    })
}

/// Cast `n_rays` rays uniformly over `fov` centered on the sensor
/// boresight and collect the hits on the target footprint, in azimuth
/// order. One hit per ray, first surface only.
pub fn cast_fan(
    sensor: Pose2D,
    fov: f64,
    n_rays: usize,
    target: Pose2D,
    shape: VehicleShape,
) -> Result<Vec<RayHit>> {
    if !(fov > 0.0 && fov < 2.0 * std::f64::consts::PI) {
        return Err(Error::validation(format!("fov must be in (0, 2pi), got {fov}")));
    }
    if n_rays < 2 {
        return Err(Error::validation(format!("need at least 2 rays, got {n_rays}")));
    }
    let step = fov / (n_rays - 1) as f64;
    let mut hits = Vec::new();
    for i in 0..n_rays {
        let azimuth = -fov / 2.0 + i as f64 * step;
        let ray = Ray {
            origin: sensor.position(),
            azimuth,
            direction: sensor.yaw + azimuth,
        };
        if let Some(hit) = ray_rect_intersect(&ray, target, shape) {
            hits.push(hit);
        }
    }
    Ok(hits)
}
