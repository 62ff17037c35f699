//! Radar detection generation: radar range equation, noise power, sinc
//! antenna diagram, aspect-dependent RCS and logistic SNR-to-detection-
//! probability conversion, with counter-based randomness per (seed, frame,
//! ray).

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::raycast::cast_fan;
use crate::rng::CounterRng;
use crate::scenario::{Frame, VehicleShape};
use crate::{Error, Result};

pub const BOLTZMANN: f64 = 1.380_649e-23;
const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Center of the 76-77 GHz automotive band.
const DEFAULT_CARRIER_HZ: f64 = 76.5e9;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// The six varied radar sub-model parameters (all in dB domains).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarParams {
    /// Std. dev. of the additive white Gaussian SNR perturbation, dB.
    pub awg_noise_sd: f64,
    /// Shift of the SNR-to-detection-probability operating point, dB.
    pub dp_offset: f64,
    /// Peak antenna gain, dB.
    pub g_max: f64,
    /// Receiver noise figure, dB.
    pub noise_figure: f64,
    /// Overall system loss, dB.
    pub sys_loss: f64,
    /// Mean radar cross-section over aspect, dBsm.
    pub rcs_mean: f64,
}

impl RadarParams {
    /// Sampling bounds for each parameter: (name, min, max).
    pub const BOUNDS: [(&'static str, f64, f64); 6] = [
        ("awg_noise_sd", 0.0, 8.0),
        ("dp_offset", -5.0, 5.0),
        ("g_max", 10.0, 25.0),
        ("noise_figure", 10.0, 20.0),
        ("sys_loss", 0.0, 20.0),
        ("rcs_mean", -10.0, 10.0),
    ];

    pub fn field_names() -> [&'static str; 6] {
        [
            "awg_noise_sd",
            "dp_offset",
            "g_max",
            "noise_figure",
            "sys_loss",
            "rcs_mean",
        ]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "awg_noise_sd" => Some(self.awg_noise_sd),
            "dp_offset" => Some(self.dp_offset),
            "g_max" => Some(self.g_max),
            "noise_figure" => Some(self.noise_figure),
            "sys_loss" => Some(self.sys_loss),
            "rcs_mean" => Some(self.rcs_mean),
            _ => None,
        }
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "awg_noise_sd" => self.awg_noise_sd = value,
            "dp_offset" => self.dp_offset = value,
            "g_max" => self.g_max = value,
            "noise_figure" => self.noise_figure = value,
            "sys_loss" => self.sys_loss = value,
            "rcs_mean" => self.rcs_mean = value,
            other => {
                return Err(Error::validation(format!("unknown radar parameter '{other}'")))
            }
        }
        Ok(())
    }

    /// Midpoint of every bound; a reasonable nominal sensor.
    pub fn nominal() -> Self {
        Self {
            awg_noise_sd: 4.0,
            dp_offset: 0.0,
            g_max: 20.0,
            noise_figure: 15.0,
            sys_loss: 10.0,
            rcs_mean: 0.0,
        }
    }

    pub fn within_bounds(&self) -> bool {
        Self::BOUNDS
            .iter()
            .all(|&(name, lo, hi)| {
                let v = self.get(name).unwrap();
                v >= lo && v <= hi
            })
    }
}

/// Aspect-angle RCS profile: piecewise-linear in dB over a sample table
/// covering (-pi, pi]. Lookups are shifted so the circular mean of the
/// profile equals the requested mean RCS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcsTable {
    /// Aspect angles, radians, strictly increasing from -pi to pi.
    pub angles: Vec<f64>,
    /// Profile values at those angles, dBsm (relative shape only).
    pub values_dbsm: Vec<f64>,
}

impl Default for RcsTable {
    fn default() -> Self {
        Self::default_car()
    }
}

impl RcsTable {
    /// 37-point passenger-car-like profile: strong side lobes at +-90 deg,
    /// weaker front/rear lobes, troughs at the oblique aspects.
    pub fn default_car() -> Self {
        // relative dB values for aspect 0..180 deg in 10 deg steps
        let half: [f64; 19] = [
            5.0, 3.0, 0.0, -2.0, -4.0, -4.0, -2.0, 2.0, 7.0, 10.0, 7.0, 2.0, -2.0, -4.0, -4.0,
            -2.0, 0.0, 3.0, 5.0,
        ];
        let mut angles = Vec::with_capacity(37);
        let mut values = Vec::with_capacity(37);
        for i in 0..=36 {
            let deg = -180.0 + 10.0 * i as f64;
            angles.push(deg.to_radians());
            values.push(half[(deg.abs() / 10.0).round() as usize]);
        }
        Self {
            angles,
            values_dbsm: values,
        }
    }

    pub fn constant(value_dbsm: f64) -> Self {
        Self {
            angles: vec![-PI, PI],
            values_dbsm: vec![value_dbsm, value_dbsm],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.angles.len() != self.values_dbsm.len() || self.angles.len() < 2 {
            return Err(Error::Config(format!(
                "RCS table needs matching angle/value lists of length >= 2, got {}/{}",
                self.angles.len(),
                self.values_dbsm.len()
            )));
        }
        if !self.angles.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("RCS table angles must be strictly increasing".into()));
        }
        if (self.angles[0] + PI).abs() > 1e-9 || (self.angles[self.angles.len() - 1] - PI).abs() > 1e-9
        {
            return Err(Error::Config(
                "RCS table must span the full aspect circle from -pi to pi".into(),
            ));
        }
        Ok(())
    }

    /// Raw profile value at `aspect` (wrapped), linear interpolation in dB.
    fn raw(&self, aspect: f64) -> f64 {
        let a = crate::scenario::wrap_angle(aspect);
        let idx = match self
            .angles
            .binary_search_by(|probe| probe.partial_cmp(&a).unwrap())
        {
            Ok(i) => return self.values_dbsm[i],
            Err(i) => i,
        };
        // wrap_angle yields (-pi, pi], so idx in 1..len
        let (a0, a1) = (self.angles[idx - 1], self.angles[idx]);
        let (v0, v1) = (self.values_dbsm[idx - 1], self.values_dbsm[idx]);
        v0 + (v1 - v0) * (a - a0) / (a1 - a0)
    }

    /// Circular mean of the profile over the full aspect circle
    /// (trapezoidal integration in dB).
    fn circular_mean(&self) -> f64 {
        let mut acc = 0.0;
        for i in 1..self.angles.len() {
            let da = self.angles[i] - self.angles[i - 1];
            acc += 0.5 * (self.values_dbsm[i] + self.values_dbsm[i - 1]) * da;
        }
        acc / (self.angles[self.angles.len() - 1] - self.angles[0])
    }
}

/// Fixed physical constants and sensor geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadarConstants {
    /// Transmit power, W.
    pub tx_power: f64,
    /// Carrier wavelength, m.
    pub wavelength: f64,
    /// Noise bandwidth, Hz.
    pub noise_bandwidth: f64,
    /// Standard temperature, K.
    pub std_temperature: f64,
    /// Boltzmann constant, J/K.
    pub boltzmann: f64,
    /// SNR at 50% detection probability, dB.
    pub snr50: f64,
    /// Logistic steepness of the detection-probability curve, 1/dB.
    pub roc_slope: f64,
    /// First-sidelobe level of the sinc antenna diagram, dB (informative).
    pub sidelobe_suppression: f64,
    /// Angle of the first antenna null, radians.
    pub theta_null: f64,
    /// Sensor field of view, radians.
    pub fov: f64,
    /// Rays across the field of view.
    pub n_rays: usize,
    /// Aspect-angle RCS profile.
    pub rcs_table: RcsTable,
}

impl Default for RadarConstants {
    fn default() -> Self {
        Self {
            tx_power: 1.0,
            wavelength: SPEED_OF_LIGHT / DEFAULT_CARRIER_HZ,
            noise_bandwidth: 1.0e6,
            std_temperature: 290.0,
            boltzmann: BOLTZMANN,
            snr50: 13.0,
            roc_slope: 0.5,
            sidelobe_suppression: -13.0,
            theta_null: 10.0_f64.to_radians(),
            fov: 120.0_f64.to_radians(),
            n_rays: 241,
            rcs_table: RcsTable::default_car(),
        }
    }
}

impl RadarConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tx_power", self.tx_power),
            ("wavelength", self.wavelength),
            ("noise_bandwidth", self.noise_bandwidth),
            ("std_temperature", self.std_temperature),
            ("boltzmann", self.boltzmann),
            ("roc_slope", self.roc_slope),
            ("theta_null", self.theta_null),
            ("fov", self.fov),
        ] {
            if !(v > 0.0) {
                return Err(Error::validation(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_rays < 2 {
            return Err(Error::validation("n_rays must be at least 2"));
        }
        self.rcs_table.validate()
    }
}

/// One radar return, sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub range: f64,
    pub azimuth: f64,
    pub snr_db: f64,
    pub power_rx: f64,
    pub x: f64,
    pub y: f64,
}

/// Detections of one frame, sorted by azimuth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSet {
    pub frame_t: f64,
    pub detections: Vec<Detection>,
}

/// Radar range equation: P_r = P_t G^2 lambda^2 sigma / ((4 pi)^3 R^4 L).
/// All arguments in linear units.
pub fn received_power(
    p_t: f64,
    gain_linear: f64,
    wavelength: f64,
    rcs_m2: f64,
    range: f64,
    loss_linear: f64,
) -> Result<f64> {
    if range == 0.0 {
        return Err(Error::Singularity("received power diverges at range 0".into()));
    }
    for (name, v) in [
        ("p_t", p_t),
        ("gain", gain_linear),
        ("wavelength", wavelength),
        ("rcs", rcs_m2),
        ("range", range),
        ("loss", loss_linear),
    ] {
        if !(v > 0.0) {
            return Err(Error::validation(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(p_t * gain_linear * gain_linear * wavelength * wavelength * rcs_m2
        / ((4.0 * PI).powi(3) * range.powi(4) * loss_linear))
}

/// Thermal noise power: P_n = k_B F_n B_n T_0 (linear noise figure).
pub fn noise_power(noise_figure_linear: f64, bandwidth: f64, temperature: f64) -> Result<f64> {
    for (name, v) in [
        ("noise_figure", noise_figure_linear),
        ("bandwidth", bandwidth),
        ("temperature", temperature),
    ] {
        if !(v > 0.0) {
            return Err(Error::validation(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(BOLTZMANN * noise_figure_linear * bandwidth * temperature)
}

/// SNR = P_r / P_n.
pub fn snr(p_r: f64, p_n: f64) -> Result<f64> {
    if p_n == 0.0 {
        return Err(Error::Singularity("SNR diverges at zero noise power".into()));
    }
    if p_n < 0.0 {
        return Err(Error::validation("noise power must be positive"));
    }
    Ok(p_r / p_n)
}

/// Full-chain SNR in one expression (linear units):
/// SNR = P_t G^2 lambda^2 sigma / (k_B F_n B_n T_0 (4 pi)^3 R^4 L).
#[allow(clippy::too_many_arguments)]
pub fn snr_full(
    p_t: f64,
    gain_linear: f64,
    wavelength: f64,
    rcs_m2: f64,
    noise_figure_linear: f64,
    bandwidth: f64,
    temperature: f64,
    range: f64,
    loss_linear: f64,
) -> Result<f64> {
    if range == 0.0 {
        return Err(Error::Singularity("SNR diverges at range 0".into()));
    }
    Ok(
        p_t * gain_linear * gain_linear * wavelength * wavelength * rcs_m2
            / (BOLTZMANN
                * noise_figure_linear
                * bandwidth
                * temperature
                * (4.0 * PI).powi(3)
                * range.powi(4)
                * loss_linear),
    )
}

/// Gain floor below the peak; sinc nulls would otherwise be -inf dB.
const GAIN_FLOOR_DB: f64 = 60.0;

/// Sinc antenna diagram: G(theta) = g_max + 20 log10|sinc(theta/theta_null)|,
/// clamped to g_max - 60 dB at the nulls.
pub fn antenna_gain_db(azimuth: f64, g_max: f64, theta_null: f64) -> Result<f64> {
    if !(theta_null > 0.0) {
        return Err(Error::validation(format!(
            "theta_null must be positive, got {theta_null}"
        )));
    }
    let u = azimuth / theta_null;
    let sinc = if u == 0.0 {
        1.0
    } else {
        (PI * u).sin() / (PI * u)
    };
    let floor = g_max - GAIN_FLOOR_DB;
    if sinc == 0.0 {
        return Ok(floor);
    }
    Ok((g_max + 20.0 * sinc.abs().log10()).max(floor))
}

/// Aspect-dependent RCS in dBsm: table profile shifted so its circular
/// mean equals `rcs_mean`.
pub fn rcs_dbsm(aspect: f64, rcs_mean: f64, table: &RcsTable) -> Result<f64> {
    table.validate()?;
    Ok(table.raw(aspect) - table.circular_mean() + rcs_mean)
}

/// Logistic SNR-to-detection-probability conversion; `dp_offset` shifts
/// the operating point.
pub fn detection_probability(snr_db: f64, dp_offset: f64, snr50: f64, slope: f64) -> Result<f64> {
    if !(slope > 0.0) {
        return Err(Error::validation(format!("slope must be positive, got {slope}")));
    }
    Ok(1.0 / (1.0 + (-slope * (snr_db - (snr50 + dp_offset))).exp()))
}

/// Analytic detection probability for one ray hit, before any random
/// draws: antenna gain at the hit azimuth, RCS at the hit aspect, full
/// radar-equation SNR, logistic conversion.
pub fn hit_detection_probability(
    hit: &crate::raycast::RayHit,
    params: &RadarParams,
    constants: &RadarConstants,
) -> Result<(f64, f64, f64)> {
    let gain_db = antenna_gain_db(hit.azimuth, params.g_max, constants.theta_null)?;
    let rcs_db = rcs_dbsm(hit.aspect_angle, params.rcs_mean, &constants.rcs_table)?;
    let p_r = received_power(
        constants.tx_power,
        db_to_linear(gain_db),
        constants.wavelength,
        db_to_linear(rcs_db),
        hit.range,
        db_to_linear(params.sys_loss),
    )?;
    let p_n = noise_power(
        db_to_linear(params.noise_figure),
        constants.noise_bandwidth,
        constants.std_temperature,
    )?;
    let snr_db = linear_to_db(snr(p_r, p_n)?);
    let pd = detection_probability(snr_db, params.dp_offset, constants.snr50, constants.roc_slope)?;
    Ok((pd, snr_db, p_r))
}

/// Generate the stochastic detection set for one frame. All randomness is
/// counter-based and keyed by (seed, frame_index, ray_index), so results
/// are bitwise reproducible and independent of evaluation order.
pub fn generate_detections(
    frame: &Frame,
    frame_index: u64,
    params: &RadarParams,
    constants: &RadarConstants,
    shape: VehicleShape,
    seed: u64,
) -> Result<DetectionSet> {
    let hits = cast_fan(frame.ego, constants.fov, constants.n_rays, frame.target, shape)?;
    let step = constants.fov / (constants.n_rays - 1) as f64;
    let mut detections = Vec::new();
    for hit in &hits {
        let ray_index = ((hit.azimuth + constants.fov / 2.0) / step).round() as u64;
        let (_, clean_snr_db, p_r) = hit_detection_probability(hit, params, constants)?;
        let mut rng = CounterRng::new(&[seed, frame_index, ray_index]);
        let snr_db = clean_snr_db + params.awg_noise_sd * rng.gaussian();
        let pd = detection_probability(snr_db, params.dp_offset, constants.snr50, constants.roc_slope)?;
        if rng.bernoulli(pd) {
            detections.push(Detection {
                range: hit.range,
                azimuth: hit.azimuth,
                snr_db,
                power_rx: p_r,
                x: hit.range * hit.azimuth.cos(),
                y: hit.range * hit.azimuth.sin(),
            });
        }
    }
    Ok(DetectionSet {
        frame_t: frame.t,
        detections,
    })
}

const DETECTION_HEADER: [&str; 6] = ["frame_t", "range", "azimuth", "snr_db", "x", "y"];

/// Export detection sets to CSV (`frame_t,range,azimuth,snr_db,x,y`).
pub fn save_detections(sets: &[DetectionSet], path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(DETECTION_HEADER)?;
    for set in sets {
        for d in &set.detections {
            writer.write_record([
                format!("{:.9}", set.frame_t),
                format!("{:.9}", d.range),
                format!("{:.12}", d.azimuth),
                format!("{:.9}", d.snr_db),
                format!("{:.9}", d.x),
                format!("{:.9}", d.y),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Load detection sets from CSV, grouping consecutive rows with equal
/// `frame_t`. Frames with zero detections cannot be represented in this
/// format and are reconstructed by the caller if needed.
pub fn load_detections(path: impl AsRef<Path>) -> Result<Vec<DetectionSet>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        // a file that cannot be opened is an I/O failure, not bad data
        csv::ErrorKind::Io(_) => Error::from(e),
        _ => Error::parse(path.display().to_string(), e.to_string()),
    })?;
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != DETECTION_HEADER {
            return Err(Error::parse(
                format!("{}:header", path.display()),
                format!("expected columns {DETECTION_HEADER:?}, got {got:?}"),
            ));
        }
    }
    let mut sets: Vec<DetectionSet> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record =
            record.map_err(|e| Error::parse(format!("{}:row {row}", path.display()), e.to_string()))?;
        let field = |idx: usize| -> Result<f64> {
            record
                .get(idx)
                .ok_or_else(|| {
                    Error::parse(
                        format!("{}:row {row}", path.display()),
                        format!("missing column {}", DETECTION_HEADER[idx]),
                    )
                })?
                .trim()
                .parse::<f64>()
                .map_err(|e| {
                    Error::parse(
                        format!("{}:row {row}", path.display()),
                        format!("column {}: {e}", DETECTION_HEADER[idx]),
                    )
                })
        };
        let frame_t = field(0)?;
        let d = Detection {
            range: field(1)?,
            azimuth: field(2)?,
            snr_db: field(3)?,
            power_rx: 0.0,
            x: field(4)?,
            y: field(5)?,
        };
        match sets.last_mut() {
            Some(last) if (last.frame_t - frame_t).abs() < 1e-12 => last.detections.push(d),
            _ => sets.push(DetectionSet {
                frame_t,
                detections: vec![d],
            }),
        }
    }
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Pose2D;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn radar_equation_cancellation() {
        // P_t=1, G=1, lambda=1, sigma=(4pi)^3, R=1, L=1 -> 1 W
        let p = received_power(1.0, 1.0, 1.0, (4.0 * PI).powi(3), 1.0, 1.0).unwrap();
        assert_relative_eq!(p, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn radar_equation_reference_value() {
        // direct high-precision evaluation of the range equation
        let p = received_power(1.0, 100.0, 0.0039, 10.0, 50.0, 1.0).unwrap();
        let expected = 1.0 * 100.0_f64.powi(2) * 0.0039_f64.powi(2) * 10.0
            / ((4.0 * PI).powi(3) * 50.0_f64.powi(4));
        assert_relative_eq!(p, expected, max_relative = 1e-12);
        assert!((p - 1.226e-10).abs() / 1.226e-10 < 1e-2, "{p}");
    }

    #[test]
    fn inverse_fourth_power_law() {
        let p1 = received_power(1.0, 50.0, 0.004, 5.0, 30.0, 2.0).unwrap();
        let p2 = received_power(1.0, 50.0, 0.004, 5.0, 60.0, 2.0).unwrap();
        assert_relative_eq!(p1 / p2, 16.0, max_relative = 1e-12);
    }

    #[test]
    fn radar_equation_rejects_zero_range() {
        assert!(received_power(1.0, 1.0, 1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn noise_power_identity_and_reference() {
        assert_relative_eq!(noise_power(1.0, 1.0, 1.0).unwrap(), BOLTZMANN, max_relative = 1e-15);
        // F_n = 10 dB, B_n = 1 MHz, T_0 = 290 K
        let p = noise_power(10.0, 1.0e6, 290.0).unwrap();
        assert_relative_eq!(p, 10.0 * BOLTZMANN * 1.0e6 * 290.0, max_relative = 1e-15);
        assert!((p - 4.004e-14).abs() / 4.004e-14 < 1e-2, "{p}");
        // linearity
        assert_relative_eq!(
            noise_power(20.0, 1.0e6, 290.0).unwrap(),
            2.0 * p,
            max_relative = 1e-15
        );
    }

    #[test]
    fn snr_basics() {
        assert_relative_eq!(snr(1e-14, 1e-14).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(snr(1e-13, 1e-14).unwrap(), 10.0, max_relative = 1e-12);
        assert!(snr(1.0, 0.0).is_err());
    }

    #[test]
    fn composed_snr_matches_full_chain() {
        // Eq-by-eq composition equals the single-expression form on 100
        // random draws.
        let mut rng = CounterRng::new(&[1234]);
        for _ in 0..100 {
            let p_t = rng.uniform_in(0.1, 10.0);
            let g = rng.uniform_in(1.0, 500.0);
            let lam = rng.uniform_in(0.001, 0.1);
            let sigma = rng.uniform_in(0.01, 100.0);
            let f_n = rng.uniform_in(1.0, 100.0);
            let b = rng.uniform_in(1e5, 1e8);
            let t0 = rng.uniform_in(200.0, 400.0);
            let r = rng.uniform_in(1.0, 200.0);
            let l = rng.uniform_in(1.0, 100.0);
            let composed = snr(
                received_power(p_t, g, lam, sigma, r, l).unwrap(),
                noise_power(f_n, b, t0).unwrap(),
            )
            .unwrap();
            let direct = snr_full(p_t, g, lam, sigma, f_n, b, t0, r, l).unwrap();
            assert_relative_eq!(composed, direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn db_consistency() {
        let p_r = 3.7e-12;
        let p_n = 4.1e-14;
        let via_linear = linear_to_db(snr(p_r, p_n).unwrap());
        let via_db = linear_to_db(p_r) - linear_to_db(p_n);
        assert_abs_diff_eq!(via_linear, via_db, epsilon = 1e-9);
    }

    #[test]
    fn antenna_boresight_and_null() {
        let tn = 10.0_f64.to_radians();
        assert_abs_diff_eq!(antenna_gain_db(0.0, 20.0, tn).unwrap(), 20.0, epsilon = 1e-12);
        // first null clamps to the floor
        assert_abs_diff_eq!(
            antenna_gain_db(tn, 20.0, tn).unwrap(),
            20.0 - GAIN_FLOOR_DB,
            epsilon = 1e-9
        );
    }

    #[test]
    fn antenna_first_sidelobe_level() {
        // maximize the pattern over (theta_null, 2 theta_null) numerically
        let tn = 10.0_f64.to_radians();
        let g_max = 20.0;
        let mut best = f64::NEG_INFINITY;
        for i in 1..=10_000 {
            let theta = tn + tn * i as f64 / 10_001.0;
            best = best.max(antenna_gain_db(theta, g_max, tn).unwrap());
        }
        assert!((best - (g_max - 13.26)).abs() < 0.05, "first sidelobe {best}");
    }

    #[test]
    fn antenna_gain_never_exceeds_peak() {
        let tn = 10.0_f64.to_radians();
        for i in -2000..=2000 {
            let theta = i as f64 * 1e-3;
            let g = antenna_gain_db(theta, 20.0, tn).unwrap();
            assert!(g <= 20.0 + 1e-12);
            if theta != 0.0 {
                assert!(g < 20.0);
            }
        }
    }

    #[test]
    fn rcs_constant_table_returns_mean() {
        let table = RcsTable::constant(7.0);
        for i in 0..36 {
            let aspect = -PI + i as f64 * PI / 18.0;
            assert_abs_diff_eq!(rcs_dbsm(aspect, -3.0, &table).unwrap(), -3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rcs_shift_invariance() {
        let base = RcsTable::default_car();
        let shifted = RcsTable {
            angles: base.angles.clone(),
            values_dbsm: base.values_dbsm.iter().map(|v| v + 6.5).collect(),
        };
        for i in 0..72 {
            let aspect = -PI + i as f64 * PI / 36.0 + 1e-6;
            assert_abs_diff_eq!(
                rcs_dbsm(aspect, 2.0, &base).unwrap(),
                rcs_dbsm(aspect, 2.0, &shifted).unwrap(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn rcs_side_lobe_exceeds_oblique() {
        let table = RcsTable::default_car();
        let side = rcs_dbsm(PI / 2.0, 0.0, &table).unwrap();
        let oblique = rcs_dbsm(PI / 4.0, 0.0, &table).unwrap();
        assert!(side > oblique, "side {side} vs oblique {oblique}");
    }

    #[test]
    fn rcs_rejects_malformed_table() {
        let bad = RcsTable {
            angles: vec![-PI, 1.0, 0.5, PI],
            values_dbsm: vec![0.0, 1.0, 2.0, 0.0],
        };
        assert!(matches!(rcs_dbsm(0.0, 0.0, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn detection_probability_midpoint_and_limits() {
        assert_abs_diff_eq!(
            detection_probability(15.0, 2.0, 13.0, 0.5).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(detection_probability(1e6, 0.0, 13.0, 0.5).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(detection_probability(-1e6, 0.0, 13.0, 0.5).unwrap(), 0.0, epsilon = 1e-12);
        // slope 0.5/dB, 6 dB above midpoint -> 1/(1+e^-3)
        assert_abs_diff_eq!(
            detection_probability(19.0, 0.0, 13.0, 0.5).unwrap(),
            1.0 / (1.0 + (-3.0_f64).exp()),
            epsilon = 1e-12
        );
    }

    #[test]
    fn detection_probability_monotone() {
        let mut prev = 0.0;
        for i in -40..=40 {
            let pd = detection_probability(i as f64, 0.0, 13.0, 0.5).unwrap();
            assert!(pd >= prev);
            prev = pd;
        }
        // monotone non-increasing in dp_offset at fixed SNR
        let mut prev = 1.0;
        for i in -10..=10 {
            let pd = detection_probability(13.0, i as f64, 13.0, 0.5).unwrap();
            assert!(pd <= prev);
            prev = pd;
        }
    }

    fn test_frame(range: f64) -> Frame {
        Frame {
            t: 0.0,
            ego: Pose2D::origin(),
            target: Pose2D::new(range, 0.0, PI / 2.0),
        }
    }

    #[test]
    fn saturated_snr_is_deterministic_across_seeds() {
        let mut params = RadarParams::nominal();
        params.awg_noise_sd = 0.0;
        params.sys_loss = 0.0;
        params.rcs_mean = 10.0;
        params.g_max = 25.0;
        let constants = RadarConstants::default();
        let shape = VehicleShape::default_car();
        let frame = test_frame(8.0); // near target: Pd saturates at 1
        let a = generate_detections(&frame, 0, &params, &constants, shape, 1).unwrap();
        let b = generate_detections(&frame, 0, &params, &constants, shape, 999).unwrap();
        assert!(!a.detections.is_empty());
        assert_eq!(a, b);
    }

    #[test]
    fn no_hits_gives_empty_set() {
        let params = RadarParams::nominal();
        let constants = RadarConstants::default();
        let frame = Frame {
            t: 0.0,
            ego: Pose2D::origin(),
            target: Pose2D::new(-50.0, 0.0, 0.0),
        };
        let out =
            generate_detections(&frame, 0, &params, &constants, VehicleShape::default_car(), 7)
                .unwrap();
        assert!(out.detections.is_empty());
    }

    #[test]
    fn detection_set_bitwise_deterministic() {
        let params = RadarParams::nominal();
        let constants = RadarConstants::default();
        let shape = VehicleShape::default_car();
        let frame = test_frame(40.0);
        let a = generate_detections(&frame, 3, &params, &constants, shape, 42).unwrap();
        let b = generate_detections(&frame, 3, &params, &constants, shape, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn detections_sorted_with_consistent_cartesian() {
        let params = RadarParams::nominal();
        let constants = RadarConstants::default();
        let frame = test_frame(25.0);
        let out =
            generate_detections(&frame, 0, &params, &constants, VehicleShape::default_car(), 5)
                .unwrap();
        for pair in out.detections.windows(2) {
            assert!(pair[0].azimuth < pair[1].azimuth);
        }
        for d in &out.detections {
            assert_abs_diff_eq!(d.x, d.range * d.azimuth.cos(), epsilon = 1e-9);
            assert_abs_diff_eq!(d.y, d.range * d.azimuth.sin(), epsilon = 1e-9);
        }
    }

    #[test]
    fn expected_detection_count_monotone_in_sys_loss() {
        // checked through the analytic per-ray Pd, not sampled outcomes
        let constants = RadarConstants::default();
        let shape = VehicleShape::default_car();
        let frame = test_frame(40.0);
        let hits = cast_fan(frame.ego, constants.fov, constants.n_rays, frame.target, shape)
            .unwrap();
        let mut prev = f64::INFINITY;
        for loss in [0.0, 5.0, 10.0, 15.0, 20.0] {
            let mut params = RadarParams::nominal();
            params.sys_loss = loss;
            let expected: f64 = hits
                .iter()
                .map(|h| hit_detection_probability(h, &params, &constants).unwrap().0)
                .sum();
            assert!(expected <= prev + 1e-12, "loss {loss}: {expected} > {prev}");
            prev = expected;
        }
    }

    #[test]
    fn bernoulli_rate_matches_analytic_pd() {
        // fixed scene, 10 000 seeded repetitions at one hit; empirical rate
        // within 3 sigma of the closed-form Pd
        let mut params = RadarParams::nominal();
        params.awg_noise_sd = 0.0; // isolate the Bernoulli stage
        let constants = RadarConstants::default();
        let shape = VehicleShape::default_car();
        let frame = test_frame(55.0);
        let hits = cast_fan(frame.ego, constants.fov, constants.n_rays, frame.target, shape)
            .unwrap();
        let hit = hits[hits.len() / 2];
        let (pd, _, _) = hit_detection_probability(&hit, &params, &constants).unwrap();
        assert!(pd > 0.05 && pd < 0.95, "need a non-degenerate Pd, got {pd}");
        let n = 10_000;
        let mut count = 0;
        for rep in 0..n {
            let out = generate_detections(&frame, rep, &params, &constants, shape, 77).unwrap();
            if out
                .detections
                .iter()
                .any(|d| (d.azimuth - hit.azimuth).abs() < 1e-12)
            {
                count += 1;
            }
        }
        let rate = count as f64 / n as f64;
        let bound = 3.0 * (pd * (1.0 - pd) / n as f64).sqrt();
        assert!((rate - pd).abs() < bound, "rate {rate}, pd {pd}, bound {bound}");
    }

    #[test]
    fn detection_csv_round_trip() {
        let params = RadarParams::nominal();
        let constants = RadarConstants::default();
        let shape = VehicleShape::default_car();
        let sets: Vec<DetectionSet> = (0..3)
            .map(|i| {
                let mut frame = test_frame(30.0 + i as f64);
                frame.t = i as f64 * 0.1;
                generate_detections(&frame, i as u64, &params, &constants, shape, 11).unwrap()
            })
            .filter(|s| !s.detections.is_empty())
            .collect();
        assert!(!sets.is_empty());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("det.csv");
        save_detections(&sets, &path).unwrap();
        let loaded = load_detections(&path).unwrap();
        assert_eq!(loaded.len(), sets.len());
        for (a, b) in sets.iter().zip(&loaded) {
            assert_abs_diff_eq!(a.frame_t, b.frame_t, epsilon = 1e-9);
            assert_eq!(a.detections.len(), b.detections.len());
            for (da, db) in a.detections.iter().zip(&b.detections) {
                assert_abs_diff_eq!(da.range, db.range, epsilon = 1e-6);
                assert_abs_diff_eq!(da.snr_db, db.snr_db, epsilon = 1e-6);
            }
        }
    }
}
