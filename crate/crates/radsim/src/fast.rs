//! Extended FAST variance-based sensitivity analysis: search-curve sample
//! generation over parameter bounds and Fourier-based estimation of
//! first-order and total-order sensitivity indices.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::rng::{stream, CounterRng};
use crate::{Error, Result};

/// One analyzed parameter and its sampling bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl ParameterSpec {
    pub fn new(name: impl Into<String>, min: f64, max: f64) -> Result<Self> {
        if !(min < max) {
            return Err(Error::validation(format!("parameter bounds need min < max, got [{min}, {max}]")));
        }
        Ok(Self {
            name: name.into(),
            min,
            max,
        })
    }
}

/// Per-run sampling metadata: which parameter the run's block targets,
/// the curve coordinate, and the frequencies/phases in effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub target_param: usize,
    pub s: f64,
    pub frequencies: Vec<u64>,
    pub phases: Vec<f64>,
}

/// The full sample matrix: one block of `ns_per_param` rows per target
/// parameter, every row a point in parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    pub specs: Vec<ParameterSpec>,
    /// runs x parameters.
    pub values: Vec<Vec<f64>>,
    pub meta: Vec<RunMeta>,
    pub ns_per_param: usize,
    pub interference: usize,
}

impl SampleMatrix {
    pub fn rows(&self) -> usize {
        self.values.len()
    }
}

/// Per-parameter sensitivity estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSensitivity {
    pub name: String,
    pub s_first: f64,
    pub s_total: f64,
    pub interaction: f64,
    /// Raw estimate fell outside [-0.05, 1.05]; reported, never clipped.
    pub flagged: bool,
}

/// Result of one sensitivity analysis over all parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub parameters: Vec<ParameterSensitivity>,
    /// Total output variance (Fourier estimate, averaged over blocks).
    pub total_variance: f64,
}

/// Space-filling search curve: x(s) = 1/2 + (1/pi) arcsin(sin(omega s + phi)),
/// a triangle wave in s covering [0, 1] with uniform density.
pub fn search_curve(s: f64, omega: u64, phi: f64) -> f64 {
    0.5 + (1.0 / PI) * (omega as f64 * s + phi).sin().asin()
}

/// Frequency assignment for one block: the target parameter gets
/// omega_max = (ns - 1) / (2 M); the complementary parameters get
/// frequencies spread evenly over 1..floor(omega_max / (2 M)), cycling
/// when there are more parameters than distinct frequencies. Spreading
/// (rather than packing at 1) keeps the complementary curve from
/// degenerating into a low-order Lissajous figure, which would distort
/// the block's total-variance estimate.
fn block_frequencies(n_params: usize, target: usize, omega_max: u64, m: u64) -> Vec<u64> {
    let max_complementary = (omega_max / (2 * m)).max(1);
    let n_comp = (n_params - 1) as u64;
    let mut freqs = vec![0u64; n_params];
    let mut slot = 0u64;
    for (i, f) in freqs.iter_mut().enumerate() {
        if i == target {
            *f = omega_max;
            continue;
        }
        *f = if n_comp <= 1 {
            1
        } else if max_complementary >= n_comp {
            // floor of a 1..=max_complementary linspace over n_comp slots
            1 + slot * (max_complementary - 1) / (n_comp - 1)
        } else {
            slot % max_complementary + 1
        };
        slot += 1;
    }
    freqs
}

/// Generate the eFAST sample matrix: for each target parameter, one block
/// of `ns_per_param` rows sweeping the curve coordinate over (-pi, pi)
/// with seeded random phase shifts per (block, parameter).
pub fn efast_samples(
    specs: &[ParameterSpec],
    ns_per_param: usize,
    interference: usize,
    seed: u64,
) -> Result<SampleMatrix> {
    if specs.is_empty() {
        return Err(Error::validation("need at least one parameter"));
    }
    if interference < 2 {
        return Err(Error::validation(format!(
            "interference factor M must be at least 2, got {interference}"
        )));
    }
    let m = interference;
    let min_ns = 4 * m * m + 1;
    if ns_per_param.is_multiple_of(2) || ns_per_param < min_ns {
        return Err(Error::validation(format!(
            "ns_per_param must be odd and at least 4*M^2 + 1 = {min_ns}, got {ns_per_param}"
        )));
    }
    let omega_max = ((ns_per_param - 1) / (2 * m)) as u64;

    let n_params = specs.len();
    let mut values = Vec::with_capacity(n_params * ns_per_param);
    let mut meta = Vec::with_capacity(n_params * ns_per_param);
    for target in 0..n_params {
        let freqs = block_frequencies(n_params, target, omega_max, m as u64);
        let mut rng = CounterRng::new(&[stream::FAST_PHASE, seed, target as u64]);
        let phases: Vec<f64> = (0..n_params).map(|_| rng.uniform_in(0.0, 2.0 * PI)).collect();
        for j in 0..ns_per_param {
            // ns equispaced points in (-pi, pi), symmetric about 0
            let s = -PI + PI * (2 * j + 1) as f64 / ns_per_param as f64;
            let row: Vec<f64> = specs
                .iter()
                .enumerate()
                .map(|(p, spec)| {
                    let unit = search_curve(s, freqs[p], phases[p]);
                    spec.min + (spec.max - spec.min) * unit
                })
                .collect();
            values.push(row);
            meta.push(RunMeta {
                target_param: target,
                s,
                frequencies: freqs.clone(),
                phases: phases.clone(),
            });
        }
    }
    Ok(SampleMatrix {
        specs: specs.to_vec(),
        values,
        meta,
        ns_per_param,
        interference,
    })
}

/// Fourier coefficients (A_j, B_j) of `y` over the equispaced curve grid,
/// for harmonics j = 1..=j_max.
fn fourier_coefficients(y: &[f64], s: &[f64], j_max: u64) -> Vec<(f64, f64)> {
    let n = y.len() as f64;
    (1..=j_max)
        .map(|j| {
            let (mut a, mut b) = (0.0, 0.0);
            for (&yi, &si) in y.iter().zip(s) {
                let arg = j as f64 * si;
                a += yi * arg.cos();
                b += yi * arg.sin();
            }
            (a / n, b / n)
        })
        .collect()
}

/// Estimate sensitivity indices from the per-run outputs. Per block:
/// the target parameter's partial variance is read off the harmonics of
/// its frequency, the total-order index off the complement of the
/// low-frequency band.
pub fn analyze(matrix: &SampleMatrix, outputs: &[f64], interference: usize) -> Result<SensitivityResult> {
    if outputs.len() != matrix.rows() {
        return Err(Error::validation(format!(
            "need one output per sample row: {} rows, {} outputs",
            matrix.rows(),
            outputs.len()
        )));
    }
    if let Some(bad) = outputs.iter().position(|v| !v.is_finite()) {
        return Err(Error::validation(format!("output {bad} is not finite")));
    }
    let m = interference as u64;
    let ns = matrix.ns_per_param;
    let omega_max = ((ns - 1) / (2 * interference)) as u64;
    let nyquist = ((ns - 1) / 2) as u64;
    let cutoff = (omega_max / (2 * m)).max(1) * m;

    let mut parameters = Vec::with_capacity(matrix.specs.len());
    let mut variance_acc = 0.0;
    for (target, spec) in matrix.specs.iter().enumerate() {
        let start = target * ns;
        let y = &outputs[start..start + ns];
        let mean = y.iter().sum::<f64>() / ns as f64;
        let sample_var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / ns as f64;
        if sample_var <= 1e-24 * (1.0 + mean * mean) {
            return Err(Error::DegenerateVariance);
        }
        let s: Vec<f64> = matrix.meta[start..start + ns].iter().map(|m| m.s).collect();
        let coeffs = fourier_coefficients(y, &s, nyquist);
        let spectrum = |j: u64| {
            let (a, b) = coeffs[(j - 1) as usize];
            a * a + b * b
        };
        let total: f64 = (1..=nyquist).map(&spectrum).sum::<f64>() * 2.0;
        if total <= 0.0 {
            return Err(Error::DegenerateVariance);
        }
        let first: f64 = (1..=m)
            .map(|p| spectrum(p * omega_max))
            .sum::<f64>()
            * 2.0;
        let complementary: f64 = (1..=cutoff).map(&spectrum).sum::<f64>() * 2.0;
        let s_first = first / total;
        let s_total = 1.0 - complementary / total;
        let flagged = !(-0.05..=1.05).contains(&s_first)
            || !(-0.05..=1.05).contains(&s_total);
        parameters.push(ParameterSensitivity {
            name: spec.name.clone(),
            s_first,
            s_total,
            interaction: s_total - s_first,
            flagged,
        });
        variance_acc += total;
    }
    Ok(SensitivityResult {
        parameters,
        total_variance: variance_acc / matrix.specs.len() as f64,
    })
}

/// Write the sample matrix as CSV: parameter-name columns plus `block`
/// and `s_index`.
pub fn save_sample_matrix(matrix: &SampleMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let mut header: Vec<String> = matrix.specs.iter().map(|s| s.name.clone()).collect();
    header.push("block".into());
    header.push("s_index".into());
    writer.write_record(&header)?;
    for (i, row) in matrix.values.iter().enumerate() {
        let mut record: Vec<String> = row.iter().map(|v| format!("{v:.12}")).collect();
        record.push((i / matrix.ns_per_param).to_string());
        record.push((i % matrix.ns_per_param).to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Serialize a sensitivity result to the JSON interchange form:
/// `{parameter: {s_first, s_total, interaction, flagged}}` plus
/// `total_variance`.
pub fn sensitivity_to_json(result: &SensitivityResult) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for p in &result.parameters {
        map.insert(
            p.name.clone(),
            serde_json::json!({
                "s_first": p.s_first,
                "s_total": p.s_total,
                "interaction": p.interaction,
                "flagged": p.flagged,
            }),
        );
    }
    map.insert("total_variance".into(), serde_json::json!(result.total_variance));
    serde_json::Value::Object(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_specs(n: usize) -> Vec<ParameterSpec> {
        (0..n)
            .map(|i| ParameterSpec::new(format!("x{}", i + 1), 0.0, 1.0).unwrap())
            .collect()
    }

    #[test]
    fn search_curve_anchor_values() {
        assert_abs_diff_eq!(search_curve(0.0, 5, 0.0), 0.5, epsilon = 1e-12);
        // omega s + phi = pi/2 -> 1
        assert_abs_diff_eq!(search_curve(PI / 2.0, 1, 0.0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(search_curve(-PI / 2.0, 1, 0.0), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn search_curve_uniform_on_unit_interval() {
        // Kolmogorov-Smirnov against the uniform CDF at the 1% level
        let n = 1000;
        let mut xs: Vec<f64> = (0..n)
            .map(|i| {
                let s = -PI + PI * (2 * i + 1) as f64 / n as f64;
                search_curve(s, 7, 1.3)
            })
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut d: f64 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            assert!((0.0..=1.0).contains(&x));
            d = d.max(((i + 1) as f64 / n as f64 - x).abs());
            d = d.max((x - i as f64 / n as f64).abs());
        }
        // critical value at alpha = 0.01: 1.63 / sqrt(n)
        assert!(d < 1.63 / (n as f64).sqrt(), "KS statistic {d}");
    }

    #[test]
    fn default_configuration_yields_390_rows() {
        let specs = unit_specs(6);
        let matrix = efast_samples(&specs, 65, 4, 0).unwrap();
        assert_eq!(matrix.rows(), 390);
        // omega_max = (65 - 1) / (2 * 4) = 8, complementary frequency 1
        assert_eq!(matrix.meta[0].frequencies[0], 8);
        for p in 1..6 {
            assert_eq!(matrix.meta[0].frequencies[p], 1);
        }
    }

    #[test]
    fn single_parameter_sweeps_symmetrically() {
        let specs = unit_specs(1);
        let matrix = efast_samples(&specs, 65, 4, 3).unwrap();
        assert_eq!(matrix.rows(), 65);
        let vals: Vec<f64> = matrix.values.iter().map(|r| r[0]).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo < 0.1 && hi > 0.9, "range [{lo}, {hi}] too narrow");
        let mid = (lo + hi) / 2.0;
        assert!((mid - 0.5).abs() < 0.1, "not symmetric about midpoint: {mid}");
    }

    #[test]
    fn samples_respect_bounds() {
        let mut rng = CounterRng::new(&[808]);
        for seed in 0..10u64 {
            let specs: Vec<ParameterSpec> = (0..4)
                .map(|i| {
                    let lo = rng.uniform_in(-50.0, 0.0);
                    let hi = lo + rng.uniform_in(0.1, 100.0);
                    ParameterSpec::new(format!("p{i}"), lo, hi).unwrap()
                })
                .collect();
            let matrix = efast_samples(&specs, 65, 4, seed).unwrap();
            for row in &matrix.values {
                for (v, spec) in row.iter().zip(&specs) {
                    assert!(*v >= spec.min && *v <= spec.max, "{v} outside [{}, {}]", spec.min, spec.max);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_sampling_setup() {
        let specs = unit_specs(2);
        let err = efast_samples(&specs, 64, 4, 0).unwrap_err(); // even
        assert!(err.to_string().contains("65"), "{err}");
        assert!(efast_samples(&specs, 33, 4, 0).is_err()); // below 4M^2+1
        assert!(efast_samples(&specs, 65, 1, 0).is_err()); // M too small
    }

    #[test]
    fn sample_matrix_deterministic() {
        let specs = unit_specs(3);
        let a = efast_samples(&specs, 65, 4, 99).unwrap();
        let b = efast_samples(&specs, 65, 4, 99).unwrap();
        assert_eq!(a, b);
        let c = efast_samples(&specs, 65, 4, 100).unwrap();
        assert_ne!(a, c);
    }

    fn run_model(matrix: &SampleMatrix, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        matrix.values.iter().map(|row| f(row)).collect()
    }

    #[test]
    fn single_input_model() {
        let specs = unit_specs(3);
        let matrix = efast_samples(&specs, 65, 4, 1).unwrap();
        let outputs = run_model(&matrix, |x| x[0]);
        let r = analyze(&matrix, &outputs, 4).unwrap();
        assert!((r.parameters[0].s_first - 1.0).abs() < 0.02, "{:?}", r.parameters[0]);
        assert!(r.parameters[0].s_total > 0.95);
        assert!(r.parameters[1].s_first.abs() < 0.02);
        assert!(r.parameters[2].s_first.abs() < 0.02);
    }

    #[test]
    fn linear_model_variance_split() {
        // f = x1 + 2 x2 on the unit square: variances 1/12 and 4/12
        let specs = unit_specs(2);
        let matrix = efast_samples(&specs, 65, 4, 2).unwrap();
        let outputs = run_model(&matrix, |x| x[0] + 2.0 * x[1]);
        let r = analyze(&matrix, &outputs, 4).unwrap();
        assert!((r.parameters[0].s_first - 0.2).abs() < 0.02, "{:?}", r.parameters[0]);
        assert!((r.parameters[1].s_first - 0.8).abs() < 0.02, "{:?}", r.parameters[1]);
        assert!(r.parameters[0].interaction.abs() < 0.05);
        assert!(r.parameters[1].interaction.abs() < 0.05);
    }

    #[test]
    fn additive_model_first_order_sums_to_one() {
        let specs = unit_specs(4);
        let matrix = efast_samples(&specs, 129, 4, 5).unwrap();
        let outputs = run_model(&matrix, |x| x[0] + 3.0 * x[1] - 2.0 * x[2] + 0.5 * x[3]);
        let r = analyze(&matrix, &outputs, 4).unwrap();
        let sum: f64 = r.parameters.iter().map(|p| p.s_first).sum();
        assert!((sum - 1.0).abs() < 0.05, "sum {sum}");
        for p in &r.parameters {
            assert!(p.interaction.abs() <= 0.05, "{p:?}");
        }
    }

    #[test]
    fn ishigami_matches_closed_form() {
        // f = sin x1 + a sin^2 x2 + b x3^4 sin x1 on (-pi, pi)^3,
        // a = 7, b = 0.1. Closed-form decomposition:
        //   V1 = (1 + b pi^4 / 5)^2 / 2, V2 = a^2 / 8,
        //   V13 = 8 b^2 pi^8 / 225, V3 = 0.
        let (a, b) = (7.0, 0.1);
        let pi4 = PI.powi(4);
        let v1 = 0.5 * (1.0 + b * pi4 / 5.0).powi(2);
        let v2 = a * a / 8.0;
        let v13 = 8.0 * b * b * pi4 * pi4 / 225.0;
        let v = v1 + v2 + v13;

        let specs: Vec<ParameterSpec> = (0..3)
            .map(|i| ParameterSpec::new(format!("x{}", i + 1), -PI, PI).unwrap())
            .collect();
        let matrix = efast_samples(&specs, 1025, 4, 7).unwrap();
        let outputs = run_model(&matrix, |x| {
            x[0].sin() + a * x[1].sin().powi(2) + b * x[2].powi(4) * x[0].sin()
        });
        let r = analyze(&matrix, &outputs, 4).unwrap();
        assert!((r.parameters[0].s_first - v1 / v).abs() < 0.03, "S1 {:?} vs {}", r.parameters[0].s_first, v1 / v);
        assert!((r.parameters[1].s_first - v2 / v).abs() < 0.03, "S2 {:?} vs {}", r.parameters[1].s_first, v2 / v);
        assert!(r.parameters[2].s_first.abs() < 0.03, "S3 {:?}", r.parameters[2].s_first);
        assert!((r.parameters[2].s_total - v13 / v).abs() < 0.05, "ST3 {:?} vs {}", r.parameters[2].s_total, v13 / v);
    }

    #[test]
    fn constant_output_degenerate() {
        let specs = unit_specs(2);
        let matrix = efast_samples(&specs, 65, 4, 0).unwrap();
        let outputs = vec![3.25; matrix.rows()];
        assert!(matches!(
            analyze(&matrix, &outputs, 4),
            Err(Error::DegenerateVariance)
        ));
    }

    #[test]
    fn output_scale_invariance() {
        let specs = unit_specs(3);
        let matrix = efast_samples(&specs, 65, 4, 11).unwrap();
        let outputs = run_model(&matrix, |x| x[0] * x[1] + x[2]);
        let scaled: Vec<f64> = outputs.iter().map(|y| y * 137.0).collect();
        let a = analyze(&matrix, &outputs, 4).unwrap();
        let b = analyze(&matrix, &scaled, 4).unwrap();
        for (pa, pb) in a.parameters.iter().zip(&b.parameters) {
            assert_abs_diff_eq!(pa.s_first, pb.s_first, epsilon = 1e-9);
            assert_abs_diff_eq!(pa.s_total, pb.s_total, epsilon = 1e-9);
        }
    }

    #[test]
    fn parseval_total_variance() {
        // Fourier-estimated block variance within 5% of the sample variance
        let specs = unit_specs(3);
        let matrix = efast_samples(&specs, 129, 4, 13).unwrap();
        let outputs = run_model(&matrix, |x| (x[0] * 3.0).sin() + x[1] * x[2]);
        let r = analyze(&matrix, &outputs, 4).unwrap();
        // sample variance of the first block
        let ns = matrix.ns_per_param;
        let block = &outputs[0..ns];
        let mean = block.iter().sum::<f64>() / ns as f64;
        let var = block.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / ns as f64;
        let rel = (r.total_variance - var).abs() / var;
        // total_variance averages blocks; compare loosely
        assert!(rel < 0.25, "relative gap {rel}");

        // strict Parseval check on one block
        let s: Vec<f64> = matrix.meta[0..ns].iter().map(|m| m.s).collect();
        let nyquist = ((ns - 1) / 2) as u64;
        let coeffs = fourier_coefficients(block, &s, nyquist);
        let fourier_var: f64 = coeffs.iter().map(|(a, b)| a * a + b * b).sum::<f64>() * 2.0;
        assert!(
            (fourier_var - var).abs() / var < 0.05,
            "Parseval gap {} vs {}",
            fourier_var,
            var
        );
    }

    #[test]
    fn indices_ordered_and_bounded_on_smooth_model() {
        let specs = unit_specs(3);
        let matrix = efast_samples(&specs, 129, 4, 17).unwrap();
        let outputs = run_model(&matrix, |x| x[0] + x[1] * x[2]);
        let r = analyze(&matrix, &outputs, 4).unwrap();
        for p in &r.parameters {
            assert!(p.s_first >= -0.05 && p.s_first <= 1.05, "{p:?}");
            assert!(p.s_total >= -0.05 && p.s_total <= 1.05, "{p:?}");
            assert!(p.s_first <= p.s_total + 0.05, "{p:?}");
            assert!(!p.flagged, "{p:?}");
        }
    }
}
