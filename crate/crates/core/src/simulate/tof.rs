//! Time-of-flight signals: synthesis from sublevel populations and
//! nonnegative fitting back to populations.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::nnls::nnls;
use crate::error::{Error, Result};

pub const N_CHANNELS: usize = 16;

/// Gaussian arrival distributions, each normalized to unit area on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TofTemplates {
    pub time_ms: Vec<f64>,
    pub centers_ms: Vec<f64>,
    pub width_ms: f64,
    /// `samples[c][t]`
    pub samples: Vec<Vec<f64>>,
}

fn trapezoid(y: &[f64], x: &[f64]) -> f64 {
    y.windows(2).zip(x.windows(2)).map(|(y, x)| 0.5 * (y[0] + y[1]) * (x[1] - x[0])).sum()
}

impl TofTemplates {
    pub fn new(time_ms: Vec<f64>, centers_ms: Vec<f64>, width_ms: f64) -> Result<Self> {
        if time_ms.len() < 2 || !(width_ms > 0.0) || time_ms.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("time grid must be increasing and the width positive"));
        }
        let samples = centers_ms
            .iter()
            .map(|&c| {
                let raw: Vec<f64> = time_ms.iter().map(|&t| (-0.5 * ((t - c) / width_ms).powi(2)).exp()).collect();
                let area = trapezoid(&raw, &time_ms);
                raw.iter().map(|y| y / area).collect()
            })
            .collect();
        Ok(Self { time_ms, centers_ms, width_ms, samples })
    }

    /// Two groups of 9 (upper manifold) and 7 (lower manifold) arrival
    /// peaks, neighbours one width apart.
    pub fn default_layout() -> Self {
        let width = 0.5;
        let centers = (0..9)
            .map(|k| 20.0 + width * k as f64)
            .chain((0..7).map(|k| 28.0 + width * k as f64))
            .collect();
        let step = 0.01;
        let time = (0..=1700).map(|k| 16.5 + step * k as f64).collect();
        Self::new(time, centers, width).expect("default layout is valid")
    }

    pub fn n_channels(&self) -> usize {
        self.samples.len()
    }

    /// Area of each template on the grid.
    pub fn areas(&self) -> Vec<f64> {
        self.samples.iter().map(|s| trapezoid(s, &self.time_ms)).collect()
    }

    fn design(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.time_ms.len(), self.n_channels(), |t, c| self.samples[c][t])
    }

    /// `sum_c w_c S_c(t)`
    pub fn render(&self, weights: &[f64]) -> Vec<f64> {
        (0..self.time_ms.len())
            .map(|t| weights.iter().zip(&self.samples).map(|(w, s)| w * s[t]).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TofSignal {
    pub templates: TofTemplates,
    pub amplitude: Vec<f64>,
}

impl TofSignal {
    /// Two-column CSV `time_ms,amplitude`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_ms,amplitude\n");
        for (t, a) in self.templates.time_ms.iter().zip(&self.amplitude) {
            out.push_str(&format!("{t},{a}\n"));
        }
        out
    }

    /// Reads a CSV written by [`TofSignal::to_csv`]; the time column must
    /// match the grid of `templates`.
    pub fn from_csv(text: &str, templates: TofTemplates) -> Result<Self> {
        let mut amplitude = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (n == 0 && line.starts_with("time")) {
                continue;
            }
            let mut cols = line.split(',');
            let (Some(t), Some(a), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::Schema(format!("line {}: expected two columns", n + 1)));
            };
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Schema(format!("line {}: {e}", n + 1)));
            let t = parse(t)?;
            let k = amplitude.len();
            match templates.time_ms.get(k) {
                Some(&grid) if (grid - t).abs() <= 1e-9 * grid.abs().max(1.0) => {}
                _ => return Err(Error::Schema(format!("line {}: time {t} is off the template grid", n + 1))),
            }
            amplitude.push(parse(a)?);
        }
        if amplitude.len() != templates.time_ms.len() {
            return Err(Error::Schema(format!(
                "signal has {} samples, grid has {}",
                amplitude.len(),
                templates.time_ms.len()
            )));
        }
        Ok(Self { templates, amplitude })
    }
}

/// Weighted sum of the default templates plus white Gaussian noise whose
/// standard deviation is `noise_sigma` times the noiseless peak amplitude.
pub fn synthesize_tof(populations: &[f64], noise_sigma: f64, rng: &mut impl Rng) -> Result<TofSignal> {
    synthesize_with(TofTemplates::default_layout(), populations, noise_sigma, rng)
}

pub fn synthesize_with(
    templates: TofTemplates,
    populations: &[f64],
    noise_sigma: f64,
    rng: &mut impl Rng,
) -> Result<TofSignal> {
    if populations.len() != templates.n_channels() {
        return Err(Error::DimensionMismatch { expected: templates.n_channels(), found: populations.len() });
    }
    if populations.iter().any(|&p| !(p >= 0.0)) || (populations.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(Error::invalid("populations must be nonnegative and sum to 1"));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::invalid("noise level must be nonnegative"));
    }
    let mut amplitude = templates.render(populations);
    if noise_sigma > 0.0 {
        let peak = amplitude.iter().copied().fold(0.0, f64::max);
        let noise = Normal::new(0.0, noise_sigma * peak).map_err(|e| Error::invalid(e.to_string()))?;
        for a in &mut amplitude {
            *a += noise.sample(rng);
        }
    }
    Ok(TofSignal { templates, amplitude })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TofFit {
    pub weights: Vec<f64>,
    /// `||S(t) - sum_c w_c S_c(t)||_2` over the grid samples.
    pub residual: f64,
}

/// Nonnegative least-squares fit of the template weights.
pub fn fit_tof(signal: &TofSignal) -> Result<TofFit> {
    let a = signal.templates.design();
    let b = DVector::from_column_slice(&signal.amplitude);
    if b.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("signal contains non-finite samples"));
    }
    let gram = a.transpose() * &a;
    let eig = gram.clone().symmetric_eigen();
    let (min, max) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if !(min > 1e-13 * max) {
        return Err(Error::Numerical(format!("template Gram matrix is singular (eigenvalues {min:e}..{max:e})")));
    }
    let w = nnls(&gram, &(a.transpose() * &b));
    let residual = (&a * &w - &b).norm();
    Ok(TofFit { weights: w.iter().map(|x| x.max(0.0)).collect(), residual })
}
