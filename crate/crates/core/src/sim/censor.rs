//! Censoring times `kappa * (1 - u^2)`, calibration of `kappa`, and
//! covariate noise.

use rand::Rng;

use crate::error::{Error, Result};
use crate::survival::Observation;

use super::truth::{assemble, SimCovariates, CONTINUOUS_COLUMNS};

/// Probes drawn by [`calibrate_kappa`] per survival sample when the sample
/// is small.
pub const CALIBRATION_DRAWS: usize = 10_000;
const BISECTION_STEPS: usize = 200;

/// Censors survival time `s` at `kappa * (1 - u^2)`; a tie counts as a death.
/// An infinite `kappa` disables censoring.
pub fn censor(s: f64, kappa: f64, u: f64) -> Observation {
    let c = if kappa.is_infinite() { f64::INFINITY } else { kappa * (1.0 - u * u) };
    if s <= c {
        Observation::death(s)
    } else {
        Observation::censored(c)
    }
}

pub fn apply_censoring<R: Rng + ?Sized>(s: f64, kappa: f64, rng: &mut R) -> Observation {
    let u: f64 = rng.random();
    censor(s, kappa, u)
}

fn censored_fraction(samples: &[f64], u: &[f64], kappa: f64) -> f64 {
    let censored = samples
        .iter()
        .cycle()
        .zip(u)
        .filter(|&(&s, &u)| !censor(s, kappa, u).event)
        .count();
    censored as f64 / u.len() as f64
}

/// `kappa` whose expected censoring rate over `samples` is `target`.
///
/// The rate is estimated with one fixed set of uniforms (at least
/// [`CALIBRATION_DRAWS`], cycling through `samples`), which makes it a
/// monotone step function of `kappa`; bisection then locates its crossing
/// of `target`. A target of zero returns infinity.
pub fn calibrate_kappa<R: Rng + ?Sized>(samples: &[f64], target: f64, tol: f64, rng: &mut R) -> Result<f64> {
    if !(0.0..=0.95).contains(&target) {
        return Err(Error::InvalidParams(format!("censoring target must lie in [0, 0.95], got {target}")));
    }
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if target == 0.0 {
        return Ok(f64::INFINITY);
    }
    let draws = samples.len().max(CALIBRATION_DRAWS);
    let u: Vec<f64> = (0..draws).map(|_| rng.random()).collect();
    let rate = |kappa: f64| censored_fraction(samples, &u, kappa);

    let mut hi = samples.iter().copied().fold(0.0, f64::max);
    while rate(hi) > target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rate(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let kappa = 0.5 * (lo + hi);
    let achieved = rate(kappa);
    if (achieved - target).abs() > tol {
        log::warn!("censoring calibration reached {achieved:.4} for target {target}");
    }
    Ok(kappa)
}

/// Noise levels supported by [`add_noise`].
pub const NOISE_LEVELS: [f64; 2] = [0.05, 0.10];

/// Adds `U(-level, level)` noise to each continuous value and to each latent
/// value behind the discrete columns, which are then rounded to their
/// levels again.
pub fn add_noise<R: Rng + ?Sized>(x: &SimCovariates, level: f64, rng: &mut R) -> Result<SimCovariates> {
    if !NOISE_LEVELS.contains(&level) {
        return Err(Error::UnsupportedNoiseLevel(level));
    }
    let mut jitter = |v: f64| v + rng.random_range(-level..level);
    let continuous: Vec<Vec<f64>> = (0..CONTINUOUS_COLUMNS)
        .map(|j| x.matrix.column(j).iter().map(|&v| jitter(v)).collect())
        .collect();
    let latent: Vec<Vec<f64>> = x
        .latent
        .iter()
        .map(|c| c.iter().map(|&v| jitter(v).clamp(0.0, 1.0)).collect())
        .collect();
    Ok(assemble(continuous, latent))
}
