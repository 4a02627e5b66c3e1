use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{param, require_finite, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoewnerKind {
    Chordal,
    Radial,
}

/// A sampled path of `sqrt(kappa) * B_t` on a uniform capacity-time grid.
///
/// Chordal values are real positions; radial values are angles wrapped into
/// `[0, 2 pi)`. Step `j` (for `j >= 1`) holds the driving value `values[j]`
/// constant on `(times[j-1], times[j]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivingFunction {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub kappa: f64,
    pub seed: u64,
    pub kind: LoewnerKind,
}

impl DrivingFunction {
    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Capacity increment of step `j >= 1`.
    #[inline]
    pub fn dt(&self, j: usize) -> f64 {
        self.times[j] - self.times[j - 1]
    }

    /// Tip regularization height `sqrt(dt) / 10` of the uniform grid.
    pub fn regularization(&self) -> f64 {
        (self.horizon() / self.n_steps() as f64).sqrt() / 10.0
    }

    /// Key of the root of the Brownian-bridge refinement tree of step `j`.
    /// Children of a node are keyed by [`bridge_child`], so a midpoint only
    /// depends on its position in the tree.
    pub(crate) fn bridge_key(&self, j: usize) -> u64 {
        splitmix(self.seed ^ splitmix(j as u64 + 0x5bd1_e995))
    }
}

pub(crate) fn bridge_child(key: u64, right: bool) -> u64 {
    splitmix(key ^ if right { 0x2545_f491_4f6c_dd1d } else { 0x6a09_e667_f3bc_c909 })
}

/// Standard normal draw determined by `key`.
pub(crate) fn keyed_normal(key: u64) -> f64 {
    StandardNormal.sample(&mut ChaCha8Rng::seed_from_u64(key))
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn validate(kappa: f64, horizon: f64, n_steps: usize) -> Result<()> {
    require_finite("kappa", kappa)?;
    require_finite("horizon", horizon)?;
    if kappa < 0.0 {
        return Err(param("kappa", format!("must be >= 0, got {kappa}")));
    }
    if horizon <= 0.0 {
        return Err(param("horizon", format!("must be > 0, got {horizon}")));
    }
    if n_steps == 0 {
        return Err(param("n_steps", "must be >= 1"));
    }
    Ok(())
}

fn brownian(kappa: f64, horizon: f64, n_steps: usize, seed: u64, start: f64) -> (Vec<f64>, Vec<f64>) {
    let dt = horizon / n_steps as f64;
    let sd = (kappa * dt).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut values = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    values.push(start);
    let mut w = start;
    for j in 1..=n_steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        w += sd * z;
        times.push(if j == n_steps { horizon } else { j as f64 * dt });
        values.push(w);
    }
    (times, values)
}

/// Chordal driving function `W_t = sqrt(kappa) B_t`, `W_0 = 0`.
pub fn sample_driving(kappa: f64, horizon: f64, n_steps: usize, seed: u64) -> Result<DrivingFunction> {
    validate(kappa, horizon, n_steps)?;
    let (times, values) = brownian(kappa, horizon, n_steps, seed, 0.0);
    Ok(DrivingFunction { times, values, kappa, seed, kind: LoewnerKind::Chordal })
}

/// Radial driving angle `theta_0 + sqrt(kappa) B_t` wrapped into `[0, 2 pi)`.
pub fn sample_radial_driving(
    kappa: f64,
    horizon: f64,
    n_steps: usize,
    seed: u64,
    initial_angle: f64,
) -> Result<DrivingFunction> {
    validate(kappa, horizon, n_steps)?;
    require_finite("initial_angle", initial_angle)?;
    let (times, mut values) = brownian(kappa, horizon, n_steps, seed, initial_angle);
    for v in &mut values {
        *v = v.rem_euclid(TAU);
    }
    Ok(DrivingFunction { times, values, kappa, seed, kind: LoewnerKind::Radial })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_kappa_is_constant() {
        let d = sample_driving(0.0, 1.0, 100, 7).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));
        assert_eq!(d.times.len(), 101);
        assert_eq!(d.times[100], 1.0);
    }

    #[test]
    fn same_seed_same_path() {
        let a = sample_driving(6.0, 1.0, 1000, 42).unwrap();
        let b = sample_driving(6.0, 1.0, 1000, 42).unwrap();
        assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = sample_driving(6.0, 1.0, 1000, 43).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(sample_driving(f64::NAN, 1.0, 10, 0).is_err());
        assert!(sample_driving(-1.0, 1.0, 10, 0).is_err());
        assert!(sample_driving(1.0, 0.0, 10, 0).is_err());
        assert!(sample_driving(1.0, 1.0, 0, 0).is_err());
        assert!(sample_driving(1.0, f64::INFINITY, 10, 0).is_err());
    }

    #[test]
    fn radial_angles_wrapped() {
        let d = sample_radial_driving(6.0, 2.0, 500, 3, 0.0).unwrap();
        assert!(d.values.iter().all(|&v| (0.0..TAU).contains(&v)));
        assert_eq!(d.values[0], 0.0);
    }
}
