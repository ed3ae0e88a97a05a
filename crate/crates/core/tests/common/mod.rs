#![allow(dead_code)]

use std::path::PathBuf;

use geomech::scenario::{parse_scenario, Scenario, Setup};
use geomech::sim::Overrides;
use geomech::so3::{exp_so3, RotationMatrix, Vec3};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn scenario_path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(file)
}

pub fn load(file: &str) -> Scenario {
    let bytes = std::fs::read(scenario_path(file)).expect("shipped scenario readable");
    parse_scenario(&bytes).expect("shipped scenario parses")
}

pub fn setup(file: &str, overrides: Overrides) -> Setup {
    let mut s = load(file);
    overrides.apply(&mut s).expect("overrides apply");
    s.validate().expect("shipped scenario validates")
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn unit_vector(rng: &mut StdRng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Rotation with uniformly random axis and angle in `[0, max_angle)`.
pub fn rotation(rng: &mut StdRng, max_angle: f64) -> RotationMatrix {
    exp_so3(&(unit_vector(rng) * rng.random_range(0.0..max_angle)))
}

/// Largest value of `signal` over rows with `t` in `[t0, t1]`.
pub fn window_max(t: &[f64], signal: &[f64], t0: f64, t1: f64) -> f64 {
    t.iter()
        .zip(signal)
        .filter(|(&t, _)| t >= t0 - 1e-9 && t <= t1 + 1e-9)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest one-step increase of a sequence.
pub fn max_increase(values: &[f64]) -> f64 {
    values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
}
