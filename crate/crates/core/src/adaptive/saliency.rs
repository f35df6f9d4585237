//! Bottom-up saliency: exponential decay, motion impulse and pointing impulse.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaliencyParams {
    /// Decay rate, 1/s.
    pub lambda: f64,
    /// Gain per m/s of speed.
    pub k_velocity: f64,
    /// Impulse when the partner points at the entity.
    pub k_point: f64,
}

impl Default for SaliencyParams {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            k_velocity: 0.2,
            k_point: 0.5,
        }
    }
}

impl SaliencyParams {
    pub fn update(&self, s: f64, speed: f64, pointed: bool, dt: f64) -> f64 {
        let impulse = self.k_velocity * speed.abs() + if pointed { self.k_point } else { 0.0 };
        (s * (-self.lambda * dt).exp() + impulse).clamp(0.0, 1.0)
    }
}

pub fn speed(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_decay_goes_to_zero() {
        let p = SaliencyParams::default();
        let mut s = 1.0;
        for _ in 0..100 {
            let next = p.update(s, 0.0, false, 0.1);
            assert!(next <= s);
            s = next;
        }
        assert!((s - (-5.0f64).exp()).abs() < 1e-9);
        assert!(s < 0.01);
    }

    #[test]
    fn point_adds_impulse() {
        let p = SaliencyParams::default();
        let s = p.update(0.0, 0.0, true, 0.1);
        assert!((s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn clamps_at_one() {
        let p = SaliencyParams::default();
        assert_eq!(p.update(0.9, 0.0, true, 0.1), 1.0);
        assert_eq!(p.update(0.0, 100.0, false, 0.1), 1.0);
    }

    #[test]
    fn speed_is_euclidean() {
        assert!((speed([3.0, 4.0]) - 5.0).abs() < 1e-12);
    }
}
