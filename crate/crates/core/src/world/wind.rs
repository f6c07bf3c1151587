use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

/// Gusts arrive as a Poisson process; each lasts an exponential time during
/// which every camera frame is lost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindParams {
    /// Gust arrivals per second of calm.
    pub rate: f64,
    /// Mean gust duration in seconds.
    pub mean_duration: f64,
}

impl Default for WindParams {
    fn default() -> Self {
        Self {
            rate: 1.0 / 60.0,
            mean_duration: 5.0,
        }
    }
}

impl WindParams {
    pub fn calm() -> Self {
        Self {
            rate: 0.0,
            mean_duration: 0.0,
        }
    }

    /// Long-run fraction of time a gust is active.
    pub fn active_fraction(&self) -> f64 {
        if self.rate <= 0.0 || self.mean_duration <= 0.0 {
            0.0
        } else if self.rate.is_infinite() {
            1.0
        } else {
            self.mean_duration / (1.0 / self.rate + self.mean_duration)
        }
    }
}

/// Alternating calm/gust renewal process queried at non-decreasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct WindProcess {
    params: WindParams,
    active: bool,
    next_switch: f64,
}

fn exp_sample<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    if mean <= 0.0 {
        0.0
    } else if mean.is_infinite() {
        f64::INFINITY
    } else {
        Exp::new(1.0 / mean).map(|d| d.sample(rng)).unwrap_or(0.0)
    }
}

impl WindProcess {
    pub fn new<R: Rng + ?Sized>(params: WindParams, rng: &mut R) -> Self {
        let mut w = Self {
            params,
            active: false,
            next_switch: 0.0,
        };
        w.next_switch = w.calm_duration(rng);
        w
    }

    fn calm_duration<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.params.rate <= 0.0 || self.params.mean_duration <= 0.0 {
            f64::INFINITY
        } else {
            exp_sample(1.0 / self.params.rate, rng)
        }
    }

    /// Whether a gust is active at time `t`. Calls must use non-decreasing `t`.
    pub fn active_at<R: Rng + ?Sized>(&mut self, t: f64, rng: &mut R) -> bool {
        if self.params.rate.is_infinite() && self.params.mean_duration > 0.0 {
            return true;
        }
        while t >= self.next_switch {
            self.active = !self.active;
            let span = if self.active {
                exp_sample(self.params.mean_duration, rng)
            } else {
                self.calm_duration(rng)
            };
            self.next_switch += span;
        }
        self.active
    }
}
