use rand::Rng;
use serde::{Deserialize, Serialize};

/// Unweighted particle approximation of a belief. Weights are implicitly
/// uniform; updates resample instead of reweighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleBelief<S> {
    particles: Vec<S>,
}

impl<S> Default for ParticleBelief<S> {
    fn default() -> Self {
        Self { particles: Vec::new() }
    }
}

impl<S> ParticleBelief<S> {
    pub fn new(particles: Vec<S>) -> Self {
        Self { particles }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[S] {
        &self.particles
    }

    pub fn into_particles(self) -> Vec<S> {
        self.particles
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<&S> {
        if self.particles.is_empty() {
            None
        } else {
            Some(&self.particles[rng.random_range(0..self.particles.len())])
        }
    }

    /// Fraction of particles satisfying `pred`.
    pub fn mass<F: Fn(&S) -> bool>(&self, pred: F) -> f64 {
        if self.particles.is_empty() {
            return 0.0;
        }
        self.particles.iter().filter(|p| pred(p)).count() as f64 / self.particles.len() as f64
    }
}
