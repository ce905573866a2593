//! The adversary's joint posterior over `(secret, useful)` and the
//! belief-MDP transition built on it.

use log::warn;

use crate::error::{Error, Result};
use crate::model::ObservationModel;

/// Tolerance on the total mass of a belief.
pub const BELIEF_TOL: f64 = 1e-10;

/// Mass drift on an incoming belief that is worth a diagnostic.
const DRIFT_WARN: f64 = 1e-6;

/// Joint probability table `β(s, u)`, stored row-major `[s][u]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    n_secret: usize,
    n_useful: usize,
    p: Vec<f64>,
}

impl Belief {
    pub fn new(n_secret: usize, n_useful: usize, p: Vec<f64>) -> Result<Self> {
        if p.len() != n_secret * n_useful || p.is_empty() {
            return Err(Error::ShapeMismatch {
                expected: n_secret * n_useful,
                actual: p.len(),
            });
        }
        if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::config("belief entries must be finite and non-negative"));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > BELIEF_TOL {
            return Err(Error::config(format!("belief sums to {sum}, expected 1")));
        }
        Ok(Self { n_secret, n_useful, p })
    }

    pub fn uniform(n_secret: usize, n_useful: usize) -> Self {
        let n = n_secret * n_useful;
        Self {
            n_secret,
            n_useful,
            p: vec![1.0 / n as f64; n],
        }
    }

    /// The model's prior as a belief.
    pub fn prior(model: &ObservationModel) -> Self {
        let spec = model.spec();
        Self {
            n_secret: spec.n_secret,
            n_useful: spec.n_useful,
            p: model.prior().to_vec(),
        }
    }

    pub fn point_mass(n_secret: usize, n_useful: usize, secret: usize, useful: usize) -> Self {
        let mut p = vec![0.0; n_secret * n_useful];
        p[secret * n_useful + useful] = 1.0;
        Self { n_secret, n_useful, p }
    }

    pub fn n_secret(&self) -> usize {
        self.n_secret
    }

    pub fn n_useful(&self) -> usize {
        self.n_useful
    }

    #[inline]
    pub fn get(&self, secret: usize, useful: usize) -> f64 {
        self.p[secret * self.n_useful + useful]
    }

    /// Row-major flattening, the network input layout.
    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    /// `β(s) = Σ_u β(s, u)`.
    pub fn marginal_secret(&self) -> Vec<f64> {
        self.p.chunks(self.n_useful).map(|row| row.iter().sum()).collect()
    }

    /// `β(u) = Σ_s β(s, u)`.
    pub fn marginal_useful(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_useful];
        for row in self.p.chunks(self.n_useful) {
            for (o, &x) in out.iter_mut().zip(row) {
                *o += x;
            }
        }
        out
    }

    pub fn max_secret(&self) -> f64 {
        self.p
            .chunks(self.n_useful)
            .map(|row| row.iter().sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_useful(&self) -> f64 {
        self.marginal_useful().into_iter().fold(0.0, f64::max)
    }

    /// Whether the confidence on some secret has reached `ls`.
    pub fn reaches(&self, ls: f64) -> bool {
        self.max_secret() >= ls
    }

    /// Bayes' rule for one released symbol:
    /// `β'(s,u) ∝ q(z | a, s, u) β(s, u)`.
    ///
    /// The action probability multiplies numerator and denominator alike, so
    /// it is not an input.
    pub fn bayes_update(&self, action: usize, observation: usize, model: &ObservationModel) -> Result<Belief> {
        let spec = model.spec();
        if self.n_secret != spec.n_secret || self.n_useful != spec.n_useful {
            return Err(Error::ShapeMismatch {
                expected: spec.n_hypotheses(),
                actual: self.p.len(),
            });
        }
        if action >= spec.n_actions || observation >= spec.n_obs {
            return Err(Error::config(format!(
                "action {action} or observation {observation} out of range"
            )));
        }
        let mass: f64 = self.p.iter().sum();
        if (mass - 1.0).abs() > DRIFT_WARN {
            warn!("belief mass drifted to {mass} before update");
        }
        let mut post = Vec::with_capacity(self.p.len());
        for s in 0..self.n_secret {
            for u in 0..self.n_useful {
                post.push(model.q(action, s, u, observation) * self.get(s, u));
            }
        }
        let evidence: f64 = post.iter().sum();
        if !(evidence > 0.0) {
            return Err(Error::ImpossibleObservation { action, observation });
        }
        post.iter_mut().for_each(|x| *x /= evidence);
        let total: f64 = post.iter().sum();
        post.iter_mut().for_each(|x| *x /= total);
        Ok(Belief {
            n_secret: self.n_secret,
            n_useful: self.n_useful,
            p: post,
        })
    }
}

/// Belief-MDP state: a live belief or the absorbing final state.
#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Belief(Belief),
    Final,
}

impl State {
    pub fn belief(&self) -> Option<&Belief> {
        match self {
            State::Belief(b) => Some(b),
            State::Final => None,
        }
    }

    /// True for `F` and for beliefs whose secret confidence has reached `ls`.
    pub fn is_final(&self, ls: f64) -> bool {
        match self {
            State::Final => true,
            State::Belief(b) => b.reaches(ls),
        }
    }
}

/// The Bayes operator: `F` stays `F`, a belief at or above `ls` is absorbed
/// into `F` without updating, anything else is updated by Bayes' rule.
pub fn apply_bayes_operator(
    state: &State,
    action: usize,
    observation: usize,
    model: &ObservationModel,
    ls: f64,
) -> Result<State> {
    match state {
        State::Final => Ok(State::Final),
        State::Belief(b) if b.reaches(ls) => Ok(State::Final),
        State::Belief(b) => Ok(State::Belief(b.bayes_update(action, observation, model)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;

    fn two_by_two_model() -> ObservationModel {
        // z = 0 likelihoods [0.5, 0.5, 0.25, 0.25] over (s,u) in lexicographic order
        let spec = ModelSpec::new(2, 2, 1, 2).unwrap();
        ObservationModel::from_fn(spec, |_, s, _, z| {
            let p0 = if s == 0 { 0.5 } else { 0.25 };
            if z == 0 {
                p0
            } else {
                1.0 - p0
            }
        })
        .unwrap()
    }

    #[test]
    fn hand_computed_update() {
        let model = two_by_two_model();
        let post = Belief::uniform(2, 2).bayes_update(0, 0, &model).unwrap();
        let expected = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0];
        for (x, e) in post.as_slice().iter().zip(expected) {
            assert!((x - e).abs() < 1e-15);
        }
    }

    #[test]
    fn uninformative_likelihood_leaves_belief_unchanged() {
        let spec = ModelSpec::new(2, 3, 2, 4).unwrap();
        let model = ObservationModel::from_fn(spec, |_, _, _, _| 0.25).unwrap();
        let b = Belief::new(2, 3, vec![0.1, 0.2, 0.05, 0.3, 0.15, 0.2]).unwrap();
        let post = b.bayes_update(1, 2, &model).unwrap();
        for (x, y) in post.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn point_mass_is_absorbing() {
        let model = two_by_two_model();
        let b = Belief::point_mass(2, 2, 1, 0);
        assert_eq!(b.bayes_update(0, 1, &model).unwrap(), b);
    }

    #[test]
    fn impossible_observation_is_an_error() {
        let spec = ModelSpec::new(2, 1, 1, 2).unwrap();
        let model = ObservationModel::from_fn(spec, |_, s, _, z| if s == z { 1.0 } else { 0.0 }).unwrap();
        let b = Belief::point_mass(2, 1, 0, 0);
        assert!(matches!(
            b.bayes_update(0, 1, &model),
            Err(Error::ImpossibleObservation { action: 0, observation: 1 })
        ));
    }

    #[test]
    fn marginals() {
        let b = Belief::new(2, 2, vec![0.2, 0.1, 0.3, 0.4]).unwrap();
        let ms = b.marginal_secret();
        let mu = b.marginal_useful();
        assert!((ms[0] - 0.3).abs() < 1e-15 && (ms[1] - 0.7).abs() < 1e-15);
        assert!((mu[0] - 0.5).abs() < 1e-15 && (mu[1] - 0.5).abs() < 1e-15);
        let u = Belief::uniform(3, 3).marginal_secret();
        assert!(u.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn operator_cases() {
        let model = two_by_two_model();
        assert_eq!(apply_bayes_operator(&State::Final, 0, 0, &model, 0.8).unwrap(), State::Final);

        let high = State::Belief(Belief::new(2, 2, vec![0.45, 0.40, 0.10, 0.05]).unwrap());
        assert_eq!(apply_bayes_operator(&high, 0, 0, &model, 0.8).unwrap(), State::Final);

        let low_belief = Belief::new(2, 2, vec![0.40, 0.35, 0.15, 0.10]).unwrap();
        let low = State::Belief(low_belief.clone());
        let expected = low_belief.bayes_update(0, 0, &model).unwrap();
        assert_eq!(apply_bayes_operator(&low, 0, 0, &model, 0.8).unwrap(), State::Belief(expected));
    }

    #[test]
    fn finality() {
        let u = State::Belief(Belief::uniform(3, 3));
        assert!(!u.is_final(0.65));
        assert!(u.is_final(0.3));
        assert!(State::Final.is_final(0.99));
    }

    #[test]
    fn rejects_unnormalized_belief() {
        assert!(Belief::new(2, 2, vec![0.25, 0.25, 0.25, 0.2]).is_err());
        assert!(Belief::new(2, 2, vec![0.5, 0.5, -0.25, 0.25]).is_err());
        assert!(Belief::new(2, 2, vec![0.5, 0.5]).is_err());
    }
}
