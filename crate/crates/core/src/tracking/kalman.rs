//! Constant-acceleration Kalman filter on image positions.
//!
//! State `(row, col, v_row, v_col, a_row, a_col)`, one-frame time step,
//! position-only measurements.

use nalgebra::{Matrix2, SMatrix, SVector, Vector2};

use crate::error::{Error, Result};

pub type State = SVector<f64, 6>;
pub type Covariance = SMatrix<f64, 6, 6>;

const INITIAL_VELOCITY_VAR: f64 = 25.0;
const INITIAL_ACCEL_VAR: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanCA {
    pub state: State,
    pub covariance: Covariance,
    /// Process noise scale (variance of the per-frame acceleration change).
    pub q: f64,
    /// Measurement noise variance, pixels².
    pub r: f64,
}

fn transition() -> Covariance {
    let mut f = Covariance::identity();
    for axis in 0..2 {
        f[(axis, 2 + axis)] = 1.0;
        f[(axis, 4 + axis)] = 0.5;
        f[(2 + axis, 4 + axis)] = 1.0;
    }
    f
}

fn process_noise(q: f64) -> Covariance {
    let g = [0.5, 1.0, 1.0];
    let mut m = Covariance::zeros();
    for axis in 0..2 {
        for i in 0..3 {
            for j in 0..3 {
                m[(2 * i + axis, 2 * j + axis)] = q * g[i] * g[j];
            }
        }
    }
    m
}

fn symmetrize(p: &Covariance) -> Covariance {
    (p + p.transpose()) * 0.5
}

impl KalmanCA {
    /// Filter at rest at `(row, col)` with position variance `r` and inflated
    /// velocity/acceleration variances.
    pub fn new(row: f64, col: f64, q: f64, r: f64) -> Result<Self> {
        if !(q >= 0.0 && q.is_finite() && r > 0.0 && r.is_finite()) {
            return Err(Error::invalid("Kalman filter", "need q >= 0 and r > 0"));
        }
        let mut state = State::zeros();
        state[0] = row;
        state[1] = col;
        let covariance = Covariance::from_diagonal(&SVector::from([
            r,
            r,
            INITIAL_VELOCITY_VAR,
            INITIAL_VELOCITY_VAR,
            INITIAL_ACCEL_VAR,
            INITIAL_ACCEL_VAR,
        ]));
        Ok(Self { state, covariance, q, r })
    }

    pub fn with_state(state: State, covariance: Covariance, q: f64, r: f64) -> Self {
        Self { state, covariance, q, r }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.state[0], self.state[1])
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.state[2], self.state[3])
    }

    pub fn predict(&self) -> KalmanCA {
        let f = transition();
        let p = f * self.covariance * f.transpose() + process_noise(self.q);
        KalmanCA {
            state: f * self.state,
            covariance: symmetrize(&p),
            q: self.q,
            r: self.r,
        }
    }

    /// Joseph-form update with a position measurement.
    pub fn update(&self, measurement: (f64, f64)) -> Result<KalmanCA> {
        let mut h = SMatrix::<f64, 2, 6>::zeros();
        h[(0, 0)] = 1.0;
        h[(1, 1)] = 1.0;
        let r = Matrix2::identity() * self.r;
        let s = h * self.covariance * h.transpose() + r;
        let s_inv = s.cholesky().ok_or(Error::SingularInnovation)?.inverse();
        let k = self.covariance * h.transpose() * s_inv;
        let z = Vector2::new(measurement.0, measurement.1);
        let innovation = z - h * self.state;
        let ikh = Covariance::identity() - k * h;
        let p = ikh * self.covariance * ikh.transpose() + k * r * k.transpose();
        Ok(KalmanCA {
            state: self.state + k * innovation,
            covariance: symmetrize(&p),
            q: self.q,
            r: self.r,
        })
    }

    pub fn covariance_is_spd(&self) -> bool {
        let p = &self.covariance;
        let asym = (p - p.transpose()).abs().max();
        asym <= 1e-9 && p.cholesky().is_some()
    }
}

pub fn kalman_predict(k: &KalmanCA) -> KalmanCA {
    k.predict()
}

pub fn kalman_update(k: &KalmanCA, measurement: (f64, f64)) -> Result<KalmanCA> {
    k.update(measurement)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predict_moves_by_velocity() {
        let mut state = State::zeros();
        state[2] = 1.0;
        let k = KalmanCA::with_state(state, Covariance::identity(), 0.01, 1.0).predict();
        assert_eq!(k.position(), (1.0, 0.0));
        assert_eq!(k.velocity(), (1.0, 0.0));
    }

    #[test]
    fn predict_applies_acceleration() {
        let mut state = State::zeros();
        state[4] = 2.0;
        let k = KalmanCA::with_state(state, Covariance::identity(), 0.01, 1.0).predict();
        assert_eq!(k.position(), (1.0, 0.0));
        assert_eq!(k.velocity(), (2.0, 0.0));
    }

    #[test]
    fn zero_innovation_keeps_position() {
        let mut state = State::zeros();
        state[0] = 3.0;
        state[1] = -2.0;
        state[3] = 0.5;
        let k = KalmanCA::with_state(state, Covariance::identity() * 2.0, 0.01, 1.0).predict();
        let pos = k.position();
        let u = k.update(pos).unwrap();
        assert!((u.position().0 - pos.0).abs() < 1e-12);
        assert!((u.position().1 - pos.1).abs() < 1e-12);
    }

    #[test]
    fn tracks_unit_acceleration() {
        let mut k = KalmanCA::new(0.0, 0.0, 1e-2, 1.0).unwrap();
        for t in 1..=20 {
            k = k.predict();
            let p = (t as f64).powi(2) / 2.0;
            k = k.update((p, 0.0)).unwrap();
        }
        assert!((k.position().0 - 200.0).abs() < 0.5);
        assert!(k.covariance_is_spd());
    }

    #[test]
    fn rejects_bad_noise() {
        assert!(KalmanCA::new(0.0, 0.0, 0.01, 0.0).is_err());
        assert!(KalmanCA::new(0.0, 0.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn singular_innovation_is_an_error() {
        let k = KalmanCA::with_state(State::zeros(), Covariance::zeros(), 0.0, 0.0);
        assert!(matches!(k.update((1.0, 1.0)), Err(Error::SingularInnovation)));
    }
}
