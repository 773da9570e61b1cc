//! Discrete dynamic movement primitives.
//!
//! Each Cartesian dimension is an independent critically damped spring
//!
//! ```text
//! tau * dz = alpha_z * (beta_z * (g - y) - z) + f(x)
//! tau * dy = z
//! tau * dx = -alpha_x * x
//! f(x)     = (sum_i psi_i(x) w_i / sum_i psi_i(x)) * x * (g - y0)
//! psi_i(x) = exp(-h_i * (x - c_i)^2)
//! ```
//!
//! integrated with explicit Euler, 20 sub-steps per output sample. Weights are
//! fitted per basis function by locally weighted least squares against the
//! forcing term implied by a demonstration.

use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};

use crate::types::{Pose, Trajectory, TypeError, Vec3};

pub const DEFAULT_ALPHA_Z: f64 = 25.0;
pub const DEFAULT_BETA_Z: f64 = DEFAULT_ALPHA_Z / 4.0;
pub const DEFAULT_N_BASIS: usize = 30;

/// Canonical decay rate: the phase reaches 0.01 at `t = tau`.
pub fn default_alpha_x() -> f64 {
    100f64.ln()
}

/// Goal offsets smaller than this disable the forcing term of a dimension.
const GOAL_OFFSET_EPS: f64 = 1e-6;
/// Explicit Euler sub-steps per output sample.
const EULER_SUBSTEPS: usize = 20;
/// Demonstrations moving less than this in every dimension are treated as
/// stationary.
const DEGENERATE_PATH: f64 = 1e-6;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DmpError {
    #[error("demonstration needs at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("need at least 2 basis functions, got {0}")]
    TooFewBasis(usize),
    #[error("duration and rate must be positive (duration {duration}, rate {rate})")]
    BadTiming { duration: f64, rate: f64 },
    #[error("integration diverged at step {0}")]
    NonFiniteState(usize),
    #[error("invalid model: {0}")]
    InvalidModel(&'static str),
    #[error(transparent)]
    Trajectory(#[from] TypeError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmpDimension {
    pub y0: f64,
    pub g: f64,
    pub w: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

impl DmpDimension {
    fn forcing(&self, x: f64, scale: f64) -> f64 {
        if scale == 0.0 {
            return 0.0;
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for ((w, c), h) in self.w.iter().zip(&self.c).zip(&self.h) {
            let psi = (-h * (x - c).powi(2)).exp();
            num += psi * w;
            den += psi;
        }
        if den <= f64::MIN_POSITIVE {
            return 0.0;
        }
        num / den * x * scale
    }
}

/// A fitted movement primitive for the three Cartesian dimensions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DmpModel {
    pub alpha_z: f64,
    pub beta_z: f64,
    pub alpha_x: f64,
    pub n_basis: usize,
    pub tau: f64,
    pub demo_duration_s: f64,
    pub dims: Vec<DmpDimension>,
}

impl<'de> Deserialize<'de> for DmpModel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            alpha_z: f64,
            beta_z: f64,
            alpha_x: f64,
            n_basis: usize,
            tau: f64,
            demo_duration_s: f64,
            dims: Vec<DmpDimension>,
        }
        let r = Raw::deserialize(deserializer)?;
        let model = DmpModel {
            alpha_z: r.alpha_z,
            beta_z: r.beta_z,
            alpha_x: r.alpha_x,
            n_basis: r.n_basis,
            tau: r.tau,
            demo_duration_s: r.demo_duration_s,
            dims: r.dims,
        };
        model.validate().map_err(serde::de::Error::custom)?;
        Ok(model)
    }
}

/// Integration state of all three dimensions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DmpState {
    pub y: Vec3,
    pub y_dot: Vec3,
    pub y_ddot: Vec3,
    pub x: f64,
}

impl DmpState {
    pub fn at_rest(y: Vec3) -> Self {
        Self {
            y,
            y_dot: Vec3::zeros(),
            y_ddot: Vec3::zeros(),
            x: 1.0,
        }
    }
}

/// Basis centers spaced evenly in time, i.e. exponentially in phase, with
/// widths set from the gap to the next center.
pub fn basis(n_basis: usize, alpha_x: f64) -> (Vec<f64>, Vec<f64>) {
    let c: Vec<f64> = (0..n_basis)
        .map(|i| (-alpha_x * i as f64 / (n_basis - 1) as f64).exp())
        .collect();
    let mut h: Vec<f64> = c.windows(2).map(|p| 1.0 / (p[1] - p[0]).powi(2)).collect();
    h.push(*h.last().expect("n_basis >= 2"));
    (c, h)
}

/// Per-basis weighted least squares: `w_i = Σ s ψ_i f / Σ s² ψ_i`.
///
/// `scale[k]` is `x_k * (g - y0)` and `phase[k]` is `x_k`.
pub fn fit_weights(phase: &[f64], scale: &[f64], f_target: &[f64], c: &[f64], h: &[f64]) -> Vec<f64> {
    c.iter()
        .zip(h)
        .map(|(ci, hi)| {
            let mut num = 0.0;
            let mut den = 0.0;
            for ((x, s), f) in phase.iter().zip(scale).zip(f_target) {
                let psi = (-hi * (x - ci).powi(2)).exp();
                num += s * psi * f;
                den += s * s * psi;
            }
            if den > 1e-300 {
                num / den
            } else {
                0.0
            }
        })
        .collect()
}

/// Central differences inside, one-sided at the ends.
fn gradient(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|k| {
            if k == 0 {
                (values[1] - values[0]) / dt
            } else if k == n - 1 {
                (values[n - 1] - values[n - 2]) / dt
            } else {
                (values[k + 1] - values[k - 1]) / (2.0 * dt)
            }
        })
        .collect()
}

/// Fits a model to the positional channel of `demo`.
///
/// The time constant is the recorded demonstration duration (sample count
/// times sample period). A demonstration that does not move returns a model
/// with all weights zero.
pub fn fit(demo: &Trajectory, n_basis: usize) -> Result<DmpModel, DmpError> {
    if demo.len() < 3 {
        return Err(DmpError::TooFewSamples(demo.len()));
    }
    if n_basis < 2 {
        return Err(DmpError::TooFewBasis(n_basis));
    }
    let alpha_z = DEFAULT_ALPHA_Z;
    let beta_z = DEFAULT_BETA_Z;
    let alpha_x = default_alpha_x();
    let tau = demo.recorded_duration();
    let dt = 1.0 / demo.sample_rate();
    let t0 = demo.first().time;
    let phase: Vec<f64> = demo
        .samples()
        .iter()
        .map(|s| (-alpha_x * (s.time - t0) / tau).exp())
        .collect();
    let (c, h) = basis(n_basis, alpha_x);

    let positions: Vec<Vec3> = demo.positions().collect();
    let path_ranges: Vec<f64> = (0..3)
        .map(|d| {
            let (lo, hi) = positions
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[d]), hi.max(p[d])));
            hi - lo
        })
        .collect();
    let stationary = path_ranges.iter().all(|r| *r < DEGENERATE_PATH);

    let dims = (0..3)
        .map(|d| {
            let y: Vec<f64> = positions.iter().map(|p| p[d]).collect();
            let y0 = y[0];
            let g = *y.last().expect("non-empty");
            let offset = g - y0;
            let w = if stationary || offset.abs() < GOAL_OFFSET_EPS {
                vec![0.0; n_basis]
            } else {
                let yd = gradient(&y, dt);
                let ydd = gradient(&yd, dt);
                let f_target: Vec<f64> = (0..y.len())
                    .map(|k| tau * tau * ydd[k] - alpha_z * (beta_z * (g - y[k]) - tau * yd[k]))
                    .collect();
                let scale: Vec<f64> = phase.iter().map(|x| x * offset).collect();
                fit_weights(&phase, &scale, &f_target, &c, &h)
            };
            DmpDimension {
                y0,
                g,
                w,
                c: c.clone(),
                h: h.clone(),
            }
        })
        .collect();

    Ok(DmpModel {
        alpha_z,
        beta_z,
        alpha_x,
        n_basis,
        tau,
        demo_duration_s: tau,
        dims,
    })
}

impl DmpModel {
    /// Model with every weight zero: a pure critically damped attractor.
    pub fn zero(y0: Vec3, g: Vec3, n_basis: usize, duration: f64) -> Self {
        let alpha_x = default_alpha_x();
        let (c, h) = basis(n_basis, alpha_x);
        Self {
            alpha_z: DEFAULT_ALPHA_Z,
            beta_z: DEFAULT_BETA_Z,
            alpha_x,
            n_basis,
            tau: duration,
            demo_duration_s: duration,
            dims: (0..3)
                .map(|d| DmpDimension {
                    y0: y0[d],
                    g: g[d],
                    w: vec![0.0; n_basis],
                    c: c.clone(),
                    h: h.clone(),
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), DmpError> {
        if self.n_basis < 2 {
            return Err(DmpError::TooFewBasis(self.n_basis));
        }
        if self.dims.len() != 3 {
            return Err(DmpError::InvalidModel("expected 3 dimensions"));
        }
        if !(self.tau > 0.0 && self.demo_duration_s > 0.0) {
            return Err(DmpError::InvalidModel("tau must be positive"));
        }
        if (self.alpha_z - 4.0 * self.beta_z).abs() > 1e-9 * self.alpha_z.abs().max(1.0) {
            return Err(DmpError::InvalidModel("alpha_z must equal 4 beta_z"));
        }
        for d in &self.dims {
            if d.w.len() != self.n_basis || d.c.len() != self.n_basis || d.h.len() != self.n_basis {
                return Err(DmpError::InvalidModel("basis arrays must have n_basis entries"));
            }
            if d.h.iter().any(|h| h.is_nan() || *h <= 0.0) {
                return Err(DmpError::InvalidModel("basis widths must be positive"));
            }
        }
        Ok(())
    }

    pub fn start(&self) -> Vec3 {
        Vec3::new(self.dims[0].y0, self.dims[1].y0, self.dims[2].y0)
    }

    pub fn goal(&self) -> Vec3 {
        Vec3::new(self.dims[0].g, self.dims[1].g, self.dims[2].g)
    }

    /// Demonstrated net displacement `g - y0`.
    pub fn displacement(&self) -> Vec3 {
        self.goal() - self.start()
    }

    pub fn is_zero_forcing(&self) -> bool {
        self.dims.iter().all(|d| d.w.iter().all(|w| *w == 0.0))
    }

    /// Integrates `steps` Euler steps from `state`, returning the visited
    /// states including the initial one. `y0` is the origin used for the
    /// forcing-term amplitude `g - y0`.
    pub fn integrate(
        &self,
        state: DmpState,
        y0: Vec3,
        g: Vec3,
        tau: f64,
        rate: f64,
        steps: usize,
    ) -> Result<Vec<DmpState>, DmpError> {
        if !(tau > 0.0 && rate > 0.0) {
            return Err(DmpError::BadTiming { duration: tau, rate });
        }
        let dt = 1.0 / rate;
        let scale: Vec<f64> = (0..3)
            .map(|d| {
                let s = g[d] - y0[d];
                if s.abs() < GOAL_OFFSET_EPS {
                    0.0
                } else {
                    s
                }
            })
            .collect();
        let mut y = state.y;
        let mut z = state.y_dot * tau;
        let mut x = state.x;
        let mut out = Vec::with_capacity(steps + 1);
        let accel = |y: &Vec3, z: &Vec3, x: f64| -> Vec3 {
            let mut zd = Vec3::zeros();
            for d in 0..3 {
                let f = self.dims[d].forcing(x, scale[d]);
                zd[d] = (self.alpha_z * (self.beta_z * (g[d] - y[d]) - z[d]) + f) / tau;
            }
            zd
        };
        for k in 0..=steps {
            let zd = accel(&y, &z, x);
            let yd = z / tau;
            out.push(DmpState {
                y,
                y_dot: yd,
                y_ddot: zd / tau,
                x,
            });
            if k == steps {
                break;
            }
            let h = dt / EULER_SUBSTEPS as f64;
            for _ in 0..EULER_SUBSTEPS {
                let zd = accel(&y, &z, x);
                y += z / tau * h;
                z += zd * h;
                x += -self.alpha_x * x / tau * h;
            }
            if !(crate::types::is_finite(&y) && crate::types::is_finite(&z)) {
                return Err(DmpError::NonFiniteState(k + 1));
            }
        }
        Ok(out)
    }
}

/// Number of samples a rollout of `duration` seconds at `rate` Hz produces.
pub fn sample_count(duration: f64, rate: f64) -> usize {
    (duration * rate + 1e-9).floor() as usize + 1
}

/// Generates a trajectory from `y0` to `g` lasting `duration` seconds,
/// sampled at `rate`. Orientation stays at identity; see
/// [`rollout_pose`] for an orientation channel.
pub fn rollout(model: &DmpModel, y0: Vec3, g: Vec3, duration: f64, rate: f64) -> Result<Trajectory, DmpError> {
    rollout_pose(
        model,
        &Pose::from_position(y0),
        g,
        UnitQuaternion::identity(),
        duration,
        rate,
    )
}

/// Rollout whose orientation channel is a spherical interpolation from the
/// start orientation to `goal_orientation`.
pub fn rollout_pose(
    model: &DmpModel,
    start: &Pose,
    g: Vec3,
    goal_orientation: UnitQuaternion<f64>,
    duration: f64,
    rate: f64,
) -> Result<Trajectory, DmpError> {
    if !(duration > 0.0 && rate > 0.0 && duration.is_finite() && rate.is_finite()) {
        return Err(DmpError::BadTiming { duration, rate });
    }
    let n = sample_count(duration, rate);
    if n < 2 {
        return Err(DmpError::BadTiming { duration, rate });
    }
    let states = model.integrate(
        DmpState::at_rest(start.position),
        start.position,
        g,
        duration,
        rate,
        n - 1,
    )?;
    let poses = states.iter().enumerate().map(|(k, s)| {
        let t = k as f64 / (n - 1) as f64;
        let q = start.orientation.slerp(&goal_orientation, t);
        (Pose::new(s.y, q), false)
    });
    Ok(Trajectory::from_poses(0.0, rate, poses)?)
}

/// Resamples to `n` samples: linear in time and position, spherical in
/// orientation. Endpoints are copied exactly.
pub fn resample(traj: &Trajectory, n: usize) -> Result<Trajectory, DmpError> {
    if n < 2 {
        return Err(DmpError::TooFewSamples(n));
    }
    if n == traj.len() {
        return Ok(traj.clone());
    }
    let src = traj.samples();
    let m = src.len();
    let t0 = src[0].time;
    let span = src[m - 1].time - t0;
    let rate = (n - 1) as f64 / span;
    let poses = (0..n).map(|k| {
        if k == 0 {
            return (src[0].pose, src[0].gripper_closed);
        }
        if k == n - 1 {
            return (src[m - 1].pose, src[m - 1].gripper_closed);
        }
        let u = k as f64 * (m - 1) as f64 / (n - 1) as f64;
        let i = (u.floor() as usize).min(m - 2);
        let frac = u - i as f64;
        let a = &src[i];
        let b = &src[i + 1];
        let p = a.pose.position.lerp(&b.pose.position, frac);
        let q = a.pose.orientation.slerp(&b.pose.orientation, frac);
        (Pose::new(p, q), a.gripper_closed)
    });
    Ok(Trajectory::from_poses(t0, rate, poses)?)
}
