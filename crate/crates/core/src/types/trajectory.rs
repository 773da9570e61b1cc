use serde::{Deserialize, Serialize};

use super::{Pose, TypeError, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub time: f64,
    pub pose: Pose,
    pub gripper_closed: bool,
}

/// Uniformly sampled end-effector trajectory with a binary gripper channel.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    samples: Vec<TrajectorySample>,
    sample_rate: f64,
}

const SPACING_TOL: f64 = 1e-9;

impl Trajectory {
    pub fn new(samples: Vec<TrajectorySample>, sample_rate: f64) -> Result<Self, TypeError> {
        if samples.len() < 2 {
            return Err(TypeError::TooFewSamples(samples.len()));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(TypeError::BadSampleRate(sample_rate));
        }
        let dt = 1.0 / sample_rate;
        let t0 = samples[0].time;
        for (k, s) in samples.iter().enumerate() {
            if !s.time.is_finite() || !super::is_finite(&s.pose.position) {
                return Err(TypeError::NonFinite);
            }
            if k > 0 && s.time <= samples[k - 1].time {
                return Err(TypeError::NonMonotoneTime(k));
            }
            if (s.time - (t0 + k as f64 * dt)).abs() > SPACING_TOL {
                return Err(TypeError::NonUniformSpacing(k));
            }
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Builds a trajectory from poses and gripper flags starting at `t0`.
    pub fn from_poses(
        t0: f64,
        sample_rate: f64,
        poses: impl IntoIterator<Item = (Pose, bool)>,
    ) -> Result<Self, TypeError> {
        let dt = 1.0 / sample_rate;
        let samples = poses
            .into_iter()
            .enumerate()
            .map(|(k, (pose, gripper_closed))| TrajectorySample {
                time: t0 + k as f64 * dt,
                pose,
                gripper_closed,
            })
            .collect();
        Self::new(samples, sample_rate)
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> &TrajectorySample {
        &self.samples[0]
    }

    pub fn last(&self) -> &TrajectorySample {
        &self.samples[self.samples.len() - 1]
    }

    pub fn positions(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.samples.iter().map(|s| s.pose.position)
    }

    /// Recorded duration: sample count times the sample period.
    pub fn recorded_duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn path_length(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].pose.position - w[0].pose.position).norm())
            .sum()
    }
}

impl<'de> Deserialize<'de> for Trajectory {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            samples: Vec<TrajectorySample>,
            sample_rate: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        Trajectory::new(raw.samples, raw.sample_rate).map_err(serde::de::Error::custom)
    }
}
