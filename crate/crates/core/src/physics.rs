//! Planar frictionless rigid body pushed at two contact points.
//!
//! Push commands are timed force windows in the debris body frame. Within an
//! integration step each push contributes its force weighted by the fraction
//! of the step its window covers, so impulses are exact even when windows
//! start or end between grid points.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mothership::MissionParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RigidBody2D {
    pub mass_kg: f64,
    pub inertia_kgm2: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl RigidBody2D {
    pub fn at_rest(mass_kg: f64, inertia_kgm2: f64) -> Self {
        Self { mass_kg, inertia_kgm2, x: 0.0, y: 0.0, theta: 0.0, vx: 0.0, vy: 0.0, omega: 0.0 }
    }

    fn is_finite(&self) -> bool {
        [self.x, self.y, self.theta, self.vx, self.vy, self.omega].iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PushCommand {
    /// Contact point in the body frame, m.
    pub body_point: [f64; 2],
    pub force_n: f64,
    /// Unit push direction in the body frame.
    pub direction: [f64; 2],
    /// Window start on the global timeline.
    pub start_ms: f64,
    pub duration_ms: f64,
}

impl PushCommand {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        let norm = self.direction[0].hypot(self.direction[1]);
        if (norm - 1.0).abs() > 1e-12 {
            return Err(PhysicsError::Invalid(format!("push direction must be a unit vector, |d| = {norm}")));
        }
        if !(self.force_n >= 0.0) || !(self.duration_ms > 0.0) || !self.start_ms.is_finite() {
            return Err(PhysicsError::Invalid(format!("push needs force >= 0 and duration > 0: {self:?}")));
        }
        Ok(())
    }

    fn end_ms(&self) -> f64 {
        self.start_ms + self.duration_ms
    }

    /// Fraction of `[t0, t1)` covered by the push window.
    fn coverage(&self, t0: f64, t1: f64) -> f64 {
        let overlap = (t1.min(self.end_ms()) - t0.max(self.start_ms)).max(0.0);
        overlap / (t1 - t0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhysicsError {
    #[error("invalid physics input: {0}")]
    Invalid(String),
    #[error("state became non-finite at t = {t_ms} ms")]
    NonFinite { t_ms: f64 },
    #[error("push geometry is not mirror-symmetric: {0}")]
    Asymmetric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t_ms: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub debris: RigidBody2D,
    pub active_pushes: Vec<(PushCommand, String)>,
    pub dt_ms: f64,
    pub t_ms: f64,
    /// Largest |omega| seen after any step.
    pub peak_omega: f64,
    steps: u64,
}

impl WorldState {
    pub fn new(debris: RigidBody2D, dt_ms: f64) -> Result<Self, PhysicsError> {
        if !(dt_ms > 0.0) {
            return Err(PhysicsError::Invalid(format!("dt must be positive, got {dt_ms}")));
        }
        if !(debris.mass_kg > 0.0 && debris.inertia_kgm2 > 0.0) || !debris.is_finite() {
            return Err(PhysicsError::Invalid(format!("bad debris body: {debris:?}")));
        }
        Ok(Self { debris, active_pushes: Vec::new(), dt_ms, t_ms: 0.0, peak_omega: 0.0, steps: 0 })
    }

    pub fn add_push(&mut self, push: PushCommand, issuer: &str) -> Result<(), PhysicsError> {
        push.validate()?;
        self.active_pushes.push((push, issuer.to_string()));
        Ok(())
    }

    pub fn sample(&self) -> TrajectorySample {
        let b = &self.debris;
        TrajectorySample { t_ms: self.t_ms, x: b.x, y: b.y, theta: b.theta, vx: b.vx, vy: b.vy, omega: b.omega }
    }

    /// Net world-frame force and torque averaged over `[t0, t1)`.
    fn wrench(&self, t0: f64, t1: f64) -> (f64, f64, f64) {
        let (s, c) = self.debris.theta.sin_cos();
        let rot = |v: [f64; 2]| [c * v[0] - s * v[1], s * v[0] + c * v[1]];
        let (mut fx, mut fy, mut tau) = (0.0, 0.0, 0.0);
        for (p, _) in &self.active_pushes {
            let w = p.coverage(t0, t1);
            if w == 0.0 {
                continue;
            }
            let d = rot(p.direction);
            let r = rot(p.body_point);
            let (px, py) = (w * p.force_n * d[0], w * p.force_n * d[1]);
            fx += px;
            fy += py;
            tau += r[0] * py - r[1] * px;
        }
        (fx, fy, tau)
    }

    /// One semi-implicit Euler step of `dt_ms`.
    pub fn step(&mut self) -> Result<(), PhysicsError> {
        let t0 = self.t_ms;
        let t1 = self.steps as f64 * self.dt_ms + self.dt_ms;
        let (fx, fy, tau) = self.wrench(t0, t1);
        let dt = (t1 - t0) / 1000.0;
        let b = &mut self.debris;
        b.vx += fx / b.mass_kg * dt;
        b.vy += fy / b.mass_kg * dt;
        b.omega += tau / b.inertia_kgm2 * dt;
        b.x += b.vx * dt;
        b.y += b.vy * dt;
        b.theta += b.omega * dt;
        self.steps += 1;
        self.t_ms = t1;
        self.peak_omega = self.peak_omega.max(self.debris.omega.abs());
        if !self.debris.is_finite() {
            return Err(PhysicsError::NonFinite { t_ms: t1 });
        }
        Ok(())
    }

    /// Takes every whole step that ends at or before `t_ms`, recording a
    /// sample whenever the step count is a multiple of `sample_every`.
    pub fn advance_to(&mut self, t_ms: f64, sample_every: u64, out: &mut Vec<TrajectorySample>) -> Result<(), PhysicsError> {
        while self.t_ms + self.dt_ms <= t_ms + 1e-9 {
            self.step()?;
            if sample_every > 0 && self.steps.is_multiple_of(sample_every) {
                out.push(self.sample());
            }
        }
        Ok(())
    }

    pub fn pushes_end_ms(&self) -> f64 {
        self.active_pushes.iter().map(|(p, _)| p.end_ms()).fold(0.0, f64::max)
    }
}

/// Debris and contact layout for the two-push scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Geometry {
    pub mass_kg: f64,
    pub inertia_kgm2: f64,
    pub master_contact: [f64; 2],
    pub slave_contact: [f64; 2],
    /// Push direction for both free-flyers, body frame.
    pub direction: [f64; 2],
    /// Force at 100 % motor speed.
    pub f_max_n: f64,
    pub dt_ms: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            mass_kg: 12.0,
            inertia_kgm2: 0.1,
            master_contact: [0.0, 0.11],
            slave_contact: [0.0, -0.11],
            direction: [1.0, 0.0],
            f_max_n: 0.5,
            dt_ms: 1.0,
        }
    }
}

impl Geometry {
    pub fn force_n(&self, params: &MissionParams) -> f64 {
        params.motor_speed as f64 / 100.0 * self.f_max_n
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        if !(self.f_max_n >= 0.0) {
            return Err(PhysicsError::Invalid(format!("f_max_n must be >= 0, got {}", self.f_max_n)));
        }
        WorldState::new(RigidBody2D::at_rest(self.mass_kg, self.inertia_kgm2), self.dt_ms)?;
        Ok(())
    }

    /// The slave contact must be the master contact reflected across the
    /// push line through the centre of mass.
    pub fn check_mirror(&self) -> Result<(), PhysicsError> {
        let d = self.direction;
        let m = self.master_contact;
        let along = m[0] * d[0] + m[1] * d[1];
        let mirrored = [2.0 * along * d[0] - m[0], 2.0 * along * d[1] - m[1]];
        let err = (mirrored[0] - self.slave_contact[0]).hypot(mirrored[1] - self.slave_contact[1]);
        if err > 1e-12 {
            return Err(PhysicsError::Asymmetric(format!("slave contact {:?}, mirror of master is {mirrored:?}", self.slave_contact)));
        }
        Ok(())
    }

    pub fn push(&self, contact: [f64; 2], force_n: f64, start_ms: f64, duration_ms: f64) -> PushCommand {
        PushCommand { body_point: contact, force_n, direction: self.direction, start_ms, duration_ms }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PushOutcome {
    pub final_pose: TrajectorySample,
    pub peak_omega: f64,
    pub trajectory: Vec<TrajectorySample>,
}

/// Runs both timed pushes from rest. Each push starts at `start_ms` plus its
/// offset; the run continues `settle_ms` past the last push.
pub fn run_push_scenario(
    params: &MissionParams,
    offsets_ms: (f64, f64),
    geometry: &Geometry,
    start_ms: f64,
    settle_ms: f64,
) -> Result<PushOutcome, PhysicsError> {
    geometry.check_mirror()?;
    geometry.validate()?;
    let f = geometry.force_n(params);
    let len = params.mission_length_ms as f64;
    let mut w = WorldState::new(RigidBody2D::at_rest(geometry.mass_kg, geometry.inertia_kgm2), geometry.dt_ms)?;
    w.add_push(geometry.push(geometry.master_contact, f, start_ms + offsets_ms.0, len), "master")?;
    w.add_push(geometry.push(geometry.slave_contact, f, start_ms + offsets_ms.1, len), "slave")?;
    let t_end = w.pushes_end_ms() + settle_ms;
    let mut trajectory = vec![w.sample()];
    while w.t_ms + 1e-9 < t_end {
        w.step()?;
        trajectory.push(w.sample());
    }
    Ok(PushOutcome { final_pose: w.sample(), peak_omega: w.peak_omega, trajectory })
}

pub fn write_trajectory_csv<W: Write>(samples: &[TrajectorySample], w: W) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    for s in samples {
        wr.serialize(s)?;
    }
    wr.flush()?;
    Ok(())
}
