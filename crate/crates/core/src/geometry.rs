//! Node placement, array responses and user mobility.
//!
//! Conventions: azimuth is measured in the horizontal plane from the positive
//! x axis, elevation from the horizontal plane. The BS ULA lies along the y
//! axis with broadside toward +x. The RIS UPA lies in the y-z plane, also with
//! broadside toward +x; its first axis (`nx` elements) is horizontal, its
//! second (`ny` elements) vertical, and element `(ix, iy)` sits at flat index
//! `ix * ny + iy`.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Position3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn distance(&self, other: &Position3) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }

    pub fn centroid(points: &[Position3]) -> Position3 {
        let n = points.len().max(1) as f64;
        let (sx, sy, sz) = points
            .iter()
            .fold((0.0, 0.0, 0.0), |(a, b, c), p| (a + p.x, b + p.y, c + p.z));
        Position3::new(sx / n, sy / n, sz / n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ArrayGeometry {
    Linear { n: usize, spacing: f64 },
    Planar { nx: usize, ny: usize, spacing: f64 },
}

impl ArrayGeometry {
    pub fn elements(&self) -> usize {
        match *self {
            ArrayGeometry::Linear { n, .. } => n,
            ArrayGeometry::Planar { nx, ny, .. } => nx * ny,
        }
    }

    /// Response toward a direction given as azimuth/elevation.
    pub fn response(&self, azimuth: f64, elevation: f64) -> Vec<C64> {
        match *self {
            ArrayGeometry::Linear { n, spacing } => {
                ula_from_cosine(azimuth.sin() * elevation.cos(), n, spacing)
            }
            ArrayGeometry::Planar { nx, ny, spacing } => {
                steering_upa(azimuth, elevation, nx, ny, spacing)
            }
        }
    }
}

/// Unit-norm ULA response for a direction cosine `u` along the array axis.
pub fn ula_from_cosine(u: f64, n: usize, spacing: f64) -> Vec<C64> {
    let scale = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|i| C64::from_polar(scale, TAU * spacing * i as f64 * u))
        .collect()
}

/// Unit-norm ULA response; element `i` has phase `2π·spacing·i·sin(angle)`.
pub fn steering_ula(angle: f64, n_elements: usize, spacing: f64) -> Vec<C64> {
    ula_from_cosine(angle.sin(), n_elements, spacing)
}

/// Unit-norm UPA response: `kron(a_h, a_v)` with a horizontal factor driven by
/// `sin(az)·cos(el)` and a vertical factor driven by `sin(el)`.
pub fn steering_upa(azimuth: f64, elevation: f64, nx: usize, ny: usize, spacing: f64) -> Vec<C64> {
    let horizontal = ula_from_cosine(azimuth.sin() * elevation.cos(), nx, spacing);
    let vertical = ula_from_cosine(elevation.sin(), ny, spacing);
    kron(&horizontal, &vertical)
}

/// Direction from `from` toward `to`: (azimuth in (-π, π], elevation, distance).
pub fn angles_between(from: &Position3, to: &Position3) -> Result<(f64, f64, f64)> {
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    let dz = to.z - from.z;
    let horizontal = dx.hypot(dy);
    let distance = horizontal.hypot(dz);
    if !(distance > 0.0) {
        return Err(Error::DegenerateGeometry(format!(
            "coincident points at ({}, {}, {})",
            from.x, from.y, from.z
        )));
    }
    let mut azimuth = dy.atan2(dx);
    if azimuth <= -PI {
        azimuth += TAU;
    }
    let elevation = dz.atan2(horizontal);
    Ok((azimuth, elevation, distance))
}

/// Rectangular area a ground user moves in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Area {
    pub fn contains(&self, p: &Position3) -> bool {
        (self.x[0]..=self.x[1]).contains(&p.x) && (self.y[0]..=self.y[1]).contains(&p.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityState {
    pub position: Position3,
    /// Current velocity, m/s. The z component stays zero for ground users.
    pub velocity: [f64; 3],
    /// Long-run mean velocity; its heading flips with the velocity at the area edge.
    pub mean_velocity: [f64; 3],
    pub memory: f64,
    /// Per-axis standard deviation of the stationary velocity fluctuation.
    pub speed_noise_std: f64,
    pub area: Area,
}

impl MobilityState {
    /// Ground user with a uniformly drawn heading at speed `mean_speed`.
    pub fn new<R: Rng + ?Sized>(
        position: Position3,
        mean_speed: f64,
        memory: f64,
        speed_noise_std: f64,
        area: Area,
        rng: &mut R,
    ) -> Self {
        let heading = rng.gen_range(-PI..PI);
        let mean_velocity = [mean_speed * heading.cos(), mean_speed * heading.sin(), 0.0];
        Self {
            position,
            velocity: mean_velocity,
            mean_velocity,
            memory,
            speed_noise_std,
            area,
        }
    }

    pub fn speed(&self) -> f64 {
        self.velocity[0].hypot(self.velocity[1])
    }
}

/// Reflect a coordinate into `[lo, hi]`; returns the position and whether the
/// direction of travel flipped.
fn reflect(mut x: f64, lo: f64, hi: f64) -> (f64, bool) {
    let mut flipped = false;
    for _ in 0..64 {
        if x > hi {
            x = 2.0 * hi - x;
        } else if x < lo {
            x = 2.0 * lo - x;
        } else {
            return (x, flipped);
        }
        flipped = !flipped;
    }
    (x.clamp(lo, hi), flipped)
}

/// One Gauss-Markov step of duration `dt`, with reflection at the area edge.
pub fn step_mobility<R: Rng + ?Sized>(
    state: &MobilityState,
    dt: f64,
    rng: &mut R,
) -> MobilityState {
    debug_assert!(dt > 0.0);
    let m = state.memory;
    let innovation = (1.0 - m * m).max(0.0).sqrt() * state.speed_noise_std;
    let mut next = *state;
    for axis in 0..2 {
        let noise: f64 = rng.sample(StandardNormal);
        next.velocity[axis] =
            m * state.velocity[axis] + (1.0 - m) * state.mean_velocity[axis] + innovation * noise;
    }
    next.velocity[2] = 0.0;

    let (x, fx) = reflect(
        state.position.x + next.velocity[0] * dt,
        state.area.x[0],
        state.area.x[1],
    );
    let (y, fy) = reflect(
        state.position.y + next.velocity[1] * dt,
        state.area.y[0],
        state.area.y[1],
    );
    if fx {
        next.velocity[0] = -next.velocity[0];
        next.mean_velocity[0] = -next.mean_velocity[0];
    }
    if fy {
        next.velocity[1] = -next.velocity[1];
        next.mean_velocity[1] = -next.mean_velocity[1];
    }
    next.position = Position3::new(x, y, state.position.z);
    next
}
