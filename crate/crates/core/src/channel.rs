//! Hit statistics of a molecule released from a point source into a 3-D
//! drift-diffusion medium, observed by a passive (non-absorbing) sphere.
//!
//! The molecule starts at the origin at `t = 0`. After time `t` its position
//! is Gaussian with mean `drift * t` and per-axis variance `2 D t`. The
//! receiver counts a molecule if it lies inside the sphere at the sampling
//! instant. [`hit_probability`] evaluates the sphere mass with a two-level
//! Simpson rule: the x direction is integrated exactly (erf), the y
//! direction with 16 panels of width `radius / 8`, and the z direction with
//! one Simpson pair over the full diameter.

use std::f64::consts::PI;

use crate::model::{Hop, MolecularLinkConfig, Vector3};
use crate::special::{erf, erfc};

/// Arguments of a hit-probability evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitQuery {
    /// Receiver centre relative to the emitting node (m).
    pub offset: Vector3,
    /// Receiver radius (m).
    pub radius: f64,
    /// Diffusion coefficient (m²/s).
    pub diffusion: f64,
    /// Drift velocity of the medium (m/s).
    pub drift: Vector3,
    /// Sampling time after release (s).
    pub time: f64,
}

impl HitQuery {
    pub fn is_valid(&self) -> bool {
        self.radius > 0.0
            && self.diffusion > 0.0
            && self.time > 0.0
            && self.offset.is_finite()
            && self.drift.is_finite()
            && self.offset.norm() > self.radius
    }

    fn spread(&self) -> f64 {
        4.0 * self.diffusion * self.time
    }
}

/// Density of the molecule's position at `point`, where `point` is measured
/// from the receiver centre. Peaks at `drift * t - offset`.
pub fn hit_pdf(point: Vector3, q: &HitQuery) -> f64 {
    let spread = q.spread();
    let d = point + q.offset - q.drift * q.time;
    (-d.norm_sq() / spread).exp() / (PI * spread).powf(1.5)
}

/// Result of [`hit_probability`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitProbability {
    /// Value clamped into `[0, 1]`.
    pub value: f64,
    /// Unclamped Simpson estimate.
    pub raw: f64,
    /// Set when `raw` fell outside `[0, 1]`.
    pub clamped: bool,
}

/// `erf(hi) - erf(lo)` without cancellation when both arguments sit in the
/// same tail.
fn erf_diff(hi: f64, lo: f64) -> f64 {
    if lo > 0.0 {
        erfc(lo) - erfc(hi)
    } else if hi < 0.0 {
        erfc(-hi) - erfc(-lo)
    } else {
        erf(hi) - erf(lo)
    }
}

/// Probability that the molecule is inside the receiver sphere at `q.time`.
pub fn hit_probability(q: &HitQuery) -> HitProbability {
    debug_assert!(q.is_valid(), "invalid hit query {q:?}");
    let t = q.time;
    let r = q.radius;
    let spread = q.spread();
    let erf_scale = 2.0 * (q.diffusion * t).sqrt();
    let gx = q.offset.x - q.drift.x * t;
    let gy = q.offset.y - q.drift.y * t;
    let gz = q.offset.z - q.drift.z * t;

    // Exact x-integral over the chord at height `frac * r`, times the two
    // y-Gaussian samples at `±frac * r`.
    let slice = |frac: f64| -> f64 {
        let chord = (1.0 - frac * frac).sqrt() * r;
        let x_mass = erf_diff((chord + gx) / erf_scale, (-chord + gx) / erf_scale);
        let y_pair = (-(frac * r + gy).powi(2) / spread).exp()
            + (-(-frac * r + gy).powi(2) / spread).exp();
        y_pair * x_mass
    };

    let lambda: f64 = (0..4).map(|k| slice((2 * k + 1) as f64 / 8.0)).sum();
    let xi: f64 = (1..4).map(|k| slice(k as f64 / 4.0)).sum();
    let omega = (-(gy * gy) / spread).exp() * erf_diff((r + gx) / erf_scale, (-r + gx) / erf_scale);

    let raw = r * r / (144.0 * PI * q.diffusion * t)
        * (-(gz * gz) / spread).exp()
        * (4.0 * lambda + 2.0 * xi + 2.0 * omega);
    let value = raw.clamp(0.0, 1.0);
    HitProbability {
        value,
        raw,
        clamped: value != raw,
    }
}

/// The hit query for one hop of the relay chain, sampled at half the
/// molecular symbol duration.
pub fn hop_query(link: &MolecularLinkConfig, hop: Hop) -> HitQuery {
    let time = link.t_dmc / 2.0;
    match hop {
        Hop::TransmitterToRelay => HitQuery {
            offset: link.relay_pos,
            radius: link.relay_radius,
            diffusion: link.diffusion_a,
            drift: link.drift,
            time,
        },
        Hop::RelayToDestination => HitQuery {
            offset: link.dest_pos - link.relay_pos,
            radius: link.dest_radius,
            diffusion: link.diffusion_b,
            drift: link.drift,
            time,
        },
    }
}

pub fn hop_hit_probability(link: &MolecularLinkConfig, hop: Hop) -> HitProbability {
    hit_probability(&hop_query(link, hop))
}
