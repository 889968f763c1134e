//! Brownian-dynamics particle simulation used as an empirical check of the
//! analytic channel and link results.
//!
//! Work is split into fixed-size blocks. Block `k` draws from a ChaCha8
//! stream keyed by `(seed, k)` and block results are reduced in index
//! order, so outputs do not depend on the number of worker threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use crate::channel::{hop_query, HitQuery};
use crate::error::ConfigError;
use crate::model::{Hop, MolecularLinkConfig, Vector3};

/// Particles per block in [`simulate_hits`].
pub const PARTICLE_BLOCK: u64 = 8192;
/// Bits per block in [`simulate_relay_ber`].
pub const BIT_BLOCK: u64 = 256;
/// Default number of time steps per molecular symbol.
pub const STEPS_PER_SYMBOL: f64 = 2000.0;

/// A hit-counting experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSpec {
    pub n_particles: u64,
    /// Time step (s).
    pub dt: f64,
    /// Observation time (s).
    pub horizon: f64,
    pub seed: u64,
    pub offset: Vector3,
    pub radius: f64,
    pub diffusion: f64,
    pub drift: Vector3,
}

impl SimSpec {
    /// Observes at `q.time` with 2000 steps.
    pub fn from_query(q: &HitQuery, n_particles: u64, seed: u64) -> Self {
        SimSpec {
            n_particles,
            dt: q.time / STEPS_PER_SYMBOL,
            horizon: q.time,
            seed,
            offset: q.offset,
            radius: q.radius,
            diffusion: q.diffusion,
            drift: q.drift,
        }
    }

    pub fn with_dt(self, dt: f64) -> Self {
        SimSpec { dt, ..self }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_particles == 0 {
            return Err(ConfigError::invalid("n_particles", "must be at least 1"));
        }
        if !(self.horizon > 0.0) {
            return Err(ConfigError::invalid("horizon", "must be positive"));
        }
        if !(self.dt > 0.0 && self.dt <= self.horizon / 100.0) {
            return Err(ConfigError::invalid(
                "dt",
                format!("{} s not in (0, horizon/100 = {} s]", self.dt, self.horizon / 100.0),
            ));
        }
        if !(self.radius > 0.0 && self.diffusion >= 0.0) {
            return Err(ConfigError::invalid("radius", "radius and diffusion must be positive"));
        }
        Ok(())
    }

    fn steps(&self) -> u64 {
        (self.horizon / self.dt - 1e-9).ceil().max(1.0) as u64
    }
}

/// Empirical hit fraction and per-axis displacement statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitEstimate {
    pub p_hat: f64,
    /// Binomial standard error `sqrt(p(1-p)/n)`.
    pub std_err: f64,
    pub n: u64,
    pub mean_displacement: Vector3,
    /// Standard error of each component of `mean_displacement`.
    pub displacement_se: Vector3,
}

/// Moves one particle from the origin through `steps` steps of `dt`.
#[inline]
fn walk(rng: &mut ChaCha8Rng, steps: u64, dt: f64, drift: Vector3, sigma: f64) -> Vector3 {
    let step_mean = drift * dt;
    let mut p = Vector3::ZERO;
    for _ in 0..steps {
        let n: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        p.x += step_mean.x + sigma * n[0];
        p.y += step_mean.y + sigma * n[1];
        p.z += step_mean.z + sigma * n[2];
    }
    p
}

fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

#[derive(Default, Clone, Copy)]
struct HitTally {
    hits: u64,
    sum: [f64; 3],
    sum_sq: [f64; 3],
}

pub fn simulate_hits(spec: &SimSpec) -> Result<HitEstimate, ConfigError> {
    spec.validate()?;
    let steps = spec.steps();
    let dt = spec.horizon / steps as f64;
    let sigma = (2.0 * spec.diffusion * dt).sqrt();
    let r2 = spec.radius * spec.radius;
    let blocks = spec.n_particles.div_ceil(PARTICLE_BLOCK);

    let tallies: Vec<HitTally> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(spec.seed, b);
            let count = PARTICLE_BLOCK.min(spec.n_particles - b * PARTICLE_BLOCK);
            let mut t = HitTally::default();
            for _ in 0..count {
                let p = walk(&mut rng, steps, dt, spec.drift, sigma);
                if (p - spec.offset).norm_sq() <= r2 {
                    t.hits += 1;
                }
                for (k, c) in p.to_array().into_iter().enumerate() {
                    t.sum[k] += c;
                    t.sum_sq[k] += c * c;
                }
            }
            t
        })
        .collect();

    let mut total = HitTally::default();
    for t in &tallies {
        total.hits += t.hits;
        for k in 0..3 {
            total.sum[k] += t.sum[k];
            total.sum_sq[k] += t.sum_sq[k];
        }
    }
    let n = spec.n_particles as f64;
    let p_hat = total.hits as f64 / n;
    let mean = total.sum.map(|s| s / n);
    let se: Vec<f64> = (0..3)
        .map(|k| ((total.sum_sq[k] / n - mean[k] * mean[k]).max(0.0) / n).sqrt())
        .collect();
    Ok(HitEstimate {
        p_hat,
        std_err: (p_hat * (1.0 - p_hat) / n).sqrt(),
        n: spec.n_particles,
        mean_displacement: Vector3::from(mean),
        displacement_se: Vector3::new(se[0], se[1], se[2]),
    })
}

/// Empirical end-to-end error rate of the relay link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerEstimate {
    pub ber: f64,
    pub std_err: f64,
    pub n_bits: u64,
}

/// Default step for [`simulate_relay_ber`].
pub fn default_relay_dt(link: &MolecularLinkConfig) -> f64 {
    link.t_dmc / STEPS_PER_SYMBOL
}

struct HopSim {
    steps: u64,
    dt: f64,
    sigma: f64,
    drift: Vector3,
    offset: Vector3,
    r2: f64,
    molecules: u64,
    threshold: f64,
}

impl HopSim {
    fn new(link: &MolecularLinkConfig, hop: Hop, dt: f64) -> Self {
        let q = hop_query(link, hop);
        let steps = (q.time / dt - 1e-9).ceil().max(1.0) as u64;
        let dt = q.time / steps as f64;
        HopSim {
            steps,
            dt,
            sigma: (2.0 * q.diffusion * dt).sqrt(),
            drift: q.drift,
            offset: q.offset,
            r2: q.radius * q.radius,
            molecules: match hop {
                Hop::TransmitterToRelay => link.molecules_a,
                Hop::RelayToDestination => link.molecules_b,
            },
            threshold: match hop {
                Hop::TransmitterToRelay => link.threshold_relay,
                Hop::RelayToDestination => link.threshold_dest,
            },
        }
    }

    /// Detector output for one symbol.
    fn detect(&self, rng: &mut ChaCha8Rng, send: bool, noise: &Option<Normal<f64>>, noise_mean: f64) -> bool {
        let mut count = 0u64;
        if send {
            for _ in 0..self.molecules {
                let p = walk(rng, self.steps, self.dt, self.drift, self.sigma);
                if (p - self.offset).norm_sq() <= self.r2 {
                    count += 1;
                }
            }
        }
        let extra = match noise {
            Some(n) => n.sample(rng).round().max(0.0),
            None => noise_mean.round().max(0.0),
        };
        count as f64 + extra >= self.threshold
    }
}

/// Sends `n_bits` random bits across both hops and counts end-to-end
/// errors. Each received count is the number of released particles inside
/// the receiver at half the symbol duration plus `max(0, round(N(μ_n, σ_n²)))`.
pub fn simulate_relay_ber(
    link: &MolecularLinkConfig,
    n_bits: u64,
    dt: f64,
    seed: u64,
) -> Result<BerEstimate, ConfigError> {
    link.validate()?;
    if n_bits < 1000 {
        return Err(ConfigError::invalid("n_bits", format!("{n_bits} < 1000")));
    }
    let horizon = link.t_dmc / 2.0;
    if !(dt > 0.0 && dt <= horizon / 100.0) {
        return Err(ConfigError::invalid(
            "dt",
            format!("{dt} s not in (0, {} s]", horizon / 100.0),
        ));
    }
    let tr = HopSim::new(link, Hop::TransmitterToRelay, dt);
    let rd = HopSim::new(link, Hop::RelayToDestination, dt);
    let noise = (link.noise_var > 0.0)
        .then(|| Normal::new(link.noise_mean, link.noise_var.sqrt()).expect("finite noise"));
    let blocks = n_bits.div_ceil(BIT_BLOCK);

    let errors: Vec<u64> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(seed, b);
            let count = BIT_BLOCK.min(n_bits - b * BIT_BLOCK);
            let mut errors = 0;
            for _ in 0..count {
                let sent = rng.gen_bool(link.prior_one);
                let relayed = tr.detect(&mut rng, sent, &noise, link.noise_mean);
                let delivered = rd.detect(&mut rng, relayed, &noise, link.noise_mean);
                errors += (delivered != sent) as u64;
            }
            errors
        })
        .collect();

    let n = n_bits as f64;
    let ber = errors.iter().sum::<u64>() as f64 / n;
    Ok(BerEstimate {
        ber,
        std_err: (ber * (1.0 - ber) / n).sqrt(),
        n_bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::channel::hit_probability;
    use crate::presets::caption_link;

    fn query(time: f64) -> HitQuery {
        HitQuery {
            offset: Vector3::from_micro(20.0, 10.0, 0.0),
            radius: 10e-6,
            diffusion: 4e-9,
            drift: Vector3::from_micro(30.0, 0.0, 0.0),
            time,
        }
    }

    #[test]
    fn guard_rejects_coarse_steps() {
        let spec = SimSpec::from_query(&query(1e-3), 10, 1).with_dt(2e-5);
        assert_eq!(spec.validate().unwrap_err().field(), Some("dt"));
        let spec = SimSpec { n_particles: 0, ..SimSpec::from_query(&query(1e-3), 10, 1) };
        assert!(simulate_hits(&spec).is_err());
    }

    #[test]
    fn unreachable_receiver() {
        let q = HitQuery {
            offset: Vector3::from_micro(500.0, 0.0, 0.0),
            radius: 10e-6,
            diffusion: 1e-9,
            drift: Vector3::ZERO,
            time: 1e-6,
        };
        let est = simulate_hits(&SimSpec::from_query(&q, 100_000, 3).with_dt(1e-8)).unwrap();
        assert_eq!(est.p_hat, 0.0);
    }

    #[test]
    fn same_seed_same_answer() {
        let spec = SimSpec::from_query(&query(0.02), 20_000, 11).with_dt(2e-4);
        let a = simulate_hits(&spec).unwrap();
        let b = simulate_hits(&spec).unwrap();
        assert_eq!(a, b);
        let c = simulate_hits(&SimSpec { seed: 12, ..spec }).unwrap();
        assert_ne!(a.p_hat, c.p_hat);
    }

    #[test]
    fn worker_count_does_not_matter() {
        let spec = SimSpec::from_query(&query(0.02), 30_000, 5).with_dt(2e-4);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_hits(&spec).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn agrees_with_exact_sphere_mass() {
        let q = query(0.02);
        let est = simulate_hits(&SimSpec::from_query(&q, 200_000, 7).with_dt(2e-4)).unwrap();
        // Gaussian mass of the sphere, 40-digit mpmath radial quadrature.
        let exact = 0.029_392_882_975_650_38;
        assert!((est.p_hat - exact).abs() <= 3.0 * est.std_err, "{est:?}");
        // The Simpson rule sits a few percent high at this resolution.
        let simpson = hit_probability(&q).value;
        assert!((simpson - exact).abs() < 0.08 * exact, "{simpson}");
    }

    #[test]
    fn halving_dt_is_stable() {
        let q = query(0.02);
        let a = simulate_hits(&SimSpec::from_query(&q, 100_000, 21).with_dt(2e-4)).unwrap();
        let b = simulate_hits(&SimSpec::from_query(&q, 100_000, 22).with_dt(1e-4)).unwrap();
        let combined = a.std_err.hypot(b.std_err);
        assert!((a.p_hat - b.p_hat).abs() < 2.0 * combined, "{a:?} {b:?}");
    }

    #[test]
    fn mean_displacement_follows_drift() {
        let q = query(0.02);
        let est = simulate_hits(&SimSpec::from_query(&q, 100_000, 9).with_dt(2e-4)).unwrap();
        let expected = q.drift * q.time;
        let (m, se) = (est.mean_displacement, est.displacement_se);
        for (got, want, s) in [(m.x, expected.x, se.x), (m.y, expected.y, se.y), (m.z, expected.z, se.z)] {
            assert!((got - want).abs() <= 3.0 * s, "{got} vs {want} ± {s}");
        }
    }

    #[test]
    fn always_firing_detectors() {
        let mut link = caption_link(50.0, 10.0, 30.0, 4e-3);
        link.molecules_a = 10;
        link.molecules_b = 10;
        link.threshold_relay = f64::NEG_INFINITY;
        link.threshold_dest = f64::NEG_INFINITY;
        let est = simulate_relay_ber(&link, 20_000, 2e-5, 4).unwrap();
        assert!((est.ber - 0.5).abs() <= 3.0 * est.std_err, "{est:?}");
    }

    #[test]
    fn no_signal_path() {
        let mut link = caption_link(50.0, 10.0, 30.0, 4e-3);
        link.molecules_a = 0;
        link.molecules_b = 0;
        link.threshold_relay = 1000.0;
        link.threshold_dest = 1000.0;
        let est = simulate_relay_ber(&link, 20_000, 2e-5, 4).unwrap();
        assert!((est.ber - 0.5).abs() <= 3.0 * est.std_err, "{est:?}");
        assert!(simulate_relay_ber(&link, 999, 2e-5, 4).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn same_spec_same_result(seed in any::<u64>(), n in 1u64..20_000) {
            let spec = SimSpec::from_query(&query(0.02), n, seed).with_dt(0.02 / 100.0);
            prop_assert_eq!(simulate_hits(&spec).unwrap(), simulate_hits(&spec).unwrap());
        }
    }
}
