//! Choice of the molecular / EM split of a fixed slot.
//!
//! The outer loop bisects on the objective level `h` between 0 and 1. Each
//! step asks whether some split reaches `p_e2e <= h`; that question is
//! answered by a golden-section minimization that stops as soon as one of
//! its iterates is at or below `h`.

use rayon::prelude::*;

use crate::combine::BerBreakdown;
use crate::detection::{molecular_ber, molecular_ber_chain_rule};
use crate::em::{in2on_aber, offbody_ber, onbody_aber};
use crate::error::{ConfigError, Error, NumericError};
use crate::model::Scenario;

pub const DEFAULT_EPSILON: f64 = 1e-4;
pub const ITERATION_CAP: u32 = 128;
/// Distance kept from both ends of the slot (s).
pub const EDGE: f64 = 1e-6;
/// Golden-section stopping width, relative to the slot.
pub const GOLDEN_RTOL: f64 = 1e-6;
/// Profiles whose spread over the probe points stays below this are flat.
pub const FLAT_TOL: f64 = 1e-12;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// All four link error probabilities and their combination at `t_dmc`.
pub fn ber_profile(t_dmc: f64, scenario: &Scenario) -> Result<BerBreakdown, Error> {
    let t_total = scenario.slot.t_total();
    if !(t_dmc > 0.0 && t_dmc < t_total) {
        return Err(ConfigError::invalid("t_dmc", format!("{t_dmc} s outside (0, {t_total}) s")).into());
    }
    let link = scenario.molecular.with_t_dmc(t_dmc);
    let p_mol = if link.prior_one == 0.5 {
        molecular_ber(&link)?
    } else {
        molecular_ber_chain_rule(&link)?
    };
    let t_em = (t_total - t_dmc) / 3.0;
    Ok(BerBreakdown::new(
        t_dmc,
        p_mol,
        in2on_aber(&scenario.in2on, t_em)?,
        onbody_aber(&scenario.on_body, t_em)?,
        offbody_ber(&scenario.off_body, t_em),
    ))
}

/// A split reaching a requested level, with the golden-section bracket
/// that was current when it was found.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub breakdown: BerBreakdown,
    pub bracket: (f64, f64),
}

/// Outcome of one golden-section run.
struct Golden {
    best: BerBreakdown,
    bracket: (f64, f64),
    hit: bool,
}

/// Golden-section minimization of `p_e2e` on `(EDGE, t_total - EDGE)`.
/// With `level = Some(h)` it returns at the first iterate with `p_e2e <= h`.
fn golden(scenario: &Scenario, level: Option<f64>) -> Result<Golden, Error> {
    let t_total = scenario.slot.t_total();
    let (mut a, mut b) = (EDGE, t_total - EDGE);
    let reached = |x: &BerBreakdown| level.is_some_and(|h| x.p_e2e <= h);

    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = ber_profile(c, scenario)?;
    let mut best = fc;
    if reached(&fc) {
        return Ok(Golden { best: fc, bracket: (a, b), hit: true });
    }
    let mut fd = ber_profile(d, scenario)?;
    if fd.p_e2e < best.p_e2e {
        best = fd;
    }
    if reached(&fd) {
        return Ok(Golden { best: fd, bracket: (a, b), hit: true });
    }
    while b - a > GOLDEN_RTOL * t_total {
        let fresh = if fc.p_e2e < fd.p_e2e {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = ber_profile(c, scenario)?;
            fc
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = ber_profile(d, scenario)?;
            fd
        };
        if fresh.p_e2e < best.p_e2e {
            best = fresh;
        }
        if reached(&fresh) {
            return Ok(Golden { best: fresh, bracket: (a, b), hit: true });
        }
    }
    Ok(Golden { best, bracket: (a, b), hit: false })
}

/// A split with `p_e2e <= h`, if the golden-section search finds one.
pub fn sublevel_feasible(h: f64, scenario: &Scenario) -> Result<Option<Witness>, Error> {
    if !(0.0..=1.0).contains(&h) {
        return Err(NumericError::Domain(format!("level {h}")).into());
    }
    let g = golden(scenario, Some(h))?;
    Ok(g.hit.then_some(Witness {
        breakdown: g.best,
        bracket: g.bracket,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizationResult {
    pub t_dmc_opt: f64,
    pub p_e2e_opt: f64,
    pub breakdown_opt: BerBreakdown,
    pub iterations: u32,
    pub epsilon: f64,
    pub converged: bool,
    /// Golden-section bracket in which the returned split was found.
    pub bracket: (f64, f64),
    /// The profile did not vary over the slot; the split is the midpoint.
    pub flat: bool,
}

/// Bisection on the objective level, stopping once the level interval is
/// no wider than `epsilon`.
pub fn optimize_split(scenario: &Scenario, epsilon: f64) -> Result<OptimizationResult, Error> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(ConfigError::invalid("epsilon", format!("{epsilon} outside (0, 1)")).into());
    }
    let t_total = scenario.slot.t_total();

    let probes: Vec<f64> = (1..=9)
        .map(|i| ber_profile(t_total * i as f64 / 10.0, scenario).map(|b| b.p_e2e))
        .collect::<Result<_, _>>()?;
    let spread = probes.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - probes.iter().cloned().fold(f64::INFINITY, f64::min);
    if spread <= FLAT_TOL {
        let mid = ber_profile(0.5 * t_total, scenario)?;
        return Ok(OptimizationResult {
            t_dmc_opt: mid.t_dmc,
            p_e2e_opt: mid.p_e2e,
            breakdown_opt: mid,
            iterations: 0,
            epsilon,
            converged: true,
            bracket: (EDGE, t_total - EDGE),
            flat: true,
        });
    }

    let (mut lower, mut upper) = (0.0f64, 1.0f64);
    let mut witness: Option<Witness> = None;
    let mut iterations = 0;
    while upper - lower > epsilon {
        if iterations == ITERATION_CAP {
            return Err(NumericError::IterationCap { cap: ITERATION_CAP as usize }.into());
        }
        iterations += 1;
        let h = 0.5 * (lower + upper);
        match sublevel_feasible(h, scenario)? {
            Some(w) => {
                upper = h;
                witness = Some(w);
            }
            None => lower = h,
        }
    }

    let w = match witness {
        Some(w) => w,
        None => {
            // Nothing reached even the first level; fall back to the plain
            // golden-section minimum.
            let g = golden(scenario, None)?;
            Witness {
                breakdown: g.best,
                bracket: g.bracket,
            }
        }
    };
    Ok(OptimizationResult {
        t_dmc_opt: w.breakdown.t_dmc,
        p_e2e_opt: w.breakdown.p_e2e,
        breakdown_opt: w.breakdown,
        iterations,
        epsilon,
        converged: true,
        bracket: w.bracket,
        flat: false,
    })
}

/// `p_e2e` on `n` evenly spaced splits of `[EDGE, t_total - EDGE]`.
pub fn grid_profile(scenario: &Scenario, n: usize) -> Result<Vec<BerBreakdown>, Error> {
    assert!(n >= 2);
    let t_total = scenario.slot.t_total();
    let step = (t_total - 2.0 * EDGE) / (n - 1) as f64;
    (0..n)
        .into_par_iter()
        .map(|i| ber_profile(EDGE + step * i as f64, scenario))
        .collect()
}

/// Indices of local minima of `values`, treating differences up to `tol`
/// as ties. A plateau counts once.
pub fn local_minima(values: &[f64], tol: f64) -> Vec<usize> {
    let mut minima = Vec::new();
    let mut i = 0;
    while i < values.len() {
        let mut j = i;
        while j + 1 < values.len() && (values[j + 1] - values[i]).abs() <= tol {
            j += 1;
        }
        let left_higher = i == 0 || values[i - 1] > values[i] + tol;
        let right_higher = j + 1 == values.len() || values[j + 1] > values[i] + tol;
        if left_higher && right_higher {
            minima.push(i);
        }
        i = j + 1;
    }
    minima
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combine::combine;
    use crate::config::default_scenario;

    #[test]
    fn profile_recombines_and_rejects_ends() {
        let s = default_scenario();
        for t in [1e-4, 2e-3, 4.5e-3, 8.9e-3] {
            let b = ber_profile(t, &s).unwrap();
            assert!((combine(b.links()) - b.p_e2e).abs() <= 1e-15);
            assert_eq!(b.t_dmc, t);
        }
        assert!(ber_profile(0.0, &s).is_err());
        assert!(ber_profile(9e-3, &s).is_err());
    }

    #[test]
    fn em_links_degrade_towards_full_molecular_slot() {
        let s = default_scenario();
        let b = ber_profile(9e-3 - 1e-9, &s).unwrap();
        assert!(b.max_em() > 0.4, "{b:?}");
    }

    #[test]
    fn trivial_levels() {
        let s = default_scenario();
        assert!(sublevel_feasible(1.0, &s).unwrap().is_some());
        assert!(sublevel_feasible(0.0, &s).unwrap().is_none());
        assert!(sublevel_feasible(1.5, &s).is_err());
    }

    #[test]
    fn iteration_count() {
        let s = default_scenario();
        assert_eq!(optimize_split(&s, 0.5).unwrap().iterations, 1);
        assert_eq!(optimize_split(&s, 1e-4).unwrap().iterations, 14);
        assert!(optimize_split(&s, 0.0).is_err());
    }

    #[test]
    fn deterministic() {
        let s = default_scenario();
        let a = optimize_split(&s, 1e-4).unwrap();
        let b = optimize_split(&s, 1e-4).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn flat_profile_returns_midpoint() {
        let mut s = default_scenario();
        // Make the off-body hop useless.
        s.off_body.tx_power = 0.0;
        let r = optimize_split(&s, 1e-3).unwrap();
        assert!(r.flat && r.converged);
        assert!((r.t_dmc_opt - 4.5e-3).abs() < 1e-18);
        assert!((r.p_e2e_opt - 0.5).abs() < 1e-15);
    }

    #[test]
    fn minima_counting() {
        assert_eq!(local_minima(&[3.0, 2.0, 1.0, 2.0], 0.0), vec![2]);
        assert_eq!(local_minima(&[1.0, 1.0, 1.0], 0.0), vec![0]);
        assert_eq!(local_minima(&[2.0, 1.0, 2.0, 1.0, 2.0], 0.0), vec![1, 3]);
        assert_eq!(local_minima(&[2.0, 1.0, 1.0 + 1e-13, 1.0, 2.0], 1e-12), vec![1]);
    }
}
