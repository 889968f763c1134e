//! Threshold detection at the relay and destination, and the bit error
//! probability of the two-hop decode-and-forward molecular link.
//!
//! Received counts are modelled as Gaussian under each hypothesis. The
//! moments include a previous-symbol term (`0.5 Q q` in the mean and
//! `0.25 Q² q²` in the variance) with `q` equal to the hop hit probability,
//! plus the additive counting noise `(μ_n, σ_n²)`.

use std::f64::consts::SQRT_2;

use crate::channel::hop_hit_probability;
use crate::error::NumericError;
use crate::model::{Hop, MolecularLinkConfig};
use crate::special::{erf, erfc};

/// Count statistics under `x = 0` and `x = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionStats {
    pub mu0: f64,
    pub mu1: f64,
    pub var0: f64,
    pub var1: f64,
}

impl DetectionStats {
    fn select(&self, sent_one: bool) -> (f64, f64) {
        if sent_one {
            (self.mu1, self.var1)
        } else {
            (self.mu0, self.var0)
        }
    }

    /// `erf((τ - μ_s) / sqrt(2 σ_s²))`.
    fn erf_arg(&self, threshold: f64, sent_one: bool) -> f64 {
        let (mu, var) = self.select(sent_one);
        erf((threshold - mu) / (2.0 * var).sqrt())
    }
}

pub fn detection_stats(
    molecules: u64,
    p_hit: f64,
    noise_mean: f64,
    noise_var: f64,
) -> Result<DetectionStats, NumericError> {
    if !(0.0..=1.0).contains(&p_hit) {
        return Err(NumericError::Domain(format!("hit probability {p_hit}")));
    }
    let q = molecules as f64;
    let p = p_hit;
    let isi_mean = 0.5 * q * p;
    let isi_var = 0.5 * q * p * (1.0 - p) + 0.25 * q * q * p * p;
    let mu0 = isi_mean + noise_mean;
    let mu1 = isi_mean + q * p + noise_mean;
    let var0 = isi_var + noise_var + noise_mean;
    let var1 = q * p * (1.0 - p) + isi_var + noise_var + mu1;
    for variance in [var0, var1] {
        if !(variance > 0.0) {
            return Err(NumericError::DegenerateVariance { variance });
        }
    }
    Ok(DetectionStats {
        mu0,
        mu1,
        var0,
        var1,
    })
}

/// `Pr(count >= threshold | sent)`.
pub fn cond_detect_one(threshold: f64, stats: &DetectionStats, sent_one: bool) -> f64 {
    let (mu, var) = stats.select(sent_one);
    0.5 * erfc((threshold - mu) / (SQRT_2 * var.sqrt()))
}

/// Detection statistics of both hops.
pub fn hop_stats(link: &MolecularLinkConfig) -> Result<(DetectionStats, DetectionStats), NumericError> {
    let p_tr = hop_hit_probability(link, Hop::TransmitterToRelay).value;
    let p_rd = hop_hit_probability(link, Hop::RelayToDestination).value;
    Ok((
        detection_stats(link.molecules_a, p_tr, link.noise_mean, link.noise_var)?,
        detection_stats(link.molecules_b, p_rd, link.noise_mean, link.noise_var)?,
    ))
}

/// Bit error probability of the relay link with equiprobable bits, in the
/// reduced `1/2 + 1/8 [..][..]` form.
pub fn molecular_ber(link: &MolecularLinkConfig) -> Result<f64, NumericError> {
    let (tr, rd) = hop_stats(link)?;
    Ok(ber_from_stats(&tr, &rd, link.threshold_relay, link.threshold_dest))
}

pub fn ber_from_stats(tr: &DetectionStats, rd: &DetectionStats, tau_r: f64, tau_d: f64) -> f64 {
    let relay = tr.erf_arg(tau_r, true) - tr.erf_arg(tau_r, false);
    let dest = rd.erf_arg(tau_d, false) - rd.erf_arg(tau_d, true);
    0.5 + 0.125 * relay * dest
}

/// The same error probability through the unreduced chain rule,
/// honouring `prior_one`. The destination decision depends on the
/// transmitted bit only through the relay decision.
pub fn molecular_ber_chain_rule(link: &MolecularLinkConfig) -> Result<f64, NumericError> {
    let (tr, rd) = hop_stats(link)?;
    let relay_one = |sent| cond_detect_one(link.threshold_relay, &tr, sent);
    let dest_one = |relayed| cond_detect_one(link.threshold_dest, &rd, relayed);

    // Pr(x_D = 0 | x_T = 1)
    let miss = (1.0 - relay_one(true)) * (1.0 - dest_one(false))
        + relay_one(true) * (1.0 - dest_one(true));
    // Pr(x_D = 1 | x_T = 0)
    let false_alarm =
        (1.0 - relay_one(false)) * dest_one(false) + relay_one(false) * dest_one(true);

    Ok((1.0 - link.prior_one) * false_alarm + link.prior_one * miss)
}

/// Threshold pair minimizing [`molecular_ber`] on an integer grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdChoice {
    pub threshold_relay: f64,
    pub threshold_dest: f64,
    pub ber: f64,
}

/// Grid search over integer thresholds `0..=max_count` (step 1). The two
/// hop factors of the reduced form are independent, so each threshold is
/// chosen on its own.
pub fn best_thresholds(
    link: &MolecularLinkConfig,
    max_count: u32,
) -> Result<ThresholdChoice, NumericError> {
    let (tr, rd) = hop_stats(link)?;
    let best = |stats: &DetectionStats| -> f64 {
        let mut best = (0.0, f64::NEG_INFINITY);
        for tau in 0..=max_count {
            let tau = tau as f64;
            let gap = stats.erf_arg(tau, false) - stats.erf_arg(tau, true);
            if gap > best.1 {
                best = (tau, gap);
            }
        }
        best.0
    };
    let threshold_relay = best(&tr);
    let threshold_dest = best(&rd);
    Ok(ThresholdChoice {
        threshold_relay,
        threshold_dest,
        ber: ber_from_stats(&tr, &rd, threshold_relay, threshold_dest),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::presets::caption_link;

    #[test]
    fn stats_without_signal() {
        let s = detection_stats(1000, 0.0, 40.0, 100.0).unwrap();
        assert_eq!((s.mu0, s.mu1, s.var0, s.var1), (40.0, 40.0, 140.0, 140.0));
    }

    #[test]
    fn stats_with_certain_hit() {
        let s = detection_stats(1000, 1.0, 0.0, 0.0).unwrap();
        assert_eq!((s.mu0, s.mu1, s.var0, s.var1), (500.0, 1500.0, 250000.0, 251500.0));
    }

    #[test]
    fn stats_intermediate() {
        // 0.5·100·0.3 = 15; Q·p = 30; Qp(1-p) = 21; 0.25·Q²p² = 225.
        let s = detection_stats(100, 0.3, 40.0, 100.0).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
        assert!(close(s.mu0, 55.0) && close(s.mu1, 85.0));
        assert!(close(s.var0, 375.5), "{}", s.var0);
        assert!(close(s.var1, 441.5), "{}", s.var1);
    }

    #[test]
    fn degenerate_variance() {
        assert!(matches!(
            detection_stats(10, 0.0, 0.0, 0.0),
            Err(NumericError::DegenerateVariance { .. })
        ));
        assert!(detection_stats(10, 1.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn conditional_detection() {
        let s = detection_stats(100, 0.3, 40.0, 100.0).unwrap();
        assert_eq!(cond_detect_one(f64::NEG_INFINITY, &s, true), 1.0);
        assert!((cond_detect_one(s.mu1, &s, true) - 0.5).abs() < 1e-16);
        let tau = s.mu1 + (2.0 * s.var1).sqrt();
        // 0.5·(1 - erf(1)) with erf(1) from a 50-digit reference
        let expected = 0.5 * (1.0 - 0.842_700_792_949_714_9);
        assert!((cond_detect_one(tau, &s, true) - expected).abs() < 1e-15);
        assert!((expected - 0.0786496).abs() < 1e-7);
    }

    #[test]
    fn indistinguishable_hypotheses_give_half() {
        let mut link = caption_link(50.0, 10.0, 30.0, 4e-3);
        link.molecules_a = 0;
        link.molecules_b = 0;
        assert_eq!(molecular_ber(&link).unwrap(), 0.5);
    }

    #[test]
    fn reduced_form_matches_chain_rule_on_caption_grid() {
        for gy in [46.0, 50.0, 54.0] {
            for t in [3e-3, 4e-3, 6e-3] {
                let mut link = caption_link(gy, 10.0, 30.0, t);
                for (tr, td) in [(45.0, 45.0), (50.0, 60.0), (41.0, 300.0)] {
                    link.threshold_relay = tr;
                    link.threshold_dest = td;
                    let a = molecular_ber(&link).unwrap();
                    let b = molecular_ber_chain_rule(&link).unwrap();
                    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn prior_changes_chain_rule_only() {
        let mut link = caption_link(50.0, 10.0, 30.0, 6e-3);
        link.prior_one = 0.9;
        let reduced = molecular_ber(&link).unwrap();
        let general = molecular_ber_chain_rule(&link).unwrap();
        assert!((reduced - general).abs() > 1e-6);
    }

    #[test]
    fn more_molecules_do_not_hurt_at_best_thresholds() {
        let mut last = 1.0;
        for q in [100, 300, 1000] {
            let mut link = caption_link(50.0, 10.0, 30.0, 6e-3);
            link.molecules_a = q;
            link.molecules_b = q;
            let best = best_thresholds(&link, 2000).unwrap();
            assert!(best.ber <= last + 1e-15, "Q={q}: {} > {last}", best.ber);
            last = best.ber;
        }
    }

    #[test]
    fn best_thresholds_beat_neighbours() {
        let link = caption_link(50.0, 10.0, 30.0, 7e-3);
        let best = best_thresholds(&link, 2000).unwrap();
        let (tr, rd) = hop_stats(&link).unwrap();
        for d in [-1.0, 1.0] {
            assert!(ber_from_stats(&tr, &rd, best.threshold_relay + d, best.threshold_dest) >= best.ber);
            assert!(ber_from_stats(&tr, &rd, best.threshold_relay, best.threshold_dest + d) >= best.ber);
        }
    }

    prop_compose! {
        fn any_link()(
            gy in 40.0..60.0f64, wx in 1.0..100.0f64, wy in 1.0..100.0f64, t in 1e-3..8e-3f64,
            d_exp in -9.5..-5.5f64, qa in 0u64..3000, qb in 0u64..3000,
            tr in 0.0..400.0f64, td in 0.0..400.0f64,
        ) -> MolecularLinkConfig {
            let mut link = caption_link(gy, wx, wy, t);
            link.diffusion_a = 10f64.powf(d_exp);
            link.diffusion_b = 10f64.powf(d_exp);
            link.molecules_a = qa;
            link.molecules_b = qb;
            link.threshold_relay = tr;
            link.threshold_dest = td;
            link
        }
    }

    proptest! {
        #[test]
        fn ber_is_bounded_and_matches_chain_rule(link in any_link()) {
            let fast = molecular_ber(&link).unwrap();
            prop_assert!((0.0..=1.0).contains(&fast));
            prop_assert!((fast - molecular_ber_chain_rule(&link).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn no_signal_gives_one_half(mut link in any_link()) {
            link.molecules_a = 0;
            prop_assert_eq!(molecular_ber(&link).unwrap(), 0.5);
        }
    }
}
