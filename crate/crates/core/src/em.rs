//! Average BER of the three electromagnetic hops, all BPSK.
//!
//! * implant to on-body: log-normal SNR from path loss with log-normal
//!   shadowing;
//! * on-body: log-normal SNR;
//! * off-body: Rayleigh fading.
//!
//! SNRs use the energy form `P · t_sym / N0`.

use std::f64::consts::LN_10;

use crate::error::NumericError;
use crate::model::{In2onConfig, OffBodyConfig, OnBodyConfig};
use crate::special::{ln_erfc, normal_expectation_ln};

/// Relative tolerance of every quadrature in this module.
pub const QUAD_RTOL: f64 = 1e-8;

/// Parameters of a log-normal SNR: `ln γ ~ N(mu_gamma, sigma_gamma²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalSnr {
    pub mu_gamma: f64,
    pub sigma_gamma: f64,
}

const PRONY: [(f64, f64); 3] = [(0.168, 1.752), (0.144, 1.05), (0.002, 1.206)];

/// Three-term exponential fit of `erfc` (0.628 at zero).
pub fn erfc_prony(x: f64) -> f64 {
    let x2 = x * x;
    2.0 * PRONY.iter().map(|(a, b)| a * (-b * x2).exp()).sum::<f64>()
}

/// `ln erfc_prony(x)`, without underflow.
fn ln_erfc_prony(x: f64) -> f64 {
    let x2 = x * x;
    let terms = PRONY.map(|(a, b)| a.ln() - b * x2);
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    2f64.ln() + top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

/// `∫₀^∞ exp(-k x²) · LogNormal(x; -l², l) dx`, evaluated as
/// `E[exp(-k · exp(2 l U - 2 l²))]` with `U ~ N(0, 1)`.
pub fn frustration(k: f64, l: f64) -> Result<f64, NumericError> {
    if !(k >= 0.0) || !(l > 0.0) {
        return Err(NumericError::Domain(format!("frustration({k}, {l})")));
    }
    if k == 0.0 {
        return Ok(1.0);
    }
    if k.is_infinite() {
        return Ok(0.0);
    }
    normal_expectation_ln(|u| -k * (2.0 * l * u - 2.0 * l * l).exp(), QUAD_RTOL)
}

/// Which complementary error function the average is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErfcModel {
    Exact,
    Prony,
}

/// `E[½ erfc(√γ)]` for log-normal `γ`, by direct quadrature.
pub fn lognormal_aber(snr: LogNormalSnr) -> Result<f64, NumericError> {
    lognormal_aber_with(snr, ErfcModel::Exact)
}

pub fn lognormal_aber_with(snr: LogNormalSnr, model: ErfcModel) -> Result<f64, NumericError> {
    if !(snr.sigma_gamma > 0.0) || snr.mu_gamma.is_nan() {
        return Err(NumericError::Domain(format!("{snr:?}")));
    }
    if snr.mu_gamma == f64::NEG_INFINITY {
        return Ok(0.5 * match model {
            ErfcModel::Exact => 1.0,
            ErfcModel::Prony => erfc_prony(0.0),
        });
    }
    if snr.mu_gamma == f64::INFINITY {
        return Ok(0.0);
    }
    let ln_f = |u: f64| {
        let root = (0.5 * (snr.mu_gamma + snr.sigma_gamma * u)).exp();
        0.5f64.ln()
            + match model {
                ErfcModel::Exact => ln_erfc(root),
                ErfcModel::Prony => ln_erfc_prony(root),
            }
    };
    normal_expectation_ln(ln_f, QUAD_RTOL)
}

/// The Prony-based closed form written with frustration functions:
/// `Σ a_i Φ(b_i · exp(μ + σ²/2), σ/2)`.
pub fn lognormal_aber_frustration(snr: LogNormalSnr) -> Result<f64, NumericError> {
    let scale = (snr.mu_gamma + 0.5 * snr.sigma_gamma * snr.sigma_gamma).exp();
    let l = 0.5 * snr.sigma_gamma;
    let mut total = 0.0;
    for (a, b) in PRONY {
        total += a * frustration(b * scale, l)?;
    }
    Ok(total)
}

/// Power gain of the implant path, `10^(-PL(d)/10)`, returned in dB.
fn in2on_path_loss_db(cfg: &In2onConfig) -> f64 {
    cfg.pl_ref_db + 10.0 * cfg.pathloss_exp * (cfg.dist / cfg.ref_dist).log10()
}

pub fn in2on_snr_params(cfg: &In2onConfig, t_sym: f64) -> LogNormalSnr {
    // ln(ϑ t P / N0) with ln ϑ = -PL/10 · ln 10, kept in log space.
    let ln_gain = -in2on_path_loss_db(cfg) / 10.0 * LN_10;
    LogNormalSnr {
        mu_gamma: ln_gain + (t_sym * cfg.tx_power / cfg.noise_psd).ln(),
        sigma_gamma: cfg.shadow_sigma_db * LN_10 / 10.0,
    }
}

pub fn in2on_aber(cfg: &In2onConfig, t_sym: f64) -> Result<f64, NumericError> {
    lognormal_aber(in2on_snr_params(cfg, t_sym))
}

pub fn onbody_snr_params(cfg: &OnBodyConfig, t_sym: f64) -> LogNormalSnr {
    let gamma_on = cfg.path_gain * cfg.tx_power * t_sym / cfg.noise_psd;
    LogNormalSnr {
        mu_gamma: cfg.lognorm_mu + gamma_on.ln(),
        sigma_gamma: cfg.lognorm_sigma,
    }
}

pub fn onbody_aber(cfg: &OnBodyConfig, t_sym: f64) -> Result<f64, NumericError> {
    lognormal_aber(onbody_snr_params(cfg, t_sym))
}

/// Mean SNR per bit of the off-body hop.
pub fn offbody_mean_snr(cfg: &OffBodyConfig, t_sym: f64) -> f64 {
    cfg.tx_power * t_sym * cfg.dist.powf(-cfg.pathloss_exp) / cfg.noise_psd
}

/// `½ (1 - sqrt(γ̄ / (1 + γ̄)))`, rearranged to avoid cancellation.
pub fn rayleigh_bpsk_ber(mean_snr: f64) -> f64 {
    if mean_snr.is_infinite() {
        return 0.0;
    }
    let s = (mean_snr / (1.0 + mean_snr)).sqrt();
    0.5 / ((1.0 + mean_snr) * (1.0 + s))
}

pub fn offbody_ber(cfg: &OffBodyConfig, t_sym: f64) -> f64 {
    rayleigh_bpsk_ber(offbody_mean_snr(cfg, t_sym))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::model::TissueProfile;

    #[test]
    fn prony_values() {
        assert!((erfc_prony(0.0) - 0.628).abs() < 1e-15);
        assert_eq!(erfc_prony(40.0), 0.0);
        // 2(0.168e^-1.752 + 0.144e^-1.05 + 0.002e^-1.206), evaluated by hand
        // with mpmath: 0.160251027180881
        assert!((erfc_prony(1.0) - 0.160_251_027_180_881).abs() < 1e-14);
        assert!((erfc_prony(1.0) - 0.157_299_207_050_285_13).abs() < 0.003);
    }

    #[test]
    fn frustration_edges() {
        for l in [0.1, 0.5, 1.0, 2.0] {
            assert_eq!(frustration(0.0, l).unwrap(), 1.0);
            let tiny = frustration(1e-12, l).unwrap();
            assert!((tiny - 1.0).abs() < 1e-8, "{tiny}");
            assert_eq!(frustration(f64::INFINITY, l).unwrap(), 0.0);
        }
        assert!(frustration(1e9, 0.5).unwrap() < 1e-6);
        // deep tail: relative accuracy survives
        let a = lognormal_aber(LogNormalSnr { mu_gamma: 8.0, sigma_gamma: 0.5 }).unwrap();
        // 40-digit mpmath quadrature of the same expectation
        assert!((a - 9.306_929_055_200_761e-33).abs() < 1e-7 * a, "{a}");
        assert!(frustration(-1.0, 0.5).is_err());
        assert!(frustration(1.0, 0.0).is_err());
    }

    #[test]
    fn frustration_matches_trapezoid() {
        // Trapezoid on (0, 50] in the original variable, halving the step
        // until successive estimates agree to 1e-9.
        let (k, l) = (1.0f64, 0.5f64);
        let f = |x: f64| {
            if x <= 0.0 {
                return 0.0;
            }
            let lx = x.ln() + l * l;
            (-k * x * x).exp() * (-(lx * lx) / (2.0 * l * l)).exp()
                / (x * (2.0 * std::f64::consts::PI).sqrt() * l)
        };
        let mut n = 1024usize;
        let mut prev = f64::NAN;
        let est = loop {
            let h = 50.0 / n as f64;
            let s: f64 = (1..n).map(|i| f(i as f64 * h)).sum::<f64>() + 0.5 * f(50.0);
            let est = s * h;
            if (est - prev).abs() < 1e-9 {
                break est;
            }
            prev = est;
            n *= 2;
        };
        let v = frustration(k, l).unwrap();
        assert!((v - est).abs() <= 1e-7 * est, "{v} vs {est}");
    }

    #[test]
    fn deep_tissue_at_reference_distance() {
        let cfg = In2onConfig::for_tissue(TissueProfile::Deep, 0.05, 0.05, 1.0, 1.0);
        let snr = in2on_snr_params(&cfg, 1.0);
        // ϑ = 10^(-4.714)
        assert!((snr.mu_gamma - (-4.714 * LN_10)).abs() < 1e-12);
        let near = In2onConfig::for_tissue(TissueProfile::NearSurface, 0.05, 0.02, 1.0, 1.0);
        let s = in2on_snr_params(&near, 1.0).sigma_gamma;
        assert!((s - 6.81 * LN_10 / 10.0).abs() < 1e-15);
        assert!((s - 1.5681).abs() < 1e-4);
    }

    #[test]
    fn doubling_symbol_adds_ln2() {
        let cfg = In2onConfig::for_tissue(TissueProfile::Deep, 0.05, 0.02, 25e-6, 4e-13);
        let a = in2on_snr_params(&cfg, 1e-3).mu_gamma;
        let b = in2on_snr_params(&cfg, 2e-3).mu_gamma;
        assert!((b - a - std::f64::consts::LN_2).abs() < 1e-12);
        let on = OnBodyConfig {
            path_gain: 10f64.powf(-6.324),
            tx_power: 1e-3,
            noise_psd: 1e-13,
            lognorm_mu: -0.39,
            lognorm_sigma: 0.23,
        };
        let a = onbody_snr_params(&on, 1e-3).mu_gamma;
        let b = onbody_snr_params(&on, 2e-3).mu_gamma;
        assert!((b - a - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn lognormal_limits() {
        let at = |mu| lognormal_aber(LogNormalSnr { mu_gamma: mu, sigma_gamma: 1.0 }).unwrap();
        assert!((at(-60.0) - 0.5).abs() < 1e-9);
        assert_eq!(at(f64::NEG_INFINITY), 0.5);
        assert!(at(60.0) < 1e-20);
        // point-mass limit
        let mu = 1.3;
        let v = lognormal_aber(LogNormalSnr { mu_gamma: mu, sigma_gamma: 1e-6 }).unwrap();
        let point = 0.5 * crate::special::erfc((0.5 * mu).exp());
        assert!((v - point).abs() < 1e-9 * point);
    }

    #[test]
    fn frustration_form_equals_prony_quadrature() {
        for (mu, sigma) in [(0.0, 0.3), (2.0, 1.0), (4.0, 1.8), (-1.0, 0.5)] {
            let snr = LogNormalSnr { mu_gamma: mu, sigma_gamma: sigma };
            let closed = lognormal_aber_frustration(snr).unwrap();
            let quad = lognormal_aber_with(snr, ErfcModel::Prony).unwrap();
            assert!((closed - quad).abs() <= 1e-7 * quad, "{mu} {sigma}: {closed} vs {quad}");
        }
    }

    #[test]
    fn prony_gap_is_small_where_mass_sits_above_unit_snr() {
        // Measured behaviour of the Prony substitution: within 5% on this
        // sub-box, but not on all of mu ∈ [0, 6], sigma ∈ [0.2, 2].
        for mu in [1.0, 1.5, 2.0, 2.5, 3.0] {
            for sigma in [0.2, 0.4, 0.6, 0.8, 1.0, 1.2] {
                let snr = LogNormalSnr { mu_gamma: mu, sigma_gamma: sigma };
                let exact = lognormal_aber(snr).unwrap();
                let prony = lognormal_aber_with(snr, ErfcModel::Prony).unwrap();
                assert!((prony - exact).abs() <= 0.05 * exact, "{mu} {sigma}");
            }
        }
    }

    #[test]
    #[ignore = "fails: the Prony substitution gap reaches ~13% at (mu 0, sigma 2) and ~70% at (mu 6, sigma 0.2)"]
    fn prony_gap_within_five_percent_on_full_box() {
        for i in 0..=12 {
            for j in 0..=9 {
                let snr = LogNormalSnr {
                    mu_gamma: 0.5 * i as f64,
                    sigma_gamma: 0.2 + 0.2 * j as f64,
                };
                let exact = lognormal_aber(snr).unwrap();
                let prony = lognormal_aber_with(snr, ErfcModel::Prony).unwrap();
                assert!((prony - exact).abs() <= 0.05 * exact, "{snr:?}");
            }
        }
    }

    #[test]
    fn rayleigh_values() {
        assert_eq!(rayleigh_bpsk_ber(0.0), 0.5);
        let v = rayleigh_bpsk_ber(3.0);
        assert!((v - 0.5 * (1.0 - 0.75f64.sqrt())).abs() < 1e-16);
        assert!((v - 0.0669873).abs() < 1e-7);
        let g = 1e8;
        assert!((rayleigh_bpsk_ber(g) * 4.0 * g - 1.0).abs() < 1e-7);
        assert_eq!(rayleigh_bpsk_ber(f64::INFINITY), 0.0);
    }

    #[test]
    fn link_bers_fall_with_symbol_duration() {
        let s = crate::config::default_scenario();
        let mut last = [0.5f64; 3];
        for t in [1e-4, 3e-4, 1e-3, 3e-3, 1e-2] {
            let now = [
                in2on_aber(&s.in2on, t).unwrap(),
                onbody_aber(&s.on_body, t).unwrap(),
                offbody_ber(&s.off_body, t),
            ];
            for (n, l) in now.iter().zip(&last) {
                assert!(*n > 0.0 && *n <= 0.5);
                assert!(n < l, "t={t}: {now:?} vs {last:?}");
            }
            last = now;
        }
    }

    proptest! {
        #[test]
        fn link_bers_fall_with_symbol_time(t in 1e-4..8e-3f64, ratio in 1.05..3.0f64) {
            let s = crate::config::default_scenario();
            let pairs = [
                (in2on_aber(&s.in2on, t).unwrap(), in2on_aber(&s.in2on, t * ratio).unwrap()),
                (onbody_aber(&s.on_body, t).unwrap(), onbody_aber(&s.on_body, t * ratio).unwrap()),
                (offbody_ber(&s.off_body, t), offbody_ber(&s.off_body, t * ratio)),
            ];
            for (short, long) in pairs {
                prop_assert!(short > 0.0 && short <= 0.5);
                prop_assert!(long < short, "{} !< {}", long, short);
            }
        }
    }
}
