//! Domain types shared by every stage of the link model.
//!
//! Everything here is stored in strict SI units (metres, seconds, watts,
//! m²/s). Unit-suffixed input is converted once, at load time, by
//! [`crate::config`].

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::ConfigError;

/// A 3-D quantity: a position in metres or a velocity in metres per second.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vector3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vector3 {
    pub const ZERO: Vector3 = Vector3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vector3 { x, y, z }
    }

    /// Builds a vector from micrometre (or μm/s) components.
    pub fn from_micro(x: f64, y: f64, z: f64) -> Self {
        Vector3::new(x / 1e6, y / 1e6, z / 1e6)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vector3 {
    fn from(a: [f64; 3]) -> Self {
        Vector3::new(a[0], a[1], a[2])
    }
}

impl Add for Vector3 {
    type Output = Vector3;
    fn add(self, o: Vector3) -> Vector3 {
        Vector3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vector3 {
    type Output = Vector3;
    fn sub(self, o: Vector3) -> Vector3 {
        Vector3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vector3 {
    type Output = Vector3;
    fn neg(self) -> Vector3 {
        Vector3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vector3 {
    type Output = Vector3;
    fn mul(self, s: f64) -> Vector3 {
        Vector3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Which hop of the relay chain a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hop {
    /// Transmitter to relay, type-A molecules.
    TransmitterToRelay,
    /// Relay to destination, type-B molecules.
    RelayToDestination,
}

/// Relay-assisted diffusion link: transmitter at the origin, relay at
/// `relay_pos`, destination at `dest_pos`.
#[derive(Debug, Clone, PartialEq)]
pub struct MolecularLinkConfig {
    pub drift: Vector3,
    pub diffusion_a: f64,
    pub diffusion_b: f64,
    pub relay_pos: Vector3,
    pub dest_pos: Vector3,
    pub relay_radius: f64,
    pub dest_radius: f64,
    /// Molecules released by the transmitter for a `1`.
    pub molecules_a: u64,
    /// Molecules released by the relay for a `1`.
    pub molecules_b: u64,
    pub noise_mean: f64,
    pub noise_var: f64,
    pub threshold_relay: f64,
    pub threshold_dest: f64,
    /// Molecular symbol duration; each hop gets half of it.
    pub t_dmc: f64,
    pub prior_one: f64,
}

impl MolecularLinkConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = "molecular";
        finite_vec(m, "drift", self.drift)?;
        finite_vec(m, "relay_pos", self.relay_pos)?;
        finite_vec(m, "dest_pos", self.dest_pos)?;
        positive(m, "diffusion_a", self.diffusion_a)?;
        positive(m, "diffusion_b", self.diffusion_b)?;
        positive(m, "relay_radius", self.relay_radius)?;
        positive(m, "dest_radius", self.dest_radius)?;
        positive(m, "t_dmc", self.t_dmc)?;
        non_negative(m, "noise_mean", self.noise_mean)?;
        non_negative(m, "noise_var", self.noise_var)?;
        not_nan(m, "threshold_relay", self.threshold_relay)?;
        not_nan(m, "threshold_dest", self.threshold_dest)?;
        if !(0.0..=1.0).contains(&self.prior_one) {
            return Err(ConfigError::invalid(
                "molecular.prior_one",
                format!("{} is not a probability", self.prior_one),
            ));
        }
        if self.relay_pos.norm() <= self.relay_radius {
            return Err(ConfigError::invalid(
                "molecular.relay_pos",
                "relay sphere encloses the transmitter",
            ));
        }
        if (self.dest_pos - self.relay_pos).norm() <= self.dest_radius {
            return Err(ConfigError::invalid(
                "molecular.dest_pos",
                "destination sphere encloses the relay",
            ));
        }
        Ok(())
    }

    /// Copy of the link with a different molecular symbol duration.
    pub fn with_t_dmc(&self, t_dmc: f64) -> Self {
        MolecularLinkConfig {
            t_dmc,
            ..self.clone()
        }
    }
}

/// Tissue column of the implant-to-body path-loss table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TissueProfile {
    Deep,
    NearSurface,
}

impl TissueProfile {
    /// `(path loss at d0 in dB, path-loss exponent, shadowing sigma in dB)`.
    pub fn defaults(self) -> (f64, f64, f64) {
        match self {
            TissueProfile::Deep => (47.14, 4.26, 7.85),
            TissueProfile::NearSurface => (49.81, 4.22, 6.81),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TissueProfile::Deep => "deep",
            TissueProfile::NearSurface => "near_surface",
        }
    }
}

/// Implant (in-body) to on-body link with log-normal shadowing.
#[derive(Debug, Clone, PartialEq)]
pub struct In2onConfig {
    pub pl_ref_db: f64,
    pub ref_dist: f64,
    pub pathloss_exp: f64,
    pub dist: f64,
    pub tx_power: f64,
    pub noise_psd: f64,
    pub shadow_sigma_db: f64,
    pub tissue: TissueProfile,
}

impl In2onConfig {
    /// Link with the path-loss parameters of a tissue profile.
    pub fn for_tissue(
        tissue: TissueProfile,
        ref_dist: f64,
        dist: f64,
        tx_power: f64,
        noise_psd: f64,
    ) -> Self {
        let (pl_ref_db, pathloss_exp, shadow_sigma_db) = tissue.defaults();
        In2onConfig {
            pl_ref_db,
            ref_dist,
            pathloss_exp,
            dist,
            tx_power,
            noise_psd,
            shadow_sigma_db,
            tissue,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = "in2on";
        finite(s, "path_loss_ref_db", self.pl_ref_db)?;
        positive(s, "ref_dist", self.ref_dist)?;
        positive(s, "pathloss_exp", self.pathloss_exp)?;
        positive(s, "dist", self.dist)?;
        positive(s, "tx_power", self.tx_power)?;
        positive(s, "noise_psd", self.noise_psd)?;
        positive(s, "shadow_sigma_db", self.shadow_sigma_db)
    }
}

/// Wearable-to-gateway link with log-normal SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct OnBodyConfig {
    /// Linear power gain of the path (a loss of L dB is `10^(-L/10)`).
    pub path_gain: f64,
    pub tx_power: f64,
    pub noise_psd: f64,
    pub lognorm_mu: f64,
    pub lognorm_sigma: f64,
}

impl OnBodyConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = "on_body";
        positive(s, "path_gain", self.path_gain)?;
        positive(s, "tx_power", self.tx_power)?;
        positive(s, "noise_psd", self.noise_psd)?;
        finite(s, "lognorm_mu", self.lognorm_mu)?;
        positive(s, "lognorm_sigma", self.lognorm_sigma)
    }
}

/// Gateway-to-provider link, Rayleigh fading.
#[derive(Debug, Clone, PartialEq)]
pub struct OffBodyConfig {
    pub tx_power: f64,
    pub dist: f64,
    pub pathloss_exp: f64,
    pub noise_psd: f64,
}

impl OffBodyConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = "off_body";
        positive(s, "tx_power", self.tx_power)?;
        positive(s, "dist", self.dist)?;
        positive(s, "pathloss_exp", self.pathloss_exp)?;
        positive(s, "noise_psd", self.noise_psd)
    }
}

/// Relative slack allowed when checking `t_total = t_dmc + t_ec` on values
/// that went through decimal parsing.
const SLOT_SUM_RTOL: f64 = 1e-12;

/// Partition of one slot into its molecular and electromagnetic parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotBudget {
    t_total: f64,
    t_dmc: f64,
    t_ec: f64,
}

impl SlotBudget {
    pub fn new(t_total: f64, t_dmc: f64, t_ec: f64) -> Result<Self, ConfigError> {
        positive("slot", "t_total", t_total)?;
        positive("slot", "t_dmc", t_dmc)?;
        positive("slot", "t_ec", t_ec)?;
        if (t_dmc + t_ec - t_total).abs() > SLOT_SUM_RTOL * t_total {
            return Err(ConfigError::invalid(
                "slot",
                format!("t_dmc + t_ec = {} s but t_total = {t_total} s", t_dmc + t_ec),
            ));
        }
        Ok(SlotBudget {
            t_total,
            t_dmc,
            t_ec,
        })
    }

    /// Gives the molecular segment `t_dmc` and the rest of the slot to EC.
    pub fn split(t_total: f64, t_dmc: f64) -> Result<Self, ConfigError> {
        if !(t_dmc < t_total) {
            return Err(ConfigError::invalid(
                "slot.t_dmc",
                format!("{t_dmc} s leaves no time in a {t_total} s slot"),
            ));
        }
        SlotBudget::new(t_total, t_dmc, t_total - t_dmc)
    }

    pub fn t_total(&self) -> f64 {
        self.t_total
    }

    pub fn t_dmc(&self) -> f64 {
        self.t_dmc
    }

    pub fn t_ec(&self) -> f64 {
        self.t_ec
    }

    /// Symbol duration of each of the three EM links.
    pub fn t_em_link(&self) -> f64 {
        self.t_ec / 3.0
    }
}

/// Everything needed to evaluate the end-to-end chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub molecular: MolecularLinkConfig,
    pub in2on: In2onConfig,
    pub on_body: OnBodyConfig,
    pub off_body: OffBodyConfig,
    pub slot: SlotBudget,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.molecular.validate()?;
        self.in2on.validate()?;
        self.on_body.validate()?;
        self.off_body.validate()?;
        if self.molecular.t_dmc != self.slot.t_dmc() {
            return Err(ConfigError::invalid(
                "molecular.t_dmc",
                "differs from slot.t_dmc",
            ));
        }
        Ok(())
    }

    /// Same scenario with the slot re-split at `t_dmc`.
    pub fn with_t_dmc(&self, t_dmc: f64) -> Result<Self, ConfigError> {
        let slot = SlotBudget::split(self.slot.t_total(), t_dmc)?;
        Ok(Scenario {
            molecular: self.molecular.with_t_dmc(t_dmc),
            slot,
            ..self.clone()
        })
    }
}

fn finite(section: &str, name: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(
            format!("{section}.{name}"),
            format!("{v} is not finite"),
        ))
    }
}

/// Infinite thresholds are allowed: they pin a detector on or off.
fn not_nan(section: &str, name: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_nan() {
        Err(ConfigError::invalid(format!("{section}.{name}"), "is NaN"))
    } else {
        Ok(())
    }
}

fn finite_vec(section: &str, name: &str, v: Vector3) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(
            format!("{section}.{name}"),
            "component is not finite",
        ))
    }
}

fn positive(section: &str, name: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::invalid(
            format!("{section}.{name}"),
            format!("{v} must be > 0"),
        ))
    }
}

fn non_negative(section: &str, name: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(ConfigError::invalid(
            format!("{section}.{name}"),
            format!("{v} must be >= 0"),
        ))
    }
}
