//! Scenario files.
//!
//! A scenario is a TOML document with a `schema_version` and five tables
//! (`molecular`, `slot`, `in2on`, `on_body`, `off_body`). Dimensioned fields
//! carry their unit in the key name, e.g. `relay_radius_um = 100` or
//! `relay_radius_m = 1e-4`; exactly one spelling of each field may appear.
//! Values are converted to SI on load, and [`to_toml`] writes the SI
//! spellings back so that a save/load round trip is exact.

use std::collections::BTreeSet;
use std::path::Path;

use toml::{Table, Value};

use crate::error::ConfigError;
use crate::model::{
    In2onConfig, MolecularLinkConfig, OffBodyConfig, OnBodyConfig, Scenario, SlotBudget,
    TissueProfile, Vector3,
};

pub const SCHEMA_VERSION: u32 = 1;

/// The bundled default: the published simulation settings plus the EM link
/// parameters documented in the preset file.
pub const DEFAULT_SCENARIO_TOML: &str = include_str!("../../../presets/table3.toml");

#[derive(Debug, Clone, Copy)]
enum Conv {
    /// Divide by this many input units per SI unit.
    Per(f64),
    /// dBm (or dBm/Hz) to W (or W/Hz).
    Dbm,
    /// Loss in dB to a linear power gain.
    LossDb,
}

impl Conv {
    fn apply(self, v: f64) -> f64 {
        match self {
            Conv::Per(n) => v / n,
            Conv::Dbm => 10f64.powf((v - 30.0) / 10.0),
            Conv::LossDb => 10f64.powf(-v / 10.0),
        }
    }
}

type Spellings = &'static [(&'static str, Conv)];

const SI: Conv = Conv::Per(1.0);
const MICRO: Conv = Conv::Per(1e6);
const MILLI: Conv = Conv::Per(1e3);

const DRIFT: Spellings = &[("drift_m_per_s", SI), ("drift_um_per_s", MICRO)];
const DIFF_A: Spellings = &[("diffusion_a_m2_per_s", SI), ("diffusion_a_um2_per_s", Conv::Per(1e12))];
const DIFF_B: Spellings = &[("diffusion_b_m2_per_s", SI), ("diffusion_b_um2_per_s", Conv::Per(1e12))];
const RELAY_POS: Spellings = &[("relay_pos_m", SI), ("relay_pos_um", MICRO)];
const DEST_POS: Spellings = &[("dest_pos_m", SI), ("dest_pos_um", MICRO)];
const RELAY_R: Spellings = &[("relay_radius_m", SI), ("relay_radius_um", MICRO)];
const DEST_R: Spellings = &[("dest_radius_m", SI), ("dest_radius_um", MICRO)];
const T_TOTAL: Spellings = &[("t_total_s", SI), ("t_total_ms", MILLI)];
const T_DMC: Spellings = &[("t_dmc_s", SI), ("t_dmc_ms", MILLI)];
const T_EC: Spellings = &[("t_ec_s", SI), ("t_ec_ms", MILLI)];
const REF_DIST: Spellings = &[("ref_dist_m", SI), ("ref_dist_mm", MILLI)];
const DIST: Spellings = &[("dist_m", SI), ("dist_mm", MILLI)];
const POWER: Spellings = &[("tx_power_w", SI), ("tx_power_dbm", Conv::Dbm)];
const PSD: Spellings = &[("noise_psd_w_per_hz", SI), ("noise_psd_dbm_per_hz", Conv::Dbm)];
const PATH_GAIN: Spellings = &[("path_gain", SI), ("path_loss_db", Conv::LossDb)];

const ALL_GROUPS: &[Spellings] = &[
    DRIFT, DIFF_A, DIFF_B, RELAY_POS, DEST_POS, RELAY_R, DEST_R, T_TOTAL, T_DMC, T_EC, REF_DIST,
    DIST, POWER, PSD, PATH_GAIN,
];

/// One table of the document, tracking which keys were consumed so that
/// misspelled keys are reported instead of silently ignored.
struct Section<'a> {
    name: &'static str,
    table: &'a Table,
    used: BTreeSet<&'static str>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &'static str) -> Result<Self, ConfigError> {
        match root.get(name) {
            Some(Value::Table(table)) => Ok(Section {
                name,
                table,
                used: BTreeSet::new(),
            }),
            Some(_) => Err(ConfigError::Parse(format!("`{name}` must be a table"))),
            None => Err(ConfigError::Parse(format!("missing table `[{name}]`"))),
        }
    }

    fn field(&self, key: &str) -> String {
        format!("{}.{key}", self.name)
    }

    fn pick(&mut self, spellings: Spellings) -> Result<Option<(&'a Value, Conv, &'static str)>, ConfigError> {
        let mut found = None;
        for &(key, conv) in spellings {
            if let Some(v) = self.table.get(key) {
                self.used.insert(key);
                if let Some((_, _, prev)) = found {
                    return Err(ConfigError::invalid(
                        self.field(key),
                        format!("given twice (also as `{prev}`)"),
                    ));
                }
                found = Some((v, conv, key));
            }
        }
        Ok(found)
    }

    fn num(&self, key: &str, v: &Value) -> Result<f64, ConfigError> {
        match v {
            Value::Float(f) => Ok(*f),
            Value::Integer(i) => Ok(*i as f64),
            _ => Err(ConfigError::invalid(self.field(key), "expected a number")),
        }
    }

    fn opt_scalar(&mut self, spellings: Spellings) -> Result<Option<f64>, ConfigError> {
        match self.pick(spellings)? {
            Some((v, conv, key)) => Ok(Some(conv.apply(self.num(key, v)?))),
            None => Ok(None),
        }
    }

    fn scalar(&mut self, spellings: Spellings) -> Result<f64, ConfigError> {
        self.opt_scalar(spellings)?
            .ok_or_else(|| ConfigError::invalid(self.field(spellings[0].0), "missing"))
    }

    fn vec3(&mut self, spellings: Spellings) -> Result<Vector3, ConfigError> {
        let (v, conv, key) = self
            .pick(spellings)?
            .ok_or_else(|| ConfigError::invalid(self.field(spellings[0].0), "missing"))?;
        let arr = match v {
            Value::Array(a) if a.len() == 3 => a,
            _ => return Err(ConfigError::invalid(self.field(key), "expected [x, y, z]")),
        };
        let c = |i: usize| -> Result<f64, ConfigError> { Ok(conv.apply(self.num(key, &arr[i])?)) };
        Ok(Vector3::new(c(0)?, c(1)?, c(2)?))
    }

    fn opt_plain(&mut self, key: &'static str) -> Result<Option<f64>, ConfigError> {
        match self.table.get(key) {
            Some(v) => {
                self.used.insert(key);
                Ok(Some(self.num(key, v)?))
            }
            None => Ok(None),
        }
    }

    fn plain(&mut self, key: &'static str) -> Result<f64, ConfigError> {
        self.opt_plain(key)?
            .ok_or_else(|| ConfigError::invalid(self.field(key), "missing"))
    }

    fn count(&mut self, key: &'static str) -> Result<u64, ConfigError> {
        self.used.insert(key);
        match self.table.get(key) {
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as u64),
            Some(_) => Err(ConfigError::invalid(
                self.field(key),
                "expected a non-negative integer",
            )),
            None => Err(ConfigError::invalid(self.field(key), "missing")),
        }
    }

    fn opt_str(&mut self, key: &'static str) -> Result<Option<&'a str>, ConfigError> {
        match self.table.get(key) {
            Some(Value::String(s)) => {
                self.used.insert(key);
                Ok(Some(s.as_str()))
            }
            Some(_) => Err(ConfigError::invalid(self.field(key), "expected a string")),
            None => Ok(None),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        for key in self.table.keys() {
            if !self.used.contains(key.as_str()) {
                return Err(ConfigError::invalid(self.field(key), "unknown key"));
            }
        }
        Ok(())
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ConfigError> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    scenario_from_table(&root)
}

/// Parses a scenario document, applying `key=value` overrides (dotted keys
/// such as `molecular.threshold_dest`) before validation.
pub fn parse_scenario_with_overrides(
    text: &str,
    overrides: &[(String, String)],
) -> Result<Scenario, ConfigError> {
    let mut root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    for (key, value) in overrides {
        apply_override(&mut root, key, value)?;
    }
    scenario_from_table(&root)
}

/// Reads a scenario file and applies overrides as in
/// [`parse_scenario_with_overrides`].
pub fn load_scenario_with_overrides(
    path: impl AsRef<Path>,
    overrides: &[(String, String)],
) -> Result<Scenario, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario_with_overrides(&text, overrides)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ConfigError> {
    load_scenario_with_overrides(path, &[])
}

/// The bundled default scenario.
pub fn default_scenario() -> Scenario {
    parse_scenario(DEFAULT_SCENARIO_TOML).expect("bundled scenario is valid")
}

/// Sets a dotted key in a parsed document. A key that is one spelling of a
/// unit-suffixed field replaces whichever spelling the document used.
pub fn apply_override(root: &mut Table, key: &str, value: &str) -> Result<(), ConfigError> {
    let (section, field) = key
        .split_once('.')
        .ok_or_else(|| ConfigError::invalid(key, "override keys look like `section.field`"))?;
    let parsed: Value = match format!("v = {value}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(value.to_string()),
    };
    let table = root
        .entry(section.to_string())
        .or_insert_with(|| Value::Table(Table::new()))
        .as_table_mut()
        .ok_or_else(|| ConfigError::invalid(section, "not a table"))?;
    if let Some(group) = ALL_GROUPS.iter().find(|g| g.iter().any(|(k, _)| *k == field)) {
        for (k, _) in group.iter() {
            table.remove(*k);
        }
    }
    table.insert(field.to_string(), parsed);
    Ok(())
}

fn scenario_from_table(root: &Table) -> Result<Scenario, ConfigError> {
    match root.get("schema_version") {
        Some(Value::Integer(v)) if *v == SCHEMA_VERSION as i64 => {}
        Some(Value::Integer(v)) => {
            return Err(ConfigError::SchemaVersion {
                found: *v as u32,
                expected: SCHEMA_VERSION,
            })
        }
        _ => return Err(ConfigError::Parse("missing integer `schema_version`".into())),
    }
    for key in root.keys() {
        if !matches!(
            key.as_str(),
            "schema_version" | "molecular" | "slot" | "in2on" | "on_body" | "off_body"
        ) {
            return Err(ConfigError::invalid(key.as_str(), "unknown table"));
        }
    }

    let mut s = Section::new(root, "slot")?;
    let t_total = s.scalar(T_TOTAL)?;
    let t_dmc = s.scalar(T_DMC)?;
    let slot = match s.opt_scalar(T_EC)? {
        Some(t_ec) => SlotBudget::new(t_total, t_dmc, t_ec)?,
        None => SlotBudget::split(t_total, t_dmc)?,
    };
    s.finish()?;

    let mut m = Section::new(root, "molecular")?;
    let molecular = MolecularLinkConfig {
        drift: m.vec3(DRIFT)?,
        diffusion_a: m.scalar(DIFF_A)?,
        diffusion_b: m.scalar(DIFF_B)?,
        relay_pos: m.vec3(RELAY_POS)?,
        dest_pos: m.vec3(DEST_POS)?,
        relay_radius: m.scalar(RELAY_R)?,
        dest_radius: m.scalar(DEST_R)?,
        molecules_a: m.count("molecules_a")?,
        molecules_b: m.count("molecules_b")?,
        noise_mean: m.plain("noise_mean")?,
        noise_var: m.plain("noise_var")?,
        threshold_relay: m.plain("threshold_relay")?,
        threshold_dest: m.plain("threshold_dest")?,
        t_dmc: slot.t_dmc(),
        prior_one: m.opt_plain("prior_one")?.unwrap_or(0.5),
    };
    m.finish()?;

    let mut s = Section::new(root, "in2on")?;
    let tissue = match s.opt_str("tissue")?.unwrap_or("deep") {
        "deep" => TissueProfile::Deep,
        "near_surface" => TissueProfile::NearSurface,
        other => {
            return Err(ConfigError::invalid(
                "in2on.tissue",
                format!("`{other}` is not one of deep, near_surface"),
            ))
        }
    };
    let (pl, n, sigma) = tissue.defaults();
    let in2on = In2onConfig {
        pl_ref_db: s.opt_plain("path_loss_ref_db")?.unwrap_or(pl),
        ref_dist: s.scalar(REF_DIST)?,
        pathloss_exp: s.opt_plain("pathloss_exp")?.unwrap_or(n),
        dist: s.scalar(DIST)?,
        tx_power: s.scalar(POWER)?,
        noise_psd: s.scalar(PSD)?,
        shadow_sigma_db: s.opt_plain("shadow_sigma_db")?.unwrap_or(sigma),
        tissue,
    };
    s.finish()?;

    let mut s = Section::new(root, "on_body")?;
    let on_body = OnBodyConfig {
        path_gain: s.scalar(PATH_GAIN)?,
        tx_power: s.scalar(POWER)?,
        noise_psd: s.scalar(PSD)?,
        lognorm_mu: s.plain("lognorm_mu")?,
        lognorm_sigma: s.plain("lognorm_sigma")?,
    };
    s.finish()?;

    let mut s = Section::new(root, "off_body")?;
    let off_body = OffBodyConfig {
        tx_power: s.scalar(POWER)?,
        dist: s.scalar(DIST)?,
        pathloss_exp: s.plain("pathloss_exp")?,
        noise_psd: s.scalar(PSD)?,
    };
    s.finish()?;

    let scenario = Scenario {
        molecular,
        in2on,
        on_body,
        off_body,
        slot,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Writes a scenario using the SI spelling of every field.
pub fn to_toml(s: &Scenario) -> String {
    fn vec(v: Vector3) -> Value {
        Value::Array(v.to_array().iter().map(|&c| Value::Float(c)).collect())
    }
    fn table(entries: Vec<(&str, Value)>) -> Value {
        Value::Table(entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }
    let f = Value::Float;
    let m = &s.molecular;
    let mut root = Table::new();
    root.insert("schema_version".into(), Value::Integer(SCHEMA_VERSION as i64));
    root.insert(
        "slot".into(),
        table(vec![
            ("t_total_s", f(s.slot.t_total())),
            ("t_dmc_s", f(s.slot.t_dmc())),
            ("t_ec_s", f(s.slot.t_ec())),
        ]),
    );
    root.insert(
        "molecular".into(),
        table(vec![
            ("drift_m_per_s", vec(m.drift)),
            ("diffusion_a_m2_per_s", f(m.diffusion_a)),
            ("diffusion_b_m2_per_s", f(m.diffusion_b)),
            ("relay_pos_m", vec(m.relay_pos)),
            ("dest_pos_m", vec(m.dest_pos)),
            ("relay_radius_m", f(m.relay_radius)),
            ("dest_radius_m", f(m.dest_radius)),
            ("molecules_a", Value::Integer(m.molecules_a as i64)),
            ("molecules_b", Value::Integer(m.molecules_b as i64)),
            ("noise_mean", f(m.noise_mean)),
            ("noise_var", f(m.noise_var)),
            ("threshold_relay", f(m.threshold_relay)),
            ("threshold_dest", f(m.threshold_dest)),
            ("prior_one", f(m.prior_one)),
        ]),
    );
    let i = &s.in2on;
    root.insert(
        "in2on".into(),
        table(vec![
            ("tissue", Value::String(i.tissue.as_str().into())),
            ("path_loss_ref_db", f(i.pl_ref_db)),
            ("pathloss_exp", f(i.pathloss_exp)),
            ("shadow_sigma_db", f(i.shadow_sigma_db)),
            ("ref_dist_m", f(i.ref_dist)),
            ("dist_m", f(i.dist)),
            ("tx_power_w", f(i.tx_power)),
            ("noise_psd_w_per_hz", f(i.noise_psd)),
        ]),
    );
    let o = &s.on_body;
    root.insert(
        "on_body".into(),
        table(vec![
            ("path_gain", f(o.path_gain)),
            ("tx_power_w", f(o.tx_power)),
            ("noise_psd_w_per_hz", f(o.noise_psd)),
            ("lognorm_mu", f(o.lognorm_mu)),
            ("lognorm_sigma", f(o.lognorm_sigma)),
        ]),
    );
    let o = &s.off_body;
    root.insert(
        "off_body".into(),
        table(vec![
            ("tx_power_w", f(o.tx_power)),
            ("dist_m", f(o.dist)),
            ("pathloss_exp", f(o.pathloss_exp)),
            ("noise_psd_w_per_hz", f(o.noise_psd)),
        ]),
    );
    toml::to_string(&root).expect("scenario tables serialize")
}
