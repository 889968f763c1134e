use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;

use hybrid_ber::channel::{hit_probability, hop_query};
use hybrid_ber::config::parse_scenario_with_overrides;
use hybrid_ber::detection::molecular_ber;
use hybrid_ber::mc::{simulate_hits, simulate_relay_ber, SimSpec};
use hybrid_ber::optimize::{ber_profile, grid_profile, optimize_split};
use hybrid_ber::presets::preset_text;
use hybrid_ber::{BerBreakdown, ConfigError, Error, Hop, NumericError, Scenario};

use crate::SweepVar;

/// Version of every CSV layout written by this binary.
pub const CSV_SCHEMA: u32 = 1;

/// Relative part of the hit-probability acceptance band.
pub const HIT_REL_TOL: f64 = 0.15;
/// Standard errors allowed between analytic and simulated values.
pub const SE_MULTIPLE: f64 = 3.0;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Numeric(NumericError),
    Io(std::io::Error),
    Mismatch { failed: usize, total: usize },
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Numeric(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Mismatch { failed, total } => {
                write!(f, "{failed} of {total} checkpoints outside tolerance")
            }
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Mismatch { .. } => 4,
            CliError::Io(_) => 74,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(c) => CliError::Config(c),
            Error::Numeric(n) => CliError::Numeric(n),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<NumericError> for CliError {
    fn from(e: NumericError) -> Self {
        CliError::Numeric(e)
    }
}

/// Reads `config` as a preset name if one matches, else as a path.
fn load(config: &str, overrides: &[(String, String)]) -> Result<Scenario, ConfigError> {
    let text = match preset_text(config) {
        Some(t) => t.to_string(),
        None => std::fs::read_to_string(config).map_err(|source| ConfigError::Io {
            path: config.to_string(),
            source,
        })?,
    };
    let s = parse_scenario_with_overrides(&text, overrides)?;
    s.validate()?;
    Ok(s)
}

fn num(v: f64) -> String {
    format!("{v:.8e}")
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(CliError::Io),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(CliError::Io),
    }
}

const LINK_COLUMNS: &str = "p_mol,p_in2on,p_on,p_off,p_e2e";

fn link_cells(b: &BerBreakdown) -> String {
    [b.p_mol, b.p_in2on, b.p_on, b.p_off, b.p_e2e]
        .map(num)
        .join(",")
}

impl SweepVar {
    fn column(self) -> &'static str {
        match self {
            SweepVar::ThresholdDest => "threshold_dest",
            SweepVar::RelayY => "relay_y_um",
            SweepVar::DriftY => "drift_y_um_per_s",
            SweepVar::TDmc => "t_dmc_ms",
        }
    }
}

/// The scenario at one sweep value, and the molecular symbol duration to
/// evaluate it at.
fn apply(base: &Scenario, var: SweepVar, v: f64) -> Result<(Scenario, f64), ConfigError> {
    let mut s = base.clone();
    let mut t_dmc = base.slot.t_dmc();
    match var {
        SweepVar::ThresholdDest => s.molecular.threshold_dest = v,
        SweepVar::RelayY => s.molecular.relay_pos.y = v / 1e6,
        SweepVar::DriftY => s.molecular.drift.y = v / 1e6,
        SweepVar::TDmc => {
            t_dmc = v / 1e3;
            s = s.with_t_dmc(t_dmc)?;
        }
    }
    s.validate()?;
    Ok((s, t_dmc))
}

pub fn sweep(
    config: &str,
    overrides: &[(String, String)],
    var: SweepVar,
    from: f64,
    to: f64,
    points: usize,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let base = load(config, overrides)?;
    if !(from < to) {
        return Err(ConfigError::invalid("sweep", format!("--from {from} must be below --to {to}")).into());
    }
    if points < 2 {
        return Err(ConfigError::invalid("sweep", "--points must be at least 2").into());
    }
    let values: Vec<f64> = (0..points)
        .map(|i| from + (to - from) * i as f64 / (points - 1) as f64)
        .collect();
    let rows: Vec<BerBreakdown> = values
        .par_iter()
        .map(|&v| -> Result<BerBreakdown, CliError> {
            let (s, t) = apply(&base, var, v)?;
            Ok(ber_profile(t, &s)?)
        })
        .collect::<Result<_, _>>()?;

    let mut csv = format!("{},{LINK_COLUMNS}\n", var.column());
    for (v, b) in values.iter().zip(&rows) {
        let _ = writeln!(csv, "{},{}", num(*v), link_cells(b));
    }
    emit(out, &csv)
}

pub fn optimize(
    config: &str,
    overrides: &[(String, String)],
    epsilon: f64,
    points: usize,
    out: Option<&Path>,
    summary_out: Option<&Path>,
) -> Result<(), CliError> {
    let scenario = load(config, overrides)?;
    if points < 2 {
        return Err(ConfigError::invalid("optimize", "--points must be at least 2").into());
    }
    let r = optimize_split(&scenario, epsilon)?;
    let profile = grid_profile(&scenario, points)?;

    let mut csv = format!("t_dmc_ms,{LINK_COLUMNS}\n");
    for b in &profile {
        let _ = writeln!(csv, "{},{}", num(b.t_dmc * 1e3), link_cells(b));
    }

    let b = &r.breakdown_opt;
    let summary = format!(
        "schema_version,t_dmc_opt_ms,p_e2e_opt,p_mol,p_in2on,p_on,p_off,iterations,epsilon,converged,flat,bracket_lo_ms,bracket_hi_ms\n\
         {CSV_SCHEMA},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        num(r.t_dmc_opt * 1e3),
        num(r.p_e2e_opt),
        num(b.p_mol),
        num(b.p_in2on),
        num(b.p_on),
        num(b.p_off),
        r.iterations,
        num(r.epsilon),
        r.converged,
        r.flat,
        num(r.bracket.0 * 1e3),
        num(r.bracket.1 * 1e3),
    );

    match out {
        Some(p) => {
            std::fs::write(p, &csv).map_err(CliError::Io)?;
            emit(None, &summary)?;
        }
        None => emit(None, &(csv + "\n" + &summary))?,
    }
    if let Some(p) = summary_out {
        std::fs::write(p, &summary).map_err(CliError::Io)?;
    }
    Ok(())
}

pub struct ValidateOpts {
    pub seed: u64,
    pub particles: u64,
    pub bits: u64,
    pub steps: u32,
}

struct Checkpoint {
    name: String,
    analytic: f64,
    empirical: f64,
    std_err: f64,
    tolerance: f64,
}

impl Checkpoint {
    fn pass(&self) -> bool {
        (self.analytic - self.empirical).abs() <= self.tolerance
    }
}

pub fn validate(
    config: &str,
    overrides: &[(String, String)],
    opts: ValidateOpts,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let scenario = load(config, overrides)?;
    if opts.steps < 100 {
        return Err(ConfigError::invalid("steps", "at least 100 steps per window").into());
    }
    if opts.particles == 0 {
        return Err(ConfigError::invalid("particles", "must be at least 1").into());
    }
    if opts.bits != 0 && opts.bits < 1000 {
        return Err(ConfigError::invalid("bits", "use 0 (skip) or at least 1000").into());
    }
    let link = &scenario.molecular;
    let mut checks = Vec::new();

    let hops = [(Hop::TransmitterToRelay, "tr"), (Hop::RelayToDestination, "rd")];
    for (i, (window, label)) in [(1.0, "half"), (2.0, "full")].into_iter().enumerate() {
        for (j, (hop, hop_name)) in hops.iter().enumerate() {
            let mut q = hop_query(link, *hop);
            q.time *= window;
            let analytic = hit_probability(&q).value;
            let seed = opts.seed.wrapping_add((2 * i + j) as u64);
            let spec = SimSpec::from_query(&q, opts.particles, seed).with_dt(q.time / opts.steps as f64);
            let est = simulate_hits(&spec)?;
            let se = est.std_err.max(1.0 / opts.particles as f64);
            checks.push(Checkpoint {
                name: format!("hit_{hop_name}_{label}_window"),
                analytic,
                empirical: est.p_hat,
                std_err: est.std_err,
                tolerance: (HIT_REL_TOL * analytic).max(SE_MULTIPLE * se),
            });
        }
    }

    if opts.bits > 0 {
        let analytic = molecular_ber(link)?;
        let dt = link.t_dmc / 2.0 / opts.steps as f64;
        let est = simulate_relay_ber(link, opts.bits, dt, opts.seed.wrapping_add(4))?;
        let se = est.std_err.max(1.0 / opts.bits as f64);
        checks.push(Checkpoint {
            name: "relay_ber".into(),
            analytic,
            empirical: est.ber,
            std_err: est.std_err,
            tolerance: SE_MULTIPLE * se,
        });
    }

    let mut csv = String::from("checkpoint,analytic,empirical,std_err,tolerance,pass\n");
    for c in &checks {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            c.name,
            num(c.analytic),
            num(c.empirical),
            num(c.std_err),
            num(c.tolerance),
            c.pass()
        );
    }
    emit(out, &csv)?;
    let failed = checks.iter().filter(|c| !c.pass()).count();
    if failed > 0 {
        return Err(CliError::Mismatch {
            failed,
            total: checks.len(),
        });
    }
    Ok(())
}
