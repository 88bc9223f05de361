//! RunConfig and its assembly from defaults, a TOML file and flags.

use std::path::{Path, PathBuf};

use clap::Args;
use idtsso::oprf::OprfKind;
use idtsso::params::Tier;
use idtsso::protocol::{AccountSync, Flow};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub backend: Option<OprfKind>,
    pub tier: Tier,
    pub seed: u64,
    pub flow: Flow,
    pub pid_checking: bool,
    pub account_sync: AccountSync,
    /// The RP computes PID_RP. Only legal together with `game`.
    pub vulnerable_pid_by_rp: bool,
    pub game: bool,
    pub unsafe_backend: bool,
    pub deterministic_he: bool,
    pub expose_xk: bool,
    /// Flip a character of PID_U after the IdP signs it.
    pub tamper_token: bool,
    /// Users (p) and RPs (s) registered for a flow run.
    pub users: u32,
    pub rps: u32,
    pub trials: Option<u64>,
    pub samples: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            backend: None,
            tier: Tier::Desk,
            seed: 0,
            flow: Flow::Implicit,
            pid_checking: false,
            account_sync: AccountSync::Eager,
            vulnerable_pid_by_rp: false,
            game: false,
            unsafe_backend: false,
            deterministic_he: false,
            expose_xk: false,
            tamper_token: false,
            users: 2,
            rps: 2,
            trials: None,
            samples: None,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn backend_or(&self, default: OprfKind) -> OprfKind {
        self.backend.unwrap_or(default)
    }

    /// Mode combinations no command accepts.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.vulnerable_pid_by_rp && !self.game {
            return Err(CliError::Usage("--vulnerable-pid-by-rp is an attack mode and needs --game".into()));
        }
        if self.deterministic_he && self.backend.is_some_and(|b| b != OprfKind::DyHe) {
            return Err(CliError::Usage("--deterministic-he applies to DY_HE only".into()));
        }
        if self.users == 0 || self.rps == 0 {
            return Err(CliError::Usage("--users and --rps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Flags shared by every subcommand. Unset flags fall through to the
/// config file, then to the defaults.
#[derive(Args, Debug, Default)]
pub struct Flags {
    /// TOML file mirroring RunConfig.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_kind)]
    pub backend: Option<OprfKind>,
    /// desk, lab or full.
    #[arg(long, global = true, value_parser = parse_tier)]
    pub tier: Option<Tier>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// implicit or auth-code.
    #[arg(long, global = true, value_parser = parse_flow)]
    pub flow: Option<Flow>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub pid_checking: Option<bool>,
    /// eager, lazy or off.
    #[arg(long, global = true, value_parser = parse_sync)]
    pub account_sync: Option<AccountSync>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub vulnerable_pid_by_rp: Option<bool>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub game: Option<bool>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub unsafe_backend: Option<bool>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub deterministic_he: Option<bool>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub expose_xk: Option<bool>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub tamper_token: Option<bool>,
    #[arg(long, global = true)]
    pub users: Option<u32>,
    #[arg(long, global = true)]
    pub rps: Option<u32>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    #[arg(long, global = true)]
    pub samples: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<OprfKind, String> {
    s.parse().map_err(|e: idtsso::Error| e.to_string())
}

fn parse_tier(s: &str) -> Result<Tier, String> {
    s.parse().map_err(|e: idtsso::Error| e.to_string())
}

fn parse_flow(s: &str) -> Result<Flow, String> {
    s.parse().map_err(|e: idtsso::Error| e.to_string())
}

fn parse_sync(s: &str) -> Result<AccountSync, String> {
    s.parse().map_err(|e: idtsso::Error| e.to_string())
}

fn read_file(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("reading {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

impl Flags {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => read_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($f:ident),+) => { $(if let Some(v) = self.$f.clone() { c.$f = v; })+ };
        }
        take!(tier, seed, flow, pid_checking, account_sync, vulnerable_pid_by_rp, game, unsafe_backend);
        take!(deterministic_he, expose_xk, tamper_token, users, rps);
        if self.backend.is_some() {
            c.backend = self.backend;
        }
        if self.trials.is_some() {
            c.trials = self.trials;
        }
        if self.samples.is_some() {
            c.samples = self.samples;
        }
        if self.out.is_some() {
            c.out = self.out.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let dir = std::env::temp_dir().join(format!("idtsso-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.toml");
        std::fs::write(&path, "backend = \"DY_HE\"\nseed = 9\npid_checking = true\n").unwrap();
        let flags = Flags { config: Some(path.clone()), seed: Some(4), ..Default::default() };
        let c = flags.resolve().unwrap();
        assert_eq!(c.backend, Some(OprfKind::DyHe));
        assert_eq!(c.seed, 4);
        assert!(c.pid_checking);
        assert_eq!(c.tier, Tier::Desk);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("bakend = \"HashDH\"").is_err());
    }

    #[test]
    fn vulnerable_mode_needs_game() {
        let c = RunConfig { vulnerable_pid_by_rp: true, ..Default::default() };
        assert!(matches!(c.validate(), Err(CliError::Usage(_))));
        assert!(RunConfig { game: true, ..c }.validate().is_ok());
    }
}
