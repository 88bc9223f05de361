//! Runs one game per cell of the property grid.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::oprf::{Oprf, OprfKind};
use crate::params::{with_backend, BackendSpec, BackendVisitor, Tier};

use super::{
    account_uniqueness, correctness_exhaustion, expected_grid, game_idp_untraceability, game_rp_designation,
    game_rp_unlinkability, game_user_identification, Cell, Column, GameReport, Grid, Row, SecurityConfig, UnlinkabilityConfig,
    UntraceabilityConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridOptions {
    pub seed: u64,
    /// Trials per security game.
    pub trials: u64,
    /// Samples per privacy game.
    pub samples: u64,
    /// Play the DY_HE column with deterministic HE.
    #[serde(default)]
    pub deterministic_he: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self { seed: 0, trials: 10_000, samples: 10_000, deterministic_he: false }
    }
}

/// Backend a cell is played on. Exhaustive rows and untraceability run
/// on desk parameters; the rest need blinding factors too large to hit by
/// chance. Correctness on 2HashRSA_N uses the literal server, since the
/// unity filter refuses a few honest blinded values by design.
pub fn column_spec(column: Column, row: Row, options: &GridOptions) -> BackendSpec {
    let tier = match row {
        Row::AccountUniqueness | Row::AccountCorrectness | Row::IdpUntraceability => Tier::Desk,
        _ => Tier::Lab,
    };
    let spec = BackendSpec::new(column.kind(), tier, options.seed)
        .deterministic(options.deterministic_he && column.kind() == OprfKind::DyHe);
    if row == Row::AccountCorrectness {
        spec.unity_filter(false)
    } else {
        spec
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub row: Row,
    pub column: Column,
    pub report: GameReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRun {
    pub options: GridOptions,
    pub reports: Vec<CellReport>,
    pub observed: Grid,
    /// (row, column, expected, observed).
    pub mismatches: Vec<(Row, Column, Cell, Cell)>,
}

struct PlayCell {
    row: Row,
    column: Column,
    options: GridOptions,
}

impl BackendVisitor for PlayCell {
    type Output = Result<GameReport>;

    fn visit<B: Oprf>(self, backend: B) -> Result<GameReport> {
        let o = self.options;
        let b = Arc::new(backend);
        let security = SecurityConfig {
            trials: o.trials,
            checking: self.row.checking(),
            expose_xk: self.column.exposes_intermediates(),
            seed: o.seed,
            ..SecurityConfig::default()
        };
        match self.row {
            Row::AccountUniqueness => account_uniqueness(&*b),
            Row::AccountCorrectness => correctness_exhaustion(&*b, o.seed),
            Row::IdpUntraceability => {
                game_idp_untraceability(b, &UntraceabilityConfig { samples: o.samples, seed: o.seed, ..Default::default() })
            }
            Row::RpUnlinkability => {
                // With x_j^{k_i} public the RP is the one checking PID_RP and
                // needs e in the clear.
                let checking = self.column.exposes_intermediates();
                let cfg = UnlinkabilityConfig { samples: o.samples, checking, seed: o.seed, ..Default::default() };
                game_rp_unlinkability(b, &cfg)
            }
            Row::UserIdentification | Row::UserIdentificationChecked => game_user_identification(b, &security),
            Row::RpDesignation | Row::RpDesignationChecked => game_rp_designation(b, &security),
        }
    }
}

pub fn play_cell(row: Row, column: Column, options: GridOptions) -> Result<GameReport> {
    with_backend(&column_spec(column, row, &options), PlayCell { row, column, options })?
}

pub fn run_grid(options: GridOptions) -> Result<GridRun> {
    run_columns(options, &Column::ALL)
}

/// The grid restricted to `columns`; cells outside them stay inconclusive
/// and are left out of the comparison.
pub fn run_columns(options: GridOptions, columns: &[Column]) -> Result<GridRun> {
    let mut observed = Grid([[Cell::Inconclusive; 5]; 8]);
    let mut reports: Vec<CellReport> = Vec::new();
    for row in Row::ALL {
        for column in Column::ALL.into_iter().filter(|c| columns.contains(c)) {
            let merged = row.merges_rsa_columns() && column == Column::RsaNPublic;
            let report = match reports.iter().find(|c| merged && c.row == row && c.column == Column::RsaNSecret) {
                Some(secret) => secret.report.clone(),
                None => play_cell(row, column, options)?,
            };
            observed.set(row, column, report.verdict);
            reports.push(CellReport { row, column, report });
        }
    }
    let mismatches = expected_grid().diff(&observed).into_iter().filter(|m| columns.contains(&m.1)).collect();
    Ok(GridRun { options, reports, observed, mismatches })
}
