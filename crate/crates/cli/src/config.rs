//! Command line and JSON configuration, merged into one [`ExperimentConfig`].

use std::path::{Path, PathBuf};

use apriori::exponents::parse_rational;
use apriori::linear_solver::ManufacturedCase;
use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Exponents,
    MeshInfo,
    SolveLinear,
    SolveNonlinear,
    Verify,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Exponents => "exponents",
            Command::MeshInfo => "mesh-info",
            Command::SolveLinear => "solve-linear",
            Command::SolveNonlinear => "solve-nonlinear",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Chain,
    Gn,
    Regularity,
    Energy,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseSelection {
    ExpX1,
    ExpDiag,
    All,
}

impl CaseSelection {
    pub fn cases(self) -> Vec<ManufacturedCase> {
        match self {
            CaseSelection::ExpX1 => vec![ManufacturedCase::ExpX1],
            CaseSelection::ExpDiag => vec![ManufacturedCase::ExpDiagonal],
            CaseSelection::All => vec![ManufacturedCase::ExpX1, ManufacturedCase::ExpDiagonal],
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "apriori", version, about = "Finite-element checks of L-infinity a priori estimates")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON file with default values; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Space dimension.
    #[arg(long = "N")]
    pub dimension: Option<u32>,
    /// Comma-separated powers, rational or decimal (e.g. 3/2,2,2.5).
    #[arg(long = "p", value_delimiter = ',')]
    pub p_list: Option<Vec<String>>,
    /// Boundary index override.
    #[arg(long)]
    pub q: Option<String>,
    /// Comma-separated mesh subdivisions.
    #[arg(long = "n", value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Report directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub case: Option<CaseSelection>,
    #[arg(long, value_enum)]
    pub suite: Option<Suite>,
    /// Also write the mesh as text (mesh-info).
    #[arg(long)]
    pub dump: bool,
}

/// A power given as text or as a JSON number.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum PowerText {
    Text(String),
    Number(serde_json::Number),
}

impl PowerText {
    fn into_text(self) -> String {
        match self {
            PowerText::Text(s) => s,
            PowerText::Number(n) => n.to_string(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(rename = "N")]
    dimension: Option<u32>,
    p: Option<Vec<PowerText>>,
    q: Option<PowerText>,
    n: Option<Vec<usize>>,
    samples: Option<usize>,
    seed: Option<u64>,
    tol: Option<f64>,
    output: Option<PathBuf>,
    case: Option<CaseSelection>,
    suite: Option<Suite>,
    dump: Option<bool>,
}

/// Fully resolved run configuration. The output directory is left out of
/// the serialized form so reports do not depend on where they are written.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(rename = "N")]
    pub dimension: u32,
    /// Canonical rational text, e.g. `3/2`.
    pub p_list: Vec<String>,
    pub q_override: Option<String>,
    pub n_list: Vec<usize>,
    pub samples: usize,
    pub seed: Option<u64>,
    pub tol: f64,
    #[serde(skip)]
    pub output: PathBuf,
    pub case: CaseSelection,
    pub suite: Suite,
    pub dump: bool,
}

impl ExperimentConfig {
    /// Defaults for `command`.
    pub fn new(command: Command) -> Self {
        Self {
            command,
            dimension: 3,
            p_list: vec!["2".into()],
            q_override: None,
            n_list: vec![8],
            samples: 100,
            seed: None,
            tol: 1e-8,
            output: PathBuf::from("reports"),
            case: CaseSelection::All,
            suite: Suite::Chain,
            dump: false,
        }
    }

    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        let file = match &cli.config {
            Some(path) => read_file_config(path)?,
            None => FileConfig::default(),
        };
        let mut config = Self::new(cli.command);
        let file_p = file
            .p
            .map(|list| list.into_iter().map(PowerText::into_text).collect());
        let file_q = file.q.map(PowerText::into_text);

        config.dimension = cli.dimension.or(file.dimension).unwrap_or(config.dimension);
        config.p_list = cli.p_list.or(file_p).unwrap_or(config.p_list);
        config.q_override = cli.q.or(file_q);
        config.n_list = cli.n_list.or(file.n).unwrap_or(config.n_list);
        config.samples = cli.samples.or(file.samples).unwrap_or(config.samples);
        config.seed = cli.seed.or(file.seed);
        config.tol = cli.tol.or(file.tol).unwrap_or(config.tol);
        config.output = cli.output.or(file.output).unwrap_or(config.output);
        config.case = cli.case.or(file.case).unwrap_or(config.case);
        config.suite = cli.suite.or(file.suite).unwrap_or(config.suite);
        config.dump = cli.dump || file.dump.unwrap_or(false);
        config.validate()
    }

    /// Canonicalizes the powers and checks the values every command needs.
    pub fn validate(mut self) -> Result<Self, CliError> {
        if self.p_list.is_empty() {
            return Err(CliError::Usage("at least one p is required".into()));
        }
        self.p_list = self
            .p_list
            .iter()
            .map(|p| {
                parse_rational(p.trim())
                    .map(|r| r.to_string())
                    .map_err(|e| CliError::Usage(e.to_string()))
            })
            .collect::<Result<_, _>>()?;
        if let Some(q) = &self.q_override {
            let parsed = parse_rational(q.trim()).map_err(|e| CliError::Usage(e.to_string()))?;
            self.q_override = Some(parsed.to_string());
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return Err(CliError::Usage("--n needs positive mesh subdivisions".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(CliError::Usage(format!("--tol must be positive, got {}", self.tol)));
        }
        if self.samples == 0 {
            return Err(CliError::Usage("--samples must be positive".into()));
        }
        let needs_mesh = !matches!(self.command, Command::Exponents);
        if needs_mesh && self.dimension != 3 {
            return Err(CliError::Usage(format!(
                "{} works on the unit cube and needs --N 3, got {}",
                self.command.name(),
                self.dimension
            )));
        }
        let randomized = matches!(
            self.command,
            Command::SolveNonlinear | Command::Verify | Command::Sweep
        );
        if randomized && self.seed.is_none() {
            return Err(CliError::Usage(format!("{} needs --seed", self.command.name())));
        }
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated for randomized commands")
    }
}

fn read_file_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}
