//! Command line, experiment configuration and default resolution.

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use cobound::conditions::support_radius;
use cobound::fieldsim::InnovationLaw;
use cobound::{CoefficientField, GeneratorRule, MultiIndex};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Partial sums and verdicts of every condition over a cutoff ladder.
    Check,
    /// Transfer functions, round-trip residual and norm identity.
    Decompose,
    /// Pointwise decomposition residual on sampled lattices.
    Verify,
    /// Partial sums of simulated fields.
    Simulate,
    /// Variance and normality of normalized partial sums.
    Wip,
    /// Orthomartingale moment bound.
    Moments,
    /// Norm and large-deviation bounds from the decomposition.
    Tails,
    /// Orlicz-norm constants and tail decay.
    Orlicz,
    /// Randomized tail-sum and tail-norm inequality batches.
    Tailsum,
    /// Regression fixtures for the two counterexample families.
    Counterexample,
}

impl Command {
    pub fn token(&self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Decompose => "decompose",
            Command::Verify => "verify",
            Command::Simulate => "simulate",
            Command::Wip => "wip",
            Command::Moments => "moments",
            Command::Tails => "tails",
            Command::Orlicz => "orlicz",
            Command::Tailsum => "tailsum",
            Command::Counterexample => "counterexample",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cobound", version, about = "Orthomartingale and coboundary parts of linear random fields: condition checks, decompositions and limit experiments")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// TOML experiment configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "cobound-out")]
    pub out: PathBuf,
    /// Comma-separated cutoffs; `2^k` and `2^a..2^b` are accepted.
    #[arg(long)]
    pub cutoff_ladder: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleName {
    /// The single innovation `e` (`a_0 = 1`).
    Unit,
    Explicit,
    Geometric,
    Power,
    DyadicSpikes,
    HarmonicAxis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientEntry {
    #[serde(default)]
    pub channel: usize,
    pub index: Vec<i64>,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub rule: Option<RuleName>,
    pub coefficients: Option<Vec<CoefficientEntry>>,
    /// Delimited coefficient file (`k,j_1,...,j_d,value`).
    pub file: Option<PathBuf>,
    pub rho: Option<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
    /// Cutoff ladder for condition checks.
    pub cutoffs: Option<Vec<u64>>,
    /// Materialization cutoff for decomposition and simulation.
    pub cutoff: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: Option<Vec<i64>>,
    pub replications: Option<u64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub levels: Option<Vec<f64>>,
    pub sizes: Option<Vec<Vec<i64>>>,
    pub box_size: Option<i64>,
    pub tolerance: Option<f64>,
    pub trials: Option<u64>,
    pub dims: Option<Vec<usize>>,
    pub laws: Option<Vec<InnovationLaw>>,
    pub dump_values: Option<bool>,
}

/// Configuration as written by the user.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub dimension: Option<usize>,
    pub seed: Option<u64>,
    pub law: Option<InnovationLaw>,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Configuration with every default used by the command filled in; this is
/// what reports echo.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub command: Command,
    pub dimension: usize,
    pub seed: u64,
    pub law: InnovationLaw,
    pub field: FieldConfig,
    pub run: RunConfig,
}

/// Parse `1,2,2^4,2^10..2^12` into a list of cutoffs.
pub fn parse_ladder(text: &str) -> CliResult<Vec<u64>> {
    let bad = |t: &str| CliError::Config(format!("cannot parse cutoff `{t}`"));
    let power = |t: &str| -> CliResult<u32> {
        let e: u32 = t.strip_prefix("2^").ok_or_else(|| bad(t))?.parse().map_err(|_| bad(t))?;
        if e > 63 {
            return Err(bad(t));
        }
        Ok(e)
    };
    let mut out = Vec::new();
    for token in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((a, b)) = token.split_once("..") {
            let (a, b) = (power(a.trim())?, power(b.trim())?);
            out.extend((a..=b).map(|e| 1u64 << e));
        } else if token.starts_with("2^") {
            out.push(1u64 << power(token)?);
        } else {
            out.push(token.parse().map_err(|_| bad(token))?);
        }
    }
    if out.is_empty() {
        return Err(CliError::Config("empty cutoff ladder".into()));
    }
    Ok(out)
}

fn powers_of_two(from: u32, to: u32) -> Vec<u64> {
    (from..=to).map(|e| 1u64 << e).collect()
}

impl ResolvedConfig {
    /// Merge the file configuration with command-line overrides and fill
    /// command-specific defaults.
    pub fn resolve(cli: &Cli, file: ExperimentConfig) -> CliResult<Self> {
        if let Some(c) = file.command {
            if c != cli.command {
                return Err(CliError::Config(format!(
                    "config is for `{}` but `{}` was requested",
                    c.token(),
                    cli.command.token()
                )));
            }
        }
        let command = cli.command;
        let mut field = file.field;
        let mut run = file.run;
        let seed = cli.seed.or(file.seed).unwrap_or(0);
        let law = file.law.unwrap_or(InnovationLaw::Gaussian);

        let rule = field.rule.unwrap_or(if field.coefficients.is_some() || field.file.is_some() {
            RuleName::Explicit
        } else {
            RuleName::Unit
        });
        field.rule = Some(rule);
        if rule == RuleName::Explicit && field.coefficients.is_some() == field.file.is_some() {
            return Err(CliError::Config("explicit fields need exactly one of `coefficients` or `file`".into()));
        }
        let inferred = match rule {
            RuleName::Unit => None,
            RuleName::Explicit => field
                .coefficients
                .as_ref()
                .and_then(|c| c.first())
                .map(|c| c.index.len()),
            RuleName::Geometric => field.rho.as_ref().map(Vec::len),
            RuleName::Power => field.alpha.as_ref().map(Vec::len),
            RuleName::DyadicSpikes => Some(1),
            RuleName::HarmonicAxis => Some(2),
        };
        let dimension = match (file.dimension, inferred) {
            (Some(d), Some(i)) if d != i => {
                return Err(CliError::Config(format!("dimension {d} conflicts with the field (dimension {i})")))
            }
            (Some(d), _) => d,
            (None, Some(i)) => i,
            (None, None) => run.n.as_ref().map_or(1, Vec::len),
        };
        if !(1..=cobound::lattice::MAX_DIMENSION).contains(&dimension) {
            return Err(CliError::Config(format!("dimension {dimension} is not supported")));
        }

        if let Some(text) = &cli.cutoff_ladder {
            field.cutoffs = Some(parse_ladder(text)?);
        }
        let d = dimension;
        let filled = |m: i64| vec![m; d];
        match command {
            Command::Check => {
                field.cutoffs.get_or_insert_with(|| match rule {
                    RuleName::DyadicSpikes => powers_of_two(10, 20),
                    RuleName::HarmonicAxis => powers_of_two(6, 12),
                    RuleName::Unit | RuleName::Explicit => vec![],
                    _ => powers_of_two(4, 10),
                });
            }
            Command::Decompose => {
                run.tolerance.get_or_insert(1e-9);
            }
            Command::Verify => {
                run.tolerance.get_or_insert(1e-10);
                run.box_size.get_or_insert(8);
                run.laws.get_or_insert_with(|| {
                    vec![InnovationLaw::Rademacher, InnovationLaw::Gaussian, InnovationLaw::Uniform]
                });
                run.dump_values.get_or_insert(false);
            }
            Command::Simulate => {
                run.n.get_or_insert_with(|| filled(match d { 1 => 256, 2 => 32, _ => 8 }));
                run.replications.get_or_insert(1000);
                run.dump_values.get_or_insert(false);
            }
            Command::Wip => {
                run.n.get_or_insert_with(|| filled(match d { 1 => 4096, 2 => 64, _ => 16 }));
                run.replications.get_or_insert(2000);
            }
            Command::Moments => {
                run.n.get_or_insert_with(|| filled(match d { 1 => 100, 2 => 32, _ => 8 }));
                run.replications.get_or_insert(10_000);
                run.p.get_or_insert(4.0);
            }
            Command::Tails => {
                run.n.get_or_insert_with(|| filled(match d { 1 => 256, 2 => 32, _ => 8 }));
                run.replications.get_or_insert(10_000);
                run.p.get_or_insert(2.0);
                let root = (run.n.as_ref().unwrap().iter().product::<i64>() as f64).sqrt();
                run.levels.get_or_insert_with(|| [0.5, 1.0, 2.0, 3.0].iter().map(|k| k / root).collect());
            }
            Command::Orlicz => {
                run.n.get_or_insert_with(|| filled(match d { 1 => 512, 2 => 32, _ => 8 }));
                run.replications.get_or_insert(10_000);
                run.q.get_or_insert(2.0 / (3.0 * d as f64));
                let root = (run.n.as_ref().unwrap().iter().product::<i64>() as f64).sqrt();
                run.levels.get_or_insert_with(|| [1.0, 2.0, 3.0, 4.0].iter().map(|k| k * root).collect());
                if d == 1 {
                    run.sizes.get_or_insert_with(|| vec![vec![128], vec![256], vec![512]]);
                }
            }
            Command::Tailsum => {
                run.trials.get_or_insert(500);
                run.dims.get_or_insert_with(|| vec![1, 2]);
            }
            Command::Counterexample => {}
        }
        if matches!(command, Command::Decompose | Command::Verify | Command::Simulate | Command::Wip | Command::Moments | Command::Tails | Command::Orlicz) {
            field.cutoff.get_or_insert(match rule {
                RuleName::DyadicSpikes => 10,
                RuleName::Unit | RuleName::Explicit => 0,
                _ => 32,
            });
        }
        if let Some(n) = &run.n {
            if n.len() != d {
                return Err(CliError::Config(format!("block size {n:?} does not have {d} entries")));
            }
        }
        if let Some(sizes) = &run.sizes {
            if sizes.iter().any(|s| s.len() != d) {
                return Err(CliError::Config(format!("every entry of `sizes` needs {d} entries")));
            }
        }
        Ok(ResolvedConfig {
            command,
            dimension,
            seed,
            law,
            field,
            run,
        })
    }

    /// The explicit field, read from inline coefficients or a file.
    fn explicit_field(&self) -> CliResult<CoefficientField> {
        if let Some(entries) = &self.field.coefficients {
            let channels = entries.iter().map(|e| e.channel + 1).max().unwrap_or(1);
            if entries.iter().any(|e| e.index.len() != self.dimension) {
                return Err(CliError::Config(format!("every coefficient index needs {} entries", self.dimension)));
            }
            return Ok(CoefficientField::from_entries(
                self.dimension,
                channels,
                entries.iter().map(|e| (e.channel, MultiIndex::from(e.index.clone()), e.value)),
            )?);
        }
        let path = self.field.file.as_ref().expect("resolved explicit field has a source");
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let field = CoefficientField::from_delimited(&text, Some(self.dimension))?;
        Ok(field)
    }

    pub fn rule(&self) -> CliResult<GeneratorRule> {
        let d = self.dimension;
        let need = |v: &Option<Vec<f64>>, name: &str| {
            v.clone().ok_or_else(|| CliError::Config(format!("rule needs `{name}`")))
        };
        Ok(match self.field.rule.expect("resolved") {
            RuleName::Unit => {
                GeneratorRule::explicit(CoefficientField::from_pairs(d, [(MultiIndex::zeros(d), 1.0)])?)
            }
            RuleName::Explicit => GeneratorRule::explicit(self.explicit_field()?),
            RuleName::Geometric => GeneratorRule::geometric(need(&self.field.rho, "rho")?)?,
            RuleName::Power => GeneratorRule::power(need(&self.field.alpha, "alpha")?)?,
            RuleName::DyadicSpikes => GeneratorRule::dyadic_spikes(),
            RuleName::HarmonicAxis => GeneratorRule::harmonic_axis(),
        })
    }

    /// Cutoff ladder; explicit fields default to their support radius.
    pub fn ladder(&self, rule: &GeneratorRule) -> Vec<u64> {
        match &self.field.cutoffs {
            Some(c) if !c.is_empty() => c.clone(),
            _ => match rule.kind() {
                cobound::lattice::RuleKind::Explicit(f) => vec![support_radius(f)],
                _ => vec![32],
            },
        }
    }

    /// Finite field used by decomposition and simulation commands.
    pub fn finite_field(&self) -> CliResult<CoefficientField> {
        let rule = self.rule()?;
        let cutoff = match rule.kind() {
            cobound::lattice::RuleKind::Explicit(f) => support_radius(f),
            _ => self.field.cutoff.unwrap_or(32),
        };
        Ok(rule.materialize(cutoff)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(command: Command) -> Cli {
        Cli {
            command,
            config: None,
            seed: None,
            workers: None,
            out: PathBuf::from("out"),
            cutoff_ladder: None,
        }
    }

    #[test]
    fn ladders() {
        assert_eq!(parse_ladder("1, 4,2^3").unwrap(), vec![1, 4, 8]);
        assert_eq!(parse_ladder("2^10..2^12").unwrap(), vec![1024, 2048, 4096]);
        assert!(parse_ladder("2^x").is_err());
        assert!(parse_ladder("").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("colour = 1").is_err());
        assert!(ExperimentConfig::from_toml("[run]\nreps = 3").is_err());
        let ok = ExperimentConfig::from_toml("seed = 3\n[run]\nreplications = 10").unwrap();
        assert_eq!(ok.run.replications, Some(10));
    }

    #[test]
    fn defaults_follow_the_command() {
        let r = ResolvedConfig::resolve(&cli(Command::Wip), ExperimentConfig::default()).unwrap();
        assert_eq!(r.dimension, 1);
        assert_eq!(r.run.n, Some(vec![4096]));
        assert_eq!(r.field.rule, Some(RuleName::Unit));
        let cfg = ExperimentConfig::from_toml("dimension = 2").unwrap();
        let r = ResolvedConfig::resolve(&cli(Command::Wip), cfg).unwrap();
        assert_eq!(r.run.n, Some(vec![64, 64]));
    }

    #[test]
    fn conflicting_settings_are_config_errors() {
        let cfg = ExperimentConfig::from_toml("command = \"check\"").unwrap();
        assert!(ResolvedConfig::resolve(&cli(Command::Wip), cfg).is_err());
        let cfg = ExperimentConfig::from_toml("dimension = 2\n[field]\nrule = \"dyadic-spikes\"").unwrap();
        assert!(ResolvedConfig::resolve(&cli(Command::Check), cfg).is_err());
        let cfg = ExperimentConfig::from_toml("dimension = 1\n[run]\nn = [4, 4]").unwrap();
        assert!(ResolvedConfig::resolve(&cli(Command::Wip), cfg).is_err());
    }

    #[test]
    fn explicit_coefficients() {
        let cfg = ExperimentConfig::from_toml(
            "[field]\ncoefficients = [{ index = [0, 0], value = 1.0 }, { channel = 1, index = [1, 0], value = 2.0 }]",
        )
        .unwrap();
        let r = ResolvedConfig::resolve(&cli(Command::Decompose), cfg).unwrap();
        assert_eq!(r.dimension, 2);
        let f = r.finite_field().unwrap();
        assert_eq!(f.channel_count(), 2);
        assert_eq!(f.get(1, &MultiIndex::from([1, 0])), 2.0);
    }
}
