//! Flag parsing and scenario assembly: defaults, then config file or
//! preset, then flag overrides, validated last.

use std::path::{Path, PathBuf};

use clap::Parser;

use twinbft::{AdversaryStrategy, ScenarioConfig};

use crate::presets::{Preset, Scenario};
use crate::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "twinbft",
    about = "Deterministic simulator for twin-node Byzantine equivocation detection",
    version
)]
pub struct Cli {
    /// Scenario file (flat `key = value` lines).
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Canned experiment battery: fig5, fig6, fig7, fig8, table2.
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    /// Parent count N (the network holds 2N identities).
    #[arg(long, value_name = "N")]
    pub nodes: Option<u32>,
    /// Byzantine parent count t.
    #[arg(long, value_name = "T")]
    pub byzantine: Option<u32>,
    /// uniform-random, equivocator[:SPLIT], consistent, or silent.
    #[arg(long, value_name = "STRATEGY")]
    pub strategy: Option<String>,
    /// Iteration cap per run.
    #[arg(long, value_name = "COUNT")]
    pub iterations: Option<u64>,
    /// Iterations between blacklist clears (0 disables resets).
    #[arg(long, value_name = "COUNT")]
    pub reset_interval: Option<u64>,
    /// Transaction payload alphabet size k.
    #[arg(long, value_name = "K")]
    pub alphabet: Option<u32>,
    /// Base RNG seed.
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
    /// Independent replicates per scenario.
    #[arg(long, value_name = "COUNT")]
    pub replicates: Option<u32>,
    /// Delivery delay upper bound, in ticks.
    #[arg(long, value_name = "TICKS")]
    pub delay_max: Option<u64>,
    /// Output directory for results.csv, results.json and plotdata/.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Dump a per-scenario message trace (replicate 0).
    #[arg(long)]
    pub trace: bool,
}

/// Field-level overrides applied on top of a file or preset.
#[derive(Clone, Default, Debug)]
pub struct Overrides {
    pub nodes: Option<u32>,
    pub byzantine: Option<u32>,
    pub strategy: Option<AdversaryStrategy>,
    pub iterations: Option<u64>,
    pub reset_interval: Option<u64>,
    pub alphabet: Option<u32>,
    pub seed: Option<u64>,
    pub replicates: Option<u32>,
    pub delay_max: Option<u64>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(v) = self.nodes {
            cfg.parents = v;
        }
        if let Some(v) = self.byzantine {
            cfg.byzantine = v;
        }
        if let Some(v) = self.strategy {
            cfg.strategy = v;
        }
        if let Some(v) = self.iterations {
            cfg.iterations = v;
        }
        if let Some(v) = self.reset_interval {
            cfg.reset_interval = v;
        }
        if let Some(v) = self.alphabet {
            cfg.alphabet = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.replicates {
            cfg.replicates = v;
        }
        if let Some(v) = self.delay_max {
            cfg.delay_max = v;
        }
    }
}

impl Cli {
    pub fn overrides(&self) -> Result<Overrides, CliError> {
        let strategy = self
            .strategy
            .as_deref()
            .map(|s| s.parse::<AdversaryStrategy>().map_err(CliError::Usage))
            .transpose()?;
        Ok(Overrides {
            nodes: self.nodes,
            byzantine: self.byzantine,
            strategy,
            iterations: self.iterations,
            reset_interval: self.reset_interval,
            alphabet: self.alphabet,
            seed: self.seed,
            replicates: self.replicates,
            delay_max: self.delay_max,
        })
    }

    pub fn parsed_preset(&self) -> Result<Option<Preset>, CliError> {
        self.preset
            .as_deref()
            .map(|s| s.parse::<Preset>().map_err(CliError::Usage))
            .transpose()
    }
}

/// Assembles the scenario list: a preset expands to its battery, a
/// config file yields one scenario, bare flags yield one scenario from
/// defaults. Flag overrides are applied to every scenario, and every
/// result is validated.
pub fn load_scenarios(
    config_path: Option<&Path>,
    preset: Option<Preset>,
    overrides: &Overrides,
) -> Result<Vec<Scenario>, CliError> {
    let mut scenarios = match (config_path, preset) {
        (Some(_), Some(_)) => return Err(CliError::ConflictingSources),
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            vec![Scenario {
                id: "custom".into(),
                cfg: parse_config_text(path, &text)?,
            }]
        }
        (None, Some(preset)) => preset.scenarios(),
        (None, None) => vec![Scenario {
            id: "custom".into(),
            cfg: ScenarioConfig::default(),
        }],
    };
    for scenario in &mut scenarios {
        overrides.apply(&mut scenario.cfg);
        scenario.cfg.validate()?;
    }
    Ok(scenarios)
}

/// Parses the flat `key = value` scenario format. Unknown keys, bad
/// values, and duplicate keys are reported with their line number.
pub fn parse_config_text(path: &Path, text: &str) -> Result<ScenarioConfig, CliError> {
    let mut cfg = ScenarioConfig::default();
    let mut seen: Vec<String> = Vec::new();
    let fail = |line: usize, message: String| CliError::ConfigFile {
        path: path.to_path_buf(),
        line,
        message,
    };
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(fail(line_no, format!("expected `key = value`, got {line:?}")));
        };
        let key = key.trim();
        let value = value.trim();
        if seen.iter().any(|k| k == key) {
            return Err(fail(line_no, format!("duplicate key {key:?}")));
        }
        seen.push(key.to_string());

        macro_rules! parse_num {
            ($field:ident) => {
                cfg.$field = value.parse().map_err(|e| {
                    fail(line_no, format!("field {key:?}: invalid value {value:?} ({e})"))
                })?
            };
        }
        match key {
            "nodes" => parse_num!(parents),
            "byzantine" => parse_num!(byzantine),
            "iterations" => parse_num!(iterations),
            "reset_interval" => parse_num!(reset_interval),
            "alphabet" => parse_num!(alphabet),
            "seed" => parse_num!(seed),
            "replicates" => parse_num!(replicates),
            "delay_max" => parse_num!(delay_max),
            "strategy" => {
                cfg.strategy = value
                    .parse()
                    .map_err(|e| fail(line_no, format!("field \"strategy\": {e}")))?;
            }
            other => {
                return Err(fail(line_no, format!("unknown field {other:?}")));
            }
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(text: &str) -> ScenarioConfig {
        parse_config_text(Path::new("test.cfg"), text).unwrap()
    }

    #[test]
    fn parses_full_config_file() {
        let cfg = tmp(
            "# experiment\n\
             nodes = 100\n\
             byzantine = 30\n\
             strategy = equivocator:0.25\n\
             iterations = 50\n\
             reset_interval = 0\n\
             alphabet = 4\n\
             seed = 7\n\
             replicates = 2\n\
             delay_max = 3\n",
        );
        assert_eq!(cfg.parents, 100);
        assert_eq!(cfg.byzantine, 30);
        assert_eq!(cfg.strategy, AdversaryStrategy::Equivocator { split: 0.25 });
        assert_eq!(cfg.iterations, 50);
        assert_eq!(cfg.reset_interval, 0);
        assert_eq!(cfg.alphabet, 4);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.replicates, 2);
        assert_eq!(cfg.delay_max, 3);
    }

    #[test]
    fn errors_carry_line_and_field() {
        let err =
            parse_config_text(Path::new("x.cfg"), "nodes = 10\nbyzantine = many\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("x.cfg:2"), "{msg}");
        assert!(msg.contains("byzantine"), "{msg}");

        let err = parse_config_text(Path::new("x.cfg"), "bogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("unknown field"), "{err}");

        let err = parse_config_text(Path::new("x.cfg"), "nodes = 1\nnodes = 2\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn flags_override_file_values() {
        let dir = std::env::temp_dir().join("twinbft-options-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("scenario.cfg");
        std::fs::write(&path, "nodes = 100\nbyzantine = 30\nseed = 1\n").unwrap();

        let overrides = Overrides {
            seed: Some(7),
            ..Overrides::default()
        };
        let scenarios = load_scenarios(Some(&path), None, &overrides).unwrap();
        assert_eq!(scenarios.len(), 1);
        assert_eq!(scenarios[0].cfg.parents, 100);
        assert_eq!(scenarios[0].cfg.seed, 7);
    }

    #[test]
    fn invalid_combination_is_a_validation_error() {
        let overrides = Overrides {
            nodes: Some(100),
            byzantine: Some(100),
            ..Overrides::default()
        };
        let err = load_scenarios(None, None, &overrides).unwrap_err();
        assert!(matches!(err, CliError::Invalid(_)));
        assert!(err.to_string().contains("t < N"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn preset_and_config_conflict() {
        let err = load_scenarios(
            Some(Path::new("whatever.cfg")),
            Some(Preset::Fig5),
            &Overrides::default(),
        )
        .unwrap_err();
        assert!(matches!(err, CliError::ConflictingSources));
    }

    #[test]
    fn preset_with_seed_override() {
        let overrides = Overrides {
            seed: Some(99),
            ..Overrides::default()
        };
        let scenarios = load_scenarios(None, Some(Preset::Fig5), &overrides).unwrap();
        assert_eq!(scenarios.len(), 4);
        assert!(scenarios.iter().all(|s| s.cfg.seed == 99));
    }
}
