//! Scenario parameters shared by the simulator and the command-line
//! front end.

use thiserror::Error;

use crate::adversary::AdversaryStrategy;

/// Everything that defines one experiment.
#[derive(Clone, PartialEq, Debug)]
pub struct ScenarioConfig {
    /// Number of parent nodes; the network holds `2 * parents` identities.
    pub parents: u32,
    /// Number of Byzantine parents (each brings its child along).
    pub byzantine: u32,
    /// Strategy driving every Byzantine node.
    pub strategy: AdversaryStrategy,
    /// Iteration cap for one run.
    pub iterations: u64,
    /// Iterations between blacklist clears; 0 disables resets.
    pub reset_interval: u64,
    /// Alphabet size for transaction payloads.
    pub alphabet: u32,
    /// Base RNG seed; replicate `r` derives its own stream from it.
    pub seed: u64,
    /// Number of independent replicates.
    pub replicates: u32,
    /// Upper bound of the per-message delivery delay, in ticks.
    pub delay_max: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            parents: 5,
            byzantine: 0,
            strategy: AdversaryStrategy::UniformRandom,
            iterations: 100,
            reset_interval: 3,
            alphabet: 2,
            seed: 0,
            replicates: 1,
            delay_max: 4,
        }
    }
}

#[derive(Clone, PartialEq, Debug, Error)]
pub enum ConfigError {
    #[error("byzantine count must satisfy t < N (got t = {t}, N = {n})")]
    TooManyByzantine { t: u32, n: u32 },
    #[error("at least one parent is required")]
    NoParents,
    #[error("iterations must be at least 1")]
    NoIterations,
    #[error("alphabet size must be at least 2, got {0}")]
    AlphabetTooSmall(u32),
    #[error("replicates must be at least 1")]
    NoReplicates,
    #[error("delay bound must be at least 1 tick")]
    ZeroDelay,
    #[error("equivocator split must lie in [0, 1], got {0}")]
    BadSplit(f64),
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.parents == 0 {
            return Err(ConfigError::NoParents);
        }
        if self.byzantine >= self.parents {
            return Err(ConfigError::TooManyByzantine {
                t: self.byzantine,
                n: self.parents,
            });
        }
        if self.iterations == 0 {
            return Err(ConfigError::NoIterations);
        }
        if self.alphabet < 2 {
            return Err(ConfigError::AlphabetTooSmall(self.alphabet));
        }
        if self.replicates == 0 {
            return Err(ConfigError::NoReplicates);
        }
        if self.delay_max == 0 {
            return Err(ConfigError::ZeroDelay);
        }
        if let AdversaryStrategy::Equivocator { split } = self.strategy {
            if !(0.0..=1.0).contains(&split) || split.is_nan() {
                return Err(ConfigError::BadSplit(split));
            }
        }
        Ok(())
    }

    /// Derives the base seed for one replicate. A SplitMix64 step keeps
    /// replicate streams independent even for adjacent seeds.
    pub fn replicate_seed(&self, replicate: u32) -> u64 {
        splitmix64(self.seed ^ (u64::from(replicate).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
    }
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
