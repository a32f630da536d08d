//! Corpora of synthetic logs drawn from weighted behavioral regimes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{generate_log, EventLog, GeneratorSpec};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_for};

/// Parameter ranges of one family of logs; every log of the regime draws
/// its generator parameters uniformly from the inclusive ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub name: String,
    /// Share of the corpus, relative to the other regimes' weights.
    #[serde(default = "one")]
    pub weight: usize,
    pub n_traces: [usize; 2],
    pub alphabet_size: [usize; 2],
    #[serde(default = "two_two")]
    pub branching: [usize; 2],
    #[serde(default)]
    pub noise: [f64; 2],
    pub min_len: usize,
    pub max_len: usize,
}

fn one() -> usize {
    1
}

fn two_two() -> [usize; 2] {
    [2, 2]
}

fn default_prefix() -> String {
    "log".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub seed: u64,
    pub n_logs: usize,
    /// Index of the first log; disjoint offsets give disjoint corpora.
    #[serde(default)]
    pub offset: usize,
    #[serde(default = "default_prefix")]
    pub prefix: String,
    pub regimes: Vec<Regime>,
}

impl Regime {
    fn new(name: &str, weight: usize, n_traces: [usize; 2], alphabet_size: [usize; 2], branching: [usize; 2], noise: [f64; 2], len: [usize; 2]) -> Self {
        Regime {
            name: name.into(),
            weight,
            n_traces,
            alphabet_size,
            branching,
            noise,
            min_len: len[0],
            max_len: len[1],
        }
    }

    /// Four regimes used by the end-to-end experiments. `branching` dominates
    /// the mix, so one pipeline is the most frequent meta-target, as in
    /// corpora of real logs.
    pub fn defaults() -> Vec<Regime> {
        vec![
            Regime::new("branching", 14, [60, 150], [6, 10], [2, 2], [0.1, 0.3], [4, 12]),
            Regime::new("small_alphabet", 3, [60, 150], [3, 4], [2, 3], [0.0, 0.2], [2, 6]),
            Regime::new("sequential", 2, [60, 150], [6, 10], [1, 1], [0.0, 0.0], [5, 12]),
            Regime::new("wide_short", 2, [60, 150], [20, 30], [2, 4], [0.2, 0.5], [2, 6]),
        ]
    }

    fn validate(&self) -> Result<()> {
        let range = |what: &str, r: [usize; 2], min: usize| {
            if r[0] < min || r[0] > r[1] {
                Err(Error::config(format!("regime {}: bad {what} range {:?}", self.name, r)))
            } else {
                Ok(())
            }
        };
        range("n_traces", self.n_traces, 1)?;
        range("alphabet_size", self.alphabet_size, 1)?;
        range("branching", self.branching, 1)?;
        if self.branching[0] > self.alphabet_size[0] {
            return Err(Error::config(format!(
                "regime {}: branching may exceed the alphabet size",
                self.name
            )));
        }
        if !(0.0 <= self.noise[0] && self.noise[0] <= self.noise[1] && self.noise[1] <= 1.0) {
            return Err(Error::config(format!("regime {}: bad noise range {:?}", self.name, self.noise)));
        }
        if self.weight == 0 {
            return Err(Error::config(format!("regime {}: weight must be positive", self.name)));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::config(format!("regime {}: empty trace-length range", self.name)));
        }
        Ok(())
    }
}

impl CorpusSpec {
    pub fn new(seed: u64, n_logs: usize) -> Self {
        CorpusSpec {
            seed,
            n_logs,
            offset: 0,
            prefix: default_prefix(),
            regimes: Regime::defaults(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.regimes.is_empty() {
            return Err(Error::config("corpus needs at least one regime"));
        }
        self.regimes.iter().try_for_each(Regime::validate)
    }

    /// Regimes take turns in proportion to their weights: log `i` belongs
    /// to slot `i mod Σweight`.
    pub fn regime_of(&self, index: usize) -> &Regime {
        let total: usize = self.regimes.iter().map(|r| r.weight).sum();
        let mut slot = index % total;
        for r in &self.regimes {
            if slot < r.weight {
                return r;
            }
            slot -= r.weight;
        }
        unreachable!("slot below total weight")
    }

    /// Generator parameters of log `index` (absolute, offset included).
    pub fn spec_for(&self, index: usize) -> GeneratorSpec {
        let r = self.regime_of(index);
        let seed = derive_seed(self.seed, index as u64);
        let mut rng = rng_for(seed, u64::MAX);
        let alphabet_size = rng.random_range(r.alphabet_size[0]..=r.alphabet_size[1]);
        GeneratorSpec {
            name: format!("{}{index:05}_{}", self.prefix, r.name),
            seed,
            n_traces: rng.random_range(r.n_traces[0]..=r.n_traces[1]),
            alphabet_size,
            branching: rng.random_range(r.branching[0]..=r.branching[1].min(alphabet_size)),
            noise: rng.random_range(r.noise[0]..=r.noise[1]),
            min_len: r.min_len,
            max_len: r.max_len,
        }
    }

    pub fn specs(&self) -> Vec<GeneratorSpec> {
        (self.offset..self.offset + self.n_logs).map(|i| self.spec_for(i)).collect()
    }

    pub fn generate(&self) -> Result<Vec<EventLog>> {
        self.validate()?;
        self.specs().iter().map(generate_log).collect()
    }
}
