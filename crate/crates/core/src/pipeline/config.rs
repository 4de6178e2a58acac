use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fitting::FitBounds;
use crate::ingest::{IntradayGrid, SchemaDescriptor, TickKind};
use crate::response::{averaged_lags, dense_lags, log_lags, AveragingPolicy, MATRIX_LAGS, RANK_LAGS};
use crate::signing::CarryPolicy;
use crate::synth::SynthSpec;
use crate::universe::Universe;

/// Directory-based tick data: one `<SYMBOL>.csv` per stock and kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub trades_dir: PathBuf,
    pub quotes_dir: PathBuf,
    #[serde(default = "trades_schema")]
    pub trades_schema: SchemaDescriptor,
    #[serde(default = "quotes_schema")]
    pub quotes_schema: SchemaDescriptor,
}

fn trades_schema() -> SchemaDescriptor {
    SchemaDescriptor::default_for(TickKind::Trades)
}

fn quotes_schema() -> SchemaDescriptor {
    SchemaDescriptor::default_for(TickKind::Quotes)
}

/// Which stocks to analyse and how they are grouped.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct UniverseConfig {
    /// CSV with `symbol,company,sector,amc`; the bundled 99-stock roster when absent.
    pub file: Option<PathBuf>,
    /// Restrict to these symbols, in this order.
    pub symbols: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LagConfig {
    /// Pair curves use every lag from 1 to this many seconds.
    pub pair_max: u32,
    pub averaged_points: usize,
    pub averaged_max: u32,
    pub matrix: Vec<u32>,
    pub rank: Vec<u32>,
    /// Ranking order is decided at this lag.
    pub rank_primary: u32,
}

impl Default for LagConfig {
    fn default() -> Self {
        LagConfig {
            pair_max: 1000,
            averaged_points: 34,
            averaged_max: 10_000,
            matrix: MATRIX_LAGS.to_vec(),
            rank: RANK_LAGS.to_vec(),
            rank_primary: 300,
        }
    }
}

impl LagConfig {
    pub fn pair_lags(&self) -> Vec<u32> {
        dense_lags(self.pair_max)
    }

    pub fn averaged(&self) -> Result<Vec<u32>> {
        if self.averaged_points == 34 && self.averaged_max == 10_000 {
            return Ok(averaged_lags());
        }
        log_lags(self.averaged_points, 1, self.averaged_max)
    }

    /// Every lag the all-pairs response pass needs.
    pub fn all_pairs_response(&self) -> Result<Vec<u32>> {
        let mut lags = self.averaged()?;
        lags.extend(&self.matrix);
        lags.extend(&self.rank);
        lags.push(self.rank_primary);
        lags.sort_unstable();
        lags.dedup();
        Ok(lags)
    }

    fn validate(&self) -> Result<()> {
        if self.pair_max == 0 {
            return Err(Error::InvalidLags("pair_max must be at least 1".into()));
        }
        for (name, v) in [("matrix", &self.matrix), ("rank", &self.rank)] {
            if v.is_empty() || v.contains(&0) || v.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidLags(format!("{name} lags must be positive and increasing")));
            }
        }
        if !self.rank.contains(&self.rank_primary) {
            return Err(Error::InvalidLags(format!("rank_primary {} is not among the rank lags", self.rank_primary)));
        }
        self.averaged()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Signs,
    Respond,
    Correlate,
    Noise,
    Matrix,
    Average,
    Rank,
    Fit,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Signs,
        Stage::Respond,
        Stage::Correlate,
        Stage::Noise,
        Stage::Matrix,
        Stage::Average,
        Stage::Rank,
        Stage::Fit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Signs => "signs",
            Stage::Respond => "respond",
            Stage::Correlate => "correlate",
            Stage::Noise => "noise",
            Stage::Matrix => "matrix",
            Stage::Average => "average",
            Stage::Rank => "rank",
            Stage::Fit => "fit",
        }
    }

    /// Stages that need the all-pairs pass over the universe.
    pub fn needs_all_pairs(self) -> bool {
        matches!(self, Stage::Matrix | Stage::Average | Stage::Rank)
    }
}

/// Sector label of symbols that are not in the bundled roster.
pub const UNLISTED_SECTOR: &str = "unlisted";

fn default_stages() -> Vec<Stage> {
    Stage::ALL.to_vec()
}

fn default_jobs() -> usize {
    1
}

fn default_top() -> usize {
    15
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Everything a run needs, stored as one TOML file.
///
/// Command-line flags override the matching keys after the file is read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    /// Worker threads; results do not depend on it.
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default = "default_stages")]
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub averaging_policy: AveragingPolicy,
    #[serde(default)]
    pub carry: CarryPolicy,
    #[serde(default)]
    pub grid: IntradayGrid,
    #[serde(default)]
    pub lags: LagConfig,
    #[serde(default)]
    pub universe: UniverseConfig,
    /// Ordered pairs `[i, j]` that get full pair curves.
    #[serde(default)]
    pub pairs: Vec<[String; 2]>,
    /// Number of stocks listed in each ranking.
    #[serde(default = "default_top")]
    pub rank_top: usize,
    #[serde(default)]
    pub fit: FitBounds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            out_dir: default_out(),
            jobs: default_jobs(),
            stages: default_stages(),
            averaging_policy: AveragingPolicy::default(),
            carry: CarryPolicy::default(),
            grid: IntradayGrid::default(),
            lags: LagConfig::default(),
            universe: UniverseConfig::default(),
            pairs: Vec::new(),
            rank_top: default_top(),
            fit: FitBounds::default(),
            data: None,
            synth: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        match (&self.data, &self.synth) {
            (None, None) => return Err(Error::Config("config needs a [data] or a [synth] section".into())),
            (Some(_), Some(_)) => return Err(Error::Config("config has both [data] and [synth]".into())),
            (_, Some(s)) => {
                s.validate()?;
                if s.slots != self.grid.slots() {
                    return Err(Error::Config(format!(
                        "synthetic market has {} slots but the grid has {}",
                        s.slots,
                        self.grid.slots()
                    )));
                }
            }
            _ => {}
        }
        self.lags.validate()
    }

    /// The analysed universe, in analysis order.
    ///
    /// With a universe file, `universe.symbols` must all be listed in it.
    /// Without one, symbols take their sector from the bundled roster, and
    /// symbols missing from the roster get the sector [`UNLISTED_SECTOR`].
    /// A synthetic market without a symbol list analyses all its stocks.
    pub fn universe(&self) -> Result<Universe> {
        if let Some(p) = &self.universe.file {
            let f = std::fs::File::open(p).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => Error::MissingInput(p.clone()),
                _ => Error::io(p, e),
            })?;
            let u = Universe::from_csv(f)?;
            return if self.universe.symbols.is_empty() { Ok(u) } else { u.select(&self.universe.symbols) };
        }
        let roster = Universe::roster();
        let symbols = match (&self.synth, self.universe.symbols.is_empty()) {
            (_, false) => self.universe.symbols.clone(),
            (Some(spec), true) => spec.symbols(),
            (None, true) => return Ok(roster),
        };
        let pairs: Vec<(String, String)> = symbols
            .iter()
            .map(|s| {
                let sector = match roster.index_of(s) {
                    Ok(k) => roster.stocks[k].sector.clone(),
                    Err(_) => UNLISTED_SECTOR.to_string(),
                };
                (s.clone(), sector)
            })
            .collect();
        Universe::from_pairs(&pairs)
    }

    /// Hash of every setting that affects results (`out_dir` and `jobs` excluded).
    pub fn result_hash(&self) -> Result<String> {
        let mut canonical = self.clone();
        canonical.out_dir = PathBuf::new();
        canonical.jobs = 1;
        Ok(hex::encode(Sha256::digest(canonical.to_toml()?.as_bytes())))
    }
}
