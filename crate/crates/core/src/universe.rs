//! Stock universes: symbols with sector labels.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StockInfo {
    pub symbol: String,
    #[serde(default)]
    pub company: String,
    pub sector: String,
    /// Average market capitalization, carried as metadata only.
    #[serde(default)]
    pub amc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Universe {
    pub stocks: Vec<StockInfo>,
}

impl Universe {
    /// The 99-stock roster of ten economic sectors (2008), grouped by sector.
    pub fn roster() -> Universe {
        Self::from_csv(include_str!("../data/roster.csv").as_bytes()).expect("bundled roster")
    }

    /// Reads `symbol,company,sector,amc` rows; `company` and `amc` may be empty.
    pub fn from_csv<R: Read>(r: R) -> Result<Universe> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut stocks = Vec::new();
        for row in rdr.deserialize() {
            let s: StockInfo = row?;
            stocks.push(s);
        }
        Universe::new(stocks)
    }

    pub fn new(stocks: Vec<StockInfo>) -> Result<Universe> {
        for (k, s) in stocks.iter().enumerate() {
            if s.symbol.is_empty() {
                return Err(Error::Config(format!("universe row {} has no symbol", k + 1)));
            }
            if stocks[..k].iter().any(|o| o.symbol == s.symbol) {
                return Err(Error::Config(format!("duplicate symbol {} in universe", s.symbol)));
            }
        }
        Ok(Universe { stocks })
    }

    /// Symbols with sector labels and no further metadata.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Universe> {
        Universe::new(
            pairs
                .iter()
                .map(|(symbol, sector)| StockInfo {
                    symbol: symbol.clone(),
                    company: String::new(),
                    sector: sector.clone(),
                    amc: None,
                })
                .collect(),
        )
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for s in &self.stocks {
            wtr.serialize(s)?;
        }
        wtr.flush().map_err(|e| Error::io("<universe writer>", e))?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.stocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stocks.is_empty()
    }

    pub fn symbols(&self) -> Vec<String> {
        self.stocks.iter().map(|s| s.symbol.clone()).collect()
    }

    pub fn sectors(&self) -> Vec<String> {
        self.stocks.iter().map(|s| s.sector.clone()).collect()
    }

    /// Sector names in order of first appearance.
    pub fn sector_names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.stocks {
            if !out.contains(&s.sector) {
                out.push(s.sector.clone());
            }
        }
        out
    }

    pub fn index_of(&self, symbol: &str) -> Result<usize> {
        self.stocks
            .iter()
            .position(|s| s.symbol == symbol)
            .ok_or_else(|| Error::UnknownSymbol(symbol.to_string()))
    }

    pub fn sector_members(&self, sector: &str) -> Result<Vec<String>> {
        let members: Vec<String> =
            self.stocks.iter().filter(|s| s.sector == sector).map(|s| s.symbol.clone()).collect();
        if members.is_empty() {
            return Err(Error::UnknownSector(sector.to_string()));
        }
        Ok(members)
    }

    /// The sub-universe of `symbols`, in the given order.
    pub fn select(&self, symbols: &[String]) -> Result<Universe> {
        let stocks = symbols
            .iter()
            .map(|s| self.index_of(s).map(|k| self.stocks[k].clone()))
            .collect::<Result<Vec<_>>>()?;
        Universe::new(stocks)
    }
}
