use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TickKind {
    Trades,
    Quotes,
}

impl TickKind {
    /// Logical column names, in their default file order.
    pub fn required_columns(self) -> [&'static str; 4] {
        match self {
            TickKind::Trades => ["date", "time", "price", "volume"],
            TickKind::Quotes => ["date", "time", "bid", "ask"],
        }
    }
}

/// Layout of a delimited tick file.
///
/// With a header row, required columns are located by name and extra
/// columns are ignored. Without one, `columns` gives the file order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemaDescriptor {
    pub delimiter: char,
    pub has_header: bool,
    pub columns: Vec<String>,
    pub date_format: String,
}

impl SchemaDescriptor {
    pub fn default_for(kind: TickKind) -> Self {
        SchemaDescriptor {
            delimiter: ',',
            has_header: true,
            columns: kind.required_columns().iter().map(|s| s.to_string()).collect(),
            date_format: "%Y-%m-%d".to_string(),
        }
    }

    pub(crate) fn delimiter_byte(&self) -> Result<u8> {
        u8::try_from(self.delimiter)
            .ok()
            .filter(u8::is_ascii)
            .ok_or_else(|| Error::Config(format!("delimiter {:?} is not ASCII", self.delimiter)))
    }

    /// Field positions of the four required columns, in `required_columns` order.
    pub(crate) fn resolve(&self, kind: TickKind, header: Option<&[String]>) -> Result<[usize; 4]> {
        let names: Vec<String> = match header {
            Some(h) => h.iter().map(|s| s.trim().to_ascii_lowercase()).collect(),
            None => self.columns.iter().map(|s| s.trim().to_ascii_lowercase()).collect(),
        };
        let mut out = [0usize; 4];
        for (slot, want) in out.iter_mut().zip(kind.required_columns()) {
            *slot = names.iter().position(|n| n == want).ok_or_else(|| {
                let msg = format!("missing column {want:?} in {names:?}");
                if header.is_some() {
                    Error::Header(msg)
                } else {
                    Error::Config(msg)
                }
            })?;
        }
        Ok(out)
    }
}

impl Default for SchemaDescriptor {
    fn default() -> Self {
        Self::default_for(TickKind::Trades)
    }
}
