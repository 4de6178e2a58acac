use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::schema::{SchemaDescriptor, TickKind};
use super::{format_hms, QuoteEvent, TickDay, TradeEvent};
use crate::error::{Error, Result};

/// Rows dropped while parsing, by reason.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectCounts {
    /// Wrong field count or unparseable value.
    pub malformed: usize,
    /// Price, volume, bid or ask not positive.
    pub non_positive: usize,
    /// Quote with ask < bid.
    pub crossed: usize,
    /// Timestamp earlier than the previous accepted row of the same date.
    pub non_monotone: usize,
}

impl RejectCounts {
    pub fn total(&self) -> usize {
        self.malformed + self.non_positive + self.crossed + self.non_monotone
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedFile {
    pub days: Vec<TickDay>,
    pub rows: usize,
    pub rejected: RejectCounts,
}

impl ParsedFile {
    pub fn rejected_rows(&self) -> usize {
        self.rejected.total()
    }
}

enum Row {
    Trade(NaiveDate, u32, f64, u64),
    Quote(NaiveDate, u32, f64, f64),
}

/// Parses one trades or quotes file into per-date [`TickDay`]s.
///
/// Rows sharing a timestamp keep their file order through `seq_in_second`.
/// Invalid rows are dropped and counted; only an unusable header is fatal.
pub fn parse_tick_file<R: Read>(
    reader: R,
    schema: &SchemaDescriptor,
    kind: TickKind,
    symbol: &str,
) -> Result<ParsedFile> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter_byte()?)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut records = rdr.records();
    let columns = if schema.has_header {
        match records.next() {
            None => return Ok(empty()),
            Some(Err(e)) => return Err(Error::Header(e.to_string())),
            Some(Ok(h)) => {
                let names: Vec<String> = h.iter().map(str::to_string).collect();
                schema.resolve(kind, Some(&names))?
            }
        }
    } else {
        schema.resolve(kind, None)?
    };

    let mut days: BTreeMap<NaiveDate, TickDay> = BTreeMap::new();
    let mut rejected = RejectCounts::default();
    let mut rows = 0usize;

    for record in records {
        rows += 1;
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                rejected.malformed += 1;
                continue;
            }
        };
        let row = match parse_row(&record, &columns, schema, kind) {
            Ok(row) => row,
            Err(reason) => {
                reason.count(&mut rejected);
                continue;
            }
        };
        let (date, second) = match row {
            Row::Trade(d, s, ..) | Row::Quote(d, s, ..) => (d, s),
        };
        let day = days
            .entry(date)
            .or_insert_with(|| TickDay::new(symbol, date));
        let last = match kind {
            TickKind::Trades => day.trades.last().map(|t| (t.second_of_day, t.seq_in_second)),
            TickKind::Quotes => day.quotes.last().map(|q| (q.second_of_day, q.seq_in_second)),
        };
        let seq = match last {
            Some((prev, _)) if second < prev => {
                rejected.non_monotone += 1;
                continue;
            }
            Some((prev, seq)) if second == prev => seq + 1,
            _ => 1,
        };
        match row {
            Row::Trade(_, s, price, volume) => day.trades.push(TradeEvent {
                second_of_day: s,
                seq_in_second: seq,
                price,
                volume,
            }),
            Row::Quote(_, s, bid, ask) => day.quotes.push(QuoteEvent {
                second_of_day: s,
                seq_in_second: seq,
                bid,
                ask,
            }),
        }
    }

    Ok(ParsedFile {
        days: days.into_values().collect(),
        rows,
        rejected,
    })
}

fn empty() -> ParsedFile {
    ParsedFile {
        days: Vec::new(),
        rows: 0,
        rejected: RejectCounts::default(),
    }
}

enum Reject {
    Malformed,
    NonPositive,
    Crossed,
}

impl Reject {
    fn count(self, c: &mut RejectCounts) {
        match self {
            Reject::Malformed => c.malformed += 1,
            Reject::NonPositive => c.non_positive += 1,
            Reject::Crossed => c.crossed += 1,
        }
    }
}

fn parse_row(
    record: &csv::StringRecord,
    columns: &[usize; 4],
    schema: &SchemaDescriptor,
    kind: TickKind,
) -> Result<Row, Reject> {
    let field = |k: usize| record.get(columns[k]).ok_or(Reject::Malformed);
    let date = NaiveDate::parse_from_str(field(0)?, &schema.date_format)
        .map_err(|_| Reject::Malformed)?;
    let second = parse_hms(field(1)?).ok_or(Reject::Malformed)?;
    let a: f64 = field(2)?.parse().map_err(|_| Reject::Malformed)?;
    match kind {
        TickKind::Trades => {
            let volume: u64 = field(3)?.parse().map_err(|_| Reject::Malformed)?;
            if !a.is_finite() {
                return Err(Reject::Malformed);
            }
            if a <= 0.0 || volume == 0 {
                return Err(Reject::NonPositive);
            }
            Ok(Row::Trade(date, second, a, volume))
        }
        TickKind::Quotes => {
            let ask: f64 = field(3)?.parse().map_err(|_| Reject::Malformed)?;
            if !a.is_finite() || !ask.is_finite() {
                return Err(Reject::Malformed);
            }
            if a <= 0.0 || ask <= 0.0 {
                return Err(Reject::NonPositive);
            }
            if ask < a {
                return Err(Reject::Crossed);
            }
            Ok(Row::Quote(date, second, a, ask))
        }
    }
}

fn parse_hms(s: &str) -> Option<u32> {
    let mut parts = s.split(':');
    let h: u32 = parts.next()?.parse().ok()?;
    let m: u32 = parts.next()?.parse().ok()?;
    let sec: u32 = parts.next()?.parse().ok()?;
    if parts.next().is_some() || h > 23 || m > 59 || sec > 59 {
        return None;
    }
    Some(h * 3600 + m * 60 + sec)
}

/// Serializes the `kind` events of `days` in the layout described by `schema`.
pub fn write_tick_file<W: Write>(
    days: &[TickDay],
    schema: &SchemaDescriptor,
    kind: TickKind,
    writer: W,
) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .delimiter(schema.delimiter_byte()?)
        .from_writer(writer);
    let positions = schema.resolve(kind, None)?;
    let width = schema.columns.len();
    let required = kind.required_columns();
    if schema.has_header {
        let mut header = vec![String::new(); width];
        for (k, &p) in positions.iter().enumerate() {
            header[p] = required[k].to_string();
        }
        wtr.write_record(&header)?;
    }
    let mut fields = vec![String::new(); width];
    for day in days {
        let date = day.date.format(&schema.date_format).to_string();
        let mut emit = |second: u32, a: String, b: String| -> Result<()> {
            fields[positions[0]] = date.clone();
            fields[positions[1]] = format_hms(second);
            fields[positions[2]] = a;
            fields[positions[3]] = b;
            wtr.write_record(&fields)?;
            Ok(())
        };
        match kind {
            TickKind::Trades => {
                for t in &day.trades {
                    emit(t.second_of_day, t.price.to_string(), t.volume.to_string())?;
                }
            }
            TickKind::Quotes => {
                for q in &day.quotes {
                    emit(q.second_of_day, q.bid.to_string(), q.ask.to_string())?;
                }
            }
        }
    }
    wtr.flush().map_err(|e| Error::io("<tick writer>", e))?;
    Ok(())
}

/// Combines separately parsed trade and quote days by date.
pub fn merge_days(trades: Vec<TickDay>, quotes: Vec<TickDay>) -> Vec<TickDay> {
    let mut by_date: BTreeMap<NaiveDate, TickDay> = BTreeMap::new();
    for day in trades {
        by_date.insert(day.date, day);
    }
    for q in quotes {
        by_date
            .entry(q.date)
            .or_insert_with(|| TickDay::new(q.symbol.clone(), q.date))
            .quotes = q.quotes;
    }
    by_date.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trades_schema() -> SchemaDescriptor {
        SchemaDescriptor::default_for(TickKind::Trades)
    }

    fn quotes_schema() -> SchemaDescriptor {
        SchemaDescriptor::default_for(TickKind::Quotes)
    }

    #[test]
    fn three_trades_one_day() {
        let csv = "date,time,price,volume\n\
                   2008-01-02,09:45:00,10.00,100\n\
                   2008-01-02,09:45:00,10.01,200\n\
                   2008-01-02,09:45:03,10.02,50\n";
        let parsed = parse_tick_file(csv.as_bytes(), &trades_schema(), TickKind::Trades, "AAPL").unwrap();
        assert_eq!(parsed.days.len(), 1);
        let day = &parsed.days[0];
        assert_eq!(day.symbol, "AAPL");
        assert_eq!(day.trades.len(), 3);
        assert_eq!(day.trades[1].seq_in_second, 2);
        assert_eq!(day.trades[2].seq_in_second, 1);
        assert_eq!(parsed.rejected_rows(), 0);
    }

    #[test]
    fn empty_file_is_empty() {
        let parsed = parse_tick_file(&b""[..], &trades_schema(), TickKind::Trades, "X").unwrap();
        assert!(parsed.days.is_empty());
        let parsed = parse_tick_file(&b"date,time,price,volume\n"[..], &trades_schema(), TickKind::Trades, "X").unwrap();
        assert!(parsed.days.is_empty());
    }

    #[test]
    fn crossed_quote_is_rejected() {
        let csv = "date,time,bid,ask\n2008-01-02,10:00:00,10.05,10.00\n";
        let parsed = parse_tick_file(csv.as_bytes(), &quotes_schema(), TickKind::Quotes, "X").unwrap();
        let quotes: usize = parsed.days.iter().map(|d| d.quotes.len()).sum();
        assert_eq!(quotes, 0);
        assert_eq!(parsed.rejected_rows(), 1);
        assert_eq!(parsed.rejected.crossed, 1);
    }

    #[test]
    fn non_monotone_and_malformed_rows_are_counted() {
        let csv = "date,time,price,volume\n\
                   2008-01-02,10:00:05,10.00,100\n\
                   2008-01-02,10:00:04,10.00,100\n\
                   2008-01-02,10:00:06,abc,100\n\
                   2008-01-02,10:00:07,-1,100\n\
                   2008-01-02,10:00:08\n\
                   2008-01-03,09:00:00,10.00,100\n";
        let parsed = parse_tick_file(csv.as_bytes(), &trades_schema(), TickKind::Trades, "X").unwrap();
        assert_eq!(parsed.days.len(), 2);
        assert_eq!(parsed.days[0].trades.len(), 1);
        assert_eq!(parsed.rejected.non_monotone, 1);
        assert_eq!(parsed.rejected.malformed, 2);
        assert_eq!(parsed.rejected.non_positive, 1);
        assert_eq!(parsed.rows, 6);
    }

    #[test]
    fn bad_header_is_fatal() {
        let csv = "when,what,price,volume\n2008-01-02,10:00:00,1,1\n";
        let err = parse_tick_file(csv.as_bytes(), &trades_schema(), TickKind::Trades, "X").unwrap_err();
        assert!(matches!(err, Error::Header(_)));
    }

    #[test]
    fn configurable_layout() {
        let schema = SchemaDescriptor {
            delimiter: ';',
            has_header: false,
            columns: vec!["time".into(), "volume".into(), "price".into(), "date".into()],
            date_format: "%Y%m%d".into(),
        };
        let csv = "10:00:00;300;25.5;20080102\n";
        let parsed = parse_tick_file(csv.as_bytes(), &schema, TickKind::Trades, "X").unwrap();
        let t = parsed.days[0].trades[0];
        assert_eq!(t.second_of_day, 36000);
        assert_eq!(t.volume, 300);
        assert_eq!(t.price, 25.5);
        assert_eq!(parsed.days[0].date, NaiveDate::from_ymd_opt(2008, 1, 2).unwrap());
    }

    #[test]
    fn header_columns_may_be_reordered() {
        let csv = "ask,bid,time,date,venue\n10.02,10.00,10:00:00,2008-01-02,Q\n";
        let parsed = parse_tick_file(csv.as_bytes(), &quotes_schema(), TickKind::Quotes, "X").unwrap();
        let q = parsed.days[0].quotes[0];
        assert_eq!((q.bid, q.ask), (10.0, 10.02));
    }

    #[test]
    fn merge_keeps_quote_only_days() {
        let date = |d| NaiveDate::from_ymd_opt(2008, 1, d).unwrap();
        let mut t = TickDay::new("X", date(2));
        t.trades.push(TradeEvent { second_of_day: 1, seq_in_second: 1, price: 1.0, volume: 1 });
        let mut q = TickDay::new("X", date(3));
        q.quotes.push(QuoteEvent { second_of_day: 1, seq_in_second: 1, bid: 1.0, ask: 1.0 });
        let merged = merge_days(vec![t], vec![q]);
        assert_eq!(merged.len(), 2);
        assert!(merged[1].trades.is_empty());
        assert_eq!(merged[1].quotes.len(), 1);
    }

    fn arb_day(kind: TickKind) -> impl Strategy<Value = TickDay> {
        let events = proptest::collection::vec((0u32..86_400, 1u32..100_000, 1u64..10_000, 0u32..500), 0..40);
        (1u32..28, events).prop_map(move |(dom, mut ev)| {
            ev.sort_by_key(|e| e.0);
            let mut day = TickDay::new("SYM", NaiveDate::from_ymd_opt(2008, 2, dom).unwrap());
            let mut prev = None;
            let mut seq = 0;
            for (sec, cents, vol, spread) in ev {
                seq = if prev == Some(sec) { seq + 1 } else { 1 };
                prev = Some(sec);
                let price = cents as f64 / 100.0;
                match kind {
                    TickKind::Trades => day.trades.push(TradeEvent { second_of_day: sec, seq_in_second: seq, price, volume: vol }),
                    TickKind::Quotes => day.quotes.push(QuoteEvent {
                        second_of_day: sec,
                        seq_in_second: seq,
                        bid: price,
                        ask: price + spread as f64 / 100.0,
                    }),
                }
            }
            day
        })
    }

    proptest! {
        #[test]
        fn write_then_parse_round_trips(day in arb_day(TickKind::Trades), quotes in arb_day(TickKind::Quotes)) {
            for (day, kind) in [(day, TickKind::Trades), (quotes, TickKind::Quotes)] {
                let schema = SchemaDescriptor::default_for(kind);
                let mut buf = Vec::new();
                write_tick_file(std::slice::from_ref(&day), &schema, kind, &mut buf).unwrap();
                let parsed = parse_tick_file(&buf[..], &schema, kind, "SYM").unwrap();
                prop_assert_eq!(parsed.rejected_rows(), 0);
                let empty = day.trades.is_empty() && day.quotes.is_empty();
                if empty {
                    prop_assert!(parsed.days.is_empty());
                } else {
                    prop_assert_eq!(&parsed.days, &vec![day]);
                }
            }
        }
    }
}
