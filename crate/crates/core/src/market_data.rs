//! Option-chain and zero-coupon curve ingestion, quote filters, moneyness and
//! maturity buckets, and bucketed mean-squared pricing-error reports.
//!
//! Maturities use ACT/365. A "week" is 7/365 years, so the 1..6 week
//! maturity window is `[7, 42]` calendar days.

use std::fmt;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};

pub const DAYS_PER_YEAR: f64 = 365.0;
pub const WEEK: f64 = 7.0 / DAYS_PER_YEAR;

pub const MIN_MONEYNESS: f64 = 0.80;
pub const MAX_MONEYNESS: f64 = 1.20;
pub const MIN_VOLUME: u64 = 50;
pub const MIN_PRICE: f64 = 0.10;
pub const NTM_BAND: f64 = 0.02;

// Absorbs representation error when a boundary is hit exactly (e.g. 21/365 vs 3*WEEK).
const EDGE_EPS: f64 = 1e-12;

const CHAIN_COLUMNS: [&str; 5] = ["expiry", "strike", "bid", "ask", "volume"];
const BOND_COLUMNS: [&str; 2] = ["maturity_years", "price"];

/// One market put quote.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionQuote {
    pub quote_date: NaiveDate,
    pub expiry_date: NaiveDate,
    pub strike: f64,
    pub mid_price: f64,
    pub volume: u64,
    pub spot: f64,
    pub maturity_years: f64,
}

impl OptionQuote {
    pub fn new(
        quote_date: NaiveDate,
        expiry_date: NaiveDate,
        strike: f64,
        mid_price: f64,
        volume: u64,
        spot: f64,
    ) -> Result<Self> {
        let days = (expiry_date - quote_date).num_days();
        let quote = OptionQuote {
            quote_date,
            expiry_date,
            strike,
            mid_price,
            volume,
            spot,
            maturity_years: days as f64 / DAYS_PER_YEAR,
        };
        quote.validate()?;
        Ok(quote)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(Error::invalid(format!("strike must be positive, got {}", self.strike)));
        }
        if !(self.spot > 0.0 && self.spot.is_finite()) {
            return Err(Error::invalid(format!("spot must be positive, got {}", self.spot)));
        }
        if !(self.mid_price >= 0.0 && self.mid_price.is_finite()) {
            return Err(Error::invalid(format!("mid price must be non-negative, got {}", self.mid_price)));
        }
        if self.mid_price > self.strike {
            return Err(Error::invalid(format!(
                "put mid {} exceeds strike {}",
                self.mid_price, self.strike
            )));
        }
        if self.maturity_years <= 0.0 {
            return Err(Error::invalid(format!(
                "expiry {} is not after quote date {}",
                self.expiry_date, self.quote_date
            )));
        }
        Ok(())
    }

    pub fn moneyness(&self) -> f64 {
        self.strike / self.spot
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroBondQuote {
    pub maturity_years: f64,
    pub price: f64,
}

impl ZeroBondQuote {
    pub fn validate(&self) -> Result<()> {
        if !(self.maturity_years > 0.0 && self.maturity_years.is_finite()) || !(self.price > 0.0 && self.price <= 1.0) {
            return Err(Error::OutOfRange(format!(
                "need maturity > 0 and price in (0, 1], got ({}, {})",
                self.maturity_years, self.price
            )));
        }
        Ok(())
    }
}

/// A data row that failed to parse; `line` is 1-based and counts the header.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedRow {
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for RejectedRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadedChain {
    /// In file order.
    pub quotes: Vec<OptionQuote>,
    pub rejected: Vec<RejectedRow>,
}

fn column_indices<const N: usize>(
    headers: &csv::StringRecord,
    wanted: [&str; N],
) -> Result<[usize; N]> {
    let mut idx = [0usize; N];
    for (slot, name) in idx.iter_mut().zip(wanted) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }
    Ok(idx)
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file))
}

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

enum Field {
    Unparseable(String),
    Negative(String),
}

fn number(record: &csv::StringRecord, col: usize, name: &str) -> std::result::Result<f64, Field> {
    let raw = record.get(col).unwrap_or("");
    let v: f64 = raw
        .parse()
        .map_err(|_| Field::Unparseable(format!("{name}={raw:?} is not a number")))?;
    if !v.is_finite() {
        return Err(Field::Unparseable(format!("{name}={raw:?} is not finite")));
    }
    if v < 0.0 {
        return Err(Field::Negative(format!("{name}={raw} is negative")));
    }
    Ok(v)
}

/// Read a put chain from a CSV with columns `expiry,strike,bid,ask,volume`.
///
/// Unparseable rows (bad dates, non-numeric fields, quotes violating the
/// [`OptionQuote`] invariants) are skipped and listed in
/// [`LoadedChain::rejected`]. A negative numeric field aborts the load.
pub fn load_chain(path: impl AsRef<Path>, spot: f64, quote_date: NaiveDate) -> Result<LoadedChain> {
    let path = path.as_ref();
    if !(spot > 0.0 && spot.is_finite()) {
        return Err(Error::invalid(format!("spot must be positive, got {spot}")));
    }
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let [c_exp, c_strike, c_bid, c_ask, c_vol] = column_indices(&headers, CHAIN_COLUMNS)?;

    let mut out = LoadedChain::default();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| csv_err(path, e))?;
        let reject = |reason: String| RejectedRow { line, reason };

        let parsed = (|| {
            let raw_exp = record.get(c_exp).unwrap_or("");
            let expiry = NaiveDate::parse_from_str(raw_exp, "%Y-%m-%d")
                .map_err(|_| Field::Unparseable(format!("expiry={raw_exp:?} is not a YYYY-MM-DD date")))?;
            let strike = number(&record, c_strike, "strike")?;
            let bid = number(&record, c_bid, "bid")?;
            let ask = number(&record, c_ask, "ask")?;
            let raw_vol = record.get(c_vol).unwrap_or("");
            let volume: u64 = match raw_vol.parse::<i64>() {
                Ok(v) if v < 0 => return Err(Field::Negative(format!("volume={v} is negative"))),
                Ok(v) => v as u64,
                Err(_) => {
                    return Err(Field::Unparseable(format!("volume={raw_vol:?} is not an integer")))
                }
            };
            Ok((expiry, strike, bid, ask, volume))
        })();

        match parsed {
            Ok((expiry, strike, bid, ask, volume)) => {
                match OptionQuote::new(quote_date, expiry, strike, 0.5 * (bid + ask), volume, spot) {
                    Ok(q) => out.quotes.push(q),
                    Err(e) => out.rejected.push(reject(e.to_string())),
                }
            }
            Err(Field::Unparseable(reason)) => out.rejected.push(reject(reason)),
            Err(Field::Negative(reason)) => {
                return Err(Error::OutOfRange(format!("{}: line {line}: {reason}", path.display())))
            }
        }
    }
    Ok(out)
}

/// Write quotes back in the chain CSV layout with `bid = ask = mid`.
pub fn write_chain<W: Write>(quotes: &[OptionQuote], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let werr = |e: csv::Error| Error::Csv { path: "<chain output>".into(), source: e };
    w.write_record(CHAIN_COLUMNS).map_err(werr)?;
    for q in quotes {
        w.write_record([
            q.expiry_date.format("%Y-%m-%d").to_string(),
            q.strike.to_string(),
            q.mid_price.to_string(),
            q.mid_price.to_string(),
            q.volume.to_string(),
        ])
        .map_err(werr)?;
    }
    w.flush().map_err(|e| Error::io("<chain output>", e))?;
    Ok(())
}

/// Read a zero-coupon curve (`maturity_years,price`), sorted by maturity.
pub fn load_bonds(path: impl AsRef<Path>) -> Result<Vec<ZeroBondQuote>> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let [c_mat, c_price] = column_indices(&headers, BOND_COLUMNS)?;

    let mut bonds = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| csv_err(path, e))?;
        let parse = |col: usize, name: &str| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::invalid(format!("{}: line {line}: {name}={raw:?}", path.display())))
        };
        let maturity_years = parse(c_mat, "maturity_years")?;
        let price = parse(c_price, "price")?;
        let quote = ZeroBondQuote { maturity_years, price };
        if let Err(Error::OutOfRange(msg)) = quote.validate() {
            return Err(Error::OutOfRange(format!("{}: line {line}: {msg}", path.display())));
        }
        bonds.push(quote);
    }
    bonds.sort_by(|a, b| a.maturity_years.total_cmp(&b.maturity_years));
    Ok(bonds)
}

/// True when prices do not increase with maturity (expects a sorted curve).
pub fn is_monotone_curve(bonds: &[ZeroBondQuote]) -> bool {
    bonds.windows(2).all(|w| w[1].price <= w[0].price)
}

fn in_maturity_window(maturity_years: f64) -> bool {
    let weeks = maturity_years / WEEK;
    (1.0 - EDGE_EPS..=6.0 + EDGE_EPS).contains(&weeks)
}

/// Moneyness 80-120%, volume >= 50, mid >= 0.10 and 1-6 week maturities.
/// Order is preserved.
pub fn apply_filters(quotes: &[OptionQuote]) -> Vec<OptionQuote> {
    quotes
        .iter()
        .filter(|q| {
            let m = q.moneyness();
            (MIN_MONEYNESS - EDGE_EPS..=MAX_MONEYNESS + EDGE_EPS).contains(&m)
                && q.volume >= MIN_VOLUME
                && q.mid_price >= MIN_PRICE - EDGE_EPS
                && in_maturity_window(q.maturity_years)
        })
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Moneyness {
    #[serde(rename = "ITM")]
    Itm,
    #[serde(rename = "NTM")]
    Ntm,
    #[serde(rename = "OTM")]
    Otm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum MaturityBucket {
    Short,
    Mid,
}

impl fmt::Display for Moneyness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Moneyness::Itm => "ITM",
            Moneyness::Ntm => "NTM",
            Moneyness::Otm => "OTM",
        })
    }
}

impl fmt::Display for MaturityBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaturityBucket::Short => "Short",
            MaturityBucket::Mid => "Mid",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bucket {
    pub maturity: MaturityBucket,
    pub moneyness: Moneyness,
}

impl Bucket {
    /// Report order: Short before Mid, then ITM, NTM, OTM.
    pub const ALL: [Bucket; 6] = [
        Bucket { maturity: MaturityBucket::Short, moneyness: Moneyness::Itm },
        Bucket { maturity: MaturityBucket::Short, moneyness: Moneyness::Ntm },
        Bucket { maturity: MaturityBucket::Short, moneyness: Moneyness::Otm },
        Bucket { maturity: MaturityBucket::Mid, moneyness: Moneyness::Itm },
        Bucket { maturity: MaturityBucket::Mid, moneyness: Moneyness::Ntm },
        Bucket { maturity: MaturityBucket::Mid, moneyness: Moneyness::Otm },
    ];
}

pub fn moneyness_bucket(strike: f64, spot: f64) -> Moneyness {
    if (strike / spot - 1.0).abs() <= NTM_BAND + EDGE_EPS {
        Moneyness::Ntm
    } else if spot > (1.0 + NTM_BAND) * strike {
        Moneyness::Otm
    } else {
        Moneyness::Itm
    }
}

pub fn maturity_bucket(maturity_years: f64) -> Result<MaturityBucket> {
    if !in_maturity_window(maturity_years) {
        return Err(Error::OutOfRange(format!(
            "maturity {maturity_years:.5}y is outside the 1-6 week bucket range"
        )));
    }
    if maturity_years / WEEK < 3.0 - EDGE_EPS {
        Ok(MaturityBucket::Short)
    } else {
        Ok(MaturityBucket::Mid)
    }
}

pub fn bucketize(quote: &OptionQuote) -> Result<Bucket> {
    Ok(Bucket {
        maturity: maturity_bucket(quote.maturity_years)?,
        moneyness: moneyness_bucket(quote.strike, quote.spot),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketEntry {
    pub bucket: Bucket,
    pub count: usize,
    /// `None` for an empty bucket.
    pub mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketReport {
    /// One entry per bucket in [`Bucket::ALL`] order, empty buckets included.
    pub entries: Vec<BucketEntry>,
    pub count: usize,
    pub overall_mse: f64,
}

pub const REPORT_HEADER: &str = "maturity_bucket,moneyness_bucket,count,mse";
pub const EMPTY_MSE: &str = "NA";

impl BucketReport {
    pub fn entry(&self, bucket: Bucket) -> &BucketEntry {
        self.entries
            .iter()
            .find(|e| e.bucket == bucket)
            .expect("report holds every bucket")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{REPORT_HEADER}")?;
        for e in &self.entries {
            let mse = e.mse.map_or_else(|| EMPTY_MSE.to_string(), |m| m.to_string());
            writeln!(out, "{},{},{},{}", e.bucket.maturity, e.bucket.moneyness, e.count, mse)?;
        }
        writeln!(out, "OVERALL,ALL,{},{}", self.count, self.overall_mse)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("report is ascii")
    }
}

/// Absolute-price MSE per bucket and overall.
pub fn mse_report(pairs: &[(OptionQuote, f64)]) -> Result<BucketReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("mse_report needs at least one priced quote"));
    }
    let mut sums = [0.0f64; 6];
    let mut counts = [0usize; 6];
    for (quote, model) in pairs {
        if !model.is_finite() {
            return Err(Error::NonFinite("model price"));
        }
        let bucket = bucketize(quote)?;
        let slot = Bucket::ALL.iter().position(|b| *b == bucket).expect("bucket listed");
        let resid = model - quote.mid_price;
        sums[slot] += resid * resid;
        counts[slot] += 1;
    }
    let entries = Bucket::ALL
        .iter()
        .enumerate()
        .map(|(i, &bucket)| BucketEntry {
            bucket,
            count: counts[i],
            mse: (counts[i] > 0).then(|| sums[i] / counts[i] as f64),
        })
        .collect();
    let count = pairs.len();
    Ok(BucketReport {
        entries,
        count,
        overall_mse: sums.iter().sum::<f64>() / count as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn quote(spot: f64, strike: f64, maturity_years: f64, mid: f64, volume: u64) -> OptionQuote {
        OptionQuote {
            quote_date: date("2017-09-05"),
            expiry_date: date("2017-09-19"),
            strike,
            mid_price: mid,
            volume,
            spot,
            maturity_years,
        }
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_chain_computes_mid_and_maturity() {
        let f = write_tmp("expiry,strike,bid,ask,volume\n2017-09-19,100,1.0,1.2,300\n");
        let chain = load_chain(f.path(), 100.0, date("2017-09-05")).unwrap();
        assert!(chain.rejected.is_empty());
        let q = &chain.quotes[0];
        assert!((q.mid_price - 1.10).abs() < 1e-12);
        assert!((q.maturity_years - 14.0 / 365.0).abs() < 1e-15);
        assert!((q.maturity_years - 0.0384).abs() < 1e-4);
    }

    #[test]
    fn load_chain_empty_body() {
        let f = write_tmp("expiry,strike,bid,ask,volume\n");
        let chain = load_chain(f.path(), 100.0, date("2017-09-05")).unwrap();
        assert!(chain.quotes.is_empty());
    }

    #[test]
    fn load_chain_rejects_bad_row_keeps_others() {
        let f = write_tmp(
            "expiry,strike,bid,ask,volume\n2017-09-19,100,1.0,1.2,abc\n2017-09-26,95,0.5,0.7,80\n",
        );
        let chain = load_chain(f.path(), 100.0, date("2017-09-05")).unwrap();
        assert_eq!(chain.quotes.len(), 1);
        assert_eq!(chain.quotes[0].strike, 95.0);
        assert_eq!(chain.rejected.len(), 1);
        assert_eq!(chain.rejected[0].line, 2);
        assert!(chain.rejected[0].reason.contains("volume"));
    }

    #[test]
    fn load_chain_errors() {
        let missing = load_chain("/nonexistent/chain.csv", 100.0, date("2017-09-05")).unwrap_err();
        assert!(missing.is_io());

        let f = write_tmp("expiry,strike,bid,volume\n2017-09-19,100,1.0,3\n");
        match load_chain(f.path(), 100.0, date("2017-09-05")) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "ask"),
            other => panic!("expected missing column, got {other:?}"),
        }

        let f = write_tmp("expiry,strike,bid,ask,volume\n2017-09-19,100,-1.0,1.2,300\n");
        assert!(matches!(
            load_chain(f.path(), 100.0, date("2017-09-05")),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn filter_examples() {
        let ok = quote(100.0, 100.0, 2.0 / 52.0, 2.0, 100);
        assert_eq!(apply_filters(&[ok.clone()]).len(), 1);
        assert!(apply_filters(&[quote(100.0, 100.0, 2.0 / 52.0, 2.0, 49)]).is_empty());
        assert!(apply_filters(&[quote(100.0, 100.0, 2.0 / 52.0, 0.09, 100)]).is_empty());
        assert!(apply_filters(&[quote(100.0, 79.0, 2.0 / 52.0, 1.0, 100)]).is_empty());
        assert!(apply_filters(&[quote(100.0, 121.0, 2.0 / 52.0, 21.0, 100)]).is_empty());
        assert!(apply_filters(&[quote(100.0, 100.0, 6.0 / 365.0, 1.0, 100)]).is_empty());
        assert!(apply_filters(&[quote(100.0, 100.0, 43.0 / 365.0, 1.0, 100)]).is_empty());
        // exact boundaries are kept
        assert_eq!(apply_filters(&[quote(100.0, 80.0, 7.0 / 365.0, 0.10, 50)]).len(), 1);
        assert_eq!(apply_filters(&[quote(100.0, 120.0, 42.0 / 365.0, 20.0, 50)]).len(), 1);
    }

    #[test]
    fn bucket_examples() {
        let b = bucketize(&quote(100.0, 101.0, 2.0 / 52.0, 2.0, 100)).unwrap();
        assert_eq!((b.moneyness, b.maturity), (Moneyness::Ntm, MaturityBucket::Short));
        let b = bucketize(&quote(100.0, 97.0, 4.0 / 52.0, 1.0, 100)).unwrap();
        assert_eq!((b.moneyness, b.maturity), (Moneyness::Otm, MaturityBucket::Mid));
        let b = bucketize(&quote(100.0, 105.0, 2.0 / 52.0, 5.0, 100)).unwrap();
        assert_eq!((b.moneyness, b.maturity), (Moneyness::Itm, MaturityBucket::Short));
        // 2% ties go to NTM on both sides
        assert_eq!(moneyness_bucket(102.0, 100.0), Moneyness::Ntm);
        assert_eq!(moneyness_bucket(98.0, 100.0), Moneyness::Ntm);
        assert_eq!(maturity_bucket(21.0 / 365.0).unwrap(), MaturityBucket::Mid);
        assert_eq!(maturity_bucket(20.0 / 365.0).unwrap(), MaturityBucket::Short);
        assert!(bucketize(&quote(100.0, 100.0, 0.5, 5.0, 100)).is_err());
    }

    #[test]
    fn mse_examples() {
        let a = quote(100.0, 100.0, 2.0 / 52.0, 2.0, 100);
        let b = quote(100.0, 101.0, 2.0 / 52.0, 3.0, 100);
        let r = mse_report(&[(a.clone(), 2.0), (b.clone(), 3.0)]).unwrap();
        assert_eq!(r.overall_mse, 0.0);

        let r = mse_report(&[(a.clone(), 2.5)]).unwrap();
        assert_eq!(r.overall_mse, 0.25);

        let r = mse_report(&[(a.clone(), 3.0), (b.clone(), 6.0)]).unwrap();
        let ntm_short = Bucket { maturity: MaturityBucket::Short, moneyness: Moneyness::Ntm };
        assert_eq!(r.entry(ntm_short).count, 2);
        assert_eq!(r.entry(ntm_short).mse, Some(5.0));
        let empty = Bucket { maturity: MaturityBucket::Mid, moneyness: Moneyness::Otm };
        assert_eq!(r.entry(empty).mse, None);

        assert!(matches!(mse_report(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn report_csv_layout() {
        let a = quote(100.0, 100.0, 2.0 / 52.0, 2.0, 100);
        let csv = mse_report(&[(a, 2.5)]).unwrap().to_csv_string();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], REPORT_HEADER);
        assert_eq!(lines.len(), 8);
        assert_eq!(lines[2], "Short,NTM,1,0.25");
        assert_eq!(lines[1], "Short,ITM,0,NA");
        assert_eq!(lines[7], "OVERALL,ALL,1,0.25");
    }

    #[test]
    fn bonds_load_sorted() {
        let f = write_tmp("maturity_years,price\n1.0,0.95\n0.5,0.98\n");
        let bonds = load_bonds(f.path()).unwrap();
        assert_eq!(bonds[0].maturity_years, 0.5);
        assert!(is_monotone_curve(&bonds));
        let f = write_tmp("maturity_years,price\n1.0,1.5\n");
        assert!(load_bonds(f.path()).is_err());
    }
}
