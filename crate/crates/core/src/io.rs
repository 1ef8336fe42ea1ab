//! CSV readers and writers for every tabular file the simulator produces or
//! consumes. Numbers are written with 12 significant digits so that output
//! bytes do not depend on the last bits of a floating-point result.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    validate_transfer_matrix, EngineError, LayerState, TransactionLog, TransactionRecord, TransferMatrix,
};
use crate::multilayer::{FungibilityMatrix, MultilayerError};

pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Multilayer(#[from] MultilayerError),
}

/// Formats `x` with [`SIGNIFICANT_DIGITS`] significant digits, dropping
/// trailing zeros: `15`, `0.1`, `1.5e-07`, `inf`.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_owned()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Parses numbers written by [`format_number`] as well as plain decimals.
pub fn parse_number(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" | "+inf" | "Infinity" => Some(f64::INFINITY),
        "-inf" | "-Infinity" => Some(f64::NEG_INFINITY),
        t => t.parse().ok(),
    }
}

fn parse_field(field: &str, line: u64, what: &str) -> Result<f64, IoError> {
    parse_number(field).ok_or_else(|| IoError::Parse {
        line,
        message: format!("{what} `{field}` is not a number"),
    })
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), IoError> {
    let header = rdr.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(IoError::Parse {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    Ok(())
}

fn records<R: Read>(r: R, header: &[&str]) -> Result<Vec<csv::StringRecord>, IoError> {
    let mut rdr = reader(r);
    check_header(&mut rdr, header)?;
    Ok(rdr.records().collect::<Result<_, _>>()?)
}

const SNAPSHOT_HEADER: [&str; 4] = ["round", "layer", "player", "balance"];

/// One row per player of every state, in the order given.
pub fn write_snapshots<'a, W, I>(w: W, states: I) -> Result<(), IoError>
where
    W: Write,
    I: IntoIterator<Item = &'a LayerState>,
{
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(SNAPSHOT_HEADER)?;
    for state in states {
        let round = state.round().to_string();
        for (player, &balance) in state.players().iter().zip(state.balances()) {
            wtr.write_record([round.as_str(), state.layer(), player, &format_number(balance)])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Rebuilds layer states from a snapshot file. Consecutive rows with the same
/// `(round, layer)` form one state, with players in file order.
pub fn read_snapshots<R: Read>(r: R) -> Result<Vec<LayerState>, IoError> {
    type Group = (u64, String, Vec<(String, f64)>);
    let mut groups: Vec<Group> = Vec::new();
    for rec in records(r, &SNAPSHOT_HEADER)? {
        let line = line_of(&rec);
        let round: u64 = rec[0].parse().map_err(|_| IoError::Parse {
            line,
            message: format!("round `{}` is not a non-negative integer", &rec[0]),
        })?;
        let balance = parse_field(&rec[3], line, "balance")?;
        match groups.last_mut() {
            Some((r, l, entries)) if *r == round && l == &rec[1] => entries.push((rec[2].to_owned(), balance)),
            _ => groups.push((round, rec[1].to_owned(), vec![(rec[2].to_owned(), balance)])),
        }
    }
    groups
        .into_iter()
        .map(|(round, layer, entries)| Ok(LayerState::new(layer, entries)?.with_round(round)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub round: u64,
    pub layer: String,
    pub supply: f64,
    /// Empty for a layer without tokens.
    pub entropy_bits: Option<f64>,
    /// Circulation of the matrix applied to reach this round; empty for the
    /// initial state.
    pub zeta: Option<f64>,
    pub zeta_star: Option<f64>,
}

pub fn write_metrics<W: Write>(w: W, rows: &[MetricsRow]) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["round", "layer", "supply", "entropy_bits", "zeta", "zeta_star"])?;
    let opt = |v: Option<f64>| v.map(format_number).unwrap_or_default();
    for r in rows {
        wtr.write_record([
            r.round.to_string(),
            r.layer.clone(),
            format_number(r.supply),
            opt(r.entropy_bits),
            opt(r.zeta),
            opt(r.zeta_star),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseRow {
    pub round: u64,
    pub layer_a: String,
    pub layer_b: String,
    pub x_r: f64,
}

pub fn write_pairwise<W: Write>(w: W, rows: &[PairwiseRow]) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["round", "layer_a", "layer_b", "x_r"])?;
    for r in rows {
        wtr.write_record([
            r.round.to_string(),
            r.layer_a.clone(),
            r.layer_b.clone(),
            format_number(r.x_r),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BargainingRow {
    pub round: u64,
    pub mechanism: String,
    pub layer_a: String,
    pub layer_b: String,
    pub rate: f64,
    pub detail: String,
}

pub fn write_bargaining<W: Write>(w: W, rows: &[BargainingRow]) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["round", "mechanism", "layer_a", "layer_b", "rate", "detail"])?;
    for r in rows {
        wtr.write_record([
            r.round.to_string(),
            r.mechanism.clone(),
            r.layer_a.clone(),
            r.layer_b.clone(),
            format_number(r.rate),
            r.detail.clone(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize, Serialize)]
struct Triplet {
    row: usize,
    col: usize,
    weight: f64,
}

/// Sparse `row,col,weight` triplets. The dimension is the largest index plus
/// one unless `n` is given. The matrix must be column-stochastic.
pub fn read_matrix<R: Read>(r: R, n: Option<usize>) -> Result<TransferMatrix, IoError> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &["row", "col", "weight"])?;
    let mut triplets = Vec::new();
    for t in rdr.deserialize::<Triplet>() {
        let t = t?;
        triplets.push((t.row, t.col, t.weight));
    }
    let dim = n.unwrap_or_else(|| triplets.iter().map(|t| t.0.max(t.1) + 1).max().unwrap_or(0));
    let m = TransferMatrix::from_triplets(dim, triplets)?;
    validate_transfer_matrix(&m).map_err(EngineError::InvalidMatrix)?;
    Ok(m)
}

pub fn write_matrix<W: Write>(w: W, m: &TransferMatrix) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["row", "col", "weight"])?;
    let mut entries: Vec<_> = m.triplets().collect();
    entries.sort_by_key(|&(r, c, _)| (r, c));
    for (row, col, weight) in entries {
        wtr.write_record([row.to_string(), col.to_string(), format_number(weight)])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_transactions<R: Read>(r: R) -> Result<TransactionLog, IoError> {
    let mut out = Vec::new();
    for rec in records(r, &["round", "sender", "receiver", "amount"])? {
        let line = line_of(&rec);
        out.push(TransactionRecord {
            round: rec[0].parse().map_err(|_| IoError::Parse {
                line,
                message: format!("round `{}` is not a non-negative integer", &rec[0]),
            })?,
            sender: rec[1].to_owned(),
            receiver: rec[2].to_owned(),
            amount: parse_field(&rec[3], line, "amount")?,
        });
    }
    Ok(TransactionLog::new(out)?)
}

pub fn write_transactions<'a, W, I>(w: W, records: I) -> Result<(), IoError>
where
    W: Write,
    I: IntoIterator<Item = &'a TransactionRecord>,
{
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["round", "sender", "receiver", "amount"])?;
    for r in records {
        wtr.write_record([
            r.round.to_string(),
            r.sender.clone(),
            r.receiver.clone(),
            format_number(r.amount),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Rows of a `layer_a,layer_b,rate` file in file order.
pub fn read_pair_table<R: Read>(r: R) -> Result<Vec<(String, String, f64)>, IoError> {
    records(r, &["layer_a", "layer_b", "rate"])?
        .into_iter()
        .map(|rec| {
            let line = line_of(&rec);
            Ok((
                rec[0].to_owned(),
                rec[1].to_owned(),
                parse_field(&rec[2], line, "rate")?,
            ))
        })
        .collect()
}

/// Fungibility matrix from a rate file. Layers are ordered by first
/// appearance; pairs without a row are unavailable and the diagonal is one.
/// The matrix is not validated here.
pub fn fungibility_from_rows(rows: &[(String, String, f64)]) -> FungibilityMatrix {
    let mut layers: Vec<String> = Vec::new();
    for (a, b, _) in rows {
        for l in [a, b] {
            if !layers.contains(l) {
                layers.push(l.clone());
            }
        }
    }
    let mut m = FungibilityMatrix::isolated(layers);
    for (a, b, rate) in rows {
        let (i, j) = (m.index_of(a).expect("collected"), m.index_of(b).expect("collected"));
        // Zero or infinite rates mean no exchange is possible.
        let rate = (rate.is_finite() && *rate > 0.0).then_some(*rate);
        if i != j {
            m.set_rate(i, j, rate).expect("indices in range");
        }
    }
    m
}

/// Like [`fungibility_from_rows`], but rejects negative or NaN rates.
pub fn read_fungibility<R: Read>(r: R) -> Result<FungibilityMatrix, IoError> {
    let rows = read_pair_table(r)?;
    if let Some(i) = rows.iter().position(|(_, _, rate)| rate.is_nan() || *rate < 0.0) {
        return Err(IoError::Parse {
            line: i as u64 + 2,
            message: format!("rate {} must be non-negative", rows[i].2),
        });
    }
    Ok(fungibility_from_rows(&rows))
}

/// Dense cost matrix (bits) aligned with `layers`; absent pairs cost zero.
pub fn read_costs<R: Read>(r: R, layers: &[String]) -> Result<Vec<Vec<f64>>, IoError> {
    let index: BTreeMap<&str, usize> = layers.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut out = vec![vec![0.0; layers.len()]; layers.len()];
    for (a, b, cost) in read_pair_table(r)? {
        let (Some(&i), Some(&j)) = (index.get(a.as_str()), index.get(b.as_str())) else {
            return Err(MultilayerError::UnknownLayer(if index.contains_key(a.as_str()) { b } else { a }).into());
        };
        out[i][j] = cost;
    }
    Ok(out)
}

pub fn write_fungibility<W: Write>(w: W, m: &FungibilityMatrix) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["layer_a", "layer_b", "rate"])?;
    for (i, a) in m.layers().iter().enumerate() {
        for (j, b) in m.layers().iter().enumerate() {
            if let (true, Some(rate)) = (i != j, m.rate(i, j)) {
                wtr.write_record([a.as_str(), b.as_str(), &format_number(rate)])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}
