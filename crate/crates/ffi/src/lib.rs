//! C ABI over the `tegsim` library.
//!
//! Objects are opaque handles created by `*_new` functions and released with
//! the matching `*_free`. Every fallible call returns a [`TegsimStatus`]; on
//! failure the message is kept per thread and can be read with
//! [`tegsim_last_error_message`]. Results are written through out-pointers
//! only on success unless a function documents otherwise. Panics are caught
//! at the boundary and reported as [`TegsimStatus::Panic`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use tegsim::engine::{
    step_closed, step_open, validate_transfer_matrix, EngineError, LayerState, MintBurnVector, TransferMatrix,
};
use tegsim::metrics::{entropy, normalize, relative_entropy, zeta, MetricsError, TokenDistribution};
use tegsim::multilayer::{find_arbitrage, fungibility_graph, FungibilityMatrix, MultilayerError};
use tegsim::scenarios::{ubi_closed_form, UbiSpec};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TegsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidMatrix = 3,
    NegativeBalanceRisk = 4,
    DimensionMismatch = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Balances of one layer at one round.
pub struct TegsimLayer(LayerState);

/// Column-stochastic transfer matrix.
pub struct TegsimMatrix(TransferMatrix);

/// Pairwise exchange rates between layers.
pub struct TegsimRates(FungibilityMatrix);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(TegsimStatus, String);

impl Failure {
    fn new(status: TegsimStatus, message: impl Into<String>) -> Self {
        Self(status, message.into())
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let mut root = &e;
        while let EngineError::AtRound { source, .. } = root {
            root = source;
        }
        let status = match root {
            EngineError::InvalidMatrix(_)
            | EngineError::IndexOutOfRange { .. }
            | EngineError::DuplicateEntry { .. } => TegsimStatus::InvalidMatrix,
            EngineError::NegativeBalanceRisk { .. } => TegsimStatus::NegativeBalanceRisk,
            EngineError::DimensionMismatch { .. } => TegsimStatus::DimensionMismatch,
            _ => TegsimStatus::InvalidArgument,
        };
        Self(status, e.to_string())
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        let status = match e {
            MetricsError::DimensionMismatch(..) => TegsimStatus::DimensionMismatch,
            _ => TegsimStatus::InvalidArgument,
        };
        Self(status, e.to_string())
    }
}

impl From<MultilayerError> for Failure {
    fn from(e: MultilayerError) -> Self {
        let status = match e {
            MultilayerError::InvalidMatrix(_) => TegsimStatus::InvalidMatrix,
            MultilayerError::DimensionMismatch { .. } => TegsimStatus::DimensionMismatch,
            _ => TegsimStatus::InvalidArgument,
        };
        Self(status, e.to_string())
    }
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TegsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            TegsimStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("panic inside tegsim".into());
            TegsimStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(TegsimStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure::new(TegsimStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn array<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::new(TegsimStatus::NullPointer, format!("`{name}` is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

fn distribution(values: &[f64]) -> Result<TokenDistribution, Failure> {
    Ok(normalize(values)?)
}

/// Message of the last failed call on this thread, or null if the last call
/// succeeded. The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn tegsim_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tegsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a layer with players named `"0"`, `"1"`, ... holding `balances`.
#[no_mangle]
pub unsafe extern "C" fn tegsim_layer_new(
    balances: *const f64,
    n: usize,
    out_layer: *mut *mut TegsimLayer,
) -> TegsimStatus {
    guard(|| {
        let slot = out(out_layer, "out_layer")?;
        let state = LayerState::from_balances("ffi", array(balances, n, "balances")?)?;
        *slot = Box::into_raw(Box::new(TegsimLayer(state)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tegsim_layer_free(layer: *mut TegsimLayer) {
    if !layer.is_null() {
        drop(Box::from_raw(layer));
    }
}

/// Number of players in `layer`, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn tegsim_layer_len(layer: *const TegsimLayer) -> usize {
    layer.as_ref().map_or(0, |l| l.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn tegsim_layer_round(layer: *const TegsimLayer, out_round: *mut u64) -> TegsimStatus {
    guard(|| {
        *out(out_round, "out_round")? = borrow(layer, "layer")?.0.round();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tegsim_layer_supply(layer: *const TegsimLayer, out_supply: *mut f64) -> TegsimStatus {
    guard(|| {
        *out(out_supply, "out_supply")? = borrow(layer, "layer")?.0.supply();
        Ok(())
    })
}

/// Copies the balances into `buf`, which must hold `tegsim_layer_len` values.
#[no_mangle]
pub unsafe extern "C" fn tegsim_layer_balances(
    layer: *const TegsimLayer,
    buf: *mut f64,
    capacity: usize,
) -> TegsimStatus {
    guard(|| {
        let balances = borrow(layer, "layer")?.0.balances();
        if capacity < balances.len() {
            return Err(Failure::new(
                TegsimStatus::BufferTooSmall,
                format!("buffer holds {capacity} values, layer has {}", balances.len()),
            ));
        }
        if !balances.is_empty() {
            if buf.is_null() {
                return Err(Failure::new(TegsimStatus::NullPointer, "`buf` is null"));
            }
            slice::from_raw_parts_mut(buf, balances.len()).copy_from_slice(balances);
        }
        Ok(())
    })
}

/// Builds an `n`-by-`n` matrix from `nnz` entries `(rows[k], cols[k], weights[k])`,
/// where `cols` is the sender and `rows` the receiver. Columns must sum to one.
#[no_mangle]
pub unsafe extern "C" fn tegsim_matrix_new(
    n: usize,
    rows: *const usize,
    cols: *const usize,
    weights: *const f64,
    nnz: usize,
    out_matrix: *mut *mut TegsimMatrix,
) -> TegsimStatus {
    guard(|| {
        let slot = out(out_matrix, "out_matrix")?;
        let (rows, cols, weights) = (
            array(rows, nnz, "rows")?,
            array(cols, nnz, "cols")?,
            array(weights, nnz, "weights")?,
        );
        let triplets = (0..nnz).map(|k| (rows[k], cols[k], weights[k]));
        let m = TransferMatrix::from_triplets(n, triplets)?;
        validate_transfer_matrix(&m).map_err(EngineError::InvalidMatrix)?;
        *slot = Box::into_raw(Box::new(TegsimMatrix(m)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tegsim_matrix_free(matrix: *mut TegsimMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

/// One closed round: the new layer conserves the supply of `layer`.
#[no_mangle]
pub unsafe extern "C" fn tegsim_step_closed(
    layer: *const TegsimLayer,
    matrix: *const TegsimMatrix,
    out_layer: *mut *mut TegsimLayer,
) -> TegsimStatus {
    guard(|| {
        let slot = out(out_layer, "out_layer")?;
        let next = step_closed(&borrow(layer, "layer")?.0, &borrow(matrix, "matrix")?.0)?;
        *slot = Box::into_raw(Box::new(TegsimLayer(next)));
        Ok(())
    })
}

/// One open round with per-player mint (positive) or burn (negative) `delta`.
#[no_mangle]
pub unsafe extern "C" fn tegsim_step_open(
    layer: *const TegsimLayer,
    matrix: *const TegsimMatrix,
    delta: *const f64,
    n: usize,
    out_layer: *mut *mut TegsimLayer,
) -> TegsimStatus {
    guard(|| {
        let slot = out(out_layer, "out_layer")?;
        let y = MintBurnVector::new(array(delta, n, "delta")?.to_vec());
        let next = step_open(&borrow(layer, "layer")?.0, &borrow(matrix, "matrix")?.0, &y)?;
        *slot = Box::into_raw(Box::new(TegsimLayer(next)));
        Ok(())
    })
}

/// Shannon entropy in bits of the balance distribution `values / sum(values)`.
#[no_mangle]
pub unsafe extern "C" fn tegsim_entropy(values: *const f64, n: usize, out_bits: *mut f64) -> TegsimStatus {
    guard(|| {
        let slot = out(out_bits, "out_bits")?;
        *slot = entropy(&distribution(array(values, n, "values")?)?);
        Ok(())
    })
}

/// Relative entropy `D(p || q)` in bits after normalizing both inputs.
/// Infinite when `q` is zero where `p` is not.
#[no_mangle]
pub unsafe extern "C" fn tegsim_relative_entropy(
    p: *const f64,
    q: *const f64,
    n: usize,
    out_bits: *mut f64,
) -> TegsimStatus {
    guard(|| {
        let slot = out(out_bits, "out_bits")?;
        let p = distribution(array(p, n, "p")?)?;
        let q = distribution(array(q, n, "q")?)?;
        *slot = relative_entropy(&p, &q)?;
        Ok(())
    })
}

/// Mean self-retention of `matrix` and its complement, the circulating share.
#[no_mangle]
pub unsafe extern "C" fn tegsim_zeta(
    matrix: *const TegsimMatrix,
    out_zeta: *mut f64,
    out_zeta_star: *mut f64,
) -> TegsimStatus {
    guard(|| {
        let z = out(out_zeta, "out_zeta")?;
        let zs = out(out_zeta_star, "out_zeta_star")?;
        let r = zeta(&borrow(matrix, "matrix")?.0, None)?;
        (*z, *zs) = (r.zeta, r.zeta_star);
        Ok(())
    })
}

/// Builds rates between `n` layers named `"0"`, `"1"`, ... from a row-major
/// `n * n` array. Entry `(i, j)` is units of layer `j` per unit of layer `i`;
/// 0 or infinity means no rate. The diagonal must be 1.
#[no_mangle]
pub unsafe extern "C" fn tegsim_rates_new(
    n: usize,
    dense: *const f64,
    out_rates: *mut *mut TegsimRates,
) -> TegsimStatus {
    guard(|| {
        let slot = out(out_rates, "out_rates")?;
        let len = n
            .checked_mul(n)
            .ok_or_else(|| Failure::new(TegsimStatus::InvalidArgument, "n * n overflows"))?;
        let values = array(dense, len, "dense")?;
        let rows: Vec<Vec<f64>> = values.chunks(n.max(1)).map(<[f64]>::to_vec).collect();
        let m = FungibilityMatrix::from_dense((0..n).map(|i| i.to_string()).collect(), &rows)?;
        *slot = Box::into_raw(Box::new(TegsimRates(m)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tegsim_rates_free(rates: *mut TegsimRates) {
    if !rates.is_null() {
        drop(Box::from_raw(rates));
    }
}

/// Searches for a directed cycle whose rate product exceeds `1 + tol`.
/// On success `*out_found` tells whether one exists; if so the layer indices
/// are written to `cycle` (up to `capacity`), the length to `*out_len` and
/// the product to `*out_gain`. A too-small buffer yields `BufferTooSmall`
/// with `*out_len` set to the required length.
#[no_mangle]
pub unsafe extern "C" fn tegsim_find_arbitrage(
    rates: *const TegsimRates,
    tol: f64,
    cycle: *mut usize,
    capacity: usize,
    out_len: *mut usize,
    out_gain: *mut f64,
    out_found: *mut bool,
) -> TegsimStatus {
    guard(|| {
        let found = out(out_found, "out_found")?;
        let len = out(out_len, "out_len")?;
        let gain = out(out_gain, "out_gain")?;
        if !(tol.is_finite() && tol >= 0.0) {
            return Err(Failure::new(
                TegsimStatus::InvalidArgument,
                format!("tolerance {tol} must be finite and non-negative"),
            ));
        }
        let h = fungibility_graph(&borrow(rates, "rates")?.0, None, None)?;
        let Some(c) = find_arbitrage(&h, tol) else {
            (*found, *len, *gain) = (false, 0, 1.0);
            return Ok(());
        };
        *len = c.path.len();
        if capacity < c.path.len() {
            return Err(Failure::new(
                TegsimStatus::BufferTooSmall,
                format!("cycle has {} layers, buffer holds {capacity}", c.path.len()),
            ));
        }
        if cycle.is_null() {
            return Err(Failure::new(TegsimStatus::NullPointer, "`cycle` is null"));
        }
        slice::from_raw_parts_mut(cycle, c.path.len()).copy_from_slice(&c.path);
        (*found, *gain) = (true, c.gain);
        Ok(())
    })
}

/// Treasury and recipient balances of the two-account income scheme after
/// `round` rounds, starting from `(omega, 0)`.
#[no_mangle]
pub unsafe extern "C" fn tegsim_ubi_closed_form(
    round: u64,
    omega: f64,
    delta: f64,
    epsilon: f64,
    out_treasury: *mut f64,
    out_recipient: *mut f64,
) -> TegsimStatus {
    guard(|| {
        let a = out(out_treasury, "out_treasury")?;
        let b = out(out_recipient, "out_recipient")?;
        let spec = UbiSpec { omega, delta, epsilon };
        spec.validate()
            .map_err(|e| Failure::new(TegsimStatus::InvalidArgument, e.to_string()))?;
        (*a, *b) = ubi_closed_form(round, &spec);
        Ok(())
    })
}
