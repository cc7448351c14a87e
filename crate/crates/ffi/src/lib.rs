//! C ABI over the slot engine, packed matrix products, sign approximation
//! and the training driver.
//!
//! Every fallible call returns a [`PmheStatus`]; on failure the message is
//! kept per thread and read back with [`pmhe_last_error`]. Handles are
//! opaque and owned by the caller, who releases them with the matching
//! `_free` function. A matrix handle must not outlive the context that
//! produced it.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use pmhe::approx::{eval_composite, min_depth, CompositePolySpec};
use pmhe::fl::{run_training, synthetic_federated, FederatedData, TrainingConfig, TransportKind};
use pmhe::matrix::{decode_matrix, encode_matrix, he_mat_mult, he_transpose, Matrix, PackedMatrix};
use pmhe::{ContextParams, CryptoContext, Error, OpCounter, PartyId};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PmheStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    LevelExhausted = 3,
    MissingParties = 4,
    KeyMismatch = 5,
    Config = 6,
    Io = 7,
    Protocol = 8,
    Panic = 9,
    BufferTooSmall = 10,
}

/// Operation tallies of a context.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PmheOpCounter {
    pub adds: u64,
    pub subs: u64,
    pub mul_pt: u64,
    pub mul_ct: u64,
    pub rotations: u64,
    pub rescales: u64,
    pub bootstraps: u64,
    pub keyswitches: u64,
}

impl From<OpCounter> for PmheOpCounter {
    fn from(m: OpCounter) -> Self {
        PmheOpCounter {
            adds: m.adds,
            subs: m.subs,
            mul_pt: m.mul_pt,
            mul_ct: m.mul_ct,
            rotations: m.rotations,
            rescales: m.rescales,
            bootstraps: m.bootstraps,
            keyswitches: m.keyswitches,
        }
    }
}

/// Opaque context handle.
pub struct PmheContext {
    ctx: CryptoContext,
}

/// Opaque encrypted h x h matrix.
pub struct PmheMatrix {
    pm: PackedMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PmheStatus {
    match e {
        Error::LevelExhausted { .. } => PmheStatus::LevelExhausted,
        Error::MissingParties(_) | Error::UnknownParty(_) => PmheStatus::MissingParties,
        Error::KeyMismatch { .. } | Error::UnknownKey(_) | Error::ContextMismatch { .. } => {
            PmheStatus::KeyMismatch
        }
        Error::Config(_) | Error::Json(_) => PmheStatus::Config,
        Error::Io { .. } | Error::Csv { .. } => PmheStatus::Io,
        Error::Wire(_) | Error::RoundTimeout { .. } | Error::Protocol(_) | Error::Transport(_) => {
            PmheStatus::Protocol
        }
        _ => PmheStatus::InvalidArgument,
    }
}

struct Fail(PmheStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PmheStatus::NullPointer, format!("{what} is null"))
}

/// Run `f`, clear the last error on success, record it on failure.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PmheStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PmheStatus::Ok
        }
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            PmheStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(PmheStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn pmhe_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Create a context with `parties` key shares.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn pmhe_context_new(
    ring_dim: usize,
    initial_level: u32,
    parties: u16,
    seed: u64,
    out: *mut *mut PmheContext,
) -> PmheStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ctx = CryptoContext::new(
            ContextParams::new(ring_dim, initial_level, parties).with_seed(seed),
        )?;
        *out = Box::into_raw(Box::new(PmheContext { ctx }));
        Ok(())
    })
}

/// # Safety
/// `ctx` must come from [`pmhe_context_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pmhe_context_free(ctx: *mut PmheContext) {
    if !ctx.is_null() {
        drop(Box::from_raw(ctx));
    }
}

/// Slot count of the context, 0 for NULL.
///
/// # Safety
/// `ctx` must be NULL or a live context.
#[no_mangle]
pub unsafe extern "C" fn pmhe_context_slots(ctx: *const PmheContext) -> usize {
    ctx.as_ref().map_or(0, |c| c.ctx.slot_count())
}

/// # Safety
/// `ctx` must be a live context and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pmhe_context_meter(
    ctx: *const PmheContext,
    out: *mut PmheOpCounter,
) -> PmheStatus {
    guard(|| {
        let c = ctx.as_ref().ok_or_else(|| null("ctx"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = c.ctx.meter().into();
        Ok(())
    })
}

/// # Safety
/// `ctx` must be NULL or a live context.
#[no_mangle]
pub unsafe extern "C" fn pmhe_context_reset_meter(ctx: *const PmheContext) {
    if let Some(c) = ctx.as_ref() {
        c.ctx.reset_meter();
    }
}

/// Encrypt a row-major `h * h` matrix under the collective key.
///
/// # Safety
/// `data` must point to `h * h` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pmhe_matrix_encrypt(
    ctx: *const PmheContext,
    data: *const f64,
    h: usize,
    out: *mut *mut PmheMatrix,
) -> PmheStatus {
    guard(|| {
        let c = ctx.as_ref().ok_or_else(|| null("ctx"))?;
        if data.is_null() {
            return Err(null("data"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let n = h
            .checked_mul(h)
            .ok_or_else(|| Fail(PmheStatus::InvalidArgument, "h * h overflows".into()))?;
        let m = Matrix::from_vec(h, h, std::slice::from_raw_parts(data, n).to_vec())?;
        let pm = encode_matrix(&c.ctx, &m)?;
        *out = Box::into_raw(Box::new(PmheMatrix { pm }));
        Ok(())
    })
}

/// Collective decryption into `out` (row-major, `out_len >= h * h`).
/// `roster` lists the participating party ids; NULL means all parties.
///
/// # Safety
/// Pointers must be valid for the given lengths; `m` must belong to `ctx`.
#[no_mangle]
pub unsafe extern "C" fn pmhe_matrix_decrypt(
    ctx: *const PmheContext,
    m: *const PmheMatrix,
    roster: *const u16,
    roster_len: usize,
    out: *mut f64,
    out_len: usize,
) -> PmheStatus {
    guard(|| {
        let c = ctx.as_ref().ok_or_else(|| null("ctx"))?;
        let m = m.as_ref().ok_or_else(|| null("matrix"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let roster: Vec<PartyId> = if roster.is_null() {
            c.ctx.full_roster()
        } else {
            std::slice::from_raw_parts(roster, roster_len).to_vec()
        };
        let h = m.pm.dim_h;
        if out_len < h * h {
            return Err(Fail(
                PmheStatus::BufferTooSmall,
                format!("output holds {out_len} values, need {}", h * h),
            ));
        }
        let plain = decode_matrix(&c.ctx, &m.pm, &roster)?;
        std::slice::from_raw_parts_mut(out, h * h).copy_from_slice(plain.as_slice());
        Ok(())
    })
}

/// Dimension h of an encrypted matrix, 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live matrix.
#[no_mangle]
pub unsafe extern "C" fn pmhe_matrix_dim(m: *const PmheMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.pm.dim_h)
}

/// Remaining level of an encrypted matrix, 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live matrix.
#[no_mangle]
pub unsafe extern "C" fn pmhe_matrix_level(m: *const PmheMatrix) -> u32 {
    m.as_ref().map_or(0, |m| m.pm.level())
}

/// Encrypted product `a * b`.
///
/// # Safety
/// All handles must be live and belong to `ctx`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pmhe_matrix_mult(
    ctx: *const PmheContext,
    a: *const PmheMatrix,
    b: *const PmheMatrix,
    out: *mut *mut PmheMatrix,
) -> PmheStatus {
    guard(|| {
        let c = ctx.as_ref().ok_or_else(|| null("ctx"))?;
        let a = a.as_ref().ok_or_else(|| null("a"))?;
        let b = b.as_ref().ok_or_else(|| null("b"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let pm = he_mat_mult(&c.ctx, &a.pm, &b.pm)?;
        *out = Box::into_raw(Box::new(PmheMatrix { pm }));
        Ok(())
    })
}

/// Encrypted transpose.
///
/// # Safety
/// Handles must be live and belong to `ctx`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pmhe_matrix_transpose(
    ctx: *const PmheContext,
    a: *const PmheMatrix,
    out: *mut *mut PmheMatrix,
) -> PmheStatus {
    guard(|| {
        let c = ctx.as_ref().ok_or_else(|| null("ctx"))?;
        let a = a.as_ref().ok_or_else(|| null("a"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let pm = he_transpose(&c.ctx, &a.pm)?;
        *out = Box::into_raw(Box::new(PmheMatrix { pm }));
        Ok(())
    })
}

/// # Safety
/// `m` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pmhe_matrix_free(m: *mut PmheMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Smallest composition depth k reaching (sigma, delta)-closeness with g_d.
///
/// # Safety
/// `out_k` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pmhe_sign_min_depth(
    d: u32,
    sigma: u32,
    delta: f64,
    out_k: *mut u32,
) -> PmheStatus {
    guard(|| {
        if out_k.is_null() {
            return Err(null("out_k"));
        }
        *out_k = min_depth(d, sigma, delta)?;
        Ok(())
    })
}

/// Plain evaluation of the k-fold composite at `x` in [-1, 1].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pmhe_sign_eval(
    d: u32,
    k: u32,
    sigma: u32,
    delta: f64,
    x: f64,
    out: *mut f64,
) -> PmheStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = CompositePolySpec::new(d, k, sigma, delta)?;
        *out = eval_composite(x, &spec)?;
        Ok(())
    })
}

/// Run encrypted training from a JSON config. `data_dir` holds the party
/// shards; NULL selects the synthetic dataset. `transport` is
/// "in_process" or "tcp" (NULL means in_process). On success `*out_json`
/// receives the metrics JSON, released with [`pmhe_string_free`].
///
/// # Safety
/// String arguments must be NUL-terminated; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pmhe_train_json(
    config_json: *const c_char,
    data_dir: *const c_char,
    transport: *const c_char,
    out_json: *mut *mut c_char,
) -> PmheStatus {
    guard(|| {
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let cfg = TrainingConfig::from_json(str_arg(config_json, "config_json")?)?;
        let transport: TransportKind = if transport.is_null() {
            TransportKind::InProcess
        } else {
            str_arg(transport, "transport")?.parse()?
        };
        let parties = usize::from(cfg.party_count);
        let data = if data_dir.is_null() {
            synthetic_federated(parties, cfg.seed)
        } else {
            FederatedData::load_dir(Path::new(str_arg(data_dir, "data_dir")?), parties)?
        };
        let outcome = run_training(&cfg, &data, transport)?;
        let json = serde_json::to_string_pretty(&outcome.metrics).map_err(Error::from)?;
        *out_json = CString::new(json).expect("json has no nul").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pmhe_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
