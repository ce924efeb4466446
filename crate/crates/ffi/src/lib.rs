//! C ABI over `tabforge`.
//!
//! Every function returns a status code (`FORGE_OK` on success). On failure
//! the message is kept per thread and can be read with
//! [`forge_last_error_message`]. Strings handed out by this library must be
//! released with [`forge_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::str::FromStr;

use tabforge::annotate::numeral::{normalize_numeral, Direction};
use tabforge::corpus::{parse_table, PairRef, Table, TableFormat};
use tabforge::perturb::{parse_kinds, parse_names, Perturber};
use tabforge::pet::loss::{decoupled_label_loss, label_conditioned_mlm_loss, LogitView};
use tabforge::premise_repr::{drr, linearize, render, RenderMode, TemplateDb};
use tabforge::{ForgeError, Label};

pub const FORGE_OK: c_int = 0;
pub const FORGE_ERR_VALIDATION: c_int = 1;
pub const FORGE_ERR_PARSE: c_int = 2;
pub const FORGE_ERR_NUMERICAL: c_int = 3;
pub const FORGE_ERR_CONVERSION: c_int = 4;
pub const FORGE_ERR_NOOP: c_int = 5;
pub const FORGE_ERR_NULL: c_int = 6;
pub const FORGE_ERR_UTF8: c_int = 7;
pub const FORGE_ERR_PANIC: c_int = 8;
pub const FORGE_ERR_IO: c_int = 9;

pub const FORGE_FORMAT_CANONICAL: c_int = 0;
pub const FORGE_FORMAT_INFOTABS: c_int = 1;

pub const FORGE_MODE_UNIVERSAL: c_int = 0;
pub const FORGE_MODE_BPR: c_int = 1;
pub const FORGE_MODE_LINEARIZE: c_int = 2;

pub const FORGE_LABEL_ENTAILMENT: c_int = 0;
pub const FORGE_LABEL_NEUTRAL: c_int = 1;
pub const FORGE_LABEL_CONTRADICTION: c_int = 2;

pub const FORGE_TO_WORDS: c_int = 0;
pub const FORGE_TO_DIGITS: c_int = 1;

/// Opaque parsed table.
pub struct ForgeTable {
    inner: Table,
}

/// Opaque perturbation engine with builtin resources.
pub struct ForgePerturber {
    inner: Perturber,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    code: c_int,
    message: String,
}

impl From<ForgeError> for Failure {
    fn from(e: ForgeError) -> Self {
        let code = match e {
            ForgeError::Validation(_) => FORGE_ERR_VALIDATION,
            ForgeError::Parse { .. } => FORGE_ERR_PARSE,
            ForgeError::Numerical { .. } => FORGE_ERR_NUMERICAL,
            ForgeError::Conversion(_) => FORGE_ERR_CONVERSION,
            ForgeError::NoOp(_) => FORGE_ERR_NOOP,
            ForgeError::FallbackToTokenMasking(_) => FORGE_ERR_NOOP,
            ForgeError::Io(_) => FORGE_ERR_IO,
        };
        Failure { code, message: e.to_string() }
    }
}

fn fail(code: c_int, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> c_int {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FORGE_OK,
        Ok(Err(failure)) => {
            set_error(&failure.message);
            failure.code
        }
        Err(_) => {
            set_error("internal panic");
            FORGE_ERR_PANIC
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(FORGE_ERR_NULL, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(FORGE_ERR_UTF8, format!("{name} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(FORGE_ERR_NULL, format!("{name} is null")))
}

fn to_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s).map(CString::into_raw).map_err(|_| fail(FORGE_ERR_UTF8, "output contains a NUL byte"))
}

fn label_arg(code: c_int) -> Result<Label, Failure> {
    match code {
        FORGE_LABEL_ENTAILMENT => Ok(Label::Entailment),
        FORGE_LABEL_NEUTRAL => Ok(Label::Neutral),
        FORGE_LABEL_CONTRADICTION => Ok(Label::Contradiction),
        other => Err(fail(FORGE_ERR_VALIDATION, format!("unknown label code {other}"))),
    }
}

/// Message of the last failed call on this thread, or null. Owned by the
/// library and valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn forge_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn forge_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse a table document (`FORGE_FORMAT_*`).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn forge_table_parse(json: *const c_char, format: c_int, out: *mut *mut ForgeTable) -> c_int {
    guard(|| {
        let out = out_arg(out, "out")?;
        let raw = str_arg(json, "json")?;
        let format = match format {
            FORGE_FORMAT_CANONICAL => TableFormat::CanonicalJson,
            FORGE_FORMAT_INFOTABS => TableFormat::InfotabsJson,
            other => return Err(fail(FORGE_ERR_VALIDATION, format!("unknown table format {other}"))),
        };
        let table = parse_table(raw.as_bytes(), format)?;
        *out = Box::into_raw(Box::new(ForgeTable { inner: table }));
        Ok(())
    })
}

/// # Safety
/// `table` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn forge_table_free(table: *mut ForgeTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Render a premise (`FORGE_MODE_*`) with the builtin templates.
///
/// # Safety
/// `table` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn forge_render(table: *const ForgeTable, mode: c_int, out: *mut *mut c_char) -> c_int {
    guard(|| {
        let out = out_arg(out, "out")?;
        let table = table.as_ref().ok_or_else(|| fail(FORGE_ERR_NULL, "table is null"))?;
        let mode = match mode {
            FORGE_MODE_UNIVERSAL => RenderMode::Universal,
            FORGE_MODE_BPR => RenderMode::Bpr,
            FORGE_MODE_LINEARIZE => RenderMode::Linearize,
            other => return Err(fail(FORGE_ERR_VALIDATION, format!("unknown render mode {other}"))),
        };
        *out = to_c_string(render(&table.inner, mode, &TemplateDb::builtin())?)?;
        Ok(())
    })
}

/// # Safety
/// `table` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn forge_linearize(table: *const ForgeTable, out: *mut *mut c_char) -> c_int {
    guard(|| {
        let out = out_arg(out, "out")?;
        let table = table.as_ref().ok_or_else(|| fail(FORGE_ERR_NULL, "table is null"))?;
        *out = to_c_string(linearize(&table.inner)?)?;
        Ok(())
    })
}

/// Keep the `k` rows most relevant to `hypothesis`; writes a new table handle.
///
/// # Safety
/// `table` must be a live handle, `hypothesis` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn forge_drr(
    table: *const ForgeTable,
    hypothesis: *const c_char,
    k: usize,
    out: *mut *mut ForgeTable,
) -> c_int {
    guard(|| {
        let out = out_arg(out, "out")?;
        let table = table.as_ref().ok_or_else(|| fail(FORGE_ERR_NULL, "table is null"))?;
        let hyp = str_arg(hypothesis, "hypothesis")?;
        let kept = drr(&table.inner, hyp, k, &Default::default())?;
        *out = Box::into_raw(Box::new(ForgeTable { inner: kept }));
        Ok(())
    })
}

/// Convert between digits and English words (`FORGE_TO_WORDS`/`FORGE_TO_DIGITS`).
///
/// # Safety
/// `s` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn forge_numeral_normalize(s: *const c_char, direction: c_int, out: *mut *mut c_char) -> c_int {
    guard(|| {
        let out = out_arg(out, "out")?;
        let s = str_arg(s, "s")?;
        let direction = match direction {
            FORGE_TO_WORDS => Direction::ToWords,
            FORGE_TO_DIGITS => Direction::ToDigits,
            other => return Err(fail(FORGE_ERR_VALIDATION, format!("unknown direction {other}"))),
        };
        *out = to_c_string(normalize_numeral(s, direction)?)?;
        Ok(())
    })
}

/// Decoupled label loss of one logit row. `verbalizer_ids` points at three
/// ids in E, N, C order.
///
/// # Safety
/// `logits` must hold `vocab` values and `verbalizer_ids` three values.
#[no_mangle]
pub unsafe extern "C" fn forge_decoupled_label_loss(
    logits: *const f64,
    vocab: usize,
    verbalizer_ids: *const usize,
    gold: c_int,
    out: *mut f64,
) -> c_int {
    guard(|| {
        let out = out_arg(out, "out")?;
        if logits.is_null() || verbalizer_ids.is_null() {
            return Err(fail(FORGE_ERR_NULL, "logits or verbalizer_ids is null"));
        }
        let row = std::slice::from_raw_parts(logits, vocab);
        let ids = std::slice::from_raw_parts(verbalizer_ids, 3);
        *out = decoupled_label_loss(row, [ids[0], ids[1], ids[2]], label_arg(gold)?)?;
        Ok(())
    })
}

/// Label-conditioned MLM loss over `n` masked positions; `logits` is
/// row-major `n × vocab`.
///
/// # Safety
/// `logits` must hold `n * vocab` values and `original_ids` `n` values.
#[no_mangle]
pub unsafe extern "C" fn forge_label_conditioned_mlm_loss(
    logits: *const f64,
    n: usize,
    vocab: usize,
    original_ids: *const usize,
    condition_correct: bool,
    out: *mut f64,
) -> c_int {
    guard(|| {
        let out = out_arg(out, "out")?;
        if logits.is_null() || original_ids.is_null() {
            return Err(fail(FORGE_ERR_NULL, "logits or original_ids is null"));
        }
        let len = n.checked_mul(vocab).ok_or_else(|| fail(FORGE_ERR_VALIDATION, "logit shape overflows"))?;
        let flat = std::slice::from_raw_parts(logits, len);
        let rows = if vocab == 0 { vec![Vec::new(); n] } else { flat.chunks(vocab).map(<[f64]>::to_vec).collect() };
        let view = LogitView::new(rows)?;
        let ids = std::slice::from_raw_parts(original_ids, n);
        *out = label_conditioned_mlm_loss(&view, ids, condition_correct)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn forge_perturber_new(out: *mut *mut ForgePerturber) -> c_int {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(ForgePerturber { inner: Perturber::builtin() }));
        Ok(())
    })
}

/// Replace the name list with newline-separated names.
///
/// # Safety
/// `p` must be a live handle; `names` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn forge_perturber_set_names(p: *mut ForgePerturber, names: *const c_char) -> c_int {
    guard(|| {
        let p = p.as_mut().ok_or_else(|| fail(FORGE_ERR_NULL, "perturber is null"))?;
        let names = parse_names(str_arg(names, "names")?);
        if names.is_empty() {
            return Err(fail(FORGE_ERR_VALIDATION, "name list is empty"));
        }
        p.inner.names = names;
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn forge_perturber_free(p: *mut ForgePerturber) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Compose the comma-separated `kinds` on `text` and write the resulting
/// record as JSON. Dropped records are returned too, with `new_label` set to
/// `"dropped"`.
///
/// # Safety
/// `p` must be a live handle; string arguments NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn forge_perturb_compose(
    p: *const ForgePerturber,
    pair_ref: *const c_char,
    text: *const c_char,
    label: c_int,
    kinds: *const c_char,
    seed: u64,
    out: *mut *mut c_char,
) -> c_int {
    guard(|| {
        let out = out_arg(out, "out")?;
        let p = p.as_ref().ok_or_else(|| fail(FORGE_ERR_NULL, "perturber is null"))?;
        let pair_ref = PairRef::from_str(str_arg(pair_ref, "pair_ref")?)?;
        let kinds = parse_kinds(str_arg(kinds, "kinds")?)?;
        let record = p.inner.compose(&pair_ref, str_arg(text, "text")?, label_arg(label)?, &kinds, seed)?;
        let json = serde_json::to_string(&record).map_err(|e| fail(FORGE_ERR_VALIDATION, e.to_string()))?;
        *out = to_c_string(json)?;
        Ok(())
    })
}
