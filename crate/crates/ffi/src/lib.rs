//! C ABI for the `subdetect` library.
//!
//! Every fallible function returns an [`SdStatus`]; on failure the message is
//! kept per thread and can be read with [`sd_last_error_message`]. Objects are
//! handed out as opaque pointers and must be released with the matching
//! `*_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use subdetect::detectors::{dispatch, DetectorKind, DetectorSpec, DEFAULT_ENUMERATION_CAP};
use subdetect::harness::{calibrate_cutoff, estimate_risk, Procedure, SupportPolicy};
use subdetect::lower_bound::second_moment_exact;
use subdetect::rates::{rate_breakdown, Regime};
use subdetect::{Error, Matrix, PlantedMean, ProblemShape, SeedSpec};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdStatus {
    Ok = 0,
    InvalidShape = 1,
    InvalidSupport = 2,
    InvalidArgument = 3,
    DimensionMismatch = 4,
    NonFinite = 5,
    EnumerationCap = 6,
    InsufficientReplicates = 7,
    Overflow = 8,
    Config = 9,
    Io = 10,
    NullPointer = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdRegime {
    PhiA = 0,
    PhiB = 1,
    PsiBetaC = 2,
    PsiBetaD = 3,
}

/// The seven constituent statistics.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdDetectorKind {
    Linear = 0,
    TruncChi2Axis1 = 1,
    TruncChi2Axis2 = 2,
    MaxLinAxis1 = 3,
    MaxLinAxis2 = 4,
    MaxTruncChi2Axis1 = 5,
    MaxTruncChi2Axis2 = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdRateBreakdown {
    pub psi12: f64,
    pub psi21: f64,
    pub phi12: f64,
    pub phi21: f64,
    pub beta12: f64,
    pub beta21: f64,
    pub rate: f64,
    pub rate_tilde: f64,
    pub regime: SdRegime,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdTestOutcome {
    pub kind: SdDetectorKind,
    pub statistic: f64,
    pub cutoff: f64,
    pub reject: bool,
    pub work_count: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdSecondMoment {
    pub second_moment: f64,
    pub log_second_moment: f64,
    pub tv_upper_bound: f64,
    pub minimax_risk_lower_bound: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdRiskEstimate {
    pub mu: f64,
    pub type_one: f64,
    pub type_one_se: f64,
    pub type_two: f64,
    pub type_two_se: f64,
    pub risk: f64,
    pub n_reps: u64,
}

/// Opaque dense row-major matrix.
pub struct SdMatrix(Matrix);

/// Opaque detector with its threshold and cutoff.
pub struct SdDetector(DetectorSpec);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SdStatus {
    match e {
        Error::InvalidShape(_) => SdStatus::InvalidShape,
        Error::InvalidSupport(_) => SdStatus::InvalidSupport,
        Error::InvalidArgument(_) => SdStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => SdStatus::DimensionMismatch,
        Error::NonFinite { .. } => SdStatus::NonFinite,
        Error::EnumerationCap { .. } => SdStatus::EnumerationCap,
        Error::InsufficientReplicates(_) => SdStatus::InsufficientReplicates,
        Error::Overflow(_) => SdStatus::Overflow,
        Error::Config(_) => SdStatus::Config,
        Error::Io(_) => SdStatus::Io,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SdStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            SdStatus::NullPointer
        }
        Err(_) => {
            set_last_error("internal panic".into());
            SdStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn in_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

fn shape(d1: usize, d2: usize, s1: usize, s2: usize) -> Result<ProblemShape, Failure> {
    Ok(ProblemShape::new(d1, d2, s1, s2)?)
}

fn regime(r: Regime) -> SdRegime {
    match r {
        Regime::PhiA => SdRegime::PhiA,
        Regime::PhiB => SdRegime::PhiB,
        Regime::PsiBetaC => SdRegime::PsiBetaC,
        Regime::PsiBetaD => SdRegime::PsiBetaD,
    }
}

fn kind_to_c(k: DetectorKind) -> SdDetectorKind {
    match k {
        DetectorKind::Linear => SdDetectorKind::Linear,
        DetectorKind::TruncChi2Axis1 => SdDetectorKind::TruncChi2Axis1,
        DetectorKind::TruncChi2Axis2 => SdDetectorKind::TruncChi2Axis2,
        DetectorKind::MaxLinAxis1 => SdDetectorKind::MaxLinAxis1,
        DetectorKind::MaxLinAxis2 => SdDetectorKind::MaxLinAxis2,
        DetectorKind::MaxTruncChi2Axis1 => SdDetectorKind::MaxTruncChi2Axis1,
        DetectorKind::MaxTruncChi2Axis2 => SdDetectorKind::MaxTruncChi2Axis2,
    }
}

fn kind_from_c(k: u32) -> Result<DetectorKind, Failure> {
    DetectorKind::ALL
        .into_iter()
        .find(|&d| kind_to_c(d) as u32 == k)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown detector kind {k}")).into())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default cap on subsets visited by a Bonferroni scan.
#[no_mangle]
pub extern "C" fn sd_default_cap() -> u64 {
    DEFAULT_ENUMERATION_CAP
}

/// Copies the calling thread's last error message into `buf` (truncated and
/// NUL-terminated) and returns the full message length, or 0 if none.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn sd_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sd_rate_breakdown(d1: usize, d2: usize, s1: usize, s2: usize, out: *mut SdRateBreakdown) -> SdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let rb = rate_breakdown(&shape(d1, d2, s1, s2)?)?;
        *out = SdRateBreakdown {
            psi12: rb.psi12,
            psi21: rb.psi21,
            phi12: rb.phi12,
            phi21: rb.phi21,
            beta12: rb.beta12,
            beta21: rb.beta21,
            rate: rb.rate,
            rate_tilde: rb.rate_tilde,
            regime: regime(rb.regime),
        };
        Ok(())
    })
}

/// `E[Z^2 | |Z| > tau]`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sd_nu_tau(tau: f64, out: *mut f64) -> SdStatus {
    guard(|| {
        *out_ref(out, "out")? = subdetect::gauss::nu_tau(tau)?.nu;
        Ok(())
    })
}

/// `log C(n, k)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sd_log_binom(n: u64, k: u64, out: *mut f64) -> SdStatus {
    guard(|| {
        *out_ref(out, "out")? = subdetect::rates::log_binom(n, k)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sd_second_moment_exact(
    d1: usize,
    d2: usize,
    s1: usize,
    s2: usize,
    mu: f64,
    out: *mut SdSecondMoment,
) -> SdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let r = second_moment_exact(&shape(d1, d2, s1, s2)?, mu)?;
        *out = SdSecondMoment {
            second_moment: r.second_moment,
            log_second_moment: r.log_second_moment,
            tv_upper_bound: r.tv_upper_bound,
            minimax_risk_lower_bound: r.minimax_risk_lower_bound,
        };
        Ok(())
    })
}

/// Copies a row-major `rows x cols` array into a new matrix.
///
/// # Safety
/// `data` must be valid for `rows * cols` reads and `out` for writes.
#[no_mangle]
pub unsafe extern "C" fn sd_matrix_new(rows: usize, cols: usize, data: *const f64, out: *mut *mut SdMatrix) -> SdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Overflow("rows * cols".into()))?;
        if data.is_null() {
            return Err(Failure::Null("data"));
        }
        let values = std::slice::from_raw_parts(data, len).to_vec();
        let m = Matrix::from_vec(rows, cols, values)?;
        m.check_finite()?;
        *out = Box::into_raw(Box::new(SdMatrix(m)));
        Ok(())
    })
}

/// Draws `Y = X + E` with `mu` on the leading `s1 x s2` block; `mu = 0` is the null.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn sd_matrix_sample(
    d1: usize,
    d2: usize,
    s1: usize,
    s2: usize,
    mu: f64,
    seed: u64,
    stream: u64,
    out: *mut *mut SdMatrix,
) -> SdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let sh = shape(d1, d2, s1, s2)?;
        let planted = if mu == 0.0 { None } else { Some(PlantedMean::canonical(sh, mu)?) };
        let obs = subdetect::model::sample_observation(&sh, planted.as_ref(), SeedSpec::new(seed, stream))?;
        *out = Box::into_raw(Box::new(SdMatrix(obs.values)));
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_matrix_rows(m: *const SdMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.rows())
}

/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_matrix_cols(m: *const SdMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.cols())
}

/// # Safety
/// `m` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sd_matrix_get(m: *const SdMatrix, row: usize, col: usize, out: *mut f64) -> SdStatus {
    guard(|| {
        let m = &in_ref(m, "matrix")?.0;
        let out = out_ref(out, "out")?;
        if row >= m.rows() || col >= m.cols() {
            return Err(Error::InvalidArgument(format!("index ({row}, {col}) out of range")).into());
        }
        *out = m.get(row, col);
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sd_matrix_free(m: *mut SdMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// A detector with the default theoretical threshold and cutoff; `kind` is
/// an `SdDetectorKind` value.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sd_detector_theoretical(
    kind: u32,
    d1: usize,
    d2: usize,
    s1: usize,
    s2: usize,
    out: *mut *mut SdDetector,
) -> SdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let spec = DetectorSpec::theoretical(kind_from_c(kind)?, &shape(d1, d2, s1, s2)?, &Default::default())?;
        *out = Box::into_raw(Box::new(SdDetector(spec)));
        Ok(())
    })
}

/// The statistic selected by the dominating rate term, with theoretical cutoff.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sd_delta_star(d1: usize, d2: usize, s1: usize, s2: usize, out: *mut *mut SdDetector) -> SdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let sh = shape(d1, d2, s1, s2)?;
        let kind = dispatch(&rate_breakdown(&sh)?);
        let spec = DetectorSpec::theoretical(kind, &sh, &Default::default())?;
        *out = Box::into_raw(Box::new(SdDetector(spec)));
        Ok(())
    })
}

/// A copy of `det` whose cutoff is the conservative null quantile at `level`.
///
/// # Safety
/// `det` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sd_detector_calibrate(
    det: *const SdDetector,
    level: f64,
    n_reps: usize,
    seed: u64,
    cap: u64,
    out: *mut *mut SdDetector,
) -> SdStatus {
    guard(|| {
        let det = &in_ref(det, "detector")?.0;
        let out = out_ref(out, "out")?;
        let spec = calibrate_cutoff(det, level, n_reps, SeedSpec::new(seed, 0), cap)?;
        *out = Box::into_raw(Box::new(SdDetector(spec)));
        Ok(())
    })
}

/// # Safety
/// `det` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_detector_kind(det: *const SdDetector) -> SdDetectorKind {
    det.as_ref().map_or(SdDetectorKind::Linear, |d| kind_to_c(d.0.kind))
}

/// The cutoff, or NaN for a null handle.
///
/// # Safety
/// `det` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_detector_cutoff(det: *const SdDetector) -> f64 {
    det.as_ref().map_or(f64::NAN, |d| d.0.cutoff)
}

/// # Safety
/// `det` and `y` must be live handles and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sd_detector_evaluate(
    det: *const SdDetector,
    y: *const SdMatrix,
    cap: u64,
    out: *mut SdTestOutcome,
) -> SdStatus {
    guard(|| {
        let det = &in_ref(det, "detector")?.0;
        let y = &in_ref(y, "matrix")?.0;
        let out = out_ref(out, "out")?;
        let o = det.evaluate(y, cap)?;
        *out = SdTestOutcome {
            kind: kind_to_c(o.kind),
            statistic: o.statistic,
            cutoff: o.cutoff,
            reject: o.reject,
            work_count: o.work_count,
        };
        Ok(())
    })
}

/// Monte Carlo type I, type II and total risk of `det` at signal `mu` with
/// the planted block in the leading rows and columns.
///
/// # Safety
/// `det` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sd_estimate_risk(
    det: *const SdDetector,
    mu: f64,
    n_reps: usize,
    seed: u64,
    cap: u64,
    out: *mut SdRiskEstimate,
) -> SdStatus {
    guard(|| {
        let det = &in_ref(det, "detector")?.0;
        let out = out_ref(out, "out")?;
        let proc = Procedure::Fixed(det.clone());
        let e = estimate_risk(&proc, &det.shape, mu, n_reps, SeedSpec::new(seed, 0), SupportPolicy::Canonical, cap)?;
        *out = SdRiskEstimate {
            mu: e.mu,
            type_one: e.type_one,
            type_one_se: e.type_one_se,
            type_two: e.type_two,
            type_two_se: e.type_two_se,
            risk: e.risk,
            n_reps: e.n_reps as u64,
        };
        Ok(())
    })
}

/// # Safety
/// `det` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sd_detector_free(det: *mut SdDetector) {
    if !det.is_null() {
        drop(Box::from_raw(det));
    }
}
