//! C ABI over `sieve-core`.
//!
//! Datasets, filter reports and trained models cross the boundary as opaque
//! handles. The caller owns every handle it receives and releases it with the
//! matching `*_free`. Fallible calls return a [`SieveStatus`]; after a failure
//! [`sieve_last_error`] describes it until the next failing call on the same
//! thread. Out-pointers are left untouched on failure, except handle
//! out-pointers, which are set to NULL first.
//!
//! Enumerated inputs (criterion, mode, algorithm, kernel) are passed as the
//! `SIEVE_*` integer constants and validated, so a bad value is an error
//! rather than undefined behavior.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use sieve_core::dataset::{load_dataset, save_dataset, Dataset};
use sieve_core::env::{generate_dataset, make_env, parse_env_id, BehaviorSettings, DiscreteMdp, MixSpec};
use sieve_core::eval::{rollout_return, EvalConfig};
use sieve_core::filter::{
    apply_filter, load_report, partition, save_report, CriterionKind, DiscountMode, FilterReport, ScoreCriterion,
};
use sieve_core::learn::{
    expectile, load_model, mmd_squared, save_model, train, Algorithm, Kernel, LearnedModel, LearnerConfig,
};
use sieve_core::Error;

pub const SIEVE_CRITERION_AVERAGE_REWARD: u32 = 0;
pub const SIEVE_CRITERION_AVERAGE_DISCOUNTED: u32 = 1;

pub const SIEVE_MODE_ABSOLUTE: u32 = 0;
pub const SIEVE_MODE_RELATIVE: u32 = 1;

pub const SIEVE_ALGORITHM_SUPPORT: u32 = 0;
pub const SIEVE_ALGORITHM_BC: u32 = 1;
pub const SIEVE_ALGORITHM_EXPECTILE: u32 = 2;

pub const SIEVE_KERNEL_GAUSSIAN: u32 = 0;
pub const SIEVE_KERNEL_LAPLACIAN: u32 = 1;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SieveStatus {
    Ok = 0,
    Io = 1,
    Parse = 2,
    Invariant = 3,
    Record = 4,
    EmptyDataset = 5,
    EmptyEpisode = 6,
    /// No episode scores above the mean; there is no filtered dataset.
    Degenerate = 7,
    ReportMismatch = 8,
    InvalidParam = 9,
    Unsupported = 10,
    NullPointer = 11,
    /// A Rust panic was caught at the boundary.
    Panic = 12,
}

/// Opaque dataset handle.
pub struct SieveDataset(Dataset);

/// Opaque filter report handle.
pub struct SieveReport(FilterReport);

/// Opaque trained model handle.
pub struct SieveModel(LearnedModel);

/// Learner settings; start from `sieve_learner_config_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SieveLearnerConfig {
    /// One of the `SIEVE_ALGORITHM_*` constants.
    pub algorithm: u32,
    pub gamma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub alpha: f64,
    pub expectile_tau: f64,
    pub awr_temperature: f64,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(SieveStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } => SieveStatus::Io,
            Error::Parse { .. } => SieveStatus::Parse,
            Error::Invariant { .. } => SieveStatus::Invariant,
            Error::Record { .. } => SieveStatus::Record,
            Error::EmptyDataset => SieveStatus::EmptyDataset,
            Error::EmptyEpisode => SieveStatus::EmptyEpisode,
            Error::Degenerate { .. } => SieveStatus::Degenerate,
            Error::ReportMismatch(_) => SieveStatus::ReportMismatch,
            Error::InvalidParam(_) => SieveStatus::InvalidParam,
            Error::Unsupported(_) => SieveStatus::Unsupported,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(SieveStatus::InvalidParam, msg.into())
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn run(f: impl FnOnce() -> Result<(), Failure>) -> SieveStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SieveStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            SieveStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(SieveStatus::NullPointer, format!("{name} is NULL")))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(SieveStatus::NullPointer, format!("{name} is NULL")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{name} is not UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure(SieveStatus::NullPointer, format!("{name} is NULL")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(SieveStatus::NullPointer, format!("{name} is NULL")));
    }
    out.write(value);
    Ok(())
}

/// Clears a handle out-pointer up front so failures leave it NULL.
unsafe fn clear<T>(out: *mut *mut T) {
    if !out.is_null() {
        out.write(std::ptr::null_mut());
    }
}

fn criterion_kind(v: u32) -> Result<CriterionKind, Failure> {
    match v {
        SIEVE_CRITERION_AVERAGE_REWARD => Ok(CriterionKind::AverageReward),
        SIEVE_CRITERION_AVERAGE_DISCOUNTED => Ok(CriterionKind::AverageDiscounted),
        _ => Err(invalid(format!("unknown criterion {v}"))),
    }
}

fn discount_mode(v: u32) -> Result<DiscountMode, Failure> {
    match v {
        SIEVE_MODE_ABSOLUTE => Ok(DiscountMode::AbsolutePower),
        SIEVE_MODE_RELATIVE => Ok(DiscountMode::RelativePower),
        _ => Err(invalid(format!("unknown discount mode {v}"))),
    }
}

fn algorithm(v: u32) -> Result<Algorithm, Failure> {
    match v {
        SIEVE_ALGORITHM_SUPPORT => Ok(Algorithm::SupportConstrainedQ),
        SIEVE_ALGORITHM_BC => Ok(Algorithm::BcRegularizedQ),
        SIEVE_ALGORITHM_EXPECTILE => Ok(Algorithm::ExpectileQ),
        _ => Err(invalid(format!("unknown algorithm {v}"))),
    }
}

fn algorithm_code(a: Algorithm) -> u32 {
    match a {
        Algorithm::SupportConstrainedQ => SIEVE_ALGORITHM_SUPPORT,
        Algorithm::BcRegularizedQ => SIEVE_ALGORITHM_BC,
        Algorithm::ExpectileQ => SIEVE_ALGORITHM_EXPECTILE,
    }
}

fn env_from_id(id: &str) -> Result<DiscreteMdp, Failure> {
    let (name, params) = parse_env_id(id)?;
    Ok(make_env(&name, &params)?)
}

/// Message of the last failure on this thread, or NULL if none. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sieve_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Loads and validates an ORLD file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sieve_dataset_load(path: *const c_char, out: *mut *mut SieveDataset) -> SieveStatus {
    clear(out);
    run(|| {
        let d = load_dataset(text(path, "path")?)?;
        put(out, Box::into_raw(Box::new(SieveDataset(d))), "out")
    })
}

/// Writes a dataset as ORLD, atomically.
///
/// # Safety
/// `dataset` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sieve_dataset_save(dataset: *const SieveDataset, path: *const c_char) -> SieveStatus {
    run(|| Ok(save_dataset(&borrow(dataset, "dataset")?.0, text(path, "path")?)?))
}

/// Rolls out a mixed-quality dataset on a built-in environment.
///
/// `env_id` is a name optionally followed by parameters, as in
/// `gridworld:n=5,slip=0.1`. Behavior settings take their defaults and the
/// episodes are interleaved with `seed`.
///
/// # Safety
/// `env_id` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sieve_dataset_generate(
    env_id: *const c_char,
    random_episodes: usize,
    medium_episodes: usize,
    expert_episodes: usize,
    seed: u64,
    out: *mut *mut SieveDataset,
) -> SieveStatus {
    clear(out);
    run(|| {
        let m = env_from_id(text(env_id, "env_id")?)?;
        let mix = MixSpec::new(random_episodes, medium_episodes, expert_episodes, seed)?;
        let d = generate_dataset(&m, &mix, &BehaviorSettings::default(), seed)?;
        put(out, Box::into_raw(Box::new(SieveDataset(d))), "out")
    })
}

/// # Safety
/// `dataset` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sieve_dataset_free(dataset: *mut SieveDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// # Safety
/// `dataset` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sieve_dataset_episode_count(dataset: *const SieveDataset, out: *mut usize) -> SieveStatus {
    run(|| put(out, borrow(dataset, "dataset")?.0.len(), "out"))
}

/// # Safety
/// `dataset` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sieve_dataset_transition_count(
    dataset: *const SieveDataset,
    out: *mut usize,
) -> SieveStatus {
    run(|| put(out, borrow(dataset, "dataset")?.0.transition_count(), "out"))
}

/// Writes the dataset's 16-character hex content digest, NUL-terminated,
/// into `buf`. Needs `cap >= 17`.
///
/// # Safety
/// `dataset` must be a live handle; `buf` must have room for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn sieve_dataset_digest(
    dataset: *const SieveDataset,
    buf: *mut c_char,
    cap: usize,
) -> SieveStatus {
    run(|| {
        let digest = borrow(dataset, "dataset")?.0.digest();
        if buf.is_null() {
            return Err(Failure(SieveStatus::NullPointer, "buf is NULL".into()));
        }
        if cap < digest.len() + 1 {
            return Err(invalid(format!("buffer of {cap} bytes, digest needs {}", digest.len() + 1)));
        }
        std::ptr::copy_nonoverlapping(digest.as_ptr().cast::<c_char>(), buf, digest.len());
        buf.add(digest.len()).write(0);
        Ok(())
    })
}

/// Scores every episode and splits them around the dataset mean.
///
/// `gamma` is ignored by the average-reward criterion but must still lie in
/// `[0, 1)`.
///
/// # Safety
/// `dataset` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sieve_partition(
    dataset: *const SieveDataset,
    criterion: u32,
    gamma: f64,
    mode: u32,
    out: *mut *mut SieveReport,
) -> SieveStatus {
    clear(out);
    run(|| {
        let c = ScoreCriterion::new(criterion_kind(criterion)?, gamma, discount_mode(mode)?)?;
        let r = partition(&borrow(dataset, "dataset")?.0, &c)?;
        put(out, Box::into_raw(Box::new(SieveReport(r))), "out")
    })
}

/// Keeps the superior episodes of `report`. Returns
/// `SIEVE_STATUS_DEGENERATE` when there are none.
///
/// # Safety
/// `dataset` and `report` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sieve_apply_filter(
    dataset: *const SieveDataset,
    report: *const SieveReport,
    out: *mut *mut SieveDataset,
) -> SieveStatus {
    clear(out);
    run(|| {
        let f = apply_filter(&borrow(dataset, "dataset")?.0, &borrow(report, "report")?.0)?;
        put(out, Box::into_raw(Box::new(SieveDataset(f))), "out")
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sieve_report_load(path: *const c_char, out: *mut *mut SieveReport) -> SieveStatus {
    clear(out);
    run(|| {
        let r = load_report(text(path, "path")?)?;
        put(out, Box::into_raw(Box::new(SieveReport(r))), "out")
    })
}

/// # Safety
/// `report` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sieve_report_save(report: *const SieveReport, path: *const c_char) -> SieveStatus {
    run(|| Ok(save_report(&borrow(report, "report")?.0, text(path, "path")?)?))
}

/// # Safety
/// `report` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sieve_report_free(report: *mut SieveReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sieve_report_dataset_mean(report: *const SieveReport, out: *mut f64) -> SieveStatus {
    run(|| put(out, borrow(report, "report")?.0.dataset_mean, "out"))
}

/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sieve_report_superior_count(report: *const SieveReport, out: *mut usize) -> SieveStatus {
    run(|| put(out, borrow(report, "report")?.0.superior_indices.len(), "out"))
}

/// Copies the superior episode indices, ascending, into `buf`. `cap` must
/// be at least `sieve_report_superior_count`.
///
/// # Safety
/// `report` must be a live handle; `buf` must have room for `cap` values.
#[no_mangle]
pub unsafe extern "C" fn sieve_report_superior_indices(
    report: *const SieveReport,
    buf: *mut usize,
    cap: usize,
) -> SieveStatus {
    run(|| {
        let idx = &borrow(report, "report")?.0.superior_indices;
        if cap < idx.len() {
            return Err(invalid(format!("buffer holds {cap} indices, report has {}", idx.len())));
        }
        if !idx.is_empty() {
            if buf.is_null() {
                return Err(Failure(SieveStatus::NullPointer, "buf is NULL".into()));
            }
            std::ptr::copy_nonoverlapping(idx.as_ptr(), buf, idx.len());
        }
        Ok(())
    })
}

/// Default settings for `algorithm`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sieve_learner_config_default(algo: u32, out: *mut SieveLearnerConfig) -> SieveStatus {
    run(|| {
        let c = LearnerConfig::new(algorithm(algo)?);
        put(
            out,
            SieveLearnerConfig {
                algorithm: algorithm_code(c.algorithm),
                gamma: c.gamma,
                epochs: c.epochs,
                batch_size: c.batch_size,
                learning_rate: c.learning_rate,
                alpha: c.alpha,
                expectile_tau: c.expectile_tau,
                awr_temperature: c.awr_temperature,
                seed: c.seed,
            },
            "out",
        )
    })
}

/// Trains a tabular learner on `dataset`.
///
/// # Safety
/// `dataset` must be a live handle, `config` readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sieve_train(
    dataset: *const SieveDataset,
    config: *const SieveLearnerConfig,
    out: *mut *mut SieveModel,
) -> SieveStatus {
    clear(out);
    run(|| {
        let c = borrow(config, "config")?;
        let cfg = LearnerConfig {
            algorithm: algorithm(c.algorithm)?,
            gamma: c.gamma,
            epochs: c.epochs,
            batch_size: c.batch_size,
            learning_rate: c.learning_rate,
            alpha: c.alpha,
            expectile_tau: c.expectile_tau,
            awr_temperature: c.awr_temperature,
            seed: c.seed,
        };
        let m = train(&borrow(dataset, "dataset")?.0, &cfg)?;
        put(out, Box::into_raw(Box::new(SieveModel(m))), "out")
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sieve_model_load(path: *const c_char, out: *mut *mut SieveModel) -> SieveStatus {
    clear(out);
    run(|| {
        let m = load_model(text(path, "path")?)?;
        put(out, Box::into_raw(Box::new(SieveModel(m))), "out")
    })
}

/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sieve_model_save(model: *const SieveModel, path: *const c_char) -> SieveStatus {
    run(|| Ok(save_model(&borrow(model, "model")?.0, text(path, "path")?)?))
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sieve_model_free(model: *mut SieveModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Action chosen at `state`, or -1 where the training data never visited it.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sieve_model_action(model: *const SieveModel, state: usize, out: *mut i64) -> SieveStatus {
    run(|| {
        let m = &borrow(model, "model")?.0;
        if state >= m.n_states {
            return Err(invalid(format!("state {state} outside 0..{}", m.n_states)));
        }
        put(out, m.action(state).map_or(-1, |a| a as i64), "out")
    })
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sieve_model_q(
    model: *const SieveModel,
    state: usize,
    action: usize,
    out: *mut f64,
) -> SieveStatus {
    run(|| {
        let m = &borrow(model, "model")?.0;
        if state >= m.n_states || action >= m.n_actions {
            return Err(invalid(format!("({state}, {action}) outside {}x{}", m.n_states, m.n_actions)));
        }
        put(out, m.q(state, action), "out")
    })
}

/// Mean discounted return of the model's policy over `n_episodes` rollouts
/// on the environment named by `env_id`.
///
/// # Safety
/// `model` must be a live handle, `env_id` a NUL-terminated string, `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sieve_evaluate(
    model: *const SieveModel,
    env_id: *const c_char,
    n_episodes: usize,
    gamma_eval: f64,
    seed: u64,
    out: *mut f64,
) -> SieveStatus {
    run(|| {
        let m = env_from_id(text(env_id, "env_id")?)?;
        let cfg = EvalConfig {
            n_episodes,
            gamma_eval,
            seed,
        };
        let stats = rollout_return(&m, &borrow(model, "model")?.0.policy, &cfg)?;
        put(out, stats.mean, "out")
    })
}

/// `tau`-expectile of `len` values.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sieve_expectile(values: *const f64, len: usize, tau: f64, out: *mut f64) -> SieveStatus {
    run(|| put(out, expectile(slice(values, len, "values")?, tau)?, "out"))
}

/// Squared MMD between `nx` and `ny` points of dimension `dim`, stored
/// row-major in `x` and `y`.
///
/// # Safety
/// `x` must hold `nx * dim` doubles and `y` `ny * dim`; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sieve_mmd_squared(
    x: *const f64,
    nx: usize,
    y: *const f64,
    ny: usize,
    dim: usize,
    kernel: u32,
    sigma: f64,
    out: *mut f64,
) -> SieveStatus {
    run(|| {
        if dim == 0 {
            return Err(invalid("dim must be >= 1"));
        }
        let size = |n: usize| n.checked_mul(dim).ok_or_else(|| invalid("sample size overflows"));
        let xs: Vec<&[f64]> = slice(x, size(nx)?, "x")?.chunks(dim).collect();
        let ys: Vec<&[f64]> = slice(y, size(ny)?, "y")?.chunks(dim).collect();
        let k = match kernel {
            SIEVE_KERNEL_GAUSSIAN => Kernel::Gaussian { sigma },
            SIEVE_KERNEL_LAPLACIAN => Kernel::Laplacian { sigma },
            _ => return Err(invalid(format!("unknown kernel {kernel}"))),
        };
        put(out, mmd_squared(&xs, &ys, k)?, "out")
    })
}
