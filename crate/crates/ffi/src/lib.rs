//! C ABI for the `neada` optimizers.
//!
//! Every fallible function returns a [`NeadaStatus`]; on failure a message is
//! available from [`neada_last_error`] on the same thread. Handles are opaque
//! and must be released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use neada::drivers::{neada_run, nonnested_run, Metrics, NeAdaConfig, NonNestedConfig};
use neada::subroutine::InnerKind;
use neada::trajectory::{RunStatus, Trajectory};
use neada::{Error, McCormick, MinimaxProblem, NoiseSpec, Psi, Quadratic, StochasticOracle, StoppingCriterion};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeadaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    OutOfRange = 4,
    Runtime = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: NeadaStatus, msg: &str) -> NeadaStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> NeadaStatus {
    let status = match e {
        Error::Shape { .. } => NeadaStatus::ShapeMismatch,
        Error::InvalidConfig(_) | Error::Usage(_) | Error::CompactDomainRequired | Error::LogDomain(_) => {
            NeadaStatus::InvalidArgument
        }
        _ => NeadaStatus::Runtime,
    };
    fail(status, &e.to_string())
}

fn guard(f: impl FnOnce() -> NeadaStatus) -> NeadaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(NeadaStatus::Panic, "internal panic"),
    }
}

/// Message of the last failure on this thread. Valid until the next call
/// into the library from this thread; empty when nothing failed yet.
#[no_mangle]
pub extern "C" fn neada_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn neada_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Opaque test problem.
pub struct NeadaProblem {
    inner: Box<dyn MinimaxProblem>,
}

/// Opaque recorded run.
pub struct NeadaTrajectory {
    inner: Trajectory,
}

unsafe fn slice<'a>(p: *const f64, n: usize) -> Option<&'a [f64]> {
    if n == 0 {
        Some(&[])
    } else if p.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(p, n))
    }
}

unsafe fn slice_mut<'a>(p: *mut f64, n: usize) -> Option<&'a mut [f64]> {
    if n == 0 {
        Some(&mut [])
    } else if p.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts_mut(p, n))
    }
}

fn emit_problem(out: *mut *mut NeadaProblem, inner: Box<dyn MinimaxProblem>) -> NeadaStatus {
    if out.is_null() {
        return fail(NeadaStatus::NullPointer, "out is null");
    }
    unsafe { *out = Box::into_raw(Box::new(NeadaProblem { inner })) };
    NeadaStatus::Ok
}

/// `f(x, y) = -y²/2 + L x y - L² x²/2` with scalar `x`, `y`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn neada_problem_quadratic(l: f64, out: *mut *mut NeadaProblem) -> NeadaStatus {
    guard(|| {
        if !(l > 0.0 && l.is_finite()) {
            return fail(NeadaStatus::InvalidArgument, "L must be positive and finite");
        }
        emit_problem(out, Box::new(Quadratic::new(l)))
    })
}

/// McCormick composite with `x, y ∈ R²`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn neada_problem_mccormick(out: *mut *mut NeadaProblem) -> NeadaStatus {
    guard(|| emit_problem(out, Box::new(McCormick)))
}

/// # Safety
/// `p` must come from a `neada_problem_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn neada_problem_free(p: *mut NeadaProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live problem handle; `dim_x`, `dim_y` writable.
#[no_mangle]
pub unsafe extern "C" fn neada_problem_dims(
    p: *const NeadaProblem,
    dim_x: *mut usize,
    dim_y: *mut usize,
) -> NeadaStatus {
    guard(|| {
        let Some(p) = p.as_ref() else { return fail(NeadaStatus::NullPointer, "problem is null") };
        if dim_x.is_null() || dim_y.is_null() {
            return fail(NeadaStatus::NullPointer, "output pointer is null");
        }
        *dim_x = p.inner.dim_x();
        *dim_y = p.inner.dim_y();
        NeadaStatus::Ok
    })
}

/// Objective value and exact gradients at `(x, y)`. `grad_x`/`grad_y` may be
/// null when not wanted; otherwise they must hold `nx`/`ny` values.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn neada_problem_eval(
    p: *const NeadaProblem,
    x: *const f64,
    nx: usize,
    y: *const f64,
    ny: usize,
    value: *mut f64,
    grad_x: *mut f64,
    grad_y: *mut f64,
) -> NeadaStatus {
    guard(|| {
        let Some(p) = p.as_ref() else { return fail(NeadaStatus::NullPointer, "problem is null") };
        let (Some(x), Some(y)) = (slice(x, nx), slice(y, ny)) else {
            return fail(NeadaStatus::NullPointer, "x or y is null");
        };
        if nx != p.inner.dim_x() || ny != p.inner.dim_y() {
            return fail(
                NeadaStatus::ShapeMismatch,
                &format!("expected x, y of length {}, {}", p.inner.dim_x(), p.inner.dim_y()),
            );
        }
        if !value.is_null() {
            *value = p.inner.value(x, y);
        }
        if !grad_x.is_null() {
            std::slice::from_raw_parts_mut(grad_x, nx).copy_from_slice(&p.inner.grad_x(x, y));
        }
        if !grad_y.is_null() {
            std::slice::from_raw_parts_mut(grad_y, ny).copy_from_slice(&p.inner.grad_y(x, y));
        }
        NeadaStatus::Ok
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeadaPsiKind {
    Gda = 0,
    Adagrad = 1,
    Adam = 2,
    Amsgrad = 3,
}

/// Averaging function; `gamma` is read for Adam and AMSGrad only.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NeadaPsi {
    pub kind: NeadaPsiKind,
    pub gamma: f64,
}

impl NeadaPsi {
    fn to_psi(self) -> Psi {
        match self.kind {
            NeadaPsiKind::Gda => Psi::Gda,
            NeadaPsiKind::Adagrad => Psi::AdaGrad,
            NeadaPsiKind::Adam => Psi::Adam { gamma: self.gamma },
            NeadaPsiKind::Amsgrad => Psi::AmsGrad { gamma: self.gamma },
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NeadaNonNestedConfig {
    pub eta_x: f64,
    pub eta_y: f64,
    pub beta_x: f64,
    pub beta_y: f64,
    pub psi_x: NeadaPsi,
    pub psi_y: NeadaPsi,
    pub v0_x: f64,
    pub v0_y: f64,
    pub steps: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeadaCriterion {
    /// Squared gradient mapping at most `1/(t+1)`.
    I = 0,
    /// Exactly `t+1` inner iterations.
    II = 1,
    GradOrCap = 2,
    /// `fixed_k` inner iterations.
    Fixed = 3,
}

/// NeAda with a scalar AdaGrad outer step and a generalized AdaGrad inner
/// learner.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NeadaNeAdaConfig {
    pub eta: f64,
    pub v0: f64,
    pub batch: usize,
    pub criterion: NeadaCriterion,
    pub fixed_k: u64,
    pub outer_steps: u64,
    /// 0 means unlimited.
    pub max_oracle_calls: u64,
    pub inner_eta: f64,
    pub inner_alpha: f64,
    pub inner_v0: f64,
    pub cold_start: bool,
}

/// Defaults: `eta = 1`, `v0 = 1`, batch 1, criterion I, 100 outer steps,
/// inner `eta = 1`, `alpha = 0.5`, `v0 = 1`, warm start.
#[no_mangle]
pub extern "C" fn neada_neada_config_default() -> NeadaNeAdaConfig {
    NeadaNeAdaConfig {
        eta: 1.0,
        v0: 1.0,
        batch: 1,
        criterion: NeadaCriterion::I,
        fixed_k: 1,
        outer_steps: 100,
        max_oracle_calls: 0,
        inner_eta: 1.0,
        inner_alpha: 0.5,
        inner_v0: 1.0,
        cold_start: false,
    }
}

impl NeadaNeAdaConfig {
    fn to_config(self) -> NeAdaConfig {
        let criterion = match self.criterion {
            NeadaCriterion::I => StoppingCriterion::CriterionI,
            NeadaCriterion::II => StoppingCriterion::CriterionII,
            NeadaCriterion::GradOrCap => StoppingCriterion::GradOrCap,
            NeadaCriterion::Fixed => StoppingCriterion::FixedCap(self.fixed_k),
        };
        let mut cfg = NeAdaConfig::adagrad(self.eta, self.v0, criterion, self.outer_steps);
        cfg.batch = self.batch;
        cfg.max_oracle_calls = (self.max_oracle_calls > 0).then_some(self.max_oracle_calls);
        cfg.inner.kind = InnerKind::GenAdaGrad { eta: self.inner_eta, alpha: self.inner_alpha, v0: self.inner_v0 };
        cfg.inner.cold_start = self.cold_start;
        cfg
    }
}

/// One recorded outer step. `dist_y_star` is NaN when unavailable.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NeadaRow {
    pub outer_t: u64,
    pub inner_iters: u64,
    pub oracle_calls_x: u64,
    pub oracle_calls_y: u64,
    pub grad_x_norm: f64,
    pub grad_map_y: f64,
    pub dist_y_star: f64,
    pub stationarity: f64,
    pub value: f64,
    pub v_outer: f64,
}

#[allow(clippy::too_many_arguments)]
unsafe fn run_common(
    p: *const NeadaProblem,
    sigma: f64,
    seed: u64,
    x0: *const f64,
    nx: usize,
    y0: *const f64,
    ny: usize,
    out: *mut *mut NeadaTrajectory,
    run: impl FnOnce(&mut StochasticOracle<'_, dyn MinimaxProblem>, &[f64], &[f64]) -> neada::Result<Trajectory>,
) -> NeadaStatus {
    let Some(p) = p.as_ref() else { return fail(NeadaStatus::NullPointer, "problem is null") };
    if out.is_null() {
        return fail(NeadaStatus::NullPointer, "out is null");
    }
    let (Some(x0), Some(y0)) = (slice(x0, nx), slice(y0, ny)) else {
        return fail(NeadaStatus::NullPointer, "x0 or y0 is null");
    };
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return fail(NeadaStatus::InvalidArgument, "sigma must be nonnegative and finite");
    }
    let mut oracle = StochasticOracle::new(p.inner.as_ref(), NoiseSpec { sigma }, seed);
    match run(&mut oracle, x0, y0) {
        Ok(t) => {
            *out = Box::into_raw(Box::new(NeadaTrajectory { inner: t }));
            NeadaStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Non-nested adaptive descent-ascent. Gradients carry N(0, sigma²) noise
/// drawn from a generator seeded with `seed`.
///
/// # Safety
/// `cfg` must be readable, `x0`/`y0` valid for `nx`/`ny` values and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn neada_run_nonnested(
    p: *const NeadaProblem,
    cfg: *const NeadaNonNestedConfig,
    sigma: f64,
    seed: u64,
    x0: *const f64,
    nx: usize,
    y0: *const f64,
    ny: usize,
    out: *mut *mut NeadaTrajectory,
) -> NeadaStatus {
    guard(|| {
        let Some(c) = cfg.as_ref() else { return fail(NeadaStatus::NullPointer, "cfg is null") };
        let cfg = NonNestedConfig {
            eta_x: c.eta_x,
            eta_y: c.eta_y,
            beta_x: c.beta_x,
            beta_y: c.beta_y,
            psi_x: c.psi_x.to_psi(),
            psi_y: c.psi_y.to_psi(),
            v0_x: c.v0_x,
            v0_y: c.v0_y,
            steps: c.steps,
        };
        run_common(p, sigma, seed, x0, nx, y0, ny, out, |o, x0, y0| {
            nonnested_run(o, &cfg, x0, y0, &Metrics::default())
        })
    })
}

/// NeAda with scalar AdaGrad outer steps.
///
/// # Safety
/// As for [`neada_run_nonnested`].
#[no_mangle]
pub unsafe extern "C" fn neada_run_neada(
    p: *const NeadaProblem,
    cfg: *const NeadaNeAdaConfig,
    sigma: f64,
    seed: u64,
    x0: *const f64,
    nx: usize,
    y0: *const f64,
    ny: usize,
    out: *mut *mut NeadaTrajectory,
) -> NeadaStatus {
    guard(|| {
        let Some(c) = cfg.as_ref() else { return fail(NeadaStatus::NullPointer, "cfg is null") };
        let cfg = c.to_config();
        run_common(p, sigma, seed, x0, nx, y0, ny, out, |o, x0, y0| {
            neada_run(o, &cfg, x0, y0, &Metrics::default())
        })
    })
}

/// Number of recorded rows; 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn neada_trajectory_len(t: *const NeadaTrajectory) -> usize {
    t.as_ref().map_or(0, |t| t.inner.len())
}

/// 1 when the run stopped on a non-finite iterate, 0 otherwise.
///
/// # Safety
/// `t` must be a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn neada_trajectory_diverged(t: *const NeadaTrajectory) -> i32 {
    t.as_ref().map_or(0, |t| i32::from(t.inner.status == RunStatus::DivergedNonfinite))
}

/// # Safety
/// `t` must be a live trajectory handle and `row` writable.
#[no_mangle]
pub unsafe extern "C" fn neada_trajectory_row(
    t: *const NeadaTrajectory,
    index: usize,
    row: *mut NeadaRow,
) -> NeadaStatus {
    guard(|| {
        let Some(t) = t.as_ref() else { return fail(NeadaStatus::NullPointer, "trajectory is null") };
        if row.is_null() {
            return fail(NeadaStatus::NullPointer, "row is null");
        }
        let Some(r) = t.inner.rows.get(index) else {
            return fail(NeadaStatus::OutOfRange, &format!("row {index} of {}", t.inner.len()));
        };
        *row = NeadaRow {
            outer_t: r.outer_t,
            inner_iters: r.inner_iters,
            oracle_calls_x: r.oracle_calls_x,
            oracle_calls_y: r.oracle_calls_y,
            grad_x_norm: r.grad_x_norm,
            grad_map_y: r.grad_map_y,
            dist_y_star: r.dist_y_star,
            stationarity: r.stationarity,
            value: r.value,
            v_outer: r.v_outer,
        };
        NeadaStatus::Ok
    })
}

/// Copies the final iterates; `nx`/`ny` must equal the problem dimensions.
///
/// # Safety
/// `x`/`y` must be writable for `nx`/`ny` values.
#[no_mangle]
pub unsafe extern "C" fn neada_trajectory_final(
    t: *const NeadaTrajectory,
    x: *mut f64,
    nx: usize,
    y: *mut f64,
    ny: usize,
) -> NeadaStatus {
    guard(|| {
        let Some(t) = t.as_ref() else { return fail(NeadaStatus::NullPointer, "trajectory is null") };
        let (Some(xs), Some(ys)) = (slice_mut(x, nx), slice_mut(y, ny)) else {
            return fail(NeadaStatus::NullPointer, "x or y is null");
        };
        if nx != t.inner.final_x.len() || ny != t.inner.final_y.len() {
            return fail(
                NeadaStatus::ShapeMismatch,
                &format!("expected {} and {} values", t.inner.final_x.len(), t.inner.final_y.len()),
            );
        }
        xs.copy_from_slice(&t.inner.final_x);
        ys.copy_from_slice(&t.inner.final_y);
        NeadaStatus::Ok
    })
}

/// # Safety
/// `t` must be null or a live handle that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn neada_trajectory_free(t: *mut NeadaTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// `|∇ₓf|` after `steps` GDA steps on the quadratic, from `grad0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn neada_lemma1_gda_predict(
    l: f64,
    r: f64,
    eta_x: f64,
    grad0: f64,
    steps: u64,
    out: *mut f64,
) -> NeadaStatus {
    guard(|| {
        if out.is_null() {
            return fail(NeadaStatus::NullPointer, "out is null");
        }
        *out = neada::analysis::lemma1_gda_predict(l, r, eta_x, grad0, steps);
        NeadaStatus::Ok
    })
}
