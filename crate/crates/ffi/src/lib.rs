//! C interface to the skewersim simulator and policy.
//!
//! Objects cross the boundary as opaque handles created by `sk_*_new` or
//! `sk_*_load` and released with the matching `sk_*_free`. Every fallible
//! call returns an [`SkStatus`]; on failure `sk_last_error` holds a message
//! for the calling thread until its next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use skewersim::harness::{run_plate_experiment, Policy, TrialConfig};
use skewersim::perception::Image;
use skewersim::policy::{infer_primitive, label_index, PolicyMode, PolicyModel};
use skewersim::simworld::archetype::{ArchetypeTable, PlateSpec};
use skewersim::simworld::primitive::HapticTrace;
use skewersim::simworld::{spawn_plate, PlateState, SENSOR_PERIOD, TRACE_LEN};
use skewersim::tinynn::{gradient_check, Checkpoint, Tensor};
use skewersim::Error;

/// Side length of policy input images.
pub const SK_IMAGE_SIZE: usize = 32;
/// Samples in a haptic trace.
pub const SK_TRACE_LEN: usize = 26;
const _: () = assert!(SK_TRACE_LEN == TRACE_LEN);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Checkpoint = 5,
    Runtime = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkMode {
    Multimodal = 0,
    VisionOnly = 1,
    HapticOnly = 2,
    OpenLoop = 3,
}

impl From<SkMode> for PolicyMode {
    fn from(m: SkMode) -> Self {
        match m {
            SkMode::Multimodal => PolicyMode::Multimodal,
            SkMode::VisionOnly => PolicyMode::VisionOnly,
            SkMode::HapticOnly => PolicyMode::HapticOnly,
            SkMode::OpenLoop => PolicyMode::OpenLoop,
        }
    }
}

impl From<PolicyMode> for SkMode {
    fn from(m: PolicyMode) -> Self {
        match m {
            PolicyMode::Multimodal => SkMode::Multimodal,
            PolicyMode::VisionOnly => SkMode::VisionOnly,
            PolicyMode::HapticOnly => SkMode::HapticOnly,
            PolicyMode::OpenLoop => SkMode::OpenLoop,
        }
    }
}

/// Primitive chosen by a policy.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkPrimitive {
    VerticalSkewer = 0,
    AngledSkewer = 1,
}

/// Plate-clearing tallies.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SkMetrics {
    pub items_acquired: u32,
    pub total_attempts: u32,
    pub miss: u32,
    pub drop: u32,
    pub unstable: u32,
    pub damage: u32,
    pub detection: u32,
    pub exceeded_retries: u32,
    pub success_rate: f64,
}

/// Trained primitive-selection policy.
pub struct SkPolicy {
    model: PolicyModel,
}

/// Plate specification plus the archetype table it draws from.
pub struct SkPlateSpec {
    spec: PlateSpec,
    table: ArchetypeTable,
}

/// A spawned plate.
pub struct SkPlate {
    state: PlateState,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

fn status_of(e: &Error) -> SkStatus {
    match e {
        Error::Io { .. } => SkStatus::Io,
        Error::Checkpoint(_) | Error::Json { .. } => SkStatus::Checkpoint,
        Error::Config(_) | Error::UnknownArchetype(_) | Error::Mode(_) => SkStatus::Config,
        Error::Dimension(_) | Error::MissingModality(_) => SkStatus::InvalidArgument,
        _ => SkStatus::Runtime,
    }
}

struct Fail(SkStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SkStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SkStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            SkStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(SkStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message describing the calling thread's last failure. The pointer stays
/// valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn sk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sk_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Loads a policy checkpoint written by `skewersim train`.
///
/// # Safety
/// `path` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sk_policy_load(path: *const c_char, out: *mut *mut SkPolicy) -> SkStatus {
    guard(|| {
        let p = str_arg(path, "path")?;
        let model = PolicyModel::from_checkpoint(&Checkpoint::load(Path::new(p))?)?;
        put(out, SkPolicy { model })
    })
}

/// Untrained policy with seeded initial weights.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sk_policy_new(mode: SkMode, seed: u64, out: *mut *mut SkPolicy) -> SkStatus {
    guard(|| {
        put(
            out,
            SkPolicy {
                model: PolicyModel::seeded(mode.into(), seed),
            },
        )
    })
}

/// # Safety
/// `policy` must come from `sk_policy_load`/`sk_policy_new` or be null.
#[no_mangle]
pub unsafe extern "C" fn sk_policy_free(policy: *mut SkPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// # Safety
/// `policy` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sk_policy_mode(policy: *const SkPolicy, out: *mut SkMode) -> SkStatus {
    guard(|| {
        let p = policy.as_ref().ok_or_else(|| null("policy"))?;
        let o = out.as_mut().ok_or_else(|| null("out"))?;
        *o = p.model.mode.into();
        Ok(())
    })
}

/// Chooses a primitive.
///
/// `image` is `SK_IMAGE_SIZE * SK_IMAGE_SIZE * 3` row-major interleaved RGB
/// values in [0, 1]; `trace` is `SK_TRACE_LEN` force samples in newtons.
/// Either may be null when the policy's mode does not read it. `probs` receives the
/// (vertical, angled) probabilities and may be null.
///
/// # Safety
/// Non-null pointers must reference arrays of at least `image_len` /
/// `trace_len` values, and `probs` two writable values.
#[no_mangle]
pub unsafe extern "C" fn sk_policy_infer(
    policy: *mut SkPolicy,
    image: *const f64,
    image_len: usize,
    trace: *const f64,
    trace_len: usize,
    out: *mut SkPrimitive,
    probs: *mut f64,
) -> SkStatus {
    guard(|| {
        let p = policy.as_mut().ok_or_else(|| null("policy"))?;
        let o = out.as_mut().ok_or_else(|| null("out"))?;
        let img = if image.is_null() {
            None
        } else {
            let n = SK_IMAGE_SIZE * SK_IMAGE_SIZE * 3;
            if image_len != n {
                return Err(Fail(
                    SkStatus::InvalidArgument,
                    format!("image has {image_len} values, expected {n}"),
                ));
            }
            let mut im = Image::filled(SK_IMAGE_SIZE, SK_IMAGE_SIZE, [0.0; 3]);
            im.data.copy_from_slice(std::slice::from_raw_parts(image, n));
            Some(im)
        };
        let tr = if trace.is_null() {
            None
        } else {
            if trace_len != TRACE_LEN {
                return Err(Fail(
                    SkStatus::InvalidArgument,
                    format!("trace has {trace_len} samples, expected {TRACE_LEN}"),
                ));
            }
            Some(HapticTrace {
                samples: std::slice::from_raw_parts(trace, trace_len).to_vec(),
                sample_period: SENSOR_PERIOD,
                contact_onset_index: 0,
            })
        };
        let (prim, pr) = infer_primitive(&mut p.model, img.as_ref(), tr.as_ref())?;
        *o = if label_index(prim) == 0 {
            SkPrimitive::VerticalSkewer
        } else {
            SkPrimitive::AngledSkewer
        };
        if !probs.is_null() {
            std::slice::from_raw_parts_mut(probs, 2).copy_from_slice(&pr);
        }
        Ok(())
    })
}

/// Maximum relative error of a finite-difference gradient check on one
/// random input.
///
/// # Safety
/// `policy` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sk_policy_gradcheck(policy: *mut SkPolicy, seed: u64, out: *mut f64) -> SkStatus {
    guard(|| {
        use rand::Rng;
        let p = policy.as_mut().ok_or_else(|| null("policy"))?;
        let o = out.as_mut().ok_or_else(|| null("out"))?;
        let mut r = skewersim::rng::stream(seed, &[]);
        let img = Tensor::uniform(&[3, SK_IMAGE_SIZE, SK_IMAGE_SIZE], 1.0, &mut r);
        let tr: Vec<f64> = (0..TRACE_LEN).map(|_| r.gen_range(0.0..3.0)).collect();
        *o = gradient_check(&mut p.model, |m, bw| m.loss(Some(&img), Some(&tr), 1, bw))?;
        Ok(())
    })
}

/// Number of built-in evaluation plate specs.
#[no_mangle]
pub extern "C" fn sk_evaluation_plate_count() -> usize {
    PlateSpec::evaluation_plates().len()
}

/// One of the built-in evaluation plates, with the bundled archetypes.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sk_plate_spec_evaluation(index: usize, out: *mut *mut SkPlateSpec) -> SkStatus {
    guard(|| {
        let spec = PlateSpec::evaluation_plates()
            .into_iter()
            .nth(index)
            .ok_or_else(|| Fail(SkStatus::InvalidArgument, format!("no evaluation plate {index}")))?;
        put(
            out,
            SkPlateSpec {
                spec,
                table: ArchetypeTable::default(),
            },
        )
    })
}

/// Plate spec from JSON, with the bundled archetypes.
///
/// # Safety
/// `json` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sk_plate_spec_from_json(json: *const c_char, out: *mut *mut SkPlateSpec) -> SkStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let spec: PlateSpec = serde_json::from_str(text).map_err(|e| Error::json("plate spec", e))?;
        let table = ArchetypeTable::default();
        for a in &spec.archetypes {
            table.get(&a.name)?;
        }
        put(out, SkPlateSpec { spec, table })
    })
}

/// # Safety
/// `spec` must come from an `sk_plate_spec_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn sk_plate_spec_free(spec: *mut SkPlateSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// # Safety
/// `spec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sk_plate_spawn(spec: *const SkPlateSpec, seed: u64, out: *mut *mut SkPlate) -> SkStatus {
    guard(|| {
        let s = spec.as_ref().ok_or_else(|| null("spec"))?;
        let state = spawn_plate(&s.spec, &s.table, seed)?;
        put(out, SkPlate { state })
    })
}

/// # Safety
/// `plate` must come from `sk_plate_spawn` or be null.
#[no_mangle]
pub unsafe extern "C" fn sk_plate_free(plate: *mut SkPlate) {
    if !plate.is_null() {
        drop(Box::from_raw(plate));
    }
}

/// Items on the plate, or 0 for a null handle.
///
/// # Safety
/// `plate` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sk_plate_item_count(plate: *const SkPlate) -> usize {
    plate.as_ref().map_or(0, |p| p.state.items.len())
}

/// Clears one plate with default trial settings. A null `policy` selects
/// the ground-truth oracle.
///
/// # Safety
/// `spec` must be a live handle, `policy` live or null, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sk_run_plate(
    spec: *const SkPlateSpec,
    policy: *mut SkPolicy,
    seed: u64,
    max_retries: u32,
    out: *mut SkMetrics,
) -> SkStatus {
    guard(|| {
        let s = spec.as_ref().ok_or_else(|| null("spec"))?;
        let o = out.as_mut().ok_or_else(|| null("out"))?;
        let cfg = TrialConfig {
            max_retries: max_retries as usize,
            seed,
            ..TrialConfig::default()
        };
        let mut pol = match policy.as_mut() {
            Some(p) => Policy::Learned(&mut p.model),
            None => Policy::Oracle,
        };
        let m = run_plate_experiment(&s.spec, &s.table, &mut pol, &cfg, None)?.metrics;
        let c = |v: usize| v as u32;
        *o = SkMetrics {
            items_acquired: c(m.items_acquired),
            total_attempts: c(m.total_attempts),
            miss: c(m.miss),
            drop: c(m.drop),
            unstable: c(m.unstable),
            damage: c(m.damage),
            detection: c(m.detection),
            exceeded_retries: c(m.exceeded_retries),
            success_rate: m.success_rate(),
        };
        Ok(())
    })
}
