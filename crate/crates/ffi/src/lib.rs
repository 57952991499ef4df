//! C ABI over `qrelay`.
//!
//! Every fallible call returns a [`QrStatus`]; on failure the message is
//! available from [`qr_last_error`] on the same thread. Handles are opaque
//! and owned by the caller once returned, released with the matching
//! `*_free`. Strings returned through `char**` are released with
//! [`qr_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qrelay::channel::{families, parse_channel, AnyChannel, BroadcastChannel};
use qrelay::coding::{end_to_end_broadcast_sim, SimConfig};
use qrelay::geometry::RateRegion;
use qrelay::lemmas::{sweep, Lemma};
use qrelay::linalg::ProbabilityDistribution;
use qrelay::region::{broadcast_region, mac_region, DistributionGrid, MacInputs, MacVariant};
use qrelay::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QrStatus {
    Ok = 0,
    InvalidInput = 1,
    VerificationFailed = 2,
    ResourceLimit = 3,
    NullPointer = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QrChannelKind {
    Cq = 0,
    Broadcast = 1,
    Mac = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QrMacVariant {
    Conditional = 0,
    AsWritten = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QrLemma {
    MeasurementOnCloseStates = 0,
    TenderOperator = 1,
    /// Single-weight form `(id − S) + 4T`; reported, not a theorem.
    HayashiNagaoka = 2,
    /// `2(id − S) + 4T`.
    HayashiNagaokaStandard = 3,
}

/// Opaque cq, broadcast or MAC channel.
pub struct QrChannel(AnyChannel);

/// Opaque convex rate region.
pub struct QrRegion(RateRegion);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QrStatus {
    match e.exit_code() {
        2 => QrStatus::VerificationFailed,
        3 => QrStatus::ResourceLimit,
        _ => QrStatus::InvalidInput,
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

/// Runs `f`, translating errors and panics into a status and the last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QrStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            let s = status_of(&e);
            set_last_error(e.to_string());
            s
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            QrStatus::NullPointer
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {msg}"));
            QrStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Lib(Error::invalid(format!("{what} is not valid UTF-8"))))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn qr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a channel file (JSON text).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qr_channel_from_json(json: *const c_char, out: *mut *mut QrChannel) -> QrStatus {
    guard(|| {
        let ch = parse_channel(str_arg(json, "json")?)?;
        write_out(out, boxed(QrChannel(ch)), "out")
    })
}

/// A canonical cq family: `orthogonal[:k]`, `overlap-pair`,
/// `depolarized[:p]`, `constant[:k]`; or `adder-mac`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qr_channel_family(spec: *const c_char, out: *mut *mut QrChannel) -> QrStatus {
    guard(|| {
        let spec = str_arg(spec, "spec")?;
        let ch = match spec {
            "adder-mac" => AnyChannel::Mac(families::adder_mac()),
            other => AnyChannel::Cq(families::by_name(other)?),
        };
        write_out(out, boxed(QrChannel(ch)), "out")
    })
}

/// Broadcast channel `x ↦ W1(x) ⊗ W2(x)` from two cq channels.
///
/// # Safety
/// `w1`, `w2` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qr_broadcast_product(
    w1: *const QrChannel,
    w2: *const QrChannel,
    out: *mut *mut QrChannel,
) -> QrStatus {
    guard(|| {
        let a = ref_arg(w1, "w1")?.0.clone().into_cq()?;
        let b = ref_arg(w2, "w2")?.0.clone().into_cq()?;
        let bc = BroadcastChannel::from_product(&a, &b)?;
        write_out(out, boxed(QrChannel(AnyChannel::Broadcast(bc))), "out")
    })
}

/// # Safety
/// `ch` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qr_channel_free(ch: *mut QrChannel) {
    if !ch.is_null() {
        drop(Box::from_raw(ch));
    }
}

/// # Safety
/// `ch` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qr_channel_kind(ch: *const QrChannel, out: *mut QrChannelKind) -> QrStatus {
    guard(|| {
        let kind = match &ref_arg(ch, "channel")?.0 {
            AnyChannel::Cq(_) => QrChannelKind::Cq,
            AnyChannel::Broadcast(_) => QrChannelKind::Broadcast,
            AnyChannel::Mac(_) => QrChannelKind::Mac,
        };
        write_out(out, kind, "out")
    })
}

/// Serializes a channel to its JSON file form.
///
/// # Safety
/// `ch` must be a live handle; `out` must be writable. Free the result with
/// [`qr_string_free`].
#[no_mangle]
pub unsafe extern "C" fn qr_channel_to_json(ch: *const QrChannel, out: *mut *mut c_char) -> QrStatus {
    guard(|| {
        let text = ref_arg(ch, "channel")?.0.to_json();
        write_out(out, CString::new(text).expect("json has no nul").into_raw(), "out")
    })
}

/// `χ(P; V)` in bits for a cq channel. `weights` may be NULL for the uniform
/// distribution, otherwise it holds `len` weights aligned with the alphabet.
///
/// # Safety
/// `ch` must be a live handle; `weights` must be NULL or point to `len`
/// doubles; `chi` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qr_holevo_chi(
    ch: *const QrChannel,
    weights: *const f64,
    len: usize,
    chi: *mut f64,
) -> QrStatus {
    guard(|| {
        let AnyChannel::Cq(c) = &ref_arg(ch, "channel")?.0 else {
            return Err(Error::invalid("chi needs a cq channel").into());
        };
        let dist = if weights.is_null() {
            c.uniform()
        } else {
            let w = std::slice::from_raw_parts(weights, len).to_vec();
            ProbabilityDistribution::new(c.alphabet().to_vec(), w)?
        };
        write_out(chi, c.holevo_chi(&dist)?, "chi")
    })
}

/// MAC-phase region over product inputs on a grid of resolution `k`;
/// `variant` is a [`QrMacVariant`] value.
///
/// # Safety
/// `mac` must be a live MAC handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qr_region_mac(
    mac: *const QrChannel,
    k: usize,
    variant: i32,
    out: *mut *mut QrRegion,
) -> QrStatus {
    guard(|| {
        let AnyChannel::Mac(m) = &ref_arg(mac, "mac")?.0 else {
            return Err(Error::invalid("expected a mac channel").into());
        };
        let v = match variant {
            v if v == QrMacVariant::Conditional as i32 => MacVariant::Conditional,
            v if v == QrMacVariant::AsWritten as i32 => MacVariant::AsWritten,
            other => return Err(Error::invalid(format!("unknown MAC variant {other}")).into()),
        };
        let r = mac_region(m, k, v, MacInputs::Product)?;
        write_out(out, boxed(QrRegion(r)), "out")
    })
}

/// Broadcast-phase region on a grid of resolution `k`.
///
/// # Safety
/// `bc` must be a live broadcast handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qr_region_broadcast(bc: *const QrChannel, k: usize, out: *mut *mut QrRegion) -> QrStatus {
    guard(|| {
        let AnyChannel::Broadcast(b) = &ref_arg(bc, "bc")?.0 else {
            return Err(Error::invalid("expected a broadcast channel").into());
        };
        let r = broadcast_region(b, &DistributionGrid::new(b.alphabet().len(), k)?)?;
        write_out(out, boxed(QrRegion(r)), "out")
    })
}

/// # Safety
/// `a`, `b` must be live region handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qr_region_intersect(
    a: *const QrRegion,
    b: *const QrRegion,
    out: *mut *mut QrRegion,
) -> QrStatus {
    guard(|| {
        let r = ref_arg(a, "a")?.0.intersect(&ref_arg(b, "b")?.0);
        write_out(out, boxed(QrRegion(r)), "out")
    })
}

/// Number of polygon vertices (counter-clockwise, origin included).
///
/// # Safety
/// `region` must be a live handle; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qr_region_vertex_count(region: *const QrRegion, count: *mut usize) -> QrStatus {
    guard(|| write_out(count, ref_arg(region, "region")?.0.vertices().len(), "count"))
}

/// Copies vertices as interleaved `(R1, R2)` pairs into `xy`, which must hold
/// `2 * capacity` doubles. Fails with `ResourceLimit` if `capacity` is
/// smaller than the vertex count.
///
/// # Safety
/// `region` must be a live handle; `xy` must point to `2 * capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn qr_region_vertices(region: *const QrRegion, xy: *mut f64, capacity: usize) -> QrStatus {
    guard(|| {
        let v = ref_arg(region, "region")?.0.vertices();
        if v.len() > capacity {
            return Err(Error::resource(format!("{} vertices do not fit in {capacity}", v.len())).into());
        }
        if xy.is_null() {
            return Err(Failure::Null("xy"));
        }
        let buf = std::slice::from_raw_parts_mut(xy, 2 * v.len());
        for (i, p) in v.iter().enumerate() {
            buf[2 * i] = p.r1;
            buf[2 * i + 1] = p.r2;
        }
        Ok(())
    })
}

/// # Safety
/// `region` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qr_region_free(region: *mut QrRegion) {
    if !region.is_null() {
        drop(Box::from_raw(region));
    }
}

/// Seeded random sweep of one operator inequality (`lemma` is a [`QrLemma`]
/// value). Writes the number of
/// violated instances and the smallest slack; a nonzero failure count is
/// reported through the outputs, not the status.
///
/// # Safety
/// `failures` and `min_slack` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qr_verify_lemma(
    lemma: i32,
    instances: usize,
    seed: u64,
    failures: *mut usize,
    min_slack: *mut f64,
) -> QrStatus {
    guard(|| {
        if failures.is_null() || min_slack.is_null() {
            return Err(Failure::Null("failures/min_slack"));
        }
        let l = match lemma {
            0 => Lemma::MeasurementOnCloseStates,
            1 => Lemma::TenderOperator,
            2 => Lemma::HayashiNagaoka,
            3 => Lemma::HayashiNagaokaStandard,
            other => return Err(Error::invalid(format!("unknown lemma {other}")).into()),
        };
        let s = sweep(l, instances, seed);
        failures.write(s.failures);
        min_slack.write(s.min_slack);
        Ok(())
    })
}

/// Runs the broadcast coding pipeline for a simulation config (JSON) and
/// returns the full report as JSON.
///
/// # Safety
/// `bc` must be a live broadcast handle, `config_json` a NUL-terminated
/// string, `report_json` writable. Free the result with [`qr_string_free`].
#[no_mangle]
pub unsafe extern "C" fn qr_simulate(
    bc: *const QrChannel,
    config_json: *const c_char,
    dim_cap: usize,
    report_json: *mut *mut c_char,
) -> QrStatus {
    guard(|| {
        let AnyChannel::Broadcast(b) = &ref_arg(bc, "bc")?.0 else {
            return Err(Error::invalid("expected a broadcast channel").into());
        };
        let cfg = SimConfig::from_json(str_arg(config_json, "config_json")?)?;
        let report = end_to_end_broadcast_sim(b, &cfg, dim_cap)?;
        let text = serde_json::to_string(&report).map_err(Error::from)?;
        write_out(report_json, CString::new(text).expect("json has no nul").into_raw(), "report_json")
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn family(spec: &str) -> *mut QrChannel {
        let s = CString::new(spec).unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(unsafe { qr_channel_family(s.as_ptr(), &mut out) }, QrStatus::Ok);
        out
    }

    fn last_error() -> String {
        unsafe { CStr::from_ptr(qr_last_error()) }.to_string_lossy().into_owned()
    }

    #[test]
    fn chi_of_orthogonal_pair() {
        let ch = family("orthogonal");
        let mut chi = f64::NAN;
        assert_eq!(unsafe { qr_holevo_chi(ch, ptr::null(), 0, &mut chi) }, QrStatus::Ok);
        assert!((chi - 1.0).abs() < 1e-12);
        let w = [0.3, 0.3];
        assert_eq!(unsafe { qr_holevo_chi(ch, w.as_ptr(), 2, &mut chi) }, QrStatus::InvalidInput);
        assert!(last_error().contains("sum"), "{}", last_error());
        unsafe { qr_channel_free(ch) };
    }

    #[test]
    fn null_and_kind_errors() {
        let mut out = ptr::null_mut();
        assert_eq!(unsafe { qr_channel_from_json(ptr::null(), &mut out) }, QrStatus::NullPointer);
        let bad = CString::new("{").unwrap();
        assert_eq!(unsafe { qr_channel_from_json(bad.as_ptr(), &mut out) }, QrStatus::InvalidInput);
        let mac = family("adder-mac");
        let mut chi = 0.0;
        assert_eq!(unsafe { qr_holevo_chi(mac, ptr::null(), 0, &mut chi) }, QrStatus::InvalidInput);
        let mut kind = QrChannelKind::Cq;
        assert_eq!(unsafe { qr_channel_kind(mac, &mut kind) }, QrStatus::Ok);
        assert_eq!(kind, QrChannelKind::Mac);
        unsafe { qr_channel_free(mac) };
        unsafe { qr_channel_free(ptr::null_mut()) };
    }

    #[test]
    fn json_roundtrip() {
        let ch = family("depolarized:0.2");
        let mut text = ptr::null_mut();
        assert_eq!(unsafe { qr_channel_to_json(ch, &mut text) }, QrStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(unsafe { qr_channel_from_json(text, &mut back) }, QrStatus::Ok);
        let (mut a, mut b) = (0.0, 0.0);
        unsafe {
            qr_holevo_chi(ch, ptr::null(), 0, &mut a);
            qr_holevo_chi(back, ptr::null(), 0, &mut b);
            qr_string_free(text);
            qr_channel_free(ch);
            qr_channel_free(back);
        }
        assert_eq!(a, b);
    }

    #[test]
    fn regions_through_handles() {
        let mac = family("adder-mac");
        let w1 = family("orthogonal");
        let bc = unsafe {
            let mut bc = ptr::null_mut();
            assert_eq!(qr_broadcast_product(w1, w1, &mut bc), QrStatus::Ok);
            bc
        };
        let (mut rm, mut rb, mut ri) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        unsafe {
            assert_eq!(qr_region_mac(mac, 64, QrMacVariant::Conditional as i32, &mut rm), QrStatus::Ok);
            assert_eq!(qr_region_broadcast(bc, 16, &mut rb), QrStatus::Ok);
            assert_eq!(qr_region_intersect(rm, rb, &mut ri), QrStatus::Ok);
        }
        let mut n = 0;
        assert_eq!(unsafe { qr_region_vertex_count(ri, &mut n) }, QrStatus::Ok);
        let mut xy = vec![0.0; 2 * n];
        assert_eq!(unsafe { qr_region_vertices(ri, xy.as_mut_ptr(), n) }, QrStatus::Ok);
        let best = xy.chunks(2).map(|p| p[0] + p[1]).fold(0.0, f64::max);
        assert!((best - 1.5).abs() < 1e-9);
        assert_eq!(unsafe { qr_region_vertices(ri, xy.as_mut_ptr(), 1) }, QrStatus::ResourceLimit);
        unsafe {
            for r in [rm, rb, ri] {
                qr_region_free(r);
            }
            for c in [mac, w1, bc] {
                qr_channel_free(c);
            }
        }
    }

    #[test]
    fn lemma_sweep_and_simulation() {
        let (mut fails, mut slack) = (0usize, 0.0);
        assert_eq!(
            unsafe { qr_verify_lemma(QrLemma::HayashiNagaokaStandard as i32, 100, 1, &mut fails, &mut slack) },
            QrStatus::Ok
        );
        assert_eq!(fails, 0);
        assert!(slack >= -1e-10);
        assert_eq!(unsafe { qr_verify_lemma(9, 1, 1, &mut fails, &mut slack) }, QrStatus::InvalidInput);

        let o = family("orthogonal");
        let mut bc = ptr::null_mut();
        assert_eq!(unsafe { qr_broadcast_product(o, o, &mut bc) }, QrStatus::Ok);
        let cfg = CString::new(r#"{"n": 4, "M1": 2, "M2": 2, "alpha": 2}"#).unwrap();
        let mut report = ptr::null_mut();
        assert_eq!(unsafe { qr_simulate(bc, cfg.as_ptr(), 4096, &mut report) }, QrStatus::Ok);
        let text = unsafe { CStr::from_ptr(report) }.to_str().unwrap().to_owned();
        assert!(text.contains("\"receiver1_global\""));
        let big = CString::new(r#"{"n": 20, "M1": 2, "M2": 2}"#).unwrap();
        let mut r2 = ptr::null_mut();
        assert_eq!(unsafe { qr_simulate(bc, big.as_ptr(), 4096, &mut r2) }, QrStatus::ResourceLimit);
        unsafe {
            qr_string_free(report);
            qr_channel_free(bc);
            qr_channel_free(o);
        }
    }
}
