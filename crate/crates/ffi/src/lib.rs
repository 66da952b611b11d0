//! C ABI over `ia_overhead`.
//!
//! Every fallible function returns an [`IaoStatus`] and writes its result
//! through an out-pointer. On failure the out-pointer is left untouched and
//! [`iao_last_error_message`] describes the error for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, UnwindSafe};

use ia_overhead::channel::{make_frame, LinkBudget, NetworkConfig};
use ia_overhead::cluster::{admission_rule, cluster_size_rule};
use ia_overhead::csi::{error_variance, optimal_split, OverheadAllocation};
use ia_overhead::overhead::{
    alpha_star_expansion, alpha_star_numeric, effective_rate, OverheadDesign,
};
use ia_overhead::rates::avg_sum_rate;
use ia_overhead::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IaoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidConfig = 2,
    InvalidBudget = 3,
    InvalidDoppler = 4,
    InfeasibleConfig = 5,
    NonConvergence = 6,
    RankDeficiency = 7,
    PilotLength = 8,
    SingularFeedback = 9,
    InfeasibleBudget = 10,
    Domain = 11,
    Dimension = 12,
    Panic = 13,
}

impl From<&Error> for IaoStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidConfig(_) => IaoStatus::InvalidConfig,
            Error::InvalidBudget(_) => IaoStatus::InvalidBudget,
            Error::InvalidDoppler(_) => IaoStatus::InvalidDoppler,
            Error::InfeasibleConfig(_) => IaoStatus::InfeasibleConfig,
            Error::NonConvergence { .. } => IaoStatus::NonConvergence,
            Error::RankDeficiency { .. } => IaoStatus::RankDeficiency,
            Error::PilotLength { .. } => IaoStatus::PilotLength,
            Error::SingularFeedback(_) => IaoStatus::SingularFeedback,
            Error::InfeasibleBudget(_) => IaoStatus::InfeasibleBudget,
            Error::Domain(_) => IaoStatus::Domain,
            Error::Dimension(_) => IaoStatus::Dimension,
        }
    }
}

/// Opaque network configuration handle.
pub struct IaoNetwork(NetworkConfig);

/// Opaque link budget handle.
pub struct IaoLink(LinkBudget);

/// Integer overhead split and its CSI error variance.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct IaoSplit {
    pub forward_training: usize,
    pub feedback_training: usize,
    pub feedback: usize,
    pub sigma2h: f64,
    /// Error variance of the continuous optimum.
    pub sigma2h_continuous: f64,
}

/// Optimized overhead fraction.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct IaoDesign {
    pub alpha_star: f64,
    pub alpha_unclamped: f64,
    pub clamped: bool,
    pub sigma2h: f64,
    /// Rate predicted by the optimizer.
    pub reff_star: f64,
    /// Exact effective rate at `alpha_star`.
    pub reff_achieved: f64,
    pub split: IaoSplit,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard<F>(f: F) -> IaoStatus
where
    F: FnOnce() -> Result<(), IaoStatus> + UnwindSafe,
{
    set_error(String::new());
    match catch_unwind(f) {
        Ok(Ok(())) => IaoStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            IaoStatus::Panic
        }
    }
}

fn lift<T>(r: ia_overhead::Result<T>) -> Result<T, IaoStatus> {
    r.map_err(|e| {
        let s = IaoStatus::from(&e);
        set_error(e.to_string());
        s
    })
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, IaoStatus> {
    p.as_ref().ok_or_else(|| {
        set_error(format!("{name} is null"));
        IaoStatus::NullPointer
    })
}

unsafe fn write<T>(p: *mut T, value: T, name: &str) -> Result<(), IaoStatus> {
    if p.is_null() {
        set_error(format!("{name} is null"));
        return Err(IaoStatus::NullPointer);
    }
    p.write(value);
    Ok(())
}

fn split_of(alloc: &OverheadAllocation, sigma2h: f64, continuous: f64) -> IaoSplit {
    IaoSplit {
        forward_training: alloc.forward_training,
        feedback_training: alloc.feedback_training,
        feedback: alloc.feedback,
        sigma2h,
        sigma2h_continuous: continuous,
    }
}

fn design_of(d: &OverheadDesign, cfg: &NetworkConfig, link: &LinkBudget) -> IaoDesign {
    let alloc_sigma = error_variance(cfg, link, &d.allocation).unwrap_or(f64::NAN);
    IaoDesign {
        alpha_star: d.alpha_star,
        alpha_unclamped: d.alpha_unclamped,
        clamped: d.clamped,
        sigma2h: d.sigma2h,
        reff_star: d.reff_star,
        reff_achieved: d.reff_achieved,
        split: split_of(&d.allocation, alloc_sigma, d.sigma2h),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn iao_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or an empty string.
/// Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn iao_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `out` must be a valid pointer. Free the handle with [`iao_network_free`].
#[no_mangle]
pub unsafe extern "C" fn iao_network_new(
    users: usize,
    tx_antennas: usize,
    rx_antennas: usize,
    streams: usize,
    out: *mut *mut IaoNetwork,
) -> IaoStatus {
    guard(|| {
        let cfg = lift(NetworkConfig::new(users, tx_antennas, rx_antennas, streams))?;
        write(out, Box::into_raw(Box::new(IaoNetwork(cfg))), "out")
    })
}

/// # Safety
/// `net` must come from [`iao_network_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn iao_network_free(net: *mut IaoNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Link budget from total transmit power, feedback power ratio and noise
/// variance.
///
/// # Safety
/// `out` must be a valid pointer. Free the handle with [`iao_link_free`].
#[no_mangle]
pub unsafe extern "C" fn iao_link_new(
    power: f64,
    gamma: f64,
    noise_var: f64,
    out: *mut *mut IaoLink,
) -> IaoStatus {
    guard(|| {
        let link = lift(LinkBudget::new(power, gamma, noise_var))?;
        write(out, Box::into_raw(Box::new(IaoLink(link))), "out")
    })
}

/// Link budget from a per-stream SNR (linear) with unit noise variance.
///
/// # Safety
/// `out` must be a valid pointer. Free the handle with [`iao_link_free`].
#[no_mangle]
pub unsafe extern "C" fn iao_link_from_stream_snr(
    rho: f64,
    streams: usize,
    gamma: f64,
    out: *mut *mut IaoLink,
) -> IaoStatus {
    guard(|| {
        let link = lift(LinkBudget::from_stream_snr(rho, streams, gamma))?;
        write(out, Box::into_raw(Box::new(IaoLink(link))), "out")
    })
}

/// # Safety
/// `link` must come from an `iao_link_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn iao_link_free(link: *mut IaoLink) {
    if !link.is_null() {
        drop(Box::from_raw(link));
    }
}

/// Average sum rate with perfect CSI at per-stream SNR `rho`.
///
/// # Safety
/// `net` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn iao_avg_sum_rate(
    net: *const IaoNetwork,
    rho: f64,
    out: *mut f64,
) -> IaoStatus {
    guard(|| {
        let net = deref(net, "net")?;
        if !(rho >= 0.0 && rho.is_finite()) {
            set_error(format!("SNR must be non-negative and finite, got {rho}"));
            return Err(IaoStatus::Domain);
        }
        write(out, avg_sum_rate(&net.0, rho), "out")
    })
}

/// CSI error variance for a given symbol allocation.
///
/// # Safety
/// `net`, `link` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn iao_error_variance(
    net: *const IaoNetwork,
    link: *const IaoLink,
    forward_training: usize,
    feedback_training: usize,
    feedback: usize,
    out: *mut f64,
) -> IaoStatus {
    guard(|| {
        let (net, link) = (deref(net, "net")?, deref(link, "link")?);
        let alloc = OverheadAllocation::new(forward_training, feedback_training, feedback);
        let v = lift(error_variance(&net.0, &link.0, &alloc))?;
        write(out, v, "out")
    })
}

/// Splits `overhead_symbols` between the three acquisition phases.
///
/// # Safety
/// `net`, `link` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn iao_optimal_split(
    net: *const IaoNetwork,
    link: *const IaoLink,
    overhead_symbols: f64,
    out: *mut IaoSplit,
) -> IaoStatus {
    guard(|| {
        let (net, link) = (deref(net, "net")?, deref(link, "link")?);
        let s = lift(optimal_split(&net.0, &link.0, overhead_symbols))?;
        write(
            out,
            split_of(&s.allocation, s.sigma2h, s.sigma2h_continuous),
            "out",
        )
    })
}

/// Effective rate at overhead fraction `alpha` for normalized Doppler
/// `doppler`.
///
/// # Safety
/// `net`, `link` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn iao_effective_rate(
    net: *const IaoNetwork,
    link: *const IaoLink,
    doppler: f64,
    alpha: f64,
    out: *mut f64,
) -> IaoStatus {
    guard(|| {
        let (net, link) = (deref(net, "net")?, deref(link, "link")?);
        let frame = lift(make_frame(doppler))?;
        let r = lift(effective_rate(&net.0, &link.0, &frame, alpha))?;
        write(out, r, "out")
    })
}

/// Closed-form small-Doppler overhead optimum.
///
/// # Safety
/// `net`, `link` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn iao_alpha_star_expansion(
    net: *const IaoNetwork,
    link: *const IaoLink,
    doppler: f64,
    out: *mut IaoDesign,
) -> IaoStatus {
    guard(|| {
        let (net, link) = (deref(net, "net")?, deref(link, "link")?);
        let frame = lift(make_frame(doppler))?;
        let d = lift(alpha_star_expansion(&net.0, &link.0, &frame))?;
        write(out, design_of(&d, &net.0, &link.0), "out")
    })
}

/// Numerically maximized overhead fraction.
///
/// # Safety
/// `net`, `link` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn iao_alpha_star_numeric(
    net: *const IaoNetwork,
    link: *const IaoLink,
    doppler: f64,
    out: *mut IaoDesign,
) -> IaoStatus {
    guard(|| {
        let (net, link) = (deref(net, "net")?, deref(link, "link")?);
        let frame = lift(make_frame(doppler))?;
        let d = lift(alpha_star_numeric(&net.0, &link.0, &frame))?;
        write(out, design_of(&d, &net.0, &link.0), "out")
    })
}

/// Whether a `users`-user cluster may grow by one at this Doppler.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iao_admission_rule(
    users: usize,
    doppler: f64,
    out: *mut bool,
) -> IaoStatus {
    guard(|| {
        let ok = lift(admission_rule(users, doppler))?;
        write(out, ok, "out")
    })
}

/// Cluster size chosen by the admission rule, capped at `max_users`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iao_cluster_size_rule(
    doppler: f64,
    max_users: usize,
    out: *mut usize,
) -> IaoStatus {
    guard(|| {
        let k = lift(cluster_size_rule(doppler, max_users))?;
        write(out, k, "out")
    })
}
