use serde::{Deserialize, Serialize};

/// Credit-based shaper state of one egress queue. Credits in bits, slopes
/// in bit/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CbsState {
    pub credit: f64,
    pub idle_slope: f64,
    pub send_slope: f64,
    pub hi_credit: f64,
    pub lo_credit: f64,
}

/// Slack for floating-point accumulation when checking the credit bounds.
pub const CREDIT_EPS: f64 = 1e-6;

impl CbsState {
    pub fn new(idle_slope: f64, port_rate: f64, hi_credit: f64, lo_credit: f64) -> Self {
        Self { credit: 0.0, idle_slope, send_slope: idle_slope - port_rate, hi_credit, lo_credit }
    }

    /// Queue may start a transmission.
    pub fn eligible(&self) -> bool {
        self.credit >= -CREDIT_EPS
    }

    pub fn within_bounds(&self) -> bool {
        let tol = CREDIT_EPS + 1e-9 * self.hi_credit.abs().max(self.lo_credit.abs());
        self.credit >= self.lo_credit - tol && self.credit <= self.hi_credit + tol
    }
}

/// Credit evolution before clamping. Returns the raw value so callers can
/// audit the bounds.
pub fn cbs_advance_raw(state: &CbsState, interval: f64, transmitting: bool, queue_nonempty: bool) -> f64 {
    if interval <= 0.0 {
        return state.credit;
    }
    if transmitting {
        state.credit + state.send_slope * interval
    } else if queue_nonempty {
        state.credit + state.idle_slope * interval
    } else if state.credit > 0.0 {
        0.0
    } else {
        (state.credit + state.idle_slope * interval).min(0.0)
    }
}

/// Advances the credit over `interval` seconds and clamps it to
/// `[lo_credit, hi_credit]`.
pub fn cbs_advance(state: CbsState, interval: f64, transmitting: bool, queue_nonempty: bool) -> CbsState {
    let raw = cbs_advance_raw(&state, interval, transmitting, queue_nonempty);
    CbsState { credit: raw.clamp(state.lo_credit, state.hi_credit), ..state }
}

/// hiCredit of the top SR class: a lower-priority frame of `max_interference_bits`
/// blocks the queue while credit accrues at the idle slope.
pub fn hi_credit_top(max_interference_bits: f64, idle_slope: f64, port_rate: f64) -> f64 {
    max_interference_bits * idle_slope / port_rate
}

/// loCredit after sending the largest class frame from zero credit.
pub fn lo_credit(max_frame_bits: f64, idle_slope: f64, port_rate: f64) -> f64 {
    max_frame_bits * (idle_slope - port_rate) / port_rate
}

/// hiCredit of the second SR class, which can also wait while the top class
/// spends its whole credit range.
pub fn hi_credit_second(
    max_interference_bits: f64,
    idle_slope: f64,
    port_rate: f64,
    top: Option<&CbsState>,
) -> f64 {
    match top {
        None => hi_credit_top(max_interference_bits, idle_slope, port_rate),
        Some(a) if a.idle_slope >= port_rate => f64::INFINITY,
        Some(a) => idle_slope * (max_interference_bits + a.hi_credit - a.lo_credit) / (port_rate - a.idle_slope),
    }
}
