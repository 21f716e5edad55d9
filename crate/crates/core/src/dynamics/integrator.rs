use super::model::{DriveInput, SingleTrack, VehicleState};
use super::DynamicsError;

/// Upper bound on the integration step [s].
pub const MAX_DT: f64 = 0.01;

/// Default integration step [s].
pub const DEFAULT_DT: f64 = 0.001;

/// One classic RK4 step with the input held constant.
///
/// `t` is only used to label a divergence.
pub fn step(
    model: &SingleTrack,
    t: f64,
    state: &VehicleState,
    input: &DriveInput,
    dt: f64,
) -> Result<VehicleState, DynamicsError> {
    step_with(model, t, state, dt, |_, _| *input)
}

/// One classic RK4 step where the input is re-evaluated at every stage.
///
/// The closure receives the stage time and stage state, so smooth time-varying
/// inputs keep the scheme fourth order.
pub fn step_with<F>(
    model: &SingleTrack,
    t: f64,
    state: &VehicleState,
    dt: f64,
    input: F,
) -> Result<VehicleState, DynamicsError>
where
    F: Fn(f64, &VehicleState) -> DriveInput,
{
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(DynamicsError::InvalidStep { dt });
    }
    let diverged = |e: DynamicsError| match e {
        DynamicsError::NonFiniteDerivative => DynamicsError::Divergence { time: t },
        other => other,
    };
    let half = 0.5 * dt;
    let eval = |tt: f64, s: &VehicleState| model.state_derivative(s, &input(tt, s)).map_err(diverged);

    let k1 = eval(t, state)?;
    let s2 = state.offset(&k1, half);
    let k2 = eval(t + half, &s2)?;
    let s3 = state.offset(&k2, half);
    let k3 = eval(t + half, &s3)?;
    let s4 = state.offset(&k3, dt);
    let k4 = eval(t + dt, &s4)?;

    let mut out = state.to_array();
    let (a1, a2, a3, a4) = (k1.to_array(), k2.to_array(), k3.to_array(), k4.to_array());
    for i in 0..6 {
        out[i] += dt / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]);
    }
    let next = VehicleState::from_array(out);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(DynamicsError::Divergence { time: t + dt })
    }
}

/// Integrates from `t0` to `t0 + n * dt`, collecting every state including the first.
pub fn integrate<F>(
    model: &SingleTrack,
    t0: f64,
    initial: VehicleState,
    dt: f64,
    steps: usize,
    input: F,
) -> Result<Vec<VehicleState>, DynamicsError>
where
    F: Fn(f64, &VehicleState) -> DriveInput,
{
    let mut out = Vec::with_capacity(steps + 1);
    out.push(initial);
    let mut state = initial;
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        state = step_with(model, t, &state, dt, &input)?;
        out.push(state);
    }
    Ok(out)
}
