//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::fs;
use std::path::Path;

use edgar_twin::dynamics::*;
use edgar_twin::sensors::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

// ---- dynamics ----------------------------------------------------------------

pub fn sine_steer(t: f64) -> f64 {
    0.03 * (std::f64::consts::PI * t).sin()
}

/// Final state after integrating a sine-steer maneuver over `horizon` seconds.
pub fn sine_steer_final(model: &SingleTrack, dt: f64, horizon: f64) -> VehicleState {
    let steps = (horizon / dt).round() as usize;
    let initial = VehicleState::moving_straight(5.0);
    let traj = integrate(model, 0.0, initial, dt, steps, |t, _| DriveInput {
        delta: sine_steer(t),
        f_x_drive: 500.0,
    })
    .unwrap();
    *traj.last().unwrap()
}

pub fn max_abs_diff(a: &VehicleState, b: &VehicleState) -> f64 {
    a.to_array().iter().zip(b.to_array()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Least-squares slope of log(err) against log(dt).
pub fn fitted_order(dts: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

// ---- sensor visibility -------------------------------------------------------

type M3 = [[f64; 3]; 3];

fn matmul(a: &M3, b: &M3) -> M3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn rot_z(a: f64) -> M3 {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn rot_y(a: f64) -> M3 {
    let (s, c) = a.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

fn rot_x(a: f64) -> M3 {
    let (s, c) = a.sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Winding-number containment, unrelated to the crossing test in the crate.
pub fn winding_inside(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut wn = 0i32;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let side = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= p[1] {
            if b[1] > p[1] && side > 0.0 {
                wn += 1;
            }
        } else if b[1] <= p[1] && side < 0.0 {
            wn -= 1;
        }
    }
    wn != 0
}

pub fn oracle_pattern(rig: &Rig, m: &MountedSensor, p: [f64; 3]) -> bool {
    let [roll, pitch, yaw] = m.pose.orientation;
    let r = matmul(&matmul(&rot_z(yaw), &rot_y(pitch)), &rot_x(roll));
    let axis = |j: usize| [r[0][j], r[1][j], r[2][j]];
    let t = m.pose.translation;
    let d = [p[0] - t[0], p[1] - t[1], p[2] - t[2]];
    let (fwd, left, up) = (dot(d, axis(0)), dot(d, axis(1)), dot(d, axis(2)));
    let range = dot(d, d).sqrt();
    if range < m.spec.min_range || range > m.spec.max_range {
        return false;
    }
    let az = left.atan2(fwd).to_degrees().abs();
    let el = up.atan2((fwd * fwd + left * left).sqrt()).to_degrees().abs();
    if m.spec.h_fov < std::f64::consts::TAU - 1e-9 && az > m.spec.h_fov.to_degrees() / 2.0 {
        return false;
    }
    if el > m.spec.v_fov.to_degrees() / 2.0 {
        return false;
    }
    // march along the ray
    let steps = 4000;
    for k in 1..steps {
        let s = k as f64 / steps as f64;
        let q = [t[0] + s * d[0], t[1] + s * d[1], t[2] + s * d[2]];
        if q[2] < rig.body_height() && winding_inside([q[0], q[1]], rig.footprint()) {
            return false;
        }
    }
    true
}

pub fn oracle_count(rig: &Rig, modality: Modality, p: [f64; 3]) -> u16 {
    rig.devices()
        .into_iter()
        .filter(|d| rig.device_modality(d) == Some(modality))
        .filter(|d| rig.sensors().iter().filter(|m| m.spec.device == *d).any(|m| oracle_pattern(rig, m, p)))
        .count() as u16
}
// ---- store -------------------------------------------------------------------

/// Anchor by anchor, every other stream gives up its earliest unused
/// measurement inside the window. Plain scans, no sorting tricks.
pub fn brute_align(streams: &[Vec<f64>], tol: f64, anchor: usize) -> Vec<f64> {
    let mut used: Vec<Vec<bool>> = streams.iter().map(|s| vec![false; s.len()]).collect();
    let mut anchors = streams[anchor].clone();
    anchors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out = Vec::new();
    for t in anchors {
        let mut pick = vec![None; streams.len()];
        for (i, s) in streams.iter().enumerate() {
            if i == anchor {
                continue;
            }
            let mut best: Option<usize> = None;
            for (j, &m) in s.iter().enumerate() {
                if !used[i][j] && m >= t - tol && m <= t + tol && best.is_none_or(|b| m < s[b]) {
                    best = Some(j);
                }
            }
            pick[i] = best;
        }
        if pick.iter().enumerate().all(|(i, p)| i == anchor || p.is_some()) {
            for (i, p) in pick.iter().enumerate() {
                if let Some(j) = p {
                    used[i][*j] = true;
                }
            }
            out.push(t);
        }
    }
    out
}

pub fn random_streams(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rng.gen_range(1..5);
    (0..n)
        .map(|_| {
            let rate = [10.0, 20.0, 25.0, 30.0, 40.0][rng.gen_range(0..5)];
            let jitter = rng.gen_range(0.0..0.02);
            let mut s = Vec::new();
            for k in 0..(rate * 2.0) as usize {
                if rng.gen_bool(0.9) {
                    s.push(k as f64 / rate + rng.gen_range(-jitter..=jitter));
                }
            }
            s.shuffle(rng);
            s
        })
        .collect()
}


pub fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
