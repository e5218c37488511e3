//! Independent reference computations shared by integration tests.
#![allow(dead_code)]

use heavyloc::potential::Realization;
use heavyloc::transfer::{transfer_matrix, EnergyFrame, Mat2};

/// Classical RK4 on `Y' = A Y` with `A = [[0, k], [(V - lambda)/k, 0]]`, from `Y(0) = I`.
pub fn rk4_matrix(value: f64, length: f64, frame: &EnergyFrame) -> Mat2 {
    let k = frame.k();
    let q = (value - frame.lambda()) / k;
    let rate = k.max(q.abs()).max((value - frame.lambda()).abs().sqrt());
    let steps = ((length * rate / 0.004).ceil() as usize).max(200);
    let h = length / steps as f64;
    let f = |y: [f64; 4]| [k * y[2], k * y[3], q * y[0], q * y[1]];
    let mut y = [1.0, 0.0, 0.0, 1.0];
    for _ in 0..steps {
        let k1 = f(y);
        let k2 = f(std::array::from_fn(|i| y[i] + 0.5 * h * k1[i]));
        let k3 = f(std::array::from_fn(|i| y[i] + 0.5 * h * k2[i]));
        let k4 = f(std::array::from_fn(|i| y[i] + h * k3[i]));
        for i in 0..4 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Mat2::new(y[0], y[1], y[2], y[3])
}

/// RK4 on the phase/radius equations
/// `theta' = k cos^2 + ((lambda - V)/k) sin^2`, `(ln r)' = (k + (V - lambda)/k) sin cos`.
pub fn rk4_phase(theta0: f64, value: f64, length: f64, frame: &EnergyFrame) -> (f64, f64) {
    let k = frame.k();
    let p = (frame.lambda() - value) / k;
    let rate = k.max(p.abs());
    let steps = ((length * rate / 0.004).ceil() as usize).max(200);
    let h = length / steps as f64;
    let f = |t: f64| {
        let (s, c) = t.sin_cos();
        (k * c * c + p * s * s, (k - p) * s * c)
    };
    let (mut t, mut lr) = (theta0, 0.0);
    for _ in 0..steps {
        let (a1, b1) = f(t);
        let (a2, b2) = f(t + 0.5 * h * a1);
        let (a3, b3) = f(t + 0.5 * h * a2);
        let (a4, b4) = f(t + h * a3);
        t += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        lr += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
    }
    (t, lr)
}

/// Sign changes of `psi` on `(0, L]`, sampling every piece densely with
/// transfer matrices; `psi(0) cos t0 - psi'(0) sin t0 = 0`.
pub fn dense_zero_count(r: &Realization, theta0: f64, lambda: f64) -> u64 {
    let frame = EnergyFrame::new(lambda).unwrap();
    let k = frame.k();
    let mut v = [theta0.sin(), theta0.cos() / k];
    let mut sign = 0.0f64;
    if v[0] != 0.0 {
        sign = v[0].signum();
    }
    let mut zeros = 0;
    for p in &r.pieces {
        let omega = (lambda - p.value).max(0.0).sqrt();
        let subs = ((20.0 * omega * p.length / std::f64::consts::PI).ceil() as usize).max(1000);
        let step = transfer_matrix(p.value, p.length / subs as f64, &frame).unwrap();
        for _ in 0..subs {
            let (dir, _) = step.apply(v).unwrap();
            v = dir;
            if v[0] != 0.0 {
                let s = v[0].signum();
                if sign != 0.0 && s != sign {
                    zeros += 1;
                }
                sign = s;
            }
        }
    }
    zeros
}
