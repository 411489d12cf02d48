//! Adaptive Dormand–Prince 5(4) integration for small autonomous systems.

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rtol: 1e-12,
            atol: 1e-12,
            max_steps: 100_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub y: Vec<f64>,
    pub steps: usize,
    pub rejected: usize,
    /// Sum of accepted local error estimates, each relative to `1 + |y|`.
    pub error_estimate: f64,
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(y)` from 0 to `t_end` (either sign).
pub fn integrate<F, E>(f: F, y0: &[f64], t_end: f64, tol: Tolerance) -> Result<Solution, String>
where
    F: Fn(&[f64], &mut [f64]) -> Result<(), E>,
    E: std::fmt::Display,
{
    let n = y0.len();
    let mut y = y0.to_vec();
    if t_end == 0.0 {
        return Ok(Solution {
            y,
            steps: 0,
            rejected: 0,
            error_estimate: 0.0,
        });
    }
    let dir = t_end.signum();
    let span = t_end.abs();
    let mut t = 0.0;
    let mut h = (span / 16.0).min(0.05);
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut steps = 0;
    let mut rejected = 0;
    let mut err_sum = 0.0;
    let eval = |y: &[f64], out: &mut [f64]| f(y, out).map_err(|e| e.to_string());
    eval(&y, &mut k[0])?;
    while t < span {
        if steps + rejected >= tol.max_steps {
            return Err(format!("step limit reached at t = {t}"));
        }
        h = h.min(span - t);
        let hs = dir * h;
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += hs * A[s][j] * kj[i];
                }
                tmp[i] = acc;
            }
            eval(&tmp, &mut k[s])?;
        }
        // k[6] was evaluated at the fifth-order solution (FSAL)
        let mut err = 0.0f64;
        let mut local = 0.0f64;
        let mut y5 = vec![0.0; n];
        for i in 0..n {
            let mut s5 = 0.0;
            let mut s4 = 0.0;
            for s in 0..7 {
                s5 += B5[s] * k[s][i];
                s4 += B4[s] * k[s][i];
            }
            y5[i] = y[i] + hs * s5;
            let e = (hs * (s5 - s4)).abs();
            local = local.max(e / (1.0 + y5[i].abs()));
            let scale = tol.atol + tol.rtol * y[i].abs().max(y5[i].abs());
            err = err.max(e / scale);
        }
        if !err.is_finite() {
            return Err("non-finite derivative".into());
        }
        if err <= 1.0 {
            t += h;
            steps += 1;
            err_sum += local;
            y = y5;
            let last = k[6].clone();
            k[0] = last;
        } else {
            rejected += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    Ok(Solution {
        y,
        steps,
        rejected,
        error_estimate: err_sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_and_rotation() {
        let s = integrate(|y: &[f64], o: &mut [f64]| -> Result<(), String> {
            o[0] = y[0];
            Ok(())
        }, &[1.0], 1.0, Tolerance::default())
        .unwrap();
        assert!((s.y[0] - std::f64::consts::E).abs() < 1e-11);
        let s = integrate(|y: &[f64], o: &mut [f64]| -> Result<(), String> {
            o[0] = -y[1];
            o[1] = y[0];
            Ok(())
        }, &[1.0, 0.0], -0.7, Tolerance::default())
        .unwrap();
        assert!((s.y[0] - 0.7f64.cos()).abs() < 1e-11);
        assert!((s.y[1] + 0.7f64.sin()).abs() < 1e-11);
    }
}
