//! Adaptive Dormand–Prince 5(4) integration with dense node storage.
//!
//! The integrator drives every flow-based computation in the crate:
//! transient decay onto limit cycles, Poincaré-section returns, monodromy
//! and divergence integrals for Floquet exponents, and the trajectory
//! sampling behind semigroup and Lyapunov-decrease checks. Steps are
//! accepted against a mixed absolute/relative RMS error norm; accepted
//! nodes (time, state, derivative) are stored so intervals can be resampled
//! with cubic Hermite interpolation, and section crossings are polished by
//! re-integrating from the bracketing node (never by interpolation alone).

use crate::error::{Error, Result};

/// Integration controls.
#[derive(Clone, Debug)]
pub struct OdeOptions {
    /// Relative tolerance entering the per-component error scale.
    pub rel_tol: f64,
    /// Absolute tolerance entering the per-component error scale.
    pub abs_tol: f64,
    /// Hard cap on accepted+rejected steps.
    pub max_steps: usize,
    /// Solutions whose max-norm exceeds this are treated as escaping to
    /// infinity and reported as a typed error.
    pub escape_norm: f64,
    /// Optional fixed initial step (sign is taken from the time span).
    pub h_init: Option<f64>,
    /// Optional cap on the step magnitude.
    pub h_max: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_steps: 5_000_000,
            escape_norm: 1e8,
            h_init: None,
            h_max: None,
        }
    }
}

/// Dense output: accepted nodes with their derivatives.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Node times, strictly monotone in the integration direction.
    pub times: Vec<f64>,
    /// Node states.
    pub states: Vec<Vec<f64>>,
    /// Field values at the nodes.
    pub derivs: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Number of stored nodes.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// True when no nodes are stored.
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Final node time.
    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("empty trajectory")
    }

    /// Final node state.
    pub fn end_state(&self) -> &[f64] {
        self.states.last().expect("empty trajectory")
    }

    /// Cubic Hermite sample at `t`, which must lie within the stored span.
    /// Accuracy is that of the integrator's dense nodes; use re-integration
    /// when full precision at an interior point is required.
    pub fn sample(&self, t: f64) -> Vec<f64> {
        assert!(self.len() >= 1, "empty trajectory");
        if self.len() == 1 {
            return self.states[0].clone();
        }
        let forward = self.times[self.len() - 1] >= self.times[0];
        // Locate the bracketing interval by binary search.
        let mut lo = 0usize;
        let mut hi = self.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            let before = if forward {
                self.times[mid] <= t
            } else {
                self.times[mid] >= t
            };
            if before {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (t0, t1) = (self.times[lo], self.times[hi]);
        let h = t1 - t0;
        if h == 0.0 {
            return self.states[lo].clone();
        }
        let th = ((t - t0) / h).clamp(0.0, 1.0);
        let (x0, x1) = (&self.states[lo], &self.states[hi]);
        let (f0, f1) = (&self.derivs[lo], &self.derivs[hi]);
        let th2 = th * th;
        let th3 = th2 * th;
        let c_x0 = 2.0 * th3 - 3.0 * th2 + 1.0;
        let c_f0 = th3 - 2.0 * th2 + th;
        let c_x1 = -2.0 * th3 + 3.0 * th2;
        let c_f1 = th3 - th2;
        (0..x0.len())
            .map(|i| c_x0 * x0[i] + c_f0 * h * f0[i] + c_x1 * x1[i] + c_f1 * h * f1[i])
            .collect()
    }
}

// Dormand–Prince 5(4) coefficients.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = B1 - 5179.0 / 57600.0;
const E3: f64 = B3 - 7571.0 / 16695.0;
const E4: f64 = B4 - 393.0 / 640.0;
const E5: f64 = B5 + 92097.0 / 339200.0;
const E6: f64 = B6 - 187.0 / 2100.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate `x' = f(t, x)` from `(t0, x0)` to `t1` (either direction),
/// storing every accepted node.
pub fn integrate<F>(mut f: F, x0: &[f64], t0: f64, t1: f64, opts: &OdeOptions) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = x0.len();
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![x0.to_vec()],
        derivs: vec![vec![0.0; n]],
    };
    let mut k1 = vec![0.0; n];
    f(t0, x0, &mut k1);
    traj.derivs[0] = k1.clone();
    if t1 == t0 {
        return Ok(traj);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();

    // Initial step heuristic: scale by the state/derivative balance.
    let mut h = match opts.h_init {
        Some(h0) => h0.abs() * dir,
        None => {
            let d0 = rms(x0);
            let d1 = rms(&k1);
            let guess = if d1 > 1e-12 {
                0.01 * (d0 + opts.abs_tol) / d1
            } else {
                1e-3 * span
            };
            let floor = (1e-10 * span.max(1.0)).min(span);
            guess.clamp(floor, span) * dir
        }
    };
    if let Some(hm) = opts.h_max {
        if h.abs() > hm {
            h = hm * dir;
        }
    }

    let mut t = t0;
    let mut x = x0.to_vec();
    let mut steps = 0usize;
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut xs = vec![0.0; n];
    let mut rejected_last = false;

    while (t1 - t) * dir > 0.0 {
        if steps >= opts.max_steps {
            return Err(Error::StepBudget {
                max_steps: opts.max_steps,
            });
        }
        steps += 1;
        // Step-size underflow (error-control death spiral); the final step
        // onto the endpoint may legitimately be this small.
        let remaining = (t1 - t).abs();
        if h.abs() < 1e-14 * t.abs().max(1.0) && h.abs() < remaining {
            return Err(Error::NoConvergence { iters: steps });
        }
        // Do not step past the endpoint.
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }

        // Stage evaluations.
        stage(&mut xs, &x, h, &[(A21, &k1)]);
        f(t + h / 5.0, &xs, &mut k2);
        stage(&mut xs, &x, h, &[(A31, &k1), (A32, &k2)]);
        f(t + 3.0 * h / 10.0, &xs, &mut k3);
        stage(&mut xs, &x, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        f(t + 4.0 * h / 5.0, &xs, &mut k4);
        stage(
            &mut xs,
            &x,
            h,
            &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
        );
        f(t + 8.0 * h / 9.0, &xs, &mut k5);
        stage(
            &mut xs,
            &x,
            h,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        );
        f(t + h, &xs, &mut k6);
        // 5th-order solution (also the last stage point for FSAL).
        stage(
            &mut xs,
            &x,
            h,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
        );
        f(t + h, &xs, &mut k7);

        // Scaled RMS error of the embedded 4th-order difference.
        let mut err_acc = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.abs_tol + opts.rel_tol * x[i].abs().max(xs[i].abs());
            err_acc += (e / sc) * (e / sc);
        }
        let err = (err_acc / n as f64).sqrt();

        if !err.is_finite() {
            // Derivative blew up inside the step; retry smaller.
            h *= 0.25;
            rejected_last = true;
            continue;
        }

        if err <= 1.0 {
            t += h;
            x.copy_from_slice(&xs);
            k1.copy_from_slice(&k7);
            traj.times.push(t);
            traj.states.push(x.clone());
            traj.derivs.push(k1.clone());

            let xmax = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if !xmax.is_finite() {
                return Err(Error::NonFinite {
                    context: "ode state".into(),
                });
            }
            if xmax > opts.escape_norm {
                return Err(Error::Escape {
                    time: t,
                    bound: opts.escape_norm,
                });
            }

            let mut fac = 0.9 * err.powf(-0.2);
            fac = fac.clamp(0.2, if rejected_last { 1.0 } else { 5.0 });
            h *= fac;
            rejected_last = false;
        } else {
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h *= fac;
            rejected_last = true;
        }
        if let Some(hm) = opts.h_max {
            if h.abs() > hm {
                h = hm * dir;
            }
        }
    }
    Ok(traj)
}

fn stage(xs: &mut [f64], x: &[f64], h: f64, terms: &[(f64, &Vec<f64>)]) {
    for i in 0..x.len() {
        let mut acc = 0.0;
        for (a, k) in terms {
            acc += a * k[i];
        }
        xs[i] = x[i] + h * acc;
    }
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// Integrate and return only the final state.
pub fn flow_to<F>(f: F, x0: &[f64], t0: f64, t1: f64, opts: &OdeOptions) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    Ok(integrate(f, x0, t0, t1, opts)?.states.pop().unwrap())
}

/// A hyperplane Poincaré section `x[axis] = value`, crossed with the given
/// sign of `d/dt x[axis]` (+1 upward, −1 downward, 0 either).
#[derive(Clone, Copy, Debug)]
pub struct Section {
    /// Coordinate index defining the section.
    pub axis: usize,
    /// Section offset.
    pub value: f64,
    /// Required crossing direction.
    pub direction: f64,
}

/// Integrate from `(t0, x0)` until the trajectory crosses `section`
/// (ignoring crossings at `t ≤ t0 + min_time`), and return the crossing
/// polished to full integrator precision by Newton iteration with
/// re-integration from the bracketing node. Fails with a typed error when
/// no crossing occurs by `t0 + max_time`.
pub fn next_crossing<F>(
    mut f: F,
    x0: &[f64],
    t0: f64,
    section: Section,
    min_time: f64,
    max_time: f64,
    opts: &OdeOptions,
) -> Result<(f64, Vec<f64>)>
where
    F: FnMut(f64, &[f64], &mut [f64]) + Copy,
{
    let traj = integrate(f, x0, t0, t0 + max_time, opts)?;
    let s_of = |x: &[f64]| x[section.axis] - section.value;
    for w in 1..traj.len() {
        let (s_prev, s_new) = (s_of(&traj.states[w - 1]), s_of(&traj.states[w]));
        let crossed = if section.direction > 0.0 {
            s_prev < 0.0 && s_new >= 0.0
        } else if section.direction < 0.0 {
            s_prev > 0.0 && s_new <= 0.0
        } else {
            (s_prev < 0.0 && s_new >= 0.0) || (s_prev > 0.0 && s_new <= 0.0)
        };
        if !crossed {
            continue;
        }
        let (ta, tb) = (traj.times[w - 1], traj.times[w]);
        let xa = traj.states[w - 1].clone();
        // Linear initial guess, then Newton with exact re-integration.
        let mut tc = ta + (tb - ta) * (s_prev / (s_prev - s_new)).clamp(0.0, 1.0);
        let mut fx = vec![0.0; x0.len()];
        let mut polished: Option<Vec<f64>> = None;
        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..60 {
            let xc = flow_to(f, &xa, ta, tc, opts)?;
            let v = s_of(&xc);
            f(tc, &xc, &mut fx);
            let dv = fx[section.axis];
            if best.as_ref().map_or(true, |(bv, _)| v.abs() < *bv) {
                best = Some((v.abs(), xc.clone()));
            }
            if v.abs() < 1e-13 * (1.0 + section.value.abs()) {
                polished = Some(xc);
                break;
            }
            if dv == 0.0 {
                break;
            }
            tc -= v / dv;
        }
        if polished.is_none() {
            // Accept the best iterate if it is only slightly above target.
            if let Some((bv, xb)) = best {
                if bv < 1e-9 * (1.0 + section.value.abs()) {
                    polished = Some(xb);
                }
            }
        }
        let Some(xc) = polished else {
            return Err(Error::NoConvergence { iters: 60 });
        };
        // The min-time filter applies to the polished time: when the search
        // starts within polish tolerance of the section, the residual of the
        // previous crossing must not be re-reported.
        if tc <= t0 + min_time {
            continue;
        }
        return Ok((tc, xc));
    }
    Err(Error::NoReturn { max_time })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_accurate() {
        let f = |_t: f64, x: &[f64], dx: &mut [f64]| dx[0] = -x[0];
        let traj = integrate(f, &[1.0], 0.0, 1.0, &OdeOptions::default()).unwrap();
        let end = traj.end_state()[0];
        assert!((end - (-1.0_f64).exp()).abs() < 1e-10);
        // Hermite sampling stays close at interior points.
        let mid = traj.sample(0.5)[0];
        assert!((mid - (-0.5_f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn backward_integration_works() {
        let f = |_t: f64, x: &[f64], dx: &mut [f64]| dx[0] = x[0];
        let end = flow_to(f, &[1.0], 0.0, -1.0, &OdeOptions::default()).unwrap()[0];
        assert!((end - (-1.0_f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn escape_is_reported() {
        // x' = x² blows up in finite time from x(0)=1 at t=1.
        let f = |_t: f64, x: &[f64], dx: &mut [f64]| dx[0] = x[0] * x[0];
        match integrate(f, &[1.0], 0.0, 2.0, &OdeOptions::default()) {
            Err(Error::Escape { time, .. }) => assert!(time < 1.01),
            other => panic!("expected escape, got {other:?}"),
        }
    }

    #[test]
    fn crossing_of_harmonic_oscillator_is_half_period() {
        // x'' = −x from (1, 0): first downward crossing of x₂... x₁ = 0 at t = π/2.
        let f = |_t: f64, x: &[f64], dx: &mut [f64]| {
            dx[0] = x[1];
            dx[1] = -x[0];
        };
        let section = Section {
            axis: 0,
            value: 0.0,
            direction: -1.0,
        };
        let (t, x) = next_crossing(
            f,
            &[1.0, 0.0],
            0.0,
            section,
            1e-6,
            10.0,
            &OdeOptions::default(),
        )
        .unwrap();
        assert!((t - std::f64::consts::FRAC_PI_2).abs() < 1e-9, "t = {t}");
        assert!(x[0].abs() < 1e-12);
        assert!((x[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn no_return_is_reported() {
        let f = |_t: f64, x: &[f64], dx: &mut [f64]| dx[0] = -x[0];
        let section = Section {
            axis: 0,
            value: 2.0,
            direction: 0.0,
        };
        match next_crossing(f, &[1.0], 0.0, section, 0.0, 5.0, &OdeOptions::default()) {
            Err(Error::NoReturn { .. }) => {}
            other => panic!("expected no-return, got {other:?}"),
        }
    }
}
