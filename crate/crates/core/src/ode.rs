//! Fixed-step classical Runge-Kutta on flat state vectors.
//!
//! State accumulation uses compensated (Kahan) summation so that the
//! rounding noise of long integrations stays at the ulp level. Finite
//! differences of integrated maps (see `numlab`) depend on this.

/// Integrates `y' = f(y)` from the current `state` over a total time `t`
/// using `steps` equal steps.
pub fn rk4<F>(state: &mut [f64], t: f64, steps: usize, mut f: F)
where
    F: FnMut(&[f64], &mut [f64]),
{
    if steps == 0 || t == 0.0 {
        return;
    }
    let h = t / steps as f64;
    let n = state.len();
    let mut comp = vec![0.0; n];
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for _ in 0..steps {
        f(state, &mut k1);
        for i in 0..n {
            tmp[i] = state[i] + 0.5 * h * k1[i];
        }
        f(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = state[i] + 0.5 * h * k2[i];
        }
        f(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = state[i] + h * k3[i];
        }
        f(&tmp, &mut k4);
        for i in 0..n {
            let incr = h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            let y = incr - comp[i];
            let s = state[i] + y;
            comp[i] = (s - state[i]) - y;
            state[i] = s;
        }
    }
}

/// Number of fixed steps of size at most `step` covering `|t|`.
pub fn step_count(t: f64, step: f64) -> usize {
    if t == 0.0 {
        0
    } else {
        (t.abs() / step).ceil().max(1.0) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_fourth_order() {
        let run = |steps: usize| {
            let mut y = [1.0, 0.0];
            rk4(&mut y, 2.0, steps, |s, d| {
                d[0] = s[1];
                d[1] = -s[0];
            });
            (y[0] - 2.0f64.cos()).abs()
        };
        let e1 = run(20);
        let e2 = run(40);
        let order = (e1 / e2).log2();
        assert!(order > 3.8 && order < 4.2, "order {order}");
    }

    #[test]
    fn zero_time_is_identity() {
        let mut y = [3.0, -1.0];
        rk4(&mut y, 0.0, 10, |_, d| d.fill(1.0));
        assert_eq!(y, [3.0, -1.0]);
        assert_eq!(step_count(0.0, 1e-3), 0);
        assert_eq!(step_count(0.25, 0.1), 3);
    }
}
