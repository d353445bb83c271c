//! Airy function `Ai` on the real line and its zeros.
//!
//! Maclaurin series for `|x| <= 7`, Poincaré asymptotics beyond. On the
//! oscillatory side the series loses about `exp(2|x|^{3/2}/3)` in relative
//! accuracy, about 1e-9 absolute at the switch point.

use std::f64::consts::PI;

use crate::numerics::bracketed_root;

const AI0: f64 = 0.355_028_053_887_817_24;
const AIP0: f64 = 0.258_819_403_792_806_8;
const SWITCH: f64 = 7.0;

fn series(x: f64) -> f64 {
    let x3 = x * x * x;
    let (mut f, mut g) = (1.0, x);
    let (mut tf, mut tg) = (1.0, x);
    for k in 0..200 {
        let k3 = 3.0 * k as f64;
        tf *= x3 / ((k3 + 2.0) * (k3 + 3.0));
        tg *= x3 / ((k3 + 3.0) * (k3 + 4.0));
        f += tf;
        g += tg;
        if tf.abs() < 1e-18 * f.abs().max(1.0) && tg.abs() < 1e-18 * g.abs().max(1.0) {
            break;
        }
    }
    AI0 * f - AIP0 * g
}

/// Asymptotic coefficients `u_k`, truncated before the smallest term.
fn asymptotic_terms(zeta: f64) -> Vec<f64> {
    let mut out = vec![1.0];
    let mut u = 1.0_f64;
    let mut last = f64::INFINITY;
    for k in 1..40 {
        let kf = k as f64;
        u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
        let term = (u / zeta.powi(k)).abs();
        if term > last {
            break;
        }
        last = term;
        out.push(u);
    }
    out
}

pub fn airy_ai(x: f64) -> f64 {
    if x.abs() <= SWITCH {
        series(x)
    } else {
        asymptotic(x)
    }
}

fn asymptotic(x: f64) -> f64 {
    let z = x.abs();
    let zeta = 2.0 / 3.0 * z.powf(1.5);
    let u = asymptotic_terms(zeta);
    if x > 0.0 {
        let mut s = 0.0;
        for (k, uk) in u.iter().enumerate() {
            s += if k % 2 == 0 { 1.0 } else { -1.0 } * uk / zeta.powi(k as i32);
        }
        (-zeta).exp() / (2.0 * PI.sqrt() * z.powf(0.25)) * s
    } else {
        let (mut even, mut odd) = (0.0, 0.0);
        for (k, uk) in u.iter().enumerate() {
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            let t = sign * uk / zeta.powi(k as i32);
            if k % 2 == 0 {
                even += t;
            } else {
                odd += t;
            }
        }
        let phase = zeta - PI / 4.0;
        (phase.cos() * even + phase.sin() * odd) / (PI.sqrt() * z.powf(0.25))
    }
}

/// `n`-th zero of `Ai` (`n >= 1`), negative. Bracketed around the asymptotic
/// estimate and refined with Brent's method.
pub fn airy_ai_zero(n: usize) -> f64 {
    assert!(n >= 1);
    let t = 3.0 * PI * (4.0 * n as f64 - 1.0) / 8.0;
    let guess = -t.powf(2.0 / 3.0) * (1.0 + 5.0 / 48.0 / (t * t) - 5.0 / 36.0 / t.powi(4));
    let mut half = 0.1;
    loop {
        let (a, b) = (guess - half, guess + half);
        if airy_ai(a) * airy_ai(b) < 0.0 {
            return bracketed_root(airy_ai, a, b, 1e-15).expect("sign change");
        }
        half *= 1.5;
        assert!(half < 1.0, "no Airy zero bracketed near {guess}");
    }
}
