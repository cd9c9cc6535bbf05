//! Bessel functions of the first kind, orders 0 and 1.
//!
//! Three regimes, each accurate to about 1e-14 absolute:
//! - `|x| <= 6`: ascending power series,
//! - `6 < |x| < 25`: Miller's backward recurrence normalised by
//!   `J0 + 2 Σ J2k = 1`,
//! - `|x| >= 25`: Hankel asymptotic expansion, truncated at its smallest term.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const SERIES_LIMIT: f64 = 6.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// J0(x).
pub fn j0(x: f64) -> f64 {
    j0_j1(x).0
}

/// J1(x).
pub fn j1(x: f64) -> f64 {
    j0_j1(x).1
}

/// (J0(x), J1(x)) evaluated together.
pub fn j0_j1(x: f64) -> (f64, f64) {
    let ax = x.abs();
    let (b0, b1) = if ax <= SERIES_LIMIT {
        series(ax)
    } else if ax < ASYMPTOTIC_LIMIT {
        miller(ax)
    } else {
        (hankel(ax, 0), hankel(ax, 1))
    };
    if x < 0.0 {
        (b0, -b1)
    } else {
        (b0, b1)
    }
}

fn series(x: f64) -> (f64, f64) {
    let q = -0.25 * x * x;
    let mut t0 = 1.0;
    let mut t1 = 0.5 * x;
    let (mut s0, mut s1) = (t0, t1);
    for k in 1..60 {
        let kf = k as f64;
        t0 *= q / (kf * kf);
        t1 *= q / (kf * (kf + 1.0));
        s0 += t0;
        s1 += t1;
        if t0.abs() < 1e-18 && t1.abs() < 1e-18 {
            break;
        }
    }
    (s0, s1)
}

fn miller(x: f64) -> (f64, f64) {
    // Even start order well above x so the dominant solution has decayed away.
    let start = 2 * ((x as usize + 30 + (12.0 * x.sqrt()) as usize) / 2);
    let two_over_x = 2.0 / x;
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-30; // J_k
    let mut norm = 0.0;
    let mut j1 = 0.0;
    for k in (1..=start).rev() {
        let prev = (k as f64) * two_over_x * cur - next;
        next = cur;
        cur = prev;
        // cur now holds J_{k-1}
        if (k - 1) % 2 == 0 && k > 1 {
            norm += 2.0 * cur;
        }
        if k == 2 {
            j1 = cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
        }
    }
    norm += cur;
    (cur / norm, j1 / norm)
}

fn hankel(x: f64, order: u32) -> f64 {
    let mu = 4.0 * f64::from(order * order);
    let eight_x = 8.0 * x;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut prev_abs = f64::INFINITY;
    for k in 1..80 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * eight_x);
        let abs = term.abs();
        if abs > prev_abs {
            break;
        }
        prev_abs = abs;
        // Signs alternate in pairs: P gets +a0 − a2 + a4 …, Q gets a1 − a3 + …
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if abs < 1e-17 {
            break;
        }
    }
    let (s, c) = x.sin_cos();
    // cos/sin of x − (order/2 + 1/4)π without rounding π/4 into x.
    let (cos_chi, sin_chi) = if order == 0 {
        ((c + s) * FRAC_1_SQRT_2, (s - c) * FRAC_1_SQRT_2)
    } else {
        ((s - c) * FRAC_1_SQRT_2, -(s + c) * FRAC_1_SQRT_2)
    };
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}
