//! The Lobachevsky function `Λ(t) = -∫₀ᵗ ln|2 sin s| ds`.
//!
//! Two independent evaluations: the Fourier series `½ Σ sin(2nt)/n²`
//! summed through a factorial-series (Kummer) transformation, and adaptive
//! Gauss–Kronrod quadrature of the integral with the logarithmic endpoint
//! singularities integrated in closed form.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Terms of the factorial-series transformation.
const KUMMER_ORDER: usize = 8;
/// Terms of the accelerated remainder series.
const REMAINDER_TERMS: usize = 160;

/// `Λ(t)` via the accelerated Fourier series. This is the evaluator used
/// by the optimizer.
pub fn lobachevsky(t: f64) -> f64 {
    let r = t.rem_euclid(PI);
    if r == 0.0 || !r.is_finite() {
        return 0.0;
    }
    let theta = 2.0 * r;
    0.5 * dilog_unit_circle(theta).im
}

/// `Λ'(t) = -ln|2 sin t|`.
pub fn lobachevsky_derivative(t: f64) -> f64 {
    -(2.0 * t.sin().abs()).ln()
}

/// `Σ_{n≥1} e^{inθ}/n²` for `0 < θ < 2π`.
///
/// Uses `1/n² = Σ_{j=1}^{K} (j-1)!/(n(n+1)…(n+j)) + K!/(n²(n+1)…(n+K))`;
/// the first `K` sums have closed forms in `log(1 - z)`, and the last one
/// decays like `n^{-K-2}`.
fn dilog_unit_circle(theta: f64) -> Complex64 {
    let z = Complex64::new(theta.cos(), theta.sin());
    // 1 - z = 2 sin²(θ/2) - i sin θ, computed without cancellation
    let half = (0.5 * theta).sin();
    let one_minus_z = Complex64::new(2.0 * half * half, -theta.sin());
    let log_term = -one_minus_z.ln();

    // g[i] = Σ_{n≥1} z^n / (n + i)
    let zinv = z.conj();
    let mut g = Vec::with_capacity(KUMMER_ORDER + 1);
    let mut partial = Complex64::new(0.0, 0.0);
    let mut zm = Complex64::new(1.0, 0.0);
    let mut zinv_pow = Complex64::new(1.0, 0.0);
    for i in 0..=KUMMER_ORDER {
        if i > 0 {
            zm *= z;
            partial += zm / i as f64;
            zinv_pow *= zinv;
        }
        g.push(zinv_pow * (log_term - partial));
    }

    let mut sum = Complex64::new(0.0, 0.0);
    let mut binom = vec![1.0f64; KUMMER_ORDER + 1];
    for j in 1..=KUMMER_ORDER {
        // binomial row j
        for i in (1..j).rev() {
            binom[i] += binom[i - 1];
        }
        binom[j] = 1.0;
        // (j-1)!/j! Σ_i (-1)^i C(j,i) g_i
        let mut f = Complex64::new(0.0, 0.0);
        for (i, gi) in g.iter().enumerate().take(j + 1) {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            f += gi * (s * binom[i]);
        }
        sum += f / j as f64;
    }

    let k_fact: f64 = (1..=KUMMER_ORDER).map(|k| k as f64).product();
    let mut rem = Complex64::new(0.0, 0.0);
    let mut zn = Complex64::new(1.0, 0.0);
    for n in 1..=REMAINDER_TERMS {
        zn *= z;
        let nf = n as f64;
        let mut denom = nf * nf;
        for k in 1..=KUMMER_ORDER {
            denom *= nf + k as f64;
        }
        rem += zn / denom;
    }
    sum + rem * k_fact
}

/// `Λ(t)` by direct quadrature of the defining integral, without using
/// periodicity. Cross-check only; much slower than [`lobachevsky`].
pub fn lobachevsky_quadrature(t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let (lo, hi, sign) = if t > 0.0 { (0.0, t, -1.0) } else { (t, 0.0, 1.0) };
    // split at multiples of π so each piece has singularities only at its
    // cell's ends
    let mut total = 0.0;
    let mut a = lo;
    while a < hi {
        let mut k = (a / PI).floor();
        if (k + 1.0) * PI <= a {
            k += 1.0;
        }
        let b = ((k + 1.0) * PI).min(hi);
        total += integrate_log_2sin_in_cell(a - k * PI, b - k * PI);
        a = b;
    }
    sign * total
}

/// `∫_a^b ln|2 sin u| du` for `0 ≤ a < b ≤ π`, written as
/// `∫ ln u + ∫ ln(π - u) + ∫ r(u)` with `r` smooth on `[0, π]`.
fn integrate_log_2sin_in_cell(a: f64, b: f64) -> f64 {
    let a = a.max(0.0);
    let b = b.min(PI);
    if b <= a {
        return 0.0;
    }
    let xlogx = |x: f64| if x <= 0.0 { 0.0 } else { x * x.ln() - x };
    let log_u = xlogx(b) - xlogx(a);
    let log_pi_minus_u = xlogx(PI - a) - xlogx(PI - b);
    let smooth = adaptive_gauss_kronrod(&smooth_part, a, b, 1e-15, 60);
    log_u + log_pi_minus_u + smooth
}

/// `ln(2 sin u / (u (π - u)))`, evaluated through the nearer endpoint.
fn smooth_part(u: f64) -> f64 {
    let v = if u <= 0.5 * PI { u } else { PI - u };
    let sinc = if v == 0.0 { 1.0 } else { v.sin() / v };
    (2.0 * sinc / (PI - v)).ln()
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS_K: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const GK_WEIGHTS_G: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod rule with the embedded 7-point Gauss estimate.
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WEIGHTS_K[7] * fc;
    let mut g = GK_WEIGHTS_G[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        k += GK_WEIGHTS_K[i] * s;
        if i % 2 == 1 {
            g += GK_WEIGHTS_G[i / 2] * s;
        }
    }
    (k * h, (k - g).abs() * h)
}

fn adaptive_gauss_kronrod(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (val, err) = gk15(f, a, b);
    if err <= tol.max(1e-17 * val.abs()) || depth == 0 || b - a < 1e-12 {
        return val;
    }
    let m = 0.5 * (a + b);
    adaptive_gauss_kronrod(f, a, m, 0.5 * tol, depth - 1)
        + adaptive_gauss_kronrod(f, m, b, 0.5 * tol, depth - 1)
}
