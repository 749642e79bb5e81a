//! Standard bivariate normal distribution.
//!
//! The CDF follows Genz's reformulation of the Drezner–Wesolowsky single
//! integral: Gauss–Legendre quadrature (6, 12 or 20 nodes depending on `|ρ|`)
//! over `asin ρ` for moderate correlations, and an asymptotic expansion plus
//! quadrature of the remainder for `|ρ| ≥ 0.925`. Absolute error is around
//! `1e-15` in double precision.

use std::f64::consts::PI;

use crate::criterion::phi;
use crate::scalar::Scalar;

/// Correlations are clipped to `±(1 - RHO_CLIP)`.
pub const RHO_CLIP: f64 = 1e-12;

// Half-rules (nodes are symmetric about 0; the mirrored node is added in the loop).
const GL_W: [&[f64]; 3] = [
    &[0.1713244923791705, 0.3607615730481384, 0.4679139345726904],
    &[
        0.04717533638651177,
        0.1069393259953183,
        0.1600783285433464,
        0.2031674267230659,
        0.2334925365383547,
        0.2491470458134029,
    ],
    &[
        0.01761400713915212,
        0.04060142980038694,
        0.06267204833410906,
        0.08327674157670475,
        0.1019301198172404,
        0.1181945319615184,
        0.1316886384491766,
        0.1420961093183821,
        0.1491729864726037,
        0.1527533871307259,
    ],
];
const GL_X: [&[f64]; 3] = [
    &[-0.9324695142031522, -0.6612093864662647, -0.2386191860831970],
    &[
        -0.9815606342467191,
        -0.9041172563704750,
        -0.7699026741943050,
        -0.5873179542866171,
        -0.3678314989981802,
        -0.1252334085114692,
    ],
    &[
        -0.9931285991850949,
        -0.9639719272779138,
        -0.9122344282513259,
        -0.8391169718222188,
        -0.7463319064601508,
        -0.6360536807265150,
        -0.5108670019508271,
        -0.3737060887154196,
        -0.2277858511416451,
        -0.07652652113349733,
    ],
];

fn phi64(z: f64) -> f64 {
    phi(z)
}

/// Upper orthant probability `P(X > h, Y > k)` for correlation `r`.
fn upper_orthant(h: f64, k: f64, r: f64) -> f64 {
    let rule = if r.abs() < 0.3 {
        0
    } else if r.abs() < 0.75 {
        1
    } else {
        2
    };
    let (w, x) = (GL_W[rule], GL_X[rule]);
    let two_pi = 2.0 * PI;
    let mut hk = h * k;
    let mut bvn = 0.0;

    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for (&wi, &xi) in w.iter().zip(x) {
            for node in [xi, -xi] {
                let sn = (asr * (node + 1.0) / 2.0).sin();
                bvn += wi * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        return bvn * asr / (2.0 * two_pi) + phi64(-h) * phi64(-k);
    }

    let mut k = k;
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let a_s = (1.0 - r) * (1.0 + r);
        let mut a = a_s.sqrt();
        let bs = (h - k).powi(2);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        bvn = a
            * (-(bs / a_s + hk) / 2.0).exp()
            * (1.0 - c * (bs - a_s) * (1.0 - d * bs / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
        if hk > -160.0 {
            let b = bs.sqrt();
            bvn -= (-hk / 2.0).exp()
                * two_pi.sqrt()
                * phi64(-b / a)
                * b
                * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for (&wi, &xi) in w.iter().zip(x) {
            let xs = (a * (xi + 1.0)).powi(2);
            let rs = (1.0 - xs).sqrt();
            bvn += a
                * wi
                * ((-bs / (2.0 * xs) - hk / (1.0 + rs)).exp() / rs
                    - (-(bs / xs + hk) / 2.0).exp() * (1.0 + c * xs * (1.0 + d * xs)));
            let xs = a_s * (1.0 - xi).powi(2) / 4.0;
            let rs = (1.0 - xs).sqrt();
            bvn += a
                * wi
                * (-(bs / xs + hk) / 2.0).exp()
                * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                    - (1.0 + c * xs * (1.0 + d * xs)));
        }
        bvn = -bvn / two_pi;
    }
    if r > 0.0 {
        bvn + phi64(-h.max(k))
    } else {
        -bvn + (phi64(-h) - phi64(-k)).max(0.0)
    }
}

fn bvn_cdf_f64(h: f64, k: f64, rho: f64) -> f64 {
    if h.is_nan() || k.is_nan() || rho.is_nan() {
        return f64::NAN;
    }
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return 0.0;
    }
    if h == f64::INFINITY {
        return phi64(k);
    }
    if k == f64::INFINITY {
        return phi64(h);
    }
    let rho = rho.clamp(-1.0 + RHO_CLIP, 1.0 - RHO_CLIP);
    upper_orthant(-h, -k, rho).clamp(0.0, 1.0)
}

/// `P(X ≤ h, Y ≤ k)` for a standard bivariate normal with correlation `rho`.
/// Infinite limits are handled exactly; `|rho|` is clipped to `1 - 1e-12`.
pub fn bvn_cdf<F: Scalar>(h: F, k: F, rho: F) -> F {
    F::of(bvn_cdf_f64(h.as_f64(), k.as_f64(), rho.as_f64()))
}

/// Standard bivariate normal density, which is also `∂ bvn_cdf / ∂ rho`.
pub fn bvn_pdf<F: Scalar>(h: F, k: F, rho: F) -> F {
    let (h, k) = (h.as_f64(), k.as_f64());
    let rho = rho.as_f64().clamp(-1.0 + RHO_CLIP, 1.0 - RHO_CLIP);
    if !h.is_finite() || !k.is_finite() {
        return F::zero();
    }
    let one_m = 1.0 - rho * rho;
    let q = (h * h - 2.0 * rho * h * k + k * k) / one_m;
    F::of((-q / 2.0).exp() / (2.0 * PI * one_m.sqrt()))
}

/// Partial derivatives of `bvn_cdf(h, k, rho)` with respect to `h` and `k`.
pub fn bvn_cdf_partials<F: Scalar>(h: F, k: F, rho: F) -> (F, F) {
    let (h, k) = (h.as_f64(), k.as_f64());
    let rho = rho.as_f64().clamp(-1.0 + RHO_CLIP, 1.0 - RHO_CLIP);
    let s = (1.0 - rho * rho).sqrt();
    let pdf = |z: f64| (-z * z / 2.0).exp() / (2.0 * PI).sqrt();
    let dh = if h.is_finite() { pdf(h) * phi64((k - rho * h) / s) } else { 0.0 };
    let dk = if k.is_finite() { pdf(k) * phi64((h - rho * k) / s) } else { 0.0 };
    (F::of(dh), F::of(dk))
}
