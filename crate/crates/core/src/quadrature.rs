//! Embedded Gauss-Kronrod (G7, K15) panel rule.

use num_complex::Complex64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Integral of a complex integrand over `[a, b]` with the QUADPACK-rescaled
/// `|K15 - G7|` error estimate.
pub fn gk15_complex(f: impl Fn(f64) -> Complex64, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut vals = [Complex64::new(0.0, 0.0); 15];
    vals[7] = f(c);
    for i in 0..7 {
        let dx = h * XGK[i];
        vals[i] = f(c - dx);
        vals[14 - i] = f(c + dx);
    }
    let mut kron = vals[7] * WGK[7];
    let mut gauss = vals[7] * WG[3];
    for i in 0..7 {
        let s = vals[i] + vals[14 - i];
        kron += s * WGK[i];
        if i % 2 == 1 {
            gauss += s * WG[i / 2];
        }
    }
    let mean = kron * 0.5;
    let mut asc = (vals[7] - mean).norm() * WGK[7];
    for i in 0..7 {
        asc += WGK[i] * ((vals[i] - mean).norm() + (vals[14 - i] - mean).norm());
    }
    let asc = asc * h.abs();
    let raw = ((kron - gauss) * h).norm();
    let err = if asc > 0.0 && raw > 0.0 {
        asc * (200.0 * raw / asc).powf(1.5).min(1.0)
    } else {
        raw
    };
    (kron * h, err.max(50.0 * f64::EPSILON * (kron * h).norm()))
}

/// Real-valued counterpart of [`gk15_complex`].
pub fn gk15(f: impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let (v, e) = gk15_complex(|x| Complex64::new(f(x), 0.0), a, b);
    (v.re, e)
}
