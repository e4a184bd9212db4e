//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-12,
            rel: 1e-10,
            max_intervals: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    // Plain |K - G| error; the QUADPACK rescaling is too optimistic for the
    // one-sided, exponentially steep integrands met in the stable-law code.
    let error = ((res_k - res_g) * half)
        .abs()
        .max(50.0 * f64::EPSILON * res_abs * half.abs());
    Segment {
        a,
        b,
        value: res_k * half,
        error,
    }
}

/// Integrates `f` over `[a, b]`, bisecting the segment with the largest
/// error estimate until `error <= max(tol.abs, tol.rel * |value|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Integral> {
    integrate_pieces(f, &[a, b], tol)
}

/// Like [`integrate`] but starts from the given breakpoints, which must be
/// non-decreasing. Useful when the location of a peak is known.
pub fn integrate_pieces<F: Fn(f64) -> f64>(
    f: F,
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<Integral> {
    if breakpoints.len() < 2 {
        return Err(Error::domain("quadrature needs at least two breakpoints"));
    }
    if breakpoints.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("quadrature bounds must be finite"));
    }
    let mut segments: Vec<Segment> = breakpoints
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| gk15(&f, w[0], w[1]))
        .collect();
    if segments.is_empty() {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        if !value.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite integrand on [{}, {}]",
                breakpoints[0],
                breakpoints[breakpoints.len() - 1]
            )));
        }
        if error <= tol.abs.max(tol.rel * value.abs()) {
            return Ok(Integral {
                value,
                error,
                intervals: segments.len(),
            });
        }
        if segments.len() >= tol.max_intervals {
            return Err(Error::Numerical(format!(
                "quadrature did not converge: value {value:e}, error estimate {error:e} after {} intervals",
                segments.len()
            )));
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("non-empty");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval is at floating-point resolution; accept its estimate.
            segments.push(Segment { error: 0.0, ..seg });
            continue;
        }
        segments.push(gk15(&f, seg.a, mid));
        segments.push(gk15(&f, mid, seg.b));
    }
}
