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
    0.000_000_000_000_000_000_000_000_000_000_000,
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

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Stopping rule for [`integrate`]. Converged when the summed error estimate
/// is below `max(abs_tol, rel_tol * |I|)`.
#[derive(Debug, Clone, Copy)]
pub struct QuadTolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadTolerance {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-14, max_intervals: 4000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub intervals: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, &x) in XGK.iter().take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

/// Integrates `f` over `[a, b]`, bisecting the worst segment until the
/// tolerance is met.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: QuadTolerance) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("integration bounds must be finite, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, abs_error: 0.0, intervals: 0 });
    }
    let (value, error) = gk15(&f, a, b);
    let mut segments = vec![Segment { a, b, value, error }];
    loop {
        let total: f64 = segments.iter().map(|s| s.value).sum();
        let err: f64 = segments.iter().map(|s| s.error).sum();
        if !total.is_finite() {
            return Err(Error::Convergence("integrand produced a non-finite value".into()));
        }
        if err <= tol.abs_tol.max(tol.rel_tol * total.abs()) {
            return Ok(QuadResult { value: total, abs_error: err, intervals: segments.len() });
        }
        if segments.len() >= tol.max_intervals {
            return Err(Error::Convergence(format!(
                "adaptive quadrature on [{a}, {b}] stalled at error {err:e} after {} intervals",
                segments.len()
            )));
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("non-empty");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // interval cannot be split further in f64; accept its estimate
            let total: f64 = segments.iter().map(|s| s.value).sum::<f64>() + seg.value;
            let err: f64 = segments.iter().map(|s| s.error).sum::<f64>() + seg.error;
            return Ok(QuadResult { value: total, abs_error: err, intervals: segments.len() + 1 });
        }
        let (lv, le) = gk15(&f, seg.a, mid);
        let (rv, re) = gk15(&f, mid, seg.b);
        segments.push(Segment { a: seg.a, b: mid, value: lv, error: le });
        segments.push(Segment { a: mid, b: seg.b, value: rv, error: re });
    }
}

/// Integrates over `[a, b]` piecewise, splitting at the given breakpoints
/// (points outside the interval are ignored). Used for integrands with jumps.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: QuadTolerance,
) -> Result<QuadResult> {
    let mut points: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut edges = Vec::with_capacity(points.len() + 2);
    edges.push(a);
    edges.extend(points);
    edges.push(b);
    let mut out = QuadResult { value: 0.0, abs_error: 0.0, intervals: 0 };
    for w in edges.windows(2) {
        let r = integrate(&f, w[0], w[1], tol)?;
        out.value += r.value;
        out.abs_error += r.abs_error;
        out.intervals += r.intervals;
    }
    Ok(out)
}
