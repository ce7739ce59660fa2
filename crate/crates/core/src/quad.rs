//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use crate::error::{Error, Result};

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

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 2000;

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * h,
        error: ((kronrod - gauss) * h).abs(),
    }
}

const INITIAL_PIECES: usize = 16;

/// Integrates `f` over `[a, b]` to absolute tolerance `abs_tol` by bisecting
/// the segment with the largest error estimate.
///
/// The interval is first cut into 16 equal pieces. Features much narrower
/// than that can still be missed; use [`integrate_with_breaks`] to place a
/// breakpoint on them.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    integrate_with_breaks(f, a, b, &[], abs_tol)
}

/// [`integrate`] with extra breakpoints inside `(a, b)`.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    abs_tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut knots: Vec<f64> = (0..=INITIAL_PIECES)
        .map(|i| lo + (hi - lo) * i as f64 / INITIAL_PIECES as f64)
        .chain(breaks.iter().copied().filter(|&x| x > lo && x < hi))
        .collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let mut segs: Vec<Segment> = knots
        .windows(2)
        .map(|w| gauss_kronrod(&f, w[0], w[1]))
        .collect();
    loop {
        let total_err: f64 = segs.iter().map(|s| s.error).sum();
        let total: f64 = segs.iter().map(|s| s.value).sum();
        if !total.is_finite() {
            return Err(Error::QuadratureFailure {
                tol: abs_tol,
                estimate: f64::INFINITY,
            });
        }
        if total_err <= abs_tol {
            return Ok(sign * total);
        }
        if segs.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureFailure {
                tol: abs_tol,
                estimate: total_err,
            });
        }
        let (worst, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one segment");
        let s = segs.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            return Err(Error::QuadratureFailure {
                tol: abs_tol,
                estimate: total_err,
            });
        }
        segs.push(gauss_kronrod(&f, s.a, mid));
        segs.push(gauss_kronrod(&f, mid, s.b));
    }
}
