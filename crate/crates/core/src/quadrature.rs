//! Globally adaptive Gauss-Kronrod (7/15) quadrature for vector integrands.

#![allow(clippy::excessive_precision)]

use crate::error::NumericalError;

// Kronrod abscissae on [0, 1); XGK[1], XGK[3], XGK[5], XGK[7] are the Gauss nodes.
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
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    /// Absolute tolerance applied to every component.
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_intervals: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature<const D: usize> {
    pub value: [f64; D],
    /// Summed per-component error estimates.
    pub error: [f64; D],
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment<const D: usize> {
    a: f64,
    b: f64,
    value: [f64; D],
    error: [f64; D],
}

impl<const D: usize> Segment<D> {
    fn worst(&self) -> f64 {
        self.error.iter().fold(0.0, |m, &e| m.max(e))
    }
}

fn kronrod<const D: usize, F: Fn(f64) -> [f64; D]>(f: &F, a: f64, b: f64) -> Segment<D> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut k = fc.map(|v| v * WGK[7]);
    let mut g = fc.map(|v| v * WG[3]);
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for d in 0..D {
            let s = f1[d] + f2[d];
            k[d] += WGK[j] * s;
            if j % 2 == 1 {
                g[d] += WG[j / 2] * s;
            }
        }
    }
    let mut value = [0.0; D];
    let mut error = [0.0; D];
    for d in 0..D {
        value[d] = k[d] * half;
        error[d] = ((k[d] - g[d]) * half).abs();
    }
    Segment { a, b, value, error }
}

/// Integrates `f` over `[a, b]`, bisecting the segment with the largest
/// error until every component's summed error estimate is below
/// `opts.abs_tol`.
pub fn integrate<const D: usize, F: Fn(f64) -> [f64; D]>(
    f: F,
    a: f64,
    b: f64,
    opts: QuadOptions,
) -> Result<Quadrature<D>, NumericalError> {
    if a == b {
        return Ok(Quadrature {
            value: [0.0; D],
            error: [0.0; D],
            intervals: 0,
        });
    }
    let mut segments = vec![kronrod(&f, a, b)];
    loop {
        let mut value = [0.0; D];
        let mut error = [0.0; D];
        for s in &segments {
            for d in 0..D {
                value[d] += s.value[d];
                error[d] += s.error[d];
            }
        }
        let estimate = error.iter().fold(0.0_f64, |m, &e| m.max(e));
        if estimate <= opts.abs_tol {
            return Ok(Quadrature {
                value,
                error,
                intervals: segments.len(),
            });
        }
        if segments.len() >= opts.max_intervals {
            return Err(NumericalError::QuadratureNotConverged {
                tol: opts.abs_tol,
                max_intervals: opts.max_intervals,
                estimate,
            });
        }
        // first maximum wins, so refinement order is fixed
        let (idx, _) =
            segments
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bw), (i, s)| {
                    let w = s.worst();
                    if w > bw {
                        (i, w)
                    } else {
                        (bi, bw)
                    }
                });
        let seg = segments.swap_remove(idx);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            return Err(NumericalError::QuadratureNotConverged {
                tol: opts.abs_tol,
                max_intervals: opts.max_intervals,
                estimate,
            });
        }
        segments.push(kronrod(&f, seg.a, mid));
        segments.push(kronrod(&f, mid, seg.b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials_up_to_degree_22() {
        let q = integrate(
            |x| [x.powi(22), x.powi(7), 1.0],
            0.0,
            1.0,
            QuadOptions::default(),
        )
        .unwrap();
        assert!((q.value[0] - 1.0 / 23.0).abs() < 1e-15);
        assert!((q.value[1] - 1.0 / 8.0).abs() < 1e-15);
        assert!((q.value[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_two() {
        let k: f64 = WGK[7] + 2.0 * WGK[..7].iter().sum::<f64>();
        let g: f64 = WG[3] + 2.0 * WG[..3].iter().sum::<f64>();
        assert!((k - 2.0).abs() < 1e-15);
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn adapts_to_a_peak() {
        // integral of 1 / (1e-4 + x^2) over [-1, 1] = 2 atan(100) / 1e-2
        let q = integrate(
            |x| [1.0 / (1e-4 + x * x)],
            -1.0,
            1.0,
            QuadOptions::default(),
        )
        .unwrap();
        let exact = 2.0 * 100f64.atan() / 1e-2;
        assert!(
            (q.value[0] - exact).abs() < 1e-8,
            "{} vs {exact}",
            q.value[0]
        );
        assert!(q.intervals > 1);
    }

    #[test]
    fn empty_range_is_zero() {
        let q = integrate(|x| [x, 1.0], 2.0, 2.0, QuadOptions::default()).unwrap();
        assert_eq!(q.value, [0.0, 0.0]);
    }

    #[test]
    fn reports_non_convergence() {
        let opts = QuadOptions {
            abs_tol: 1e-10,
            max_intervals: 3,
        };
        let err = integrate(|x| [(200.0 * x).sin()], 0.0, 10.0, opts).unwrap_err();
        assert!(matches!(err, NumericalError::QuadratureNotConverged { .. }));
    }
}
