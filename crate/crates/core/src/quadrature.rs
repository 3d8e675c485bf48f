#![allow(clippy::excessive_precision)] // published coefficients are kept as printed

//! Globally adaptive 21-point Gauss–Kronrod quadrature over a set of
//! breakpoints. The integrand only needs to be smooth between consecutive
//! breakpoints; every subinterval that is split stays inside one smooth piece.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Bisections allowed across all pieces before giving up.
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-9,
            rel_tol: 1e-9,
            max_subdivisions: 200,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::domain("quadrature tolerances must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadEstimate<T> {
    pub value: T,
    pub error_estimate: T,
    pub evaluations: usize,
}

// Kronrod abscissae; odd indices are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_460,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_958_109_831,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// One Gauss–Kronrod 21 panel with the QUADPACK error heuristic.
fn gk21<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let f_center = f(center);
    let mut kronrod = f_center * T::lit(WGK[10]);
    let mut gauss = T::zero();
    let mut abs_sum = kronrod.abs();
    let mut fv = [(T::zero(), T::zero()); 10];
    for j in 0..10 {
        let dx = half_len * T::lit(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[j] = (f1, f2);
        kronrod = kronrod + T::lit(WGK[j]) * (f1 + f2);
        abs_sum = abs_sum + T::lit(WGK[j]) * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss = gauss + T::lit(WG[j / 2]) * (f1 + f2);
        }
    }
    let mean = kronrod * half;
    let mut asc = T::lit(WGK[10]) * (f_center - mean).abs();
    for (j, &(f1, f2)) in fv.iter().enumerate() {
        asc = asc + T::lit(WGK[j]) * ((f1 - mean).abs() + (f2 - mean).abs());
    }
    let result = kronrod * half_len;
    let asc = asc * half_len.abs();
    let abs_sum = abs_sum * half_len.abs();
    let mut err = ((kronrod - gauss) * half_len).abs();
    if asc != T::zero() && err != T::zero() {
        let scale = (T::lit(200.0) * err / asc).powf(T::lit(1.5));
        err = asc * scale.min(T::one());
    }
    let round = T::lit(50.0) * T::epsilon() * abs_sum;
    if abs_sum > T::min_positive_value() / (T::lit(50.0) * T::epsilon()) {
        err = err.max(round);
    }
    (result, err)
}

struct Panel<T> {
    a: T,
    b: T,
    value: T,
    err: T,
}

impl<T: Real> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl<T: Real> Eq for Panel<T> {}
impl<T: Real> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.partial_cmp(&other.err).unwrap_or(Ordering::Equal)
    }
}

/// Integrates `f` over `[points[0], points[last]]`, treating every interior
/// point as a place where `f` may fail to be smooth. `points` must be sorted;
/// zero-length pieces are skipped.
pub fn integrate_piecewise<T: Real, F: Fn(T) -> T>(
    f: F,
    points: &[T],
    spec: &QuadratureSpec,
) -> Result<QuadEstimate<T>> {
    spec.validate()?;
    if points.len() < 2 {
        return Err(Error::domain("integration needs at least two breakpoints"));
    }
    if points
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]).is_none_or(|o| o.is_gt()))
    {
        return Err(Error::domain("breakpoints must be sorted and finite"));
    }
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in points.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        let (value, err) = gk21(&f, w[0], w[1]);
        evaluations += 21;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value,
            err,
        });
    }
    let abs_tol = T::lit(spec.abs_tol);
    let rel_tol = T::lit(spec.rel_tol);
    let mut subdivisions = 0;
    loop {
        let (value, err) = heap
            .iter()
            .fold((T::zero(), T::zero()), |(v, e), p| (v + p.value, e + p.err));
        if !(value.is_finite() && err.is_finite()) {
            return Err(Error::Quadrature {
                error_estimate: f64::INFINITY,
                subdivisions,
            });
        }
        if err <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(QuadEstimate {
                value,
                error_estimate: err,
                evaluations,
            });
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(Error::Quadrature {
                error_estimate: err.to_f64().unwrap_or(f64::NAN),
                subdivisions,
            });
        }
        let worst = heap.pop().expect("nonempty while error is positive");
        let mid = T::lit(0.5) * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            // interval cannot be split further in this precision
            return Err(Error::Quadrature {
                error_estimate: err.to_f64().unwrap_or(f64::NAN),
                subdivisions,
            });
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, err) = gk21(&f, a, b);
            evaluations += 21;
            heap.push(Panel { a, b, value, err });
        }
        subdivisions += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate_piecewise(
            |x: f64| x.powi(5) - 3.0 * x * x,
            &[0.0, 2.0],
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert!((r.value - (64.0 / 6.0 - 8.0)).abs() < 1e-13);
    }

    #[test]
    fn kinked_integrand_with_breakpoints() {
        // |x - 0.3| on [-1, 1] = (1.3^2 + 0.7^2)/2
        let exact = (1.3_f64 * 1.3 + 0.7 * 0.7) / 2.0;
        let spec = QuadratureSpec {
            abs_tol: 1e-13,
            rel_tol: 1e-13,
            max_subdivisions: 50,
        };
        let r = integrate_piecewise(|x: f64| (x - 0.3).abs(), &[-1.0, 0.3, 1.0], &spec).unwrap();
        assert!((r.value - exact).abs() < 1e-14);
        assert_eq!(r.evaluations, 42);
    }

    #[test]
    fn smooth_gaussian() {
        let r = integrate_piecewise(
            |x: f64| (-0.5 * x * x).exp(),
            &[-8.0, 8.0],
            &QuadratureSpec {
                abs_tol: 1e-13,
                rel_tol: 1e-13,
                max_subdivisions: 100,
            },
        )
        .unwrap();
        assert!((r.value - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn non_convergence_is_reported() {
        let spec = QuadratureSpec {
            abs_tol: 1e-14,
            rel_tol: 1e-14,
            max_subdivisions: 3,
        };
        let err = integrate_piecewise(|x: f64| x.sqrt().recip(), &[0.0, 1.0], &spec).unwrap_err();
        match err {
            Error::Quadrature {
                error_estimate,
                subdivisions,
            } => {
                assert_eq!(subdivisions, 3);
                assert!(error_estimate > 1e-14);
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = integrate_piecewise(|x: f64| x.abs().recip(), &[-1.0, 1.0], &QuadratureSpec::default()).unwrap_err();
        assert!(err.is_numerical());
    }

    #[test]
    fn works_in_f32() {
        let r = integrate_piecewise(
            |x: f32| x.sin(),
            &[0.0, std::f32::consts::PI],
            &QuadratureSpec {
                abs_tol: 1e-4,
                rel_tol: 1e-4,
                max_subdivisions: 20,
            },
        )
        .unwrap();
        assert!((r.value - 2.0).abs() < 1e-5);
    }

    #[test]
    fn bad_breakpoints() {
        assert!(integrate_piecewise(|x: f64| x, &[1.0], &QuadratureSpec::default()).is_err());
        assert!(integrate_piecewise(|x: f64| x, &[1.0, 0.0], &QuadratureSpec::default()).is_err());
    }
}
