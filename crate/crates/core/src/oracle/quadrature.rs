//! Globally adaptive 15-point Gauss-Kronrod quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::OracleError;

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

/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// How the half line `(lower, ∞)` is reduced to a finite range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailStrategy {
    /// Substitute `t = lower + scale · u / (1 - u)` and integrate `u` over `(0, 1)`.
    Transform { scale: f64 },
    /// Integrate over `(lower, upper)` only; the caller owns the tail bound.
    Cutoff { upper: f64 },
}

impl TailStrategy {
    pub fn describe(&self) -> String {
        match self {
            TailStrategy::Transform { scale } => format!("transform u = t/(scale+t), scale = {scale}"),
            TailStrategy::Cutoff { upper } => format!("cutoff at {upper}, tail bounded by caller"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub relative_tolerance: f64,
    pub absolute_tolerance: f64,
    pub max_subdivisions: usize,
    pub tail: TailStrategy,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            relative_tolerance: 1e-8,
            absolute_tolerance: 0.0,
            max_subdivisions: 5000,
            tail: TailStrategy::Transform { scale: 1.0 },
        }
    }
}

impl QuadratureSpec {
    pub fn with_tolerance(mut self, relative: f64) -> Self {
        self.relative_tolerance = relative;
        self
    }

    pub fn with_tail(mut self, tail: TailStrategy) -> Self {
        self.tail = tail;
        self
    }
}

/// An integral value with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F>(f: &mut F, lo: f64, hi: f64) -> Result<Segment, OracleError>
where
    F: FnMut(f64) -> Result<f64, OracleError>,
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = f(center - dx)? + f(center + dx)?;
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    if !value.is_finite() {
        return Err(OracleError::NonFinite { at: center });
    }
    Ok(Segment { lo, hi, value, error })
}

/// Adaptive integration of a fallible integrand over the finite `[lo, hi]`.
pub fn integrate_interval_with<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    relative_tolerance: f64,
    absolute_tolerance: f64,
    max_subdivisions: usize,
) -> Result<Quadrature, OracleError>
where
    F: FnMut(f64) -> Result<f64, OracleError>,
{
    if lo == hi {
        return Ok(Quadrature { value: 0.0, error: 0.0 });
    }
    let first = gauss_kronrod(&mut f, lo, hi)?;
    let mut total = first.value;
    let mut total_error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    loop {
        if total_error <= absolute_tolerance.max(relative_tolerance * total.abs()) {
            break;
        }
        if heap.len() >= max_subdivisions {
            return Err(OracleError::NonConvergence {
                subdivisions: heap.len(),
                value: total,
                error: total_error,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // interval exhausted at double resolution
            return Err(OracleError::NonConvergence {
                subdivisions: heap.len() + 1,
                value: total,
                error: total_error,
            });
        }
        let left = gauss_kronrod(&mut f, worst.lo, mid)?;
        let right = gauss_kronrod(&mut f, mid, worst.hi)?;
        total += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // re-sum to shed accumulated cancellation in the running totals
    let value = heap.iter().map(|s| s.value).sum();
    let error = heap.iter().map(|s| s.error).sum();
    Ok(Quadrature { value, error })
}

/// Integral of a fallible integrand over `(lower, ∞)` per `spec.tail`.
pub fn integrate_half_line_with<F>(mut f: F, lower: f64, spec: &QuadratureSpec) -> Result<Quadrature, OracleError>
where
    F: FnMut(f64) -> Result<f64, OracleError>,
{
    match spec.tail {
        TailStrategy::Transform { scale } => integrate_interval_with(
            |u: f64| {
                let w = 1.0 - u;
                let t = lower + scale * u / w;
                let jac = scale / (w * w);
                let v = f(t)?;
                Ok(if v == 0.0 { 0.0 } else { v * jac })
            },
            0.0,
            1.0,
            spec.relative_tolerance,
            spec.absolute_tolerance,
            spec.max_subdivisions,
        ),
        TailStrategy::Cutoff { upper } => integrate_interval_with(
            f,
            lower,
            upper,
            spec.relative_tolerance,
            spec.absolute_tolerance,
            spec.max_subdivisions,
        ),
    }
}

/// `∫_0^∞ f(t) dt`.
pub fn integrate_1d<F>(f: F, spec: &QuadratureSpec) -> Result<Quadrature, OracleError>
where
    F: Fn(f64) -> f64,
{
    integrate_half_line_with(|t| Ok(f(t)), 0.0, spec)
}

/// `∫_lo^hi f(t) dt` for a finite range.
pub fn integrate_interval<F>(f: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<Quadrature, OracleError>
where
    F: Fn(f64) -> f64,
{
    integrate_interval_with(
        |t| Ok(f(t)),
        lo,
        hi,
        spec.relative_tolerance,
        spec.absolute_tolerance,
        spec.max_subdivisions,
    )
}

/// `∫_0^∞ ∫_0^∞ f(x, y) dy dx`, inner integral over `y`.
pub fn integrate_2d<F>(f: F, outer: &QuadratureSpec, inner: &QuadratureSpec) -> Result<Quadrature, OracleError>
where
    F: Fn(f64, f64) -> f64,
{
    let mut inner_error = 0.0f64;
    let result = integrate_half_line_with(
        |x| {
            let q = integrate_half_line_with(|y| Ok(f(x, y)), 0.0, inner)?;
            inner_error = inner_error.max(q.error / q.value.abs().max(f64::MIN_POSITIVE));
            Ok(q.value)
        },
        0.0,
        outer,
    )?;
    Ok(Quadrature { value: result.value, error: result.error + inner_error * result.value.abs() })
}

/// CDF of a density at ascending points, by integrating between successive
/// points from zero.
pub fn cumulative_at<F>(f: F, sorted_points: &[f64], spec: &QuadratureSpec) -> Result<Vec<f64>, OracleError>
where
    F: Fn(f64) -> f64,
{
    let mut out = Vec::with_capacity(sorted_points.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &x in sorted_points {
        if x > prev {
            let piece = integrate_interval_with(
                |t| Ok(f(t)),
                prev,
                x,
                spec.relative_tolerance,
                1e-15,
                spec.max_subdivisions,
            )?;
            acc += piece.value;
            prev = x;
        }
        out.push(acc);
    }
    Ok(out)
}
