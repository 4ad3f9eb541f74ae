//! One-dimensional numerical integration.
//!
//! [`integrate`] is a globally adaptive Gauss–Kronrod (7/15) integrator.
//! [`integrate_line`] wraps it for densities on the real line: it integrates
//! a core interval and then keeps appending geometrically growing tail
//! pieces until their mass drops below [`TAIL_MASS`], reporting divergence
//! when the tails never settle.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Tail pieces smaller than this end the domain extension.
pub const TAIL_MASS: f64 = 1e-12;

const MAX_SUBINTERVALS: usize = 4000;
const MAX_TAIL_PIECES: usize = 64;

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
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for k in 0..7 {
        let dx = half * XGK[k];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[k] * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive integral of `f` over `[a, b]` to `max(tol, tol * |value|)`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> QuadResult {
    if a == b {
        return QuadResult {
            value: 0.0,
            error: 0.0,
            converged: true,
        };
    }
    let (value, error) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut converged = false;
    while heap.len() < MAX_SUBINTERVALS {
        if !total.is_finite() || !total_err.is_finite() {
            break;
        }
        if total_err <= tol.max(tol * total.abs()) {
            converged = true;
            break;
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval can no longer be split in floating point.
            heap.push(worst);
            break;
        }
        let (lv, le) = gk15(&mut f, worst.a, mid);
        let (rv, re) = gk15(&mut f, mid, worst.b);
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Piece {
            a: worst.a,
            b: mid,
            value: lv,
            error: le,
        });
        heap.push(Piece {
            a: mid,
            b: worst.b,
            value: rv,
            error: re,
        });
    }
    // Re-sum to shed accumulated update drift.
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    QuadResult {
        value,
        error,
        converged: converged || error <= tol.max(tol * value.abs()),
    }
}

/// Integral over consecutive segments `breaks[0]..breaks[1]..`; each
/// segment gets the full tolerance.
pub fn integrate_segments<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], tol: f64) -> QuadResult {
    let mut out = QuadResult {
        value: 0.0,
        error: 0.0,
        converged: true,
    };
    for w in breaks.windows(2) {
        let r = integrate(&mut f, w[0], w[1], tol);
        out.value += r.value;
        out.error += r.error;
        out.converged &= r.converged;
    }
    out
}

/// Integration domain for densities on (a subset of) the real line.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    /// Core interval; tails beyond it are added adaptively.
    pub lo: f64,
    pub hi: f64,
    /// Hard lower end of the support (no tail is added below it).
    pub lower_limit: Option<f64>,
    /// Interior points where the integrand may peak or kink.
    pub breakpoints: Vec<f64>,
}

impl Domain {
    pub fn new(lo: f64, hi: f64) -> Self {
        Domain {
            lo,
            hi,
            lower_limit: None,
            breakpoints: Vec::new(),
        }
    }

    /// Smallest domain covering both.
    pub fn union(&self, other: &Domain) -> Domain {
        let lower_limit = match (self.lower_limit, other.lower_limit) {
            (Some(a), Some(b)) => Some(a.min(b)),
            _ => None,
        };
        let mut breakpoints = self.breakpoints.clone();
        breakpoints.extend_from_slice(&other.breakpoints);
        Domain {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
            lower_limit,
            breakpoints,
        }
    }

    pub fn with_breakpoints(mut self, extra: impl IntoIterator<Item = f64>) -> Self {
        self.breakpoints.extend(extra);
        self
    }

    fn sorted_breaks(&self) -> Vec<f64> {
        let lo = match self.lower_limit {
            Some(limit) => self.lo.max(limit),
            None => self.lo,
        };
        let mut breaks = vec![lo, self.hi];
        breaks.extend(
            self.breakpoints
                .iter()
                .copied()
                .filter(|x| x.is_finite() && *x > lo && *x < self.hi),
        );
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
        breaks
    }
}

/// Outcome of an integral over a possibly unbounded domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineIntegral {
    pub value: f64,
    pub error: f64,
    /// Core quadrature met its tolerance.
    pub converged: bool,
    /// False when the tails did not settle (the integral diverges numerically).
    pub finite: bool,
}

pub fn integrate_line<F: FnMut(f64) -> f64>(mut f: F, domain: &Domain, tol: f64) -> LineIntegral {
    let breaks = domain.sorted_breaks();
    let core = integrate_segments(&mut f, &breaks, tol);
    let mut out = LineIntegral {
        value: core.value,
        error: core.error,
        converged: core.converged,
        finite: core.value.is_finite(),
    };
    if !out.finite {
        return out;
    }
    let lo = breaks[0];
    let hi = *breaks.last().unwrap();
    let width = (hi - lo).max(1.0);

    let limit = domain.lower_limit;
    let mut extend = |start: f64, direction: f64, out: &mut LineIntegral| {
        let mut a = start;
        let mut w = width;
        for _ in 0..MAX_TAIL_PIECES {
            let mut b = a + direction * w;
            let mut last = false;
            if let Some(limit) = limit.filter(|_| direction < 0.0) {
                if b <= limit {
                    b = limit;
                    last = true;
                }
            }
            let (x0, x1) = if direction > 0.0 { (a, b) } else { (b, a) };
            let piece = integrate(&mut f, x0, x1, tol);
            if !piece.value.is_finite() {
                out.finite = false;
                return;
            }
            out.value += piece.value;
            out.error += piece.error;
            if last || piece.value.abs() < TAIL_MASS {
                return;
            }
            a = b;
            w *= 2.0;
        }
        out.finite = false;
    };

    extend(hi, 1.0, &mut out);
    let has_left_tail = match domain.lower_limit {
        Some(limit) => lo > limit,
        None => true,
    };
    if out.finite && has_left_tail {
        extend(lo, -1.0, &mut out);
    }
    if !out.finite {
        out.value = f64::INFINITY;
    }
    out
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
