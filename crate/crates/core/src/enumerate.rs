//! Exact Fincke–Pohst style enumeration of lattice points in an ellipsoid.
//!
//! For a positive definite doubled Gram matrix `G` the quadratic form
//! `Q(y) = y·G·yᵀ / 2` is written as `Σ dᵢ (yᵢ + Σ_{j>i} uᵢⱼ yⱼ)²` with exact
//! rational `dᵢ, uᵢⱼ`. Coordinates are fixed from the last one down, and
//! each interval is computed exactly, so no point is ever missed or
//! spuriously admitted.

use std::ops::ControlFlow;

use num_traits::{ToPrimitive, Zero};

use crate::arith::{int, Meter, Rational};
use crate::error::{Error, Result};

/// Largest `n·log2(n·max|Gᵢⱼ|)` accepted, keeping all minors inside `i128`.
const MAGNITUDE_BITS: f64 = 96.0;

pub(crate) fn check_magnitude(gram2: &[Vec<i128>]) -> Result<()> {
    let n = gram2.len();
    let max = gram2.iter().flatten().map(|x| x.abs()).max().unwrap_or(0);
    if n > 0 && max > 0 && (n as f64) * ((n as f64) * (max as f64)).log2() > MAGNITUDE_BITS {
        return Err(Error::CoefficientTooLarge(max));
    }
    Ok(())
}

/// Rational LDLᵀ data of a positive definite form.
#[derive(Debug, Clone)]
pub struct Ellipsoid {
    d: Vec<Rational>,
    u: Vec<Vec<Rational>>,
}

impl Ellipsoid {
    pub fn new(gram2: &[Vec<i128>]) -> Result<Self> {
        let n = gram2.len();
        if gram2.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: gram2.first().map_or(0, Vec::len) });
        }
        check_magnitude(gram2)?;
        let mut m: Vec<Vec<Rational>> = gram2
            .iter()
            .map(|row| row.iter().map(|&x| Rational::new(x, 2)).collect())
            .collect();
        let mut d = vec![Rational::zero(); n];
        let mut u = vec![vec![Rational::zero(); n]; n];
        for i in 0..n {
            if m[i][i] <= Rational::zero() {
                return Err(Error::NotPositiveDefinite);
            }
            d[i] = m[i][i];
            for j in i + 1..n {
                u[i][j] = m[i][j] / d[i];
            }
            for j in i + 1..n {
                for k in i + 1..n {
                    let t = m[i][j] * m[i][k] / d[i];
                    m[j][k] -= t;
                }
            }
        }
        Ok(Ellipsoid { d, u })
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Visits every integer `x` with `Q(x + center) <= bound`, passing the
    /// exact value `Q(x + center)`. Stops early when `visit` breaks.
    pub(crate) fn for_each<F>(
        &self,
        center: &[Rational],
        bound: Rational,
        meter: &mut Meter,
        mut visit: F,
    ) -> Result<()>
    where
        F: FnMut(&[i128], Rational) -> ControlFlow<()>,
    {
        let n = self.dim();
        if center.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: center.len() });
        }
        if bound < Rational::zero() {
            return Ok(());
        }
        if n == 0 {
            let _ = visit(&[], Rational::zero());
            return Ok(());
        }
        let mut x = vec![0i128; n];
        let _ = self.descend(n - 1, center, bound, Rational::zero(), &mut x, meter, &mut visit)?;
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn descend<F>(
        &self,
        level: usize,
        center: &[Rational],
        remaining: Rational,
        acc: Rational,
        x: &mut [i128],
        meter: &mut Meter,
        visit: &mut F,
    ) -> Result<ControlFlow<()>>
    where
        F: FnMut(&[i128], Rational) -> ControlFlow<()>,
    {
        let n = self.dim();
        // shift = c_level + Σ_{j>level} u_{level,j} (x_j + c_j)
        let mut shift = center[level];
        for j in level + 1..n {
            shift += self.u[level][j] * (int(x[j]) + center[j]);
        }
        let dl = self.d[level];
        let Some((lo, hi)) = integer_range(&shift, &(remaining / dl)) else {
            return Ok(ControlFlow::Continue(()));
        };
        for xi in lo..=hi {
            meter.tick()?;
            let t = int(xi) + shift;
            let term = dl * t * t;
            if term > remaining {
                continue;
            }
            x[level] = xi;
            let value = acc + term;
            let flow = if level == 0 {
                visit(x, value)
            } else {
                self.descend(level - 1, center, remaining - term, value, x, meter, visit)?
            };
            if flow.is_break() {
                return Ok(flow);
            }
        }
        x[level] = 0;
        Ok(ControlFlow::Continue(()))
    }
}

/// Integers `x` with `(x + shift)² <= radius2`, or `None` if there are none.
fn integer_range(shift: &Rational, radius2: &Rational) -> Option<(i128, i128)> {
    if *radius2 < Rational::zero() {
        return None;
    }
    let s = shift.to_f64().unwrap_or(0.0);
    let r = radius2.to_f64().unwrap_or(0.0).sqrt();
    let fits = |x: i128| {
        let t = int(x) + shift;
        t * t <= *radius2
    };
    let mut lo = (-s - r).floor() as i128 - 1;
    let mut hi = (-s + r).ceil() as i128 + 1;
    // The float estimate is within one unit of the truth; tighten exactly.
    while lo <= hi && !fits(lo) {
        lo += 1;
    }
    while hi >= lo && !fits(hi) {
        hi -= 1;
    }
    if lo > hi {
        return None;
    }
    while fits(lo - 1) {
        lo -= 1;
    }
    while fits(hi + 1) {
        hi += 1;
    }
    Some((lo, hi))
}

/// Exact value `y·G·yᵀ / 2` for a rational vector.
pub fn quad_value(gram2: &[Vec<i128>], y: &[Rational]) -> Rational {
    let mut acc = Rational::zero();
    for (i, row) in gram2.iter().enumerate() {
        for (j, &g) in row.iter().enumerate() {
            acc += int(g) * y[i] * y[j];
        }
    }
    acc / 2
}

/// Integer `x·G·xᵀ` (twice the form value).
pub fn quad_value2(gram2: &[Vec<i128>], x: &[i128]) -> i128 {
    let mut acc = 0;
    for (i, row) in gram2.iter().enumerate() {
        for (j, &g) in row.iter().enumerate() {
            acc += g * x[i] * x[j];
        }
    }
    acc
}
