//! Minkowski reduction and equivalence of positive ternary polynomials.
//!
//! The quadratic part is reduced to a canonical Minkowski-reduced Gram
//! matrix by enumerating every basis built from successive minima; the
//! translation is then chosen among the integer minimizers. Ties are broken
//! by the ordering of [`canonical_key`], which makes the result a canonical
//! representative of the equivalence class.

use std::cmp::Reverse;

use serde::{Deserialize, Serialize};

use crate::arith;
use crate::enumerate::quad_value2;
use crate::error::{Error, Result};
use crate::lattice;
use crate::poly::{AffineTransform, QuadPoly};

/// Cap on points visited while searching for minimizers.
const SEARCH_POINTS: u64 = 50_000_000;

/// Sort key of a reduced doubled Gram matrix; smaller is preferred.
pub fn canonical_key(g: &[Vec<i128>]) -> impl Ord {
    (
        (g[0][0], g[1][1], g[2][2]),
        (g[0][1].abs(), g[0][2].abs(), g[1][2].abs()),
        (Reverse(g[0][1]), Reverse(g[0][2]), Reverse(g[1][2])),
    )
}

/// Minkowski conditions for a ternary doubled Gram matrix.
pub fn is_minkowski_reduced(g: &[Vec<i128>]) -> bool {
    if g.len() != 3 || !arith::is_positive_definite(g) {
        return false;
    }
    let (a, b, c) = (g[0][0], g[1][1], g[2][2]);
    let (x, y, z) = (g[0][1], g[0][2], g[1][2]);
    if !(a <= b && b <= c) {
        return false;
    }
    if 2 * x.abs() > a || 2 * y.abs() > a || 2 * z.abs() > b {
        return false;
    }
    // Q(e3 + s1 e1 + s2 e2) >= Q(e3)
    for s1 in [-1i128, 1] {
        for s2 in [-1i128, 1] {
            if a + b + 2 * (s1 * s2 * x + s1 * y + s2 * z) < 0 {
                return false;
            }
        }
    }
    true
}

fn gram_of(g: &[Vec<i128>], rows: &[Vec<i128>]) -> Vec<Vec<i128>> {
    arith::mat_mul(&arith::mat_mul(rows, g), &arith::transpose(rows))
}

fn cross(a: &[i128], b: &[i128]) -> [i128; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

type Matrix = Vec<Vec<i128>>;

/// Canonical reduced Gram matrix of a positive definite ternary form and
/// every basis (rows of `T`, so that `T·G·Tᵀ` is the reduced matrix) that
/// realizes it.
pub fn reduce_form(g: &[Vec<i128>]) -> Result<(Matrix, Vec<Matrix>)> {
    if g.len() != 3 {
        return Err(Error::UnsupportedDimension(g.len()));
    }
    if !arith::is_positive_definite(g) {
        return Err(Error::NotPositiveDefinite);
    }
    let pre = lattice::pair_reduce(g);
    let g0 = gram_of(g, &pre);
    let bound = g0.iter().enumerate().map(|(i, r)| r[i]).max().unwrap_or(0);
    // Vectors with x·G0·xᵀ <= bound, in G0 coordinates.
    let mut short: Vec<(i128, Vec<i128>)> = lattice::short_vectors2(&g0, bound, SEARCH_POINTS)?
        .into_iter()
        .filter(|(n, _)| *n > 0)
        .collect();
    short.sort();

    let mu1 = short[0].0;
    let firsts: Vec<&Vec<i128>> = short.iter().filter(|(n, _)| *n == mu1).map(|(_, v)| v).collect();

    let mut best: Option<Vec<Vec<i128>>> = None;
    let mut bases: Vec<Vec<Vec<i128>>> = Vec::new();
    for b1 in &firsts {
        let pair_ok = |v: &Vec<i128>| {
            let c = cross(b1, v);
            c.iter().fold(0i128, |acc, &t| num_integer::gcd(acc, t)) == 1
        };
        let Some(mu2) = short.iter().find(|(_, v)| pair_ok(v)).map(|(n, _)| *n) else {
            continue;
        };
        for (_, b2) in short.iter().filter(|(n, v)| *n == mu2 && pair_ok(v)) {
            let c = cross(b1, b2);
            let det_with = |v: &Vec<i128>| c[0] * v[0] + c[1] * v[1] + c[2] * v[2];
            let Some(mu3) = short.iter().find(|(_, v)| det_with(v).abs() == 1).map(|(n, _)| *n) else {
                continue;
            };
            for (_, b3) in short.iter().filter(|(n, v)| *n == mu3 && det_with(v).abs() == 1) {
                let local = vec![b1.to_vec(), b2.clone(), b3.clone()];
                let t = arith::mat_mul(&local, &pre);
                let red = gram_of(g, &t);
                let better = match &best {
                    None => true,
                    Some(cur) => canonical_key(&red) < canonical_key(cur),
                };
                if better {
                    best = Some(red.clone());
                    bases.clear();
                }
                if best.as_ref() == Some(&red) {
                    bases.push(t);
                }
            }
        }
    }
    let best = best.ok_or_else(|| Error::Internal("no reduced basis found".into()))?;
    debug_assert!(is_minkowski_reduced(&best));
    Ok((best, bases))
}

fn require_ternary(f: &QuadPoly) -> Result<()> {
    if f.dim() != 3 {
        return Err(Error::UnsupportedDimension(f.dim()));
    }
    if !f.is_positive_definite() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(())
}

/// Output of [`minkowski_reduce`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reduction {
    pub reduced: QuadPoly,
    pub transform: AffineTransform,
}

/// Canonical reduced polynomial equivalent to `f`, with the transform `t`
/// satisfying `reduced(x) = f(x·T + x₀)`.
pub fn minkowski_reduce(f: &QuadPoly) -> Result<Reduction> {
    require_ternary(f)?;
    if !f.is_integer_valued() {
        return Err(Error::NotIntegerValued);
    }
    let (_, bases) = reduce_form(f.gram2())?;
    let (_, minimizers) = f.minimizers(SEARCH_POINTS)?;
    let mut best: Option<Reduction> = None;
    for t in &bases {
        for x0 in &minimizers {
            let tr = AffineTransform { matrix: t.clone(), shift: x0.clone() };
            let g = f.apply_transform(&tr)?;
            let better = match &best {
                None => true,
                Some(b) => g.lin2() < b.reduced.lin2(),
            };
            if better {
                best = Some(Reduction { reduced: g, transform: tr });
            }
        }
    }
    best.ok_or_else(|| Error::Internal("reduction produced no candidate".into()))
}

/// Quadratic part Minkowski reduced and minimum attained at the origin.
pub fn is_reduced(f: &QuadPoly) -> Result<bool> {
    if f.dim() != 3 {
        return Err(Error::UnsupportedDimension(f.dim()));
    }
    if !is_minkowski_reduced(f.gram2()) {
        return Ok(false);
    }
    let c = f.complete_with(SEARCH_POINTS)?;
    Ok(c.int_min == f.evaluate(&[0, 0, 0])?)
}

/// A transform `t` with `g(x) = f(x·T + x₀)`, if `f` and `g` are equivalent.
pub fn equivalence(f: &QuadPoly, g: &QuadPoly) -> Result<Option<AffineTransform>> {
    require_ternary(f)?;
    require_ternary(g)?;
    let rf = minkowski_reduce(f)?;
    let rg = minkowski_reduce(g)?;
    if rf.reduced != rg.reduced {
        return Ok(None);
    }
    // canon = f∘a = g∘b, hence g = f∘(b⁻¹ then a).
    let t = rg.transform.inverse()?.then(&rf.transform);
    debug_assert_eq!(&f.apply_transform(&t)?, g);
    Ok(Some(t))
}

pub fn equivalent(f: &QuadPoly, g: &QuadPoly) -> Result<bool> {
    Ok(equivalence(f, g)?.is_some())
}

/// `Q(x) >= (Q(e₁)x₁² + Q(e₂)x₂² + Q(e₃)x₃²)/6`, in exact integers.
pub fn diagonal_bound_holds(g: &[Vec<i128>], x: &[i128]) -> bool {
    let lhs = 6 * quad_value2(g, x);
    let rhs: i128 = (0..x.len()).map(|i| g[i][i] * x[i] * x[i]).sum();
    lhs >= rhs
}

/// `2|B(v, eᵢ)| <= Q(eᵢ)` for the completion vector `v` of `f`.
pub fn linear_bound_holds(f: &QuadPoly) -> bool {
    (0..f.dim()).all(|i| f.lin2()[i].abs() <= f.gram2()[i][i])
}
