//! Integral quadratic polynomials `f(x) = (x·G·xᵀ + L·x)/2 + c`.
//!
//! Both the Gram matrix `G` and the linear part `L` are stored doubled so
//! that every coefficient is an integer; `f` is integer-valued exactly when
//! `Gᵢᵢ ≡ Lᵢ (mod 2)` for every `i`.

use std::fmt;
use std::ops::ControlFlow;
use std::str::FromStr;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::arith::{self, int, Meter, Rational};
use crate::enumerate::{self, Ellipsoid};
use crate::error::{Error, Result};
use crate::triangular::TriangularForm;

pub const MAX_VARS: usize = 8;

/// An `n`-variable quadratic polynomial with doubled integer coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPoly", into = "RawPoly")]
pub struct QuadPoly {
    gram2: Vec<Vec<i128>>,
    lin2: Vec<i128>,
    constant: i128,
}

#[derive(Serialize, Deserialize)]
struct RawPoly {
    n: usize,
    #[serde(rename = "G")]
    g: Vec<Vec<i128>>,
    #[serde(rename = "L")]
    l: Vec<i128>,
    c: i128,
}

impl TryFrom<RawPoly> for QuadPoly {
    type Error = Error;
    fn try_from(raw: RawPoly) -> Result<Self> {
        if raw.g.len() != raw.n {
            return Err(Error::DimensionMismatch { expected: raw.n, got: raw.g.len() });
        }
        QuadPoly::new(raw.g, raw.l, raw.c)
    }
}

impl From<QuadPoly> for RawPoly {
    fn from(p: QuadPoly) -> Self {
        RawPoly { n: p.dim(), g: p.gram2, l: p.lin2, c: p.constant }
    }
}

impl QuadPoly {
    /// Builds `f(x) = (x·G·xᵀ + L·x)/2 + c` from the doubled data.
    pub fn new(gram2: Vec<Vec<i128>>, lin2: Vec<i128>, constant: i128) -> Result<Self> {
        let n = gram2.len();
        if n == 0 || n > MAX_VARS {
            return Err(Error::UnsupportedDimension(n));
        }
        for row in &gram2 {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
        }
        if lin2.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: lin2.len() });
        }
        for i in 0..n {
            for j in 0..i {
                if gram2[i][j] != gram2[j][i] {
                    return Err(Error::NotSymmetric);
                }
            }
        }
        enumerate::check_magnitude(&gram2)?;
        let big = lin2.iter().chain(std::iter::once(&constant)).map(|x| x.abs()).max().unwrap_or(0);
        if big > 1i128 << 60 {
            return Err(Error::CoefficientTooLarge(big));
        }
        Ok(QuadPoly { gram2, lin2, constant })
    }

    /// The pure quadratic form `x·G·xᵀ/2`.
    pub fn form(gram2: Vec<Vec<i128>>) -> Result<Self> {
        let n = gram2.len();
        QuadPoly::new(gram2, vec![0; n], 0)
    }

    /// Diagonal form `Σ aᵢ xᵢ²`.
    pub fn diagonal(coeffs: &[i128]) -> Result<Self> {
        let n = coeffs.len();
        let g = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 2 * coeffs[i] } else { 0 }).collect())
            .collect();
        QuadPoly::form(g)
    }

    pub fn dim(&self) -> usize {
        self.gram2.len()
    }

    pub fn gram2(&self) -> &[Vec<i128>] {
        &self.gram2
    }

    pub fn lin2(&self) -> &[i128] {
        &self.lin2
    }

    pub fn constant(&self) -> i128 {
        self.constant
    }

    pub fn with_constant(&self, c: i128) -> Self {
        QuadPoly { constant: c, ..self.clone() }
    }

    fn check_dim(&self, x: &[i128]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    /// `2·f(x)`, always an integer.
    pub fn eval2(&self, x: &[i128]) -> i128 {
        enumerate::quad_value2(&self.gram2, x)
            + self.lin2.iter().zip(x).map(|(l, xi)| l * xi).sum::<i128>()
            + 2 * self.constant
    }

    /// Exact value `f(x)`.
    pub fn evaluate(&self, x: &[i128]) -> Result<Rational> {
        self.check_dim(x)?;
        Ok(Rational::new(self.eval2(x), 2))
    }

    /// `∂f/∂xᵢ` at `x`, doubled: `2(G·x)ᵢ + Lᵢ`.
    pub fn gradient2(&self, x: &[i128]) -> Vec<i128> {
        self.gram2
            .iter()
            .zip(&self.lin2)
            .map(|(row, l)| 2 * row.iter().zip(x).map(|(g, xi)| g * xi).sum::<i128>() + l)
            .collect()
    }

    /// Integer-valuedness on `c`, `f(eᵢ)` and `f(eᵢ + eⱼ)`; these points
    /// determine a quadratic polynomial.
    pub fn is_integer_valued(&self) -> bool {
        let n = self.dim();
        let mut x = vec![0i128; n];
        if self.eval2(&x) % 2 != 0 {
            return false;
        }
        for i in 0..n {
            for j in i..n {
                x[i] = 1;
                x[j] = 1;
                let odd = self.eval2(&x) % 2 != 0;
                x[i] = 0;
                x[j] = 0;
                if odd {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_positive_definite(&self) -> bool {
        arith::is_positive_definite(&self.gram2)
    }

    /// Completes the square: `f(x) = Q(x + v) + m_f` and finds the minimum
    /// over integer vectors.
    pub fn complete(&self) -> Result<Completion> {
        self.complete_with(u64::MAX)
    }

    pub fn complete_with(&self, max_points: u64) -> Result<Completion> {
        if !self.is_positive_definite() {
            return Err(Error::NotPositiveDefinite);
        }
        let rhs: Vec<Rational> = self.lin2.iter().map(|&l| Rational::new(l, 2)).collect();
        let v = arith::solve_rational(&self.gram2, &rhs).ok_or(Error::NotPositiveDefinite)?;
        let qv = enumerate::quad_value(&self.gram2, &v);
        let real_min = int(self.constant) - qv;
        let ell = Ellipsoid::new(&self.gram2)?;
        let mut meter = Meter::new(max_points, "integer minimum search");
        let mut best: Option<(Rational, Vec<i128>)> = None;
        // f(x) <= f(0) <=> Q(x + v) <= Q(v)
        ell.for_each(&v, qv, &mut meter, |x, q| {
            let val = q + real_min;
            let better = match &best {
                None => true,
                Some((b, bx)) => val < *b || (val == *b && x < bx.as_slice()),
            };
            if better {
                best = Some((val, x.to_vec()));
            }
            ControlFlow::Continue(())
        })?;
        let (int_min, argmin) = best.ok_or_else(|| Error::Internal("empty minimum search".into()))?;
        Ok(Completion { center: v, real_min, int_min, argmin })
    }

    /// All integer vectors at which `f` attains its integer minimum.
    pub fn minimizers(&self, max_points: u64) -> Result<(Rational, Vec<Vec<i128>>)> {
        let comp = self.complete_with(max_points)?;
        let ell = Ellipsoid::new(&self.gram2)?;
        let mut meter = Meter::new(max_points, "minimizer search");
        let mut out = Vec::new();
        let target = comp.int_min - comp.real_min;
        ell.for_each(&comp.center, target, &mut meter, |x, q| {
            if q == target {
                out.push(x.to_vec());
            }
            ControlFlow::Continue(())
        })?;
        out.sort();
        Ok((comp.int_min, out))
    }

    /// Visits every integer `x` with `f(x) <= bound`.
    pub fn for_each_at_most<F>(&self, bound: Rational, max_points: u64, mut visit: F) -> Result<()>
    where
        F: FnMut(&[i128], Rational) -> ControlFlow<()>,
    {
        if !self.is_positive_definite() {
            return Err(Error::NotPositiveDefinite);
        }
        let rhs: Vec<Rational> = self.lin2.iter().map(|&l| Rational::new(l, 2)).collect();
        let v = arith::solve_rational(&self.gram2, &rhs).ok_or(Error::NotPositiveDefinite)?;
        let real_min = int(self.constant) - enumerate::quad_value(&self.gram2, &v);
        let ell = Ellipsoid::new(&self.gram2)?;
        let mut meter = Meter::new(max_points, "ellipsoid enumeration");
        ell.for_each(&v, bound - real_min, &mut meter, |x, q| visit(x, q + real_min))?;
        Ok(())
    }

    /// Exact global representation test by ellipsoid enumeration.
    pub fn represents(&self, a: i128, max_points: u64) -> Result<Option<Vec<i128>>> {
        let target = int(a);
        let mut found = None;
        self.for_each_at_most(target, max_points, |x, val| {
            if val == target {
                found = Some(x.to_vec());
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })?;
        Ok(found)
    }

    /// `g(x) = f(x·T + x₀)`.
    pub fn apply_transform(&self, t: &AffineTransform) -> Result<QuadPoly> {
        let n = self.dim();
        if t.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: t.dim() });
        }
        let tm = &t.matrix;
        let g = arith::mat_mul(&arith::mat_mul(tm, &self.gram2), &arith::transpose(tm));
        let gx0: Vec<i128> = self
            .gram2
            .iter()
            .map(|row| row.iter().zip(&t.shift).map(|(a, b)| a * b).sum())
            .collect();
        let l: Vec<i128> = (0..n)
            .map(|i| (0..n).map(|j| tm[i][j] * (2 * gx0[j] + self.lin2[j])).sum())
            .collect();
        let c2 = self.eval2(&t.shift);
        if c2 % 2 != 0 {
            return Err(Error::NotIntegerValued);
        }
        QuadPoly::new(g, l, c2 / 2)
    }
}

impl fmt::Display for QuadPoly {
    /// The `quadpoly n=.. G=.. L=.. c=..` text form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = serde_json::to_string(&self.gram2).map_err(|_| fmt::Error)?;
        let l = serde_json::to_string(&self.lin2).map_err(|_| fmt::Error)?;
        write!(f, "quadpoly n={} G={} L={} c={}", self.dim(), g, l, self.constant)
    }
}

impl FromStr for QuadPoly {
    type Err = Error;

    /// Accepts the `quadpoly` text form, its JSON equivalent, or `tri a,b,c`.
    fn from_str(s: &str) -> Result<Self> {
        let lead = s.len() - s.trim_start().len();
        let t = s.trim();
        if t.starts_with('{') {
            return serde_json::from_str(t).map_err(|e| Error::parse(lead + e.column().saturating_sub(1), e.to_string()));
        }
        if let Some(rest) = t.strip_prefix("tri") {
            let tf: TriangularForm = rest.trim().parse().map_err(|e| match e {
                Error::Parse { pos, msg } => Error::parse(pos + lead + 3 + (rest.len() - rest.trim_start().len()), msg),
                other => other,
            })?;
            return Ok(tf.to_poly());
        }
        let Some(rest) = t.strip_prefix("quadpoly") else {
            return Err(Error::parse(lead, "expected `quadpoly`, `tri` or a JSON object"));
        };
        parse_fields(rest, lead + "quadpoly".len())
    }
}

fn parse_fields(body: &str, offset: usize) -> Result<QuadPoly> {
    let bytes = body.as_bytes();
    let mut i = 0;
    let (mut n, mut g, mut l, mut c) = (None, None, None, None);
    loop {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i >= bytes.len() {
            break;
        }
        let key_start = i;
        while i < bytes.len() && bytes[i] != b'=' && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i >= bytes.len() || bytes[i] != b'=' {
            return Err(Error::parse(offset + key_start, "expected `key=value`"));
        }
        let key = &body[key_start..i];
        i += 1;
        let val_start = i;
        if bytes.get(i) == Some(&b'[') {
            let mut depth = 0i32;
            while i < bytes.len() {
                match bytes[i] {
                    b'[' => depth += 1,
                    b']' => {
                        depth -= 1;
                        if depth == 0 {
                            i += 1;
                            break;
                        }
                    }
                    _ => {}
                }
                i += 1;
            }
            if depth != 0 {
                return Err(Error::parse(offset + val_start, "unbalanced brackets"));
            }
        } else {
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                i += 1;
            }
        }
        let raw = &body[val_start..i];
        let at = offset + val_start;
        let bad = |e: serde_json::Error| Error::parse(at, format!("bad value for `{key}`: {e}"));
        match key {
            "n" => n = Some(raw.parse::<usize>().map_err(|e| Error::parse(at, e.to_string()))?),
            "G" => g = Some(serde_json::from_str::<Vec<Vec<i128>>>(raw).map_err(bad)?),
            "L" => l = Some(serde_json::from_str::<Vec<i128>>(raw).map_err(bad)?),
            "c" => c = Some(raw.parse::<i128>().map_err(|e| Error::parse(at, e.to_string()))?),
            other => return Err(Error::parse(offset + key_start, format!("unknown field `{other}`"))),
        }
    }
    let end = offset + body.len();
    let g = g.ok_or_else(|| Error::parse(end, "missing field `G`"))?;
    let n = n.unwrap_or(g.len());
    if n != g.len() {
        return Err(Error::DimensionMismatch { expected: n, got: g.len() });
    }
    let l = l.unwrap_or_else(|| vec![0; n]);
    QuadPoly::new(g, l, c.unwrap_or(0))
}

/// Completed-square data: `f(x) = Q(x + center) + real_min`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    /// The vector `v` with `L(x) = 2B(v, x)`.
    pub center: Vec<Rational>,
    /// Minimum over real vectors, `c − Q(v)`.
    pub real_min: Rational,
    /// Minimum over integer vectors.
    pub int_min: Rational,
    /// Lexicographically least integer vector attaining `int_min`.
    pub argmin: Vec<i128>,
}

/// `x ↦ x·T + x₀` with `T` unimodular.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AffineTransform {
    pub matrix: Vec<Vec<i128>>,
    pub shift: Vec<i128>,
}

impl AffineTransform {
    pub fn new(matrix: Vec<Vec<i128>>, shift: Vec<i128>) -> Result<Self> {
        let n = matrix.len();
        if matrix.iter().any(|r| r.len() != n) || shift.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: shift.len() });
        }
        let d = arith::det(&matrix);
        if d.abs() != 1 {
            return Err(Error::NotUnimodular(d));
        }
        Ok(AffineTransform { matrix, shift })
    }

    pub fn identity(n: usize) -> Self {
        AffineTransform { matrix: arith::identity(n), shift: vec![0; n] }
    }

    pub fn translation(shift: Vec<i128>) -> Self {
        AffineTransform { matrix: arith::identity(shift.len()), shift }
    }

    pub fn dim(&self) -> usize {
        self.matrix.len()
    }

    pub fn apply(&self, x: &[i128]) -> Vec<i128> {
        let n = self.dim();
        (0..n)
            .map(|j| (0..n).map(|i| x[i] * self.matrix[i][j]).sum::<i128>() + self.shift[j])
            .collect()
    }

    /// `self` followed by `next`: `x ↦ next(self(x))`.
    ///
    /// Note `f.apply_transform(a).apply_transform(b) == f.apply_transform(b.then(a))`.
    pub fn then(&self, next: &AffineTransform) -> AffineTransform {
        let matrix = arith::mat_mul(&self.matrix, &next.matrix);
        let shift = next.apply(&self.shift);
        AffineTransform { matrix, shift }
    }

    pub fn inverse(&self) -> Result<AffineTransform> {
        let inv = arith::unimodular_inverse(&self.matrix)?;
        let n = self.dim();
        let shift = (0..n)
            .map(|j| -(0..n).map(|i| self.shift[i] * inv[i][j]).sum::<i128>())
            .collect();
        Ok(AffineTransform { matrix: inv, shift })
    }
}

impl Completion {
    pub fn is_consistent(&self, f: &QuadPoly) -> bool {
        let n = f.dim();
        (0..n).all(|i| {
            let gv: Rational = (0..n).map(|j| int(f.gram2[i][j]) * self.center[j]).fold(Rational::zero(), |a, b| a + b);
            gv == Rational::new(f.lin2[i], 2)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    #[test]
    fn evaluate_examples() {
        let tri: QuadPoly = "tri 1".parse().unwrap();
        assert_eq!(tri.evaluate(&[3]).unwrap(), int(6));
        let sq = QuadPoly::diagonal(&[1, 1, 1]).unwrap();
        assert_eq!(sq.evaluate(&[1, 1, 1]).unwrap(), int(3));
        let f = QuadPoly::new(vec![vec![2]], vec![-4], 0).unwrap();
        assert_eq!(f.evaluate(&[1]).unwrap(), int(-1));
        assert!(matches!(f.evaluate(&[1, 2]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn integer_valued_examples() {
        assert!("tri 1".parse::<QuadPoly>().unwrap().is_integer_valued());
        let half = QuadPoly::new(vec![vec![1]], vec![0], 0).unwrap();
        assert!(!half.is_integer_valued());
        assert_eq!(half.evaluate(&[1]).unwrap(), rat(1, 2));
        assert!("tri 1,1,1".parse::<QuadPoly>().unwrap().is_integer_valued());
    }

    #[test]
    fn completion_examples() {
        let f = QuadPoly::new(vec![vec![2]], vec![-4], 0).unwrap();
        let c = f.complete().unwrap();
        assert_eq!(c.center, vec![int(-1)]);
        assert_eq!(c.real_min, int(-1));
        assert_eq!(c.int_min, int(-1));

        let t: QuadPoly = "tri 1,1,1".parse().unwrap();
        let c = t.complete().unwrap();
        assert_eq!(c.center, vec![rat(1, 2); 3]);
        assert_eq!(c.real_min, rat(-3, 8));
        assert_eq!(c.int_min, int(0));
        assert!(c.is_consistent(&t));

        let f = QuadPoly::new(vec![vec![2, 0], vec![0, 2]], vec![0, 4], 5).unwrap();
        let c = f.complete().unwrap();
        assert_eq!(c.center, vec![int(0), int(1)]);
        assert_eq!(c.real_min, int(4));
        assert_eq!(c.int_min, int(4));
        assert_eq!(c.argmin, vec![0, -1]);
    }

    #[test]
    fn complete_rejects_indefinite() {
        let f = QuadPoly::new(vec![vec![2, 4], vec![4, 2]], vec![0, 0], 0).unwrap();
        assert_eq!(f.complete().unwrap_err(), Error::NotPositiveDefinite);
    }

    #[test]
    fn transform_examples() {
        let f = QuadPoly::new(vec![vec![2]], vec![4], 1).unwrap(); // (x+1)^2
        assert_eq!(f.apply_transform(&AffineTransform::identity(1)).unwrap(), f);
        let g = f.apply_transform(&AffineTransform::translation(vec![1])).unwrap();
        // (x+2)^2 = x^2 + 4x + 4
        assert_eq!(g, QuadPoly::new(vec![vec![2]], vec![8], 4).unwrap());
        assert_eq!(g.evaluate(&[0]).unwrap(), f.evaluate(&[1]).unwrap());
        assert!(matches!(
            AffineTransform::new(vec![vec![2]], vec![0]),
            Err(Error::NotUnimodular(2))
        ));
    }

    #[test]
    fn transform_composition_and_inverse() {
        let f: QuadPoly = "quadpoly n=3 G=[[4,1,0],[1,6,2],[0,2,8]] L=[2,-4,2] c=7".parse().unwrap();
        let a = AffineTransform::new(vec![vec![1, 2, 0], vec![0, 1, 0], vec![1, 1, 1]], vec![1, 0, -2]).unwrap();
        let b = AffineTransform::new(vec![vec![0, 1, 0], vec![1, 0, 0], vec![0, 3, 1]], vec![0, 5, 1]).unwrap();
        let lhs = f.apply_transform(&a).unwrap().apply_transform(&b).unwrap();
        assert_eq!(lhs, f.apply_transform(&b.then(&a)).unwrap());
        let back = f.apply_transform(&a).unwrap().apply_transform(&a.inverse().unwrap()).unwrap();
        assert_eq!(back, f);
        for x in [[0, 0, 0], [1, -2, 3], [5, 1, -1]] {
            assert_eq!(b.then(&a).apply(&x), a.apply(&b.apply(&x)));
        }
    }

    #[test]
    fn text_format_round_trip() {
        let src = "quadpoly n=3 G=[[2,0,0],[0,2,0],[0,0,2]] L=[1,1,1] c=0";
        let f: QuadPoly = src.parse().unwrap();
        assert_eq!(f.to_string(), src);
        let json = serde_json::to_string(&f).unwrap();
        assert_eq!(json, r#"{"n":3,"G":[[2,0,0],[0,2,0],[0,0,2]],"L":[1,1,1],"c":0}"#);
        assert_eq!(json.parse::<QuadPoly>().unwrap(), f);
        let spaced: QuadPoly = "quadpoly n=2 G=[[2, 1], [1, 2]] c=3".parse().unwrap();
        assert_eq!(spaced.lin2(), &[0, 0]);
    }

    #[test]
    fn parse_errors_carry_positions() {
        match "quadpoly n=2 G=[[2,1],[1,2] c=0".parse::<QuadPoly>() {
            Err(Error::Parse { pos, .. }) => assert_eq!(pos, 15),
            other => panic!("unexpected {other:?}"),
        }
        match "  polynomial".parse::<QuadPoly>() {
            Err(Error::Parse { pos, .. }) => assert_eq!(pos, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!("quadpoly G=[[2,1],[0,2]]".parse::<QuadPoly>(), Err(Error::NotSymmetric)));
        assert!(matches!("quadpoly n=3 G=[[2]]".parse::<QuadPoly>(), Err(Error::DimensionMismatch { .. })));
    }
}
