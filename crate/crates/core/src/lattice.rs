//! Positive definite integral lattices and cosets `M + v`.

use std::ops::ControlFlow;

use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{self, int, Meter, Rational};
use crate::enumerate::{quad_value, quad_value2, Ellipsoid};
use crate::error::{Error, Result};

pub const MAX_RANK: usize = 4;
pub const DEFAULT_SHIFT_DENOMINATOR: i128 = 4;
const ENUM_POINTS: u64 = 50_000_000;

/// Pairwise size reduction with sorting: returns rows `T` such that
/// `T·G·Tᵀ` has no off-diagonal entry exceeding half the smaller diagonal.
pub fn pair_reduce(g: &[Vec<i128>]) -> Vec<Vec<i128>> {
    let n = g.len();
    let mut t = arith::identity(n);
    loop {
        let mut changed = false;
        let gram = arith::mat_mul(&arith::mat_mul(&t, g), &arith::transpose(&t));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| gram[i][i]);
        if order.iter().enumerate().any(|(k, &i)| k != i) {
            t = order.iter().map(|&i| t[i].clone()).collect();
            continue;
        }
        'outer: for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (gij, gii) = (gram[i][j], gram[i][i]);
                if 2 * gij.abs() > gii {
                    // nearest integer to gij / gii
                    let q = Integer::div_floor(&(2 * gij + gii), &(2 * gii));
                    let bi = t[i].clone();
                    for (tj, b) in t[j].iter_mut().zip(&bi) {
                        *tj -= q * b;
                    }
                    changed = true;
                    break 'outer;
                }
            }
        }
        if !changed {
            return t;
        }
    }
}

/// All `x` with `x·G·xᵀ <= bound2`, paired with `x·G·xᵀ`.
pub fn short_vectors2(g: &[Vec<i128>], bound2: i128, max_points: u64) -> Result<Vec<(i128, Vec<i128>)>> {
    let ell = Ellipsoid::new(g)?;
    let zero = vec![Rational::zero(); g.len()];
    let mut meter = Meter::new(max_points, "short vector enumeration");
    let mut out = Vec::new();
    ell.for_each(&zero, Rational::new(bound2, 2), &mut meter, |x, _| {
        out.push((quad_value2(g, x), x.to_vec()));
        ControlFlow::Continue(())
    })?;
    out.sort();
    Ok(out)
}

/// A positive definite lattice given by its doubled Gram matrix `2·B(eᵢ, eⱼ)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<i128>>", into = "Vec<Vec<i128>>")]
pub struct IntegralLattice {
    gram2: Vec<Vec<i128>>,
}

impl TryFrom<Vec<Vec<i128>>> for IntegralLattice {
    type Error = Error;
    fn try_from(g: Vec<Vec<i128>>) -> Result<Self> {
        IntegralLattice::new(g)
    }
}

impl From<IntegralLattice> for Vec<Vec<i128>> {
    fn from(l: IntegralLattice) -> Self {
        l.gram2
    }
}

impl IntegralLattice {
    pub fn new(gram2: Vec<Vec<i128>>) -> Result<Self> {
        let n = gram2.len();
        if n == 0 || n > MAX_RANK {
            return Err(Error::UnsupportedDimension(n));
        }
        if gram2.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: gram2.iter().map(Vec::len).find(|&l| l != n).unwrap_or(n) });
        }
        if (0..n).any(|i| (0..i).any(|j| gram2[i][j] != gram2[j][i])) {
            return Err(Error::NotSymmetric);
        }
        crate::enumerate::check_magnitude(&gram2)?;
        if !arith::is_positive_definite(&gram2) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(IntegralLattice { gram2 })
    }

    /// From an integral Gram matrix `B(eᵢ, eⱼ)`.
    pub fn from_gram(gram: &[Vec<i128>]) -> Result<Self> {
        IntegralLattice::new(gram.iter().map(|r| r.iter().map(|x| 2 * x).collect()).collect())
    }

    /// The diagonal lattice `⟨a₁, …, aₙ⟩`.
    pub fn diagonal(diag: &[i128]) -> Result<Self> {
        let n = diag.len();
        IntegralLattice::new(
            (0..n).map(|i| (0..n).map(|j| if i == j { 2 * diag[i] } else { 0 }).collect()).collect(),
        )
    }

    pub fn rank(&self) -> usize {
        self.gram2.len()
    }

    pub fn gram2(&self) -> &[Vec<i128>] {
        &self.gram2
    }

    /// Discriminant `det(B(eᵢ, eⱼ))`.
    pub fn discriminant(&self) -> Rational {
        Rational::new(arith::det(&self.gram2), 1 << self.rank())
    }

    pub fn norm(&self, x: &[i128]) -> Rational {
        Rational::new(quad_value2(&self.gram2, x), 2)
    }

    /// All vectors with `Q(x) <= bound`, sorted by value then coordinates.
    /// The zero vector is included.
    pub fn shortest_vectors(&self, bound: Rational) -> Result<Vec<(Vec<i128>, Rational)>> {
        let b2 = arith::floor(&(bound * 2));
        Ok(short_vectors2(&self.gram2, b2, ENUM_POINTS)?
            .into_iter()
            .map(|(n2, x)| (x, Rational::new(n2, 2)))
            .collect())
    }
}

/// A coset `M + v` with `v` a rational vector in the coordinates of `M`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coset {
    pub lattice: IntegralLattice,
    pub shift: Vec<Rational>,
}

impl Coset {
    pub fn new(lattice: IntegralLattice, shift: Vec<Rational>) -> Result<Self> {
        Coset::with_denominator_cap(lattice, shift, DEFAULT_SHIFT_DENOMINATOR)
    }

    pub fn with_denominator_cap(lattice: IntegralLattice, shift: Vec<Rational>, cap: i128) -> Result<Self> {
        if shift.len() != lattice.rank() {
            return Err(Error::DimensionMismatch { expected: lattice.rank(), got: shift.len() });
        }
        let den = shift.iter().fold(1i128, |acc, s| acc.lcm(s.denom()));
        if den > cap {
            return Err(Error::invalid(format!("shift denominator {den} exceeds cap {cap}")));
        }
        Ok(Coset { lattice, shift })
    }

    pub fn rank(&self) -> usize {
        self.lattice.rank()
    }

    pub fn denominator(&self) -> i128 {
        self.shift.iter().fold(1i128, |acc, s| acc.lcm(s.denom()))
    }

    /// `Q(x + v)`.
    pub fn value(&self, x: &[i128]) -> Rational {
        let y: Vec<Rational> = x.iter().zip(&self.shift).map(|(&a, &s)| int(a) + s).collect();
        quad_value(&self.lattice.gram2, &y)
    }

    /// `Q(M + v) ⊆ Z`, tested at `0`, `eᵢ` and `eᵢ + eⱼ`.
    pub fn is_integral(&self) -> bool {
        let n = self.rank();
        let mut x = vec![0i128; n];
        if !self.value(&x).is_integer() {
            return false;
        }
        for i in 0..n {
            for j in i..n {
                x[i] += 1;
                x[j] += 1;
                let ok = self.value(&x).is_integer();
                x[i] -= 1;
                x[j] -= 1;
                if !ok {
                    return false;
                }
            }
        }
        true
    }

    /// A vector `x ∈ Zⁿ` with `Q(x + v) = a`, by exact ellipsoid enumeration.
    pub fn represents(&self, a: Rational) -> Result<Option<Vec<i128>>> {
        self.represents_with(a, ENUM_POINTS)
    }

    pub fn represents_with(&self, a: Rational, max_points: u64) -> Result<Option<Vec<i128>>> {
        let ell = Ellipsoid::new(&self.lattice.gram2)?;
        let mut meter = Meter::new(max_points, "coset representation");
        let mut found = None;
        ell.for_each(&self.shift, a, &mut meter, |x, q| {
            if q == a {
                found = Some(x.to_vec());
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })?;
        Ok(found)
    }

    /// Basis rows (scaled by the shift denominator `D`) of `M + Zv`, and `D`.
    pub fn coset_lattice_basis(&self) -> (Vec<Vec<i128>>, i128) {
        let n = self.rank();
        let d = self.denominator();
        let mut gens: Vec<Vec<i128>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { d } else { 0 }).collect())
            .collect();
        gens.push(self.shift.iter().map(|s| (s * d).to_integer()).collect());
        (hermite_basis(gens, n), d)
    }

    /// Gram matrix of the lattice `M + Zv`.
    pub fn coset_lattice(&self) -> Result<IntegralLattice> {
        let (b, d) = self.coset_lattice_basis();
        let g = arith::mat_mul(&arith::mat_mul(&b, &self.lattice.gram2), &arith::transpose(&b));
        let d2 = d * d;
        if g.iter().flatten().any(|x| x % d2 != 0) {
            return Err(Error::invalid("M + Zv is not integral"));
        }
        IntegralLattice::new(g.into_iter().map(|r| r.into_iter().map(|x| x / d2).collect()).collect())
    }

    /// The index `[M + Zv : M]`.
    pub fn index(&self) -> i128 {
        let (b, d) = self.coset_lattice_basis();
        arith::ipow(d, self.rank() as u32).unwrap_or(0) / arith::det(&b).abs()
    }
}

/// Row-style Hermite reduction of integer generators; returns `n` basis rows.
fn hermite_basis(mut rows: Vec<Vec<i128>>, n: usize) -> Vec<Vec<i128>> {
    for col in 0..n {
        // Euclid on column `col` among rows >= col.
        loop {
            let nonzero: Vec<usize> = (col..rows.len()).filter(|&r| rows[r][col] != 0).collect();
            if nonzero.len() <= 1 {
                if let Some(&r) = nonzero.first() {
                    rows.swap(col, r);
                }
                break;
            }
            let piv = *nonzero.iter().min_by_key(|&&r| rows[r][col].abs()).unwrap();
            rows.swap(col, piv);
            for r in col + 1..rows.len() {
                let q = Integer::div_floor(&rows[r][col], &rows[col][col]);
                if q != 0 {
                    let pr = rows[col].clone();
                    for (x, p) in rows[r].iter_mut().zip(&pr) {
                        *x -= q * p;
                    }
                }
            }
        }
        if rows[col][col] < 0 {
            for x in rows[col].iter_mut() {
                *x = -*x;
            }
        }
    }
    rows.truncate(n);
    rows
}

/// Backtracking over images of basis vectors. Calls `visit` with each
/// column matrix `V` satisfying `Vᵀ·G2·V = G1`.
fn isometry_search<F>(g1: &[Vec<i128>], g2: &[Vec<i128>], visit: &mut F) -> Result<ControlFlow<()>>
where
    F: FnMut(&[Vec<i128>]) -> ControlFlow<()>,
{
    let n = g1.len();
    let maxdiag = (0..n).map(|i| g1[i][i]).max().unwrap_or(0);
    let short = short_vectors2(g2, maxdiag, ENUM_POINTS)?;
    let cands: Vec<Vec<&Vec<i128>>> = (0..n)
        .map(|i| short.iter().filter(|(q, _)| *q == g1[i][i]).map(|(_, v)| v).collect())
        .collect();
    let mut chosen: Vec<&Vec<i128>> = Vec::with_capacity(n);
    fn inner(g2: &[Vec<i128>], a: &[i128], b: &[i128]) -> i128 {
        let mut s = 0;
        for (i, row) in g2.iter().enumerate() {
            for (j, &g) in row.iter().enumerate() {
                s += a[i] * g * b[j];
            }
        }
        s
    }
    fn rec<'a, F: FnMut(&[Vec<i128>]) -> ControlFlow<()>>(
        k: usize,
        g1: &[Vec<i128>],
        g2: &[Vec<i128>],
        cands: &[Vec<&'a Vec<i128>>],
        chosen: &mut Vec<&'a Vec<i128>>,
        visit: &mut F,
    ) -> ControlFlow<()> {
        let n = g1.len();
        if k == n {
            let cols: Vec<Vec<i128>> = (0..n).map(|i| (0..n).map(|j| chosen[j][i]).collect()).collect();
            if arith::det(&cols).abs() != 1 {
                return ControlFlow::Continue(());
            }
            return visit(&cols);
        }
        for &v in &cands[k] {
            if (0..k).all(|i| inner(g2, chosen[i], v) == g1[i][k]) {
                chosen.push(v);
                let flow = rec(k + 1, g1, g2, cands, chosen, visit);
                chosen.pop();
                flow?;
            }
        }
        ControlFlow::Continue(())
    }
    Ok(rec(0, g1, g2, &cands, &mut chosen, visit))
}

/// Visits every `U` with `Uᵀ·G₂·U = G₁` (columns are images of `L1`'s basis
/// in the coordinates of `L2`).
pub fn for_each_isometry<F>(l1: &IntegralLattice, l2: &IntegralLattice, mut visit: F) -> Result<()>
where
    F: FnMut(&[Vec<i128>]) -> ControlFlow<()>,
{
    if l1.rank() != l2.rank() {
        return Ok(());
    }
    if arith::det(&l1.gram2) != arith::det(&l2.gram2) {
        return Ok(());
    }
    let p1 = pair_reduce(&l1.gram2);
    let p2 = pair_reduce(&l2.gram2);
    let g1 = arith::mat_mul(&arith::mat_mul(&p1, &l1.gram2), &arith::transpose(&p1));
    let g2 = arith::mat_mul(&arith::mat_mul(&p2, &l2.gram2), &arith::transpose(&p2));
    let p1_inv_t = arith::transpose(&arith::unimodular_inverse(&p1)?);
    let p2_t = arith::transpose(&p2);
    let _ = isometry_search(&g1, &g2, &mut |v: &[Vec<i128>]| {
        let u = arith::mat_mul(&arith::mat_mul(&p2_t, v), &p1_inv_t);
        visit(&u)
    })?;
    Ok(())
}

/// An integer matrix `U` with `Uᵀ·G₂·U = G₁`, if the lattices are isometric.
pub fn isometric(l1: &IntegralLattice, l2: &IntegralLattice) -> Result<Option<Vec<Vec<i128>>>> {
    let mut found = None;
    for_each_isometry(l1, l2, |u| {
        found = Some(u.to_vec());
        ControlFlow::Break(())
    })?;
    Ok(found)
}

/// An isometry `σ` with `σ(M₁) = M₂` and `σ(v₁) ∈ v₂ + M₂`.
pub fn coset_isometric(c1: &Coset, c2: &Coset) -> Result<Option<Vec<Vec<i128>>>> {
    if c1.rank() > 3 || c2.rank() > 3 {
        return Err(Error::UnsupportedDimension(c1.rank().max(c2.rank())));
    }
    let mut found = None;
    for_each_isometry(&c1.lattice, &c2.lattice, |u| {
        let n = u.len();
        let ok = (0..n).all(|i| {
            let img: Rational = (0..n).map(|j| int(u[i][j]) * c1.shift[j]).fold(Rational::zero(), |a, b| a + b);
            (img - c2.shift[i]).is_integer()
        });
        if ok {
            found = Some(u.to_vec());
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    Ok(found)
}

/// `Uᵀ·G₂·U == G₁` and `|det U| = 1`.
pub fn verify_isometry(l1: &IntegralLattice, l2: &IntegralLattice, u: &[Vec<i128>]) -> bool {
    let lhs = arith::mat_mul(&arith::mat_mul(&arith::transpose(u), &l2.gram2), u);
    lhs == l1.gram2 && arith::det(u).abs() == 1
}

/// Half of `Rational::one()`; convenience for building shifts.
pub fn half() -> Rational {
    Rational::one() / 2
}
