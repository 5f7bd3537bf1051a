//! Scalars over the reals, complex numbers and quaternions, plus the 2x2
//! complex representation of quaternions.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// The ground field (or skew field) of the operator entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldKind {
    #[serde(rename = "real", alias = "R")]
    Real,
    #[serde(rename = "complex", alias = "C")]
    Complex,
    #[serde(rename = "quaternion", alias = "H")]
    Quaternion,
}

impl FieldKind {
    /// Number of real coordinates of one scalar.
    pub fn dim(self) -> usize {
        match self {
            FieldKind::Real => 1,
            FieldKind::Complex => 2,
            FieldKind::Quaternion => 4,
        }
    }

    /// Per-component standard deviation that gives a unit-variance scalar.
    pub fn component_scale(self) -> f64 {
        match self {
            FieldKind::Real => 1.0,
            FieldKind::Complex => std::f64::consts::FRAC_1_SQRT_2,
            FieldKind::Quaternion => 0.5,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            FieldKind::Real => "R",
            FieldKind::Complex => "C",
            FieldKind::Quaternion => "H",
        }
    }
}

/// `a + b i + c j + d k`, with unused slots held at zero for the smaller
/// kinds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldElement {
    kind: FieldKind,
    c: [f64; 4],
}

impl FieldElement {
    pub fn real(a: f64) -> Self {
        FieldElement {
            kind: FieldKind::Real,
            c: [a, 0.0, 0.0, 0.0],
        }
    }

    pub fn complex(a: f64, b: f64) -> Self {
        FieldElement {
            kind: FieldKind::Complex,
            c: [a, b, 0.0, 0.0],
        }
    }

    pub fn quaternion(a: f64, b: f64, c: f64, d: f64) -> Self {
        FieldElement {
            kind: FieldKind::Quaternion,
            c: [a, b, c, d],
        }
    }

    pub fn zero(kind: FieldKind) -> Self {
        FieldElement { kind, c: [0.0; 4] }
    }

    pub fn one(kind: FieldKind) -> Self {
        FieldElement {
            kind,
            c: [1.0, 0.0, 0.0, 0.0],
        }
    }

    /// Builds an element from raw coordinates, dropping the slots the kind
    /// does not use.
    pub fn from_components(kind: FieldKind, comps: [f64; 4]) -> Self {
        let mut c = [0.0; 4];
        c[..kind.dim()].copy_from_slice(&comps[..kind.dim()]);
        FieldElement { kind, c }
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn components(&self) -> [f64; 4] {
        self.c
    }

    pub fn real_part(&self) -> f64 {
        self.c[0]
    }

    pub fn conj(&self) -> Self {
        let [a, b, c, d] = self.c;
        FieldElement {
            kind: self.kind,
            c: [a, -b, -c, -d],
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c.iter().map(|x| x * x).sum()
    }

    pub fn abs(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        let [a, b, c, d] = self.c;
        FieldElement {
            kind: self.kind,
            c: [s * a, s * b, s * c, s * d],
        }
    }

    /// The 2x2 complex matrix `[[a+bi, c+di], [-(c-di), a-bi]]`.
    ///
    /// Panics unless the element is a quaternion.
    pub fn embed(&self) -> Complex2x2 {
        assert_eq!(
            self.kind,
            FieldKind::Quaternion,
            "only quaternions have a 2x2 embedding"
        );
        let [a, b, c, d] = self.c;
        Complex2x2 {
            m: [
                [Complex64::new(a, b), Complex64::new(c, d)],
                [Complex64::new(-c, d), Complex64::new(a, -b)],
            ],
        }
    }

    fn product(&self, rhs: &Self) -> Self {
        assert_eq!(self.kind, rhs.kind, "field kinds differ");
        let [a1, b1, c1, d1] = self.c;
        let [a2, b2, c2, d2] = rhs.c;
        let c = match self.kind {
            FieldKind::Real => [a1 * a2, 0.0, 0.0, 0.0],
            FieldKind::Complex => [a1 * a2 - b1 * b2, a1 * b2 + b1 * a2, 0.0, 0.0],
            FieldKind::Quaternion => [
                a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
                a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
                a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
                a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
            ],
        };
        FieldElement { kind: self.kind, c }
    }
}

impl Mul for FieldElement {
    type Output = FieldElement;

    /// Panics when the operands have different kinds.
    fn mul(self, rhs: Self) -> Self {
        self.product(&rhs)
    }
}

impl Add for FieldElement {
    type Output = FieldElement;

    fn add(self, rhs: Self) -> Self {
        assert_eq!(self.kind, rhs.kind, "field kinds differ");
        let mut c = self.c;
        for (x, y) in c.iter_mut().zip(rhs.c) {
            *x += y;
        }
        FieldElement { kind: self.kind, c }
    }
}

impl Sub for FieldElement {
    type Output = FieldElement;

    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for FieldElement {
    type Output = FieldElement;

    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.c;
        match self.kind {
            FieldKind::Real => write!(f, "{a}"),
            FieldKind::Complex => write!(f, "{a}{b:+}i"),
            FieldKind::Quaternion => write!(f, "{a}{b:+}i{c:+}j{d:+}k"),
        }
    }
}

/// A 2x2 complex matrix, indexed by binary pairs `(h, l)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Complex2x2 {
    pub m: [[Complex64; 2]; 2],
}

impl Complex2x2 {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Complex2x2 {
            m: [[one, zero], [zero, one]],
        }
    }

    pub fn entry(&self, h: usize, l: usize) -> Complex64 {
        self.m[h][l]
    }

    pub fn trace(&self) -> Complex64 {
        self.m[0][0] + self.m[1][1]
    }

    /// Maps an embedded matrix back to its quaternion. Only meaningful for
    /// matrices in the image of [`FieldElement::embed`].
    pub fn to_quaternion(&self) -> FieldElement {
        let p = self.m[0][0];
        let q = self.m[0][1];
        FieldElement::quaternion(p.re, p.im, q.re, q.im)
    }
}

impl Mul for Complex2x2 {
    type Output = Complex2x2;

    fn mul(self, rhs: Self) -> Self {
        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (h, row) in m.iter_mut().enumerate() {
            for (l, out) in row.iter_mut().enumerate() {
                *out = self.m[h][0] * rhs.m[0][l] + self.m[h][1] * rhs.m[1][l];
            }
        }
        Complex2x2 { m }
    }
}

impl Add for Complex2x2 {
    type Output = Complex2x2;

    fn add(self, rhs: Self) -> Self {
        let mut m = self.m;
        for h in 0..2 {
            for l in 0..2 {
                m[h][l] += rhs.m[h][l];
            }
        }
        Complex2x2 { m }
    }
}
