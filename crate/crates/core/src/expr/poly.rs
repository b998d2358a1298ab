//! Sparse multivariate polynomials with exact rational coefficients.
//!
//! Variables are [`Atom`]s: free symbols or opaque subexpressions
//! (`exp(..)`, `log(..)`, function symbols) whose arguments are already in
//! normal form. Monomials are ordered lexicographically with the smallest
//! atom most significant.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::{Expr, Symbol};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Sym(Symbol),
    Opaque(Expr),
}

impl Atom {
    pub fn to_expr(&self) -> Expr {
        match self {
            Atom::Sym(s) => Expr::Sym(s.clone()),
            Atom::Opaque(e) => e.clone(),
        }
    }

    pub fn as_symbol(&self) -> Option<&Symbol> {
        match self {
            Atom::Sym(s) => Some(s),
            Atom::Opaque(_) => None,
        }
    }
}

/// Power product; sorted by atom, exponents strictly positive.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(Atom, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn atom(a: Atom, e: u32) -> Self {
        if e == 0 {
            Monomial::one()
        } else {
            Monomial(vec![(a, e)])
        }
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factors(&self) -> &[(Atom, u32)] {
        &self.0
    }

    pub fn degree_in(&self, a: &Atom) -> u32 {
        self.0
            .iter()
            .find(|(b, _)| b == a)
            .map(|(_, e)| *e)
            .unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.0[i].0.clone(), self.0[i].1 + other.0[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }

    /// `self / other` if `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::with_capacity(self.0.len());
        let mut j = 0;
        for (a, e) in &self.0 {
            if j < other.0.len() && other.0[j].0 < *a {
                return None;
            }
            if j < other.0.len() && other.0[j].0 == *a {
                let f = other.0[j].1;
                j += 1;
                match e.cmp(&f) {
                    Ordering::Less => return None,
                    Ordering::Equal => continue,
                    Ordering::Greater => out.push((a.clone(), e - f)),
                }
            } else {
                out.push((a.clone(), *e));
            }
        }
        if j < other.0.len() {
            return None;
        }
        Some(Monomial(out))
    }

    /// The monomial with atom `a` removed.
    pub fn without(&self, a: &Atom) -> Monomial {
        Monomial(self.0.iter().filter(|(b, _)| b != a).cloned().collect())
    }

    /// Split into the part over `keep` atoms and the rest.
    pub fn split(&self, keep: &dyn Fn(&Atom) -> bool) -> (Monomial, Monomial) {
        let (a, b): (Vec<_>, Vec<_>) = self.0.iter().cloned().partition(|(x, _)| keep(x));
        (Monomial(a), Monomial(b))
    }

    pub fn to_expr(&self) -> Expr {
        let mut out: Option<Expr> = None;
        for (a, e) in &self.0 {
            let f = a.to_expr().pow(*e as i32);
            out = Some(match out {
                None => f,
                Some(acc) => Expr::Mul(Box::new(acc), Box::new(f)),
            });
        }
        out.unwrap_or_else(Expr::one)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        let (mut i, mut j) = (0, 0);
        loop {
            match (self.0.get(i), other.0.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some((a, ea)), Some((b, eb))) => match a.cmp(b) {
                    // `a` is more significant and absent from `other`.
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Equal => {
                        match ea.cmp(eb) {
                            Ordering::Equal => {}
                            ord => return ord,
                        }
                        i += 1;
                        j += 1;
                    }
                },
            }
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn one() -> Self {
        Poly::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        Poly::term(Monomial::one(), c)
    }

    pub fn int(v: i64) -> Self {
        Poly::constant(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn term(m: Monomial, c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Poly { terms }
    }

    pub fn atom(a: Atom) -> Self {
        Poly::term(Monomial::atom(a, 1), BigRational::one())
    }

    pub fn symbol(s: Symbol) -> Self {
        Poly::atom(Atom::Sym(s))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Some(c)` when the polynomial is a constant (including zero).
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.as_constant().is_some()
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().is_some_and(|c| c.is_one())
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        self.terms
            .keys()
            .flat_map(|m| m.0.iter().map(|(a, _)| a.clone()))
            .collect()
    }

    pub fn contains_atom(&self, a: &Atom) -> bool {
        self.terms.keys().any(|m| m.degree_in(a) > 0)
    }

    pub fn degree_in(&self, a: &Atom) -> u32 {
        self.terms.keys().map(|m| m.degree_in(a)).max().unwrap_or(0)
    }

    /// Leading (largest) term.
    pub fn leading(&self) -> Option<(&Monomial, &BigRational)> {
        self.terms.iter().next_back()
    }

    pub fn leading_coefficient(&self) -> BigRational {
        self.leading()
            .map(|(_, c)| c.clone())
            .unwrap_or_else(BigRational::zero)
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let sum = o.get() + c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
        }
    }

    pub fn scale(&self, k: &BigRational) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect(),
        }
    }

    pub fn mul_term(&self, m: &Monomial, k: &BigRational) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(n, c)| (n.mul(m), c * k)).collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &other.terms {
            for (n, d) in &self.terms {
                out.add_term(n.mul(m), c * d);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut out = Poly::one();
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                out = out.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        out
    }

    /// Coefficients with respect to `a`: degree → polynomial free of `a`.
    pub fn coefficients_in(&self, a: &Atom) -> BTreeMap<u32, Poly> {
        let mut out: BTreeMap<u32, Poly> = BTreeMap::new();
        for (m, c) in &self.terms {
            let d = m.degree_in(a);
            out.entry(d).or_default().add_term(m.without(a), c.clone());
        }
        out.retain(|_, p| !p.is_zero());
        out
    }

    fn leading_coefficient_in(&self, a: &Atom) -> (u32, Poly) {
        self.coefficients_in(a)
            .into_iter()
            .next_back()
            .unwrap_or((0, Poly::zero()))
    }

    /// Group by the monomial over atoms selected by `keep`; the values are
    /// polynomials over the remaining atoms.
    pub fn collect_by(&self, keep: &dyn Fn(&Atom) -> bool) -> BTreeMap<Monomial, Poly> {
        let mut out: BTreeMap<Monomial, Poly> = BTreeMap::new();
        for (m, c) in &self.terms {
            let (kept, rest) = m.split(keep);
            out.entry(kept).or_default().add_term(rest, c.clone());
        }
        out.retain(|_, p| !p.is_zero());
        out
    }

    /// Formal partial derivative.
    pub fn derivative(&self, a: &Atom) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let d = m.degree_in(a);
            if d == 0 {
                continue;
            }
            let rest = m.without(a).mul(&Monomial::atom(a.clone(), d - 1));
            out.add_term(rest, c * BigRational::from_integer(BigInt::from(d)));
        }
        out
    }

    /// Exact quotient, or `None` when `d` does not divide `self`.
    pub fn exact_div(&self, d: &Poly) -> Option<Poly> {
        let (dm, dc) = d.leading()?;
        let (dm, dc) = (dm.clone(), dc.clone());
        let mut r = self.clone();
        let mut q = Poly::zero();
        while let Some((rm, rc)) = r.leading() {
            let m = rm.div(&dm)?;
            let c = rc / &dc;
            r = r.sub(&d.mul_term(&m, &c));
            q.add_term(m, c);
        }
        Some(q)
    }

    /// Scale so the leading coefficient is one.
    pub fn monic(&self) -> Poly {
        match self.leading() {
            None => Poly::zero(),
            Some((_, c)) if c.is_one() => self.clone(),
            Some((_, c)) => self.scale(&c.recip()),
        }
    }

    /// Content with respect to `a`: gcd of the coefficients in `a`.
    pub fn content_in(&self, a: &Atom) -> Poly {
        let mut g = Poly::zero();
        for c in self.coefficients_in(a).values() {
            g = gcd(&g, c);
            if g.is_one() {
                break;
            }
        }
        g
    }

    fn primitive_part_in(&self, a: &Atom) -> Poly {
        let c = self.content_in(a);
        if c.is_zero() {
            return Poly::zero();
        }
        self.exact_div(&c).expect("content divides").monic()
    }

    pub fn to_expr(&self) -> Expr {
        let mut out: Option<Expr> = None;
        for (m, c) in self.terms.iter().rev() {
            let mag = c.abs();
            let body = if m.is_one() {
                Expr::Const(mag.clone())
            } else if mag.is_one() {
                m.to_expr()
            } else {
                Expr::Mul(Box::new(Expr::Const(mag.clone())), Box::new(m.to_expr()))
            };
            out = Some(match out {
                None if c.is_negative() => Expr::Neg(Box::new(body)),
                None => body,
                Some(acc) if c.is_negative() => Expr::Sub(Box::new(acc), Box::new(body)),
                Some(acc) => Expr::Add(Box::new(acc), Box::new(body)),
            });
        }
        out.unwrap_or_else(Expr::zero)
    }
}

/// Greatest common divisor, normalized to leading coefficient one.
///
/// Recursive primitive remainder sequence over the most significant shared
/// atom, with contents handled one level down.
pub fn gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.monic();
    }
    if b.is_zero() {
        return a.monic();
    }
    if a.is_constant() || b.is_constant() {
        return Poly::one();
    }
    let (atoms_a, atoms_b) = (a.atoms(), b.atoms());
    if let Some(x) = atoms_a.difference(&atoms_b).next() {
        return gcd(&a.content_in(x), b);
    }
    if let Some(x) = atoms_b.difference(&atoms_a).next() {
        return gcd(a, &b.content_in(x));
    }
    let x = atoms_a.iter().next().expect("non-constant").clone();
    let (ca, cb) = (a.content_in(&x), b.content_in(&x));
    let pa = a.exact_div(&ca).expect("content divides");
    let pb = b.exact_div(&cb).expect("content divides");
    let c = gcd(&ca, &cb);
    let g = primitive_prs(pa, pb, &x);
    c.mul(&g).monic()
}

fn primitive_prs(a: Poly, b: Poly, x: &Atom) -> Poly {
    let (mut a, mut b) = if a.degree_in(x) >= b.degree_in(x) {
        (a, b)
    } else {
        (b, a)
    };
    loop {
        let r = pseudo_remainder(&a, &b, x);
        if r.is_zero() {
            return b.primitive_part_in(x);
        }
        if r.degree_in(x) == 0 {
            return Poly::one();
        }
        a = b;
        b = r.primitive_part_in(x);
    }
}

fn pseudo_remainder(a: &Poly, b: &Poly, x: &Atom) -> Poly {
    let (db, lb) = b.leading_coefficient_in(x);
    let mut r = a.clone();
    while !r.is_zero() {
        let (dr, lr) = r.leading_coefficient_in(x);
        if dr < db {
            break;
        }
        let shift = Poly::term(Monomial::atom(x.clone(), dr - db), BigRational::one());
        r = lb.mul(&r).sub(&lr.mul(&shift).mul(b));
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(name: &str) -> Poly {
        Poly::symbol(Symbol::param(name))
    }

    #[test]
    fn monomial_order_is_lexicographic() {
        let a = Atom::Sym(Symbol::param("a"));
        let b = Atom::Sym(Symbol::param("b"));
        let a1 = Monomial::atom(a.clone(), 1);
        let b5 = Monomial::atom(b.clone(), 5);
        assert!(a1 > b5);
        assert!(Monomial::atom(a.clone(), 2) > a1.mul(&b5));
        assert!(a1.mul(&b5) > a1);
        assert!(Monomial::one() < b5);
    }

    #[test]
    fn exact_division() {
        let (x, y) = (var("x"), var("y"));
        let p = x.add(&y).mul(&x.sub(&y));
        assert_eq!(p.exact_div(&x.add(&y)).unwrap(), x.sub(&y));
        assert!(p.exact_div(&x.add(&Poly::one())).is_none());
    }

    #[test]
    fn gcd_of_products() {
        let (x, y, z) = (var("x"), var("y"), var("z"));
        let common = x.mul(&y).add(&z.pow(2)).add(&Poly::int(3));
        let a = common.mul(&x.add(&y)).mul(&z);
        let b = common
            .mul(&x.sub(&z))
            .scale(&BigRational::new(3.into(), 7.into()));
        assert_eq!(gcd(&a, &b), common.monic());
        assert!(gcd(&x.add(&Poly::one()), &x.sub(&Poly::one())).is_one());
        assert_eq!(
            gcd(&x.pow(3).mul(&y), &x.pow(2).mul(&y.pow(2))),
            x.pow(2).mul(&y)
        );
    }

    #[test]
    fn coefficients_and_derivative() {
        let (x, y) = (var("x"), var("y"));
        let p = x.pow(2).mul(&y).add(&x.mul(&Poly::int(3))).add(&y);
        let ax = Atom::Sym(Symbol::param("x"));
        let cs = p.coefficients_in(&ax);
        assert_eq!(cs[&2], y);
        assert_eq!(cs[&1], Poly::int(3));
        assert_eq!(cs[&0], y);
        assert_eq!(
            p.derivative(&ax),
            x.mul(&y)
                .scale(&BigRational::from_integer(2.into()))
                .add(&Poly::int(3))
        );
    }
}
