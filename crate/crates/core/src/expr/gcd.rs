//! Multivariate polynomial gcd over ℚ.
//!
//! Recursive primitive pseudo-remainder sequences: pick a variable, split
//! off the content (gcd of coefficients, computed recursively), and run a
//! primitive PRS on the primitive parts. Monomial content is stripped first,
//! which settles the common case of monomial denominators without recursion.


use super::poly::{Mono, Poly, Var};

/// Greatest common divisor, normalized to a monic leading coefficient.
/// `gcd(0, 0) = 0`.
pub fn gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.monic().0;
    }
    if b.is_zero() {
        return a.monic().0;
    }
    if a.is_constant() || b.is_constant() {
        return Poly::one();
    }
    let ma = a.mono_content();
    let mb = b.mono_content();
    let m = ma.gcd(&mb);
    let pa = a.div_mono(&ma).expect("content divides");
    let pb = b.div_mono(&mb).expect("content divides");
    let g = gcd_no_mono(&pa, &pb);
    let one = num_rational::BigRational::from_integer(1.into());
    g.mul_mono(&m, &one).monic().0
}

/// gcd of polynomials with no monomial factor.
fn gcd_no_mono(a: &Poly, b: &Poly) -> Poly {
    if a.is_constant() || b.is_constant() {
        return Poly::one();
    }
    let (an, _) = a.monic();
    let (bn, _) = b.monic();
    if an == bn {
        return an;
    }
    // cheap trial divisions
    if a.len() <= b.len() {
        if b.exact_div(a).is_some() {
            return an;
        }
    } else if a.exact_div(b).is_some() {
        return bn;
    }
    let va = a.vars();
    let vb = b.vars();
    // a variable present in only one operand cannot occur in the gcd
    if let Some(v) = va.symmetric_difference(&vb).next().cloned() {
        return if va.contains(&v) {
            let c = content_in(a, &v);
            gcd(&c, b)
        } else {
            let c = content_in(b, &v);
            gcd(a, &c)
        };
    }
    // choose the shared variable of smallest maximal degree
    let v = va
        .iter()
        .min_by_key(|v| a.degree_in(v).max(b.degree_in(v)))
        .cloned()
        .expect("nonconstant polynomial has a variable");
    let ca = content_in(a, &v);
    let cb = content_in(b, &v);
    let c = gcd(&ca, &cb);
    let pa = a.exact_div(&ca).expect("content divides");
    let pb = b.exact_div(&cb).expect("content divides");
    let g = primitive_prs(pa, pb, &v);
    c.mul(&g).monic().0
}

/// gcd of the coefficients of `p` viewed as a polynomial in `v`.
pub(crate) fn content_in(p: &Poly, v: &Var) -> Poly {
    let parts = p.split_by(v);
    let mut it = parts.into_values();
    let mut g = it.next().unwrap_or_else(Poly::zero);
    for c in it {
        if g.is_constant() && !g.is_zero() {
            return Poly::one();
        }
        g = gcd(&g, &c);
    }
    g.monic().0
}

fn primitive_part(p: &Poly, v: &Var) -> Poly {
    let c = content_in(p, v);
    p.exact_div(&c).expect("content divides").primitive_numeric()
}

/// Pseudo-remainder of `a` by `b` in the variable `v`.
fn prem(a: &Poly, b: &Poly, v: &Var) -> Poly {
    let db = b.degree_in(v);
    let bparts = b.split_by(v);
    let lcb = bparts.get(&db).cloned().unwrap_or_else(Poly::zero);
    let one = num_rational::BigRational::from_integer(1.into());
    let mut r = a.clone();
    loop {
        if r.is_zero() {
            return r;
        }
        let dr = r.degree_in(v);
        if dr < db {
            return r;
        }
        let rparts = r.split_by(v);
        let lcr = rparts.get(&dr).cloned().unwrap_or_else(Poly::zero);
        let shift = Mono::var(v.clone(), dr - db);
        let next = r
            .mul(&lcb)
            .sub(&lcr.mul(&b.mul_mono(&shift, &one)));
        r = next.primitive_numeric();
        debug_assert!(r.is_zero() || r.degree_in(v) < dr || r.degree_in(v) == 0);
    }
}

fn primitive_prs(a: Poly, b: Poly, v: &Var) -> Poly {
    let (mut a, mut b) = if a.degree_in(v) >= b.degree_in(v) {
        (a, b)
    } else {
        (b, a)
    };
    loop {
        if b.is_zero() {
            return a.monic().0;
        }
        if b.degree_in(v) == 0 {
            // a is primitive in v, so only a unit divides both
            return Poly::one();
        }
        let r = prem(&a, &b, v);
        if r.is_zero() {
            return primitive_part(&b, v).monic().0;
        }
        a = b;
        b = primitive_part(&r, v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::coord::Coordinate;
    use num_rational::BigRational;
    use num_traits::Zero;

    fn v(name: &str, i: usize) -> Poly {
        Poly::var(Var::Coord(Coordinate::independent(i, name)))
    }

    fn c(n: i64) -> Poly {
        Poly::constant(BigRational::from_integer(n.into()))
    }

    #[test]
    fn gcd_of_products() {
        let (x, y, t) = (v("x", 1), v("y", 2), v("t", 0));
        let f = x.mul(&x).add(&y.mul(&t)).add(&c(3)); // x^2 + t y + 3
        let g = x.sub(&y); // x - y
        let h = t.add(&x.mul(&y)); // t + x y
        let a = f.mul(&g).mul(&g);
        let b = f.mul(&h).mul(&g);
        let d = gcd(&a, &b);
        assert_eq!(d, f.mul(&g).monic().0);
    }

    #[test]
    fn coprime() {
        let (x, y) = (v("x", 1), v("y", 2));
        let a = x.mul(&x).add(&y.mul(&y));
        let b = x.add(&y);
        assert!(gcd(&a, &b).is_one());
    }

    #[test]
    fn monomial_content() {
        let (x, y) = (v("x", 1), v("y", 2));
        let a = x.pow(3).mul(&y).scale(&BigRational::from_integer(4.into()));
        let b = x.mul(&x).mul(&y.add(&c(1)));
        assert_eq!(gcd(&a, &b), x.mul(&x));
    }

    #[test]
    fn zero_cases() {
        let x = v("x", 1);
        assert_eq!(gcd(&Poly::zero(), &x.scale(&BigRational::from_integer(3.into()))), x);
        assert!(gcd(&Poly::zero(), &Poly::zero()).is_zero());
        assert!(!BigRational::from_integer(1.into()).is_zero());
    }
}
