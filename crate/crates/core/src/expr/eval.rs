//! Floating-point evaluation of canonical expressions.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::Rng;

use super::{Coordinate, ExprError, Expression, Poly, Var};

/// Numeric bindings for opaque functions and their slot derivatives.
pub trait FunctionTable: Sync {
    fn call(&self, name: &str, slots: &[u8], args: &[f64]) -> Option<f64>;
}

/// Binds nothing; any atom evaluates to an unbound-symbol error.
pub struct NoFunctions;

impl FunctionTable for NoFunctions {
    fn call(&self, _: &str, _: &[u8], _: &[f64]) -> Option<f64> {
        None
    }
}

fn to_f64(c: &BigRational) -> f64 {
    c.to_f64().unwrap_or(f64::NAN)
}

impl Expression {
    /// IEEE evaluation with coordinate values supplied by `point`.
    pub fn eval_with<P>(&self, point: &P, fns: &dyn FunctionTable) -> Result<f64, ExprError>
    where
        P: Fn(&Coordinate) -> Option<f64> + ?Sized,
    {
        let n = eval_poly(self.numer(), point, fns)?;
        if self.is_polynomial() {
            return Ok(n);
        }
        let d = eval_poly(self.denom(), point, fns)?;
        if d == 0.0 {
            return Err(ExprError::DivisionByZero);
        }
        Ok(n / d)
    }

    pub fn eval_numeric(
        &self,
        point: &HashMap<Coordinate, f64>,
        fns: &dyn FunctionTable,
    ) -> Result<f64, ExprError> {
        self.eval_with(&|c: &Coordinate| point.get(c).copied(), fns)
    }
}

fn eval_poly<P>(p: &Poly, point: &P, fns: &dyn FunctionTable) -> Result<f64, ExprError>
where
    P: Fn(&Coordinate) -> Option<f64> + ?Sized,
{
    let mut acc = 0.0;
    for (m, c) in p.terms() {
        let mut t = to_f64(c);
        for (v, e) in m.factors() {
            let x = match v {
                Var::Coord(c) => point(c).ok_or_else(|| ExprError::Unbound {
                    symbol: c.label().to_string(),
                })?,
                Var::Atom(a) => {
                    let args = a
                        .args()
                        .iter()
                        .map(|e| e.eval_with(point, fns))
                        .collect::<Result<Vec<_>, _>>()?;
                    fns.call(a.name(), a.slots(), &args)
                        .ok_or_else(|| ExprError::Unbound {
                            symbol: a.to_string(),
                        })?
                }
            };
            t *= x.powi(*e as i32);
        }
        acc += t;
    }
    Ok(acc)
}

#[derive(Debug, Clone)]
enum Slot {
    Coord(usize),
    Atom(usize),
}

#[derive(Debug, Clone)]
struct CompiledAtom {
    name: String,
    slots: Vec<u8>,
    args: Vec<CompiledExpr>,
}

#[derive(Debug, Clone, Default)]
struct CompiledPoly {
    terms: Vec<(f64, Vec<(Slot, i32)>)>,
}

/// An expression lowered to flat float arithmetic over a coordinate vector.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    num: CompiledPoly,
    den: Option<CompiledPoly>,
    atoms: Vec<CompiledAtom>,
}

impl CompiledExpr {
    /// `index` maps each coordinate to its position in the evaluation vector.
    pub fn compile<I>(e: &Expression, index: &I) -> Result<Self, ExprError>
    where
        I: Fn(&Coordinate) -> Option<usize> + ?Sized,
    {
        let mut atoms = Vec::new();
        let mut atom_ids: BTreeMap<Var, usize> = BTreeMap::new();
        let mut lower = |p: &Poly| -> Result<CompiledPoly, ExprError> {
            let mut terms = Vec::with_capacity(p.len());
            for (m, c) in p.terms() {
                let mut fs = Vec::with_capacity(m.factors().len());
                for (v, k) in m.factors() {
                    let slot = match v {
                        Var::Coord(c) => Slot::Coord(index(c).ok_or_else(|| {
                            ExprError::Unbound {
                                symbol: c.label().to_string(),
                            }
                        })?),
                        Var::Atom(a) => {
                            if let Some(&i) = atom_ids.get(v) {
                                Slot::Atom(i)
                            } else {
                                let args = a
                                    .args()
                                    .iter()
                                    .map(|e| CompiledExpr::compile(e, index))
                                    .collect::<Result<Vec<_>, _>>()?;
                                atoms.push(CompiledAtom {
                                    name: a.name().to_string(),
                                    slots: a.slots().to_vec(),
                                    args,
                                });
                                atom_ids.insert(v.clone(), atoms.len() - 1);
                                Slot::Atom(atoms.len() - 1)
                            }
                        }
                    };
                    fs.push((slot, *k as i32));
                }
                terms.push((to_f64(c), fs));
            }
            Ok(CompiledPoly { terms })
        };
        let num = lower(e.numer())?;
        let den = if e.is_polynomial() {
            None
        } else {
            Some(lower(e.denom())?)
        };
        Ok(CompiledExpr { num, den, atoms })
    }

    pub fn eval(&self, x: &[f64], fns: &dyn FunctionTable) -> Result<f64, ExprError> {
        let mut atom_vals = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            let args = a
                .args
                .iter()
                .map(|e| e.eval(x, fns))
                .collect::<Result<Vec<_>, _>>()?;
            let v = fns
                .call(&a.name, &a.slots, &args)
                .ok_or_else(|| ExprError::Unbound {
                    symbol: a.name.clone(),
                })?;
            atom_vals.push(v);
        }
        let ev = |p: &CompiledPoly| {
            p.terms
                .iter()
                .map(|(c, fs)| {
                    fs.iter().fold(*c, |acc, (s, k)| {
                        let v = match s {
                            Slot::Coord(i) => x[*i],
                            Slot::Atom(i) => atom_vals[*i],
                        };
                        acc * if *k == 1 { v } else { v.powi(*k) }
                    })
                })
                .sum::<f64>()
        };
        let n = ev(&self.num);
        match &self.den {
            None => Ok(n),
            Some(d) => {
                let d = ev(d);
                if d == 0.0 {
                    Err(ExprError::DivisionByZero)
                } else {
                    Ok(n / d)
                }
            }
        }
    }

    /// Value of the denominator (1 for polynomials); used to keep samples
    /// away from singular sets.
    pub fn eval_denominator(&self, x: &[f64], fns: &dyn FunctionTable) -> Result<f64, ExprError> {
        match &self.den {
            None => Ok(1.0),
            Some(d) => {
                let e = CompiledExpr {
                    num: d.clone(),
                    den: None,
                    atoms: self.atoms.clone(),
                };
                e.eval(x, fns)
            }
        }
    }
}

/// A function name with the slots it is differentiated in.
type SlotKey = (String, Vec<u8>);

/// Concrete stand-ins for opaque functions: each symbol is bound to a fixed
/// expression in placeholder arguments, and slot derivatives are obtained by
/// exact symbolic differentiation.
pub struct PolyFunctions {
    defs: BTreeMap<String, (Vec<Coordinate>, Expression)>,
    cache: Mutex<HashMap<SlotKey, Arc<CompiledExpr>>>,
}

impl PolyFunctions {
    pub fn new() -> Self {
        PolyFunctions {
            defs: BTreeMap::new(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn placeholder(i: usize) -> Coordinate {
        Coordinate::parameter(10_000 + i, &format!("arg{}", i + 1))
    }

    /// Binds `name` to `body`, written in the placeholders `arg1, arg2, ...`.
    pub fn define(&mut self, name: &str, arity: usize, body: Expression) {
        let slots = (0..arity).map(Self::placeholder).collect();
        self.defs.insert(name.to_string(), (slots, body));
    }

    /// Binds `name` to a random cubic with small rational coefficients.
    pub fn define_random<R: Rng>(&mut self, name: &str, arity: usize, rng: &mut R) {
        let coef = |rng: &mut R| {
            let n: i64 = rng.gen_range(1..=9) * if rng.gen_bool(0.5) { 1 } else { -1 };
            Expression::rational(BigRational::new(n.into(), 10.into()))
        };
        let args: Vec<Expression> = (0..arity)
            .map(|i| Expression::coord(&Self::placeholder(i)))
            .collect();
        let mut body = &Expression::one() + &coef(rng);
        for (i, a) in args.iter().enumerate() {
            body = &body + &(&coef(rng) * a);
            let b = &args[(i + 1) % arity];
            body = &body + &(&(&coef(rng) * a) * b);
            body = &body + &(&(&coef(rng) * a) * &(a * a)).scale(&BigRational::new(1.into(), 5.into()));
        }
        self.define(name, arity, body);
    }

    pub fn is_defined(&self, name: &str) -> bool {
        self.defs.contains_key(name)
    }

    fn compiled(&self, name: &str, slots: &[u8]) -> Option<Arc<CompiledExpr>> {
        let key = (name.to_string(), slots.to_vec());
        if let Some(c) = self.cache.lock().unwrap().get(&key) {
            return Some(c.clone());
        }
        let (params, body) = self.defs.get(name)?;
        let mut e = body.clone();
        for &s in slots {
            e = e.diff(params.get(s as usize)?);
        }
        let index = |c: &Coordinate| params.iter().position(|p| p == c);
        let compiled = Arc::new(CompiledExpr::compile(&e, &index).ok()?);
        self.cache.lock().unwrap().insert(key, compiled.clone());
        Some(compiled)
    }
}

impl Default for PolyFunctions {
    fn default() -> Self {
        Self::new()
    }
}

impl FunctionTable for PolyFunctions {
    fn call(&self, name: &str, slots: &[u8], args: &[f64]) -> Option<f64> {
        let c = self.compiled(name, slots)?;
        c.eval(args, &NoFunctions).ok()
    }
}
