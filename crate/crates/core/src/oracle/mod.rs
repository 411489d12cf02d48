//! Numeric cross-checks: prolonged flows on jet space, on-manifold sampling,
//! invariance by comparison along flows, and Jacobian ranks.

pub mod rk;

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::checks::Verdict;
use crate::expr::{CompiledExpr, Coordinate, ExprError, Expression, FunctionTable, PolyFunctions};
use crate::field::{FieldError, ProlongedField, VectorField};
use crate::jet::JetSpace;
use crate::manifold::ConstraintManifold;

pub use rk::Tolerance;

/// Seed used when neither the caller nor `JETSYM_SEED` provides one.
pub const DEFAULT_SEED: u64 = 20_100_721;

pub fn default_seed() -> u64 {
    std::env::var("JETSYM_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

/// Largest accepted relative error estimate of an integrated flow.
pub const MAX_ERROR_ESTIMATE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("no admissible sample point after {0} attempts")]
    Sampling(usize),
    #[error("coordinate `{0}` is outside the chart")]
    OutsideChart(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Coordinates of a jet space up to some order, with positions in a value
/// vector: independents, jets, then parameters.
#[derive(Debug, Clone)]
pub struct Chart {
    coords: Vec<Coordinate>,
    index: HashMap<Coordinate, usize>,
    order: usize,
}

impl Chart {
    pub fn new(space: &JetSpace, order: usize) -> Self {
        let mut coords = space.independents();
        coords.extend(space.jets_up_to(order));
        coords.extend(space.parameters());
        let index = coords.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        Chart { coords, index, order }
    }

    pub fn coords(&self) -> &[Coordinate] {
        &self.coords
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn index_of(&self, c: &Coordinate) -> Option<usize> {
        self.index.get(c).copied()
    }

    pub fn compile(&self, e: &Expression) -> Result<CompiledExpr, OracleError> {
        if let Some(c) = e.coordinates().into_iter().find(|c| !self.index.contains_key(c)) {
            return Err(OracleError::OutsideChart(c.label().to_string()));
        }
        Ok(CompiledExpr::compile(e, &|c: &Coordinate| self.index_of(c))?)
    }

    pub fn point(&self, values: &[(Coordinate, f64)]) -> Vec<f64> {
        let mut p = vec![0.0; self.len()];
        for (c, v) in values {
            if let Some(i) = self.index_of(c) {
                p[i] = *v;
            }
        }
        p
    }
}

#[derive(Debug, Clone)]
pub struct FlowResult {
    pub point: Vec<f64>,
    pub theta: f64,
    pub steps: usize,
    pub error_estimate: f64,
}

/// `xi = A x + b`, `eta = 0`.
#[derive(Debug, Clone)]
struct AffineField {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

/// The flow of a prolonged field on a chart.
pub struct Flow {
    chart: Chart,
    velocity: Vec<Option<CompiledExpr>>,
    affine: Option<AffineField>,
    n: usize,
}

impl Flow {
    pub fn new(pf: &ProlongedField, chart: &Chart) -> Result<Self, OracleError> {
        if chart.order() > pf.order() {
            return Err(OracleError::Field(FieldError::OrderMismatch {
                expr: chart.order(),
                field: pf.order(),
            }));
        }
        let velocity = chart
            .coords()
            .iter()
            .map(|c| match pf.coefficient(c) {
                Some(e) if !e.is_zero() => chart.compile(e).map(Some),
                _ => Ok(None),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let n = pf.space().dim();
        Ok(Flow {
            chart: chart.clone(),
            velocity,
            affine: affine_part(pf.base(), pf.space()),
            n,
        })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn has_closed_form(&self) -> bool {
        self.affine.is_some() && self.chart.order() <= 2 && self.chart_single_dependent()
    }

    fn chart_single_dependent(&self) -> bool {
        self.chart.coords().iter().filter(|c| c.is_jet()).all(|c| c.index() == 0)
    }

    pub fn velocity(&self, p: &[f64], fns: &dyn FunctionTable, out: &mut [f64]) -> Result<(), ExprError> {
        for (o, v) in out.iter_mut().zip(&self.velocity) {
            *o = match v {
                Some(e) => e.eval(p, fns)?,
                None => 0.0,
            };
        }
        Ok(())
    }

    /// Adaptive Runge–Kutta integration of the prolonged field. The
    /// tolerance is tightened until the error estimate is acceptable.
    pub fn integrate(&self, p: &[f64], theta: f64, fns: &dyn FunctionTable) -> Result<FlowResult, OracleError> {
        let mut estimate = f64::INFINITY;
        for tol in [1e-12, 1e-13, 1e-14] {
            let tolerance = Tolerance {
                rtol: tol,
                atol: tol,
                ..Tolerance::default()
            };
            let sol = rk::integrate(|y: &[f64], out: &mut [f64]| self.velocity(y, fns, out), p, theta, tolerance)
                .map_err(OracleError::Integration)?;
            if sol.error_estimate < MAX_ERROR_ESTIMATE {
                return Ok(FlowResult {
                    point: sol.y,
                    theta,
                    steps: sol.steps,
                    error_estimate: sol.error_estimate,
                });
            }
            estimate = sol.error_estimate;
        }
        Err(OracleError::Integration(format!(
            "error estimate {estimate:.3e} exceeds {MAX_ERROR_ESTIMATE:e}"
        )))
    }

    /// Closed form for affine point fields with `eta = 0`: the base moves by
    /// `x -> M x + c`, the gradient by `M^-T` and the Hessian by
    /// `M^-T H M^-1`.
    pub fn closed_form(&self, p: &[f64], theta: f64) -> Option<Vec<f64>> {
        if !self.has_closed_form() {
            return None;
        }
        let f = self.affine.as_ref()?;
        let n = self.n;
        let mut aug = DMatrix::zeros(n + 1, n + 1);
        aug.view_mut((0, 0), (n, n)).copy_from(&(&f.a * theta));
        aug.view_mut((0, n), (n, 1)).copy_from(&(&f.b * theta));
        let e = aug.exp();
        let m = e.view((0, 0), (n, n)).into_owned();
        let c = e.view((0, n), (n, 1)).into_owned();
        let minv_t = m.clone().try_inverse()?.transpose();
        let mut q = p.to_vec();
        let coords = self.chart.coords();
        let x = DVector::from_iterator(n, (0..n).map(|i| p[i]));
        let x2 = &m * x + c;
        q[..n].copy_from_slice(x2.as_slice());
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        for (k, cd) in coords.iter().enumerate() {
            if !cd.is_jet() {
                continue;
            }
            let mi = cd.multi_index();
            match mi.len() {
                1 => grad[mi[0] as usize] = p[k],
                2 => {
                    hess[(mi[0] as usize, mi[1] as usize)] = p[k];
                    hess[(mi[1] as usize, mi[0] as usize)] = p[k];
                }
                _ => {}
            }
        }
        let g2 = &minv_t * grad;
        let h2 = &minv_t * hess * minv_t.transpose();
        for (k, cd) in coords.iter().enumerate() {
            if !cd.is_jet() {
                continue;
            }
            let mi = cd.multi_index();
            match mi.len() {
                1 => q[k] = g2[mi[0] as usize],
                2 => q[k] = h2[(mi[0] as usize, mi[1] as usize)],
                _ => {}
            }
        }
        Some(q)
    }

    /// Closed form when available, otherwise numeric integration.
    pub fn flow(&self, p: &[f64], theta: f64, fns: &dyn FunctionTable) -> Result<FlowResult, OracleError> {
        if let Some(q) = self.closed_form(p, theta) {
            return Ok(FlowResult {
                point: q,
                theta,
                steps: 0,
                error_estimate: 0.0,
            });
        }
        self.integrate(p, theta, fns)
    }
}

fn affine_part(field: &VectorField, space: &JetSpace) -> Option<AffineField> {
    if field.eta().iter().any(|e| !e.is_zero()) {
        return None;
    }
    let n = space.dim();
    let indeps = space.independents();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for (i, xi) in field.xi().iter().enumerate() {
        if xi.coordinates().iter().any(|c| !c.is_independent()) || !xi.is_polynomial() || xi.numer().total_degree() > 1 {
            return None;
        }
        for (j, x) in indeps.iter().enumerate() {
            a[(i, j)] = xi.diff(x).constant_value().map(|c| to_f64(&c))?;
        }
        let zeros = indeps.iter().map(|x| (x.clone(), Expression::zero())).collect();
        b[i] = xi.substitute_simultaneous(&zeros).ok()?.constant_value().map(|c| to_f64(&c))?;
    }
    Some(AffineField { a, b })
}

fn to_f64(c: &num_rational::BigRational) -> f64 {
    num_traits::ToPrimitive::to_f64(c).unwrap_or(f64::NAN)
}

/// Uniform draw from `[-2, -0.1] ∪ [0.1, 2]`.
pub fn draw_coordinate<R: Rng>(rng: &mut R) -> f64 {
    let m: f64 = rng.gen_range(0.1..2.0);
    if rng.gen_bool(0.5) {
        m
    } else {
        -m
    }
}

/// Deterministic random points on a manifold.
pub struct Sampler {
    rng: ChaCha8Rng,
    seed: u64,
}

pub const MAX_ATTEMPTS: usize = 100;
pub const SINGULAR_MARGIN: f64 = 0.1;

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Free coordinates are drawn at random; bound ones are evaluated from
    /// the triangular rules.
    pub fn sample(
        &mut self,
        chart: &Chart,
        manifold: &ConstraintManifold,
        guards: &[CompiledExpr],
        fns: &dyn FunctionTable,
    ) -> Result<Vec<f64>, OracleError> {
        let bound: Vec<(usize, CompiledExpr)> = manifold
            .rules()
            .iter()
            .filter_map(|(c, e)| chart.index_of(c).map(|i| (i, e)))
            .map(|(i, e)| chart.compile(e).map(|ce| (i, ce)))
            .collect::<Result<_, _>>()?;
        'attempt: for _ in 0..MAX_ATTEMPTS {
            let mut p: Vec<f64> = (0..chart.len()).map(|_| draw_coordinate(&mut self.rng)).collect();
            for (i, e) in &bound {
                match e.eval(&p, fns) {
                    Ok(v) if v.is_finite() => p[*i] = v,
                    _ => continue 'attempt,
                }
            }
            if guards_ok(guards, &p, fns) {
                return Ok(p);
            }
        }
        Err(OracleError::Sampling(MAX_ATTEMPTS))
    }
}

fn guards_ok(guards: &[CompiledExpr], p: &[f64], fns: &dyn FunctionTable) -> bool {
    guards.iter().all(|g| matches!(g.eval(p, fns), Ok(v) if v.abs() >= SINGULAR_MARGIN))
}

/// Random polynomial stand-ins for every opaque function of `space`.
pub fn random_functions(space: &JetSpace, seed: u64) -> PolyFunctions {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f00d);
    let mut fns = PolyFunctions::new();
    for (name, arity) in space.functions() {
        fns.define_random(name, *arity, &mut rng);
    }
    fns
}

#[derive(Debug, Clone)]
pub struct OracleOptions {
    pub trials: usize,
    pub thetas: Vec<f64>,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            trials: 20,
            thetas: vec![0.1, -0.1, 0.3, -0.3],
            seed: default_seed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericVerdict {
    pub invariant: bool,
    /// `max |e(flow(p)) - e(p)| / (1 + |e(p)|)` over all points, parameters
    /// and targets.
    pub max_deviation: f64,
    pub points: usize,
    pub seed: u64,
}

/// Relative tolerance for numeric invariance.
pub const INVARIANCE_TOL: f64 = 1e-9;
/// Deviation above which a symbolic failure counts as numerically confirmed.
pub const FAILURE_TOL: f64 = 1e-3;

impl NumericVerdict {
    pub fn agrees_with(&self, holds: bool) -> bool {
        if holds {
            self.invariant
        } else {
            self.max_deviation > FAILURE_TOL
        }
    }
}

/// Compares each target before and after flowing random points of the
/// manifold by every parameter in `opts.thetas`.
pub fn numeric_invariance(
    pf: &ProlongedField,
    targets: &[Expression],
    manifold: Option<&ConstraintManifold>,
    opts: &OracleOptions,
    fns: &dyn FunctionTable,
) -> Result<NumericVerdict, OracleError> {
    let identity = ConstraintManifold::identity();
    let m = manifold.unwrap_or(&identity);
    let order = targets
        .iter()
        .map(|t| t.order())
        .chain(m.rules().keys().map(|c| c.order()))
        .max()
        .unwrap_or(0)
        .max(pf.order());
    let pf = if order > pf.order() {
        pf.base().prolong(pf.space(), order)?
    } else {
        pf.clone()
    };
    let chart = Chart::new(pf.space(), order);
    let flow = Flow::new(&pf, &chart)?;
    let compiled: Vec<CompiledExpr> = targets.iter().map(|t| chart.compile(t)).collect::<Result<_, _>>()?;
    let mut guard_exprs: Vec<Expression> = m.domain_notes().iter().cloned().collect();
    for t in targets {
        guard_exprs.extend(t.singular_factors());
    }
    for e in pf.coefficients().values() {
        guard_exprs.extend(e.singular_factors());
    }
    guard_exprs.sort();
    guard_exprs.dedup();
    let guards: Vec<CompiledExpr> = guard_exprs.iter().map(|g| chart.compile(g)).collect::<Result<_, _>>()?;
    let mut sampler = Sampler::new(opts.seed);
    let mut max_dev = 0.0f64;
    let mut points = 0;
    let mut attempts = 0;
    while points < opts.trials {
        if attempts >= MAX_ATTEMPTS * opts.trials.max(1) {
            return Err(OracleError::Sampling(attempts));
        }
        attempts += 1;
        let p = sampler.sample(&chart, m, &guards, fns)?;
        let mut flowed = Vec::with_capacity(opts.thetas.len());
        let mut ok = true;
        for &theta in &opts.thetas {
            let q = flow.flow(&p, theta, fns)?.point;
            if !guards_ok(&guards, &q, fns) {
                ok = false;
                break;
            }
            flowed.push(q);
        }
        if !ok {
            continue;
        }
        for c in &compiled {
            let before = c.eval(&p, fns)?;
            for q in &flowed {
                let after = c.eval(q, fns)?;
                let dev = (after - before).abs() / (1.0 + before.abs());
                max_dev = max_dev.max(if dev.is_nan() { f64::INFINITY } else { dev });
            }
        }
        points += 1;
    }
    Ok(NumericVerdict {
        invariant: max_dev < INVARIANCE_TOL,
        max_deviation: max_dev,
        points,
        seed: opts.seed,
    })
}

/// Numeric counterpart of a symbolic verdict: each field is flowed on the
/// verdict's manifold and every target is compared.
pub fn confirm(
    verdict: &Verdict,
    fields: &[VectorField],
    targets: &[Expression],
    space: &JetSpace,
    opts: &OracleOptions,
    fns: &dyn FunctionTable,
) -> Result<NumericVerdict, OracleError> {
    let order = targets
        .iter()
        .map(|t| t.order())
        .chain(verdict.manifold.rules().keys().map(|c| c.order()))
        .max()
        .unwrap_or(1)
        .max(1);
    let manifold = (!verdict.manifold.is_identity()).then_some(&verdict.manifold);
    let mut combined = NumericVerdict {
        invariant: true,
        max_deviation: 0.0,
        points: 0,
        seed: opts.seed,
    };
    for f in fields {
        let pf = f.prolong(space, order)?;
        let v = numeric_invariance(&pf, targets, manifold, opts, fns)?;
        combined.invariant &= v.invariant;
        combined.max_deviation = combined.max_deviation.max(v.max_deviation);
        combined.points += v.points;
    }
    Ok(combined)
}

/// Numeric rank of the Jacobian of `exprs` with respect to `coords` at `p`.
pub fn jacobian_rank(
    exprs: &[Expression],
    coords: &[Coordinate],
    chart: &Chart,
    p: &[f64],
    fns: &dyn FunctionTable,
) -> Result<usize, OracleError> {
    let mut m = DMatrix::zeros(exprs.len(), coords.len());
    for (i, e) in exprs.iter().enumerate() {
        for (j, c) in coords.iter().enumerate() {
            let d = e.diff(c);
            m[(i, j)] = if d.is_zero() { 0.0 } else { chart.compile(&d)?.eval(p, fns)? };
        }
    }
    let sv = m.svd(false, false).singular_values;
    let max = sv.iter().fold(0.0f64, |a, b| a.max(*b));
    Ok(sv.iter().filter(|s| **s > max * 1e-9).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::NoFunctions;

    fn space() -> JetSpace {
        JetSpace::declare(&["t", "x", "y"], &["u"], 2, None).unwrap()
    }

    #[test]
    fn translation_flow() {
        let s = space();
        let pf = VectorField::translation(&s, 1).prolong(&s, 2).unwrap();
        let chart = Chart::new(&s, 2);
        let flow = Flow::new(&pf, &chart).unwrap();
        let p: Vec<f64> = (0..chart.len()).map(|i| i as f64 * 0.1).collect();
        let q = flow.integrate(&p, 0.4, &NoFunctions).unwrap().point;
        for (i, (a, b)) in p.iter().zip(&q).enumerate() {
            let expect = if i == 1 { a + 0.4 } else { *a };
            assert!((b - expect).abs() < 1e-12);
        }
        assert_eq!(flow.integrate(&p, 0.0, &NoFunctions).unwrap().point, p);
    }

    #[test]
    fn rotation_quarter_turn() {
        let s = space();
        let j = VectorField::parse("J", "x*d/dy - y*d/dx", &s).unwrap();
        let pf = j.prolong(&s, 1).unwrap();
        let chart = Chart::new(&s, 1);
        let flow = Flow::new(&pf, &chart).unwrap();
        let c = |n: &str| s.parse(n).unwrap().as_coord().unwrap().clone();
        let p = chart.point(&[(c("x"), 1.0), (c("u_x"), 1.0)]);
        let half_pi = std::f64::consts::FRAC_PI_2;
        let mut q = p.clone();
        for _ in 0..4 {
            q = flow.integrate(&q, half_pi / 4.0, &NoFunctions).unwrap().point;
        }
        let at = |v: &[f64], n: &str| v[chart.index_of(&c(n)).unwrap()];
        assert!(at(&q, "x").abs() < 1e-10 && (at(&q, "y") - 1.0).abs() < 1e-10);
        assert!(at(&q, "u_x").abs() < 1e-10 && (at(&q, "u_y") - 1.0).abs() < 1e-10);
        let closed = flow.closed_form(&p, half_pi).unwrap();
        for (a, b) in q.iter().zip(&closed) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn invariance_examples() {
        let s = space();
        let j = VectorField::parse("J", "x*d/dy - y*d/dx", &s).unwrap();
        let pf = j.prolong(&s, 1).unwrap();
        let opts = OracleOptions {
            seed: 7,
            ..Default::default()
        };
        let v = numeric_invariance(&pf, &[s.parse("u_x^2 + u_y^2").unwrap()], None, &opts, &NoFunctions).unwrap();
        assert!(v.invariant && v.max_deviation < 1e-11);
        let v = numeric_invariance(&pf, &[s.parse("u_x").unwrap()], None, &opts, &NoFunctions).unwrap();
        assert!(!v.invariant && v.max_deviation > 1e-3);
    }

    #[test]
    fn rank_of_independent_functions() {
        let s = space();
        let chart = Chart::new(&s, 1);
        let exprs = [s.parse("x^2 + y^2").unwrap(), s.parse("t").unwrap(), s.parse("2*t + 1").unwrap()];
        let coords: Vec<_> = s.independents();
        let p = vec![0.5; chart.len()];
        assert_eq!(jacobian_rank(&exprs, &coords, &chart, &p, &NoFunctions).unwrap(), 2);
    }
}
