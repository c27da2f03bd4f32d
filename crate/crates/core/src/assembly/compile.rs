//! Lowering of an [`Expr`] to a flat sum of products evaluated in one pass
//! per quadrature point.

use super::expr::{Expr, FeFunction, ScalarFn, VectorFn};
use crate::error::{Error, Result};

/// One basis quantity: a component's value or one partial derivative of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Atom {
    pub comp: usize,
    pub deriv: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Coef {
    Func(usize),
    VecFunc(usize, usize),
    Field(usize, Atom),
}

#[derive(Debug, Clone)]
struct Term {
    scale: f64,
    coefs: Vec<Coef>,
    trial: Option<Atom>,
    test: Option<Atom>,
}

/// Value of a sub-expression: entries of a scalar, vector or matrix, each a
/// sum of terms.
#[derive(Debug, Clone)]
struct Tensor {
    shape: Shape,
    entries: Vec<Vec<Term>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Scalar,
    Vector(usize),
    /// Rows by columns; the gradient of a vector has entry (i, j) = ∂_j e_i.
    Matrix(usize, usize),
}

#[derive(Debug, Clone)]
pub(crate) struct CompiledTerm {
    pub scale: f64,
    pub coefs: Vec<usize>,
    pub pair: usize,
}

/// A form ready for the element loop.
pub(crate) struct CompiledForm {
    pub funcs: Vec<ScalarFn>,
    pub vec_funcs: Vec<(VectorFn, usize)>,
    pub fields: Vec<FeFunction>,
    pub coefs: Vec<Coef>,
    /// Distinct (test atom, trial atom) products; trial is `None` for linear forms.
    pub pairs: Vec<(Atom, Option<Atom>)>,
    pub terms: Vec<CompiledTerm>,
}

struct Ctx {
    dim: usize,
    test_comps: usize,
    trial_comps: usize,
    funcs: Vec<ScalarFn>,
    vec_funcs: Vec<(VectorFn, usize)>,
    fields: Vec<FeFunction>,
}

fn form_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Form(msg.into()))
}

fn scalar(terms: Vec<Term>) -> Tensor {
    Tensor { shape: Shape::Scalar, entries: vec![terms] }
}

fn basis(comps: usize, make: impl Fn(Atom) -> Term) -> Tensor {
    let entries: Vec<Vec<Term>> = (0..comps).map(|c| vec![make(Atom { comp: c, deriv: None })]).collect();
    Tensor { shape: if comps == 1 { Shape::Scalar } else { Shape::Vector(comps) }, entries }
}

fn unit() -> Term {
    Term { scale: 1.0, coefs: Vec::new(), trial: None, test: None }
}

fn merge(a: Option<Atom>, b: Option<Atom>, what: &str) -> Result<Option<Atom>> {
    match (a, b) {
        (Some(_), Some(_)) => form_err(format!("{what} function appears twice in a product")),
        (x, None) | (None, x) => Ok(x),
    }
}

fn mul_terms(a: &Term, b: &Term) -> Result<Term> {
    let mut coefs = a.coefs.clone();
    coefs.extend_from_slice(&b.coefs);
    Ok(Term {
        scale: a.scale * b.scale,
        coefs,
        trial: merge(a.trial, b.trial, "trial")?,
        test: merge(a.test, b.test, "test")?,
    })
}

fn mul_polys(a: &[Term], b: &[Term]) -> Result<Vec<Term>> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(mul_terms(x, y)?);
        }
    }
    Ok(out)
}

fn derive_atom(a: Atom, k: usize) -> Result<Atom> {
    if a.deriv.is_some() {
        return form_err("second derivatives are not supported");
    }
    Ok(Atom { comp: a.comp, deriv: Some(k) })
}

/// ∂_k of a sum of products by the product rule.
fn derive_poly(p: &[Term], k: usize) -> Result<Vec<Term>> {
    let mut out = Vec::new();
    for t in p {
        if t.coefs.iter().any(|c| !matches!(c, Coef::Field(..))) {
            return form_err("cannot differentiate a coefficient function");
        }
        if let Some(a) = t.trial {
            out.push(Term { trial: Some(derive_atom(a, k)?), ..t.clone() });
        }
        if let Some(a) = t.test {
            out.push(Term { test: Some(derive_atom(a, k)?), ..t.clone() });
        }
        for (i, c) in t.coefs.iter().enumerate() {
            if let Coef::Field(f, a) = *c {
                let mut d = t.clone();
                d.coefs[i] = Coef::Field(f, derive_atom(a, k)?);
                out.push(d);
            }
        }
    }
    Ok(out)
}

impl Ctx {
    fn lower(&mut self, e: &Expr) -> Result<Tensor> {
        Ok(match e {
            Expr::Trial => {
                if self.trial_comps == 0 {
                    return form_err("trial function in a linear form");
                }
                basis(self.trial_comps, |a| Term { trial: Some(a), ..unit() })
            }
            Expr::Test => basis(self.test_comps, |a| Term { test: Some(a), ..unit() }),
            Expr::Const(c) => scalar(vec![Term { scale: *c, ..unit() }]),
            Expr::Function(f) => {
                let i = match self.funcs.iter().position(|g| std::sync::Arc::ptr_eq(g, f)) {
                    Some(i) => i,
                    None => {
                        self.funcs.push(f.clone());
                        self.funcs.len() - 1
                    }
                };
                scalar(vec![Term { coefs: vec![Coef::Func(i)], ..unit() }])
            }
            Expr::VectorFunction(f, n) => {
                let i = match self.vec_funcs.iter().position(|g| std::sync::Arc::ptr_eq(&g.0, f)) {
                    Some(i) => i,
                    None => {
                        self.vec_funcs.push((f.clone(), *n));
                        self.vec_funcs.len() - 1
                    }
                };
                let entries = (0..*n).map(|c| vec![Term { coefs: vec![Coef::VecFunc(i, c)], ..unit() }]).collect();
                Tensor { shape: if *n == 1 { Shape::Scalar } else { Shape::Vector(*n) }, entries }
            }
            Expr::Field(f) => {
                if f.space().element().dim() != self.dim {
                    return form_err("field lives on a mesh of another dimension");
                }
                let i = match self.fields.iter().position(|g| g.same(f)) {
                    Some(i) => i,
                    None => {
                        self.fields.push(f.clone());
                        self.fields.len() - 1
                    }
                };
                basis(f.space().components(), |a| Term { coefs: vec![Coef::Field(i, a)], ..unit() })
            }
            Expr::Grad(inner) => {
                let t = self.lower(inner)?;
                let d = self.dim;
                let rows = match t.shape {
                    Shape::Scalar => 1,
                    Shape::Vector(n) => n,
                    Shape::Matrix(..) => return form_err("gradient of a matrix-valued expression"),
                };
                let mut entries = Vec::with_capacity(rows * d);
                for p in &t.entries {
                    for k in 0..d {
                        entries.push(derive_poly(p, k)?);
                    }
                }
                let shape = if rows == 1 { Shape::Vector(d) } else { Shape::Matrix(rows, d) };
                Tensor { shape, entries }
            }
            Expr::Div(inner) => {
                let t = self.lower(inner)?;
                let n = match t.shape {
                    Shape::Vector(n) if n == self.dim => n,
                    _ => return form_err("divergence needs a vector with one component per dimension"),
                };
                let mut out = Vec::new();
                for (k, p) in t.entries.iter().enumerate().take(n) {
                    out.extend(derive_poly(p, k)?);
                }
                scalar(out)
            }
            Expr::Dot(a, b) => {
                let (x, y) = (self.lower(a)?, self.lower(b)?);
                if x.shape != y.shape || x.shape == Shape::Scalar {
                    return form_err(format!("dot of mismatched shapes {:?} and {:?}", x.shape, y.shape));
                }
                let mut out = Vec::new();
                for (p, q) in x.entries.iter().zip(&y.entries) {
                    out.extend(mul_polys(p, q)?);
                }
                scalar(out)
            }
            Expr::Mul(a, b) => {
                let (x, y) = (self.lower(a)?, self.lower(b)?);
                match (x.shape, y.shape) {
                    (Shape::Scalar, _) => Tensor {
                        shape: y.shape,
                        entries: y.entries.iter().map(|q| mul_polys(&x.entries[0], q)).collect::<Result<_>>()?,
                    },
                    (_, Shape::Scalar) => Tensor {
                        shape: x.shape,
                        entries: x.entries.iter().map(|p| mul_polys(p, &y.entries[0])).collect::<Result<_>>()?,
                    },
                    (Shape::Matrix(r, c), Shape::Vector(n)) if c == n => {
                        let mut entries = Vec::with_capacity(r);
                        for i in 0..r {
                            let mut acc = Vec::new();
                            for j in 0..c {
                                acc.extend(mul_polys(&x.entries[i * c + j], &y.entries[j])?);
                            }
                            entries.push(acc);
                        }
                        Tensor { shape: Shape::Vector(r), entries }
                    }
                    (s, t) => return form_err(format!("product of shapes {s:?} and {t:?}; use dot")),
                }
            }
            Expr::Add(a, b) => {
                let (mut x, y) = (self.lower(a)?, self.lower(b)?);
                if x.shape != y.shape {
                    return form_err(format!("sum of mismatched shapes {:?} and {:?}", x.shape, y.shape));
                }
                for (p, q) in x.entries.iter_mut().zip(y.entries) {
                    p.extend(q);
                }
                x
            }
            Expr::Neg(a) => {
                let mut x = self.lower(a)?;
                x.entries.iter_mut().flatten().for_each(|t| t.scale = -t.scale);
                x
            }
            Expr::Component(a, i) => {
                let x = self.lower(a)?;
                match x.shape {
                    Shape::Vector(n) if *i < n => scalar(x.entries[*i].clone()),
                    _ => return form_err(format!("component {i} of a {:?} expression", x.shape)),
                }
            }
        })
    }
}

fn compile(e: &Expr, dim: usize, test_comps: usize, trial_comps: usize) -> Result<CompiledForm> {
    let mut ctx = Ctx { dim, test_comps, trial_comps, funcs: Vec::new(), vec_funcs: Vec::new(), fields: Vec::new() };
    let t = ctx.lower(e)?;
    if t.shape != Shape::Scalar {
        return form_err(format!("form must be scalar-valued, got {:?}", t.shape));
    }
    let mut coefs: Vec<Coef> = Vec::new();
    let mut pairs: Vec<(Atom, Option<Atom>)> = Vec::new();
    let mut terms = Vec::new();
    for term in t.entries.into_iter().next().unwrap() {
        let Some(test) = term.test else {
            return form_err("a term does not contain the test function");
        };
        if trial_comps > 0 && term.trial.is_none() {
            return form_err("a term of a bilinear form does not contain the trial function");
        }
        let key = (test, term.trial);
        let pair = match pairs.iter().position(|p| *p == key) {
            Some(i) => i,
            None => {
                pairs.push(key);
                pairs.len() - 1
            }
        };
        let ids = term
            .coefs
            .iter()
            .map(|c| match coefs.iter().position(|d| d == c) {
                Some(i) => i,
                None => {
                    coefs.push(*c);
                    coefs.len() - 1
                }
            })
            .collect();
        terms.push(CompiledTerm { scale: term.scale, coefs: ids, pair });
    }
    Ok(CompiledForm { funcs: ctx.funcs, vec_funcs: ctx.vec_funcs, fields: ctx.fields, coefs, pairs, terms })
}

/// Checks that `e` is linear in both trial and test functions and lowers it.
pub(crate) fn compile_bilinear(e: &Expr, dim: usize, test_comps: usize, trial_comps: usize) -> Result<CompiledForm> {
    compile(e, dim, test_comps, trial_comps)
}

/// Checks that `e` is linear in the test function and free of the trial function.
pub(crate) fn compile_linear(e: &Expr, dim: usize, test_comps: usize) -> Result<CompiledForm> {
    compile(e, dim, test_comps, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::expr::*;

    #[test]
    fn laplacian_lowers_to_one_pair_per_direction() {
        let f = compile_bilinear(&dot(grad(trial()), grad(test())), 3, 1, 1).unwrap();
        assert_eq!(f.pairs.len(), 3);
        assert!(f.pairs.iter().all(|(s, t)| s.deriv == t.unwrap().deriv));
    }

    #[test]
    fn vector_laplacian_and_divergence() {
        let f = compile_bilinear(&dot(grad(trial()), grad(test())), 2, 2, 2).unwrap();
        assert_eq!(f.terms.len(), 4);
        let d = compile_bilinear(&(-(test() * div(trial()))), 2, 1, 2).unwrap();
        assert_eq!(d.terms.len(), 2);
        assert!(d.terms.iter().all(|t| t.scale == -1.0));
    }

    #[test]
    fn structure_errors() {
        let quad = trial() * trial() * test();
        assert!(matches!(compile_bilinear(&quad, 2, 1, 1), Err(Error::Form(_))));
        let missing = trial() + test();
        assert!(matches!(compile_bilinear(&missing, 2, 1, 1), Err(Error::Form(_))));
        assert!(matches!(compile_linear(&(trial() * test()), 2, 1), Err(Error::Form(_))));
        assert!(matches!(compile_linear(&constant(1.0), 2, 1), Err(Error::Form(_))));
        assert!(matches!(compile_bilinear(&(grad(trial()) * test()), 2, 1, 1), Err(Error::Form(_))));
        let g = grad(function(|x| x[0]) * test());
        assert!(matches!(compile_linear(&dot(g, constant(1.0) * grad(test())), 2, 1), Err(Error::Form(_))));
    }

    #[test]
    fn coefficients_are_shared() {
        let f = function(|x| x[0]);
        let e = f.clone() * trial() * test() + f * dot(grad(trial()), grad(test()));
        let c = compile_bilinear(&e, 2, 1, 1).unwrap();
        assert_eq!(c.funcs.len(), 1);
        assert_eq!(c.coefs.len(), 1);
    }
}
