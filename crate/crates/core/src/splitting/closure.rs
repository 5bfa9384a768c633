use nalgebra::DVector;

use crate::error::Result;
use crate::splitting::{pdr_step, IterateTriple, SplittingScheme};

type ProxFn<'a> = Box<dyn Fn(&DVector<f64>, f64) -> DVector<f64> + Send + 'a>;
type ValueFn<'a> = Box<dyn Fn(&DVector<f64>) -> f64 + Send + 'a>;
type GradFn<'a> = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + 'a>;

/// Parameterized Douglas–Rachford scheme assembled from closures.
///
/// `prox_g` receives `α u⁺ − x`. When `regularized` is set, `g` is understood to carry the
/// extra `−((2−α)/2γ)‖·‖²` term and `prox_g` must solve that subproblem.
pub struct ClosureScheme<'a> {
    dim: usize,
    alpha: f64,
    lipschitz: f64,
    weak_convexity: f64,
    regularized: bool,
    prox_f: ProxFn<'a>,
    prox_g: ProxFn<'a>,
    f: ValueFn<'a>,
    g: ValueFn<'a>,
    grad_f: GradFn<'a>,
}

impl<'a> ClosureScheme<'a> {
    /// Zero objective with identity proximal maps.
    pub fn new(dim: usize, alpha: f64, lipschitz: f64) -> Self {
        ClosureScheme {
            dim,
            alpha,
            lipschitz,
            weak_convexity: 0.0,
            regularized: false,
            prox_f: Box::new(|z, _| z.clone()),
            prox_g: Box::new(|z, _| z.clone()),
            f: Box::new(|_| 0.0),
            g: Box::new(|_| 0.0),
            grad_f: Box::new(|z| DVector::zeros(z.len())),
        }
    }

    pub fn with_f(
        mut self,
        f: impl Fn(&DVector<f64>) -> f64 + Send + 'a,
        grad: impl Fn(&DVector<f64>) -> DVector<f64> + Send + 'a,
        prox: impl Fn(&DVector<f64>, f64) -> DVector<f64> + Send + 'a,
    ) -> Self {
        self.f = Box::new(f);
        self.grad_f = Box::new(grad);
        self.prox_f = Box::new(prox);
        self
    }

    pub fn with_g(
        mut self,
        g: impl Fn(&DVector<f64>) -> f64 + Send + 'a,
        prox: impl Fn(&DVector<f64>, f64) -> DVector<f64> + Send + 'a,
    ) -> Self {
        self.g = Box::new(g);
        self.prox_g = Box::new(prox);
        self
    }

    pub fn regularized(mut self, on: bool) -> Self {
        self.regularized = on;
        self
    }

    pub fn weak_convexity(mut self, l: f64) -> Self {
        self.weak_convexity = l;
        self
    }
}

impl SplittingScheme for ClosureScheme<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn step(&mut self, state: &IterateTriple, gamma: f64) -> Result<IterateTriple> {
        let (pf, pg) = (&self.prox_f, &self.prox_g);
        pdr_step(|z, g| Ok(pf(z, g)), |z, g| Ok(pg(z, g)), state, gamma, self.alpha)
    }

    fn f_val(&self, z: &DVector<f64>) -> f64 {
        (self.f)(z)
    }

    fn g_val(&self, z: &DVector<f64>) -> f64 {
        (self.g)(z)
    }

    fn g_regularizer(&self, z: &DVector<f64>, gamma: f64) -> f64 {
        if self.regularized {
            -0.5 * (2.0 - self.alpha) / gamma * z.norm_squared()
        } else {
            0.0
        }
    }

    fn grad_f(&self, z: &DVector<f64>) -> DVector<f64> {
        (self.grad_f)(z)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn weak_convexity(&self) -> f64 {
        self.weak_convexity
    }

    fn merit_alpha(&self) -> Option<f64> {
        Some(self.alpha)
    }
}
