use std::f64::consts::PI;
use std::sync::OnceLock;

use faer::Mat;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ContourPath;
use crate::error::{Error, Result};

/// Gauss-Legendre nodes per panel.
pub const PANEL_ORDER: usize = 16;

/// Composite Gauss-Legendre quadrature settings. Each edge is split into
/// `nodes_per_edge / 16` equal panels; adaptive integration doubles the node
/// count until two successive estimates differ by less than `tol`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub nodes_per_edge: usize,
    pub tol: f64,
    pub max_doublings: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            nodes_per_edge: PANEL_ORDER,
            tol: 1e-9,
            max_doublings: 10,
        }
    }
}

impl QuadratureSpec {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    /// Default for matrix integrands: `tol = 1e-7 ||A||`.
    pub fn for_matrix(norm_a: f64) -> Self {
        Self::with_tol(1e-7 * norm_a.max(f64::MIN_POSITIVE))
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_edge < PANEL_ORDER || !self.nodes_per_edge.is_power_of_two() {
            return Err(Error::InvalidSpec(format!(
                "nodes_per_edge = {} must be a power of two >= {PANEL_ORDER}",
                self.nodes_per_edge
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidSpec(format!("tol = {} must be positive", self.tol)));
        }
        Ok(())
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// computed by Newton iteration on the three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let step = pn / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_ORDER))
}

/// Values that can be accumulated by the quadrature.
pub trait Integrand: Send + Sized {
    fn scale(&mut self, w: C64);
    fn accumulate(&mut self, other: &Self);
    /// Norm of the difference, Frobenius for matrices.
    fn distance(&self, other: &Self) -> f64;
}

impl Integrand for C64 {
    fn scale(&mut self, w: C64) {
        *self *= w;
    }

    fn accumulate(&mut self, other: &Self) {
        *self += other;
    }

    fn distance(&self, other: &Self) -> f64 {
        (self - other).norm()
    }
}

impl Integrand for Mat<C64> {
    fn scale(&mut self, w: C64) {
        for j in 0..self.ncols() {
            for i in 0..self.nrows() {
                self[(i, j)] *= w;
            }
        }
    }

    fn accumulate(&mut self, other: &Self) {
        *self += other;
    }

    fn distance(&self, other: &Self) -> f64 {
        (self - other).norm_l2()
    }
}

impl<T: Integrand> Integrand for Vec<T> {
    fn scale(&mut self, w: C64) {
        self.iter_mut().for_each(|v| v.scale(w));
    }

    fn accumulate(&mut self, other: &Self) {
        self.iter_mut().zip(other).for_each(|(a, b)| a.accumulate(b));
    }

    fn distance(&self, other: &Self) -> f64 {
        self.iter().zip(other).map(|(a, b)| a.distance(b)).fold(0.0, f64::max)
    }
}

/// A single panel: straight segment from `a` to `b`.
struct Panel {
    a: C64,
    b: C64,
}

fn panels(path: &ContourPath, nodes_per_edge: usize) -> Vec<Panel> {
    let per_edge = nodes_per_edge / PANEL_ORDER;
    let mut out = Vec::new();
    for rect in path.rects() {
        let v = rect.vertices();
        for e in 0..4 {
            let (a, b) = (v[e], v[(e + 1) % 4]);
            for k in 0..per_edge {
                let t0 = k as f64 / per_edge as f64;
                let t1 = (k + 1) as f64 / per_edge as f64;
                out.push(Panel {
                    a: a + (b - a) * t0,
                    b: a + (b - a) * t1,
                });
            }
        }
    }
    out
}

/// `(1/2 pi i) \oint f dz` at a fixed node count. Panels are evaluated in
/// parallel and summed in path order.
pub fn integrate_fixed<T, F>(path: &ContourPath, nodes_per_edge: usize, f: &F) -> Result<T>
where
    T: Integrand,
    F: Fn(C64) -> Result<T> + Sync,
{
    let (xs, ws) = panel_rule();
    let two_pi_i = C64::new(0.0, 2.0 * PI);
    let sums: Vec<T> = panels(path, nodes_per_edge)
        .par_iter()
        .map(|panel| {
            let mid = (panel.a + panel.b) * 0.5;
            let half = (panel.b - panel.a) * 0.5;
            let mut acc: Option<T> = None;
            for (x, w) in xs.iter().zip(ws) {
                let mut v = f(mid + half * *x)?;
                v.scale(half * *w / two_pi_i);
                match acc.as_mut() {
                    Some(a) => a.accumulate(&v),
                    None => acc = Some(v),
                }
            }
            Ok(acc.expect("panel rule has nodes"))
        })
        .collect::<Result<_>>()?;
    let mut it = sums.into_iter();
    let mut total = it.next().ok_or_else(|| Error::InvalidSpec("empty contour".into()))?;
    for s in it {
        total.accumulate(&s);
    }
    Ok(total)
}

/// Adaptive `(1/2 pi i) \oint f dz`: doubles the node count until successive
/// estimates agree within `q.tol`.
pub fn integrate<T, F>(path: &ContourPath, q: &QuadratureSpec, f: F) -> Result<T>
where
    T: Integrand,
    F: Fn(C64) -> Result<T> + Sync,
{
    q.validate()?;
    let mut nodes = q.nodes_per_edge;
    let mut prev = integrate_fixed(path, nodes, &f)?;
    let mut change = f64::INFINITY;
    for _ in 0..q.max_doublings {
        nodes *= 2;
        let next = integrate_fixed(path, nodes, &f)?;
        change = next.distance(&prev);
        prev = next;
        if change < q.tol {
            return Ok(prev);
        }
    }
    Err(Error::QuadratureFail {
        last_change: change,
        tol: q.tol,
        nodes_per_edge: nodes,
    })
}

/// Adaptive scalar integral `(1/2 pi i) \oint f dz`.
pub fn integrate_scalar(path: &ContourPath, q: &QuadratureSpec, f: impl Fn(C64) -> C64 + Sync) -> Result<C64> {
    integrate(path, q, |z| Ok(f(z)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::RectContour;

    fn unit_box() -> ContourPath {
        ContourPath::single(RectContour::new(1.0, 3.0, 1.0).unwrap())
    }

    #[test]
    fn legendre_rule_is_exact_for_low_degree() {
        let (x, w) = gauss_legendre(PANEL_ORDER);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        for deg in 0..2 * PANEL_ORDER {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-13, "degree {deg}: {q} vs {exact}");
        }
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn cauchy_inside_and_outside() {
        let q = QuadratureSpec::default();
        let inside = integrate_scalar(&unit_box(), &q, |z| 1.0 / (z - 2.0)).unwrap();
        assert!((inside - 1.0).norm() < 1e-9);
        let outside = integrate_scalar(&unit_box(), &q, |z| 1.0 / (z - 5.0)).unwrap();
        assert!(outside.norm() < 1e-9);
    }

    #[test]
    fn partial_fraction_value() {
        let q = QuadratureSpec::default();
        let v = integrate_scalar(&unit_box(), &q, |z| 1.0 / ((z - 2.0) * (z - 0.0))).unwrap();
        assert!((v - 0.5).norm() < 1e-9);
    }

    #[test]
    fn tiny_tolerance_fails_loudly() {
        let q = QuadratureSpec {
            nodes_per_edge: 16,
            tol: 1e-30,
            max_doublings: 3,
        };
        let r = integrate_scalar(&unit_box(), &q, |z| 1.0 / (z - 1.01));
        assert!(matches!(r, Err(Error::QuadratureFail { .. })));
    }

    #[test]
    fn rejects_bad_node_counts() {
        let q = QuadratureSpec {
            nodes_per_edge: 24,
            ..QuadratureSpec::default()
        };
        assert!(q.validate().is_err());
    }
}
