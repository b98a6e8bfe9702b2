//! The Riemann sphere with its Fubini–Study polarization.
//!
//! Two charts cover P¹: `Z` with coordinate z and `W` with w = 1/z. The
//! Kähler potential is log(1+|c|²) in either chart and ω = (i/2π)∂∂̄ of it, so
//! ω = dx dy / (π(1+|c|²)²) has total mass one.

use std::f64::consts::PI;
use std::ops::Add;

use rayon::prelude::*;

use crate::linalg::{CMat, C64};
use crate::{Error, Result};

/// Total mass of ω.
pub const VOLUME: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Chart {
    Z,
    W,
}

impl Chart {
    pub fn other(self) -> Chart {
        match self {
            Chart::Z => Chart::W,
            Chart::W => Chart::Z,
        }
    }
}

/// A point stored in the chart where its coordinate has modulus ≤ 1 (chart Z
/// wins on the unit circle).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpherePoint {
    chart: Chart,
    coord: C64,
}

impl SpherePoint {
    /// Canonical representative of the point with local coordinate `coord`
    /// in `chart`.
    pub fn new(chart: Chart, coord: C64) -> Result<Self> {
        if !(coord.re.is_finite() && coord.im.is_finite()) {
            return Err(Error::Argument(format!("non-finite coordinate {coord}")));
        }
        let r = coord.norm();
        let p = match chart {
            Chart::Z if r <= 1.0 => SpherePoint { chart, coord },
            Chart::W if r < 1.0 => SpherePoint { chart, coord },
            _ => SpherePoint {
                chart: chart.other(),
                coord: coord.inv(),
            },
        };
        Ok(p)
    }

    pub fn from_z(z: C64) -> Result<Self> {
        Self::new(Chart::Z, z)
    }

    pub fn infinity() -> Self {
        SpherePoint {
            chart: Chart::W,
            coord: C64::new(0.0, 0.0),
        }
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn coord(&self) -> C64 {
        self.coord
    }

    /// Coordinate in the requested chart; `None` at that chart's pole.
    pub fn coord_in(&self, chart: Chart) -> Option<C64> {
        if chart == self.chart {
            Some(self.coord)
        } else if self.coord.norm() == 0.0 {
            None
        } else {
            Some(self.coord.inv())
        }
    }

    /// Unit vector on the round sphere of radius one.
    pub fn to_unit_vector(&self) -> [f64; 3] {
        let c = self.coord;
        let s = c.norm_sqr();
        let (x, y) = (2.0 * c.re / (1.0 + s), 2.0 * c.im / (1.0 + s));
        let h = (1.0 - s) / (1.0 + s);
        match self.chart {
            Chart::Z => [x, y, h],
            // w = 1/z = conj(z)/|z|²: same equator angle mirrored, pole flipped
            Chart::W => [x, -y, -h],
        }
    }

    /// Chordal distance on the unit round sphere.
    pub fn chordal_distance(&self, other: &SpherePoint) -> f64 {
        let a = self.to_unit_vector();
        let b = other.to_unit_vector();
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }
}

/// log(1+|c|²), the same formula in either chart.
pub fn potential(coord: C64) -> f64 {
    coord.norm_sqr().ln_1p()
}

/// The factor (1+|c|²)² turning a coefficient g of (i/2π)g dc∧dc̄ into Λ_ω of
/// the form.
pub fn contraction_factor(coord: C64) -> f64 {
    let t = 1.0 + coord.norm_sqr();
    t * t
}

/// Λ_ω of the (1,1)-form (i/2π) g dc∧dc̄ at `p`.
pub fn contract(g: C64, p: &SpherePoint) -> C64 {
    g * contraction_factor(p.coord())
}

pub fn contract_matrix(g: &CMat, p: &SpherePoint) -> CMat {
    let f = contraction_factor(p.coord());
    g.map(|x| x * f)
}

/// Coefficient of ω itself in the local chart.
pub fn omega_coefficient(coord: C64) -> f64 {
    1.0 / contraction_factor(coord)
}

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    nodes: Vec<SpherePoint>,
    weights: Vec<f64>,
    n_colat: usize,
    n_angle: usize,
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n <= 1 { 1.0 } else { p0 };
            dp = n as f64 * (t * pn - pn1) / (t * t - 1.0);
            let dt = pn / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[i] = t;
        x[n - 1 - i] = -t;
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss–Legendre nodes and weights mapped to [a, b].
pub fn gauss_legendre_interval(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|v| v * half).collect(),
    )
}

/// Sum in a fixed balanced binary tree, independent of thread count.
pub fn pairwise_sum<T: Clone + Add<Output = T>>(values: &[T]) -> Option<T> {
    match values.len() {
        0 => None,
        1 => Some(values[0].clone()),
        n => {
            let (a, b) = values.split_at(n / 2);
            Some(pairwise_sum(a)? + pairwise_sum(b)?)
        }
    }
}

impl QuadratureRule {
    /// Product rule: Gauss–Legendre in cos θ times the trapezoid rule in the
    /// azimuth, pushed to P¹ stereographically. With x = cos θ the form ω is
    /// dx dψ / 4π, so the rule integrates u^j(1-u)^m with u = |z|²/(1+|z|²)
    /// exactly for j + m < 2·n_colat.
    pub fn new(n_colat: usize, n_angle: usize) -> Result<Self> {
        if n_colat < 4 || n_angle < 4 {
            return Err(Error::Argument(format!(
                "quadrature sizes must be at least 4 (got {n_colat}×{n_angle})"
            )));
        }
        let (xs, ws) = gauss_legendre(n_colat);
        let mut nodes = Vec::with_capacity(n_colat * n_angle);
        let mut weights = Vec::with_capacity(n_colat * n_angle);
        for (x, wx) in xs.iter().zip(ws.iter()) {
            for m in 0..n_angle {
                let psi = 2.0 * PI * m as f64 / n_angle as f64;
                let dir = C64::from_polar(1.0, psi);
                let p = if *x >= 0.0 {
                    let r = ((1.0 - x) / (1.0 + x)).sqrt();
                    SpherePoint {
                        chart: Chart::Z,
                        coord: dir * r,
                    }
                } else {
                    let r = ((1.0 + x) / (1.0 - x)).sqrt();
                    SpherePoint {
                        chart: Chart::W,
                        coord: dir.conj() * r,
                    }
                };
                nodes.push(p);
                weights.push(wx / (2.0 * n_angle as f64));
            }
        }
        Ok(QuadratureRule {
            nodes,
            weights,
            n_colat,
            n_angle,
        })
    }

    pub fn nodes(&self) -> &[SpherePoint] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn sizes(&self) -> (usize, usize) {
        (self.n_colat, self.n_angle)
    }

    /// Σ wᵢ f(pᵢ, wᵢ)-style reduction: `f` receives the node and its weight
    /// and returns the weighted contribution. Evaluation is parallel, the
    /// reduction tree is fixed.
    pub fn reduce<T, F>(&self, f: F) -> Result<T>
    where
        T: Clone + Add<Output = T> + Send,
        F: Fn(&SpherePoint, f64) -> Result<T> + Sync,
    {
        let parts: Vec<T> = self
            .nodes
            .par_iter()
            .zip(self.weights.par_iter())
            .map(|(p, w)| f(p, *w))
            .collect::<Result<Vec<T>>>()?;
        pairwise_sum(&parts).ok_or_else(|| Error::Argument("empty quadrature rule".into()))
    }

    /// Evaluate `f` at every node (parallel, order preserved).
    pub fn map<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&SpherePoint) -> Result<T> + Sync,
    {
        self.nodes.par_iter().map(&f).collect()
    }
}

/// ∫ f ω by the rule; a non-finite value aborts with the offending node.
pub fn integrate<F>(rule: &QuadratureRule, f: F) -> Result<C64>
where
    F: Fn(&SpherePoint) -> C64 + Sync,
{
    rule.reduce(|p, w| {
        let v = f(p);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::eval(
                format!("{:?} {}", p.chart(), p.coord()),
                format!("integrand is not finite ({v})"),
            ));
        }
        Ok(v * w)
    })
}

pub fn integrate_real<F>(rule: &QuadratureRule, f: F) -> Result<f64>
where
    F: Fn(&SpherePoint) -> f64 + Sync,
{
    Ok(integrate(rule, |p| C64::new(f(p), 0.0))?.re)
}
