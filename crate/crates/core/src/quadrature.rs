//! Contour descriptions and their discretizations.
//!
//! Every `QuadratureRule` folds the `1/(2πi)` normalization and the
//! parametrization derivative into its weights, so `Σ w_j f(z_j)`
//! approximates `(1/2πi) ∫_C f(z) dz`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Geometric contour. Closed curves are positively oriented; open ones run
/// from the lower end to the upper end (increasing imaginary part) unless the
/// variant says otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ContourSpec {
    /// Circle with uniformly spaced trapezoid nodes.
    Circle { center: C64, radius: f64 },
    /// Circle whose nodes are bunched toward the point at angle `toward` by the
    /// Möbius reparametrization `u ↦ (u − β)/(1 − βu)`, `0 ≤ β < 1`.
    GradedCircle { center: C64, radius: f64, toward: f64, beta: f64 },
    /// Disjoint closed components; the rule is the concatenation.
    Union(Vec<ContourSpec>),
    /// `re + iy`, `|y| ≤ cutoff`, upward.
    VerticalLine { re: f64, cutoff: f64 },
    /// `R − i∞ → R − id → ½ − id → ½ + id → R + id → R + i∞`, truncated at `|Im| = cutoff`.
    DRd { r: f64, d: f64, cutoff: f64 },
    /// Two rays sharing `vertex`, at angles `±angle`, each of length `cutoff`.
    /// With `upward` the path runs `vertex + L e^{-iφ} → vertex → vertex + L e^{iφ}`,
    /// otherwise the reverse.
    RayPair { vertex: C64, angle: f64, cutoff: f64, upward: bool },
    /// Same curve, opposite orientation.
    Reversed(Box<ContourSpec>),
}

/// Nodes and weights approximating `(1/2πi)∫ f dz`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<C64>,
    pub weights: Vec<C64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn integrate<F: Fn(C64) -> C64>(&self, f: F) -> C64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }
    fn extend(&mut self, other: QuadratureRule) {
        self.nodes.extend(other.nodes);
        self.weights.extend(other.weights);
    }
    fn negate(mut self) -> Self {
        for w in &mut self.weights {
            *w = -*w;
        }
        self
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Newton iteration on `P_n`).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    (x, w)
}

/// Straight segment `a → b` split into `panels` Gauss–Legendre panels of `m` nodes.
pub fn segment_rule(a: C64, b: C64, panels: usize, m: usize) -> QuadratureRule {
    let (x, w) = gauss_legendre(m);
    let mut rule = QuadratureRule::default();
    let scale = C64::new(0.0, -1.0 / (2.0 * PI));
    for p in 0..panels {
        let pa = a + (b - a) * (p as f64 / panels as f64);
        let pb = a + (b - a) * ((p + 1) as f64 / panels as f64);
        let half = (pb - pa) * 0.5;
        let mid = (pa + pb) * 0.5;
        for (xi, wi) in x.iter().zip(&w) {
            rule.nodes.push(mid + half * *xi);
            rule.weights.push(half * *wi * scale);
        }
    }
    rule
}

impl ContourSpec {
    pub fn circle(center: C64, radius: f64) -> Self {
        ContourSpec::Circle { center, radius }
    }

    pub fn reversed(self) -> Self {
        match self {
            ContourSpec::Reversed(inner) => *inner,
            other => ContourSpec::Reversed(Box::new(other)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ContourSpec::Circle { radius, .. } if *radius <= 0.0 => invalid("circle radius must be positive"),
            ContourSpec::GradedCircle { radius, beta, .. } => {
                if *radius <= 0.0 || !(0.0..1.0).contains(beta) {
                    invalid("graded circle needs radius > 0 and 0 <= beta < 1")
                } else {
                    Ok(())
                }
            }
            ContourSpec::Union(parts) => parts.iter().try_for_each(|p| p.validate()),
            ContourSpec::VerticalLine { cutoff, .. } | ContourSpec::DRd { cutoff, .. } | ContourSpec::RayPair { cutoff, .. }
                if *cutoff <= 0.0 =>
            {
                invalid("contour cutoff must be positive")
            }
            ContourSpec::Reversed(inner) => inner.validate(),
            _ => Ok(()),
        }
    }

    /// Discretizes with `m` nodes per closed component. Open contours use
    /// `m` as the per-unit-length node density (trapezoid on lines,
    /// Gauss–Legendre panels on polygonal and ray paths).
    pub fn rule(&self, m: usize) -> QuadratureRule {
        match self {
            ContourSpec::Circle { center, radius } => {
                let mut rule = QuadratureRule::default();
                for j in 0..m {
                    let u = C64::from_polar(1.0, 2.0 * PI * j as f64 / m as f64);
                    rule.nodes.push(center + radius * u);
                    rule.weights.push(radius * u / m as f64);
                }
                rule
            }
            ContourSpec::GradedCircle { center, radius, toward, beta } => {
                // u on the unit circle; v = (u − β)/(1 − βu) bunches v near −1,
                // then rotate −1 onto the direction `toward`.
                let rot = -C64::from_polar(1.0, *toward);
                let mut rule = QuadratureRule::default();
                for j in 0..m {
                    let u = C64::from_polar(1.0, 2.0 * PI * j as f64 / m as f64);
                    let den = 1.0 - beta * u;
                    let v = (u - beta) / den;
                    let dv = (1.0 - beta * beta) / (den * den);
                    rule.nodes.push(center + radius * rot * v);
                    rule.weights.push(radius * rot * dv * u / m as f64);
                }
                rule
            }
            ContourSpec::Union(parts) => {
                let mut rule = QuadratureRule::default();
                for p in parts {
                    rule.extend(p.rule(m));
                }
                rule
            }
            ContourSpec::VerticalLine { re, cutoff } => {
                let n = ((2.0 * cutoff * m as f64).ceil() as usize).max(8);
                let h = 2.0 * cutoff / n as f64;
                let mut rule = QuadratureRule::default();
                for j in 0..=n {
                    let y = -cutoff + h * j as f64;
                    let wt = if j == 0 || j == n { 0.5 } else { 1.0 };
                    rule.nodes.push(C64::new(*re, y));
                    // ds/(2πi) = i dy/(2πi)
                    rule.weights.push(C64::new(wt * h / (2.0 * PI), 0.0));
                }
                rule
            }
            ContourSpec::DRd { r, d, cutoff } => {
                let gl = 16usize;
                let pts = [
                    C64::new(*r, -cutoff),
                    C64::new(*r, -d),
                    C64::new(0.5, -d),
                    C64::new(0.5, *d),
                    C64::new(*r, *d),
                    C64::new(*r, *cutoff),
                ];
                let mut rule = QuadratureRule::default();
                for w in pts.windows(2) {
                    let len = (w[1] - w[0]).norm();
                    if len == 0.0 {
                        continue;
                    }
                    let panels = ((len * m as f64 / gl as f64).ceil() as usize).max(1);
                    rule.extend(segment_rule(w[0], w[1], panels, gl));
                }
                rule
            }
            ContourSpec::RayPair { vertex, angle, cutoff, upward } => {
                let gl = 16usize;
                let lo = vertex + C64::from_polar(*cutoff, -angle);
                let hi = vertex + C64::from_polar(*cutoff, *angle);
                let panels = m.div_ceil(gl).max(1);
                let mut rule = segment_rule(lo, *vertex, panels, gl);
                rule.extend(segment_rule(*vertex, hi, panels, gl));
                if *upward {
                    rule
                } else {
                    rule.negate()
                }
            }
            ContourSpec::Reversed(inner) => inner.rule(m).negate(),
        }
    }

    /// Whether `z` lies strictly inside the closed curve (closed variants only).
    pub fn contains(&self, z: C64) -> bool {
        match self {
            ContourSpec::Circle { center, radius } | ContourSpec::GradedCircle { center, radius, .. } => {
                (z - center).norm() < *radius
            }
            ContourSpec::Union(parts) => parts.iter().any(|p| p.contains(z)),
            ContourSpec::Reversed(inner) => inner.contains(z),
            _ => false,
        }
    }

    /// Signed clearance of `z` from a circle: positive inside, negative outside.
    pub fn clearance(&self, z: C64) -> f64 {
        match self {
            ContourSpec::Circle { center, radius } | ContourSpec::GradedCircle { center, radius, .. } => {
                radius - (z - center).norm()
            }
            ContourSpec::Union(parts) => parts
                .iter()
                .map(|p| p.clearance(z))
                .fold(f64::NEG_INFINITY, f64::max),
            ContourSpec::Reversed(inner) => inner.clearance(z),
            _ => f64::NAN,
        }
    }

    /// Center and radius for circle variants.
    pub fn disk(&self) -> Option<(C64, f64)> {
        match self {
            ContourSpec::Circle { center, radius } | ContourSpec::GradedCircle { center, radius, .. } => {
                Some((*center, *radius))
            }
            ContourSpec::Reversed(inner) => inner.disk(),
            _ => None,
        }
    }
}

/// Checks that the disk of `inner` scaled by `factor` sits strictly inside the
/// disk of `outer` with at least `margin` clearance.
pub fn scaled_disk_inside(inner: (C64, f64), factor: f64, outer: (C64, f64), margin: f64) -> bool {
    let (ci, ri) = inner;
    let (co, ro) = outer;
    (ci * factor - co).norm() + ri * factor.abs() + margin < ro
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residues_on_circles() {
        let unit = ContourSpec::circle(C64::new(0.0, 0.0), 1.0).rule(64);
        assert!((unit.integrate(|z| 1.0 / z) - 1.0).norm() < 1e-14);
        assert!((unit.integrate(|z| 1.0 / (z - 0.5)) - 1.0).norm() < 1e-14);
        let graded = ContourSpec::GradedCircle { center: C64::new(1.0, 0.0), radius: 0.9, toward: PI, beta: 0.6 }.rule(64);
        assert!((graded.integrate(|z| 1.0 / (z - 0.2)) - 1.0).norm() < 1e-12);
        assert!(graded.integrate(|z| 1.0 / (z + 0.05)).norm() < 1e-12);
        let rev = ContourSpec::circle(C64::new(0.0, 0.0), 1.0).reversed().rule(32);
        assert!((rev.integrate(|z| 1.0 / z) + 1.0).norm() < 1e-14);
    }

    #[test]
    fn gauss_legendre_exact_on_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
        let (x1, w1) = gauss_legendre(1);
        assert_eq!((x1[0], w1[0]), (0.0, 2.0));
    }

    #[test]
    fn vertical_line_gaussian() {
        // (1/2πi)∫ e^{s²} ds along Re s = 0 equals 1/(2√π)
        let rule = ContourSpec::VerticalLine { re: 0.0, cutoff: 8.0 }.rule(16);
        let v = rule.integrate(|s| (s * s).exp());
        assert!((v.re - 0.5 / PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn drd_matches_line_when_no_poles_between() {
        let f = |s: C64| (s * s).exp() / (s + 3.0);
        let a = ContourSpec::VerticalLine { re: 0.5, cutoff: 8.0 }.rule(32).integrate(f);
        let b = ContourSpec::DRd { r: 0.9, d: 0.25, cutoff: 8.0 }.rule(32).integrate(f);
        assert!((a - b).norm() < 1e-12, "{a} {b}");
    }
}
