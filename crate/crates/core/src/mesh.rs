//! Computational domains and boundary-graded meshes.
//!
//! Two geometries are supported, the interval `(0, ℓ)` and the ball `B_R` in
//! `ℝ^N` under radial symmetry. In both the boundary distance `d(x)` is known
//! in closed form, so boundary-layer exponents can be measured directly.
//!
//! Nodes near the far end of an interval cannot be stored accurately as
//! coordinates (`ℓ - 1e-12` rounds), so every mesh keeps the boundary
//! distance of each node separately and derives element lengths from it.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    Interval,
    RadialBall,
}

/// An interval `(0, ℓ)` or a ball of radius `R` in dimension `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    kind: DomainKind,
    extent: f64,
    dimension: usize,
}

impl Domain {
    pub fn interval(length: f64) -> Result<Self> {
        Self::new(DomainKind::Interval, length, 1)
    }

    pub fn ball(radius: f64, dimension: usize) -> Result<Self> {
        Self::new(DomainKind::RadialBall, radius, dimension)
    }

    pub fn new(kind: DomainKind, extent: f64, dimension: usize) -> Result<Self> {
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::InvalidDomain(format!(
                "length or radius must be positive, got {extent}"
            )));
        }
        if dimension < 1 {
            return Err(Error::InvalidDomain("dimension must be at least 1".into()));
        }
        if kind == DomainKind::Interval && dimension != 1 {
            return Err(Error::InvalidDomain(format!(
                "an interval has dimension 1, got {dimension}"
            )));
        }
        Ok(Domain {
            kind,
            extent,
            dimension,
        })
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    /// Length `ℓ` of the interval or radius `R` of the ball.
    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Diameter of the physical domain.
    pub fn diameter(&self) -> f64 {
        match self.kind {
            DomainKind::Interval => self.extent,
            DomainKind::RadialBall => 2.0 * self.extent,
        }
    }

    /// Largest boundary distance attained in the domain.
    pub fn inradius(&self) -> f64 {
        match self.kind {
            DomainKind::Interval => 0.5 * self.extent,
            DomainKind::RadialBall => self.extent,
        }
    }

    /// Boundary distance `d(x)`; `x` is the coordinate on `[0, ℓ]` or the
    /// radius on `[0, R]`.
    pub fn distance(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0 && x <= self.extent) {
            return Err(Error::OutsideDomain {
                x,
                extent: self.extent,
            });
        }
        Ok(match self.kind {
            DomainKind::Interval => x.min(self.extent - x),
            DomainKind::RadialBall => self.extent - x,
        })
    }
}

/// A boundary-graded mesh of a [`Domain`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    domain: Domain,
    grading: f64,
    nodes: Vec<f64>,
    dist: Vec<f64>,
    lengths: Vec<f64>,
    weights: Vec<f64>,
    mid_dist: Vec<f64>,
}

/// Builds a mesh with `n` elements.
///
/// On an interval the half `[0, ℓ/2]` carries the nodes `(ℓ/2)(2i/n)^γ`,
/// mirrored onto the other half, so `n` must be even. On a ball the nodes are
/// `R - R(1 - i/n)^γ`, concentrated towards `r = R`.
pub fn build_mesh(domain: Domain, n: usize, grading: f64) -> Result<Mesh> {
    if !(grading.is_finite() && grading >= 1.0) {
        return Err(Error::InvalidMesh(format!(
            "grading exponent must be at least 1, got {grading}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidMesh(format!("need at least 2 elements, got {n}")));
    }
    let extent = domain.extent();
    let (nodes, dist) = match domain.kind() {
        DomainKind::Interval => {
            if n % 2 != 0 {
                return Err(Error::InvalidMesh(format!(
                    "interval meshes need an even element count, got {n}"
                )));
            }
            let half = n / 2;
            let h = 0.5 * extent;
            let left: Vec<f64> = (0..=half)
                .map(|i| {
                    if i == half {
                        h
                    } else {
                        h * (i as f64 / half as f64).powf(grading)
                    }
                })
                .collect();
            let mut nodes = Vec::with_capacity(n + 1);
            let mut dist = Vec::with_capacity(n + 1);
            for &d in &left {
                nodes.push(d);
                dist.push(d);
            }
            for &d in left[..half].iter().rev() {
                nodes.push(extent - d);
                dist.push(d);
            }
            (nodes, dist)
        }
        DomainKind::RadialBall => {
            let dist: Vec<f64> = (0..=n)
                .map(|i| {
                    if i == 0 {
                        extent
                    } else {
                        extent * (1.0 - i as f64 / n as f64).powf(grading)
                    }
                })
                .collect();
            let nodes = dist.iter().map(|d| extent - d).collect();
            (nodes, dist)
        }
    };

    let lengths: Vec<f64> = dist.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    let mid_dist: Vec<f64> = dist.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    if lengths.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidMesh(
            "grading too strong: an element collapsed to zero length".into(),
        ));
    }
    let weights = match domain.kind() {
        DomainKind::Interval => lengths.clone(),
        DomainKind::RadialBall => {
            let dim = domain.dimension() as i32;
            nodes
                .windows(2)
                .zip(&lengths)
                .map(|(w, &len)| radial_shell_weight(w[0], w[1], len, dim))
                .collect()
        }
    };

    Ok(Mesh {
        domain,
        grading,
        nodes,
        dist,
        lengths,
        weights,
        mid_dist,
    })
}

/// `∫_a^b r^{N-1} dr` with the sphere-area constant normalized to one.
fn radial_shell_weight(a: f64, b: f64, len: f64, dim: i32) -> f64 {
    if dim == 1 {
        return len;
    }
    // (b^N - a^N)/N = len * Σ_k a^k b^{N-1-k} / N, free of cancellation.
    let sum: f64 = (0..dim).map(|k| a.powi(k) * b.powi(dim - 1 - k)).sum();
    len * sum / dim as f64
}

impl Mesh {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    pub fn element_count(&self) -> usize {
        self.lengths.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Node coordinates (radius for balls).
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Boundary distance of every node, stored exactly.
    pub fn distances(&self) -> &[f64] {
        &self.dist
    }

    pub fn element_lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Boundary distance at each element midpoint.
    pub fn midpoint_distances(&self) -> &[f64] {
        &self.mid_dist
    }

    /// Midpoint quadrature weights, one per element.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn quadrature_weight(&self, element: usize) -> Result<f64> {
        self.weights
            .get(element)
            .copied()
            .ok_or(Error::ElementIndex {
                index: element,
                count: self.element_count(),
            })
    }

    /// Whether node `i` carries a homogeneous Dirichlet condition.
    pub fn is_boundary_node(&self, i: usize) -> bool {
        match self.domain.kind() {
            DomainKind::Interval => i == 0 || i + 1 == self.node_count(),
            DomainKind::RadialBall => i + 1 == self.node_count(),
        }
    }

    /// Index range of the unconstrained nodes.
    pub fn free_range(&self) -> std::ops::Range<usize> {
        match self.domain.kind() {
            DomainKind::Interval => 1..self.node_count() - 1,
            DomainKind::RadialBall => 0..self.node_count() - 1,
        }
    }

    /// Index of the node farthest from the boundary (the interval midpoint or
    /// the ball centre).
    pub fn center_node(&self) -> usize {
        match self.domain.kind() {
            DomainKind::Interval => self.element_count() / 2,
            DomainKind::RadialBall => 0,
        }
    }

    /// Smallest element length.
    pub fn min_length(&self) -> f64 {
        self.lengths.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// CSV with one row per node: `index,x,d`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,x,d\n");
        for (i, (x, d)) in self.nodes.iter().zip(&self.dist).enumerate() {
            let _ = writeln!(out, "{i},{x:?},{d:?}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_interval_nodes() {
        let mesh = build_mesh(Domain::interval(1.0).unwrap(), 4, 1.0).unwrap();
        assert_eq!(mesh.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn graded_interval_nodes() {
        let mesh = build_mesh(Domain::interval(1.0).unwrap(), 4, 2.0).unwrap();
        assert_eq!(mesh.nodes(), &[0.0, 0.125, 0.5, 0.875, 1.0]);
        assert_eq!(mesh.distances(), &[0.0, 0.125, 0.5, 0.125, 0.0]);
    }

    #[test]
    fn uniform_radial_nodes() {
        let mesh = build_mesh(Domain::ball(1.0, 3).unwrap(), 2, 1.0).unwrap();
        assert_eq!(mesh.nodes(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn rejects_odd_counts_and_weak_grading() {
        let d = Domain::interval(1.0).unwrap();
        assert!(matches!(build_mesh(d, 5, 1.0), Err(Error::InvalidMesh(_))));
        assert!(matches!(build_mesh(d, 4, 0.5), Err(Error::InvalidMesh(_))));
        // odd counts are fine on a ball
        assert!(build_mesh(Domain::ball(1.0, 2).unwrap(), 5, 1.0).is_ok());
    }

    #[test]
    fn domain_validation() {
        assert!(Domain::interval(0.0).is_err());
        assert!(Domain::ball(-1.0, 2).is_err());
        assert!(Domain::ball(1.0, 0).is_err());
        assert!(Domain::new(DomainKind::Interval, 1.0, 2).is_err());
    }

    #[test]
    fn distance_examples() {
        let i = Domain::interval(1.0).unwrap();
        assert_eq!(i.distance(0.3).unwrap(), 0.3);
        assert!((i.distance(0.8).unwrap() - 0.2).abs() < 1e-15);
        let b = Domain::ball(2.0, 3).unwrap();
        assert_eq!(b.distance(0.5).unwrap(), 1.5);
        assert!(matches!(i.distance(1.5), Err(Error::OutsideDomain { .. })));
        assert!(i.distance(-0.1).is_err());
    }

    #[test]
    fn quadrature_weights() {
        let mesh = build_mesh(Domain::interval(1.0).unwrap(), 4, 1.0).unwrap();
        assert_eq!(mesh.quadrature_weight(1).unwrap(), 0.25);
        assert!(matches!(
            mesh.quadrature_weight(4),
            Err(Error::ElementIndex { .. })
        ));

        let m1 = build_mesh(Domain::ball(1.0, 1).unwrap(), 2, 1.0).unwrap();
        assert_eq!(m1.quadrature_weight(0).unwrap(), 0.5);

        // ∫_0^1 r dr = 1/2
        let m2 = build_mesh(Domain::ball(1.0, 2).unwrap(), 1 + 1, 1.0).unwrap();
        let total: f64 = m2.weights().iter().sum();
        assert!((total - 0.5).abs() < 1e-15);
    }

    #[test]
    fn radial_weights_sum_to_volume() {
        for dim in 1..=4 {
            let mesh = build_mesh(Domain::ball(1.5, dim).unwrap(), 37, 2.5).unwrap();
            let total: f64 = mesh.weights().iter().sum();
            let exact = 1.5f64.powi(dim as i32) / dim as f64;
            assert!((total - exact).abs() < 1e-13 * exact, "dim {dim}");
        }
    }

    #[test]
    fn lengths_sum_to_extent_and_symmetric() {
        let mesh = build_mesh(Domain::interval(2.0).unwrap(), 64, 3.0).unwrap();
        let total: f64 = mesh.element_lengths().iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        let n = mesh.node_count();
        for i in 0..n {
            assert_eq!(mesh.distances()[i], mesh.distances()[n - 1 - i]);
        }
        assert_eq!(mesh.center_node(), 32);
        assert_eq!(mesh.free_range(), 1..64);
    }

    #[test]
    fn uniform_refinement_nests() {
        let d = Domain::interval(1.0).unwrap();
        let coarse = build_mesh(d, 16, 1.0).unwrap();
        let fine = build_mesh(d, 32, 1.0).unwrap();
        for (i, x) in coarse.nodes().iter().enumerate() {
            assert_eq!(*x, fine.nodes()[2 * i]);
        }
    }

    #[test]
    fn min_length_scales_with_grading() {
        let d = Domain::interval(1.0).unwrap();
        for &g in &[1.0, 2.0, 3.0] {
            let a = build_mesh(d, 64, g).unwrap().min_length();
            let b = build_mesh(d, 128, g).unwrap().min_length();
            let expected = 2f64.powf(g);
            let ratio = a / b;
            assert!((ratio / expected - 1.0).abs() < 0.1, "γ={g} ratio={ratio}");
        }
    }

    #[test]
    fn csv_has_one_row_per_node() {
        let mesh = build_mesh(Domain::interval(1.0).unwrap(), 4, 1.0).unwrap();
        let csv = mesh.to_csv();
        assert_eq!(csv.lines().count(), 6);
        assert_eq!(csv.lines().nth(2).unwrap(), "1,0.25,0.25");
    }
}
