use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Piecewise-linear nodal field on a [`Mesh`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl DiscreteField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::InvalidMesh(format!(
                "field has {} values but the mesh has {} nodes",
                values.len(),
                mesh.node_count()
            )));
        }
        Ok(DiscreteField { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let values = vec![0.0; mesh.node_count()];
        DiscreteField { mesh, values }
    }

    /// Samples `f(x, d(x))` at every node.
    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = mesh
            .nodes()
            .iter()
            .zip(mesh.distances())
            .map(|(&x, &d)| f(x, d))
            .collect();
        DiscreteField { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Elementwise gradient `(u_{i+1} - u_i)/h_i`.
    pub fn element_gradients(&self) -> Vec<f64> {
        self.values
            .windows(2)
            .zip(self.mesh.element_lengths())
            .map(|(w, &h)| (w[1] - w[0]) / h)
            .collect()
    }

    pub fn midpoint_values(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max_i |self_i - other_i|`.
    pub fn sup_distance(&self, other: &DiscreteField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `max_i (self_i - other_i)`, the largest amount by which `self`
    /// exceeds `other`.
    pub fn max_excess_over(&self, other: &DiscreteField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(f64::NEG_INFINITY, |m, (a, b)| m.max(a - b))
    }

    /// Whether every Dirichlet node holds zero.
    pub fn satisfies_dirichlet(&self) -> bool {
        (0..self.values.len())
            .filter(|&i| self.mesh.is_boundary_node(i))
            .all(|i| self.values[i] == 0.0)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    /// CSV with one row per node: `index,x,d,u`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,x,d,u\n");
        for (i, ((x, d), u)) in self
            .mesh
            .nodes()
            .iter()
            .zip(self.mesh.distances())
            .zip(&self.values)
            .enumerate()
        {
            let _ = writeln!(out, "{i},{x:?},{d:?},{u:?}");
        }
        out
    }
}
