//! Nodal coefficient vectors.

use crate::error::{Error, Result};
use crate::fem::Mesh;

/// What a field represents; recorded in the `FEFIELD` file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldRole {
    State,
    Parameter,
}

impl FieldRole {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldRole::State => "state",
            FieldRole::Parameter => "parameter",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "state" => Ok(FieldRole::State),
            "parameter" => Ok(FieldRole::Parameter),
            other => Err(Error::invalid(format!("unknown field role `{other}`"))),
        }
    }
}

/// One 64-bit coefficient per mesh node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    values: Vec<f64>,
    role: FieldRole,
}

impl NodalField {
    pub fn new(values: Vec<f64>, role: FieldRole) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("nodal field contains nonfinite entries"));
        }
        Ok(Self { values, role })
    }

    pub fn zeros(n: usize, role: FieldRole) -> Self {
        Self {
            values: vec![0.0; n],
            role,
        }
    }

    pub fn constant(n: usize, value: f64, role: FieldRole) -> Self {
        Self {
            values: vec![value; n],
            role,
        }
    }

    /// Nodal interpolant of `f(x, y)`.
    pub fn from_fn(mesh: &Mesh, role: FieldRole, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = mesh.node_coords.iter().map(|c| f(c[0], c[1])).collect();
        Self { values, role }
    }

    pub fn role(&self) -> FieldRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
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

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `self + scale * other`, keeping `self`'s role.
    pub fn axpy(&self, scale: f64, other: &NodalField) -> NodalField {
        assert_eq!(self.len(), other.len());
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + scale * b)
            .collect();
        NodalField {
            values,
            role: self.role,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> NodalField {
        NodalField {
            values: self.values.iter().map(|&v| f(v)).collect(),
            role: self.role,
        }
    }
}
