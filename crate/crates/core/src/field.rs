use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::error::{PcfError, Result};

/// Grid layout a field is sampled on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridShape {
    /// `nx * ny` nodes, stored row by row with x contiguous.
    Torus { nx: usize, ny: usize },
    /// Cell-centred momentum nodes.
    Sphere { nmu: usize },
}

impl GridShape {
    pub fn len(&self) -> usize {
        match *self {
            GridShape::Torus { nx, ny } => nx * ny,
            GridShape::Sphere { nmu } => nmu,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for GridShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridShape::Torus { nx, ny } => write!(f, "torus {nx}x{ny}"),
            GridShape::Sphere { nmu } => write!(f, "sphere nmu={nmu}"),
        }
    }
}

/// Real function sampled at the nodes of a geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    shape: GridShape,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(shape: GridShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(PcfError::ShapeError {
                expected: shape.to_string(),
                got: format!("{} values", values.len()),
            });
        }
        Ok(Self { shape, values })
    }

    pub fn constant(shape: GridShape, c: f64) -> Self {
        Self {
            shape,
            values: vec![c; shape.len()],
        }
    }

    pub fn zeros(shape: GridShape) -> Self {
        Self::constant(shape, 0.0)
    }

    pub fn shape(&self) -> GridShape {
        self.shape
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

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            shape: self.shape,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a + s * b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    pub fn shift(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Sup norm.
    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn check_shape(&self, shape: GridShape) -> Result<()> {
        if self.shape != shape {
            return Err(PcfError::ShapeError {
                expected: shape.to_string(),
                got: self.shape.to_string(),
            });
        }
        Ok(())
    }

    fn check_same(&self, other: &ScalarField) -> Result<()> {
        other.check_shape(self.shape)
    }

    /// Largest pointwise difference against another field.
    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        self.check_same(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

impl Index<usize> for ScalarField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl IndexMut<usize> for ScalarField {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}

// Operator sugar panics on shape mismatch; library code uses the checked forms.
impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a + b).expect("shape mismatch in add")
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a - b).expect("shape mismatch in sub")
    }
}

impl Mul for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a * b).expect("shape mismatch in mul")
    }
}
