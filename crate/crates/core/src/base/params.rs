use std::sync::Arc;

use crate::error::{Error, Result};

/// Named blocks describing how a flat parameter vector unflattens.
pub type ShapeTable = Vec<(String, Vec<usize>)>;

/// Flat parameter vector with its block layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub shapes: Arc<ShapeTable>,
}

fn block_len(dims: &[usize]) -> usize {
    dims.iter().product()
}

impl ParamVector {
    pub fn new(values: Vec<f64>, shapes: Arc<ShapeTable>) -> Result<Self> {
        let expected: usize = shapes.iter().map(|(_, d)| block_len(d)).sum();
        if expected != values.len() {
            return Err(Error::Dimension {
                what: "parameter vector",
                expected,
                got: values.len(),
            });
        }
        Ok(Self { values, shapes })
    }

    pub fn zeros(shapes: Arc<ShapeTable>) -> Self {
        let n = shapes.iter().map(|(_, d)| block_len(d)).sum();
        Self {
            values: vec![0.0; n],
            shapes,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Split into one owned block per shape-table entry.
    pub fn unflatten(&self) -> Vec<(String, Vec<f64>)> {
        let mut offset = 0;
        self.shapes
            .iter()
            .map(|(name, dims)| {
                let n = block_len(dims);
                let block = self.values[offset..offset + n].to_vec();
                offset += n;
                (name.clone(), block)
            })
            .collect()
    }

    /// Inverse of [`ParamVector::unflatten`].
    pub fn flatten(blocks: &[(String, Vec<f64>)], shapes: Arc<ShapeTable>) -> Result<Self> {
        if blocks.len() != shapes.len() {
            return Err(Error::Dimension {
                what: "parameter blocks",
                expected: shapes.len(),
                got: blocks.len(),
            });
        }
        let mut values = Vec::new();
        for ((name, block), (shape_name, dims)) in blocks.iter().zip(shapes.iter()) {
            if name != shape_name || block.len() != block_len(dims) {
                return Err(Error::InvalidArgument(format!(
                    "block `{name}` ({} values) does not match `{shape_name}` {dims:?}",
                    block.len()
                )));
            }
            values.extend_from_slice(block);
        }
        Self::new(values, shapes)
    }

    /// Range of the named block inside `values`.
    pub fn block_range(&self, name: &str) -> Option<std::ops::Range<usize>> {
        let mut offset = 0;
        for (n, dims) in self.shapes.iter() {
            let len = block_len(dims);
            if n == name {
                return Some(offset..offset + len);
            }
            offset += len;
        }
        None
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
