use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Observed `(point, value)` pairs in insertion order. Points are unit-cube coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    inputs: Array2<f64>,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(dimension: usize) -> Self {
        Self {
            inputs: Array2::zeros((0, dimension)),
            values: Vec::new(),
        }
    }

    pub fn from_parts(inputs: Array2<f64>, values: Vec<f64>) -> Result<Self> {
        if inputs.nrows() != values.len() {
            return Err(Error::LengthMismatch {
                left: inputs.nrows(),
                right: values.len(),
            });
        }
        Ok(Self { inputs, values })
    }

    pub fn dimension(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn inputs(&self) -> ArrayView2<'_, f64> {
        self.inputs.view()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.inputs.row(i)
    }

    pub fn push(&mut self, point: ArrayView1<'_, f64>, value: f64) -> Result<()> {
        if point.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: point.len(),
            });
        }
        self.inputs
            .push(Axis(0), point)
            .expect("row length checked above");
        self.values.push(value);
        Ok(())
    }

    /// Index and value of the lowest observation; earliest index wins ties.
    /// The `m` lowest-valued rows, in their original order.
    pub fn best_subset(&self, m: usize) -> Dataset {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]).then(a.cmp(&b)));
        order.truncate(m);
        order.sort_unstable();
        Dataset {
            inputs: self.inputs.select(Axis(0), &order),
            values: order.iter().map(|&i| self.values[i]).collect(),
        }
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold(None, |acc, (i, v)| match acc {
                Some((_, b)) if b <= v => acc,
                _ => Some((i, v)),
            })
    }
}
