use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// One scalar per interior node of a [`Grid`], in flat (row-major) order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        ScalarField {
            grid,
            values: alloc::vec![value; grid.len()],
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Evaluate `f(x, y)` at every interior node.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let (x, y) = grid.coords(idx);
                f(x, y)
            })
            .collect();
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
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

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.values)
    }

    /// Boustrophedon ordering: rows of increasing `j`, even rows left to
    /// right, odd rows right to left.
    pub fn snake_flatten(&self) -> Vec<f64> {
        let side = self.grid.side();
        let mut out = Vec::with_capacity(self.values.len());
        for (r, row) in self.values.chunks_exact(side).enumerate() {
            if r % 2 == 0 {
                out.extend_from_slice(row);
            } else {
                out.extend(row.iter().rev());
            }
        }
        out
    }

    /// Inverse of [`ScalarField::snake_flatten`].
    pub fn from_snake(grid: Grid, snake: &[f64]) -> Result<Self> {
        if snake.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                found: snake.len(),
            });
        }
        let side = grid.side();
        let mut values = Vec::with_capacity(snake.len());
        for (r, row) in snake.chunks_exact(side).enumerate() {
            if r % 2 == 0 {
                values.extend_from_slice(row);
            } else {
                values.extend(row.iter().rev());
            }
        }
        Ok(ScalarField { grid, values })
    }

    fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Winkler reactive pressure `p = k·w`, pointwise.
pub fn reactive_pressure(k: &ScalarField, w: &ScalarField) -> Result<ScalarField> {
    k.check_same_grid(w)?;
    let values = k.values.iter().zip(&w.values).map(|(k, w)| k * w).collect();
    Ok(ScalarField {
        grid: k.grid,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn snake_on_two_by_two() {
        let g = Grid::unit(3).unwrap();
        let f = ScalarField::new(g, alloc::vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(f.snake_flatten(), alloc::vec![1.0, 2.0, 4.0, 3.0]);
    }

    #[test]
    fn snake_of_constant_is_constant() {
        let g = Grid::unit(6).unwrap();
        let f = ScalarField::constant(g, 2.5);
        assert!(f.snake_flatten().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn pressure_cases() {
        let g = Grid::unit(5).unwrap();
        let w = ScalarField::from_fn(g, |x, y| x * y - 0.3);
        let zero = ScalarField::zeros(g);
        let ones = ScalarField::constant(g, 1.0);
        assert!(reactive_pressure(&ones, &zero)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
        assert_eq!(reactive_pressure(&ones, &w).unwrap(), w);
        let other = ScalarField::zeros(Grid::unit(6).unwrap());
        assert_eq!(reactive_pressure(&other, &w), Err(Error::GridMismatch));
    }

    #[test]
    fn wrong_length_is_rejected() {
        let g = Grid::unit(4).unwrap();
        assert!(matches!(
            ScalarField::new(g, alloc::vec![0.0; 8]),
            Err(Error::ShapeMismatch {
                expected: 9,
                found: 8
            })
        ));
    }

    proptest! {
        #[test]
        fn snake_roundtrip(n in 3usize..12, seed in any::<u64>()) {
            let g = Grid::unit(n).unwrap();
            let mut s = seed;
            let f = ScalarField::from_fn(g, |_, _| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64
            });
            let back = ScalarField::from_snake(g, &f.snake_flatten()).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
