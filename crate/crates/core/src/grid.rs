use crate::error::{Error, Result};

/// Uniform `(n+1) x (n+1)` grid on an axis-aligned square.
///
/// Only the `(n-1)^2` interior nodes carry unknowns. Node `(i, j)` has
/// `1 <= i, j <= n-1`, `i` running along x and `j` along y; flat indices are
/// row-major with rows of constant `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Grid {
    /// Grid on the unit square.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, [0.0, 1.0], [0.0, 1.0])
    }

    pub fn new(n: usize, x: [f64; 2], y: [f64; 2]) -> Result<Self> {
        if n < 2 {
            return Err(Error::GridTooSmall { n, min: 2 });
        }
        let (wx, wy) = (x[1] - x[0], y[1] - y[0]);
        if !(wx > 0.0 && wy > 0.0 && wx.is_finite() && wy.is_finite()) {
            return Err(Error::invalid(
                "domain",
                "must be a non-degenerate finite rectangle",
            ));
        }
        if (wx - wy).abs() > 1e-12 * wx {
            return Err(Error::invalid("domain", "cells must be square"));
        }
        Ok(Grid {
            n,
            x0: x[0],
            x1: x[1],
            y0: y[0],
            y1: y[1],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Mesh width `h_s`.
    pub fn h(&self) -> f64 {
        (self.x1 - self.x0) / self.n as f64
    }

    /// Interior nodes per axis, `n - 1`.
    pub fn side(&self) -> usize {
        self.n - 1
    }

    /// Number of unknowns, `(n-1)^2`.
    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x_range(&self) -> [f64; 2] {
        [self.x0, self.x1]
    }

    pub fn y_range(&self) -> [f64; 2] {
        [self.y0, self.y1]
    }

    /// Flat index of interior node `(i, j)`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!((1..self.n).contains(&i) && (1..self.n).contains(&j));
        (j - 1) * self.side() + (i - 1)
    }

    /// Inverse of [`Grid::index`].
    pub fn node(&self, idx: usize) -> (usize, usize) {
        (idx % self.side() + 1, idx / self.side() + 1)
    }

    // `x0 + width * i / n`: 3/10 is the same double as the literal 0.3.
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + (self.x1 - self.x0) * i as f64 / self.n as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + (self.y1 - self.y0) * j as f64 / self.n as f64
    }

    /// Coordinates of the interior node with flat index `idx`.
    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.node(idx);
        (self.x(i), self.y(j))
    }

    /// Whether `(x, y)` lies strictly inside the domain.
    pub fn contains_strictly(&self, x: f64, y: f64) -> bool {
        x > self.x0 && x < self.x1 && y > self.y0 && y < self.y1
    }

    /// Iterator over `(i, j)` of interior nodes in flat-index order.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).map(move |idx| self.node(idx))
    }
}
