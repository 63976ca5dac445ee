//! Finite-difference model of a clamped plate on a Winkler foundation.

use alloc::vec::Vec;

use crate::eki::ForwardModel;
use crate::error::{Error, Result, SolveContext};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::linalg::{self, SymBandMatrix};

/// Smallest `n` for which the 13-point stencil has a fully interior row.
pub const MIN_STENCIL_N: usize = 4;

/// Relative residual every accepted forward solve must meet.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// Offsets and integer weights of the 13-point biharmonic stencil.
pub const STENCIL: [(i32, i32, i32); 13] = [
    (0, 0, 20),
    (-1, 0, -8),
    (1, 0, -8),
    (0, -1, -8),
    (0, 1, -8),
    (-1, -1, 2),
    (1, -1, 2),
    (-1, 1, 2),
    (1, 1, 2),
    (-2, 0, 1),
    (2, 0, 1),
    (0, -2, 1),
    (0, 2, 1),
];

/// Flexural rigidity `E·h³ / (12(1 - ν²))`.
pub fn flexural_rigidity(young: f64, poisson: f64, thickness: f64) -> Result<f64> {
    if !(young > 0.0 && young.is_finite()) {
        return Err(Error::invalid("E", "Young's modulus must be positive"));
    }
    if !(thickness > 0.0 && thickness.is_finite()) {
        return Err(Error::invalid("h", "thickness must be positive"));
    }
    if !(poisson > -1.0 && poisson < 0.5) {
        return Err(Error::invalid(
            "nu",
            "Poisson's ratio must lie in (-1, 0.5)",
        ));
    }
    Ok(young * thickness * thickness * thickness / (12.0 * (1.0 - poisson * poisson)))
}

/// Plate stiffness and the point load it carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateModel {
    /// Flexural rigidity `D`.
    pub rigidity: f64,
    /// Load intensity `f`.
    pub force: f64,
    /// Load application point `P0`.
    pub point: (f64, f64),
    /// Precision `s` of the Gaussian standing in for the Dirac delta
    /// (variance `1/s` per axis).
    pub precision: f64,
}

impl Default for PlateModel {
    fn default() -> Self {
        PlateModel {
            rigidity: 1.0,
            force: 1.0,
            point: (0.5, 0.5),
            precision: 1e5,
        }
    }
}

impl PlateModel {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.rigidity > 0.0 && self.rigidity.is_finite()) {
            return Err(Error::invalid("D", "flexural rigidity must be positive"));
        }
        if !(self.force > 0.0 && self.force.is_finite()) {
            return Err(Error::invalid("f", "load intensity must be positive"));
        }
        if !(self.precision > 0.0 && self.precision.is_finite()) {
            return Err(Error::invalid("s", "delta precision must be positive"));
        }
        if !grid.contains_strictly(self.point.0, self.point.1) {
            return Err(Error::invalid(
                "P0",
                "load point must lie strictly inside the domain",
            ));
        }
        Ok(())
    }
}

/// Discrete clamped biharmonic operator `B`, `(n-1)² x (n-1)²`.
///
/// Integer stencil weights are kept unscaled; [`BiharmonicMatrix::get`] and
/// [`BiharmonicMatrix::matvec`] apply the `1/h⁴` factor.
#[derive(Debug, Clone, PartialEq)]
pub struct BiharmonicMatrix {
    grid: Grid,
    stencil: SymBandMatrix,
    scale: f64,
}

/// Assemble the 13-point operator with clamped edges.
///
/// Boundary nodes hold `w = 0`. Ghost nodes one step outside are eliminated
/// through `∂w/∂n = 0`, i.e. `w(-1, j) = w(1, j)`, which folds the far
/// stencil weight back onto the diagonal: 21 next to one edge, 22 in the
/// interior corners.
pub fn assemble_biharmonic(grid: &Grid) -> Result<BiharmonicMatrix> {
    let n = grid.n();
    if n < MIN_STENCIL_N {
        return Err(Error::GridTooSmall {
            n,
            min: MIN_STENCIL_N,
        });
    }
    let side = grid.side();
    let mut stencil = SymBandMatrix::zeros(grid.len(), 2 * side);
    let n = n as i32;
    // Maps an index in -1..=n+1 to an interior index, or None on the boundary.
    let resolve = |t: i32| -> Option<usize> {
        match t {
            -1 => Some(1),
            t if t == n + 1 => Some((n - 1) as usize),
            t if t == 0 || t == n => None,
            t => Some(t as usize),
        }
    };
    for (row, (i, j)) in grid.nodes().enumerate() {
        for &(di, dj, w) in &STENCIL {
            let (Some(ti), Some(tj)) = (resolve(i as i32 + di), resolve(j as i32 + dj)) else {
                continue;
            };
            let col = grid.index(ti, tj);
            if col <= row {
                let v = stencil.get(row, col) + w as f64;
                stencil.set(row, col, v);
            }
        }
    }
    let h = grid.h();
    Ok(BiharmonicMatrix {
        grid: *grid,
        stencil,
        scale: 1.0 / (h * h * h * h),
    })
}

impl BiharmonicMatrix {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.stencil.dim()
    }

    /// `1/h⁴`
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Unscaled integer stencil weight at `(r, c)`.
    pub fn stencil_entry(&self, r: usize, c: usize) -> i64 {
        self.stencil.get(r, c) as i64
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.stencil.get(r, c) * self.scale
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.stencil.matvec(x);
        y.iter_mut().for_each(|v| *v *= self.scale);
        y
    }

    /// Scaled non-zeros as `(row, col, value)`, row-major.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = self.stencil.triplets();
        t.iter_mut().for_each(|e| e.2 *= self.scale);
        t
    }

    /// `alpha·B + diag(d)` as a band matrix.
    pub fn shifted(&self, alpha: f64, diag: &[f64]) -> SymBandMatrix {
        let mut a = self.stencil.clone();
        a.scale(alpha * self.scale);
        a.add_diagonal(diag);
        a
    }

    /// Dense row-major copy, scaled.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = self.stencil.to_dense();
        d.iter_mut().for_each(|v| *v *= self.scale);
        d
    }
}

/// Point load `f·δ(P0)` approximated by a normal density of covariance
/// `diag(1/s, 1/s)`, sampled at the interior nodes and rescaled so that
/// `h²·Σ load = f` on every grid.
pub fn gaussian_load(grid: &Grid, model: &PlateModel) -> Result<ScalarField> {
    model.validate(grid)?;
    let (px, py) = model.point;
    // Log-density relative to its maximum.
    let mut field = ScalarField::from_fn(*grid, |x, y| {
        -0.5 * model.precision * ((x - px) * (x - px) + (y - py) * (y - py))
    });
    let peak = field
        .values()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let values = field.values_mut();
    values.iter_mut().for_each(|v| *v = libm::exp(*v - peak));
    let h = grid.h();
    let mass = h * h * values.iter().sum::<f64>();
    values.iter_mut().for_each(|v| *v *= model.force / mass);
    Ok(field)
}

/// Solve `(D·B + diag(k)) w = load`.
///
/// Fails with [`Error::Solver`] when the matrix is not positive definite or
/// the relative residual stays above [`SOLVE_TOLERANCE`].
pub fn forward_solve(
    bih: &BiharmonicMatrix,
    k: &ScalarField,
    load: &ScalarField,
    rigidity: f64,
) -> Result<ScalarField> {
    if k.grid() != bih.grid() || load.grid() != bih.grid() {
        return Err(Error::GridMismatch);
    }
    let w = solve_raw(bih, k.values(), load.values(), rigidity)?;
    ScalarField::new(*bih.grid(), w)
}

pub(crate) fn solve_raw(
    bih: &BiharmonicMatrix,
    k: &[f64],
    load: &[f64],
    rigidity: f64,
) -> Result<Vec<f64>> {
    let dim = bih.dim();
    if k.len() != dim || load.len() != dim {
        return Err(Error::ShapeMismatch {
            expected: dim,
            found: k.len().min(load.len()),
        });
    }
    let load_norm = linalg::norm(load);
    if load_norm == 0.0 {
        return Ok(alloc::vec![0.0; dim]);
    }
    let a = bih.shifted(rigidity, k);
    let chol = a.cholesky().map_err(|e| Error::Solver {
        pivot: e.pivot,
        context: SolveContext::default(),
    })?;
    let mut w = load.to_vec();
    chol.solve_in_place(&mut w);
    // Iterative refinement, at most three corrections.
    for _ in 0..3 {
        let aw = a.matvec(&w);
        let mut r: Vec<f64> = load.iter().zip(&aw).map(|(b, x)| b - x).collect();
        if linalg::norm(&r) <= SOLVE_TOLERANCE * load_norm {
            return Ok(w);
        }
        chol.solve_in_place(&mut r);
        linalg::axpy(1.0, &r, &mut w);
    }
    Err(Error::Solver {
        pivot: dim,
        context: SolveContext::default(),
    })
}

/// Grid, plate parameters, assembled operator and load: everything the
/// forward map `k ↦ w` needs.
#[derive(Debug, Clone)]
pub struct PlateSystem {
    model: PlateModel,
    bih: BiharmonicMatrix,
    load: ScalarField,
}

impl PlateSystem {
    pub fn new(grid: Grid, model: PlateModel) -> Result<Self> {
        let bih = assemble_biharmonic(&grid)?;
        let load = gaussian_load(&grid, &model)?;
        Ok(PlateSystem { model, bih, load })
    }

    pub fn grid(&self) -> &Grid {
        self.bih.grid()
    }

    pub fn model(&self) -> &PlateModel {
        &self.model
    }

    pub fn biharmonic(&self) -> &BiharmonicMatrix {
        &self.bih
    }

    pub fn load(&self) -> &ScalarField {
        &self.load
    }

    /// Deflection under the stored load for subgrade coefficient `k`.
    pub fn forward_map(&self, k: &ScalarField) -> Result<ScalarField> {
        forward_solve(&self.bih, k, &self.load, self.model.rigidity)
    }
}

impl ForwardModel for PlateSystem {
    fn input_dim(&self) -> usize {
        self.bih.dim()
    }

    fn output_dim(&self) -> usize {
        self.bih.dim()
    }

    fn evaluate(&self, params: &[f64]) -> Result<Vec<f64>> {
        solve_raw(&self.bih, params, self.load.values(), self.model.rigidity)
    }
}
