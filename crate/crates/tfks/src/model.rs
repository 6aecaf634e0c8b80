//! Parameter and state containers, the gauge transformation, and pointwise
//! residual evaluators for both frames of the system.
//!
//! The original frame carries the fields `(u, c)` and the tempered operators;
//! the gauged frame carries `v = e^{lambda t} u`, `w = e^{lambda t} c`, for
//! which the time derivative is a plain Caputo derivative and the tempering
//! reappears as explicit `e^{-lambda t}` coefficients:
//!
//! ```text
//! Eq 1:  D^alpha_t v = D v_xx - chi e^{-lambda t} (v_x w_x + v w_xx)
//!                      + r v - (r/K0) e^{-lambda t} v^2
//! Eq 2:  tau_c w_t   = (tau_c lambda - kappa) w + D_c w_xx + v
//! ```

use crate::error::{Error, Result};
use crate::frac_ops::{
    first_derivative_centered, tempered_laplacian_1d, CaputoL1, Extension, LaplacianSpec,
    TemperingRate,
};
use ndarray::Array2;
use std::fmt;
use std::io::{BufRead, Write};

/// The nine model coefficients plus the fractional order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Fractional time order, `0 < alpha < 2`.
    pub alpha: f64,
    /// Tempering rate (1/s), `lambda >= 0`.
    pub lambda: f64,
    /// Cell diffusivity.
    pub d: f64,
    /// Chemical diffusivity.
    pub d_c: f64,
    /// Chemotactic sensitivity.
    pub chi: f64,
    /// Growth rate (1/s).
    pub r: f64,
    /// Carrying capacity (density).
    pub k0: f64,
    /// Chemical decay (1/s).
    pub kappa: f64,
    /// Chemical time constant (s).
    pub tau_c: f64,
}

impl ModelParams {
    /// Validate the range invariants and return the parameters.
    pub fn validated(self) -> Result<Self> {
        let p = &self;
        if !(p.alpha.is_finite() && p.alpha > 0.0 && p.alpha < 2.0) {
            return Err(Error::OrderOutOfRange(p.alpha));
        }
        if !(p.lambda.is_finite() && p.lambda >= 0.0) {
            return Err(Error::InvalidTemperingRate(p.lambda));
        }
        for (name, v) in [
            ("d", p.d),
            ("d_c", p.d_c),
            ("chi", p.chi),
            ("r", p.r),
            ("k0", p.k0),
            ("kappa", p.kappa),
            ("tau_c", p.tau_c),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} = {v} must be finite and nonnegative"
                )));
            }
        }
        if p.r > 0.0 && p.k0 == 0.0 {
            return Err(Error::InvalidParams(
                "k0 must be positive when the growth rate r is positive".into(),
            ));
        }
        Ok(self)
    }

    /// `r / K0`, with the convention that it vanishes when `r = 0`.
    pub fn logistic_coef(&self) -> f64 {
        if self.r == 0.0 {
            0.0
        } else {
            self.r / self.k0
        }
    }

    /// `tau_c * lambda - kappa`, the coefficient of `w` in the gauged
    /// chemical equation.
    pub fn gauged_decay(&self) -> f64 {
        self.tau_c * self.lambda - self.kappa
    }

    /// True in the degenerate linear regime `chi = r = 0`.
    pub fn is_linear_regime(&self) -> bool {
        self.chi == 0.0 && self.r == 0.0
    }

    /// Guard for formulas that divide by `tau_c lambda - kappa`.
    pub fn require_nondegenerate_decay(&self) -> Result<()> {
        if self.gauged_decay() == 0.0 {
            return Err(Error::TauLambdaKappaDegenerate);
        }
        Ok(())
    }

    pub fn tempering(&self) -> TemperingRate {
        TemperingRate::new(self.lambda).expect("validated lambda")
    }
}

/// Spatial boundary handling for the difference stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Periodic,
    HomogeneousNeumann,
    HomogeneousDirichlet,
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BoundaryKind::Periodic => "periodic",
            BoundaryKind::HomogeneousNeumann => "homogeneous-neumann",
            BoundaryKind::HomogeneousDirichlet => "homogeneous-dirichlet",
        };
        f.write_str(s)
    }
}

/// Uniform space-time discretization.
///
/// Periodic grids place `nx` nodes on `[x0, x1)` with `dx = (x1-x0)/nx` (the
/// right endpoint is identified with the left); the other boundaries place
/// `nx` nodes on `[x0, x1]` inclusive. Time always has `nt` nodes on
/// `[0, t_final]` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x0: f64,
    pub x1: f64,
    pub nx: usize,
    pub t_final: f64,
    pub nt: usize,
    pub boundary: BoundaryKind,
}

impl GridSpec {
    pub fn new(
        x0: f64,
        x1: f64,
        nx: usize,
        t_final: f64,
        nt: usize,
        boundary: BoundaryKind,
    ) -> Result<Self> {
        if !(x0.is_finite() && x1.is_finite() && x1 > x0) {
            return Err(Error::InvalidGrid(format!(
                "need x1 > x0, got x0 = {x0}, x1 = {x1}"
            )));
        }
        if nx < 4 {
            return Err(Error::InvalidGrid(format!("nx = {nx} must be at least 4")));
        }
        if nt < 2 {
            return Err(Error::InvalidGrid(format!("nt = {nt} must be at least 2")));
        }
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "t_final = {t_final} must be positive"
            )));
        }
        Ok(Self {
            x0,
            x1,
            nx,
            t_final,
            nt,
            boundary,
        })
    }

    pub fn dx(&self) -> f64 {
        match self.boundary {
            BoundaryKind::Periodic => (self.x1 - self.x0) / self.nx as f64,
            _ => (self.x1 - self.x0) / (self.nx - 1) as f64,
        }
    }

    pub fn dt(&self) -> f64 {
        self.t_final / (self.nt - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx()
    }

    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ts(&self) -> Vec<f64> {
        (0..self.nt).map(|n| self.t(n)).collect()
    }
}

/// Which pair of dependent variables a trajectory samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// `(u, c)` of the tempered system.
    Original,
    /// `(v, w) = e^{lambda t} (u, c)`.
    Gauged,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frame::Original => "original",
            Frame::Gauged => "gauged",
        })
    }
}

/// Sampled field pair on a uniform grid, tagged with its frame.
///
/// Fields are stored time-major: `field[[n, i]]` is the value at time node
/// `n`, space node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: GridSpec,
    frame: Frame,
    field1: Array2<f64>,
    field2: Array2<f64>,
}

impl Trajectory {
    pub fn new(grid: GridSpec, frame: Frame, field1: Array2<f64>, field2: Array2<f64>) -> Result<Self> {
        let want = (grid.nt, grid.nx);
        for (name, f) in [("field1", &field1), ("field2", &field2)] {
            if f.dim() != want {
                return Err(Error::ShapeMismatch(format!(
                    "{name} has shape {:?}, grid wants {:?}",
                    f.dim(),
                    want
                )));
            }
        }
        Ok(Self {
            grid,
            frame,
            field1,
            field2,
        })
    }

    /// Sample closures `f1(t, x)`, `f2(t, x)` on the grid.
    pub fn from_fn<F1, F2>(grid: GridSpec, frame: Frame, f1: F1, f2: F2) -> Self
    where
        F1: Fn(f64, f64) -> f64,
        F2: Fn(f64, f64) -> f64,
    {
        let a = Array2::from_shape_fn((grid.nt, grid.nx), |(n, i)| f1(grid.t(n), grid.x(i)));
        let b = Array2::from_shape_fn((grid.nt, grid.nx), |(n, i)| f2(grid.t(n), grid.x(i)));
        Self {
            grid,
            frame,
            field1: a,
            field2: b,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn field1(&self) -> &Array2<f64> {
        &self.field1
    }

    pub fn field2(&self) -> &Array2<f64> {
        &self.field2
    }

    pub fn into_fields(self) -> (Array2<f64>, Array2<f64>) {
        (self.field1, self.field2)
    }

    pub fn require_frame(&self, expected: Frame) -> Result<()> {
        if self.frame != expected {
            return Err(Error::WrongFrame {
                expected,
                found: self.frame,
            });
        }
        Ok(())
    }

    /// Largest absolute value over both fields.
    pub fn sup_abs(&self) -> f64 {
        let m1 = self.field1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.field2.iter().fold(m1, |m, v| m.max(v.abs()))
    }
}

/// `v = e^{lambda t} u`, `w = e^{lambda t} c`; relabels the frame.
pub fn to_gauged(traj: &Trajectory, rate: TemperingRate) -> Result<Trajectory> {
    traj.require_frame(Frame::Original)?;
    Ok(scale_by_exp(traj, rate.value(), Frame::Gauged))
}

/// `u = e^{-lambda t} v`, `c = e^{-lambda t} w`; relabels the frame.
pub fn from_gauged(traj: &Trajectory, rate: TemperingRate) -> Result<Trajectory> {
    traj.require_frame(Frame::Gauged)?;
    Ok(scale_by_exp(traj, -rate.value(), Frame::Original))
}

fn scale_by_exp(traj: &Trajectory, signed_lambda: f64, frame: Frame) -> Trajectory {
    let grid = *traj.grid();
    let mut f1 = traj.field1().clone();
    let mut f2 = traj.field2().clone();
    for n in 0..grid.nt {
        let factor = (signed_lambda * grid.t(n)).exp();
        for i in 0..grid.nx {
            f1[[n, i]] *= factor;
            f2[[n, i]] *= factor;
        }
    }
    Trajectory {
        grid,
        frame,
        field1: f1,
        field2: f2,
    }
}

/// Which spatial operator stands in for the cell-diffusion term of the
/// original system.
#[derive(Debug, Clone, PartialEq)]
pub enum LaplacianMode {
    /// Centered second difference `u_xx` (the local limit).
    Local,
    /// The tempered fractional Laplacian with the given spec. Periodic grids
    /// use the periodic extension; bounded grids the compactly-supported one.
    Nonlocal(LaplacianSpec),
}

/// Per-equation residual fields and norms.
///
/// `eq1`/`eq2` have the shape of the trajectory fields. Rows with no defined
/// fractional derivative (`n < valid_from`, from the L1 node conventions) are
/// stored as zero and excluded from the `eq1` norms; the `eq2` norms run over
/// all rows. `l2` is the grid-averaged root mean square.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub eq1: Array2<f64>,
    pub eq2: Array2<f64>,
    pub sup: [f64; 2],
    pub l2: [f64; 2],
    pub valid_from: usize,
}

fn norms(field: &Array2<f64>, from_row: usize) -> (f64, f64) {
    let mut sup = 0.0f64;
    let mut sq = 0.0f64;
    let mut count = 0usize;
    for n in from_row..field.nrows() {
        for i in 0..field.ncols() {
            let v = field[[n, i]].abs();
            sup = sup.max(v);
            sq += v * v;
            count += 1;
        }
    }
    if count == 0 {
        (0.0, 0.0)
    } else {
        (sup, (sq / count as f64).sqrt())
    }
}

impl ResidualReport {
    fn from_fields(eq1: Array2<f64>, eq2: Array2<f64>, valid_from: usize) -> Self {
        let (s1, l1) = norms(&eq1, valid_from);
        let (s2, l2) = norms(&eq2, 0);
        Self {
            eq1,
            eq2,
            sup: [s1, s2],
            l2: [l1, l2],
            valid_from,
        }
    }
}

/// Centered first difference of one spatial row under the grid's boundary
/// convention (periodic wrap, mirror ghosts for Neumann, odd ghosts for
/// Dirichlet).
pub(crate) fn first_diff_row(row: &[f64], dx: f64, boundary: BoundaryKind, out: &mut [f64]) {
    let n = row.len();
    let two_dx = 2.0 * dx;
    for i in 1..n - 1 {
        out[i] = (row[i + 1] - row[i - 1]) / two_dx;
    }
    let (left_ghost, right_ghost) = ghosts(row, boundary);
    out[0] = (row[1] - left_ghost) / two_dx;
    out[n - 1] = (right_ghost - row[n - 2]) / two_dx;
}

/// Centered second difference of one spatial row, boundary-aware.
pub(crate) fn second_diff_row(row: &[f64], dx: f64, boundary: BoundaryKind, out: &mut [f64]) {
    let n = row.len();
    let dx2 = dx * dx;
    for i in 1..n - 1 {
        out[i] = (row[i + 1] - 2.0 * row[i] + row[i - 1]) / dx2;
    }
    let (left_ghost, right_ghost) = ghosts(row, boundary);
    out[0] = (row[1] - 2.0 * row[0] + left_ghost) / dx2;
    out[n - 1] = (right_ghost - 2.0 * row[n - 1] + row[n - 2]) / dx2;
}

fn ghosts(row: &[f64], boundary: BoundaryKind) -> (f64, f64) {
    let n = row.len();
    match boundary {
        BoundaryKind::Periodic => (row[n - 1], row[0]),
        BoundaryKind::HomogeneousNeumann => (row[1], row[n - 2]),
        BoundaryKind::HomogeneousDirichlet => (-row[1], -row[n - 2]),
    }
}

/// Caputo derivative applied down every column of a time-major field.
/// Returns the derivative field and the first row index at which the
/// approximation is defined.
pub(crate) fn caputo_columns(field: &Array2<f64>, dt: f64, alpha: f64) -> (Array2<f64>, usize) {
    let (nt, nx) = field.dim();
    let mut out = Array2::zeros((nt, nx));
    let mut col = vec![0.0; nt];
    let mut dcol = vec![0.0; nt];
    if alpha <= 1.0 {
        let kernel = CaputoL1::new(alpha, dt, nt);
        for i in 0..nx {
            for n in 0..nt {
                col[n] = field[[n, i]];
            }
            kernel.apply(&col, &mut dcol);
            for n in 0..nt {
                out[[n, i]] = dcol[n];
            }
        }
        (out, 1)
    } else {
        let kernel = CaputoL1::new(alpha - 1.0, dt, nt);
        let mut deriv = vec![0.0; nt];
        for i in 0..nx {
            for n in 0..nt {
                col[n] = field[[n, i]];
            }
            deriv.copy_from_slice(&first_derivative_centered(&col, dt));
            kernel.apply(&deriv, &mut dcol);
            dcol[1] = 0.0;
            for n in 0..nt {
                out[[n, i]] = dcol[n];
            }
        }
        (out, 2)
    }
}

/// Time derivative of every column: centered in the interior, one-sided
/// second-order at the first and last rows (first-order when only two rows).
fn time_derivative(field: &Array2<f64>, dt: f64) -> Array2<f64> {
    let (nt, nx) = field.dim();
    let mut out = Array2::zeros((nt, nx));
    if nt == 2 {
        for i in 0..nx {
            let d = (field[[1, i]] - field[[0, i]]) / dt;
            out[[0, i]] = d;
            out[[1, i]] = d;
        }
        return out;
    }
    for i in 0..nx {
        out[[0, i]] = (-3.0 * field[[0, i]] + 4.0 * field[[1, i]] - field[[2, i]]) / (2.0 * dt);
        for n in 1..nt - 1 {
            out[[n, i]] = (field[[n + 1, i]] - field[[n - 1, i]]) / (2.0 * dt);
        }
        out[[nt - 1, i]] = (3.0 * field[[nt - 1, i]] - 4.0 * field[[nt - 2, i]]
            + field[[nt - 3, i]])
            / (2.0 * dt);
    }
    out
}

/// The expanded chemotaxis combination `f_x g_x + f g_xx` for one row pair.
/// Shared by both residual evaluators and the marching solver so that the
/// two frames run the identical floating-point sequence.
pub(crate) fn chemotaxis_row(
    f: &[f64],
    g: &[f64],
    dx: f64,
    boundary: BoundaryKind,
    fx: &mut [f64],
    gx: &mut [f64],
    gxx: &mut [f64],
    out: &mut [f64],
) {
    first_diff_row(f, dx, boundary, fx);
    first_diff_row(g, dx, boundary, gx);
    second_diff_row(g, dx, boundary, gxx);
    for i in 0..f.len() {
        out[i] = fx[i] * gx[i] + f[i] * gxx[i];
    }
}

/// Residual of the gauged system. The fractional derivative is the L1 scheme
/// down each column; spatial derivatives are centered differences.
pub fn residual_gauged(traj: &Trajectory, params: &ModelParams) -> Result<ResidualReport> {
    residual_gauged_from_origin(traj, params, 0)
}

/// Like [`residual_gauged`], but the Caputo history starts at row 0 of the
/// trajectory while the residual (and the explicit `e^{-lambda t}`
/// coefficients) is assembled only for rows at and beyond `origin_row`, with
/// time measured from that row. Used by the symmetry checker to report the
/// retained-history convention for time-shifted trajectories; `origin_row = 0`
/// is the plain residual.
pub fn residual_gauged_from_origin(
    traj: &Trajectory,
    params: &ModelParams,
    origin_row: usize,
) -> Result<ResidualReport> {
    traj.require_frame(Frame::Gauged)?;
    let p = params.validated()?;
    let grid = traj.grid();
    let needed = if p.alpha > 1.0 { 3 } else { 2 };
    if grid.nt < needed + origin_row {
        return Err(Error::TooFewSamples {
            need: needed + origin_row,
            got: grid.nt,
        });
    }
    let dt = grid.dt();
    let dx = grid.dx();
    let (nt, nx) = (grid.nt, grid.nx);
    let rows_out = nt - origin_row;

    let (dv, valid_from) = caputo_columns(traj.field1(), dt, p.alpha);
    let wt = time_derivative(traj.field2(), dt);

    let lc = p.logistic_coef();
    let a2 = p.gauged_decay();

    let mut eq1 = Array2::zeros((rows_out, nx));
    let mut eq2 = Array2::zeros((rows_out, nx));
    let mut vxx = vec![0.0; nx];
    let mut wxx = vec![0.0; nx];
    let mut vx = vec![0.0; nx];
    let mut wx = vec![0.0; nx];
    let mut chem = vec![0.0; nx];

    let valid_out = valid_from.saturating_sub(origin_row);

    for n in origin_row..nt {
        let v_row: Vec<f64> = traj.field1().row(n).to_vec();
        let w_row: Vec<f64> = traj.field2().row(n).to_vec();
        let t_local = (n - origin_row) as f64 * dt;
        let damp = (-p.lambda * t_local).exp();
        second_diff_row(&v_row, dx, grid.boundary, &mut vxx);
        chemotaxis_row(
            &v_row,
            &w_row,
            dx,
            grid.boundary,
            &mut vx,
            &mut wx,
            &mut wxx,
            &mut chem,
        );
        let m = n - origin_row;
        for i in 0..nx {
            let rhs1 = p.d * vxx[i] - p.chi * damp * chem[i] + p.r * v_row[i]
                - lc * damp * v_row[i] * v_row[i];
            eq1[[m, i]] = dv[[n, i]] - rhs1;
            let rhs2 = a2 * w_row[i] + p.d_c * wxx[i] + v_row[i];
            eq2[[m, i]] = p.tau_c * wt[[n, i]] - rhs2;
        }
    }
    // mask rows before the first defined fractional node
    for n in 0..valid_out.min(rows_out) {
        for i in 0..nx {
            eq1[[n, i]] = 0.0;
        }
    }
    Ok(ResidualReport::from_fields(eq1, eq2, valid_out.min(rows_out)))
}

/// Residual of the original tempered system, with the tempered Caputo
/// derivative in time and either the local `u_xx` or the nonlocal tempered
/// fractional Laplacian in space.
pub fn residual_original(
    traj: &Trajectory,
    params: &ModelParams,
    mode: &LaplacianMode,
) -> Result<ResidualReport> {
    traj.require_frame(Frame::Original)?;
    let p = params.validated()?;
    let grid = traj.grid();
    let needed = if p.alpha > 1.0 { 3 } else { 2 };
    if grid.nt < needed {
        return Err(Error::TooFewSamples {
            need: needed,
            got: grid.nt,
        });
    }
    let dt = grid.dt();
    let dx = grid.dx();
    let (nt, nx) = (grid.nt, grid.nx);

    // tempered Caputo: e^{-lambda t} L1[e^{lambda t} u]
    let mut boosted = traj.field1().clone();
    for n in 0..nt {
        let factor = (p.lambda * grid.t(n)).exp();
        for i in 0..nx {
            boosted[[n, i]] *= factor;
        }
    }
    let (mut du, valid_from) = caputo_columns(&boosted, dt, p.alpha);
    for n in 0..nt {
        let factor = (-p.lambda * grid.t(n)).exp();
        for i in 0..nx {
            du[[n, i]] *= factor;
        }
    }

    let ct = time_derivative(traj.field2(), dt);
    let lc = p.logistic_coef();
    let extension = match grid.boundary {
        BoundaryKind::Periodic => Extension::Periodic,
        _ => Extension::CompactSupport,
    };

    let mut eq1 = Array2::zeros((nt, nx));
    let mut eq2 = Array2::zeros((nt, nx));
    let mut lap = vec![0.0; nx];
    let mut cxx = vec![0.0; nx];
    let mut ux = vec![0.0; nx];
    let mut cx = vec![0.0; nx];
    let mut chem = vec![0.0; nx];

    for n in 0..nt {
        let u_row: Vec<f64> = traj.field1().row(n).to_vec();
        let c_row: Vec<f64> = traj.field2().row(n).to_vec();
        match mode {
            LaplacianMode::Local => second_diff_row(&u_row, dx, grid.boundary, &mut lap),
            LaplacianMode::Nonlocal(spec) => {
                lap.copy_from_slice(&tempered_laplacian_1d(&u_row, dx, extension, spec)?)
            }
        }
        chemotaxis_row(
            &u_row,
            &c_row,
            dx,
            grid.boundary,
            &mut ux,
            &mut cx,
            &mut cxx,
            &mut chem,
        );
        for i in 0..nx {
            let rhs1 =
                p.d * lap[i] - p.chi * chem[i] + p.r * u_row[i] - lc * u_row[i] * u_row[i];
            eq1[[n, i]] = du[[n, i]] - rhs1;
            let rhs2 = p.d_c * cxx[i] - p.kappa * c_row[i] + u_row[i];
            eq2[[n, i]] = p.tau_c * ct[[n, i]] - rhs2;
        }
    }
    for n in 0..valid_from {
        for i in 0..nx {
            eq1[[n, i]] = 0.0;
        }
    }
    Ok(ResidualReport::from_fields(eq1, eq2, valid_from))
}

/// Write a trajectory in the interchange CSV format: header
/// `t,x,field1,field2,frame`, rows in time-major order, all values with 17
/// significant digits so doubles round-trip exactly.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: &mut W) -> Result<()> {
    let grid = traj.grid();
    writeln!(out, "t,x,field1,field2,frame")?;
    for n in 0..grid.nt {
        let t = grid.t(n);
        for i in 0..grid.nx {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{}",
                t,
                grid.x(i),
                traj.field1()[[n, i]],
                traj.field2()[[n, i]],
                traj.frame()
            )?;
        }
    }
    Ok(())
}

/// Read a trajectory written by [`write_trajectory_csv`]. The boundary kind
/// is not part of the format and must be supplied. Grid uniformity is
/// verified; a non-uniform file is rejected.
pub fn read_trajectory_csv<R: BufRead>(reader: R, boundary: BoundaryKind) -> Result<Trajectory> {
    let mut ts: Vec<f64> = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    let mut f1: Vec<f64> = Vec::new();
    let mut f2: Vec<f64> = Vec::new();
    let mut frame: Option<Frame> = None;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if lineno == 0 {
            if line.trim() != "t,x,field1,field2,frame" {
                return Err(Error::CsvParse {
                    line: 1,
                    msg: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(Error::CsvParse {
                line: lineno + 1,
                msg: format!("expected 5 fields, got {}", parts.len()),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| Error::CsvParse {
                line: lineno + 1,
                msg: format!("bad number {s:?}: {e}"),
            })
        };
        ts.push(parse(parts[0])?);
        xs.push(parse(parts[1])?);
        f1.push(parse(parts[2])?);
        f2.push(parse(parts[3])?);
        let row_frame = match parts[4].trim() {
            "original" => Frame::Original,
            "gauged" => Frame::Gauged,
            other => {
                return Err(Error::CsvParse {
                    line: lineno + 1,
                    msg: format!("unknown frame {other:?}"),
                })
            }
        };
        match frame {
            None => frame = Some(row_frame),
            Some(f) if f == row_frame => {}
            Some(_) => {
                return Err(Error::CsvParse {
                    line: lineno + 1,
                    msg: "inconsistent frame tags".into(),
                })
            }
        }
    }
    let total = ts.len();
    if total < 2 {
        return Err(Error::CsvParse {
            line: 0,
            msg: "no data rows".into(),
        });
    }
    // nx = run length of the leading time block
    let t0 = ts[0];
    let nx = ts.iter().take_while(|&&t| t == t0).count();
    if nx < 2 || total % nx != 0 {
        return Err(Error::CsvParse {
            line: 0,
            msg: format!("row count {total} is not a whole number of time blocks"),
        });
    }
    let nt = total / nx;
    let dx = xs[1] - xs[0];
    let dt = if nt > 1 { ts[nx] - ts[0] } else { 0.0 };
    let tol = |scale: f64| 1e-9 * scale.abs().max(1.0);
    for n in 0..nt {
        for i in 0..nx {
            let k = n * nx + i;
            if (xs[k] - (xs[0] + i as f64 * dx)).abs() > tol(dx * nx as f64) {
                return Err(Error::InvalidGrid("non-uniform spatial grid in csv".into()));
            }
            if (ts[k] - (n as f64 * dt + t0)).abs() > tol(dt * nt as f64) {
                return Err(Error::InvalidGrid("non-uniform time grid in csv".into()));
            }
        }
    }
    let x0 = xs[0];
    let x1 = match boundary {
        BoundaryKind::Periodic => x0 + dx * nx as f64,
        _ => xs[nx - 1],
    };
    let t_final = ts[total - 1] - t0;
    let grid = GridSpec::new(x0, x1, nx, t_final, nt, boundary)?;
    let field1 = Array2::from_shape_vec((nt, nx), f1)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let field2 = Array2::from_shape_vec((nt, nx), f2)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    Trajectory::new(grid, frame.unwrap_or(Frame::Original), field1, field2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params_linear(lambda: f64) -> ModelParams {
        ModelParams {
            alpha: 0.7,
            lambda,
            d: 1.0,
            d_c: 1.0,
            chi: 0.0,
            r: 0.0,
            k0: 1.0,
            kappa: 1.0,
            tau_c: 1.0,
        }
    }

    fn grid(nx: usize, nt: usize) -> GridSpec {
        GridSpec::new(0.0, 1.0, nx, 0.5, nt, BoundaryKind::Periodic).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(params_linear(0.5).validated().is_ok());
        assert!(ModelParams {
            alpha: 2.0,
            ..params_linear(0.0)
        }
        .validated()
        .is_err());
        assert!(ModelParams {
            lambda: -1.0,
            ..params_linear(0.0)
        }
        .validated()
        .is_err());
        assert!(ModelParams {
            r: 1.0,
            k0: 0.0,
            ..params_linear(0.0)
        }
        .validated()
        .is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(0.0, 1.0, 3, 1.0, 5, BoundaryKind::Periodic).is_err());
        assert!(GridSpec::new(1.0, 0.0, 8, 1.0, 5, BoundaryKind::Periodic).is_err());
        assert!(GridSpec::new(0.0, 1.0, 8, 1.0, 1, BoundaryKind::Periodic).is_err());
    }

    #[test]
    fn gauge_frame_checks() {
        let g = grid(8, 4);
        let traj = Trajectory::from_fn(g, Frame::Original, |_, _| 1.0, |_, _| 2.0);
        let rate = TemperingRate::new(0.3).unwrap();
        let gauged = to_gauged(&traj, rate).unwrap();
        assert_eq!(gauged.frame(), Frame::Gauged);
        assert!(to_gauged(&gauged, rate).is_err());
        assert!(from_gauged(&traj, rate).is_err());
    }

    #[test]
    fn gauge_lambda_zero_is_bitwise_relabel() {
        let g = grid(8, 4);
        let traj = Trajectory::from_fn(g, Frame::Original, |t, x| t + x, |t, x| t * x);
        let rate = TemperingRate::new(0.0).unwrap();
        let gauged = to_gauged(&traj, rate).unwrap();
        assert_eq!(traj.field1(), gauged.field1());
        assert_eq!(traj.field2(), gauged.field2());
    }

    #[test]
    fn gauge_round_trip_machine_precision() {
        let g = grid(10, 6);
        let traj = Trajectory::from_fn(g, Frame::Original, |t, x| (t + x).sin(), |t, x| t - x);
        let rate = TemperingRate::new(1.3).unwrap();
        let back = from_gauged(&to_gauged(&traj, rate).unwrap(), rate).unwrap();
        for (a, b) in traj.field1().iter().zip(back.field1().iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
    }

    #[test]
    fn constant_steady_state_has_zero_residuals() {
        // v = K0, w = K0/kappa at lambda = 0 solves the gauged system.
        let p = ModelParams {
            alpha: 0.6,
            lambda: 0.0,
            d: 0.4,
            d_c: 0.8,
            chi: 1.1,
            r: 0.9,
            k0: 2.0,
            kappa: 0.5,
            tau_c: 1.5,
        };
        let g = grid(12, 9);
        let traj = Trajectory::from_fn(g, Frame::Gauged, |_, _| p.k0, |_, _| p.k0 / p.kappa);
        let rep = residual_gauged(&traj, &p).unwrap();
        assert!(rep.sup[0] < 1e-12, "eq1 sup {}", rep.sup[0]);
        assert!(rep.sup[1] < 1e-12, "eq2 sup {}", rep.sup[1]);
    }

    #[test]
    fn random_fields_have_positive_residual_norms() {
        let p = params_linear(0.4);
        let g = grid(8, 6);
        // deterministic pseudo-random-looking fields
        let traj = Trajectory::from_fn(
            g,
            Frame::Gauged,
            |t, x| (31.0 * t + 17.0 * x).sin() + 0.3,
            |t, x| (13.0 * t - 7.0 * x).cos(),
        );
        let rep = residual_gauged(&traj, &p).unwrap();
        assert!(rep.sup[0] > 0.0 && rep.sup[1] > 0.0);
        assert!(rep.l2[0] > 0.0 && rep.l2[1] > 0.0);
    }

    #[test]
    fn x_constant_fields_have_exactly_zero_spatial_terms() {
        // With x-constant fields every spatial stencil must return exactly 0,
        // so the chi and diffusion terms drop out bitwise.
        let row = vec![3.7; 16];
        let mut out = vec![1.0; 16];
        for b in [
            BoundaryKind::Periodic,
            BoundaryKind::HomogeneousNeumann,
        ] {
            second_diff_row(&row, 0.1, b, &mut out);
            assert!(out.iter().all(|&v| v == 0.0));
            first_diff_row(&row, 0.1, b, &mut out);
            assert!(out.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let g = GridSpec::new(-1.0, 1.0, 5, 0.25, 3, BoundaryKind::HomogeneousNeumann).unwrap();
        let traj = Trajectory::from_fn(
            g,
            Frame::Gauged,
            |t, x| (t * 3.1 + x).sin() * 1e-7,
            |t, x| t - x * 0.3333333333333333,
        );
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        let back = read_trajectory_csv(&buf[..], BoundaryKind::HomogeneousNeumann).unwrap();
        assert_eq!(back.frame(), Frame::Gauged);
        assert_eq!(back.grid().nx, 5);
        assert_eq!(back.grid().nt, 3);
        assert_eq!(traj.field1(), back.field1());
        assert_eq!(traj.field2(), back.field2());
    }

    #[test]
    fn csv_rejects_garbage() {
        let bad = "t,x,field1,field2,frame\n1,2,3\n";
        assert!(read_trajectory_csv(bad.as_bytes(), BoundaryKind::Periodic).is_err());
        let bad_header = "a,b\n";
        assert!(read_trajectory_csv(bad_header.as_bytes(), BoundaryKind::Periodic).is_err());
    }
}
