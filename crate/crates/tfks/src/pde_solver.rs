//! Time-marching solvers for the gauged system and, through the gauge or by
//! direct tempered-L1 marching, for the original tempered system.
//!
//! Each step advances the cell equation by the L1 Caputo discretization with
//! theta-weighted implicit diffusion and the chemotaxis/logistic terms frozen
//! at the previous level, then advances the chemical equation by a
//! theta-scheme on its linear right side with the cell field taken at the new
//! level. Every step is one (cyclic) tridiagonal solve per equation.
//!
//! The marching core is restricted to `0 < alpha <= 1`: advancing the L1
//! scheme past order one would need a second initial condition that the model
//! does not carry. Residual evaluation and the reduced ODE solvers cover the
//! full `0 < alpha < 2` range.

use crate::error::{Error, Result};
use crate::frac_ops::CaputoL1;
use crate::model::{
    chemotaxis_row, from_gauged, second_diff_row, BoundaryKind, Frame, GridSpec, ModelParams,
    Trajectory,
};
use ndarray::Array2;

/// Field-norm ceiling beyond which a solve is reported as blown up.
pub const BLOWUP_LIMIT: f64 = 1e12;

/// How diffusion is weighted between the new and old level. `theta = 1` is
/// backward Euler (the default, unconditionally stable); `theta = 0.5` is
/// Crank-Nicolson.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub theta: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub history_mode: HistoryMode,
}

/// Storage policy for the Caputo history. Only the full-memory variant is
/// implemented; the sum stays O(nt^2) by design at desk scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistoryMode {
    Full,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            theta: 1.0,
            newton_tol: 1e-10,
            newton_max_iter: 25,
            history_mode: HistoryMode::Full,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && (0.0..=1.0).contains(&self.theta)) {
            return Err(Error::InvalidParams(format!(
                "theta = {} must lie in [0, 1]",
                self.theta
            )));
        }
        if !(self.newton_tol.is_finite() && self.newton_tol > 0.0) {
            return Err(Error::InvalidParams(format!(
                "newton_tol = {} must be positive",
                self.newton_tol
            )));
        }
        Ok(())
    }
}

/// Diagnostics of one solve. `min_field1` is the smallest value the first
/// field reached anywhere (the no-negativity watch: monitored, never
/// enforced); `initial_sup` is the sup norm of the initial first field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub steps: usize,
    pub min_field1: f64,
    pub initial_sup: f64,
    pub max_abs: f64,
}

/// Which route `solve_original` takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolvePath {
    /// Transform to the gauged frame, march there, transform back.
    Gauge,
    /// March the tempered system directly with the tempered-L1 derivative.
    Direct,
}

/// Tridiagonal system with optional periodic corner entries, solved by the
/// Thomas algorithm (Sherman-Morrison correction in the periodic case).
struct Tridiag {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    /// `(top-right, bottom-left)` corner entries for periodic wrap.
    corners: Option<(f64, f64)>,
}

impl Tridiag {
    /// Matrix `diag_shift * I - coef * L` where `L` is the boundary-aware
    /// second-difference operator.
    fn shifted_laplacian(
        nx: usize,
        dx: f64,
        boundary: BoundaryKind,
        diag_shift: f64,
        coef: f64,
    ) -> Self {
        let s = coef / (dx * dx);
        let mut sub = vec![-s; nx];
        let mut sup = vec![-s; nx];
        let diag = vec![diag_shift + 2.0 * s; nx];
        let mut corners = None;
        match boundary {
            BoundaryKind::Periodic => {
                corners = Some((-s, -s));
            }
            BoundaryKind::HomogeneousNeumann => {
                // mirror ghost: the boundary row couples twice to its inner neighbor
                sup[0] = -2.0 * s;
                sub[nx - 1] = -2.0 * s;
            }
            BoundaryKind::HomogeneousDirichlet => {
                // odd ghost -u[1] cancels the inner coupling; the diagonal
                // keeps the full 2s shift
                sup[0] = 0.0;
                sub[nx - 1] = 0.0;
            }
        }
        Self {
            sub,
            diag,
            sup,
            corners,
        }
    }

    fn solve(&self, rhs: &[f64], x: &mut Vec<f64>) -> Result<()> {
        match self.corners {
            None => {
                thomas(&self.sub, &self.diag, &self.sup, rhs, x);
                Ok(())
            }
            Some((top_right, bottom_left)) => {
                cyclic_thomas(&self.sub, &self.diag, &self.sup, top_right, bottom_left, rhs, x)
            }
        }
    }
}

/// Plain Thomas elimination; `sub[0]` and `sup[n-1]` are ignored.
fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64], x: &mut Vec<f64>) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    x.clear();
    x.resize(n, 0.0);
    let mut beta = diag[0];
    x[0] = rhs[0] / beta;
    for i in 1..n {
        c[i] = sup[i - 1] / beta;
        beta = diag[i] - sub[i] * c[i];
        x[i] = (rhs[i] - sub[i] * x[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i + 1] * next;
    }
}

/// Cyclic tridiagonal solve by the Sherman-Morrison rank-one correction.
fn cyclic_thomas(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    top_right: f64,
    bottom_left: f64,
    rhs: &[f64],
    x: &mut Vec<f64>,
) -> Result<()> {
    let n = diag.len();
    if n < 3 {
        return Err(Error::ShapeMismatch(
            "cyclic tridiagonal systems need at least 3 unknowns".into(),
        ));
    }
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= top_right * bottom_left / gamma;
    let mut y = Vec::new();
    thomas(sub, &d, sup, rhs, &mut y);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = bottom_left;
    let mut z = Vec::new();
    thomas(sub, &d, sup, &u, &mut z);
    let denom = 1.0 + z[0] + top_right * z[n - 1] / gamma;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::SingularJacobian);
    }
    let factor = (y[0] + top_right * y[n - 1] / gamma) / denom;
    x.clear();
    x.extend(y.iter().zip(z.iter()).map(|(yi, zi)| yi - factor * zi));
    Ok(())
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn check_blowup(step: usize, fields: [&[f64]; 2]) -> Result<f64> {
    let norm = sup_norm(fields[0]).max(sup_norm(fields[1]));
    if !norm.is_finite() || norm > BLOWUP_LIMIT {
        return Err(Error::BlowUp {
            step,
            norm,
            limit: BLOWUP_LIMIT,
        });
    }
    Ok(norm)
}

fn validate_inputs(
    params: &ModelParams,
    grid: &GridSpec,
    f1_0: &[f64],
    f2_0: &[f64],
    cfg: &SolverConfig,
) -> Result<()> {
    params.validated()?;
    cfg.validate()?;
    if params.alpha > 1.0 {
        return Err(Error::UnsupportedPdeOrder {
            alpha: params.alpha,
        });
    }
    if params.tau_c <= 0.0 {
        return Err(Error::InvalidParams(
            "tau_c must be positive for time marching".into(),
        ));
    }
    if f1_0.len() != grid.nx || f2_0.len() != grid.nx {
        return Err(Error::ShapeMismatch(format!(
            "initial data length {} / {} does not match nx = {}",
            f1_0.len(),
            f2_0.len(),
            grid.nx
        )));
    }
    if f1_0.iter().chain(f2_0.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteData);
    }
    Ok(())
}

/// March the gauged system from `(v0, w0)`.
pub fn solve_gauged(
    params: &ModelParams,
    grid: &GridSpec,
    v0: &[f64],
    w0: &[f64],
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    solve_gauged_with_report(params, grid, v0, w0, cfg).map(|(t, _)| t)
}

/// March the gauged system, also returning solve diagnostics.
pub fn solve_gauged_with_report(
    params: &ModelParams,
    grid: &GridSpec,
    v0: &[f64],
    w0: &[f64],
    cfg: &SolverConfig,
) -> Result<(Trajectory, SolveReport)> {
    validate_inputs(params, grid, v0, w0, cfg)?;
    march(params, grid, v0, w0, cfg, false)
}

/// Solve the original tempered system from `(u0, c0)`.
///
/// The gauge path composes `from_gauged(solve_gauged(to_gauged(data)))`; at
/// `t = 0` the gauge factor is one, so the initial data transfer is exact.
/// The direct path marches the tempered-L1 discretization of the original
/// system with the local Laplacian. With `lambda = 0` the two paths execute
/// identical discrete operators and coincide bitwise.
pub fn solve_original(
    params: &ModelParams,
    grid: &GridSpec,
    u0: &[f64],
    c0: &[f64],
    cfg: &SolverConfig,
    path: SolvePath,
) -> Result<Trajectory> {
    validate_inputs(params, grid, u0, c0, cfg)?;
    match path {
        SolvePath::Gauge => {
            // v0 = u0, w0 = c0: the gauge factor at t = 0 is exactly one
            let (gauged, _) = march(params, grid, u0, c0, cfg, false)?;
            from_gauged(&gauged, params.tempering())
        }
        SolvePath::Direct => march(params, grid, u0, c0, cfg, true).map(|(t, _)| t),
    }
}

/// Shared marching core. With `tempered = false` it advances the gauged
/// system in `(v, w)`; with `tempered = true` it advances the original system
/// in `(u, c)` using the tempered-L1 derivative (history taken on
/// `g = e^{lambda t} u`).
fn march(
    params: &ModelParams,
    grid: &GridSpec,
    f1_0: &[f64],
    f2_0: &[f64],
    cfg: &SolverConfig,
    tempered: bool,
) -> Result<(Trajectory, SolveReport)> {
    let p = *params;
    let (nt, nx) = (grid.nt, grid.nx);
    let dt = grid.dt();
    let dx = grid.dx();
    let theta = cfg.theta;

    let kernel = CaputoL1::new(p.alpha, dt, nt);
    let scale = kernel.scale();
    let b = kernel.weights(); // b_j, j = 0..nt-2
    // history uses b_{j-1} - b_j; for alpha = 1 the history vanishes entirely
    let classical = p.alpha == 1.0;
    let db: Vec<f64> = if classical {
        Vec::new()
    } else {
        (1..b.len()).map(|j| b[j - 1] - b[j]).collect()
    };
    let b_tail = |n: usize| -> f64 {
        // weight of the initial level in the history at step n
        if classical {
            if n == 1 {
                1.0
            } else {
                0.0
            }
        } else {
            b[n - 1]
        }
    };

    // matrices are constant in time
    let eq1_matrix =
        Tridiag::shifted_laplacian(nx, dx, grid.boundary, scale, theta * p.d);
    let a2 = p.gauged_decay(); // gauged Eq 2 coefficient
    let eq2_coef = if tempered { -p.kappa } else { a2 };
    let eq2_matrix = Tridiag::shifted_laplacian(
        nx,
        dx,
        grid.boundary,
        p.tau_c / dt - theta * eq2_coef,
        theta * p.d_c,
    );

    let mut field1 = Array2::zeros((nt, nx));
    let mut field2 = Array2::zeros((nt, nx));
    for i in 0..nx {
        field1[[0, i]] = f1_0[i];
        field2[[0, i]] = f2_0[i];
    }
    // tempered path: history of g = e^{lambda t} u
    let mut hist = Array2::zeros((if tempered { nt } else { 1 }, nx));
    if tempered {
        for i in 0..nx {
            hist[[0, i]] = f1_0[i]; // e^0 = 1
        }
    }

    let mut report = SolveReport {
        steps: nt - 1,
        min_field1: f1_0.iter().cloned().fold(f64::INFINITY, f64::min),
        initial_sup: sup_norm(f1_0),
        max_abs: sup_norm(f1_0).max(sup_norm(f2_0)),
    };

    let mut history = vec![0.0; nx];
    let mut prev_f1 = vec![0.0; nx];
    let mut prev_f2 = vec![0.0; nx];
    let mut f1xx = vec![0.0; nx];
    let mut f2xx = vec![0.0; nx];
    let mut f1x = vec![0.0; nx];
    let mut f2x = vec![0.0; nx];
    let mut chem = vec![0.0; nx];
    let mut rhs = vec![0.0; nx];
    let mut new_f1 = Vec::with_capacity(nx);
    let mut new_f2 = Vec::with_capacity(nx);
    let lc = p.logistic_coef();

    for n in 1..nt {
        for i in 0..nx {
            prev_f1[i] = field1[[n - 1, i]];
            prev_f2[i] = field2[[n - 1, i]];
        }

        // L1 history term: sum_{j=1}^{n-1} (b_{j-1}-b_j) f^{n-j} + b_{n-1} f^0
        let tail = b_tail(n);
        if tempered {
            for i in 0..nx {
                let mut acc = tail * hist[[0, i]];
                for (j, &w) in db.iter().take(n - 1).enumerate() {
                    acc += w * hist[[n - 1 - j, i]];
                }
                history[i] = acc;
            }
        } else {
            for i in 0..nx {
                let mut acc = tail * field1[[0, i]];
                for (j, &w) in db.iter().take(n - 1).enumerate() {
                    acc += w * field1[[n - 1 - j, i]];
                }
                history[i] = acc;
            }
        }

        // explicit terms frozen at the previous level
        second_diff_row(&prev_f1, dx, grid.boundary, &mut f1xx);
        chemotaxis_row(
            &prev_f1,
            &prev_f2,
            dx,
            grid.boundary,
            &mut f1x,
            &mut f2x,
            &mut f2xx,
            &mut chem,
        );
        let damp_prev = if tempered {
            1.0
        } else {
            (-p.lambda * grid.t(n - 1)).exp()
        };
        let hist_damp = if tempered {
            (-p.lambda * grid.t(n)).exp()
        } else {
            1.0
        };
        for i in 0..nx {
            let nonlinear = -p.chi * damp_prev * chem[i] + p.r * prev_f1[i]
                - lc * damp_prev * prev_f1[i] * prev_f1[i];
            rhs[i] = hist_damp * (scale * history[i])
                + (1.0 - theta) * p.d * f1xx[i]
                + nonlinear;
        }
        eq1_matrix.solve(&rhs, &mut new_f1)?;

        // chemical equation: theta scheme, cell source at the new level
        second_diff_row(&prev_f2, dx, grid.boundary, &mut f2xx);
        for i in 0..nx {
            rhs[i] = (p.tau_c / dt) * prev_f2[i]
                + (1.0 - theta) * (eq2_coef * prev_f2[i] + p.d_c * f2xx[i])
                + new_f1[i];
        }
        eq2_matrix.solve(&rhs, &mut new_f2)?;

        let norm = check_blowup(n, [&new_f1, &new_f2])?;
        report.max_abs = report.max_abs.max(norm);
        for i in 0..nx {
            field1[[n, i]] = new_f1[i];
            field2[[n, i]] = new_f2[i];
            if new_f1[i] < report.min_field1 {
                report.min_field1 = new_f1[i];
            }
        }
        if tempered {
            let boost = (p.lambda * grid.t(n)).exp();
            for i in 0..nx {
                hist[[n, i]] = boost * field1[[n, i]];
            }
        }
    }

    let frame = if tempered { Frame::Original } else { Frame::Gauged };
    Ok((Trajectory::new(*grid, frame, field1, field2)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BoundaryKind;
    use approx::assert_relative_eq;

    fn linear_params(alpha: f64, lambda: f64) -> ModelParams {
        ModelParams {
            alpha,
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

    #[test]
    fn tridiagonal_solver_matches_dense() {
        use nalgebra::{DMatrix, DVector};
        let n = 12;
        let sub: Vec<f64> = (0..n).map(|i| -0.3 - 0.01 * i as f64).collect();
        let mut diag: Vec<f64> = (0..n).map(|i| 2.0 + 0.1 * i as f64).collect();
        let sup: Vec<f64> = (0..n).map(|i| -0.4 + 0.02 * i as f64).collect();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();

        // plain
        let tri = Tridiag {
            sub: sub.clone(),
            diag: diag.clone(),
            sup: sup.clone(),
            corners: None,
        };
        let mut x = Vec::new();
        tri.solve(&rhs, &mut x).unwrap();
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..n {
            dense[(i, i)] = diag[i];
            if i > 0 {
                dense[(i, i - 1)] = sub[i];
            }
            if i + 1 < n {
                dense[(i, i + 1)] = sup[i];
            }
        }
        let expect = dense
            .clone()
            .lu()
            .solve(&DVector::from_vec(rhs.clone()))
            .unwrap();
        for i in 0..n {
            assert_relative_eq!(x[i], expect[i], max_relative = 1e-11);
        }

        // periodic corners
        diag[0] += 0.05;
        let tri = Tridiag {
            sub: sub.clone(),
            diag: diag.clone(),
            sup: sup.clone(),
            corners: Some((-0.25, -0.15)),
        };
        tri.solve(&rhs, &mut x).unwrap();
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..n {
            dense[(i, i)] = diag[i];
            if i > 0 {
                dense[(i, i - 1)] = sub[i];
            }
            if i + 1 < n {
                dense[(i, i + 1)] = sup[i];
            }
        }
        dense[(0, n - 1)] = -0.25;
        dense[(n - 1, 0)] = -0.15;
        let expect = dense.lu().solve(&DVector::from_vec(rhs)).unwrap();
        for i in 0..n {
            assert_relative_eq!(x[i], expect[i], max_relative = 1e-10);
        }
    }

    #[test]
    fn rejects_orders_above_one() {
        let grid = GridSpec::new(0.0, 1.0, 8, 0.1, 4, BoundaryKind::Periodic).unwrap();
        let p = linear_params(1.3, 0.0);
        let v0 = vec![1.0; 8];
        let w0 = vec![1.0; 8];
        assert!(matches!(
            solve_gauged(&p, &grid, &v0, &w0, &SolverConfig::default()),
            Err(Error::UnsupportedPdeOrder { .. })
        ));
    }

    #[test]
    fn constant_steady_state_stays_constant() {
        let p = ModelParams {
            alpha: 0.8,
            lambda: 0.0,
            d: 0.7,
            d_c: 1.3,
            chi: 2.0,
            r: 1.5,
            k0: 2.5,
            kappa: 0.8,
            tau_c: 1.2,
        };
        let grid = GridSpec::new(0.0, 2.0, 16, 1.0, 33, BoundaryKind::Periodic).unwrap();
        let v0 = vec![p.k0; 16];
        let w0 = vec![p.k0 / p.kappa; 16];
        let traj = solve_gauged(&p, &grid, &v0, &w0, &SolverConfig::default()).unwrap();
        for n in 0..grid.nt {
            for i in 0..grid.nx {
                assert_relative_eq!(traj.field1()[[n, i]], p.k0, max_relative = 1e-9);
                assert_relative_eq!(
                    traj.field2()[[n, i]],
                    p.k0 / p.kappa,
                    max_relative = 1e-9
                );
            }
        }
    }

    #[test]
    fn blow_up_is_reported_as_structured_error() {
        // negative diffusion through theta = 0 explicit on a rough grid
        let p = ModelParams {
            alpha: 1.0,
            lambda: 0.0,
            d: 50.0,
            d_c: 0.0,
            chi: 0.0,
            r: 0.0,
            k0: 1.0,
            kappa: 0.0,
            tau_c: 1.0,
        };
        let grid = GridSpec::new(0.0, 1.0, 64, 40.0, 4001, BoundaryKind::Periodic).unwrap();
        let mut v0 = vec![0.0; 64];
        for (i, v) in v0.iter_mut().enumerate() {
            *v = if i % 2 == 0 { 1.0 } else { -1.0 };
        }
        let w0 = vec![0.0; 64];
        let cfg = SolverConfig {
            theta: 0.0,
            ..SolverConfig::default()
        };
        match solve_gauged(&p, &grid, &v0, &w0, &cfg) {
            Err(Error::BlowUp { .. }) => {}
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn gauge_and_direct_paths_agree_bitwise_at_lambda_zero() {
        let p = ModelParams {
            alpha: 0.7,
            lambda: 0.0,
            d: 0.4,
            d_c: 0.9,
            chi: 0.8,
            r: 0.6,
            k0: 1.5,
            kappa: 1.1,
            tau_c: 0.9,
        };
        let grid = GridSpec::new(0.0, 1.0, 16, 0.5, 21, BoundaryKind::Periodic).unwrap();
        let u0: Vec<f64> = (0..16)
            .map(|i| 1.0 + 0.3 * (2.0 * std::f64::consts::PI * i as f64 / 16.0).cos())
            .collect();
        let c0: Vec<f64> = (0..16)
            .map(|i| 0.9 + 0.1 * (2.0 * std::f64::consts::PI * i as f64 / 16.0).sin())
            .collect();
        let cfg = SolverConfig::default();
        let a = solve_original(&p, &grid, &u0, &c0, &cfg, SolvePath::Gauge).unwrap();
        let b = solve_original(&p, &grid, &u0, &c0, &cfg, SolvePath::Direct).unwrap();
        assert_eq!(a.field1(), b.field1());
        assert_eq!(a.field2(), b.field2());
    }
}
