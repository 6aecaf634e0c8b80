//! Constructors and solvers for the similarity-reduced systems.
//!
//! Reducing along each optimal-system representative yields six cases:
//!
//! * translation reduction, generic tempering (`v(t), w(t)` with the
//!   fractional logistic equation and a linear chemical ODE);
//! * the same at `lambda = 0`;
//! * steady states (`v(x), w(x)`, a purely spatial second-order system);
//! * traveling waves `xi = x - a t`, whose fractional time derivative stays
//!   nonlocal in time — solving is gated behind an explicit formal flag and
//!   validated only for `alpha = 1`;
//! * the degenerate linear regime `chi = r = 0` with its closed-form
//!   solution `u = V0 e^{-lambda t}`,
//!   `c = A e^{-(kappa/tau_c) t} - V0 e^{-lambda t} / (tau_c lambda - kappa)`;
//! * the similarity-scaling reduction `zeta = x e^{lambda t / 2}`, where only
//!   the chemical equation closes (and only for `D_c = 0`).

use crate::error::{Error, Result};
use crate::frac_ops::TimeSeries;
use crate::model::{
    caputo_columns, first_diff_row, second_diff_row, BoundaryKind, Frame, GridSpec, ModelParams,
    ResidualReport, Trajectory,
};
use crate::pde_solver::{SolverConfig, BLOWUP_LIMIT};
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use statrs::function::gamma::gamma;

/// Tags for the six reduction cases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReductionCase {
    /// Translation invariance with generic tempering: `v = v(t)`, `w = w(t)`.
    GenericTranslation,
    /// Translation invariance at `lambda = 0`.
    UntemperedTranslation,
    /// Time invariance at `lambda = 0`: steady profiles `v(x)`, `w(x)`.
    SteadyState,
    /// `xi = x - a t` at `lambda = 0`. `formal` opts into the unvalidated
    /// pointwise identity that turns the time-fractional derivative into a
    /// fractional derivative in `xi`.
    TravelingWave { speed: f64, formal: bool },
    /// `chi = r = 0`, translation reduction: the linear system with the
    /// closed-form solution.
    DegenerateLinear,
    /// `chi = r = 0`, scaling reduction `zeta = x e^{lambda t / 2}`.
    SimilarityScaling,
}

impl ReductionCase {
    /// Check the parameter regime this case requires.
    pub fn check_regime(&self, params: &ModelParams) -> Result<()> {
        params.validated()?;
        match self {
            ReductionCase::GenericTranslation => Ok(()),
            ReductionCase::UntemperedTranslation | ReductionCase::SteadyState => {
                if params.lambda != 0.0 {
                    return Err(Error::RegimeViolation(format!(
                        "{self:?} requires lambda = 0, got lambda = {}",
                        params.lambda
                    )));
                }
                Ok(())
            }
            ReductionCase::TravelingWave { speed, .. } => {
                if params.lambda != 0.0 {
                    return Err(Error::RegimeViolation(format!(
                        "TravelingWave requires lambda = 0, got lambda = {}",
                        params.lambda
                    )));
                }
                if !(speed.is_finite() && *speed >= 0.0) {
                    return Err(Error::RegimeViolation(format!(
                        "wave speed {speed} must be nonnegative"
                    )));
                }
                Ok(())
            }
            ReductionCase::DegenerateLinear => {
                if !params.is_linear_regime() {
                    return Err(Error::RegimeViolation(format!(
                        "DegenerateLinear requires chi = r = 0, got chi = {}, r = {}",
                        params.chi, params.r
                    )));
                }
                Ok(())
            }
            ReductionCase::SimilarityScaling => {
                if !params.is_linear_regime() {
                    return Err(Error::RegimeViolation(format!(
                        "SimilarityScaling requires chi = r = 0, got chi = {}, r = {}",
                        params.chi, params.r
                    )));
                }
                if params.lambda <= 0.0 {
                    return Err(Error::RegimeViolation(
                        "SimilarityScaling requires lambda > 0 (at lambda = 0 the scaling \
                         generator degenerates to pure time translation)"
                            .into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// A reduced system as a printable record: case tag, invariant variable,
/// rendered equations, named coefficients, and any caveats that apply.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub case: ReductionCase,
    pub invariant_variable: String,
    pub equations: Vec<String>,
    pub coefficients: Vec<(String, f64)>,
    pub caveats: Vec<String>,
}

impl ReducedSystem {
    /// Plain-text rendering for command-line output.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("case: {:?}\n", self.case));
        out.push_str(&format!("invariant variable: {}\n", self.invariant_variable));
        out.push_str("equations:\n");
        for eq in &self.equations {
            out.push_str(&format!("  {eq}\n"));
        }
        out.push_str("coefficients:\n");
        for (name, value) in &self.coefficients {
            out.push_str(&format!("  {name} = {value:.16e}\n"));
        }
        if !self.caveats.is_empty() {
            out.push_str("caveats:\n");
            for c in &self.caveats {
                out.push_str(&format!("  - {c}\n"));
            }
        }
        out
    }
}

/// Caveat text stored with the similarity-scaling record.
pub const SCALING_CAPUTO_CAVEAT: &str =
    "the fractional time derivative of V(zeta(t,x)) does not automatically become an ordinary \
     differential equation in zeta";

/// Caveat text stored with the traveling-wave record.
pub const WAVE_NONLOCAL_CAVEAT: &str =
    "the fractional time derivative of V(x - a t) is non-local in time (history dependent); it \
     cannot be turned into a pure derivative in xi without extra hypotheses";

/// Caveat attached when the formal identity is requested.
pub const WAVE_FORMAL_CAVEAT: &str =
    "the formal identity replacing the time derivative by (-a)^alpha times a fractional \
     derivative in xi is accepted only behind the formal flag and is validated only for alpha = 1";

/// Build the reduced-system record for a case. `GenericTranslation` with
/// `lambda = 0` normalizes to `UntemperedTranslation` (the two records are
/// identical there).
pub fn reduce(case: ReductionCase, params: &ModelParams) -> Result<ReducedSystem> {
    case.check_regime(params)?;
    let p = *params;
    let case = match case {
        ReductionCase::GenericTranslation if p.lambda == 0.0 => {
            ReductionCase::UntemperedTranslation
        }
        other => other,
    };
    Ok(match case {
        ReductionCase::GenericTranslation => ReducedSystem {
            case,
            invariant_variable: "t".into(),
            equations: vec![
                "D^alpha_t v = r v - (r/K0) exp(-lambda t) v^2".into(),
                "tau_c w' = (tau_c lambda - kappa) w + v".into(),
            ],
            coefficients: translation_coefficients(&p),
            caveats: vec![],
        },
        ReductionCase::UntemperedTranslation => ReducedSystem {
            case: ReductionCase::UntemperedTranslation,
            invariant_variable: "t".into(),
            equations: vec![
                "D^alpha_t v = r v - (r/K0) v^2".into(),
                "tau_c w' = -kappa w + v".into(),
            ],
            coefficients: translation_coefficients(&p),
            caveats: vec![],
        },
        ReductionCase::SteadyState => ReducedSystem {
            case,
            invariant_variable: "x".into(),
            equations: vec![
                "0 = D V'' - chi (V' W' + V W'') + r V - (r/K0) V^2".into(),
                "0 = D_c W'' - kappa W + V".into(),
            ],
            coefficients: vec![
                ("D".into(), p.d),
                ("D_c".into(), p.d_c),
                ("chi".into(), p.chi),
                ("r".into(), p.r),
                ("r/K0".into(), p.logistic_coef()),
                ("kappa".into(), p.kappa),
            ],
            caveats: vec![],
        },
        ReductionCase::TravelingWave { speed, formal } => {
            let mut equations = vec![
                format!(
                    "D^alpha_t [V(x - {speed} t)] = D V'' - chi (V' W' + V W'') + r V - (r/K0) V^2"
                ),
                format!("-tau_c {speed} W' = -kappa W + D_c W'' + V"),
            ];
            let mut caveats = vec![WAVE_NONLOCAL_CAVEAT.to_string()];
            if formal {
                equations[0] = format!(
                    "(-{speed})^alpha D^alpha_xi V = D V'' - chi (V' W' + V W'') + r V - (r/K0) V^2"
                );
                caveats.push(WAVE_FORMAL_CAVEAT.to_string());
            }
            ReducedSystem {
                case,
                invariant_variable: format!("xi = x - {speed} t"),
                equations,
                coefficients: vec![
                    ("a".into(), speed),
                    ("D".into(), p.d),
                    ("D_c".into(), p.d_c),
                    ("chi".into(), p.chi),
                    ("r".into(), p.r),
                    ("r/K0".into(), p.logistic_coef()),
                    ("kappa".into(), p.kappa),
                    ("tau_c".into(), p.tau_c),
                ],
                caveats,
            }
        }
        ReductionCase::DegenerateLinear => ReducedSystem {
            case,
            invariant_variable: "t".into(),
            equations: vec![
                "D^alpha_t v = 0".into(),
                "tau_c w' = (tau_c lambda - kappa) w + v".into(),
            ],
            coefficients: vec![
                ("lambda".into(), p.lambda),
                ("tau_c".into(), p.tau_c),
                ("kappa".into(), p.kappa),
                ("tau_c*lambda - kappa".into(), p.gauged_decay()),
            ],
            caveats: vec![],
        },
        ReductionCase::SimilarityScaling => ReducedSystem {
            case,
            invariant_variable: "zeta = x exp(lambda t / 2)".into(),
            equations: vec![
                "D^alpha_t [V(zeta(t,x))] = D V''(zeta)".into(),
                "tau_c (lambda/2) zeta W' = (tau_c lambda - kappa) W + V   (requires D_c = 0)"
                    .into(),
            ],
            coefficients: vec![
                ("lambda".into(), p.lambda),
                ("D".into(), p.d),
                ("tau_c".into(), p.tau_c),
                ("kappa".into(), p.kappa),
                ("tau_c*lambda/2".into(), p.tau_c * p.lambda / 2.0),
                ("tau_c*lambda - kappa".into(), p.gauged_decay()),
            ],
            caveats: vec![
                SCALING_CAPUTO_CAVEAT.to_string(),
                "the chemical equation closes in zeta only when D_c = 0".to_string(),
            ],
        },
    })
}

fn translation_coefficients(p: &ModelParams) -> Vec<(String, f64)> {
    vec![
        ("lambda".into(), p.lambda),
        ("r".into(), p.r),
        ("r/K0".into(), p.logistic_coef()),
        ("tau_c".into(), p.tau_c),
        ("kappa".into(), p.kappa),
        ("tau_c*lambda - kappa".into(), p.gauged_decay()),
    ]
}

/// Fractional logistic equation of the translation reduction:
/// `D^alpha_t v = r v - (r/K0) e^{-lambda t} v^2`, solved by the fractional
/// Adams-Bashforth-Moulton predictor-corrector (full memory, one corrector
/// sweep). For `1 < alpha < 2` the second initial datum `v'(0)` defaults to
/// zero; use [`solve_fractional_logistic_with_slope`] to override it.
pub fn solve_fractional_logistic(
    params: &ModelParams,
    v0: f64,
    t_final: f64,
    dt: f64,
) -> Result<TimeSeries> {
    solve_fractional_logistic_with_slope(params, v0, 0.0, t_final, dt)
}

/// See [`solve_fractional_logistic`]; `initial_slope` is `v'(0)`, consumed
/// only when `alpha > 1`.
pub fn solve_fractional_logistic_with_slope(
    params: &ModelParams,
    v0: f64,
    initial_slope: f64,
    t_final: f64,
    dt: f64,
) -> Result<TimeSeries> {
    let p = params.validated()?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidStep(dt));
    }
    if !(t_final.is_finite() && t_final > dt) {
        return Err(Error::InvalidGrid(format!(
            "t_final = {t_final} must exceed dt = {dt}"
        )));
    }
    if !v0.is_finite() || !initial_slope.is_finite() {
        return Err(Error::NonFiniteData);
    }
    let alpha = p.alpha;
    let lc = p.logistic_coef();
    let f = |t: f64, v: f64| p.r * v - lc * (-p.lambda * t).exp() * v * v;
    let blowup = BLOWUP_LIMIT * if p.k0 > 0.0 { p.k0 } else { 1.0 };

    let n_steps = (t_final / dt).round().max(1.0) as usize;
    let n = n_steps + 1;

    // power tables: pa[k] = k^alpha, pb[k] = k^(alpha+1); the per-step weight
    // loops below are then pure table lookups
    let mut pa = vec![0.0; n + 1];
    let mut pb = vec![0.0; n + 1];
    for k in 0..=n {
        let kf = k as f64;
        pa[k] = kf.powf(alpha);
        pb[k] = kf.powf(alpha + 1.0);
    }
    let pred_scale = dt.powf(alpha) / gamma(alpha + 1.0);
    let corr_scale = dt.powf(alpha) / gamma(alpha + 2.0);

    let init = |t: f64| {
        if alpha > 1.0 {
            v0 + t * initial_slope
        } else {
            v0
        }
    };

    let mut v = vec![0.0; n];
    let mut fv = vec![0.0; n];
    v[0] = v0;
    fv[0] = f(0.0, v0);

    for step in 0..n_steps {
        let np1 = step + 1;
        let t_next = np1 as f64 * dt;

        // predictor weights (n+1-j)^a - (n-j)^a
        let mut acc_p = 0.0;
        for (j, &fj) in fv.iter().take(np1).enumerate() {
            acc_p += (pa[np1 - j] - pa[step - j]) * fj;
        }
        let v_pred = init(t_next) + pred_scale * acc_p;

        // corrector weights: a_0 = n^{a+1} - (n-a)(n+1)^a, interior
        // (m+2)^{a+1} + m^{a+1} - 2(m+1)^{a+1}, and weight 1 on the predictor
        let mut acc_c = (pb[step] - (step as f64 - alpha) * pa[np1]) * fv[0];
        for j in 1..np1 {
            let m = step - j;
            acc_c += (pb[m + 2] + pb[m] - 2.0 * pb[m + 1]) * fv[j];
        }
        acc_c += f(t_next, v_pred);
        let v_next = init(t_next) + corr_scale * acc_c;

        if !v_next.is_finite() || v_next.abs() > blowup {
            return Err(Error::BlowUp {
                step: np1,
                norm: v_next.abs(),
                limit: blowup,
            });
        }
        v[np1] = v_next;
        fv[np1] = f(t_next, v_next);
    }
    TimeSeries::new(0.0, dt, v)
}

/// Chemical ODE of the translation reduction,
/// `tau_c w' = (tau_c lambda - kappa) w + v`, integrated by the trapezoid
/// rule in the exactly-integrated exponential frame:
///
/// ```text
/// w_{n+1} = e^{a h} (w_n + h v_n / (2 tau_c)) + h v_{n+1} / (2 tau_c),
/// a = lambda - kappa / tau_c
/// ```
pub fn solve_w_ode(v: &TimeSeries, params: &ModelParams, w0: f64) -> Result<TimeSeries> {
    let p = params.validated()?;
    if p.tau_c <= 0.0 {
        return Err(Error::InvalidParams(
            "tau_c must be positive for the chemical equation".into(),
        ));
    }
    if !w0.is_finite() {
        return Err(Error::NonFiniteData);
    }
    let h = v.dt();
    let a = p.lambda - p.kappa / p.tau_c;
    let growth = (a * h).exp();
    let half = h / (2.0 * p.tau_c);
    let vals = v.values();
    let mut w = vec![0.0; vals.len()];
    w[0] = w0;
    for k in 1..vals.len() {
        w[k] = growth * (w[k - 1] + half * vals[k - 1]) + half * vals[k];
    }
    TimeSeries::new(v.t0(), h, w)
}

/// Outcome of a steady-state (or formal traveling-wave) Newton solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSolution {
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    /// Residual sup norm before each iteration, ending with the accepted one.
    pub residual_history: Vec<f64>,
    pub iterations: usize,
}

/// Newton iteration on the centered-difference discretization of the steady
/// system (`lambda = 0`):
///
/// ```text
/// 0 = D V'' - chi (V' W' + V W'') + r V - (r/K0) V^2
/// 0 = D_c W'' - kappa W + V
/// ```
pub fn solve_steady_state(
    params: &ModelParams,
    grid: &GridSpec,
    guess_v: &[f64],
    guess_w: &[f64],
    cfg: &SolverConfig,
) -> Result<NewtonSolution> {
    let p = params.validated()?;
    cfg.validate()?;
    if p.lambda != 0.0 {
        return Err(Error::RegimeViolation(format!(
            "steady states require lambda = 0, got lambda = {}",
            p.lambda
        )));
    }
    if grid.boundary == BoundaryKind::HomogeneousDirichlet {
        return Err(Error::RegimeViolation(
            "steady-state solves support periodic or homogeneous-neumann boundaries".into(),
        ));
    }
    newton_profiles(&p, grid, guess_v, guess_w, cfg, 0.0)
}

fn newton_profiles(
    p: &ModelParams,
    grid: &GridSpec,
    guess_v: &[f64],
    guess_w: &[f64],
    cfg: &SolverConfig,
    speed: f64,
) -> Result<NewtonSolution> {
    let nx = grid.nx;
    if guess_v.len() != nx || guess_w.len() != nx {
        return Err(Error::ShapeMismatch(format!(
            "guess lengths {} / {} do not match nx = {}",
            guess_v.len(),
            guess_w.len(),
            nx
        )));
    }
    let mut v = guess_v.to_vec();
    let mut w = guess_w.to_vec();
    let mut history = Vec::new();

    for iter in 0..=cfg.newton_max_iter {
        let f = profile_residual(p, grid, &v, &w, speed);
        let sup = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        history.push(sup);
        if sup < cfg.newton_tol {
            return Ok(NewtonSolution {
                v,
                w,
                residual_history: history,
                iterations: iter,
            });
        }
        if iter == cfg.newton_max_iter {
            break;
        }
        let jac = profile_jacobian(p, grid, &v, &w, speed);
        let rhs = DVector::from_vec(f);
        let delta = jac.lu().solve(&rhs).ok_or(Error::SingularJacobian)?;
        if delta.iter().any(|d| !d.is_finite()) {
            return Err(Error::SingularJacobian);
        }
        for i in 0..nx {
            v[i] -= delta[i];
            w[i] -= delta[nx + i];
        }
    }
    Err(Error::NewtonDiverged {
        max_iter: cfg.newton_max_iter,
        residual: *history.last().unwrap_or(&f64::NAN),
    })
}

/// Stacked residual `[F1; F2]` of the profile system, with the optional wave
/// advection `+ a V'` / `+ tau_c a W'` terms.
fn profile_residual(p: &ModelParams, grid: &GridSpec, v: &[f64], w: &[f64], speed: f64) -> Vec<f64> {
    let nx = grid.nx;
    let dx = grid.dx();
    let b = grid.boundary;
    let lc = p.logistic_coef();
    let mut vx = vec![0.0; nx];
    let mut wx = vec![0.0; nx];
    let mut vxx = vec![0.0; nx];
    let mut wxx = vec![0.0; nx];
    first_diff_row(v, dx, b, &mut vx);
    first_diff_row(w, dx, b, &mut wx);
    second_diff_row(v, dx, b, &mut vxx);
    second_diff_row(w, dx, b, &mut wxx);
    let mut f = vec![0.0; 2 * nx];
    for i in 0..nx {
        f[i] = p.d * vxx[i] + speed * vx[i] - p.chi * (vx[i] * wx[i] + v[i] * wxx[i])
            + p.r * v[i]
            - lc * v[i] * v[i];
        f[nx + i] = p.d_c * wxx[i] + p.tau_c * speed * wx[i] - p.kappa * w[i] + v[i];
    }
    f
}

/// Dense Jacobian of [`profile_residual`]; the stencil structure mirrors the
/// residual exactly (same ghost conventions).
fn profile_jacobian(
    p: &ModelParams,
    grid: &GridSpec,
    v: &[f64],
    w: &[f64],
    speed: f64,
) -> DMatrix<f64> {
    let nx = grid.nx;
    let dx = grid.dx();
    let b = grid.boundary;
    let lc = p.logistic_coef();
    let mut vx = vec![0.0; nx];
    let mut wx = vec![0.0; nx];
    let mut wxx = vec![0.0; nx];
    first_diff_row(v, dx, b, &mut vx);
    first_diff_row(w, dx, b, &mut wx);
    second_diff_row(w, dx, b, &mut wxx);

    let mut jac = DMatrix::zeros(2 * nx, 2 * nx);
    let dx2 = dx * dx;
    let two_dx = 2.0 * dx;
    // neighbor index and ghost sign under the boundary convention
    let neighbor = |i: usize, off: isize| -> (usize, f64) {
        let n = nx as isize;
        let j = i as isize + off;
        match b {
            BoundaryKind::Periodic => ((j.rem_euclid(n)) as usize, 1.0),
            BoundaryKind::HomogeneousNeumann => {
                if j < 0 {
                    (1, 1.0)
                } else if j >= n {
                    (nx - 2, 1.0)
                } else {
                    (j as usize, 1.0)
                }
            }
            BoundaryKind::HomogeneousDirichlet => {
                if j < 0 {
                    (1, -1.0)
                } else if j >= n {
                    (nx - 2, -1.0)
                } else {
                    (j as usize, 1.0)
                }
            }
        }
    };
    for i in 0..nx {
        // F1 wrt V: D L + (speed - chi wx) Dx + diag(-chi wxx + r - 2 lc v)
        let coef_v_dx = speed - p.chi * wx[i];
        let (jp, sp) = neighbor(i, 1);
        jac[(i, jp)] += sp * (p.d / dx2 + coef_v_dx / two_dx);
        let (jm, sm) = neighbor(i, -1);
        jac[(i, jm)] += sm * (p.d / dx2 - coef_v_dx / two_dx);
        jac[(i, i)] += -2.0 * p.d / dx2 - p.chi * wxx[i] + p.r - 2.0 * lc * v[i];
        // F1 wrt W: -chi (vx Dx + v L)
        jac[(i, nx + jp)] += sp * (-p.chi * (vx[i] / two_dx + v[i] / dx2));
        jac[(i, nx + jm)] += sm * (-p.chi * (-vx[i] / two_dx + v[i] / dx2));
        jac[(i, nx + i)] += 2.0 * p.chi * v[i] / dx2;
        // F2 wrt V: identity
        jac[(nx + i, i)] += 1.0;
        // F2 wrt W: D_c L + tau_c speed Dx - kappa I
        let coef_w_dx = p.tau_c * speed;
        jac[(nx + i, nx + jp)] += sp * (p.d_c / dx2 + coef_w_dx / two_dx);
        jac[(nx + i, nx + jm)] += sm * (p.d_c / dx2 - coef_w_dx / two_dx);
        jac[(nx + i, nx + i)] += -2.0 * p.d_c / dx2 - p.kappa;
    }
    jac
}

/// The traveling-wave reduction `xi = x - a t` (`lambda = 0`).
///
/// Without the formal flag this is only a residual evaluator: candidate
/// profiles are checked against the exact reduced system, with the
/// fractional time derivative of `V(x - a t)` evaluated numerically along
/// each time line. With the formal flag the record carries the
/// `(-a)^alpha D^alpha_xi` system, and a classical boundary-value solve is
/// available for `alpha = 1` only.
#[derive(Debug, Clone)]
pub struct TravelingWave {
    params: ModelParams,
    speed: f64,
    formal: bool,
}

/// Construct the traveling-wave reduction. See [`TravelingWave`].
pub fn build_traveling_wave(
    params: &ModelParams,
    speed: f64,
    formal: bool,
) -> Result<TravelingWave> {
    let case = ReductionCase::TravelingWave { speed, formal };
    case.check_regime(params)?;
    Ok(TravelingWave {
        params: *params,
        speed,
        formal,
    })
}

impl TravelingWave {
    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn formal(&self) -> bool {
        self.formal
    }

    /// The printable reduced-system record.
    pub fn system(&self) -> ReducedSystem {
        reduce(
            ReductionCase::TravelingWave {
                speed: self.speed,
                formal: self.formal,
            },
            &self.params,
        )
        .expect("regime checked at construction")
    }

    /// Residual of candidate profiles under the exact reduced system on a
    /// space-time grid: the field `v(t,x) = V(x - a t)` is reconstructed, its
    /// Caputo derivative taken down each time line, and the right side is
    /// evaluated from the profiles' own derivatives in `xi`.
    pub fn residual_on_grid<FV, FW>(
        &self,
        profile_v: FV,
        profile_w: FW,
        grid: &GridSpec,
    ) -> Result<ResidualReport>
    where
        FV: Fn(f64) -> f64,
        FW: Fn(f64) -> f64,
    {
        let p = self.params;
        let a = self.speed;
        let dt = grid.dt();
        let dx = grid.dx();
        let (nt, nx) = (grid.nt, grid.nx);
        let lc = p.logistic_coef();
        let h = dx; // profile differentiation step matches the grid

        let field_v =
            Array2::from_shape_fn((nt, nx), |(n, i)| profile_v(grid.x(i) - a * grid.t(n)));
        let (dv, valid_from) = caputo_columns(&field_v, dt, p.alpha);

        let mut eq1 = Array2::zeros((nt, nx));
        let mut eq2 = Array2::zeros((nt, nx));
        for n in 0..nt {
            for i in 0..nx {
                let xi = grid.x(i) - a * grid.t(n);
                let vv = profile_v(xi);
                let ww = profile_w(xi);
                let vpx = (profile_v(xi + h) - profile_v(xi - h)) / (2.0 * h);
                let wpx = (profile_w(xi + h) - profile_w(xi - h)) / (2.0 * h);
                let vxx = (profile_v(xi + h) - 2.0 * vv + profile_v(xi - h)) / (h * h);
                let wxx = (profile_w(xi + h) - 2.0 * ww + profile_w(xi - h)) / (h * h);
                let rhs1 = p.d * vxx - p.chi * (vpx * wpx + vv * wxx) + p.r * vv - lc * vv * vv;
                eq1[[n, i]] = dv[[n, i]] - rhs1;
                let lhs2 = -p.tau_c * a * wpx;
                let rhs2 = -p.kappa * ww + p.d_c * wxx + vv;
                eq2[[n, i]] = lhs2 - rhs2;
            }
        }
        for n in 0..valid_from {
            for i in 0..nx {
                eq1[[n, i]] = 0.0;
            }
        }
        Ok(build_report(eq1, eq2, valid_from))
    }

    /// Classical boundary-value solve of the formal system. Requires the
    /// formal flag and `alpha = 1`; every other order is refused.
    pub fn solve_classical(
        &self,
        grid: &GridSpec,
        guess_v: &[f64],
        guess_w: &[f64],
        cfg: &SolverConfig,
    ) -> Result<NewtonSolution> {
        if !self.formal {
            return Err(Error::RegimeViolation(
                "solving the traveling-wave system requires the formal flag".into(),
            ));
        }
        if self.params.alpha != 1.0 {
            return Err(Error::FormalIdentityNotValidated {
                alpha: self.params.alpha,
            });
        }
        cfg.validate()?;
        newton_profiles(&self.params, grid, guess_v, guess_w, cfg, self.speed)
    }

    /// Dense operator (Jacobian) of the formal system's discretization at a
    /// given state; exposed so the `a -> 0` limit can be compared against the
    /// steady-state operator.
    pub fn formal_operator(&self, grid: &GridSpec, v: &[f64], w: &[f64]) -> DMatrix<f64> {
        profile_jacobian(&self.params, grid, v, w, self.speed)
    }
}

/// Operator matrix of the steady-state discretization at a given state.
pub fn steady_state_operator(
    params: &ModelParams,
    grid: &GridSpec,
    v: &[f64],
    w: &[f64],
) -> DMatrix<f64> {
    profile_jacobian(params, grid, v, w, 0.0)
}

fn build_report(eq1: Array2<f64>, eq2: Array2<f64>, valid_from: usize) -> ResidualReport {
    let norm = |f: &Array2<f64>, from: usize| {
        let mut sup = 0.0f64;
        let mut sq = 0.0;
        let mut count = 0usize;
        for n in from..f.nrows() {
            for i in 0..f.ncols() {
                let v = f[[n, i]].abs();
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
    };
    let (s1, l1) = norm(&eq1, valid_from);
    let (s2, l2) = norm(&eq2, 0);
    ResidualReport {
        eq1,
        eq2,
        sup: [s1, s2],
        l2: [l1, l2],
        valid_from,
    }
}

/// The closed-form solution of the degenerate linear regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactLinearSolution {
    /// Constant gauged cell amplitude `V0`.
    pub v0: f64,
    /// Integration constant of the chemical equation.
    pub integration_const: f64,
    pub params: ModelParams,
}

impl ExactLinearSolution {
    pub fn new(v0: f64, integration_const: f64, params: ModelParams) -> Result<Self> {
        let p = params.validated()?;
        if !p.is_linear_regime() {
            return Err(Error::RegimeViolation(format!(
                "the exact linear solution requires chi = r = 0, got chi = {}, r = {}",
                p.chi, p.r
            )));
        }
        p.require_nondegenerate_decay()?;
        if !v0.is_finite() || !integration_const.is_finite() {
            return Err(Error::NonFiniteData);
        }
        Ok(Self {
            v0,
            integration_const,
            params: p,
        })
    }

    /// `u(t, x) = V0 e^{-lambda t}` (x-independent).
    pub fn u(&self, t: f64) -> f64 {
        self.v0 * (-self.params.lambda * t).exp()
    }

    /// `c(t, x) = A e^{-(kappa/tau_c) t} - V0 e^{-lambda t} / (tau_c lambda - kappa)`.
    pub fn c(&self, t: f64) -> f64 {
        let p = &self.params;
        self.integration_const * (-(p.kappa / p.tau_c) * t).exp()
            - self.v0 * (-p.lambda * t).exp() / p.gauged_decay()
    }

    /// Gauged cell field: constant `V0`.
    pub fn v(&self, _t: f64) -> f64 {
        self.v0
    }

    /// Gauged chemical field
    /// `w(t) = A e^{(lambda - kappa/tau_c) t} - V0 / (tau_c lambda - kappa)`.
    pub fn w(&self, t: f64) -> f64 {
        let p = &self.params;
        self.integration_const * ((p.lambda - p.kappa / p.tau_c) * t).exp()
            - self.v0 / p.gauged_decay()
    }

    /// Sample the original-frame fields on a grid.
    pub fn evaluate_original(&self, grid: &GridSpec) -> Trajectory {
        Trajectory::from_fn(*grid, Frame::Original, |t, _| self.u(t), |t, _| self.c(t))
    }

    /// Sample the gauged-frame fields on a grid.
    pub fn evaluate_gauged(&self, grid: &GridSpec) -> Trajectory {
        Trajectory::from_fn(*grid, Frame::Gauged, |t, _| self.v(t), |t, _| self.w(t))
    }
}

/// Chemical profile of the similarity-scaling reduction with `D_c = 0`:
///
/// ```text
/// tau_c (lambda/2) zeta W' = (tau_c lambda - kappa) W + V(zeta)
/// ```
///
/// integrated outward from `zeta = 0` by classical RK4. The regular singular
/// point at `zeta = 0` is handled by the bounded-solution condition
/// `W(0) = -V(0) / (tau_c lambda - kappa)` and the limiting slope
/// `W'(0) = V'(0) / (tau_c lambda / 2 - (tau_c lambda - kappa))`.
pub fn solve_similarity_w<FV>(
    profile_v: FV,
    params: &ModelParams,
    zeta_max: f64,
    n: usize,
) -> Result<TimeSeries>
where
    FV: Fn(f64) -> f64,
{
    let p = params.validated()?;
    ReductionCase::SimilarityScaling.check_regime(&p)?;
    if p.d_c != 0.0 {
        return Err(Error::RegimeViolation(format!(
            "the similarity chemical equation closes only for D_c = 0, got D_c = {}",
            p.d_c
        )));
    }
    p.require_nondegenerate_decay()?;
    if n < 2 {
        return Err(Error::TooFewSamples { need: 2, got: n });
    }
    if !(zeta_max.is_finite() && zeta_max > 0.0) {
        return Err(Error::InvalidGrid(format!(
            "zeta_max = {zeta_max} must be positive"
        )));
    }
    let v0 = profile_v(0.0);
    if !v0.is_finite() {
        return Err(Error::NonFiniteData);
    }

    let c1 = p.tau_c * p.lambda / 2.0;
    let b = p.gauged_decay();
    let h = zeta_max / (n - 1) as f64;

    // Local expansion at the regular singular point: W(0) = -V(0)/b picks the
    // bounded solution, and balancing derivatives of the equation gives
    // W'(0) = V'(0)/(c1 - b) and W''(0) = V''(0)/(2 c1 - b).
    let vp0 = (-3.0 * profile_v(0.0) + 4.0 * profile_v(h) - profile_v(2.0 * h)) / (2.0 * h);
    let vpp0 = (2.0 * profile_v(0.0) - 5.0 * profile_v(h) + 4.0 * profile_v(2.0 * h)
        - profile_v(3.0 * h))
        / (h * h);
    let scale = (c1.abs() + b.abs()).max(1.0);
    let expansion_coef = |denom: f64, numer: f64, what: &str| -> Result<f64> {
        if denom.abs() <= 1e-12 * scale {
            if numer.abs() <= 1e-9 * v0.abs().max(1.0) {
                Ok(0.0)
            } else {
                Err(Error::RegimeViolation(format!(
                    "resonant exponent at zeta = 0: the {what} of the bounded solution is \
                     undefined for this profile"
                )))
            }
        } else {
            Ok(numer / denom)
        }
    };
    let slope0 = expansion_coef(c1 - b, vp0, "slope")?;
    let curv0 = expansion_coef(2.0 * c1 - b, vpp0, "curvature")?;

    let rhs = |zeta: f64, w: f64| -> f64 { (b * w + profile_v(zeta)) / (c1 * zeta) };

    let mut w = vec![0.0; n];
    w[0] = -v0 / b;
    // first node from the series (RK4 cannot start on the singular point)
    w[1] = w[0] + h * slope0 + 0.5 * h * h * curv0;
    let stiffness_ratio = b.abs() / c1;
    for k in 1..n - 1 {
        // the equation is stiff like |b|/(c1 zeta) near the origin; scale the
        // substep count so each RK4 substep stays well inside the stability
        // region (the factor 12 also keeps the near-origin truncation error
        // below the 1e-8 scale of the substitution checks)
        let substeps = ((12.0 * stiffness_ratio / k as f64).ceil() as usize).clamp(1, 4096);
        let hs = h / substeps as f64;
        let mut z = k as f64 * h;
        let mut wk = w[k];
        for _ in 0..substeps {
            let k1 = rhs(z, wk);
            let k2 = rhs(z + 0.5 * hs, wk + 0.5 * hs * k1);
            let k3 = rhs(z + 0.5 * hs, wk + 0.5 * hs * k2);
            let k4 = rhs(z + hs, wk + hs * k3);
            wk += hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            z += hs;
        }
        w[k + 1] = wk;
        if !w[k + 1].is_finite() {
            return Err(Error::BlowUp {
                step: k + 1,
                norm: f64::INFINITY,
                limit: BLOWUP_LIMIT,
            });
        }
    }
    TimeSeries::new(0.0, h, w)
}

#[cfg(test)]
mod tests {
    use super::*;
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

    fn logistic_params(alpha: f64, lambda: f64) -> ModelParams {
        ModelParams {
            alpha,
            lambda,
            d: 1.0,
            d_c: 1.0,
            chi: 0.5,
            r: 1.0,
            k0: 2.0,
            kappa: 1.0,
            tau_c: 1.0,
        }
    }

    #[test]
    fn regime_guards() {
        let p = logistic_params(0.8, 0.3);
        assert!(matches!(
            reduce(ReductionCase::SteadyState, &p),
            Err(Error::RegimeViolation(_))
        ));
        assert!(matches!(
            reduce(ReductionCase::DegenerateLinear, &p),
            Err(Error::RegimeViolation(_))
        ));
        assert!(reduce(ReductionCase::GenericTranslation, &p).is_ok());
    }

    #[test]
    fn generic_translation_at_lambda_zero_equals_untempered_record() {
        let p = logistic_params(0.8, 0.0);
        let a = reduce(ReductionCase::GenericTranslation, &p).unwrap();
        let b = reduce(ReductionCase::UntemperedTranslation, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fixed_point_of_logistic_is_preserved() {
        let p = logistic_params(0.7, 0.0);
        let v = solve_fractional_logistic(&p, p.k0, 2.0, 0.01).unwrap();
        for &x in v.values() {
            assert_relative_eq!(x, p.k0, max_relative = 1e-12);
        }
    }

    #[test]
    fn w_ode_constant_source_matches_closed_form() {
        let p = linear_params(0.8, 0.5);
        let v0 = 1.0;
        let dt = 1e-3;
        let n = 1001;
        let v = TimeSeries::from_fn(0.0, dt, n, |_| v0).unwrap();
        let w0 = 0.3;
        let w = solve_w_ode(&v, &p, w0).unwrap();
        let b = p.gauged_decay();
        let a = p.lambda - p.kappa / p.tau_c;
        let amp = w0 + v0 / b;
        let mut max_err = 0.0f64;
        for (k, &wk) in w.values().iter().enumerate() {
            let t = k as f64 * dt;
            let exact = amp * (a * t).exp() - v0 / b;
            max_err = max_err.max((wk - exact).abs());
        }
        assert!(max_err < 5.0 * dt * dt, "max_err = {max_err}");
    }

    #[test]
    fn w_ode_zero_source_zero_start_stays_zero() {
        let p = linear_params(0.8, 0.5);
        let v = TimeSeries::from_fn(0.0, 0.01, 101, |_| 0.0).unwrap();
        let w = solve_w_ode(&v, &p, 0.0).unwrap();
        assert!(w.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn w_ode_equilibrium_is_held_to_scheme_order() {
        let p = logistic_params(1.0, 0.0);
        let dt = 1e-3;
        let v = TimeSeries::from_fn(0.0, dt, 2001, |_| p.k0).unwrap();
        let w = solve_w_ode(&v, &p, p.k0 / p.kappa).unwrap();
        let eq = p.k0 / p.kappa;
        for &x in w.values() {
            assert!((x - eq).abs() < 1e-5 * eq, "drift {}", (x - eq).abs());
        }
    }

    #[test]
    fn exact_linear_solution_values() {
        let p = ModelParams {
            alpha: 0.7,
            lambda: 0.5,
            ..linear_params(0.7, 0.5)
        };
        let sol = ExactLinearSolution::new(1.0, 1.0, p).unwrap();
        // direct substitution at t = 0: u = 1, c = 1 - 1/(0.5 - 1) = 3
        assert_relative_eq!(sol.u(0.0), 1.0, max_relative = 1e-15);
        assert_relative_eq!(sol.c(0.0), 3.0, max_relative = 1e-15);
        // V0 = 0 leaves pure chemical decay
        let sol0 = ExactLinearSolution::new(0.0, 1.0, p).unwrap();
        assert_eq!(sol0.u(1.3), 0.0);
        assert_relative_eq!(sol0.c(2.0), (-2.0f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn exact_linear_solution_rejects_degenerate_decay() {
        let p = linear_params(0.7, 1.0); // tau_c * lambda = kappa = 1
        assert!(matches!(
            ExactLinearSolution::new(1.0, 1.0, p),
            Err(Error::TauLambdaKappaDegenerate)
        ));
    }

    #[test]
    fn similarity_w_constant_profile() {
        let p = ModelParams {
            d_c: 0.0,
            ..linear_params(0.8, 0.5)
        };
        let v0 = 2.0;
        let w = solve_similarity_w(|_| v0, &p, 3.0, 301).unwrap();
        let expect = -v0 / p.gauged_decay();
        for &x in w.values() {
            assert_relative_eq!(x, expect, max_relative = 1e-12);
        }
        let wz = solve_similarity_w(|_| 0.0, &p, 3.0, 301).unwrap();
        assert!(wz.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn similarity_w_quadratic_profile_closed_form() {
        // V = zeta^2 has the regular solution W = zeta^2 / kappa.
        let p = ModelParams {
            d_c: 0.0,
            kappa: 1.3,
            ..linear_params(0.8, 0.5)
        };
        let w = solve_similarity_w(|z| z * z, &p, 2.0, 201).unwrap();
        for (k, &x) in w.values().iter().enumerate() {
            let z = k as f64 * w.dt();
            assert!((x - z * z / p.kappa).abs() < 1e-8, "at z = {z}");
        }
    }

    #[test]
    fn similarity_w_requires_dc_zero_and_lambda_positive() {
        let p = linear_params(0.8, 0.5); // d_c = 1
        assert!(matches!(
            solve_similarity_w(|_| 1.0, &p, 1.0, 11),
            Err(Error::RegimeViolation(_))
        ));
        let p2 = ModelParams {
            d_c: 0.0,
            ..linear_params(0.8, 0.0)
        };
        assert!(solve_similarity_w(|_| 1.0, &p2, 1.0, 11).is_err());
    }

    #[test]
    fn traveling_wave_constant_profiles_have_zero_residual() {
        let p = logistic_params(0.7, 0.0);
        let tw = build_traveling_wave(&p, 1.3, false).unwrap();
        let grid = GridSpec::new(0.0, 4.0, 16, 1.0, 9, BoundaryKind::Periodic).unwrap();
        let k0 = p.k0;
        let weq = p.k0 / p.kappa;
        let rep = tw.residual_on_grid(|_| k0, |_| weq, &grid).unwrap();
        assert!(rep.sup[0] < 1e-10, "eq1 {}", rep.sup[0]);
        assert!(rep.sup[1] < 1e-10, "eq2 {}", rep.sup[1]);
    }

    #[test]
    fn traveling_wave_formal_refusal() {
        let p = logistic_params(0.7, 0.0);
        let tw = build_traveling_wave(&p, 0.5, true).unwrap();
        let grid = GridSpec::new(0.0, 1.0, 8, 1.0, 4, BoundaryKind::HomogeneousNeumann).unwrap();
        let guess = vec![1.0; 8];
        match tw.solve_classical(&grid, &guess, &guess, &SolverConfig::default()) {
            Err(Error::FormalIdentityNotValidated { alpha }) => {
                assert_relative_eq!(alpha, 0.7);
            }
            other => panic!("expected refusal, got {other:?}"),
        }
        // residual evaluation is still allowed on the formal variant
        let k0 = p.k0;
        assert!(tw.residual_on_grid(|_| k0, |_| k0 / p.kappa, &grid).is_ok());
    }

    #[test]
    fn traveling_wave_requires_untempered_regime() {
        let p = logistic_params(0.7, 0.4);
        assert!(matches!(
            build_traveling_wave(&p, 1.0, false),
            Err(Error::RegimeViolation(_))
        ));
    }
}
