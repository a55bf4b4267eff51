//! Finite-volume integrator for the radial and line equations, a
//! finite-difference residual oracle, weighted norms and decay fits.
//!
//! Both equation shapes are written as
//!
//! ```text
//! rho(x) u_t = g(x)^-1 (g(x) (u^m)_x)_x + z u^m + kappa s(x) u^p + F(x, t)
//! ```
//!
//! with `rho = r^s1`, `g = r^(N-1)`, `s = r^s2`, `z = 0` for radial
//! families and `rho = 1`, `g = e^(conv y)`, `s = e^(reaction_exp y)` for
//! line families. Nodes carry control volumes whose weights are integrated
//! exactly, so the origin cell of a radial grid is handled without special
//! cases. Time stepping is the two-stage strong-stability-preserving
//! Runge-Kutta scheme, which keeps the state nonnegative under the step
//! bound used here.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::eqmodel::EquationDescriptor;
use crate::exec::{self, Execution};
use crate::field::Field;
use crate::profiles::least_squares;
use crate::wire::fmt_g;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdeError {
    #[error("ConfigError: {0}")]
    Config(String),
    #[error("NonFiniteState: non-finite value at x = {x} at t = {t}")]
    NonFiniteState { t: f64, x: f64, snapshot: Vec<f64> },
    #[error("DomainError: {0}")]
    Domain(String),
    #[error("InsufficientData: {0}")]
    InsufficientData(String),
}

/// Boundary value: a constant (serialized as a number) or a function of
/// time supplied in code.
#[derive(Clone)]
pub enum BoundaryValue {
    Constant(f64),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl BoundaryValue {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            BoundaryValue::Constant(v) => *v,
            BoundaryValue::Function(f) => f(t),
        }
    }
}

impl fmt::Debug for BoundaryValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryValue::Constant(v) => write!(f, "Constant({v})"),
            BoundaryValue::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl Serialize for BoundaryValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            BoundaryValue::Constant(v) => s.serialize_f64(*v),
            BoundaryValue::Function(_) => s.serialize_str("function"),
        }
    }
}

impl<'de> Deserialize<'de> for BoundaryValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(BoundaryValue::Constant(f64::deserialize(d)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grading {
    Uniform,
    /// Successive cell widths grow by `ratio`.
    Geometric {
        ratio: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum InnerBc {
    /// `(u^m)_x = 0`; on a radial grid it needs `r_min = 0`.
    SymmetryNeumann,
    TruncatedDirichlet(BoundaryValue),
    TruncatedNeumann,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum OuterBc {
    Dirichlet(BoundaryValue),
    ZeroFlux,
}

/// Weighted norm `(int x^w u^q x^(N-1) dx)^(1/q)` tracked in the history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub q: f64,
    pub w: f64,
}

impl NormSpec {
    pub fn name(&self) -> String {
        format!("L{};{}", fmt_g(self.q), fmt_g(self.w))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub nr: usize,
    pub grading: Grading,
    pub t_end: f64,
    /// Cap on the first step.
    pub dt_init: Option<f64>,
    pub dt_safety: f64,
    /// Largest relative change of `u` per step from reaction terms.
    pub reaction_limit: f64,
    pub inner_bc: InnerBc,
    pub outer_bc: OuterBc,
    pub blowup_threshold: f64,
    pub dt_min: f64,
    pub max_steps: usize,
    /// Evenly spaced snapshot count (including `t = 0` and `t_end`) unless
    /// `output_times` is given.
    pub snapshots: usize,
    pub output_times: Vec<f64>,
    /// Approximate number of history records over `[0, t_end]`.
    pub history_points: usize,
    pub norms: Vec<NormSpec>,
    pub exec: Execution,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            r_min: 0.0,
            r_max: 10.0,
            nr: 256,
            grading: Grading::Uniform,
            t_end: 1.0,
            dt_init: None,
            dt_safety: 0.8,
            reaction_limit: 0.02,
            inner_bc: InnerBc::SymmetryNeumann,
            outer_bc: OuterBc::ZeroFlux,
            blowup_threshold: 1e8,
            dt_min: 1e-14,
            max_steps: 20_000_000,
            snapshots: 11,
            output_times: Vec::new(),
            history_points: 400,
            norms: Vec::new(),
            exec: Execution::Sequential,
        }
    }
}

/// Named initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum InitialData {
    Zero,
    Constant {
        value: f64,
    },
    /// `A exp(-((r - center)/width)^2)`
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: f64,
    },
    /// `A (1 - (r/R)^2)_+^2`
    Bump {
        amplitude: f64,
        radius: f64,
    },
    /// `A (1 + r^2)^(-decay/2)`
    Algebraic {
        amplitude: f64,
        decay: f64,
    },
}

impl InitialData {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            InitialData::Zero => 0.0,
            InitialData::Constant { value } => value,
            InitialData::Gaussian { amplitude, width, center } => amplitude * (-((r - center) / width).powi(2)).exp(),
            InitialData::Bump { amplitude, radius } => {
                let s = 1.0 - (r / radius).powi(2);
                if s > 0.0 {
                    amplitude * s * s
                } else {
                    0.0
                }
            }
            InitialData::Algebraic { amplitude, decay } => amplitude * (1.0 + r * r).powf(-decay / 2.0),
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        let mut d = *self;
        match &mut d {
            InitialData::Zero => {}
            InitialData::Constant { value } => *value *= k,
            InitialData::Gaussian { amplitude, .. }
            | InitialData::Bump { amplitude, .. }
            | InitialData::Algebraic { amplitude, .. } => *amplitude *= k,
        }
        d
    }
}

/// Everything needed for one run, as read from a JSON config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub descriptor: EquationDescriptor,
    pub initial: InitialData,
    pub grid: GridConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    BlowUp { t_detect: f64 },
    StepUnderflow { t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormRecord {
    pub t: f64,
    pub sup: f64,
    /// Position of the maximum.
    pub argmax: f64,
    pub norms: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSolution {
    pub r: Vec<f64>,
    pub times: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub norm_names: Vec<String>,
    pub history: Vec<NormRecord>,
    pub status: RunStatus,
    pub steps: usize,
    /// Stage values clipped at zero by the positivity limiter.
    pub clipped: usize,
}

impl GridSolution {
    /// Final state.
    pub fn last(&self) -> (f64, &[f64]) {
        (*self.times.last().unwrap(), self.u.last().unwrap())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowUpReport {
    pub detected: bool,
    pub t_detect: Option<f64>,
    /// Fitted `a` in `sup u ~ (T - t)^-a`.
    pub growth_exponent_fit: Option<f64>,
    /// Blow-up time extrapolated from the same fit.
    pub t_blowup_fit: Option<f64>,
    pub location: Option<f64>,
}

/// Coefficient functions of the unified operator.
#[derive(Debug, Clone, Copy)]
struct Coefficients {
    radial: bool,
    m: f64,
    p: f64,
    n: f64,
    s1: f64,
    s2: f64,
    kappa: f64,
    conv: f64,
    zeroth: f64,
    rexp: f64,
}

impl Coefficients {
    fn new(desc: &EquationDescriptor) -> Self {
        Coefficients {
            radial: desc.is_radial(),
            m: desc.m,
            p: desc.p,
            n: desc.n,
            s1: desc.sigma1,
            s2: desc.sigma2,
            kappa: desc.reaction(),
            conv: desc.convection(),
            zeroth: desc.zeroth_order(),
            rexp: desc.reaction_exp(),
        }
    }

    fn rho(&self, x: f64) -> f64 {
        if self.radial {
            x.powf(self.s1)
        } else {
            1.0
        }
    }

    /// `g'/g`
    fn log_metric(&self, x: f64) -> f64 {
        if self.radial {
            (self.n - 1.0) / x
        } else {
            self.conv
        }
    }

    fn source_weight(&self, x: f64) -> f64 {
        if self.radial {
            x.powf(self.s2)
        } else {
            (self.rexp * x).exp()
        }
    }

    fn zeroth(&self) -> f64 {
        if self.radial {
            0.0
        } else {
            self.zeroth
        }
    }
}

/// `int_a^b x^c dx`
fn int_power(c: f64, a: f64, b: f64) -> f64 {
    if (c + 1.0).abs() < 1e-14 {
        (b / a).ln()
    } else {
        (b.powf(c + 1.0) - a.powf(c + 1.0)) / (c + 1.0)
    }
}

/// `int_a^b e^(c (x - x0)) dx`
fn int_exp(c: f64, x0: f64, a: f64, b: f64) -> f64 {
    if c.abs() * (b - a) < 1e-8 {
        let mid = 0.5 * (a + b);
        (b - a) * (c * (mid - x0)).exp()
    } else {
        ((c * (b - x0)).exp() - (c * (a - x0)).exp()) / c
    }
}

/// Grid nodes from the configuration.
pub fn grid_nodes(cfg: &GridConfig) -> Vec<f64> {
    let n = cfg.nr;
    let len = cfg.r_max - cfg.r_min;
    match cfg.grading {
        Grading::Uniform => (0..n).map(|i| cfg.r_min + len * i as f64 / (n - 1) as f64).collect(),
        Grading::Geometric { ratio } => {
            let cells = (n - 1) as i32;
            let h0 = if (ratio - 1.0).abs() < 1e-12 {
                len / cells as f64
            } else {
                len * (ratio - 1.0) / (ratio.powi(cells) - 1.0)
            };
            let mut xs = Vec::with_capacity(n);
            let mut x = cfg.r_min;
            let mut h = h0;
            for _ in 0..n {
                xs.push(x);
                x += h;
                h *= ratio;
            }
            xs[n - 1] = cfg.r_max;
            xs
        }
    }
}

fn validate(desc: &EquationDescriptor, cfg: &GridConfig) -> Result<(), PdeError> {
    let bad = |s: String| Err(PdeError::Config(s));
    if cfg.nr < 16 {
        return bad(format!("nr >= 16 required (got {})", cfg.nr));
    }
    if !(cfg.r_max > cfg.r_min) || !cfg.r_max.is_finite() || !cfg.r_min.is_finite() {
        return bad("r_max > r_min required".into());
    }
    if !(cfg.t_end > 0.0 && cfg.t_end.is_finite()) {
        return bad("t_end must be positive".into());
    }
    if !(cfg.dt_safety > 0.0 && cfg.dt_safety <= 1.0) {
        return bad(format!("dt_safety must lie in (0, 1] (got {})", fmt_g(cfg.dt_safety)));
    }
    if !(cfg.reaction_limit > 0.0) {
        return bad("reaction_limit must be positive".into());
    }
    if let Grading::Geometric { ratio } = cfg.grading {
        if !(ratio > 0.0 && ratio.is_finite()) {
            return bad("geometric ratio must be positive".into());
        }
    }
    if desc.is_radial() {
        if cfg.r_min < 0.0 {
            return bad("radial grids need r_min >= 0".into());
        }
        if (desc.sigma1 < 0.0 || desc.sigma2 < 0.0 || desc.n < 1.0) && cfg.r_min == 0.0 {
            return bad("r_min > 0 required for negative weight exponents".into());
        }
        if matches!(cfg.inner_bc, InnerBc::SymmetryNeumann) && cfg.r_min != 0.0 {
            return bad("symmetry condition needs r_min = 0; use truncated_neumann on a truncated grid".into());
        }
        if cfg.r_min == 0.0 && !matches!(cfg.inner_bc, InnerBc::SymmetryNeumann) {
            return bad("a grid through the origin needs the symmetry condition".into());
        }
    }
    if cfg.t_end < 0.0 || cfg.output_times.iter().any(|&t| !(t >= 0.0 && t <= cfg.t_end)) {
        return bad("output_times must lie in [0, t_end]".into());
    }
    Ok(())
}

/// Precomputed finite-volume weights.
struct Operator {
    c: Coefficients,
    x: Vec<f64>,
    /// `int rho g` over each control volume.
    vol: Vec<f64>,
    /// `g(face) / dx` between nodes `i` and `i+1`.
    cond: Vec<f64>,
    /// `kappa int s g` over each control volume.
    react: Vec<f64>,
    /// `z int g`
    zero: Vec<f64>,
    /// `int g`, for the forcing.
    metric: Vec<f64>,
    left_fixed: Option<BoundaryValue>,
    right_fixed: Option<BoundaryValue>,
}

impl Operator {
    fn new(desc: &EquationDescriptor, cfg: &GridConfig) -> Result<Self, PdeError> {
        let c = Coefficients::new(desc);
        let x = grid_nodes(cfg);
        let n = x.len();
        let xc = 0.5 * (x[0] + x[n - 1]);
        let faces: Vec<f64> = (0..=n)
            .map(|i| match i {
                0 => x[0],
                i if i == n => x[n - 1],
                i => 0.5 * (x[i - 1] + x[i]),
            })
            .collect();
        let integral = |kind: u8, a: f64, b: f64| -> f64 {
            if c.radial {
                let e = match kind {
                    0 => c.n - 1.0 + c.s1,
                    1 => c.n - 1.0 + c.s2,
                    _ => c.n - 1.0,
                };
                int_power(e, a, b)
            } else {
                match kind {
                    0 | 2 => int_exp(c.conv, xc, a, b),
                    _ => (c.rexp * xc).exp() * int_exp(c.conv + c.rexp, xc, a, b),
                }
            }
        };
        let mut vol = Vec::with_capacity(n);
        let mut react = Vec::with_capacity(n);
        let mut metric = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b) = (faces[i], faces[i + 1]);
            vol.push(integral(0, a, b));
            react.push(c.kappa * integral(1, a, b));
            metric.push(integral(2, a, b));
        }
        if vol.iter().chain(&react).any(|v| !v.is_finite()) || vol.iter().any(|&v| !(v > 0.0)) {
            return Err(PdeError::Config("cell weights are not integrable on this grid".into()));
        }
        let g = |y: f64| if c.radial { y.powf(c.n - 1.0) } else { (c.conv * (y - xc)).exp() };
        let cond = (0..n - 1).map(|i| g(faces[i + 1]) / (x[i + 1] - x[i])).collect();
        let zero = metric.iter().map(|v| c.zeroth() * v).collect();
        let left_fixed = match &cfg.inner_bc {
            InnerBc::SymmetryNeumann | InnerBc::TruncatedNeumann => None,
            InnerBc::TruncatedDirichlet(v) => Some(v.clone()),
        };
        let right_fixed = match &cfg.outer_bc {
            OuterBc::ZeroFlux => None,
            OuterBc::Dirichlet(v) => Some(v.clone()),
        };
        Ok(Operator { c, x, vol, cond, react, zero, metric, left_fixed, right_fixed })
    }

    fn n(&self) -> usize {
        self.x.len()
    }

    fn is_fixed(&self, i: usize) -> bool {
        (i == 0 && self.left_fixed.is_some()) || (i == self.n() - 1 && self.right_fixed.is_some())
    }

    fn apply_bc(&self, u: &mut [f64], t: f64) {
        let n = self.n();
        if let Some(v) = &self.left_fixed {
            u[0] = v.at(t);
        }
        if let Some(v) = &self.right_fixed {
            u[n - 1] = v.at(t);
        }
    }

    /// `du/dt` at free nodes (0 at fixed ones).
    fn rhs(&self, u: &[f64], um: &[f64], t: f64, forcing: Option<&dyn Field>, exec: Execution, out: &mut [f64]) {
        let n = self.n();
        let p = self.c.p;
        exec::fill(exec, out, |i| {
            if self.is_fixed(i) {
                return 0.0;
            }
            let mut acc = 0.0;
            if i + 1 < n {
                acc += self.cond[i] * (um[i + 1] - um[i]);
            }
            if i > 0 {
                acc -= self.cond[i - 1] * (um[i] - um[i - 1]);
            }
            if u[i] > 0.0 {
                acc += self.react[i] * u[i].powf(p);
            }
            acc += self.zero[i] * um[i];
            if let Some(f) = forcing {
                acc += self.metric[i] * f.eval(self.x[i], t);
            }
            acc / self.vol[i]
        });
    }

    /// Stable, positivity-preserving step for the current state.
    fn max_dt(&self, u: &[f64], cfg: &GridConfig) -> f64 {
        let n = self.n();
        let (m, p) = (self.c.m, self.c.p);
        let diff = |v: f64| if m == 1.0 { 1.0 } else { m * v.max(0.0).powf(m - 1.0) };
        let mut dt = f64::INFINITY;
        for i in 0..n {
            if self.is_fixed(i) {
                continue;
            }
            let mut umax = u[i];
            let mut k = 0.0;
            if i + 1 < n {
                k += self.cond[i];
                umax = umax.max(u[i + 1]);
            }
            if i > 0 {
                k += self.cond[i - 1];
                umax = umax.max(u[i - 1]);
            }
            let rate = (k + self.zero[i].abs()) * diff(umax);
            if rate > 0.0 {
                dt = dt.min(cfg.dt_safety * self.vol[i] / rate);
            }
            if u[i] > 0.0 {
                let g = self.react[i] * u[i].powf(p - 1.0) / self.vol[i];
                if g > 0.0 {
                    dt = dt.min(cfg.reaction_limit / g);
                }
            }
        }
        dt
    }
}

fn sup_and_arg(x: &[f64], u: &[f64]) -> (f64, f64) {
    let mut best = (f64::NEG_INFINITY, x[0]);
    for (xi, ui) in x.iter().zip(u) {
        if *ui > best.0 {
            best = (*ui, *xi);
        }
    }
    best
}

/// Integrate `desc` from `u0` on the grid of `cfg`.
pub fn integrate<U: Fn(f64) -> f64>(
    desc: &EquationDescriptor,
    u0: U,
    cfg: &GridConfig,
) -> Result<(GridSolution, BlowUpReport), PdeError> {
    integrate_forced(desc, u0, None, cfg)
}

/// [`integrate`] with an additional source term `F(x, t)` on the right.
pub fn integrate_forced<U: Fn(f64) -> f64>(
    desc: &EquationDescriptor,
    u0: U,
    forcing: Option<&dyn Field>,
    cfg: &GridConfig,
) -> Result<(GridSolution, BlowUpReport), PdeError> {
    validate(desc, cfg)?;
    let op = Operator::new(desc, cfg)?;
    let n = op.n();
    let mut u: Vec<f64> = op.x.iter().map(|&x| u0(x)).collect();
    if let Some(i) = u.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(PdeError::Config(format!(
            "initial data must be finite and nonnegative (u0({}) = {})",
            fmt_g(op.x[i]),
            fmt_g(u[i])
        )));
    }
    op.apply_bc(&mut u, 0.0);
    let m = op.c.m;
    let exec = cfg.exec;

    let mut outputs: Vec<f64> = if cfg.output_times.is_empty() {
        let k = cfg.snapshots.max(2);
        (0..k).map(|i| cfg.t_end * i as f64 / (k - 1) as f64).collect()
    } else {
        cfg.output_times.clone()
    };
    outputs.sort_by(f64::total_cmp);
    outputs.dedup();

    let norm_names: Vec<String> = cfg.norms.iter().map(NormSpec::name).collect();
    let record = |t: f64, u: &[f64]| -> NormRecord {
        let (sup, argmax) = sup_and_arg(&op.x, u);
        let norms = cfg
            .norms
            .iter()
            .map(|s| {
                weighted_norm(&op.x, u, s.q, s.w, if op.c.radial { op.c.n } else { 1.0 }).map_or(f64::NAN, |w| w.value)
            })
            .collect();
        NormRecord { t, sup, argmax, norms }
    };

    let mut times = Vec::new();
    let mut snaps = Vec::new();
    let mut next_out = 0;
    while next_out < outputs.len() && outputs[next_out] <= 0.0 {
        times.push(0.0);
        snaps.push(u.clone());
        next_out += 1;
    }
    let mut history = vec![record(0.0, &u)];
    let hist_dt = cfg.t_end / cfg.history_points.max(1) as f64;

    let mut t = 0.0;
    let mut steps = 0;
    let mut clipped = 0;
    let mut small_steps = 0;
    let mut status = RunStatus::Completed;
    let mut um = vec![0.0; n];
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let mut first = true;
    let pow_m = |v: f64| if m == 1.0 { v } else { v.powf(m) };

    while t < cfg.t_end {
        if steps >= cfg.max_steps {
            status = RunStatus::StepUnderflow { t };
            break;
        }
        let mut dt = op.max_dt(&u, cfg);
        if first {
            if let Some(d0) = cfg.dt_init {
                dt = dt.min(d0);
            }
            first = false;
        }
        let target = if next_out < outputs.len() { outputs[next_out] } else { cfg.t_end };
        let mut hit_output = false;
        if t + dt >= target {
            dt = target - t;
            hit_output = true;
        }
        let prev_sup = history.last().map_or(0.0, |h| h.sup);

        exec::fill(exec, &mut um, |i| pow_m(u[i]));
        op.rhs(&u, &um, t, forcing, exec, &mut k1);
        for i in 0..n {
            stage[i] = u[i] + dt * k1[i];
            if stage[i] < 0.0 {
                stage[i] = 0.0;
                clipped += 1;
            }
        }
        op.apply_bc(&mut stage, t + dt);
        exec::fill(exec, &mut um, |i| pow_m(stage[i]));
        op.rhs(&stage, &um, t + dt, forcing, exec, &mut k2);
        for i in 0..n {
            let v = 0.5 * u[i] + 0.5 * (stage[i] + dt * k2[i]);
            u[i] = if v < 0.0 {
                clipped += 1;
                0.0
            } else {
                v
            };
        }
        t = if hit_output { target } else { t + dt };
        op.apply_bc(&mut u, t);
        steps += 1;

        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(PdeError::NonFiniteState { t, x: op.x[i], snapshot: u });
        }

        let (sup, _) = sup_and_arg(&op.x, &u);
        let last = history.last().unwrap();
        if t - last.t >= hist_dt || sup > 1.1 * last.sup || hit_output {
            history.push(record(t, &u));
        }
        if hit_output && next_out < outputs.len() {
            times.push(t);
            snaps.push(u.clone());
            next_out += 1;
        }
        if sup > cfg.blowup_threshold {
            status = RunStatus::BlowUp { t_detect: t };
            break;
        }
        if dt < cfg.dt_min {
            small_steps += 1;
            if small_steps >= 3 {
                status =
                    if sup > prev_sup { RunStatus::BlowUp { t_detect: t } } else { RunStatus::StepUnderflow { t } };
                break;
            }
        } else {
            small_steps = 0;
        }
        if hit_output && next_out >= outputs.len() && t >= cfg.t_end {
            break;
        }
    }
    if times.last() != Some(&t) {
        times.push(t);
        snaps.push(u.clone());
    }
    if history.last().map(|h| h.t) != Some(t) {
        history.push(record(t, &u));
    }

    let report = match status {
        RunStatus::BlowUp { t_detect } => {
            let fit = blowup_fit(&history, cfg.blowup_threshold);
            BlowUpReport {
                detected: true,
                t_detect: Some(t_detect),
                growth_exponent_fit: fit.map(|f| f.0),
                t_blowup_fit: fit.map(|f| f.1),
                location: Some(sup_and_arg(&op.x, &u).1),
            }
        }
        _ => BlowUpReport {
            detected: false,
            t_detect: None,
            growth_exponent_fit: None,
            t_blowup_fit: None,
            location: None,
        },
    };
    Ok((GridSolution { r: op.x, times, u: snaps, norm_names, history, status, steps, clipped }, report))
}

/// Fit `sup u ~ (T - t)^-a` from the late history: `1 / (d ln sup / dt)` is
/// linear in `t` with slope `-1/a` and root `T`.
fn blowup_fit(history: &[NormRecord], threshold: f64) -> Option<(f64, f64)> {
    let lo = threshold.sqrt();
    let late: Vec<&NormRecord> = history.iter().filter(|h| h.sup >= lo && h.sup > 0.0).collect();
    let pts: Vec<(f64, f64)> = late
        .windows(2)
        .filter_map(|w| {
            let dt = w[1].t - w[0].t;
            let dl = w[1].sup.ln() - w[0].sup.ln();
            (dt > 0.0 && dl > 0.0).then(|| (0.5 * (w[0].t + w[1].t), dt / dl))
        })
        .collect();
    if pts.len() < 4 {
        return None;
    }
    let (slope, icept) = least_squares(&pts);
    if !(slope < 0.0) {
        return None;
    }
    Some((-1.0 / slope, -icept / slope))
}

/// Run several configurations, possibly in parallel.
pub fn sweep(runs: &[RunConfig], exec: Execution) -> Vec<Result<(GridSolution, BlowUpReport), PdeError>> {
    exec::map(exec, runs, |rc| integrate(&rc.descriptor, |r| rc.initial.eval(r), &rc.grid))
}

/// Weighted norm with a flag for a non-integrable small-`x` behaviour.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedNorm {
    pub value: f64,
    pub warning: Option<String>,
}

/// `(int x^w u^q x^(N-1) dx)^(1/q)` over the samples by composite Simpson
/// on a possibly nonuniform grid, without the angular constant.
///
/// When the integrand is infinite at the first node (weights singular at
/// `x = 0`) the first cell is integrated as a power law fitted to the next
/// two nodes; a power `<= -1` there is reported as non-integrable.
pub fn weighted_norm(x: &[f64], u: &[f64], q: f64, w: f64, n: f64) -> Result<WeightedNorm, PdeError> {
    if x.len() != u.len() || x.len() < 3 {
        return Err(PdeError::InsufficientData("weighted norm needs at least three samples".into()));
    }
    if !(q > 0.0) {
        return Err(PdeError::Domain(format!("q must be positive (got {})", fmt_g(q))));
    }
    if x.windows(2).any(|p| p[1] <= p[0]) {
        return Err(PdeError::Domain("samples must be strictly increasing".into()));
    }
    let e = w + n - 1.0;
    let weight = |xi: f64| if e == 0.0 { 1.0 } else { xi.powf(e) };
    let f: Vec<f64> = x.iter().zip(u).map(|(&xi, &ui)| weight(xi) * ui.abs().powf(q)).collect();
    let mut warning = None;
    let mut start = 0;
    let mut head = 0.0;
    if !f[0].is_finite() {
        // integrand ~ C x^a near the first node
        let (x1, x2) = (x[1], x[2]);
        let a = if f[1] > 0.0 && f[2] > 0.0 { (f[2] / f[1]).ln() / (x2 / x1).ln() } else { e };
        if a <= -1.0 {
            warning = Some(format!("NonIntegrable: integrand ~ x^{} at the first cell", fmt_g(a)));
            head = f64::INFINITY;
        } else {
            head = f[1] * x1 / (a + 1.0) * (1.0 - (x[0] / x1).powf(a + 1.0));
        }
        start = 1;
    } else if x[0] > 0.0 && e <= -1.0 && u[0] != 0.0 && x[0] < 1e-8 * (x[x.len() - 1] - x[0]) {
        warning = Some(format!("NonIntegrable: weight x^{} at the truncated origin", fmt_g(e)));
    }
    let xs = &x[start..];
    let fs = &f[start..];
    let total = head + simpson(xs, fs);
    Ok(WeightedNorm { value: total.powf(1.0 / q), warning })
}

/// Composite Simpson on a nonuniform grid; an odd trailing interval uses
/// the quadratic through the last three nodes.
pub fn simpson(x: &[f64], f: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return 0.5 * (x[1] - x[0]) * (f[0] + f[1]);
    }
    let mut s = 0.0;
    let mut i = 0;
    while i + 2 < n {
        let (h0, h1) = (x[i + 1] - x[i], x[i + 2] - x[i + 1]);
        s += (h0 + h1) / 6.0
            * ((2.0 - h1 / h0) * f[i] + (h0 + h1).powi(2) / (h0 * h1) * f[i + 1] + (2.0 - h0 / h1) * f[i + 2]);
        i += 2;
    }
    if i + 1 < n {
        // last interval [x_{n-2}, x_{n-1}] from the quadratic on the final three nodes
        let (a, b, c) = (x[n - 3], x[n - 2], x[n - 1]);
        let (fa, fb, fc) = (f[n - 3], f[n - 2], f[n - 1]);
        let h0 = b - a;
        let h1 = c - b;
        s += h1 / 6.0 * ((3.0 - h1 / (h0 + h1)) * fc + (3.0 + h1 / h0) * fb - h1 * h1 / (h0 * (h0 + h1)) * fa);
    }
    s
}

/// Least-squares fit of `ln v = slope ln t + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in `ln v`.
    pub rms: f64,
    pub points: usize,
}

pub fn power_law_fit(t: &[f64], v: &[f64]) -> Result<PowerLawFit, PdeError> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(v)
        .filter(|(t, v)| **t > 0.0 && **v > 0.0 && t.is_finite() && v.is_finite())
        .map(|(t, v)| (t.ln(), v.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(PdeError::InsufficientData(format!("{} usable points, need 3", pts.len())));
    }
    if pts.iter().all(|p| p.0 == pts[0].0) {
        return Err(PdeError::InsufficientData("all sample times coincide".into()));
    }
    let (slope, intercept) = least_squares(&pts);
    let rms = (pts.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum::<f64>() / pts.len() as f64).sqrt();
    Ok(PowerLawFit { slope, intercept, rms, points: pts.len() })
}

/// Slope of `ln sup u` against `ln t` over the history records in `window`.
pub fn decay_rate_estimate(gs: &GridSolution, window: (f64, f64)) -> Result<PowerLawFit, PdeError> {
    if gs.status != RunStatus::Completed {
        return Err(PdeError::InsufficientData(format!("run did not complete ({:?})", gs.status)));
    }
    let (t, v): (Vec<f64>, Vec<f64>) =
        gs.history.iter().filter(|h| h.t >= window.0 && h.t <= window.1).map(|h| (h.t, h.sup)).unzip();
    power_law_fit(&t, &v)
}

/// Options of the residual oracle.
#[derive(Clone)]
pub struct ResidualOptions {
    pub h_r: f64,
    pub h_t: f64,
    /// Allow one-sided stencils near the origin, interfaces and the start
    /// of the time domain instead of failing.
    pub one_sided: bool,
    /// Interface position as a function of time.
    pub interface: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    pub forcing: Option<Arc<dyn Field + Send>>,
    pub exec: Execution,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        ResidualOptions {
            h_r: 1e-3,
            h_t: 1e-3,
            one_sided: false,
            interface: None,
            forcing: None,
            exec: Execution::Sequential,
        }
    }
}

impl fmt::Debug for ResidualOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ResidualOptions")
            .field("h_r", &self.h_r)
            .field("h_t", &self.h_t)
            .field("one_sided", &self.one_sided)
            .field("interface", &self.interface.is_some())
            .field("forcing", &self.forcing.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualStats {
    pub max: f64,
    pub rms: f64,
    pub per_point: Vec<f64>,
    /// Maximum with both steps halved.
    pub max_refined: f64,
    /// `max / max_refined`; 16 for a fourth-order truncation error.
    pub ratio: f64,
    pub order: f64,
}

#[derive(Clone, Copy)]
enum Side {
    Central,
    Forward,
    Backward,
}

/// First and second derivatives of `f` at `x` with fourth-order stencils.
fn derivs(f: &dyn Fn(f64) -> f64, x: f64, h: f64, side: Side) -> (f64, f64, f64) {
    match side {
        Side::Central => {
            let (fm2, fm1, f0, f1, f2) = (f(x - 2.0 * h), f(x - h), f(x), f(x + h), f(x + 2.0 * h));
            let d1 = (fm2 - 8.0 * fm1 + 8.0 * f1 - f2) / (12.0 * h);
            let d2 = (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * f1 - f2) / (12.0 * h * h);
            (f0, d1, d2)
        }
        Side::Forward | Side::Backward => {
            let s = if matches!(side, Side::Forward) { h } else { -h };
            let v: Vec<f64> = (0..6).map(|k| f(x + k as f64 * s)).collect();
            let d1 = (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * s);
            let d2 =
                (45.0 * v[0] - 154.0 * v[1] + 214.0 * v[2] - 156.0 * v[3] + 61.0 * v[4] - 10.0 * v[5]) / (12.0 * h * h);
            (v[0], d1, d2)
        }
    }
}

fn point_residual(
    c: &Coefficients,
    sol: &dyn Field,
    x: f64,
    t: f64,
    hr: f64,
    ht: f64,
    opts: &ResidualOptions,
) -> Result<f64, PdeError> {
    let lower = if c.radial { 0.0 } else { f64::NEG_INFINITY };
    let mut side = Side::Central;
    let crosses_origin = x - 2.0 * hr <= lower;
    let iface = opts.interface.as_ref().map(|f| f(t));
    let crosses_iface = iface.is_some_and(|r0| (x - r0).abs() < 2.5 * hr);
    if crosses_origin || crosses_iface {
        if !opts.one_sided {
            return Err(PdeError::Domain(format!(
                "stencil at x = {} crosses the {}",
                fmt_g(x),
                if crosses_origin { "origin" } else { "interface" }
            )));
        }
        side = match iface {
            Some(r0) if crosses_iface && x < r0 => Side::Backward,
            _ => Side::Forward,
        };
        if matches!(side, Side::Backward) && x - 6.0 * hr <= lower {
            return Err(PdeError::Domain(format!("no room for a one-sided stencil at x = {}", fmt_g(x))));
        }
    }
    let m = c.m;
    let um = |y: f64| {
        let v = sol.eval(y, t);
        if m == 1.0 {
            v
        } else {
            v.powf(m)
        }
    };
    let (umv, d1, d2) = derivs(&um, x, hr, side);
    let ut_f = |s: f64| sol.eval(x, s);
    let mut tside = Side::Central;
    if [t - 2.0 * ht, t - ht].iter().any(|&s| !ut_f(s).is_finite()) {
        if !opts.one_sided {
            return Err(PdeError::Domain(format!("time stencil at t = {} leaves the solution's domain", fmt_g(t))));
        }
        tside = Side::Forward;
    }
    let (u, ut, _) = derivs(&ut_f, t, ht, tside);
    let forcing = opts.forcing.as_ref().map_or(0.0, |f| f.eval(x, t));
    let react = if u > 0.0 { c.kappa * c.source_weight(x) * u.powf(c.p) } else { 0.0 };
    let r = c.rho(x) * ut - d2 - c.log_metric(x) * d1 - c.zeroth() * umv - react - forcing;
    if r.is_finite() {
        Ok(r)
    } else {
        Err(PdeError::Domain(format!("residual is not finite at x = {}, t = {}", fmt_g(x), fmt_g(t))))
    }
}

/// Residual `rho u_t - (u^m)_xx - (g'/g)(u^m)_x - z u^m - kappa s u^p - F`
/// of `solution` at the `(x, t)` samples, from fourth-order differences at
/// steps `(h_r, h_t)` and again at half the steps.
pub fn residual(
    desc: &EquationDescriptor,
    solution: &dyn Field,
    samples: &[(f64, f64)],
    opts: &ResidualOptions,
) -> Result<ResidualStats, PdeError> {
    if samples.is_empty() {
        return Err(PdeError::InsufficientData("no sample points".into()));
    }
    let c = Coefficients::new(desc);
    let eval = |hr: f64, ht: f64| -> Result<Vec<f64>, PdeError> {
        exec::map(opts.exec, samples, |&(x, t)| point_residual(&c, solution, x, t, hr, ht, opts)).into_iter().collect()
    };
    let base = eval(opts.h_r, opts.h_t)?;
    let fine = eval(0.5 * opts.h_r, 0.5 * opts.h_t)?;
    let max = base.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let max_refined = fine.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let rms = (base.iter().map(|v| v * v).sum::<f64>() / base.len() as f64).sqrt();
    let ratio = max / max_refined;
    Ok(ResidualStats { max, rms, per_point: base, max_refined, ratio, order: ratio.log2() })
}

/// Residual statistics of tabulated data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResidual {
    pub max: f64,
    pub rms: f64,
    pub points: usize,
    /// `(x, t)` of the largest residual.
    pub argmax: (f64, f64),
    /// Largest `|rho u_t|`, for scale.
    pub scale: f64,
}

/// Residual of data `u[j][i] = u(x_i, t_j)` on a tensor grid, using
/// second-order three-point differences at interior nodes.
pub fn grid_residual(
    desc: &EquationDescriptor,
    x: &[f64],
    t: &[f64],
    u: &[Vec<f64>],
) -> Result<GridResidual, PdeError> {
    if x.len() < 3 || t.len() < 3 {
        return Err(PdeError::InsufficientData("need at least three nodes in x and in t".into()));
    }
    if u.len() != t.len() || u.iter().any(|row| row.len() != x.len()) {
        return Err(PdeError::InsufficientData("data does not match the grid shape".into()));
    }
    if x.windows(2).any(|w| w[1] <= w[0]) || t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PdeError::Domain("grid coordinates must be strictly increasing".into()));
    }
    let c = Coefficients::new(desc);
    if c.radial && x[0] < 0.0 {
        return Err(PdeError::Domain("radial data needs x >= 0".into()));
    }
    // derivatives of the quadratic through three nonuniform nodes, at the middle one
    let d3 = |x0: f64, x1: f64, x2: f64, f0: f64, f1: f64, f2: f64| {
        let (h0, h1) = (x1 - x0, x2 - x1);
        let d1 = (-h1 / (h0 * (h0 + h1))) * f0 + ((h1 - h0) / (h0 * h1)) * f1 + (h0 / (h1 * (h0 + h1))) * f2;
        let d2 = 2.0 * (f0 / (h0 * (h0 + h1)) - f1 / (h0 * h1) + f2 / (h1 * (h0 + h1)));
        (d1, d2)
    };
    let pow_m = |v: f64| if c.m == 1.0 { v } else { v.max(0.0).powf(c.m) };
    let mut max = 0.0f64;
    let mut sum = 0.0;
    let mut count = 0;
    let mut argmax = (f64::NAN, f64::NAN);
    let mut scale = 0.0f64;
    for j in 1..t.len() - 1 {
        for i in 1..x.len() - 1 {
            let xi = x[i];
            if c.radial && xi == 0.0 {
                continue;
            }
            let (um0, um1, um2) = (pow_m(u[j][i - 1]), pow_m(u[j][i]), pow_m(u[j][i + 1]));
            let (d1, d2) = d3(x[i - 1], xi, x[i + 1], um0, um1, um2);
            let (ut, _) = d3(t[j - 1], t[j], t[j + 1], u[j - 1][i], u[j][i], u[j + 1][i]);
            let v = u[j][i];
            let react = if v > 0.0 { c.kappa * c.source_weight(xi) * v.powf(c.p) } else { 0.0 };
            let lhs = c.rho(xi) * ut;
            let r = lhs - d2 - c.log_metric(xi) * d1 - c.zeroth() * um1 - react;
            if !r.is_finite() {
                return Err(PdeError::Domain(format!(
                    "residual is not finite at x = {}, t = {}",
                    fmt_g(xi),
                    fmt_g(t[j])
                )));
            }
            scale = scale.max(lhs.abs());
            if r.abs() > max {
                max = r.abs();
                argmax = (xi, t[j]);
            }
            sum += r * r;
            count += 1;
        }
    }
    if count == 0 {
        return Err(PdeError::InsufficientData("no interior nodes".into()));
    }
    Ok(GridResidual { max, rms: (sum / count as f64).sqrt(), points: count, argmax, scale })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics_on_nonuniform_grids() {
        let x = [0.0, 0.3, 0.5, 1.1, 1.2, 2.0];
        let f: Vec<f64> = x.iter().map(|&v: &f64| 1.0 + v - 2.0 * v * v + 0.5 * v.powi(2)).collect();
        let exact = 2.0 + 2.0 - 1.5 * 8.0 / 3.0;
        assert!((simpson(&x, &f) - exact).abs() < 1e-12);
        let x5 = &x[..5];
        let exact5 = 1.2 + 0.72 - 1.5 * 1.2f64.powi(3) / 3.0;
        assert!((simpson(x5, &f[..5]) - exact5).abs() < 1e-12);
    }

    #[test]
    fn grid_residual_of_exact_heat_solution_is_second_order() {
        // u = e^(-t) sin(x) solves u_t = u_xx on the line
        let d = EquationDescriptor::log_radial(crate::eqmodel::Family::EulerForm, 1.0, 1.0, Default::default())
            .with_coeff(crate::eqmodel::COEFF_REACTION, 0.0);
        let err = |n: usize| {
            let x: Vec<f64> = (0..n).map(|i| 0.3 + 2.0 * i as f64 / (n - 1) as f64).collect();
            let t: Vec<f64> = (0..n).map(|j| 0.1 + 0.5 * j as f64 / (n - 1) as f64).collect();
            let u: Vec<Vec<f64>> = t.iter().map(|&t| x.iter().map(|&x| (-t).exp() * x.sin()).collect()).collect();
            grid_residual(&d, &x, &t, &u).unwrap().max
        };
        let ratio = err(41) / err(81);
        assert!((ratio - 4.0).abs() < 0.4, "{ratio}");
    }

    #[test]
    fn geometric_grid_hits_both_ends() {
        let cfg = GridConfig {
            r_min: 0.5,
            r_max: 5.0,
            nr: 40,
            grading: Grading::Geometric { ratio: 1.05 },
            ..Default::default()
        };
        let x = grid_nodes(&cfg);
        assert_eq!(x[0], 0.5);
        assert_eq!(*x.last().unwrap(), 5.0);
        assert!(x.windows(3).all(|w| ((w[2] - w[1]) / (w[1] - w[0]) - 1.05).abs() < 1e-9));
    }

    #[test]
    fn config_rejects_singular_origin() {
        let d = EquationDescriptor::radial(2.0, 2.0, 3.0, -1.0, 0.0).unwrap();
        let cfg = GridConfig::default();
        assert!(matches!(integrate(&d, |_| 1.0, &cfg), Err(PdeError::Config(_))));
        let small = GridConfig { nr: 8, ..Default::default() };
        let d = EquationDescriptor::radial(2.0, 2.0, 3.0, 0.0, 0.0).unwrap();
        assert!(matches!(integrate(&d, |_| 1.0, &small), Err(PdeError::Config(_))));
    }

    #[test]
    fn zero_flux_conserves_weighted_mass() {
        let d = EquationDescriptor::radial(2.0, 1.0, 3.0, 1.0, 0.0)
            .unwrap()
            .with_coeff(crate::eqmodel::COEFF_REACTION, 0.0);
        let cfg = GridConfig { r_max: 4.0, nr: 64, t_end: 0.5, ..Default::default() };
        let (gs, _) = integrate(&d, |r| (-(r * r)).exp(), &cfg).unwrap();
        let op = Operator::new(&d, &cfg).unwrap();
        let mass = |u: &[f64]| u.iter().zip(&op.vol).map(|(a, b)| a * b).sum::<f64>();
        let m0 = mass(&gs.u[0]);
        let m1 = mass(gs.last().1);
        assert!(((m1 - m0) / m0).abs() < 1e-12, "{m0} {m1}");
    }
}
