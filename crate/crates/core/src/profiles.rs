//! Self-similar profiles.
//!
//! Substituting any of the self-similar forms into the radial equation gives
//! the same profile equation
//!
//! `(f^m)'' + (N-1)/xi (f^m)' + kappa xi^s2 f^p = xi^s1 (alpha f - beta xi f')`
//!
//! (the separate-variable form has `beta = 0`, the stationary form
//! `alpha = beta = 0`). It is integrated outward from a small `eps` in the
//! flux variables `U = f^m`, `Y = U'`, which stay regular where `f` reaches
//! zero. A scalar parameter of the local expansion at the origin is tuned by
//! bisection between trajectories that hit zero with negative flux ("crash")
//! and trajectories that turn back up; the separating trajectory is the
//! compactly supported (or decaying) profile.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eqmodel::{EquationDescriptor, FormKind, SelfSimilarForm};
use crate::exec::{self, Execution};
use crate::interp::{Pchip, QuinticHermite};
use crate::ode::{self, OdeError, Stop};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("KindMismatch: {0}")]
    KindMismatch(String),
    #[error("DegenerateODE: {0}")]
    DegenerateOde(String),
    #[error("NoBracketing: {0}")]
    NoBracketing(String),
    #[error("StiffnessFailure: {0}")]
    StiffnessFailure(String),
    #[error("NonConvergence: {0}")]
    NonConvergence(String),
    #[error("NoConnection: {0}")]
    NoConnection(String),
}

impl From<OdeError> for ProfileError {
    fn from(e: OdeError) -> Self {
        ProfileError::StiffnessFailure(e.to_string())
    }
}

/// Local behavior of a profile at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorClass {
    /// `f^(m-p) = D - k xi^(s2+2)`, reaction-dominated positive origin.
    Q1,
    /// `f^(m-1) = D + C xi^(s1+2)`, diffusion/time balance, `s2 >= s1`.
    PosOrigin,
    /// Backward-form variant of `Q1` for `s2 < s1`.
    Q1var,
    /// `f ~ C xi^((s1+2)/(m-1))`, amplitude fixed by the equation.
    CPower1,
    /// `f ~ C xi^((s2+2)/(m-p))`, free amplitude.
    CPower2,
    /// Exponential form: `f^(m-p) = K - k xi^((s1+2)(m-p)/(m-1))`.
    ExpQ1,
    /// `s2 = -2`: `f^(m-p) = K - k ln xi`.
    LogSingular,
    /// Regular origin `f(0) = D`, algebraic decay at infinity.
    Decay,
    /// Singular stationary power `K xi^(-(s2+2)/(p-m))` at the origin.
    StatTail,
}

impl BehaviorClass {
    pub const ALL: [BehaviorClass; 9] = [
        BehaviorClass::Q1,
        BehaviorClass::PosOrigin,
        BehaviorClass::Q1var,
        BehaviorClass::CPower1,
        BehaviorClass::CPower2,
        BehaviorClass::ExpQ1,
        BehaviorClass::LogSingular,
        BehaviorClass::Decay,
        BehaviorClass::StatTail,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BehaviorClass::Q1 => "q1",
            BehaviorClass::PosOrigin => "pos_origin",
            BehaviorClass::Q1var => "q1var",
            BehaviorClass::CPower1 => "cpower1",
            BehaviorClass::CPower2 => "cpower2",
            BehaviorClass::ExpQ1 => "exp_q1",
            BehaviorClass::LogSingular => "log_singular",
            BehaviorClass::Decay => "decay",
            BehaviorClass::StatTail => "stat_tail",
        }
    }

    /// Classes whose expansion has no free constant.
    pub fn is_determined(self) -> bool {
        matches!(self, BehaviorClass::CPower1 | BehaviorClass::StatTail)
    }
}

impl fmt::Display for BehaviorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BehaviorClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        BehaviorClass::ALL
            .into_iter()
            .find(|c| c.name() == key || c.name().replace('_', "") == key.replace('_', ""))
            .ok_or_else(|| format!("unknown behavior class '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShootTarget {
    /// Vanish at a finite `xi0` with zero flux.
    CompactSupport,
    /// Positive with tail `xi^-rate`.
    Decay { rate: f64 },
    /// Positive and bounded up to `xi_max`.
    Bounded,
}

/// The profile equation for one descriptor and self-similar form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileOde {
    pub kind: FormKind,
    pub m: f64,
    pub p: f64,
    #[serde(rename = "N")]
    pub n: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ProfileOde {
    pub fn new(desc: &EquationDescriptor, form: &SelfSimilarForm) -> Result<Self, ProfileError> {
        if !desc.is_radial() {
            return Err(ProfileError::KindMismatch(format!(
                "profile equation needs a radial family, got {:?}",
                desc.family
            )));
        }
        form.check_against(desc).map_err(|e| ProfileError::KindMismatch(e.to_string()))?;
        let (alpha, beta) = match form.kind {
            FormKind::Stationary => (0.0, 0.0),
            FormKind::SeparateVariable => (form.alpha, 0.0),
            _ => (form.alpha, form.beta),
        };
        Ok(ProfileOde {
            kind: form.kind,
            m: desc.m,
            p: desc.p,
            n: desc.n,
            sigma1: desc.sigma1,
            sigma2: desc.sigma2,
            kappa: desc.reaction(),
            alpha,
            beta,
        })
    }

    /// `xi^s1 (alpha f - beta xi f') - kappa xi^s2 f^p`, the value of the
    /// radial Laplacian of `f^m`.
    fn source(&self, xi: f64, f: f64, fp: f64) -> f64 {
        xi.powf(self.sigma1) * (self.alpha * f - self.beta * xi * fp)
            - self.kappa * xi.powf(self.sigma2) * f.powf(self.p)
    }

    /// `f''` from the equation where `f > 0`.
    pub fn second_derivative(&self, xi: f64, f: f64, fp: f64) -> Result<f64, ProfileError> {
        let m = self.m;
        if !(f > 0.0) && m > 1.0 {
            return Err(ProfileError::DegenerateOde(format!(
                "f = {f:e} at xi = {xi:e}; the equation is degenerate where f vanishes"
            )));
        }
        let fm1 = f.powf(m - 1.0);
        let lap = self.source(xi, f, fp) - (self.n - 1.0) / xi * m * fm1 * fp;
        Ok((lap - m * (m - 1.0) * f.powf(m - 2.0) * fp * fp) / (m * fm1))
    }

    /// Left minus right side of the profile equation.
    pub fn residual(&self, xi: f64, f: f64, fp: f64, fpp: f64) -> f64 {
        let m = self.m;
        let um1 = m * f.powf(m - 1.0) * fp;
        let um2 = m * f.powf(m - 1.0) * fpp + m * (m - 1.0) * f.powf(m - 2.0) * fp * fp;
        um2 + (self.n - 1.0) / xi * um1 - self.source(xi, f, fp)
    }

    fn flux_rhs(&self, xi: f64, y: &[f64; 2]) -> [f64; 2] {
        let (u, q) = (y[0], y[1]);
        if !(u > 0.0) {
            return [f64::NAN, f64::NAN];
        }
        let f = u.powf(1.0 / self.m);
        let fp = q * f / (self.m * u);
        [q, -(self.n - 1.0) / xi * q + self.source(xi, f, fp)]
    }

    fn with_alpha(mut self, alpha: f64) -> Self {
        self.beta = alpha * (self.m - 1.0) / (self.sigma1 + 2.0);
        self.alpha = alpha;
        self
    }

    fn form(&self, t_ref: Option<f64>) -> SelfSimilarForm {
        SelfSimilarForm { kind: self.kind, alpha: self.alpha, beta: self.beta, t_ref }
    }
}

/// Two-term expansion at the origin, in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Local {
    /// `f^e = a + b xi^s`
    PowerSum { e: f64, a: f64, b: f64, s: f64 },
    /// `f = c xi^k (1 + d xi^s)`
    Monomial { c: f64, k: f64, d: f64, s: f64 },
    /// `f^e = a - b ln xi`
    Log { e: f64, a: f64, b: f64 },
    /// `f^m = a + b xi^s + c xi^t`
    Regular { m: f64, a: f64, b: f64, s: f64, c: f64, t: f64 },
}

impl Local {
    fn eval(&self, xi: f64) -> (f64, f64) {
        match *self {
            Local::PowerSum { e, a, b, s } => {
                let g = a + b * xi.powf(s);
                if g <= 0.0 {
                    return (0.0, 0.0);
                }
                let f = g.powf(1.0 / e);
                (f, f / (e * g) * b * s * xi.powf(s - 1.0))
            }
            Local::Monomial { c, k, d, s } => {
                let xs = xi.powf(s);
                (c * xi.powf(k) * (1.0 + d * xs), c * xi.powf(k - 1.0) * (k + d * (k + s) * xs))
            }
            Local::Log { e, a, b } => {
                let g = a - b * xi.ln();
                if g <= 0.0 {
                    return (0.0, 0.0);
                }
                let f = g.powf(1.0 / e);
                (f, -f / (e * g) * b / xi)
            }
            Local::Regular { m, a, b, s, c, t } => {
                let u = a + b * xi.powf(s) + c * xi.powf(t);
                if u <= 0.0 {
                    return (0.0, 0.0);
                }
                let du = b * s * xi.powf(s - 1.0) + c * t * xi.powf(t - 1.0);
                let f = u.powf(1.0 / m);
                (f, du * f / (m * u))
            }
        }
    }
}

fn local(ode: &ProfileOde, class: BehaviorClass, param: f64) -> Result<Local, ProfileError> {
    let ProfileOde { kind, m, p, n, sigma1: s1, sigma2: s2, kappa, alpha, beta } = *ode;
    let need = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(ProfileError::KindMismatch(format!("class {class} {what}")))
        }
    };
    let positive_param = || need(param.is_finite() && param > 0.0, "needs a positive parameter");
    match class {
        BehaviorClass::Q1 | BehaviorClass::Q1var | BehaviorClass::ExpQ1 => {
            need(p < m, "needs p < m")?;
            need(s2 > -2.0 && n + s2 > 0.0, "needs sigma2 > -2 and N + sigma2 > 0")?;
            match class {
                BehaviorClass::Q1var => {
                    need(kind == FormKind::Backward && s2 < s1, "needs backward form and sigma2 < sigma1")?
                }
                BehaviorClass::ExpQ1 => need(kind == FormKind::Exponential, "needs the exponential form")?,
                _ => need(
                    !matches!(kind, FormKind::Exponential | FormKind::SeparateVariable),
                    "needs forward, backward or stationary form",
                )?,
            }
            positive_param()?;
            let k = kappa * (m - p) / (m * (n + s2) * (s2 + 2.0));
            Ok(Local::PowerSum { e: m - p, a: param, b: -k, s: s2 + 2.0 })
        }
        BehaviorClass::PosOrigin => {
            need(m > 1.0, "needs m > 1")?;
            need(s2 >= s1 && s1 > -2.0 && n + s1 > 0.0, "needs sigma2 >= sigma1 > -2 and N + sigma1 > 0")?;
            positive_param()?;
            let same = if s2 == s1 { kappa * param.powf((p - 1.0) / (m - 1.0)) } else { 0.0 };
            let c = (m - 1.0) * (alpha - same) / (m * (n + s1) * (s1 + 2.0));
            Ok(Local::PowerSum { e: m - 1.0, a: param, b: c, s: s1 + 2.0 })
        }
        BehaviorClass::CPower1 => {
            need(m > 1.0 && s1 > -2.0, "needs m > 1 and sigma1 > -2")?;
            let k = (s1 + 2.0) / (m - 1.0);
            let amp = (alpha - beta * k) / (m * k * (m * k + n - 2.0));
            need(amp > 0.0 && amp.is_finite(), "has no positive amplitude for this form")?;
            let s = s2 - s1 + k * (p - 1.0);
            need(s > 0.0, "needs sigma2 - sigma1 + k (p-1) > 0")?;
            let c = amp.powf(1.0 / (m - 1.0));
            let denom = amp * m * ((m * k + s) * (m * k + s + n - 2.0) - k * (m * k + n - 2.0)) + beta * s;
            let d = -kappa * c.powf(p - 1.0) / denom;
            Ok(Local::Monomial { c, k, d, s })
        }
        BehaviorClass::CPower2 => {
            need(p < m && s2 > -2.0, "needs p < m and sigma2 > -2")?;
            let g = (s2 + 2.0) / (m - p);
            let s = (m - 1.0) * g - s1 - 2.0;
            need(beta != 0.0 && s > 0.0, "needs beta != 0 and (m-1)(s2+2)/(m-p) > s1 + 2")?;
            need((alpha - beta * g).abs() <= 1e-10 * (1.0 + alpha.abs()), "needs alpha/beta = (s2+2)/(m-p)")?;
            positive_param()?;
            let e = (param.powf(m) * m * g * (m * g + n - 2.0) + kappa * param.powf(p)) / (beta * s);
            Ok(Local::Monomial { c: param, k: g, d: e / param, s })
        }
        BehaviorClass::LogSingular => {
            need((s2 + 2.0).abs() < 1e-12 && p < m && n > 2.0, "needs sigma2 = -2, p < m and N > 2")?;
            need(param.is_finite(), "needs a finite parameter")?;
            Ok(Local::Log { e: m - p, a: param, b: kappa * (m - p) / (m * (n - 2.0)) })
        }
        BehaviorClass::Decay => {
            need(
                s1 > -2.0 && s2 > -2.0 && n + s1 > 0.0 && n + s2 > 0.0,
                "needs sigma1, sigma2 > -2 and N + sigma > 0",
            )?;
            positive_param()?;
            Ok(Local::Regular {
                m,
                a: param.powf(m),
                b: alpha * param / ((n + s1) * (s1 + 2.0)),
                s: s1 + 2.0,
                c: -kappa * param.powf(p) / ((n + s2) * (s2 + 2.0)),
                t: s2 + 2.0,
            })
        }
        BehaviorClass::StatTail => {
            need(p > m && n > 2.0, "needs p > m and N > 2")?;
            let g = (s2 + 2.0) / (p - m);
            let base = m * g * (n - 2.0 - m * g) / kappa;
            need(base > 0.0, "needs p above the stationary critical exponent")?;
            Ok(Local::Monomial { c: base.powf(1.0 / (p - m)), k: -g, d: 0.0, s: 1.0 })
        }
    }
}

/// `(f(eps), f'(eps))` from the class's two-term expansion.
pub fn initial_expansion(
    desc: &EquationDescriptor,
    form: &SelfSimilarForm,
    class: BehaviorClass,
    param: f64,
    eps: f64,
) -> Result<(f64, f64), ProfileError> {
    let ode = ProfileOde::new(desc, form)?;
    Ok(local(&ode, class, param)?.eval(eps))
}

/// Leading exponent of the class near the origin: the power of `f` for
/// power-law classes, the coefficient of `-ln xi` in `f^(m-p)` for
/// `LogSingular`, and 0 for classes with `f(0) > 0`.
pub fn class_exponent(desc: &EquationDescriptor, class: BehaviorClass) -> f64 {
    let (m, p, n, s1, s2) = (desc.m, desc.p, desc.n, desc.sigma1, desc.sigma2);
    match class {
        BehaviorClass::CPower1 => (s1 + 2.0) / (m - 1.0),
        BehaviorClass::CPower2 => (s2 + 2.0) / (m - p),
        BehaviorClass::LogSingular => desc.reaction() * (m - p) / (m * (n - 2.0)),
        BehaviorClass::StatTail => -(s2 + 2.0) / (p - m),
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootOptions {
    /// Start of the outward integration.
    pub eps: f64,
    pub xi_max: f64,
    /// Log-grid range of the shooting parameter (`alpha` for `ExpQ1`).
    pub param_range: (f64, f64),
    pub scan_points: usize,
    /// Crash level for `f`, relative to `max(f(eps), 1)`.
    pub floor: f64,
    pub rtol: f64,
    pub max_bisections: usize,
    /// Allowed relative mismatch of the fitted tail exponent (`Decay`).
    pub decay_tolerance: f64,
    /// Interface flux tolerance relative to `max f^m`.
    pub flux_tolerance: f64,
    /// Step budget of each outward integration.
    pub max_steps: usize,
    pub exec: Execution,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions {
            eps: 1e-4,
            xi_max: 1e3,
            param_range: (1e-6, 1e6),
            scan_points: 60,
            floor: 1e-10,
            rtol: 1e-11,
            max_bisections: 200,
            decay_tolerance: 0.05,
            flux_tolerance: 1e-6,
            max_steps: 2_000_000,
            exec: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// `f` reached the floor while decreasing.
    Crash,
    /// The flux turned positive again, or `f^m` grew past the cap.
    TurnUp,
    /// Reached `xi_max` positive.
    Reached,
    /// Integration failed.
    Failed,
}

struct Run {
    ode: ProfileOde,
    local: Local,
    param: f64,
    xs: Vec<f64>,
    ys: Vec<[f64; 2]>,
    outcome: Outcome,
}

fn run(
    ode: ProfileOde,
    class: BehaviorClass,
    param: f64,
    opts: &ShootOptions,
    xi_end: f64,
) -> Result<Run, ProfileError> {
    let loc = local(&ode, class, param)?;
    let (f0, fp0) = loc.eval(opts.eps);
    if !(f0 > 0.0 && f0.is_finite() && fp0.is_finite()) {
        return Err(ProfileError::NonConvergence(format!("expansion gives f = {f0:e} at eps = {:e}", opts.eps)));
    }
    let m = ode.m;
    let u0 = f0.powf(m);
    let y0 = m * f0.powf(m - 1.0) * fp0;
    let u_floor = (opts.floor * f0.max(1.0)).powf(m);
    let u_cap = 1e12 * u0.max(1.0);
    let events = [
        Box::new(move |_x: f64, y: &[f64; 2]| if y[1] < 0.0 { y[0] - u_floor } else { 1.0 })
            as Box<dyn Fn(f64, &[f64; 2]) -> f64>,
        Box::new(|_x: f64, y: &[f64; 2]| -y[1]),
        Box::new(move |_x: f64, y: &[f64; 2]| u_cap - y[0]),
    ];
    let ode_opts = ode::Options {
        rtol: opts.rtol,
        atol: 1e-3 * opts.rtol * u_floor.min(u0).max(1e-300),
        max_steps: opts.max_steps,
        ..ode::Options::default()
    };
    let traj = ode::integrate_partial(|x, y| ode.flux_rhs(x, y), opts.eps, [u0, y0], xi_end, &ode_opts, &events);
    // A step-size collapse while still falling means the solution is
    // heading into zero with a singular slope: that is a crash.
    let outcome = match (traj.stop, &traj.failure) {
        (_, Some(OdeError::StepUnderflow { .. })) if traj.last().1[1] < 0.0 => Outcome::Crash,
        (_, Some(e)) => return Err(e.clone().into()),
        (Stop::Event(0), None) => Outcome::Crash,
        (Stop::Event(_), None) => Outcome::TurnUp,
        (Stop::End, None) => Outcome::Reached,
    };
    Ok(Run { ode, local: loc, param, xs: traj.xs, ys: traj.ys, outcome })
}

/// Sample of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub xi: f64,
    pub f: f64,
    pub fprime: f64,
}

type Exact = std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A sampled self-similar profile with its origin expansion and, when
/// compactly supported, its interface.
#[derive(Clone)]
pub struct Profile {
    pub descriptor: EquationDescriptor,
    pub form: SelfSimilarForm,
    pub behavior_class: BehaviorClass,
    pub target: ShootTarget,
    /// `D`, `K` or `C` of the expansion; `alpha` for `ExpQ1`; NaN when the
    /// class is determined.
    pub shoot_param: f64,
    pub xi0: Option<f64>,
    /// `(f^m)'` where the trajectory reached the floor.
    pub interface_flux: Option<f64>,
    pub epsilon: f64,
    pub iterations: usize,
    /// Crash/turn-up sign changes seen in the parameter scan.
    pub brackets: usize,
    /// Fitted `d ln f / d ln xi` over the last sampled half decade.
    pub tail_exponent: Option<f64>,
    pub samples: Vec<ProfileSample>,
    ode: ProfileOde,
    local: Option<Local>,
    interp: QuinticHermite,
    exact: Option<Exact>,
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Profile")
            .field("behavior_class", &self.behavior_class)
            .field("form", &self.form)
            .field("shoot_param", &self.shoot_param)
            .field("xi0", &self.xi0)
            .field("samples", &self.samples.len())
            .finish()
    }
}

/// JSON metadata of a profile (samples go to CSV).
#[derive(Debug, Clone, Serialize)]
pub struct ProfileMeta {
    pub descriptor: EquationDescriptor,
    pub form: SelfSimilarForm,
    pub behavior_class: BehaviorClass,
    pub target: ShootTarget,
    #[serde(serialize_with = "crate::wire::ser_real")]
    pub shoot_param: f64,
    #[serde(serialize_with = "crate::wire::ser_opt_real")]
    pub xi0: Option<f64>,
    #[serde(serialize_with = "crate::wire::ser_opt_real")]
    pub interface_flux: Option<f64>,
    pub epsilon: f64,
    pub iterations: usize,
    pub brackets: usize,
    #[serde(serialize_with = "crate::wire::ser_opt_real")]
    pub tail_exponent: Option<f64>,
    pub samples: usize,
}

impl Profile {
    /// Build from samples that satisfy the profile equation; second
    /// derivatives for interpolation come from the equation itself.
    pub fn from_samples(
        desc: &EquationDescriptor,
        form: &SelfSimilarForm,
        class: BehaviorClass,
        samples: Vec<ProfileSample>,
        xi0: Option<f64>,
    ) -> Result<Self, ProfileError> {
        let ode = ProfileOde::new(desc, form)?;
        Self::assemble(ode, class, ShootTarget::Bounded, None, f64::NAN, samples, xi0)
    }

    /// Attach an exact evaluator used in place of the interpolant.
    pub fn with_exact<F: Fn(f64) -> f64 + Send + Sync + 'static>(mut self, f: F) -> Self {
        self.exact = Some(std::sync::Arc::new(f));
        self
    }

    fn assemble(
        ode: ProfileOde,
        class: BehaviorClass,
        target: ShootTarget,
        local: Option<Local>,
        param: f64,
        samples: Vec<ProfileSample>,
        xi0: Option<f64>,
    ) -> Result<Self, ProfileError> {
        let mut xs = Vec::with_capacity(samples.len());
        let mut fs = Vec::with_capacity(samples.len());
        let mut d1 = Vec::with_capacity(samples.len());
        let mut d2 = Vec::with_capacity(samples.len());
        for s in &samples {
            xs.push(s.xi);
            fs.push(s.f);
            d1.push(s.fprime);
            d2.push(ode.second_derivative(s.xi, s.f, s.fprime)?);
        }
        let interp = QuinticHermite::new(xs, fs, d1, d2)
            .ok_or_else(|| ProfileError::NonConvergence("profile needs at least two increasing samples".into()))?;
        let descriptor = EquationDescriptor::radial(ode.m, ode.p, ode.n, ode.sigma1, ode.sigma2)
            .map_err(|e| ProfileError::KindMismatch(e.to_string()))?
            .with_coeff(crate::eqmodel::COEFF_REACTION, ode.kappa);
        let t_ref = matches!(ode.kind, FormKind::Backward | FormKind::SeparateVariable).then_some(1.0);
        let tail_exponent = tail_slope(&samples);
        Ok(Profile {
            descriptor,
            form: ode.form(t_ref),
            behavior_class: class,
            target,
            shoot_param: param,
            xi0,
            interface_flux: None,
            epsilon: samples.first().map_or(0.0, |s| s.xi),
            iterations: 0,
            brackets: 0,
            tail_exponent,
            samples,
            ode,
            local,
            interp,
            exact: None,
        })
    }

    pub fn ode(&self) -> &ProfileOde {
        &self.ode
    }

    /// Largest `xi` at which the profile is known (`xi0` when supported).
    pub fn xi_max(&self) -> f64 {
        self.xi0.unwrap_or_else(|| self.interp.x_range().1)
    }

    /// `f(xi)`; `None` beyond the sampled range of a profile without an
    /// interface. Zero beyond the interface.
    pub fn eval(&self, xi: f64) -> Option<f64> {
        self.eval_with_derivative(xi).map(|v| v.0)
    }

    /// `(f, f')` at `xi`.
    pub fn eval_with_derivative(&self, xi: f64) -> Option<(f64, f64)> {
        if !(xi >= 0.0) {
            return None;
        }
        if let Some(x0) = self.xi0 {
            if xi >= x0 {
                return Some((0.0, 0.0));
            }
        }
        if let Some(ex) = &self.exact {
            let h = 1e-6 * (1.0 + xi);
            let d = if xi > h { (ex(xi + h) - ex(xi - h)) / (2.0 * h) } else { (ex(xi + h) - ex(xi)) / h };
            return Some((ex(xi), d));
        }
        let (lo, hi) = self.interp.x_range();
        if xi < lo {
            return match self.local {
                Some(l) if xi > 0.0 => Some(l.eval(xi)),
                Some(l) => {
                    let (f, d) = l.eval(f64::MIN_POSITIVE);
                    Some((if f < 1e-300 { 0.0 } else { f }, d))
                }
                None => Some((self.samples[0].f, self.samples[0].fprime)),
            };
        }
        if xi <= hi {
            return Some(self.interp.eval(xi));
        }
        let x0 = self.xi0?;
        // power-law tail f ~ (x0 - xi)^(1/(m-1)) up to the interface
        let last = self.samples.last()?;
        let a = 1.0 / (self.ode.m - 1.0).max(1e-12);
        let ratio = (x0 - xi) / (x0 - last.xi);
        let f = last.f * ratio.powf(a);
        Some((f, -a * f / (x0 - xi)))
    }

    pub fn meta(&self) -> ProfileMeta {
        ProfileMeta {
            descriptor: self.descriptor.clone(),
            form: self.form,
            behavior_class: self.behavior_class,
            target: self.target,
            shoot_param: self.shoot_param,
            xi0: self.xi0,
            interface_flux: self.interface_flux,
            epsilon: self.epsilon,
            iterations: self.iterations,
            brackets: self.brackets,
            tail_exponent: self.tail_exponent,
            samples: self.samples.len(),
        }
    }
}

fn tail_slope(samples: &[ProfileSample]) -> Option<f64> {
    let last = samples.last()?;
    let lo = last.xi / 10f64.sqrt();
    let pts: Vec<(f64, f64)> =
        samples.iter().filter(|s| s.xi >= lo && s.f > 0.0).map(|s| (s.xi.ln(), s.f.ln())).collect();
    if pts.len() < 3 || lo <= samples[0].xi {
        return None;
    }
    Some(least_squares(&pts).0)
}

/// Slope and intercept of the least-squares line through `pts`.
pub(crate) fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn samples_of(run: &Run, upto: usize) -> Vec<ProfileSample> {
    let m = run.ode.m;
    run.xs[..upto]
        .iter()
        .zip(&run.ys[..upto])
        .map(|(&xi, y)| {
            let f = y[0].powf(1.0 / m);
            ProfileSample { xi, f, fprime: y[1] * f / (m * y[0]) }
        })
        .collect()
}

/// Integrate outward from `eps` with the class expansion, stopping at a
/// crash, a turn-up or `xi_end`. Returns the samples and the outcome.
pub fn integrate_from_origin(
    desc: &EquationDescriptor,
    form: &SelfSimilarForm,
    class: BehaviorClass,
    param: f64,
    xi_end: f64,
    opts: &ShootOptions,
) -> Result<(Vec<ProfileSample>, Outcome), ProfileError> {
    let ode = ProfileOde::new(desc, form)?;
    let r = run(ode, class, param, opts, xi_end)?;
    Ok((samples_of(&r, r.xs.len()), r.outcome))
}

/// Shoot for a profile of the given class reaching the target.
pub fn shoot(
    desc: &EquationDescriptor,
    form: &SelfSimilarForm,
    class: BehaviorClass,
    target: ShootTarget,
    opts: &ShootOptions,
) -> Result<Profile, ProfileError> {
    let ode = ProfileOde::new(desc, form)?;
    if class.is_determined() {
        let r = run(ode, class, f64::NAN, opts, opts.xi_max)?;
        return finish(r, None, class, target, opts, 1, 0);
    }
    if class == BehaviorClass::ExpQ1 && !(ode.sigma1 > -2.0 && ode.m > 1.0) {
        return Err(ProfileError::KindMismatch("class exp_q1 needs m > 1 and sigma1 > -2".into()));
    }
    // ExpQ1 tunes alpha (beta follows) with f(0) = 1 fixed by the rescaling
    // invariance of the L = 0 equation.
    let trial = |q: f64| -> Result<Run, ProfileError> {
        if class == BehaviorClass::ExpQ1 {
            run(ode.with_alpha(q), class, 1.0, opts, opts.xi_max)
        } else {
            run(ode, class, q, opts, opts.xi_max)
        }
    };
    // surface admissibility errors before scanning
    local(
        &if class == BehaviorClass::ExpQ1 { ode.with_alpha(1.0) } else { ode },
        class,
        if class == BehaviorClass::ExpQ1 { 1.0 } else { opts.param_range.0 },
    )?;

    let (lo, hi) = opts.param_range;
    let n = opts.scan_points.max(2);
    let grid: Vec<f64> = (0..n).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp()).collect();
    let outcomes: Vec<Outcome> = exec::map(opts.exec, &grid, |&q| trial(q).map_or(Outcome::Failed, |r| r.outcome));
    let pairs: Vec<usize> = (0..n - 1)
        .filter(|&i| {
            matches!(
                (outcomes[i], outcomes[i + 1]),
                (Outcome::Crash, Outcome::TurnUp) | (Outcome::TurnUp, Outcome::Crash)
            )
        })
        .collect();
    let Some(&first) = pairs.first() else {
        let count = |o: Outcome| outcomes.iter().filter(|&&x| x == o).count();
        return Err(ProfileError::NoBracketing(format!(
            "{n} values in [{lo:e}, {hi:e}]: {} crash, {} turn-up, {} reached, {} failed",
            count(Outcome::Crash),
            count(Outcome::TurnUp),
            count(Outcome::Reached),
            count(Outcome::Failed)
        )));
    };
    let (mut a, mut b) = (grid[first], grid[first + 1]);
    let crash_low = outcomes[first] == Outcome::Crash;
    let mut iterations = n;
    for _ in 0..opts.max_bisections {
        let mid = (a * b).sqrt();
        if !(mid > a && mid < b) {
            break;
        }
        let r = trial(mid)?;
        iterations += 1;
        match (r.outcome, crash_low) {
            (Outcome::Crash, true) | (Outcome::TurnUp, false) => a = mid,
            (Outcome::Crash, false) | (Outcome::TurnUp, true) => b = mid,
            (o, _) => {
                return Err(ProfileError::NonConvergence(format!(
                    "trajectory at parameter {mid:e} ended as {o:?} inside the bracket"
                )))
            }
        }
    }
    let (qc, qt) = if crash_low { (a, b) } else { (b, a) };
    let crash = trial(qc)?;
    let turn = trial(qt)?;
    finish(crash, Some(turn), class, target, opts, iterations + 2, pairs.len())
}

fn finish(
    r: Run,
    other: Option<Run>,
    class: BehaviorClass,
    target: ShootTarget,
    opts: &ShootOptions,
    iterations: usize,
    brackets: usize,
) -> Result<Profile, ProfileError> {
    let param = if class == BehaviorClass::ExpQ1 { r.ode.alpha } else { r.param };
    let umax = r.ys.iter().map(|y| y[0]).fold(0.0, f64::max);
    match target {
        ShootTarget::CompactSupport => {
            if r.outcome != Outcome::Crash {
                return Err(ProfileError::NonConvergence(format!(
                    "trajectory ended as {:?}, not at an interface",
                    r.outcome
                )));
            }
            let (xe, ye) = (*r.xs.last().unwrap(), *r.ys.last().unwrap());
            let flux = ye[1];
            if flux.abs() > opts.flux_tolerance * umax {
                return Err(ProfileError::NonConvergence(format!(
                    "interface flux {flux:e} exceeds tolerance (max f^m = {umax:e})"
                )));
            }
            let xi0 = xe + interface_gap(&r.ode, xe, ye);
            let all = samples_of(&r, r.xs.len());
            let fmax = all.iter().map(|s| s.f).fold(0.0, f64::max);
            let mut keep = all.iter().rposition(|s| s.f >= 1e-3 * fmax).map_or(all.len(), |i| i + 1);
            keep = keep.max(2.min(all.len()));
            let samples = all[..keep].to_vec();
            let mut prof = Profile::assemble(r.ode, class, target, Some(r.local), param, samples, Some(xi0))?;
            prof.interface_flux = Some(flux);
            prof.iterations = iterations;
            prof.brackets = brackets;
            Ok(prof)
        }
        ShootTarget::Decay { .. } | ShootTarget::Bounded => {
            let cut = match &other {
                Some(o) => divergence_index(&r, o),
                None if r.outcome == Outcome::Reached => r.xs.len(),
                None => {
                    return Err(ProfileError::NonConvergence(format!(
                        "trajectory ended as {:?} before xi_max",
                        r.outcome
                    )))
                }
            };
            if cut < 3 {
                return Err(ProfileError::NonConvergence("no usable stretch of the separating trajectory".into()));
            }
            let samples = samples_of(&r, cut);
            let mut prof = Profile::assemble(r.ode, class, target, Some(r.local), param, samples, None)?;
            prof.iterations = iterations;
            prof.brackets = brackets;
            if let ShootTarget::Decay { rate } = target {
                let slope = prof.tail_exponent.ok_or_else(|| {
                    ProfileError::NonConvergence("separating trajectory too short to fit its tail".into())
                })?;
                if (slope + rate).abs() > opts.decay_tolerance * rate.abs().max(1e-12) {
                    return Err(ProfileError::NonConvergence(format!(
                        "tail exponent {slope:.6} does not match decay rate {rate:.6}"
                    )));
                }
            }
            Ok(prof)
        }
    }
}

/// Distance from the last point to the interface, extrapolating the
/// pressure-like variable `v = f^(m-1)` as `c (xi0 - xi)^n`.
fn interface_gap(ode: &ProfileOde, xi: f64, y: [f64; 2]) -> f64 {
    let m = ode.m;
    let f = y[0].powf(1.0 / m);
    let fp = y[1] * f / (m * y[0]);
    let Ok(fpp) = ode.second_derivative(xi, f, fp) else { return 0.0 };
    if m <= 1.0 || fp >= 0.0 {
        return 0.0;
    }
    let e = m - 1.0;
    let v = f.powf(e);
    let v1 = e * f.powf(e - 1.0) * fp;
    let v2 = e * ((e - 1.0) * f.powf(e - 2.0) * fp * fp + f.powf(e - 1.0) * fpp);
    let denom = 1.0 - v * v2 / (v1 * v1);
    let n = if denom > 0.05 && denom.is_finite() { 1.0 / denom } else { 1.0 };
    n * v / v1.abs()
}

/// First index where the two trajectories differ by more than 1e-6
/// relative in `f^m`.
fn divergence_index(a: &Run, b: &Run) -> usize {
    let bu: Vec<f64> = b.ys.iter().map(|y| y[0]).collect();
    let Some(pb) = Pchip::new(&b.xs, &bu) else { return 0 };
    let bend = *b.xs.last().unwrap();
    for (i, (&x, y)) in a.xs.iter().zip(&a.ys).enumerate() {
        if x > bend {
            return i;
        }
        let ub = pb.eval(x);
        if (y[0] - ub).abs() > 1e-6 * y[0].abs() {
            return i;
        }
    }
    a.xs.len()
}

/// Traveling wave `c f' = f'' - lambda f + f^p` connecting
/// `f* = lambda^(1/(p-1))` at `-inf` to 0 at `+inf`.
#[derive(Clone)]
pub struct TravelingWave {
    pub lambda: f64,
    pub p: f64,
    pub c: f64,
    pub f_star: f64,
    /// `f' <= 0` along the whole connection.
    pub monotone: bool,
    /// Samples on increasing `y`.
    pub samples: Vec<ProfileSample>,
    /// Decay rate at `+inf`: `f ~ f(y_hi) e^{mu (y - y_hi)}`.
    pub mu: f64,
    interp: QuinticHermite,
    approach: f64,
}

impl fmt::Debug for TravelingWave {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TravelingWave")
            .field("lambda", &self.lambda)
            .field("p", &self.p)
            .field("c", &self.c)
            .field("monotone", &self.monotone)
            .field("samples", &self.samples.len())
            .finish()
    }
}

impl TravelingWave {
    fn rhs(lambda: f64, p: f64, c: f64) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] {
        move |_y, s| [s[1], c * s[1] + lambda * s[0] - s[0].signum() * s[0].abs().powf(p)]
    }

    pub fn y_range(&self) -> (f64, f64) {
        self.interp.x_range()
    }

    /// `(f, f')` at `y`; linearized tails outside the sampled range.
    pub fn eval_with_derivative(&self, y: f64) -> (f64, f64) {
        let (lo, hi) = self.interp.x_range();
        if y > hi {
            let last = self.samples.last().unwrap();
            let f = last.f * (self.mu * (y - hi)).exp();
            return (f, self.mu * f);
        }
        if y < lo {
            let first = self.samples[0];
            let g = (first.f - self.f_star) * (self.approach * (y - lo)).exp();
            return (self.f_star + g, self.approach * g);
        }
        self.interp.eval(y)
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.eval_with_derivative(y).0
    }

    /// `f'' - c f' - lambda f + f^p` at a point.
    pub fn residual(&self, f: f64, fp: f64, fpp: f64) -> f64 {
        fpp - self.c * fp - self.lambda * f + f.powf(self.p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveOptions {
    /// Amplitude where integration starts on the decaying branch.
    pub start: f64,
    pub y_span: f64,
    pub rtol: f64,
    /// Convergence to `f*` relative tolerance.
    pub tol: f64,
}

impl Default for WaveOptions {
    fn default() -> Self {
        WaveOptions { start: 1e-8, y_span: 400.0, rtol: 1e-11, tol: 1e-10 }
    }
}

/// Solve for the traveling wave by integrating backward in `y` from the
/// decaying branch at 0 until the trajectory settles on `f*`.
pub fn traveling_wave_solve(lambda: f64, p: f64, c: f64, opts: &WaveOptions) -> Result<TravelingWave, ProfileError> {
    if !(lambda > 0.0 && p > 1.0 && c > 0.0) {
        return Err(ProfileError::KindMismatch("traveling waves need lambda > 0, p > 1, c > 0".into()));
    }
    let f_star = lambda.powf(1.0 / (p - 1.0));
    let mu = 0.5 * (c - (c * c + 4.0 * lambda).sqrt());
    let d0 = opts.start * f_star;
    let tol = opts.tol * f_star;
    let events = [
        Box::new(move |_y: f64, s: &[f64; 2]| (s[0] - f_star).abs() + s[1].abs() - tol)
            as Box<dyn Fn(f64, &[f64; 2]) -> f64>,
        Box::new(|_y: f64, s: &[f64; 2]| s[0]),
        Box::new(move |_y: f64, s: &[f64; 2]| 1e3 * f_star - s[0]),
    ];
    let ode_opts =
        ode::Options { rtol: opts.rtol, atol: 1e-3 * opts.rtol * d0, max_steps: 5_000_000, ..ode::Options::default() };
    let traj = ode::integrate(TravelingWave::rhs(lambda, p, c), 0.0, [d0, mu * d0], -opts.y_span, &ode_opts, &events)?;
    match traj.stop {
        Stop::Event(0) => {}
        Stop::Event(_) => {
            return Err(ProfileError::NoConnection(format!("trajectory escapes for c = {c}")));
        }
        Stop::End => {
            return Err(ProfileError::NoConnection(format!(
                "trajectory has not settled on f* after |y| = {}",
                opts.y_span
            )))
        }
    }
    let n = traj.xs.len();
    let mut samples = Vec::with_capacity(n);
    let mut d2 = Vec::with_capacity(n);
    for i in (0..n).rev() {
        let s = traj.ys[i];
        samples.push(ProfileSample { xi: traj.xs[i], f: s[0], fprime: s[1] });
        d2.push(traj.dys[i][1]);
    }
    let monotone = samples.iter().all(|s| s.fprime <= 0.0) && samples.iter().all(|s| s.f <= f_star * (1.0 + 1e-9));
    let interp = QuinticHermite::new(
        samples.iter().map(|s| s.xi).collect(),
        samples.iter().map(|s| s.f).collect(),
        samples.iter().map(|s| s.fprime).collect(),
        d2,
    )
    .ok_or_else(|| ProfileError::NoConnection("too few samples".into()))?;
    let disc = c * c - 4.0 * (p - 1.0) * lambda;
    let approach = if disc >= 0.0 { 0.5 * (c - disc.sqrt()) } else { 0.5 * c };
    Ok(TravelingWave { lambda, p, c, f_star, monotone, samples, mu, interp, approach })
}

/// Smallest speed in `[c_lo, c_hi]` with a monotone connection, by
/// bisection (`None` when the end points do not straddle the switch).
pub fn monotone_threshold(lambda: f64, p: f64, c_lo: f64, c_hi: f64, opts: &WaveOptions) -> Option<f64> {
    let mono = |c: f64| traveling_wave_solve(lambda, p, c, opts).map(|w| w.monotone).unwrap_or(false);
    let (mut a, mut b) = (c_lo, c_hi);
    if mono(a) || !mono(b) {
        return None;
    }
    for _ in 0..40 {
        let mid = 0.5 * (a + b);
        if mono(mid) {
            b = mid;
        } else {
            a = mid;
        }
    }
    Some(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eqmodel::self_similar_exponents;

    fn desc(m: f64, p: f64, n: f64, s1: f64, s2: f64) -> EquationDescriptor {
        EquationDescriptor::radial(m, p, n, s1, s2).unwrap()
    }

    #[test]
    fn expansion_examples() {
        let d = desc(2.0, 1.0, 3.0, 0.0, -1.0);
        let fw = self_similar_exponents(&d, FormKind::Forward).unwrap();
        let (f, _) = initial_expansion(&d, &fw, BehaviorClass::Q1, 0.7, 1e-3).unwrap();
        assert!((f - (0.7 - 0.25e-3)).abs() < 1e-15);

        let d = desc(3.0, 2.0, 2.0, 0.0, -1.0);
        let ex = self_similar_exponents(&d, FormKind::Exponential).unwrap();
        let (f, _) = initial_expansion(&d, &ex, BehaviorClass::ExpQ1, 1.5, 1e-3).unwrap();
        assert!((f - (1.5 - 1e-3 / 3.0)).abs() < 1e-15);

        let d = desc(2.0, 1.0, 3.0, 0.0, -2.0);
        let st = SelfSimilarForm::new(FormKind::Forward, 0.0, 0.5, None).unwrap();
        let (f, _) = initial_expansion(&d, &st, BehaviorClass::LogSingular, 0.3, 1e-3).unwrap();
        assert!((f - (-0.5 * 1e-3f64.ln() + 0.3)).abs() < 1e-12);
    }

    #[test]
    fn expansion_derivative_matches_difference() {
        let d = desc(2.0, 1.5, 3.0, 0.5, 1.0);
        let bw = self_similar_exponents(&d, FormKind::Backward).unwrap();
        for class in [BehaviorClass::PosOrigin, BehaviorClass::CPower1, BehaviorClass::Decay] {
            let ode = ProfileOde::new(&d, &bw).unwrap();
            let l = local(&ode, class, 0.8).unwrap();
            let x = 0.05;
            let h = 1e-6;
            let fd = (l.eval(x + h).0 - l.eval(x - h).0) / (2.0 * h);
            assert!((fd - l.eval(x).1).abs() < 1e-7 * (1.0 + fd.abs()), "{class}");
        }
    }

    #[test]
    fn inadmissible_classes() {
        let d = desc(2.0, 3.0, 3.0, 0.0, 0.0);
        let bw = self_similar_exponents(&d, FormKind::Backward).unwrap();
        assert!(matches!(initial_expansion(&d, &bw, BehaviorClass::Q1, 1.0, 1e-4), Err(ProfileError::KindMismatch(_))));
        assert!(matches!(
            initial_expansion(&d, &bw, BehaviorClass::LogSingular, 1.0, 1e-4),
            Err(ProfileError::KindMismatch(_))
        ));
    }

    #[test]
    fn constant_solves_only_when_balanced() {
        // xi^s2 c^p = xi^s1 alpha c needs s1 = s2 and alpha = c^(p-1)
        let d = desc(1.0, 3.0, 3.0, 0.0, 0.0);
        let form = SelfSimilarForm::new(FormKind::Backward, 0.5, -0.5, Some(1.0)).unwrap();
        let ode = ProfileOde::new(&d, &form).unwrap();
        let c = 0.5f64.sqrt();
        assert!(ode.residual(0.7, c, 0.0, 0.0).abs() < 1e-15);
        assert!(ode.residual(0.7, 1.1 * c, 0.0, 0.0).abs() > 1e-3);
    }

    #[test]
    fn wave_equilibrium() {
        let w = traveling_wave_solve(2.0, 3.0, 5.0, &WaveOptions::default()).unwrap();
        assert!((w.f_star - 2f64.sqrt()).abs() < 1e-15);
        assert!(w.monotone);
        let (lo, _) = w.y_range();
        assert!((w.eval(lo - 10.0) - w.f_star).abs() < 1e-8);
    }
}
