//! Closed-form solutions, each carrying the constraints under which it is
//! valid, plus constructors that assemble solutions from profiles.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::eqmodel::{self, EquationDescriptor, FormKind, SelfSimilarForm, COEFF_REACTION};
use crate::exponents;
use crate::field::Field;
use crate::profiles::{BehaviorClass, Profile, ProfileSample, TravelingWave};
use crate::wire::fmt_g;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolutionError {
    #[error("OutOfRange: {0}")]
    OutOfRange(String),
    #[error("KindMismatch: {0}")]
    KindMismatch(String),
    #[error("ExtrapolationError: xi = {xi} lies beyond the sampled profile (max {xi_max})")]
    Extrapolation { xi: f64, xi_max: f64 },
    #[error("InvalidParameter: {0}")]
    InvalidParameter(String),
}

impl From<eqmodel::EqModelError> for SolutionError {
    fn from(e: eqmodel::EqModelError) -> Self {
        SolutionError::InvalidParameter(e.to_string())
    }
}

/// Compact support in the similarity variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Support {
    pub xi0: f64,
    /// `evaluate` returns 0 beyond `xi0`.
    pub interface: bool,
}

type Eval = Arc<dyn Fn(f64, f64) -> Result<f64, SolutionError> + Send + Sync>;

/// An exact (or profile-backed) solution `u(r, t)`.
#[derive(Clone)]
pub struct ClosedFormSolution {
    pub name: String,
    pub descriptor: EquationDescriptor,
    /// `None` when the solution is not of self-similar type.
    pub form: Option<SelfSimilarForm>,
    pub support: Option<Support>,
    pub singular_at_origin: bool,
    pub constants: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    eval: Eval,
}

impl fmt::Debug for ClosedFormSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosedFormSolution")
            .field("name", &self.name)
            .field("form", &self.form)
            .field("support", &self.support)
            .field("singular_at_origin", &self.singular_at_origin)
            .field("constants", &self.constants)
            .finish()
    }
}

/// JSON header of a solution.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionMeta {
    pub name: String,
    pub descriptor: EquationDescriptor,
    pub form: Option<SelfSimilarForm>,
    pub support: Option<Support>,
    pub singular_at_origin: bool,
    pub constants: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl ClosedFormSolution {
    /// Wrap an arbitrary evaluator.
    pub fn from_fn<F>(name: &str, descriptor: EquationDescriptor, form: Option<SelfSimilarForm>, f: F) -> Self
    where
        F: Fn(f64, f64) -> Result<f64, SolutionError> + Send + Sync + 'static,
    {
        ClosedFormSolution {
            name: name.to_string(),
            descriptor,
            form,
            support: None,
            singular_at_origin: false,
            constants: BTreeMap::new(),
            notes: Vec::new(),
            eval: Arc::new(f),
        }
    }

    pub fn try_evaluate(&self, r: f64, t: f64) -> Result<f64, SolutionError> {
        (self.eval)(r, t)
    }

    /// `u(r, t)`, NaN where the solution is undefined.
    pub fn evaluate(&self, r: f64, t: f64) -> f64 {
        self.try_evaluate(r, t).unwrap_or(f64::NAN)
    }

    /// Radius of the interface at time `t`.
    pub fn interface_radius(&self, t: f64) -> Option<f64> {
        let sup = self.support.filter(|s| s.interface)?;
        let (_, scale) = self.form?.similarity(1.0, t)?;
        Some(sup.xi0 / scale)
    }

    pub fn meta(&self) -> SolutionMeta {
        SolutionMeta {
            name: self.name.clone(),
            descriptor: self.descriptor.clone(),
            form: self.form,
            support: self.support,
            singular_at_origin: self.singular_at_origin,
            constants: self.constants.clone(),
            notes: self.notes.clone(),
        }
    }
}

impl Field for ClosedFormSolution {
    fn eval(&self, x: f64, t: f64) -> f64 {
        self.evaluate(x, t)
    }
}

fn radius_ok(r: f64) -> Result<(), SolutionError> {
    if r >= 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(SolutionError::OutOfRange(format!("radius {} is not a finite nonnegative number", fmt_g(r))))
    }
}

/// Singular stationary solution `K r^(-(s2+2)/(p-m))` with
/// `K^(p-m) = m g (N - 2 - m g) / kappa`, `g = (s2+2)/(p-m)`.
///
/// The solution does not involve `sigma1`; the usual setting is
/// `sigma1 = sigma2` and a note is recorded otherwise.
pub fn stationary_singular(desc: &EquationDescriptor) -> Result<ClosedFormSolution, SolutionError> {
    if !desc.is_radial() {
        return Err(SolutionError::KindMismatch("needs a radial descriptor".into()));
    }
    let (m, p, n, s2) = (desc.m, desc.p, desc.n, desc.sigma2);
    let kappa = desc.reaction();
    if !(n > 2.0) {
        return Err(SolutionError::OutOfRange(format!("needs N > 2 (got N = {})", fmt_g(n))));
    }
    let pc = exponents::p_c(m, n, s2);
    if !(p > pc) {
        return Err(SolutionError::OutOfRange(format!("needs p > p_c = {} (got p = {})", fmt_g(pc), fmt_g(p))));
    }
    if !(kappa > 0.0) {
        return Err(SolutionError::OutOfRange("needs a positive reaction coefficient".into()));
    }
    let g = (s2 + 2.0) / (p - m);
    let radicand = m * g * (n - 2.0 - m * g) / kappa;
    if !(radicand > 0.0) {
        return Err(SolutionError::OutOfRange(format!("K^(p-m) = {} is not positive", fmt_g(radicand))));
    }
    let k = radicand.powf(1.0 / (p - m));
    let mut sol = ClosedFormSolution::from_fn(
        "stationary",
        desc.clone(),
        Some(SelfSimilarForm::new(FormKind::Stationary, 0.0, 0.0, None)?),
        move |r, _t| {
            radius_ok(r)?;
            Ok(k * r.powf(-g))
        },
    );
    sol.singular_at_origin = true;
    sol.constants.insert("K".into(), k);
    sol.constants.insert("power".into(), -g);
    sol.notes.push(format!("u ~ K r^{} as r -> 0", fmt_g(-g)));
    if desc.sigma1 != desc.sigma2 {
        sol.notes.push("sigma1 differs from sigma2; the stationary balance does not involve sigma1".into());
    }
    Ok(sol)
}

/// Constants of the explicit `p = 1` profile family.
#[derive(Debug, Clone, Copy, PartialEq)]
struct ExplicitConstants {
    sigma_bar: f64,
    a: f64,
    b: f64,
}

impl ExplicitConstants {
    fn new(m: f64) -> Self {
        let sb = (2.0 * (m + 1.0)).sqrt();
        ExplicitConstants {
            sigma_bar: sb,
            a: (m - 1.0) / (2.0 * m * (m + 1.0)),
            b: (m - 1.0).powi(2) / (m * (sb + 2.0) * (m * sb + m + 1.0)),
        }
    }

    fn xi0(&self) -> f64 {
        (self.a / self.b).powf(1.0 / self.sigma_bar)
    }
}

fn check_m(m: f64) -> Result<(), SolutionError> {
    if m > 1.0 && m.is_finite() {
        Ok(())
    } else {
        Err(SolutionError::InvalidParameter(format!("needs m > 1 (got m = {})", fmt_g(m))))
    }
}

/// Backward profile of `u_t = (u^m)_xx + |x|^sb u` in one dimension,
/// `sb = sqrt(2(m+1))`:
/// `f(xi) = xi^(2/(m-1)) [A - B xi^sb]_+^(1/(m-1))`.
pub fn explicit_profile_1d(m: f64) -> Result<Profile, SolutionError> {
    check_m(m)?;
    let c = ExplicitConstants::new(m);
    let desc = EquationDescriptor::radial(m, 1.0, 1.0, 0.0, c.sigma_bar)?;
    let form = eqmodel::self_similar_exponents(&desc, FormKind::Backward)?;
    let q = 1.0 / (m - 1.0);
    let xi0 = c.xi0();
    let f = move |xi: f64| {
        let g = c.a - c.b * xi.powf(c.sigma_bar);
        if xi <= 0.0 || g <= 0.0 {
            0.0
        } else {
            xi.powf(2.0 * q) * g.powf(q)
        }
    };
    let fp = |xi: f64| {
        let xs = xi.powf(c.sigma_bar);
        let g = c.a - c.b * xs;
        q * xi.powf(2.0 * q - 1.0) * g.powf(q - 1.0) * (2.0 * g - c.sigma_bar * c.b * xs)
    };
    let n = 400;
    let samples: Vec<ProfileSample> = (0..n)
        .map(|i| {
            let s = (i as f64 + 0.5) / n as f64;
            let xi = xi0 * (1e-3 + (1.0 - 2e-3) * s);
            ProfileSample { xi, f: f(xi), fprime: fp(xi) }
        })
        .collect();
    let prof = Profile::from_samples(&desc, &form, BehaviorClass::CPower1, samples, Some(xi0))
        .map_err(|e| SolutionError::InvalidParameter(e.to_string()))?;
    Ok(prof.with_exact(f))
}

/// Explicit backward self-similar solution with linear reaction (`p = 1`),
/// `N = 2 + m(s1+2)/(m+1)` and `s2 = s1 + m sb (s1+2)/(m+1)`:
///
/// `u = (T-t)^(-1/(m-1)) th^(-2/(m-1)) r^((s1+2)/(m-1)) [A - B (T-t) r^(s2-s1)]_+^(1/(m-1))`
///
/// with `th = m(s1+2)/(m+1)` and the constants of [`explicit_profile_1d`].
pub fn explicit_backward_p1(m: f64, sigma1: f64, t_blow: Option<f64>) -> Result<ClosedFormSolution, SolutionError> {
    check_m(m)?;
    if !(sigma1 > -2.0 && sigma1.is_finite()) {
        return Err(SolutionError::InvalidParameter(format!("needs sigma1 > -2 (got {})", fmt_g(sigma1))));
    }
    let t_blow = t_blow.unwrap_or(1.0);
    let c = ExplicitConstants::new(m);
    let n = 2.0 + m * (sigma1 + 2.0) / (m + 1.0);
    let sigma2 = sigma1 + m * c.sigma_bar * (sigma1 + 2.0) / (m + 1.0);
    let desc = EquationDescriptor::radial(m, 1.0, n, sigma1, sigma2)?;
    let form = eqmodel::self_similar_exponents(&desc, FormKind::Backward)?.with_time(t_blow)?;
    let q = 1.0 / (m - 1.0);
    let th = m * (sigma1 + 2.0) / (m + 1.0);
    let amp = th.powf(-2.0 * q);
    let d = sigma2 - sigma1;
    let mut sol = ClosedFormSolution::from_fn("explicit-p1", desc, Some(form), move |r, t| {
        radius_ok(r)?;
        let s = t_blow - t;
        if !(s > 0.0) {
            return Err(SolutionError::OutOfRange(format!(
                "t = {} is not before the blow-up time {}",
                fmt_g(t),
                fmt_g(t_blow)
            )));
        }
        let g = c.a - c.b * s * r.powf(d);
        if g <= 0.0 || r == 0.0 {
            return Ok(0.0);
        }
        Ok(s.powf(-q) * amp * r.powf((sigma1 + 2.0) * q) * g.powf(q))
    });
    // In xi = r (T-t)^(1/(s2-s1)) the bracket vanishes at (A/B)^(1/(s2-s1)).
    sol.support = Some(Support { xi0: (c.a / c.b).powf(1.0 / d), interface: true });
    for (k, v) in [("A", c.a), ("B", c.b), ("sigma_bar", c.sigma_bar), ("theta", th), ("amplitude", amp), ("T", t_blow)]
    {
        sol.constants.insert(k.into(), v);
    }
    sol.notes.push(format!("interface where A = B (T-t) r^{}", fmt_g(d)));
    sol.notes.push(format!(
        "u(r, t) ~ r^{} as r -> 0; the amplitude factor (T-t)^(-1/(m-1)) differs from the self-similar alpha = {}",
        fmt_g((sigma1 + 2.0) * q),
        fmt_g(form.alpha)
    ));
    Ok(sol)
}

/// `u(r, t)` built from a profile through the ansatz of `form`.
pub fn ansatz_solution(form: &SelfSimilarForm, profile: &Profile) -> Result<ClosedFormSolution, SolutionError> {
    let desc = profile.descriptor.clone();
    form.check_against(&desc)?;
    let pf = profile.form;
    let tol = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
    if form.kind != pf.kind || !tol(form.alpha, pf.alpha) || !tol(form.beta, pf.beta) {
        return Err(SolutionError::KindMismatch(format!(
            "form ({:?}, alpha = {}, beta = {}) does not match the profile's ({:?}, alpha = {}, beta = {})",
            form.kind,
            fmt_g(form.alpha),
            fmt_g(form.beta),
            pf.kind,
            fmt_g(pf.alpha),
            fmt_g(pf.beta)
        )));
    }
    let prof = profile.clone();
    let fm = *form;
    let xi_max = profile.xi_max();
    let mut sol = ClosedFormSolution::from_fn("ansatz", desc, Some(fm), move |r, t| {
        radius_ok(r)?;
        let (factor, xi) = fm
            .similarity(r, t)
            .ok_or_else(|| SolutionError::OutOfRange(format!("t = {} is outside the form's time range", fmt_g(t))))?;
        let f = prof.eval(xi).ok_or(SolutionError::Extrapolation { xi, xi_max })?;
        Ok(factor * f)
    });
    if let Some(xi0) = profile.xi0 {
        sol.support = Some(Support { xi0, interface: true });
    }
    sol.singular_at_origin = matches!(profile.behavior_class, BehaviorClass::LogSingular | BehaviorClass::StatTail);
    sol.constants.insert("shoot_param".into(), profile.shoot_param);
    sol.notes.push(format!("profile class {}", profile.behavior_class));
    Ok(sol)
}

/// `u_l(r, t) = l u(l^(-(m-1)/(s1+2)) r, t)`, a solution again when `L = 0`.
pub fn rescale(solution: &ClosedFormSolution, lambda: f64) -> Result<ClosedFormSolution, SolutionError> {
    let desc = &solution.descriptor;
    if !desc.is_radial() || !desc.is_critical() {
        return Err(SolutionError::KindMismatch(format!("rescaling needs L = 0, got L = {}", fmt_g(desc.l_value()))));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(SolutionError::InvalidParameter(format!("needs lambda > 0 (got {})", fmt_g(lambda))));
    }
    if desc.sigma1 == -2.0 {
        return Err(SolutionError::InvalidParameter("rescaling is undefined for sigma1 = -2".into()));
    }
    let k = (desc.m - 1.0) / (desc.sigma1 + 2.0);
    let shrink = lambda.powf(-k);
    let inner = solution.eval.clone();
    let mut out = solution.clone();
    out.eval = Arc::new(move |r, t| Ok(lambda * inner(shrink * r, t)?));
    if let Some(s) = &mut out.support {
        s.xi0 /= shrink;
    }
    *out.constants.entry("lambda".into()).or_insert(1.0) *= lambda;
    Ok(out)
}

/// Constants of the reduction of `r^-2 u_t = Lap u + r^s2 u^p` to the
/// traveling-wave equation `c f' = f'' - lambda f + f^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaveReduction {
    /// Amplitude power: `u = r^-delta w(ln r, t)`.
    pub delta: f64,
    /// Convection speed of the line equation, `N - 2 - 2 delta`.
    pub k: f64,
    pub lambda: f64,
}

impl WaveReduction {
    pub fn new(desc: &EquationDescriptor) -> Result<Self, SolutionError> {
        let (m, p, n, s1, s2) = (desc.m, desc.p, desc.n, desc.sigma1, desc.sigma2);
        if !desc.is_radial() || m != 1.0 || s1 != -2.0 || !(p > 1.0) || s2 < -2.0 {
            return Err(SolutionError::KindMismatch(format!(
                "needs m = 1, sigma1 = -2, p > 1 and sigma2 >= -2 (got m = {}, p = {}, sigma1 = {}, sigma2 = {})",
                fmt_g(m),
                fmt_g(p),
                fmt_g(s1),
                fmt_g(s2)
            )));
        }
        let delta = (s2 + 2.0) / (p - 1.0);
        if !(n > 2.0 + delta) {
            return Err(SolutionError::KindMismatch(format!("needs N > 2 + (s2+2)/(p-1) = {}", fmt_g(2.0 + delta))));
        }
        Ok(WaveReduction { delta, k: n - 2.0 - 2.0 * delta, lambda: delta * (n - 2.0 - delta) })
    }
}

/// `u = kappa^(-1/(p-1)) r^-delta f(ln r + (K + c) t)` from a traveling wave
/// of speed `c`.
pub fn traveling_wave_composed(
    desc: &EquationDescriptor,
    wave: &TravelingWave,
    c: f64,
) -> Result<ClosedFormSolution, SolutionError> {
    let red = WaveReduction::new(desc)?;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
    if !(c > 0.0) || !close(wave.c, c) || !close(wave.p, desc.p) || !close(wave.lambda, red.lambda) {
        return Err(SolutionError::KindMismatch(format!(
            "wave (c = {}, p = {}, lambda = {}) does not solve the reduced equation (c = {}, p = {}, lambda = {})",
            fmt_g(wave.c),
            fmt_g(wave.p),
            fmt_g(wave.lambda),
            fmt_g(c),
            fmt_g(desc.p),
            fmt_g(red.lambda)
        )));
    }
    let kappa = desc.reaction();
    if !(kappa > 0.0) {
        return Err(SolutionError::KindMismatch("needs a positive reaction coefficient".into()));
    }
    let amp = kappa.powf(-1.0 / (desc.p - 1.0));
    let speed = red.k + c;
    let form =
        if red.delta == 0.0 { Some(SelfSimilarForm::new(FormKind::Exponential, 0.0, -speed, None)?) } else { None };
    let w = wave.clone();
    let delta = red.delta;
    let mut sol = ClosedFormSolution::from_fn("tw-composed", desc.clone(), form, move |r, t| {
        radius_ok(r)?;
        if r == 0.0 {
            return Err(SolutionError::OutOfRange("the composed solution is not defined at r = 0".into()));
        }
        Ok(amp * r.powf(-delta) * w.eval(r.ln() + speed * t))
    });
    sol.singular_at_origin = red.delta > 0.0;
    for (k, v) in [("delta", red.delta), ("K", red.k), ("lambda", red.lambda), ("c", c), ("amplitude", amp)] {
        sol.constants.insert(k.into(), v);
    }
    if red.delta > 0.0 {
        sol.notes.push(format!("u ~ {} r^{} as r -> 0", fmt_g(amp * wave.f_star), fmt_g(-red.delta)));
    } else {
        sol.notes.push("exponential self-similar form".into());
    }
    if desc.coeffs.get(COEFF_REACTION).is_some_and(|&k| k != 1.0) {
        sol.notes.push("amplitude rescaled by the reaction coefficient".into());
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationary_constants() {
        let d = EquationDescriptor::radial(1.0, 3.0, 4.0, 0.0, 0.0).unwrap();
        let s = stationary_singular(&d).unwrap();
        assert!((s.constants["K"] - 1.0).abs() < 1e-15);
        assert!((s.evaluate(2.0, 0.3) - 0.5).abs() < 1e-15);
        let d = EquationDescriptor::radial(2.0, 6.0, 5.0, 1.0, 1.0).unwrap();
        let s = stationary_singular(&d).unwrap();
        assert!((s.constants["K"] - 2.25f64.powf(0.25)).abs() < 1e-14);
        let d = EquationDescriptor::radial(2.0, 3.0, 5.0, 1.0, 1.0).unwrap();
        assert!(matches!(stationary_singular(&d), Err(SolutionError::OutOfRange(_))));
    }

    #[test]
    fn explicit_constants_for_m2() {
        let c = ExplicitConstants::new(2.0);
        let s6 = 6f64.sqrt();
        assert!((c.b - 1.0 / (2.0 * (s6 + 2.0) * (2.0 * s6 + 3.0))).abs() < 1e-16);
        assert!((c.b - 0.014225).abs() < 5e-6);
        let p = explicit_profile_1d(2.0).unwrap();
        assert_eq!(p.eval(0.0), Some(0.0));
        assert!((p.xi0.unwrap() - 2.058).abs() < 1e-3);
    }

    #[test]
    fn explicit_backward_descriptor() {
        let s = explicit_backward_p1(2.0, 0.0, None).unwrap();
        assert!((s.descriptor.n - 10.0 / 3.0).abs() < 1e-14);
        assert!((s.descriptor.sigma2 - 4.0 * 6f64.sqrt() / 3.0).abs() < 1e-14);
        let t = 0.4;
        let r0 = s.interface_radius(t).unwrap();
        assert!(s.evaluate(r0 * (1.0 + 1e-9), t) == 0.0);
        assert!(s.evaluate(r0 * (1.0 - 1e-3), t) > 0.0);
        assert!(s.try_evaluate(1.0, 1.0).is_err());
    }

    #[test]
    fn wave_reduction_constants() {
        let d = EquationDescriptor::radial(1.0, 3.0, 5.0, -2.0, 0.0).unwrap();
        let w = WaveReduction::new(&d).unwrap();
        assert_eq!((w.delta, w.k, w.lambda), (1.0, 1.0, 2.0));
        let d = EquationDescriptor::radial(1.0, 3.0, 5.0, -2.0, -2.0).unwrap();
        assert_eq!(WaveReduction::new(&d).unwrap().delta, 0.0);
        let d = EquationDescriptor::radial(2.0, 3.0, 5.0, -2.0, 0.0).unwrap();
        assert!(WaveReduction::new(&d).is_err());
    }
}
