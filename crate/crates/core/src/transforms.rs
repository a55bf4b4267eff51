//! Changes of variables between equation families.
//!
//! All maps have the shape `u(r,t) = r^delta w(z, tau)`, `tau = C t`, with
//! either a power coordinate `z = a r^theta` or a log coordinate
//! `z = ln r + K t`. Substituting into the radial equation gives
//!
//! ```text
//! C w_tau = th^2 z^{[(m-1)d + 2th - s1 - 2]/th} (w^m)_zz
//!         + th (2md + th + N - 2) z^{[(m-1)d + th - s1 - 2]/th} (w^m)_z
//!         + md (md + N - 2) z^{[(m-1)d - s1 - 2]/th} w^m
//!         + z^{[s2 - s1 + d(p-1)]/th} w^p
//! ```
//!
//! Power maps enforce `(m-1)d + 2th - s1 - 2 = 0` and a vanishing zeroth
//! order term, which lands on a single-weight equation in dimension
//! `(2md + 2th + N - 2)/th` with weight `(s2 - s1 + d(p-1))/th`. The scale
//! `a` and time factor `C` then remove the constants. Log maps take
//! `th = C = 1` and `y = ln r`, giving a line equation.

use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

use crate::eqmodel::{
    self, EquationDescriptor, Family, FormKind, SelfSimilarForm, COEFF_CONVECTION, COEFF_LAMBDA, COEFF_REACTION,
    COEFF_REACTION_EXP, COEFF_ZEROTH,
};
use crate::field::Field;
use crate::interp::Pchip;
use crate::wire;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("OutOfRange: {0}")]
    OutOfRange(String),
    #[error("KindMismatch: {0}")]
    KindMismatch(String),
    #[error("DomainError: {0}")]
    DomainError(String),
    #[error("InterpolationError: {0}")]
    Interpolation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Main,
    Second,
    Euler,
    Fisher,
}

impl std::str::FromStr for TransformKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "main" => Ok(TransformKind::Main),
            "second" => Ok(TransformKind::Second),
            "euler" => Ok(TransformKind::Euler),
            "fisher" => Ok(TransformKind::Fisher),
            other => Err(format!("unknown transform kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordinateMap {
    pub kind: TransformKind,
    #[serde(serialize_with = "wire::ser_real")]
    pub delta: f64,
    #[serde(serialize_with = "wire::ser_real")]
    pub theta: f64,
    #[serde(serialize_with = "wire::ser_real")]
    pub a: f64,
    #[serde(rename = "C", serialize_with = "wire::ser_real")]
    pub c: f64,
    #[serde(rename = "shift_K", skip_serializing_if = "Option::is_none")]
    pub shift_k: Option<f64>,
    pub log_radial: bool,
    pub source: EquationDescriptor,
    pub target: EquationDescriptor,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Set for maps that change the character of initial data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

fn scales(theta: f64, sigma: f64) -> (f64, f64, Option<String>) {
    if (sigma + 2.0).abs() < 1e-14 {
        (
            1.0,
            theta * theta,
            Some("target weight -2: scale fixed to a = 1, C = theta^2, reaction coefficient 1/theta^2".into()),
        )
    } else {
        (theta.powf(-2.0 / (sigma + 2.0)), theta.powf(2.0 * sigma / (sigma + 2.0)), None)
    }
}

fn power_map(
    desc: &EquationDescriptor,
    kind: TransformKind,
    delta: f64,
    theta: f64,
) -> Result<CoordinateMap, TransformError> {
    if !(theta > 0.0) {
        return Err(TransformError::OutOfRange(format!(
            "radial power theta = {} must be positive",
            wire::fmt_g(theta)
        )));
    }
    let (m, p, n, s1, s2) = (desc.m, desc.p, desc.n, desc.sigma1, desc.sigma2);
    let n_bar = (2.0 * m * delta + 2.0 * theta + n - 2.0) / theta;
    let sigma = (s2 - s1 + delta * (p - 1.0)) / theta;
    let (a, c, note) = scales(theta, sigma);
    let mut notes: Vec<String> = note.into_iter().collect();
    let mut target = eqmodel::validate(eqmodel::RawParameters::new(m, p, n_bar, 0.0, sigma))
        .map_err(|e| TransformError::OutOfRange(format!("transformed equation is not admissible: {e}")))?;
    let mut reaction = desc.reaction();
    if (sigma + 2.0).abs() < 1e-14 {
        reaction /= theta * theta;
    }
    if reaction != 1.0 {
        target.coeffs.insert(COEFF_REACTION.into(), reaction);
    }
    notes.extend(desc.warnings.iter().map(|w| format!("source: {w}")));
    Ok(CoordinateMap {
        kind,
        delta,
        theta,
        a,
        c,
        shift_k: None,
        log_radial: false,
        source: desc.clone(),
        target,
        notes,
        warning: None,
    })
}

fn require_radial(desc: &EquationDescriptor) -> Result<(), TransformError> {
    if desc.is_radial() {
        Ok(())
    } else {
        Err(TransformError::KindMismatch(format!("{:?} is not a radial family", desc.family)))
    }
}

/// Map onto a single-weight equation (`delta = 0`, `theta = (s1+2)/2`).
pub fn main_transform(desc: &EquationDescriptor) -> Result<CoordinateMap, TransformError> {
    require_radial(desc)?;
    if desc.sigma1 <= -2.0 {
        return Err(TransformError::OutOfRange("main transform needs sigma1 > -2".into()));
    }
    let mut map = power_map(desc, TransformKind::Main, 0.0, (desc.sigma1 + 2.0) / 2.0)?;
    if desc.n < 2.0 && desc.sigma1 < 0.0 {
        map.notes.push("main transform requires sigma1>=0 in N=1".into());
    }
    Ok(map)
}

/// Map with amplitude `r^{-(N-2)/m}` onto another single-weight equation.
pub fn second_transform(desc: &EquationDescriptor) -> Result<CoordinateMap, TransformError> {
    require_radial(desc)?;
    let (m, n, s1) = (desc.m, desc.n, desc.sigma1);
    let denom = m * (s1 + n) - n + 2.0;
    if denom <= 0.0 {
        return Err(TransformError::OutOfRange(format!(
            "second transform needs m(sigma1+N)-N+2 > 0 (got {})",
            wire::fmt_g(denom)
        )));
    }
    let mut map = power_map(desc, TransformKind::Second, -(n - 2.0) / m, denom / (2.0 * m))?;
    map.warning = Some(
        "amplitude factor r^{-(N-2)/m} changes the character of initial data (possible singularity at r=0)".into(),
    );
    Ok(map)
}

/// Log-radial map onto a line equation of Euler type.
///
/// Applies when `L = 0` (amplitude power `(s1+2)/(m-1)`) or when
/// `sigma1 = -2` (no amplitude factor). With `sigma1 = sigma2 = -2` the
/// target is the pure convection form.
pub fn euler_transform(desc: &EquationDescriptor) -> Result<CoordinateMap, TransformError> {
    require_radial(desc)?;
    let (m, p, n, s1, s2) = (desc.m, desc.p, desc.n, desc.sigma1, desc.sigma2);
    if m <= 1.0 {
        return Err(TransformError::KindMismatch("Euler transform needs m > 1".into()));
    }
    let crit_s1 = s1 == -2.0;
    if !(desc.is_critical() || crit_s1) {
        return Err(TransformError::KindMismatch(format!(
            "Euler transform needs L = 0 or sigma1 = -2 (L = {})",
            wire::fmt_g(desc.l_value())
        )));
    }
    let delta = if crit_s1 { 0.0 } else { (s1 + 2.0) / (m - 1.0) };
    let convection = 2.0 * m * delta + n - 2.0;
    let zeroth = m * delta * (m * delta + n - 2.0);
    let mut reaction_exp = s2 - s1 + delta * (p - 1.0);
    if desc.is_critical() && !crit_s1 {
        reaction_exp = 0.0;
    }
    let family = if crit_s1 && s2 == -2.0 { Family::ConvectionForm } else { Family::EulerForm };
    let mut coeffs = BTreeMap::new();
    coeffs.insert(COEFF_CONVECTION.to_string(), convection);
    coeffs.insert(COEFF_ZEROTH.to_string(), zeroth);
    coeffs.insert(COEFF_REACTION_EXP.to_string(), reaction_exp);
    if desc.reaction() != 1.0 {
        coeffs.insert(COEFF_REACTION.to_string(), desc.reaction());
    }
    Ok(CoordinateMap {
        kind: TransformKind::Euler,
        delta,
        theta: 1.0,
        a: 1.0,
        c: 1.0,
        shift_k: None,
        log_radial: true,
        source: desc.clone(),
        target: EquationDescriptor::log_radial(family, m, p, coeffs),
        notes: Vec::new(),
        warning: None,
    })
}

/// Semilinear `sigma1 = -2` map onto `psi_t = psi_yy - lambda psi + psi^p`.
pub fn fisher_transform(desc: &EquationDescriptor) -> Result<CoordinateMap, TransformError> {
    require_radial(desc)?;
    let (m, p, n, s1, s2) = (desc.m, desc.p, desc.n, desc.sigma1, desc.sigma2);
    if m != 1.0 || s1 != -2.0 || p <= 1.0 {
        return Err(TransformError::KindMismatch("Fisher transform needs m = 1, sigma1 = -2, p > 1".into()));
    }
    let amp = (s2 + 2.0) / (p - 1.0);
    let shift = n - 2.0 - 2.0 * amp;
    let lambda = amp * (n - 2.0 - amp);
    let mut coeffs = BTreeMap::new();
    coeffs.insert(COEFF_LAMBDA.to_string(), lambda);
    coeffs.insert(COEFF_ZEROTH.to_string(), -lambda);
    coeffs.insert(COEFF_CONVECTION.to_string(), 0.0);
    coeffs.insert(COEFF_REACTION_EXP.to_string(), 0.0);
    if desc.reaction() != 1.0 {
        coeffs.insert(COEFF_REACTION.to_string(), desc.reaction());
    }
    let mut notes = Vec::new();
    if lambda > 0.0 {
        notes.push("lambda > 0: reversed Fisher-KPP equation (p above the sigma1=-2 Fujita exponent)".into());
    }
    Ok(CoordinateMap {
        kind: TransformKind::Fisher,
        delta: -amp,
        theta: 1.0,
        a: 1.0,
        c: 1.0,
        shift_k: Some(shift),
        log_radial: true,
        source: desc.clone(),
        target: EquationDescriptor::log_radial(Family::FisherForm, m, p, coeffs),
        notes,
        warning: None,
    })
}

pub fn build(kind: TransformKind, desc: &EquationDescriptor) -> Result<CoordinateMap, TransformError> {
    match kind {
        TransformKind::Main => main_transform(desc),
        TransformKind::Second => second_transform(desc),
        TransformKind::Euler => euler_transform(desc),
        TransformKind::Fisher => fisher_transform(desc),
    }
}

impl CoordinateMap {
    /// Exponent balance that removes the `z` power of the diffusion term.
    /// For log maps the analogous requirement is `(m-1)delta - s1 - 2 = 0`.
    pub fn structure_defect(&self) -> f64 {
        let s = &self.source;
        if self.log_radial {
            (s.m - 1.0) * self.delta - s.sigma1 - 2.0
        } else {
            (s.m - 1.0) * self.delta + 2.0 * self.theta - s.sigma1 - 2.0
        }
    }

    fn shift(&self) -> f64 {
        self.shift_k.unwrap_or(0.0)
    }

    /// Source `(r, t)` to target `(z, tau)`.
    pub fn to_target(&self, r: f64, t: f64) -> Result<(f64, f64), TransformError> {
        if !(r > 0.0) {
            return Err(TransformError::DomainError(format!("radius {} must be positive", wire::fmt_g(r))));
        }
        if self.log_radial {
            Ok((r.ln() + self.shift() * t, t))
        } else {
            Ok((self.a * r.powf(self.theta), self.c * t))
        }
    }

    /// Target `(z, tau)` back to source `(r, t)`.
    pub fn to_source(&self, z: f64, tau: f64) -> Result<(f64, f64), TransformError> {
        if self.log_radial {
            Ok(((z - self.shift() * tau).exp(), tau))
        } else if z > 0.0 {
            Ok(((z / self.a).powf(1.0 / self.theta), tau / self.c))
        } else {
            Err(TransformError::DomainError(format!("target coordinate {} maps to r <= 0", wire::fmt_g(z))))
        }
    }

    pub fn push_forward<F: Field>(&self, u: F) -> PushForward<'_, F> {
        PushForward { map: self, u }
    }

    pub fn pull_back<W: Field>(&self, w: W) -> PullBack<'_, W> {
        PullBack { map: self, w }
    }

    /// Exact pointwise transform of `(r, t, u)` samples.
    pub fn push_samples(&self, samples: &[[f64; 3]]) -> Result<Vec<[f64; 3]>, TransformError> {
        samples
            .iter()
            .map(|&[r, t, u]| {
                let (z, tau) = self.to_target(r, t)?;
                Ok([z, tau, r.powf(-self.delta) * u])
            })
            .collect()
    }

    /// Exact pointwise inverse of [`push_samples`](Self::push_samples).
    pub fn pull_samples(&self, samples: &[[f64; 3]]) -> Result<Vec<[f64; 3]>, TransformError> {
        samples
            .iter()
            .map(|&[z, tau, w]| {
                let (r, t) = self.to_source(z, tau)?;
                Ok([r, t, r.powf(self.delta) * w])
            })
            .collect()
    }

    /// Pull back target values sampled on a grid at target time `tau`,
    /// interpolating monotonically, onto source radii `rs`.
    pub fn pull_back_grid(&self, z: &[f64], w: &[f64], tau: f64, rs: &[f64]) -> Result<Vec<f64>, TransformError> {
        let interp = Pchip::new(z, w).ok_or_else(|| TransformError::Interpolation("grid must be increasing".into()))?;
        let t = if self.log_radial { tau } else { tau / self.c };
        rs.iter()
            .map(|&r| {
                let (zz, _) = self.to_target(r, t)?;
                let v = interp.eval(zz);
                if v.is_nan() {
                    Err(TransformError::DomainError(format!(
                        "radius {} maps outside the sampled target grid",
                        wire::fmt_g(r)
                    )))
                } else {
                    Ok(r.powf(self.delta) * v)
                }
            })
            .collect()
    }

    /// Source-side form and profile for a target-side self-similar solution.
    ///
    /// Only amplitude-free power maps are supported. The source profile is
    /// `f(xi) = k * fbar(b xi^theta)` with `(k, b)` returned.
    pub fn pull_back_form(&self, target_form: &SelfSimilarForm) -> Result<(SelfSimilarForm, f64, f64), TransformError> {
        if self.log_radial || self.delta != 0.0 {
            return Err(TransformError::KindMismatch("profile pull-back needs a power map with delta = 0".into()));
        }
        let (ab, bb) = (target_form.alpha, target_form.beta);
        let (a, c, th) = (self.a, self.c, self.theta);
        let t_src = target_form.t_ref.map(|t| t / c);
        let (form, k, b) = match target_form.kind {
            FormKind::Forward => ((ab, bb / th), c.powf(ab), a * c.powf(-bb)),
            FormKind::Backward => ((ab, bb / th), c.powf(-ab), a * c.powf(bb)),
            FormKind::SeparateVariable => ((ab, 0.0), c.powf(-ab), a),
            FormKind::Exponential => ((c * ab, c * bb / th), 1.0, a),
            FormKind::Stationary => ((0.0, 0.0), 1.0, a),
        };
        let form = SelfSimilarForm::new(target_form.kind, form.0, form.1, t_src)
            .map_err(|e| TransformError::OutOfRange(e.to_string()))?;
        Ok((form, k, b))
    }
}

/// `w(z, tau) = r^{-delta} u(r, t)` at the preimage of `(z, tau)`.
pub struct PushForward<'a, F> {
    map: &'a CoordinateMap,
    u: F,
}

impl<F: Field> PushForward<'_, F> {
    pub fn try_eval(&self, z: f64, tau: f64) -> Result<f64, TransformError> {
        let (r, t) = self.map.to_source(z, tau)?;
        Ok(r.powf(-self.map.delta) * self.u.eval(r, t))
    }
}

impl<F: Field> Field for PushForward<'_, F> {
    fn eval(&self, z: f64, tau: f64) -> f64 {
        self.try_eval(z, tau).unwrap_or(f64::NAN)
    }
}

/// `u(r, t) = r^delta w(z(r,t), tau(t))`.
pub struct PullBack<'a, W> {
    map: &'a CoordinateMap,
    w: W,
}

impl<W: Field> PullBack<'_, W> {
    pub fn try_eval(&self, r: f64, t: f64) -> Result<f64, TransformError> {
        let (z, tau) = self.map.to_target(r, t)?;
        Ok(r.powf(self.map.delta) * self.w.eval(z, tau))
    }
}

impl<W: Field> Field for PullBack<'_, W> {
    fn eval(&self, r: f64, t: f64) -> f64 {
        self.try_eval(r, t).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(m: f64, p: f64, n: f64, s1: f64, s2: f64) -> EquationDescriptor {
        EquationDescriptor::radial(m, p, n, s1, s2).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + b.abs())
    }

    #[test]
    fn main_examples() {
        let mp = main_transform(&d(2.0, 1.0, 3.0, 2.0, 2.0)).unwrap();
        assert!(close(mp.theta, 2.0) && close(mp.target.n, 2.5) && close(mp.target.sigma2, 0.0));
        assert!(close(mp.a, 0.5) && close(mp.c, 1.0));
        assert_eq!(mp.target.family, Family::Homogeneous);
        let mp = main_transform(&d(3.0, 2.0, 2.0, 1.3, -0.4)).unwrap();
        assert!(close(mp.target.n, 2.0));
        let id = main_transform(&d(2.0, 1.0, 3.0, 0.0, 0.0)).unwrap();
        assert_eq!((id.theta, id.a, id.c, id.target.n, id.target.sigma2), (1.0, 1.0, 1.0, 3.0, 0.0));
        assert!(main_transform(&d(2.0, 1.0, 3.0, -2.0, 0.0)).is_err());
        let deg = main_transform(&d(2.0, 1.0, 3.0, 1.0, -2.0)).unwrap();
        assert!(close(deg.target.sigma2, -2.0) && deg.a == 1.0 && close(deg.c, 2.25));
        assert!(close(deg.target.reaction(), 1.0 / 2.25));
    }

    #[test]
    fn second_examples() {
        let mp = second_transform(&d(2.0, 1.0, 3.0, 0.0, 0.0)).unwrap();
        assert!(close(mp.delta, -0.5) && close(mp.theta, 1.25) && close(mp.target.n, 1.2));
        assert!(close(mp.target.sigma2, 0.0));
        assert!(mp.warning.is_some());
        let mp = second_transform(&d(2.0, 2.0, 3.0, 0.0, 0.0)).unwrap();
        assert!(close(mp.target.sigma2, -0.4));
        let (m, n, p, s1) = (3.0, 4.0, 1.7, 0.4);
        let mp = second_transform(&d(m, p, n, s1, s1 + (n - 2.0) * (p - 1.0) / m)).unwrap();
        assert!(mp.target.sigma2.abs() < 1e-12);
    }

    #[test]
    fn euler_examples() {
        let src = d(2.0, 1.0, 3.0, 0.0, 0.0);
        assert!(src.is_critical());
        let mp = euler_transform(&src).unwrap();
        assert_eq!(mp.target.family, Family::EulerForm);
        assert!(close(mp.delta, 2.0) && close(mp.target.convection(), 9.0) && close(mp.target.zeroth_order(), 20.0));
        let mp = euler_transform(&d(2.0, 3.0, 2.0, -2.0, -2.0)).unwrap();
        assert_eq!(mp.target.family, Family::ConvectionForm);
        assert_eq!(mp.target.convection(), 0.0);
        let mp = euler_transform(&d(3.0, 3.0, 1.0, -2.0, -2.0)).unwrap();
        assert_eq!(mp.target.convection(), -1.0);
        assert!(euler_transform(&d(2.0, 1.5, 3.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn fisher_examples() {
        let mp = fisher_transform(&d(1.0, 3.0, 5.0, -2.0, 0.0)).unwrap();
        assert!(close(mp.delta, -1.0) && close(mp.shift_k.unwrap(), 1.0));
        assert!(close(mp.target.coeff(COEFF_LAMBDA).unwrap(), 2.0));
        let mp = fisher_transform(&d(1.0, 2.0, 3.0, -2.0, -1.0)).unwrap();
        assert!(close(mp.delta, -1.0) && close(mp.shift_k.unwrap(), -1.0));
        assert!(mp.target.coeff(COEFF_LAMBDA).unwrap().abs() < 1e-15);
        let (p, s2) = (3.0, 0.5);
        let mp = fisher_transform(&d(1.0, p, (s2 + 2.0 * p) / (p - 1.0), -2.0, s2)).unwrap();
        assert!(mp.target.coeff(COEFF_LAMBDA).unwrap().abs() < 1e-12);
        assert!(fisher_transform(&d(2.0, 3.0, 5.0, -2.0, 0.0)).is_err());
    }

    #[test]
    fn push_forward_examples() {
        let mp = main_transform(&d(2.0, 1.0, 3.0, 2.0, 2.0)).unwrap();
        let w = mp.push_forward(|r: f64, _t: f64| r);
        for s in [0.1, 0.7, 3.0] {
            assert!(close(w.eval(s, 0.3), (s / 0.5).sqrt()));
        }
        assert!(w.try_eval(0.0, 1.0).is_err());
        let mp = fisher_transform(&d(1.0, 3.0, 5.0, -2.0, 0.0)).unwrap();
        let delta = mp.delta;
        let w = mp.push_forward(move |r: f64, _t: f64| r.powf(delta));
        for (y, t) in [(-3.0, 0.1), (0.5, 2.0), (4.0, 0.0)] {
            assert!(close(w.eval(y, t), 1.0));
        }
        let u = |r: f64, t: f64| (1.0 + t) * (-r * r).exp();
        let back = mp.pull_back(mp.push_forward(u));
        assert!(close(back.eval(0.8, 0.4), u(0.8, 0.4)));
        assert!(back.try_eval(-1.0, 0.0).is_err());
    }

    #[test]
    fn grid_pull_back_is_accurate() {
        let mp = main_transform(&d(2.0, 2.0, 3.0, 2.0, 2.0)).unwrap();
        let w = |s: f64| 1.0 + (-s * s).exp();
        let z: Vec<f64> = (0..=400).map(|i| 0.01 + 4.0 * i as f64 / 400.0).collect();
        let vals: Vec<f64> = z.iter().map(|&s| w(s)).collect();
        let rs = [0.3, 1.0, 2.0, 2.5];
        let got = mp.pull_back_grid(&z, &vals, 0.0, &rs).unwrap();
        for (r, g) in rs.iter().zip(got) {
            assert!((g - w(0.5 * r * r)).abs() < 1e-6);
        }
        assert!(mp.pull_back_grid(&z, &vals, 0.0, &[10.0]).is_err());
    }
}
