//! Equation families, parameter validation, self-similar exponents and the
//! regime classifier.
//!
//! The radial equation is
//! `r^s1 u_t = (u^m)_rr + (N-1)/r (u^m)_r + k r^s2 u^p`
//! with `k` the optional `"reaction"` coefficient (default 1). The log-radial
//! families obtained by the Euler and Fisher maps live on the line:
//! `w_t = (w^m)_yy + c (w^m)_y + z w^m + e^{e y} w^p`, with `c`, `z`, `e`
//! stored as the `"convection"`, `"zeroth_order"` and `"reaction_exp"`
//! coefficients.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::exponents;
use crate::wire;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EqModelError {
    #[error("InvalidParameter: {}", .violations.join("; "))]
    InvalidParameter { violations: Vec<String> },
    #[error("DegenerateSystem: L = {l:e} vanishes, the exponent system is singular")]
    DegenerateSystem { l: f64 },
    #[error("KindMismatch: {0}")]
    KindMismatch(String),
    #[error("InvalidForm: {0}")]
    InvalidForm(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    TwoWeight,
    SingleWeight,
    Homogeneous,
    EulerForm,
    FisherForm,
    ConvectionForm,
}

impl Family {
    /// Families posed on the line `y = ln r` rather than on the radius.
    pub fn is_log_radial(self) -> bool {
        matches!(self, Family::EulerForm | Family::FisherForm | Family::ConvectionForm)
    }
}

/// Unvalidated user input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawParameters {
    pub m: f64,
    pub p: f64,
    #[serde(rename = "N")]
    pub n: f64,
    #[serde(default)]
    pub sigma1: f64,
    #[serde(default)]
    pub sigma2: f64,
}

impl RawParameters {
    pub fn new(m: f64, p: f64, n: f64, sigma1: f64, sigma2: f64) -> Self {
        RawParameters { m, p, n, sigma1, sigma2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationDescriptor {
    pub family: Family,
    pub m: f64,
    pub p: f64,
    #[serde(rename = "N")]
    pub n: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    #[serde(default)]
    pub coeffs: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub const COEFF_REACTION: &str = "reaction";
pub const COEFF_CONVECTION: &str = "convection";
pub const COEFF_ZEROTH: &str = "zeroth_order";
pub const COEFF_REACTION_EXP: &str = "reaction_exp";
pub const COEFF_LAMBDA: &str = "lambda";

/// Family implied by the weights of a radial equation.
pub fn radial_family(sigma1: f64, sigma2: f64) -> Family {
    if sigma1 == 0.0 && sigma2 == 0.0 {
        Family::Homogeneous
    } else if sigma1 == 0.0 {
        Family::SingleWeight
    } else {
        Family::TwoWeight
    }
}

/// Check the standing hypotheses; soft applicability issues become warnings.
pub fn validate(raw: RawParameters) -> Result<EquationDescriptor, EqModelError> {
    let RawParameters { m, p, n, sigma1, sigma2 } = raw;
    let mut violations = Vec::new();
    for (name, v) in [("m", m), ("p", p), ("N", n), ("sigma1", sigma1), ("sigma2", sigma2)] {
        if !v.is_finite() {
            violations.push(format!("{name} must be finite (got {v})"));
        }
    }
    if m < 1.0 {
        violations.push(format!("m >= 1 required (got m = {})", wire::fmt_g(m)));
    }
    if p < 1.0 {
        violations.push(format!("p >= 1 required (got p = {})", wire::fmt_g(p)));
    }
    if n <= 0.0 {
        violations.push(format!("N > 0 required (got N = {})", wire::fmt_g(n)));
    }
    if !violations.is_empty() {
        return Err(EqModelError::InvalidParameter { violations });
    }

    let mut warnings = Vec::new();
    if sigma1 <= -2.0 {
        warnings.push("outside main-transform range: sigma1 <= -2".to_string());
    }
    if n < 2.0 && sigma1 < 0.0 {
        warnings.push("main transform requires sigma1>=0 in N=1".to_string());
    }
    if n < 2.0 && sigma2 <= -1.0 {
        warnings.push("blow-up classification requires sigma2>-1 in N=1".to_string());
    }
    if sigma2 < -2.0 {
        warnings.push("sigma2 < -2: transformed weight falls below -2".to_string());
    }
    Ok(EquationDescriptor {
        family: radial_family(sigma1, sigma2),
        m,
        p,
        n,
        sigma1,
        sigma2,
        coeffs: BTreeMap::new(),
        warnings,
    })
}

impl EquationDescriptor {
    /// Validated radial descriptor.
    pub fn radial(m: f64, p: f64, n: f64, sigma1: f64, sigma2: f64) -> Result<Self, EqModelError> {
        validate(RawParameters { m, p, n, sigma1, sigma2 })
    }

    /// Line-form descriptor produced by the log-radial maps.
    pub fn log_radial(family: Family, m: f64, p: f64, coeffs: BTreeMap<String, f64>) -> Self {
        debug_assert!(family.is_log_radial());
        EquationDescriptor { family, m, p, n: 1.0, sigma1: 0.0, sigma2: 0.0, coeffs, warnings: Vec::new() }
    }

    pub fn with_coeff(mut self, name: &str, value: f64) -> Self {
        self.coeffs.insert(name.to_string(), value);
        self
    }

    pub fn coeff(&self, name: &str) -> Option<f64> {
        self.coeffs.get(name).copied()
    }

    /// Multiplier of the reaction term (radial families).
    pub fn reaction(&self) -> f64 {
        self.coeff(COEFF_REACTION).unwrap_or(1.0)
    }

    pub fn convection(&self) -> f64 {
        self.coeff(COEFF_CONVECTION).unwrap_or(0.0)
    }

    pub fn zeroth_order(&self) -> f64 {
        self.coeff(COEFF_ZEROTH).unwrap_or(0.0)
    }

    pub fn reaction_exp(&self) -> f64 {
        self.coeff(COEFF_REACTION_EXP).unwrap_or(0.0)
    }

    pub fn is_radial(&self) -> bool {
        !self.family.is_log_radial()
    }

    /// `L = s2 (m-1) + 2 (p-1) - s1 (m-p)`.
    pub fn l_value(&self) -> f64 {
        l_of(self.m, self.p, self.sigma1, self.sigma2)
    }

    pub fn l_tolerance(&self) -> f64 {
        1e-10 * (1.0 + self.sigma1.abs() + self.sigma2.abs())
    }

    pub fn is_critical(&self) -> bool {
        self.l_value().abs() < self.l_tolerance()
    }

    pub fn raw(&self) -> RawParameters {
        RawParameters::new(self.m, self.p, self.n, self.sigma1, self.sigma2)
    }
}

pub fn l_of(m: f64, p: f64, sigma1: f64, sigma2: f64) -> f64 {
    sigma2 * (m - 1.0) + 2.0 * (p - 1.0) - sigma1 * (m - p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FormKind {
    Forward,
    Backward,
    Exponential,
    SeparateVariable,
    Stationary,
}

/// Self-similar ansatz. Conventions:
/// forward `t^a f(r t^-b)`, backward `(T-t)^-a f(r (T-t)^b)`,
/// exponential `e^{a t} f(r e^{-b t})`, separate variable `(T-t)^-a F(r)`,
/// stationary `f(r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarForm {
    pub kind: FormKind,
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t_ref: Option<f64>,
}

impl SelfSimilarForm {
    pub fn new(kind: FormKind, alpha: f64, beta: f64, t_ref: Option<f64>) -> Result<Self, EqModelError> {
        let form = SelfSimilarForm { kind, alpha, beta, t_ref };
        form.check()?;
        Ok(form)
    }

    fn check(&self) -> Result<(), EqModelError> {
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(EqModelError::InvalidForm("exponents must be finite".into()));
        }
        match self.kind {
            FormKind::Backward | FormKind::SeparateVariable => match self.t_ref {
                Some(t) if t.is_finite() && t > 0.0 => {}
                _ => return Err(EqModelError::InvalidForm("blow-up time T must be finite and positive".into())),
            },
            _ => {}
        }
        if self.kind == FormKind::SeparateVariable && self.beta != 0.0 {
            return Err(EqModelError::InvalidForm("separate-variable form needs beta = 0".into()));
        }
        Ok(())
    }

    /// Check the kind-specific relations that involve the equation.
    pub fn check_against(&self, desc: &EquationDescriptor) -> Result<(), EqModelError> {
        self.check()?;
        match self.kind {
            FormKind::Exponential if desc.m > 1.0 => {
                let ratio = (desc.sigma1 + 2.0) / (desc.m - 1.0);
                if (self.alpha - ratio * self.beta).abs() > 1e-12 * (1.0 + self.alpha.abs()) {
                    return Err(EqModelError::InvalidForm(format!(
                        "exponential form needs alpha/beta = {}",
                        wire::fmt_g(ratio)
                    )));
                }
            }
            FormKind::SeparateVariable => {
                let a = 1.0 / (desc.m - 1.0);
                if (self.alpha - a).abs() > 1e-12 * a.abs() {
                    return Err(EqModelError::InvalidForm("separate-variable form needs alpha = 1/(m-1)".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Same kind and exponents with another blow-up time.
    pub fn with_time(mut self, t: f64) -> Result<Self, EqModelError> {
        self.t_ref = Some(t);
        self.check()?;
        Ok(self)
    }

    /// `(time factor, similarity variable)` of the ansatz at `(r, t)`;
    /// `u = factor * f(xi)`. `None` outside the time domain.
    pub fn similarity(&self, r: f64, t: f64) -> Option<(f64, f64)> {
        match self.kind {
            FormKind::Forward => {
                if t <= 0.0 {
                    return None;
                }
                Some((t.powf(self.alpha), r * t.powf(-self.beta)))
            }
            FormKind::Backward | FormKind::SeparateVariable => {
                let s = self.t_ref.unwrap_or(1.0) - t;
                if s <= 0.0 {
                    return None;
                }
                Some((s.powf(-self.alpha), r * s.powf(self.beta)))
            }
            FormKind::Exponential => Some(((self.alpha * t).exp(), r * (-self.beta * t).exp())),
            FormKind::Stationary => Some((1.0, r)),
        }
    }
}

/// The exponent-matching system `A (alpha, beta) = rhs`.
///
/// Substituting the ansatz, the time powers of `r^s1 u_t`, `(u^m)_rr` and
/// `r^s2 u^p` must agree. With `u = T(t) f(r/X(t))`, `X ~ t^b` or
/// `(T-t)^-b`, the diffusion/time and reaction/time balances read
/// `(m-1) a - (s1+2) b = -1` and `(m-p) a - (s2+2) b = 0` (forward, time
/// powers), with `+1` on the right for the backward orientation.
fn exponent_system(desc: &EquationDescriptor, kind: FormKind) -> ([[f64; 2]; 2], [f64; 2]) {
    let a = [[desc.m - 1.0, -(desc.sigma1 + 2.0)], [desc.m - desc.p, -(desc.sigma2 + 2.0)]];
    let rhs = match kind {
        FormKind::Forward => [-1.0, 0.0],
        _ => [1.0, 0.0],
    };
    (a, rhs)
}

fn cramer(a: [[f64; 2]; 2], b: [f64; 2]) -> Option<(f64, f64)> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det == 0.0 {
        return None;
    }
    let x = (b[0] * a[1][1] - a[0][1] * b[1]) / det;
    let y = (a[0][0] * b[1] - b[0] * a[1][0]) / det;
    Some((x, y))
}

/// Closed forms of the forward/backward exponents, used as a cross-check.
pub fn closed_form_exponents(desc: &EquationDescriptor, kind: FormKind) -> Option<(f64, f64)> {
    let l = desc.l_value();
    if l.abs() < desc.l_tolerance() {
        return None;
    }
    let alpha = (desc.sigma2 + 2.0) / l;
    let beta = (desc.m - desc.p) / l;
    match kind {
        FormKind::Backward => Some((alpha, beta)),
        FormKind::Forward => Some((-alpha, -beta)),
        _ => None,
    }
}

/// Exponents of the requested self-similar kind.
pub fn self_similar_exponents(desc: &EquationDescriptor, kind: FormKind) -> Result<SelfSimilarForm, EqModelError> {
    if !desc.is_radial() {
        return Err(EqModelError::KindMismatch(format!(
            "self-similar exponents are defined for radial families, not {:?}",
            desc.family
        )));
    }
    match kind {
        FormKind::Forward | FormKind::Backward => {
            let l = desc.l_value();
            if l.abs() < desc.l_tolerance() {
                return Err(EqModelError::DegenerateSystem { l });
            }
            let (a, rhs) = exponent_system(desc, kind);
            let (alpha, beta) = cramer(a, rhs).ok_or(EqModelError::DegenerateSystem { l })?;
            let t_ref = (kind == FormKind::Backward).then_some(1.0);
            SelfSimilarForm::new(kind, alpha, beta, t_ref)
        }
        FormKind::Exponential => {
            let l = desc.l_value();
            if l.abs() >= desc.l_tolerance() {
                return Err(EqModelError::KindMismatch(format!(
                    "exponential form needs L = 0, got L = {}",
                    wire::fmt_g(l)
                )));
            }
            if desc.m > 1.0 {
                SelfSimilarForm::new(kind, (desc.sigma1 + 2.0) / (desc.m - 1.0), 1.0, None)
            } else if desc.sigma1 == -2.0 {
                SelfSimilarForm::new(kind, 0.0, 1.0, None)
            } else {
                Err(EqModelError::KindMismatch("exponential form with m = 1 needs sigma1 = -2".into()))
            }
        }
        FormKind::SeparateVariable => {
            if (desc.p - desc.m).abs() > 1e-12 * desc.m || desc.m <= 1.0 {
                return Err(EqModelError::KindMismatch("separate-variable form needs p = m > 1".into()));
            }
            SelfSimilarForm::new(kind, 1.0 / (desc.m - 1.0), 0.0, Some(1.0))
        }
        FormKind::Stationary => SelfSimilarForm::new(kind, 0.0, 0.0, None),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExpectedForm {
    Forward,
    Backward,
    Exponential,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeparateVariableStatus {
    Exists,
    NotExists,
    Undetermined,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub descriptor: EquationDescriptor,
    #[serde(rename = "L_value", serialize_with = "wire::ser_real")]
    pub l_value: f64,
    #[serde(serialize_with = "wire::ser_real")]
    pub fujita: f64,
    #[serde(serialize_with = "wire::ser_opt_real")]
    pub second_critical: Option<f64>,
    pub expected_form: ExpectedForm,
    pub separate_variable_status: SeparateVariableStatus,
    pub complete_blowup: Option<bool>,
    pub type2_possible: Option<bool>,
    pub notes: Vec<String>,
}

/// Aggregate the applicable regime facts for a descriptor.
pub fn classify_regime(desc: &EquationDescriptor) -> RegimeReport {
    let mut notes = Vec::new();
    let l = desc.l_value();
    let (m, p) = (desc.m, desc.p);

    if !desc.is_radial() {
        notes.push(format!("{:?} is a line equation; radial regime facts do not apply", desc.family));
        return RegimeReport {
            descriptor: desc.clone(),
            l_value: l,
            fujita: f64::NAN,
            second_critical: None,
            expected_form: ExpectedForm::None,
            separate_variable_status: SeparateVariableStatus::NotApplicable,
            complete_blowup: None,
            type2_possible: None,
            notes,
        };
    }

    let pair = exponents::fujita_pair(desc);
    let fujita = pair.p_f.unwrap_or(f64::NAN);
    notes.extend(pair.notes.iter().cloned());

    let critical = l.abs() < desc.l_tolerance();
    let expected_form = if p <= m {
        if critical {
            ExpectedForm::Exponential
        } else if l > 0.0 {
            ExpectedForm::Backward
        } else {
            ExpectedForm::Forward
        }
    } else if fujita.is_nan() {
        ExpectedForm::None
    } else if p <= fujita {
        ExpectedForm::Backward
    } else {
        ExpectedForm::Forward
    };

    if p > m && fujita.is_finite() {
        if p <= fujita {
            notes.push(format!(
                "Fujita regime: m < p <= p_F = {}, every nontrivial radial solution blows up in finite time (universal blow-up)",
                wire::fmt_g(fujita)
            ));
        } else {
            notes.push(format!(
                "above Fujita exponent p_F = {}: global solutions exist for small data decaying faster than |x|^-mu; a forward self-similar solution exists",
                wire::fmt_g(fujita)
            ));
        }
    }
    if p <= m && !critical {
        notes.push(
            "forward exponents from the exponent-matching system give alpha = -(sigma2+2)/L; the transformed sigma in the printed statement is replaced by sigma2"
                .into(),
        );
    }

    let separate_variable_status = if (p - m).abs() <= 1e-12 * m && m > 1.0 {
        let t = exponents::pm_thresholds(desc).expect("m > 1 checked");
        let s2 = desc.sigma2;
        if s2 >= t.nonexist_bound || (desc.n > t.sharpness_dim && s2 >= t.sigma2c) {
            notes.push(format!(
                "separate-variable solutions: none (sigma2 >= {} or sharp threshold sigma2c = {} with N > {})",
                wire::fmt_g(t.nonexist_bound),
                wire::fmt_g(t.sigma2c),
                wire::fmt_g(t.sharpness_dim)
            ));
            SeparateVariableStatus::NotExists
        } else if desc.sigma1 <= s2 && s2 < t.sigma2c {
            notes.push(format!(
                "separate-variable blow-up solutions exist for sigma1 <= sigma2 < sigma2c = {}",
                wire::fmt_g(t.sigma2c)
            ));
            SeparateVariableStatus::Exists
        } else {
            notes.push("separate-variable existence not decided by the available thresholds".into());
            SeparateVariableStatus::Undetermined
        }
    } else {
        SeparateVariableStatus::NotApplicable
    };

    let mut complete_blowup = None;
    if desc.sigma1 == desc.sigma2 && m > 1.0 && p > m {
        let ps = exponents::p_s(m, desc.n, desc.sigma2);
        if p <= ps {
            complete_blowup = Some(true);
            notes.push(format!("equal weights, m < p <= p_s = {}: blow-up is complete", wire::fmt_g(ps)));
        } else {
            notes.push(format!(
                "equal weights, p > p_s = {}: blow-up is complete when the blow-up set is not just the origin",
                wire::fmt_g(ps)
            ));
            let pl = exponents::p_l(m, desc.n, desc.sigma2);
            if p < pl && desc.n > 2.0 {
                notes.push(
                    "rescaled self-similar data lambda u0: the printed global/complete-blow-up split states lambda > 1 for both branches; direction left undetermined"
                        .into(),
                );
            }
        }
    }

    let mut type2_possible = None;
    if m == 1.0 {
        let pjl = exponents::heat_p_jl(desc.n, desc.sigma2);
        if pjl.is_finite() && p > pjl {
            type2_possible = Some(true);
            notes.push(format!(
                "m = 1 and p > p_JL = {}: type II blow-up with prescribed rates exists",
                wire::fmt_g(pjl)
            ));
        }
    }

    RegimeReport {
        descriptor: desc.clone(),
        l_value: l,
        fujita,
        second_critical: pair.mu,
        expected_form,
        separate_variable_status,
        complete_blowup,
        type2_possible,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(m: f64, p: f64, n: f64, s1: f64, s2: f64) -> EquationDescriptor {
        EquationDescriptor::radial(m, p, n, s1, s2).unwrap()
    }

    #[test]
    fn validate_examples() {
        assert_eq!(d(2.0, 1.5, 3.0, 0.0, 0.0).family, Family::Homogeneous);
        assert_eq!(d(2.0, 1.5, 3.0, 0.0, 1.0).family, Family::SingleWeight);
        assert_eq!(d(2.0, 1.5, 3.0, 1.0, 1.0).family, Family::TwoWeight);
        match validate(RawParameters::new(0.5, 2.0, 3.0, 0.0, 0.0)) {
            Err(EqModelError::InvalidParameter { violations }) => {
                assert_eq!(violations.len(), 1);
                assert!(violations[0].contains("m >= 1"));
            }
            other => panic!("{other:?}"),
        }
        let w = d(2.0, 2.0, 1.0, -1.0, 0.0);
        assert!(w.warnings.iter().any(|s| s == "main transform requires sigma1>=0 in N=1"));
        let w = d(2.0, 2.0, 3.0, -2.5, 0.0);
        assert!(w.warnings.iter().any(|s| s.contains("outside main-transform range")));
        assert!(validate(RawParameters::new(2.0, 0.5, -1.0, 0.0, f64::NAN)).is_err());
    }

    #[test]
    fn exponent_examples() {
        let f = self_similar_exponents(&d(2.0, 1.5, 3.0, 0.0, 0.0), FormKind::Backward).unwrap();
        assert!((f.alpha - 2.0).abs() < 1e-14 && (f.beta - 0.5).abs() < 1e-14);
        let f = self_similar_exponents(&d(2.0, 1.0, 3.0, 0.0, -1.0), FormKind::Forward).unwrap();
        assert!((f.alpha - 1.0).abs() < 1e-14 && (f.beta - 1.0).abs() < 1e-14);
        let e = d(3.0, 2.0, 2.0, 0.0, -1.0);
        assert!(e.is_critical());
        let f = self_similar_exponents(&e, FormKind::Exponential).unwrap();
        assert_eq!(f.alpha / f.beta, 1.0);
        assert!(matches!(self_similar_exponents(&e, FormKind::Backward), Err(EqModelError::DegenerateSystem { .. })));
        assert!(matches!(
            self_similar_exponents(&d(2.0, 1.5, 3.0, 0.0, 0.0), FormKind::SeparateVariable),
            Err(EqModelError::KindMismatch(_))
        ));
        let sv = self_similar_exponents(&d(3.0, 3.0, 3.0, 0.0, 0.0), FormKind::SeparateVariable).unwrap();
        assert_eq!((sv.alpha, sv.beta), (0.5, 0.0));
    }

    #[test]
    fn form_invariants() {
        assert!(SelfSimilarForm::new(FormKind::Backward, 1.0, 1.0, None).is_err());
        assert!(SelfSimilarForm::new(FormKind::SeparateVariable, 1.0, 0.5, Some(1.0)).is_err());
        let e = d(3.0, 2.0, 2.0, 0.0, -1.0);
        let bad = SelfSimilarForm::new(FormKind::Exponential, 2.0, 1.0, None).unwrap();
        assert!(bad.check_against(&e).is_err());
    }

    #[test]
    fn classify_examples() {
        let r = classify_regime(&d(2.0, 2.1, 3.0, 0.0, 0.0));
        assert!((r.fujita - 8.0 / 3.0).abs() < 1e-12);
        assert!(r.notes.iter().any(|n| n.contains("universal blow-up")));
        assert_eq!(r.expected_form, ExpectedForm::Backward);
        assert_eq!(r.complete_blowup, Some(true));

        let r = classify_regime(&d(2.0, 2.0, 3.0, 0.0, 3.0));
        assert_eq!(r.separate_variable_status, SeparateVariableStatus::NotExists);
        let r = classify_regime(&d(2.0, 2.0, 3.0, 0.0, 0.3));
        assert_eq!(r.separate_variable_status, SeparateVariableStatus::Exists);
        // sigma2c = 4/7 <= 0.8 < 1, N = 3 < sharpness dimension 10/3
        let r = classify_regime(&d(2.0, 2.0, 3.0, 0.0, 0.8));
        assert_eq!(r.separate_variable_status, SeparateVariableStatus::Undetermined);
        let r = classify_regime(&d(2.0, 1.5, 3.0, 0.0, 0.0));
        assert_eq!(r.separate_variable_status, SeparateVariableStatus::NotApplicable);
        assert_eq!(r.expected_form, ExpectedForm::Backward);
        assert_eq!(r.second_critical, None);
        let r = classify_regime(&d(2.0, 1.0, 3.0, 0.0, -1.0));
        assert_eq!(r.expected_form, ExpectedForm::Forward);
        let r = classify_regime(&d(3.0, 2.0, 2.0, 0.0, -1.0));
        assert_eq!(r.expected_form, ExpectedForm::Exponential);
        let r = classify_regime(&d(1.0, 8.0, 12.0, 0.0, 0.0));
        assert_eq!(r.type2_possible, Some(true));
    }

    #[test]
    fn similarity_variables() {
        let f = SelfSimilarForm::new(FormKind::Backward, 2.0, 0.5, Some(1.0)).unwrap();
        let (a, xi) = f.similarity(2.0, 0.75).unwrap();
        assert!((a - 16.0).abs() < 1e-12 && (xi - 1.0).abs() < 1e-12);
        assert!(f.similarity(1.0, 1.0).is_none());
    }
}
