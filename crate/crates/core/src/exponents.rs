//! Closed-form critical exponents and constants.
//!
//! Dimension-restricted exponents follow the infinity convention: outside
//! their dimension range they equal `+inf`.

use serde::Serialize;
use thiserror::Error;

use crate::eqmodel::EquationDescriptor;
use crate::wire;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExponentError {
    #[error("KindMismatch: {0}")]
    KindMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LConstants {
    /// `s(m-1) + 2(p-1)` with `s` the single weight after the main map.
    pub l: f64,
    /// `s2(m-1) + 2(p-1) - s1(m-p)`.
    pub l_sigma: f64,
}

/// Sign constants of the single-weight and two-weight equations.
pub fn l_constants(desc: &EquationDescriptor) -> LConstants {
    let (m, p, s1, s2) = (desc.m, desc.p, desc.sigma1, desc.sigma2);
    let sigma = if s1 == 0.0 { s2 } else { 2.0 * (s2 - s1) / (s1 + 2.0) };
    LConstants { l: sigma * (m - 1.0) + 2.0 * (p - 1.0), l_sigma: s2 * (m - 1.0) + 2.0 * (p - 1.0) - s1 * (m - p) }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FujitaPair {
    pub p_f: Option<f64>,
    pub mu: Option<f64>,
    pub notes: Vec<String>,
}

pub fn fujita_pair(desc: &EquationDescriptor) -> FujitaPair {
    let (m, p, n, s1, s2) = (desc.m, desc.p, desc.n, desc.sigma1, desc.sigma2);
    let mut notes = Vec::new();
    let p_f = if n + s1 > 0.0 {
        Some(m + (2.0 + s2) / (n + s1))
    } else {
        notes.push("p_F undefined: N + sigma1 <= 0".to_string());
        None
    };
    let mu = if p > m {
        Some((s2 + 2.0) / (p - m))
    } else {
        notes.push("mu undefined: requires p > m".to_string());
        None
    };
    FujitaPair { p_f, mu, notes }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmThresholds {
    pub sigma2c: f64,
    pub nonexist_bound: f64,
    pub sharpness_dim: f64,
}

/// Thresholds for separate-variable solutions at `p = m`.
pub fn pm_thresholds(desc: &EquationDescriptor) -> Result<PmThresholds, ExponentError> {
    let (m, n, s1) = (desc.m, desc.n, desc.sigma1);
    if m <= 1.0 {
        return Err(ExponentError::KindMismatch("p = m thresholds need m > 1".into()));
    }
    Ok(PmThresholds {
        sigma2c: s1 + (2.0 * (n - 1.0) + s1) * (m - 1.0) / (3.0 * m + 1.0),
        nonexist_bound: s1 + (m - 1.0) * (n + s1) / (m + 1.0),
        sharpness_dim: (m * s1 + 4.0 * m + 2.0) / (m + 1.0),
    })
}

pub fn p_c_fw(m: f64, sigma1: f64, sigma2: f64) -> f64 {
    m - (m - 1.0) * (sigma2 + 2.0) / (sigma1 + 2.0)
}

pub fn p_c(m: f64, n: f64, sigma: f64) -> f64 {
    if n > 2.0 {
        m * (n + sigma) / (n - 2.0)
    } else {
        f64::INFINITY
    }
}

pub fn p_s(m: f64, n: f64, sigma: f64) -> f64 {
    if n > 2.0 {
        m * (n + 2.0 * sigma + 2.0) / (n - 2.0)
    } else {
        f64::INFINITY
    }
}

fn jl_range(n: f64, sigma: f64) -> bool {
    n > 10.0 + 4.0 * sigma && n > 2.0
}

pub fn p_jl(m: f64, n: f64, sigma: f64) -> f64 {
    if !jl_range(n, sigma) {
        return f64::INFINITY;
    }
    let s = sigma;
    let root = ((s + 2.0) * (2.0 * n + s - 2.0)).sqrt();
    let num = n * n - 8.0 * n + 4.0 - 2.0 * s * s - 2.0 * (n + 2.0) * s + 2.0 * (s + 2.0) * root;
    m * num / ((n - 2.0) * (n - 10.0 - 4.0 * s))
}

pub fn p_l(m: f64, n: f64, sigma: f64) -> f64 {
    if !jl_range(n, sigma) {
        return f64::INFINITY;
    }
    let s = sigma;
    let d = n - 10.0 - 4.0 * s;
    let disc = 4.0 * (m - 1.0).powi(2) * d * d
        + 2.0 * (m - 1.0) * (5.0 * m - 4.0) * (s + 2.0) * d
        + 9.0 * m * m * (s + 2.0).powi(2);
    1.0 + (3.0 * m * (s + 2.0) + disc.sqrt()) / (2.0 * d)
}

pub fn heat_p_s(n: f64, sigma: f64) -> f64 {
    if n > 2.0 {
        (n + 2.0 + 2.0 * sigma) / (n - 2.0)
    } else {
        f64::INFINITY
    }
}

pub fn heat_p_jl(n: f64, sigma: f64) -> f64 {
    if !jl_range(n, sigma) {
        return f64::INFINITY;
    }
    1.0 + (2.0 * sigma + 4.0) / (n - 4.0 - sigma - ((2.0 * n + sigma - 2.0) * (sigma + 2.0)).sqrt())
}

pub fn heat_m(n: f64, p: f64, sigma1: f64) -> f64 {
    let s = sigma1;
    (p - 1.0).powi(2) * n * n - 4.0 * (p - 1.0) * (p * s + 3.0 * p - 1.0) * n
        + 4.0 * p * s * (s + 2.0 * p + 2.0)
        + 20.0 * p * p
        - 8.0 * p
        + 4.0
}

/// Type II rate denominator; NaN when the radicand is negative.
pub fn heat_l(n: f64, p: f64, sigma1: f64) -> f64 {
    let mm = heat_m(n, p, sigma1);
    if mm < 0.0 || n <= 2.0 {
        return f64::NAN;
    }
    ((n - 2.0) * (p - heat_p_s(n, sigma1)) - mm.sqrt()) / (2.0 + sigma1)
}

pub fn q_min(n: f64, p: f64, sigma1: f64, sigma2: f64) -> f64 {
    (p * (n + sigma1) / (n + sigma2)).max((p - 1.0) * (n + sigma1) / (2.0 + sigma2))
}

/// Optimal Hardy constant `(N-2)^2/4`, for `N >= 3`.
pub fn k_star(n: f64) -> Option<f64> {
    (n >= 3.0).then(|| (n - 2.0).powi(2) / 4.0)
}

/// Amplitude of the singular stationary solution `K r^{-(s2+2)/(p-m)}`.
pub fn k_stat(m: f64, p: f64, n: f64, sigma2: f64) -> Option<f64> {
    let pc = p_c(m, n, sigma2);
    if !(n > 2.0 && p > pc && p > m) {
        return None;
    }
    let base = m * (n - 2.0) * (sigma2 + 2.0) * (p - pc) / (p - m).powi(2);
    (base > 0.0).then(|| base.powf(1.0 / (p - m)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlowDiffusionSet {
    pub p_c_fw: f64,
    pub p_c: f64,
    pub p_s: f64,
    pub p_jl: f64,
    pub p_l: f64,
}

pub fn slow_diffusion_set(desc: &EquationDescriptor) -> SlowDiffusionSet {
    let (m, n, s2) = (desc.m, desc.n, desc.sigma2);
    SlowDiffusionSet {
        p_c_fw: if desc.sigma1 > -2.0 { p_c_fw(m, desc.sigma1, s2) } else { f64::NAN },
        p_c: p_c(m, n, s2),
        p_s: p_s(m, n, s2),
        p_jl: p_jl(m, n, s2),
        p_l: p_l(m, n, s2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemilinearSet {
    pub heat_p_s: f64,
    pub heat_p_jl: f64,
    pub heat_l: f64,
    pub heat_m: f64,
    pub q_min: f64,
    pub k_star: Option<f64>,
}

pub fn semilinear_set(desc: &EquationDescriptor) -> Result<SemilinearSet, ExponentError> {
    if desc.m != 1.0 {
        return Err(ExponentError::KindMismatch("semilinear exponents need m = 1".into()));
    }
    let (p, n, s1, s2) = (desc.p, desc.n, desc.sigma1, desc.sigma2);
    Ok(SemilinearSet {
        heat_p_s: heat_p_s(n, s2),
        heat_p_jl: heat_p_jl(n, s2),
        heat_l: heat_l(n, p, s1),
        heat_m: heat_m(n, p, s1),
        q_min: q_min(n, p, s1, s2),
        k_star: k_star(n),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentEntry {
    pub name: String,
    #[serde(serialize_with = "wire::ser_opt_real")]
    pub value: Option<f64>,
    pub defined: bool,
    pub citation: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentTable {
    pub entries: Vec<ExponentEntry>,
}

impl ExponentTable {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.name == name).and_then(|e| e.value)
    }

    fn push(&mut self, name: &str, value: Option<f64>, citation: &str, note: Option<String>) {
        let defined = value.map(f64::is_finite).unwrap_or(false);
        self.entries.push(ExponentEntry {
            name: name.to_string(),
            value,
            defined,
            citation: citation.to_string(),
            note,
        });
    }
}

/// Every exponent and constant applicable to the descriptor.
pub fn exponent_table(desc: &EquationDescriptor) -> ExponentTable {
    let mut t = ExponentTable { entries: Vec::new() };
    let (m, p, n, s1, s2) = (desc.m, desc.p, desc.n, desc.sigma1, desc.sigma2);

    let lc = l_constants(desc);
    t.push("L", Some(lc.l), "sign constant s(m-1)+2(p-1) of the single-weight equation", None);
    t.push("L_sigma", Some(lc.l_sigma), "sign constant s2(m-1)+2(p-1)-s1(m-p)", None);

    let fp = fujita_pair(desc);
    t.push(
        "p_F",
        fp.p_f,
        "Fujita-type exponent m+(2+s2)/(N+s1)",
        fp.p_f.is_none().then(|| "requires N+sigma1>0".into()),
    );
    t.push("mu", fp.mu, "second critical exponent (s2+2)/(p-m)", fp.mu.is_none().then(|| "requires p>m".into()));

    match pm_thresholds(desc) {
        Ok(th) => {
            t.push("sigma2c", Some(th.sigma2c), "separate-variable existence threshold", None);
            t.push("pm_nonexist_bound", Some(th.nonexist_bound), "separate-variable non-existence bound", None);
            t.push(
                "pm_sharpness_dim",
                Some(th.sharpness_dim),
                "dimension above which the non-existence threshold is sharp",
                None,
            );
        }
        Err(_) => {
            for name in ["sigma2c", "pm_nonexist_bound", "pm_sharpness_dim"] {
                t.push(name, None, "separate-variable thresholds", Some("requires m>1".into()));
            }
        }
    }

    let sd = slow_diffusion_set(desc);
    t.push(
        "p_c_fw",
        Some(sd.p_c_fw).filter(|v| !v.is_nan()),
        "upper reaction exponent for compactly supported forward profiles",
        None,
    );
    t.push("p_c", Some(sd.p_c), "critical exponent m(N+s2)/(N-2)", None);
    t.push("p_s", Some(sd.p_s), "Sobolev exponent m(N+2s2+2)/(N-2)", None);
    t.push("p_JL", Some(sd.p_jl), "Joseph-Lundgren exponent, finite for N>10+4s2", None);
    t.push("p_L", Some(sd.p_l), "Lepin exponent, finite for N>10+4s2", None);

    match semilinear_set(desc) {
        Ok(sl) => {
            t.push("heat_p_s", Some(sl.heat_p_s), "semilinear Sobolev exponent (N+2+2s)/(N-2)", None);
            t.push("heat_p_JL", Some(sl.heat_p_jl), "semilinear Joseph-Lundgren exponent", None);
            let note = sl.heat_l.is_nan().then(|| "radicand M negative or N<=2".to_string());
            t.push("heat_L", Some(sl.heat_l).filter(|v| !v.is_nan()), "type II blow-up rate denominator", note);
            t.push("heat_M", Some(sl.heat_m), "radicand of the type II rate denominator", None);
            t.push(
                "asympt_rate_p2",
                Some((s2 + 2.0) / (2.0 * (p - 1.0))),
                "large-time convergence rate exponent (s2+2)/(2(p-1))",
                None,
            );
            t.push(
                "asympt_rate_p3",
                Some((s2 + 2.0) / (p - 1.0)),
                "large-time sup-norm bracket exponent (s2+2)/(p-1)",
                None,
            );
        }
        Err(_) => {
            for name in ["heat_p_s", "heat_p_JL", "heat_L", "heat_M", "asympt_rate_p2", "asympt_rate_p3"] {
                t.push(name, None, "semilinear exponents", Some("requires m=1".into()));
            }
        }
    }
    t.push("q_min", Some(q_min(n, p, s1, s2)), "lower bound on q for weighted L^q well-posedness", None);
    let ks = k_star(n);
    t.push("K_star", ks, "optimal Hardy constant (N-2)^2/4", ks.is_none().then(|| "requires N>=3".into()));
    let kst = k_stat(m, p, n, s2);
    t.push(
        "K_stat",
        kst,
        "amplitude of the singular stationary solution",
        kst.is_none().then(|| "requires N>2 and p>p_c".into()),
    );
    let hl = (m > 1.0 && s1 > -2.0).then(|| (s1 + 2.0) / (m - 1.0));
    t.push(
        "hardy_limit_power",
        hl,
        "limiting origin power (s1+2)/(m-1) of the Hardy-potential equation",
        hl.is_none().then(|| "requires m>1".into()),
    );
    t
}
