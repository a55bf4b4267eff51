use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rdx_core::eqmodel::{self, classify_regime, EquationDescriptor, Family, FormKind, RawParameters, COEFF_REACTION};
use rdx_core::exponents::exponent_table;
use rdx_core::pde::{self, GridConfig, InitialData, ResidualOptions, RunConfig, RunStatus};
use rdx_core::profiles::{self, BehaviorClass, ShootOptions, ShootTarget, WaveOptions};
use rdx_core::solutions::{self, ClosedFormSolution};
use rdx_core::transforms::{self, TransformKind};
use rdx_core::wire::{self, real};
use rdx_core::{Execution, Field};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::output::{object, to_value, write_csv, write_json, CliError, CommandResult};
use crate::{Context, EqArgs, FormArg, SolutionName, TargetArg};

impl EqArgs {
    fn require(&self, name: &str, v: Option<f64>) -> Result<f64, CliError> {
        v.ok_or_else(|| CliError::Usage(format!("--{name} is required")))
    }

    /// Validated radial descriptor; `p` defaults to 1 and the weights to 0.
    pub fn descriptor(&self) -> Result<EquationDescriptor, CliError> {
        let raw = RawParameters::new(
            self.require("m", self.m)?,
            self.p.unwrap_or(1.0),
            self.require("N", self.n)?,
            self.sigma1.unwrap_or(0.0),
            self.sigma2.unwrap_or(0.0),
        );
        let mut d = eqmodel::validate(raw).map_err(CliError::domain)?;
        if let Some(k) = self.reaction {
            d = d.with_coeff(COEFF_REACTION, k);
        }
        Ok(d)
    }
}

fn warnings_of(desc: &EquationDescriptor) -> bool {
    !desc.warnings.is_empty()
}

fn out_path(ctx: &Context, name: &str) -> Option<PathBuf> {
    ctx.out.as_ref().map(|d| d.join(name))
}

pub fn exponents(eq: &EqArgs, csv: bool) -> Result<CommandResult, CliError> {
    let d = eq.descriptor()?;
    let table = exponent_table(&d);
    let raw = csv.then(|| {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["name", "value", "defined", "citation"]).expect("in-memory csv");
        for e in &table.entries {
            let value = e.value.map_or_else(String::new, wire::fmt_g);
            w.write_record([e.name.as_str(), &value, if e.defined { "true" } else { "false" }, e.citation.as_str()])
                .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
    });
    let values: serde_json::Map<String, Value> =
        table.entries.iter().map(|e| (e.name.clone(), e.value.map_or(Value::Null, real))).collect();
    let payload = object(vec![
        ("descriptor", to_value(&d)),
        ("exponents", Value::Object(values)),
        ("entries", to_value(&table.entries)),
    ]);
    let mut res = CommandResult::new("exponents", payload).warn_if(warnings_of(&d));
    res.raw = raw;
    Ok(res)
}

pub fn classify(eq: &EqArgs) -> Result<CommandResult, CliError> {
    let d = eq.descriptor()?;
    let report = classify_regime(&d);
    Ok(CommandResult::new("classify", to_value(&report)).warn_if(warnings_of(&d)))
}

fn read_triples(path: &Path) -> Result<Vec<[f64; 3]>, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| CliError::config(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::config(format!("missing column {name:?}")))
    };
    let idx = [col("r")?, col("t")?, col("u")?];
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::config(e.to_string()))?;
        let mut row = [0.0; 3];
        for (slot, &i) in row.iter_mut().zip(&idx) {
            *slot = rec
                .get(i)
                .and_then(wire::parse_real)
                .ok_or_else(|| CliError::config(format!("bad number in row {:?}", rec.position().map(|p| p.line()))))?;
        }
        out.push(row);
    }
    Ok(out)
}

pub fn transform(
    ctx: &Context,
    kind: &str,
    eq: &EqArgs,
    radii: &[f64],
    t: f64,
    apply: Option<&Path>,
) -> Result<CommandResult, CliError> {
    let kind: TransformKind = kind.parse().map_err(CliError::Usage)?;
    let d = eq.descriptor()?;
    let map = transforms::build(kind, &d).map_err(CliError::domain)?;
    let mut payload = to_value(&map);
    let obj = payload.as_object_mut().unwrap();
    if !map.log_radial {
        obj.insert("Nbar".into(), real(map.target.n));
        obj.insert("sigma".into(), real(map.target.sigma2));
    }
    if !radii.is_empty() {
        let mut points = Vec::new();
        for &r in radii {
            let (z, tau) = map.to_target(r, t).map_err(CliError::domain)?;
            points.push(json!({ "r": real(r), "t": real(t), "z": real(z), "tau": real(tau) }));
        }
        obj.insert("points".into(), Value::Array(points));
    }
    let mut artifacts = Vec::new();
    if let Some(path) = apply {
        let mapped = map.push_samples(&read_triples(path)?).map_err(CliError::domain)?;
        obj.insert("applied".into(), json!(mapped.len()));
        if let Some(dest) = out_path(ctx, "transformed.csv") {
            write_csv(&dest, &["z", "tau", "w"], mapped.iter().map(|s| s.to_vec()))?;
            artifacts.push(dest);
        }
    }
    let mut res = CommandResult::new("transform", payload).warn_if(map.warning.is_some() || warnings_of(&d));
    res.artifacts = artifacts;
    Ok(res)
}

pub struct SolutionOpts {
    pub t_blow: Option<f64>,
    pub speed: Option<f64>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub nr: usize,
    pub times: Vec<f64>,
}

fn build_solution(
    name: SolutionName,
    eq: &EqArgs,
    t_blow: Option<f64>,
    speed: Option<f64>,
) -> Result<ClosedFormSolution, CliError> {
    match name {
        SolutionName::Stationary => solutions::stationary_singular(&eq.descriptor()?).map_err(CliError::domain),
        SolutionName::ExplicitP1 => {
            let m = eq.require("m", eq.m)?;
            solutions::explicit_backward_p1(m, eq.sigma1.unwrap_or(0.0), t_blow).map_err(CliError::domain)
        }
        SolutionName::Explicit1d => {
            Err(CliError::Usage("explicit-1d is a profile; use `solution --name explicit-1d` without verify".into()))
        }
        SolutionName::Wave => {
            let d = eq.descriptor()?;
            let c = speed.ok_or_else(|| CliError::Usage("--c is required for the wave solution".into()))?;
            let red = solutions::WaveReduction::new(&d).map_err(CliError::domain)?;
            let wave = profiles::traveling_wave_solve(red.lambda, d.p, c, &WaveOptions::default())
                .map_err(CliError::domain)?;
            solutions::traveling_wave_composed(&d, &wave, c).map_err(CliError::domain)
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

pub fn solution(ctx: &Context, name: SolutionName, eq: &EqArgs, o: SolutionOpts) -> Result<CommandResult, CliError> {
    if let SolutionName::Explicit1d = name {
        let m = eq.require("m", eq.m)?;
        let prof = solutions::explicit_profile_1d(m).map_err(CliError::domain)?;
        let mut res = CommandResult::new("solution", to_value(&prof.meta()));
        if let Some(path) = out_path(ctx, "profile.csv") {
            write_csv(&path, &["xi", "f", "fprime"], prof.samples.iter().map(|s| vec![s.xi, s.f, s.fprime]))?;
            res.artifacts.push(path);
        }
        return Ok(res);
    }
    let sol = build_solution(name, eq, o.t_blow, o.speed)?;
    let mut payload = to_value(&sol.meta());
    let times = if o.times.is_empty() {
        match name {
            SolutionName::ExplicitP1 => vec![0.5 * o.t_blow.unwrap_or(1.0)],
            _ => vec![0.0],
        }
    } else {
        o.times.clone()
    };
    let r_min =
        o.r_min.unwrap_or(if sol.singular_at_origin || matches!(name, SolutionName::Stationary) { 0.1 } else { 0.0 });
    let r_max = o.r_max.unwrap_or_else(|| match sol.interface_radius(times[0]) {
        Some(r0) if r0.is_finite() => 1.2 * r0,
        _ => 10.0,
    });
    if !(r_max > r_min) {
        return Err(CliError::Usage("--r-max must exceed --r-min".into()));
    }
    let radii = linspace(r_min, r_max, o.nr);
    let mut rows = Vec::new();
    for &t in &times {
        for &r in &radii {
            rows.push(vec![r, t, sol.try_evaluate(r, t).map_err(CliError::domain)?]);
        }
    }
    let iface: Vec<Value> =
        times.iter().filter_map(|&t| sol.interface_radius(t).map(|r| json!({ "t": real(t), "r": real(r) }))).collect();
    let obj = payload.as_object_mut().unwrap();
    if !iface.is_empty() {
        obj.insert("interface".into(), Value::Array(iface));
    }
    obj.insert("samples".into(), json!(rows.len()));
    let mut res = CommandResult::new("solution", payload).warn_if(warnings_of(&sol.descriptor));
    if let Some(path) = out_path(ctx, "solution.csv") {
        write_csv(&path, &["r", "t", "u"], rows)?;
        res.artifacts.push(path);
    }
    Ok(res)
}

pub struct ProfileOpts {
    pub target: TargetArg,
    pub decay_rate: Option<f64>,
    pub eps: Option<f64>,
    pub xi_max: Option<f64>,
    pub param_min: Option<f64>,
    pub param_max: Option<f64>,
    pub scan_points: Option<usize>,
    pub t_blow: Option<f64>,
}

pub fn profile(
    ctx: &Context,
    eq: &EqArgs,
    form: FormArg,
    class: &str,
    o: ProfileOpts,
) -> Result<CommandResult, CliError> {
    let d = eq.descriptor()?;
    let class: BehaviorClass = class.parse().map_err(CliError::Usage)?;
    let kind = match form {
        FormArg::Forward => FormKind::Forward,
        FormArg::Backward => FormKind::Backward,
        FormArg::Exponential => FormKind::Exponential,
        FormArg::Separate => FormKind::SeparateVariable,
        FormArg::Stationary => FormKind::Stationary,
    };
    let mut f = eqmodel::self_similar_exponents(&d, kind).map_err(CliError::domain)?;
    if let Some(t) = o.t_blow {
        f = f.with_time(t).map_err(CliError::domain)?;
    }
    let target = match o.target {
        TargetArg::Compact => ShootTarget::CompactSupport,
        TargetArg::Bounded => ShootTarget::Bounded,
        TargetArg::Decay => ShootTarget::Decay {
            rate: o.decay_rate.ok_or_else(|| CliError::Usage("--decay-rate is required with --target decay".into()))?,
        },
    };
    let def = ShootOptions::default();
    let opts = ShootOptions {
        eps: o.eps.unwrap_or(def.eps),
        xi_max: o.xi_max.unwrap_or(def.xi_max),
        param_range: (o.param_min.unwrap_or(def.param_range.0), o.param_max.unwrap_or(def.param_range.1)),
        scan_points: o.scan_points.unwrap_or(def.scan_points),
        ..def
    };
    let prof = profiles::shoot(&d, &f, class, target, &opts).map_err(CliError::domain)?;
    let mut res = CommandResult::new("profile", to_value(&prof.meta())).warn_if(warnings_of(&d));
    if let Some(path) = out_path(ctx, "profile.csv") {
        write_csv(&path, &["xi", "f", "fprime"], prof.samples.iter().map(|s| vec![s.xi, s.f, s.fprime]))?;
        res.artifacts.push(path);
    }
    Ok(res)
}

/// Descriptor as written in run configs.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DescriptorSpec {
    m: f64,
    p: f64,
    #[serde(rename = "N", default = "one")]
    n: f64,
    #[serde(default)]
    sigma1: f64,
    #[serde(default)]
    sigma2: f64,
    #[serde(default)]
    family: Option<Family>,
    #[serde(default)]
    coeffs: BTreeMap<String, f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSpec {
    descriptor: DescriptorSpec,
    initial: InitialData,
    #[serde(default)]
    grid: GridConfig,
}

impl RunSpec {
    fn into_config(self) -> Result<RunConfig, CliError> {
        let s = self.descriptor;
        let descriptor = match s.family {
            Some(f) if f.is_log_radial() => EquationDescriptor::log_radial(f, s.m, s.p, s.coeffs),
            _ => {
                let mut d = eqmodel::validate(RawParameters::new(s.m, s.p, s.n, s.sigma1, s.sigma2))
                    .map_err(CliError::domain)?;
                d.coeffs = s.coeffs;
                d
            }
        };
        Ok(RunConfig { descriptor, initial: self.initial, grid: self.grid })
    }
}

fn read_runs(path: &Path, sweep: bool) -> Result<Vec<RunConfig>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let specs: Vec<RunSpec> = if sweep {
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
    } else {
        vec![serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?]
    };
    if specs.is_empty() {
        return Err(CliError::config("the sweep contains no runs"));
    }
    specs.into_iter().map(RunSpec::into_config).collect()
}

fn write_run(dir: &Path, gs: &pde::GridSolution, report: &Value) -> Result<Vec<PathBuf>, CliError> {
    let snaps = dir.join("snapshots.csv");
    let rows = gs.times.iter().zip(&gs.u).flat_map(|(&t, u)| gs.r.iter().zip(u).map(move |(&r, &v)| vec![r, t, v]));
    write_csv(&snaps, &["r", "t", "u"], rows)?;
    let hist = dir.join("history.csv");
    let mut header = vec!["t", "sup", "argmax"];
    header.extend(gs.norm_names.iter().map(String::as_str));
    let rows = gs.history.iter().map(|h| {
        let mut row = vec![h.t, h.sup, h.argmax];
        row.extend(&h.norms);
        row
    });
    write_csv(&hist, &header, rows)?;
    let rep = dir.join("report.json");
    write_json(&rep, report)?;
    Ok(vec![snaps, hist, rep])
}

fn run_report(rc: &RunConfig, gs: &pde::GridSolution, blow: &pde::BlowUpReport) -> Value {
    let (t_final, u) = gs.last();
    let sup = u.iter().fold(0.0f64, |a, &v| a.max(v));
    json!({
        "schema": wire::SCHEMA,
        "descriptor": to_value(&rc.descriptor),
        "initial": to_value(&rc.initial),
        "status": to_value(&gs.status),
        "steps": gs.steps,
        "clipped": gs.clipped,
        "t_final": real(t_final),
        "sup_final": real(sup),
        "nr": gs.r.len(),
        "snapshots": gs.times.len(),
        "history_records": gs.history.len(),
        "blowup": to_value(blow),
    })
}

pub fn simulate(ctx: &Context, config: &Path, sweep: bool) -> Result<CommandResult, CliError> {
    let runs = read_runs(config, sweep)?;
    let exec = if cfg!(feature = "parallel") { Execution::Parallel } else { Execution::Sequential };
    let results = if runs.len() == 1 {
        vec![pde::integrate(&runs[0].descriptor, |r| runs[0].initial.eval(r), &runs[0].grid)]
    } else {
        pde::sweep(&runs, exec)
    };
    let mut reports = Vec::new();
    let mut artifacts = Vec::new();
    let mut underflow = false;
    for (i, (rc, res)) in runs.iter().zip(results).enumerate() {
        let (gs, blow) = res.map_err(CliError::domain)?;
        underflow |= matches!(gs.status, RunStatus::StepUnderflow { .. });
        let report = run_report(rc, &gs, &blow);
        if let Some(dir) = &ctx.out {
            let sub = if sweep { dir.join(format!("run_{i:03}")) } else { dir.clone() };
            artifacts.extend(write_run(&sub, &gs, &report)?);
        }
        reports.push(report);
    }
    let payload = if sweep { json!({ "runs": reports }) } else { reports.pop().unwrap() };
    let mut res = CommandResult::new("simulate", payload).warn_if(underflow);
    res.artifacts = artifacts;
    Ok(res)
}

pub struct VerifyOpts {
    pub solution: Option<SolutionName>,
    pub samples: Option<PathBuf>,
    pub t_blow: Option<f64>,
    pub speed: Option<f64>,
    pub h: f64,
    pub ht: Option<f64>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub t: Option<f64>,
    pub points: usize,
    pub random: Option<usize>,
    pub one_sided: bool,
}

/// Radii, times and `u[t][r]` of a tensor-grid sample file.
type GridSamples = (Vec<f64>, Vec<f64>, Vec<Vec<f64>>);

fn read_grid_samples(path: &Path) -> Result<GridSamples, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| CliError::config(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::config(format!("missing column {name:?}")))
    };
    let (ir, it, iu) = (col("r")?, col("t")?, col("u")?);
    let mut table: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    let key = |v: f64| if v == 0.0 { 0.0f64.to_bits() } else { v.to_bits() };
    let (mut rs, mut ts) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::config(e.to_string()))?;
        let get = |i: usize| {
            rec.get(i)
                .and_then(wire::parse_real)
                .ok_or_else(|| CliError::config(format!("bad number in row {:?}", rec.position().map(|p| p.line()))))
        };
        let (r, t, u) = (get(ir)?, get(it)?, get(iu)?);
        rs.push(r);
        ts.push(t);
        table.insert((key(t), key(r)), u);
    }
    let uniq = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let (rs, ts) = (uniq(rs), uniq(ts));
    let mut u = Vec::with_capacity(ts.len());
    for &t in &ts {
        let row: Option<Vec<f64>> = rs.iter().map(|&r| table.get(&(key(t), key(r))).copied()).collect();
        u.push(row.ok_or_else(|| CliError::config("samples do not form a full r x t grid"))?);
    }
    Ok((rs, ts, u))
}

pub fn verify(ctx: &Context, eq: &EqArgs, o: VerifyOpts) -> Result<CommandResult, CliError> {
    if let Some(path) = &o.samples {
        let d = eq.descriptor()?;
        let (r, t, u) = read_grid_samples(path)?;
        let g = pde::grid_residual(&d, &r, &t, &u).map_err(CliError::domain)?;
        let payload = json!({
            "source": path.display().to_string(),
            "descriptor": to_value(&d),
            "order": 2,
            "max_residual": real(g.max),
            "rms_residual": real(g.rms),
            "points": g.points,
            "argmax": { "r": real(g.argmax.0), "t": real(g.argmax.1) },
            "scale": real(g.scale),
        });
        return Ok(CommandResult::new("verify", payload).warn_if(warnings_of(&d)));
    }
    let name = o.solution.ok_or_else(|| CliError::Usage("either --solution or --samples is required".into()))?;
    let sol = build_solution(name, eq, o.t_blow, o.speed)?;
    let t = o.t.unwrap_or(match name {
        SolutionName::ExplicitP1 => 0.5 * o.t_blow.unwrap_or(1.0),
        _ => 1.0,
    });
    let iface = sol.interface_radius(t);
    let (lo, hi) = match (name, iface) {
        (_, Some(r0)) if r0.is_finite() => (o.r_min.unwrap_or(0.3 * r0), o.r_max.unwrap_or(0.8 * r0)),
        _ => (o.r_min.unwrap_or(0.5), o.r_max.unwrap_or(5.0)),
    };
    if !(hi > lo) {
        return Err(CliError::Usage("--r-max must exceed --r-min".into()));
    }
    let pts: Vec<(f64, f64)> = match o.random {
        Some(k) => {
            let mut rng = StdRng::seed_from_u64(ctx.seed);
            (0..k).map(|_| (rng.gen_range(lo..=hi), t)).collect()
        }
        None => linspace(lo, hi, o.points.max(1)).into_iter().map(|r| (r, t)).collect(),
    };
    let s2 = sol.clone();
    let opts = ResidualOptions {
        h_r: o.h,
        h_t: o.ht.unwrap_or(o.h),
        one_sided: o.one_sided,
        interface: iface.map(|_| Arc::new(move |t: f64| s2.interface_radius(t).unwrap_or(f64::NAN)) as Arc<_>),
        ..Default::default()
    };
    let field: &dyn Field = &sol;
    let stats = pde::residual(&sol.descriptor, field, &pts, &opts).map_err(CliError::domain)?;
    let payload = json!({
        "solution": sol.name,
        "descriptor": to_value(&sol.descriptor),
        "t": real(t),
        "r_range": [real(lo), real(hi)],
        "points": pts.len(),
        "h_r": real(opts.h_r),
        "h_t": real(opts.h_t),
        "max_residual": real(stats.max),
        "rms_residual": real(stats.rms),
        "max_residual_half_step": real(stats.max_refined),
        "ratio": real(stats.ratio),
        "observed_order": real(stats.order),
    });
    Ok(CommandResult::new("verify", payload).warn_if(warnings_of(&sol.descriptor)))
}
