//! Adaptive Dormand-Prince 5(4) integrator with terminal events.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("StiffnessFailure: step size underflow at x = {x:e}")]
    StepUnderflow { x: f64 },
    #[error("StiffnessFailure: step budget exhausted at x = {x:e}")]
    MaxSteps { x: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step magnitude; estimated when `None`.
    pub h_init: Option<f64>,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options { rtol: 1e-11, atol: 1e-14, h_init: None, h_min: 1e-16, h_max: f64::INFINITY, max_steps: 200_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    /// Reached `x_end`.
    End,
    /// Event `i` changed sign from positive to non-positive.
    Event(usize),
}

#[derive(Debug, Clone)]
pub struct Trajectory<const D: usize> {
    pub xs: Vec<f64>,
    pub ys: Vec<[f64; D]>,
    pub dys: Vec<[f64; D]>,
    pub stop: Stop,
    /// Set when integration gave up before `x_end` or an event.
    pub failure: Option<OdeError>,
    pub rhs_evals: usize,
}

impl<const D: usize> Trajectory<D> {
    pub fn last(&self) -> (f64, [f64; D]) {
        (*self.xs.last().unwrap(), *self.ys.last().unwrap())
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn comb<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        *o += h * s;
    }
    out
}

fn finite<const D: usize>(v: &[f64; D]) -> bool {
    v.iter().all(|x| x.is_finite())
}

struct StepResult<const D: usize> {
    y: [f64; D],
    dy: [f64; D],
    err: [f64; D],
}

fn rk_step<const D: usize, F>(
    f: &F,
    x: f64,
    y: &[f64; D],
    k1: &[f64; D],
    h: f64,
    evals: &mut usize,
) -> Option<StepResult<D>>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    let k2 = f(x + C2 * h, &comb(y, h, &[(A21, k1)]));
    let k3 = f(x + C3 * h, &comb(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(x + C4 * h, &comb(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(x + C5 * h, &comb(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = f(x + h, &comb(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let ynew = comb(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    *evals += 6;
    if !finite(&ynew) {
        return None;
    }
    let k7 = f(x + h, &ynew);
    *evals += 1;
    if !finite(&k7) {
        return None;
    }
    let mut err = [0.0; D];
    for i in 0..D {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    Some(StepResult { y: ynew, dy: k7, err })
}

/// Integrate `y' = f(x, y)` from `x0` towards `x_end` (either direction).
///
/// Each event `g` is watched for a sign change from positive to
/// non-positive; the first to fire stops the integration at a point with
/// `g` still positive, located by bisection on the step size. A right-hand
/// side returning non-finite values rejects the step.
pub fn integrate<const D: usize, F, G>(
    f: F,
    x0: f64,
    y0: [f64; D],
    x_end: f64,
    opts: &Options,
    events: &[G],
) -> Result<Trajectory<D>, OdeError>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
    G: Fn(f64, &[f64; D]) -> f64,
{
    let traj = integrate_partial(f, x0, y0, x_end, opts, events);
    match traj.failure {
        Some(e) => Err(e),
        None => Ok(traj),
    }
}

/// Like [`integrate`], but a failure still returns the trajectory computed
/// so far, with `failure` set.
pub fn integrate_partial<const D: usize, F, G>(
    f: F,
    x0: f64,
    y0: [f64; D],
    x_end: f64,
    opts: &Options,
    events: &[G],
) -> Trajectory<D>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
    G: Fn(f64, &[f64; D]) -> f64,
{
    let dir = if x_end >= x0 { 1.0 } else { -1.0 };
    let span = (x_end - x0).abs();
    let mut evals = 1;
    let mut x = x0;
    let mut y = y0;
    let mut k1 = f(x, &y);
    let mut traj = Trajectory { xs: vec![x], ys: vec![y], dys: vec![k1], stop: Stop::End, failure: None, rhs_evals: 0 };
    if span == 0.0 {
        traj.rhs_evals = evals;
        return traj;
    }
    let mut gs: Vec<f64> = events.iter().map(|g| g(x, &y)).collect();

    let mut h = match opts.h_init {
        Some(h) => h,
        None => {
            let scale: f64 = (0..D).map(|i| y[i].abs() * opts.rtol + opts.atol).fold(f64::INFINITY, f64::min);
            let dn = k1.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let yn = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let guess = if dn > 0.0 { 0.01 * (yn.max(scale) / dn) } else { 1e-3 * span };
            guess.max(1e-6 * span)
        }
    }
    .min(opts.h_max)
    .min(span);

    for _ in 0..opts.max_steps {
        let remaining = (x_end - x) * dir;
        if remaining <= 1e-15 * span.max(x.abs()) {
            traj.rhs_evals = evals;
            return traj;
        }
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        let res = rk_step(&f, x, &y, &k1, dir * h, &mut evals);
        let accepted = match res {
            None => {
                h *= 0.25;
                None
            }
            Some(r) => {
                let mut norm = 0.0;
                for ((e, a), b) in r.err.iter().zip(y.iter()).zip(r.y.iter()) {
                    let sc = opts.atol + opts.rtol * a.abs().max(b.abs());
                    norm += (e / sc).powi(2);
                }
                let norm = (norm / D as f64).sqrt();
                if norm <= 1.0 {
                    let fac = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
                    Some((r, fac))
                } else {
                    h *= (0.9 * norm.powf(-0.2)).clamp(0.1, 0.9);
                    None
                }
            }
        };
        let Some((r, fac)) = accepted else {
            if h < opts.h_min * (1.0 + x.abs()) {
                traj.rhs_evals = evals;
                traj.failure = Some(OdeError::StepUnderflow { x });
                return traj;
            }
            continue;
        };
        let xn = if last { x_end } else { x + dir * h };
        let fired = events.iter().enumerate().find_map(|(i, g)| {
            let gn = g(xn, &r.y);
            (gs[i] > 0.0 && !(gn > 0.0)).then_some(i)
        });
        if let Some(i) = fired {
            let (xe, ye, dye) = locate_event(&f, &events[i], x, &y, &k1, dir * h, &mut evals);
            if xe != x {
                traj.xs.push(xe);
                traj.ys.push(ye);
                traj.dys.push(dye);
            }
            traj.stop = Stop::Event(i);
            traj.rhs_evals = evals;
            return traj;
        }
        for (i, g) in events.iter().enumerate() {
            gs[i] = g(xn, &r.y);
        }
        x = xn;
        y = r.y;
        k1 = r.dy;
        traj.xs.push(x);
        traj.ys.push(y);
        traj.dys.push(k1);
        h = (h * fac).min(opts.h_max);
    }
    traj.rhs_evals = evals;
    traj.failure = Some(OdeError::MaxSteps { x });
    traj
}

fn locate_event<const D: usize, F, G>(
    f: &F,
    g: &G,
    x: f64,
    y: &[f64; D],
    k1: &[f64; D],
    h: f64,
    evals: &mut usize,
) -> (f64, [f64; D], [f64; D])
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
    G: Fn(f64, &[f64; D]) -> f64,
{
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = (x, *y, *k1);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        match rk_step(f, x, y, k1, mid * h, evals) {
            Some(r) if g(x + mid * h, &r.y) > 0.0 => {
                lo = mid;
                best = (x + mid * h, r.y, r.dy);
            }
            _ => hi = mid,
        }
        if (hi - lo) * h.abs() <= 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    type Ev = fn(f64, &[f64; 2]) -> f64;

    #[test]
    fn harmonic_oscillator_accuracy() {
        let f = |_x: f64, y: &[f64; 2]| [y[1], -y[0]];
        let t = integrate(f, 0.0, [1.0, 0.0], 10.0, &Options::default(), &[] as &[Ev]).unwrap();
        let (x, y) = t.last();
        assert_eq!(x, 10.0);
        assert!((y[0] - 10f64.cos()).abs() < 1e-9);
        assert!((y[1] + 10f64.sin()).abs() < 1e-9);
        assert_eq!(t.stop, Stop::End);
    }

    #[test]
    fn backward_direction() {
        let f = |_x: f64, y: &[f64; 1]| [y[0]];
        let t = integrate(f, 0.0, [1.0], -3.0, &Options::default(), &[] as &[fn(f64, &[f64; 1]) -> f64]).unwrap();
        assert!((t.last().1[0] - (-3f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn event_is_located() {
        let f = |_x: f64, y: &[f64; 2]| [y[1], -y[0]];
        let ev: [Ev; 1] = [|_x, y| y[0]];
        let t = integrate(f, 0.0, [1.0, 0.0], 10.0, &Options::default(), &ev).unwrap();
        assert_eq!(t.stop, Stop::Event(0));
        let (x, y) = t.last();
        assert!((x - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(y[0] > 0.0);
    }

    #[test]
    fn nonfinite_rhs_is_rejected() {
        // y' = -1/(2 sqrt(y)) reaches 0 at x = 4/3 with infinite slope
        let f = |_x: f64, y: &[f64; 1]| [-0.5 / y[0].sqrt()];
        let ev = [|_x: f64, y: &[f64; 1]| y[0] - 1e-8];
        let t = integrate(f, 0.0, [1.0], 2.0, &Options::default(), &ev).unwrap();
        assert_eq!(t.stop, Stop::Event(0));
        assert!((t.last().0 - 4.0 / 3.0).abs() < 1e-7);
    }
}
