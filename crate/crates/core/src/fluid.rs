//! Fluid total mass `u(t)`, load classification and settling-time bounds.
//!
//! `u` solves `u' = lambda(t) - mu u`, i.e.
//! `u(t) = u(0) e^{-mu t} + int_0^t rho(s) mu e^{-mu (t - s)} ds`, in closed
//! form on every rate segment.

use serde::{Deserialize, Serialize};

use crate::arrival::{ArrivalRateFn, Shape};
use crate::scenario::{Scenario, ScenarioError};

/// Default slack for the strict inequalities of the load sandwich.
pub const DEFAULT_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct FluidSolution {
    lambda: ArrivalRateFn,
    mu: f64,
    /// `u` at the start of every segment.
    starts: Vec<f64>,
}

impl FluidSolution {
    pub fn new(lambda: ArrivalRateFn, mu: f64, u0: f64) -> Self {
        let mut starts = Vec::with_capacity(lambda.segments().len());
        let mut u = u0;
        for seg in lambda.segments() {
            starts.push(u);
            u = segment_value(seg.start, seg.end, &seg.shape, mu, u, seg.end);
        }
        Self { lambda, mu, starts }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lambda(&self) -> &ArrivalRateFn {
        &self.lambda
    }

    pub fn u0(&self) -> f64 {
        self.starts[0]
    }

    /// `u(t)` for `t` in the rate function's domain.
    pub fn eval(&self, t: f64) -> f64 {
        let segs = self.lambda.segments();
        let k = segs.partition_point(|s| s.start <= t).saturating_sub(1);
        let seg = &segs[k];
        segment_value(seg.start, seg.end, &seg.shape, self.mu, self.starts[k], t)
    }

    /// Offered load `rho(t) = lambda(t) / mu`.
    pub fn rho(&self, t: f64) -> f64 {
        self.lambda.rate(t) / self.mu
    }
}

fn segment_value(start: f64, end: f64, shape: &Shape, mu: f64, u_start: f64, t: f64) -> f64 {
    let x = t - start;
    let decay = (-mu * x).exp();
    match *shape {
        Shape::Constant { rate } => {
            let r = rate / mu;
            r + (u_start - r) * decay
        }
        Shape::Linear { from, to } => {
            let slope = (to - from) / (end - start);
            let p0 = from / mu - slope / (mu * mu);
            p0 + slope / mu * x + (u_start - p0) * decay
        }
        Shape::Sinusoid { base, amplitude, omega, phase } => {
            let denom = mu * mu + omega * omega;
            let p = |s: f64| {
                let arg = omega * s + phase;
                base / mu + amplitude * (mu * arg.sin() - omega * arg.cos()) / denom
            };
            p(t) + (u_start - p(start)) * decay
        }
    }
}

/// Fluid solution for a scenario, started from its initial total mass.
pub fn solve_u(scenario: &Scenario) -> Result<FluidSolution, ScenarioError> {
    let u0 = scenario.initial_occupancy()?.total_mass();
    Ok(FluidSolution::new(scenario.lambda.clone(), scenario.mu, u0))
}

/// Outcome of checking `m delta < rho_min <= rho_max < (m + 1) delta` on an interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum LoadClass {
    Bounded {
        m: u32,
        rho_min: f64,
        rho_max: f64,
    },
    /// The sandwich holds only up to the margin.
    Boundary {
        m: u32,
        rho_min: f64,
        rho_max: f64,
    },
    NotBounded {
        rho_min: f64,
        rho_max: f64,
    },
}

impl LoadClass {
    pub fn m(&self) -> Option<u32> {
        match *self {
            LoadClass::Bounded { m, .. } => Some(m),
            _ => None,
        }
    }

    pub fn range(&self) -> (f64, f64) {
        match *self {
            LoadClass::Bounded { rho_min, rho_max, .. }
            | LoadClass::Boundary { rho_min, rho_max, .. }
            | LoadClass::NotBounded { rho_min, rho_max } => (rho_min, rho_max),
        }
    }
}

/// Classifies the offered load on `[a, b]` from the exact rate extrema.
pub fn classify_interval(lambda: &ArrivalRateFn, mu: f64, a: f64, b: f64, delta: u32, margin: f64) -> LoadClass {
    let (lo, hi) = lambda.range_on(a, b);
    let (rho_min, rho_max) = (lo / mu, hi / mu);
    let d = delta as f64;
    // the only candidate m has m delta at or just below rho_min
    let m = ((rho_min + margin) / d).floor().max(0.0);
    let (lower, upper) = (m * d, (m + 1.0) * d);
    let m = m as u32;
    if rho_min - lower > margin && upper - rho_max > margin {
        LoadClass::Bounded { m, rho_min, rho_max }
    } else if rho_min - lower >= -margin && upper - rho_max >= -margin && rho_max - rho_min < d {
        LoadClass::Boundary { m, rho_min, rho_max }
    } else {
        LoadClass::NotBounded { rho_min, rho_max }
    }
}

/// `(1/mu) [log((u(a) - rho_max) / ((m + 1) delta - rho_max))]^+`, zero when `u(a) <= rho_max`.
pub fn sigma_bd(mu: f64, u_a: f64, rho_max: f64, m: u32, delta: u32) -> f64 {
    if u_a <= rho_max {
        return 0.0;
    }
    let top = (m as f64 + 1.0) * delta as f64;
    ((u_a - rho_max) / (top - rho_max)).ln().max(0.0) / mu
}

/// Settling bound `sigma(a, b, m, delta)`.
pub fn sigma(mu: f64, u_a: f64, rho_min: f64, rho_max: f64, m: u32, delta: u32) -> f64 {
    let low = m as f64 * delta as f64;
    (rho_min / (rho_min - low)).ln() / mu + sigma_bd(mu, u_a, rho_max, m, delta)
}

/// `u(t0) e^{-mu (t - t0)}`.
pub fn tail_envelope(fluid: &FluidSolution, t0: f64, t: f64) -> f64 {
    fluid.eval(t0) * (-fluid.mu * (t - t0)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Sandwich holds and the interval outlasts `sigma`.
    Certified,
    /// Knife edge: the sandwich or the length condition holds only with equality.
    Boundary,
    NotBounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundedIntervalCertificate {
    pub a: f64,
    pub b: f64,
    pub delta: u32,
    pub m: Option<u32>,
    pub rho_min: f64,
    pub rho_max: f64,
    pub u_a: f64,
    pub sigma: Option<f64>,
    pub sigma_bd: Option<f64>,
    pub verdict: Verdict,
}

impl BoundedIntervalCertificate {
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }
}

/// Checks whether the load is `(m, delta)`-bounded on `[a, b]`.
pub fn certify(fluid: &FluidSolution, a: f64, b: f64, delta: u32) -> BoundedIntervalCertificate {
    certify_with_margin(fluid, a, b, delta, DEFAULT_MARGIN)
}

pub fn certify_with_margin(
    fluid: &FluidSolution,
    a: f64,
    b: f64,
    delta: u32,
    margin: f64,
) -> BoundedIntervalCertificate {
    let class = classify_interval(&fluid.lambda, fluid.mu, a, b, delta, margin);
    let (rho_min, rho_max) = class.range();
    let u_a = fluid.eval(a);
    let mut cert = BoundedIntervalCertificate {
        a,
        b,
        delta,
        m: None,
        rho_min,
        rho_max,
        u_a,
        sigma: None,
        sigma_bd: None,
        verdict: Verdict::NotBounded,
    };
    let (m, sandwich_strict) = match class {
        LoadClass::Bounded { m, .. } => (m, true),
        LoadClass::Boundary { m, .. } => (m, false),
        LoadClass::NotBounded { .. } => return cert,
    };
    cert.m = Some(m);
    if sandwich_strict {
        let s = sigma(fluid.mu, u_a, rho_min, rho_max, m, delta);
        cert.sigma = Some(s);
        cert.sigma_bd = Some(sigma_bd(fluid.mu, u_a, rho_max, m, delta));
        let slack = (b - a) - s;
        cert.verdict = if slack > margin {
            Verdict::Certified
        } else if slack >= -margin {
            Verdict::Boundary
        } else {
            Verdict::NotBounded
        };
    } else {
        cert.verdict = Verdict::Boundary;
    }
    cert
}
