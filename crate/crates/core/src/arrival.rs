//! Piecewise arrival-rate functions with closed-form cumulative intensity.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    #[error("arrival rate needs at least one segment")]
    NoSegments,
    #[error("first segment must start at 0, starts at {0}")]
    BadStart(f64),
    #[error("segment {index} is empty or reversed: [{start}, {end}]")]
    BadBounds { index: usize, start: f64, end: f64 },
    #[error("segment {index} starts at {start} but previous ends at {prev_end}")]
    Gap { index: usize, start: f64, prev_end: f64 },
    #[error("segment {index} has a non-finite parameter")]
    NonFinite { index: usize },
    #[error("segment {index} goes negative (min rate {min})")]
    Negative { index: usize, min: f64 },
    #[error("segment {index}: sinusoid needs omega > 0")]
    BadOmega { index: usize },
    #[error("segment {index}: cumulative rate of this shape has no closed-form inverse")]
    NotInvertible { index: usize },
}

/// Rate profile of one segment. Sinusoids use absolute time: `base + amplitude * sin(omega * t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Constant {
        rate: f64,
    },
    /// Straight line from `from` at the segment start to `to` at its end.
    Linear {
        from: f64,
        to: f64,
    },
    Sinusoid {
        base: f64,
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    #[serde(flatten)]
    pub shape: Shape,
}

impl Segment {
    pub fn constant(start: f64, end: f64, rate: f64) -> Self {
        Self { start, end, shape: Shape::Constant { rate } }
    }

    pub fn linear(start: f64, end: f64, from: f64, to: f64) -> Self {
        Self { start, end, shape: Shape::Linear { from, to } }
    }

    pub fn sinusoid(start: f64, end: f64, base: f64, amplitude: f64, omega: f64, phase: f64) -> Self {
        Self { start, end, shape: Shape::Sinusoid { base, amplitude, omega, phase } }
    }

    pub fn rate(&self, t: f64) -> f64 {
        match self.shape {
            Shape::Constant { rate } => rate,
            Shape::Linear { from, to } => from + (to - from) * (t - self.start) / (self.end - self.start),
            Shape::Sinusoid { base, amplitude, omega, phase } => base + amplitude * (omega * t + phase).sin(),
        }
    }

    /// `int_start^t rate(s) ds`.
    pub fn integral_to(&self, t: f64) -> f64 {
        let x = t - self.start;
        match self.shape {
            Shape::Constant { rate } => rate * x,
            Shape::Linear { from, to } => {
                let slope = (to - from) / (self.end - self.start);
                from * x + 0.5 * slope * x * x
            }
            Shape::Sinusoid { base, amplitude, omega, phase } => {
                base * x - amplitude / omega * ((omega * t + phase).cos() - (omega * self.start + phase).cos())
            }
        }
    }

    /// Exact `(min, max)` of the rate over `[a, b]`, a sub-interval of the segment.
    pub fn range_on(&self, a: f64, b: f64) -> (f64, f64) {
        let (ra, rb) = (self.rate(a), self.rate(b));
        let (mut lo, mut hi) = (ra.min(rb), ra.max(rb));
        if let Shape::Sinusoid { base, amplitude, omega, phase } = self.shape {
            let (ta, tb) = (omega * a + phase, omega * b + phase);
            // sin = +1 at pi/2 + 2k pi, sin = -1 at 3pi/2 + 2k pi
            for (offset, sign) in [(FRAC_PI_2, 1.0), (FRAC_PI_2 + PI, -1.0)] {
                let k = ((ta - offset) / TAU).ceil();
                if offset + k * TAU <= tb {
                    let v = base + amplitude * sign;
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        (lo, hi)
    }

    fn params_finite(&self) -> bool {
        let p = match self.shape {
            Shape::Constant { rate } => vec![rate],
            Shape::Linear { from, to } => vec![from, to],
            Shape::Sinusoid { base, amplitude, omega, phase } => vec![base, amplitude, omega, phase],
        };
        p.into_iter().chain([self.start, self.end]).all(f64::is_finite)
    }

    /// Solves `integral_to(t) = mass` within the segment; `mass` must lie in `(0, integral_to(end)]`.
    fn invert(&self, mass: f64) -> Option<f64> {
        let len = self.end - self.start;
        let x = match self.shape {
            Shape::Constant { rate } => mass / rate,
            Shape::Linear { from, to } => {
                let slope = (to - from) / len;
                // stable root of slope/2 x^2 + from x - mass = 0
                2.0 * mass / (from + (from * from + 2.0 * slope * mass).max(0.0).sqrt())
            }
            Shape::Sinusoid { .. } => return None,
        };
        Some(self.start + x.clamp(0.0, len))
    }
}

/// Bounded non-negative arrival rate `lambda(t)` on `[0, end]`, stored as contiguous segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Segment>", into = "Vec<Segment>")]
pub struct ArrivalRateFn {
    segments: Vec<Segment>,
    /// `Lambda` at each segment start, plus the total at the end.
    cumulative: Vec<f64>,
    sup: f64,
}

impl ArrivalRateFn {
    pub fn new(segments: Vec<Segment>) -> Result<Self, RateError> {
        let first = segments.first().ok_or(RateError::NoSegments)?;
        if first.start != 0.0 {
            return Err(RateError::BadStart(first.start));
        }
        let mut cumulative = Vec::with_capacity(segments.len() + 1);
        cumulative.push(0.0);
        let mut sup = 0.0f64;
        for (index, seg) in segments.iter().enumerate() {
            if !seg.params_finite() {
                return Err(RateError::NonFinite { index });
            }
            if seg.end <= seg.start {
                return Err(RateError::BadBounds { index, start: seg.start, end: seg.end });
            }
            if index > 0 && segments[index - 1].end != seg.start {
                return Err(RateError::Gap { index, start: seg.start, prev_end: segments[index - 1].end });
            }
            if let Shape::Sinusoid { omega, .. } = seg.shape {
                if omega <= 0.0 {
                    return Err(RateError::BadOmega { index });
                }
            }
            let (min, max) = seg.range_on(seg.start, seg.end);
            if min < 0.0 {
                return Err(RateError::Negative { index, min });
            }
            sup = sup.max(max);
            let last = *cumulative.last().unwrap();
            cumulative.push(last + seg.integral_to(seg.end));
        }
        Ok(Self { segments, cumulative, sup })
    }

    pub fn constant(rate: f64, end: f64) -> Result<Self, RateError> {
        Self::new(vec![Segment::constant(0.0, end, rate)])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn end(&self) -> f64 {
        self.segments.last().unwrap().end
    }

    /// Segment boundaries, including `0` and the end.
    pub fn knots(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(0.0).chain(self.segments.iter().map(|s| s.end))
    }

    fn index_at(&self, t: f64) -> usize {
        self.segments.partition_point(|s| s.start <= t).saturating_sub(1)
    }

    /// `lambda(t)`; times past the end read the last segment.
    pub fn rate(&self, t: f64) -> f64 {
        self.segments[self.index_at(t)].rate(t)
    }

    /// `Lambda(t) = int_0^t lambda(s) ds`.
    pub fn cumulative(&self, t: f64) -> f64 {
        let k = self.index_at(t);
        self.cumulative[k] + self.segments[k].integral_to(t)
    }

    pub fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Upper bound `lambda_max`; exact supremum over the whole domain.
    pub fn sup(&self) -> f64 {
        self.sup
    }

    /// Exact `(inf, sup)` of `lambda` over `[a, b]` (clipped to the domain).
    /// Segments meeting `[a, b]` in a single point are ignored.
    pub fn range_on(&self, a: f64, b: f64) -> (f64, f64) {
        if a >= b {
            let r = self.rate(a);
            return (r, r);
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for seg in &self.segments {
            let (s, e) = (a.max(seg.start), b.min(seg.end));
            if s >= e {
                continue;
            }
            let (l, h) = seg.range_on(s, e);
            lo = lo.min(l);
            hi = hi.max(h);
        }
        (lo, hi)
    }

    /// True when every segment is constant or linear.
    pub fn is_invertible(&self) -> bool {
        self.first_non_invertible().is_none()
    }

    fn first_non_invertible(&self) -> Option<usize> {
        self.segments.iter().position(|s| matches!(s.shape, Shape::Sinusoid { .. }))
    }

    pub fn check_invertible(&self) -> Result<(), RateError> {
        match self.first_non_invertible() {
            Some(index) => Err(RateError::NotInvertible { index }),
            None => Ok(()),
        }
    }

    /// Smallest `t` with `Lambda(t) >= mass`, or `None` past the end of the domain.
    pub fn inverse_cumulative(&self, mass: f64) -> Result<Option<f64>, RateError> {
        if mass <= 0.0 {
            return Ok(Some(0.0));
        }
        if mass > self.total() {
            return Ok(None);
        }
        // first segment whose end mass reaches the target; it has positive mass
        let k = self.cumulative[1..].partition_point(|&c| c < mass);
        let seg = &self.segments[k];
        seg.invert(mass - self.cumulative[k]).map(Some).ok_or(RateError::NotInvertible { index: k })
    }
}

impl TryFrom<Vec<Segment>> for ArrivalRateFn {
    type Error = RateError;

    fn try_from(segments: Vec<Segment>) -> Result<Self, Self::Error> {
        Self::new(segments)
    }
}

impl From<ArrivalRateFn> for Vec<Segment> {
    fn from(f: ArrivalRateFn) -> Self {
        f.segments
    }
}
