//! Right-continuous cut-off barriers with left limits and explicit jumps.
//!
//! A [`Barrier`] maps `[0, T]` to finite values through sorted knots. The
//! value at a knot is the right value (cadlag convention); a knot may carry
//! an explicit left limit when the barrier jumps there. Piecewise-linear
//! interpolation runs from the right value at the left knot to the *left
//! limit* at the right knot, so a jump at the right knot is not smeared over
//! the interval.

use std::fmt::Write as _;

use thiserror::Error;

/// Interpolation rule between knots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Constant at the left knot's right value until the next knot.
    Constant,
    /// Linear from the left knot's right value to the right knot's left limit.
    Linear,
}

/// One barrier knot: right value at `t`, plus the left limit when it differs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub t: f64,
    /// Right value `b(t)`.
    pub value: f64,
    /// Explicit left limit `b(t-)` at a jump knot. Only meaningful with
    /// linear interpolation; under constant interpolation the left limit is
    /// the previous knot's value.
    pub left: Option<f64>,
}

impl Knot {
    pub fn new(t: f64, value: f64) -> Self {
        Self { t, value, left: None }
    }

    pub fn with_left(t: f64, value: f64, left: f64) -> Self {
        Self { t, value, left: Some(left) }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BarrierError {
    #[error("barrier needs at least two knots (origin and terminal)")]
    TooFewKnots,
    #[error("barrier knots must start at t=0, first knot at t={0}")]
    MissingOrigin(f64),
    #[error("knot times must be strictly increasing, violated at index {0}")]
    UnsortedKnots(usize),
    #[error("non-finite knot at index {0}")]
    NonFiniteKnot(usize),
    #[error("explicit left limit requires linear interpolation (knot index {0})")]
    LeftLimitNeedsLinear(usize),
    #[error("left limit on the origin knot is meaningless")]
    LeftLimitAtOrigin,
    #[error("time {t} outside barrier domain [0, {horizon}]")]
    OutOfRange { t: f64, horizon: f64 },
    #[error("barrier file parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Regular cadlag cut-off barrier on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Barrier {
    interpolation: Interpolation,
    knots: Vec<Knot>,
}

impl Barrier {
    /// Builds a barrier from sorted knots covering `[0, T]`.
    ///
    /// The first knot must sit at `t = 0`; the last knot's time is the
    /// horizon `T`. Duplicate or unsorted times are construction errors.
    pub fn new(interpolation: Interpolation, knots: Vec<Knot>) -> Result<Self, BarrierError> {
        if knots.len() < 2 {
            return Err(BarrierError::TooFewKnots);
        }
        if knots[0].t != 0.0 {
            return Err(BarrierError::MissingOrigin(knots[0].t));
        }
        if knots[0].left.is_some() {
            return Err(BarrierError::LeftLimitAtOrigin);
        }
        for (i, k) in knots.iter().enumerate() {
            if !k.t.is_finite() || !k.value.is_finite() || k.left.is_some_and(|l| !l.is_finite()) {
                return Err(BarrierError::NonFiniteKnot(i));
            }
            if i > 0 && k.t <= knots[i - 1].t {
                return Err(BarrierError::UnsortedKnots(i));
            }
            if k.left.is_some() && interpolation == Interpolation::Constant {
                return Err(BarrierError::LeftLimitNeedsLinear(i));
            }
        }
        Ok(Self { interpolation, knots })
    }

    /// Constant barrier at `value` on `[0, horizon]`.
    pub fn constant(value: f64, horizon: f64) -> Result<Self, BarrierError> {
        Self::new(
            Interpolation::Constant,
            vec![Knot::new(0.0, value), Knot::new(horizon, value)],
        )
    }

    /// Continuous piecewise-linear barrier through `(t, value)` nodes.
    pub fn piecewise_linear(nodes: &[(f64, f64)]) -> Result<Self, BarrierError> {
        Self::new(
            Interpolation::Linear,
            nodes.iter().map(|&(t, v)| Knot::new(t, v)).collect(),
        )
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn horizon(&self) -> f64 {
        self.knots.last().expect("nonempty").t
    }

    /// Index of the knot segment containing `t`: largest `i` with `t_i <= t`.
    fn segment(&self, t: f64) -> usize {
        match self.knots.binary_search_by(|k| k.t.partial_cmp(&t).expect("finite")) {
            Ok(i) => i,
            Err(i) => i - 1,
        }
    }

    /// Right-continuous value `b(t)`.
    pub fn eval(&self, t: f64) -> Result<f64, BarrierError> {
        let horizon = self.horizon();
        if !(0.0..=horizon).contains(&t) {
            return Err(BarrierError::OutOfRange { t, horizon });
        }
        let i = self.segment(t);
        let k = &self.knots[i];
        if t == k.t || i + 1 == self.knots.len() {
            return Ok(k.value);
        }
        match self.interpolation {
            Interpolation::Constant => Ok(k.value),
            Interpolation::Linear => {
                let next = &self.knots[i + 1];
                let end = next.left.unwrap_or(next.value);
                let w = (t - k.t) / (next.t - k.t);
                Ok(k.value + w * (end - k.value))
            }
        }
    }

    /// Left limit `b(t-)` for `t` in `(0, T]`.
    pub fn eval_left(&self, t: f64) -> Result<f64, BarrierError> {
        let horizon = self.horizon();
        if !(t > 0.0 && t <= horizon) {
            return Err(BarrierError::OutOfRange { t, horizon });
        }
        let i = self.segment(t);
        let k = &self.knots[i];
        if t > k.t {
            // Interior of a segment: left limit equals the value there.
            return self.eval(t);
        }
        // Exactly at knot i >= 1: approach from the previous segment.
        match self.interpolation {
            Interpolation::Constant => Ok(self.knots[i - 1].value),
            Interpolation::Linear => Ok(k.left.unwrap_or(k.value)),
        }
    }

    /// Knot times strictly inside `(t0, t1)`, ascending.
    pub fn knot_times_within(&self, t0: f64, t1: f64) -> Vec<f64> {
        self.knots
            .iter()
            .map(|k| k.t)
            .filter(|&t| t > t0 && t < t1)
            .collect()
    }

    /// Confirms knot ordering and finiteness (guaranteed by construction) and
    /// reports every jump with its signed size `b(t) - b(t-)`.
    pub fn validate_regular(&self) -> RegularityReport {
        let mut jumps = Vec::new();
        for k in &self.knots[1..] {
            let left = self.eval_left(k.t).expect("knot inside domain");
            if left != k.value {
                jumps.push(JumpInfo { t: k.t, size: k.value - left });
            }
        }
        let downward_jump_mass = jumps.iter().map(|j| (-j.size).max(0.0)).sum();
        RegularityReport { jumps, downward_jump_mass }
    }

    // -- plain-text file format ---------------------------------------------

    /// Serializes to the barrier file format:
    ///
    /// ```text
    /// interpolation=linear
    /// 0,1.0
    /// 0.5,2.0,1.25
    /// 1,2.0
    /// ```
    ///
    /// One `t,value[,left_value]` line per knot, the third field present only
    /// at explicit jump knots. CSV-compatible.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        let kind = match self.interpolation {
            Interpolation::Constant => "constant",
            Interpolation::Linear => "linear",
        };
        let _ = writeln!(out, "interpolation={kind}");
        for k in &self.knots {
            match k.left {
                Some(left) => {
                    let _ = writeln!(out, "{},{},{}", k.t, k.value, left);
                }
                None => {
                    let _ = writeln!(out, "{},{}", k.t, k.value);
                }
            }
        }
        out
    }

    /// Parses the format produced by [`Barrier::to_file_string`].
    pub fn from_file_str(text: &str) -> Result<Self, BarrierError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| BarrierError::Parse { line: 1, message: "empty file".into() })?;
        let interpolation = match header.trim() {
            "interpolation=constant" => Interpolation::Constant,
            "interpolation=linear" => Interpolation::Linear,
            other => {
                return Err(BarrierError::Parse {
                    line: 1,
                    message: format!("expected `interpolation=constant|linear`, got `{other}`"),
                })
            }
        };
        let mut knots = Vec::new();
        for (idx, raw) in lines {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(BarrierError::Parse {
                    line: line_no,
                    message: format!("expected `t,value[,left_value]`, got `{line}`"),
                });
            }
            let parse = |s: &str| -> Result<f64, BarrierError> {
                s.parse::<f64>().map_err(|e| BarrierError::Parse {
                    line: line_no,
                    message: format!("bad number `{s}`: {e}"),
                })
            };
            let t = parse(fields[0])?;
            let value = parse(fields[1])?;
            let left = if fields.len() == 3 { Some(parse(fields[2])?) } else { None };
            knots.push(Knot { t, value, left });
        }
        Self::new(interpolation, knots)
    }
}

/// One jump time with its signed size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpInfo {
    pub t: f64,
    /// `b(t) - b(t-)`; negative for downward jumps.
    pub size: f64,
}

/// Outcome of [`Barrier::validate_regular`].
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub jumps: Vec<JumpInfo>,
    /// Total downward jump mass, finite by construction.
    pub downward_jump_mass: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_barrier_evaluates_everywhere() {
        let b = Barrier::constant(1.5, 1.0).unwrap();
        for t in [0.0, 0.25, 0.999, 1.0] {
            assert_eq!(b.eval(t).unwrap(), 1.5);
        }
        assert!(matches!(b.eval(1.5), Err(BarrierError::OutOfRange { .. })));
        assert!(matches!(b.eval(-0.1), Err(BarrierError::OutOfRange { .. })));
    }

    #[test]
    fn piecewise_constant_jump_uses_right_value() {
        let b = Barrier::new(
            Interpolation::Constant,
            vec![Knot::new(0.0, 1.0), Knot::new(0.5, 2.0), Knot::new(1.0, 2.0)],
        )
        .unwrap();
        assert_eq!(b.eval(0.5).unwrap(), 2.0);
        assert_eq!(b.eval(0.49).unwrap(), 1.0);
        assert_eq!(b.eval_left(0.5).unwrap(), 1.0);
    }

    #[test]
    fn downward_jump_reported() {
        let b = Barrier::new(
            Interpolation::Constant,
            vec![Knot::new(0.0, 2.0), Knot::new(0.5, 1.0), Knot::new(1.0, 1.0)],
        )
        .unwrap();
        assert_eq!(b.eval_left(0.5).unwrap(), 2.0);
        let report = b.validate_regular();
        assert_eq!(report.jumps, vec![JumpInfo { t: 0.5, size: -1.0 }]);
        assert_eq!(report.downward_jump_mass, 1.0);
    }

    #[test]
    fn linear_jump_knot_keeps_segment_shape() {
        // Rises 1.0 -> 1.25 over [0, 0.5), jumps to 2.0 at 0.5.
        let b = Barrier::new(
            Interpolation::Linear,
            vec![
                Knot::new(0.0, 1.0),
                Knot::with_left(0.5, 2.0, 1.25),
                Knot::new(1.0, 2.0),
            ],
        )
        .unwrap();
        assert_eq!(b.eval(0.25).unwrap(), 1.125);
        assert_eq!(b.eval(0.5).unwrap(), 2.0);
        assert_eq!(b.eval_left(0.5).unwrap(), 1.25);
        assert_eq!(b.eval(0.75).unwrap(), 2.0);
        let report = b.validate_regular();
        assert_eq!(report.jumps, vec![JumpInfo { t: 0.5, size: 0.75 }]);
    }

    #[test]
    fn continuous_barrier_left_limit_equals_value() {
        let b = Barrier::piecewise_linear(&[(0.0, 0.0), (0.4, 1.0), (1.0, -0.5)]).unwrap();
        for t in [0.1, 0.4, 0.65, 1.0] {
            assert_eq!(b.eval_left(t).unwrap(), b.eval(t).unwrap());
        }
        assert!(b.validate_regular().jumps.is_empty());
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            Barrier::new(
                Interpolation::Constant,
                vec![Knot::new(0.0, 1.0), Knot::new(0.5, 2.0), Knot::new(0.5, 3.0)],
            ),
            Err(BarrierError::UnsortedKnots(2))
        ));
        assert!(matches!(
            Barrier::new(Interpolation::Constant, vec![Knot::new(0.1, 1.0), Knot::new(1.0, 1.0)]),
            Err(BarrierError::MissingOrigin(_))
        ));
        assert!(matches!(
            Barrier::new(
                Interpolation::Constant,
                vec![Knot::new(0.0, 1.0), Knot::with_left(0.5, 2.0, 1.5), Knot::new(1.0, 1.0)],
            ),
            Err(BarrierError::LeftLimitNeedsLinear(1))
        ));
    }

    #[test]
    fn right_continuity_at_knots() {
        let b = Barrier::new(
            Interpolation::Linear,
            vec![
                Knot::new(0.0, 0.0),
                Knot::with_left(0.3, -1.0, 0.6),
                Knot::new(1.0, 0.5),
            ],
        )
        .unwrap();
        for knot_t in [0.3_f64] {
            let at = b.eval(knot_t).unwrap();
            let mut eps = 1e-3;
            for _ in 0..6 {
                let right = b.eval(knot_t + eps).unwrap();
                assert!((right - at).abs() <= 3.0 * eps, "not right-continuous at {knot_t}");
                eps /= 10.0;
            }
        }
    }

    #[test]
    fn file_roundtrip_exact() {
        let b = Barrier::new(
            Interpolation::Linear,
            vec![
                Knot::new(0.0, 1.0),
                Knot::with_left(0.5, 2.0, 1.25),
                Knot::new(1.0, 2.0),
            ],
        )
        .unwrap();
        let text = b.to_file_string();
        let b2 = Barrier::from_file_str(&text).unwrap();
        assert_eq!(b, b2);
    }

    #[test]
    fn file_parse_errors_carry_line_numbers() {
        let err = Barrier::from_file_str("interpolation=linear\n0,1.0\nbad line\n").unwrap_err();
        match err {
            BarrierError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
        assert!(Barrier::from_file_str("interpolation=cubic\n0,1\n1,1\n").is_err());
    }
}
