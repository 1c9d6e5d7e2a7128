//! The volatility band, its generator `G`, and deterministic step functions.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used when checking that an emitted volatility lies in the band.
pub(crate) const BAND_SLACK: f64 = 1e-12;

/// Volatility band `[sigma_lo^2, sigma_hi^2]` of a one-dimensional G-expectation.
///
/// Stored as variances because every formula downstream is written in
/// squared parameters; standard deviations are derived accessors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GSpec {
    sigma_lo_sq: f64,
    sigma_hi_sq: f64,
}

impl GSpec {
    /// Builds a band, requiring `0 < sigma_lo_sq < sigma_hi_sq`.
    pub fn new(sigma_lo_sq: f64, sigma_hi_sq: f64) -> Result<Self> {
        if !sigma_lo_sq.is_finite() || !sigma_hi_sq.is_finite() {
            return Err(Error::InvalidSpec("variances must be finite".into()));
        }
        if sigma_lo_sq <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "sigma_lo_sq = {sigma_lo_sq} must be positive"
            )));
        }
        if sigma_lo_sq >= sigma_hi_sq {
            return Err(Error::InvalidSpec(format!(
                "sigma_lo_sq = {sigma_lo_sq} must be strictly below sigma_hi_sq = {sigma_hi_sq}"
            )));
        }
        Ok(Self {
            sigma_lo_sq,
            sigma_hi_sq,
        })
    }

    pub fn sigma_lo_sq(&self) -> f64 {
        self.sigma_lo_sq
    }

    pub fn sigma_hi_sq(&self) -> f64 {
        self.sigma_hi_sq
    }

    pub fn sigma_lo(&self) -> f64 {
        self.sigma_lo_sq.sqrt()
    }

    pub fn sigma_hi(&self) -> f64 {
        self.sigma_hi_sq.sqrt()
    }

    /// `sigma_hi^2 - sigma_lo^2`.
    pub fn spread(&self) -> f64 {
        self.sigma_hi_sq - self.sigma_lo_sq
    }

    /// `G(a) = (sigma_hi^2 a^+ - sigma_lo^2 a^-) / 2`.
    pub fn g(&self, a: f64) -> f64 {
        0.5 * (self.sigma_hi_sq * a.max(0.0) - self.sigma_lo_sq * (-a).max(0.0))
    }

    /// Whether a volatility (not a variance) lies in `[sigma_lo, sigma_hi]`.
    pub fn admits_sigma(&self, sigma: f64) -> bool {
        let lo = self.sigma_lo();
        let hi = self.sigma_hi();
        sigma.is_finite() && sigma >= lo * (1.0 - BAND_SLACK) && sigma <= hi * (1.0 + BAND_SLACK)
    }

    pub(crate) fn check_sigma(&self, sigma: f64) -> Result<()> {
        if self.admits_sigma(sigma) {
            Ok(())
        } else {
            Err(Error::ControlOutOfBand {
                sigma,
                lo: self.sigma_lo(),
                hi: self.sigma_hi(),
            })
        }
    }
}

/// Free-function form of [`GSpec::g`].
pub fn g_function(a: f64, spec: &GSpec) -> f64 {
    spec.g(a)
}

/// Piecewise-linear envelope `C(a) = c_hi a^+ - c_lo a^-` for rates `c_lo <= c_hi`.
pub fn envelope_c(a: f64, c_hi: f64, c_lo: f64) -> Result<f64> {
    if c_lo > c_hi {
        return Err(Error::InvalidArgument(format!(
            "envelope needs c_lo <= c_hi, got c_lo = {c_lo}, c_hi = {c_hi}"
        )));
    }
    Ok(c_hi * a.max(0.0) - c_lo * (-a).max(0.0))
}

/// Deterministic step function on `[0, T]`, constant on each `]t_k, t_{k+1}]`.
///
/// The value at `t = 0` is the value of the first interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || breakpoints.len() != values.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "step function needs one more breakpoint than values (got {} and {})",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidArgument(
                "step function breakpoints must start at 0".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "step function breakpoints must be strictly increasing".into(),
            ));
        }
        if breakpoints.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "step function entries must be finite".into(),
            ));
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }

    pub fn constant(horizon: f64, value: f64) -> Result<Self> {
        Self::new(vec![0.0, horizon], vec![value])
    }

    /// `n` equal blocks on `[0, horizon]` with the given values.
    pub fn uniform_blocks(horizon: f64, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        let breakpoints = (0..=n).map(|k| horizon * k as f64 / n as f64).collect();
        Self::new(breakpoints, values)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn horizon(&self) -> f64 {
        *self.breakpoints.last().expect("non-empty")
    }

    /// Value at `t`; times at or before 0 take the first value, times past
    /// the horizon take the last one.
    pub fn eval(&self, t: f64) -> f64 {
        // first breakpoint >= t closes the interval that contains t
        let idx = self.breakpoints.partition_point(|&b| b < t);
        let k = idx.saturating_sub(1).min(self.values.len() - 1);
        self.values[k]
    }

    /// Exact Lebesgue integral over `[0, T]`.
    pub fn integral(&self) -> f64 {
        self.integral_of(|v| v)
    }

    /// `∫ f(a(s)) ds` over `[0, T]`.
    pub fn integral_of(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.values
            .iter()
            .zip(self.breakpoints.windows(2))
            .map(|(&v, w)| f(v) * (w[1] - w[0]))
            .sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Two-column CSV `t,value`; row `k` holds `(t_k, a_k)` and a final row
    /// holds the horizon with an empty value.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "value"])?;
        for (t, v) in self.breakpoints.iter().zip(&self.values) {
            w.write_record([t.to_string(), v.to_string()])?;
        }
        w.write_record([self.horizon().to_string(), String::new()])?;
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut breakpoints = Vec::new();
        let mut values = Vec::new();
        let mut closed = false;
        for record in r.records() {
            let record = record?;
            if closed {
                return Err(Error::Format("rows after the horizon row".into()));
            }
            let t = parse_f64(record.get(0).unwrap_or(""))?;
            breakpoints.push(t);
            match record.get(1).unwrap_or("") {
                "" => closed = true,
                v => values.push(parse_f64(v)?),
            }
        }
        if !closed {
            return Err(Error::Format("missing horizon row".into()));
        }
        Self::new(breakpoints, values)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("not a number: `{s}`")))
}

/// Alternating `±1` oscillator on `n` equal blocks, starting with `+1`.
pub fn oscillator(n: usize, horizon: f64) -> Result<StepFunction> {
    if n == 0 {
        return Err(Error::InvalidArgument("oscillator needs n >= 1".into()));
    }
    let values = (0..n)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    StepFunction::uniform_blocks(horizon, values)
}
