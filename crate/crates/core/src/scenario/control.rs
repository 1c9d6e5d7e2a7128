//! Volatility controls selecting a scenario measure inside the band.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gspec::{GSpec, StepFunction};
use crate::rng::{path_rng, split_seed, PURPOSE_CONTROL};
use crate::scenario::TimeGrid;

/// State feedback `(t, B_t) -> sigma`.
pub trait FeedbackPolicy: Send + Sync {
    fn sigma(&self, t: f64, b: f64) -> f64;
    fn label(&self) -> String;
}

/// Closure-backed [`FeedbackPolicy`].
pub struct FnPolicy<F> {
    label: String,
    f: F,
}

impl<F> FnPolicy<F>
where
    F: Fn(f64, f64) -> f64 + Send + Sync,
{
    pub fn new(label: impl Into<String>, f: F) -> Self {
        Self {
            label: label.into(),
            f,
        }
    }
}

impl<F> FeedbackPolicy for FnPolicy<F>
where
    F: Fn(f64, f64) -> f64 + Send + Sync,
{
    fn sigma(&self, t: f64, b: f64) -> f64 {
        (self.f)(t, b)
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

/// A volatility process `h` with values in `[sigma_lo, sigma_hi]`.
///
/// All variants hold volatilities, not variances.
#[derive(Clone)]
pub enum VolControl {
    Constant(f64),
    /// Deterministic step function of time.
    PiecewiseDeterministic(StepFunction),
    /// `2n` equal blocks alternating `sigma_lo`, `sigma_hi`, starting low.
    AlternatingBlocks {
        n: usize,
    },
    Feedback(Arc<dyn FeedbackPolicy>),
    /// Regime switching: at each step, with probability `switch_prob`, redraw
    /// sigma uniformly in the band, otherwise keep it. The first step always
    /// draws. Randomness comes from a stream independent of the increments.
    RandomAdapted {
        seed: u64,
        switch_prob: f64,
    },
}

impl fmt::Debug for VolControl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl VolControl {
    pub fn feedback(policy: impl FeedbackPolicy + 'static) -> Self {
        VolControl::Feedback(Arc::new(policy))
    }

    /// Short descriptor, also accepted by [`VolControl::parse`] for the
    /// non-feedback variants.
    pub fn label(&self) -> String {
        match self {
            VolControl::Constant(s) => format!("const:{s}"),
            VolControl::PiecewiseDeterministic(f) => {
                let parts: Vec<String> = f
                    .breakpoints()
                    .iter()
                    .skip(1)
                    .zip(f.values())
                    .map(|(t, v)| format!("{v}@{t}"))
                    .collect();
                format!("piecewise:{}", parts.join(","))
            }
            VolControl::AlternatingBlocks { n } => format!("alt:{n}"),
            VolControl::Feedback(p) => format!("feedback:{}", p.label()),
            VolControl::RandomAdapted { seed, switch_prob } => {
                format!("random:{seed}:{switch_prob}")
            }
        }
    }

    /// Parses `const:sigma_hi`, `const:sigma_lo`, `const:<sigma>`, `alt:<n>`,
    /// `random:<seed>[:<p>]` and `piecewise:<v>@<t>,...`.
    pub fn parse(descriptor: &str, spec: &GSpec) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown control `{descriptor}`"));
        let (kind, rest) = descriptor.split_once(':').ok_or_else(bad)?;
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        match kind {
            "const" => Ok(VolControl::Constant(match rest {
                "sigma_hi" => spec.sigma_hi(),
                "sigma_lo" => spec.sigma_lo(),
                s => num(s)?,
            })),
            "alt" => Ok(VolControl::AlternatingBlocks {
                n: rest.parse().map_err(|_| bad())?,
            }),
            "random" => {
                let mut it = rest.split(':');
                let seed = it.next().unwrap_or("").parse().map_err(|_| bad())?;
                let switch_prob = match it.next() {
                    Some(p) => num(p)?,
                    None => 0.1,
                };
                Ok(VolControl::RandomAdapted { seed, switch_prob })
            }
            "piecewise" => {
                let mut breakpoints = vec![0.0];
                let mut values = Vec::new();
                for part in rest.split(',') {
                    let (v, t) = part.split_once('@').ok_or_else(bad)?;
                    values.push(num(v)?);
                    breakpoints.push(num(t)?);
                }
                Ok(VolControl::PiecewiseDeterministic(StepFunction::new(
                    breakpoints,
                    values,
                )?))
            }
            _ => Err(bad()),
        }
    }

    /// Static checks that do not need simulation.
    pub fn validate(&self, spec: &GSpec, grid: &TimeGrid) -> Result<()> {
        match self {
            VolControl::Constant(s) => spec.check_sigma(*s),
            VolControl::PiecewiseDeterministic(f) => {
                if (f.horizon() - grid.horizon()).abs() > 1e-9 * grid.horizon() {
                    return Err(Error::InvalidArgument(format!(
                        "piecewise control horizon {} differs from grid horizon {}",
                        f.horizon(),
                        grid.horizon()
                    )));
                }
                f.values().iter().try_for_each(|&s| spec.check_sigma(s))
            }
            VolControl::AlternatingBlocks { n } => {
                if *n == 0 || !grid.n_steps().is_multiple_of(2 * n) {
                    return Err(Error::InvalidArgument(format!(
                        "alternating control with {} blocks does not fit {} grid steps",
                        2 * n,
                        grid.n_steps()
                    )));
                }
                Ok(())
            }
            VolControl::Feedback(_) => Ok(()),
            VolControl::RandomAdapted { switch_prob, .. } => {
                if !(0.0..=1.0).contains(switch_prob) {
                    return Err(Error::InvalidArgument(format!(
                        "switch probability {switch_prob} outside [0, 1]"
                    )));
                }
                Ok(())
            }
        }
    }

    pub(crate) fn sampler(
        &self,
        spec: &GSpec,
        grid: &TimeGrid,
        bundle_seed: u64,
        path: u64,
    ) -> ControlSampler<'_> {
        let rng = match self {
            VolControl::RandomAdapted { seed, .. } => Some(path_rng(
                split_seed(bundle_seed, &[*seed]),
                path,
                PURPOSE_CONTROL,
            )),
            _ => None,
        };
        ControlSampler {
            control: self,
            grid: *grid,
            lo: spec.sigma_lo(),
            hi: spec.sigma_hi(),
            rng,
            current: spec.sigma_lo(),
        }
    }
}

/// Per-path evaluator of a control; called once per step before the
/// step's increment is drawn.
pub(crate) struct ControlSampler<'a> {
    control: &'a VolControl,
    grid: TimeGrid,
    lo: f64,
    hi: f64,
    rng: Option<ChaCha8Rng>,
    current: f64,
}

impl ControlSampler<'_> {
    /// Sigma for step `]t_i, t_{i+1}]` given the path value at `t_i`.
    pub(crate) fn next(&mut self, i: usize, b: f64) -> f64 {
        match self.control {
            VolControl::Constant(s) => *s,
            VolControl::PiecewiseDeterministic(f) => {
                f.eval(0.5 * (self.grid.time(i) + self.grid.time(i + 1)))
            }
            VolControl::AlternatingBlocks { n } => {
                let block = i * 2 * n / self.grid.n_steps();
                if block.is_multiple_of(2) {
                    self.lo
                } else {
                    self.hi
                }
            }
            VolControl::Feedback(p) => p.sigma(self.grid.time(i), b),
            VolControl::RandomAdapted { switch_prob, .. } => {
                let rng = self.rng.as_mut().expect("random control has a stream");
                if i == 0 || rng.random::<f64>() < *switch_prob {
                    let u: f64 = rng.random();
                    self.current = self.lo + (self.hi - self.lo) * u;
                }
                self.current
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_descriptors() {
        let spec = GSpec::new(1.0, 4.0).unwrap();
        match VolControl::parse("const:sigma_hi", &spec).unwrap() {
            VolControl::Constant(s) => assert_eq!(s, 2.0),
            other => panic!("{other:?}"),
        }
        assert_eq!(VolControl::parse("alt:4", &spec).unwrap().label(), "alt:4");
        assert_eq!(
            VolControl::parse("random:3", &spec).unwrap().label(),
            "random:3:0.1"
        );
        let pw = VolControl::parse("piecewise:1@0.5,2@1", &spec).unwrap();
        assert_eq!(pw.label(), "piecewise:1@0.5,2@1");
        assert!(VolControl::parse("bogus", &spec).is_err());
        assert!(VolControl::parse("const:x", &spec).is_err());
    }

    #[test]
    fn validation() {
        let spec = GSpec::new(1.0, 4.0).unwrap();
        let grid = TimeGrid::new(1.0, 12).unwrap();
        assert!(VolControl::Constant(2.5).validate(&spec, &grid).is_err());
        assert!(VolControl::Constant(0.5).validate(&spec, &grid).is_err());
        assert!(VolControl::Constant(1.5).validate(&spec, &grid).is_ok());
        assert!(VolControl::AlternatingBlocks { n: 3 }
            .validate(&spec, &grid)
            .is_ok());
        assert!(VolControl::AlternatingBlocks { n: 4 }
            .validate(&spec, &grid)
            .is_err());
        assert!(VolControl::RandomAdapted {
            seed: 1,
            switch_prob: 1.5
        }
        .validate(&spec, &grid)
        .is_err());
    }
}
