//! Named payoff catalog shared by the PDE oracle, the estimators and the CLI.

use std::fmt;

use crate::error::{Error, Result};

/// Payoff `φ: R -> R` from a small symbolic catalog.
#[derive(Clone, Debug, PartialEq)]
pub enum Payoff {
    /// `sum_k c_k x^k`.
    Poly(Vec<f64>),
    Abs,
    /// `(x - k)^+`.
    Call(f64),
    /// `(k - x)^+`.
    Put(f64),
    /// Linear interpolation through the knots, extrapolated with the end slopes.
    PiecewiseLinear {
        knots: Vec<f64>,
        values: Vec<f64>,
    },
    /// `c φ(x)`.
    Scaled(f64, Box<Payoff>),
    /// `φ(a x)`.
    Dilated(f64, Box<Payoff>),
    Sum(Vec<Payoff>),
}

impl Payoff {
    pub fn monomial(degree: usize, coefficient: f64) -> Self {
        let mut c = vec![0.0; degree + 1];
        c[degree] = coefficient;
        Payoff::Poly(c)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Payoff::Poly(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck),
            Payoff::Abs => x.abs(),
            Payoff::Call(k) => (x - k).max(0.0),
            Payoff::Put(k) => (k - x).max(0.0),
            Payoff::PiecewiseLinear { knots, values } => piecewise_linear(knots, values, x),
            Payoff::Scaled(c, inner) => c * inner.eval(x),
            Payoff::Dilated(a, inner) => inner.eval(a * x),
            Payoff::Sum(parts) => parts.iter().map(|p| p.eval(x)).sum(),
        }
    }

    /// `φ(a x)`.
    pub fn dilate(self, a: f64) -> Self {
        Payoff::Dilated(a, Box::new(self))
    }

    /// Parses a catalog name:
    /// `x`, `x2`, `x4`, `neg_x2`, `abs`, `abs_minus_x2`, `call:K`, `put:K`,
    /// `poly:c0,c1,...`, `pwl:x0:y0,x1:y1,...`, `dilate:A:<name>`,
    /// `scale:C:<name>`.
    pub fn parse(name: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown payoff `{name}`"));
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        Ok(match name {
            "x" => Payoff::monomial(1, 1.0),
            "x2" => Payoff::monomial(2, 1.0),
            "x4" => Payoff::monomial(4, 1.0),
            "neg_x2" => Payoff::monomial(2, -1.0),
            "abs" => Payoff::Abs,
            "abs_minus_x2" => Payoff::Sum(vec![Payoff::Abs, Payoff::monomial(2, -1.0)]),
            _ => {
                let (kind, rest) = name.split_once(':').ok_or_else(bad)?;
                match kind {
                    "call" => Payoff::Call(num(rest)?),
                    "put" => Payoff::Put(num(rest)?),
                    "poly" => Payoff::Poly(rest.split(',').map(num).collect::<Result<_>>()?),
                    "pwl" => {
                        let mut knots = Vec::new();
                        let mut values = Vec::new();
                        for pair in rest.split(',') {
                            let (x, y) = pair.split_once(':').ok_or_else(bad)?;
                            knots.push(num(x)?);
                            values.push(num(y)?);
                        }
                        if knots.len() < 2 || knots.windows(2).any(|w| w[1] <= w[0]) {
                            return Err(bad());
                        }
                        Payoff::PiecewiseLinear { knots, values }
                    }
                    "dilate" | "scale" => {
                        let (a, inner) = rest.split_once(':').ok_or_else(bad)?;
                        let inner = Box::new(Payoff::parse(inner)?);
                        if kind == "dilate" {
                            Payoff::Dilated(num(a)?, inner)
                        } else {
                            Payoff::Scaled(num(a)?, inner)
                        }
                    }
                    _ => return Err(bad()),
                }
            }
        })
    }

    /// Payoffs exercised by the duality checks.
    pub fn catalog() -> Vec<(&'static str, Payoff)> {
        ["x", "x2", "neg_x2", "x4", "abs", "abs_minus_x2"]
            .into_iter()
            .map(|n| (n, Payoff::parse(n).expect("catalog names parse")))
            .collect()
    }
}

fn piecewise_linear(knots: &[f64], values: &[f64], x: f64) -> f64 {
    let n = knots.len();
    let k = knots.partition_point(|&t| t <= x).clamp(1, n - 1);
    let (x0, x1, y0, y1) = (knots[k - 1], knots[k], values[k - 1], values[k]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

impl fmt::Display for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payoff::Poly(c) => {
                let parts: Vec<String> = c.iter().map(|x| x.to_string()).collect();
                write!(f, "poly:{}", parts.join(","))
            }
            Payoff::Abs => f.write_str("abs"),
            Payoff::Call(k) => write!(f, "call:{k}"),
            Payoff::Put(k) => write!(f, "put:{k}"),
            Payoff::PiecewiseLinear { knots, values } => {
                let parts: Vec<String> = knots
                    .iter()
                    .zip(values)
                    .map(|(x, y)| format!("{x}:{y}"))
                    .collect();
                write!(f, "pwl:{}", parts.join(","))
            }
            Payoff::Scaled(c, inner) => write!(f, "scale:{c}:{inner}"),
            Payoff::Dilated(a, inner) => write!(f, "dilate:{a}:{inner}"),
            Payoff::Sum(parts) => {
                let parts: Vec<String> = parts.iter().map(|p| p.to_string()).collect();
                write!(f, "sum({})", parts.join(" + "))
            }
        }
    }
}
