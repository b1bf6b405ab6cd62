//! Cubic B-spline basis on uniformly spaced knots.

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEGREE: usize = 3;

/// Non-zero basis values (and first derivatives) at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalBasis {
    /// Index of the first of the `DEGREE + 1` non-zero functions.
    pub first: usize,
    pub values: [f64; DEGREE + 1],
    pub derivs: [f64; DEGREE + 1],
}

impl LocalBasis {
    pub fn dot(&self, coefs: &[f64]) -> f64 {
        self.values.iter().zip(&coefs[self.first..]).map(|(v, b)| v * b).sum()
    }

    pub fn dot_deriv(&self, coefs: &[f64]) -> f64 {
        self.derivs.iter().zip(&coefs[self.first..]).map(|(v, b)| v * b).sum()
    }
}

/// B-spline basis over a run of calendar days.
///
/// Positions are measured in days from `start_date`. The first interior knot
/// sits on day 0, interior knots continue every `spacing` days until the last
/// data day is covered, and `extension` further knots are added on each side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBasis {
    start_date: NaiveDate,
    n_days: usize,
    spacing: f64,
    extension: usize,
    knots: Vec<f64>,
}

impl SplineBasis {
    pub fn new(start_date: NaiveDate, n_days: usize, spacing: usize, extension: usize) -> Result<Self> {
        if spacing == 0 {
            return Err(Error::Parameter("knot spacing must be positive".into()));
        }
        if n_days < 2 * spacing {
            return Err(Error::Parameter(format!(
                "a {n_days}-day range is shorter than two knot spacings ({} days)",
                2 * spacing
            )));
        }
        if extension < DEGREE {
            return Err(Error::Parameter(format!("need at least {DEGREE} extension knots, got {extension}")));
        }
        let last_day = (n_days - 1) as f64;
        let h = spacing as f64;
        let n_interior = ((last_day / h).ceil() as usize) + 1;
        let knots = (0..n_interior + 2 * extension)
            .map(|j| (j as f64 - extension as f64) * h)
            .collect();
        Ok(SplineBasis { start_date, n_days, spacing: h, extension, knots })
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_date
    }

    pub fn n_days(&self) -> usize {
        self.n_days
    }

    pub fn date_of(&self, day: usize) -> NaiveDate {
        self.start_date + Duration::days(day as i64)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn degree(&self) -> usize {
        DEGREE
    }

    pub fn n_basis(&self) -> usize {
        self.knots.len() - DEGREE - 1
    }

    /// Interval on which the basis is a partition of unity.
    pub fn domain(&self) -> (f64, f64) {
        (self.knots[self.extension], self.knots[self.knots.len() - 1 - self.extension])
    }

    fn check(&self, t: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        if !(t >= lo && t <= hi) {
            return Err(Error::Range(format!("t = {t} outside basis domain [{lo}, {hi}]")));
        }
        Ok(())
    }

    fn span(&self, t: f64) -> usize {
        let m = self.knots.len();
        let last = m - DEGREE - 2;
        let j = ((t - self.knots[0]) / self.spacing).floor() as isize;
        (j.max(DEGREE as isize) as usize).min(last)
    }

    /// Non-zero basis functions of degree `p` at `t` within `span`, de Boor's triangle.
    fn triangle(&self, span: usize, t: f64, p: usize, out: &mut [f64]) {
        let k = &self.knots;
        let mut left = [0.0; DEGREE + 1];
        let mut right = [0.0; DEGREE + 1];
        out[0] = 1.0;
        for j in 1..=p {
            left[j] = t - k[span + 1 - j];
            right[j] = k[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = out[r] / (right[r + 1] + left[j - r]);
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
    }

    /// Values and derivatives of the non-zero functions at `t` (days).
    pub fn local(&self, t: f64) -> Result<LocalBasis> {
        self.check(t)?;
        Ok(self.local_unchecked(t))
    }

    fn local_unchecked(&self, t: f64) -> LocalBasis {
        let span = self.span(t);
        let mut values = [0.0; DEGREE + 1];
        self.triangle(span, t, DEGREE, &mut values);
        let mut lower = [0.0; DEGREE + 1];
        self.triangle(span, t, DEGREE - 1, &mut lower);
        // lower[r] is B_{span-DEGREE+1+r, DEGREE-1}
        let first = span - DEGREE;
        let k = &self.knots;
        let p = DEGREE as f64;
        let mut derivs = [0.0; DEGREE + 1];
        for (r, d) in derivs.iter_mut().enumerate() {
            let i = first + r;
            let a = if r >= 1 { lower[r - 1] / (k[i + DEGREE] - k[i]) } else { 0.0 };
            let b = if r < DEGREE { lower[r] / (k[i + DEGREE + 1] - k[i + 1]) } else { 0.0 };
            *d = p * (a - b);
        }
        LocalBasis { first, values, derivs }
    }

    /// All `n_basis` values at `t`.
    pub fn values(&self, t: f64) -> Result<Vec<f64>> {
        let loc = self.local(t)?;
        let mut out = vec![0.0; self.n_basis()];
        out[loc.first..loc.first + DEGREE + 1].copy_from_slice(&loc.values);
        Ok(out)
    }

    /// All `n_basis` first derivatives at `t`.
    pub fn derivatives(&self, t: f64) -> Result<Vec<f64>> {
        let loc = self.local(t)?;
        let mut out = vec![0.0; self.n_basis()];
        out[loc.first..loc.first + DEGREE + 1].copy_from_slice(&loc.derivs);
        Ok(out)
    }

    /// Local basis at each data day `0..n_days`.
    pub fn daily_design(&self) -> Vec<LocalBasis> {
        (0..self.n_days).map(|d| self.local_unchecked(d as f64)).collect()
    }

    /// `s(t) = sum_i b_i B_i(t)`.
    pub fn evaluate(&self, coefs: &[f64], t: f64) -> Result<f64> {
        Ok(self.local(t)?.dot(coefs))
    }

    /// `ds/dt` at `t`.
    pub fn evaluate_deriv(&self, coefs: &[f64], t: f64) -> Result<f64> {
        Ok(self.local(t)?.dot_deriv(coefs))
    }
}

/// Basis with the default layout: knots five days apart, three extra knots each side.
pub fn build_basis(start_date: NaiveDate, n_days: usize) -> Result<SplineBasis> {
    SplineBasis::new(start_date, n_days, 5, 3)
}
