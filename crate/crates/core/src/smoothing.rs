//! Randomized smoothing: the two-point gradient estimator and closed forms for
//! one-dimensional piecewise-linear costs.
//!
//! For a function `h` and radius `eta`, the smoothed function is
//! `h_eta(x) = E[h(x + u)]` with `u` uniform on the ball of radius `eta`. In one
//! dimension this is the interval average `(1 / 2 eta) * int_{x - eta}^{x + eta} h`,
//! whose derivative is `(h(x + eta) - h(x - eta)) / (2 eta)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::games::NonsmoothGame;
use crate::rng::RandomStream;

/// Continuous piecewise-linear function of one variable.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PiecewiseLinear1D {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
    /// Value at each breakpoint; when there are none, the value at `origin`.
    knot_values: Vec<f64>,
    origin: f64,
}

impl PiecewiseLinear1D {
    /// Builds the function with the given strictly increasing breakpoints, one more slope
    /// than breakpoints, and the value `anchor_value` at `anchor_x`.
    pub fn new(breakpoints: Vec<f64>, slopes: Vec<f64>, anchor_x: f64, anchor_value: f64) -> Result<Self> {
        if slopes.len() != breakpoints.len() + 1 {
            return Err(Error::Dimension {
                expected: breakpoints.len() + 1,
                got: slopes.len(),
            });
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("breakpoints", "must be strictly increasing"));
        }
        if breakpoints.iter().chain(&slopes).any(|v| !v.is_finite()) {
            return Err(Error::invalid("breakpoints", "values must be finite"));
        }
        let (knot_values, origin) = if breakpoints.is_empty() {
            (vec![anchor_value], anchor_x)
        } else {
            let mut kv = vec![0.0; breakpoints.len()];
            for j in 1..breakpoints.len() {
                kv[j] = kv[j - 1] + slopes[j] * (breakpoints[j] - breakpoints[j - 1]);
            }
            let mut f = Self {
                breakpoints: breakpoints.clone(),
                slopes: slopes.clone(),
                knot_values: kv,
                origin: 0.0,
            };
            let shift = anchor_value - f.eval(anchor_x);
            for v in &mut f.knot_values {
                *v += shift;
            }
            (f.knot_values, 0.0)
        };
        Ok(Self {
            breakpoints,
            slopes,
            knot_values,
            origin,
        })
    }

    /// Linear function `slope * x`.
    pub fn linear(slope: f64) -> Self {
        Self {
            breakpoints: Vec::new(),
            slopes: vec![slope],
            knot_values: vec![0.0],
            origin: 0.0,
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// `c * f`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            slopes: self.slopes.iter().map(|s| c * s).collect(),
            knot_values: self.knot_values.iter().map(|v| c * v).collect(),
            origin: self.origin,
        }
    }

    /// Largest absolute slope, i.e. the Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        self.slopes.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    #[inline]
    fn segment(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|b| *b <= x)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if self.breakpoints.is_empty() {
            return self.knot_values[0] + self.slopes[0] * (x - self.origin);
        }
        let j = self.segment(x);
        if j == 0 {
            self.knot_values[0] + self.slopes[0] * (x - self.breakpoints[0])
        } else {
            self.knot_values[j - 1] + self.slopes[j] * (x - self.breakpoints[j - 1])
        }
    }

    /// Exact integral over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if a > b {
            return -self.integral(b, a);
        }
        let mut total = 0.0;
        let mut left = a;
        for &bp in self.breakpoints.iter().filter(|bp| **bp > a && **bp < b) {
            total += 0.5 * (self.eval(left) + self.eval(bp)) * (bp - left);
            left = bp;
        }
        total + 0.5 * (self.eval(left) + self.eval(b)) * (b - left)
    }

    /// Clarke subdifferential at `x` as an interval.
    pub fn clarke_interval(&self, x: f64) -> (f64, f64) {
        match self.breakpoints.iter().position(|b| *b == x) {
            Some(j) => {
                let (a, b) = (self.slopes[j], self.slopes[j + 1]);
                (a.min(b), a.max(b))
            }
            None => {
                let s = self.slopes[self.segment(x)];
                (s, s)
            }
        }
    }

    /// Hull of the slopes of all segments meeting `[x - eta, x + eta]`. This is the
    /// delta-Clarke subdifferential with `delta = eta`.
    pub fn delta_clarke_interval(&self, x: f64, eta: f64) -> (f64, f64) {
        let (lo_x, hi_x) = (x - eta, x + eta);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (j, s) in self.slopes.iter().enumerate() {
            let seg_lo = if j == 0 { f64::NEG_INFINITY } else { self.breakpoints[j - 1] };
            let seg_hi = self.breakpoints.get(j).copied().unwrap_or(f64::INFINITY);
            if seg_lo <= hi_x && seg_hi >= lo_x {
                lo = lo.min(*s);
                hi = hi.max(*s);
            }
        }
        (lo, hi)
    }
}

/// Closed-form smoothing of a one-dimensional piecewise-linear function.
#[derive(Clone, Copy, Debug)]
pub struct Smoothed1D<'a> {
    f: &'a PiecewiseLinear1D,
    eta: f64,
}

/// Smoothing of `f` with radius `eta > 0`.
pub fn smooth_1d_closed_form(f: &PiecewiseLinear1D, eta: f64) -> Result<Smoothed1D<'_>> {
    check_eta(eta)?;
    Ok(Smoothed1D { f, eta })
}

impl Smoothed1D<'_> {
    pub fn value(&self, x: f64) -> f64 {
        self.f.integral(x - self.eta, x + self.eta) / (2.0 * self.eta)
    }

    pub fn grad(&self, x: f64) -> f64 {
        (self.f.eval(x + self.eta) - self.f.eval(x - self.eta)) / (2.0 * self.eta)
    }
}

/// Interval average of an arbitrary one-dimensional function by composite
/// Gauss-Legendre quadrature.
pub fn interval_average(f: impl Fn(f64) -> f64, x: f64, eta: f64) -> f64 {
    const NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let panels = 64;
    let h = 2.0 * eta / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = x - eta + (p as f64 + 0.5) * h;
        for (n, w) in NODES.iter().zip(WEIGHTS) {
            total += w * f(mid + 0.5 * h * n);
        }
    }
    total * 0.5 * h / (2.0 * eta)
}

/// One-sided Hausdorff deviation of `[a1, a2]` from `[b1, b2]`: the largest distance
/// from a point of the first interval to the second.
pub fn interval_deviation(a: (f64, f64), b: (f64, f64)) -> f64 {
    (b.0 - a.0).max(a.1 - b.1).max(0.0)
}

/// Deviation of the delta-Clarke set with `delta = eta` from the Clarke set at `x`.
pub fn deviation_bound(f: &PiecewiseLinear1D, x: f64, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    Ok(interval_deviation(f.delta_clarke_interval(x, eta), f.clarke_interval(x)))
}

/// Distance of the smoothed gradient at `x` from the delta-Clarke interval.
pub fn inclusion_gap(f: &PiecewiseLinear1D, x: f64, eta: f64) -> Result<f64> {
    let g = smooth_1d_closed_form(f, eta)?.grad(x);
    Ok(interval_deviation((g, g), f.delta_clarke_interval(x, eta)))
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::invalid("eta", format!("smoothing radius {eta} must be positive")));
    }
    Ok(())
}

/// One draw of the two-point estimator.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoPointEstimate {
    pub gradient: Vec<f64>,
    pub direction: Vec<f64>,
    pub value_plus: f64,
    pub value_minus: f64,
}

/// Core of the two-point estimator: given a direction `v` on the sphere of radius
/// `eta` and the two function values, adds `(n / 2 eta) (f+ - f-) v / |v|` to `acc`.
#[inline]
pub fn accumulate_two_point(direction: &[f64], eta: f64, value_plus: f64, value_minus: f64, acc: &mut [f64]) {
    let n = direction.len() as f64;
    let norm = crate::sets::norm(direction);
    let coef = n / (2.0 * eta) * (value_plus - value_minus) / norm;
    for (a, v) in acc.iter_mut().zip(direction) {
        *a += coef * v;
    }
}

/// Draws one two-point estimate of the smoothed gradient of player `i`'s nonsmooth cost
/// at `x_i`. The noise is drawn first, then the direction, both from `stream`; the same
/// noise is used at both evaluation points.
pub fn two_point_gradient<G: NonsmoothGame>(
    game: &G,
    i: usize,
    x_i: &[f64],
    eta: f64,
    stream: &mut RandomStream,
) -> Result<TwoPointEstimate> {
    check_eta(eta)?;
    let players = game.players();
    if i >= players.count() {
        return Err(Error::PlayerIndex {
            index: i,
            players: players.count(),
        });
    }
    if x_i.len() != players.dim(i) {
        return Err(Error::Dimension {
            expected: players.dim(i),
            got: x_i.len(),
        });
    }
    let xi = game.sample_noise(stream);
    let mut direction = vec![0.0; x_i.len()];
    stream.sphere_into(eta, &mut direction);
    let plus: Vec<f64> = x_i.iter().zip(&direction).map(|(a, v)| a + v).collect();
    let minus: Vec<f64> = x_i.iter().zip(&direction).map(|(a, v)| a - v).collect();
    let value_plus = game.h_value(i, &plus, &xi);
    let value_minus = game.h_value(i, &minus, &xi);
    let mut gradient = vec![0.0; x_i.len()];
    accumulate_two_point(&direction, eta, value_plus, value_minus, &mut gradient);
    Ok(TwoPointEstimate {
        gradient,
        direction,
        value_plus,
        value_minus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kinked() -> PiecewiseLinear1D {
        PiecewiseLinear1D::new(vec![4.0], vec![1.0, 0.5], 0.0, 0.0).unwrap()
    }

    /// Midpoint-rule integral, independent of the closed form.
    fn riemann_average(f: &PiecewiseLinear1D, x: f64, eta: f64) -> f64 {
        let n = 200_000;
        let h = 2.0 * eta / n as f64;
        (0..n).map(|k| f.eval(x - eta + (k as f64 + 0.5) * h)).sum::<f64>() * h / (2.0 * eta)
    }

    #[test]
    fn evaluates_min_of_lines() {
        let g = kinked();
        for x in [0.0f64, 1.0, 3.9, 4.0, 4.1, 12.0] {
            let expected = x.min(x / 2.0 + 2.0);
            assert!((g.eval(x) - expected).abs() < 1e-14, "x={x}");
        }
    }

    #[test]
    fn smoothing_at_the_kink() {
        let g = kinked();
        let s = smooth_1d_closed_form(&g, 0.5).unwrap();
        assert!((s.value(4.0) - 3.9375).abs() < 1e-14);
        assert!((s.grad(4.0) - 0.75).abs() < 1e-14);
    }

    #[test]
    fn smoothing_of_linear_is_identity() {
        let f = PiecewiseLinear1D::new(vec![], vec![2.5], 1.0, 3.0).unwrap();
        let s = smooth_1d_closed_form(&f, 0.7).unwrap();
        for x in [-3.0, 0.0, 2.2] {
            assert!((s.value(x) - f.eval(x)).abs() < 1e-12);
            assert!((s.grad(x) - 2.5).abs() < 1e-12);
        }
        assert!(smooth_1d_closed_form(&f, 0.0).is_err());
    }

    #[test]
    fn clarke_sets() {
        let g = kinked();
        assert_eq!(g.clarke_interval(4.0), (0.5, 1.0));
        assert_eq!(g.clarke_interval(2.0), (1.0, 1.0));
        assert_eq!(g.delta_clarke_interval(3.6, 0.5), (0.5, 1.0));
        assert_eq!(g.delta_clarke_interval(3.0, 0.5), (1.0, 1.0));
        assert_eq!(g.delta_clarke_interval(3.5, 0.5), (0.5, 1.0));
    }

    #[test]
    fn interval_deviation_cases() {
        assert_eq!(interval_deviation((0.6, 0.7), (0.5, 1.0)), 0.0);
        assert!((interval_deviation((0.2, 0.7), (0.5, 1.0)) - 0.3).abs() < 1e-15);
        assert!((interval_deviation((0.2, 1.4), (0.5, 1.0)) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn deviation_inside_kink_window() {
        let g = kinked();
        for eta in [0.3, 0.5, 0.8] {
            assert_eq!(deviation_bound(&g, 4.0 - eta / 2.0, eta).unwrap(), 0.5);
            assert_eq!(deviation_bound(&g, 4.0 - 2.0 * eta, eta).unwrap(), 0.0);
        }
        assert_eq!(deviation_bound(&g, 4.0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let g = kinked();
        let s = smooth_1d_closed_form(&g, 0.3).unwrap();
        for x in [0.5, 3.8, 4.0, 4.25, 11.0] {
            assert!((interval_average(|t| g.eval(t), x, 0.3) - s.value(x)).abs() < 1e-5);
        }
    }

    proptest! {
        #[test]
        fn closed_form_agrees_with_riemann_sum(x in -2.0f64..14.0, eta in 0.05f64..2.0) {
            let g = kinked();
            let s = smooth_1d_closed_form(&g, eta).unwrap();
            prop_assert!((s.value(x) - riemann_average(&g, x, eta)).abs() < 1e-8);
        }

        #[test]
        fn smoothing_bounds_hold(x in -2.0f64..14.0, eta in 0.05f64..2.0) {
            let g = kinked();
            let l0 = g.lipschitz();
            let s = smooth_1d_closed_form(&g, eta).unwrap();
            // |h_eta - h| <= L0 eta and the smoothed gradient is L0-bounded.
            prop_assert!((s.value(x) - g.eval(x)).abs() <= l0 * eta + 1e-12);
            prop_assert!(s.grad(x).abs() <= l0 + 1e-12);
            prop_assert!(inclusion_gap(&g, x, eta).unwrap() < 1e-12);
            let dev = deviation_bound(&g, x, eta).unwrap();
            prop_assert!(dev <= 0.5);
            if (x - 4.0).abs() > eta {
                prop_assert_eq!(dev, 0.0);
            }
        }

        #[test]
        fn integral_is_additive(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0) {
            let f = PiecewiseLinear1D::new(vec![-1.0, 0.5, 2.0], vec![-1.0, 0.3, 2.0, -0.5], 0.0, 1.0).unwrap();
            prop_assert!((f.integral(a, b) + f.integral(b, c) - f.integral(a, c)).abs() < 1e-10);
        }
    }
}
