//! Peak layer versus generation accuracy: OLS fit and two-sided t-test on
//! the slope.

use serde::{Deserialize, Serialize};

use super::stats::student_t_two_sided_p;
use super::AnalysisError;
use crate::Scalar;

/// Smallest p-value reported; anything below is shown as "< 1e-12".
pub const P_VALUE_FLOOR: f64 = 1e-12;

/// Default filter: keep positions whose peak probe accuracy exceeds this.
pub const DEFAULT_MIN_PROBE_ACCURACY: f64 = 0.6;

/// One gold position of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionPoint {
    pub peak_layer: f64,
    pub peak_probe_accuracy: f64,
    pub generation_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult<T: Scalar> {
    pub slope: T,
    pub intercept: T,
    pub t_statistic: T,
    /// Two-sided p for H0: slope = 0, floored at [`P_VALUE_FLOOR`].
    pub p_value: T,
    /// True when the exact p was below the floor.
    pub p_floored: bool,
    pub dof: usize,
    /// `(peak_layer, generation_accuracy)` of the points that survived the
    /// filter.
    pub points: Vec<(T, T)>,
}

impl<T: Scalar> RegressionResult<T> {
    pub fn p_value_display(&self) -> String {
        if self.p_floored {
            format!("< {P_VALUE_FLOOR:e}")
        } else {
            format!("{:e}", self.p_value)
        }
    }
}

/// Ordinary least squares of `y` on `x` with the slope's t-test.
pub fn ols<T: Scalar>(points: &[(T, T)]) -> Result<RegressionResult<T>, AnalysisError> {
    let m = points.len();
    if m < 3 {
        return Err(AnalysisError::InsufficientData(format!(
            "{m} point(s); need at least 3"
        )));
    }
    let n = T::of_usize(m);
    let mean_x = points.iter().map(|p| p.0).sum::<T>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<T>() / n;
    let sxx = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum::<T>();
    if sxx <= T::zero() {
        return Err(AnalysisError::DegenerateRegressor);
    }
    let sxy = points
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
        .sum::<T>();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let sse = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<T>();
    let dof = m - 2;
    let se = (sse / T::of_usize(dof) / sxx).sqrt();
    let t = if slope == T::zero() {
        T::zero()
    } else if se == T::zero() {
        slope.signum() * T::infinity()
    } else {
        slope / se
    };
    let p = student_t_two_sided_p(t, T::of_usize(dof));
    let floor = T::lit(P_VALUE_FLOOR);
    Ok(RegressionResult {
        slope,
        intercept,
        t_statistic: t,
        p_value: p.max(floor),
        p_floored: p < floor,
        dof,
        points: points.to_vec(),
    })
}

/// Keeps points whose peak probe accuracy exceeds `min_probe_accuracy`,
/// then regresses generation accuracy on peak layer.
pub fn peak_layer_regression<T: Scalar>(
    points: &[RegressionPoint],
    min_probe_accuracy: f64,
) -> Result<RegressionResult<T>, AnalysisError> {
    let kept: Vec<(T, T)> = points
        .iter()
        .filter(|p| p.peak_probe_accuracy > min_probe_accuracy)
        .map(|p| (T::lit(p.peak_layer), T::lit(p.generation_accuracy)))
        .collect();
    if kept.len() < 3 {
        return Err(AnalysisError::InsufficientData(format!(
            "insufficient data after {min_probe_accuracy} filter: {} point(s) remain, need 3",
            kept.len()
        )));
    }
    ols(&kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pts(xy: &[(f64, f64)]) -> Vec<RegressionPoint> {
        xy.iter()
            .map(|&(x, y)| RegressionPoint {
                peak_layer: x,
                peak_probe_accuracy: 0.9,
                generation_accuracy: y,
                label: None,
            })
            .collect()
    }

    #[test]
    fn exact_fit_is_floored() {
        let xy: Vec<(f64, f64)> = [10.0, 12.0, 15.0, 18.0, 21.0]
            .iter()
            .map(|&x| (x, -0.02 * x + 0.9))
            .collect();
        let r = peak_layer_regression::<f64>(&pts(&xy), 0.6).unwrap();
        assert_relative_eq!(r.slope, -0.02, max_relative = 1e-10);
        assert_relative_eq!(r.intercept, 0.9, max_relative = 1e-10);
        assert!(r.p_floored);
        assert_eq!(r.p_value_display(), "< 1e-12");
        assert_eq!(r.dof, 3);
    }

    #[test]
    fn zero_slope_gives_p_one() {
        let r = ols(&[(1.0f64, 0.5), (2.0, 0.75), (3.0, 0.75), (4.0, 0.5)]).unwrap();
        assert_eq!(r.slope, 0.0);
        assert_eq!(r.t_statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn matches_reference_statistics() {
        // Reference values from scipy.stats.linregress (t = slope / stderr).
        let x = [8.0, 10.0, 12.0, 13.0, 15.0, 16.0, 18.0, 20.0, 22.0, 25.0];
        let y = [0.91, 0.88, 0.84, 0.86, 0.79, 0.74, 0.77, 0.70, 0.66, 0.61];
        let r = ols(&x.iter().copied().zip(y).collect::<Vec<(f64, f64)>>()).unwrap();
        assert_relative_eq!(r.slope, -0.017968809433244578, max_relative = 1e-6);
        assert_relative_eq!(r.intercept, 1.061704069988589, max_relative = 1e-6);
        assert_relative_eq!(r.t_statistic, -14.22627003719128, max_relative = 1e-6);
        assert_relative_eq!(r.p_value, 5.805762468157804e-07, max_relative = 1e-6);

        let y2 = [0.71, 0.65, 0.80, 0.62, 0.77, 0.70, 0.60, 0.74, 0.66, 0.63];
        let r = ols(&x.iter().copied().zip(y2).collect::<Vec<(f64, f64)>>()).unwrap();
        assert_relative_eq!(r.slope, -0.003545074172689235, max_relative = 1e-6);
        assert_relative_eq!(r.t_statistic, -0.8423014601314973, max_relative = 1e-6);
        assert_relative_eq!(r.p_value, 0.42408298470067385, max_relative = 1e-6);
    }

    #[test]
    fn filter_and_error_paths() {
        let mut p = pts(&[(1.0, 0.5), (2.0, 0.4), (3.0, 0.3), (4.0, 0.1)]);
        p[0].peak_probe_accuracy = 0.6; // not strictly above
        p[1].peak_probe_accuracy = 0.2;
        let e = peak_layer_regression::<f64>(&p, 0.6).unwrap_err();
        assert!(e.to_string().contains("insufficient data after 0.6 filter"), "{e}");
        let flat = pts(&[(5.0, 0.5), (5.0, 0.4), (5.0, 0.3)]);
        assert!(matches!(
            peak_layer_regression::<f64>(&flat, 0.6),
            Err(AnalysisError::DegenerateRegressor)
        ));
    }

    proptest! {
        #[test]
        fn t_and_p_invariant_under_affine_x(
            ys in prop::collection::vec(0.0f64..1.0, 6),
            scale in 0.1f64..10.0,
            shift in -20.0f64..20.0,
        ) {
            let xs = [3.0, 5.0, 6.0, 9.0, 11.0, 14.0];
            let a: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
            let b: Vec<(f64, f64)> = a.iter().map(|&(x, y)| (scale * x + shift, y)).collect();
            let ra = ols(&a).unwrap();
            let rb = ols(&b).unwrap();
            prop_assert!((ra.slope - rb.slope * scale).abs() <= 1e-9 * ra.slope.abs().max(1e-9));
            prop_assert!((ra.t_statistic - rb.t_statistic).abs() <= 1e-9 * ra.t_statistic.abs().max(1.0));
            prop_assert!((ra.p_value - rb.p_value).abs() <= 1e-9);
        }
    }
}
