//! Exact Godunov flux for the convex flux `f(u) = u²/2`.

#[inline]
pub fn burgers_flux(u: f64) -> f64 {
    0.5 * u * u
}

/// Godunov numerical flux `F(u_L, u_R)` from the exact Riemann solution.
///
/// For `u_L ≤ u_R` (rarefaction) this is `min f` over `[u_L, u_R]`, for
/// `u_L > u_R` (shock) it is `max(f(u_L), f(u_R))`.
#[inline]
pub fn godunov_flux(u_left: f64, u_right: f64) -> f64 {
    if u_left <= u_right {
        if u_left > 0.0 {
            burgers_flux(u_left)
        } else if u_right < 0.0 {
            burgers_flux(u_right)
        } else {
            0.0
        }
    } else {
        burgers_flux(u_left).max(burgers_flux(u_right))
    }
}

/// Partial derivatives `(∂F/∂u_L, ∂F/∂u_R)` of [`godunov_flux`].
///
/// At kinks the branch selected by [`godunov_flux`] is frozen, so the
/// returned pair is the one-sided derivative of the active branch. Ties
/// between the two shock branches resolve to the left state.
#[inline]
pub fn godunov_flux_derivatives(u_left: f64, u_right: f64) -> (f64, f64) {
    if u_left <= u_right {
        if u_left > 0.0 {
            (u_left, 0.0)
        } else if u_right < 0.0 {
            (0.0, u_right)
        } else {
            (0.0, 0.0)
        }
    } else if burgers_flux(u_left) >= burgers_flux(u_right) {
        (u_left, 0.0)
    } else {
        (0.0, u_right)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_values() {
        assert_eq!(godunov_flux(1.0, 1.0), 0.5);
        assert_eq!(godunov_flux(-1.0, 1.0), 0.0);
        assert_eq!(godunov_flux(2.0, -2.0), 2.0);
        // supersonic left: depends only on the left state
        assert_eq!(godunov_flux_derivatives(3.0, 1.0), (3.0, 0.0));
        assert_eq!(godunov_flux_derivatives(-1.0, -3.0).1, -3.0);
    }

    fn brute_force(ul: f64, ur: f64) -> f64 {
        // min/max of f over a fine grid of the interval
        let n = 20_000;
        let (lo, hi) = if ul <= ur { (ul, ur) } else { (ur, ul) };
        let vals = (0..=n).map(|k| burgers_flux(lo + (hi - lo) * k as f64 / n as f64));
        if ul <= ur {
            vals.fold(f64::INFINITY, f64::min)
        } else {
            vals.fold(f64::NEG_INFINITY, f64::max)
        }
    }

    proptest! {
        #[test]
        fn consistency(u in -50.0f64..50.0) {
            prop_assert_eq!(godunov_flux(u, u), burgers_flux(u));
        }

        #[test]
        fn matches_interval_extremum(ul in -5.0f64..5.0, ur in -5.0f64..5.0) {
            let bf = brute_force(ul, ur);
            prop_assert!((godunov_flux(ul, ur) - bf).abs() < 1e-6 * (1.0 + bf.abs()));
        }

        #[test]
        fn derivatives_match_differences(ul in 0.2f64..5.0, ur in 0.2f64..5.0) {
            // away from the sonic point and the ul = ur kink
            prop_assume!((ul - ur).abs() > 1e-3);
            let h = 1e-7;
            let (dl, dr) = godunov_flux_derivatives(ul, ur);
            let fdl = (godunov_flux(ul + h, ur) - godunov_flux(ul - h, ur)) / (2.0 * h);
            let fdr = (godunov_flux(ul, ur + h) - godunov_flux(ul, ur - h)) / (2.0 * h);
            prop_assert!((dl - fdl).abs() < 1e-5);
            prop_assert!((dr - fdr).abs() < 1e-5);
        }
    }
}
