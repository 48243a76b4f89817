use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid_fem::ParamPoint;

/// Latin hypercube sample of `n` points in the box `bounds` (one pair per
/// dimension, `p = bounds.len()`): each of the `n` equal strata of every axis
/// holds exactly one point.
pub fn lhs_sample(p: usize, n: usize, bounds: &[(f64, f64)], seed: u64) -> Result<Vec<ParamPoint>> {
    if n == 0 {
        return Err(Error::InvalidInput("LHS needs at least one sample".into()));
    }
    if bounds.len() != p {
        return Err(Error::DimensionMismatch(format!("{} bounds for dimension {p}", bounds.len())));
    }
    if let Some(&(lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
        return Err(Error::InvalidInput(format!("degenerate sampling interval [{lo}, {hi}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![Vec::with_capacity(p); n];
    for &(lo, hi) in bounds {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        let width = (hi - lo) / n as f64;
        for (point, s) in points.iter_mut().zip(strata) {
            let u: f64 = rng.random();
            // keep rounding from pushing the point into the next stratum
            let x = (lo + (s as f64 + u) * width).clamp(lo + s as f64 * width, lo + (s + 1) as f64 * width);
            point.push(x.min(hi));
        }
    }
    Ok(points.into_iter().map(ParamPoint::new).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_is_inside() {
        let pts = lhs_sample(2, 1, &[(0.0, 1.0), (-2.0, 3.0)], 1).unwrap();
        assert_eq!(pts.len(), 1);
        let x = pts[0].as_slice();
        assert!((0.0..=1.0).contains(&x[0]) && (-2.0..=3.0).contains(&x[1]));
    }

    #[test]
    fn one_point_per_quarter() {
        let pts = lhs_sample(2, 4, &[(0.0, 1.0), (0.0, 1.0)], 9).unwrap();
        for d in 0..2 {
            let mut seen = [false; 4];
            for p in &pts {
                seen[((p.0[d] * 4.0).floor() as usize).min(3)] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let b = [(0.1, 1.0), (0.1, 1.0)];
        assert_eq!(lhs_sample(2, 30, &b, 5).unwrap(), lhs_sample(2, 30, &b, 5).unwrap());
        assert_ne!(lhs_sample(2, 30, &b, 5).unwrap(), lhs_sample(2, 30, &b, 6).unwrap());
    }

    #[test]
    fn bad_bounds_are_rejected() {
        assert!(lhs_sample(1, 3, &[(1.0, 1.0)], 0).is_err());
        assert!(lhs_sample(1, 0, &[(0.0, 1.0)], 0).is_err());
        assert!(lhs_sample(2, 3, &[(0.0, 1.0)], 0).is_err());
    }
}
