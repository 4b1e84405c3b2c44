//! Deterministic training/test designs and seeded noise injection.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use palm::error::{PalmError, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::surfaces::Surface;

fn validate_bounds(bounds: &[(f64, f64)]) -> Result<()> {
    if bounds.is_empty() {
        return Err(PalmError::InvalidArgument(
            "a design needs at least one dimension".into(),
        ));
    }
    for &(lo, hi) in bounds {
        if !lo.is_finite() || !hi.is_finite() || !(hi > lo) {
            return Err(PalmError::InvalidArgument(format!(
                "bad bounds ({lo}, {hi}); need finite lo < hi"
            )));
        }
    }
    Ok(())
}

fn grid_size(points_per_dim: usize, dims: usize) -> Result<usize> {
    points_per_dim
        .checked_pow(dims as u32)
        .filter(|&n| n <= 1 << 26)
        .ok_or_else(|| {
            PalmError::InvalidArgument(format!(
                "grid of {points_per_dim}^{dims} points is too large"
            ))
        })
}

/// Full-factorial grid with inclusive endpoints, `points_per_dim` levels
/// per dimension, rows ordered with the last dimension varying fastest.
pub fn grid_design(points_per_dim: usize, bounds: &[(f64, f64)]) -> Result<Array2<f64>> {
    if points_per_dim < 2 {
        return Err(PalmError::InvalidArgument(
            "a grid needs at least 2 points per dimension".into(),
        ));
    }
    validate_bounds(bounds)?;
    let d = bounds.len();
    let n = grid_size(points_per_dim, d)?;
    let denom = (points_per_dim - 1) as f64;
    let mut x = Array2::zeros((n, d));
    for r in 0..n {
        let mut rem = r;
        for j in (0..d).rev() {
            let level = rem % points_per_dim;
            rem /= points_per_dim;
            let (lo, hi) = bounds[j];
            x[[r, j]] = lo + (level as f64 / denom) * (hi - lo);
        }
    }
    Ok(x)
}

/// Full-factorial grid of cell midpoints: `points_per_dim` equal cells per
/// dimension, one point at the center of each. Never touches the domain
/// boundary, and shares no point with any inclusive grid that has an even
/// number of points per dimension: equality would need `2mk = (n-1)(2i+1)`
/// with `n-1` odd, an even number matching an odd one.
pub fn offset_grid(points_per_dim: usize, bounds: &[(f64, f64)]) -> Result<Array2<f64>> {
    if points_per_dim == 0 {
        return Err(PalmError::InvalidArgument(
            "an offset grid needs at least 1 point per dimension".into(),
        ));
    }
    validate_bounds(bounds)?;
    let d = bounds.len();
    let n = grid_size(points_per_dim, d)?;
    let denom = points_per_dim as f64;
    let mut x = Array2::zeros((n, d));
    for r in 0..n {
        let mut rem = r;
        for j in (0..d).rev() {
            let level = rem % points_per_dim;
            rem /= points_per_dim;
            let (lo, hi) = bounds[j];
            x[[r, j]] = lo + ((level as f64 + 0.5) / denom) * (hi - lo);
        }
    }
    Ok(x)
}

/// Evaluates a surface over every row of `x`.
pub fn evaluate_surface(surface: &Surface, x: ArrayView2<f64>) -> Result<Array1<f64>> {
    if x.ncols() != surface.dims() {
        return Err(PalmError::DimensionMismatch {
            context: "surface inputs",
            expected: surface.dims(),
            found: x.ncols(),
        });
    }
    Ok(x.rows()
        .into_iter()
        .map(|row| surface.eval(row.as_slice().expect("standard layout")))
        .collect())
}

/// Adds iid zero-mean Gaussian noise with the given standard deviation,
/// drawn from a seeded generator; `sd = 0` returns the responses untouched.
pub fn add_noise(y: ArrayView1<f64>, sd: f64, seed: u64) -> Result<Array1<f64>> {
    if !(sd >= 0.0) || !sd.is_finite() {
        return Err(PalmError::InvalidArgument(format!(
            "noise sd must be finite and nonnegative, got {sd}"
        )));
    }
    if sd == 0.0 {
        return Ok(y.to_owned());
    }
    let normal = Normal::new(0.0, sd)
        .map_err(|e| PalmError::InvalidArgument(format!("bad noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(y.iter().map(|&v| v + normal.sample(&mut rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn grid_hits_exact_levels_with_last_dimension_fastest() {
        let g = grid_design(3, &[(0.0, 1.0)]).unwrap();
        assert_eq!(g.column(0).to_vec(), vec![0.0, 0.5, 1.0]);

        let g = grid_design(5, &[(-2.0, 2.0)]).unwrap();
        assert_eq!(g.column(0).to_vec(), vec![-2.0, -1.0, 0.0, 1.0, 2.0]);

        let g = grid_design(2, &[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let rows: Vec<Vec<f64>> = g.rows().into_iter().map(|r| r.to_vec()).collect();
        assert_eq!(
            rows,
            vec![
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0]
            ]
        );
    }

    #[test]
    fn grid_size_is_points_per_dim_to_the_dims() {
        assert_eq!(grid_design(4, &[(0.0, 1.0); 3]).unwrap().nrows(), 64);
        assert_eq!(offset_grid(4, &[(0.0, 1.0); 3]).unwrap().nrows(), 64);
        assert_eq!(grid_design(4, &[(0.0, 1.0); 3]).unwrap().ncols(), 3);
    }

    #[test]
    fn designs_reject_bad_arguments() {
        assert!(grid_design(1, &[(0.0, 1.0)]).is_err());
        assert!(offset_grid(0, &[(0.0, 1.0)]).is_err());
        assert!(grid_design(3, &[]).is_err());
        assert!(grid_design(3, &[(1.0, 1.0)]).is_err());
        assert!(grid_design(3, &[(0.0, f64::NAN)]).is_err());
        assert!(grid_design(10_000, &[(0.0, 1.0); 3]).is_err());
    }

    #[test]
    fn offset_grid_sits_at_cell_midpoints() {
        let g = offset_grid(2, &[(0.0, 1.0)]).unwrap();
        assert_eq!(g.column(0).to_vec(), vec![0.25, 0.75]);
        let g = offset_grid(1, &[(-2.0, 2.0)]).unwrap();
        assert_eq!(g.column(0).to_vec(), vec![0.0]);
    }

    #[test]
    fn offset_grid_misses_every_training_grid_point() {
        // the paper-style pairing: an even-count training grid and an
        // odd-count shifted test grid share nothing, in every dimension
        let bounds = [(-2.0, 2.0), (-2.0, 2.0)];
        let train = grid_design(100, &bounds).unwrap();
        let test = offset_grid(101, &bounds).unwrap();
        let seen: HashSet<(u64, u64)> = train
            .rows()
            .into_iter()
            .map(|r| (r[0].to_bits(), r[1].to_bits()))
            .collect();
        assert!(test
            .rows()
            .into_iter()
            .all(|r| !seen.contains(&(r[0].to_bits(), r[1].to_bits()))));
        // and coordinate-wise, not just pattern-wise
        let train_x: HashSet<u64> = train.column(0).iter().map(|v| v.to_bits()).collect();
        assert!(test.column(0).iter().all(|v| !train_x.contains(&v.to_bits())));
    }

    #[test]
    fn evaluate_surface_maps_rows() {
        let s = Surface::parse("herbie", 2).unwrap();
        let x = grid_design(3, &s.bounds()).unwrap();
        let y = evaluate_surface(&s, x.view()).unwrap();
        assert_eq!(y.len(), 9);
        for (row, &yi) in x.rows().into_iter().zip(y.iter()) {
            assert_eq!(yi, s.eval(row.as_slice().unwrap()));
        }
        let narrow = grid_design(3, &[(0.0, 1.0)]).unwrap();
        assert!(evaluate_surface(&s, narrow.view()).is_err());
    }

    #[test]
    fn zero_noise_is_the_identity() {
        let y = Array1::from_vec(vec![1.0, -2.5, 0.125]);
        let out = add_noise(y.view(), 0.0, 42).unwrap();
        assert_eq!(y, out);
    }

    #[test]
    fn noise_is_seed_reproducible_with_the_right_spread() {
        let y = Array1::zeros(40_000);
        let a = add_noise(y.view(), 0.05, 7).unwrap();
        let b = add_noise(y.view(), 0.05, 7).unwrap();
        let c = add_noise(y.view(), 0.05, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let var = a.iter().map(|v| v * v).sum::<f64>() / a.len() as f64;
        assert!(var > 0.0025 * 0.9 && var < 0.0025 * 1.1, "var = {var}");
        assert!(add_noise(y.view(), -0.1, 7).is_err());
        assert!(add_noise(y.view(), f64::NAN, 7).is_err());
    }
}
