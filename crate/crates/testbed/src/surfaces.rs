//! Closed-form response surfaces used to generate benchmark corpora, with
//! their conventional input domains.

use palm::error::{PalmError, Result};

/// Steepness exponent for the Michalewicz surface when none is given.
pub const MICHALEWICZ_STEEPNESS: u32 = 10;

/// One factor of Herbie's tooth: a bimodal pair of Gaussian bumps with a
/// high-frequency sinusoidal ripple.
fn herbie_factor(z: f64) -> f64 {
    (-(z - 1.0) * (z - 1.0)).exp() + (-0.8 * (z + 1.0) * (z + 1.0)).exp()
        - 0.05 * (8.0 * (z + 0.1)).sin()
}

/// Herbie's tooth in any dimension: `-prod_j g(x_j)`, a multimodal rippled
/// surface usually evaluated on `[-2, 2]^d`.
pub fn herbies_tooth(x: &[f64]) -> f64 {
    -x.iter().map(|&z| herbie_factor(z)).product::<f64>()
}

/// Two-dimensional exponential bump `x1 * exp(-x1^2 - x2^2)`, essentially
/// zero everywhere on `[-2, 6]^2` except near the origin.
pub fn gramacy_lee_2d(x: &[f64]) -> f64 {
    assert_eq!(x.len(), 2, "gramacy_lee_2d takes a 2-vector");
    x[0] * (-x[0] * x[0] - x[1] * x[1]).exp()
}

/// Michalewicz function on `[0, pi]^d` with steepness `m`:
/// `-sum_i sin(x_i) * sin(i * x_i^2 / pi)^(2m)` with `i` counted from 1.
/// Additive over coordinates; larger `m` makes the valleys narrower.
pub fn michalewicz(x: &[f64], m: u32) -> f64 {
    let two_m = 2 * m as i32;
    -x.iter()
        .enumerate()
        .map(|(i, &z)| {
            let i1 = (i + 1) as f64;
            z.sin() * (i1 * z * z / std::f64::consts::PI).sin().powi(two_m)
        })
        .sum::<f64>()
}

/// Plain sine, conventionally sampled on `[0, 20]`.
pub fn sine_wave(x: f64) -> f64 {
    x.sin()
}

/// A named surface together with its dimension, resolvable from the
/// command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Surface {
    Herbie { dims: usize },
    GramacyLee,
    Michalewicz { dims: usize, steepness: u32 },
    Sine,
}

impl Surface {
    /// Resolves a surface by name, validating the requested dimension:
    /// `herbie` and `michalewicz` accept any `dims >= 1`, `glee` is fixed
    /// at 2 and `sine` at 1.
    pub fn parse(name: &str, dims: usize) -> Result<Self> {
        match name {
            "herbie" => {
                if dims == 0 {
                    return Err(PalmError::InvalidArgument(
                        "herbie needs at least one dimension".into(),
                    ));
                }
                Ok(Surface::Herbie { dims })
            }
            "glee" => {
                if dims != 2 {
                    return Err(PalmError::InvalidArgument(format!(
                        "glee is 2-dimensional, got dims={dims}"
                    )));
                }
                Ok(Surface::GramacyLee)
            }
            "michalewicz" => {
                if dims == 0 {
                    return Err(PalmError::InvalidArgument(
                        "michalewicz needs at least one dimension".into(),
                    ));
                }
                Ok(Surface::Michalewicz {
                    dims,
                    steepness: MICHALEWICZ_STEEPNESS,
                })
            }
            "sine" => {
                if dims != 1 {
                    return Err(PalmError::InvalidArgument(format!(
                        "sine is 1-dimensional, got dims={dims}"
                    )));
                }
                Ok(Surface::Sine)
            }
            other => Err(PalmError::InvalidArgument(format!(
                "unknown surface {other:?}; expected herbie, glee, michalewicz, or sine"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Surface::Herbie { .. } => "herbie",
            Surface::GramacyLee => "glee",
            Surface::Michalewicz { .. } => "michalewicz",
            Surface::Sine => "sine",
        }
    }

    pub fn dims(&self) -> usize {
        match self {
            Surface::Herbie { dims } => *dims,
            Surface::GramacyLee => 2,
            Surface::Michalewicz { dims, .. } => *dims,
            Surface::Sine => 1,
        }
    }

    /// The conventional evaluation domain, one `(lo, hi)` pair per
    /// dimension.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        match self {
            Surface::Herbie { dims } => vec![(-2.0, 2.0); *dims],
            Surface::GramacyLee => vec![(-2.0, 6.0); 2],
            Surface::Michalewicz { dims, .. } => vec![(0.0, std::f64::consts::PI); *dims],
            Surface::Sine => vec![(0.0, 20.0)],
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dims(), "input dimension mismatch");
        match self {
            Surface::Herbie { .. } => herbies_tooth(x),
            Surface::GramacyLee => gramacy_lee_2d(x),
            Surface::Michalewicz { steepness, .. } => michalewicz(x, *steepness),
            Surface::Sine => sine_wave(x[0]),
        }
    }
}
