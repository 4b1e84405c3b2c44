//! Training data with an input coding map.
//!
//! All kernel math runs on inputs coded to the unit cube; the coding map
//! is stored with the data (and with fitted models) and applied to every
//! query, so callers only ever see natural units.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{PalmError, Result};
use crate::scalar::Scalar;

/// Per-dimension affine map between natural units and the unit cube.
#[derive(Clone, Debug, PartialEq)]
pub struct Coding<T> {
    bounds: Vec<(T, T)>,
}

impl<T: Scalar> Coding<T> {
    /// Coding from explicit per-dimension `(lo, hi)` bounds.
    pub fn new(bounds: Vec<(T, T)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(PalmError::InvalidArgument("empty coding bounds".into()));
        }
        for &(lo, hi) in &bounds {
            if !lo.is_finite() || !hi.is_finite() || !(hi > lo) {
                return Err(PalmError::InvalidArgument(format!(
                    "bad coding interval ({lo}, {hi})"
                )));
            }
        }
        Ok(Self { bounds })
    }

    /// Coding derived from the columnwise range of a data matrix; a
    /// constant column gets a unit-width interval around its value.
    pub fn from_data(x: ArrayView2<T>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(PalmError::InsufficientData {
                needed: 1,
                found: 0,
            });
        }
        let half = T::of(0.5);
        let bounds = (0..x.ncols())
            .map(|j| {
                let col = x.column(j);
                let mut lo = col[0];
                let mut hi = col[0];
                for &v in col.iter() {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                if hi > lo {
                    (lo, hi)
                } else {
                    (lo - half, hi + half)
                }
            })
            .collect();
        Self::new(bounds)
    }

    /// Identity map on the unit cube.
    pub fn identity(d: usize) -> Self {
        Self {
            bounds: vec![(T::zero(), T::one()); d.max(1)],
        }
    }

    pub fn dims(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(T, T)] {
        &self.bounds
    }

    pub fn encode(&self, x: &[T]) -> Result<Vec<T>> {
        self.check(x.len())?;
        Ok(x.iter()
            .zip(&self.bounds)
            .map(|(&v, &(lo, hi))| (v - lo) / (hi - lo))
            .collect())
    }

    pub fn decode(&self, z: &[T]) -> Result<Vec<T>> {
        self.check(z.len())?;
        Ok(z.iter()
            .zip(&self.bounds)
            .map(|(&v, &(lo, hi))| lo + v * (hi - lo))
            .collect())
    }

    pub fn encode_matrix(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        self.check(x.ncols())?;
        let mut out = x.to_owned();
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            let w = hi - lo;
            out.column_mut(j).mapv_inplace(|v| (v - lo) / w);
        }
        Ok(out)
    }

    fn check(&self, found: usize) -> Result<()> {
        if found != self.dims() {
            return Err(PalmError::DimensionMismatch {
                context: "coding",
                expected: self.dims(),
                found,
            });
        }
        Ok(())
    }
}

/// A training corpus: natural-unit inputs, responses, the coding map and a
/// cached coded copy of the inputs.
#[derive(Clone, Debug)]
pub struct TrainingSet<T> {
    natural: Array2<T>,
    coded: Array2<T>,
    y: Array1<T>,
    coding: Coding<T>,
}

impl<T: Scalar> TrainingSet<T> {
    /// Builds a training set, deriving the coding map from the data range.
    pub fn new(x: Array2<T>, y: Array1<T>) -> Result<Self> {
        let coding = Coding::from_data(x.view())?;
        Self::with_coding(x, y, coding)
    }

    /// Builds a training set with an explicit coding map (use when the
    /// sampling domain is known and wider than the observed range).
    pub fn with_coding(x: Array2<T>, y: Array1<T>, coding: Coding<T>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(PalmError::InsufficientData {
                needed: 1,
                found: 0,
            });
        }
        if x.nrows() != y.len() {
            return Err(PalmError::DimensionMismatch {
                context: "responses",
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(PalmError::NonFinite("training inputs"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(PalmError::NonFinite("training responses"));
        }
        let coded = coding.encode_matrix(x.view())?;
        Ok(Self {
            natural: x,
            coded,
            y,
            coding,
        })
    }

    pub fn n(&self) -> usize {
        self.natural.nrows()
    }

    pub fn dims(&self) -> usize {
        self.natural.ncols()
    }

    pub fn natural(&self) -> ArrayView2<'_, T> {
        self.natural.view()
    }

    pub fn coded(&self) -> ArrayView2<'_, T> {
        self.coded.view()
    }

    pub fn coded_row(&self, i: usize) -> &[T] {
        self.coded.row(i).to_slice().expect("standard layout")
    }

    pub fn y(&self) -> &Array1<T> {
        &self.y
    }

    pub fn coding(&self) -> &Coding<T> {
        &self.coding
    }

    /// A new training set sharing inputs and coding but with replaced
    /// responses (used for residual modeling).
    pub fn with_responses(&self, y: Array1<T>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(PalmError::DimensionMismatch {
                context: "responses",
                expected: self.n(),
                found: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(PalmError::NonFinite("training responses"));
        }
        Ok(Self {
            natural: self.natural.clone(),
            coded: self.coded.clone(),
            y,
            coding: self.coding.clone(),
        })
    }
}
