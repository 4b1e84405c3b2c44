//! Expert center placement.
//!
//! Two regimes: boundary-buffered maximin designs for space-filling
//! seeds, and greedy sequential addition that clusters prediction
//! residuals, boxes the worst cluster, and space-fills inside that box
//! away from the centers the model already has.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::TrainingSet;
use crate::error::{PalmError, Result};
use crate::palm::{add_center, fit_palm, PalmConfig, PalmModel};
use crate::scalar::Scalar;

/// Default number of multi-start attempts when optimizing a new center.
pub const DEFAULT_MULTISTARTS: usize = 10;
/// Evaluation budget of each derivative-free multi-start.
const OPTIM_BUDGET: usize = 200;
/// Random-exchange proposals per center during maximin search.
const EXCHANGE_PER_CENTER: usize = 150;
/// Corner-augmentation guard: above this dimension only a sample of the
/// 2^d box corners is used.
const MAX_FULL_CORNER_DIM: usize = 10;
const MAX_SAMPLED_CORNERS: usize = 1024;

/// How a center entered the set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionMode {
    /// Part of a space-filling seed design.
    Spacefill,
    /// Added greedily from residual clustering.
    Sequential,
}

/// An ordered collection of expert centers in coded `[0,1]^d` units,
/// remembering how each was chosen.
#[derive(Clone, Debug)]
pub struct CenterSet<T> {
    c: Array2<T>,
    modes: Vec<SelectionMode>,
}

impl<T: Scalar> CenterSet<T> {
    /// Wraps a matrix of coded centers, all tagged with one mode.
    pub fn new(c: Array2<T>, mode: SelectionMode) -> Result<Self> {
        let modes = vec![mode; c.nrows()];
        let set = Self { c, modes };
        set.validate()?;
        Ok(set)
    }

    fn validate(&self) -> Result<()> {
        for (i, row) in self.c.rows().into_iter().enumerate() {
            for &v in row {
                if !(v >= T::zero() && v <= T::one()) {
                    return Err(PalmError::InvalidArgument(format!(
                        "center {i} lies outside the coded unit domain"
                    )));
                }
            }
            for other in self.c.rows().into_iter().take(i) {
                if row == other {
                    return Err(PalmError::InvalidArgument(format!(
                        "center {i} duplicates an earlier center"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Appends one coded center.
    pub fn push(&mut self, center: &[T], mode: SelectionMode) -> Result<()> {
        if center.len() != self.dims() {
            return Err(PalmError::DimensionMismatch {
                context: "center",
                expected: self.dims(),
                found: center.len(),
            });
        }
        self.c.push_row(ArrayView1::from(center)).expect("row shape checked");
        self.modes.push(mode);
        if let Err(e) = self.validate() {
            let k = self.c.nrows() - 1;
            self.c = self.c.slice(ndarray::s![..k, ..]).to_owned();
            self.modes.pop();
            return Err(e);
        }
        Ok(())
    }

    /// Centers as a K×d matrix (coded units).
    pub fn matrix(&self) -> ArrayView2<'_, T> {
        self.c.view()
    }

    /// Selection mode of each center, in insertion order.
    pub fn modes(&self) -> &[SelectionMode] {
        &self.modes
    }

    pub fn k(&self) -> usize {
        self.c.nrows()
    }

    pub fn dims(&self) -> usize {
        self.c.ncols()
    }
}

/// One cluster of training points with its residual summary.
#[derive(Clone, Debug)]
pub struct ResidualCluster<T> {
    /// Training-set row indices belonging to the cluster.
    pub member_indices: Vec<usize>,
    /// Mean absolute prediction residual over the members.
    pub mean_abs_residual: T,
    /// Component-wise range of the members' coded inputs.
    pub bounding_box: Vec<(T, T)>,
}

fn dist2<T: Scalar>(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |s, (&x, &y)| s + (x - y) * (x - y))
}

fn slice_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |s, (&x, &y)| s + (x - y) * (x - y))
        .sqrt()
}

/// Smaller of (all pairwise center distances) and, when buffering, twice
/// each center's distance to the nearest domain face.
fn maximin_objective<T: Scalar>(c: &Array2<T>, buffer: bool) -> T {
    let k = c.nrows();
    let mut m = T::infinity();
    for i in 0..k {
        if buffer {
            let mut near = T::infinity();
            for &v in c.row(i) {
                near = near.min(v.min(T::one() - v));
            }
            m = m.min(T::of(2.0) * near);
        }
        for j in (i + 1)..k {
            m = m.min(dist2(c.row(i), c.row(j)).sqrt());
        }
    }
    m
}

/// Space-filling centers in `[0,1]^d` maximizing the minimum pairwise
/// distance — and, with `buffer` set, twice the distance to the domain
/// boundary, which keeps centers (and hence their local designs) away
/// from the edges. Stochastic exchange search followed by a
/// shrinking-step coordinate polish; deterministic for a fixed seed.
pub fn maximin_centers<T: Scalar>(
    k: usize,
    d: usize,
    buffer: bool,
    seed: u64,
) -> Result<CenterSet<T>> {
    if k == 0 || d == 0 {
        return Err(PalmError::InvalidArgument(
            "need at least one center and one dimension".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Array2::from_shape_fn((k, d), |_| T::of(rng.gen::<f64>()));
    let mut best = maximin_objective(&c, buffer);

    for _ in 0..EXCHANGE_PER_CENTER * k {
        let i = rng.gen_range(0..k);
        let saved: Vec<T> = c.row(i).to_vec();
        for j in 0..d {
            c[[i, j]] = T::of(rng.gen::<f64>());
        }
        let v = maximin_objective(&c, buffer);
        if v > best {
            best = v;
        } else {
            for (j, &s) in saved.iter().enumerate() {
                c[[i, j]] = s;
            }
        }
    }

    let mut step = T::of(0.25);
    while step >= T::of(1e-4) {
        for _sweep in 0..64 {
            let mut improved = false;
            for i in 0..k {
                for j in 0..d {
                    for dir in [step, -step] {
                        let old = c[[i, j]];
                        let cand = (old + dir).max(T::zero()).min(T::one());
                        if cand == old {
                            continue;
                        }
                        c[[i, j]] = cand;
                        let v = maximin_objective(&c, buffer);
                        if v > best {
                            best = v;
                            improved = true;
                        } else {
                            c[[i, j]] = old;
                        }
                    }
                }
            }
            if !improved {
                break;
            }
        }
        step = step * T::of(0.5);
    }

    CenterSet::new(c, SelectionMode::Spacefill)
}

/// Result of one k-means run.
#[derive(Clone, Debug)]
pub struct Kmeans<T> {
    /// Cluster index of each input row.
    pub assignments: Vec<usize>,
    /// Final k×q centroid matrix.
    pub centroids: Array2<T>,
    /// Within-cluster sum of squares after each Lloyd iteration.
    pub wcss: Vec<T>,
}

/// Lloyd's algorithm from greedy distance-weighted seeding, run to an
/// assignment fixpoint or 100 iterations; empty clusters are re-seeded
/// with the point farthest from its current centroid.
pub fn kmeans<T: Scalar>(points: ArrayView2<'_, T>, k: usize, seed: u64) -> Result<Kmeans<T>> {
    let m = points.nrows();
    let q = points.ncols();
    if k == 0 || k > m {
        return Err(PalmError::InvalidArgument(format!(
            "cannot form {k} clusters from {m} points"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // distance-weighted seeding: each new centroid drawn with probability
    // proportional to squared distance from the chosen ones
    let mut centroids = Array2::zeros((k, q));
    let first = rng.gen_range(0..m);
    centroids.row_mut(0).assign(&points.row(first));
    let mut d2: Vec<f64> = (0..m)
        .map(|i| dist2(points.row(i), centroids.row(0)).as_f64())
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut t = rng.gen::<f64>() * total;
            let mut pick = m - 1;
            for (i, &w) in d2.iter().enumerate() {
                if t < w {
                    pick = i;
                    break;
                }
                t -= w;
            }
            pick
        } else {
            rng.gen_range(0..m)
        };
        centroids.row_mut(c).assign(&points.row(pick));
        for (i, v) in d2.iter_mut().enumerate() {
            *v = v.min(dist2(points.row(i), centroids.row(c)).as_f64());
        }
    }

    let mut assignments = vec![usize::MAX; m];
    let mut wcss = Vec::new();
    for _ in 0..100 {
        let new_assign: Vec<usize> = (0..m)
            .map(|i| {
                let mut best = (T::infinity(), 0);
                for c in 0..k {
                    let dd = dist2(points.row(i), centroids.row(c));
                    if dd < best.0 {
                        best = (dd, c);
                    }
                }
                best.1
            })
            .collect();
        let mut assign = new_assign;
        let mut counts = vec![0usize; k];
        for &a in &assign {
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let mut far: Option<(usize, f64)> = None;
            for i in 0..m {
                if counts[assign[i]] < 2 {
                    continue;
                }
                let dd = dist2(points.row(i), centroids.row(assign[i])).as_f64();
                if far.map_or(true, |(_, fd)| dd > fd) {
                    far = Some((i, dd));
                }
            }
            let (i, _) = far.expect("k <= m guarantees a donor cluster");
            counts[assign[i]] -= 1;
            assign[i] = c;
            counts[c] = 1;
        }
        for c in 0..k {
            let mut mean = vec![T::zero(); q];
            for i in 0..m {
                if assign[i] == c {
                    for (j, s) in mean.iter_mut().enumerate() {
                        *s = *s + points[[i, j]];
                    }
                }
            }
            let inv = T::one() / T::of_usize(counts[c]);
            for (j, s) in mean.iter().enumerate() {
                centroids[[c, j]] = *s * inv;
            }
        }
        let obj = (0..m).fold(T::zero(), |s, i| {
            s + dist2(points.row(i), centroids.row(assign[i]))
        });
        wcss.push(obj);
        let done = assign == assignments;
        assignments = assign;
        if done {
            break;
        }
    }

    Ok(Kmeans {
        assignments,
        centroids,
        wcss,
    })
}

/// Groups training rows by cluster, recording each cluster's mean
/// absolute residual and the coded bounding box of its members.
pub fn residual_clusters<T: Scalar>(
    coded: ArrayView2<'_, T>,
    abs_residuals: &[T],
    assignments: &[usize],
    k: usize,
) -> Vec<ResidualCluster<T>> {
    let d = coded.ncols();
    (0..k)
        .filter_map(|c| {
            let member_indices: Vec<usize> = assignments
                .iter()
                .enumerate()
                .filter(|&(_, &a)| a == c)
                .map(|(i, _)| i)
                .collect();
            if member_indices.is_empty() {
                return None;
            }
            let mean_abs_residual = member_indices
                .iter()
                .fold(T::zero(), |s, &i| s + abs_residuals[i])
                / T::of_usize(member_indices.len());
            let mut bounding_box = vec![(T::infinity(), T::neg_infinity()); d];
            for &i in &member_indices {
                for j in 0..d {
                    let v = coded[[i, j]];
                    bounding_box[j].0 = bounding_box[j].0.min(v);
                    bounding_box[j].1 = bounding_box[j].1.max(v);
                }
            }
            Some(ResidualCluster {
                member_indices,
                mean_abs_residual,
                bounding_box,
            })
        })
        .collect()
}

/// Smallest positive gap between distinct sorted values of a coded
/// column — one "grid spacing" of the training design.
fn grid_spacing<T: Scalar>(coded: ArrayView2<'_, T>, dim: usize) -> T {
    let mut vals: Vec<T> = coded.column(dim).to_vec();
    vals.sort_by(|a, b| a.partial_cmp(b).expect("coded inputs are finite"));
    let mut gap = T::infinity();
    for w in vals.windows(2) {
        let g = w[1] - w[0];
        if g > T::zero() {
            gap = gap.min(g);
        }
    }
    if gap.is_finite() {
        gap
    } else {
        T::of(1e-3)
    }
}

fn box_corners<T: Scalar>(bx: &[(T, T)], seed: u64) -> Vec<Vec<T>> {
    let d = bx.len();
    if d <= MAX_FULL_CORNER_DIM {
        (0..(1usize << d))
            .map(|mask| {
                (0..d)
                    .map(|j| if mask >> j & 1 == 1 { bx[j].1 } else { bx[j].0 })
                    .collect()
            })
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::with_capacity(MAX_SAMPLED_CORNERS);
        while out.len() < MAX_SAMPLED_CORNERS && seen.len() < MAX_SAMPLED_CORNERS * 4 {
            let mask: Vec<bool> = (0..d).map(|_| rng.gen::<bool>()).collect();
            if seen.insert(mask.clone()) {
                out.push(
                    mask.iter()
                        .enumerate()
                        .map(|(j, &hi)| if hi { bx[j].1 } else { bx[j].0 })
                        .collect(),
                );
            }
        }
        out
    }
}

/// Bounded Nelder–Mead maximization: evaluations are projected into the
/// box, so the simplex may propose outside but only in-box points are
/// ever returned.
fn nelder_mead_box_max<T: Scalar>(
    f: &(impl Fn(&[T]) -> T + Sync),
    start: &[T],
    bx: &[(T, T)],
    budget: usize,
) -> (Vec<T>, T) {
    let d = start.len();
    let project = |x: &[T]| -> Vec<T> {
        x.iter()
            .enumerate()
            .map(|(j, &v)| v.max(bx[j].0).min(bx[j].1))
            .collect()
    };
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[T]| -> T {
        evals.set(evals.get() + 1);
        f(&project(x))
    };

    let mut verts: Vec<(Vec<T>, T)> = Vec::with_capacity(d + 1);
    let v0 = project(start);
    let f0 = eval(&v0);
    verts.push((v0, f0));
    for j in 0..d {
        let mut v = verts[0].0.clone();
        let width = bx[j].1 - bx[j].0;
        let step = T::of(0.1) * if width > T::zero() { width } else { T::of(1e-3) };
        v[j] = if v[j] + step <= bx[j].1 { v[j] + step } else { v[j] - step };
        let fv = eval(&v);
        verts.push((v, fv));
    }

    while evals.get() < budget {
        verts.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite objective"));
        let spread = verts[0].1 - verts[d].1;
        if spread <= T::of(1e-14) * (verts[0].1.abs() + T::one()) {
            break;
        }
        let centroid: Vec<T> = (0..d)
            .map(|j| {
                verts[..d]
                    .iter()
                    .fold(T::zero(), |s, (v, _)| s + v[j])
                    / T::of_usize(d)
            })
            .collect();
        let worst = verts[d].0.clone();
        let reflect: Vec<T> = (0..d)
            .map(|j| centroid[j] + (centroid[j] - worst[j]))
            .collect();
        let fr = eval(&reflect);
        if fr > verts[0].1 {
            let expand: Vec<T> = (0..d)
                .map(|j| centroid[j] + T::of(2.0) * (centroid[j] - worst[j]))
                .collect();
            let fe = eval(&expand);
            verts[d] = if fe > fr {
                (project(&expand), fe)
            } else {
                (project(&reflect), fr)
            };
        } else if fr > verts[d - 1].1 {
            verts[d] = (project(&reflect), fr);
        } else {
            let contract: Vec<T> = (0..d)
                .map(|j| centroid[j] + T::of(0.5) * (worst[j] - centroid[j]))
                .collect();
            let fc = eval(&contract);
            if fc > verts[d].1 {
                verts[d] = (project(&contract), fc);
            } else {
                let best = verts[0].0.clone();
                for v in verts.iter_mut().skip(1) {
                    let shrunk: Vec<T> = (0..d)
                        .map(|j| best[j] + T::of(0.5) * (v.0[j] - best[j]))
                        .collect();
                    let fs = eval(&shrunk);
                    *v = (project(&shrunk), fs);
                    if evals.get() >= budget {
                        break;
                    }
                }
            }
        }
    }
    verts.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite objective"));
    verts.swap_remove(0)
}

/// A proposed new center with the evidence behind it.
#[derive(Clone, Debug)]
pub struct NextCenter<T> {
    /// The chosen location, coded units, strictly inside `bounding_box`.
    pub center: Vec<T>,
    /// Min distance from `center` to existing centers and box corners.
    pub objective: T,
    /// Search box around the worst residual cluster (after any
    /// degenerate-dimension inflation).
    pub bounding_box: Vec<(T, T)>,
    /// Objective at each multi-start's random starting point.
    pub start_objectives: Vec<T>,
    /// The cluster that drove the search.
    pub cluster: ResidualCluster<T>,
}

/// Picks where the next expert should go: predicts at every training
/// input, clusters inputs bound with min-max-scaled absolute residuals
/// into as many clusters as the model has experts, boxes the cluster
/// with the worst mean residual, and space-fills inside the box —
/// maximizing the minimum distance to existing centers and the box
/// corners with `multi_starts` bounded derivative-free searches.
pub fn select_next_center<T: Scalar>(
    m: &PalmModel<T>,
    data: &TrainingSet<T>,
    multi_starts: usize,
    seed: u64,
) -> Result<NextCenter<T>> {
    if multi_starts == 0 {
        return Err(PalmError::InvalidArgument(
            "need at least one multi-start".into(),
        ));
    }
    if data.coding().bounds() != m.coding().bounds() {
        return Err(PalmError::InvalidArgument(
            "training set coding differs from the model's".into(),
        ));
    }
    let n = data.n();
    let d = data.dims();
    let natural = data.natural();
    let residuals: Vec<T> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = natural.row(i);
            m.predict(row.as_slice().expect("contiguous row"))
                .map(|p| (data.y()[i] - p.mean).abs())
        })
        .collect::<Result<_>>()?;

    let rmin = residuals.iter().cloned().fold(T::infinity(), T::min);
    let rmax = residuals.iter().cloned().fold(T::neg_infinity(), T::max);
    let span = rmax - rmin;
    let bound = Array2::from_shape_fn((n, d + 1), |(i, j)| {
        if j < d {
            data.coded()[[i, j]]
        } else if span > T::zero() {
            (residuals[i] - rmin) / span
        } else {
            T::zero()
        }
    });

    let km = kmeans(bound.view(), m.k(), seed)?;
    let clusters = residual_clusters(data.coded(), &residuals, &km.assignments, m.k());
    let target = clusters
        .into_iter()
        .max_by(|a, b| {
            a.mean_abs_residual
                .partial_cmp(&b.mean_abs_residual)
                .expect("finite residuals")
        })
        .expect("at least one non-empty cluster");

    let mut bounding_box = target.bounding_box.clone();
    for (j, b) in bounding_box.iter_mut().enumerate() {
        if b.1 - b.0 <= T::of(1e-12) {
            let s = grid_spacing(data.coded(), j);
            let half = s * T::of(0.5);
            b.0 = (b.0 - half).max(T::zero());
            b.1 = (b.1 + half).min(T::one());
        }
    }

    let mut anchors: Vec<Vec<T>> = m
        .experts()
        .iter()
        .map(|e| m.coding().encode(e.center()))
        .collect::<Result<_>>()?;
    anchors.extend(box_corners(&bounding_box, seed));
    let objective = |c: &[T]| -> T {
        anchors
            .iter()
            .map(|z| slice_dist(c, z))
            .fold(T::infinity(), T::min)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
    let starts: Vec<Vec<T>> = (0..multi_starts)
        .map(|_| {
            bounding_box
                .iter()
                .map(|&(lo, hi)| lo + T::of(rng.gen::<f64>()) * (hi - lo))
                .collect()
        })
        .collect();
    let start_objectives: Vec<T> = starts.iter().map(|s| objective(s)).collect();
    let solutions: Vec<(Vec<T>, T)> = starts
        .par_iter()
        .map(|s| nelder_mead_box_max(&objective, s, &bounding_box, OPTIM_BUDGET))
        .collect();
    let best = solutions
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            a.1.partial_cmp(&b.1)
                .expect("finite objective")
                .then(ib.cmp(ia))
        })
        .expect("at least one multi-start")
        .0;
    let (mut center, value) = solutions[best].clone();
    for (j, b) in bounding_box.iter().enumerate() {
        let eps = (b.1 - b.0) * T::of(1e-9);
        center[j] = center[j].max(b.0 + eps).min(b.1 - eps);
    }

    Ok(NextCenter {
        center,
        objective: value,
        bounding_box,
        start_objectives,
        cluster: target,
    })
}

fn derive_seed(master: u64, step: u64) -> u64 {
    master ^ step.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Fits a model on a buffered maximin seed of `k_init` centers, then
/// grows it one expert at a time to `k_final`, recalibrating the full
/// model after each addition. Returns the model and the center set with
/// its selection history.
pub fn sequential_palm<T: Scalar>(
    data: &TrainingSet<T>,
    k_init: usize,
    k_final: usize,
    cfg: &PalmConfig<T>,
) -> Result<(PalmModel<T>, CenterSet<T>)> {
    sequential_palm_with(data, k_init, k_final, cfg, DEFAULT_MULTISTARTS)
}

/// [`sequential_palm`] with an explicit multi-start count for each
/// center search.
pub fn sequential_palm_with<T: Scalar>(
    data: &TrainingSet<T>,
    k_init: usize,
    k_final: usize,
    cfg: &PalmConfig<T>,
    multi_starts: usize,
) -> Result<(PalmModel<T>, CenterSet<T>)> {
    if k_init == 0 || k_init > k_final {
        return Err(PalmError::InvalidArgument(format!(
            "need 1 <= k_init <= k_final, got {k_init} and {k_final}"
        )));
    }
    let d = data.dims();
    let mut centers = maximin_centers::<T>(k_init, d, true, cfg.seed)?;
    let natural = {
        let mut nat = Array2::zeros((k_init, d));
        for (i, row) in centers.matrix().rows().into_iter().enumerate() {
            let dec = data
                .coding()
                .decode(row.as_slice().expect("contiguous row"))?;
            for (j, v) in dec.into_iter().enumerate() {
                nat[[i, j]] = v;
            }
        }
        nat
    };
    let mut model = fit_palm(data, natural.view(), cfg)?;
    for step in 0..(k_final - k_init) {
        let pick = select_next_center(&model, data, multi_starts, derive_seed(cfg.seed, step as u64))?;
        let natural_c = data.coding().decode(&pick.center)?;
        add_center(&mut model, data, &natural_c, cfg)?;
        centers.push(&pick.center, SelectionMode::Sequential)?;
    }
    Ok((model, centers))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1};

    #[test]
    fn single_buffered_center_sits_at_the_middle() {
        let set = maximin_centers::<f64>(1, 2, true, 3).unwrap();
        assert_abs_diff_eq!(set.matrix()[[0, 0]], 0.5, epsilon = 0.02);
        assert_abs_diff_eq!(set.matrix()[[0, 1]], 0.5, epsilon = 0.02);
    }

    #[test]
    fn unbuffered_pair_takes_the_endpoints() {
        let set = maximin_centers::<f64>(2, 1, false, 11).unwrap();
        let mut xs = [set.matrix()[[0, 0]], set.matrix()[[1, 0]]];
        xs.sort_by(f64::total_cmp);
        assert_eq!(xs, [0.0, 1.0]);
    }

    #[test]
    fn buffered_pair_backs_away_from_the_boundary() {
        // brute-force grid argmax of min(gap, 2*boundary distances) is
        // (0.25, 0.75) with objective 0.5
        let set = maximin_centers::<f64>(2, 1, true, 11).unwrap();
        let mut xs = [set.matrix()[[0, 0]], set.matrix()[[1, 0]]];
        xs.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(xs[0], 0.25, epsilon = 0.02);
        assert_abs_diff_eq!(xs[1], 0.75, epsilon = 0.02);
        assert_abs_diff_eq!(xs[0] + xs[1], 1.0, epsilon = 0.01);
    }

    fn min_pairwise(c: ArrayView2<'_, f64>) -> f64 {
        let k = c.nrows();
        let mut m = f64::INFINITY;
        for i in 0..k {
            for j in (i + 1)..k {
                m = m.min(dist2(c.row(i), c.row(j)).sqrt());
            }
        }
        m
    }

    #[test]
    fn maximin_beats_uniform_random_designs() {
        let set = maximin_centers::<f64>(100, 2, false, 7).unwrap();
        let ours = min_pairwise(set.matrix());
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for _ in 0..20 {
            let random = Array2::from_shape_fn((100, 2), |_| rng.gen::<f64>());
            assert!(
                ours > min_pairwise(random.view()),
                "maximin separation {ours} not better than a uniform draw"
            );
        }
    }

    #[test]
    fn maximin_is_deterministic_per_seed() {
        let a = maximin_centers::<f64>(9, 2, true, 42).unwrap();
        let b = maximin_centers::<f64>(9, 2, true, 42).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        let c = maximin_centers::<f64>(9, 2, true, 43).unwrap();
        assert_ne!(a.matrix(), c.matrix());
    }

    #[test]
    fn center_set_rejects_out_of_domain_and_duplicates() {
        assert!(CenterSet::new(array![[0.2, 1.4]], SelectionMode::Spacefill).is_err());
        assert!(
            CenterSet::new(array![[0.2, 0.3], [0.2, 0.3]], SelectionMode::Spacefill).is_err()
        );
        let mut set = CenterSet::new(array![[0.2, 0.3]], SelectionMode::Spacefill).unwrap();
        assert!(set.push(&[0.2, 0.3], SelectionMode::Sequential).is_err());
        assert_eq!(set.k(), 1);
        set.push(&[0.6, 0.6], SelectionMode::Sequential).unwrap();
        assert_eq!(set.k(), 2);
        assert_eq!(
            set.modes(),
            &[SelectionMode::Spacefill, SelectionMode::Sequential]
        );
    }

    #[test]
    fn kmeans_splits_two_obvious_blobs() {
        let pts = array![[0.0], [0.1], [10.0], [10.1]];
        let km = kmeans(pts.view(), 2, 5).unwrap();
        assert_eq!(km.assignments[0], km.assignments[1]);
        assert_eq!(km.assignments[2], km.assignments[3]);
        assert_ne!(km.assignments[0], km.assignments[2]);

        // brute force: of all 2-partitions, {01}/{23} has the least WCSS
        let wcss = |groups: [&[usize]; 2]| -> f64 {
            groups
                .iter()
                .map(|g| {
                    let mean = g.iter().map(|&i| pts[[i, 0]]).sum::<f64>() / g.len() as f64;
                    g.iter().map(|&i| (pts[[i, 0]] - mean).powi(2)).sum::<f64>()
                })
                .sum()
        };
        let best = wcss([&[0, 1], &[2, 3]]);
        for split in [
            [&[0usize, 2][..], &[1usize, 3][..]],
            [&[0, 3][..], &[1, 2][..]],
            [&[0][..], &[1, 2, 3][..]],
            [&[1][..], &[0, 2, 3][..]],
            [&[2][..], &[0, 1, 3][..]],
            [&[3][..], &[0, 1, 2][..]],
        ] {
            assert!(wcss([split[0], split[1]]) > best);
        }
        assert_abs_diff_eq!(*km.wcss.last().unwrap(), best, epsilon = 1e-12);
    }

    #[test]
    fn kmeans_with_k_equal_m_gives_singletons() {
        let pts = array![[0.0, 0.0], [0.5, 0.1], [0.9, 0.8]];
        let km = kmeans(pts.view(), 3, 2).unwrap();
        let mut seen = km.assignments.clone();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2]);
        assert!(*km.wcss.last().unwrap() <= 1e-15);
    }

    #[test]
    fn kmeans_objective_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts = Array2::from_shape_fn((60, 2), |_| rng.gen::<f64>());
        let km = kmeans(pts.view(), 4, 17).unwrap();
        for w in km.wcss.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "objective rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn kmeans_reseeds_empty_clusters() {
        // five identical points at 0 and five at 5: three distinct
        // centroids cannot all survive assignment without re-seeding
        let mut rows = vec![[0.0]; 5];
        rows.extend(vec![[5.0]; 5]);
        let pts = Array2::from_shape_vec((10, 1), rows.concat()).unwrap();
        let km = kmeans(pts.view(), 3, 1).unwrap();
        let mut counts = [0usize; 3];
        for &a in &km.assignments {
            counts[a] += 1;
        }
        assert!(counts.iter().all(|&c| c > 0), "counts {counts:?}");
        assert!(kmeans(pts.view(), 11, 1).is_err());
    }

    #[test]
    fn residual_clusters_box_their_members_exactly() {
        let coded = array![[0.1, 0.2], [0.3, 0.9], [0.8, 0.5]];
        let clusters = residual_clusters(coded.view(), &[1.0, 3.0, 10.0], &[0, 0, 1], 2);
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].member_indices, vec![0, 1]);
        assert_abs_diff_eq!(clusters[0].mean_abs_residual, 2.0, epsilon = 1e-15);
        assert_eq!(clusters[0].bounding_box, vec![(0.1, 0.3), (0.2, 0.9)]);
        assert_eq!(clusters[1].bounding_box, vec![(0.8, 0.8), (0.5, 0.5)]);
    }

    fn bump_corpus() -> TrainingSet<f64> {
        let n = 200;
        let x = Array2::from_shape_fn((n, 1), |(i, _)| 20.0 * i as f64 / (n - 1) as f64);
        let y = Array1::from_shape_fn(n, |i| {
            let t: f64 = x[[i, 0]] - 17.0;
            (-t * t / 0.1).exp()
        });
        TrainingSet::new(x, y).unwrap()
    }

    #[test]
    fn next_center_lands_in_the_high_residual_blob() {
        let data = bump_corpus();
        let mut cfg = PalmConfig::<f64>::default();
        cfg.local.n = 30;
        cfg.local.n_cand = 200;
        let model = fit_palm(&data, array![[3.0], [8.0]].view(), &cfg).unwrap();
        let pick = select_next_center(&model, &data, 10, 99).unwrap();

        // the box covers the bump and the center is (near) its middle
        let natural = data.coding().decode(&pick.center).unwrap();
        assert!(
            natural[0] > 16.0 && natural[0] < 18.0,
            "picked {} outside the poorly predicted bump",
            natural[0]
        );
        let (lo, hi) = pick.bounding_box[0];
        let mid = 0.5 * (lo + hi);
        assert!(pick.center[0] > lo && pick.center[0] < hi);
        assert_abs_diff_eq!(pick.center[0], mid, epsilon = 0.05 * (hi - lo).max(1e-9));

        // optimizer contract: the accepted point beats every start
        for &s in &pick.start_objectives {
            assert!(pick.objective >= s - 1e-12);
        }
        // admissibility: never an existing center
        for e in model.experts() {
            let c = model.coding().encode(e.center()).unwrap();
            assert_ne!(c, pick.center);
        }
    }

    #[test]
    fn residuals_used_for_clustering_match_an_independent_pass() {
        let data = bump_corpus();
        let mut cfg = PalmConfig::<f64>::default();
        cfg.local.n = 30;
        cfg.local.n_cand = 200;
        let model = fit_palm(&data, array![[3.0], [8.0]].view(), &cfg).unwrap();
        let pick = select_next_center(&model, &data, 3, 5).unwrap();
        let r: Vec<f64> = (0..data.n())
            .map(|i| {
                let x = [data.natural()[[i, 0]]];
                (data.y()[i] - model.predict(&x).unwrap().mean).abs()
            })
            .collect();
        let mean = pick
            .cluster
            .member_indices
            .iter()
            .map(|&i| r[i])
            .sum::<f64>()
            / pick.cluster.member_indices.len() as f64;
        assert_eq!(mean, pick.cluster.mean_abs_residual);
    }

    #[test]
    fn sequential_growth_tracks_history_and_is_deterministic() {
        let n = 100;
        let x = Array2::from_shape_fn((n, 1), |(i, _)| 20.0 * i as f64 / (n - 1) as f64);
        let y = Array1::from_shape_fn(n, |i| x[[i, 0]].sin());
        let data = TrainingSet::new(x, y).unwrap();
        let mut cfg = PalmConfig::<f64>::default();
        cfg.local.n = 25;
        cfg.local.n_cand = 100;

        let (model, centers) = sequential_palm(&data, 2, 4, &cfg).unwrap();
        assert_eq!(model.k(), 4);
        assert_eq!(centers.k(), 4);
        assert_eq!(
            centers.modes(),
            &[
                SelectionMode::Spacefill,
                SelectionMode::Spacefill,
                SelectionMode::Sequential,
                SelectionMode::Sequential
            ]
        );
        let (_, again) = sequential_palm(&data, 2, 4, &cfg).unwrap();
        assert_eq!(centers.matrix(), again.matrix());

        let (seed_only, seed_centers) = sequential_palm(&data, 3, 3, &cfg).unwrap();
        assert_eq!(seed_only.k(), 3);
        assert!(seed_centers
            .modes()
            .iter()
            .all(|&m| m == SelectionMode::Spacefill));
        assert!(sequential_palm(&data, 5, 4, &cfg).is_err());
    }
}
