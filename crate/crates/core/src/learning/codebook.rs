use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Codebook {
    pub codes: Vec<Vec<f64>>,
    /// Soft-assignment scale: weights are `exp(-d^2 / (2 T^2))`.
    pub temperature: f64,
}

impl Codebook {
    pub fn new(codes: Vec<Vec<f64>>, temperature: f64) -> Result<Self> {
        if codes.len() < 2 {
            return Err(Error::Invalid("a codebook needs at least two codes".into()));
        }
        if !(temperature > 0.0) {
            return Err(Error::Invalid(format!("temperature must be positive, got {temperature}")));
        }
        let d = codes[0].len();
        if codes.iter().any(|c| c.len() != d) {
            return Err(Error::Shape("codes differ in length".into()));
        }
        Ok(Self { codes, temperature })
    }

    pub fn k(&self) -> usize {
        self.codes.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    pub centers: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    centers
        .iter()
        .enumerate()
        .map(|(j, c)| (j, sq_dist(point, c)))
        .fold((0, f64::INFINITY), |b, x| if x.1 < b.1 { x } else { b })
}

fn plus_plus(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // every point already coincides with a centre
            Err(_) => rng.random_range(0..points.len()),
        };
        centers.push(points[next].clone());
        let c = centers.last().unwrap();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, c));
        }
    }
    centers
}

/// k-means++ seeding followed by Lloyd iterations until the assignment repeats or
/// `max_iter` is reached. An emptied cluster keeps its previous centre.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<KMeans> {
    if k == 0 || points.len() < k {
        return Err(Error::Invalid(format!("need at least k = {k} points, got {}", points.len())));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Shape("points differ in length".into()));
    }
    let mut rng = crate::seed::rng(seed, &[0x6b6d]);
    let mut centers = plus_plus(points, k, &mut rng);
    let mut assignment = vec![usize::MAX; points.len()];
    let mut objective = Vec::new();
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut changed = false;
        let mut total = 0.0;
        for (p, slot) in points.iter().zip(assignment.iter_mut()) {
            let (j, d) = nearest(p, &centers);
            total += d;
            if *slot != j {
                *slot = j;
                changed = true;
            }
        }
        objective.push(total);
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &j) in points.iter().zip(&assignment) {
            counts[j] += 1;
            for (s, v) in sums[j].iter_mut().zip(p) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                let c = counts[j] as f64;
                centers[j] = sums[j].iter().map(|s| s / c).collect();
            }
        }
    }
    Ok(KMeans {
        centers,
        assignment,
        objective,
        iterations,
    })
}

fn distinct(centers: &[Vec<f64>]) -> usize {
    let mut n = 0;
    for (i, c) in centers.iter().enumerate() {
        if centers[..i].iter().all(|d| d != c) {
            n += 1;
        }
    }
    n
}

/// Median pairwise code distance over sqrt(2).
pub fn median_temperature(codes: &[Vec<f64>]) -> f64 {
    let mut d: Vec<f64> = Vec::new();
    for i in 0..codes.len() {
        for j in 0..i {
            d.push(sq_dist(&codes[i], &codes[j]).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len() / 2;
    let med = if d.len() % 2 == 1 { d[m] } else { 0.5 * (d[m - 1] + d[m]) };
    med / std::f64::consts::SQRT_2
}

/// Codebook of `k` codes from pilot predictions, with the median-distance temperature
/// unless one is given. A collapse to fewer than `k` distinct codes is retried once
/// with a fresh seed.
pub fn build_codebook(pilots: &[Vec<f64>], k: usize, seed: u64, temperature: Option<f64>) -> Result<Codebook> {
    if k < 2 {
        return Err(Error::Invalid(format!("codebook size must be at least 2, got {k}")));
    }
    let mut result = kmeans(pilots, k, seed, 100)?;
    if distinct(&result.centers) < k {
        result = kmeans(pilots, k, crate::seed::derive(seed, &[1]), 100)?;
        let d = distinct(&result.centers);
        if d < k {
            return Err(Error::numeric("build_codebook", format!("only {d} distinct codes out of {k} after reseeding")));
        }
    }
    let t = temperature.unwrap_or_else(|| median_temperature(&result.centers));
    Codebook::new(result.centers, t)
}

/// Weights proportional to `exp(-|x - c|^2 / (2 T^2))`. When they all underflow the
/// nearest code takes the whole mass.
pub fn soft_assign(prediction: &[f64], codebook: &Codebook) -> Vec<f64> {
    let d2: Vec<f64> = codebook.codes.iter().map(|c| sq_dist(prediction, c)).collect();
    let scale = 2.0 * codebook.temperature * codebook.temperature;
    let mut w: Vec<f64> = d2.iter().map(|d| (-d / scale).exp()).collect();
    let z: f64 = w.iter().sum();
    if z > 0.0 && z.is_finite() {
        w.iter_mut().for_each(|x| *x /= z);
        return w;
    }
    // shifting by the nearest distance is exact and recovers from underflow
    let dmin = d2.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = d2.iter().map(|d| (-(d - dmin) / scale).exp()).collect();
    let z: f64 = w.iter().sum();
    if z.is_finite() && z > 0.0 && w.iter().all(|x| x.is_finite()) {
        w.iter_mut().for_each(|x| *x /= z);
        return w;
    }
    let (j, _) = nearest(prediction, &codebook.codes);
    let mut w = vec![0.0; codebook.k()];
    w[j] = 1.0;
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equidistant_codes_split_evenly() {
        let cb = Codebook::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], 0.7).unwrap();
        let w = soft_assign(&[0.0, 3.0], &cb);
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cold_assignment_is_a_point_mass() {
        let cb = Codebook::new(vec![vec![0.0], vec![1.0], vec![5.0]], 1e-200).unwrap();
        assert_eq!(soft_assign(&[1.0], &cb), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn k_equal_to_distinct_points_returns_them() {
        let pts = vec![vec![0.0, 1.0], vec![3.0, 3.0], vec![-2.0, 5.0]];
        let cb = build_codebook(&pts, 3, 5, None).unwrap();
        let mut got = cb.codes.clone();
        got.sort_by(|a, b| a[0].total_cmp(&b[0]));
        let mut want = pts.clone();
        want.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(got, want);
    }
}
