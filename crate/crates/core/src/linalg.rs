//! Small dense solves for the Newton polish. Problems here are a few
//! hundred unknowns at most, so plain elimination is enough.

use crate::scalar::Scalar;

/// Solves `A x = b` in place by Gaussian elimination with partial pivoting.
/// `a` is row-major `n x n`. Returns `None` when a pivot vanishes.
pub(crate) fn solve_dense<T: Scalar>(n: usize, a: &mut [T], b: &mut [T]) -> Option<Vec<T>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() || !scale.is_finite() {
        return None;
    }
    let tiny = scale * T::epsilon() * T::lit(1e-4);
    for k in 0..n {
        let (p, pv) = (k..n)
            .map(|i| (i, a[i * n + k].abs()))
            .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pv <= tiny {
            return None;
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }
        let pivot = a[k * n + k];
        for i in (k + 1)..n {
            let factor = a[i * n + k] / pivot;
            if factor == T::zero() {
                continue;
            }
            a[i * n + k] = T::zero();
            for j in (k + 1)..n {
                a[i * n + j] = a[i * n + j] - factor * a[k * n + j];
            }
            b[i] = b[i] - factor * b[k];
        }
    }
    let mut x = vec![T::zero(); n];
    for k in (0..n).rev() {
        let mut acc = b[k];
        for j in (k + 1)..n {
            acc = acc - a[k * n + j] * x[j];
        }
        x[k] = acc / a[k * n + k];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Euclidean projection of `v` onto the probability simplex.
pub(crate) fn project_simplex<T: Scalar>(v: &[T]) -> Vec<T> {
    let mut u: Vec<T> = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (i, &ui) in u.iter().enumerate() {
        cumsum = cumsum + ui;
        let t = (cumsum - T::one()) / T::from_usize(i + 1).unwrap();
        if ui - t > T::zero() {
            theta = t;
        }
    }
    let mut out: Vec<T> = v.iter().map(|&x| (x - theta).max(T::zero())).collect();
    let total: T = out.iter().copied().sum();
    if total > T::zero() {
        out.iter_mut().for_each(|x| *x = *x / total);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let mut a = vec![0.0f64, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let mut b = vec![5.0, 2.0, 6.0];
        let x = solve_dense(3, &mut a, &mut b).unwrap();
        let expect = [1.0, 1.0, 3.0];
        for (xi, ei) in x.iter().zip(expect) {
            assert!((xi - ei).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_is_none() {
        let mut a = vec![1.0f64, 2.0, 2.0, 4.0];
        let mut b = vec![1.0, 2.0];
        assert!(solve_dense(2, &mut a, &mut b).is_none());
    }

    #[test]
    fn projection_lands_on_simplex() {
        let p = project_simplex(&[0.5f64, 0.8, -0.3]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(p.iter().all(|&x| x >= 0.0));
        assert!((p[0] - 0.35).abs() < 1e-12 && (p[1] - 0.65).abs() < 1e-12 && p[2] == 0.0);
        let q = project_simplex(&[0.2f64, 0.3, 0.5]);
        assert!((q[0] - 0.2).abs() < 1e-15);
    }
}
