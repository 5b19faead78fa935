#![allow(dead_code)]

use hedgefront::{f_mutual_information, DiscreteProblem, Generator, Table};
use hedgefront::probe::SolverBox;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Prior bounded away from zero, losses uniform on [0, 1].
pub fn random_problem(rng: &mut ChaCha8Rng, ns: usize, na: usize) -> DiscreteProblem<f64> {
    let mut prior: Vec<f64> = (0..ns).map(|_| rng.random::<f64>() + 0.05).collect();
    let z: f64 = prior.iter().sum();
    prior.iter_mut().for_each(|x| *x /= z);
    DiscreteProblem::new(prior, Table::from_fn(ns, na, |_, _| rng.random::<f64>())).unwrap()
}

/// Rejects problems where one action is best for every stimulus; those never
/// leave the zero-information channel.
pub fn nondegenerate(rng: &mut ChaCha8Rng, ns: usize, na: usize) -> DiscreteProblem<f64> {
    loop {
        let p = random_problem(rng, ns, na);
        let best = |s: usize| (0..na).fold(0, |b, a| if p.loss().get(s, a) < p.loss().get(s, b) { a } else { b });
        if (1..ns).any(|s| best(s) != best(0)) {
            return p;
        }
    }
}

/// Rows with every entry at least `floor` before normalization.
pub fn random_rows(rng: &mut ChaCha8Rng, ns: usize, na: usize, floor: f64) -> Vec<Vec<f64>> {
    (0..ns)
        .map(|_| {
            let r: Vec<f64> = (0..na).map(|_| rng.random::<f64>() + floor).collect();
            let z: f64 = r.iter().sum();
            r.iter().map(|x| x / z).collect()
        })
        .collect()
}

pub fn smooth_three() -> [Generator<f64>; 3] {
    [Generator::kl(), Generator::pearson_chi2(), Generator::sq_hellinger()]
}

/// Smallest beta on the ladder 0.25 * 1.25^k with visible information.
pub fn onset(gen: &Generator<f64>, problem: &DiscreteProblem<f64>, bb: &SolverBox) -> f64 {
    let mut b = 0.25;
    while f_mutual_information(gen, problem, &bb.channel(problem.loss(), b).unwrap()).unwrap().to_float() < 1e-6 {
        b *= 1.25;
    }
    b
}

/// `sum_s P(s) sum_a m(a) f(q/m)` for possibly unnormalized rows, from the
/// closed forms of the three smooth reference generators.
pub fn info_closed_form(id: &str, prior: &[f64], rows: &[Vec<f64>]) -> f64 {
    let f = |x: f64| match id {
        "kl" => {
            if x == 0.0 {
                1.0
            } else {
                x * x.ln() - x + 1.0
            }
        }
        "pearson_chi2" => (x - 1.0) * (x - 1.0),
        "sq_hellinger" => (x.sqrt() - 1.0).powi(2),
        _ => panic!("no closed form for {id}"),
    };
    let k = rows[0].len();
    let m: Vec<f64> = (0..k).map(|a| rows.iter().zip(prior).map(|(q, p)| p * q[a]).sum()).collect();
    let mut total = 0.0;
    for (q, p) in rows.iter().zip(prior) {
        for a in 0..k {
            if m[a] > 0.0 {
                total += p * m[a] * f(q[a] / m[a]);
            }
        }
    }
    total
}
