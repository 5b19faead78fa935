#![allow(clippy::excessive_precision, clippy::approx_constant)]

mod common;

use common::{random_problem, random_rows, rng};
use hedgefront::learning::kmeans;
use hedgefront::probe::{default_t_nodes, estimate_certificate, estimate_loss, SolverBox};
use hedgefront::{
    adversarial_penalty, certificate, divergence, effective_loss_grid, expected_loss, f_mutual_information,
    indifference_residual, marginal_correction, optimal_perturbation, product_tail_bound, project, solve_f, solve_kl,
    tail_transfer, trace, Channel, DiscreteProblem, Ext, Generator, GeneratorKind, SolveConfig, Table, TailQuery,
};

fn catalog() -> Vec<Generator<f64>> {
    GeneratorKind::ALL
        .iter()
        .map(|&k| match k {
            GeneratorKind::HockeyStick => Generator::hockey_stick(2.0).unwrap(),
            k => Generator::new(k).unwrap(),
        })
        .collect()
}

fn finite(e: Ext<f64>) -> f64 {
    e.finite().expect("finite value")
}

// Values at x = 0.25, 0.5, 1, 2, 4 from a 40-digit evaluation of the textbook
// forms; hockey_stick uses gamma = 2.
const TABLE: [(&str, [f64; 5]); 9] = [
    ("kl", [0.40342640972002734529, 0.15342640972002734529, 0.0, 0.38629436111989061883, 2.5451774444795624753]),
    ("pearson_chi2", [0.5625, 0.25, 0.0, 1.0, 9.0]),
    ("sq_hellinger", [0.25, 0.085786437626904951198, 0.0, 0.1715728752538099024, 1.0]),
    ("reverse_kl", [0.63629436111989061883, 0.19314718055994530942, 0.0, 0.30685281944005469058, 1.6137056388801093812]),
    ("neyman_chi2", [2.25, 0.5, 0.0, 0.5, 2.25]),
    ("total_variation", [0.375, 0.25, 0.0, 0.5, 1.5]),
    ("jensen_shannon", [0.12046547313859839368, 0.042474759198849368225, 0.0, 0.08494951839769873645, 0.48186189255439357471]),
    ("triangular", [0.225, 0.083333333333333333333, 0.0, 0.16666666666666666667, 0.9]),
    ("hockey_stick", [0.0, 0.0, 0.0, 0.0, 2.0]),
];

#[test]
fn generator_values_match_reference_table() {
    let xs = [0.25, 0.5, 1.0, 2.0, 4.0];
    for g in catalog() {
        let (_, want) = TABLE.iter().find(|(id, _)| *id == g.id()).unwrap();
        for (x, w) in xs.iter().zip(want) {
            let got = finite(g.f_value(*x).unwrap());
            assert!((got - w).abs() < 1e-12, "{} at {x}: {got} vs {w}", g.id());
        }
    }
}

#[test]
fn conjugates_match_numeric_suprema() {
    // sup_x xy - f(x), located by high-precision bisection on f'(x) = y
    let rows: [(GeneratorKind, [f64; 3]); 4] = [
        (GeneratorKind::ReverseKl, [-0.69314718055994530942, -0.22314355131420975577, 0.22314355131420975577]),
        (GeneratorKind::NeymanChi2, [-0.8284271247461900976, -0.23606797749978969641, 0.21114561800016824287]),
        (GeneratorKind::JensenShannon, [-0.31154063019983194962, -0.16589828287559311321, 0.33846440377395274008]),
        (GeneratorKind::Triangular, [-0.46410161513775458705, -0.1994897427831780982, 0.25080666151703324593]),
    ];
    for (k, want) in rows {
        let g = Generator::<f64>::new(k).unwrap();
        for (y, w) in [-1.0, -0.25, 0.2].iter().zip(want) {
            let got = finite(g.f_conjugate(*y));
            assert!((got - w).abs() < 1e-9, "{k} at {y}: {got} vs {w}");
        }
    }
    // Pearson's closed form holds down to f'(0) = -2; below it the sup sits at x = 0
    assert_eq!(finite(Generator::pearson_chi2().f_conjugate(-3.0)), -1.0);
    for y in [-1.5, -0.5, 0.3, 0.9] {
        assert!((finite(Generator::kl().f_conjugate(y)) - y.exp_m1()).abs() < 1e-14);
        assert!((finite(Generator::pearson_chi2().f_conjugate(y)) - (y + y * y / 4.0)).abs() < 1e-14);
        assert!((finite(Generator::sq_hellinger().f_conjugate(y)) - y / (1.0 - y)).abs() < 1e-13);
    }
}

fn symmetric_two_by_two() -> DiscreteProblem<f64> {
    DiscreteProblem::new(vec![0.5, 0.5], Table::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()).unwrap()
}

#[test]
fn kl_two_by_two_is_logistic() {
    let p = symmetric_two_by_two();
    for beta in [0.5f64, 2.0, 5.0] {
        let hit = 1.0 / (1.0 + (-beta).exp());
        let info = std::f64::consts::LN_2 + hit * hit.ln() + (1.0 - hit) * (1.0 - hit).ln();
        for ch in [
            solve_kl(&p, &SolveConfig::new(beta).with_tol(1e-12)).unwrap().channel,
            solve_f(&Generator::kl(), &p, &SolveConfig::new(beta).with_tol(1e-12)).unwrap().channel,
        ] {
            assert!((ch.get(0, 0) - hit).abs() < 1e-9);
            assert!((ch.get(1, 1) - hit).abs() < 1e-9);
            let i = finite(f_mutual_information(&Generator::kl(), &p, &ch).unwrap());
            assert!((i - info).abs() < 1e-9);
            let cert = certificate(&Generator::kl(), &p, &ch, beta).unwrap();
            assert!((cert - (1.0 - hit + info / beta)).abs() < 1e-9);
        }
    }
}

fn random_channel(seed: u64, ns: usize, na: usize) -> (DiscreteProblem<f64>, Channel<f64>) {
    let mut r = rng(seed);
    let p = random_problem(&mut r, ns, na);
    let rows = random_rows(&mut r, ns, na, 0.05);
    let ch = Channel::new(p.prior(), Table::from_rows(rows).unwrap()).unwrap();
    (p, ch)
}

#[test]
fn pearson_correction_is_one_minus_second_moment() {
    let (p, ch) = random_channel(11, 3, 3);
    let g = marginal_correction(&Generator::pearson_chi2(), &p, &ch).unwrap();
    for (a, ga) in g.iter().enumerate() {
        let m = ch.marginal()[a];
        let second: f64 = (0..3).map(|s| p.prior()[s] * (ch.get(s, a) / m).powi(2)).sum();
        assert!((ga - (1.0 - second)).abs() < 1e-13);
    }
    assert!(marginal_correction(&Generator::kl(), &p, &ch).unwrap().iter().all(|&x| x == 0.0));
}

#[test]
fn kl_hedge_is_log_ratio_and_costs_nothing() {
    let (p, ch) = random_channel(12, 4, 3);
    let beta = 1.7;
    let t = optimal_perturbation(&Generator::kl(), &p, &ch, beta).unwrap();
    for s in 0..4 {
        for a in 0..3 {
            let want = (ch.get(s, a) / ch.marginal()[a]).ln() / beta;
            assert!((finite(t.values.get(s, a)) - want).abs() < 1e-13);
        }
    }
    // f*(beta C) = r - 1 averages to zero under the product law
    assert!(finite(t.penalty).abs() < 1e-13);
}

#[test]
fn hellinger_penalty_is_infinite_past_the_boundary() {
    let (p, ch) = random_channel(13, 2, 2);
    let beta = 2.0;
    let mut values = Table::filled(2, 2, Ext::Finite(0.0));
    assert_eq!(adversarial_penalty(&Generator::sq_hellinger(), &p, &ch, &values, beta).unwrap(), Ext::Finite(0.0));
    values.set(1, 0, Ext::Finite(1.5 / beta));
    assert_eq!(adversarial_penalty(&Generator::sq_hellinger(), &p, &ch, &values, beta).unwrap(), Ext::PosInf);
}

#[test]
fn doubling_beta_halves_the_gap() {
    let (p, ch) = random_channel(14, 3, 4);
    for g in [Generator::kl(), Generator::pearson_chi2(), Generator::sq_hellinger()] {
        let l = expected_loss(&p, &ch).unwrap();
        let gap1 = certificate(&g, &p, &ch, 1.3).unwrap() - l;
        let gap2 = certificate(&g, &p, &ch, 2.6).unwrap() - l;
        assert!((gap1 - 2.0 * gap2).abs() < 1e-13, "{}", g.id());
    }
    let indep = Channel::independent(p.prior(), &[0.1, 0.2, 0.3, 0.4]).unwrap();
    let l = expected_loss(&p, &indep).unwrap();
    assert!((certificate(&Generator::pearson_chi2(), &p, &indep, 3.0).unwrap() - l).abs() < 1e-14);
}

#[test]
fn kl_dual_is_tight_per_stimulus() {
    let mut r = rng(15);
    let p = random_problem(&mut r, 4, 4);
    let beta = 3.0;
    let g = Generator::kl();
    let ch = solve_kl(&p, &SolveConfig::new(beta).with_tol(1e-12)).unwrap().channel;
    let t = optimal_perturbation(&g, &p, &ch, beta).unwrap();
    for s in 0..4 {
        let mut lhs = 0.0;
        for a in (0..4).filter(|&a| ch.marginal()[a] > 0.0) {
            let c = finite(t.values.get(s, a));
            lhs += ch.get(s, a) * c - ch.marginal()[a] * finite(g.f_conjugate(beta * c)) / beta;
        }
        let row: Vec<f64> = (0..4).map(|a| ch.get(s, a)).collect();
        let d = finite(divergence(&g, &row, ch.marginal()).unwrap());
        assert!((lhs - d / beta).abs() < 1e-8);
    }
}

#[test]
fn shifted_hedge_entry_moves_the_residual_by_the_expected_pattern() {
    let loss = Table::from_rows(vec![vec![0.0, 1.0, 0.8], vec![1.0, 0.0, 0.6], vec![0.7, 0.9, 0.0]]).unwrap();
    let p = DiscreteProblem::new(vec![0.3, 0.3, 0.4], loss).unwrap();
    let g = Generator::kl();
    let ch = solve_kl(&p, &SolveConfig::new(2.0).with_tol(1e-13)).unwrap().channel;
    let mut t = optimal_perturbation(&g, &p, &ch, 2.0).unwrap();
    let base = indifference_residual(&p, &ch, &t).unwrap();
    let eps = 1e-3;
    let v = finite(t.values.get(1, 2));
    t.values.set(1, 2, Ext::Finite(v + eps));
    let rep = indifference_residual(&p, &ch, &t).unwrap();
    // full support of three actions: the shifted entry is off the mean by 2 eps / 3
    assert!((rep.on_support[1] - eps * (1.0 - 1.0 / 3.0)).abs() < 1e-8 + base.on_support[1]);
    assert!((rep.on_support[0] - base.on_support[0]).abs() < 1e-15);
}

#[test]
fn effective_loss_grid_recomposes() {
    let mut r = rng(17);
    let p = random_problem(&mut r, 3, 3);
    let g = Generator::sq_hellinger();
    let betas = [0.5, 2.0, 8.0];
    let grid = effective_loss_grid(&g, &p, &betas, &betas, &SolveConfig::new(1.0)).unwrap();
    for (i, &b) in betas.iter().enumerate() {
        let ch = solve_f(&g, &p, &SolveConfig::new(b)).unwrap().channel;
        let l = expected_loss(&p, &ch).unwrap();
        let info = finite(f_mutual_information(&g, &p, &ch).unwrap());
        assert!((grid.get(i, i) - certificate(&g, &p, &ch, b).unwrap()).abs() < 1e-6);
        for (j, &adv) in betas.iter().enumerate() {
            assert!((grid.get(i, j) - (l + info / adv)).abs() < 1e-6);
            if j > 0 {
                assert!(grid.get(i, j) <= grid.get(i, j - 1) + 1e-12);
            }
        }
    }
}

#[test]
fn vanishing_beta_sits_at_the_best_constant_policy() {
    let mut r = rng(18);
    let p = random_problem(&mut r, 4, 3);
    let curve = trace(&Generator::pearson_chi2(), &p, &[1e-6], &SolveConfig::new(1e-6), false).unwrap();
    let pt = &curve.points[0];
    let best = (0..3)
        .map(|a| (0..4).map(|s| p.prior()[s] * p.loss().get(s, a)).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    assert!(pt.info_native < 1e-9);
    assert!((pt.loss - best).abs() < 1e-5);
}

#[test]
fn traced_points_are_not_dominated_by_grid_channels() {
    let mut r = rng(19);
    let p = random_problem(&mut r, 2, 2);
    for g in [Generator::kl(), Generator::pearson_chi2(), Generator::sq_hellinger()] {
        let betas = hedgefront::geometric_grid(0.5, 50.0, 10).unwrap();
        let curve = trace(&g, &p, &betas, &SolveConfig::new(0.5).with_tol(1e-11), false).unwrap();
        let n = 400;
        let mut grid = Vec::new();
        for i in 0..=n {
            for j in 0..=n {
                let (a, b) = (i as f64 / n as f64, j as f64 / n as f64);
                let ch = Channel::new(p.prior(), Table::from_rows(vec![vec![a, 1.0 - a], vec![b, 1.0 - b]]).unwrap()).unwrap();
                if let Ext::Finite(info) = f_mutual_information(&g, &p, &ch).unwrap() {
                    grid.push((info, expected_loss(&p, &ch).unwrap()));
                }
            }
        }
        for pt in &curve.points {
            for &(info, loss) in &grid {
                if info <= pt.info_native + 1e-6 {
                    assert!(loss >= pt.loss - 1e-5, "{} beta {}: grid ({info}, {loss}) beats ({}, {})", g.id(), pt.beta, pt.info_native, pt.loss);
                }
            }
        }
    }
}

#[test]
fn projection_recomputes_only_the_horizontal_coordinate() {
    let mut r = rng(20);
    let p = random_problem(&mut r, 3, 4);
    let betas = hedgefront::geometric_grid(0.3, 30.0, 6).unwrap();
    let curve = trace(&Generator::pearson_chi2(), &p, &betas, &SolveConfig::new(0.3), true).unwrap();
    let kl = Generator::kl();
    let projected = project(&curve, &p, &kl).unwrap();
    for (a, b) in curve.points.iter().zip(&projected.points) {
        let want = finite(f_mutual_information(&kl, &p, a.channel.as_ref().unwrap()).unwrap());
        assert!((b.info_projected["kl"].unwrap() - want).abs() < 1e-12);
        assert_eq!((a.loss, a.certificate, a.info_native), (b.loss, b.certificate, b.info_native));
    }
    let native = trace(&kl, &p, &betas, &SolveConfig::new(0.3), true).unwrap();
    let same = project(&native, &p, &kl).unwrap();
    for pt in &same.points {
        assert!((pt.info_projected["kl"].unwrap() - pt.info_native).abs() < 1e-12);
    }
}

#[test]
fn tail_closed_forms_and_scan() {
    let q = |gen, bu: f64| product_tail_bound(&TailQuery { gen, u: bu, info: 0.0, phi: 0.0, beta: 1.0 }).unwrap();
    assert!((q(Generator::kl(), 4f64.ln()) - 0.25).abs() < 1e-15);
    assert!((q(Generator::pearson_chi2(), 2.0) - 0.25).abs() < 1e-15);
    assert!((q(Generator::sq_hellinger(), 0.5) - 0.5).abs() < 1e-15);

    let d = tail_transfer(&Generator::pearson_chi2(), 0.25, 0.12).unwrap();
    assert!((d - (0.25 + (0.12f64 * 0.25 * 0.75).sqrt())).abs() < 1e-12);

    // largest p on a 1e6 grid with KL(Bern(p) || Bern(0.1)) <= 0.5
    let (qb, info) = (0.1f64, 0.5);
    let kl = |p: f64| p * (p / qb).ln() + if p < 1.0 { (1.0 - p) * ((1.0 - p) / (1.0 - qb)).ln() } else { 0.0 };
    let n = 1_000_000;
    let scan = (0..=n).map(|i| qb + (1.0 - qb) * i as f64 / n as f64).filter(|&p| kl(p) <= info).fold(qb, f64::max);
    let d = tail_transfer(&Generator::kl(), qb, info).unwrap();
    assert!((d - scan).abs() < 1e-6, "{d} vs {scan}");
}

#[test]
fn kmeans_recovers_planted_means() {
    let mut r = rng(21);
    use rand::Rng;
    let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
    let mut points = Vec::new();
    for c in &centers {
        for _ in 0..20 {
            points.push(vec![c[0] + r.random_range(-0.5..0.5), c[1] + r.random_range(-0.5..0.5)]);
        }
    }
    let means: Vec<Vec<f64>> = (0..3)
        .map(|k| (0..2).map(|d| points[20 * k..20 * k + 20].iter().map(|p| p[d]).sum::<f64>() / 20.0).collect())
        .collect();
    let fit = kmeans(&points, 3, 5, 100).unwrap();
    for m in &means {
        let nearest = fit
            .centers
            .iter()
            .map(|c| c.iter().zip(m).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min);
        assert!(nearest < 1e-6);
    }
}

#[test]
fn white_box_estimates() {
    let mut r = rng(22);
    let p = random_problem(&mut r, 3, 3);
    let bb = SolverBox::new(Generator::kl(), p.clone()).unwrap();
    let ch = bb.channel(p.loss(), 2.0).unwrap();
    let l = estimate_loss(&bb, p.loss(), 2.0, 0).unwrap();
    assert!((l - expected_loss(&p, &ch).unwrap()).abs() < 1e-12);

    let flat = Table::filled(3, 3, 0.7);
    let est = estimate_certificate(&bb, &flat, 2.0, &default_t_nodes(9), 0).unwrap();
    assert!((est.certificate - 0.7).abs() < 1e-12);
}
