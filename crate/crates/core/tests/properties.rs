use hedgefront::learning::{soft_assign, Codebook};
use hedgefront::probe::trapezoid;
use hedgefront::{
    binary_divergence, certificate, expected_loss, f_mutual_information, geometric_grid, solve_f, tail_transfer, Channel,
    DiscreteProblem, Ext, Generator, GeneratorKind, SolveConfig, Table,
};
use proptest::prelude::*;

fn smooth() -> impl Strategy<Value = Generator<f64>> {
    prop::sample::select(vec![
        GeneratorKind::Kl,
        GeneratorKind::PearsonChi2,
        GeneratorKind::SqHellinger,
        GeneratorKind::ReverseKl,
        GeneratorKind::NeymanChi2,
        GeneratorKind::JensenShannon,
        GeneratorKind::Triangular,
    ])
    .prop_map(|k| Generator::new(k).unwrap())
}

fn main_three() -> impl Strategy<Value = Generator<f64>> {
    prop::sample::select(vec![Generator::kl(), Generator::pearson_chi2(), Generator::sq_hellinger()])
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let z: f64 = v.iter().sum();
    v.into_iter().map(|x| x / z).collect()
}

/// Problem with an interior channel of the same shape.
fn instance() -> impl Strategy<Value = (DiscreteProblem<f64>, Channel<f64>)> {
    (2usize..5, 2usize..5).prop_flat_map(|(ns, na)| {
        (
            prop::collection::vec(0.05f64..1.0, ns),
            prop::collection::vec(prop::collection::vec(0.0f64..1.0, na), ns),
            prop::collection::vec(prop::collection::vec(0.02f64..1.0, na), ns),
        )
            .prop_map(|(prior, loss, rows)| {
                let prior = normalize(prior);
                let p = DiscreteProblem::new(prior.clone(), Table::from_rows(loss).unwrap()).unwrap();
                let rows: Vec<Vec<f64>> = rows.into_iter().map(normalize).collect();
                let ch = Channel::new(&prior, Table::from_rows(rows).unwrap()).unwrap();
                (p, ch)
            })
    })
}

fn info(g: &Generator<f64>, p: &DiscreteProblem<f64>, ch: &Channel<f64>) -> f64 {
    match f_mutual_information(g, p, ch).unwrap() {
        Ext::Finite(v) => v,
        other => panic!("information {other:?} on an interior channel"),
    }
}

proptest! {
    #[test]
    fn information_is_nonnegative_and_vanishes_on_independent_channels(g in smooth(), (p, ch) in instance()) {
        prop_assert!(info(&g, &p, &ch) >= -1e-12);
        let indep = Channel::independent(p.prior(), ch.marginal()).unwrap();
        prop_assert!(info(&g, &p, &indep).abs() < 1e-10);
    }

    #[test]
    fn information_is_convex_in_the_channel(g in smooth(), (p, a) in instance(), seed_rows in prop::collection::vec(0.02f64..1.0, 16), lam in 0.01f64..0.99) {
        let (ns, na) = (p.n_stimuli(), p.n_actions());
        let rows: Vec<Vec<f64>> = (0..ns).map(|s| normalize((0..na).map(|j| seed_rows[(s * na + j) % 16]).collect())).collect();
        let b = Channel::new(p.prior(), Table::from_rows(rows).unwrap()).unwrap();
        let mix = Table::from_fn(ns, na, |s, j| lam * a.get(s, j) + (1.0 - lam) * b.get(s, j));
        let m = Channel::new(p.prior(), mix).unwrap();
        prop_assert!(info(&g, &p, &m) <= lam * info(&g, &p, &a) + (1.0 - lam) * info(&g, &p, &b) + 1e-10);
    }

    #[test]
    fn coarsening_to_an_event_cannot_raise_information(g in main_three(), (p, ch) in instance(), mask in prop::collection::vec(any::<bool>(), 16)) {
        let (ns, na) = (p.n_stimuli(), p.n_actions());
        let (mut pe, mut qe) = (0.0, 0.0);
        for s in 0..ns {
            for a in 0..na {
                if mask[(s * na + a) % 16] {
                    pe += p.prior()[s] * ch.get(s, a);
                    qe += p.prior()[s] * ch.marginal()[a];
                }
            }
        }
        prop_assume!(qe > 1e-9 && qe < 1.0 - 1e-9);
        let pe = pe.min(1.0);
        let d = binary_divergence(&g, pe, qe).unwrap().to_float();
        prop_assert!(d <= info(&g, &p, &ch) + 1e-10);
    }

    #[test]
    fn certificate_identity_on_arbitrary_channels(g in main_three(), (p, ch) in instance(), beta in 0.05f64..50.0) {
        let direct = expected_loss(&p, &ch).unwrap() + info(&g, &p, &ch) / beta;
        prop_assert!((certificate(&g, &p, &ch, beta).unwrap() - direct).abs() < 1e-9);
    }

    #[test]
    fn fenchel_young(g in smooth(), x in 0.01f64..20.0, y in -5.0f64..5.0) {
        let fx = g.f_value(x).unwrap().to_float();
        if let Ext::Finite(c) = g.f_conjugate(y) {
            prop_assert!(fx + c >= x * y - 1e-10);
        }
        let d = g.f_prime(x).unwrap().to_float();
        let c = g.f_conjugate(d).to_float();
        prop_assert!((fx + c - x * d).abs() < 1e-10 * (1.0 + (x * d).abs()));
    }

    #[test]
    fn derivative_inverse_round_trips(g in smooth(), x in 0.01f64..50.0) {
        let y = g.f_prime(x).unwrap().to_float();
        let back = g.f_prime_inverse(y).unwrap();
        prop_assert!((back - x).abs() <= 1e-9 * x.max(1.0));
    }

    #[test]
    fn tail_transfer_is_at_least_q_bar_and_monotone(g in main_three(), q in 0.01f64..0.9, info in 0.0f64..2.0, dq in 0.0f64..0.05, di in 0.0f64..0.5) {
        let d = tail_transfer(&g, q, info).unwrap();
        prop_assert!(d >= q && d <= 1.0);
        prop_assert!(tail_transfer(&g, q, info + di).unwrap() >= d - 1e-12);
        prop_assert!(tail_transfer(&g, (q + dq).min(0.99), info).unwrap() >= d - 1e-12);
    }

    #[test]
    fn soft_assignment_is_a_distribution(codes in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 2..8), pred in prop::collection::vec(-10.0f64..10.0, 3), temp in 1e-3f64..10.0) {
        let book = Codebook::new(codes, temp).unwrap();
        let w = soft_assign(&pred, &book);
        prop_assert_eq!(w.len(), book.k());
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn geometric_grid_is_ascending_with_exact_ends(lo in 1e-4f64..10.0, ratio in 1.01f64..1e4, n in 2usize..40) {
        let hi = lo * ratio;
        let grid = geometric_grid(lo, hi, n).unwrap();
        prop_assert_eq!(grid.len(), n);
        prop_assert_eq!(grid[0], lo);
        prop_assert!((grid[n - 1] - hi).abs() <= 1e-12 * hi);
        prop_assert!(grid.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn trapezoid_is_exact_on_affine_functions(a in -5.0f64..5.0, b in -5.0f64..5.0, mut ts in prop::collection::vec(0.0f64..1.0, 0..10)) {
        ts.push(0.0);
        ts.push(1.0);
        ts.sort_by(f64::total_cmp);
        let nodes: Vec<(f64, f64)> = ts.iter().map(|&t| (t, a + b * t)).collect();
        prop_assert!((trapezoid(&nodes) - (a + b / 2.0)).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solved_channels_are_stochastic_and_converged(g in main_three(), (p, _) in instance(), beta in 0.1f64..30.0) {
        let rep = solve_f(&g, &p, &SolveConfig::new(beta)).unwrap();
        prop_assert!(rep.converged, "residual {}", rep.residual);
        prop_assert!(rep.residual <= 1e-8);
        for s in 0..p.n_stimuli() {
            let row: Vec<f64> = (0..p.n_actions()).map(|a| rep.channel.get(s, a)).collect();
            prop_assert!(row.iter().all(|&x| x >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // the solution is no worse than the best constant policy
        let best = (0..p.n_actions())
            .map(|a| (0..p.n_stimuli()).map(|s| p.prior()[s] * p.loss().get(s, a)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        prop_assert!(rep.free_energy <= best + 1e-10);
    }
}
