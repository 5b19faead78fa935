use hedgefront::seed::rng;
use hedgefront::{
    certificate, expected_loss, f_mutual_information, geometric_grid, optimal_perturbation, pareto_check, solve_f, trace,
    DiscreteProblem, Ext, Generator, SolveConfig, Table,
};
use rand::Rng;

use crate::CliError;

fn random_problem(seed: u64, k: u64) -> DiscreteProblem<f64> {
    let mut r = rng(seed, &[0x5e1f, k]);
    let prior: Vec<f64> = (0..3).map(|_| r.random::<f64>() + 0.1).collect();
    let z: f64 = prior.iter().sum();
    let prior = prior.iter().map(|p| p / z).collect();
    let loss = Table::from_fn(3, 3, |_, _| r.random::<f64>());
    DiscreteProblem::new(prior, loss).expect("valid random problem")
}

/// `I_f` of unnormalized rows, with the marginal they induce.
fn info_of_rows(gen: &Generator<f64>, prior: &[f64], rows: &[Vec<f64>]) -> f64 {
    let k = rows[0].len();
    let m: Vec<f64> = (0..k).map(|a| rows.iter().zip(prior).map(|(q, p)| p * q[a]).sum()).collect();
    let mut total = 0.0;
    for (q, p) in rows.iter().zip(prior) {
        for a in 0..k {
            if m[a] > 0.0 {
                total += p * m[a] * gen.f_value(q[a] / m[a]).map(Ext::to_float).unwrap_or(f64::NAN);
            }
        }
    }
    total
}

struct Outcome {
    name: &'static str,
    worst: f64,
    tol: f64,
}

fn identity(gens: &[Generator<f64>], seed: u64) -> Result<Outcome, hedgefront::Error> {
    let mut worst: f64 = 0.0;
    for (i, g) in gens.iter().enumerate() {
        for k in 0..3 {
            let p = random_problem(seed, 10 * i as u64 + k);
            for beta in [0.5, 3.0, 20.0] {
                let ch = solve_f(g, &p, &SolveConfig::new(beta).with_tol(1e-12))?.channel;
                let direct = expected_loss(&p, &ch)? + f_mutual_information(g, &p, &ch)?.to_float() / beta;
                worst = worst.max((certificate(g, &p, &ch, beta)? - direct).abs());
            }
        }
    }
    Ok(Outcome {
        name: "certificate identity",
        worst,
        tol: 1e-9,
    })
}

fn gradient(gens: &[Generator<f64>], seed: u64) -> Result<Outcome, hedgefront::Error> {
    let mut worst: f64 = 0.0;
    let h = 1e-6;
    for (i, g) in gens.iter().enumerate() {
        let p = random_problem(seed, 100 + i as u64);
        let beta = 2.0;
        let ch = solve_f(g, &p, &SolveConfig::new(beta).with_tol(1e-12))?.channel;
        let table = optimal_perturbation(g, &p, &ch, beta)?;
        let rows = ch.rows().to_rows();
        for s in 0..3 {
            for a in 0..3 {
                let (mut up, mut dn) = (rows.clone(), rows.clone());
                up[s][a] += h;
                dn[s][a] -= h;
                let fd = (info_of_rows(g, p.prior(), &up) - info_of_rows(g, p.prior(), &dn)) / (2.0 * h);
                let an = beta * p.prior()[s] * table.values.get(s, a).to_float();
                worst = worst.max((fd - an).abs() / an.abs().max(1e-3));
            }
        }
    }
    Ok(Outcome {
        name: "hedge gradient",
        worst,
        tol: 1e-5,
    })
}

fn pareto(seed: u64) -> Result<Outcome, hedgefront::Error> {
    let p = random_problem(seed, 200);
    let kl = Generator::kl();
    let chi = Generator::pearson_chi2();
    let grid = geometric_grid(0.3, 30.0, 12)?;
    let config = SolveConfig::new(grid[0]).with_tol(1e-11);
    let native = trace(&kl, &p, &grid, &config, true)?;
    let foreign = trace(&chi, &p, &grid, &config, true)?;
    let tol = 1e-6;
    let worst = pareto_check(&kl, &p, &native, &foreign, tol, &config)?
        .iter()
        .map(|c| c.excess)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Outcome {
        name: "pareto oracle",
        worst,
        tol,
    })
}

pub fn run(seed: u64) -> Result<(), CliError> {
    let gens = [Generator::kl(), Generator::pearson_chi2(), Generator::sq_hellinger()];
    let checks = [identity(&gens, seed), gradient(&gens, seed), pareto(seed)];
    let mut failed = 0;
    for c in checks {
        match c {
            Ok(o) if o.worst <= o.tol => println!("PASS {}: worst {:.3e} (tol {:.0e})", o.name, o.worst, o.tol),
            Ok(o) => {
                failed += 1;
                println!("FAIL {}: worst {:.3e} (tol {:.0e})", o.name, o.worst, o.tol);
            }
            Err(e) => {
                failed += 1;
                println!("FAIL {e}");
            }
        }
    }
    if failed > 0 {
        return Err(CliError::Numeric(format!("{failed} self-test checks failed")));
    }
    Ok(())
}
