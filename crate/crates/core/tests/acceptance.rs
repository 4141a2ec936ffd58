//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use steadychain::experiments::{
    run_panel_a, run_panel_b_c_d, run_robustness, run_scaling, ExperimentConfig, ExperimentOutput, SweepAxis,
    SweepParameter, SweepResultRow,
};
use steadychain::liouvillian::total_liouvillian;
use steadychain::metrics::{fidelity, pair_concurrence};
use steadychain::model::xy_coupling_matrix;
use steadychain::operators::{chain_hamiltonian, jw_mode_operator, mode_excitation_state};
use steadychain::solvers::{evolve, relative_residual, steady_state, steady_state_from};
use steadychain::{ChainSpec, DensityMatrix, Frame, NoiseSpec, ReservoirSpec, SolverOptions, StateVector};

type Check = (bool, String);

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn fidelities(rows: &[SweepResultRow]) -> Vec<f64> {
    rows.iter().map(|r| r.fidelity.unwrap_or(f64::NAN)).collect()
}

fn all_ok(out: &ExperimentOutput) -> Result<(), String> {
    match out.rows.iter().find(|r| r.failed) {
        Some(r) => Err(format!("row N={} failed: {}", r.n, r.error)),
        None => Ok(()),
    }
}

fn engineered_fixed_point() -> Result<Check, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let quiet = NoiseSpec::new(0.0, 0.0, 0.0).map_err(|e| e.to_string())?;
    let gamma = 100.0;
    let opts = SolverOptions { max_time: Some(200.0 / gamma), ..SolverOptions::time_marching() };
    let mut worst: f64 = 1.0;
    for n in 3..=5 {
        let spec = ChainSpec::new(n, 1000.0).unwrap();
        let mut res = vec![ReservoirSpec::pump(1, gamma)];
        res.extend((2..=n).map(|k| ReservoirSpec::cool(k, gamma)));
        let l = total_liouvillian(&spec, &res, &quiet, Frame::Lab).map_err(|e| e.to_string())?;
        let target = mode_excitation_state(&spec, 1).unwrap();
        for _ in 0..5 {
            let start = DensityMatrix::random(spec.dim(), &mut rng);
            let rho = steady_state_from(&l, &opts, Some(&start)).map_err(|e| format!("N={n}: {e}"))?;
            worst = worst.min(fidelity(&rho, &target).unwrap());
        }
    }
    Ok((worst >= 1.0 - 1e-6, format!("min fidelity {worst:.12} over 15 random starts")))
}

fn panel_a_point() -> Result<Check, String> {
    let mut f = Vec::new();
    for frame in [Frame::Lab, Frame::Interaction] {
        let cfg = ExperimentConfig {
            frame,
            sweep: vec![
                SweepAxis::new(SweepParameter::Nbar, vec![0.001]),
                SweepAxis::new(SweepParameter::GammaOverKappa, vec![50.0]),
            ],
            ..ExperimentConfig::default()
        };
        let out = run_panel_a(&cfg, 1).map_err(|e| e.to_string())?;
        all_ok(&out)?;
        f.push(out.rows[0].fidelity.unwrap());
    }
    Ok((f[0] >= 0.85, format!("fidelity lab {:.4}, interaction {:.4}", f[0], f[1])))
}

fn reservoir_trend(bcd: &ExperimentOutput) -> Result<Check, String> {
    all_ok(bcd)?;
    let f = fidelities(&bcd.rows);
    let monotone = f.windows(2).all(|w| w[1] >= w[0] - 0.02);
    let pass = f[0] <= 0.75 && f[f.len() - 1] >= 0.9 && monotone;
    let list: Vec<String> = f.iter().map(|v| format!("{v:.4}")).collect();
    Ok((pass, format!("fidelity by reservoir count [{}]", list.join(", "))))
}

fn purity_and_concurrence(bcd: &ExperimentOutput) -> Result<Check, String> {
    let row = bcd.rows.iter().find(|r| r.reservoir_count == 5).ok_or("no 5-reservoir row")?;
    let (p, c) = (row.purity.ok_or("no purity")?, row.concurrence.ok_or("no concurrence")?);
    // ideal: 2 |c_2 c_3| of the target amplitudes
    let ideal = 2.0 * (amplitude(5, 2, 1) * amplitude(5, 3, 1)).abs();
    let pass = p >= 0.85 && (c - ideal).abs() <= 0.1;
    Ok((pass, format!("purity {p:.4}, concurrence {c:.4} vs ideal {ideal:.4}")))
}

fn robustness(out: &ExperimentOutput) -> Result<Check, String> {
    all_ok(out)?;
    let late = |p: f64| {
        out.rows.iter().filter(|r| r.percent == Some(p) && r.trial == Some(-1)).last().and_then(|r| r.fidelity)
    };
    let base = late(0.0).ok_or("no baseline")?;
    let mut pass = true;
    let mut parts = vec![format!("baseline {base:.4}")];
    for p in [0.1, 0.2, 0.3] {
        let m = late(p).ok_or("missing mean row")?;
        pass &= (m - base).abs() <= 0.05;
        parts.push(format!("{:.0}% {m:.4}", p * 100.0));
    }
    Ok((pass, parts.join(", ")))
}

fn scaling(out: &ExperimentOutput) -> Result<Check, String> {
    all_ok(out)?;
    let f = fidelities(&out.rows);
    let p: Vec<f64> = out.rows.iter().map(|r| r.purity.unwrap_or(f64::NAN)).collect();
    let decreasing = p.windows(2).all(|w| w[1] < w[0]);
    let spread = f.iter().cloned().fold(f64::MIN, f64::max) - f.iter().cloned().fold(f64::MAX, f64::min);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ");
    Ok((decreasing && spread <= 0.1, format!("purity [{}], fidelity spread {spread:.4}", fmt(&p))))
}

fn oracle_equivalence() -> Result<Check, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for n in 1..=3 {
        let j = 1.0 + rng.random::<f64>();
        let spec = ChainSpec::new(n, j).unwrap();
        let mut res = Vec::new();
        let (mut pumped, mut cooled) = (Vec::new(), Vec::new());
        for k in 1..=n {
            let g = rng.random_range(0.1..3.0);
            if k == 1 {
                res.push(ReservoirSpec::pump(k, g));
                pumped.push((k, g));
            } else {
                res.push(ReservoirSpec::cool(k, g));
                cooled.push((k, g));
            }
        }
        let (kappa, kappa_phi, nbar) = (rng.random_range(0.1..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..0.5));
        let noise = NoiseSpec::new(kappa, kappa_phi, nbar).unwrap();
        let ops = jumps(n, &pumped, &cooled, kappa, kappa_phi, nbar);
        let h = hamiltonian(n, j);
        for frame in [Frame::Lab, Frame::Interaction] {
            let l = total_liouvillian(&spec, &res, &noise, frame).map_err(|e| e.to_string())?;
            for _ in 0..20 {
                let rho = random_density(1 << n, &mut rng);
                let want = lindblad_rhs((frame == Frame::Lab).then_some(&h), &ops, &rho);
                worst = worst.max(max_abs(&(l.apply(&rho).map_err(|e| e.to_string())? - want)));
                count += 1;
            }
        }
    }
    Ok((worst <= 1e-12, format!("max deviation {worst:.2e} over {count} states")))
}

fn algebraic_suite(solved: &[&ExperimentOutput], trajectories: &ExperimentOutput) -> Result<Check, String> {
    let mut car: f64 = 0.0;
    let mut reconstruction: f64 = 0.0;
    for n in 1..=5 {
        let spec = ChainSpec::new(n, 0.9).unwrap();
        let d = spec.dim();
        let f: Vec<M> = (1..=n).map(|k| jw_mode_operator(&spec, k).unwrap().to_dense()).collect();
        for a in 0..n {
            for b in 0..n {
                let delta = if a == b { M::identity(d, d) } else { M::zeros(d, d) };
                car = car.max(max_abs(&(&f[a] * &f[b] + &f[b] * &f[a])));
                car = car.max(max_abs(&(&f[a] * f[b].adjoint() + f[b].adjoint() * &f[a] - delta)));
            }
        }
        let rebuilt = (0..n).fold(M::zeros(d, d), |acc, k| acc + f[k].adjoint() * &f[k] * c(frequency(n, 0.9, k + 1)));
        reconstruction = reconstruction.max(max_abs(&(chain_hamiltonian(&spec).to_dense() - rebuilt)));
    }

    let mut dispersion: f64 = 0.0;
    for n in 1..=8 {
        let model = xy_coupling_matrix(&ChainSpec::new(n, 1.0).unwrap()).diagonalize().map_err(|e| e.to_string())?;
        let w = model.mode_frequencies().ok_or("no frequencies")?;
        for k in 1..=n {
            dispersion = dispersion.max((w[k - 1] - frequency(n, 1.0, k)).abs());
        }
    }

    let psi = mode_excitation_state(&ChainSpec::new(5, 1.0).unwrap(), 1).unwrap();
    let amplitudes = (&psi.amplitudes - phi5()).iter().map(|v| v.norm()).fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut closed_form: f64 = 0.0;
    for n in 2..=5 {
        let raw: Vec<f64> = (0..n).map(|_| gaussian(&mut rng)).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let amps: Vec<f64> = raw.iter().map(|v| v / norm).collect();
        let rho = DensityMatrix::from_pure(&StateVector::new(single_excitation(n, &amps)));
        for i in 1..=n {
            for j in i + 1..=n {
                let got = pair_concurrence(&rho, i, j).map_err(|e| e.to_string())?;
                closed_form = closed_form.max((got - 2.0 * (amps[i - 1] * amps[j - 1]).abs()).abs());
            }
        }
    }

    let noise = NoiseSpec::new(1.0, 1.0, 0.001).unwrap();
    let spec = ChainSpec::new(4, 1000.0).unwrap();
    let mut res = vec![ReservoirSpec::pump(1, 100.0)];
    res.extend((2..=4).map(|k| ReservoirSpec::cool(k, 100.0)));
    let l = total_liouvillian(&spec, &res, &noise, Frame::Lab).map_err(|e| e.to_string())?;
    let grid: Vec<f64> = (0..=50).map(|i| 0.002 * i as f64).collect();
    let start = DensityMatrix::from_pure(&StateVector::all_down(4));
    let mut drift = evolve(&l, &start, &grid, &SolverOptions::default())
        .map_err(|e| e.to_string())?
        .iter()
        .map(|r| (r.matrix().trace().re - 1.0).abs())
        .fold(0.0, f64::max);
    drift = trajectories.rows.iter().filter_map(|r| r.trace_drift).fold(drift, f64::max);

    let opts = SolverOptions::default();
    let mut residual = relative_residual(&l, &steady_state(&l, &opts).map_err(|e| e.to_string())?);
    let mut solves = 1;
    for out in solved {
        for r in out.rows.iter().filter(|r| !r.failed) {
            residual = residual.max(r.residual.ok_or("accepted row without residual")?);
            solves += 1;
        }
    }

    let pass = car <= 1e-12
        && dispersion <= 1e-10
        && reconstruction <= 1e-10
        && amplitudes <= 1e-12
        && closed_form <= 1e-10
        && drift <= 1e-8
        && residual <= 1e-10;
    Ok((
        pass,
        format!(
            "CAR {car:.1e}, dispersion {dispersion:.1e}, H rebuild {reconstruction:.1e}, amplitudes {amplitudes:.1e}, \
             concurrence {closed_form:.1e}, trace drift {drift:.1e}, residual {residual:.1e} over {solves} solves"
        ),
    ))
}

fn report(id: usize, name: &str, limit: Duration, start: Instant, outcome: Result<Check, String>) -> bool {
    let took = start.elapsed();
    let (pass, detail) = match outcome {
        Ok((pass, detail)) if took <= limit => (pass, detail),
        Ok((_, detail)) => (false, format!("{detail}; took {:.1}s, limit {}s", took.as_secs_f64(), limit.as_secs())),
        Err(e) => (false, format!("error: {e}")),
    };
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("{tag} [{id}] {name} ({:.1}s): {detail}", took.as_secs_f64());
    pass
}

fn main() -> ExitCode {
    let w = workers();
    let mut results = Vec::new();

    let t = Instant::now();
    results.push(report(1, "engineered fixed point", Duration::from_secs(30), t, engineered_fixed_point()));

    let t = Instant::now();
    results.push(report(2, "single pump at gamma/kappa = 50", Duration::from_secs(10), t, panel_a_point()));

    let t = Instant::now();
    let bcd = run_panel_b_c_d(&ExperimentConfig::default(), w);
    let bcd_time = t.elapsed();
    let bcd = match bcd {
        Ok(out) => Some(out),
        Err(e) => {
            println!("FAIL [3] reservoir count trend: error: {e}");
            println!("FAIL [4] purity and concurrence: error: {e}");
            None
        }
    };
    if let Some(out) = &bcd {
        results.push(report(3, "reservoir count trend", Duration::from_secs(120), t, reservoir_trend(out)));
        let t4 = Instant::now() - bcd_time;
        results.push(report(4, "purity and concurrence", Duration::from_secs(120), t4, purity_and_concurrence(out)));
    } else {
        results.extend([false, false]);
    }

    let t = Instant::now();
    let rob = run_robustness(&ExperimentConfig::default(), w);
    let rob_check = rob.as_ref().map_err(|e| e.to_string()).and_then(robustness);
    results.push(report(5, "robustness to rate errors", Duration::from_secs(300), t, rob_check));

    let t = Instant::now();
    let cfg = ExperimentConfig {
        sweep: vec![SweepAxis::new(SweepParameter::N, (3..=7).map(|n| n as f64).collect())],
        ..ExperimentConfig::default()
    };
    let sc = run_scaling(&cfg, w);
    let sc_check = sc.as_ref().map_err(|e| e.to_string()).and_then(scaling);
    results.push(report(6, "scaling with chain length", Duration::from_secs(1200), t, sc_check));

    let t = Instant::now();
    results.push(report(7, "superoperator vs master equation", Duration::from_secs(60), t, oracle_equivalence()));

    let t = Instant::now();
    let check = match (&bcd, &rob, &sc) {
        (Some(b), Ok(r), Ok(s)) => algebraic_suite(&[b, s], r),
        _ => Err("upstream runs failed".into()),
    };
    results.push(report(8, "algebraic suite", Duration::from_secs(120), t, check));

    let passed = results.iter().filter(|p| **p).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
