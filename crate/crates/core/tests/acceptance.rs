//! Acceptance suite. Runs without the libtest harness so that the one-line
//! verdict for every criterion is always printed.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use fkg_overlap::cli::checks::{kernel_gap, psi_gradient_gaps, quadrature_gaps};
use fkg_overlap::exact::MAX_EXACT_SITES;
use fkg_overlap::mc::detailed_balance_check;
use fkg_overlap::stats::Stat;
use fkg_overlap::{
    aggregate, brute_force_replica, exact_solve, overlap_moments, run_mc, sample_disorder,
    DisorderAggregate, Engine, Family, LatticeGeometry, MCConfig, ModelSpec, ReplicaObservable,
    UpdateRule,
};

const SEED: u64 = 20240001;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn geom(d: usize, l: usize) -> Arc<LatticeGeometry> {
    Arc::new(LatticeGeometry::new(d, l).unwrap())
}

fn family_spec(family: Family, beta: f64, h: f64) -> ModelSpec {
    match family {
        Family::RandomField => ModelSpec::random_field(beta, h, 1.0),
        Family::BondDiluted => ModelSpec::bond_diluted(beta, h, 1.0, 0.6),
        Family::SiteDiluted => ModelSpec::site_diluted(beta, h, 1.0, 0.6),
    }
}

/// `a - b` exceeds the combined standard error.
fn clearly_below(small: Stat, large: Stat) -> bool {
    large.value - small.value > small.err.hypot(large.err)
}

fn c1_oracle() -> Verdict {
    let geoms = [geom(2, 2), geom(1, 6), geom(1, 8), geom(3, 2)];
    let moments = [
        ReplicaObservable::R12,
        ReplicaObservable::R12Sq,
        ReplicaObservable::R12R13,
    ];
    let mut worst = 0.0f64;
    let mut cases = 0;
    for family in Family::ALL {
        for beta in [0.5, 1.0] {
            for mu in [0.0, 0.2] {
                let spec = family_spec(family, beta, 0.3).with_mu(mu);
                for i in 0..50u64 {
                    let g = &geoms[i as usize % geoms.len()];
                    let real = sample_disorder(&spec, g, SEED, i).unwrap();
                    let sol = exact_solve(&real, beta, mu).unwrap();
                    let m = overlap_moments(&sol, &real.overlap_weights()).unwrap();
                    for f in moments {
                        let brute = brute_force_replica(&real, beta, mu, f).unwrap();
                        worst = worst.max((f.reduced(&m) - brute).abs());
                        cases += 1;
                    }
                }
            }
        }
    }
    verdict(
        worst <= 1e-10,
        format!("{cases} comparisons of q1, q2, q11, max |diff| = {worst:.2e} (tol 1e-10)"),
    )
}

fn c2_fkg() -> Verdict {
    let g = geom(2, 3);
    let mut worst = f64::INFINITY;
    let mut solves = 0;
    for family in Family::ALL {
        for beta in [0.3, 1.0] {
            for h in [0.0, 0.5] {
                let spec = family_spec(family, beta, h);
                let agg = aggregate(&spec, &g, 500, SEED, &Engine::Exact).unwrap();
                worst = worst.min(agg.min_fkg);
                solves += agg.n_samples;
            }
        }
    }
    verdict(
        worst >= -1e-12,
        format!("{solves} realizations on 3x3, min connected correlation = {worst:.3e}"),
    )
}

fn c3_gradients() -> Verdict {
    let mut worst = 0.0f64;
    for i in 0..20u64 {
        let family = Family::ALL[i as usize % 3];
        let g = if i < 10 { geom(2, 2) } else { geom(2, 3) };
        let spec = family_spec(family, 0.8, 0.3).with_mu(0.2);
        let real = sample_disorder(&spec, &g, SEED, i).unwrap();
        let (dh, dmu) = psi_gradient_gaps(&real, spec.beta, spec.mu).unwrap();
        worst = worst.max(dh).max(dmu);
    }
    verdict(
        worst <= 1e-6,
        format!("20 realizations (2x2, 3x3), max relative gap = {worst:.2e} (tol 1e-6)"),
    )
}

fn c4_quadrature() -> Verdict {
    let spec = ModelSpec::random_field(0.8, 0.3, 1.0).with_mu(0.2);
    let q = quadrature_gaps(&spec, 40).unwrap();
    verdict(
        q.integration_by_parts <= 1e-8 && q.pressure_derivative <= 1e-6,
        format!(
            "integration by parts gap {:.2e} (tol 1e-8), E<R12> = {:.10} vs pressure derivative gap {:.2e} (tol 1e-6)",
            q.integration_by_parts, q.eq1, q.pressure_derivative
        ),
    )
}

struct Scaling {
    /// Indexed by `[mu][L]` with `mu ∈ {0, 0.1, 0.2}` and `L ∈ {2, 3, 4}`.
    aggs: Vec<Vec<DisorderAggregate>>,
}

const SIDES: [usize; 3] = [2, 3, 4];
const MUS: [f64; 3] = [0.0, 0.1, 0.2];

fn scaling_runs() -> Scaling {
    let aggs = MUS
        .iter()
        .map(|&mu| {
            let spec = ModelSpec::random_field(0.8, 0.3, 1.0).with_mu(mu);
            SIDES
                .iter()
                .map(|&l| aggregate(&spec, &geom(2, l), 2000, SEED, &Engine::Exact).unwrap())
                .collect()
        })
        .collect();
    Scaling { aggs }
}

fn c5_concentration(s: &Scaling) -> Verdict {
    let rows = &s.aggs[0];
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .zip(SIDES)
        .map(|(a, l)| (((l * l) as f64).ln(), a.var_psi.value.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / pts.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
    let scaled: Vec<f64> = rows
        .iter()
        .zip(SIDES)
        .map(|(a, l)| a.var_psi.value * (l * l) as f64)
        .collect();
    let ratio = scaled.iter().cloned().fold(f64::MIN, f64::max)
        / scaled.iter().cloned().fold(f64::MAX, f64::min);
    verdict(
        (-1.4..=-0.6).contains(&slope) && ratio < 3.0,
        format!(
            "slope = {slope:.4} (window [-1.4, -0.6]), |L|Var = {:.4e}/{:.4e}/{:.4e}, max/min = {ratio:.3} (< 3)",
            scaled[0], scaled[1], scaled[2]
        ),
    )
}

fn c6_trends(s: &Scaling) -> Verdict {
    let (v2a, v2b) = (s.aggs[0][0].v2, s.aggs[0][2].v2);
    let (xa, xb) = (s.aggs[2][0].xi_var, s.aggs[2][2].xi_var);
    let abs = |x: Stat| Stat {
        value: x.value.abs(),
        err: x.err,
    };
    let (ga, gb) = (abs(s.aggs[1][0].gg2), abs(s.aggs[1][2].gg2));
    let ok = [
        clearly_below(v2b, v2a),
        clearly_below(xb, xa),
        clearly_below(gb, ga),
    ];
    let f = |x: Stat| format!("{:.4e}±{:.1e}", x.value, x.err);
    verdict(
        ok.iter().all(|&b| b),
        format!(
            "V2 {} -> {} [{}]; E<dxi^2>(mu=0.2) {} -> {} [{}]; |GG2|(mu=0.1) {} -> {} [{}]",
            f(v2a),
            f(v2b),
            ok[0],
            f(xa),
            f(xb),
            ok[1],
            f(ga),
            f(gb),
            ok[2]
        ),
    )
}

fn c7_relations(s: &Scaling) -> Verdict {
    let decomposition = s
        .aggs
        .iter()
        .flatten()
        .map(|a| (a.v2.value - a.v1.value - a.v3.value).abs())
        .fold(0.0f64, f64::max);
    let (l2, l4) = (&s.aggs[1][0], &s.aggs[1][2]);
    let shrink_a = l4.gap_a.value < l2.gap_a.value;
    let shrink_b = l4.gap_b.value < l2.gap_b.value;
    verdict(
        decomposition <= 1e-12 && shrink_a && shrink_b,
        format!(
            "max |V2 - V1 - V3| = {decomposition:.2e}; |3V1-2V2| {:.4e}±{:.1e} -> {:.4e}±{:.1e}; |2V2-6V3| {:.4e}±{:.1e} -> {:.4e}±{:.1e}",
            l2.gap_a.value, l2.gap_a.err, l4.gap_a.value, l4.gap_a.err,
            l2.gap_b.value, l2.gap_b.err, l4.gap_b.value, l4.gap_b.err
        ),
    )
}

fn c8_negative_control() -> Verdict {
    let g = geom(2, 4);
    let solve = |h: f64| {
        let spec = ModelSpec::random_field(1.5, h, 0.0);
        aggregate(&spec, &g, 2, SEED, &Engine::Exact).unwrap()
    };
    let (zero, half) = (solve(0.0), solve(0.5));
    let ratio = zero.eq2.value / half.eq2.value;
    // values from an independent enumeration of the 2^16 states
    let pinned = (zero.eq2.value - 0.99381238924).abs() < 1e-9
        && (half.eq2.value - 0.99881336328).abs() < 1e-9;
    let symmetric = zero.eq1.value.abs() <= 1e-12;
    verdict(
        symmetric && pinned && ratio >= 2.0,
        format!(
            "E<R12>(h=0) = {:.1e}; E<R12^2> h=0: {:.11}, h=0.5: {:.11}, ratio = {ratio:.5} (needs >= 2); \
             overlap variance V2 h=0: {:.5e}, h=0.5: {:.5e}",
            zero.eq1.value, zero.eq2.value, half.eq2.value, zero.v2.value, half.v2.value
        ),
    )
}

fn c9_mc() -> Verdict {
    let g = geom(2, 3);
    assert!(g.site_count() <= MAX_EXACT_SITES);
    let spec = ModelSpec::random_field(0.8, 0.3, 1.0);
    let cfg = MCConfig {
        sweeps: 100_000,
        update_rule: UpdateRule::HeatBath,
        ..MCConfig::default()
    };
    let mut within = 0;
    for i in 0..50u64 {
        let real = sample_disorder(&spec, &g, SEED, i).unwrap();
        let sol = exact_solve(&real, spec.beta, spec.mu).unwrap();
        let m = overlap_moments(&sol, &real.overlap_weights()).unwrap();
        let est = run_mc(
            &real,
            spec.beta,
            spec.mu,
            &MCConfig {
                chain_seed: cfg.chain_seed + i,
                ..cfg.clone()
            },
        )
        .unwrap();
        let ok1 = (est.q1.mean - m.q1).abs() <= 3.0 * est.q1.std_err;
        let ok2 = (est.q2.mean - m.q2).abs() <= 3.0 * est.q2.std_err;
        within += usize::from(ok1 && ok2);
    }
    let chain = sample_disorder(&spec, &geom(1, 2), SEED, 0).unwrap();
    let square = sample_disorder(&spec, &geom(2, 2), SEED, 0).unwrap();
    let kernel = kernel_gap(&chain, 0.8, 0.2)
        .unwrap()
        .max(kernel_gap(&square, 0.8, 0.2).unwrap())
        .max(detailed_balance_check(&square, 0.8, 0.0, UpdateRule::HeatBath).unwrap());
    verdict(
        within >= 48 && kernel <= 1e-12,
        format!("{within}/50 realizations with q1 and q2 within 3 SE (need 48); max kernel violation = {kernel:.2e}"),
    )
}

fn run_cli(args: &[&str], out: &Path, workers: usize) {
    let status = Command::new(env!("CARGO_BIN_EXE_fkg-overlap"))
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--workers")
        .arg(workers.to_string())
        .env_remove("FKG_OVERLAP_OUT")
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success(), "{args:?} failed with {status}");
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            (p.file_name().unwrap().to_string_lossy().into_owned(), bytes)
        })
        .collect();
    files.sort();
    files
}

fn c10_determinism() -> Verdict {
    let runs: [&[&str]; 8] = [
        &["exact-solve", "--set", "lattice.L=3"],
        &[
            "mc-run",
            "--set",
            "mc.sweeps=2000",
            "--set",
            "mc.record_trace=true",
        ],
        &[
            "aggregate",
            "--set",
            "sampling.n_samples=64",
            "--set",
            "model.mu=0.1",
        ],
        &[
            "gg",
            "--set",
            "sampling.n_samples=64",
            "--set",
            "model.mu=0.1",
            "--set",
            "model.family=sdi",
        ],
        &[
            "fkg",
            "--set",
            "sampling.n_samples=40",
            "--set",
            "model.family=bdi",
            "--set",
            "lattice.L=3",
        ],
        &[
            "scaling",
            "--set",
            "sampling.n_samples=40",
            "--set",
            "lattice.L_list=2,3,4",
        ],
        &["checks", "--set", "sampling.n_samples=2"],
        &["oracle", "--set", "sampling.n_samples=5"],
    ];
    let tmp = tempfile::tempdir().unwrap();
    let mut identical = 0;
    for args in runs {
        let mut outputs = Vec::new();
        for (k, workers) in [1usize, 1, 8, 8].into_iter().enumerate() {
            let dir = tmp.path().join(format!("{}-{k}", args[0]));
            run_cli(args, &dir, workers);
            outputs.push(csv_bytes(&dir));
        }
        if !outputs[0].is_empty() && outputs.iter().all(|o| *o == outputs[0]) {
            identical += 1;
        }
    }
    verdict(
        identical == runs.len(),
        format!(
            "{identical}/{} commands byte-identical over 2 runs x workers {{1, 8}}",
            runs.len()
        ),
    )
}

fn main() {
    let started = Instant::now();
    let mut results: Vec<(usize, &str, Verdict, f64)> = Vec::new();
    let mut record = |id: usize, name: &'static str, f: &dyn Fn() -> Verdict| {
        let t = Instant::now();
        let v = f();
        let secs = t.elapsed().as_secs_f64();
        println!(
            "criterion {id:>2} {:<4} {name} ({secs:.1}s): {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        results.push((id, name, v, secs));
    };
    record(1, "replica oracle equivalence", &c1_oracle);
    record(2, "FKG inequality", &c2_fkg);
    record(3, "derivative identities", &c3_gradients);
    record(4, "Gaussian integration by parts", &c4_quadrature);
    let t = Instant::now();
    let s = scaling_runs();
    println!(
        "(scaling aggregates: 9 x 2000 realizations in {:.1}s)",
        t.elapsed().as_secs_f64()
    );
    record(5, "concentration scaling", &|| c5_concentration(&s));
    record(6, "variance trends", &|| c6_trends(&s));
    record(7, "variance relations", &|| c7_relations(&s));
    record(8, "negative control at h = 0", &c8_negative_control);
    record(9, "Monte Carlo validity", &c9_mc);
    record(10, "CLI determinism", &c10_determinism);

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} criteria passed in {:.1}s",
        results.len() - failed.len(),
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
