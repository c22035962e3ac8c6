//! Acceptance suite: one PASS/FAIL line per criterion, with the measured
//! quantities and the runtime against its budget.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spas_core::certify::{
    check_forward_invariance, check_practical_stability, check_uniform_attractivity, gain_search, gamma_and_time_bound,
    verify_conditions,
};
use spas_core::cli::{ConstructOutput, GainSearchOutput, RunManifest, SimulateOutput, VerifyOutput};
use spas_core::constructions::{construct_backward, construct_outer, verify_containment_chain};
use spas_core::examples::{
    consensus_build, consensus_decompose, consensus_mu, consensus_recompose, consensus_yz_dist, consensus_yz_step,
    ex1_build, ex1_certificate, ex1_gain_bounds, ex1_sstar, BiasedGradientSystem, ConsensusSystem,
};
use spas_core::geometry::{point, ConstraintSet, Point, SamplingPlan, TargetSet};
use spas_core::lyapunov::LyapunovFn;
use spas_core::system::GainVector;

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "geometry laws", budget: Duration::from_secs(10), run: geometry_laws },
        Criterion { id: 2, name: "ellipsoidal construction oracle", budget: Duration::from_secs(20), run: ellipse_oracle },
        Criterion { id: 3, name: "containment chain", budget: Duration::from_secs(10), run: containment_chain },
        Criterion { id: 4, name: "closed-form gain agreement", budget: Duration::from_secs(60), run: gain_agreement },
        Criterion { id: 5, name: "certificate implies behavior", budget: Duration::from_secs(60), run: theorem_to_behavior },
        Criterion { id: 6, name: "consensus fixture", budget: Duration::from_secs(30), run: consensus_fixture },
        Criterion { id: 7, name: "descent time bound", budget: Duration::from_secs(30), run: descent_bound },
        Criterion { id: 8, name: "command-line contract", budget: Duration::from_secs(30), run: cli_contract },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) if elapsed <= c.budget => (true, d),
            Ok(d) => (false, format!("{d}; over runtime budget")),
            Err(d) => (false, d),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} [{}] {} ({:.2}s / {}s)",
            c.id,
            if pass { "PASS" } else { "FAIL" },
            c.name,
            detail,
            elapsed.as_secs_f64(),
            c.budget.as_secs()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Point {
    Point::from_fn(dim, |_, _| rng.random_range(-scale..scale))
}

const GEOMETRY_CASES: usize = 10_000;
const GEOMETRY_TOL: f64 = 1e-9;

fn geometry_laws() -> Outcome {
    let s = 1.0 / 2f64.sqrt();
    let sets = [
        ("all_space", ConstraintSet::all_space(3)),
        ("box", ConstraintSet::Box { lo: vec![-1.0, 0.0, -2.0], hi: vec![1.0, 0.5, 3.0] }),
        ("ball", ConstraintSet::Ball { center: vec![0.5, -1.0, 0.0], radius: 1.5 }),
        ("halfspace", ConstraintSet::Halfspace { normal: vec![1.0, 2.0, -1.0], offset: 0.5 }),
        (
            "affine_subspace",
            ConstraintSet::AffineSubspace { basis: vec![vec![s, s, 0.0], vec![0.0, 0.0, 1.0]], offset: vec![1.0, -1.0, 0.0] },
        ),
        (
            "intersection",
            ConstraintSet::Intersection {
                sets: vec![
                    ConstraintSet::Box { lo: vec![-1.0; 3], hi: vec![1.0; 3] },
                    ConstraintSet::Ball { center: vec![0.5, 0.5, 0.0], radius: 1.0 },
                    ConstraintSet::Halfspace { normal: vec![1.0, 1.0, 1.0], offset: 0.8 },
                ],
            },
        ),
    ];
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for (k, (name, set)) in sets.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + k as u64);
        for _ in 0..GEOMETRY_CASES {
            let x = random_point(&mut rng, 3, 5.0);
            let y = random_point(&mut rng, 3, 5.0);
            let z = set.project(&random_point(&mut rng, 3, 5.0)).map_err(err)?;
            let px = set.project(&x).map_err(err)?;
            let py = set.project(&y).map_err(err)?;
            let idem = (set.project(&px).map_err(err)? - &px).norm();
            let expand = (&px - &py).norm() - (&x - &y).norm();
            let vi = (&x - &px).dot(&(&z - &px));
            worst = (worst.0.max(idem), worst.1.max(expand), worst.2.max(vi));
            ensure(idem <= GEOMETRY_TOL && expand <= GEOMETRY_TOL && vi <= GEOMETRY_TOL, || {
                format!("{name}: idempotence {idem:e}, expansion {expand:e}, variational {vi:e} at {:?}", x.as_slice())
            })?;
        }
    }
    Ok(format!(
        "{} cases x 6 sets; worst idempotence {:.1e}, expansion {:.1e}, variational {:.1e}",
        GEOMETRY_CASES, worst.0, worst.1, worst.2
    ))
}

fn ellipse() -> (LyapunovFn, TargetSet, SamplingPlan) {
    (
        LyapunovFn::weighted_quadratic(vec![1.0, 4.0], vec![0.0, 0.0]),
        TargetSet::singleton(&[0.0, 0.0]),
        SamplingPlan::default().with_directions(2048),
    )
}

const ORACLE_TOL: f64 = 1e-3;

fn ellipse_oracle() -> Outcome {
    let (v, a, plan) = ellipse();
    let outer = construct_outer(&v, &a, 1.0, &plan).map_err(err)?;
    let back = construct_backward(&v, &a, 2.0, 0.0, &plan).map_err(err)?;
    let got = [outer.l_hat, outer.sigma_hat, back.l_rho_s, back.delta, back.l_delta, back.rho_o_s];
    let want = [4.0, 2.0, 4.0, 1.0, 1.0, 0.5];
    let gap = got.iter().zip(&want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    ensure(gap <= ORACLE_TOL, || format!("got {got:?}, want {want:?}"))?;
    Ok(format!("(l_hat, sigma_hat, l_rho_s, delta, l_delta, rho_o_s) = {got:.6?}; max gap {gap:.1e}"))
}

fn containment_chain() -> Outcome {
    let (v, a, plan) = ellipse();
    let back = construct_backward(&v, &a, 2.0, 0.0, &plan).map_err(err)?;
    let chain = verify_containment_chain(&back, &v, &a, &plan, ORACLE_TOL).map_err(err)?;
    ensure(chain.pass && chain.worst_violation <= ORACLE_TOL, || format!("chain failed: {chain:?}"))?;
    let mut corrupted = back.clone();
    corrupted.l_delta = 4.0;
    let bad = verify_containment_chain(&corrupted, &v, &a, &plan, ORACLE_TOL).map_err(err)?;
    ensure(!bad.pass && !bad.links[2].pass, || "corrupted l_delta was not flagged".into())?;
    Ok(format!(
        "worst violation {:.1e}; corrupted l_delta = 4 flagged with violation {:.3}",
        chain.worst_violation, bad.worst_violation
    ))
}

/// The reference instance: unit disc, `s` the identity, `τ = 1`, `L_s = 1`.
struct Ex1 {
    target: TargetSet,
    sys: spas_core::system::ParamSystem,
    v: LyapunovFn,
    s_star: f64,
    plan: SamplingPlan,
}

fn ex1() -> Result<Ex1, String> {
    let plan = SamplingPlan::default().with_directions(256);
    let ex = BiasedGradientSystem::unit_ball_identity();
    let (sys, v) = ex1_build(&ex, &plan).map_err(err)?;
    let s_star = ex1_sstar(&ex, &plan).map_err(err)?;
    Ok(Ex1 { target: ex.target.clone(), sys, v, s_star, plan })
}

const EX1_TAU: f64 = 1.0;
const EX1_LS: f64 = 1.0;
const EX1_SIGMA_O: f64 = 4.0;
const EX1_RHO_O: f64 = 1.0;
const EX1_B_O: f64 = 1.0;

fn ex1_alpha_hat(e: &Ex1) -> Result<f64, String> {
    let spec = ex1_certificate(&e.target, EX1_TAU, EX1_LS, e.s_star, EX1_SIGMA_O, EX1_RHO_O, EX1_B_O).map_err(err)?;
    let res = gain_search(&e.sys, &e.v, &e.target, |_| Ok(spec.clone()), &e.plan, 4.0).map_err(err)?;
    Ok(res.alpha_hat)
}

fn gain_agreement() -> Outcome {
    let e = ex1()?;
    let closed = ex1_gain_bounds(EX1_TAU, EX1_LS, e.s_star, EX1_RHO_O, EX1_B_O).map_err(err)?;
    let alpha_hat = ex1_alpha_hat(&e)?;
    let rel = (alpha_hat - closed.alpha_hat).abs() / closed.alpha_hat;
    ensure(rel <= 0.1, || format!("alpha_hat {alpha_hat} vs closed form {}", closed.alpha_hat))?;
    Ok(format!("alpha_hat {alpha_hat:.6} vs closed form {:.6} (relative gap {rel:.1e})", closed.alpha_hat))
}

const SEEDS: usize = 1000;
const HORIZON: usize = 500;

fn theorem_to_behavior() -> Outcome {
    let e = ex1()?;
    let alpha = ex1_alpha_hat(&e)? / 2.0;
    let gain = GainVector::scalar(alpha);
    let spec = ex1_certificate(&e.target, EX1_TAU, EX1_LS, e.s_star, EX1_SIGMA_O, EX1_RHO_O, EX1_B_O).map_err(err)?;
    let report = verify_conditions(&e.sys, &e.v, &e.target, &spec, &gain, &e.plan).map_err(err)?;
    ensure(report.pass, || format!("conditions fail at alpha = {alpha}: {report:?}"))?;
    let outer = construct_outer(&e.v, &e.target, 2.0, &e.plan).map_err(err)?;
    let inv = check_forward_invariance(&e.sys, &e.v, &e.target, outer.l_hat, &gain, &e.plan, HORIZON, SEEDS).map_err(err)?;
    ensure(inv.pass && inv.exits == 0, || format!("{} exits from the sublevel set", inv.exits))?;
    let back = construct_backward(&e.v, &e.target, 2.0, 0.0, &e.plan).map_err(err)?;
    let stab = check_practical_stability(&e.sys, &e.target, back.delta, 2.0, &gain, &e.plan, HORIZON, SEEDS).map_err(err)?;
    ensure(stab.pass && stab.violations == 0, || format!("{} excursions beyond rho_s", stab.violations))?;
    Ok(format!(
        "alpha {alpha:.4}: P1-P3 pass; 0 exits from level {:.4}; 0 excursions from delta {:.4} (max {:.4} <= 2)",
        outer.l_hat, back.delta, stab.max_excursion
    ))
}

const CONSENSUS_TOL: f64 = 1e-10;

fn consensus_fixture() -> Outcome {
    let half = DMatrix::from_element(2, 2, 0.5);
    let mu = consensus_mu(&half).map_err(err)?;
    ensure(mu.abs() <= 1e-12, || format!("mu = {mu}"))?;

    let sys = ConsensusSystem::two_agent();
    let (map, _, x_star) = consensus_build(&sys, ConstraintSet::all_space(2)).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let x = random_point(&mut rng, 2, 10.0);
        let alpha = rng.random_range(0.0..1.0);
        let (y, z) = consensus_decompose(&x);
        worst = worst.max((consensus_recompose(y, &z) - &x).amax());
        let (y1, z1) = consensus_decompose(&map.step(&x, &GainVector::scalar(alpha)).map_err(err)?);
        let (y2, z2) = consensus_yz_step(y, &z, alpha, &sys);
        worst = worst.max((y1 - y2).abs()).max((z1 - z2).amax());
    }
    ensure(worst <= CONSENSUS_TOL, || format!("decomposition error {worst:e}"))?;

    let plan = SamplingPlan::default().with_directions(64);
    let seeds = spas_core::geometry::sample_seeds(&sys.target(), 0.0, 10.0, map.constraint(), &plan, 50).map_err(err)?;
    let (horizon, settle) = (2000, 1000);
    let mut terminal = Vec::new();
    let consensus_point = point(&[x_star, x_star]);
    for alpha in [0.2, 0.1, 0.05] {
        let g = GainVector::scalar(alpha);
        let moved = (map.step(&consensus_point, &g).map_err(err)? - &consensus_point).norm();
        ensure(moved > 0.0, || format!("1 x* is a fixed point at alpha = {alpha}"))?;
        let mut sup: f64 = 0.0;
        for x0 in &seeds {
            let traj = map.rollout(x0, &g, horizon).map_err(err)?;
            for x in &traj.states[settle..] {
                let (y, z) = consensus_decompose(x);
                sup = sup.max(consensus_yz_dist(y, &z, x_star));
            }
        }
        terminal.push(sup);
    }
    ensure(terminal.iter().all(|d| d.is_finite() && *d > 0.0), || format!("terminal distances {terminal:?}"))?;
    ensure(terminal.windows(2).all(|w| w[1] < w[0]), || format!("not strictly decreasing: {terminal:?}"))?;
    Ok(format!(
        "mu {mu:.1e}; decomposition error {worst:.1e}; terminal distances for alpha 0.2/0.1/0.05 = {terminal:.6?}"
    ))
}

fn descent_bound() -> Outcome {
    let e = ex1()?;
    let alpha = ex1_alpha_hat(&e)? / 2.0;
    let gain = GainVector::scalar(alpha);
    let spec = ex1_certificate(&e.target, EX1_TAU, EX1_LS, e.s_star, EX1_SIGMA_O, EX1_RHO_O, EX1_B_O).map_err(err)?;
    let sigma_hat = construct_outer(&e.v, &e.target, 2.0, &e.plan).map_err(err)?.sigma_hat;
    let (rho_a, eps) = (1.0, 0.5);
    let w = spec.margin_fn();
    let bound = gamma_and_time_bound(&*w, &e.target, sigma_hat, rho_a, eps, e.sys.constraint(), &gain, &e.plan, &e.v, None)
        .map_err(err)?;
    let attr = check_uniform_attractivity(&e.sys, &e.target, sigma_hat, rho_a, eps, &gain, &e.plan, HORIZON, SEEDS)
        .map_err(err)?;
    let t = attr.hitting_time.ok_or_else(|| format!("no hitting time: {attr:?}"))?;
    ensure(t as u64 <= bound.t_bound, || format!("empirical T {t} exceeds bound {}", bound.t_bound))?;
    Ok(format!(
        "gamma {:.4}, V_sup {:.4}, T_bound {}; empirical T {t} over {} seeds",
        bound.gamma, bound.v_sup, bound.t_bound, attr.seeds
    ))
}

fn spas(args: &[&str]) -> Result<i32, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_spas"))
        .args(args)
        .env("SPAS_LOG", "error")
        .output()
        .map_err(err)?;
    out.status.code().ok_or_else(|| "killed by signal".into())
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(err)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_slice(&bytes).map_err(|e| format!("{} does not match its schema: {e}", path.display()))
}

const EX1_CONFIG: &str = r#"{
  "system": { "kind": "example1", "target": { "kind": "ball", "center": [0.0, 0.0], "radius": 1.0 }, "tau": 1.0, "lipschitz": 1.0 },
  "certificate": { "sigma_o": 4.0, "rho_o": 1.0, "b_o": 1.0 },
  "sampling": { "directions_per_shell": 64, "radial_refinements": 8 },
  "gain": GAIN,
  "gain_search": { "alpha_max": 4.0 },
  "construct": { "sigma_tilde": 2.0, "rho_s": 2.0 },
  "simulate": { "horizon": HORIZON, "seeds": 100, "sigma": 2.0, "rho_a": 1.0, "epsilon": 0.5, "delta": 2.0, "rho_s": 2.0 }
}"#;

fn cli_contract() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let d = dir.path();
    let good = d.join("good.json");
    write(&good, &EX1_CONFIG.replace("GAIN", "0.25").replace("HORIZON", "100"))?;
    let run = |sub: &str, cfg: &Path, out: &str| -> Result<i32, String> {
        spas(&[sub, "--config", cfg.to_str().unwrap(), "--out", d.join(out).to_str().unwrap(), "--seed", "7"])
    };

    let mut notes = Vec::new();
    for (sub, report) in [
        ("verify", "verification.json"),
        ("construct", "construction.json"),
        ("gain-search", "gain_search.json"),
        ("simulate", "simulation.json"),
    ] {
        let code = run(sub, &good, &format!("{sub}-a"))?;
        ensure(code == 0, || format!("{sub} exited {code}"))?;
        run(sub, &good, &format!("{sub}-b"))?;
        let path_a = d.join(format!("{sub}-a")).join(report);
        match sub {
            "verify" => drop(read_json::<VerifyOutput>(&path_a)?),
            "construct" => drop(read_json::<ConstructOutput>(&path_a)?),
            "gain-search" => drop(read_json::<GainSearchOutput>(&path_a)?),
            _ => drop(read_json::<SimulateOutput>(&path_a)?),
        }
        let manifest: RunManifest = read_json(&d.join(format!("{sub}-a")).join("manifest.json"))?;
        for file in &manifest.results {
            let a = std::fs::read(d.join(format!("{sub}-a")).join(file)).map_err(err)?;
            let b = std::fs::read(d.join(format!("{sub}-b")).join(file)).map_err(err)?;
            ensure(a == b, || format!("{sub}: {file} differs between identical runs"))?;
        }
        notes.push(format!("{sub}:{}files", manifest.results.len() + 1));
    }

    let malformed = d.join("malformed.json");
    write(&malformed, "{ \"system\": ")?;
    let code = run("verify", &malformed, "malformed")?;
    ensure(code == 2, || format!("malformed JSON exited {code}, want 2"))?;

    let large = d.join("large.json");
    write(&large, &EX1_CONFIG.replace("GAIN", "2.0").replace("HORIZON", "100"))?;
    let code = run("verify", &large, "large")?;
    ensure(code == 1, || format!("alpha = 2 exited {code}, want 1"))?;
    let report: VerifyOutput = read_json(&d.join("large").join("verification.json"))?;
    ensure(report.report.conditions.iter().any(|c| !c.pass && c.witness.is_some()), || "no witness for alpha = 2".into())?;

    let zero = d.join("zero.json");
    write(&zero, &EX1_CONFIG.replace("GAIN", "0.25").replace("HORIZON", "0"))?;
    let code = run("simulate", &zero, "zero")?;
    ensure(code == 2, || format!("zero horizon exited {code}, want 2"))?;

    Ok(format!("{}; byte-identical reruns; negative controls exit 2/1/2", notes.join(" ")))
}
