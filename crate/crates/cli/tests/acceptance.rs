//! End-to-end acceptance run: one pass/fail line per criterion, nonzero
//! exit if any criterion fails.

use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use maxlab_core::checks::{
    check_local_of_maximal, coherence_row, coifman_rochberg_ratio, localization_sweep,
    nondegeneracy_report, refinement_family, refinement_study, run_sweep, support_sweep,
    CoherenceConfig, Params, PointwiseCheck,
};
use maxlab_core::weights::conjugate;
use maxlab_core::{
    am_functional, ap_constant, dual_weight, make_weight, nondegeneracy_check_paired,
    nondegeneracy_check_shifted, Grid1D, Status, Weight, WeightSpec, WindowFamily,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20240917;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn oracle_equivalence() -> Outcome {
    let t = Instant::now();
    let grid = Grid1D::symmetric(8.0, 64).map_err(|e| e.to_string())?;
    let m = run_sweep(PointwiseCheck::OracleMaximal, &grid, 100, SEED, 0.0)
        .map_err(|e| e.to_string())?;
    let l = run_sweep(PointwiseCheck::OracleLocalMaximal, &grid, 100, SEED, 0.0)
        .map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    ensure(
        m.status == Status::Pass,
        format!("maximal: {:?}", m.witness),
    )?;
    ensure(
        l.status == Status::Pass && l.worst_violation <= 0.0,
        format!("local: {:?}", l.witness),
    )?;
    ensure(
        elapsed < Duration::from_secs(30),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!(
        "100+100 functions, max rel {:.1e}, local worst {:.1e}, {:.1}s",
        m.worst_violation,
        l.worst_violation,
        elapsed.as_secs_f64()
    ))
}

fn pointwise_suite() -> Outcome {
    let t = Instant::now();
    let grid = Grid1D::symmetric(8.0, 256).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for c in [
        PointwiseCheck::PropSplitting,
        PointwiseCheck::Chebyshev,
        PointwiseCheck::Mla,
        PointwiseCheck::SharpDeltaBound,
    ] {
        let r = run_sweep(c, &grid, 200, SEED, 0.0).map_err(|e| e.to_string())?;
        ensure(
            r.status == Status::Pass,
            format!("{}: {:?}", c.name(), r.witness),
        )?;
        parts.push(format!("{}={:.3}", c.name(), r.worst_violation));
    }
    let elapsed = t.elapsed();
    ensure(
        elapsed < Duration::from_secs(300),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!(
        "200 configs each; {}; {:.1}s",
        parts.join(" "),
        elapsed.as_secs_f64()
    ))
}

fn localization() -> Outcome {
    let grid = Grid1D::symmetric(8.0, 512).map_err(|e| e.to_string())?;
    let loc = localization_sweep(&grid, 0.3, 0.05, 20, SEED).map_err(|e| e.to_string())?;
    ensure(
        loc.status == Status::Pass && loc.worst_violation == 0.0,
        format!("outside Q/2: {:?}", loc.witness),
    )?;
    let sup = support_sweep(&grid, 0.5, 20, SEED).map_err(|e| e.to_string())?;
    ensure(
        sup.status == Status::Pass && sup.worst_violation == 0.0,
        format!("outside 5Q: {:?}", sup.witness),
    )?;
    Ok(format!(
        "{} + {} placements, exact zeros",
        loc.trials, sup.trials
    ))
}

fn ap_sanity() -> Outcome {
    let grid = Grid1D::symmetric(8.0, 256).map_err(|e| e.to_string())?;
    let one = make_weight(&WeightSpec::Constant { value: 1.0 }, grid).map_err(|e| e.to_string())?;
    for p in [1.5, 2.0, 3.0] {
        let v = ap_constant(&one, p, WindowFamily::All)
            .map_err(|e| e.to_string())?
            .value;
        ensure(v == 1.0, format!("w=1, p={p}: {v}"))?;
    }
    let two = Weight::new(Grid1D::new(0.0, 1.0, 2).unwrap(), vec![1.0, 4.0])
        .map_err(|e| e.to_string())?;
    let v = ap_constant(&two, 2.0, WindowFamily::All)
        .map_err(|e| e.to_string())?
        .value;
    ensure((v - 1.5625).abs() <= 1e-12, format!("(1,4): {v}"))?;

    let ladder = |exponent: f64| -> Result<Vec<f64>, String> {
        [128, 256, 512]
            .iter()
            .map(|&n| {
                let g = Grid1D::symmetric(8.0, n).map_err(|e| e.to_string())?;
                let w =
                    make_weight(&WeightSpec::Power { exponent }, g).map_err(|e| e.to_string())?;
                Ok(ap_constant(&w, 2.0, WindowFamily::All)
                    .map_err(|e| e.to_string())?
                    .value)
            })
            .collect()
    };
    let sq = ladder(2.0)?;
    let growth: Vec<f64> = sq.windows(2).map(|w| w[1] / w[0]).collect();
    ensure(
        growth.iter().all(|&g| g >= 1.5),
        format!("|x|^2 growth {growth:?}"),
    )?;
    let root = ladder(0.5)?;
    let lo = root.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = root.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo) / lo;
    ensure(spread < 0.05, format!("|x|^0.5 spread {spread}"))?;
    Ok(format!(
        "(1,4)={v}; |x|^2 growth {:.3},{:.3}; |x|^0.5 spread {:.2}%",
        growth[0],
        growth[1],
        100.0 * spread
    ))
}

fn am_identity() -> Outcome {
    let grid = Grid1D::symmetric(8.0, 128).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut worst_am, mut worst_dual) = (0.0f64, 0.0f64);
    for i in 0..50 {
        let p = [1.5, 2.0, 3.0][i % 3];
        let vals: Vec<f64> = (0..grid.cells())
            .map(|_| rng.random_range(0.05..20.0))
            .collect();
        let w = Weight::new(grid, vals).map_err(|e| e.to_string())?;
        let ap = ap_constant(&w, p, WindowFamily::All)
            .map_err(|e| e.to_string())?
            .value;
        let am = am_functional(&w, p, WindowFamily::All)
            .map_err(|e| e.to_string())?
            .value;
        worst_am = worst_am.max(rel(am, ap.powf(1.0 / p)));
        let pp = conjugate(p);
        let sigma = dual_weight(&w, p).map_err(|e| e.to_string())?;
        let dual = ap_constant(&sigma, pp, WindowFamily::All)
            .map_err(|e| e.to_string())?
            .value;
        worst_dual = worst_dual.max(rel(dual, ap.powf(pp - 1.0)));
    }
    ensure(worst_am <= 1e-9, format!("am worst rel {worst_am:e}"))?;
    ensure(
        worst_dual <= 1e-9,
        format!("duality worst rel {worst_dual:e}"),
    )?;
    Ok(format!(
        "50 weights; am rel {worst_am:.1e}, duality rel {worst_dual:.1e}"
    ))
}

fn coherence() -> Outcome {
    let t = Instant::now();
    let cfg = CoherenceConfig::standard(2.0, SEED);
    let gallery = [
        WeightSpec::Constant { value: 1.0 },
        WeightSpec::Power { exponent: 0.5 },
        WeightSpec::Power { exponent: 2.0 },
        WeightSpec::Vanishing,
    ];
    let rows = gallery
        .iter()
        .map(|w| coherence_row(w, &cfg))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    for row in &rows[..2] {
        ensure(
            row.search.lambda0.is_some(),
            format!("{}: no lambda0", row.weight),
        )?;
        ensure(
            row.doubling_step.status == Status::Pass,
            format!("{}: doubling step", row.weight),
        )?;
        ensure(
            row.ap.iter().all(|e| e.value.is_finite()) && row.ap_finite_stable(),
            format!("{}: ap not finite/stable", row.weight),
        )?;
    }
    let sq = &rows[2];
    ensure(
        sq.np_growth >= 1.8,
        format!("|x|^2 np growth {}", sq.np_growth),
    )?;
    let van = &rows[3];
    let ap = van.ap.last().unwrap();
    ensure(
        ap.value == f64::INFINITY && ap.witness.is_some(),
        "vanishing: ap not +inf with witness",
    )?;
    ensure(
        van.doubling.value == f64::INFINITY && van.doubling.witness.is_some(),
        "vanishing: doubling not +inf with witness",
    )?;
    ensure(
        van.search.lambda0.is_none_or(|l| l < 0.3),
        format!("vanishing: lambda0 {:?}", van.search.lambda0),
    )?;
    for e in van
        .search
        .entries
        .iter()
        .filter(|e| e.lambda >= 0.3 - 1e-12)
    {
        ensure(
            e.worst_ratio == f64::INFINITY
                && e.witness
                    .as_deref()
                    .is_some_and(|w| w.starts_with("chi(eps=")),
            format!("vanishing at lambda={}: {:?}", e.lambda, e.witness),
        )?;
    }
    ensure(
        rows.iter()
            .all(|r| r.implication_holds && r.doubling_implication_holds),
        "an implication failed",
    )?;
    let elapsed = t.elapsed();
    ensure(
        elapsed < Duration::from_secs(600),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!(
        "lambda0 {:?}/{:?}; |x|^2 np growth {:.3}; {:.1}s",
        rows[0].search.lambda0,
        rows[1].search.lambda0,
        sq.np_growth,
        elapsed.as_secs_f64()
    ))
}

fn stability() -> Outcome {
    let spec = refinement_family(SEED);
    let ladder = [128, 256, 512];
    let cr = refinement_study(
        "coifman_rochberg",
        "M_delta(Mf) <= C Mf",
        &spec,
        8.0,
        &ladder,
        Params::default().with_delta(0.5),
        |f| coifman_rochberg_ratio(f, 0.5),
    )
    .map_err(|e| e.to_string())?;
    ensure(
        cr.stability.status == Status::Pass,
        format!("CR growth {:?}", cr.stability.witness),
    )?;
    let lm = refinement_study(
        "local_of_maximal",
        "m_lambda(Mf) <= C Mf",
        &spec,
        8.0,
        &ladder,
        Params::default().with_lambda(0.3),
        |f| check_local_of_maximal(f, 0.3),
    )
    .map_err(|e| e.to_string())?;
    ensure(
        lm.stability.status == Status::Pass,
        format!("m_lambda growth {:?}", lm.stability.witness),
    )?;
    ensure(
        lm.trials.status == Status::Pass,
        format!("C_obs bound {:?}", lm.trials.witness),
    )?;
    Ok(format!(
        "CR growth {:.3}, m_lambda growth {:.3}, {} bound trials",
        cr.stability.worst_violation, lm.stability.worst_violation, lm.trials.trials
    ))
}

fn nondegeneracy() -> Outcome {
    let grid = Grid1D::symmetric(8.0, 512).map_err(|e| e.to_string())?;
    let s = nondegeneracy_check_shifted(&grid, 2.0, 50, SEED).map_err(|e| e.to_string())?;
    let p = nondegeneracy_check_paired(&grid, 2.0, 50, SEED).map_err(|e| e.to_string())?;
    for r in [&s, &p] {
        ensure(
            r.pass && nondegeneracy_report(&grid, r).status == Status::Pass,
            format!("{:?}: {:?}", r.mode, r.witness),
        )?;
    }
    let h = run_sweep(
        PointwiseCheck::HilbertL2,
        &Grid1D::symmetric(8.0, 256).unwrap(),
        200,
        SEED,
        0.0,
    )
    .map_err(|e| e.to_string())?;
    ensure(
        h.status == Status::Pass,
        format!("hilbert l2: {:?}", h.witness),
    )?;
    Ok(format!(
        "shifted worst {:.3}, paired worst {:.3}; 200 Hilbert draws",
        s.worst_ratio, p.worst_ratio
    ))
}

fn cli_interface() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base = "seed = 11\nchecks = [\"chebyshev\", \"oracle_maximal\", \"search_lambda0\", \"localization\"]\n\
                [grid]\ncells = 128\n[placement]\nplacements = 5\n[sweep]\nconfigs = 40\ncells = 128\n\
                oracle_configs = 10\noracle_cells = 48\n";
    let good = tmp.path().join("good.toml");
    let bad = tmp.path().join("bad.toml");
    let broken = tmp.path().join("broken.toml");
    fs::write(&good, base).unwrap();
    fs::write(&bad, format!("{base}oracle_perturbation = 1e-6\n")).unwrap();
    fs::write(&broken, "seed = \"eleven\"\n[grid\n").unwrap();
    let run = |cfg: &std::path::Path, out: &str| -> Result<(Option<i32>, Vec<u8>), String> {
        let dir = tmp.path().join(out);
        let o = Command::new(env!("CARGO_BIN_EXE_maxlab"))
            .args([
                "check",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                dir.to_str().unwrap(),
            ])
            .env_remove("MAXLAB_OUT_DIR")
            .output()
            .map_err(|e| e.to_string())?;
        Ok((
            o.status.code(),
            fs::read(dir.join("report.csv")).unwrap_or_default(),
        ))
    };
    let (c1, csv1) = run(&good, "a")?;
    let (c2, csv2) = run(&good, "b")?;
    ensure(
        c1 == Some(0) && c2 == Some(0),
        format!("all-pass run exited {c1:?}/{c2:?}"),
    )?;
    ensure(
        !csv1.is_empty() && csv1 == csv2,
        "CSV bodies differ between identical runs",
    )?;
    let (c3, _) = run(&bad, "c")?;
    ensure(c3 == Some(1), format!("corrupted oracle exited {c3:?}"))?;
    let (c4, _) = run(&broken, "d")?;
    ensure(c4 == Some(2), format!("malformed config exited {c4:?}"))?;
    Ok(format!(
        "byte-identical CSV ({} bytes); exit codes 0/1/2",
        csv1.len()
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("pointwise inequality suite", pointwise_suite),
        ("localization claims", localization),
        ("A_p estimator sanity", ap_sanity),
        ("A_p functional and duality identities", am_identity),
        ("weight coherence table", coherence),
        ("Coifman-Rochberg and local maximal stability", stability),
        ("non-degeneracy and Hilbert l2 bound", nondegeneracy),
        ("determinism and exit codes", cli_interface),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {}: PASS  {name} — {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} — {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
