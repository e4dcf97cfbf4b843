//! Turns a config into a [`RunReport`].
//!
//! Work is split into independent units that run concurrently; their
//! results are stored in config order. A unit that hits a size or
//! parameter error becomes an [`Item::Error`] and the run continues.

use std::time::Instant;

use maxlab_core::checks::{
    admissible_epsilon, cf_pointwise_check, check_local_of_maximal, coherence_row,
    coifman_rochberg_ratio, decay_check, default_lambda_grid, doubling_step_check,
    fs_inequality_ratio, localization_sweep, nondegeneracy_report, order_continuity_witness,
    refinement_stability, refinement_study, run_sweep, search_lambda0, support_sweep, wp_ratio,
    CoherenceConfig, Params, RefinementPoint, RefinementStudy, STABILITY_TOL,
};
use maxlab_core::weights::DELTA_LADDER;
use maxlab_core::{
    ainfty_estimate, am_functional, ap_constant, cp_estimate, doubling_constant, make_test_family,
    make_weight, nondegeneracy_check_paired, nondegeneracy_check_shifted, np_integral, CheckReport,
    ConstantEstimate, Grid1D, GridFunction, Status, Weight, Witness,
};
use rayon::prelude::*;

use crate::config::{CheckKind, ExperimentConfig};
use crate::report::{Item, PlotSeries, RunReport, Timing};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Constants,
    Check,
    SearchLambda0,
    WpRatio,
    Nondegen,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::Check => "check",
            Command::SearchLambda0 => "search-lambda0",
            Command::WpRatio => "wp-ratio",
            Command::Nondegen => "nondegen",
        }
    }
}

#[derive(Default)]
struct Output {
    items: Vec<Item>,
    plots: Vec<PlotSeries>,
}

impl Output {
    fn item(mut self, item: Item) -> Self {
        self.items.push(item);
        self
    }

    fn check(self, report: CheckReport) -> Self {
        self.item(Item::Check(report))
    }

    fn plot(mut self, name: &str, points: Vec<RefinementPoint>) -> Self {
        self.plots.push(PlotSeries {
            name: name.into(),
            points,
        });
        self
    }
}

type UnitResult = maxlab_core::Result<Output>;
type Unit<'a> = (String, Box<dyn Fn() -> UnitResult + Sync + Send + 'a>);

pub fn run_experiment(cfg: &ExperimentConfig, command: Command) -> RunReport {
    let units: Vec<Unit> = match command {
        Command::Constants => constants_units(cfg),
        Command::Check => cfg
            .checks()
            .into_iter()
            .map(|k| check_unit(cfg, k))
            .collect(),
        Command::SearchLambda0 => vec![check_unit(cfg, CheckKind::SearchLambda0)],
        Command::WpRatio => vec![check_unit(cfg, CheckKind::WpRatio)],
        Command::Nondegen => vec![check_unit(cfg, CheckKind::Nondegeneracy)],
    };
    let results: Vec<(String, UnitResult, f64)> = units
        .par_iter()
        .map(|(name, run)| {
            let t = Instant::now();
            let out = run();
            (name.clone(), out, t.elapsed().as_secs_f64())
        })
        .collect();
    let mut report = RunReport::new(command.name(), cfg.clone());
    for (name, out, seconds) in results {
        match out {
            Ok(o) => {
                report.items.extend(o.items);
                report.plots.extend(o.plots);
            }
            Err(e) => report.items.push(Item::Error {
                name: name.clone(),
                message: e.to_string(),
            }),
        }
        report.timing.push(Timing {
            item: name,
            seconds,
        });
    }
    report.finish();
    report
}

fn ladder_grids(cfg: &ExperimentConfig) -> maxlab_core::Result<Vec<Grid1D>> {
    if cfg.refinement.is_empty() {
        Ok(vec![cfg.grid.grid()?])
    } else {
        cfg.refinement
            .iter()
            .map(|&n| Grid1D::symmetric(cfg.grid.radius, n))
            .collect()
    }
}

fn constants_units(cfg: &ExperimentConfig) -> Vec<Unit<'_>> {
    let grids = match ladder_grids(cfg) {
        Ok(g) => g,
        Err(e) => {
            let msg = e.to_string();
            return vec![(
                "constants".into(),
                Box::new(move || Err(maxlab_core::Error::Validation(msg.clone()))),
            )];
        }
    };
    grids
        .into_iter()
        .map(|grid| -> Unit {
            let name = format!("constants[N={}]", grid.cells());
            (
                name,
                Box::new(move || {
                    let w = make_weight(&cfg.weight, grid)?;
                    let p = cfg.params.p;
                    let fam = cfg.window_family;
                    let mut out = Output::default()
                        .item(Item::Estimate(ap_constant(&w, p, fam)?))
                        .item(Item::Estimate(am_functional(&w, p, fam)?))
                        .item(Item::Estimate(doubling_constant(&w, fam)?))
                        .item(Item::Estimate(np_estimate(&w, p, fam)?));
                    for &d in &DELTA_LADDER {
                        out = out.item(Item::Estimate(ainfty_estimate(&w, d, fam)?));
                    }
                    for &d in &DELTA_LADDER {
                        out = out.item(Item::Estimate(cp_estimate(&w, p, d, fam)?));
                    }
                    Ok(out)
                }),
            )
        })
        .chain(std::iter::once((
            "constants_refinement".to_string(),
            Box::new(move || constants_refinement(cfg))
                as Box<dyn Fn() -> UnitResult + Sync + Send>,
        )))
        .collect()
}

/// `A_p` across the ladder as a plot series.
fn constants_refinement(cfg: &ExperimentConfig) -> UnitResult {
    let grids = ladder_grids(cfg)?;
    if grids.len() < 2 {
        return Ok(Output::default());
    }
    let points = grids
        .iter()
        .map(|&g| {
            let w = make_weight(&cfg.weight, g)?;
            Ok(RefinementPoint {
                cells: g.cells(),
                value: ap_constant(&w, cfg.params.p, cfg.window_family)?.value,
            })
        })
        .collect::<maxlab_core::Result<Vec<_>>>()?;
    Ok(Output::default().plot("ap_constant", points))
}

fn np_estimate(
    w: &Weight,
    p: f64,
    family: maxlab_core::WindowFamily,
) -> maxlab_core::Result<ConstantEstimate> {
    Ok(ConstantEstimate {
        estimator: "np_integral".into(),
        value: np_integral(w, p)?,
        witness: None,
        witness_set: None,
        p: Some(p),
        delta: None,
        family,
        cells: w.grid().cells(),
        radius: w.grid().radius(),
    })
}

fn study_output(name: &str, study: RefinementStudy, include_trials: bool) -> Output {
    let mut out = Output::default().check(study.stability);
    if include_trials {
        out = out.check(study.trials);
    }
    out.plot(name, study.series)
}

fn check_unit(cfg: &ExperimentConfig, kind: CheckKind) -> Unit<'_> {
    (
        kind.name().to_string(),
        Box::new(move || run_check(cfg, kind)),
    )
}

fn run_check(cfg: &ExperimentConfig, kind: CheckKind) -> UnitResult {
    let e = &cfg.params;
    let radius = cfg.grid.radius;
    if let Some(pc) = kind.pointwise() {
        let (cells, configs) = match kind {
            CheckKind::OracleMaximal | CheckKind::OracleLocalMaximal => {
                (cfg.sweep.oracle_cells, cfg.sweep.oracle_configs)
            }
            _ => (cfg.sweep.cells, cfg.sweep.configs),
        };
        let grid = Grid1D::symmetric(radius, cells)?;
        return Ok(Output::default().check(run_sweep(
            pc,
            &grid,
            configs,
            cfg.seed,
            cfg.sweep.oracle_perturbation,
        )?));
    }
    let refinement_spec = cfg.refinement_family_spec();
    match kind {
        CheckKind::CoifmanRochberg => {
            let study = refinement_study(
                "coifman_rochberg",
                "M_delta(Mf) <= C Mf",
                &refinement_spec,
                radius,
                &cfg.refinement,
                Params::default().with_delta(e.delta),
                |f| coifman_rochberg_ratio(f, e.delta),
            )?;
            Ok(study_output("coifman_rochberg", study, false))
        }
        CheckKind::LocalOfMaximalStability => {
            let study = refinement_study(
                "local_of_maximal",
                "m_lambda(Mf) <= C Mf with C <= lambda^-2 C_CR",
                &refinement_spec,
                radius,
                &cfg.refinement,
                Params::default().with_lambda(e.lambda),
                |f| check_local_of_maximal(f, e.lambda),
            )?;
            Ok(study_output("local_of_maximal", study, true))
        }
        CheckKind::CfPointwise => {
            let study = refinement_study(
                "cf_pointwise",
                "M_r(Tf) <= C (T*f + Mf) for r in (0,1)",
                &refinement_spec,
                radius,
                &cfg.refinement,
                Params::default().with_r(e.cf_r),
                |f| cf_pointwise_check(f, e.cf_r),
            )?;
            Ok(study_output("cf_pointwise", study, false))
        }
        CheckKind::SearchLambda0 => {
            let grid = cfg.grid.grid()?;
            let w = make_weight(&cfg.weight, grid)?;
            let family = make_test_family(&cfg.family_spec(), grid, Some(&w), e.p)?;
            let res = search_lambda0(&w, e.p, &family, &default_lambda_grid())?;
            Ok(Output::default().item(Item::LambdaSearch(res)))
        }
        CheckKind::WpRatio => {
            let grids = ladder_grids(cfg)?;
            let reports = grids
                .iter()
                .map(|&g| {
                    let w = make_weight(&cfg.weight, g)?;
                    let family = make_test_family(&refinement_spec, g, Some(&w), e.p)?;
                    wp_ratio(&w, e.p, &family)
                })
                .collect::<maxlab_core::Result<Vec<_>>>()?;
            let points: Vec<RefinementPoint> = reports
                .iter()
                .map(|r| RefinementPoint {
                    cells: r.cells,
                    value: r.recorded.unwrap_or(f64::NAN),
                })
                .collect();
            let mut out = Output::default().check(reports.last().expect("nonempty ladder").clone());
            if points.len() >= 2 {
                out = out.check(refinement_stability(
                    "wp_ratio_stability",
                    "||M(Mf)||/||Mf|| stable under refinement",
                    &points,
                    radius,
                    STABILITY_TOL,
                    Params::default().with_p(e.p),
                ));
            }
            Ok(out.plot("wp_ratio", points))
        }
        CheckKind::FsRatio => {
            let grid = cfg.grid.grid()?;
            let w = make_weight(&cfg.weight, grid)?;
            let family = make_test_family(&cfg.family_spec(), grid, Some(&w), e.p)?;
            Ok(Output::default().check(fs_inequality_ratio(&w, e.p, e.delta, &family)?))
        }
        CheckKind::Localization => {
            let pc = &cfg.placement;
            let grid = Grid1D::symmetric(radius, pc.cells)?;
            Ok(Output::default().check(localization_sweep(
                &grid,
                pc.lambda0,
                pc.eps,
                pc.placements,
                cfg.seed,
            )?))
        }
        CheckKind::SupportRq => {
            let pc = &cfg.placement;
            let grid = Grid1D::symmetric(radius, pc.cells)?;
            Ok(Output::default().check(support_sweep(
                &grid,
                pc.support_lambda0,
                pc.placements,
                cfg.seed,
            )?))
        }
        CheckKind::DoublingStep => {
            let grid = cfg.grid.grid()?;
            let w = make_weight(&cfg.weight, grid)?;
            let family = make_test_family(&cfg.family_spec(), grid, Some(&w), e.p)?;
            let res = search_lambda0(&w, e.p, &family, &default_lambda_grid())?;
            let report = match res.lambda0 {
                Some(l0) => {
                    let eps = match e.eps {
                        Some(eps) => eps,
                        None => admissible_epsilon(l0, grid.cells()).ok_or_else(|| {
                            maxlab_core::Error::Validation(format!(
                                "no admissible eps on {} cells",
                                grid.cells()
                            ))
                        })?,
                    };
                    doubling_step_check(&w, e.p, l0, eps, cfg.window_family)?
                }
                None => CheckReport::new("doubling_step", "w(Q) <= (2/eps)^p w(Q/2)", &grid, 0.0)
                    .with_params(Params::default().with_p(e.p))
                    .inconclusive("no lambda0 found for this weight"),
            };
            Ok(Output::default().check(report))
        }
        CheckKind::Decay => {
            let grid = cfg.grid.grid()?;
            let x = grid.cells() / 2;
            let decaying = GridFunction::from_fn(grid, |t| 1.0 / (1.0 + t.abs()).powi(2))?;
            let compact = GridFunction::from_fn(grid, |t| if t.abs() < 2.0 { 1.0 } else { 0.0 })?;
            let mut c = decay_check(&compact, x, &cfg.decay_radii)?;
            c.check = "decay_compact".into();
            Ok(Output::default()
                .check(decay_check(&decaying, x, &cfg.decay_radii)?)
                .check(c))
        }
        CheckKind::OrderContinuity => {
            let grid = Grid1D::symmetric(radius, cfg.grid.cells)?;
            let w = Weight::from_function(GridFunction::from_fn(grid, |t| {
                if t.abs() <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            })?)?;
            let js: Vec<f64> = [0.125, 0.25, 0.5, 0.75]
                .iter()
                .map(|s| s * radius)
                .collect();
            Ok(Output::default().check(order_continuity_witness(&w, e.p, &js)?))
        }
        CheckKind::Nondegeneracy => {
            let nd = &cfg.nondegeneracy;
            let grid = Grid1D::symmetric(radius, nd.cells)?;
            let shifted = nondegeneracy_check_shifted(&grid, nd.constant, nd.trials, cfg.seed)?;
            let paired = nondegeneracy_check_paired(&grid, nd.constant, nd.trials, cfg.seed)?;
            Ok(Output::default()
                .check(nondegeneracy_report(&grid, &shifted))
                .check(nondegeneracy_report(&grid, &paired)))
        }
        CheckKind::Coherence => {
            if cfg.refinement.is_empty() {
                return Err(maxlab_core::Error::Validation(
                    "coherence needs a refinement ladder".into(),
                ));
            }
            let cc = CoherenceConfig {
                p: e.p,
                ladder: cfg.refinement.clone(),
                radius,
                delta: e.delta,
                np_radii: vec![radius, 2.0 * radius, 4.0 * radius],
                family: cfg.family_spec(),
                lambdas: default_lambda_grid(),
            };
            let rows = cfg
                .gallery
                .par_iter()
                .map(|spec| coherence_row(spec, &cc))
                .collect::<maxlab_core::Result<Vec<_>>>()?;
            Ok(rows.into_iter().fold(Output::default(), |o, r| {
                o.item(Item::Coherence(Box::new(r)))
            }))
        }
        _ => unreachable!("pointwise kinds handled above"),
    }
}

/// One human-readable line per item, for the terminal.
pub fn summary_lines(report: &RunReport) -> Vec<String> {
    use maxlab_core::ext_float::format_f64;
    let mut lines: Vec<String> = report
        .items
        .iter()
        .map(|item| match item {
            Item::Check(c) => {
                let detail = if c.assertive {
                    format!("worst_violation={}", format_f64(c.worst_violation))
                } else {
                    format!("value={}", c.recorded.map_or("-".into(), format_f64))
                };
                format!("{:<12} {:<28} {detail}", c.status.to_string(), c.check)
            }
            Item::Estimate(e) => format!(
                "{:<12} {:<28} value={} N={}{}",
                "estimate",
                e.estimator,
                format_f64(e.value),
                e.cells,
                e.delta.map_or(String::new(), |d| format!(" delta={d}"))
            ),
            Item::LambdaSearch(s) => {
                let r = s.to_report();
                format!(
                    "{:<12} {:<28} lambda0={}",
                    r.status.to_string(),
                    "search_lambda0",
                    s.lambda0.map_or("none".into(), |l| l.to_string())
                )
            }
            Item::Coherence(row) => {
                let r = row.to_report();
                format!(
                    "{:<12} {:<28} {}",
                    r.status.to_string(),
                    item.name(),
                    r.witness
                        .as_ref()
                        .map(Witness::to_string)
                        .unwrap_or_default()
                )
            }
            Item::Error { name, message } => format!("{:<12} {name:<28} {message}", "error"),
        })
        .collect();
    lines.push(format!(
        "overall: {}",
        if report.status == Status::Fail {
            "fail"
        } else {
            "pass"
        }
    ));
    lines
}
