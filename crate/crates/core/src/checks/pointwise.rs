//! Pointwise inequalities between maximal-type operators.

use crate::error::{param, Result};
use crate::grid::{check_lambda, rearrangement_value, GridFunction, Window};
use crate::maximal::{
    local_maximal, local_maximal_oracle, maximal, maximal_oracle, maximal_r, sharp_delta,
};
use crate::singular::{hilbert, hilbert_truncated_max};
use crate::sum::pairwise_sum_by;

use super::{margin, pointwise_margin, CheckReport, Params, Witness, ANALYTIC_TOL, BISECTION_TOL};

fn nonzero_or<F: FnOnce() -> Result<CheckReport>>(
    f: &GridFunction,
    report: CheckReport,
    run: F,
) -> Result<CheckReport> {
    if f.is_zero() {
        Ok(report.inconclusive("f vanishes identically"))
    } else {
        run()
    }
}

/// `(fχ_Q)^*(τ|Q|) ≤ τ^{−1/r}·(avg_Q |f|^r)^{1/r}`.
pub fn check_chebyshev(f: &GridFunction, q: Window, tau: f64, r: f64) -> Result<CheckReport> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(param("r", format!("must be at least 1, got {r}")));
    }
    let lhs = rearrangement_value(f, q, tau)?;
    let vals = &f.values()[q.range()];
    let avg = pairwise_sum_by(vals.len(), |i| vals[i].abs().powf(r)) / q.len() as f64;
    let rhs = tau.powf(-1.0 / r) * avg.powf(1.0 / r);
    let report = CheckReport::new(
        "chebyshev",
        "rearrangement at tau bounded by tau^(-1/r) times the r-average",
        f.grid(),
        ANALYTIC_TOL,
    )
    .with_params(Params::default().with_lambda(tau).with_r(r));
    let w = Witness::default()
        .with_window(q)
        .with_note(format!("lhs={lhs:e};rhs={rhs:e}"));
    Ok(report.assert_margin(margin(lhs, rhs), Some(w)))
}

/// `Mf ≤ (r/(r−1))·λ^{(r−1)/r}·M_r f + m_λ f` at every cell.
pub fn check_prop_splitting(f: &GridFunction, r: f64, lambda: f64) -> Result<CheckReport> {
    if !(r > 1.0 && r.is_finite()) {
        return Err(param("r", format!("must exceed 1, got {r}")));
    }
    check_lambda(lambda)?;
    let mf = maximal(f);
    let mrf = maximal_r(f, r)?;
    let mlf = local_maximal(f, lambda)?;
    let c = r / (r - 1.0) * lambda.powf((r - 1.0) / r);
    let rhs = GridFunction::from_parts(
        *f.grid(),
        mrf.values()
            .iter()
            .zip(mlf.values())
            .map(|(a, b)| c * a + b)
            .collect(),
    );
    let (m, cell) = pointwise_margin(&mf, &rhs)?;
    Ok(CheckReport::new(
        "prop_splitting",
        "Mf <= (r/(r-1)) lambda^((r-1)/r) M_r f + m_lambda f",
        f.grid(),
        BISECTION_TOL,
    )
    .with_params(Params::default().with_r(r).with_lambda(lambda))
    .assert_margin(m, Some(Witness::at_cell(cell))))
}

/// `m_λ f ≤ λ^{−1/δ}·M_δ f` at every cell.
pub fn check_mla(f: &GridFunction, lambda: f64, delta: f64) -> Result<CheckReport> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(param("delta", format!("must be positive, got {delta}")));
    }
    let mlf = local_maximal(f, lambda)?;
    let c = lambda.powf(-1.0 / delta);
    let rhs = maximal_r(f, delta)?.map(|v| c * v);
    let (m, cell) = pointwise_margin(&mlf, &rhs)?;
    Ok(CheckReport::new(
        "mla",
        "m_lambda f <= lambda^(-1/delta) M_delta f",
        f.grid(),
        BISECTION_TOL,
    )
    .with_params(Params::default().with_lambda(lambda).with_delta(delta))
    .assert_margin(m, Some(Witness::at_cell(cell))))
}

/// Largest pointwise ratio `num/den` over cells where `den > 0`, with the
/// first cell attaining it.
fn max_ratio(num: &[f64], den: &[f64]) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, (&a, &b)) in num.iter().zip(den).enumerate() {
        if b > 0.0 && a / b > best.0 {
            best = (a / b, i);
        }
    }
    best
}

/// Records `sup_x M_δ(Mf)(x)/Mf(x)`.
pub fn coifman_rochberg_ratio(f: &GridFunction, delta: f64) -> Result<CheckReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(param("delta", format!("must lie in (0, 1), got {delta}")));
    }
    let report = CheckReport::new("coifman_rochberg", "M_delta(Mf) <= C Mf", f.grid(), 0.0)
        .with_params(Params::default().with_delta(delta));
    nonzero_or(f, report.clone(), || {
        let mf = maximal(f);
        let mdmf = maximal_r(&mf, delta)?;
        let (ratio, cell) = max_ratio(mdmf.values(), mf.values());
        Ok(report.record(ratio, Some(Witness::at_cell(cell))))
    })
}

/// Observed constant `C_obs = sup_x m_λ(Mf)(x)/Mf(x)`, asserted against
/// `λ^{−2}·C_CR` with `C_CR` the Coifman–Rochberg ratio at `δ = 1/2` of
/// the same `Mf`. The bound is the chain `m_λ ≤ λ^{−2}M_{1/2}` followed by
/// `M_{1/2}(Mf) ≤ C_CR·Mf`.
pub fn check_local_of_maximal(f: &GridFunction, lambda: f64) -> Result<CheckReport> {
    check_lambda(lambda)?;
    let report = CheckReport::new(
        "local_of_maximal",
        "m_lambda(Mf) <= C Mf with C <= lambda^-2 C_CR",
        f.grid(),
        BISECTION_TOL,
    )
    .with_params(Params::default().with_lambda(lambda));
    nonzero_or(f, report.clone(), || {
        let mf = maximal(f);
        let mlmf = local_maximal(&mf, lambda)?;
        let (c_obs, cell) = max_ratio(mlmf.values(), mf.values());
        let (c_cr, _) = max_ratio(maximal_r(&mf, 0.5)?.values(), mf.values());
        let bound = c_cr / (lambda * lambda);
        let w = Witness::at_cell(cell).with_note(format!("C_obs={c_obs:e};C_CR={c_cr:e}"));
        let mut out = report.assert_margin(margin(c_obs, bound), Some(w));
        out.recorded = Some(c_obs);
        Ok(out)
    })
}

/// Records `sup_x M_r(Hf)(x)/(H*f(x) + Mf(x))`.
pub fn cf_pointwise_check(f: &GridFunction, r: f64) -> Result<CheckReport> {
    if !(r > 0.0 && r < 1.0) {
        return Err(param("r", format!("must lie in (0, 1), got {r}")));
    }
    let report = CheckReport::new(
        "cf_pointwise",
        "M_r(Tf) <= C (T*f + Mf) for r in (0,1)",
        f.grid(),
        0.0,
    )
    .with_params(Params::default().with_r(r));
    nonzero_or(f, report.clone(), || {
        let mrhf = maximal_r(&hilbert(f), r)?;
        let hstar = hilbert_truncated_max(f);
        let mf = maximal(f);
        let den: Vec<f64> = hstar
            .values()
            .iter()
            .zip(mf.values())
            .map(|(a, b)| a + b)
            .collect();
        let (ratio, cell) = max_ratio(mrhf.values(), &den);
        Ok(report.record(ratio, Some(Witness::at_cell(cell))))
    })
}

/// `f#_δ ≤ 2·M_δ f` at every cell.
pub fn sharp_delta_bound_check(f: &GridFunction, delta: f64) -> Result<CheckReport> {
    let lhs = sharp_delta(f, delta)?;
    let rhs = maximal_r(f, delta)?.map(|v| 2.0 * v);
    let (m, cell) = pointwise_margin(&lhs, &rhs)?;
    Ok(CheckReport::new(
        "sharp_delta_bound",
        "f#_delta <= 2 M_delta f",
        f.grid(),
        BISECTION_TOL,
    )
    .with_params(Params::default().with_delta(delta))
    .assert_margin(m, Some(Witness::at_cell(cell))))
}

/// `‖Hf‖_{ℓ²} ≤ π‖f‖_{ℓ²}`.
pub fn hilbert_l2_check(f: &GridFunction) -> CheckReport {
    let hf = hilbert(f);
    let l2 = |v: &[f64]| pairwise_sum_by(v.len(), |i| v[i] * v[i]).sqrt();
    let lhs = l2(hf.values());
    let rhs = std::f64::consts::PI * l2(f.values());
    CheckReport::new(
        "hilbert_l2",
        "||Hf||_2 <= pi ||f||_2",
        f.grid(),
        ANALYTIC_TOL,
    )
    .assert_margin(
        margin(lhs, rhs),
        Some(Witness::default().with_note(format!("ratio={:e}", lhs / rhs))),
    )
}

/// Fast maximal operator against the window-enumeration oracle, relative
/// `1e−9`. `perturbation` is added to every oracle value; it is zero except
/// in fixtures that exercise the failure path.
pub fn check_maximal_oracle(f: &GridFunction, perturbation: f64) -> Result<CheckReport> {
    let fast = maximal(f);
    let oracle = maximal_oracle(f)?.map(|v| v + perturbation);
    let (m, cell) = worst_difference(&fast, &oracle, true);
    Ok(CheckReport::new(
        "oracle_maximal",
        "fast M agrees with the window oracle",
        f.grid(),
        BISECTION_TOL,
    )
    .assert_margin(m, Some(Witness::at_cell(cell))))
}

/// Sliding-order-statistic `m_λ` against the oracle, bitwise.
pub fn check_local_maximal_oracle(
    f: &GridFunction,
    lambda: f64,
    perturbation: f64,
) -> Result<CheckReport> {
    let fast = local_maximal(f, lambda)?;
    let oracle = local_maximal_oracle(f, lambda)?.map(|v| v + perturbation);
    let (m, cell) = worst_difference(&fast, &oracle, false);
    Ok(CheckReport::new(
        "oracle_local_maximal",
        "fast m_lambda agrees with the window oracle",
        f.grid(),
        0.0,
    )
    .with_params(Params::default().with_lambda(lambda))
    .assert_margin(m, Some(Witness::at_cell(cell))))
}

/// Largest `|a − b|` (relative to `|b|` when `relative`), with its cell.
fn worst_difference(a: &GridFunction, b: &GridFunction, relative: bool) -> (f64, usize) {
    let mut worst = (0.0, 0);
    for (i, (&x, &y)) in a.values().iter().zip(b.values()).enumerate() {
        let d = if x == y {
            0.0
        } else if relative {
            (x - y).abs() / y.abs().max(f64::MIN_POSITIVE)
        } else {
            (x - y).abs()
        };
        if d > worst.0 {
            worst = (d, i);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checks::Status;
    use crate::grid::Grid1D;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(vals: &[f64]) -> GridFunction {
        GridFunction::new(Grid1D::new(0.0, 1.0, vals.len()).unwrap(), vals.to_vec()).unwrap()
    }

    fn spike(n: usize, i: usize) -> GridFunction {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        unit(&v)
    }

    #[test]
    fn chebyshev_examples() {
        let f = unit(&[3.0, 1.0, 2.0]);
        let r = check_chebyshev(&f, Window::new(0, 2).unwrap(), 0.5, 1.0).unwrap();
        assert_eq!(r.status, Status::Pass);
        // 2 ≤ 2·2 = 4
        assert_eq!(r.worst_violation, -0.5);
        let c = unit(&[1.5; 8]);
        let r = check_chebyshev(&c, Window::new(2, 6).unwrap(), 0.3, 2.0).unwrap();
        assert_eq!(r.status, Status::Pass);
        assert!(check_chebyshev(&c, Window::new(2, 6).unwrap(), 0.3, 0.5).is_err());
    }

    #[test]
    fn constant_inputs_pass() {
        let c = unit(&[2.0; 16]);
        assert_eq!(
            check_prop_splitting(&c, 2.0, 0.5).unwrap().status,
            Status::Pass
        );
        assert_eq!(check_mla(&c, 0.5, 1.0).unwrap().status, Status::Pass);
        assert_eq!(
            sharp_delta_bound_check(&c, 0.5).unwrap().status,
            Status::Pass
        );
        let lom = check_local_of_maximal(&c, 0.5).unwrap();
        assert_eq!(lom.recorded, Some(1.0));
        let cr = coifman_rochberg_ratio(&c, 0.5).unwrap().recorded.unwrap();
        assert!((cr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spike_examples() {
        let f = spike(32, 10);
        assert_eq!(
            check_prop_splitting(&f, 2.0, 0.5).unwrap().status,
            Status::Pass
        );
        assert_eq!(check_mla(&f, 0.5, 1.0).unwrap().status, Status::Pass);
        let lom = check_local_of_maximal(&f, 0.5).unwrap();
        assert_eq!(lom.status, Status::Pass);
        assert!(lom.recorded.unwrap() >= 1.0);
        let cr = coifman_rochberg_ratio(&f, 0.5).unwrap();
        assert!(cr.recorded.unwrap().is_finite() && cr.recorded.unwrap() >= 1.0);
        let cf = cf_pointwise_check(&f, 0.5).unwrap();
        assert!(cf.recorded.unwrap().is_finite());
        // (0, 1), δ = 1/2: f#_δ = 1/4 everywhere.
        let two = unit(&[0.0, 1.0]);
        let s = sharp_delta(&two, 0.5).unwrap();
        assert!(s.values().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert_eq!(
            sharp_delta_bound_check(&two, 0.5).unwrap().status,
            Status::Pass
        );
    }

    #[test]
    fn zero_function_is_inconclusive() {
        let z = unit(&[0.0; 8]);
        assert_eq!(
            check_local_of_maximal(&z, 0.5).unwrap().status,
            Status::Inconclusive
        );
        assert_eq!(
            coifman_rochberg_ratio(&z, 0.5).unwrap().status,
            Status::Inconclusive
        );
        assert_eq!(
            cf_pointwise_check(&z, 0.5).unwrap().status,
            Status::Inconclusive
        );
    }

    #[test]
    fn oracle_checks_and_corruption() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = unit(&(0..40).map(|_| rng.random::<f64>()).collect::<Vec<_>>());
        assert_eq!(check_maximal_oracle(&f, 0.0).unwrap().status, Status::Pass);
        assert_eq!(
            check_local_maximal_oracle(&f, 0.3, 0.0).unwrap().status,
            Status::Pass
        );
        assert_eq!(check_maximal_oracle(&f, 1e-6).unwrap().status, Status::Fail);
        assert_eq!(
            check_local_maximal_oracle(&f, 0.3, 1e-12).unwrap().status,
            Status::Fail
        );
    }

    #[test]
    fn witness_reproduces_margin() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = unit(&(0..48).map(|_| rng.random::<f64>()).collect::<Vec<_>>());
        let r = check_mla(&f, 0.4, 0.7).unwrap();
        let x = r.witness.as_ref().unwrap().cell.unwrap();
        let lhs = local_maximal(&f, 0.4).unwrap().values()[x];
        let rhs = 0.4f64.powf(-1.0 / 0.7) * maximal_r(&f, 0.7).unwrap().values()[x];
        assert_eq!(margin(lhs, rhs), r.worst_violation);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn pointwise_suite_holds(
            vals in prop::collection::vec(0.0f64..1.0, 8..48),
            r in 1.05f64..4.0,
            lambda in 0.05f64..0.95,
            delta in 0.1f64..1.0,
        ) {
            let f = unit(&vals);
            prop_assert_eq!(check_prop_splitting(&f, r, lambda).unwrap().status, Status::Pass);
            prop_assert_eq!(check_mla(&f, lambda, delta).unwrap().status, Status::Pass);
            let q = Window::new(0, vals.len() - 1).unwrap();
            prop_assert_eq!(check_chebyshev(&f, q, lambda, r).unwrap().status, Status::Pass);
            prop_assert_eq!(hilbert_l2_check(&f).status, Status::Pass);
            if !f.is_zero() {
                prop_assert_ne!(check_local_of_maximal(&f, lambda).unwrap().status, Status::Fail);
            }
        }
    }
}
