//! Seeded families of nonnegative test functions.
//!
//! Norm inequalities quantify over all `f`; a family stands in for that
//! quantifier at desk scale. The kinds follow the witnesses that appear in
//! the arguments being tested (spikes, `χ_{εQ}`, `σχ_Q`) plus generic
//! random and decaying inputs. `steps` and the `*_at` kinds are defined in
//! physical coordinates, so they describe the same function on every grid of
//! a refinement ladder.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{scale_window, Grid1D, GridFunction, Weight, Window};
use crate::weights::dual_weight;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyKind {
    /// Independent uniform `[0, 1)` values per cell.
    Uniform { count: usize },
    /// Unit indicators of random single cells.
    Spikes { count: usize },
    /// Unit indicators of the cells containing the given points.
    SpikesAt { positions: Vec<f64> },
    /// `χ_{εQ}` for random windows `Q`.
    Indicator { eps: f64, count: usize },
    /// `χ_{εQ}` for the window covering `[a, b]`.
    IndicatorAt { eps: f64, a: f64, b: f64 },
    /// `min(σ, cap)·χ_Q` for random windows, `σ` the dual weight.
    DualShaped { count: usize, cap: f64 },
    /// `1/(1 + |x|)²`.
    Decaying,
    /// Random piecewise constant on `pieces` equal sub-intervals of the domain.
    Steps { pieces: usize, count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub kinds: Vec<FamilyKind>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub label: String,
    pub f: GridFunction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestFamily {
    pub spec: FamilySpec,
    pub members: Vec<Member>,
}

impl TestFamily {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Member> {
        self.members.iter()
    }
}

fn random_window(rng: &mut ChaCha8Rng, n: usize) -> Window {
    let m = rng.random_range(2.min(n)..=(n / 4).max(2).min(n));
    let lo = rng.random_range(0..=n - m);
    Window::with_len(lo, m).expect("nonzero length")
}

fn cell_of(grid: &Grid1D, x: f64) -> Option<usize> {
    let i = ((x - grid.origin()) / grid.h()).floor();
    (i >= 0.0 && (i as usize) < grid.cells()).then_some(i as usize)
}

/// `p` is only used by the dual-shaped kind.
pub fn make_test_family(
    spec: &FamilySpec,
    grid: Grid1D,
    weight: Option<&Weight>,
    p: f64,
) -> Result<TestFamily> {
    let n = grid.cells();
    let mut members = Vec::new();
    for (k, kind) in spec.kinds.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(
            spec.seed
                .wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        );
        match kind {
            FamilyKind::Uniform { count } => {
                for c in 0..*count {
                    let vals = (0..n).map(|_| rng.random::<f64>()).collect();
                    members.push(Member {
                        label: format!("uniform#{c}"),
                        f: GridFunction::new(grid, vals)?,
                    });
                }
            }
            FamilyKind::Spikes { count } => {
                for _ in 0..*count {
                    let i = rng.random_range(0..n);
                    members.push(Member {
                        label: format!("spike@{i}"),
                        f: GridFunction::indicator(grid, Window::new(i, i)?)?,
                    });
                }
            }
            FamilyKind::SpikesAt { positions } => {
                for &x in positions {
                    let i = cell_of(&grid, x).ok_or_else(|| {
                        Error::Validation(format!("spike position {x} is off the grid"))
                    })?;
                    members.push(Member {
                        label: format!("spike@{i}"),
                        f: GridFunction::indicator(grid, Window::new(i, i)?)?,
                    });
                }
            }
            FamilyKind::Indicator { eps, count } => {
                check_eps(*eps)?;
                for _ in 0..*count {
                    let q = random_window(&mut rng, n);
                    let eq = scale_window(&grid, q, *eps)?.window;
                    members.push(Member {
                        label: format!("chi(eps={eps};Q={q};eQ={eq})"),
                        f: GridFunction::indicator(grid, eq)?,
                    });
                }
            }
            FamilyKind::IndicatorAt { eps, a, b } => {
                check_eps(*eps)?;
                let q = grid
                    .window_covering(*a, *b)
                    .ok_or_else(|| Error::Validation(format!("no cell center in [{a}, {b}]")))?;
                let eq = scale_window(&grid, q, *eps)?.window;
                members.push(Member {
                    label: format!("chi(eps={eps};Q={q};eQ={eq})"),
                    f: GridFunction::indicator(grid, eq)?,
                });
            }
            FamilyKind::DualShaped { count, cap } => {
                let w = weight.ok_or_else(|| {
                    Error::Validation("dual-shaped family members need a weight".into())
                })?;
                if !(*cap > 0.0) {
                    return Err(Error::Validation(format!(
                        "cap must be positive, got {cap}"
                    )));
                }
                let sigma = dual_weight(w, p)?;
                for _ in 0..*count {
                    let q = random_window(&mut rng, n);
                    let vals = (0..n)
                        .map(|i| {
                            if q.contains(i) {
                                sigma.values()[i].min(*cap)
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    members.push(Member {
                        label: format!("sigma*chi(Q={q})"),
                        f: GridFunction::new(grid, vals)?,
                    });
                }
            }
            FamilyKind::Decaying => members.push(Member {
                label: "decaying".into(),
                f: GridFunction::from_fn(grid, |x| 1.0 / (1.0 + x.abs()).powi(2))?,
            }),
            FamilyKind::Steps { pieces, count } => {
                if *pieces == 0 {
                    return Err(Error::Validation("steps need at least one piece".into()));
                }
                let piece_len = grid.measure() / *pieces as f64;
                for c in 0..*count {
                    let levels: Vec<f64> = (0..*pieces).map(|_| rng.random::<f64>()).collect();
                    let f = GridFunction::from_fn(grid, |x| {
                        let j = ((x - grid.origin()) / piece_len).floor() as usize;
                        levels[j.min(pieces - 1)]
                    })?;
                    members.push(Member {
                        label: format!("steps#{c}"),
                        f,
                    });
                }
            }
        }
    }
    members.retain(|m| !m.f.is_zero());
    Ok(TestFamily {
        spec: spec.clone(),
        members,
    })
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "eps must lie in (0, 1], got {eps}"
        )))
    }
}
