//! Centered maximal operators over the shared radius ladder, plus the
//! Hardy-space norm taken through the mollified one.
//!
//! Every operator exists in two modes. `BruteForce` scans each admissible
//! radius at each cell with no shortcuts and is the oracle. `Fast` runs the
//! identical stencil loops in the identical order but may skip a radius
//! after proving, with a safety margin far above summation roundoff, that
//! its average cannot beat the running maximum. Skipping never changes the
//! result, so the two modes agree bit for bit; tests and the acceptance
//! suite hold them to that.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Domain;
use crate::mollifier::Mollifier;
use crate::norms::lq_norm;
use crate::stencil::StencilSet;
use crate::sweep::{admissible, stencil_osc, stencil_sum, Indexer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Fast,
    BruteForce,
}

/// Shared setup for the maximal operators on one domain: the radius
/// ladder stencils, the mollifier kernels, the evaluation mode, and the
/// exponent s of the interpolating family (`f64::INFINITY` for the shell
/// supremum).
#[derive(Debug, Clone)]
pub struct MaximalConfig {
    domain: Arc<Domain>,
    pub stencils: StencilSet,
    pub mollifier: Mollifier,
    pub mode: EvalMode,
    pub s_exponent: f64,
}

impl MaximalConfig {
    pub fn build(domain: &Arc<Domain>) -> Result<MaximalConfig> {
        let stencils = StencilSet::build(domain)?;
        let mollifier = Mollifier::build(domain, &stencils)?;
        Ok(MaximalConfig {
            domain: domain.clone(),
            stencils,
            mollifier,
            mode: EvalMode::Fast,
            s_exponent: f64::INFINITY,
        })
    }

    pub fn with_mode(mut self, mode: EvalMode) -> MaximalConfig {
        self.mode = mode;
        self
    }

    pub fn with_s(mut self, s: f64) -> MaximalConfig {
        self.s_exponent = s;
        self
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    fn check_field(&self, f: &ScalarField) -> Result<()> {
        if f.domain().as_ref() != self.domain.as_ref() {
            return Err(Error::Domain(
                "field domain differs from the one the config was built for".into(),
            ));
        }
        Ok(())
    }

    fn indexer(&self) -> Indexer {
        let pad = *self.stencils.radii_cells().last().unwrap_or(&0);
        Indexer::new(self.domain.grid(), pad)
    }
}

/// Pruning threshold factor. A uniform-weight stencil sum of m terms is
/// within (m+1) ulps of its exact value, which for any grid this crate
/// handles is below 1e-10 relative; a skip decided with this margin can
/// never discard a radius whose computed average would have won.
const PRUNE_MARGIN: f64 = 1.0 + 1e-9;

/// bounds[m] overestimates every m-term uniform average of |f|: it is the
/// mean of the m largest absolute values.
fn top_mean_bounds(values: &[f64], ncells: usize) -> Vec<f64> {
    let mut mags: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    let mut out = Vec::with_capacity(ncells + 1);
    out.push(f64::INFINITY);
    let mut acc = 0.0;
    for (m, v) in mags.iter().enumerate() {
        acc += v;
        out.push(acc / (m + 1) as f64);
    }
    out
}

/// Hardy-Littlewood operator: at each cell the maximum of |f| averaged
/// over admissible balls, the zero-radius ball included, so the output
/// dominates |f| pointwise.
pub fn max_hl(f: &ScalarField, cfg: &MaximalConfig) -> Result<ScalarField> {
    cfg.check_field(f)?;
    let domain = f.domain();
    let grid = domain.grid();
    let idx = cfg.indexer();
    let values = f.values();
    let bounds = match cfg.mode {
        EvalMode::Fast => Some(top_mean_bounds(values, grid.ncells())),
        EvalMode::BruteForce => None,
    };

    let mut out = vec![0.0; grid.ncells()];
    for i in 0..grid.ncells() {
        if !domain.is_in(i) {
            continue;
        }
        let coords = grid.coords_of(i);
        let mut best = 0.0f64;
        for k in 0..cfg.stencils.len() {
            let ball = cfg.stencils.ball(k);
            if !admissible(domain, i, ball.reach) {
                continue;
            }
            if let Some(b) = &bounds {
                if best >= b[ball.len()] * PRUNE_MARGIN {
                    continue;
                }
            }
            let avg = stencil_sum(values, &idx, &coords, ball, f64::abs);
            if avg > best {
                best = avg;
            }
        }
        out[i] = best;
    }
    ScalarField::from_values(domain.clone(), out)
}

/// Sharp operator: the maximum over admissible positive radii of the mean
/// deviation from the ball average. The ball average is accumulated as
/// deviations from the center value, which makes constant fields score
/// exactly zero.
pub fn max_sharp(f: &ScalarField, cfg: &MaximalConfig) -> Result<ScalarField> {
    cfg.check_field(f)?;
    let domain = f.domain();
    let grid = domain.grid();
    let idx = cfg.indexer();
    let values = f.values();
    let bounds = match cfg.mode {
        EvalMode::Fast => Some(top_mean_bounds(values, grid.ncells())),
        EvalMode::BruteForce => None,
    };

    let mut out = vec![0.0; grid.ncells()];
    for i in 0..grid.ncells() {
        if !domain.is_in(i) {
            continue;
        }
        let coords = grid.coords_of(i);
        let anchor = values[i];
        let mut best = 0.0f64;
        for k in 1..cfg.stencils.len() {
            let ball = cfg.stencils.ball(k);
            if !admissible(domain, i, ball.reach) {
                continue;
            }
            if let Some(b) = &bounds {
                // Oscillation around the mean is at most mean |f| + |mean f|.
                if best >= 2.0 * b[ball.len()] * PRUNE_MARGIN {
                    continue;
                }
            }
            let mean = anchor + stencil_sum(values, &idx, &coords, ball, |v| v - anchor);
            let osc = stencil_osc(values, &idx, &coords, ball, mean);
            if osc > best {
                best = osc;
            }
        }
        out[i] = best;
    }
    ScalarField::from_values(domain.clone(), out)
}

/// Shell-supremum operator: maximum of |f| averaged over admissible
/// spheres of positive radius. Works in one dimension too, where each
/// "sphere" is the two cells at distance r.
pub fn max_spherical(f: &ScalarField, cfg: &MaximalConfig) -> Result<ScalarField> {
    cfg.check_field(f)?;
    let domain = f.domain();
    let grid = domain.grid();
    let idx = cfg.indexer();
    let values = f.values();
    let bounds = match cfg.mode {
        EvalMode::Fast => Some(top_mean_bounds(values, grid.ncells())),
        EvalMode::BruteForce => None,
    };

    let mut out = vec![0.0; grid.ncells()];
    for i in 0..grid.ncells() {
        if !domain.is_in(i) {
            continue;
        }
        let coords = grid.coords_of(i);
        let mut best = 0.0f64;
        for k in 1..cfg.stencils.len() {
            let shell = match cfg.stencils.shell(k) {
                Some(s) => s,
                None => continue,
            };
            if !admissible(domain, i, shell.reach) {
                continue;
            }
            if let Some(b) = &bounds {
                if best >= b[shell.len()] * PRUNE_MARGIN {
                    continue;
                }
            }
            let avg = stencil_sum(values, &idx, &coords, shell, f64::abs);
            if avg > best {
                best = avg;
            }
        }
        out[i] = best;
    }
    ScalarField::from_values(domain.clone(), out)
}

/// Interpolating family: at scale t, a radially weighted s-power mean of
/// the shell averages of |f| up to t; the field value is the maximum over
/// admissible scales. The radial quadrature is a trapezoid rule over the
/// ladder nodes (the zero-radius node carries the cell's own value), with
/// the weights normalized to unit mass so that constants are reproduced
/// for every s and the family is monotone in s by the power-mean
/// inequality. s = infinity degenerates to the shell supremum and is
/// delegated to `max_spherical` over the same ladder.
pub fn max_interp(f: &ScalarField, cfg: &MaximalConfig) -> Result<ScalarField> {
    let s = cfg.s_exponent;
    if !(s >= 1.0) {
        return Err(Error::Parameter(format!(
            "interpolation exponent must satisfy s >= 1, got {s}"
        )));
    }
    if s == f64::INFINITY {
        return max_spherical(f, cfg);
    }
    cfg.check_field(f)?;
    let domain = f.domain();
    let grid = domain.grid();
    let dim = grid.dim();
    let idx = cfg.indexer();
    let values = f.values();
    let radii = cfg.stencils.radii();

    let shell_avg = |i: usize, coords: &[usize; 3], k: usize| -> f64 {
        if k == 0 {
            values[i].abs()
        } else {
            stencil_sum(values, &idx, coords, cfg.stencils.shell(k).unwrap(), f64::abs)
        }
    };

    let mut out = vec![0.0; grid.ncells()];
    let mut powered: Vec<f64> = Vec::with_capacity(cfg.stencils.len());
    for i in 0..grid.ncells() {
        if !domain.is_in(i) {
            continue;
        }
        let coords = grid.coords_of(i);
        // Admissible scales are a prefix of the ladder: reach grows with
        // the radius.
        let mut last = 0usize;
        for k in 1..cfg.stencils.len() {
            if admissible(domain, i, cfg.stencils.shell(k).unwrap().reach) {
                last = k;
            } else {
                break;
            }
        }
        if last == 0 {
            continue;
        }
        if cfg.mode == EvalMode::Fast {
            powered.clear();
            for k in 0..=last {
                powered.push(shell_avg(i, &coords, k).powf(s));
            }
        }
        let mut best = 0.0f64;
        for m in 1..=last {
            let t_nodes = m + 1;
            let mut mass = 0.0f64;
            let mut acc = 0.0f64;
            for k in 0..t_nodes {
                let gap_below = if k == 0 { 0.0 } else { radii[k] - radii[k - 1] };
                let gap_above = if k == m { 0.0 } else { radii[k + 1] - radii[k] };
                let w = 0.5 * (gap_below + gap_above) * radii[k].powi(dim as i32 - 1);
                let gs = match cfg.mode {
                    EvalMode::Fast => powered[k],
                    EvalMode::BruteForce => shell_avg(i, &coords, k).powf(s),
                };
                mass += w;
                acc += w * gs;
            }
            let val = (acc / mass).powf(1.0 / s);
            if val > best {
                best = val;
            }
        }
        out[i] = best;
    }
    ScalarField::from_values(domain.clone(), out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MollifiedStats {
    /// Active cells with no admissible smoothing scale; their output is 0.
    pub starved_cells: usize,
}

/// Smoothed maximal field: at each cell the maximum over admissible
/// scales of |F * kernel_t|. The absolute value is applied after the
/// convolution, so sign cancellation inside a kernel survives.
pub fn max_mollified(f: &ScalarField, cfg: &MaximalConfig) -> Result<ScalarField> {
    Ok(max_mollified_stats(f, cfg)?.0)
}

pub fn max_mollified_stats(
    f: &ScalarField,
    cfg: &MaximalConfig,
) -> Result<(ScalarField, MollifiedStats)> {
    cfg.check_field(f)?;
    let domain = f.domain();
    let grid = domain.grid();
    let idx = cfg.indexer();
    let values = f.values();

    let mut starved = 0usize;
    let mut out = vec![0.0; grid.ncells()];
    for i in 0..grid.ncells() {
        if !domain.is_in(i) {
            continue;
        }
        let coords = grid.coords_of(i);
        let mut best = 0.0f64;
        let mut seen = false;
        for k in 1..cfg.mollifier.len() {
            let kernel = match cfg.mollifier.kernel(k) {
                Some(st) => st,
                None => continue,
            };
            if !admissible(domain, i, kernel.reach) {
                continue;
            }
            seen = true;
            let conv = stencil_sum(values, &idx, &coords, kernel, |v| v).abs();
            if conv > best {
                best = conv;
            }
        }
        if !seen {
            starved += 1;
        }
        out[i] = best;
    }
    let field = ScalarField::from_values(domain.clone(), out)?;
    Ok((field, MollifiedStats { starved_cells: starved }))
}

/// L1 norm of the mollified maximal field, with the default config for
/// the field's domain.
pub fn h1_norm(f: &ScalarField) -> Result<f64> {
    let cfg = MaximalConfig::build(f.domain())?;
    h1_norm_with(f, &cfg)
}

pub fn h1_norm_with(f: &ScalarField, cfg: &MaximalConfig) -> Result<f64> {
    lq_norm(&max_mollified(f, cfg)?, 1.0)
}
