//! Greedy L-curve parameter selection.
//!
//! Parameters are tuned one at a time in the order `μ, λ, γ`. While one is
//! swept, the ones already tuned keep their chosen values and the later ones
//! are switched off. Each grid value gives a point
//! `(log ||y - A x||, log regularizer)`, and the pick is the interior point of
//! largest signed three-point curvature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::try_map_indexed;
use crate::method::{Method, Reconstruction};
use crate::metrics::snr_db;
use crate::model::{KSpaceData, MultiEchoImage, ReconParams};

/// Stand-in for "switched off" γ: the transform update needs `γ > 0`.
pub const GAMMA_FLOOR: f64 = 1e-3;

/// Floor applied before taking logarithms, so an exactly-zero residual or
/// regularizer stays finite.
const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub residual: f64,
    pub regularizer: f64,
}

/// Signed curvature of the circle through `a`, `b`, `c`; positive for a
/// counter-clockwise turn. Zero when two points coincide.
fn menger(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    let cross = (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0);
    let d = |p: (f64, f64), q: (f64, f64)| (p.0 - q.0).hypot(p.1 - q.1);
    let denom = d(a, b) * d(b, c) * d(a, c);
    if denom > 0.0 {
        2.0 * cross / denom
    } else {
        0.0
    }
}

/// Curvature at every interior point of the log-log curve; entry `i` belongs
/// to point `i + 1`.
pub fn curvatures(points: &[CurvePoint]) -> Vec<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|p| {
            (
                p.residual.max(LOG_FLOOR).ln(),
                p.regularizer.max(LOG_FLOOR).ln(),
            )
        })
        .collect();
    logs.windows(3).map(|w| menger(w[0], w[1], w[2])).collect()
}

/// Index of the corner of an L-curve whose points are ordered by increasing
/// parameter value (residual growing, regularizer shrinking). Endpoints are
/// never chosen; ties go to the smaller index.
pub fn lcurve_corner(points: &[CurvePoint]) -> Result<usize> {
    if points.len() < 3 {
        return Err(Error::invalid(format!(
            "L-curve needs at least 3 points, got {}",
            points.len()
        )));
    }
    let kappa = curvatures(points);
    let mut best = 0;
    for (i, &k) in kappa.iter().enumerate() {
        if k > kappa[best] || (kappa[best].is_nan() && !k.is_nan()) {
            best = i;
        }
    }
    Ok(best + 1)
}

/// Candidate values per parameter. Grids are sorted and deduplicated before
/// use; parameters a method does not use are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamGrid {
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Default for ParamGrid {
    fn default() -> Self {
        Self {
            mu: vec![1e-3, 3e-3, 1e-2, 3e-2, 1e-1],
            lambda: vec![0.01, 0.03, 0.1, 0.2, 0.4, 0.8],
            gamma: vec![0.3, 1.0, 3.0, 10.0, 30.0],
        }
    }
}

impl ParamGrid {
    fn values(&self, name: &str) -> Result<Vec<f64>> {
        let raw = match name {
            "mu" => &self.mu,
            "lambda" => &self.lambda,
            "gamma" => &self.gamma,
            _ => return Err(Error::invalid(format!("unknown parameter {name:?}"))),
        };
        if raw.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(format!(
                "{name} grid must hold finite non-negative values"
            )));
        }
        let mut v = raw.clone();
        v.sort_by(f64::total_cmp);
        v.dedup();
        Ok(v)
    }
}

/// One parameter's sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LCurveTrace {
    pub parameter: String,
    pub values: Vec<f64>,
    pub points: Vec<CurvePoint>,
    pub selected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LCurveOutcome {
    pub params: ReconParams,
    pub traces: Vec<LCurveTrace>,
}

fn set(params: &mut ReconParams, name: &str, value: f64) {
    match name {
        "mu" => params.mu = value,
        "lambda" => params.lambda = value,
        "gamma" => params.gamma = value.max(GAMMA_FLOOR),
        _ => unreachable!("validated by ParamGrid::values"),
    }
}

fn regularizer(rec: &Reconstruction, name: &str) -> f64 {
    let t = &rec.terms;
    match name {
        "mu" => t.patch_fit.map(f64::sqrt),
        "lambda" => t.sparsity,
        "gamma" => t.transform,
        _ => None,
    }
    .unwrap_or(f64::NAN)
}

/// Greedy L-curve tuning of `method` on the measurements `y`. Fields of
/// `base` that are not tuned (patch geometry, iteration limits, ...) are kept.
pub fn lcurve_greedy(
    y: &KSpaceData,
    method: Method,
    grid: &ParamGrid,
    base: &ReconParams,
) -> Result<LCurveOutcome> {
    let names = method.tunable();
    let grids = names
        .iter()
        .map(|n| grid.values(n))
        .collect::<Result<Vec<_>>>()?;
    for (n, g) in names.iter().zip(&grids) {
        if g.len() < 3 {
            return Err(Error::invalid(format!(
                "{n} grid needs at least 3 distinct values, got {}",
                g.len()
            )));
        }
    }
    let mut chosen = base.clone();
    for n in names {
        set(&mut chosen, n, 0.0);
    }
    let mut traces = Vec::with_capacity(names.len());
    for (name, values) in names.iter().zip(grids) {
        let points = try_map_indexed(values.len(), base.sequential, |i| {
            let mut p = chosen.clone();
            set(&mut p, name, values[i]);
            let rec = method.reconstruct(y, &p)?;
            Ok::<_, Error>(CurvePoint {
                residual: rec.terms.data_residual,
                regularizer: regularizer(&rec, name),
            })
        })?;
        let selected = lcurve_corner(&points)?;
        set(&mut chosen, name, values[selected]);
        traces.push(LCurveTrace {
            parameter: (*name).to_string(),
            values,
            points,
            selected,
        });
    }
    Ok(LCurveOutcome {
        params: chosen,
        traces,
    })
}

/// Reference tuning that needs the ground truth: evaluates every combination
/// of the method's grids and returns the one with the highest SNR.
pub fn exhaustive_search(
    y: &KSpaceData,
    method: Method,
    grid: &ParamGrid,
    base: &ReconParams,
    truth: &MultiEchoImage,
) -> Result<(ReconParams, f64)> {
    let names = method.tunable();
    let grids = names
        .iter()
        .map(|n| grid.values(n))
        .collect::<Result<Vec<_>>>()?;
    if grids.iter().any(|g| g.is_empty()) {
        return Err(Error::invalid(
            "every tuned parameter needs a non-empty grid",
        ));
    }
    let total: usize = grids.iter().map(Vec::len).product();
    let combo = |mut k: usize| {
        let mut p = base.clone();
        for (n, g) in names.iter().zip(&grids) {
            set(&mut p, n, g[k % g.len()]);
            k /= g.len();
        }
        p
    };
    let scores = try_map_indexed(total, base.sequential, |k| {
        let rec = method.reconstruct(y, &combo(k))?;
        snr_db(truth, &rec.image)
    })?;
    let best = (0..total).fold(0, |b, k| if scores[k] > scores[b] { k } else { b });
    Ok((combo(best), scores[best]))
}
