//! Readout: recover basis-state probabilities from a transmission spectrum.
//!
//! Every basis state `k` contributes a Lorentzian of width `kappa` centred at
//! `omega_f - pull(k)`, weighted by its probability. Centres come from the
//! device parameters; only the weights are fitted, by nonnegative least
//! squares.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::linalg::least_squares;
use crate::math::{sq, sqrt};
use crate::model::{pull, AngularFrequency, DeviceParams, FrequencyGrid, Spectrum};

/// Default minimum peak prominence, as a fraction of the global maximum.
pub const DEFAULT_PROMINENCE: f64 = 0.02;

/// Centres closer than `kappa * DEGENERACY_FRACTION` share one group.
pub const DEGENERACY_FRACTION: f64 = 0.01;

/// Stationarity threshold on the normalized NNLS gradient.
pub const KKT_TOL: f64 = 1e-10;

/// Minimum number of grid points per linewidth.
pub const MIN_POINTS_PER_KAPPA: f64 = 3.0;

/// Predicted resonance of every basis state and the resulting groups.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedCenters {
    pub centers: Vec<AngularFrequency>,
    /// Partition of the basis indices into groups of coinciding centres,
    /// ordered by smallest member; members ascend.
    pub groups: Vec<Vec<usize>>,
}

impl PredictedCenters {
    /// Groups with more than one member.
    pub fn degenerate_groups(&self) -> Vec<Vec<usize>> {
        self.groups
            .iter()
            .filter(|g| g.len() > 1)
            .cloned()
            .collect()
    }

    /// Mean centre of a group in rad/us.
    pub fn group_center(&self, group: usize) -> f64 {
        let members = &self.groups[group];
        members
            .iter()
            .map(|k| self.centers[*k].value())
            .sum::<f64>()
            / members.len() as f64
    }

    /// Group containing basis index `k`.
    pub fn group_of(&self, k: usize) -> Option<usize> {
        self.groups.iter().position(|g| g.contains(&k))
    }
}

pub fn predicted_centers(params: &DeviceParams) -> Result<PredictedCenters> {
    let shifts = params.shifts()?;
    let wf = params.cavity_freq().value();
    let centers: Vec<AngularFrequency> = (0..params.dim())
        .map(|k| AngularFrequency::from_rad_per_us(wf - pull(&shifts, k)))
        .collect();

    let tol = DEGENERACY_FRACTION * params.kappa().value();
    let mut order: Vec<usize> = (0..centers.len()).collect();
    order.sort_by(|a, b| {
        centers[*a]
            .value()
            .total_cmp(&centers[*b].value())
            .then(a.cmp(b))
    });
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for k in order {
        let c = centers[k].value();
        match groups.last_mut() {
            Some(g) if c - last <= tol => g.push(k),
            _ => groups.push(vec![k]),
        }
        last = c;
    }
    for g in groups.iter_mut() {
        g.sort_unstable();
    }
    groups.sort_by_key(|g| g[0]);
    Ok(PredictedCenters { centers, groups })
}

/// A detected local maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub location: AngularFrequency,
    pub height: f64,
}

/// Local maxima whose topographic prominence is at least `prominence` times
/// the global maximum, refined by a parabola through the three nearest
/// samples. Plateaus count once, at their midpoint.
pub fn find_peaks(spectrum: &Spectrum, prominence: f64) -> Result<Vec<Peak>> {
    find_peaks_in(spectrum.grid(), spectrum.values(), prominence)
}

/// [`find_peaks`] on raw samples, which may be negative.
pub fn find_peaks_in(grid: &FrequencyGrid, values: &[f64], prominence: f64) -> Result<Vec<Peak>> {
    if !(prominence > 0.0 && prominence < 1.0) {
        return Err(invalid("prominence", "must lie in (0, 1)"));
    }
    check_samples(grid, values)?;
    let n = values.len();
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let threshold = prominence * top.abs();
    let step = grid.step();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if values[i] <= values[i - 1] {
            i += 1;
            continue;
        }
        // walk a plateau
        let mut end = i;
        while end + 1 < n && values[end + 1] == values[i] {
            end += 1;
        }
        let descends = end + 1 < n && values[end + 1] < values[i];
        if descends && threshold > 0.0 && topographic_prominence(values, i, end) >= threshold {
            let (location, height) = if i == end {
                let (offset, h) = parabolic_vertex(values[i - 1], values[i], values[i + 1]);
                (grid.point(i) + offset * step, h)
            } else {
                (0.5 * (grid.point(i) + grid.point(end)), values[i])
            };
            peaks.push(Peak {
                location: AngularFrequency::from_rad_per_us(location),
                height,
            });
        }
        i = end + 1;
    }
    Ok(peaks)
}

fn check_samples(grid: &FrequencyGrid, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    if values.len() != grid.count() {
        return Err(Error::InvalidSpectrum(format!(
            "{} values for {} grid points",
            values.len(),
            grid.count()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpectrum("non-finite value".into()));
    }
    Ok(())
}

/// Height above the higher of the two saddles separating the plateau
/// `values[lo..=hi]` from strictly higher ground (or the grid edge).
fn topographic_prominence(values: &[f64], lo: usize, hi: usize) -> f64 {
    let h = values[lo];
    let mut left_min = h;
    for v in values[..lo].iter().rev() {
        if *v > h {
            break;
        }
        left_min = left_min.min(*v);
    }
    let mut right_min = h;
    for v in &values[hi + 1..] {
        if *v > h {
            break;
        }
        right_min = right_min.min(*v);
    }
    h - left_min.max(right_min)
}

/// Vertex offset (in samples) and value of the parabola through three
/// equally spaced points.
fn parabolic_vertex(y0: f64, y1: f64, y2: f64) -> (f64, f64) {
    let curvature = y0 - 2.0 * y1 + y2;
    if curvature >= 0.0 {
        return (0.0, y1);
    }
    let offset = 0.5 * (y0 - y2) / curvature;
    (offset, y1 - 0.25 * (y0 - y2) * offset)
}

/// Fitted probabilities, one per centre group.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightEstimate {
    pub groups: Vec<Vec<usize>>,
    /// Normalized weights, aligned with `groups`.
    pub probs: Vec<f64>,
    /// `|A w - b| / |b|` for the unnormalized fit.
    pub residual_norm: f64,
    /// Set when some group holds several basis states whose split cannot be
    /// recovered from the spectrum.
    pub unresolvable: bool,
    /// NNLS outer iterations used.
    pub iterations: usize,
}

impl WeightEstimate {
    /// Per-basis-state probabilities, or `None` when a degenerate group
    /// prevents assigning them.
    pub fn basis_probs(&self) -> Option<Vec<f64>> {
        if self.unresolvable {
            return None;
        }
        let mut out = vec![0.0; self.groups.len()];
        for (g, p) in self.groups.iter().zip(&self.probs) {
            out[g[0]] = *p;
        }
        Some(out)
    }

    /// Weight of the group containing `k`.
    pub fn group_weight(&self, k: usize) -> Option<f64> {
        self.groups
            .iter()
            .position(|g| g.contains(&k))
            .map(|i| self.probs[i])
    }

    /// Number of groups with nonzero weight.
    pub fn support(&self, threshold: f64) -> usize {
        self.probs.iter().filter(|p| **p > threshold).count()
    }
}

/// Unit-peak-free Lorentzian `[(w - c)^2 + (kappa/2)^2]^-1`.
fn lorentzian(omega: f64, center: f64, kappa: f64) -> f64 {
    1.0 / (sq(omega - center) + sq(0.5 * kappa))
}

/// Fits the spectrum with one Lorentzian per centre group.
pub fn infer_weights(spectrum: &Spectrum, params: &DeviceParams) -> Result<WeightEstimate> {
    infer_weights_in(spectrum.grid(), spectrum.values(), params)
}

/// [`infer_weights`] on raw samples, which may carry negative noise.
pub fn infer_weights_in(
    grid: &FrequencyGrid,
    values: &[f64],
    params: &DeviceParams,
) -> Result<WeightEstimate> {
    check_samples(grid, values)?;
    let predicted = predicted_centers(params)?;
    let kappa = params.kappa().value();
    check_coverage(grid, &predicted, kappa)?;

    let columns: Vec<Vec<f64>> = (0..predicted.groups.len())
        .map(|g| {
            let c = predicted.group_center(g);
            grid.points().map(|w| lorentzian(w, c, kappa)).collect()
        })
        .collect();
    let fit = nnls(&columns, values)?;
    let total: f64 = fit.x.iter().sum();
    let probs = if total > 0.0 {
        fit.x.iter().map(|w| w / total).collect()
    } else {
        return Err(Error::InvalidSpectrum(
            "no positive weight fits the data".into(),
        ));
    };
    let unresolvable = predicted.groups.iter().any(|g| g.len() > 1);
    Ok(WeightEstimate {
        groups: predicted.groups,
        probs,
        residual_norm: fit.relative_residual,
        unresolvable,
        iterations: fit.iterations,
    })
}

fn check_coverage(grid: &FrequencyGrid, predicted: &PredictedCenters, kappa: f64) -> Result<()> {
    let (start, stop) = (grid.start().value(), grid.stop().value());
    for c in &predicted.centers {
        if c.value() < start || c.value() > stop {
            return Err(Error::NonSpanningGrid {
                start,
                stop,
                center: c.value(),
            });
        }
    }
    if grid.step() * MIN_POINTS_PER_KAPPA > kappa {
        return Err(Error::UnresolvedLinewidth {
            step: grid.step(),
            kappa,
        });
    }
    Ok(())
}

/// Result of [`nnls`].
#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub x: Vec<f64>,
    pub relative_residual: f64,
    pub iterations: usize,
    /// False when the iteration cap stopped the solver.
    pub converged: bool,
}

/// Lawson-Hanson active-set solution of `min |A x - b|, x >= 0`.
///
/// `columns` holds `A` column-major. Columns and `b` are rescaled to unit
/// norm internally so the stopping rule does not depend on units. Ties in
/// the entering variable go to the lowest index.
pub fn nnls(columns: &[Vec<f64>], b: &[f64]) -> Result<NnlsSolution> {
    let n = columns.len();
    if columns.iter().any(|c| c.len() != b.len()) {
        return Err(invalid(
            "columns",
            "every column must match the data length",
        ));
    }
    let norm = |v: &[f64]| sqrt(v.iter().map(|x| x * x).sum::<f64>());
    let b_norm = norm(b);
    if b_norm == 0.0 || n == 0 {
        return Ok(NnlsSolution {
            x: vec![0.0; n],
            relative_residual: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let col_norms: Vec<f64> = columns.iter().map(|c| norm(c)).collect();
    if col_norms.contains(&0.0) {
        return Err(invalid("columns", "zero column"));
    }
    let a: Vec<Vec<f64>> = columns
        .iter()
        .zip(&col_norms)
        .map(|(c, s)| c.iter().map(|x| x / s).collect())
        .collect();
    let rhs: Vec<f64> = b.iter().map(|x| x / b_norm).collect();

    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
    let residual = |x: &[f64]| -> Vec<f64> {
        let mut r = rhs.clone();
        for (col, xj) in a.iter().zip(x) {
            if *xj != 0.0 {
                for (ri, aij) in r.iter_mut().zip(col) {
                    *ri -= aij * xj;
                }
            }
        }
        r
    };

    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    let cap = 3 * n + 10;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cap {
        let r = residual(&x);
        let gradient: Vec<f64> = a.iter().map(|c| dot(c, &r)).collect();
        let entering = (0..n)
            .filter(|j| !passive[*j] && gradient[*j] > KKT_TOL)
            .fold(None, |best: Option<usize>, j| match best {
                Some(b) if gradient[b] >= gradient[j] => Some(b),
                _ => Some(j),
            });
        let Some(t) = entering else {
            converged = true;
            break;
        };
        iterations += 1;
        passive[t] = true;
        loop {
            let active: Vec<usize> = (0..n).filter(|j| passive[*j]).collect();
            let sub: Vec<Vec<f64>> = active.iter().map(|j| a[*j].clone()).collect();
            let Some(z) = least_squares(&sub, &rhs) else {
                // dependent column: leave it out and stop improving
                passive[t] = false;
                converged = true;
                break;
            };
            if z.iter().all(|v| *v > 0.0) {
                for (j, v) in active.iter().zip(&z) {
                    x[*j] = *v;
                }
                break;
            }
            // step back to the first variable that would turn negative
            let mut alpha = 1.0;
            let mut blocking = None;
            for (j, v) in active.iter().zip(&z) {
                if *v <= 0.0 {
                    let ratio = x[*j] / (x[*j] - v);
                    if ratio < alpha || blocking.is_none() {
                        alpha = ratio;
                        blocking = Some(*j);
                    }
                }
            }
            for (j, v) in active.iter().zip(&z) {
                x[*j] += alpha * (v - x[*j]);
                if Some(*j) == blocking || x[*j] <= 0.0 {
                    x[*j] = 0.0;
                    passive[*j] = false;
                }
            }
            if !passive.iter().any(|p| *p) {
                break;
            }
        }
        if converged {
            break;
        }
    }
    let relative_residual = norm(&residual(&x));
    let x = x
        .iter()
        .zip(&col_norms)
        .map(|(v, s)| v * b_norm / s)
        .collect();
    Ok(NnlsSolution {
        x,
        relative_residual,
        iterations,
        converged,
    })
}

/// A detected peak and the basis state it was matched to.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportedPeak {
    pub location: AngularFrequency,
    pub height: f64,
    /// Lowest basis index of the matched centre group.
    pub assigned_basis_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakReport {
    pub peaks: Vec<ReportedPeak>,
    /// Relative residual of the weight fit.
    pub residual: f64,
    pub degenerate_groups: Vec<Vec<usize>>,
    pub weights: WeightEstimate,
}

/// Detects peaks, matches each to the nearest predicted centre within
/// `kappa/2 + step`, and fits weights.
///
/// A centre is claimed by at most one peak (the tallest).
pub fn peak_report(
    spectrum: &Spectrum,
    params: &DeviceParams,
    prominence: f64,
) -> Result<PeakReport> {
    peak_report_in(spectrum.grid(), spectrum.values(), params, prominence)
}

pub fn peak_report_in(
    grid: &FrequencyGrid,
    values: &[f64],
    params: &DeviceParams,
    prominence: f64,
) -> Result<PeakReport> {
    let weights = infer_weights_in(grid, values, params)?;
    let predicted = predicted_centers(params)?;
    let found = find_peaks_in(grid, values, prominence)?;
    let reach = 0.5 * params.kappa().value() + grid.step();

    let mut claims: Vec<Option<usize>> = found
        .iter()
        .map(|p| {
            (0..predicted.groups.len())
                .map(|g| (g, (predicted.group_center(g) - p.location.value()).abs()))
                .filter(|(_, d)| *d <= reach)
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(g, _)| g)
        })
        .collect();
    for i in 0..found.len() {
        for j in 0..found.len() {
            if i != j && claims[i].is_some() && claims[i] == claims[j] {
                let loser = if found[i].height >= found[j].height {
                    j
                } else {
                    i
                };
                claims[loser] = None;
            }
        }
    }
    let peaks = found
        .iter()
        .zip(&claims)
        .filter(|(p, _)| p.height > 0.0)
        .map(|(p, g)| ReportedPeak {
            location: p.location,
            height: p.height,
            assigned_basis_index: g.map(|g| predicted.groups[g][0]),
        })
        .collect();
    Ok(PeakReport {
        peaks,
        residual: weights.residual_norm,
        degenerate_groups: predicted.degenerate_groups(),
        weights,
    })
}

/// Diagnostic weights read straight from the assigned peak heights, indexed
/// by basis state. Only trustworthy when peaks are well separated.
pub fn height_weights(report: &PeakReport, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for p in &report.peaks {
        if let Some(k) = p.assigned_basis_index {
            out[k] = p.height;
        }
    }
    let total: f64 = out.iter().sum();
    if total > 0.0 {
        out.iter_mut().for_each(|v| *v /= total);
    }
    out
}
