//! Fitting the mixture to one voxel.
//!
//! The pipeline for a voxel is:
//!
//! 1. [`moment_init_grid`]: for every `(p1, p2)` on a regular grid, solve the
//!    four raw-moment equations for the remaining parameters and rank the
//!    feasible solutions by likelihood.
//! 2. [`em_fit`] from each of the best starts; keep the highest likelihood.
//! 3. [`apply_prevalence_constraint`]: zero the prevalence when it falls
//!    below the estimability threshold `exp(-mu^2 / (2 (p1 var1 + p2 var2)))`
//!    and refit a two-component null model.
//!
//! [`fit_voxel`] runs all three steps.

use crate::error::{Error, Result};
use crate::model::{MixtureParams, HALF_LN_2PI, LN_MIN_POSITIVE};

/// Minimum number of observations accepted by the fitting routines.
pub const MIN_OBSERVATIONS: usize = 8;

/// Tuning for the EM fit and its initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct EmOptions {
    pub max_iter: usize,
    /// Stop when the relative log-likelihood change drops below this.
    pub rel_tol: f64,
    /// Variances are floored at `var_floor_frac * s^2`.
    pub var_floor_frac: f64,
    /// Spacing of the `(p1, p2)` initialization grid.
    pub grid_step: f64,
    pub top_k_starts: usize,
    /// Carried for callers that derive random streams from the fit options.
    /// Fitting itself is deterministic.
    pub seed: u64,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            max_iter: 500,
            rel_tol: 1e-8,
            var_floor_frac: 1e-8,
            grid_step: 0.05,
            top_k_starts: 5,
            seed: 0,
        }
    }
}

impl EmOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidOption("max_iter must be positive".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidOption("rel_tol must be positive".into()));
        }
        if !(self.var_floor_frac > 0.0) {
            return Err(Error::InvalidOption(
                "var_floor_frac must be positive".into(),
            ));
        }
        if self.top_k_starts == 0 {
            return Err(Error::InvalidOption("top_k_starts must be at least 1".into()));
        }
        self.grid_cells().map(|_| ())
    }

    /// Number of grid cells `1 / grid_step`, which must be an integer.
    fn grid_cells(&self) -> Result<usize> {
        let s = self.grid_step;
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidOption(format!(
                "grid_step must lie in (0, 1), got {s}"
            )));
        }
        let cells = (1.0 / s).round();
        if (cells * s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidOption(format!(
                "grid_step {s} does not divide 1 into whole cells"
            )));
        }
        Ok(cells as usize)
    }
}

/// Result of fitting one voxel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelFit {
    pub params: MixtureParams,
    pub loglik: f64,
    pub converged: bool,
    pub n_iter: usize,
    pub n_starts_tried: usize,
    /// True when the estimability constraint zeroed the prevalence.
    pub thresholded: bool,
    pub threshold_value: f64,
    /// Estimate before the constraint; equal to `params` unless `thresholded`.
    pub unconstrained: MixtureParams,
}

/// First four raw sample moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawMoments(pub [f64; 4]);

impl RawMoments {
    pub fn from_data(data: &[f64]) -> Self {
        let n = data.len() as f64;
        let mut m = [0.0; 4];
        for &x in data {
            let x2 = x * x;
            m[0] += x;
            m[1] += x2;
            m[2] += x2 * x;
            m[3] += x2 * x2;
        }
        RawMoments(m.map(|s| s / n))
    }
}

/// Solves the raw-moment equations for `(mu, var1, var2, var3)` given the
/// null weights.
///
/// With `p3 = 1 - p1 - p2` the moments of the mixture are
///
/// ```text
/// m1 = p3 mu
/// m2 = p1 var1 + p2 var2 + p3 (mu^2 + var3)
/// m3 = p3 (mu^3 + 3 mu var3)
/// m4 = 3 p1 var1^2 + 3 p2 var2^2 + p3 (mu^4 + 6 mu^2 var3 + 3 var3^2)
/// ```
///
/// The first and third give `mu` and `var3` directly; the second and fourth
/// leave a quadratic in `var1`. Returns `None` when no root yields positive
/// variances. When both roots are admissible, the one with the higher
/// likelihood on `data` wins.
pub fn solve_moments_given_weights(
    p1: f64,
    p2: f64,
    moments: &RawMoments,
    data: &[f64],
) -> Option<MixtureParams> {
    let [m1, m2, m3, m4] = moments.0;
    let p3 = 1.0 - p1 - p2;
    if !(p1 >= 0.0 && p2 >= 0.0 && p3 > 0.0) {
        return None;
    }
    let mu = m1 / p3;
    if !mu.is_finite() || mu.abs() < 1e-10 {
        return None;
    }
    let var3 = (m3 / p3 - mu * mu * mu) / (3.0 * mu);
    if !(var3 > 0.0) || !var3.is_finite() {
        return None;
    }
    let mu2 = mu * mu;
    // Null contributions to the second and fourth moments.
    let a = m2 - p3 * (mu2 + var3);
    let b = m4 - p3 * (mu2 * mu2 + 6.0 * mu2 * var3 + 3.0 * var3 * var3);

    let build = |v1: f64, v2: f64| {
        (v1 > 0.0 && v2 > 0.0 && v1.is_finite() && v2.is_finite())
            .then(|| MixtureParams::new(p1, p2, p3, mu, v1, v2, var3).ok())
            .flatten()
    };

    if p1 == 0.0 && p2 == 0.0 {
        return None;
    }
    if p1 == 0.0 || p2 == 0.0 {
        // One null component: only the second-moment equation is usable.
        let w = p1 + p2;
        let v = a / w;
        return build(v, v);
    }

    // 3 p1 (p1 + p2) v1^2 - 6 a p1 v1 + 3 a^2 - b p2 = 0
    let qa = 3.0 * p1 * (p1 + p2);
    let qb = -6.0 * a * p1;
    let qc = 3.0 * a * a - b * p2;
    let disc = qb * qb - 4.0 * qa * qc;
    if !(disc >= 0.0) {
        return None;
    }
    let sq = disc.sqrt();
    // Cancellation-free pair of roots.
    let q = -0.5 * (qb + qb.signum() * sq);
    let mut roots = Vec::with_capacity(2);
    if q != 0.0 {
        roots.push(q / qa);
        roots.push(qc / q);
    } else {
        roots.push(-qb / (2.0 * qa));
    }
    roots
        .into_iter()
        .filter_map(|v1| build(v1, (a - p1 * v1) / p2))
        .map(|p| (p.loglik(data), p))
        .fold(None, |best: Option<(f64, MixtureParams)>, cand| match best {
            Some(b) if b.0 >= cand.0 => Some(b),
            _ => Some(cand),
        })
        .map(|(_, p)| p)
}

/// Location/scale summary used by floors and the fallback start.
#[derive(Debug, Clone, Copy)]
struct Scale {
    mean: f64,
    var: f64,
}

impl Scale {
    fn of(data: &[f64]) -> Self {
        let n = data.len() as f64;
        let mean = data.iter().sum::<f64>() / n;
        let ss: f64 = data.iter().map(|x| (x - mean) * (x - mean)).sum();
        let mut var = if data.len() > 1 { ss / (n - 1.0) } else { 0.0 };
        if !(var > 0.0) {
            // Constant data has no spread; borrow a scale from the level.
            var = if mean != 0.0 { mean * mean } else { 1.0 };
        }
        Scale { mean, var }
    }
}

fn fallback_start(scale: Scale) -> MixtureParams {
    let s = scale.var.sqrt();
    let mu = (scale.mean / 0.1).clamp(-3.0 * s, 3.0 * s);
    MixtureParams::new(
        0.45,
        0.45,
        0.1,
        mu,
        0.5 * scale.var,
        2.0 * scale.var,
        scale.var,
    )
    .expect("fallback start is valid")
}

fn check_len(data: &[f64]) -> Result<()> {
    if data.len() < MIN_OBSERVATIONS {
        return Err(Error::DataTooShort {
            got: data.len(),
            min: MIN_OBSERVATIONS,
        });
    }
    Ok(())
}

/// Ranked EM starts from the moment-equation grid.
///
/// Returns at most `opts.top_k_starts` parameter sets, best first. If no
/// grid point is feasible a single fallback start is returned.
pub fn moment_init_grid(data: &[f64], opts: &EmOptions) -> Result<Vec<MixtureParams>> {
    check_len(data)?;
    opts.validate()?;
    let cells = opts.grid_cells()?;
    let moments = RawMoments::from_data(data);
    let mut candidates = Vec::new();
    for i in 1..cells {
        for j in 1..(cells - i) {
            let p1 = i as f64 / cells as f64;
            let p2 = j as f64 / cells as f64;
            if let Some(p) = solve_moments_given_weights(p1, p2, &moments, data) {
                candidates.push((p.loglik(data), p));
            }
        }
    }
    if candidates.is_empty() {
        return Ok(vec![fallback_start(Scale::of(data))]);
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    candidates.truncate(opts.top_k_starts);
    Ok(candidates.into_iter().map(|(_, p)| p).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Components {
    All,
    /// `p3` frozen at zero.
    NullOnly,
}

#[derive(Debug, Clone, Copy)]
struct EmRun {
    params: MixtureParams,
    loglik: f64,
    converged: bool,
    n_iter: usize,
}

struct Estep {
    loglik: f64,
    sums: [[f64; 3]; 3],
}

/// E-step: log-likelihood of `params` and responsibility-weighted sums
/// `sums[k] = [sum g, sum g x, sum g x^2]`. Responsibilities of the active
/// component are left in `g3`.
fn e_step(data: &[f64], params: &MixtureParams, g3: &mut [f64]) -> Estep {
    let w = params.weights();
    let v = params.variances();
    let means = params.means();
    let mut c = [f64::NEG_INFINITY; 3];
    let mut k2 = [0.0; 3];
    for k in 0..3 {
        if w[k] > 0.0 {
            c[k] = w[k].ln() - 0.5 * v[k].ln() - HALF_LN_2PI;
        }
        k2[k] = 0.5 / v[k];
    }
    let mut loglik = 0.0;
    let mut sums = [[0.0; 3]; 3];
    for (i, &x) in data.iter().enumerate() {
        let mut t = [f64::NEG_INFINITY; 3];
        for k in 0..3 {
            if w[k] > 0.0 {
                let d = x - means[k];
                t[k] = c[k] - d * d * k2[k];
            }
        }
        let m = t[0].max(t[1]).max(t[2]);
        let e = [(t[0] - m).exp(), (t[1] - m).exp(), (t[2] - m).exp()];
        let tot = e[0] + e[1] + e[2];
        loglik += (m + tot.ln()).max(LN_MIN_POSITIVE);
        let x2 = x * x;
        for k in 0..3 {
            let g = e[k] / tot;
            sums[k][0] += g;
            sums[k][1] += g * x;
            sums[k][2] += g * x2;
        }
        g3[i] = e[2] / tot;
    }
    Estep { loglik, sums }
}

fn m_step(
    data: &[f64],
    prev: &MixtureParams,
    e: &Estep,
    g3: &[f64],
    floor: f64,
    comps: Components,
) -> MixtureParams {
    let n = data.len() as f64;
    let mut w = [e.sums[0][0] / n, e.sums[1][0] / n, e.sums[2][0] / n];
    let mut v = prev.variances();
    let mut mu = prev.mu();
    for k in 0..2 {
        if e.sums[k][0] > 0.0 {
            v[k] = e.sums[k][2] / e.sums[k][0];
        }
    }
    if comps == Components::NullOnly {
        w[2] = 0.0;
    } else if e.sums[2][0] > 0.0 {
        mu = e.sums[2][1] / e.sums[2][0];
        let ss: f64 = data
            .iter()
            .zip(g3)
            .map(|(&x, &g)| g * (x - mu) * (x - mu))
            .sum();
        v[2] = ss / e.sums[2][0];
    }
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    for x in &mut v {
        if !(*x >= floor) {
            *x = floor;
        }
    }
    MixtureParams::new(w[0], w[1], w[2], mu, v[0], v[1], v[2])
        .expect("M-step keeps parameters valid")
}

fn run_em(
    data: &[f64],
    init: &MixtureParams,
    opts: &EmOptions,
    floor: f64,
    comps: Components,
    mut trace: Option<&mut Vec<f64>>,
) -> EmRun {
    let mut params = *init;
    if comps == Components::NullOnly && params.p3() > 0.0 {
        let s = params.p1() + params.p2();
        params = MixtureParams::null(
            params.p1() / s,
            params.p2() / s,
            params.var1(),
            params.var2(),
        )
        .expect("renormalized null weights are valid");
    }
    let mut g3 = vec![0.0; data.len()];
    let mut prev_ll = f64::NEG_INFINITY;
    let mut n_iter = 0;
    loop {
        let e = e_step(data, &params, &mut g3);
        if let Some(t) = trace.as_deref_mut() {
            t.push(e.loglik);
        }
        debug_assert!(
            e.loglik >= prev_ll - 1e-9 * prev_ll.abs().max(1.0),
            "EM log-likelihood decreased: {prev_ll} -> {}",
            e.loglik
        );
        if n_iter > 0 {
            let rel = (e.loglik - prev_ll).abs() / prev_ll.abs().max(f64::MIN_POSITIVE);
            if rel < opts.rel_tol {
                return EmRun {
                    params,
                    loglik: e.loglik,
                    converged: true,
                    n_iter,
                };
            }
        }
        if n_iter == opts.max_iter {
            return EmRun {
                params,
                loglik: e.loglik,
                converged: false,
                n_iter,
            };
        }
        prev_ll = e.loglik;
        params = m_step(data, &params, &e, &g3, floor, comps);
        n_iter += 1;
    }
}

fn var_floor(data: &[f64], opts: &EmOptions) -> f64 {
    opts.var_floor_frac * Scale::of(data).var
}

fn to_fit(run: EmRun, n_starts_tried: usize) -> VoxelFit {
    VoxelFit {
        params: run.params,
        loglik: run.loglik,
        converged: run.converged,
        n_iter: run.n_iter,
        n_starts_tried,
        thresholded: false,
        threshold_value: donoho_threshold(&run.params),
        unconstrained: run.params,
    }
}

/// Runs EM from `init` without the prevalence constraint.
pub fn em_fit(data: &[f64], init: &MixtureParams, opts: &EmOptions) -> Result<VoxelFit> {
    check_len(data)?;
    opts.validate()?;
    let run = run_em(data, init, opts, var_floor(data, opts), Components::All, None);
    Ok(to_fit(run, 1))
}

/// Like [`em_fit`], also returning the log-likelihood at every iteration
/// (the first entry is the likelihood of `init`).
pub fn em_fit_traced(
    data: &[f64],
    init: &MixtureParams,
    opts: &EmOptions,
) -> Result<(VoxelFit, Vec<f64>)> {
    check_len(data)?;
    opts.validate()?;
    let mut trace = Vec::new();
    let run = run_em(
        data,
        init,
        opts,
        var_floor(data, opts),
        Components::All,
        Some(&mut trace),
    );
    Ok((to_fit(run, 1), trace))
}

/// Two-component null fit (both means fixed at zero, `p3 = 0`).
///
/// Starts from `init`'s null components when given, and always from a
/// generic `(1/2, 1/2, s^2/2, 2 s^2)` start; the better fit is returned.
pub fn fit_null_mixture(
    data: &[f64],
    init: Option<&MixtureParams>,
    opts: &EmOptions,
) -> Result<VoxelFit> {
    check_len(data)?;
    opts.validate()?;
    let scale = Scale::of(data);
    let floor = opts.var_floor_frac * scale.var;
    // Second moment about zero, the natural null scale.
    let m2 = (data.iter().map(|x| x * x).sum::<f64>() / data.len() as f64).max(floor);
    let mut starts = Vec::with_capacity(2);
    if let Some(p) = init {
        if p.p1() + p.p2() > 0.0 {
            starts.push(*p);
        }
    }
    starts.push(MixtureParams::null(0.5, 0.5, 0.5 * m2, 2.0 * m2).expect("generic null start"));
    let mut best: Option<EmRun> = None;
    let mut total_iter = 0;
    for s in &starts {
        let run = run_em(data, s, opts, floor, Components::NullOnly, None);
        total_iter += run.n_iter;
        if best.is_none_or(|b| run.loglik > b.loglik) {
            best = Some(run);
        }
    }
    let run = best.expect("at least one start");
    Ok(VoxelFit {
        params: run.params,
        loglik: run.loglik,
        converged: run.converged,
        n_iter: total_iter,
        n_starts_tried: starts.len(),
        thresholded: false,
        threshold_value: 1.0,
        unconstrained: run.params,
    })
}

/// The estimability threshold `exp(-mu^2 / (2 (p1 var1 + p2 var2)))`.
///
/// Prevalence estimates below it are treated as inestimable. It equals one
/// at `mu = 0` and grows with the null variance.
pub fn donoho_threshold(params: &MixtureParams) -> f64 {
    let mass = params.null_variance_mass();
    let mu = params.mu();
    if mass == 0.0 {
        return if mu != 0.0 { 0.0 } else { 1.0 };
    }
    (-mu * mu / (2.0 * mass)).exp()
}

/// Zeroes the prevalence of an unconstrained fit when it is below
/// [`donoho_threshold`], replacing the fit by a two-component null mixture.
pub fn apply_prevalence_constraint(
    fit: &VoxelFit,
    data: &[f64],
    opts: &EmOptions,
) -> Result<VoxelFit> {
    let threshold = donoho_threshold(&fit.params);
    if fit.params.p3() >= threshold {
        return Ok(VoxelFit {
            threshold_value: threshold,
            thresholded: false,
            ..*fit
        });
    }
    let null = fit_null_mixture(data, Some(&fit.params), opts)?;
    Ok(VoxelFit {
        params: null.params,
        loglik: null.loglik,
        converged: fit.converged && null.converged,
        n_iter: fit.n_iter + null.n_iter,
        n_starts_tried: fit.n_starts_tried,
        thresholded: true,
        threshold_value: threshold,
        unconstrained: fit.unconstrained,
    })
}

fn sorted_copy(data: &[f64]) -> Vec<f64> {
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Multi-start EM without the prevalence constraint.
pub fn fit_voxel_unconstrained(data: &[f64], opts: &EmOptions) -> Result<VoxelFit> {
    check_len(data)?;
    opts.validate()?;
    // Sorting makes every summation order, hence the result, independent of
    // the order subjects were listed in.
    let data = sorted_copy(data);
    let starts = moment_init_grid(&data, opts)?;
    let floor = var_floor(&data, opts);
    let mut best: Option<EmRun> = None;
    for s in &starts {
        let run = run_em(&data, s, opts, floor, Components::All, None);
        if best.is_none_or(|b| run.loglik > b.loglik) {
            best = Some(run);
        }
    }
    Ok(to_fit(best.expect("at least one start"), starts.len()))
}

/// Full per-voxel estimate: grid initialization, multi-start EM and the
/// prevalence constraint.
pub fn fit_voxel(data: &[f64], opts: &EmOptions) -> Result<VoxelFit> {
    let fit = fit_voxel_unconstrained(data, opts)?;
    let sorted = sorted_copy(data);
    apply_prevalence_constraint(&fit, &sorted, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_star() -> MixtureParams {
        MixtureParams::new(0.5, 0.3, 0.2, 2.0, 0.25, 1.0, 0.25).unwrap()
    }

    /// Exact raw moments of a mixture, from the Gaussian moment formulas.
    fn analytic_moments(p: &MixtureParams) -> RawMoments {
        let w = p.weights();
        let v = p.variances();
        let mus = p.means();
        let mut m = [0.0; 4];
        for k in 0..3 {
            let (a, s) = (mus[k], v[k]);
            m[0] += w[k] * a;
            m[1] += w[k] * (a * a + s);
            m[2] += w[k] * (a.powi(3) + 3.0 * a * s);
            m[3] += w[k] * (a.powi(4) + 6.0 * a * a * s + 3.0 * s * s);
        }
        RawMoments(m)
    }

    #[test]
    fn moment_solution_recovers_exact_parameters() {
        let truth = params_star();
        let m = analytic_moments(&truth);
        let mut rng = crate::rng::keyed(1, crate::rng::Purpose::MonteCarlo, &[]);
        let data: Vec<f64> = (0..1000).map(|_| truth.sample(&mut rng)).collect();
        let got = solve_moments_given_weights(0.5, 0.3, &m, &data).unwrap();
        for (a, b) in [
            (got.p1(), 0.5),
            (got.p2(), 0.3),
            (got.p3(), 0.2),
            (got.mu(), 2.0),
            (got.var1(), 0.25),
            (got.var2(), 1.0),
            (got.var3(), 0.25),
        ] {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn moment_solution_infeasible_cases() {
        let m = analytic_moments(&MixtureParams::new(1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0).unwrap());
        let data = [0.0; 8];
        assert!(solve_moments_given_weights(1.0, 0.0, &m, &data).is_none());
        assert!(solve_moments_given_weights(0.45, 0.45, &m, &data).is_none());
    }

    #[test]
    fn threshold_values() {
        let zero_mu = MixtureParams::new(0.4, 0.1, 0.5, 0.0, 1.0, 2.0, 1.0).unwrap();
        assert_eq!(donoho_threshold(&zero_mu), 1.0);

        let toy = MixtureParams::new(0.88 * 0.9, 0.12 * 0.9, 0.1, 1.0, 0.15, 1.0, 0.25).unwrap();
        let expected = (-1.0f64 / 0.4536).exp();
        assert!((donoho_threshold(&toy) - expected).abs() < 1e-12);
        assert!((donoho_threshold(&toy) - 0.1103).abs() < 1e-4);

        let wide = MixtureParams::new(0.88 * 0.9, 0.12 * 0.9, 0.1, 1.0, 0.15, 4.0, 0.25).unwrap();
        assert!(donoho_threshold(&wide) > donoho_threshold(&toy));
    }

    fn fake_fit(p: MixtureParams) -> VoxelFit {
        VoxelFit {
            params: p,
            loglik: -10.0,
            converged: true,
            n_iter: 3,
            n_starts_tried: 1,
            thresholded: false,
            threshold_value: 0.0,
            unconstrained: p,
        }
    }

    #[test]
    fn constraint_zeroes_when_mu_is_zero() {
        let data: Vec<f64> = (0..16).map(|i| (i as f64 - 7.5) / 4.0).collect();
        let p = MixtureParams::new(0.25, 0.25, 0.5, 0.0, 0.5, 1.0, 1.0).unwrap();
        let out = apply_prevalence_constraint(&fake_fit(p), &data, &EmOptions::default()).unwrap();
        assert!(out.thresholded);
        assert_eq!(out.threshold_value, 1.0);
        assert_eq!(out.params.p3(), 0.0);
        assert_eq!(out.params.mu(), 0.0);
    }

    #[test]
    fn constraint_keeps_clear_activation() {
        let data: Vec<f64> = (0..16).map(|i| 3.0 + (i as f64 - 7.5) / 8.0).collect();
        let p = MixtureParams::new(0.05, 0.05, 0.9, 3.0, 1.0, 1.0, 1.0).unwrap();
        let fit = fake_fit(p);
        let out = apply_prevalence_constraint(&fit, &data, &EmOptions::default()).unwrap();
        assert!(!out.thresholded);
        assert_eq!(out.params, fit.params);
        // p1 var1 + p2 var2 = 0.1, so the threshold is exp(-9 / 0.2).
        assert!((out.threshold_value - (-45.0f64).exp()).abs() < 1e-30);
    }

    #[test]
    fn short_data_is_rejected() {
        let o = EmOptions::default();
        assert!(matches!(
            fit_voxel(&[1.0; 7], &o),
            Err(Error::DataTooShort { got: 7, min: 8 })
        ));
        assert!(moment_init_grid(&[1.0; 3], &o).is_err());
    }

    #[test]
    fn constant_data_uses_fallback() {
        let data = [2.0; 12];
        let starts = moment_init_grid(&data, &EmOptions::default()).unwrap();
        assert_eq!(starts.len(), 1);
        assert_eq!(starts[0].weights(), [0.45, 0.45, 0.1]);
        let fit = fit_voxel(&data, &EmOptions::default()).unwrap();
        assert!(fit.loglik.is_finite());
    }

    #[test]
    fn ascent_on_symmetric_pairs() {
        let data: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let init = MixtureParams::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.5, 0.5, 2.0, 1.0).unwrap();
        let fit = em_fit(&data, &init, &EmOptions::default()).unwrap();
        assert!(fit.loglik >= init.loglik(&data));
    }

    #[test]
    fn option_validation() {
        let bad_step = EmOptions {
            grid_step: 0.3,
            ..Default::default()
        };
        assert!(bad_step.validate().is_err());
        let ok = EmOptions {
            grid_step: 0.1,
            ..Default::default()
        };
        assert!(ok.validate().is_ok());
        let k0 = EmOptions {
            top_k_starts: 0,
            ..Default::default()
        };
        assert!(k0.validate().is_err());
    }
}
