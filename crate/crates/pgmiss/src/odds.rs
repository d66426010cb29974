//! Per-pattern selection odds O_r: logistic regression of pattern r against
//! its parents on the covariate (1, L_r), with optional exponential tilts.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::data::{IncompleteDataset, PatternIndex};
use crate::error::{Error, Result};
use crate::graph::{Pattern, PatternGraph};

/// Coefficient cap applied when classes separate perfectly.
pub const SEPARATION_CAP: f64 = 30.0;

/// IRLS configuration.
#[derive(Debug, Clone)]
pub struct OddsFitConfig {
    /// Convergence tolerance on the max-norm of the per-observation mean score.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Optional ridge penalty for near-separated fits; zero keeps plain MLE.
    pub ridge: f64,
}

impl Default for OddsFitConfig {
    fn default() -> Self {
        OddsFitConfig {
            grad_tol: 1e-8,
            max_iter: 100,
            ridge: 0.0,
        }
    }
}

/// One fitted per-pattern logistic model: log O_r(x_r) = β_r^T (1, x_r).
#[derive(Debug, Clone)]
pub struct OddsFit {
    /// Intercept first, then one slope per observed coordinate of r.
    pub beta: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub separation_flag: bool,
}

/// Selection-odds model: coefficients for every non-source pattern plus
/// optional tilt vectors δ_r̄ (zero by default).
#[derive(Debug, Clone)]
pub struct OddsModel {
    d: usize,
    fits: BTreeMap<Pattern, OddsFit>,
    tilts: BTreeMap<Pattern, Vec<f64>>,
}

impl OddsModel {
    pub fn new(d: usize) -> Self {
        OddsModel {
            d,
            fits: BTreeMap::new(),
            tilts: BTreeMap::new(),
        }
    }

    /// Construct from known coefficients (simulation truth, tests).
    pub fn from_coefficients(d: usize, coeffs: &[(Pattern, Vec<f64>)]) -> Result<Self> {
        let mut m = OddsModel::new(d);
        for (r, beta) in coeffs {
            m.insert(
                *r,
                OddsFit {
                    beta: beta.clone(),
                    converged: true,
                    iterations: 0,
                    log_likelihood: f64::NAN,
                    separation_flag: false,
                },
            )?;
        }
        Ok(m)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn insert(&mut self, r: Pattern, fit: OddsFit) -> Result<()> {
        if r.d() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: r.d(),
            });
        }
        if r.is_full() {
            return Err(Error::SourceHasNoOdds(r.to_string()));
        }
        if fit.beta.len() != 1 + r.count_ones() {
            return Err(Error::Config(format!(
                "pattern {r}: beta must have length {}, got {}",
                1 + r.count_ones(),
                fit.beta.len()
            )));
        }
        if fit.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite(format!("beta for pattern {r}")));
        }
        self.fits.insert(r, fit);
        Ok(())
    }

    pub fn fit(&self, r: &Pattern) -> Result<&OddsFit> {
        self.fits.get(r).ok_or_else(|| Error::PatternNotFitted(r.to_string()))
    }

    pub fn fitted_patterns(&self) -> impl Iterator<Item = &Pattern> {
        self.fits.keys()
    }

    pub fn has_separation_flags(&self) -> bool {
        self.fits.values().any(|f| f.separation_flag)
    }

    pub fn non_converged_count(&self) -> usize {
        self.fits.values().filter(|f| !f.converged).count()
    }

    /// Set δ_r̄ for one pattern; the vector indexes the missing coordinates
    /// of r in increasing coordinate order.
    pub fn set_tilt(&mut self, r: Pattern, delta: Vec<f64>) -> Result<()> {
        if delta.len() != r.d() - r.count_ones() {
            return Err(Error::Config(format!(
                "pattern {r}: delta must have length {}, got {}",
                r.d() - r.count_ones(),
                delta.len()
            )));
        }
        if delta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("delta for pattern {r}")));
        }
        if delta.iter().all(|&v| v == 0.0) {
            self.tilts.remove(&r);
        } else {
            self.tilts.insert(r, delta);
        }
        Ok(())
    }

    /// Apply one shared scalar to every element of every fitted pattern's
    /// tilt vector, the form used by the sensitivity sweep.
    pub fn with_scalar_tilt(&self, omega: f64) -> OddsModel {
        let mut out = self.clone();
        out.tilts.clear();
        if omega != 0.0 {
            for r in self.fits.keys() {
                let len = r.d() - r.count_ones();
                if len > 0 {
                    out.tilts.insert(*r, vec![omega; len]);
                }
            }
        }
        out
    }

    pub fn tilt(&self, r: &Pattern) -> Option<&Vec<f64>> {
        self.tilts.get(r)
    }

    pub fn has_tilts(&self) -> bool {
        !self.tilts.is_empty()
    }

    /// log O_r evaluated on the observed slice x_r alone. Requires a zero
    /// tilt for r, since the tilt reads the complementary coordinates.
    pub fn log_odds_slice(&self, r: &Pattern, x_r: &[f64]) -> Result<f64> {
        if self.tilts.contains_key(r) {
            return Err(Error::Config(format!(
                "pattern {r} carries a tilt; evaluation needs the full covariate row"
            )));
        }
        let fit = self.fit(r)?;
        if x_r.len() != r.count_ones() {
            return Err(Error::DimensionMismatch {
                expected: r.count_ones(),
                got: x_r.len(),
            });
        }
        let mut z = fit.beta[0];
        for (b, x) in fit.beta[1..].iter().zip(x_r) {
            z += b * x;
        }
        Ok(z)
    }

    /// log O_r on a full covariate row: β_r^T (1, x_r) + δ_r̄^T x_r̄.
    pub fn log_odds_full(&self, r: &Pattern, x: &[f64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        let fit = self.fit(r)?;
        let mut z = fit.beta[0];
        for (b, j) in fit.beta[1..].iter().zip(r.ones()) {
            z += b * x[j];
        }
        if let Some(delta) = self.tilts.get(r) {
            for (dv, j) in delta.iter().zip(r.zeros()) {
                z += dv * x[j];
            }
        }
        Ok(z)
    }

    /// O_r on a full row; strictly positive.
    pub fn odds_value(&self, r: &Pattern, x: &[f64]) -> Result<f64> {
        let v = self.log_odds_full(r, x)?.exp();
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::NonFinite(format!("odds for pattern {r}")));
        }
        Ok(v)
    }

    /// β_[r]: the coefficient vector embedded into R^{1+d} with zeros on the
    /// unobserved coordinates, so that (1,x)^T β_[r] = (1,x_r)^T β_r.
    pub fn embed_coefficients(&self, r: &Pattern) -> Result<Vec<f64>> {
        if r.is_full() {
            return Err(Error::SourceHasNoOdds(r.to_string()));
        }
        let fit = self.fit(r)?;
        let mut out = vec![0.0; 1 + self.d];
        out[0] = fit.beta[0];
        for (b, j) in fit.beta[1..].iter().zip(r.ones()) {
            out[1 + j] = *b;
        }
        Ok(out)
    }

    /// Plain-text serialization: `odds.<pattern>.beta = ...` and
    /// `odds.<pattern>.delta = ...` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (r, fit) in &self.fits {
            let beta: Vec<String> = fit.beta.iter().map(|b| format!("{b:?}")).collect();
            writeln!(out, "odds.{r}.beta = {}", beta.join(",")).unwrap();
            if let Some(delta) = self.tilts.get(r) {
                let delta: Vec<String> = delta.iter().map(|b| format!("{b:?}")).collect();
                writeln!(out, "odds.{r}.delta = {}", delta.join(",")).unwrap();
            }
        }
        out
    }

    pub fn from_text(d: usize, text: &str) -> Result<Self> {
        let mut m = OddsModel::new(d);
        let mut tilts = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(Error::Parse {
                line: i + 1,
                msg: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            let parts: Vec<&str> = key.split('.').collect();
            if parts.len() != 3 || parts[0] != "odds" {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("unrecognized key {key:?}"),
                });
            }
            let r: Pattern = parts[1].parse().map_err(|e| Error::Parse {
                line: i + 1,
                msg: format!("{e}"),
            })?;
            let nums: Vec<f64> = value
                .split(',')
                .map(|t| {
                    t.trim().parse::<f64>().map_err(|_| Error::Parse {
                        line: i + 1,
                        msg: format!("bad number {t:?}"),
                    })
                })
                .collect::<Result<_>>()?;
            match parts[2] {
                "beta" => m.insert(
                    r,
                    OddsFit {
                        beta: nums,
                        converged: true,
                        iterations: 0,
                        log_likelihood: f64::NAN,
                        separation_flag: false,
                    },
                )?,
                "delta" => tilts.push((r, nums)),
                other => {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("unrecognized field {other:?}"),
                    })
                }
            }
        }
        for (r, delta) in tilts {
            m.set_tilt(r, delta)?;
        }
        Ok(m)
    }
}

/// Fit the selection odds of one pattern: logistic regression of
/// I(R = r) against I(R ∈ PA_r) on covariate (1, L_r) by IRLS with
/// step-halving.
pub fn fit_odds(
    ds: &IncompleteDataset,
    idx: &PatternIndex,
    g: &PatternGraph,
    r: &Pattern,
    config: &OddsFitConfig,
) -> Result<OddsFit> {
    let parents = g.parents_of(r)?;
    let n_r = idx.count(r);
    let n_pa: usize = parents.iter().map(|s| idx.count(s)).sum();
    if n_r == 0 || n_pa == 0 {
        return Err(Error::EmptyClass {
            pattern: r.to_string(),
            n_r,
            n_pa,
        });
    }
    let p = 1 + r.count_ones();
    let mut xs: Vec<f64> = Vec::with_capacity((n_r + n_pa) * p);
    let mut ys: Vec<f64> = Vec::with_capacity(n_r + n_pa);
    let mut push_row = |row: usize, label: f64| -> Result<()> {
        xs.push(1.0);
        // (G2) guarantees L_r observed on parent rows; row_slice enforces it.
        xs.extend(ds.row_slice(row, r)?);
        ys.push(label);
        Ok(())
    };
    for &row in idx.rows(r) {
        push_row(row, 1.0)?;
    }
    for s in &parents {
        for &row in idx.rows(s) {
            push_row(row, 0.0)?;
        }
    }
    irls(&xs, &ys, p, config)
}

/// Fit every non-source node of the graph.
pub fn fit_all_odds(
    ds: &IncompleteDataset,
    idx: &PatternIndex,
    g: &PatternGraph,
    config: &OddsFitConfig,
) -> Result<OddsModel> {
    let mut m = OddsModel::new(ds.d());
    for r in g.nodes() {
        if r.is_full() {
            continue;
        }
        m.insert(*r, fit_odds(ds, idx, g, r, config)?)?;
    }
    Ok(m)
}

fn log_likelihood(xs: &[f64], ys: &[f64], p: usize, beta: &DVector<f64>) -> f64 {
    let n = ys.len();
    let mut ll = 0.0;
    for i in 0..n {
        let mut z = 0.0;
        for j in 0..p {
            z += xs[i * p + j] * beta[j];
        }
        // log σ(z) if y=1, log(1-σ(z)) if y=0; stable via log1p.
        ll += ys[i] * z - softplus(z);
    }
    ll
}

fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else if z < -30.0 {
        0.0
    } else {
        (1.0 + z.exp()).ln()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn irls(xs: &[f64], ys: &[f64], p: usize, config: &OddsFitConfig) -> Result<OddsFit> {
    let n = ys.len();
    let mut beta = DVector::zeros(p);
    let mut ll = log_likelihood(xs, ys, p, &beta) - ridge_penalty(config.ridge, &beta);
    let mut converged = false;
    let mut separation_flag = false;
    let mut iterations = 0;
    for iter in 0..config.max_iter {
        iterations = iter + 1;
        // Score and expected information.
        let mut grad = DVector::zeros(p);
        let mut info = DMatrix::zeros(p, p);
        for i in 0..n {
            let mut z = 0.0;
            for j in 0..p {
                z += xs[i * p + j] * beta[j];
            }
            let mu = sigmoid(z);
            let w = (mu * (1.0 - mu)).max(1e-12);
            let resid = ys[i] - mu;
            for j in 0..p {
                let xj = xs[i * p + j];
                grad[j] += xj * resid;
                for k in j..p {
                    info[(j, k)] += w * xj * xs[i * p + k];
                }
            }
        }
        for j in 0..p {
            for k in 0..j {
                info[(j, k)] = info[(k, j)];
            }
        }
        if config.ridge > 0.0 {
            for j in 0..p {
                grad[j] -= config.ridge * beta[j];
                info[(j, j)] += config.ridge;
            }
        }
        if grad.amax() / (n as f64) < config.grad_tol {
            converged = true;
            break;
        }
        // Jitter keeps degenerate designs (constant columns) solvable.
        let step = loop {
            if let Some(chol) = Cholesky::<f64, nalgebra::Dyn>::new(info.clone()) {
                break chol.solve(&grad);
            }
            for j in 0..p {
                info[(j, j)] += 1e-8 * (1.0 + info[(j, j)].abs());
            }
        };
        // Step-halving on likelihood decrease.
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let candidate = &beta + &step * scale;
            let cand_ll = log_likelihood(xs, ys, p, &candidate) - ridge_penalty(config.ridge, &candidate);
            if cand_ll >= ll - 1e-12 {
                beta = candidate;
                ll = cand_ll;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
        // Perfect separation drives coefficients off to infinity; cap and flag.
        if beta.amax() > SEPARATION_CAP {
            separation_flag = true;
            for j in 0..p {
                beta[j] = beta[j].clamp(-SEPARATION_CAP, SEPARATION_CAP);
            }
            ll = log_likelihood(xs, ys, p, &beta) - ridge_penalty(config.ridge, &beta);
            break;
        }
    }
    Ok(OddsFit {
        beta: beta.iter().copied().collect(),
        converged,
        iterations,
        log_likelihood: ll,
        separation_flag,
    })
}

fn ridge_penalty(ridge: f64, beta: &DVector<f64>) -> f64 {
    if ridge > 0.0 {
        0.5 * ridge * beta.dot(beta)
    } else {
        0.0
    }
}

/// Max-norm of the per-observation mean score of the binomial
/// log-likelihood at `beta`, for diagnostics and the fixed-point checks.
pub fn score_norm(ds: &IncompleteDataset, idx: &PatternIndex, g: &PatternGraph, r: &Pattern, beta: &[f64]) -> Result<f64> {
    let parents = g.parents_of(r)?;
    let p = beta.len();
    let mut grad = vec![0.0; p];
    let mut accumulate = |row: usize, y: f64| -> Result<()> {
        let x_r = ds.row_slice(row, r)?;
        let mut z = beta[0];
        for (b, x) in beta[1..].iter().zip(&x_r) {
            z += b * x;
        }
        let mu = sigmoid(z);
        grad[0] += y - mu;
        for (gj, x) in grad[1..].iter_mut().zip(&x_r) {
            *gj += (y - mu) * x;
        }
        Ok(())
    };
    for &row in idx.rows(r) {
        accumulate(row, 1.0)?;
    }
    for s in &parents {
        for &row in idx.rows(s) {
            accumulate(row, 0.0)?;
        }
    }
    let n = idx.count(r) + parents.iter().map(|s| idx.count(s)).sum::<usize>();
    Ok(grad.iter().fold(0.0f64, |m, v| m.max(v.abs())) / n.max(1) as f64)
}
