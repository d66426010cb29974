//! Pattern-mixture route: per-pattern Gaussian observed-data densities,
//! donor-chain imputation (with optional exponential-tilt rejection), the
//! regression-adjustment estimator, and the tree-graph closed form.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{IncompleteDataset, PatternIndex};
use crate::error::{Error, Result};
use crate::functional::Functional;
use crate::graph::{GraphMode, Pattern, PatternGraph};
use crate::mvn::{log_sum_exp, Gaussian};

/// Gaussian law of L_r | R = r for each observed pattern with |r| > 0,
/// plus the group weights n_r used by donor sampling.
#[derive(Debug, Clone)]
pub struct PatternDensityModel {
    d: usize,
    laws: BTreeMap<Pattern, Gaussian>,
    weights: BTreeMap<Pattern, f64>,
    /// Patterns whose covariance needed ridge conditioning.
    pub ridged: Vec<Pattern>,
}

impl PatternDensityModel {
    pub fn new(d: usize) -> Self {
        PatternDensityModel {
            d,
            laws: BTreeMap::new(),
            weights: BTreeMap::new(),
            ridged: Vec::new(),
        }
    }

    /// Assemble from known parameters (simulation truth, tests). Weights play
    /// the role of the group sizes in donor sampling.
    pub fn from_parts(d: usize, parts: &[(Pattern, Option<Gaussian>, f64)]) -> Result<Self> {
        let mut m = PatternDensityModel::new(d);
        for (r, law, w) in parts {
            if let Some(law) = law {
                if law.dim() != r.count_ones() {
                    return Err(Error::Config(format!(
                        "pattern {r}: law dimension {} != |r| = {}",
                        law.dim(),
                        r.count_ones()
                    )));
                }
                m.laws.insert(*r, law.clone());
            }
            m.weights.insert(*r, *w);
        }
        Ok(m)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn law(&self, r: &Pattern) -> Result<&Gaussian> {
        self.laws.get(r).ok_or_else(|| Error::DensityNotFitted(r.to_string()))
    }

    pub fn has_law(&self, r: &Pattern) -> bool {
        self.laws.contains_key(r)
    }

    pub fn weight(&self, r: &Pattern) -> f64 {
        self.weights.get(r).copied().unwrap_or(0.0)
    }

    /// Shift every fitted mean by `shift` on each coordinate: the deliberately
    /// wrong density surrogate used by the robustness experiments.
    pub fn location_shifted(&self, shift: f64) -> Result<Self> {
        let mut out = self.clone();
        for (_, law) in out.laws.iter_mut() {
            let mean: Vec<f64> = law.mean().iter().map(|m| m + shift).collect();
            let k = law.dim();
            let cov: Vec<Vec<f64>> = (0..k)
                .map(|i| (0..k).map(|j| law.cov()[(i, j)]).collect())
                .collect();
            *law = Gaussian::new(mean, cov)?;
        }
        Ok(out)
    }

    /// log p̂(x_sub | R = s) where `sub` is a subset of s's observed
    /// coordinates (given in coordinate order) and `x_sub` its values.
    fn log_marginal_density(&self, s: &Pattern, sub: &[usize], x_sub: &[f64]) -> Result<f64> {
        if sub.is_empty() {
            return Ok(0.0);
        }
        let law = self.law(s)?;
        let s_coords: Vec<usize> = s.ones().collect();
        let positions: Vec<usize> = sub
            .iter()
            .map(|c| {
                s_coords
                    .iter()
                    .position(|sc| sc == c)
                    .ok_or_else(|| Error::Config(format!("coordinate {c} not observed under {s}")))
            })
            .collect::<Result<_>>()?;
        Ok(law.marginal(&positions)?.log_pdf(x_sub))
    }
}

/// Fit the per-pattern Gaussian MLE: sample mean and MLE covariance plus the
/// ridge ε·I with ε = 1e-8 · trace / |r|. Patterns with |r| = 0 carry no
/// density but keep their group weight.
pub fn fit_pattern_densities(ds: &IncompleteDataset, idx: &PatternIndex) -> Result<PatternDensityModel> {
    let mut model = PatternDensityModel::new(ds.d());
    for r in idx.observed_patterns() {
        let rows = idx.rows(&r);
        model.weights.insert(r, rows.len() as f64);
        let k = r.count_ones();
        if k == 0 {
            continue;
        }
        if rows.len() < k + 2 {
            return Err(Error::DegenerateGroup {
                pattern: r.to_string(),
                n: rows.len(),
                need: k + 2,
            });
        }
        let n = rows.len() as f64;
        let mut mean = DVector::zeros(k);
        for &i in rows {
            let x = ds.row_slice(i, &r)?;
            for (a, v) in mean.iter_mut().zip(&x) {
                *a += v / n;
            }
        }
        let mut cov = DMatrix::zeros(k, k);
        for &i in rows {
            let x = ds.row_slice(i, &r)?;
            for a in 0..k {
                for b in 0..k {
                    cov[(a, b)] += (x[a] - mean[a]) * (x[b] - mean[b]) / n;
                }
            }
        }
        let raw_singular = nalgebra::Cholesky::new(cov.clone()).is_none();
        let trace: f64 = (0..k).map(|i| cov[(i, i)]).sum();
        let eps = 1e-8 * trace / k as f64;
        for i in 0..k {
            cov[(i, i)] += eps;
        }
        let law = Gaussian::from_parts(mean, cov)?;
        if raw_singular || law.was_ridged() {
            model.ridged.push(r);
        }
        model.laws.insert(r, law);
    }
    Ok(model)
}

/// Exponential-tilt specification for the pattern-mixture sensitivity
/// analysis: acceptance probability exp(ω_r̄^T (ℓ_r̄ - U_r̄)) per completed row.
#[derive(Debug, Clone)]
pub struct TiltSpec {
    /// Coordinate-indexed tilt; the slice at a row's missing coordinates is ω_r̄.
    pub omega: Vec<f64>,
    /// Coordinate-indexed bound U making the acceptance ratio at most one.
    pub bound: Vec<f64>,
}

impl TiltSpec {
    pub fn new(omega: Vec<f64>, bound: Vec<f64>) -> Result<Self> {
        if omega.len() != bound.len() {
            return Err(Error::Config("tilt omega and bound must have equal length".into()));
        }
        if bound.iter().any(|b| !b.is_finite()) {
            return Err(Error::TiltUnbounded(format!("{bound:?}")));
        }
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("tilt omega".into()));
        }
        Ok(TiltSpec { omega, bound })
    }

    /// Bound defaulted from the observed column ranges: the upper end for
    /// nonnegative ω_j, the lower end otherwise, so ω_j (ℓ_j - U_j) <= 0 on
    /// the observed range. Only approximate for truly unbounded data.
    pub fn for_dataset(omega: Vec<f64>, ds: &IncompleteDataset) -> Result<Self> {
        if omega.len() != ds.d() {
            return Err(Error::DimensionMismatch {
                expected: ds.d(),
                got: omega.len(),
            });
        }
        let (lo, hi) = ds.column_bounds();
        let bound: Vec<f64> = omega
            .iter()
            .enumerate()
            .map(|(j, &w)| if w >= 0.0 { hi[j] } else { lo[j] })
            .collect();
        TiltSpec::new(omega, bound)
    }

    pub fn scalar(omega: f64, ds: &IncompleteDataset) -> Result<Self> {
        TiltSpec::for_dataset(vec![omega; ds.d()], ds)
    }

    fn log_acceptance(&self, row: &[f64], missing: &[usize]) -> f64 {
        missing.iter().map(|&j| self.omega[j] * (row[j] - self.bound[j])).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.omega.iter().all(|&w| w == 0.0)
    }
}

/// Cell provenance in a completed dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellSource {
    Observed,
    Imputed,
}

/// A fully observed matrix produced by the donor-chain imputation, with
/// per-cell provenance and the per-row chain of donor patterns.
#[derive(Debug, Clone)]
pub struct CompletedDataset {
    pub n: usize,
    pub d: usize,
    pub values: Vec<f64>,
    pub provenance: Vec<CellSource>,
    pub chains: Vec<Vec<Pattern>>,
}

impl CompletedDataset {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    /// `row_id,col,source` lines for the sibling provenance file.
    pub fn provenance_lines(&self) -> String {
        let mut out = String::from("row_id,col,source\n");
        for i in 0..self.n {
            for j in 0..self.d {
                let src = match self.provenance[i * self.d + j] {
                    CellSource::Observed => "observed",
                    CellSource::Imputed => "imputed",
                };
                out.push_str(&format!("{i},{j},{src}\n"));
            }
        }
        out
    }
}

fn donor_requirements(g: &PatternGraph) -> Result<()> {
    let report = g.validate(GraphMode::Acyclic);
    if !report.is_valid() {
        return Err(Error::InvalidGraph(report.to_string()));
    }
    // Donor sampling extends the observed slice through a parent's
    // conditional law, which requires the parent to dominate the child.
    // Regular graphs always satisfy this; acyclic graphs with ascending or
    // incomparable edges are served by the discrete oracle instead.
    for r in g.nodes() {
        if r.is_full() {
            continue;
        }
        for s in g.parents_of(r)? {
            if !s.dominates(r)? {
                return Err(Error::InvalidGraph(format!(
                    "imputation needs dominating donors: parent {s} of {r} does not dominate it"
                )));
            }
        }
    }
    Ok(())
}

/// One donor step: draw a donor pattern S from PA_r with probability
/// proportional to p̂(ℓ_r | R=s) · n_s, then extend the row by sampling the
/// coordinates S - r from the donor's conditional Gaussian. Returns S.
/// RNG consumption order per step: one uniform for the donor, then the
/// normal draws of the conditional.
pub fn impute_step<R: Rng + ?Sized>(
    row: &mut [f64],
    r: &Pattern,
    g: &PatternGraph,
    densities: &PatternDensityModel,
    rng: &mut R,
) -> Result<Pattern> {
    if r.is_full() {
        return Err(Error::Config("impute_step called on a complete row".into()));
    }
    let parents = g.parents_of(r)?;
    let r_coords: Vec<usize> = r.ones().collect();
    let x_r: Vec<f64> = r_coords.iter().map(|&j| row[j]).collect();
    // Donor weights in log space: log p̂(ℓ_r|R=s) + log n_s.
    let mut donors: Vec<(Pattern, f64)> = Vec::new();
    for s in &parents {
        if !s.dominates(r)? {
            return Err(Error::InvalidGraph(format!(
                "parent {s} of {r} does not dominate it; donor sampling undefined"
            )));
        }
        let w = densities.weight(s);
        if w <= 0.0 {
            continue;
        }
        if !densities.has_law(s) && s.count_ones() > 0 {
            continue;
        }
        let log_w = densities.log_marginal_density(s, &r_coords, &x_r)? + w.ln();
        donors.push((*s, log_w));
    }
    if donors.is_empty() {
        return Err(Error::NoDonors { r: r.to_string() });
    }
    let logs: Vec<f64> = donors.iter().map(|(_, lw)| *lw).collect();
    let total = log_sum_exp(&logs);
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut chosen = donors.len() - 1;
    for (i, lw) in logs.iter().enumerate() {
        cum += (lw - total).exp();
        if u < cum {
            chosen = i;
            break;
        }
    }
    let donor = donors[chosen].0;
    // Fill S - r from the donor's conditional law given ℓ_r.
    let s_coords: Vec<usize> = donor.ones().collect();
    let new_coords: Vec<usize> = s_coords.iter().copied().filter(|c| !r_coords.contains(c)).collect();
    if !new_coords.is_empty() {
        let law = densities.law(&donor)?;
        let pos_of = |c: usize| s_coords.iter().position(|&sc| sc == c).unwrap();
        let target: Vec<usize> = new_coords.iter().map(|&c| pos_of(c)).collect();
        let given: Vec<usize> = r_coords.iter().map(|&c| pos_of(c)).collect();
        let cond = law.conditional(&target, &given, &x_r)?;
        let draw = cond.sample(rng);
        for (c, v) in new_coords.iter().zip(draw) {
            row[*c] = v;
        }
    }
    Ok(donor)
}

const TILT_MIN_RATE: f64 = 1e-4;
const TILT_MAX_PROPOSALS: usize = 100_000;

fn impute_row<R: Rng + ?Sized>(
    ds: &IncompleteDataset,
    i: usize,
    g: &PatternGraph,
    densities: &PatternDensityModel,
    tilt: Option<&TiltSpec>,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<Pattern>)> {
    let full = g.full_pattern();
    let original: Vec<f64> = (0..ds.d())
        .map(|j| if ds.is_observed(i, j) { ds.get(i, j).unwrap() } else { f64::NAN })
        .collect();
    let start = ds.row_pattern(i);
    if start == full {
        return Ok((original, Vec::new()));
    }
    if !g.contains(&start) {
        return Err(Error::PatternNotInGraph(start.to_string()));
    }
    let missing: Vec<usize> = start.zeros().collect();
    let mut proposals = 0usize;
    loop {
        let mut row = original.clone();
        let mut pattern = start;
        let mut chain = Vec::new();
        // Each step strictly enlarges the observed set, so the chain ends
        // within |nodes| steps.
        while pattern != full {
            let donor = impute_step(&mut row, &pattern, g, densities, rng)?;
            chain.push(donor);
            let bits: Vec<bool> = (0..ds.d()).map(|j| pattern.get(j) || donor.get(j)).collect();
            let next = Pattern::new(&bits)?;
            debug_assert!(next.count_ones() > pattern.count_ones());
            pattern = next;
            if !g.contains(&pattern) {
                return Err(Error::PatternNotInGraph(pattern.to_string()));
            }
        }
        match tilt {
            None => return Ok((row, chain)),
            Some(t) => {
                proposals += 1;
                let accept = t.log_acceptance(&row, &missing).min(0.0).exp();
                if rng.random::<f64>() < accept {
                    return Ok((row, chain));
                }
                if proposals >= TILT_MAX_PROPOSALS && (1.0 / proposals as f64) < TILT_MIN_RATE {
                    return Err(Error::AcceptanceCollapse {
                        row: i,
                        min_rate: TILT_MIN_RATE,
                        proposals,
                    });
                }
            }
        }
    }
}

/// Complete every row by iterating [`impute_step`] until the pattern is
/// `1_d`. Rows run independently on per-row RNG streams derived from `seed`,
/// so results do not depend on thread scheduling. With `tilt`, each
/// completed row is accepted with probability exp(ω_r̄^T(ℓ_r̄ - U_r̄));
/// rejection restarts the row's chain from its original state.
pub fn impute_dataset(
    ds: &IncompleteDataset,
    g: &PatternGraph,
    densities: &PatternDensityModel,
    seed: u64,
    tilt: Option<&TiltSpec>,
) -> Result<CompletedDataset> {
    donor_requirements(g)?;
    let n = ds.n();
    let d = ds.d();
    let rows: Vec<Result<(Vec<f64>, Vec<Pattern>)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            impute_row(ds, i, g, densities, tilt, &mut rng)
        })
        .collect();
    let mut values = Vec::with_capacity(n * d);
    let mut provenance = Vec::with_capacity(n * d);
    let mut chains = Vec::with_capacity(n);
    for (i, res) in rows.into_iter().enumerate() {
        let (row, chain) = res?;
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("imputed cell (row {i}, col {j})")));
            }
            provenance.push(if ds.is_observed(i, j) {
                CellSource::Observed
            } else {
                CellSource::Imputed
            });
        }
        values.extend_from_slice(&row);
        chains.push(chain);
    }
    Ok(CompletedDataset {
        n,
        d,
        values,
        provenance,
        chains,
    })
}

/// The regression-adjustment (multiple-imputation) estimate: the average
/// over `n_imputations` completed datasets of the plug-in mean of θ.
/// Imputation `k` uses RNG streams derived from `seed` and `k`.
#[derive(Debug, Clone)]
pub struct RaEstimate {
    pub estimate: f64,
    pub per_imputation: Vec<f64>,
}

pub fn ra_estimate(
    ds: &IncompleteDataset,
    g: &PatternGraph,
    densities: &PatternDensityModel,
    theta: &Functional,
    n_imputations: usize,
    seed: u64,
    tilt: Option<&TiltSpec>,
) -> Result<RaEstimate> {
    if n_imputations == 0 {
        return Err(Error::Config("n_imputations must be at least 1".into()));
    }
    theta.validate(ds.d())?;
    if ds.n() == 0 {
        return Err(Error::Config("empty dataset".into()));
    }
    let per_imputation: Vec<f64> = (0..n_imputations)
        .map(|k| {
            // Imputation k draws from streams (k*n .. k*n+n-1) via seed mixing.
            let completed = impute_dataset(ds, g, densities, seed.wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(k as u64 + 1)), tilt)?;
            let mean = (0..completed.n).map(|i| theta.eval(completed.row(i))).sum::<f64>() / completed.n as f64;
            Ok(mean)
        })
        .collect::<Result<_>>()?;
    let estimate = per_imputation.iter().sum::<f64>() / n_imputations as f64;
    Ok(RaEstimate {
        estimate,
        per_imputation,
    })
}

/// An affine function c + b^T x_r over the observed coordinates of a pattern.
#[derive(Debug, Clone)]
pub struct Affine {
    pub intercept: f64,
    /// One coefficient per observed coordinate, in coordinate order.
    pub coeffs: Vec<f64>,
}

impl Affine {
    pub fn eval(&self, x_r: &[f64]) -> f64 {
        self.intercept + self.coeffs.iter().zip(x_r).map(|(b, v)| b * v).sum::<f64>()
    }
}

/// For a tree graph with Gaussian densities and linear θ = a^T L: the exact
/// regression function m(ℓ_r, r) for every pattern, by composing Gaussian
/// conditional expectations inward along the unique path from `1_d`.
pub fn tree_regression_functions(
    g: &PatternGraph,
    densities: &PatternDensityModel,
    a: &[f64],
) -> Result<BTreeMap<Pattern, Affine>> {
    let report = g.validate(GraphMode::Regular);
    if !report.is_valid() {
        return Err(Error::InvalidGraph(report.to_string()));
    }
    for r in g.nodes() {
        if !r.is_full() {
            let np = g.parents_of(r)?.len();
            if np != 1 {
                return Err(Error::NotATree(r.to_string(), np));
            }
        }
    }
    if a.len() != g.d() {
        return Err(Error::DimensionMismatch {
            expected: g.d(),
            got: a.len(),
        });
    }
    let mut out: BTreeMap<Pattern, Affine> = BTreeMap::new();
    out.insert(
        g.full_pattern(),
        Affine {
            intercept: 0.0,
            coeffs: a.to_vec(),
        },
    );
    // Sweep descending in |r|: each node composes its parent's affine
    // function with one conditional expectation under the parent's law.
    let order = g.sweep_order()?;
    for &ri in &order {
        let r = g.node(ri);
        if r.is_full() {
            continue;
        }
        let s = g.parents_of(&r)?[0];
        let f_parent = out
            .get(&s)
            .ok_or_else(|| Error::Config(format!("parent {s} not yet resolved")))?
            .clone();
        let law = densities.law(&s)?;
        let s_coords: Vec<usize> = s.ones().collect();
        let pos_of = |c: usize| s_coords.iter().position(|&sc| sc == c).unwrap();
        let keep: Vec<usize> = r.ones().map(pos_of).collect();
        let drop: Vec<usize> = s_coords
            .iter()
            .enumerate()
            .filter(|(_, c)| !r.get(**c))
            .map(|(p, _)| p)
            .collect();
        if drop.is_empty() {
            return Err(Error::InvalidGraph(format!("edge {s} -> {r} adds no coordinates")));
        }
        // E[f(L_s) | L_r] = c + b_keep^T l_r + b_drop^T (c0 + M l_r).
        let (c0, m, _) = law.regression(&drop, &keep)?;
        let b_drop = DVector::from_iterator(drop.len(), drop.iter().map(|&p| f_parent.coeffs[p]));
        let mut intercept = f_parent.intercept + b_drop.dot(&c0);
        let correction = m.transpose() * &b_drop;
        let coeffs: Vec<f64> = keep
            .iter()
            .enumerate()
            .map(|(kpos, &p)| f_parent.coeffs[p] + correction[kpos])
            .collect();
        if !intercept.is_finite() {
            intercept = f64::NAN;
        }
        out.insert(r, Affine { intercept, coeffs });
    }
    Ok(out)
}

/// The closed-form regression-adjustment estimate on a tree graph with
/// linear θ: no Monte Carlo, θ̂ = (1/n) Σ m(L_{i,R_i}, R_i).
pub fn tree_closed_form_estimate(
    ds: &IncompleteDataset,
    g: &PatternGraph,
    densities: &PatternDensityModel,
    theta: &Functional,
) -> Result<f64> {
    let a = theta
        .linear_coefficients(ds.d())
        .ok_or_else(|| Error::UnsupportedFunctional("tree closed form requires a linear functional".into()))?;
    let funcs = tree_regression_functions(g, densities, &a)?;
    if ds.n() == 0 {
        return Err(Error::Config("empty dataset".into()));
    }
    let mut total = 0.0;
    for i in 0..ds.n() {
        let r = ds.row_pattern(i);
        let f = funcs.get(&r).ok_or_else(|| Error::PatternNotInGraph(r.to_string()))?;
        total += f.eval(&ds.row_slice(i, &r)?);
    }
    Ok(total / ds.n() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{index_patterns, parse_dataset};
    use crate::graph::{builtin_graph, pat, BuiltinGraph};
    use rand::SeedableRng;

    fn chain_graph_d2() -> PatternGraph {
        builtin_graph(BuiltinGraph::TreeChain, &[pat("11"), pat("10"), pat("00")]).unwrap()
    }

    /// Dataset with known per-pattern Gaussian laws on the d=2 chain.
    fn chain_data(n: usize, seed: u64) -> IncompleteDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let full_law = Gaussian::new(vec![1.0, 0.5], vec![vec![1.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let mut values = Vec::new();
        let mut mask = Vec::new();
        for _ in 0..n {
            let u: f64 = rng.random();
            if u < 0.5 {
                let x = full_law.sample(&mut rng);
                values.extend(x);
                mask.extend([true, true]);
            } else if u < 0.8 {
                let x1 = 0.4 + rng.sample::<f64, _>(rand_distr::StandardNormal);
                values.extend([x1, f64::NAN]);
                mask.extend([true, false]);
            } else {
                values.extend([f64::NAN, f64::NAN]);
                mask.extend([false, false]);
            }
        }
        IncompleteDataset::new(n, 2, values, mask, vec!["x1".into(), "x2".into()]).unwrap()
    }

    #[test]
    fn density_fit_recovers_moments() {
        let ds = chain_data(10_000, 3);
        let idx = index_patterns(&ds);
        let model = fit_pattern_densities(&ds, &idx).unwrap();
        let law11 = model.law(&pat("11")).unwrap();
        assert!((law11.mean()[0] - 1.0).abs() < 0.05);
        assert!((law11.mean()[1] - 0.5).abs() < 0.05);
        assert!((law11.cov()[(0, 1)] - 0.3).abs() < 0.05);
        let law10 = model.law(&pat("10")).unwrap();
        assert!((law10.mean()[0] - 0.4).abs() < 0.07);
        // |r| = 0 pattern: weight recorded, no law stored.
        assert!(!model.has_law(&pat("00")));
        assert!(model.weight(&pat("00")) > 0.0);
    }

    #[test]
    fn constant_column_is_ridged_not_fatal() {
        let text = "x,y\n1.0,2.0\n1.0,3.0\n1.0,4.0\n1.0,5.5\n1.0,0.5\n";
        let ds = parse_dataset(text, "NA").unwrap();
        let idx = index_patterns(&ds);
        let model = fit_pattern_densities(&ds, &idx).unwrap();
        assert!(model.ridged.contains(&pat("11")));
        assert!(model.law(&pat("11")).unwrap().log_pdf(&[1.0, 2.0]).is_finite());
    }

    #[test]
    fn degenerate_group_size_is_an_error() {
        let text = "x,y\n1.0,2.0\n2.0,3.0\n0.5,NA\n";
        let ds = parse_dataset(text, "NA").unwrap();
        let idx = index_patterns(&ds);
        assert!(matches!(
            fit_pattern_densities(&ds, &idx),
            Err(Error::DegenerateGroup { .. })
        ));
    }

    #[test]
    fn single_parent_step_draws_the_parent() {
        let ds = chain_data(5_000, 11);
        let idx = index_patterns(&ds);
        let model = fit_pattern_densities(&ds, &idx).unwrap();
        let g = chain_graph_d2();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut row = vec![0.9, f64::NAN];
        let donor = impute_step(&mut row, &pat("10"), &g, &model, &mut rng).unwrap();
        assert_eq!(donor, pat("11"));
        assert!(row[1].is_finite());
        assert_eq!(row[0], 0.9);
    }

    #[test]
    fn equal_donors_split_evenly() {
        // Two parents with identical laws and equal weights: donor frequencies
        // near 1/2 (binomial 3.29σ band at p=0.001 over 10k draws).
        let g = builtin_graph(BuiltinGraph::ExampleFig2Right, &[]).unwrap();
        let law = Gaussian::new(vec![0.0], vec![vec![1.0]]).unwrap();
        let law2 = Gaussian::new(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let model = PatternDensityModel::from_parts(
            2,
            &[
                (pat("11"), Some(law2), 100.0),
                (pat("10"), Some(law.clone()), 100.0),
                (pat("01"), Some(law), 100.0),
                (pat("00"), None, 50.0),
            ],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let mut count11 = 0;
        for _ in 0..n {
            let mut row = vec![f64::NAN, f64::NAN];
            let donor = impute_step(&mut row, &pat("00"), &g, &model, &mut rng).unwrap();
            if donor == pat("11") {
                count11 += 1;
            }
        }
        let p = count11 as f64 / n as f64;
        assert!((p - 0.5).abs() < 3.29 * (0.25f64 / n as f64).sqrt(), "p={p}");
    }

    #[test]
    fn empty_conditioning_set_uses_counts_only() {
        // Pattern 00 donors weighted by n_s alone: 3:1 counts give 3/4 odds.
        let g = builtin_graph(BuiltinGraph::ExampleFig2Right, &[]).unwrap();
        let law1 = Gaussian::new(vec![0.0], vec![vec![1.0]]).unwrap();
        let law2 = Gaussian::new(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let model = PatternDensityModel::from_parts(
            2,
            &[
                (pat("11"), Some(law2), 300.0),
                (pat("10"), Some(law1.clone()), 100.0),
                (pat("01"), Some(law1), 100.0),
            ],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 20_000;
        let mut count11 = 0;
        for _ in 0..n {
            let mut row = vec![f64::NAN, f64::NAN];
            if impute_step(&mut row, &pat("00"), &g, &model, &mut rng).unwrap() == pat("11") {
                count11 += 1;
            }
        }
        let p = count11 as f64 / n as f64;
        assert!((p - 0.75).abs() < 3.29 * (0.1875f64 / n as f64).sqrt(), "p={p}");
    }

    #[test]
    fn fully_observed_dataset_is_identity() {
        let ds = parse_dataset("x,y\n1.0,2.0\n3.0,4.0\n", "NA").unwrap();
        let g = chain_graph_d2();
        let model = PatternDensityModel::new(2);
        let done = impute_dataset(&ds, &g, &model, 7, None).unwrap();
        assert_eq!(done.row(0), &[1.0, 2.0]);
        assert_eq!(done.row(1), &[3.0, 4.0]);
        assert!(done.provenance.iter().all(|s| *s == CellSource::Observed));
        assert!(done.chains.iter().all(|c| c.is_empty()));
    }

    #[test]
    fn observed_cells_survive_imputation_bit_exactly() {
        let ds = chain_data(500, 21);
        let idx = index_patterns(&ds);
        let model = fit_pattern_densities(&ds, &idx).unwrap();
        let g = chain_graph_d2();
        let done = impute_dataset(&ds, &g, &model, 9, None).unwrap();
        for i in 0..ds.n() {
            for j in 0..2 {
                if ds.is_observed(i, j) {
                    assert_eq!(ds.get(i, j).unwrap().to_bits(), done.row(i)[j].to_bits());
                    assert_eq!(done.provenance[i * 2 + j], CellSource::Observed);
                } else {
                    assert!(done.row(i)[j].is_finite());
                    assert_eq!(done.provenance[i * 2 + j], CellSource::Imputed);
                }
            }
        }
        // Termination bound: chains are at most |nodes| long.
        assert!(done.chains.iter().all(|c| c.len() <= g.len()));
    }

    #[test]
    fn monotone_chain_terminates_in_d_minus_one_steps() {
        let nodes = [pat("111"), pat("110"), pat("100")];
        let g = builtin_graph(BuiltinGraph::TreeChain, &nodes).unwrap();
        let law3 = Gaussian::new(vec![0.0; 3], vec![
            vec![1.0, 0.2, 0.1],
            vec![0.2, 1.0, 0.2],
            vec![0.1, 0.2, 1.0],
        ])
        .unwrap();
        let law2 = Gaussian::new(vec![0.0; 2], vec![vec![1.0, 0.2], vec![0.2, 1.0]]).unwrap();
        let model = PatternDensityModel::from_parts(
            3,
            &[
                (pat("111"), Some(law3), 10.0),
                (pat("110"), Some(law2), 10.0),
            ],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut row = vec![0.5, f64::NAN, f64::NAN];
        let mut pattern = pat("100");
        let mut steps = 0;
        while !pattern.is_full() {
            let donor = impute_step(&mut row, &pattern, &g, &model, &mut rng).unwrap();
            pattern = donor;
            steps += 1;
        }
        assert!(steps <= 2);
        assert!(row.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn ascending_edges_are_rejected_for_imputation() {
        let g = crate::golden::fig_b1_g1();
        let ds = parse_dataset("x,y\n1.0,NA\n", "NA").unwrap();
        let model = PatternDensityModel::new(2);
        assert!(matches!(
            impute_dataset(&ds, &g, &model, 1, None),
            Err(Error::InvalidGraph(_))
        ));
    }

    #[test]
    fn ra_on_complete_data_is_the_sample_mean() {
        let ds = parse_dataset("x,y\n1.0,2.0\n3.0,4.0\n5.0,0.0\n", "NA").unwrap();
        let g = chain_graph_d2();
        let model = PatternDensityModel::new(2);
        let theta = Functional::Linear(vec![1.0, 1.0]);
        for n_imp in [1, 5] {
            let est = ra_estimate(&ds, &g, &model, &theta, n_imp, 3, None).unwrap();
            assert!((est.estimate - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_tilt_matches_untilted_distribution() {
        // ω = 0 with any finite bound: acceptance is identically one, so the
        // same seed gives bit-identical completions.
        let ds = chain_data(300, 33);
        let idx = index_patterns(&ds);
        let model = fit_pattern_densities(&ds, &idx).unwrap();
        let g = chain_graph_d2();
        let tilt = TiltSpec::scalar(0.0, &ds).unwrap();
        let plain = impute_dataset(&ds, &g, &model, 5, None).unwrap();
        let tilted = impute_dataset(&ds, &g, &model, 5, Some(&tilt)).unwrap();
        for i in 0..ds.n() {
            assert_eq!(plain.row(i), tilted.row(i));
        }
    }

    #[test]
    fn positive_tilt_shifts_imputed_values_upward() {
        let ds = chain_data(4_000, 37);
        let idx = index_patterns(&ds);
        let model = fit_pattern_densities(&ds, &idx).unwrap();
        let g = chain_graph_d2();
        let tilt = TiltSpec::scalar(1.0, &ds).unwrap();
        let plain = impute_dataset(&ds, &g, &model, 6, None).unwrap();
        let tilted = impute_dataset(&ds, &g, &model, 6, Some(&tilt)).unwrap();
        let mean_imputed = |c: &CompletedDataset| {
            let mut sum = 0.0;
            let mut k = 0usize;
            for i in 0..c.n {
                for j in 0..2 {
                    if c.provenance[i * 2 + j] == CellSource::Imputed {
                        sum += c.row(i)[j];
                        k += 1;
                    }
                }
            }
            sum / k as f64
        };
        // Tilting by exp(ω^T ℓ) upweights large values.
        assert!(mean_imputed(&tilted) > mean_imputed(&plain) + 0.2);
    }

    #[test]
    fn tilt_requires_finite_bound() {
        assert!(matches!(
            TiltSpec::new(vec![1.0], vec![f64::INFINITY]),
            Err(Error::TiltUnbounded(_))
        ));
    }

    #[test]
    fn tree_closed_form_on_single_edge_matches_regression_line() {
        // Graph 11 -> 10 -> 00: m(l1, 10) = a1 l1 + a2 E[L2 | L1 = l1, R = 11].
        let g = chain_graph_d2();
        let law11 = Gaussian::new(vec![1.0, 0.5], vec![vec![1.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let law10 = Gaussian::new(vec![0.4], vec![vec![1.0]]).unwrap();
        let model = PatternDensityModel::from_parts(
            2,
            &[(pat("11"), Some(law11), 10.0), (pat("10"), Some(law10), 10.0)],
        )
        .unwrap();
        let funcs = tree_regression_functions(&g, &model, &[2.0, 1.0]).unwrap();
        let f10 = &funcs[&pat("10")];
        // E[L2|L1=x] = 0.5 + 0.3 (x - 1): m = 2x + 0.5 + 0.3x - 0.3 = 2.3x + 0.2.
        assert!((f10.eval(&[0.0]) - 0.2).abs() < 1e-12);
        assert!((f10.eval(&[1.0]) - 2.5).abs() < 1e-12);
        // Pattern 00 composes a second expectation into the constant
        // m(∅, 00) = E[m(L1, 10) | R = 10] = 2.3 · 0.4 + 0.2.
        let f00 = &funcs[&pat("00")];
        assert!(f00.coeffs.is_empty());
        assert!((f00.intercept - (2.3 * 0.4 + 0.2)).abs() < 1e-12);
    }

    #[test]
    fn tree_closed_form_agrees_with_monte_carlo_ra() {
        let ds = chain_data(4_000, 41);
        let idx = index_patterns(&ds);
        let model = fit_pattern_densities(&ds, &idx).unwrap();
        let g = chain_graph_d2();
        let theta = Functional::Linear(vec![1.0, 1.0]);
        let exact = tree_closed_form_estimate(&ds, &g, &model, &theta).unwrap();
        let n_imp = 2_000;
        let mc = ra_estimate(&ds, &g, &model, &theta, n_imp, 55, None).unwrap();
        // 3 MC standard errors from the per-imputation spread.
        let mean = mc.estimate;
        let var: f64 = mc.per_imputation.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            / (n_imp as f64 - 1.0);
        let se = (var / n_imp as f64).sqrt();
        assert!(
            (exact - mc.estimate).abs() < 3.0 * se.max(1e-6),
            "exact={exact} mc={} se={se}",
            mc.estimate
        );
    }

    #[test]
    fn non_tree_graph_is_rejected_by_closed_form() {
        let g = builtin_graph(BuiltinGraph::ExampleFig2Right, &[]).unwrap();
        let ds = parse_dataset("x,y\n1.0,2.0\n", "NA").unwrap();
        let model = PatternDensityModel::new(2);
        let theta = Functional::Linear(vec![1.0, 1.0]);
        match tree_closed_form_estimate(&ds, &g, &model, &theta) {
            Err(Error::NotATree(p, n)) => {
                assert_eq!(p, "00");
                assert_eq!(n, 2);
            }
            other => panic!("expected NotATree, got {other:?}"),
        }
        let ind = Functional::Indicator { col: 0, threshold: 0.0 };
        let chain = chain_graph_d2();
        assert!(matches!(
            tree_closed_form_estimate(&ds, &chain, &model, &ind),
            Err(Error::UnsupportedFunctional(_))
        ));
    }
}
