//! Propensity scores from selection odds: the level-sweep recursion
//! Q_r = O_r · Σ_{s ∈ PA_r} Q_s, the path-sum oracle, and path scores.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{Path, Pattern, PatternGraph, DEFAULT_PATH_CAP};
use crate::mvn::log_sum_exp;
use crate::odds::OddsModel;

/// Floor under which a propensity triggers the near-zero diagnostic.
pub const PI_FLOOR: f64 = 1e-12;

/// Per-row propensity quantities: Q_r for every node, π, and the implied
/// pattern probabilities Q_r · π.
#[derive(Debug, Clone)]
pub struct PropensityScores {
    q: BTreeMap<Pattern, f64>,
    pi: f64,
    /// π fell below [`PI_FLOOR`] before flooring.
    pub near_zero_flag: bool,
}

impl PropensityScores {
    pub fn pi(&self) -> f64 {
        self.pi
    }

    pub fn q(&self, r: &Pattern) -> Result<f64> {
        self.q.get(r).copied().ok_or_else(|| Error::NodeNotFound(r.to_string()))
    }

    pub fn q_map(&self) -> &BTreeMap<Pattern, f64> {
        &self.q
    }

    /// P(R = r | x) = Q_r(x) · π(x).
    pub fn pattern_probability(&self, r: &Pattern) -> Result<f64> {
        Ok(self.q(r)? * self.pi)
    }

    fn from_log_q(log_q: BTreeMap<Pattern, f64>) -> Self {
        let logs: Vec<f64> = log_q.values().copied().collect();
        let log_total = log_sum_exp(&logs);
        let pi = (-log_total).exp();
        let near_zero_flag = pi < PI_FLOOR;
        PropensityScores {
            q: log_q.into_iter().map(|(k, v)| (k, v.exp())).collect(),
            pi: pi.max(PI_FLOOR),
            near_zero_flag,
        }
    }
}

/// Propensity by the recursive sweep. Regular graphs sweep |r| = d-1, ..., 0;
/// acyclic graphs sweep by ascending generation number. Cost is linear in
/// the total parent-set size.
pub fn recursive_scores(g: &PatternGraph, m: &OddsModel, x: &[f64]) -> Result<PropensityScores> {
    let order = g.sweep_order()?;
    let mut log_odds: Vec<f64> = vec![0.0; g.len()];
    let mut overflow = false;
    for (i, r) in g.nodes().iter().enumerate() {
        if r.is_full() {
            continue;
        }
        let lo = m.log_odds_full(r, x)?;
        if !lo.is_finite() {
            return Err(Error::NonFinite(format!("log odds of pattern {r}")));
        }
        overflow |= lo.abs() > 30.0;
        log_odds[i] = lo;
    }
    if overflow {
        // Log-space recursion: log Q_r = log O_r + logsumexp over parents.
        let mut log_q = vec![f64::NEG_INFINITY; g.len()];
        for &i in &order {
            if g.node(i).is_full() {
                log_q[i] = 0.0;
                continue;
            }
            let parents = g.parent_indices(i);
            if parents.is_empty() {
                return Err(Error::InvalidGraph(format!("node {} has no parents", g.node(i))));
            }
            let parent_logs: Vec<f64> = parents.iter().map(|&p| log_q[p]).collect();
            log_q[i] = log_odds[i] + log_sum_exp(&parent_logs);
        }
        let map: BTreeMap<Pattern, f64> = g.nodes().iter().copied().zip(log_q).collect();
        Ok(PropensityScores::from_log_q(map))
    } else {
        let mut q = vec![0.0; g.len()];
        for &i in &order {
            if g.node(i).is_full() {
                q[i] = 1.0;
                continue;
            }
            let parents = g.parent_indices(i);
            if parents.is_empty() {
                return Err(Error::InvalidGraph(format!("node {} has no parents", g.node(i))));
            }
            q[i] = log_odds[i].exp() * parents.iter().map(|&p| q[p]).sum::<f64>();
        }
        let total: f64 = q.iter().sum();
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::NonFinite("propensity normalizer".into()));
        }
        let pi = 1.0 / total;
        let near_zero_flag = pi < PI_FLOOR;
        Ok(PropensityScores {
            q: g.nodes().iter().copied().zip(q).collect(),
            pi: pi.max(PI_FLOOR),
            near_zero_flag,
        })
    }
}

fn path_log_product(m: &OddsModel, path: &Path, x: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for s in path.odds_nodes() {
        acc += m.log_odds_full(s, x)?;
    }
    Ok(acc)
}

/// Propensity by explicit path enumeration: π = 1 / Σ_Ξ Π_{s∈Ξ} O_s and
/// Q_r = Σ_{Ξ∈Π_r} Π_{s∈Ξ} O_s. Exponential in the worst case; an oracle
/// for [`recursive_scores`].
pub fn path_propensity_oracle(g: &PatternGraph, m: &OddsModel, x: &[f64]) -> Result<PropensityScores> {
    path_propensity_oracle_capped(g, m, x, DEFAULT_PATH_CAP)
}

pub fn path_propensity_oracle_capped(
    g: &PatternGraph,
    m: &OddsModel,
    x: &[f64],
    cap: usize,
) -> Result<PropensityScores> {
    let mut log_q = BTreeMap::new();
    for r in g.nodes() {
        let paths = g.enumerate_paths_capped(r, cap)?;
        let logs: Vec<f64> = paths
            .iter()
            .map(|p| path_log_product(m, p, x))
            .collect::<Result<_>>()?;
        log_q.insert(*r, log_sum_exp(&logs));
    }
    Ok(PropensityScores::from_log_q(log_q))
}

/// One path with its selection probability κ(Ξ | x).
#[derive(Debug, Clone)]
pub struct PathScore {
    pub path: Path,
    pub kappa: f64,
}

/// κ(Ξ|x) = π(x) Π_{s∈Ξ} O_s(x_s) for every path in the graph, in the
/// deterministic path order grouped by terminal node. The scores sum to one.
pub fn path_scores(g: &PatternGraph, m: &OddsModel, x: &[f64]) -> Result<Vec<PathScore>> {
    path_scores_capped(g, m, x, DEFAULT_PATH_CAP)
}

pub fn path_scores_capped(g: &PatternGraph, m: &OddsModel, x: &[f64], cap: usize) -> Result<Vec<PathScore>> {
    let scores = path_propensity_oracle_capped(g, m, x, cap)?;
    let log_pi = scores.pi().ln();
    let mut out = Vec::new();
    for r in g.nodes() {
        for path in g.enumerate_paths_capped(r, cap)? {
            let kappa = (log_pi + path_log_product(m, &path, x)?).exp();
            out.push(PathScore { path, kappa });
        }
    }
    Ok(out)
}
