//! Exact fairness probabilities, dispersion-sweep orchestration and pooled
//! summary statistics.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::lossmodel::{sample_claims, LossError, LossModel};
use crate::netgen::{generate_graph, DegreeSpec, Graph, GenerateOptions, NetgenError};
use crate::optimize::{
    solve_engagement_lp, solve_min_variance_qp, solve_two_stage, LpProblem, OptimizeError,
};
use crate::sharing::{
    settle_personalized, settle_two_layer, settle_uniform, settle_uniform_with_self,
    EngagementMap, SettlementResult, SharingError,
};

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("mean degree must be at least 1, got {0}")]
    BadDegree(usize),
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("cannot parse mechanism '{0}'")]
    BadMechanism(String),
    #[error("sweep needs a nonempty sigma grid")]
    EmptySigmaGrid,
    #[error("sweep needs at least one seed per sigma")]
    NoSeeds,
    #[error("sweep needs at least one mechanism")]
    NoMechanisms,
    #[error("replication count must be at least 1")]
    NoReplications,
    #[error("self-contribution {z} outside [0, {s}]")]
    BadSelfContribution { z: f64, s: f64 },
    #[error("empty sample")]
    EmptySample,
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Netgen(#[from] NetgenError),
    #[error(transparent)]
    Sharing(#[from] SharingError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error("CSV parse error: {0}")]
    BadCsv(String),
}

/// Ex-post fairness probabilities on a regular mesh with deterministic
/// losses equal to the deductible.
#[derive(Debug, Clone, Copy)]
pub struct FairnessReport {
    /// Probability a non-claimant pays nothing.
    pub p_zero: f64,
    /// Probability a claimant retains the full deductible.
    pub p_full: f64,
    /// Probability a claimant ends up strictly below a claiming neighbor.
    pub p_strict: f64,
    /// Same with a weak inequality.
    pub p_weak: f64,
}

fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    if p <= 0.0 {
        let mut pmf = vec![0.0; n + 1];
        pmf[0] = 1.0;
        return pmf;
    }
    if p >= 1.0 {
        let mut pmf = vec![0.0; n + 1];
        pmf[n] = 1.0;
        return pmf;
    }
    let ln_p = p.ln();
    let ln_q = (1.0 - p).ln();
    let ln_n_fact = ln_gamma(n as f64 + 1.0);
    (0..=n)
        .map(|k| {
            let ln_choose = ln_n_fact - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0);
            (ln_choose + k as f64 * ln_p + (n - k) as f64 * ln_q).exp()
        })
        .collect()
}

/// Exact binomial computation of the fairness probabilities: the claimant's
/// settled loss counts claiming neighbors, a claiming neighbor has one
/// claimer (the claimant) plus an independent binomial over its remaining
/// links.
pub fn fairness_exact(mean_degree: usize, p: f64) -> Result<FairnessReport, AnalyticsError> {
    if mean_degree < 1 {
        return Err(AnalyticsError::BadDegree(mean_degree));
    }
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(AnalyticsError::BadProbability(p));
    }
    let own = binomial_pmf(mean_degree, p);
    let neighbor = binomial_pmf(mean_degree - 1, p);
    // cdf_own[k] = P[N_i <= k]
    let mut cdf_own = own.clone();
    for k in 1..cdf_own.len() {
        cdf_own[k] += cdf_own[k - 1];
    }
    let mut p_strict = 0.0;
    let mut p_weak = 0.0;
    for (extra, &prob) in neighbor.iter().enumerate() {
        // neighbor's count is 1 + extra
        p_strict += prob * cdf_own[extra.min(mean_degree)];
        p_weak += prob * cdf_own[(extra + 1).min(mean_degree)];
    }
    Ok(FairnessReport {
        p_zero: own[0],
        p_full: own[mean_degree],
        p_strict,
        p_weak,
    })
}

/// Risk-sharing mechanism evaluated by the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mechanism {
    /// No sharing: settled losses are the capped losses.
    None,
    /// Identical reciprocal contracts at the configured magnitude.
    Uniform,
    /// Uniform contracts behind a self-retained first layer.
    UniformSelf { z: f64 },
    /// Coverage-maximizing personalized engagements.
    Lp,
    /// Minimum-variance linear shares settled as engagements.
    Qp,
    /// Two-layer sharing with friends and friends of friends.
    Fof { gamma1: f64, gamma2: f64, z: f64 },
}

impl Mechanism {
    pub fn tag(&self) -> &'static str {
        match self {
            Mechanism::None => "none",
            Mechanism::Uniform => "uniform",
            Mechanism::UniformSelf { .. } => "uniform_self",
            Mechanism::Lp => "lp",
            Mechanism::Qp => "qp",
            Mechanism::Fof { .. } => "fof",
        }
    }

    pub fn self_contribution(&self) -> f64 {
        match self {
            Mechanism::UniformSelf { z } | Mechanism::Fof { z, .. } => *z,
            _ => 0.0,
        }
    }
}

impl FromStr for Mechanism {
    type Err = AnalyticsError;

    /// Grammar: `none | uniform | uniform_self(z) | lp | qp | fof(g1,g2,z)`.
    fn from_str(text: &str) -> Result<Self, AnalyticsError> {
        let bad = || AnalyticsError::BadMechanism(text.to_string());
        let text = text.trim();
        match text {
            "none" => return Ok(Mechanism::None),
            "uniform" => return Ok(Mechanism::Uniform),
            "lp" => return Ok(Mechanism::Lp),
            "qp" => return Ok(Mechanism::Qp),
            _ => {}
        }
        let (name, rest) = text.split_once('(').ok_or_else(bad)?;
        let args = rest.strip_suffix(')').ok_or_else(bad)?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        match (name.trim(), nums.as_slice()) {
            ("uniform_self", [z]) => Ok(Mechanism::UniformSelf { z: *z }),
            ("fof", [g1, g2, z]) => Ok(Mechanism::Fof {
                gamma1: *g1,
                gamma2: *g2,
                z: *z,
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mechanism::UniformSelf { z } => write!(f, "uniform_self({z})"),
            Mechanism::Fof { gamma1, gamma2, z } => write!(f, "fof({gamma1},{gamma2},{z})"),
            other => f.write_str(other.tag()),
        }
    }
}

/// Per-edge magnitude rule for the uniform and LP mechanisms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaRule {
    /// Deductible divided by the mean degree.
    Auto,
    Fixed(f64),
}

impl GammaRule {
    fn value(&self, deductible: f64, mean_degree: f64) -> f64 {
        match self {
            GammaRule::Auto => deductible / mean_degree,
            GammaRule::Fixed(g) => *g,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Replications {
    Fixed(usize),
    /// Run until the pooled-stdev estimate's relative standard error drops
    /// below 1%, capped at `max`.
    Adaptive { max: usize },
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub n: usize,
    pub mean_degree: f64,
    pub min_degree: usize,
    pub sigmas: Vec<f64>,
    pub seeds_per_sigma: usize,
    pub master_seed: u64,
    pub loss: LossModel,
    pub mechanisms: Vec<Mechanism>,
    pub gamma: GammaRule,
    pub replications: Replications,
}

impl SweepConfig {
    fn validate(&self) -> Result<(), AnalyticsError> {
        if self.sigmas.is_empty() {
            return Err(AnalyticsError::EmptySigmaGrid);
        }
        if self.seeds_per_sigma == 0 {
            return Err(AnalyticsError::NoSeeds);
        }
        if self.mechanisms.is_empty() {
            return Err(AnalyticsError::NoMechanisms);
        }
        match self.replications {
            Replications::Fixed(0) | Replications::Adaptive { max: 0 } => {
                return Err(AnalyticsError::NoReplications)
            }
            _ => {}
        }
        self.loss.validate()?;
        let s = self.loss.deductible;
        for mechanism in &self.mechanisms {
            let z = mechanism.self_contribution();
            if !(0.0..=s).contains(&z) {
                return Err(AnalyticsError::BadSelfContribution { z, s });
            }
        }
        Ok(())
    }
}

/// One line of sweep output.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sigma: f64,
    pub seed: u64,
    pub mechanism: String,
    pub self_contribution: f64,
    pub mean_xi: f64,
    pub stdev_xi: f64,
    pub stdev_ratio: f64,
    pub share_self: f64,
    pub share_friends: f64,
    pub share_fof: f64,
}

pub const CSV_HEADER: &str =
    "sigma,seed,mechanism,self_contribution,mean_xi,stdev_xi,stdev_ratio,share_self,share_friends,share_fof";

/// Streaming pooled statistics over settled losses plus layer totals.
#[derive(Debug, Clone, Default)]
pub struct Accumulator {
    count: u64,
    sum: f64,
    sum_sq: f64,
    paid_self: f64,
    paid_friends: f64,
    paid_fof: f64,
    total_loss: f64,
    rep_stdevs: Vec<f64>,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_settlement(&mut self, result: &SettlementResult) {
        let mut rep = RunningMoments::default();
        for &v in &result.xi {
            self.count += 1;
            self.sum += v;
            self.sum_sq += v * v;
            rep.push(v);
        }
        self.rep_stdevs.push(rep.stdev());
        let layers = &result.layers;
        for i in 0..result.xi.len() {
            self.paid_self += layers.self_first[i] + layers.residual_self[i];
            self.paid_friends += layers.from_friends[i];
            self.paid_fof += layers.from_fof[i];
        }
        self.total_loss += result.total_in;
    }

    /// Losses that were never shared count entirely as self-paid.
    pub fn add_unshared(&mut self, losses: &[f64]) {
        let mut rep = RunningMoments::default();
        for &v in losses {
            self.count += 1;
            self.sum += v;
            self.sum_sq += v * v;
            self.paid_self += v;
            self.total_loss += v;
            rep.push(v);
        }
        self.rep_stdevs.push(rep.stdev());
    }

    pub fn replications(&self) -> usize {
        self.rep_stdevs.len()
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    /// Population standard deviation over every (node, replication) loss.
    pub fn stdev(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let mean = self.mean();
        (self.sum_sq / self.count as f64 - mean * mean).max(0.0).sqrt()
    }

    /// Fractions of the total loss funded by (self, friends, friends of
    /// friends); residual retention folds into the self share.
    pub fn shares(&self) -> [f64; 3] {
        if self.total_loss <= 0.0 {
            return [1.0, 0.0, 0.0];
        }
        [
            self.paid_self / self.total_loss,
            self.paid_friends / self.total_loss,
            self.paid_fof / self.total_loss,
        ]
    }

    /// Relative standard error of the pooled stdev, estimated from the
    /// spread of per-replication stdevs.
    fn stdev_relative_se(&self) -> f64 {
        let r = self.rep_stdevs.len();
        if r < 2 {
            return f64::INFINITY;
        }
        let pooled = self.stdev();
        if pooled <= 0.0 {
            return 0.0;
        }
        let mean = self.rep_stdevs.iter().sum::<f64>() / r as f64;
        let var = self
            .rep_stdevs
            .iter()
            .map(|&v| (v - mean).powi(2))
            .sum::<f64>()
            / (r - 1) as f64;
        (var / r as f64).sqrt() / pooled
    }
}

#[derive(Debug, Default)]
struct RunningMoments {
    count: u64,
    sum: f64,
    sum_sq: f64,
}

impl RunningMoments {
    fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn stdev(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let mean = self.sum / self.count as f64;
        (self.sum_sq / self.count as f64 - mean * mean).max(0.0).sqrt()
    }
}

/// Pooled mean, population stdev and layer shares of a node-by-replication
/// loss matrix that was never shared (all self-paid).
pub fn summarize(xi_samples: &[Vec<f64>]) -> Result<(f64, f64, [f64; 3]), AnalyticsError> {
    if xi_samples.is_empty() || xi_samples.iter().all(Vec::is_empty) {
        return Err(AnalyticsError::EmptySample);
    }
    let mut acc = Accumulator::new();
    for row in xi_samples {
        acc.add_unshared(row);
    }
    Ok((acc.mean(), acc.stdev(), acc.shares()))
}

/// Deterministic ChaCha stream keyed by the master seed and a context key.
pub fn keyed_rng(master_seed: u64, key: &[u64]) -> ChaCha8Rng {
    let mut state = master_seed ^ 0x9E37_79B9_7F4A_7C15;
    for &k in key {
        state ^= k.wrapping_add(0x9E37_79B9_7F4A_7C15);
        state = splitmix64(state);
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

enum Prepared {
    Direct,
    Engagement { map: EngagementMap, z: f64 },
    UniformGamma(f64),
    UniformSelfZ(f64),
    TwoLayer {
        eng1: EngagementMap,
        fof: Graph,
        eng2: EngagementMap,
        z: f64,
    },
}

fn prepare_mechanism(
    mechanism: &Mechanism,
    graph: &Graph,
    config: &SweepConfig,
) -> Result<Prepared, AnalyticsError> {
    let s = config.loss.deductible;
    let gamma = config.gamma.value(s, config.mean_degree);
    Ok(match *mechanism {
        Mechanism::None => Prepared::Direct,
        Mechanism::Uniform => Prepared::UniformGamma(gamma),
        Mechanism::UniformSelf { z } => Prepared::UniformSelfZ(z),
        Mechanism::Lp => {
            let solution = solve_engagement_lp(&LpProblem::new(graph, s, gamma))?;
            Prepared::Engagement {
                map: solution.engagement,
                z: 0.0,
            }
        }
        Mechanism::Qp => {
            let shares = solve_min_variance_qp(graph, s, gamma)?;
            let values: Vec<f64> = shares.edge_shares.iter().map(|w| w * s).collect();
            Prepared::Engagement {
                map: EngagementMap::from_edge_values(graph, values)?,
                z: 0.0,
            }
        }
        Mechanism::Fof { gamma1, gamma2, z } => {
            let stages = solve_two_stage(graph, s - z, gamma1, gamma2)?;
            Prepared::TwoLayer {
                eng1: stages.first.engagement,
                fof: stages.fof_graph,
                eng2: stages.second.engagement,
                z,
            }
        }
    })
}

fn scenario_rows(config: &SweepConfig, sigma: f64, seed_index: u64) -> Result<Vec<SweepRow>, AnalyticsError> {
    let spec = DegreeSpec {
        mean_degree: config.mean_degree,
        degree_sd: sigma,
        min_degree: config.min_degree,
    };
    let mut graph_rng = keyed_rng(config.master_seed, &[sigma.to_bits(), seed_index, 0]);
    let graph = generate_graph(&spec, config.n, &mut graph_rng, GenerateOptions::default())?;
    let s = config.loss.deductible;
    let (fixed_reps, max_reps) = match config.replications {
        Replications::Fixed(r) => (Some(r), r),
        Replications::Adaptive { max } => (None, max),
    };

    let mut rows = Vec::with_capacity(config.mechanisms.len());
    for mechanism in &config.mechanisms {
        let prepared = prepare_mechanism(mechanism, &graph, config)?;
        // every mechanism replays the same claim stream
        let mut claims_rng = keyed_rng(config.master_seed, &[sigma.to_bits(), seed_index, 1]);
        let mut acc = Accumulator::new();
        for rep in 0..max_reps {
            let claims = sample_claims(&config.loss, config.n, &mut claims_rng)?;
            match &prepared {
                Prepared::Direct => acc.add_unshared(&claims.capped),
                Prepared::UniformGamma(gamma) => {
                    acc.add_settlement(&settle_uniform(&graph, &claims, s, *gamma)?)
                }
                Prepared::UniformSelfZ(z) => {
                    acc.add_settlement(&settle_uniform_with_self(&graph, &claims, s, *z)?)
                }
                Prepared::Engagement { map, z } => {
                    if *z == 0.0 {
                        acc.add_settlement(&settle_personalized(&graph, map, &claims, s)?)
                    } else {
                        let empty = Graph::from_edges(config.n, std::iter::empty())?;
                        let none = EngagementMap::zero(&empty);
                        acc.add_settlement(&settle_two_layer(
                            &graph, map, &empty, &none, &claims, s, *z,
                        )?)
                    }
                }
                Prepared::TwoLayer { eng1, fof, eng2, z } => acc.add_settlement(
                    &settle_two_layer(&graph, eng1, fof, eng2, &claims, s, *z)?,
                ),
            }
            if fixed_reps.is_none() && rep >= 19 && (rep + 1) % 10 == 0 && acc.stdev_relative_se() < 0.01
            {
                break;
            }
        }
        let [share_self, share_friends, share_fof] = acc.shares();
        rows.push(SweepRow {
            sigma,
            seed: seed_index,
            mechanism: mechanism.tag().to_string(),
            self_contribution: mechanism.self_contribution(),
            mean_xi: acc.mean(),
            stdev_xi: acc.stdev(),
            stdev_ratio: acc.stdev() / s,
            share_self,
            share_friends,
            share_fof,
        });
    }
    Ok(rows)
}

/// Runs the sweep over the (sigma, seed) grid with scenario-level
/// parallelism. Output is independent of the worker count: every scenario
/// owns an RNG stream keyed by `(master_seed, sigma, seed)` and rows are
/// sorted before returning.
pub fn run_sweep(config: &SweepConfig, workers: usize) -> Result<Vec<SweepRow>, AnalyticsError> {
    config.validate()?;
    let scenarios: Vec<(f64, u64)> = config
        .sigmas
        .iter()
        .flat_map(|&sigma| (0..config.seeds_per_sigma as u64).map(move |seed| (sigma, seed)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    let nested: Result<Vec<Vec<SweepRow>>, AnalyticsError> = pool.install(|| {
        scenarios
            .par_iter()
            .map(|&(sigma, seed)| scenario_rows(config, sigma, seed))
            .collect()
    });
    let mut rows: Vec<SweepRow> = nested?.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        a.sigma
            .total_cmp(&b.sigma)
            .then_with(|| a.mechanism.cmp(&b.mechanism))
            .then_with(|| a.self_contribution.total_cmp(&b.self_contribution))
            .then_with(|| a.seed.cmp(&b.seed))
    });
    Ok(rows)
}

/// Renders rows as CSV with `#`-prefixed comment lines first, then the
/// fixed header. Floats use shortest round-trip formatting.
pub fn rows_to_csv(rows: &[SweepRow], comments: &[String]) -> String {
    let mut out = String::new();
    for comment in comments {
        out.push_str("# ");
        out.push_str(comment);
        out.push('\n');
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.sigma,
            r.seed,
            r.mechanism,
            r.self_contribution,
            r.mean_xi,
            r.stdev_xi,
            r.stdev_ratio,
            r.share_self,
            r.share_friends,
            r.share_fof
        ));
    }
    out
}

/// Parses CSV produced by [`rows_to_csv`], skipping comment lines.
pub fn rows_from_csv(text: &str) -> Result<Vec<SweepRow>, AnalyticsError> {
    let mut lines = text
        .lines()
        .filter(|line| !line.starts_with('#') && !line.trim().is_empty());
    let header = lines.next().ok_or_else(|| AnalyticsError::BadCsv("empty file".into()))?;
    if header != CSV_HEADER {
        return Err(AnalyticsError::BadCsv(format!("unexpected header '{header}'")));
    }
    let mut rows = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(AnalyticsError::BadCsv(format!("bad row '{line}'")));
        }
        let num = |idx: usize| -> Result<f64, AnalyticsError> {
            fields[idx]
                .parse()
                .map_err(|_| AnalyticsError::BadCsv(format!("bad number '{}'", fields[idx])))
        };
        rows.push(SweepRow {
            sigma: num(0)?,
            seed: fields[1]
                .parse()
                .map_err(|_| AnalyticsError::BadCsv(format!("bad seed '{}'", fields[1])))?,
            mechanism: fields[2].to_string(),
            self_contribution: num(3)?,
            mean_xi: num(4)?,
            stdev_xi: num(5)?,
            stdev_ratio: num(6)?,
            share_self: num(7)?,
            share_friends: num(8)?,
            share_fof: num(9)?,
        });
    }
    Ok(rows)
}
