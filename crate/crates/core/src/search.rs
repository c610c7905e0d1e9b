//! Network-guided P-UCT tree search and the five warm-start enhancements.
//!
//! All kinds share one tree. They differ in two places only: the value a newly
//! expanded leaf reports (network, random rollout, or a weighted blend) and
//! whether selection mixes in AMAF statistics through the RAVE score.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{GameState, Move};
use crate::scalar::Scalar;

/// Search variant used to produce a move policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnhancementKind {
    /// Plain network-guided MCTS, no rollouts.
    Baseline,
    Rollout,
    Rave,
    /// Rollout-valued leaves under RAVE selection.
    Rora,
    /// Weighted network + rollout leaf value.
    Wro,
    /// Weighted network + rollout leaf value under RAVE selection.
    Wrora,
}

impl EnhancementKind {
    pub const ALL: [EnhancementKind; 6] = [
        EnhancementKind::Baseline,
        EnhancementKind::Rollout,
        EnhancementKind::Rave,
        EnhancementKind::Rora,
        EnhancementKind::Wro,
        EnhancementKind::Wrora,
    ];

    pub const ENHANCEMENTS: [EnhancementKind; 5] = [
        EnhancementKind::Rollout,
        EnhancementKind::Rave,
        EnhancementKind::Rora,
        EnhancementKind::Wro,
        EnhancementKind::Wrora,
    ];

    /// Selection blends in AMAF statistics.
    pub fn uses_rave(self) -> bool {
        matches!(
            self,
            EnhancementKind::Rave | EnhancementKind::Rora | EnhancementKind::Wrora
        )
    }

    /// Leaf values involve a random playout.
    pub fn uses_rollout(self) -> bool {
        matches!(
            self,
            EnhancementKind::Rollout
                | EnhancementKind::Rora
                | EnhancementKind::Wro
                | EnhancementKind::Wrora
        )
    }

    /// Leaf value is a weighted network/rollout blend.
    pub fn is_weighted(self) -> bool {
        matches!(self, EnhancementKind::Wro | EnhancementKind::Wrora)
    }

    pub fn name(self) -> &'static str {
        match self {
            EnhancementKind::Baseline => "baseline",
            EnhancementKind::Rollout => "rollout",
            EnhancementKind::Rave => "rave",
            EnhancementKind::Rora => "rora",
            EnhancementKind::Wro => "wro",
            EnhancementKind::Wrora => "wrora",
        }
    }
}

impl fmt::Display for EnhancementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnhancementKind {
    type Err = SearchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EnhancementKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| SearchError::InvalidConfig(format!("unknown enhancement kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    #[error("cannot search a terminal position")]
    TerminalRoot,
    #[error("evaluator failed: {0}")]
    Evaluator(String),
}

/// Policy and value for one position.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<F> {
    /// One entry per action id; only legal entries are read.
    pub policy: Vec<F>,
    /// From the perspective of the side to move, in `[-1, 1]`.
    pub value: F,
}

/// Source of priors and leaf values. Must be callable from many searches at once.
pub trait Evaluator<F: Scalar>: Sync {
    fn evaluate(&self, state: &GameState) -> Result<Evaluation<F>, SearchError>;
}

impl<F: Scalar, E: Evaluator<F> + ?Sized> Evaluator<F> for &E {
    fn evaluate(&self, state: &GameState) -> Result<Evaluation<F>, SearchError> {
        (**self).evaluate(state)
    }
}

/// Uniform priors over legal moves and a neutral value.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformEvaluator;

impl<F: Scalar> Evaluator<F> for UniformEvaluator {
    fn evaluate(&self, state: &GameState) -> Result<Evaluation<F>, SearchError> {
        let mask = state.legal_mask();
        let n = F::of_usize(mask.count_ones() as usize);
        let policy = (0..state.action_size())
            .map(|a| {
                if mask & (1u64 << a) != 0 {
                    F::one() / n
                } else {
                    F::zero()
                }
            })
            .collect();
        Ok(Evaluation {
            policy,
            value: F::zero(),
        })
    }
}

/// Memoizes an evaluator by position. Meant to live for one game against one
/// fixed network, where consecutive searches revisit the same subtrees.
pub struct CachedEvaluator<'a, F, E: ?Sized> {
    inner: &'a E,
    cache: Mutex<HashMap<u128, Evaluation<F>>>,
}

impl<'a, F: Scalar, E: Evaluator<F> + ?Sized> CachedEvaluator<'a, F, E> {
    pub fn new(inner: &'a E) -> Self {
        CachedEvaluator {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.cache.lock().map(|c| c.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<F: Scalar, E: Evaluator<F> + ?Sized> Evaluator<F> for CachedEvaluator<'_, F, E> {
    fn evaluate(&self, state: &GameState) -> Result<Evaluation<F>, SearchError> {
        let key = state.key();
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let fresh = self.inner.evaluate(state)?;
        self.cache
            .lock()
            .expect("cache lock")
            .insert(key, fresh.clone());
        Ok(fresh)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig<F> {
    /// Simulations per move.
    pub simulations: usize,
    /// Exploration constant.
    pub c: F,
    /// RAVE equivalence parameter.
    pub equivalence: F,
    pub kind: EnhancementKind,
    /// Network/rollout blend weight for the weighted kinds.
    pub weight: F,
    pub seed: u64,
    /// Keep tree statistics between consecutive searches of one instance.
    pub reuse_tree: bool,
}

impl<F: Scalar> SearchConfig<F> {
    pub fn new(kind: EnhancementKind, simulations: usize, seed: u64) -> Self {
        SearchConfig {
            simulations,
            c: F::one(),
            equivalence: F::of_usize(simulations),
            kind,
            weight: F::of(0.5),
            seed,
            reuse_tree: false,
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if self.simulations == 0 {
            return Err(SearchError::InvalidConfig("m must be at least 1".into()));
        }
        if !(self.c > F::zero() && self.c.is_finite()) {
            return Err(SearchError::InvalidConfig("c must be positive".into()));
        }
        if !(self.equivalence > F::zero() && self.equivalence.is_finite()) {
            return Err(SearchError::InvalidConfig("equivalence must be positive".into()));
        }
        if !(self.weight >= F::zero() && self.weight <= F::one()) {
            return Err(SearchError::InvalidConfig("weight must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Probability per action id.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyVector<F>(pub Vec<F>);

impl<F: Scalar> PolicyVector<F> {
    pub fn as_slice(&self) -> &[F] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Highest-probability action; ties go to the lowest id.
    pub fn argmax(&self) -> Move {
        let mut best = 0;
        for (a, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = a;
            }
        }
        Move::new(best)
    }

    /// Draws an action proportionally to the probabilities.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Move {
        let total: f64 = self.0.iter().map(|p| p.as_f64()).sum();
        let mut target = rng.gen::<f64>() * total;
        let mut last = 0;
        for (a, &p) in self.0.iter().enumerate() {
            let p = p.as_f64();
            if p <= 0.0 {
                continue;
            }
            last = a;
            if target < p {
                return Move::new(a);
            }
            target -= p;
        }
        Move::new(last)
    }

    /// Non-negative, sums to one within `tol`, zero outside `legal_mask`.
    pub fn is_valid(&self, legal_mask: u64, tol: f64) -> bool {
        let mut sum = 0.0;
        for (a, &p) in self.0.iter().enumerate() {
            let p = p.as_f64();
            if !(p >= 0.0) {
                return false;
            }
            if legal_mask & (1u64 << a) == 0 && p != 0.0 {
                return false;
            }
            sum += p;
        }
        (sum - 1.0).abs() <= tol
    }
}

/// `Q + c·P·√N_total / (N + 1)`
#[inline]
pub fn puct<F: Scalar>(q: F, prior: F, n_total: u32, n: u32, c: F) -> F {
    q + c * prior * F::of(n_total as f64).sqrt() / F::of((n + 1) as f64)
}

/// Weight of the AMAF term: `√(equivalence / (3·n_total + equivalence))`.
#[inline]
pub fn rave_beta<F: Scalar>(n_total: u32, equivalence: F) -> F {
    (equivalence / (F::of(3.0 * n_total as f64) + equivalence)).sqrt()
}

/// Per-state visit statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeStats<F> {
    pub legal: u64,
    pub prior: Vec<F>,
    pub visits: Vec<u32>,
    pub q: Vec<F>,
    pub total: u32,
}

impl<F: Scalar> NodeStats<F> {
    /// Fresh statistics with priors renormalized over the legal moves.
    pub fn new(legal: u64, raw_prior: &[F]) -> Self {
        let size = raw_prior.len();
        let mut prior = vec![F::zero(); size];
        let mut sum = F::zero();
        for a in 0..size {
            if legal & (1u64 << a) != 0 && raw_prior[a] > F::zero() && raw_prior[a].is_finite() {
                prior[a] = raw_prior[a];
                sum += raw_prior[a];
            }
        }
        if sum > F::zero() {
            prior.iter_mut().for_each(|p| *p /= sum);
        } else {
            let n = F::of_usize(legal.count_ones() as usize);
            for (a, p) in prior.iter_mut().enumerate() {
                if legal & (1u64 << a) != 0 {
                    *p = F::one() / n;
                }
            }
        }
        NodeStats {
            legal,
            prior,
            visits: vec![0; size],
            q: vec![F::zero(); size],
            total: 0,
        }
    }

    pub fn puct_score(&self, a: Move, c: F) -> F {
        let i = a.index();
        puct(self.q[i], self.prior[i], self.total, self.visits[i], c)
    }

    /// Adds one backed-up value for action `a`.
    pub fn record(&mut self, a: Move, value: F) {
        let i = a.index();
        self.visits[i] += 1;
        self.total += 1;
        let q = self.q[i];
        self.q[i] = q + (value - q) / F::of(self.visits[i] as f64);
    }

    pub fn is_legal(&self, a: Move) -> bool {
        self.legal & (1u64 << a.index()) != 0
    }
}

/// Per-state AMAF statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RaveStats<F> {
    pub visits: Vec<u32>,
    pub q: Vec<F>,
    pub total: u32,
}

impl<F: Scalar> RaveStats<F> {
    pub fn new(size: usize) -> Self {
        RaveStats {
            visits: vec![0; size],
            q: vec![F::zero(); size],
            total: 0,
        }
    }

    /// `Q ← (N·Q + v)/(N + 1)`, `N ← N + 1`.
    pub fn record(&mut self, a: Move, value: F) {
        let i = a.index();
        let n = F::of(self.visits[i] as f64);
        self.q[i] = (n * self.q[i] + value) / (n + F::one());
        self.visits[i] += 1;
        self.total += 1;
    }

    /// `Q_rave + c·P·√N_rave(s,·) / (N_rave(s,a) + 1)`
    pub fn score(&self, a: Move, prior: F, c: F) -> F {
        let i = a.index();
        puct(self.q[i], prior, self.total, self.visits[i], c)
    }
}

/// `(1 − β)·U + β·U_rave` with β driven by the plain visit total.
pub fn uct_rave_score<F: Scalar>(
    stats: &NodeStats<F>,
    rave: &RaveStats<F>,
    a: Move,
    c: F,
    equivalence: F,
) -> F {
    let beta = rave_beta(stats.total, equivalence);
    blend_scores(stats, rave, a, c, beta)
}

fn blend_scores<F: Scalar>(
    stats: &NodeStats<F>,
    rave: &RaveStats<F>,
    a: Move,
    c: F,
    beta: F,
) -> F {
    let u = stats.puct_score(a, c);
    let u_rave = rave.score(a, stats.prior[a.index()], c);
    (F::one() - beta) * u + beta * u_rave
}

/// Picks the child to descend into. `beta_override` replaces the RAVE weight.
pub fn select_child<F: Scalar>(
    stats: &NodeStats<F>,
    rave: Option<&RaveStats<F>>,
    c: F,
    equivalence: F,
    beta_override: Option<F>,
) -> Move {
    let beta = beta_override.unwrap_or_else(|| rave_beta(stats.total, equivalence));
    let mut best: Option<(Move, F)> = None;
    for a in crate::game::mask_moves(stats.legal) {
        let score = match rave {
            Some(r) => blend_scores(stats, r, a, c, beta),
            None => stats.puct_score(a, c),
        };
        match best {
            Some((_, s)) if score <= s => {}
            _ => best = Some((a, score)),
        }
    }
    best.expect("expanded node has at least one legal move").0
}

/// One step of a simulation's root-to-leaf trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathStep {
    pub key: u128,
    /// Legal actions in the state at this step.
    pub legal: u64,
    pub action: Move,
}

/// Enumerates the AMAF credits of one simulation.
///
/// `leaf_value` is from the perspective of the player to move at the leaf,
/// which sits one ply below the last step. For each state `s_t1` on the path
/// and each action `a_t2` with `t2 ≥ t1`, legal in `s_t1` and not played in
/// `[t1, t2)`, `credit(key(s_t1), a_t2, v)` is called with `v` expressed from
/// `s_t1`'s side to move.
pub fn rave_update<F: Scalar>(path: &[PathStep], leaf_value: F, mut credit: impl FnMut(u128, Move, F)) {
    let len = path.len();
    for t1 in 0..len {
        let depth = len - t1;
        let value = if depth % 2 == 0 { leaf_value } else { -leaf_value };
        let legal = path[t1].legal;
        let mut seen = 0u64;
        for step in &path[t1..] {
            let bit = 1u64 << step.action.index();
            if seen & bit == 0 && legal & bit != 0 {
                credit(path[t1].key, step.action, value);
            }
            seen |= bit;
        }
    }
}

/// Plays uniformly random legal moves to the end; result for `state`'s side to move.
pub fn rollout_value<F: Scalar, R: Rng + ?Sized>(state: &GameState, rng: &mut R) -> F {
    let me = state.to_move();
    let mut s = *state;
    loop {
        if let Some(outcome) = s.terminal_value() {
            return F::of(outcome.value_for(me) as f64);
        }
        let mask = s.legal_mask();
        let k = rng.gen_range(0..mask.count_ones());
        s = s.play(nth_set_bit(mask, k));
    }
}

fn nth_set_bit(mut mask: u64, k: u32) -> Move {
    for _ in 0..k {
        mask &= mask - 1;
    }
    Move::new(mask.trailing_zeros() as usize)
}

/// Value of a freshly expanded leaf for the given kind.
///
/// Terminal leaves return the true result for every kind.
pub fn leaf_value<F: Scalar, R: Rng + ?Sized>(
    state: &GameState,
    kind: EnhancementKind,
    weight: F,
    network_value: F,
    rng: &mut R,
) -> F {
    if let Some(outcome) = state.terminal_value() {
        return F::of(outcome.value_for(state.to_move()) as f64);
    }
    match kind {
        EnhancementKind::Baseline | EnhancementKind::Rave => network_value,
        EnhancementKind::Rollout | EnhancementKind::Rora => rollout_value(state, rng),
        EnhancementKind::Wro | EnhancementKind::Wrora => {
            let rollout = rollout_value(state, rng);
            blend_values(network_value, rollout, weight)
        }
    }
}

/// `(1 − weight)·v_network + weight·v_rollout`
#[inline]
pub fn blend_values<F: Scalar>(network: F, rollout: F, weight: F) -> F {
    (F::one() - weight) * network + weight * rollout
}

#[derive(Debug, Clone)]
struct Node<F> {
    stats: NodeStats<F>,
    rave: RaveStats<F>,
    network_value: F,
}

/// A search tree for one player over one episode.
pub struct Mcts<F: Scalar> {
    cfg: SearchConfig<F>,
    nodes: HashMap<u128, Node<F>>,
    rng: ChaCha8Rng,
    path: Vec<PathStep>,
}

impl<F: Scalar> Mcts<F> {
    pub fn new(cfg: SearchConfig<F>) -> Result<Self, SearchError> {
        cfg.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(Mcts {
            cfg,
            nodes: HashMap::new(),
            rng,
            path: Vec::new(),
        })
    }

    pub fn config(&self) -> &SearchConfig<F> {
        &self.cfg
    }

    /// Changes the blend weight (the schedule may move between iterations).
    pub fn set_weight(&mut self, weight: F) {
        self.cfg.weight = weight;
    }

    /// Drops all statistics.
    pub fn reset(&mut self) {
        self.nodes.clear();
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn stats(&self, state: &GameState) -> Option<&NodeStats<F>> {
        self.nodes.get(&state.key()).map(|n| &n.stats)
    }

    pub fn rave_stats(&self, state: &GameState) -> Option<&RaveStats<F>> {
        self.nodes.get(&state.key()).map(|n| &n.rave)
    }

    /// Runs `m` simulations from `root` and returns visit proportions.
    pub fn search<E: Evaluator<F> + ?Sized>(
        &mut self,
        root: &GameState,
        eval: &E,
    ) -> Result<PolicyVector<F>, SearchError> {
        if root.is_terminal() {
            return Err(SearchError::TerminalRoot);
        }
        if !self.cfg.reuse_tree {
            self.nodes.clear();
        }
        let key = root.key();
        if !self.nodes.contains_key(&key) {
            self.expand(root, eval)?;
        }
        for _ in 0..self.cfg.simulations {
            self.simulate(root, eval)?;
        }
        let stats = &self.nodes[&key].stats;
        let total = F::of(stats.total as f64);
        Ok(PolicyVector(
            stats
                .visits
                .iter()
                .map(|&n| F::of(n as f64) / total)
                .collect(),
        ))
    }

    fn expand<E: Evaluator<F> + ?Sized>(
        &mut self,
        state: &GameState,
        eval: &E,
    ) -> Result<F, SearchError> {
        let evaluation = eval.evaluate(state)?;
        if evaluation.policy.len() != state.action_size() {
            return Err(SearchError::Evaluator(format!(
                "policy has {} entries, expected {}",
                evaluation.policy.len(),
                state.action_size()
            )));
        }
        if !evaluation.value.is_finite() {
            return Err(SearchError::Evaluator("non-finite value".into()));
        }
        let value = evaluation.value.max(-F::one()).min(F::one());
        let stats = NodeStats::new(state.legal_mask(), &evaluation.policy);
        self.nodes.insert(
            state.key(),
            Node {
                stats,
                rave: RaveStats::new(state.action_size()),
                network_value: value,
            },
        );
        Ok(value)
    }

    fn simulate<E: Evaluator<F> + ?Sized>(
        &mut self,
        root: &GameState,
        eval: &E,
    ) -> Result<(), SearchError> {
        let c = self.cfg.c;
        let equivalence = self.cfg.equivalence;
        let use_rave = self.cfg.kind.uses_rave();
        let mut path = std::mem::take(&mut self.path);
        path.clear();

        let mut state = *root;
        let leaf = loop {
            let key = state.key();
            let node = match self.nodes.get(&key) {
                Some(node) => node,
                None => {
                    let v_net = self.expand(&state, eval)?;
                    break leaf_value(&state, self.cfg.kind, self.cfg.weight, v_net, &mut self.rng);
                }
            };
            let rave = use_rave.then_some(&node.rave);
            let action = select_child(&node.stats, rave, c, equivalence, None);
            path.push(PathStep {
                key,
                legal: node.stats.legal,
                action,
            });
            state = state.play(action);
            if let Some(outcome) = state.terminal_value() {
                break F::of(outcome.value_for(state.to_move()) as f64);
            }
        };

        let mut value = leaf;
        for step in path.iter().rev() {
            value = -value;
            if let Some(node) = self.nodes.get_mut(&step.key) {
                node.stats.record(step.action, value);
            }
        }
        if use_rave {
            let nodes = &mut self.nodes;
            rave_update(&path, leaf, |key, a, v| {
                if let Some(node) = nodes.get_mut(&key) {
                    node.rave.record(a, v);
                }
            });
        }
        self.path = path;
        Ok(())
    }

    /// Network value cached at expansion time, if the state is in the tree.
    pub fn cached_network_value(&self, state: &GameState) -> Option<F> {
        self.nodes.get(&state.key()).map(|n| n.network_value)
    }
}
