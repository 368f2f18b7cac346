//! Transferable-utility games over input variables and their exact Shapley values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::impurity::{Impurity, ZERO_PROB};
use crate::info::{Assignment, JointDistribution, Target, VariableSubset};

/// Exact enumeration visits `2^p` coalitions.
pub const MAX_PLAYERS: usize = 20;

/// `v(empty)` must vanish to this precision.
pub const EMPTY_COALITION_TOLERANCE: f64 = 1e-12;

/// Tolerance used to detect null players and symmetric pairs by exhaustive scan.
pub const DETECTION_TOLERANCE: f64 = 1e-12;

pub const EFFICIENCY_TOLERANCE: f64 = 1e-9;
pub const AXIOM_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameKind {
    GlobalInfo,
    LocalInfo,
    GlobalVariance,
    LocalVariance,
    Custom,
}

impl GameKind {
    pub fn name(self) -> &'static str {
        match self {
            GameKind::GlobalInfo => "global-info",
            GameKind::LocalInfo => "local-info",
            GameKind::GlobalVariance => "global-variance",
            GameKind::LocalVariance => "local-variance",
            GameKind::Custom => "custom",
        }
    }
}

impl std::str::FromStr for GameKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "global-info" => GameKind::GlobalInfo,
            "local-info" => GameKind::LocalInfo,
            "global-variance" => GameKind::GlobalVariance,
            "local-variance" => GameKind::LocalVariance,
            "custom" => GameKind::Custom,
            other => return Err(Error::InvalidParameter(format!("unknown game `{other}`"))),
        })
    }
}

/// Characteristic function with every coalition value memoized.
#[derive(Clone, Debug)]
pub struct TUGame {
    p: usize,
    kind: GameKind,
    values: Vec<f64>,
}

impl TUGame {
    pub fn from_fn<F>(p: usize, kind: GameKind, v: F) -> Result<Self>
    where
        F: Fn(VariableSubset) -> f64 + Sync,
    {
        Self::try_from_fn(p, kind, |s| Ok(v(s)))
    }

    pub fn try_from_fn<F>(p: usize, kind: GameKind, v: F) -> Result<Self>
    where
        F: Fn(VariableSubset) -> Result<f64> + Sync,
    {
        if p > MAX_PLAYERS {
            return Err(Error::PlayerCountTooLarge(p));
        }
        let values = (0..1u32 << p)
            .into_par_iter()
            .map(|bits| v(VariableSubset::from_bits(bits)))
            .collect::<Result<Vec<f64>>>()?;
        Self::from_values(p, kind, values)
    }

    /// `values[mask]` is the worth of the coalition encoded by `mask`.
    pub fn from_values(p: usize, kind: GameKind, values: Vec<f64>) -> Result<Self> {
        if p > MAX_PLAYERS {
            return Err(Error::PlayerCountTooLarge(p));
        }
        if values.len() != 1 << p {
            return Err(Error::ShapeMismatch(format!(
                "{} coalition values for {p} players",
                values.len()
            )));
        }
        if values[0].abs() > EMPTY_COALITION_TOLERANCE {
            return Err(Error::NonZeroEmptyCoalition(values[0]));
        }
        Ok(TUGame { p, kind, values })
    }

    pub fn players(&self) -> usize {
        self.p
    }

    pub fn kind(&self) -> GameKind {
        self.kind
    }

    pub fn value(&self, s: VariableSubset) -> f64 {
        self.values[s.bits() as usize]
    }

    pub fn grand_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `v(S + m) - v(S)`.
    pub fn marginal_contribution(&self, m: usize, s: VariableSubset) -> f64 {
        self.value(s.with(m)) - self.value(s)
    }

    /// True when every marginal contribution of `m` vanishes.
    pub fn is_null_player(&self, m: usize) -> bool {
        coalitions_without(self.p, &[m]).all(|s| self.marginal_contribution(m, s).abs() < DETECTION_TOLERANCE)
    }

    pub fn are_symmetric(&self, i: usize, j: usize) -> bool {
        coalitions_without(self.p, &[i, j])
            .all(|s| (self.value(s.with(i)) - self.value(s.with(j))).abs() < DETECTION_TOLERANCE)
    }
}

/// Coalitions over `0..p` avoiding the listed players.
pub fn coalitions_without(p: usize, excluded: &[usize]) -> impl Iterator<Item = VariableSubset> {
    let forbidden = VariableSubset::from_indices(excluded).bits();
    (0..1u32 << p)
        .filter(move |bits| bits & forbidden == 0)
        .map(VariableSubset::from_bits)
}

/// Exact binomial coefficients `C(n, k)` for `n <= MAX_PLAYERS`, by Pascal's rule.
pub fn binomial_table(n: usize) -> Vec<Vec<u64>> {
    let mut rows: Vec<Vec<u64>> = vec![vec![1]];
    for i in 1..=n {
        let prev = &rows[i - 1];
        let mut row = vec![1u64; i + 1];
        for k in 1..i {
            row[k] = prev[k - 1] + prev[k];
        }
        rows.push(row);
    }
    rows
}

/// Shapley weights `k!(p-k-1)!/p! = 1 / (p * C(p-1, k))` for `k = 0..p`.
pub fn shapley_weights(p: usize) -> Vec<f64> {
    if p == 0 {
        return Vec::new();
    }
    let binom = binomial_table(p - 1);
    (0..p).map(|k| 1.0 / (p as f64 * binom[p - 1][k] as f64)).collect()
}

/// Payoff vector of a game.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapleyVector {
    pub payoffs: Vec<f64>,
    pub game_total: f64,
    pub game: GameKind,
}

#[derive(Serialize, Deserialize)]
struct ShapleyVectorJson {
    method: String,
    game: GameKind,
    payoffs: Vec<f64>,
    total: f64,
}

impl Serialize for ShapleyVector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ShapleyVectorJson {
            method: "shapley-exact".into(),
            game: self.game,
            payoffs: self.payoffs.clone(),
            total: self.game_total,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ShapleyVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = ShapleyVectorJson::deserialize(d)?;
        Ok(ShapleyVector {
            payoffs: raw.payoffs,
            game_total: raw.total,
            game: raw.game,
        })
    }
}

impl ShapleyVector {
    pub fn efficiency_residual(&self) -> f64 {
        (self.payoffs.iter().sum::<f64>() - self.game_total).abs()
    }
}

/// Shapley value by direct enumeration of every coalition.
pub fn shapley_exact(game: &TUGame) -> Result<ShapleyVector> {
    let p = game.p;
    if p > MAX_PLAYERS {
        return Err(Error::PlayerCountTooLarge(p));
    }
    if game.values[0].abs() > EMPTY_COALITION_TOLERANCE {
        return Err(Error::NonZeroEmptyCoalition(game.values[0]));
    }
    let weights = shapley_weights(p);
    let payoffs = (0..p)
        .into_par_iter()
        .map(|m| {
            coalitions_without(p, &[m])
                .map(|s| weights[s.len()] * game.marginal_contribution(m, s))
                .sum()
        })
        .collect();
    Ok(ShapleyVector {
        payoffs,
        game_total: game.grand_value(),
        game: game.kind,
    })
}

fn check_players(j: &JointDistribution) -> Result<()> {
    if j.p() > MAX_PLAYERS {
        return Err(Error::PlayerCountTooLarge(j.p()));
    }
    Ok(())
}

fn check_positive_instance(j: &JointDistribution, x: &[usize]) -> Result<()> {
    j.check_instance(x)?;
    if j.instance_prob(x) <= ZERO_PROB {
        return Err(Error::ZeroProbabilityInstance);
    }
    Ok(())
}

/// `v(S) = I(Y; S)`.
pub fn game_global_info(j: &JointDistribution) -> Result<TUGame> {
    check_players(j)?;
    TUGame::try_from_fn(j.p(), GameKind::GlobalInfo, |s| j.mutual_info(Target::Output, s))
}

/// `v(S) = H(Y) - H(Y | S = x_S)`; may be negative.
pub fn game_local_info(j: &JointDistribution, x: &[usize]) -> Result<TUGame> {
    check_players(j)?;
    check_positive_instance(j, x)?;
    local_game(j, x, Impurity::Entropy, GameKind::LocalInfo)
}

/// `v(S) = Var(Y) - E_S Var(Y | S)`.
pub fn game_global_variance(j: &JointDistribution) -> Result<TUGame> {
    check_players(j)?;
    global_game(j, Impurity::Variance, GameKind::GlobalVariance)
}

/// `v(S) = Var(Y) - Var(Y | S = x_S)`.
pub fn game_local_variance(j: &JointDistribution, x: &[usize]) -> Result<TUGame> {
    check_players(j)?;
    check_positive_instance(j, x)?;
    local_game(j, x, Impurity::Variance, GameKind::LocalVariance)
}

fn global_game(j: &JointDistribution, impurity: Impurity, kind: GameKind) -> Result<TUGame> {
    let root = j.mean_impurity(impurity, Target::Output, VariableSubset::empty())?;
    TUGame::try_from_fn(
        j.p(),
        kind,
        |s| Ok(root - j.mean_impurity(impurity, Target::Output, s)?),
    )
}

fn local_game(j: &JointDistribution, x: &[usize], impurity: Impurity, kind: GameKind) -> Result<TUGame> {
    let root = j.impurity_at(impurity, Target::Output, &Assignment::empty())?;
    TUGame::try_from_fn(j.p(), kind, |s| {
        let a = Assignment::from_instance(s, x);
        Ok(root - j.impurity_at(impurity, Target::Output, &a)?)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NullPlayerCheck {
    pub player: usize,
    pub payoff: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymmetryCheck {
    pub players: (usize, usize),
    pub payoff_difference: f64,
    pub pass: bool,
}

/// Per-axiom verdicts for a payoff vector of a game.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxiomReport {
    pub efficiency_residual: f64,
    pub efficiency_pass: bool,
    pub null_players: Vec<NullPlayerCheck>,
    pub symmetric_pairs: Vec<SymmetryCheck>,
}

impl AxiomReport {
    pub fn all_pass(&self) -> bool {
        self.efficiency_pass && self.null_players.iter().all(|c| c.pass) && self.symmetric_pairs.iter().all(|c| c.pass)
    }
}

pub fn check_axioms(game: &TUGame, vector: &ShapleyVector) -> AxiomReport {
    let p = game.players();
    let efficiency_residual = (vector.payoffs.iter().sum::<f64>() - game.grand_value()).abs();
    let null_players = (0..p)
        .filter(|&m| game.is_null_player(m))
        .map(|m| NullPlayerCheck {
            player: m,
            payoff: vector.payoffs[m],
            pass: vector.payoffs[m].abs() < AXIOM_TOLERANCE,
        })
        .collect();
    let mut symmetric_pairs = Vec::new();
    for i in 0..p {
        for k in i + 1..p {
            if game.are_symmetric(i, k) {
                let d = (vector.payoffs[i] - vector.payoffs[k]).abs();
                symmetric_pairs.push(SymmetryCheck {
                    players: (i, k),
                    payoff_difference: d,
                    pass: d < AXIOM_TOLERANCE,
                });
            }
        }
    }
    AxiomReport {
        efficiency_residual,
        efficiency_pass: efficiency_residual < EFFICIENCY_TOLERANCE,
        null_players,
        symmetric_pairs,
    }
}

/// Strong monotonicity for player `m` across two games on the same players.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotonicityCheck {
    pub player: usize,
    /// `MC_m^v(S) >= MC_m^w(S)` for every coalition.
    pub premise_holds: bool,
    pub payoff_v: f64,
    pub payoff_w: f64,
    /// `phi_v(m) >= phi_w(m)` (up to tolerance).
    pub conclusion_holds: bool,
}

pub fn check_strong_monotonicity(
    v: &TUGame,
    phi_v: &ShapleyVector,
    w: &TUGame,
    phi_w: &ShapleyVector,
    m: usize,
) -> Result<MonotonicityCheck> {
    if v.players() != w.players() {
        return Err(Error::ShapeMismatch("games have different players".into()));
    }
    let premise_holds = coalitions_without(v.players(), &[m])
        .all(|s| v.marginal_contribution(m, s) >= w.marginal_contribution(m, s) - DETECTION_TOLERANCE);
    Ok(MonotonicityCheck {
        player: m,
        premise_holds,
        payoff_v: phi_v.payoffs[m],
        payoff_w: phi_w.payoffs[m],
        conclusion_holds: phi_v.payoffs[m] >= phi_w.payoffs[m] - AXIOM_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Shapley value as the average marginal contribution over all player orderings.
    fn shapley_by_permutations(game: &TUGame) -> Vec<f64> {
        fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
            if items.len() <= 1 {
                return vec![items.to_vec()];
            }
            let mut out = Vec::new();
            for i in 0..items.len() {
                let mut rest = items.to_vec();
                let head = rest.remove(i);
                for mut tail in permutations(&rest) {
                    tail.insert(0, head);
                    out.push(tail);
                }
            }
            out
        }
        let p = game.players();
        let perms = permutations(&(0..p).collect::<Vec<_>>());
        let mut phi = vec![0.0; p];
        for order in &perms {
            let mut s = VariableSubset::empty();
            for &m in order {
                phi[m] += game.marginal_contribution(m, s);
                s = s.with(m);
            }
        }
        phi.iter().map(|v| v / perms.len() as f64).collect()
    }

    #[test]
    fn unanimity_game_splits_evenly() {
        let g = TUGame::from_fn(2, GameKind::Custom, |s| if s.len() == 2 { 1.0 } else { 0.0 }).unwrap();
        let phi = shapley_exact(&g).unwrap();
        assert_eq!(phi.payoffs, vec![0.5, 0.5]);
    }

    #[test]
    fn matches_permutation_definition() {
        // Glove-style game with an asymmetric twist.
        let g = TUGame::from_fn(4, GameKind::Custom, |s| {
            let left = s.contains(0) as u32 + s.contains(1) as u32;
            let right = s.contains(2) as u32 + s.contains(3) as u32;
            left.min(right) as f64 + if s.contains(3) { 0.3 } else { 0.0 }
        })
        .unwrap();
        let phi = shapley_exact(&g).unwrap();
        let oracle = shapley_by_permutations(&g);
        for (a, b) in phi.payoffs.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn null_player_gets_nothing() {
        let g = TUGame::from_fn(3, GameKind::Custom, |s| {
            (s.contains(0) as u32 * 2 + s.contains(1) as u32) as f64
        })
        .unwrap();
        let phi = shapley_exact(&g).unwrap();
        assert_eq!(phi.payoffs[2], 0.0);
        let report = check_axioms(&g, &phi);
        assert!(report.all_pass());
        assert_eq!(report.null_players.len(), 1);
        assert_eq!(report.null_players[0].player, 2);
    }

    #[test]
    fn rejects_nonzero_empty_coalition() {
        let r = TUGame::from_fn(2, GameKind::Custom, |_| 1.0);
        assert!(matches!(r, Err(Error::NonZeroEmptyCoalition(_))));
    }

    #[test]
    fn rejects_too_many_players() {
        let r = TUGame::from_fn(21, GameKind::Custom, |_| 0.0);
        assert!(matches!(r, Err(Error::PlayerCountTooLarge(21))));
    }

    #[test]
    fn weights_are_exact_reciprocals() {
        // 3 players: 1/3, 1/6, 1/3.
        let w = shapley_weights(3);
        assert_eq!(w, vec![1.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0]);
        let b = binomial_table(20);
        assert_eq!(b[20][10], 184_756);
    }

    #[test]
    fn json_shape() {
        let v = ShapleyVector {
            payoffs: vec![0.25, 0.75],
            game_total: 1.0,
            game: GameKind::GlobalInfo,
        };
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(
            s,
            r#"{"method":"shapley-exact","game":"global-info","payoffs":[0.25,0.75],"total":1.0}"#
        );
        let back: ShapleyVector = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn variance_game_on_copy_of_x1() {
        // Y = X1, X2 irrelevant, both uniform binary.
        let j = JointDistribution::new(vec![2, 2, 2], vec![0.25, 0.0, 0.25, 0.0, 0.0, 0.25, 0.0, 0.25]).unwrap();
        let g = game_global_variance(&j).unwrap();
        assert!((g.value(VariableSubset::singleton(0)) - 0.25).abs() < 1e-15);
        let phi = shapley_exact(&g).unwrap();
        assert!((phi.payoffs[0] - 0.25).abs() < 1e-15);
        assert!(phi.payoffs[1].abs() < 1e-15);
    }

    #[test]
    fn constant_output_gives_zero_game() {
        let j = JointDistribution::new(vec![2, 2], vec![0.5, 0.0, 0.5, 0.0]).unwrap();
        for g in [game_global_variance(&j).unwrap(), game_global_info(&j).unwrap()] {
            let phi = shapley_exact(&g).unwrap();
            assert!(phi.payoffs.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn local_game_needs_positive_instance() {
        let j = JointDistribution::new(vec![2, 2], vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert!(matches!(game_local_info(&j, &[1]), Err(Error::ZeroProbabilityInstance)));
    }
}
