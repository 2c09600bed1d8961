//! Mechanisms map a preference profile to a lottery over matchings.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{
    enumerate_matchings, find_permutation, is_stable, permute_matching, AgentId, Market, Matching,
    PreferenceProfile, Side,
};
use crate::prior::Prior;
use crate::rational::Rational;

/// A finite lottery over distinct matchings, canonical order, weights summing to one.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RandomMatching {
    outcomes: Vec<(Matching, Rational)>,
}

impl RandomMatching {
    /// Merges repeated matchings and drops zero weights before validating.
    pub fn new(entries: Vec<(Matching, Rational)>) -> Result<Self> {
        let mut merged: BTreeMap<Matching, Rational> = BTreeMap::new();
        for (m, w) in entries {
            if w.is_negative() {
                return Err(Error::Invalid(format!("negative weight {w} on {m}")));
            }
            *merged.entry(m).or_insert_with(Rational::zero) += w;
        }
        let outcomes: Vec<(Matching, Rational)> = merged.into_iter().filter(|(_, w)| !w.is_zero()).collect();
        if outcomes.is_empty() {
            return Err(Error::Invalid("random matching has no outcomes".into()));
        }
        let market = outcomes[0].0.market();
        if outcomes.iter().any(|(m, _)| m.market() != market) {
            return Err(Error::Invalid("random matching mixes markets".into()));
        }
        let total: Rational = outcomes.iter().map(|(_, w)| w).sum();
        if !total.is_one() {
            return Err(Error::Invalid(format!("random matching weights sum to {total}, not 1")));
        }
        Ok(RandomMatching { outcomes })
    }

    pub fn point(matching: Matching) -> Self {
        RandomMatching { outcomes: vec![(matching, Rational::one())] }
    }

    pub fn uniform(matchings: &[Matching]) -> Result<Self> {
        if matchings.is_empty() {
            return Err(Error::Invalid("uniform lottery over nothing".into()));
        }
        let w = Rational::new(1, matchings.len() as i64);
        Self::new(matchings.iter().map(|m| (m.clone(), w.clone())).collect())
    }

    pub fn outcomes(&self) -> &[(Matching, Rational)] {
        &self.outcomes
    }

    pub fn market(&self) -> Market {
        self.outcomes[0].0.market()
    }

    pub fn is_point(&self) -> bool {
        self.outcomes.len() == 1
    }

    /// Probability that `agent` ends up with `partner` (itself = single).
    pub fn prob_partner(&self, agent: AgentId, partner: AgentId) -> Rational {
        self.outcomes.iter().filter(|(m, _)| m.partner(agent) == partner).map(|(_, w)| w).sum()
    }

    /// Probability mass on each rank `1..=|S|` for one agent at one profile (index 0 = rank 1).
    pub fn rank_masses(&self, profile: &PreferenceProfile, agent: AgentId) -> Vec<Rational> {
        let mut mass = vec![Rational::zero(); profile.market().domain_size(agent.side)];
        for (m, w) in &self.outcomes {
            mass[profile.rank_under(agent, m) - 1] += w;
        }
        mass
    }

    pub fn is_internal_to(&self, coalition: &[AgentId]) -> bool {
        self.outcomes.iter().all(|(m, _)| m.is_internal_to(coalition))
    }

    pub fn map_matchings(&self, f: impl Fn(&Matching) -> Result<Matching>) -> Result<Self> {
        Self::new(self.outcomes.iter().map(|(m, w)| Ok((f(m)?, w.clone()))).collect::<Result<Vec<_>>>()?)
    }
}

impl fmt::Display for RandomMatching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.outcomes.iter().map(|(m, w)| format!("{w}: {m}")).collect();
        write!(f, "[{}]", parts.join("; "))
    }
}

#[derive(Serialize, Deserialize)]
struct OutcomeJson {
    matching: Matching,
    weight: Rational,
}

impl Serialize for RandomMatching {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let list: Vec<OutcomeJson> = self
            .outcomes
            .iter()
            .map(|(m, w)| OutcomeJson { matching: m.clone(), weight: w.clone() })
            .collect();
        list.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RandomMatching {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let list = Vec::<OutcomeJson>::deserialize(deserializer)?;
        RandomMatching::new(list.into_iter().map(|o| (o.matching, o.weight)).collect())
            .map_err(serde::de::Error::custom)
    }
}

/// Gale–Shapley with the given side proposing. Nobody is ever held below their self rank.
pub fn deferred_acceptance(profile: &PreferenceProfile, proposing: Side) -> Matching {
    let market = profile.market();
    let receiving = proposing.opposite();
    let n_prop = market.side_size(proposing);
    let n_recv = market.side_size(receiving);
    let orders: Vec<Vec<AgentId>> =
        (0..n_prop).map(|i| profile.ranking(AgentId { side: proposing, index: i }).order()).collect();
    let mut next = vec![0usize; n_prop];
    let mut held: Vec<Option<usize>> = vec![None; n_recv];
    let mut free: Vec<usize> = (0..n_prop).rev().collect();
    while let Some(i) = free.pop() {
        let me = AgentId { side: proposing, index: i };
        let Some(&target) = orders[i].get(next[i]) else { continue };
        next[i] += 1;
        if target == me {
            // Reached the outside option: stays single.
            continue;
        }
        let r = profile.ranking(target);
        let my_rank = r.rank_of_partner(Some(i));
        if my_rank > r.self_rank() {
            free.push(i);
            continue;
        }
        match held[target.index] {
            None => held[target.index] = Some(i),
            Some(current) if my_rank < r.rank_of_partner(Some(current)) => {
                held[target.index] = Some(i);
                free.push(current);
            }
            Some(_) => free.push(i),
        }
    }
    let pairs: Vec<(usize, usize)> = held
        .iter()
        .enumerate()
        .filter_map(|(j, p)| p.map(|i| match proposing {
            Side::Man => (i, j),
            Side::Woman => (j, i),
        }))
        .collect();
    Matching::from_pairs(market, &pairs).expect("deferred acceptance yields a matching")
}

fn matching_cache() -> &'static Mutex<HashMap<Market, Arc<Vec<Matching>>>> {
    static CACHE: OnceLock<Mutex<HashMap<Market, Arc<Vec<Matching>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Memoized [`enumerate_matchings`].
pub fn all_matchings(market: Market) -> Result<Arc<Vec<Matching>>> {
    if let Some(found) = matching_cache().lock().expect("matching cache poisoned").get(&market) {
        return Ok(found.clone());
    }
    let list = Arc::new(enumerate_matchings(market)?);
    matching_cache().lock().expect("matching cache poisoned").insert(market, list.clone());
    Ok(list)
}

/// Matchings of maximum cardinality (the perfect matchings in a balanced market).
pub fn maximum_matchings(market: Market) -> Result<Vec<Matching>> {
    let all = all_matchings(market)?;
    let size = market.num_men.min(market.num_women);
    Ok(all.iter().filter(|m| m.size() == size).cloned().collect())
}

/// All stable matchings at `profile`, canonical order.
pub fn stable_set(profile: &PreferenceProfile) -> Result<Vec<Matching>> {
    Ok(all_matchings(profile.market())?.iter().filter(|m| is_stable(profile, m)).cloned().collect())
}

/// The kind tag of a mechanism.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MechanismKind {
    DaMen,
    DaWomen,
    UniformRandom,
    UniformRandomFull,
    RandomStable,
    Table,
    Example2Deviation(Box<MechanismKind>),
    Custom(String),
}

type Evaluator = dyn Fn(&PreferenceProfile) -> Result<RandomMatching> + Send + Sync;

#[derive(Clone)]
pub struct CustomMechanism {
    name: String,
    eval: Arc<Evaluator>,
}

impl fmt::Debug for CustomMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Custom({})", self.name)
    }
}

#[derive(Debug, Clone)]
pub struct TableMechanism {
    entries: BTreeMap<PreferenceProfile, RandomMatching>,
    default: Box<Mechanism>,
}

/// A clearing-house mechanism. Evaluation is a pure function of the profile.
#[derive(Debug, Clone)]
pub enum Mechanism {
    DeferredAcceptance(Side),
    /// Uniform over every matching of the market.
    UniformRandom,
    /// Uniform over the maximum-cardinality matchings.
    UniformRandomFull,
    /// Uniform over the stable set.
    RandomStable,
    Table(TableMechanism),
    /// On relabelings of `base_profile` by σ, returns σ{m1w2, m2w1, m3w3}; elsewhere defers to `base`.
    Example2Deviation { base: Box<Mechanism>, base_profile: PreferenceProfile },
    Custom(CustomMechanism),
}

impl Mechanism {
    pub fn da_men() -> Self {
        Mechanism::DeferredAcceptance(Side::Man)
    }

    pub fn da_women() -> Self {
        Mechanism::DeferredAcceptance(Side::Woman)
    }

    pub fn custom(
        name: impl Into<String>,
        eval: impl Fn(&PreferenceProfile) -> Result<RandomMatching> + Send + Sync + 'static,
    ) -> Self {
        Mechanism::Custom(CustomMechanism { name: name.into(), eval: Arc::new(eval) })
    }

    pub fn kind(&self) -> MechanismKind {
        match self {
            Mechanism::DeferredAcceptance(Side::Man) => MechanismKind::DaMen,
            Mechanism::DeferredAcceptance(Side::Woman) => MechanismKind::DaWomen,
            Mechanism::UniformRandom => MechanismKind::UniformRandom,
            Mechanism::UniformRandomFull => MechanismKind::UniformRandomFull,
            Mechanism::RandomStable => MechanismKind::RandomStable,
            Mechanism::Table(_) => MechanismKind::Table,
            Mechanism::Example2Deviation { base, .. } => MechanismKind::Example2Deviation(Box::new(base.kind())),
            Mechanism::Custom(c) => MechanismKind::Custom(c.name.clone()),
        }
    }

    pub fn name(&self) -> String {
        match self.kind() {
            MechanismKind::DaMen => "da-men".into(),
            MechanismKind::DaWomen => "da-women".into(),
            MechanismKind::UniformRandom => "uniform-random".into(),
            MechanismKind::UniformRandomFull => "uniform-random-full".into(),
            MechanismKind::RandomStable => "random-stable".into(),
            MechanismKind::Table => "table".into(),
            MechanismKind::Example2Deviation(_) => {
                let Mechanism::Example2Deviation { base, .. } = self else { unreachable!() };
                format!("example2-deviation({})", base.name())
            }
            MechanismKind::Custom(name) => name,
        }
    }

    pub fn evaluate(&self, profile: &PreferenceProfile) -> Result<RandomMatching> {
        let market = profile.market();
        match self {
            Mechanism::DeferredAcceptance(side) => Ok(RandomMatching::point(deferred_acceptance(profile, *side))),
            Mechanism::UniformRandom => RandomMatching::uniform(&all_matchings(market)?),
            Mechanism::UniformRandomFull => RandomMatching::uniform(&maximum_matchings(market)?),
            Mechanism::RandomStable => RandomMatching::uniform(&stable_set(profile)?),
            Mechanism::Table(t) => match t.entries.get(profile) {
                Some(rm) => Ok(rm.clone()),
                None => t.default.evaluate(profile),
            },
            Mechanism::Example2Deviation { base, base_profile } => {
                match find_permutation(profile, base_profile) {
                    Some(sigma) => {
                        let swapped = Matching::from_pairs(market, &[(0, 1), (1, 0), (2, 2)])?;
                        Ok(RandomMatching::point(permute_matching(&swapped, &sigma)?))
                    }
                    None => base.evaluate(profile),
                }
            }
            Mechanism::Custom(c) => {
                let rm = (c.eval)(profile)?;
                if rm.market() != market {
                    return Err(Error::Invalid(format!("mechanism {} returned a matching for another market", c.name)));
                }
                Ok(rm)
            }
        }
    }

    /// Evaluates on every support profile, in support order.
    pub fn evaluate_support(&self, prior: &Prior) -> Result<Vec<RandomMatching>> {
        prior.support().iter().map(|(p, _)| self.evaluate(p)).collect()
    }
}

pub fn uniform_random_mechanism() -> Mechanism {
    Mechanism::UniformRandom
}

pub fn uniform_random_full() -> Mechanism {
    Mechanism::UniformRandomFull
}

pub fn random_stable_mechanism() -> Mechanism {
    Mechanism::RandomStable
}

/// Overrides `default` on the listed profiles. Entries must be over the profile's market.
pub fn table_mechanism(entries: Vec<(PreferenceProfile, RandomMatching)>, default: Mechanism) -> Result<Mechanism> {
    let mut map = BTreeMap::new();
    for (p, rm) in entries {
        if rm.market() != p.market() {
            return Err(Error::Invalid(format!("table entry at {p} is over a different market")));
        }
        if map.insert(p, rm).is_some() {
            return Err(Error::Invalid("table lists a profile twice".into()));
        }
    }
    Ok(Mechanism::Table(TableMechanism { entries: map, default: Box::new(default) }))
}

pub fn example2_deviation(base: Mechanism, base_profile: PreferenceProfile) -> Result<Mechanism> {
    if base_profile.market() != Market::square(3) {
        return Err(Error::Domain("the relabeling deviation is defined on 3x3 markets".into()));
    }
    Ok(Mechanism::Example2Deviation { base: Box::new(base), base_profile })
}

/// Distribution of the rank one agent gives its partner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankDistribution {
    pub agent: AgentId,
    /// `mass[k]` is the probability of rank `k + 1`.
    pub mass: Vec<Rational>,
}

impl RankDistribution {
    pub fn new(agent: AgentId, mass: Vec<Rational>) -> Result<Self> {
        if mass.is_empty() || mass.iter().any(|m| m.is_negative()) {
            return Err(Error::Invalid("rank masses must be non-negative".into()));
        }
        let total: Rational = mass.iter().sum();
        if !total.is_one() {
            return Err(Error::Invalid(format!("rank masses sum to {total}, not 1")));
        }
        Ok(RankDistribution { agent, mass })
    }

    /// Normalizes unnormalized rank weights.
    pub fn from_weights(agent: AgentId, weights: Vec<Rational>) -> Result<Self> {
        let total: Rational = weights.iter().sum();
        if !total.is_positive() {
            return Err(Error::ZeroMassEvent);
        }
        Self::new(agent, weights.into_iter().map(|w| w / &total).collect())
    }

    pub fn point(agent: AgentId, rank: usize, domain: usize) -> Self {
        let mut mass = vec![Rational::zero(); domain];
        mass[rank - 1] = Rational::one();
        RankDistribution { agent, mass }
    }

    /// `cdf[k] = Pr(rank <= k + 1)`.
    pub fn cdf(&self) -> Vec<Rational> {
        let mut acc = Rational::zero();
        self.mass
            .iter()
            .map(|m| {
                acc += m;
                acc.clone()
            })
            .collect()
    }

    pub fn domain(&self) -> usize {
        self.mass.len()
    }
}

impl fmt::Display for RankDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.mass.iter().map(|m| m.to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// `mass(n) = Σ_P ψ(P) · Pr_{μ~φ(P)}(P_agent(μ(agent)) = n)`.
pub fn rank_distribution(mechanism: &Mechanism, prior: &Prior, agent: AgentId) -> Result<RankDistribution> {
    prior.market().check_agent(agent)?;
    let mut mass = vec![Rational::zero(); prior.market().domain_size(agent.side)];
    for (p, w) in prior.support() {
        let rm = mechanism.evaluate(p)?;
        for (k, m) in rm.rank_masses(p, agent).into_iter().enumerate() {
            if !m.is_zero() {
                mass[k] += w * m;
            }
        }
    }
    RankDistribution::new(agent, mass)
}

/// Cardinal utility over an agent's domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtilityFunction {
    agent: AgentId,
    /// Indexed by opposite-side agent; the last entry is the utility of staying single.
    values: Vec<Rational>,
}

impl UtilityFunction {
    pub fn new(market: Market, agent: AgentId, values: &[(AgentId, Rational)]) -> Result<Self> {
        market.check_agent(agent)?;
        let opp = market.side_size(agent.side.opposite());
        let mut slots: Vec<Option<Rational>> = vec![None; opp + 1];
        for (who, u) in values {
            let slot = if *who == agent {
                opp
            } else if who.side == agent.side.opposite() && who.index < opp {
                who.index
            } else {
                return Err(Error::Domain(format!("{who} is not in the domain of {agent}")));
            };
            slots[slot] = Some(u.clone());
        }
        let values = slots
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Invalid(format!("utility for {agent} must cover its whole domain")))?;
        Ok(UtilityFunction { agent, values })
    }

    pub fn agent(&self) -> AgentId {
        self.agent
    }

    pub fn of(&self, outcome: AgentId) -> &Rational {
        if outcome == self.agent {
            self.values.last().expect("non-empty")
        } else {
            &self.values[outcome.index]
        }
    }
}

/// Expected utility, accumulated per realized partner.
pub fn expected_utility(
    mechanism: &Mechanism,
    prior: &Prior,
    agent: AgentId,
    utility: &UtilityFunction,
) -> Result<Rational> {
    if utility.agent != agent || utility.values.len() != prior.market().domain_size(agent.side) {
        return Err(Error::Domain(format!("utility function does not belong to {agent}")));
    }
    let mut total = Rational::zero();
    for (p, w) in prior.support() {
        for (m, mw) in mechanism.evaluate(p)?.outcomes() {
            total += w * mw * utility.of(m.partner(agent));
        }
    }
    Ok(total)
}

#[derive(Serialize, Deserialize)]
struct TableEntryJson {
    profile: PreferenceProfile,
    outcome: RandomMatching,
}

/// External mechanism descriptor.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum MechanismJson {
    DaMen,
    DaWomen,
    UniformRandom,
    UniformRandomFull,
    RandomStable,
    Table { entries: Vec<TableEntryJson>, default: Box<MechanismJson> },
    Example2Deviation { base: Box<MechanismJson>, base_profile: PreferenceProfile },
}

impl MechanismJson {
    fn into_mechanism(self) -> Result<Mechanism> {
        Ok(match self {
            MechanismJson::DaMen => Mechanism::da_men(),
            MechanismJson::DaWomen => Mechanism::da_women(),
            MechanismJson::UniformRandom => Mechanism::UniformRandom,
            MechanismJson::UniformRandomFull => Mechanism::UniformRandomFull,
            MechanismJson::RandomStable => Mechanism::RandomStable,
            MechanismJson::Table { entries, default } => table_mechanism(
                entries.into_iter().map(|e| (e.profile, e.outcome)).collect(),
                default.into_mechanism()?,
            )?,
            MechanismJson::Example2Deviation { base, base_profile } => {
                example2_deviation(base.into_mechanism()?, base_profile)?
            }
        })
    }

    fn from_mechanism(m: &Mechanism) -> Result<Self> {
        Ok(match m {
            Mechanism::DeferredAcceptance(Side::Man) => MechanismJson::DaMen,
            Mechanism::DeferredAcceptance(Side::Woman) => MechanismJson::DaWomen,
            Mechanism::UniformRandom => MechanismJson::UniformRandom,
            Mechanism::UniformRandomFull => MechanismJson::UniformRandomFull,
            Mechanism::RandomStable => MechanismJson::RandomStable,
            Mechanism::Table(t) => MechanismJson::Table {
                entries: t
                    .entries
                    .iter()
                    .map(|(p, o)| TableEntryJson { profile: p.clone(), outcome: o.clone() })
                    .collect(),
                default: Box::new(Self::from_mechanism(&t.default)?),
            },
            Mechanism::Example2Deviation { base, base_profile } => MechanismJson::Example2Deviation {
                base: Box::new(Self::from_mechanism(base)?),
                base_profile: base_profile.clone(),
            },
            Mechanism::Custom(c) => {
                return Err(Error::Invalid(format!("custom mechanism {} has no JSON form", c.name)))
            }
        })
    }
}

impl Mechanism {
    pub fn from_json_str(text: &str) -> Result<Mechanism> {
        let raw: MechanismJson = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        raw.into_mechanism()
    }

    pub fn to_json_value(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(MechanismJson::from_mechanism(self)?).expect("mechanism serializes"))
    }

    /// Built-in mechanism by its descriptor name (`da-men`, `random-stable`, ...).
    pub fn builtin(name: &str) -> Option<Mechanism> {
        Some(match name {
            "da-men" => Mechanism::da_men(),
            "da-women" => Mechanism::da_women(),
            "uniform-random" => Mechanism::UniformRandom,
            "uniform-random-full" => Mechanism::UniformRandomFull,
            "random-stable" => Mechanism::RandomStable,
            _ => return None,
        })
    }
}
