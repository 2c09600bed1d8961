//! Coalitions, deviation mechanisms and blocking witnesses.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{AgentId, Market, Matching, PreferenceProfile, Ranking, Side};
use crate::mechanism::{RandomMatching, RankDistribution};
use crate::rational::Rational;
use crate::stability::fosd::DominanceVerdict;

/// A non-empty set of agents, kept sorted (men first, then by index).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Coalition {
    members: Vec<AgentId>,
}

impl Coalition {
    pub fn new(members: impl IntoIterator<Item = AgentId>) -> Result<Self> {
        let members: Vec<AgentId> = members.into_iter().sorted().dedup().collect();
        if members.is_empty() {
            return Err(Error::Invalid("a coalition needs at least one member".into()));
        }
        Ok(Coalition { members })
    }

    pub fn in_market(market: Market, members: impl IntoIterator<Item = AgentId>) -> Result<Self> {
        let c = Self::new(members)?;
        for &a in &c.members {
            market.check_agent(a)?;
        }
        Ok(c)
    }

    pub fn grand(market: Market) -> Self {
        Coalition { members: market.agents().collect() }
    }

    pub fn pair(man: usize, woman: usize) -> Self {
        Coalition { members: vec![AgentId::man(man), AgentId::woman(woman)] }
    }

    pub fn members(&self) -> &[AgentId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, agent: AgentId) -> bool {
        self.members.binary_search(&agent).is_ok()
    }

    pub fn position(&self, agent: AgentId) -> Option<usize> {
        self.members.binary_search(&agent).ok()
    }

    /// At most one man and at most one woman.
    pub fn is_pairwise(&self) -> bool {
        let men = self.members.iter().filter(|a| a.side == Side::Man).count();
        men <= 1 && self.members.len() - men <= 1
    }

    pub fn is_grand(&self, market: Market) -> bool {
        self.members.len() == market.num_agents()
    }
}

/// Smaller coalitions first, then lexicographic in member order.
impl Ord for Coalition {
    fn cmp(&self, other: &Self) -> Ordering {
        self.members.len().cmp(&other.members.len()).then_with(|| self.members.cmp(&other.members))
    }
}

impl PartialOrd for Coalition {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.members.iter().join(", "))
    }
}

impl Serialize for Coalition {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.members.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Coalition {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        Coalition::new(Vec::<AgentId>::deserialize(deserializer)?).map_err(serde::de::Error::custom)
    }
}

/// Every coalition with at most `max_size` members, by size and then lexicographically.
pub fn coalitions_up_to(market: Market, max_size: usize) -> impl Iterator<Item = Coalition> {
    let agents: Vec<AgentId> = market.agents().collect();
    let top = max_size.min(agents.len());
    (1..=top).flat_map(move |k| {
        agents.clone().into_iter().combinations(k).map(|members| Coalition { members }).collect::<Vec<_>>()
    })
}

/// Singletons, then every man–woman pair.
pub fn pairwise_coalitions(market: Market) -> Vec<Coalition> {
    let mut out: Vec<Coalition> = market.agents().map(|a| Coalition { members: vec![a] }).collect();
    for m in 0..market.num_men {
        for w in 0..market.num_women {
            out.push(Coalition::pair(m, w));
        }
    }
    out
}

/// What a deviation does at profiles none of its rules cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fallback {
    /// Reproduce the audited mechanism's lottery.
    Mimic,
    /// Leave everyone unmatched.
    StaySingle,
}

/// A deviation mechanism for a coalition.
///
/// Rules are keyed by the members' rankings (in coalition order): the
/// deviation reads only its members' reports. When `restricted_to` is set,
/// rules apply only on those profiles and the fallback everywhere else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deviation {
    market: Market,
    coalition: Coalition,
    rules: BTreeMap<Vec<Ranking>, RandomMatching>,
    restricted_to: Option<BTreeSet<PreferenceProfile>>,
    fallback: Fallback,
}

impl Deviation {
    pub fn new(
        market: Market,
        coalition: Coalition,
        rules: BTreeMap<Vec<Ranking>, RandomMatching>,
        restricted_to: Option<BTreeSet<PreferenceProfile>>,
        fallback: Fallback,
    ) -> Result<Self> {
        for &a in coalition.members() {
            market.check_agent(a)?;
        }
        for (key, outcome) in &rules {
            let owners_ok = key.len() == coalition.len()
                && key.iter().zip(coalition.members()).all(|(r, &a)| r.owner() == a && r.domain_size() == market.domain_size(a.side));
            if !owners_ok {
                return Err(Error::Invalid(format!("deviation rule key does not match coalition {coalition}")));
            }
            if outcome.market() != market {
                return Err(Error::Invalid("deviation rule is over a different market".into()));
            }
        }
        if let Some(set) = &restricted_to {
            if set.iter().any(|p| p.market() != market) {
                return Err(Error::Invalid("deviation restriction lists a profile of another market".into()));
            }
        }
        Ok(Deviation { market, coalition, rules, restricted_to, fallback })
    }

    pub fn market(&self) -> Market {
        self.market
    }

    pub fn coalition(&self) -> &Coalition {
        &self.coalition
    }

    pub fn rules(&self) -> &BTreeMap<Vec<Ranking>, RandomMatching> {
        &self.rules
    }

    pub fn restricted_to(&self) -> Option<&BTreeSet<PreferenceProfile>> {
        self.restricted_to.as_ref()
    }

    pub fn fallback(&self) -> Fallback {
        self.fallback
    }

    /// The rule in force at `profile`, if any.
    pub fn rule_at(&self, profile: &PreferenceProfile) -> Option<&RandomMatching> {
        if let Some(set) = &self.restricted_to {
            if !set.contains(profile) {
                return None;
            }
        }
        self.rules.get(&profile.restrict(self.coalition.members()))
    }

    /// The deviation's lottery at `profile`, given the audited mechanism's lottery there.
    pub fn evaluate(&self, profile: &PreferenceProfile, audited: &RandomMatching) -> RandomMatching {
        match self.rule_at(profile) {
            Some(rm) => rm.clone(),
            None => match self.fallback {
                Fallback::Mimic => audited.clone(),
                Fallback::StaySingle => RandomMatching::point(Matching::empty(self.market)),
            },
        }
    }
}

/// Per-agent evidence of an ex-ante (or ex-post) block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentEvidence {
    pub agent: AgentId,
    pub before: RankDistribution,
    pub after: RankDistribution,
    pub verdict: DominanceVerdict,
}

/// Coalition, deviation and per-member dominance evidence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockWitness {
    pub coalition: Coalition,
    pub deviation: Deviation,
    pub per_agent: Vec<AgentEvidence>,
}

/// Conditional evidence for one agent and one of its types.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeEvidence {
    pub agent: AgentId,
    pub ranking: Ranking,
    /// Prior mass of the event: this agent has `ranking`, every other member a consenting type.
    pub event_mass: Rational,
    pub before: RankDistribution,
    pub after: RankDistribution,
    pub verdict: DominanceVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterimWitness {
    pub coalition: Coalition,
    /// The consenting types of each member.
    pub type_sets: BTreeMap<AgentId, BTreeSet<Ranking>>,
    pub deviation: Deviation,
    /// One entry per consenting type; all strict.
    pub per_type: Vec<TypeEvidence>,
    /// Positive-mass non-consenting types; none strict.
    pub excluded: Vec<TypeEvidence>,
}

impl InterimWitness {
    pub fn event_mass(&self, agent: AgentId, ranking: &Ranking) -> Option<&Rational> {
        self.per_type.iter().find(|e| e.agent == agent && &e.ranking == ranking).map(|e| &e.event_mass)
    }
}

// JSON forms. Rankings are written as best-first key lists ("self" for the owner);
// reading them back needs the market, which each witness carries.

type RankingKeys = BTreeMap<AgentId, Vec<String>>;

#[derive(Serialize, Deserialize)]
struct RuleJson {
    rankings: RankingKeys,
    outcome: RandomMatching,
}

#[derive(Serialize, Deserialize)]
struct DeviationJson {
    coalition: Coalition,
    rules: Vec<RuleJson>,
    restricted_to: Option<Vec<PreferenceProfile>>,
    fallback: Fallback,
}

#[derive(Serialize, Deserialize)]
struct TypeEvidenceJson {
    agent: AgentId,
    ranking: Vec<String>,
    event_mass: Rational,
    before: RankDistribution,
    after: RankDistribution,
    verdict: DominanceVerdict,
}

#[derive(Serialize, Deserialize)]
struct BlockWitnessJson {
    market: Market,
    coalition: Coalition,
    deviation: DeviationJson,
    per_agent: Vec<AgentEvidence>,
}

#[derive(Serialize, Deserialize)]
struct InterimWitnessJson {
    market: Market,
    coalition: Coalition,
    type_sets: BTreeMap<AgentId, Vec<Vec<String>>>,
    deviation: DeviationJson,
    per_type: Vec<TypeEvidenceJson>,
    excluded: Vec<TypeEvidenceJson>,
}

impl Deviation {
    fn to_json(&self) -> DeviationJson {
        DeviationJson {
            coalition: self.coalition.clone(),
            rules: self
                .rules
                .iter()
                .map(|(key, outcome)| RuleJson {
                    rankings: key.iter().map(|r| (r.owner(), r.to_keys())).collect(),
                    outcome: outcome.clone(),
                })
                .collect(),
            restricted_to: self.restricted_to.as_ref().map(|s| s.iter().cloned().collect()),
            fallback: self.fallback,
        }
    }

    fn from_json(market: Market, raw: DeviationJson) -> Result<Self> {
        let mut rules = BTreeMap::new();
        for rule in raw.rules {
            let key = raw
                .coalition
                .members()
                .iter()
                .map(|&a| {
                    let keys = rule
                        .rankings
                        .get(&a)
                        .ok_or_else(|| Error::Invalid(format!("deviation rule is missing {a}")))?;
                    Ranking::from_keys(a, market, keys)
                })
                .collect::<Result<Vec<_>>>()?;
            if rules.insert(key, rule.outcome).is_some() {
                return Err(Error::Invalid("deviation lists the same rule twice".into()));
            }
        }
        let restricted_to = raw.restricted_to.map(|v| v.into_iter().collect());
        Deviation::new(market, raw.coalition, rules, restricted_to, raw.fallback)
    }
}

impl TypeEvidence {
    fn to_json(&self) -> TypeEvidenceJson {
        TypeEvidenceJson {
            agent: self.agent,
            ranking: self.ranking.to_keys(),
            event_mass: self.event_mass.clone(),
            before: self.before.clone(),
            after: self.after.clone(),
            verdict: self.verdict.clone(),
        }
    }

    fn from_json(market: Market, raw: TypeEvidenceJson) -> Result<Self> {
        Ok(TypeEvidence {
            agent: raw.agent,
            ranking: Ranking::from_keys(raw.agent, market, &raw.ranking)?,
            event_mass: raw.event_mass,
            before: raw.before,
            after: raw.after,
            verdict: raw.verdict,
        })
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

impl BlockWitness {
    pub fn to_json_value(&self) -> serde_json::Value {
        let raw = BlockWitnessJson {
            market: self.deviation.market,
            coalition: self.coalition.clone(),
            deviation: self.deviation.to_json(),
            per_agent: self.per_agent.clone(),
        };
        serde_json::to_value(raw).expect("witness serializes")
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        Self::from_raw(serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_raw(parse_json(text)?)
    }

    fn from_raw(raw: BlockWitnessJson) -> Result<Self> {
        Ok(BlockWitness {
            coalition: raw.coalition,
            deviation: Deviation::from_json(raw.market, raw.deviation)?,
            per_agent: raw.per_agent,
        })
    }
}

impl InterimWitness {
    pub fn to_json_value(&self) -> serde_json::Value {
        let raw = InterimWitnessJson {
            market: self.deviation.market,
            coalition: self.coalition.clone(),
            type_sets: self
                .type_sets
                .iter()
                .map(|(a, set)| (*a, set.iter().map(|r| r.to_keys()).collect()))
                .collect(),
            deviation: self.deviation.to_json(),
            per_type: self.per_type.iter().map(TypeEvidence::to_json).collect(),
            excluded: self.excluded.iter().map(TypeEvidence::to_json).collect(),
        };
        serde_json::to_value(raw).expect("witness serializes")
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        Self::from_raw(serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_raw(parse_json(text)?)
    }

    fn from_raw(raw: InterimWitnessJson) -> Result<Self> {
        let market = raw.market;
        let mut type_sets = BTreeMap::new();
        for (a, lists) in raw.type_sets {
            let set = lists.iter().map(|keys| Ranking::from_keys(a, market, keys)).collect::<Result<BTreeSet<_>>>()?;
            type_sets.insert(a, set);
        }
        Ok(InterimWitness {
            coalition: raw.coalition,
            type_sets,
            deviation: Deviation::from_json(market, raw.deviation)?,
            per_type: raw.per_type.into_iter().map(|e| TypeEvidence::from_json(market, e)).collect::<Result<_>>()?,
            excluded: raw.excluded.into_iter().map(|e| TypeEvidence::from_json(market, e)).collect::<Result<_>>()?,
        })
    }
}
