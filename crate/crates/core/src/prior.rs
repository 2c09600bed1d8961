//! Finitely supported, exactly weighted distributions over preference profiles.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{market_from_keys, AgentId, Market, PreferenceProfile, Ranking};
use crate::rational::Rational;

/// Largest support any constructor will build.
pub const DEFAULT_SUPPORT_CAP: usize = 100_000;

/// A common prior over profiles. Support is kept in canonical profile order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prior {
    market: Market,
    support: Vec<(PreferenceProfile, Rational)>,
}

impl Prior {
    /// Validates positivity, distinctness and that weights sum to exactly one.
    pub fn from_support(market: Market, mut support: Vec<(PreferenceProfile, Rational)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Invalid("a prior needs at least one profile".into()));
        }
        for (p, w) in &support {
            if p.market() != market {
                return Err(Error::Invalid("support profile is over a different market".into()));
            }
            if !w.is_positive() {
                return Err(Error::Invalid(format!("prior weight {w} is not positive")));
            }
        }
        let total: Rational = support.iter().map(|(_, w)| w).sum();
        if !total.is_one() {
            return Err(Error::Invalid(format!("prior weights sum to {total}, not 1")));
        }
        support.sort_by(|a, b| a.0.cmp(&b.0));
        if support.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Invalid("prior support lists a profile twice".into()));
        }
        Ok(Prior { market, support })
    }

    pub fn point_mass(profile: PreferenceProfile) -> Self {
        Prior { market: profile.market(), support: vec![(profile, Rational::one())] }
    }

    pub fn market(&self) -> Market {
        self.market
    }

    pub fn support(&self) -> &[(PreferenceProfile, Rational)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn is_point_mass(&self) -> bool {
        self.support.len() == 1
    }

    pub fn weight_of(&self, profile: &PreferenceProfile) -> Rational {
        self.position(profile).map(|i| self.support[i].1.clone()).unwrap_or_else(Rational::zero)
    }

    pub fn position(&self, profile: &PreferenceProfile) -> Option<usize> {
        self.support.binary_search_by(|(p, _)| p.cmp(profile)).ok()
    }

    pub fn mass_where(&self, mut keep: impl FnMut(&PreferenceProfile) -> bool) -> Rational {
        self.support.iter().filter(|(p, _)| keep(p)).map(|(_, w)| w).sum()
    }

    pub fn mass(&self, event: &Event) -> Rational {
        self.mass_where(|p| event.contains(p))
    }

    /// Conditions on an arbitrary predicate over profiles.
    pub fn restrict(&self, mut keep: impl FnMut(&PreferenceProfile) -> bool) -> Result<Prior> {
        let kept: Vec<_> = self.support.iter().filter(|(p, _)| keep(p)).cloned().collect();
        let mass: Rational = kept.iter().map(|(_, w)| w).sum();
        if mass.is_zero() {
            return Err(Error::ZeroMassEvent);
        }
        let support = kept.into_iter().map(|(p, w)| (p, w / &mass)).collect();
        Ok(Prior { market: self.market, support })
    }
}

/// One agent's lottery over its own ranking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentTypeDistribution {
    pub agent: AgentId,
    pub types: Vec<(Ranking, Rational)>,
}

impl AgentTypeDistribution {
    pub fn new(agent: AgentId, types: Vec<(Ranking, Rational)>) -> Result<Self> {
        if types.is_empty() {
            return Err(Error::Invalid(format!("{agent} has no types")));
        }
        for (r, w) in &types {
            if r.owner() != agent {
                return Err(Error::Invalid(format!("type for {} listed under {agent}", r.owner())));
            }
            if !w.is_positive() {
                return Err(Error::Invalid(format!("type weight {w} for {agent} is not positive")));
            }
        }
        if types.iter().map(|(r, _)| r).duplicates().next().is_some() {
            return Err(Error::Invalid(format!("{agent} lists a type twice")));
        }
        let total: Rational = types.iter().map(|(_, w)| w).sum();
        if !total.is_one() {
            return Err(Error::Invalid(format!("type weights for {agent} sum to {total}, not 1")));
        }
        Ok(AgentTypeDistribution { agent, types })
    }

    pub fn single(ranking: Ranking) -> Self {
        AgentTypeDistribution { agent: ranking.owner(), types: vec![(ranking, Rational::one())] }
    }
}

/// Agents draw their types independently.
pub fn product_prior(market: Market, per_agent: Vec<AgentTypeDistribution>) -> Result<Prior> {
    product_prior_capped(market, per_agent, DEFAULT_SUPPORT_CAP)
}

pub fn product_prior_capped(market: Market, mut per_agent: Vec<AgentTypeDistribution>, cap: usize) -> Result<Prior> {
    per_agent.sort_by_key(|d| d.agent);
    let agents: Vec<AgentId> = per_agent.iter().map(|d| d.agent).collect();
    if agents != market.agents().collect::<Vec<_>>() {
        return Err(Error::Invalid("product prior needs exactly one type distribution per agent".into()));
    }
    for d in &per_agent {
        for (r, _) in &d.types {
            if r.domain_size() != market.domain_size(d.agent.side) {
                return Err(Error::Invalid(format!("type for {} is over a different market", d.agent)));
            }
        }
    }
    let size = per_agent.iter().try_fold(1usize, |acc, d| acc.checked_mul(d.types.len()));
    match size {
        Some(n) if n <= cap => {}
        _ => return Err(Error::Resource { what: "prior support".into(), cap }),
    }
    let mut support = Vec::with_capacity(size.unwrap_or(0));
    for combo in per_agent.iter().map(|d| d.types.iter()).multi_cartesian_product() {
        let weight = combo.iter().fold(Rational::one(), |acc, (_, w)| acc * w);
        if weight.is_zero() {
            continue;
        }
        let rankings = combo.into_iter().map(|(r, _)| r.clone()).collect();
        support.push((PreferenceProfile::new(market, rankings)?, weight));
    }
    Prior::from_support(market, support)
}

/// Every agent independently uniform over the rankings that put self last.
pub fn iid_uniform_prior(market: Market) -> Result<Prior> {
    let mut per_agent = Vec::new();
    for agent in market.agents() {
        let opp = market.side_size(agent.side.opposite());
        let orders: Vec<Vec<usize>> = (0..opp).permutations(opp).collect();
        let weight = Rational::new(1, orders.len() as i64);
        let types = orders
            .into_iter()
            .map(|order| {
                let items: Vec<AgentId> =
                    order.into_iter().map(|j| AgentId { side: agent.side.opposite(), index: j }).collect();
                Ok((Ranking::from_order(agent, market, &[items, vec![agent]].concat())?, weight.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        per_agent.push(AgentTypeDistribution { agent, types });
    }
    product_prior(market, per_agent)
}

/// A conjunction of per-agent constraints "agent's ranking lies in this set".
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Event {
    constraints: BTreeMap<AgentId, BTreeSet<Ranking>>,
}

impl Event {
    /// The whole profile space.
    pub fn everything() -> Self {
        Event::default()
    }

    /// Adds (intersects) a constraint on one agent.
    pub fn and(mut self, agent: AgentId, allowed: impl IntoIterator<Item = Ranking>) -> Result<Self> {
        let allowed: BTreeSet<Ranking> = allowed.into_iter().collect();
        if allowed.is_empty() {
            return Err(Error::Invalid(format!("empty type set for {agent}")));
        }
        if allowed.iter().any(|r| r.owner() != agent) {
            return Err(Error::Invalid(format!("type set for {agent} contains another agent's ranking")));
        }
        match self.constraints.get_mut(&agent) {
            Some(existing) => {
                existing.retain(|r| allowed.contains(r));
            }
            None => {
                self.constraints.insert(agent, allowed);
            }
        }
        Ok(self)
    }

    pub fn intersect(mut self, other: &Event) -> Self {
        for (agent, allowed) in &other.constraints {
            match self.constraints.get_mut(agent) {
                Some(existing) => existing.retain(|r| allowed.contains(r)),
                None => {
                    self.constraints.insert(*agent, allowed.clone());
                }
            }
        }
        self
    }

    pub fn contains(&self, profile: &PreferenceProfile) -> bool {
        self.constraints.iter().all(|(agent, allowed)| allowed.contains(profile.ranking(*agent)))
    }

    pub fn constraints(&self) -> &BTreeMap<AgentId, BTreeSet<Ranking>> {
        &self.constraints
    }
}

/// The conditional prior given `event`.
pub fn condition(prior: &Prior, event: &Event) -> Result<Prior> {
    prior.restrict(|p| event.contains(p))
}

/// Exact marginal distribution of one agent's ranking, in canonical ranking order.
pub fn marginal_types(prior: &Prior, agent: AgentId) -> Result<Vec<(Ranking, Rational)>> {
    prior.market().check_agent(agent)?;
    let mut acc: BTreeMap<Ranking, Rational> = BTreeMap::new();
    for (p, w) in prior.support() {
        *acc.entry(p.ranking(agent).clone()).or_insert_with(Rational::zero) += w;
    }
    Ok(acc.into_iter().collect())
}

#[derive(Serialize, Deserialize)]
struct WeightedProfileJson {
    profile: PreferenceProfile,
    weight: Rational,
}

#[derive(Serialize, Deserialize)]
struct TypeJson {
    ranking: Vec<String>,
    weight: Rational,
}

/// External prior file format: explicit support or independent per-agent types.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PriorJson {
    Explicit { support: Vec<WeightedProfileJson> },
    Product { agents: BTreeMap<String, Vec<TypeJson>> },
}

impl Prior {
    /// Parses either `{"support": [{"profile": ..., "weight": "n/d"}]}` or
    /// `{"agents": {"m1": [{"ranking": [...], "weight": "n/d"}], ...}}`.
    pub fn from_json_str(text: &str) -> Result<Prior> {
        let raw: PriorJson = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_json(raw)
    }

    fn from_json(raw: PriorJson) -> Result<Prior> {
        match raw {
            PriorJson::Explicit { support } => {
                let market = support
                    .first()
                    .map(|e| e.profile.market())
                    .ok_or_else(|| Error::Invalid("empty prior support".into()))?;
                Prior::from_support(market, support.into_iter().map(|e| (e.profile, e.weight)).collect())
            }
            PriorJson::Product { agents } => {
                let (market, ids) = market_from_keys(agents.keys())?;
                let per_agent = ids
                    .into_iter()
                    .zip(agents.into_values())
                    .map(|(agent, types)| {
                        let types = types
                            .into_iter()
                            .map(|t| Ok((Ranking::from_keys(agent, market, &t.ranking)?, t.weight)))
                            .collect::<Result<Vec<_>>>()?;
                        AgentTypeDistribution::new(agent, types)
                    })
                    .collect::<Result<Vec<_>>>()?;
                product_prior(market, per_agent)
            }
        }
    }

    /// Always emits the explicit-support form.
    pub fn to_json_value(&self) -> serde_json::Value {
        let support: Vec<WeightedProfileJson> = self
            .support
            .iter()
            .map(|(p, w)| WeightedProfileJson { profile: p.clone(), weight: w.clone() })
            .collect();
        serde_json::to_value(PriorJson::Explicit { support }).expect("prior serializes")
    }
}
