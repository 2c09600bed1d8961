//! Agents, strict ordinal preferences, matchings, enumeration and relabelings.
//!
//! Rankings are total orders over the opposite side plus the agent itself;
//! the agent's own entry stands for staying unmatched, and anything ranked
//! below it is unacceptable.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use itertools::Itertools;
use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest number of matchings any enumeration will produce before refusing.
pub const DEFAULT_MATCHING_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Man,
    Woman,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Man => Side::Woman,
            Side::Woman => Side::Man,
        }
    }
}

/// A man or a woman, 0-based within its side. Men sort before women.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId {
    pub side: Side,
    pub index: usize,
}

impl AgentId {
    pub fn man(index: usize) -> Self {
        AgentId { side: Side::Man, index }
    }

    pub fn woman(index: usize) -> Self {
        AgentId { side: Side::Woman, index }
    }

    /// Parses the external key form, `"m1"` or `"w3"` (1-based).
    pub fn parse(key: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("invalid agent key {key:?}; expected m<k> or w<k>"));
        let (side, rest) = match key.as_bytes().first() {
            Some(b'm') => (Side::Man, &key[1..]),
            Some(b'w') => (Side::Woman, &key[1..]),
            _ => return Err(bad()),
        };
        let k: usize = rest.parse().map_err(|_| bad())?;
        if k == 0 {
            return Err(bad());
        }
        Ok(AgentId { side, index: k - 1 })
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.side {
            Side::Man => 'm',
            Side::Woman => 'w',
        };
        write!(f, "{}{}", prefix, self.index + 1)
    }
}

impl Serialize for AgentId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AgentId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let key = String::deserialize(deserializer)?;
        AgentId::parse(&key).map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Market {
    #[serde(rename = "men")]
    pub num_men: usize,
    #[serde(rename = "women")]
    pub num_women: usize,
}

impl Market {
    pub fn new(num_men: usize, num_women: usize) -> Result<Self> {
        if num_men == 0 || num_women == 0 {
            return Err(Error::Domain("a market needs at least one man and one woman".into()));
        }
        Ok(Market { num_men, num_women })
    }

    pub fn square(n: usize) -> Self {
        Market::new(n, n).expect("square market of size zero")
    }

    pub fn side_size(&self, side: Side) -> usize {
        match side {
            Side::Man => self.num_men,
            Side::Woman => self.num_women,
        }
    }

    /// Size of an agent's ranking domain: the opposite side plus itself.
    pub fn domain_size(&self, side: Side) -> usize {
        self.side_size(side.opposite()) + 1
    }

    pub fn num_agents(&self) -> usize {
        self.num_men + self.num_women
    }

    /// All agents, men first, each side in index order.
    pub fn agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        (0..self.num_men).map(AgentId::man).chain((0..self.num_women).map(AgentId::woman))
    }

    pub fn contains(&self, agent: AgentId) -> bool {
        agent.index < self.side_size(agent.side)
    }

    pub fn check_agent(&self, agent: AgentId) -> Result<()> {
        if self.contains(agent) {
            Ok(())
        } else {
            Err(Error::Domain(format!("agent {agent} is not in a {}x{} market", self.num_men, self.num_women)))
        }
    }

    /// Position of the agent in [`Market::agents`] order.
    pub fn slot(&self, agent: AgentId) -> usize {
        match agent.side {
            Side::Man => agent.index,
            Side::Woman => self.num_men + agent.index,
        }
    }
}

/// One agent's strict ranking of its domain. Rank 1 is best.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ranking {
    owner: AgentId,
    /// `ranks[j]` is the rank of opposite-side agent `j`; the last entry is the owner's own rank.
    ranks: Vec<u8>,
}

impl Ranking {
    /// Builds a ranking from a best-first order that must list the whole domain.
    pub fn from_order(owner: AgentId, market: Market, order: &[AgentId]) -> Result<Self> {
        market.check_agent(owner)?;
        let size = market.domain_size(owner.side);
        if order.len() != size {
            return Err(Error::Invalid(format!(
                "ranking for {owner} lists {} options, expected {size}",
                order.len()
            )));
        }
        Self::from_prefix(owner, market, order)
    }

    /// Builds a ranking from a best-first prefix. Omitted options are appended: the
    /// owner itself first if it was not listed, then the remaining opposite-side
    /// agents in index order. `w1, w2` for a man in a 3x3 market therefore means
    /// `w1, w2, self, w3`.
    pub fn from_prefix(owner: AgentId, market: Market, prefix: &[AgentId]) -> Result<Self> {
        market.check_agent(owner)?;
        let opp = market.side_size(owner.side.opposite());
        let mut ranks = vec![0u8; opp + 1];
        let mut next = 1u8;
        let mut place = |slot: usize, ranks: &mut Vec<u8>, who: AgentId| -> Result<()> {
            if ranks[slot] != 0 {
                return Err(Error::Invalid(format!("ranking for {owner} lists {who} twice")));
            }
            ranks[slot] = next;
            next += 1;
            Ok(())
        };
        for &item in prefix {
            if item == owner {
                place(opp, &mut ranks, item)?;
            } else if item.side == owner.side.opposite() && item.index < opp {
                place(item.index, &mut ranks, item)?;
            } else {
                return Err(Error::Domain(format!("{item} cannot appear in the ranking of {owner}")));
            }
        }
        if ranks[opp] == 0 {
            place(opp, &mut ranks, owner)?;
        }
        for j in 0..opp {
            if ranks[j] == 0 {
                let who = AgentId { side: owner.side.opposite(), index: j };
                place(j, &mut ranks, who)?;
            }
        }
        Ok(Ranking { owner, ranks })
    }

    /// Ranking with the opposite side in index order followed by self.
    pub fn identity(owner: AgentId, market: Market) -> Result<Self> {
        Self::from_prefix(owner, market, &[])
    }

    pub fn owner(&self) -> AgentId {
        self.owner
    }

    pub fn domain_size(&self) -> usize {
        self.ranks.len()
    }

    pub fn rank_of(&self, outcome: AgentId) -> Result<usize> {
        if outcome == self.owner {
            return Ok(*self.ranks.last().expect("ranking is never empty") as usize);
        }
        if outcome.side != self.owner.side.opposite() || outcome.index + 1 >= self.ranks.len() {
            return Err(Error::Domain(format!("{outcome} is not in the ranking domain of {}", self.owner)));
        }
        Ok(self.ranks[outcome.index] as usize)
    }

    /// Rank of the owner's own (unmatched) option.
    pub fn self_rank(&self) -> usize {
        *self.ranks.last().expect("ranking is never empty") as usize
    }

    /// Rank when the owner's partner is `partner` (None = unmatched). Unchecked fast path.
    pub(crate) fn rank_of_partner(&self, partner: Option<usize>) -> usize {
        match partner {
            Some(j) => self.ranks[j] as usize,
            None => self.self_rank(),
        }
    }

    /// The domain in best-first order.
    pub fn order(&self) -> Vec<AgentId> {
        let opp = self.ranks.len() - 1;
        let mut order = vec![self.owner; self.ranks.len()];
        for (j, &r) in self.ranks.iter().enumerate() {
            order[r as usize - 1] = if j == opp {
                self.owner
            } else {
                AgentId { side: self.owner.side.opposite(), index: j }
            };
        }
        order
    }

    /// Option at a given rank (1-based).
    pub fn at_rank(&self, rank: usize) -> AgentId {
        self.order()[rank - 1]
    }

    pub fn to_keys(&self) -> Vec<String> {
        self.order()
            .into_iter()
            .map(|a| if a == self.owner { "self".to_string() } else { a.to_string() })
            .collect()
    }

    pub fn from_keys(owner: AgentId, market: Market, keys: &[String]) -> Result<Self> {
        let items = keys
            .iter()
            .map(|k| if k == "self" { Ok(owner) } else { AgentId::parse(k) })
            .collect::<Result<Vec<_>>>()?;
        Self::from_prefix(owner, market, &items)
    }

    /// Ranking with the owner relabeled and the opposite side permuted.
    fn relabeled(&self, owner: AgentId, opposite_map: &[usize]) -> Ranking {
        let opp = self.ranks.len() - 1;
        let mut ranks = vec![0u8; opp + 1];
        for j in 0..opp {
            ranks[opposite_map[j]] = self.ranks[j];
        }
        ranks[opp] = self.ranks[opp];
        Ranking { owner, ranks }
    }
}

impl fmt::Display for Ranking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_keys().join(", "))
    }
}

/// A ranking for every agent, men first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PreferenceProfile {
    market: Market,
    rankings: Vec<Ranking>,
}

impl PreferenceProfile {
    pub fn new(market: Market, rankings: Vec<Ranking>) -> Result<Self> {
        if rankings.len() != market.num_agents() {
            return Err(Error::Invalid(format!(
                "profile has {} rankings for {} agents",
                rankings.len(),
                market.num_agents()
            )));
        }
        for (agent, ranking) in market.agents().zip(&rankings) {
            if ranking.owner != agent || ranking.domain_size() != market.domain_size(agent.side) {
                return Err(Error::Invalid(format!("ranking in slot {agent} belongs to {}", ranking.owner)));
            }
        }
        Ok(PreferenceProfile { market, rankings })
    }

    /// Convenience builder from best-first comma-separated lists, one per agent,
    /// e.g. `men = ["w1,w2,w3", ...]`. Lists may be truncated (see [`Ranking::from_prefix`]).
    pub fn from_lists(market: Market, men: &[&str], women: &[&str]) -> Result<Self> {
        if men.len() != market.num_men || women.len() != market.num_women {
            return Err(Error::Invalid("one list per agent required".into()));
        }
        let rankings = market
            .agents()
            .zip(men.iter().chain(women))
            .map(|(agent, list)| {
                let keys: Vec<String> = list
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect();
                Ranking::from_keys(agent, market, &keys)
            })
            .collect::<Result<Vec<_>>>()?;
        PreferenceProfile::new(market, rankings)
    }

    pub fn market(&self) -> Market {
        self.market
    }

    pub fn ranking(&self, agent: AgentId) -> &Ranking {
        &self.rankings[self.market.slot(agent)]
    }

    pub fn rankings(&self) -> &[Ranking] {
        &self.rankings
    }

    pub fn with_ranking(&self, ranking: Ranking) -> Result<Self> {
        let owner = ranking.owner;
        self.market.check_agent(owner)?;
        let mut next = self.clone();
        let slot = self.market.slot(owner);
        next.rankings[slot] = ranking;
        Ok(next)
    }

    /// `P_agent(outcome)`.
    pub fn rank_of(&self, agent: AgentId, outcome: AgentId) -> Result<usize> {
        self.market.check_agent(agent)?;
        self.ranking(agent).rank_of(outcome)
    }

    /// Rank the agent gives to its partner under `matching`.
    pub fn rank_under(&self, agent: AgentId, matching: &Matching) -> usize {
        self.ranking(agent).rank_of_partner(matching.partner_index(agent))
    }

    /// The rankings of the given agents, in the order given.
    pub fn restrict(&self, agents: &[AgentId]) -> Vec<Ranking> {
        agents.iter().map(|&a| self.ranking(a).clone()).collect()
    }
}

impl fmt::Display for PreferenceProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, r) in self.rankings.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{}: {}", r.owner, r)?;
        }
        Ok(())
    }
}

impl Serialize for PreferenceProfile {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.rankings.len()))?;
        for r in &self.rankings {
            map.serialize_entry(&r.owner.to_string(), &r.to_keys())?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for PreferenceProfile {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = BTreeMap::<String, Vec<String>>::deserialize(deserializer)?;
        profile_from_key_map(&raw).map_err(D::Error::custom)
    }
}

/// Infers the market from the keys (`m1..mN`, `w1..wK`, all present).
pub(crate) fn market_from_keys<'a>(keys: impl Iterator<Item = &'a String>) -> Result<(Market, Vec<AgentId>)> {
    let agents = keys.map(|k| AgentId::parse(k)).collect::<Result<Vec<_>>>()?;
    let men = agents.iter().filter(|a| a.side == Side::Man).count();
    let women = agents.len() - men;
    let market = Market::new(men, women)?;
    for a in &agents {
        if !market.contains(*a) {
            return Err(Error::Invalid(format!("agent keys must be contiguous; found {a} in a {men}x{women} market")));
        }
    }
    Ok((market, agents))
}

fn profile_from_key_map(raw: &BTreeMap<String, Vec<String>>) -> Result<PreferenceProfile> {
    let (market, agents) = market_from_keys(raw.keys())?;
    let mut rankings: Vec<Option<Ranking>> = vec![None; market.num_agents()];
    for (agent, keys) in agents.into_iter().zip(raw.values()) {
        rankings[market.slot(agent)] = Some(Ranking::from_keys(agent, market, keys)?);
    }
    PreferenceProfile::new(market, rankings.into_iter().map(|r| r.expect("all slots filled")).collect())
}

/// A matching: every man paired with at most one woman and vice versa.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matching {
    man_partner: Vec<Option<usize>>,
    woman_partner: Vec<Option<usize>>,
}

impl Matching {
    pub fn empty(market: Market) -> Self {
        Matching { man_partner: vec![None; market.num_men], woman_partner: vec![None; market.num_women] }
    }

    /// Builds a matching from 0-based `(man, woman)` pairs.
    pub fn from_pairs(market: Market, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut m = Matching::empty(market);
        for &(i, j) in pairs {
            if i >= market.num_men || j >= market.num_women {
                return Err(Error::Domain(format!("pair (m{}, w{}) outside the market", i + 1, j + 1)));
            }
            if m.man_partner[i].is_some() || m.woman_partner[j].is_some() {
                return Err(Error::Invalid(format!("m{} or w{} matched twice", i + 1, j + 1)));
            }
            m.man_partner[i] = Some(j);
            m.woman_partner[j] = Some(i);
        }
        Ok(m)
    }

    /// Builds a matching from a men-indexed partner list.
    pub fn from_men_partners(market: Market, partners: Vec<Option<usize>>) -> Result<Self> {
        if partners.len() != market.num_men {
            return Err(Error::Invalid("partner list length differs from the number of men".into()));
        }
        let pairs: Vec<(usize, usize)> =
            partners.iter().enumerate().filter_map(|(i, p)| p.map(|j| (i, j))).collect();
        Self::from_pairs(market, &pairs)
    }

    pub fn market(&self) -> Market {
        Market { num_men: self.man_partner.len(), num_women: self.woman_partner.len() }
    }

    pub fn partner(&self, agent: AgentId) -> AgentId {
        match self.partner_index(agent) {
            Some(j) => AgentId { side: agent.side.opposite(), index: j },
            None => agent,
        }
    }

    pub(crate) fn partner_index(&self, agent: AgentId) -> Option<usize> {
        match agent.side {
            Side::Man => self.man_partner[agent.index],
            Side::Woman => self.woman_partner[agent.index],
        }
    }

    pub fn is_matched(&self, agent: AgentId) -> bool {
        self.partner_index(agent).is_some()
    }

    pub fn men_partners(&self) -> &[Option<usize>] {
        &self.man_partner
    }

    /// 0-based `(man, woman)` pairs in man order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.man_partner.iter().enumerate().filter_map(|(i, p)| p.map(|j| (i, j))).collect()
    }

    pub fn singles(&self) -> Vec<AgentId> {
        self.market().agents().filter(|&a| !self.is_matched(a)).collect()
    }

    pub fn size(&self) -> usize {
        self.man_partner.iter().filter(|p| p.is_some()).count()
    }

    fn order_key(&self) -> impl Iterator<Item = usize> + '_ {
        let n = self.woman_partner.len();
        self.man_partner.iter().map(move |p| p.unwrap_or(n))
    }

    /// Every agent in `coalition` is matched inside it or single; everyone else is single.
    pub fn is_internal_to(&self, coalition: &[AgentId]) -> bool {
        self.market().agents().all(|a| {
            let inside = coalition.contains(&a);
            match self.partner_index(a) {
                None => true,
                Some(_) => inside && coalition.contains(&self.partner(a)),
            }
        })
    }
}

impl PartialOrd for Matching {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Canonical order: lexicographic in the men's partner indices, unmatched last.
impl Ord for Matching {
    fn cmp(&self, other: &Self) -> Ordering {
        self.market()
            .cmp(&other.market())
            .then_with(|| self.order_key().cmp(other.order_key()))
    }
}

impl fmt::Display for Matching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.pairs().iter().map(|(i, j)| format!("m{}w{}", i + 1, j + 1)).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[derive(Serialize, Deserialize)]
struct MatchingJson {
    pairs: Vec<(AgentId, AgentId)>,
    single: Vec<AgentId>,
}

impl Serialize for Matching {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MatchingJson {
            pairs: self.pairs().into_iter().map(|(i, j)| (AgentId::man(i), AgentId::woman(j))).collect(),
            single: self.singles(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Matching {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = MatchingJson::deserialize(deserializer)?;
        matching_from_json(raw).map_err(D::Error::custom)
    }
}

fn matching_from_json(raw: MatchingJson) -> Result<Matching> {
    let mut all: Vec<AgentId> = raw.single.clone();
    let mut pairs = Vec::new();
    for (a, b) in raw.pairs {
        let (m, w) = match (a.side, b.side) {
            (Side::Man, Side::Woman) => (a, b),
            (Side::Woman, Side::Man) => (b, a),
            _ => return Err(Error::Invalid(format!("pair ({a}, {b}) is not a man and a woman"))),
        };
        all.push(m);
        all.push(w);
        pairs.push((m.index, w.index));
    }
    let men = all.iter().filter(|a| a.side == Side::Man).map(|a| a.index + 1).max().unwrap_or(0);
    let women = all.iter().filter(|a| a.side == Side::Woman).map(|a| a.index + 1).max().unwrap_or(0);
    let market = Market::new(men, women)?;
    if all.len() != market.num_agents() || all.iter().duplicates().next().is_some() {
        return Err(Error::Invalid("a matching must list every agent exactly once".into()));
    }
    Matching::from_pairs(market, &pairs)
}

/// A violation of stability of a fixed matching.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    IndividualRationality(AgentId),
    BlockingPair(AgentId, AgentId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityVerdict {
    Stable,
    Unstable(Vec<Violation>),
}

impl StabilityVerdict {
    pub fn is_stable(&self) -> bool {
        matches!(self, StabilityVerdict::Stable)
    }
}

/// Checks individual rationality and the absence of blocking pairs, listing every violation.
pub fn is_stable_matching(profile: &PreferenceProfile, matching: &Matching) -> Result<StabilityVerdict> {
    let market = profile.market();
    if matching.market() != market {
        return Err(Error::Domain("matching and profile are over different markets".into()));
    }
    let mut violations = Vec::new();
    for a in market.agents() {
        let r = profile.ranking(a);
        if profile.rank_under(a, matching) > r.self_rank() {
            violations.push(Violation::IndividualRationality(a));
        }
    }
    for i in 0..market.num_men {
        let m = AgentId::man(i);
        let pm = profile.ranking(m);
        let current_m = profile.rank_under(m, matching);
        for j in 0..market.num_women {
            let w = AgentId::woman(j);
            let pw = profile.ranking(w);
            if pm.rank_of_partner(Some(j)) < current_m && pw.rank_of_partner(Some(i)) < profile.rank_under(w, matching) {
                violations.push(Violation::BlockingPair(m, w));
            }
        }
    }
    Ok(if violations.is_empty() { StabilityVerdict::Stable } else { StabilityVerdict::Unstable(violations) })
}

/// Fast boolean form used by mechanisms.
pub(crate) fn is_stable(profile: &PreferenceProfile, matching: &Matching) -> bool {
    let market = profile.market();
    for a in market.agents() {
        if profile.rank_under(a, matching) > profile.ranking(a).self_rank() {
            return false;
        }
    }
    for i in 0..market.num_men {
        let pm = profile.ranking(AgentId::man(i));
        let current_m = pm.rank_of_partner(matching.man_partner[i]);
        for j in 0..market.num_women {
            if pm.rank_of_partner(Some(j)) < current_m {
                let pw = profile.ranking(AgentId::woman(j));
                if pw.rank_of_partner(Some(i)) < pw.rank_of_partner(matching.woman_partner[j]) {
                    return false;
                }
            }
        }
    }
    true
}

/// All matchings of the market in canonical order.
pub fn enumerate_matchings(market: Market) -> Result<Vec<Matching>> {
    enumerate_matchings_capped(market, DEFAULT_MATCHING_CAP)
}

pub fn enumerate_matchings_capped(market: Market, cap: usize) -> Result<Vec<Matching>> {
    let men: Vec<usize> = (0..market.num_men).collect();
    let women: Vec<usize> = (0..market.num_women).collect();
    enumerate_restricted(market, &men, &women, cap)
}

/// Matchings in which coalition members pair only among themselves and
/// everyone else is single, in canonical order.
pub fn enumerate_internal_matchings(market: Market, coalition: &[AgentId]) -> Result<Vec<Matching>> {
    enumerate_internal_matchings_capped(market, coalition, DEFAULT_MATCHING_CAP)
}

pub fn enumerate_internal_matchings_capped(market: Market, coalition: &[AgentId], cap: usize) -> Result<Vec<Matching>> {
    for &a in coalition {
        market.check_agent(a)?;
    }
    let men: Vec<usize> = coalition.iter().filter(|a| a.side == Side::Man).map(|a| a.index).sorted().dedup().collect();
    let women: Vec<usize> =
        coalition.iter().filter(|a| a.side == Side::Woman).map(|a| a.index).sorted().dedup().collect();
    enumerate_restricted(market, &men, &women, cap)
}

fn enumerate_restricted(market: Market, men: &[usize], women: &[usize], cap: usize) -> Result<Vec<Matching>> {
    fn go(
        k: usize,
        men: &[usize],
        women: &[usize],
        used: &mut Vec<bool>,
        current: &mut Vec<Option<usize>>,
        market: Market,
        out: &mut Vec<Matching>,
        cap: usize,
    ) -> Result<()> {
        if k == men.len() {
            if out.len() >= cap {
                return Err(Error::Resource { what: "matching enumeration".into(), cap });
            }
            out.push(Matching::from_men_partners(market, current.clone())?);
            return Ok(());
        }
        let m = men[k];
        for (slot, &w) in women.iter().enumerate() {
            if !used[slot] {
                used[slot] = true;
                current[m] = Some(w);
                go(k + 1, men, women, used, current, market, out, cap)?;
                current[m] = None;
                used[slot] = false;
            }
        }
        go(k + 1, men, women, used, current, market, out, cap)
    }
    let mut out = Vec::new();
    let mut used = vec![false; women.len()];
    let mut current = vec![None; market.num_men];
    go(0, men, women, &mut used, &mut current, market, &mut out, cap)?;
    Ok(out)
}

/// A side-preserving relabeling: `m_i -> m_{man_map[i]}`, `w_j -> w_{woman_map[j]}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentPermutation {
    pub man_map: Vec<usize>,
    pub woman_map: Vec<usize>,
}

impl AgentPermutation {
    pub fn identity(market: Market) -> Self {
        AgentPermutation { man_map: (0..market.num_men).collect(), woman_map: (0..market.num_women).collect() }
    }

    pub fn new(man_map: Vec<usize>, woman_map: Vec<usize>) -> Result<Self> {
        let sigma = AgentPermutation { man_map, woman_map };
        for map in [&sigma.man_map, &sigma.woman_map] {
            let mut seen = vec![false; map.len()];
            for &x in map {
                if x >= map.len() || std::mem::replace(&mut seen[x], true) {
                    return Err(Error::Invalid("agent map is not a permutation".into()));
                }
            }
        }
        Ok(sigma)
    }

    pub fn market(&self) -> Market {
        Market { num_men: self.man_map.len(), num_women: self.woman_map.len() }
    }

    pub fn apply(&self, agent: AgentId) -> AgentId {
        match agent.side {
            Side::Man => AgentId::man(self.man_map[agent.index]),
            Side::Woman => AgentId::woman(self.woman_map[agent.index]),
        }
    }

    pub fn inverse(&self) -> Self {
        let invert = |map: &[usize]| {
            let mut inv = vec![0; map.len()];
            for (i, &x) in map.iter().enumerate() {
                inv[x] = i;
            }
            inv
        };
        AgentPermutation { man_map: invert(&self.man_map), woman_map: invert(&self.woman_map) }
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn after(&self, inner: &AgentPermutation) -> Self {
        AgentPermutation {
            man_map: inner.man_map.iter().map(|&i| self.man_map[i]).collect(),
            woman_map: inner.woman_map.iter().map(|&j| self.woman_map[j]).collect(),
        }
    }

    fn check(&self, market: Market) -> Result<()> {
        if self.market() != market {
            return Err(Error::Domain("permutation is over a different market".into()));
        }
        Ok(())
    }
}

/// The profile `P'` with `P_a(a') = P'_{σ(a)}(σ(a'))`, self mapping to self.
pub fn permute_profile(profile: &PreferenceProfile, sigma: &AgentPermutation) -> Result<PreferenceProfile> {
    let market = profile.market();
    sigma.check(market)?;
    let mut rankings: Vec<Option<Ranking>> = vec![None; market.num_agents()];
    for a in market.agents() {
        let image = sigma.apply(a);
        let opposite_map = match a.side {
            Side::Man => &sigma.woman_map,
            Side::Woman => &sigma.man_map,
        };
        rankings[market.slot(image)] = Some(profile.ranking(a).relabeled(image, opposite_map));
    }
    PreferenceProfile::new(market, rankings.into_iter().map(|r| r.expect("permutation is a bijection")).collect())
}

/// The matching `μ'` with `μ'(σ(a)) = σ(μ(a))`.
pub fn permute_matching(matching: &Matching, sigma: &AgentPermutation) -> Result<Matching> {
    let market = matching.market();
    sigma.check(market)?;
    let pairs: Vec<(usize, usize)> =
        matching.pairs().into_iter().map(|(i, j)| (sigma.man_map[i], sigma.woman_map[j])).collect();
    Matching::from_pairs(market, &pairs)
}

/// Lexicographically least σ (by man map, then woman map) with `permute_profile(base, σ) == candidate`.
pub fn find_permutation(candidate: &PreferenceProfile, base: &PreferenceProfile) -> Option<AgentPermutation> {
    let market = base.market();
    if candidate.market() != market {
        return None;
    }
    // Cheap invariant: the sorted multiset of self ranks per side must agree.
    for side in [Side::Man, Side::Woman] {
        let selves = |p: &PreferenceProfile| {
            (0..market.side_size(side))
                .map(|i| p.ranking(AgentId { side, index: i }).self_rank())
                .sorted()
                .collect::<Vec<_>>()
        };
        if selves(candidate) != selves(base) {
            return None;
        }
    }
    for man_map in (0..market.num_men).permutations(market.num_men) {
        for woman_map in (0..market.num_women).permutations(market.num_women) {
            let sigma = AgentPermutation { man_map: man_map.clone(), woman_map };
            let matches = market.agents().all(|a| {
                let image = sigma.apply(a);
                let opposite_map = match a.side {
                    Side::Man => &sigma.woman_map,
                    Side::Woman => &sigma.man_map,
                };
                base.ranking(a).relabeled(image, opposite_map) == *candidate.ranking(image)
            });
            if matches {
                return Some(sigma);
            }
        }
    }
    None
}

/// All side-preserving permutations of the market, lexicographic.
pub fn all_permutations(market: Market) -> Vec<AgentPermutation> {
    let mut out = Vec::new();
    for man_map in (0..market.num_men).permutations(market.num_men) {
        for woman_map in (0..market.num_women).permutations(market.num_women) {
            out.push(AgentPermutation { man_map: man_map.clone(), woman_map });
        }
    }
    out
}
