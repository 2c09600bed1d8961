//! Reproducible worked cases: fixed markets and priors, each with a list of
//! exact claims that are recomputed by enumeration and compared verbatim.

mod correlated;
mod example1;
mod example2;
mod example3;
mod insurance;

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{AgentId, Market, Ranking};
use crate::mechanism::Mechanism;
use crate::prior::Prior;
use crate::rational::Rational;

pub use correlated::{
    correlated_check, correlated_prior, school_full_exact, serial_dictatorship, sub_market_coalition, sub_market_deviation,
    CorrelatedCheck, Participants, SubMarketComparison, FULL_MARKET, SUB_MARKET,
};
pub use example1::{example1_profile, grand_coalition_slack, Example1Slack};
pub use example3::{example3_prior, forced_matches_hold};
pub use insurance::{insurance_check, insurance_prior, InsuranceCheck};

/// Parameters of a reproducible case.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CaseId {
    /// Complete 3×3 preferences with a unique stable matching; the uniform
    /// lottery over perfect matchings cannot be blocked.
    Example1,
    /// The iid uniform 3×3 prior, where the grand coalition blocks any stable mechanism in the interim.
    Example2Interim,
    /// A pair that blocks every stable mechanism ex ante; requires `0 < p < 1/4`.
    Example3ExAnte { p: Rational },
    /// Two agents who gain in expected utility by pairing off although no dominance block exists.
    Insurance { p: Rational, utilities: [Rational; 3] },
    /// Schools with a common ranking of students; a sub-market of two schools
    /// and two students may prefer to clear separately.
    CorrelatedSchools { delta: Rational, epsilon: Rational },
}

fn open_unit(name: &str, x: &Rational, upper: &Rational) -> Result<()> {
    if !x.is_positive() || x >= upper {
        return Err(Error::Domain(format!("{name} = {x} must lie strictly between 0 and {upper}")));
    }
    Ok(())
}

impl CaseId {
    pub fn example3(p: Rational) -> Result<Self> {
        open_unit("p", &p, &Rational::new(1, 4))?;
        Ok(CaseId::Example3ExAnte { p })
    }

    pub fn insurance(p: Rational, utilities: [Rational; 3]) -> Result<Self> {
        open_unit("p", &p, &Rational::one())?;
        Ok(CaseId::Insurance { p, utilities })
    }

    pub fn correlated(delta: Rational, epsilon: Rational) -> Result<Self> {
        open_unit("delta", &delta, &Rational::one())?;
        open_unit("epsilon", &epsilon, &Rational::one())?;
        Ok(CaseId::CorrelatedSchools { delta, epsilon })
    }

    /// Short identifier used on the command line.
    pub fn slug(&self) -> &'static str {
        match self {
            CaseId::Example1 => "example1",
            CaseId::Example2Interim => "example2",
            CaseId::Example3ExAnte { .. } => "example3",
            CaseId::Insurance { .. } => "insurance",
            CaseId::CorrelatedSchools { .. } => "correlated",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            CaseId::Example1 | CaseId::Example2Interim => Ok(()),
            CaseId::Example3ExAnte { p } => open_unit("p", p, &Rational::new(1, 4)),
            CaseId::Insurance { p, .. } => open_unit("p", p, &Rational::one()),
            CaseId::CorrelatedSchools { delta, epsilon } => {
                open_unit("delta", delta, &Rational::one())?;
                open_unit("epsilon", epsilon, &Rational::one())
            }
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseId::Example1 | CaseId::Example2Interim => f.write_str(self.slug()),
            CaseId::Example3ExAnte { p } => write!(f, "example3(p = {p})"),
            CaseId::Insurance { p, utilities: [a, b, c] } => write!(f, "insurance(p = {p}, u = ({a}, {b}, {c}))"),
            CaseId::CorrelatedSchools { delta, epsilon } => write!(f, "correlated(delta = {delta}, epsilon = {epsilon})"),
        }
    }
}

impl Serialize for CaseId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut v = serde_json::json!({ "case": self.slug() });
        match self {
            CaseId::Example1 | CaseId::Example2Interim => {}
            CaseId::Example3ExAnte { p } => v["p"] = serde_json::json!(p),
            CaseId::Insurance { p, utilities } => {
                v["p"] = serde_json::json!(p);
                v["utilities"] = serde_json::json!(utilities);
            }
            CaseId::CorrelatedSchools { delta, epsilon } => {
                v["delta"] = serde_json::json!(delta);
                v["epsilon"] = serde_json::json!(epsilon);
            }
        }
        v.serialize(serializer)
    }
}

/// An exact quantity or verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Number(Rational),
    Vector(Vec<Rational>),
    Count(usize),
    Flag(bool),
    Text(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(x) => write!(f, "{x}"),
            Value::Vector(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "({})", parts.join(", "))
            }
            Value::Count(n) => write!(f, "{n}"),
            Value::Flag(b) => write!(f, "{b}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

impl From<Rational> for Value {
    fn from(x: Rational) -> Self {
        Value::Number(x)
    }
}

impl From<Vec<Rational>> for Value {
    fn from(v: Vec<Rational>) -> Self {
        Value::Vector(v)
    }
}

impl From<usize> for Value {
    fn from(n: usize) -> Self {
        Value::Count(n)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Flag(b)
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Claim {
    pub description: String,
    pub expected: Value,
    pub computed: Value,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseReport {
    pub case: CaseId,
    pub claims: Vec<Claim>,
    /// Computed facts with no expected value attached.
    pub findings: Vec<(String, Value)>,
    /// Labelled witness JSON, each already re-verified by the checker.
    pub witnesses: Vec<(String, serde_json::Value)>,
}

impl CaseReport {
    fn new(case: CaseId) -> Self {
        CaseReport { case, claims: Vec::new(), findings: Vec::new(), witnesses: Vec::new() }
    }

    /// Records a claim; it passes iff `expected` and `computed` are identical.
    pub fn claim(&mut self, description: impl Into<String>, expected: impl Into<Value>, computed: impl Into<Value>) {
        let (expected, computed) = (expected.into(), computed.into());
        let pass = expected == computed;
        self.claims.push(Claim { description: description.into(), expected, computed, pass });
    }

    pub fn finding(&mut self, description: impl Into<String>, value: impl Into<Value>) {
        self.findings.push((description.into(), value.into()));
    }

    pub fn witness(&mut self, label: impl Into<String>, json: serde_json::Value) {
        self.witnesses.push((label.into(), json));
    }

    pub fn passed(&self) -> bool {
        self.claims.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Claim> {
        self.claims.iter().filter(|c| !c.pass)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "case": self.case,
            "passed": self.passed(),
            "claims": self.claims,
            "findings": self.findings.iter().map(|(d, v)| serde_json::json!({"description": d, "value": v})).collect::<Vec<_>>(),
            "witnesses": self.witnesses.iter().map(|(label, w)| serde_json::json!({"label": label, "witness": w})).collect::<Vec<_>>(),
        })
    }

    /// A plain-text table, one row per claim.
    pub fn to_text(&self) -> String {
        let rows: Vec<[String; 4]> = self
            .claims
            .iter()
            .map(|c| {
                [c.description.clone(), c.expected.to_string(), c.computed.to_string(), if c.pass { "ok" } else { "FAIL" }.into()]
            })
            .collect();
        let header = ["claim".to_string(), "expected".into(), "computed".into(), "".into()];
        let mut widths = [0usize; 4];
        for row in std::iter::once(&header).chain(&rows) {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |row: &[String; 4]| {
            let cells: Vec<String> = row.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
            cells.join(" | ").trim_end().to_string()
        };
        let mut out = format!("case {}\n", self.case);
        out.push_str(&line(&header));
        out.push('\n');
        out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
        out.push('\n');
        for row in &rows {
            out.push_str(&line(row));
            out.push('\n');
        }
        for (d, v) in &self.findings {
            out.push_str(&format!("finding: {d}: {v}\n"));
        }
        let failed = self.failures().count();
        out.push_str(&format!(
            "{} of {} claims hold{}\n",
            self.claims.len() - failed,
            self.claims.len(),
            if self.witnesses.is_empty() { String::new() } else { format!(", {} witnesses verified", self.witnesses.len()) }
        ));
        out
    }
}

/// Market, prior and mechanisms under audit for a case.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub market: Market,
    pub prior: Prior,
    pub mechanisms: Vec<Mechanism>,
}

pub fn build_case(id: &CaseId) -> Result<Scenario> {
    id.validate()?;
    let market = Market::square(3);
    let stable = || vec![Mechanism::RandomStable, Mechanism::da_men(), Mechanism::da_women()];
    Ok(match id {
        CaseId::Example1 => Scenario {
            market,
            prior: Prior::point_mass(example1_profile()),
            mechanisms: vec![Mechanism::UniformRandomFull, Mechanism::RandomStable],
        },
        CaseId::Example2Interim => Scenario {
            market,
            prior: crate::prior::iid_uniform_prior(market)?,
            mechanisms: vec![Mechanism::RandomStable, Mechanism::UniformRandomFull],
        },
        CaseId::Example3ExAnte { p } => Scenario { market, prior: example3_prior(p)?, mechanisms: stable() },
        CaseId::Insurance { p, .. } => Scenario { market, prior: insurance_prior(p)?, mechanisms: vec![Mechanism::RandomStable] },
        CaseId::CorrelatedSchools { delta, epsilon } => Scenario {
            market,
            prior: correlated_prior(delta, epsilon)?,
            mechanisms: vec![serial_dictatorship(FULL_MARKET), serial_dictatorship(SUB_MARKET)],
        },
    })
}

/// Recomputes every claim of the case.
pub fn run_case(id: &CaseId) -> Result<CaseReport> {
    let scenario = build_case(id)?;
    let mut report = CaseReport::new(id.clone());
    match id {
        CaseId::Example1 => example1::run(&scenario, &mut report)?,
        CaseId::Example2Interim => example2::run(&scenario, &mut report)?,
        CaseId::Example3ExAnte { p } => example3::run(p, &scenario, &mut report)?,
        CaseId::Insurance { p, utilities } => insurance::run(p, utilities, &scenario, &mut report)?,
        CaseId::CorrelatedSchools { delta, epsilon } => correlated::run(delta, epsilon, &scenario, &mut report)?,
    }
    Ok(report)
}

/// Ranking of `owner` from a best-first comma-separated list (truncation as in [`Ranking::from_prefix`]).
pub(crate) fn ranking(market: Market, owner: &str, list: &str) -> Result<Ranking> {
    let owner = AgentId::parse(owner)?;
    let prefix = list.split(',').map(|k| AgentId::parse(k.trim())).collect::<Result<Vec<_>>>()?;
    Ranking::from_prefix(owner, market, &prefix)
}

/// Closed-form rank distribution padded with zeros to the domain size.
pub(crate) fn padded(mut v: Vec<Rational>, domain: usize) -> Vec<Rational> {
    v.resize(domain, Rational::zero());
    v
}
