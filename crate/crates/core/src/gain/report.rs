use serde::{Deserialize, Serialize};

/// Margins at or below this are treated as violations.
pub const STRICT_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Products of `R_i (n-1)` over index subsets.
    CournotSubset,
    /// Cyclic compositions of inflated gains.
    Cyclic,
    /// Weighted cycle products with row domination.
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

/// Closed-form evaluation, or a check over a finite sample grid that cannot
/// cover every `s > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    Analytic,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    Subset,
    Cycle,
    Row,
}

/// One inequality `value < 1` (or `value <= 1` for rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub kind: ConditionKind,
    /// 1-based player labels; cycles list the visiting order.
    pub players: Vec<usize>,
    /// Constant factor in front of the `R` product, when there is one.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub coefficient: Option<f64>,
    /// Left-hand side, or the worst sampled ratio `composition(s)/s`.
    pub value: f64,
    pub margin: f64,
    pub evidence: Evidence,
}

impl Condition {
    pub fn strict_pass(&self) -> bool {
        self.margin > STRICT_MARGIN
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallGainReport {
    pub family: Family,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub omega: Option<f64>,
    pub conditions: Vec<Condition>,
    /// Row domination checks of the weighted family (non-strict).
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub feasibility: Vec<Condition>,
    /// First violated entry, feasibility rows first.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<Condition>,
    pub evidence: Evidence,
}

impl SmallGainReport {
    pub(crate) fn assemble(
        family: Family,
        omega: Option<f64>,
        conditions: Vec<Condition>,
        feasibility: Vec<Condition>,
    ) -> Self {
        let witness = feasibility
            .iter()
            .find(|c| c.margin < -STRICT_MARGIN)
            .or_else(|| conditions.iter().find(|c| !c.strict_pass()))
            .cloned();
        let evidence = if conditions.iter().any(|c| c.evidence == Evidence::Sampled) {
            Evidence::Sampled
        } else {
            Evidence::Analytic
        };
        let verdict = if witness.is_none() {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            family,
            verdict,
            omega,
            conditions,
            feasibility,
            witness,
            evidence,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }

    /// Smallest margin over the strict conditions.
    pub fn worst_margin(&self) -> f64 {
        self.conditions
            .iter()
            .map(|c| c.margin)
            .fold(f64::INFINITY, f64::min)
    }
}
