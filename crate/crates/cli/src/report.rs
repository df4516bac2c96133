//! Verification reports with a stable JSON layout.

use std::fmt;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Fixed registry of identities a check can witness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tag {
    LiePairStructure,
    TorsionFree,
    BottExtension,
    FunctionHomotopy,
    FedosovGauge,
    FedosovFiltration,
    QSquared,
    PbwCoalgebra,
    KapranovAction,
    LightningFlat,
    QEqualsLightning,
    OperatorHomotopy,
    PhiFixedPoint,
    Intertwining,
    PhiUniqueness,
    AlgebraMorphism,
    Decomposition,
    LogBackends,
    ExpLog,
    Pushforward,
    GeodesicJetPbw,
    GeodesicJetPhi,
    GeodesicPbwPhi,
    GeodesicRk4,
}

impl Tag {
    pub const ALL: [Tag; 24] = [
        Tag::LiePairStructure,
        Tag::TorsionFree,
        Tag::BottExtension,
        Tag::FunctionHomotopy,
        Tag::FedosovGauge,
        Tag::FedosovFiltration,
        Tag::QSquared,
        Tag::PbwCoalgebra,
        Tag::KapranovAction,
        Tag::LightningFlat,
        Tag::QEqualsLightning,
        Tag::OperatorHomotopy,
        Tag::PhiFixedPoint,
        Tag::Intertwining,
        Tag::PhiUniqueness,
        Tag::AlgebraMorphism,
        Tag::Decomposition,
        Tag::LogBackends,
        Tag::ExpLog,
        Tag::Pushforward,
        Tag::GeodesicJetPbw,
        Tag::GeodesicJetPhi,
        Tag::GeodesicPbwPhi,
        Tag::GeodesicRk4,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::LiePairStructure => "lie-pair-structure",
            Tag::TorsionFree => "torsion-free",
            Tag::BottExtension => "bott-extension",
            Tag::FunctionHomotopy => "function-homotopy",
            Tag::FedosovGauge => "fedosov-gauge",
            Tag::FedosovFiltration => "fedosov-filtration",
            Tag::QSquared => "q-squared",
            Tag::PbwCoalgebra => "pbw-coalgebra",
            Tag::KapranovAction => "kapranov-action",
            Tag::LightningFlat => "lightning-flat",
            Tag::QEqualsLightning => "q-equals-lightning",
            Tag::OperatorHomotopy => "operator-homotopy",
            Tag::PhiFixedPoint => "phi-fixed-point",
            Tag::Intertwining => "intertwining",
            Tag::PhiUniqueness => "phi-uniqueness",
            Tag::AlgebraMorphism => "algebra-morphism",
            Tag::Decomposition => "decomposition",
            Tag::LogBackends => "log-backends",
            Tag::ExpLog => "exp-log",
            Tag::Pushforward => "pushforward",
            Tag::GeodesicJetPbw => "geodesic-jet-pbw",
            Tag::GeodesicJetPhi => "geodesic-jet-phi",
            Tag::GeodesicPbwPhi => "geodesic-pbw-phi",
            Tag::GeodesicRk4 => "geodesic-rk4",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
        })
    }
}

/// One named check. `residual` is `"0"` for a passing exact check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub residual: String,
    pub tag: Tag,
    pub checked: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

impl Check {
    pub fn pass(name: impl Into<String>, tag: Tag, checked: usize) -> Self {
        Check {
            name: name.into(),
            status: Status::Pass,
            residual: "0".into(),
            tag,
            checked,
            witness: None,
        }
    }

    pub fn fail(name: impl Into<String>, tag: Tag, checked: usize, residual: String, witness: Option<String>) -> Self {
        Check {
            name: name.into(),
            status: Status::Fail,
            residual,
            tag,
            checked,
            witness,
        }
    }

    /// Pass when `failure` is `None`, otherwise fail with its witness and residual.
    pub fn exact<W: fmt::Display, R: fmt::Display>(
        name: impl Into<String>,
        tag: Tag,
        checked: usize,
        failure: Option<(W, R)>,
    ) -> Self {
        match failure {
            None => Check::pass(name, tag, checked),
            Some((w, r)) => Check::fail(name, tag, checked, r.to_string(), Some(w.to_string())),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Serialize)]
struct Payload<'a> {
    command: &'a str,
    inputs_digest: &'a str,
    status: Status,
    checks: &'a [Check],
    data: &'a Value,
}

#[derive(Serialize)]
struct Full<'a> {
    #[serde(flatten)]
    payload: Payload<'a>,
    report_digest: String,
    duration_ms: u64,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub command: String,
    pub inputs_digest: String,
    pub checks: Vec<Check>,
    pub data: Value,
    pub duration_ms: u64,
}

impl Report {
    pub fn status(&self) -> Status {
        if self.checks.iter().all(Check::passed) {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn passed(&self) -> bool {
        self.status() == Status::Pass
    }

    fn payload(&self) -> Payload<'_> {
        Payload {
            command: &self.command,
            inputs_digest: &self.inputs_digest,
            status: self.status(),
            checks: &self.checks,
            data: &self.data,
        }
    }

    /// The report without its duration; identical across runs with the
    /// same inputs.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(&self.payload()).expect("report serializes") + "\n"
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.canonical_json().as_bytes())
    }

    /// Canonical payload plus `report_digest` and `duration_ms`.
    pub fn to_json(&self) -> String {
        let full = Full {
            payload: self.payload(),
            report_digest: self.digest(),
            duration_ms: self.duration_ms,
        };
        serde_json::to_string_pretty(&full).expect("report serializes") + "\n"
    }

    pub fn summary(&self, verbose: bool) -> String {
        let mut out = String::new();
        for c in &self.checks {
            if verbose || !c.passed() {
                out.push_str(&format!("{} {} [{}] ({} checked)", c.status, c.name, c.tag, c.checked));
                if !c.passed() {
                    if let Some(w) = &c.witness {
                        out.push_str(&format!(" witness {w}"));
                    }
                    out.push_str(&format!(" residual {}", c.residual));
                }
                out.push('\n');
            }
        }
        let failed = self.checks.iter().filter(|c| !c.passed()).count();
        out.push_str(&format!(
            "{}: {} ({} checks, {failed} failed, {} ms)\n",
            self.command,
            self.status(),
            self.checks.len(),
            self.duration_ms
        ));
        out
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
