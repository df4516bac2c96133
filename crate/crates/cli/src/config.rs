//! Command-line surface and run configuration.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "fedosov", version, about = "Exact verification of Fedosov, PBW and intertwiner identities for Lie pairs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// Presentation file (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Truncation order N; defaults to the presentation's value.
    #[arg(long, global = true, value_name = "N")]
    pub order: Option<usize>,
    /// Write the full JSON report here.
    #[arg(long, global = true, value_name = "PATH")]
    pub report: Option<PathBuf>,
    /// Splitting whose contraction is used (Fedosov gauge and the homotopy in the φ solve).
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub splitting: u8,
    /// Print the JSON report on stdout instead of the summary.
    #[arg(long, global = true)]
    pub json: bool,
    /// List every check in the summary, not only failures.
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Structural identities of the pair and torsion-freeness of the connections.
    Validate,
    /// Fedosov vector fields of both connections and the Q² check.
    Fedosov,
    /// PBW tables, coalgebra and Kapranov checks, and Q = d^∇⚡.
    Pbw,
    /// Solve for the intertwiner φ and check it.
    Phi,
    /// Y = log φ by both backends.
    Log,
    /// Geodesic transition jets against pbw₂⁻¹∘pbw₁ and e^Y.
    Geodesic(GeodesicArgs),
    /// Every suite above.
    VerifyAll,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GeodesicArgs {
    /// Christoffel entries `[{"u","i","k","coeff"}, …]`, inline or as a file.
    #[arg(long, value_name = "SPEC")]
    pub connection1: Option<String>,
    #[arg(long, value_name = "SPEC")]
    pub connection2: Option<String>,
    /// Base point, comma-separated rationals.
    #[arg(long, value_name = "X1,X2,…", allow_hyphen_values = true)]
    pub point: Option<String>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Fedosov => "fedosov",
            Command::Pbw => "pbw",
            Command::Phi => "phi",
            Command::Log => "log",
            Command::Geodesic(_) => "geodesic",
            Command::VerifyAll => "verify-all",
        }
    }
}
