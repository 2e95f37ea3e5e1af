use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[command(name = "ratgroup", version, about = "Structure of Q*/Γ for ratios (an+b)/(An+B)")]
pub struct CommandRequest {
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    /// Worker thread cap
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Text,
}

#[derive(Args, Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyArgs {
    #[arg(short = 'a', allow_negative_numbers = true)]
    pub a: i64,
    #[arg(short = 'b', allow_negative_numbers = true)]
    pub b: i64,
    #[arg(short = 'A', value_name = "A", allow_negative_numbers = true)]
    #[serde(rename = "A")]
    pub big_a: i64,
    #[arg(short = 'B', value_name = "B", allow_negative_numbers = true)]
    #[serde(rename = "B")]
    pub big_b: i64,
    /// First index; raised automatically until both forms are positive
    #[arg(short = 'k', default_value_t = 1, allow_negative_numbers = true)]
    pub k: i64,
}

#[derive(Args, Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportArgs {
    /// Largest prime kept as a coordinate
    #[arg(long)]
    pub max_prime: Option<u64>,
    /// Primes quotiented out, comma separated
    #[arg(long, value_delimiter = ',')]
    pub exclude: Vec<u64>,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
pub enum Command {
    /// Torsion, free rank, generators and dual characters, cross-checked with the lattice
    Determine {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(short = 'N', default_value_t = 1000)]
        n_max: i64,
    },
    /// Whether r lies in Γ, or its order in the quotient
    Membership {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(short = 'r')]
        r: String,
        #[arg(short = 'N', default_value_t = 1000)]
        n_max: i64,
        #[command(flatten)]
        support: SupportArgs,
    },
    /// Explicit product of ratios equal to r
    Represent {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(short = 'r')]
        r: String,
        #[arg(short = 'N', default_value_t = 1000)]
        n_max: i64,
        #[command(flatten)]
        support: SupportArgs,
    },
    /// Empirical mean of g(an+b)g(An+B)* against its Euler product
    Correlate {
        #[command(flatten)]
        family: FamilyArgs,
        /// Summation range x
        #[arg(short = 'N', default_value_t = 100_000)]
        x: u64,
        #[arg(long, default_value_t = 10_000)]
        prime_bound: u64,
        /// Base character label `m=..;e=..`
        #[arg(long)]
        character: Option<String>,
        /// Override `p=k/n` (value e^(2πik/n)) or `p=0`
        #[arg(long = "set")]
        overrides: Vec<String>,
        /// Use the i-th dual character of the family
        #[arg(long, conflicts_with_all = ["character", "overrides"])]
        dual: Option<usize>,
    },
    /// Dirichlet characters of a modulus
    Characters {
        #[arg(long)]
        modulus: u64,
        #[arg(long)]
        order_divides: Option<u64>,
        #[arg(long)]
        primitive_only: bool,
    },
    /// The normalized sum theta_{d1,d2}(chi)
    Theta {
        #[command(flatten)]
        family: FamilyArgs,
        /// Character modulo delta; principal when absent
        #[arg(long)]
        character: Option<String>,
        #[arg(long)]
        d1: u64,
        #[arg(long)]
        d2: u64,
    },
    /// One local factor eta(beta, gamma) at a prime of delta
    Eta {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        character: Option<String>,
        #[arg(long)]
        ell: u64,
        #[arg(long)]
        beta: u32,
        #[arg(long)]
        gamma: u32,
    },
    /// Invariants of the truncated lattice quotient
    Oracle {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(short = 'N', default_value_t = 1000)]
        n_max: i64,
        #[command(flatten)]
        support: SupportArgs,
        /// Only ratios with n = n0 mod M
        #[arg(long, value_name = "n0,M", value_parser = parse_class)]
        restrict_class: Option<(i64, i64)>,
    },
}

fn parse_class(s: &str) -> Result<(i64, i64), String> {
    let (n0, m) = s.split_once(',').ok_or("expected n0,M")?;
    let n0 = n0.trim().parse().map_err(|e| format!("{e}"))?;
    let m: i64 = m.trim().parse().map_err(|e| format!("{e}"))?;
    if m <= 0 {
        return Err("modulus must be positive".into());
    }
    Ok((n0, m))
}
