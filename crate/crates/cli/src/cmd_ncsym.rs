use std::path::PathBuf;

use clap::{Args, ValueEnum};
use freevar::ncsym::{
    distinct_neighbor_bruteforce, expand_letters, p_basis, psi_poly, stochastic_integral_poly,
    Alphabet, NcPolynomial, NcsymError,
};
use freevar::partitions::{Composition, PartitionError};
use serde::Serialize;

use crate::manifest::write_file;
use crate::{Failure, Outcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    /// `P_σ`, the sum over words whose neighbouring letters differ.
    Distinct,
    /// The recursion `ψₙ` in `X, X2, X3, …`.
    Psi,
    /// The signed sum over compositions of `k`, in the variations `y1, y2, …`.
    Integral,
}

#[derive(Args, Debug, Serialize)]
pub struct NcsymArgs {
    pub kind: Kind,
    /// Degree; for `distinct` this means the composition `1,1,…,1`.
    #[arg(long)]
    pub k: Option<usize>,
    /// Block sizes for `distinct`, e.g. `1,2`.
    #[arg(long, value_delimiter = ',')]
    pub composition: Option<Vec<usize>>,
    /// Order for `psi`.
    #[arg(long)]
    pub n: Option<usize>,
    /// Run the letter-expansion oracle.
    #[arg(long)]
    pub verify: bool,
    /// Number of letters for `--verify`.
    #[arg(long, default_value_t = 3)]
    pub letters: usize,
    #[arg(long)]
    pub json: bool,
    /// Also write the output here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl NcsymArgs {
    pub fn name(&self) -> &'static str {
        match self.kind {
            Kind::Distinct => "distinct",
            Kind::Psi => "psi",
            Kind::Integral => "integral",
        }
    }
}

fn bounds(e: NcsymError) -> Failure {
    Failure::Usage(e.to_string())
}

fn bad_composition(e: PartitionError) -> Failure {
    Failure::Usage(e.to_string())
}

fn require(v: Option<usize>, flag: &str) -> Result<usize, Failure> {
    v.ok_or_else(|| Failure::Usage(format!("missing --{flag}")))
}

/// The polynomial asked for, plus its letter-expansion oracle if one exists.
fn build(args: &NcsymArgs) -> Result<(NcPolynomial, Option<bool>), Failure> {
    match args.kind {
        Kind::Distinct => {
            let parts = match (&args.composition, args.k) {
                (Some(c), None) => c.clone(),
                (None, Some(k)) => vec![1; k],
                _ => return Err(Failure::Usage("give exactly one of --k and --composition".into())),
            };
            let comp = Composition::new(parts).map_err(bad_composition)?;
            let poly = p_basis(&comp.to_partition()).map_err(bounds)?;
            let verdict = if args.verify {
                let lhs = expand_letters(&poly, args.letters).map_err(bounds)?;
                let rhs = distinct_neighbor_bruteforce(&comp, args.letters).map_err(bounds)?;
                Some(lhs == rhs)
            } else {
                None
            };
            Ok((poly, verdict))
        }
        Kind::Integral => {
            let k = require(args.k, "k")?;
            let poly = stochastic_integral_poly(k).map_err(bounds)?;
            let verdict = if args.verify {
                let as_power_sums = poly.relabel(Alphabet::PowerSum);
                let comp = Composition::new(vec![1; k]).map_err(bad_composition)?;
                let basis = p_basis(&comp.to_partition()).map_err(bounds)?;
                let lhs = expand_letters(&as_power_sums, args.letters).map_err(bounds)?;
                let rhs = distinct_neighbor_bruteforce(&comp, args.letters).map_err(bounds)?;
                Some(as_power_sums == basis && lhs == rhs)
            } else {
                None
            };
            Ok((poly, verdict))
        }
        Kind::Psi => {
            if args.verify {
                return Err(Failure::Usage("psi has no letter-expansion oracle; drop --verify".into()));
            }
            let n = require(args.n, "n")?;
            Ok((psi_poly(n).map_err(bounds)?, None))
        }
    }
}

#[derive(Serialize)]
struct Term {
    /// `(generator, exponent)` runs.
    word: Vec<(u16, u16)>,
    coefficient: String,
}

#[derive(Serialize)]
struct JsonOut<'a> {
    kind: Kind,
    polynomial: String,
    terms: Vec<Term>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verify: Option<&'a str>,
}

pub fn run(args: &NcsymArgs) -> Result<Outcome, Failure> {
    let (poly, verdict) = build(args)?;
    let verify = verdict.map(|ok| if ok { "PASS" } else { "FAIL" });
    let text = if args.json {
        let terms = poly
            .sorted_terms()
            .into_iter()
            .map(|(w, c)| Term { word: w.runs().to_vec(), coefficient: c.to_string() })
            .collect();
        let out = JsonOut { kind: args.kind, polynomial: poly.to_string(), terms, verify };
        serde_json::to_string(&out).expect("output serialises") + "\n"
    } else {
        let mut s = format!("{poly}\n");
        if let Some(v) = verify {
            s.push_str(&format!("VERIFY {v}\n"));
        }
        s
    };
    print!("{text}");
    let mut outcome = Outcome { failed: verdict == Some(false), ..Outcome::default() };
    if let Some(path) = &args.out {
        write_file(path, &text)?;
        outcome.outputs.push(path.clone());
    }
    Ok(outcome)
}
