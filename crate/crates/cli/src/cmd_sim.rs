use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use freevar::exec::{with_threads, Exec};
use freevar::rmt::{
    counterexample_report, matcauchy_report, mixed_decay, verify_integral_identity, verify_variation,
    MatCauchyConfig, MixedMode, MixedOptions, RmtError, SimConfig, SimReport, IDENTITY_MAX_K,
};
use serde::{Deserialize, Serialize};

use crate::manifest::{read_file, write_file};
use crate::{Failure, Outcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Campaign {
    /// Moments of the `k_max`-th power sum against the variation-process prediction.
    Variation,
    /// The distinct-neighbour identity for every `k ≤ k_max`.
    Identity,
    /// Decay of a mixed sum of two independent families, or the scalar counterexample.
    Mixed,
    /// Matricial Cauchy transform of GUE samples.
    Matcauchy,
}

#[derive(Args, Debug, Serialize)]
pub struct SimArgs {
    pub campaign: Campaign,
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; defaults to rayon's choice.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl SimArgs {
    pub fn name(&self) -> &'static str {
        match self.campaign {
            Campaign::Variation => "variation",
            Campaign::Identity => "identity",
            Campaign::Mixed => "mixed",
            Campaign::Matcauchy => "matcauchy",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixedPair {
    a: SimConfig,
    b: SimConfig,
    #[serde(default = "default_ns")]
    ns: Vec<usize>,
    #[serde(default = "default_ratio")]
    ratio: f64,
}

fn default_ns() -> Vec<usize> {
    MixedOptions::default().ns
}

fn default_ratio() -> f64 {
    MixedOptions::default().ratio
}

fn default_rel_tol() -> f64 {
    0.05
}

#[derive(Debug, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
enum MixedConfig {
    Anticommutator(MixedPair),
    Product(MixedPair),
    SquareOfSum(MixedPair),
    Counterexample {
        alpha: f64,
        t: f64,
        ns: Vec<usize>,
        #[serde(default = "default_rel_tol")]
        tolerance: f64,
    },
}

fn failure(e: RmtError) -> Failure {
    match e {
        RmtError::Numeric(m) => Failure::Numeric(m),
        RmtError::Levy(l) => crate::cmd_levy::failure(l),
        other => Failure::Usage(other.to_string()),
    }
}

fn schema(e: serde_json::Error) -> Failure {
    Failure::Usage(format!("invalid configuration: {e}"))
}

fn reports(campaign: Campaign, text: &str, exec: Exec) -> Result<Vec<(String, SimReport)>, Failure> {
    match campaign {
        Campaign::Variation => {
            let c = SimConfig::from_json(text).map_err(failure)?;
            let k = u32::try_from(c.k_max).map_err(|_| Failure::Usage("k_max is too large".into()))?;
            Ok(vec![("variation".into(), verify_variation(&c, k, exec).map_err(failure)?)])
        }
        Campaign::Identity => {
            let c = SimConfig::from_json(text).map_err(failure)?;
            if c.k_max > IDENTITY_MAX_K {
                return Err(Failure::Usage(format!("k_max = {} exceeds {IDENTITY_MAX_K}", c.k_max)));
            }
            (1..=c.k_max)
                .map(|k| {
                    let r = verify_integral_identity(&c, k, exec).map_err(failure)?;
                    Ok((format!("identity_k{k}"), r))
                })
                .collect()
        }
        Campaign::Mixed => {
            let c: MixedConfig = serde_json::from_str(text).map_err(schema)?;
            let (mode, pair) = match c {
                MixedConfig::Counterexample { alpha, t, ns, tolerance } => {
                    let r = counterexample_report(alpha, t, &ns, tolerance).map_err(failure)?;
                    return Ok(vec![("mixed".into(), r)]);
                }
                MixedConfig::Anticommutator(p) => (MixedMode::Anticommutator, p),
                MixedConfig::Product(p) => (MixedMode::Product, p),
                MixedConfig::SquareOfSum(p) => (MixedMode::SquareOfSum, p),
            };
            let opts = MixedOptions { ns: pair.ns, ratio: pair.ratio };
            Ok(vec![("mixed".into(), mixed_decay(&pair.a, &pair.b, mode, &opts, exec).map_err(failure)?)])
        }
        Campaign::Matcauchy => {
            let c = MatCauchyConfig::from_json(text).map_err(failure)?;
            Ok(vec![("matcauchy".into(), matcauchy_report(&c).map_err(failure)?)])
        }
    }
}

/// Writes `<stem>.json`, one CSV per histogram and one per series; returns the paths.
fn write_report(dir: &Path, stem: &str, r: &SimReport) -> Result<Vec<PathBuf>, Failure> {
    let mut paths = Vec::new();
    let json = dir.join(format!("{stem}.json"));
    write_file(&json, &(r.to_json() + "\n"))?;
    paths.push(json);
    for (name, h) in &r.histograms {
        let p = dir.join(format!("{stem}_hist_{name}.csv"));
        write_file(&p, &h.to_csv())?;
        paths.push(p);
    }
    for (name, series) in &r.series {
        let p = dir.join(format!("{stem}_series_{name}.csv"));
        let mut s = String::from("N,mean,stderr\n");
        for pt in series {
            s.push_str(&format!("{},{},{}\n", pt.n, pt.mean, pt.stderr));
        }
        write_file(&p, &s)?;
        paths.push(p);
    }
    Ok(paths)
}

pub fn run(args: &SimArgs) -> Result<Outcome, Failure> {
    let text = read_file(&args.config)?;
    let reports = match args.threads {
        Some(0) => return Err(Failure::Usage("--threads must be positive".into())),
        Some(n) => with_threads(n, || reports(args.campaign, &text, Exec::Parallel))?,
        None => reports(args.campaign, &text, Exec::Parallel)?,
    };
    let mut outcome = Outcome { inputs: vec![args.config.clone()], ..Outcome::default() };
    for (stem, r) in &reports {
        outcome.outputs.extend(write_report(&args.out, stem, r)?);
        for c in &r.checks {
            println!("{} {} {}: {}", if c.pass { "PASS" } else { "FAIL" }, r.kind, c.name, c.detail);
        }
        println!("{}", r.summary_line());
        outcome.failed |= !r.passed();
    }
    Ok(outcome)
}
