use std::path::PathBuf;

use clap::{Args, ValueEnum};
use freevar::levy::{
    bp_limit_check, pair_to_triple, triple_to_cumulants, triple_to_pair, variation_triple,
    BpOptions, GeneratingPair, GeneratingTriple, LevyError, VariationMap,
};
use freevar::measure::Measure;
use freevar::transforms::TransformError;
use serde::{Deserialize, Serialize};

use crate::manifest::{read_file, write_file};
use crate::{Failure, Outcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    /// Triple JSON -> pair JSON.
    ToPair,
    /// Pair JSON -> triple JSON.
    ToTriple,
    /// Triple JSON -> triple of the variation process under `--p`.
    Variation,
    /// Triple JSON -> the first `--n` free cumulants.
    Cumulants,
    /// Family JSON -> per-N residual table (CSV).
    BpCheck,
}

#[derive(Args, Debug, Serialize)]
pub struct LevyArgs {
    pub action: Action,
    #[arg(long)]
    pub input: PathBuf,
    /// `pow:K` or `poly:c0,c1,…` (with c0 = 0).
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Write here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl LevyArgs {
    pub fn name(&self) -> &'static str {
        match self.action {
            Action::ToPair => "to-pair",
            Action::ToTriple => "to-triple",
            Action::Variation => "variation",
            Action::Cumulants => "cumulants",
            Action::BpCheck => "bp-check",
        }
    }
}

pub fn failure(e: LevyError) -> Failure {
    match e {
        LevyError::Divergent(q) => Failure::Numeric(format!("numeric divergence: {q} is not finite")),
        LevyError::Transform(
            t @ (TransformError::NoConvergence { .. } | TransformError::NoInverse { .. }),
        ) => Failure::Numeric(t.to_string()),
        other => Failure::Usage(other.to_string()),
    }
}

fn finite(name: &str, v: f64) -> Result<(), Failure> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Failure::Numeric(format!("numeric divergence: {name} = {v}")))
    }
}

fn finite_measure(name: &str, m: &Measure<f64>) -> Result<(), Failure> {
    for &(x, w) in &m.atoms {
        finite(&format!("{name} atom"), x)?;
        finite(&format!("{name} atom mass"), w)?;
    }
    if let Some(g) = &m.density {
        for &v in &g.values {
            finite(&format!("{name} density"), v)?;
        }
    }
    Ok(())
}

fn finite_triple(t: &GeneratingTriple<f64>) -> Result<(), Failure> {
    finite("eta", t.eta)?;
    finite("a", t.a)?;
    finite_measure("rho", t.rho.measure())
}

pub fn parse_p(spec: &str) -> Result<VariationMap<f64>, Failure> {
    let bad = |m: String| Failure::Usage(format!("bad --p {spec:?}: {m}"));
    let (kind, rest) = spec.split_once(':').ok_or_else(|| bad("expected pow:K or poly:c0,c1,…".into()))?;
    match kind {
        "pow" => {
            let k: u32 = rest.trim().parse().map_err(|e| bad(format!("{e}")))?;
            VariationMap::power(k).map_err(failure)
        }
        "poly" => {
            let coeffs = rest
                .split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|e| bad(format!("{c}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            VariationMap::polynomial(coeffs).map_err(failure)
        }
        _ => Err(bad(format!("unknown map kind {kind:?}"))),
    }
}

/// Null arrays `μ_N` for the Bercovici–Pata check.
#[derive(Debug, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
enum Family {
    /// `(1 − λ/N) δ₀ + (λ/N) δ₁`.
    Bernoulli { lambda: f64, ns: Vec<usize>, bin_width: Option<f64> },
    /// `(1 − λ/N) δ₀ + (λ/N) ν` for an atomic jump law `ν`.
    Poisson { lambda: f64, jump: Measure<f64>, ns: Vec<usize>, bin_width: Option<f64> },
}

fn bp_check(text: &str) -> Result<String, Failure> {
    let family: Family = serde_json::from_str(text).map_err(|e| Failure::Usage(e.to_string()))?;
    let poisson = |lambda: f64, jump: Measure<f64>, ns: Vec<usize>, h: Option<f64>| {
        if !(lambda > 0.0) || ns.iter().any(|&n| (n as f64) < lambda) {
            return Err(Failure::Usage("need λ > 0 and every N ≥ λ".into()));
        }
        jump.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        let f = move |n: usize| {
            let p = lambda / n as f64;
            let mut atoms = vec![(0.0, 1.0 - p * jump.total_mass())];
            atoms.extend(jump.atoms.iter().map(|&(x, w)| (x, p * w)));
            let mut mu = Measure::atomic(atoms);
            mu.merge_atoms();
            mu
        };
        Ok((Box::new(f) as Box<dyn Fn(usize) -> Measure<f64>>, ns, h))
    };
    let (f, ns, h) = match family {
        Family::Bernoulli { lambda, ns, bin_width } => poisson(lambda, Measure::point(1.0), ns, bin_width)?,
        Family::Poisson { lambda, jump, ns, bin_width } => poisson(lambda, jump, ns, bin_width)?,
    };
    if ns.contains(&0) {
        return Err(Failure::Usage("N must be positive".into()));
    }
    let opts = BpOptions { bin_width: h.unwrap_or(BpOptions::default().bin_width) };
    if !(opts.bin_width > 0.0) {
        return Err(Failure::Usage("bin_width must be positive".into()));
    }
    let report = bp_limit_check(&*f, &ns, &opts).map_err(failure)?;
    for r in &report.rows {
        finite("gamma", r.gamma)?;
        finite("sigma_mass", r.sigma_mass)?;
    }
    Ok(report.to_csv())
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("output serialises") + "\n"
}

pub fn run(args: &LevyArgs) -> Result<Outcome, Failure> {
    let text = read_file(&args.input)?;
    let triple = || GeneratingTriple::from_json(&text).map_err(failure);
    let body = match args.action {
        Action::ToPair => {
            let p = triple_to_pair(&triple()?).map_err(failure)?;
            finite("gamma", p.gamma)?;
            finite_measure("sigma", &p.sigma)?;
            json(&p)
        }
        Action::ToTriple => {
            let p = GeneratingPair::from_json(&text).map_err(failure)?;
            let t = pair_to_triple(&p).map_err(failure)?;
            finite_triple(&t)?;
            json(&t)
        }
        Action::Variation => {
            let spec = args.p.as_deref().ok_or_else(|| Failure::Usage("missing --p".into()))?;
            let vm = parse_p(spec)?;
            let t = variation_triple(&triple()?, &vm).map_err(failure)?;
            finite_triple(&t)?;
            json(&t)
        }
        Action::Cumulants => {
            let n = args.n.ok_or_else(|| Failure::Usage("missing --n".into()))?;
            let k = triple_to_cumulants(&triple()?, n).map_err(failure)?;
            for (i, &v) in k.values().iter().enumerate() {
                finite(&format!("kappa_{}", i + 1), v)?;
            }
            json(&serde_json::json!({ "cumulants": k.values() }))
        }
        Action::BpCheck => bp_check(&text)?,
    };
    let mut outcome = Outcome { inputs: vec![args.input.clone()], ..Outcome::default() };
    match &args.out {
        Some(path) => {
            write_file(path, &body)?;
            outcome.outputs.push(path.clone());
        }
        None => print!("{body}"),
    }
    Ok(outcome)
}
