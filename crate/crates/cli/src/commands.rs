use crate::artifacts::{fmt_f, Artifacts};
use crate::error::CliError;
use crate::{CayleyArgs, Cli, Command, DecayArgs, FlattenArgs, Global, InputArg, RpfArgs, TwistArgs};
use serde::Serialize;
use std::str::FromStr;
use std::sync::Arc;
use thinlab_core::chebyshev::ChebyshevGrid;
use thinlab_core::congruence::{group::squarefree_factors, CongruenceError, GroupModQ};
use thinlab_core::expander::{build_return_set, cayley_gap, detect_level, flattening_pipeline, FlatteningConfig};
use thinlab_core::geometry::{GeometryError, Interval, MarkovModel, SchottkyData, Violation};
use thinlab_core::spectral::{decay_small_b, twisted_radius, DecayConfig, DecaySetup, InputKind};
use thinlab_core::symbolic::{SymbolicPoint, Word};
use thinlab_core::thermo::{critical_exponent, normalize_potential_with_theta, rpf_solve, NormalizedPotential};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let g = &cli.global;
    let out = Artifacts::new(&g.out, !g.no_write)?;
    match &cli.command {
        Command::Validate => validate(g, &out),
        Command::Delta => delta(g, &out),
        Command::Rpf(args) => rpf(g, args, &out),
        Command::Cayley(args) => cayley(g, args, &out),
        Command::Flatten(args) => flatten(g, args, &out),
        Command::Decay(args) => decay(g, args, &out),
        Command::Twist(args) => twist(g, args, &out),
        Command::Report(args) => crate::report::report(args.dir.as_deref().unwrap_or(&g.out), &out),
    }
}

fn load_group(g: &Global) -> Result<SchottkyData, CliError> {
    Ok(match &g.config {
        Some(path) => SchottkyData::from_json_file(path)?,
        None => SchottkyData::example(),
    })
}

struct Context {
    model: MarkovModel,
    grid: ChebyshevGrid,
}

fn context(g: &Global) -> Result<Context, CliError> {
    if g.degree < 2 {
        return Err(CliError::Validation(format!("degree {} is below 2", g.degree)));
    }
    let model = MarkovModel::build(&load_group(g)?)?;
    let grid = ChebyshevGrid::new(&model.intervals, g.degree);
    Ok(Context { model, grid })
}

fn potential(g: &Global, ctx: &Context) -> Result<NormalizedPotential, CliError> {
    let delta = critical_exponent(&ctx.model, &ctx.grid)?;
    Ok(normalize_potential_with_theta(&ctx.model, &ctx.grid, delta, 0.0, g.a0, g.theta)?)
}

fn symbol(label: &str, s: usize, n: usize) -> Result<usize, CliError> {
    if s == 0 || s > n {
        return Err(CliError::Validation(format!("{label} = {s} is not a symbol in 1..={n}")));
    }
    Ok(s - 1)
}

#[derive(Serialize)]
struct ValidateOutput {
    valid: bool,
    violations: Vec<String>,
    disks: Vec<Interval>,
    min_gap: Option<f64>,
    contraction: Option<f64>,
}

fn validate(g: &Global, out: &Artifacts) -> Result<(), CliError> {
    let data = load_group(g)?;
    match data.validate() {
        Ok(report) => {
            let model = MarkovModel::build(&data)?;
            out.json(
                "validate",
                &ValidateOutput {
                    valid: true,
                    violations: Vec::new(),
                    disks: report.disks,
                    min_gap: Some(report.min_gap),
                    contraction: Some(model.contraction()),
                },
            )
        }
        Err(GeometryError::Invalid(violations)) => {
            let text: Vec<String> = violations.iter().map(Violation::to_string).collect();
            out.json(
                "validate",
                &ValidateOutput { valid: false, violations: text.clone(), disks: Vec::new(), min_gap: None, contraction: None },
            )?;
            Err(CliError::Validation(format!("invalid Schottky data: {}", text.join("; "))))
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Serialize)]
struct DeltaOutput {
    delta: f64,
    gap: f64,
    degree: usize,
    /// `|lambda(delta) - 1|`.
    residual: f64,
}

fn delta(g: &Global, out: &Artifacts) -> Result<(), CliError> {
    let ctx = context(g)?;
    let delta = critical_exponent(&ctx.model, &ctx.grid)?;
    let rpf = rpf_solve(&ctx.model, &ctx.grid, delta)?;
    out.json("delta", &DeltaOutput { delta, gap: rpf.gap, degree: g.degree, residual: (rpf.lambda - 1.0).abs() })
}

#[derive(Serialize)]
struct RpfOutput {
    s: f64,
    degree: usize,
    lambda: f64,
    second: f64,
    gap: f64,
    nu_h: f64,
    nu_mass: f64,
    h: Vec<f64>,
    nu: Vec<f64>,
}

fn rpf(g: &Global, args: &RpfArgs, out: &Artifacts) -> Result<(), CliError> {
    let ctx = context(g)?;
    let s = match args.s {
        Some(s) => s,
        None => critical_exponent(&ctx.model, &ctx.grid)?,
    };
    let r = rpf_solve(&ctx.model, &ctx.grid, s)?;
    out.json(
        "rpf",
        &RpfOutput {
            s,
            degree: g.degree,
            lambda: r.lambda,
            second: r.second,
            gap: r.gap,
            nu_h: r.nu.iter().zip(&r.h).map(|(a, b)| a * b).sum(),
            nu_mass: r.nu.iter().sum(),
            h: r.h,
            nu: r.nu,
        },
    )
}

fn cayley(g: &Global, args: &CayleyArgs, out: &Artifacts) -> Result<(), CliError> {
    let ctx = context(g)?;
    let n = ctx.model.num_symbols();
    let (y, z) = (symbol("y", args.y, n)?, symbol("z", args.z, n)?);
    let set = build_return_set(&ctx.model, y, z, args.p)?;
    let mut rows = Vec::with_capacity(args.q.len());
    for &q in &args.q {
        let group = GroupModQ::new(q)?;
        let c = cayley_gap(&set, &group)?;
        rows.push(vec![q.to_string(), (c.lambda1 as u64).to_string(), fmt_f(c.lambda2), fmt_f(c.epsilon)]);
    }
    out.csv("cayley", &["q", "degree", "lambda2", "epsilon"], &rows)
}

fn flatten(g: &Global, args: &FlattenArgs, out: &Artifacts) -> Result<(), CliError> {
    if args.l == 0 || !args.r.is_multiple_of(args.l) {
        return Err(CliError::Validation(format!("r = {} is not a multiple of l = {}", args.r, args.l)));
    }
    let ctx = context(g)?;
    let tail = Word::from_str(&args.tail)?;
    let x = SymbolicPoint::periodic(Word::from_str(&args.x)?.0);
    x.check(&ctx.model.transitions)?;
    let primes = squarefree_factors(args.q).ok_or(CongruenceError::NotSquareFree(args.q))?;
    let level = detect_level(&ctx.model, &primes, args.p)?;
    if let Some(&p) = level.bad_primes.first() {
        return Err(CongruenceError::BadPrime(p).into());
    }
    let pot = potential(g, &ctx)?;
    let cfg = FlatteningConfig {
        r_prime: args.r / args.l,
        l: args.l,
        p: args.p,
        tail: tail.0,
        x,
        b: args.b,
        seed: args.seed,
        dense_limit: args.dense_limit,
    };
    let report = flattening_pipeline(&pot, Arc::new(GroupModQ::new(args.q)?), &cfg)?;
    out.json("flatten", &report)
}

fn decay(g: &Global, args: &DecayArgs, out: &Artifacts) -> Result<(), CliError> {
    // validate every modulus before any work
    for &q in &args.q {
        squarefree_factors(q).ok_or(CongruenceError::NotSquareFree(q))?;
    }
    let ctx = context(g)?;
    let pot = potential(g, &ctx)?;
    let setup = DecaySetup::new(pot, g.depth, args.p)?;
    let mut rows = Vec::new();
    for &q in &args.q {
        let mut cfg = DecayConfig::new(q, args.a, args.b, args.seed);
        cfg.blocks = args.blocks;
        cfg.kappa = args.kappa;
        cfg.input = match args.input {
            InputArg::Smooth => InputKind::Smooth,
            InputArg::Cylinderwise => InputKind::Cylinderwise,
        };
        let curve = decay_small_b(&setup, &cfg)?;
        for &(j, norm, bound) in &curve.blocks {
            rows.push(vec![q.to_string(), j.to_string(), fmt_f(norm), fmt_f(bound)]);
        }
    }
    out.csv("decay", &["q", "j", "norm", "bound"], &rows)
}

fn twist(g: &Global, args: &TwistArgs, out: &Artifacts) -> Result<(), CliError> {
    let ctx = context(g)?;
    let pot = potential(g, &ctx)?;
    let pot = if args.a != 0.0 { pot.with_a(args.a)? } else { pot };
    let mut rows = Vec::with_capacity(args.b.len());
    for &b in &args.b {
        let r = twisted_radius(&pot, b, args.twist_degree, args.k_max, args.seed)?;
        rows.push(vec![fmt_f(b), fmt_f(r.radius)]);
    }
    out.csv("twist", &["b", "radius"], &rows)
}
