use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use ratgroup_core::correlation::{corr_report, MultFunctionSpec};
use ratgroup_core::dualdet::{dual_group, dual_obstruction, presentation, theta, EtaContext};
use ratgroup_core::lattice::{membership, parse_rational, quotient_invariants, represent, verify_certificate, Membership};
use ratgroup_core::{enumerate_characters, normalize_family, DirichletCharacter, Error, RatioFamily, RootOfUnity};
use serde_json::{json, Value};

use crate::request::{Command, FamilyArgs, SupportArgs};

/// A command's report and whether it is a mathematically negative answer.
#[derive(Debug)]
pub struct Outcome {
    pub report: Value,
    pub obstruction: bool,
}

impl Outcome {
    fn ok(report: Value) -> Self {
        Outcome { report, obstruction: false }
    }
}

fn family(args: &FamilyArgs) -> Result<RatioFamily> {
    Ok(normalize_family(args.a, args.b, args.big_a, args.big_b, args.k)?)
}

fn policy(s: &SupportArgs) -> ratgroup_core::SupportPolicy {
    ratgroup_core::SupportPolicy { max_prime: s.max_prime, exclude: s.exclude.clone(), restrict_class: None }
}

fn character_mod(label: Option<&str>, modulus: u64) -> Result<DirichletCharacter> {
    match label {
        None => Ok(DirichletCharacter::principal(modulus)),
        Some(l) => {
            let chi: DirichletCharacter = l.parse()?;
            if chi.modulus() != modulus {
                bail!("character modulus {} is not delta = {modulus}", chi.modulus());
            }
            Ok(chi)
        }
    }
}

fn root_json(r: RootOfUnity) -> Value {
    json!([r.k, r.n])
}

pub fn run(command: &Command) -> Result<Outcome> {
    match command {
        Command::Determine { family: fa, n_max } => {
            let f = family(fa)?;
            let t = Instant::now();
            let dual = dual_group(&f)?;
            log::info!("dual group: {} candidates in {:?}", dual.candidates_examined, t.elapsed());
            let oracle = quotient_invariants(&f, *n_max, &Default::default())?;
            if !oracle.stabilized {
                log::warn!("lattice invariants not stabilized at N = {n_max}");
            }
            let p = presentation(&dual, &oracle)?;
            Ok(Outcome::ok(json!({
                "torsion_invariants": p.torsion_invariants,
                "free_rank": p.free_rank,
                "free_generators": p.free_generators,
                "trivial": p.torsion_invariants.is_empty() && p.free_rank == 0,
                "dual_characters": p.dual_characters,
                "provenance": p.provenance,
                "candidates_examined": dual.candidates_examined,
                "oracle": {
                    "n_max": oracle.n_max,
                    "stabilized": oracle.stabilized,
                    "support": oracle.support,
                },
            })))
        }
        Command::Membership { family: fa, r, n_max, support } => {
            let f = family(fa)?;
            let target = parse_rational(r)?;
            let m = membership(&f, &target, *n_max, &policy(support))?;
            let mut report = json!({ "target": target });
            let fields = serde_json::to_value(&m)?;
            report.as_object_mut().unwrap().extend(fields.as_object().cloned().unwrap_or_default());
            let negative = !matches!(m, Membership::InLattice { .. });
            if negative {
                let dual = dual_group(&f)?;
                if let Some((g, v)) = dual_obstruction(&dual, &target) {
                    report["dual_obstruction"] = json!({ "character": g.chi.label(), "value": root_json(v) });
                }
            }
            Ok(Outcome { report, obstruction: negative })
        }
        Command::Represent { family: fa, r, n_max, support } => {
            let f = family(fa)?;
            let target = parse_rational(r)?;
            match represent(&f, &target, *n_max, &policy(support)) {
                Ok(cert) => {
                    let verified = verify_certificate(&f, &cert, &target)?;
                    Ok(Outcome::ok(json!({ "target": target, "verified": verified, "certificate": cert })))
                }
                Err(Error::NotRepresentable(reason)) => Ok(Outcome {
                    report: json!({ "target": target, "status": "not_representable", "reason": reason }),
                    obstruction: true,
                }),
                Err(e) => Err(e.into()),
            }
        }
        Command::Correlate { family: fa, x, prime_bound, character, overrides, dual } => {
            let f = family(fa)?;
            let g = match dual {
                Some(i) => {
                    let d = dual_group(&f)?;
                    let el = d.elements.get(*i).with_context(|| format!("only {} dual characters", d.elements.len()))?;
                    MultFunctionSpec::from_gcharacter(&f, el)
                }
                None => mult_function(character.as_deref(), overrides)?,
            };
            let report = corr_report(&g, &f, *x, *prime_bound)?;
            Ok(Outcome::ok(serde_json::to_value(report)?))
        }
        Command::Characters { modulus, order_divides, primitive_only } => {
            if *modulus == 0 {
                bail!("modulus must be positive");
            }
            let rows: Vec<Value> = enumerate_characters(*modulus, *order_divides)
                .into_iter()
                .filter_map(|c| {
                    let inv = c.invariants();
                    (!primitive_only || inv.primitive).then(|| {
                        json!({
                            "label": c.label(),
                            "order": inv.order,
                            "conductor": inv.conductor,
                            "primitive": inv.primitive,
                        })
                    })
                })
                .collect();
            Ok(Outcome::ok(json!({ "modulus": modulus, "count": rows.len(), "characters": rows })))
        }
        Command::Theta { family: fa, character, d1, d2 } => {
            let f = family(fa)?;
            let chi = character_mod(character.as_deref(), f.delta)?;
            let v = theta(&f, &chi, *d1, *d2)?;
            let (re, im) = v.to_complex();
            Ok(Outcome::ok(json!({
                "character": chi.label(), "d1": d1, "d2": d2,
                "value": v.to_string(), "re": re, "im": im,
            })))
        }
        Command::Eta { family: fa, character, ell, beta, gamma } => {
            let f = family(fa)?;
            let chi = character_mod(character.as_deref(), f.delta)?;
            let ctx = EtaContext::new(&f, &chi, *ell)?;
            let v = ctx.eta(&f, *beta, *gamma);
            let (re, im) = v.to_complex();
            Ok(Outcome::ok(json!({
                "character": chi.label(), "ell": ell, "beta": beta, "gamma": gamma,
                "value": v.to_string(), "re": re, "im": im,
            })))
        }
        Command::Oracle { family: fa, n_max, support, restrict_class } => {
            let f = family(fa)?;
            let mut pol = policy(support);
            pol.restrict_class = *restrict_class;
            let q = quotient_invariants(&f, *n_max, &pol)?;
            Ok(Outcome::ok(serde_json::to_value(q)?))
        }
    }
}

fn mult_function(character: Option<&str>, overrides: &[String]) -> Result<MultFunctionSpec> {
    let mut values = BTreeMap::new();
    for o in overrides {
        let (p, v) = o.split_once('=').with_context(|| format!("override `{o}` is not p=value"))?;
        let p: u64 = p.trim().parse().with_context(|| format!("bad prime in `{o}`"))?;
        values.insert(p, parse_root(v.trim()).with_context(|| format!("bad value in `{o}`"))?);
    }
    let base = match character {
        Some(l) => l.parse::<DirichletCharacter>()?,
        None => DirichletCharacter::principal(values.keys().product::<u64>().max(1)),
    };
    let mut spec = MultFunctionSpec::from_character(&base);
    for (&p, &v) in &values {
        if base.modulus() % p != 0 {
            return Err(Error::InvalidArgument(format!("override at {p}, which does not divide {}", base.modulus())).into());
        }
        spec.overrides.insert(p, v);
    }
    Ok(spec)
}

/// `0`, `1`, or `k/n` for `e^(2 pi i k/n)`.
fn parse_root(s: &str) -> Result<Option<RootOfUnity>> {
    match s {
        "0" => Ok(None),
        "1" => Ok(Some(RootOfUnity::ONE)),
        _ => {
            let (k, n) = s.split_once('/').context("expected 0, 1 or k/n")?;
            let n: u64 = n.parse()?;
            if n == 0 {
                bail!("zero order");
            }
            Ok(Some(RootOfUnity::new(k.parse()?, n)))
        }
    }
}
