//! Runs every acceptance criterion at tolerance zero and prints one PASS/FAIL line each.
//!
//! Some checks are known not to hold as stated (see `KNOWN`); those print FAIL with the
//! measured value, and the run only fails if anything else fails or a known failure
//! unexpectedly passes.

use std::process::ExitCode;
use std::time::Instant;

use fermat_jets::suites::*;
use fermat_jets::Result;

/// `(criterion, substring of a check name)` expected to fail, with the reason.
const KNOWN: &[(&str, &str, &str)] = &[
    (
        "psi-characters",
        "defect(Ψ_p) = 0",
        "Ψ_p = (π/p)·Ψ_π has the coefficient (p/π)^{-1} of valuation 1/e - 1 on δ_π q/q^p; only pΨ_p has defect 0",
    ),
    (
        "pi-log-jets",
        "r=2: n(r) <= r",
        "δ_p^2 x rewritten in δ_π jets has a coefficient of valuation -19/4 (π = 1-ζ_5) or -7/2 (π = √5)",
    ),
    (
        "order-one-pipeline",
        "defect(E(f♯_p)) = 0",
        "E(f♯_p) = ((p-1)/p)·(πE(f♯_π)) with unit coefficients on δ_p q, so the defect is 1; p·E(f♯_p) has defect 0",
    ),
];

fn sqrt5() -> PiChoice {
    PiChoice::Eisenstein(vec![(-5).into(), 0.into(), 1.into()])
}

fn cfg(p: u32, pi: PiChoice, k: u32) -> SuiteConfig {
    SuiteConfig {
        p,
        pi,
        precision: k,
        ..SuiteConfig::default()
    }
}

fn merge(name: &str, parts: Vec<(String, Result<Report>)>) -> Report {
    let mut rep = Report::new(name);
    for (prefix, r) in parts {
        match r {
            Ok(r) => rep.absorb(&format!("{prefix}: "), r),
            Err(e) => rep.check(format!("{prefix}: run"), false, e.to_string()),
        }
    }
    rep
}

type Criterion = (&'static str, Box<dyn Fn() -> Report>);

fn criteria() -> Vec<Criterion> {
    vec![
        (
            "delta-axioms",
            Box::new(|| match axiom_rings(8) {
                Ok(r) => delta_axioms(&r, 100, 1),
                Err(e) => merge("delta-axioms", vec![("rings".into(), Err(e))]),
            }),
        ),
        (
            "conversion-polynomials",
            Box::new(|| {
                merge(
                    "conversion-polynomials",
                    vec![
                        (
                            "1-ζ_5".into(),
                            conversion_suite(&cfg(5, PiChoice::Cyclotomic, 8)),
                        ),
                        ("√5".into(), conversion_suite(&cfg(5, sqrt5(), 8))),
                    ],
                )
            }),
        ),
        (
            "psi-characters",
            Box::new(|| {
                merge(
                    "psi-characters",
                    vec![
                        ("p=5".into(), psi_suite(&cfg(5, PiChoice::Cyclotomic, 8))),
                        ("p=7".into(), psi_suite(&cfg(7, PiChoice::Cyclotomic, 8))),
                    ],
                )
            }),
        ),
        (
            "valuation-bound",
            Box::new(|| {
                let mk = |pi, r, k| SuiteConfig { r, ..cfg(5, pi, k) };
                merge(
                    "valuation-bound",
                    vec![
                        (
                            "1-ζ_5 r=1".into(),
                            valuation_bound_suite(&mk(PiChoice::Cyclotomic, 1, 8)),
                        ),
                        (
                            "1-ζ_5 r=2".into(),
                            valuation_bound_suite(&mk(PiChoice::Cyclotomic, 2, 30)),
                        ),
                        ("√5 r=1".into(), valuation_bound_suite(&mk(sqrt5(), 1, 8))),
                    ],
                )
            }),
        ),
        (
            "radius-counterexample",
            Box::new(|| {
                merge(
                    "radius-counterexample",
                    vec![("√5".into(), radius_counterexample(&cfg(5, sqrt5(), 8)))],
                )
            }),
        ),
        (
            "pi-log-jets",
            Box::new(|| {
                let mk = |pi| SuiteConfig {
                    r: 2,
                    ..cfg(5, pi, 40)
                };
                merge(
                    "pi-log-jets",
                    vec![
                        ("1-ζ_5".into(), pi_log_jets_suite(&mk(PiChoice::Cyclotomic))),
                        ("√5".into(), pi_log_jets_suite(&mk(sqrt5()))),
                    ],
                )
            }),
        ),
        (
            "conjugate-operators",
            Box::new(|| {
                merge(
                    "conjugate-operators",
                    vec![(
                        "1-ζ_5".into(),
                        conjugate_suite(&cfg(5, PiChoice::Cyclotomic, 8)),
                    )],
                )
            }),
        ),
        (
            "hecke-identities",
            Box::new(|| {
                let mut parts = Vec::new();
                match split_systems(&[(5, 7), (5, 11), (7, 7), (7, 11)], 3, 1) {
                    Ok(m) => {
                        for ((p, n), hs) in m {
                            for (i, h) in hs.iter().enumerate() {
                                parts.push((format!("p={p} N={n} #{i}"), Ok(hecke_identities(h))));
                            }
                        }
                    }
                    Err(e) => parts.push(("systems".into(), Err(e))),
                }
                merge("hecke-identities", parts)
            }),
        ),
        (
            "order-one-pipeline",
            Box::new(|| {
                let mut parts = Vec::new();
                match split_systems(&[(5, 7), (5, 11), (7, 7), (7, 11)], 3, 1) {
                    Ok(m) => {
                        for ((p, n), hs) in m {
                            for (i, h) in hs.iter().enumerate() {
                                let c = SuiteConfig {
                                    level: n,
                                    ..cfg(p, PiChoice::Cyclotomic, 8)
                                };
                                parts.push((
                                    format!("p={p} N={n} #{i}"),
                                    order_one_pipeline("order-one-pipeline", h, &c, 5),
                                ));
                            }
                        }
                    }
                    Err(e) => parts.push(("systems".into(), Err(e))),
                }
                merge("order-one-pipeline", parts)
            }),
        ),
        (
            "unit-root",
            Box::new(|| {
                merge(
                    "unit-root",
                    vec![("E_{p-1}".into(), unit_root_suite(&[5, 7, 11, 13], 40, 8, 1))],
                )
            }),
        ),
        (
            "trace-nondegeneracy",
            Box::new(|| match configured_extensions(8) {
                Ok(f) => gram_suite(&f, 1),
                Err(e) => merge("trace-nondegeneracy", vec![("fields".into(), Err(e))]),
            }),
        ),
    ]
}

fn main() -> ExitCode {
    let mut unexpected = 0;
    for (name, run) in criteria() {
        let start = Instant::now();
        let rep = run();
        let secs = start.elapsed().as_secs_f64();
        let known: Vec<_> = KNOWN.iter().filter(|k| k.0 == name).collect();
        let failing = rep.failures();
        let verdict = if failing.is_empty() { "PASS" } else { "FAIL" };
        println!("{verdict} {name} ({} checks, {secs:.1}s)", rep.checks.len());
        for c in &failing {
            let reason = known.iter().find(|k| c.name.contains(k.1));
            match reason {
                Some(k) => println!("    known: {} [{}] because {}", c.name, c.detail, k.2),
                None => {
                    println!("    unexpected: {} [{}]", c.name, c.detail);
                    unexpected += 1;
                }
            }
        }
        for k in &known {
            if !failing.iter().any(|c| c.name.contains(k.1)) {
                println!("    expected a failure of `{}` that did not occur", k.1);
                unexpected += 1;
            }
        }
    }
    if unexpected == 0 {
        println!("acceptance: all results as expected");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {unexpected} unexpected result(s)");
        ExitCode::FAILURE
    }
}
