//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Exits nonzero when a check fails that is not listed in `KNOWN_DEVIATIONS`.
//! Listed deviations still print FAIL; their analysis lives in the decisions ledger.

use conelab::charts::{self, curvature_jet};
use conelab::holonomy::{loop_battery, DEFAULT_STEPS_PER_UNIT};
use conelab::Result;
use conelab_cli::report::{CheckKind, CheckRecord};
use conelab_cli::settings::Settings;
use conelab_cli::suites;
use std::process::ExitCode;

/// The doubled e^z y^2 wave has a three-dimensional holonomy span, which
/// contains the two published generators but is not spanned by them.
const KNOWN_DEVIATIONS: [&str; 2] = [
    "holonomy-catalog.doubled-plane-wave-exp.dim",
    "holonomy-catalog.doubled-plane-wave-exp.published-distance",
];

const RATIO_RANGE: (f64, f64) = (1.5, 4.5);

/// `‖log(P_h)/h² + R(∂_a,∂_b)‖` on the sphere for the two loop sizes.
fn loop_errors() -> Result<(f64, f64)> {
    let chart = charts::sphere(2);
    let p = [1.0, 0.3];
    let r = curvature_jet(&chart, &p, 0)?.endomorphism(0, &[0, 1]);
    let samples = loop_battery(&chart, &p, &[0.1, 0.2], DEFAULT_STEPS_PER_UNIT)?;
    let err = |h: f64| {
        samples
            .iter()
            .find(|s| s.side == h)
            .map(|s| (&s.scaled_log + &r).norm())
            .unwrap_or(f64::NAN)
    };
    Ok((err(0.1), err(0.2)))
}

fn ratio_checks() -> Vec<CheckRecord> {
    let anchor = "loop logarithms approach minus the curvature";
    match loop_errors() {
        Ok((small, large)) => {
            let ratio = large / small;
            vec![
                CheckRecord::above("loops.sphere2.ratio-lower", anchor, ratio, RATIO_RANGE.0)
                    .with_note(format!("errors {small:e} at h=0.1, {large:e} at h=0.2")),
                CheckRecord::below("loops.sphere2.ratio-upper", anchor, ratio, RATIO_RANGE.1),
            ]
        }
        Err(e) => vec![CheckRecord::failed(
            "loops.sphere2.ratio",
            anchor,
            CheckKind::ResidualBelow,
            RATIO_RANGE.1,
            e,
        )],
    }
}

struct Criterion {
    number: usize,
    title: &'static str,
    select: fn(&str) -> bool,
}

const CRITERIA: [Criterion; 10] = [
    Criterion {
        number: 1,
        title: "cone identities",
        select: |id| {
            id.starts_with("cone-identities.")
                && !id.ends_with(".flat-cone")
                && !id.ends_with(".span-dim")
        },
    },
    Criterion {
        number: 2,
        title: "flat cone over H2, so(1,2) over S2",
        select: |id| id.ends_with(".flat-cone") || id == "cone-identities.sphere2.span-dim",
    },
    Criterion {
        number: 3,
        title: "doubled-derivative closed forms",
        select: |id| id.starts_with("doubled-derivatives."),
    },
    Criterion {
        number: 4,
        title: "psi isometry",
        select: |id| id.starts_with("psi-isometry.") && !id.ends_with(".corrupted-map"),
    },
    Criterion {
        number: 5,
        title: "holonomy catalog dimensions",
        select: |id| {
            id.starts_with("holonomy-catalog.doubled-") || id.starts_with("holonomy-catalog.cone-")
        },
    },
    Criterion {
        number: 6,
        title: "projection property",
        select: |id| id.starts_with("holonomy-catalog.projection."),
    },
    Criterion {
        number: 7,
        title: "cohomology battery",
        select: |id| id.starts_with("cohomology."),
    },
    Criterion {
        number: 8,
        title: "null-plane pipeline",
        select: |id| id.starts_with("null-plane.") && !id.starts_with("null-plane.controls."),
    },
    Criterion {
        number: 9,
        title: "transport and curvature consistency",
        select: |id| id.starts_with("holonomy-catalog.loops.") || id.starts_with("loops."),
    },
    Criterion {
        number: 10,
        title: "negative controls",
        select: |id| id.ends_with(".corrupted-map") || id.starts_with("null-plane.controls."),
    },
];

fn describe(c: &CheckRecord) -> String {
    let value = c.value.map_or("error".to_string(), |v| format!("{v:.3e}"));
    let relation = match c.kind {
        CheckKind::ResidualBelow => "<",
        CheckKind::ResidualAbove => ">",
        CheckKind::DimensionEquals => "==",
    };
    format!("{} = {value} (want {relation} {:e})", c.id, c.threshold)
}

fn main() -> ExitCode {
    let report = suites::run("all", &Settings::default()).expect("suites run");
    let mut checks = report.checks;
    checks.extend(ratio_checks());

    let mut unexpected = Vec::new();
    let mut passed = 0;
    for criterion in &CRITERIA {
        let selected: Vec<&CheckRecord> = checks
            .iter()
            .filter(|c| (criterion.select)(&c.id))
            .collect();
        let failures: Vec<&CheckRecord> = selected.iter().copied().filter(|c| !c.pass).collect();
        let ok = !selected.is_empty() && failures.is_empty();
        if ok {
            passed += 1;
        }
        println!(
            "{} criterion {:>2}: {} ({} checks, {} failing)",
            if ok { "PASS" } else { "FAIL" },
            criterion.number,
            criterion.title,
            selected.len(),
            failures.len()
        );
        if std::env::var_os("ACCEPTANCE_VERBOSE").is_some() {
            for c in &selected {
                println!("    {}", describe(c));
            }
        }
        for f in &failures {
            let known = KNOWN_DEVIATIONS.contains(&f.id.as_str());
            println!(
                "    {} {}",
                if known {
                    "known deviation:"
                } else {
                    "unexpected:"
                },
                describe(f)
            );
            if let Some(note) = &f.note {
                println!("        {note}");
            }
            if !known {
                unexpected.push(f.id.clone());
            }
        }
        if selected.is_empty() {
            unexpected.push(format!("criterion {} selected no checks", criterion.number));
        }
    }
    let unassigned: Vec<&CheckRecord> = checks
        .iter()
        .filter(|c| !CRITERIA.iter().any(|k| (k.select)(&c.id)))
        .collect();
    for c in unassigned {
        unexpected.push(format!("check {} belongs to no criterion", c.id));
    }
    println!("{passed}/{} criteria pass", CRITERIA.len());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
