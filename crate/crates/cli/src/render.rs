//! Plain-text rendering of reports.

use std::fmt::Write;

use num_rational::BigRational;

use iwe::check::{CheckRow, ConditionSummary};
use iwe::domain::{to_f64, Convergence, IwRow, Outcome};
use iwe::invariants::{BoundRow, EntryBound};
use iwe::oracle::{JordanReport, MatchStatus, OracleComparison};
use iwe::wp::{NonNegCheckReport, WpEntryBound};
use iwe::{CertificateReport, ExtNonNeg, State, SubDistribution};

/// Failing rows shown per report before eliding the rest.
const SHOWN_FAILURES: usize = 10;

/// Exact when short, otherwise a decimal approximation.
pub fn rat(r: &BigRational) -> String {
    let exact = r.to_string();
    if exact.len() <= 24 {
        exact
    } else {
        let approx = format!("{:.12}", to_f64(r));
        let approx = approx.trim_end_matches('0');
        let approx = approx
            .strip_suffix('.')
            .map_or(approx.to_string(), |a| format!("{a}.0"));
        format!("~{approx}")
    }
}

pub fn ext(v: &ExtNonNeg) -> String {
    match v {
        ExtNonNeg::Finite(r) => rat(r),
        ExtNonNeg::Inf => "inf".into(),
    }
}

pub fn iw(v: &iwe::IwValue) -> String {
    format!("({}, {})", rat(v.first()), ext(v.witness()))
}

fn notes(c: &Convergence) -> String {
    let mut out = Vec::new();
    if c.loop_evaluations > 0 {
        out.push(format!("{} unfoldings", c.iterations));
    }
    if c.divergent {
        out.push("divergent".into());
    }
    if c.heuristic {
        out.push("heuristic".into());
    }
    if out.is_empty() {
        String::new()
    } else {
        format!("  [{}]", out.join(", "))
    }
}

fn traces(out: &mut String, ts: &[iwe::domain::LoopTrace]) {
    for t in ts {
        let _ = writeln!(out, "    loop at {}", t.state);
        for (i, row) in t.rows.iter().enumerate() {
            let cells: Vec<_> = row.iter().map(ext).collect();
            let _ = writeln!(out, "      {i:>4}  {}", cells.join("  "));
        }
    }
}

pub fn wp_row(s: &State, o: &Outcome<ExtNonNeg>) -> String {
    let mut out = format!("{s}  {}{}", ext(&o.value), notes(&o.convergence));
    if !o.traces.is_empty() {
        out.push('\n');
        traces(&mut out, &o.traces);
        out.pop();
    }
    out
}

pub fn wpt_row(r: &IwRow) -> String {
    let v = if r.value.is_integrable() {
        iw(&r.value)
    } else {
        "(0, inf)  not integrable".into()
    };
    let mut out = format!("{}  {v}{}", r.state, notes(&r.convergence));
    if !r.traces.is_empty() {
        out.push('\n');
        traces(&mut out, &r.traces);
        out.pop();
    }
    out
}

pub fn distribution(s: &State, d: &SubDistribution, e: Option<&JordanReport>) -> String {
    let mut out = format!("{s}  depth {}  residual {}\n", d.depth, rat(&d.residual));
    for m in &d.terminal {
        let _ = writeln!(out, "    {}  {}", rat(&m.mass), m.state);
    }
    if let Some(e) = e {
        let _ = writeln!(
            out,
            "    E[f+] = {}  E[f-] = {}  E[f] = {}  ({})",
            rat(&e.e_plus),
            rat(&e.e_minus),
            rat(&e.expectation()),
            serde_json::to_value(e.verdict)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default()
        );
    }
    out
}

pub fn comparison(c: &OracleComparison) -> String {
    let status = match c.status {
        MatchStatus::Match => "match",
        MatchStatus::Mismatch => "MISMATCH",
        MatchStatus::NotIntegrable => "not integrable",
    };
    let how = if c.exact {
        "exact".to_string()
    } else {
        format!("|diff| {:.3e} <= {:.3e}", c.difference, c.bound)
    };
    format!(
        "{}  wpt {}  oracle {}  {status} ({how})",
        c.state,
        iw(&c.wpt),
        rat(&c.oracle.expectation())
    )
}

fn conditions(out: &mut String, cs: &[ConditionSummary], tol_note: bool) {
    for c in cs {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        let slack = if c.tolerant && tol_note {
            ", within tolerance"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "{verdict}  {}  ({} checks, {} failed{slack})",
            c.condition, c.checked, c.failures
        );
    }
}

fn failures<'a>(out: &mut String, rows: impl Iterator<Item = &'a CheckRow>) {
    let bad: Vec<_> = rows.filter(|r| !r.ok).collect();
    for r in bad.iter().take(SHOWN_FAILURES) {
        let n = r.n.map(|n| format!(" n={n}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "    {}{n}: {} <= {} fails at {}",
            r.condition, r.lhs, r.rhs, r.state
        );
    }
    if bad.len() > SHOWN_FAILURES {
        let _ = writeln!(out, "    ... {} more", bad.len() - SHOWN_FAILURES);
    }
}

fn bound_row(b: &BoundRow, upper: bool) -> String {
    let rel = if upper { "<=" } else { ">=" };
    format!(
        "    {}  engine {} {rel} ({}, {}){}",
        b.state,
        iw(&b.engine),
        rat(&b.first),
        ext(&b.witness),
        if b.consistent { "" } else { "  INCONSISTENT" }
    )
}

pub fn mixed_check(r: &CertificateReport, entry: &[EntryBound]) -> String {
    let mut out = String::new();
    conditions(&mut out, &r.conditions, true);
    failures(&mut out, r.failures.iter());
    let upper = r.direction == iwe::invariants::Direction::Upper;
    if !r.bounds.is_empty() {
        out.push_str("loop bounds:\n");
        for b in &r.bounds {
            let _ = writeln!(out, "{}", bound_row(b, upper));
        }
    }
    if !entry.is_empty() {
        out.push_str("program bounds:\n");
        let rel = if upper { "<=" } else { ">=" };
        for e in entry {
            let _ = writeln!(
                out,
                "    {}  engine {} {rel} ({}, {}){}{}",
                e.state,
                iw(&e.engine),
                rat(&e.first),
                ext(&e.witness),
                if e.certified {
                    ""
                } else {
                    "  (leaves the grid)"
                },
                if e.consistent { "" } else { "  INCONSISTENT" }
            );
        }
    }
    let _ = writeln!(
        out,
        "{}",
        if r.pass && r.engine_consistent {
            "certificate holds"
        } else {
            "certificate rejected"
        }
    );
    out
}

pub fn wp_check(r: &NonNegCheckReport, entry: &[WpEntryBound]) -> String {
    let mut out = String::new();
    conditions(&mut out, &r.conditions, true);
    failures(&mut out, r.rows.iter());
    if !entry.is_empty() {
        out.push_str("program bounds:\n");
        for e in entry {
            let _ = writeln!(
                out,
                "    {}  bound {}  engine {}{}{}",
                e.state,
                ext(&e.bound),
                ext(&e.engine),
                if e.certified {
                    ""
                } else {
                    "  (leaves the grid)"
                },
                if e.consistent { "" } else { "  INCONSISTENT" }
            );
        }
    }
    let _ = writeln!(
        out,
        "{}",
        if r.pass {
            "certificate holds"
        } else {
            "certificate rejected"
        }
    );
    out
}
