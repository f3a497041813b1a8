//! CSV and Markdown rendering of campaign results.

use std::fmt::Write as _;
use std::io::Write;

use crate::campaign::{coefficient_of_variation, CaseReport, CaseSpec, RunReport};
use crate::convergence::ConvergenceReport;

pub const CSV_HEADER: &str =
    "solver,equation,p,a,nu,termination,converged,cycles,seconds,work_units,rhs_evals,final_residual,repetitions";

/// One row per case and solver, medians over repetitions.
pub fn write_csv(reports: &[&RunReport], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in reports {
        for c in &r.cases {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{:e},{}",
                r.solver,
                c.case.equation.as_str(),
                c.case.order,
                c.case.a,
                c.case.nu,
                termination_label(c),
                c.converged(),
                c.cycles(),
                c.seconds(),
                c.work_units(),
                c.rhs_evals(),
                c.final_residual(),
                c.runs.len()
            )?;
        }
    }
    Ok(())
}

fn termination_label(c: &CaseReport) -> &'static str {
    if c.converged() {
        "converged"
    } else if c.diverged() {
        "diverged"
    } else {
        "max_steps"
    }
}

/// Runtime and iteration cells; "DIV" for divergence, "NC" when the cycle
/// budget ran out.
fn cells(c: &CaseReport, bold: bool) -> (String, String) {
    if c.converged() {
        let t = format!("{:.4}", c.seconds());
        let t = if bold { format!("**{t}**") } else { t };
        (t, format!("{}", c.cycles()))
    } else if c.diverged() {
        ("DIV".into(), "DIV".into())
    } else {
        ("NC".into(), "NC".into())
    }
}

fn case_label(c: &CaseSpec) -> String {
    format!("| {} | {} | {} | {} ", c.equation.as_str(), c.order, c.a, c.nu)
}

fn clock_note(r: &RunReport) -> &'static str {
    if r.virtual_clock {
        "Runtimes are virtual seconds (weighted tendency evaluations)."
    } else {
        "Runtimes are measured wall-clock seconds."
    }
}

/// Groups case indices by (equation, order, a) in first-seen order.
fn groups(cases: &[CaseReport]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (i, c) in cases.iter().enumerate() {
        let key = |k: &CaseSpec| (k.equation, k.order, k.a.to_bits());
        match out.iter_mut().find(|g| key(&cases[g[0]].case) == key(&c.case)) {
            Some(g) => g.push(i),
            None => out.push(vec![i]),
        }
    }
    out
}

/// Runtime CV across the viscosities of a group, if every case converged.
fn group_cv(cases: &[CaseReport], idx: &[usize]) -> Option<f64> {
    if idx.iter().any(|&i| !cases[i].converged()) {
        return None;
    }
    let t: Vec<f64> = idx.iter().map(|&i| cases[i].seconds()).collect();
    Some(coefficient_of_variation(&t))
}

fn fmt_cv(cv: Option<f64>) -> String {
    cv.map_or("n/a".into(), |v| format!("{v:.3}"))
}

pub fn baseline_markdown(r: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "| Equation | P | a | ν | {0} runtime (s) | {0} iterations |", r.solver);
    let _ = writeln!(s, "|---|---|---|---|---|---|");
    for c in &r.cases {
        let (t, n) = cells(c, false);
        let _ = writeln!(s, "{}| {t} | {n} |", case_label(&c.case));
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "{} Tolerance {:e}.", clock_note(r), r.tol);
    for g in groups(&r.cases).iter().filter(|g| g.len() > 1) {
        let k = &r.cases[g[0]].case;
        let _ = writeln!(
            s,
            "\nRuntime CV across ν for {} P={} a={}: {}.",
            k.equation.as_str(),
            k.order,
            k.a,
            fmt_cv(group_cv(&r.cases, g))
        );
    }
    s
}

/// Side-by-side table with the faster runtime in bold and a speedup column
/// (baseline time over agent time).
pub fn comparison_markdown(baseline: &RunReport, agent: &RunReport) -> String {
    assert_eq!(baseline.cases.len(), agent.cases.len(), "reports cover different grids");
    let mut s = String::new();
    let _ = writeln!(
        s,
        "| Equation | P | a | ν | {0} runtime (s) | {0} iterations | {1} runtime (s) | {1} iterations | Speedup |",
        baseline.solver, agent.solver
    );
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|");
    for (b, a) in baseline.cases.iter().zip(&agent.cases) {
        let both = b.converged() && a.converged();
        let agent_faster = both && a.seconds() < b.seconds();
        let base_faster = both && b.seconds() < a.seconds() || b.converged() && !a.converged();
        let (bt, bn) = cells(b, base_faster);
        let (at, an) = cells(a, agent_faster || a.converged() && !b.converged());
        let speedup = if both { format!("{:.2}", b.seconds() / a.seconds()) } else { "-".into() };
        let _ = writeln!(s, "{}| {bt} | {bn} | {at} | {an} | {speedup} |", case_label(&b.case));
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "{} Tolerance {:e}.", clock_note(baseline), baseline.tol);
    for g in groups(&baseline.cases).iter().filter(|g| g.len() > 1) {
        let k = &baseline.cases[g[0]].case;
        let _ = writeln!(
            s,
            "\nRuntime CV across ν for {} P={} a={}: {} {}, {} {}.",
            k.equation.as_str(),
            k.order,
            k.a,
            baseline.solver,
            fmt_cv(group_cv(&baseline.cases, g)),
            agent.solver,
            fmt_cv(group_cv(&agent.cases, g))
        );
    }
    s
}

pub fn convergence_csv(r: &ConvergenceReport, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "p,n_elements,l2_error")?;
    for row in &r.rows {
        writeln!(out, "{},{},{:e}", row.order, row.n_elements, row.l2_error)?;
    }
    Ok(())
}

pub fn convergence_markdown(r: &ConvergenceReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Steady L2 error against the analytic profile, a={} ν={}, uniform mesh.\n", r.a, r.nu);
    let _ = writeln!(s, "| P | N | L2 error |");
    let _ = writeln!(s, "|---|---|---|");
    for row in &r.rows {
        let _ = writeln!(s, "| {} | {} | {:.3e} |", row.order, row.n_elements, row.l2_error);
    }
    let _ = writeln!(s, "\n| P | Fitted slope |");
    let _ = writeln!(s, "|---|---|");
    for &(p, slope) in &r.slopes {
        let _ = writeln!(s, "| {p} | {slope:.3} |");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campaign::CaseRun;
    use hpmg_core::env::Termination;
    use hpmg_core::fr::EquationKind;

    fn report(solver: &str, times: &[Option<f64>]) -> RunReport {
        let cases = times
            .iter()
            .enumerate()
            .map(|(i, t)| CaseReport {
                case: CaseSpec { equation: EquationKind::LinearAdvectionDiffusion, order: 2, a: 0.2, nu: 0.1 * (i + 1) as f64 },
                runs: vec![CaseRun {
                    termination: if t.is_some() { Termination::Converged } else { Termination::Diverged },
                    cycles: 10,
                    seconds: t.unwrap_or(0.5),
                    work_units: 100.0,
                    rhs_evals: 50,
                    final_residual: 1e-10,
                }],
            })
            .collect();
        RunReport { solver: solver.into(), tol: 1e-9, virtual_clock: true, cases }
    }

    #[test]
    fn comparison_bolds_faster_and_marks_divergence() {
        let b = report("Original", &[Some(2.0), Some(1.0), Some(3.0)]);
        let a = report("PPO", &[Some(1.0), Some(2.0), None]);
        let md = comparison_markdown(&b, &a);
        let rows: Vec<&str> = md.lines().filter(|l| l.starts_with("| linear")).collect();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].contains("| 2.0000 | 10 | **1.0000** | 10 | 2.00 |"), "{}", rows[0]);
        assert!(rows[1].contains("| **1.0000** | 10 | 2.0000 | 10 | 0.50 |"), "{}", rows[1]);
        assert!(rows[2].contains("| **3.0000** | 10 | DIV | DIV | - |"), "{}", rows[2]);
        assert!(md.contains("Original 0.408, PPO n/a"));
    }

    #[test]
    fn csv_has_one_row_per_case_and_solver() {
        let b = report("Original", &[Some(2.0), None]);
        let mut buf = Vec::new();
        write_csv(&[&b, &b], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 5);
        assert!(lines[2].starts_with("Original,linear,2,0.2,0.2,diverged,false,"));
        assert!(lines.iter().skip(1).all(|l| l.split(',').count() == CSV_HEADER.split(',').count()));
    }
}
