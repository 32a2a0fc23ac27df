use std::fmt::Write;

use super::{LinExpr, LpProblem, Relation, Sense, VarId};

/// Renders `problem` in the CPLEX LP text format. Variables listed in
/// `binaries` go into a `Binaries` section. Names are sanitized so that any
/// LP reader accepts them.
pub fn write_lp_format(problem: &LpProblem, binaries: &[VarId]) -> String {
    let names: Vec<String> = (0..problem.num_vars()).map(|i| sanitize(&problem.var_name(VarId(i)), i)).collect();
    let mut out = String::new();
    out.push_str(match problem.sense() {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    // the LP format has no objective constant; carry it on a fixed variable
    let constant = problem.objective().constant;
    let _ = write!(out, " obj:{}", render_terms(problem.objective(), &names));
    if constant != 0.0 {
        let _ = write!(out, " {} obj_const", signed(constant));
    }
    out.push_str("\nSubject To\n");
    for (i, c) in problem.constraints().iter().enumerate() {
        let op = match c.relation {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        };
        let mut body = render_terms(&c.expr, &names);
        if body.is_empty() {
            body = " 0 obj_const".to_string();
        }
        let _ = writeln!(out, " c{i}:{body} {op} {}", fmt_num(c.rhs - c.expr.constant));
    }
    out.push_str("Bounds\n");
    for (i, b) in problem.var_bounds().iter().enumerate() {
        let name = &names[i];
        match (b.lower.is_finite(), b.upper.is_finite()) {
            (true, true) if b.lower == b.upper => {
                let _ = writeln!(out, " {name} = {}", fmt_num(b.lower));
            }
            (true, true) => {
                let _ = writeln!(out, " {} <= {name} <= {}", fmt_num(b.lower), fmt_num(b.upper));
            }
            (true, false) => {
                let _ = writeln!(out, " {name} >= {}", fmt_num(b.lower));
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {name} <= {}", fmt_num(b.upper));
            }
            (false, false) => {
                let _ = writeln!(out, " {name} free");
            }
        }
    }
    out.push_str(" obj_const = 1\n");
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for b in binaries {
            let _ = writeln!(out, " {}", names[b.0]);
        }
    }
    out.push_str("End\n");
    out
}

fn sanitize(name: &str, index: usize) -> String {
    let clean: String = name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect();
    if clean.is_empty() || clean.starts_with(|c: char| c.is_ascii_digit()) || clean == "obj_const" {
        format!("v{index}_{clean}")
    } else {
        clean
    }
}

fn render_terms(e: &LinExpr, names: &[String]) -> String {
    let mut s = String::new();
    for &(v, c) in &e.terms {
        let _ = write!(s, " {} {}", signed(c), names[v.0]);
    }
    s
}

fn signed(c: f64) -> String {
    if c < 0.0 {
        format!("- {}", fmt_num(-c))
    } else {
        format!("+ {}", fmt_num(c))
    }
}

fn fmt_num(v: f64) -> String {
    // shortest round-trip representation
    format!("{v:?}")
}
