//! Canonical pretty-printer. Re-parsing its output yields the same tree
//! modulo spans.

use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "    ";

pub fn print_unit(unit: &CompilationUnit) -> String {
    let mut out = String::new();
    for (i, p) in unit.pous.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&print_pou(p));
    }
    for c in &unit.configurations {
        if !out.is_empty() {
            out.push('\n');
        }
        print_config(&mut out, c);
    }
    out
}

pub fn print_pou(p: &PouDecl) -> String {
    let mut out = String::new();
    out.push_str(p.kind.keyword());
    out.push(' ');
    out.push_str(&p.name.name);
    if let Some(rt) = &p.return_type {
        out.push_str(" : ");
        out.push_str(&print_type(rt));
    }
    out.push('\n');
    for b in &p.var_blocks {
        out.push_str(b.section.keyword());
        if b.constant {
            out.push_str(" CONSTANT");
        }
        if b.retain {
            out.push_str(" RETAIN");
        }
        out.push('\n');
        for d in &b.decls {
            out.push_str(INDENT);
            let names: Vec<&str> = d.names.iter().map(|n| n.name.as_str()).collect();
            out.push_str(&names.join(", "));
            out.push_str(" : ");
            out.push_str(&print_type(&d.ty));
            if let Some(init) = &d.init {
                out.push_str(" := ");
                out.push_str(&print_init(init));
            }
            out.push_str(";\n");
        }
        out.push_str("END_VAR\n");
    }
    print_body(&mut out, &p.body, 1);
    out.push_str("END_");
    out.push_str(p.kind.keyword());
    out.push('\n');
    out
}

fn print_config(out: &mut String, c: &ConfigDecl) {
    let _ = writeln!(out, "CONFIGURATION {}", c.name.name);
    for r in &c.resources {
        let depth = match (&r.name, &r.on) {
            (Some(n), Some(on)) => {
                let _ = writeln!(out, "{INDENT}RESOURCE {} ON {}", n.name, on.name);
                2
            }
            _ => 1,
        };
        let pad = INDENT.repeat(depth);
        for t in &r.tasks {
            let mut attrs = Vec::new();
            if let Some(e) = &t.interval {
                attrs.push(format!("INTERVAL := {}", print_expr(e)));
            }
            if let Some(e) = &t.priority {
                attrs.push(format!("PRIORITY := {}", print_expr(e)));
            }
            let _ = writeln!(out, "{pad}TASK {}({});", t.name.name, attrs.join(", "));
        }
        for p in &r.programs {
            let with = p.task.as_ref().map(|t| format!(" WITH {}", t.name)).unwrap_or_default();
            let _ = writeln!(out, "{pad}PROGRAM {}{with} : {};", p.name.name, p.program_type.name);
        }
        if depth == 2 {
            let _ = writeln!(out, "{INDENT}END_RESOURCE");
        }
    }
    out.push_str("END_CONFIGURATION\n");
}

pub fn print_type(t: &TypeRef) -> String {
    match t {
        TypeRef::Named(id) => id.name.clone(),
        TypeRef::String { capacity: None, .. } => "STRING".into(),
        TypeRef::String { capacity: Some(n), .. } => format!("STRING[{n}]"),
        TypeRef::Array { dims, elem, .. } => {
            let d: Vec<String> = dims.iter().map(|(lo, hi)| format!("{lo}..{hi}")).collect();
            format!("ARRAY[{}] OF {}", d.join(", "), print_type(elem))
        }
    }
}

fn print_init(i: &Initializer) -> String {
    match i {
        Initializer::Expr(e) => print_expr(e),
        Initializer::Array(items, _) => {
            let parts: Vec<String> = items
                .iter()
                .map(|it| match it {
                    ArrayInitItem::Value(v) => print_init(v),
                    ArrayInitItem::Repeat(n, None) => format!("{n}()"),
                    ArrayInitItem::Repeat(n, Some(v)) => format!("{n}({})", print_init(v)),
                })
                .collect();
            format!("[{}]", parts.join(", "))
        }
    }
}

fn print_body(out: &mut String, body: &[Stmt], depth: usize) {
    for s in body {
        print_stmt(out, s, depth);
    }
}

fn print_stmt(out: &mut String, s: &Stmt, depth: usize) {
    let pad = INDENT.repeat(depth);
    match &s.kind {
        StmtKind::Assign { target, value } => {
            let _ = writeln!(out, "{pad}{} := {};", print_expr(target), print_expr(value));
        }
        StmtKind::Call { callee, args } => {
            let _ = writeln!(out, "{pad}{}({});", print_expr(callee), print_args(args));
        }
        StmtKind::If { branches, else_body } => {
            for (i, b) in branches.iter().enumerate() {
                let kw = if i == 0 { "IF" } else { "ELSIF" };
                let _ = writeln!(out, "{pad}{kw} {} THEN", print_expr(&b.cond));
                print_body(out, &b.body, depth + 1);
            }
            if let Some(e) = else_body {
                let _ = writeln!(out, "{pad}ELSE");
                print_body(out, e, depth + 1);
            }
            let _ = writeln!(out, "{pad}END_IF;");
        }
        StmtKind::Case { selector, arms, else_body } => {
            let _ = writeln!(out, "{pad}CASE {} OF", print_expr(selector));
            for a in arms {
                let labels: Vec<String> =
                    a.labels.iter().map(|l| if l.lo == l.hi { l.lo.to_string() } else { format!("{}..{}", l.lo, l.hi) }).collect();
                let _ = writeln!(out, "{pad}{INDENT}{}:", labels.join(", "));
                print_body(out, &a.body, depth + 2);
            }
            if let Some(e) = else_body {
                let _ = writeln!(out, "{pad}ELSE");
                print_body(out, e, depth + 1);
            }
            let _ = writeln!(out, "{pad}END_CASE;");
        }
        StmtKind::For { var, from, to, by, body } => {
            let by = by.as_ref().map(|b| format!(" BY {}", print_expr(b))).unwrap_or_default();
            let _ = writeln!(out, "{pad}FOR {} := {} TO {}{by} DO", var.name, print_expr(from), print_expr(to));
            print_body(out, body, depth + 1);
            let _ = writeln!(out, "{pad}END_FOR;");
        }
        StmtKind::While { cond, body } => {
            let _ = writeln!(out, "{pad}WHILE {} DO", print_expr(cond));
            print_body(out, body, depth + 1);
            let _ = writeln!(out, "{pad}END_WHILE;");
        }
        StmtKind::Repeat { body, until } => {
            let _ = writeln!(out, "{pad}REPEAT");
            print_body(out, body, depth + 1);
            let _ = writeln!(out, "{pad}UNTIL {}", print_expr(until));
            let _ = writeln!(out, "{pad}END_REPEAT;");
        }
        StmtKind::Exit => {
            let _ = writeln!(out, "{pad}EXIT;");
        }
        StmtKind::Return => {
            let _ = writeln!(out, "{pad}RETURN;");
        }
    }
}

fn print_args(args: &[CallArg]) -> String {
    let parts: Vec<String> = args
        .iter()
        .map(|a| match (&a.name, a.direction) {
            (Some(n), ArgDirection::In) => format!("{} := {}", n.name, print_expr(&a.value)),
            (Some(n), ArgDirection::Out) => format!("{} => {}", n.name, print_expr(&a.value)),
            (None, _) => print_expr(&a.value),
        })
        .collect();
    parts.join(", ")
}

pub fn print_literal(l: &Literal) -> String {
    match l {
        Literal::Int { value, type_prefix } => {
            let prefix = type_prefix.map(|p| format!("{}#", p.name())).unwrap_or_default();
            if *value < 0 {
                format!("-{prefix}{}", value.unsigned_abs())
            } else {
                format!("{prefix}{value}")
            }
        }
        Literal::Real { value, type_prefix } => {
            let prefix = type_prefix.map(|p| format!("{}#", p.name())).unwrap_or_default();
            let sign = if value.is_sign_negative() { "-" } else { "" };
            format!("{sign}{prefix}{}", format_real(value.abs()))
        }
        Literal::Bool(true) => "TRUE".into(),
        Literal::Bool(false) => "FALSE".into(),
        Literal::Time(ms) if *ms < 0 => format!("-T#{}ms", ms.unsigned_abs()),
        Literal::Time(ms) => format!("T#{ms}ms"),
        Literal::Str(s) => quote_string(s),
    }
}

/// Shortest round-tripping decimal form that always contains a `.`.
pub fn format_real(v: f64) -> String {
    normalize_real(&format!("{v:?}"))
}

/// Rewrites Rust float text (`1e-7`, `3`) into ST form (`1.0E-7`, `3.0`).
pub fn normalize_real(s: &str) -> String {
    match s.split_once('e') {
        Some((mantissa, exp)) => {
            let mantissa = if mantissa.contains('.') { mantissa.to_string() } else { format!("{mantissa}.0") };
            format!("{mantissa}E{exp}")
        }
        None if s.contains('.') => s.to_string(),
        None => format!("{s}.0"),
    }
}

pub fn quote_string(s: &str) -> String {
    let mut out = String::from("'");
    for c in s.chars() {
        match c {
            '\'' => out.push_str("$'"),
            '$' => out.push_str("$$"),
            '\n' => out.push_str("$N"),
            '\r' => out.push_str("$R"),
            '\t' => out.push_str("$T"),
            c if (c as u32) < 0x20 || c == '\x7f' => {
                let _ = write!(out, "${:02X}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}

/// Binding strength of an expression as seen by its parent.
fn expr_prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Binary(op, _, _) => op.precedence(),
        ExprKind::Unary(_, _) => UNARY_PRECEDENCE,
        ExprKind::Literal(Literal::Int { value, .. }) if *value < 0 => UNARY_PRECEDENCE,
        ExprKind::Literal(Literal::Real { value, .. }) if value.is_sign_negative() => UNARY_PRECEDENCE,
        ExprKind::Literal(Literal::Time(ms)) if *ms < 0 => UNARY_PRECEDENCE,
        _ => u8::MAX,
    }
}

fn wrap(e: &Expr, min: u8) -> String {
    let s = print_expr(e);
    if expr_prec(e) < min {
        format!("({s})")
    } else {
        s
    }
}

pub fn print_expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Literal(l) => print_literal(l),
        ExprKind::Var(id) => id.name.clone(),
        ExprKind::Member(base, m) => format!("{}.{}", wrap(base, u8::MAX), m.name),
        ExprKind::Index(base, idx) => {
            let parts: Vec<String> = idx.iter().map(print_expr).collect();
            format!("{}[{}]", wrap(base, u8::MAX), parts.join(", "))
        }
        ExprKind::Unary(op, operand) => {
            let kw = match op {
                UnaryOp::Neg => "-",
                UnaryOp::Not => "NOT ",
            };
            // a bare literal operand would be folded into a negative literal on re-parse
            let literal_operand = matches!(operand.kind, ExprKind::Literal(_));
            if literal_operand || expr_prec(operand) < BinaryOp::Pow.precedence() {
                format!("{kw}({})", print_expr(operand))
            } else {
                format!("{kw}{}", print_expr(operand))
            }
        }
        ExprKind::Binary(op, l, r) => {
            let p = op.precedence();
            // left-associative: the right operand needs strictly higher precedence
            format!("{} {} {}", wrap(l, p), op.symbol(), wrap(r, p + 1))
        }
        ExprKind::Call(name, args) => format!("{}({})", name.name, print_args(args)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_always_have_a_point() {
        assert_eq!(format_real(1.0), "1.0");
        assert_eq!(format_real(0.5), "0.5");
        assert_eq!(format_real(1e-7), "1.0E-7");
        assert_eq!(format_real(1.5e300), "1.5E300");
    }

    #[test]
    fn strings_escape() {
        assert_eq!(quote_string("a'b$\n"), "'a$'b$$$N'");
    }
}
