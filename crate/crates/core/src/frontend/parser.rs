//! Recursive-descent parser with precedence climbing for expressions.
//!
//! On a syntax error the parser records it and skips to the next `;` or
//! section keyword, so one pass reports every error it can find.

use thiserror::Error;

use super::ast::*;
use super::lexer::{Keyword, Sym, Token, TokenKind};
use super::source::Span;
use super::types::ElementaryType;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {message}")]
pub struct ParseError {
    pub span: Span,
    pub message: String,
    /// Expected-token hints.
    pub expected: Vec<String>,
}

pub fn parse(tokens: &[Token]) -> Result<CompilationUnit, Vec<ParseError>> {
    let mut p = Parser { tokens, pos: 0, errors: Vec::new(), next_id: 0 };
    let unit = p.unit();
    if p.errors.is_empty() {
        Ok(unit)
    } else {
        Err(p.errors)
    }
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
    errors: Vec<ParseError>,
    next_id: u32,
}

/// Marker for an error already recorded; callers recover.
struct Failed;

type PResult<T> = Result<T, Failed>;

impl<'t> Parser<'t> {
    fn tok(&self) -> &'t Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn nth(&self, n: usize) -> &'t Token {
        &self.tokens[(self.pos + n).min(self.tokens.len() - 1)]
    }

    fn at_eof(&self) -> bool {
        matches!(self.tok().kind, TokenKind::Eof)
    }

    fn bump(&mut self) -> &'t Token {
        let t = self.tok();
        if !self.at_eof() {
            self.pos += 1;
        }
        t
    }

    fn prev_span(&self) -> Span {
        if self.pos == 0 {
            self.tok().span
        } else {
            self.tokens[self.pos - 1].span
        }
    }

    fn is_kw(&self, k: Keyword) -> bool {
        self.tok().kind == TokenKind::Keyword(k)
    }

    fn is_sym(&self, s: Sym) -> bool {
        self.tok().kind.sym() == Some(s)
    }

    fn eat_kw(&mut self, k: Keyword) -> bool {
        if self.is_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_sym(&mut self, s: Sym) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error_here(&mut self, message: impl Into<String>, expected: &[&str]) -> Failed {
        let t = self.tok();
        self.errors.push(ParseError {
            span: t.span,
            message: format!("{}, found {}", message.into(), t.kind),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        });
        Failed
    }

    fn expect_kw(&mut self, k: Keyword) -> PResult<Span> {
        if self.is_kw(k) {
            Ok(self.bump().span)
        } else {
            Err(self.error_here(format!("expected `{}`", k.as_str()), &[k.as_str()]))
        }
    }

    fn expect_sym(&mut self, s: Sym) -> PResult<Span> {
        if self.is_sym(s) {
            Ok(self.bump().span)
        } else {
            Err(self.error_here(format!("expected `{}`", s.as_str()), &[s.as_str()]))
        }
    }

    fn ident(&mut self) -> PResult<Ident> {
        match &self.tok().kind {
            TokenKind::Ident(name) => {
                let name = name.clone();
                let span = self.bump().span;
                Ok(Ident { name, span })
            }
            _ => Err(self.error_here("expected identifier", &["identifier"])),
        }
    }

    fn new_id(&mut self) -> StmtId {
        let id = StmtId(self.next_id);
        self.next_id += 1;
        id
    }

    fn at_section_boundary(&self) -> bool {
        match self.tok().kind {
            TokenKind::Keyword(k) => k.is_section_boundary(),
            TokenKind::Eof => true,
            _ => false,
        }
    }

    /// Skips to just past the next `;`, or to a section keyword.
    fn recover(&mut self) {
        while !self.at_eof() {
            if self.eat_sym(Sym::Semi) {
                return;
            }
            if self.at_section_boundary() {
                return;
            }
            self.bump();
        }
    }

    fn unit(&mut self) -> CompilationUnit {
        let mut unit = CompilationUnit::default();
        while !self.at_eof() {
            let res = match self.tok().kind {
                TokenKind::Keyword(Keyword::FunctionBlock) => self.pou(PouKind::FunctionBlock).map(|p| unit.pous.push(p)),
                TokenKind::Keyword(Keyword::Function) => self.pou(PouKind::Function).map(|p| unit.pous.push(p)),
                TokenKind::Keyword(Keyword::Program) => self.pou(PouKind::Program).map(|p| unit.pous.push(p)),
                TokenKind::Keyword(Keyword::Configuration) => self.configuration().map(|c| unit.configurations.push(c)),
                _ => Err(self.error_here("expected a declaration", &["FUNCTION_BLOCK", "FUNCTION", "PROGRAM", "CONFIGURATION"])),
            };
            if res.is_err() {
                // skip to the next top-level declaration keyword
                self.bump();
                while !self.at_eof()
                    && !matches!(
                        self.tok().kind,
                        TokenKind::Keyword(Keyword::FunctionBlock | Keyword::Function | Keyword::Program | Keyword::Configuration)
                    )
                {
                    self.bump();
                }
            }
        }
        unit.statement_count = self.next_id;
        unit
    }

    fn pou(&mut self, kind: PouKind) -> PResult<PouDecl> {
        let start = self.bump().span;
        let name = self.ident()?;
        let return_type = if kind == PouKind::Function {
            self.expect_sym(Sym::Colon)?;
            Some(self.type_ref()?)
        } else {
            None
        };
        let mut var_blocks = Vec::new();
        loop {
            let section = match self.tok().kind {
                TokenKind::Keyword(Keyword::VarInput) => VarSection::Input,
                TokenKind::Keyword(Keyword::VarOutput) => VarSection::Output,
                TokenKind::Keyword(Keyword::VarInOut) => VarSection::InOut,
                TokenKind::Keyword(Keyword::Var) => VarSection::Var,
                TokenKind::Keyword(Keyword::VarTemp) => VarSection::Temp,
                _ => break,
            };
            var_blocks.push(self.var_block(section));
        }
        let end_kw = match kind {
            PouKind::FunctionBlock => Keyword::EndFunctionBlock,
            PouKind::Function => Keyword::EndFunction,
            PouKind::Program => Keyword::EndProgram,
        };
        let body = self.stmt_list(&|k| k == end_kw);
        let end = self.expect_kw(end_kw)?;
        self.eat_sym(Sym::Semi);
        Ok(PouDecl { kind, name, return_type, var_blocks, body, span: start.join(end) })
    }

    fn var_block(&mut self, section: VarSection) -> VarBlock {
        let start = self.bump().span;
        let mut constant = false;
        let mut retain = false;
        loop {
            if self.eat_kw(Keyword::Constant) {
                constant = true;
            } else if self.eat_kw(Keyword::Retain) {
                retain = true;
            } else {
                break;
            }
        }
        let mut decls = Vec::new();
        while !self.is_kw(Keyword::EndVar) && !self.at_section_boundary() {
            match self.var_decl() {
                Ok(d) => decls.push(d),
                Err(Failed) => self.recover(),
            }
        }
        let end = if self.is_kw(Keyword::EndVar) {
            self.bump().span
        } else {
            self.error_here("expected `END_VAR`", &["END_VAR"]);
            self.prev_span()
        };
        VarBlock { section, constant, retain, decls, span: start.join(end) }
    }

    fn var_decl(&mut self) -> PResult<VarDecl> {
        let first = self.ident()?;
        let start = first.span;
        let mut names = vec![first];
        while self.eat_sym(Sym::Comma) {
            names.push(self.ident()?);
        }
        self.expect_sym(Sym::Colon)?;
        let ty = self.type_ref()?;
        let init = if self.eat_sym(Sym::Assign) { Some(self.initializer()?) } else { None };
        let end = self.expect_sym(Sym::Semi)?;
        Ok(VarDecl { names, ty, init, span: start.join(end) })
    }

    fn signed_int(&mut self) -> PResult<i64> {
        let neg = self.eat_sym(Sym::Minus);
        match self.tok().kind {
            TokenKind::Integer { value, .. } if value <= i64::MAX as u64 => {
                self.bump();
                Ok(if neg { -(value as i64) } else { value as i64 })
            }
            _ => Err(self.error_here("expected integer", &["integer literal"])),
        }
    }

    fn type_ref(&mut self) -> PResult<TypeRef> {
        let start = self.tok().span;
        if self.eat_kw(Keyword::String) {
            let capacity = if self.eat_sym(Sym::LBracket) {
                let n = self.signed_int()?;
                self.expect_sym(Sym::RBracket)?;
                Some(n)
            } else if self.is_sym(Sym::LParen) {
                self.bump();
                let n = self.signed_int()?;
                self.expect_sym(Sym::RParen)?;
                Some(n)
            } else {
                None
            };
            let capacity = match capacity {
                Some(n) if n < 1 || n > super::types::MAX_STRING_CAPACITY as i64 => {
                    self.errors.push(ParseError {
                        span: start.join(self.prev_span()),
                        message: format!("string capacity {n} out of range"),
                        expected: vec![],
                    });
                    return Err(Failed);
                }
                other => other.map(|n| n as u32),
            };
            return Ok(TypeRef::String { capacity, span: start.join(self.prev_span()) });
        }
        if self.eat_kw(Keyword::Array) {
            self.expect_sym(Sym::LBracket)?;
            let mut dims = Vec::new();
            loop {
                let lo = self.signed_int()?;
                self.expect_sym(Sym::DotDot)?;
                let hi = self.signed_int()?;
                dims.push((lo, hi));
                if !self.eat_sym(Sym::Comma) {
                    break;
                }
            }
            self.expect_sym(Sym::RBracket)?;
            self.expect_kw(Keyword::Of)?;
            let elem = self.type_ref()?;
            return Ok(TypeRef::Array { dims, elem: Box::new(elem), span: start.join(self.prev_span()) });
        }
        Ok(TypeRef::Named(self.ident()?))
    }

    fn initializer(&mut self) -> PResult<Initializer> {
        if self.is_sym(Sym::LBracket) {
            let start = self.bump().span;
            let mut items = Vec::new();
            if !self.is_sym(Sym::RBracket) {
                loop {
                    items.push(self.array_init_item()?);
                    if !self.eat_sym(Sym::Comma) {
                        break;
                    }
                }
            }
            let end = self.expect_sym(Sym::RBracket)?;
            return Ok(Initializer::Array(items, start.join(end)));
        }
        Ok(Initializer::Expr(self.expr()?))
    }

    fn array_init_item(&mut self) -> PResult<ArrayInitItem> {
        if let TokenKind::Integer { value, type_prefix: None } = self.tok().kind {
            if self.nth(1).kind.sym() == Some(Sym::LParen) {
                self.bump();
                self.bump();
                let inner = if self.is_sym(Sym::RParen) { None } else { Some(Box::new(self.initializer()?)) };
                self.expect_sym(Sym::RParen)?;
                return Ok(ArrayInitItem::Repeat(value, inner));
            }
        }
        Ok(ArrayInitItem::Value(self.initializer()?))
    }

    /// Parses statements until `stop` matches the current keyword (not consumed)
    /// or a section boundary is reached.
    fn stmt_list(&mut self, stop: &dyn Fn(Keyword) -> bool) -> Vec<Stmt> {
        let mut out = Vec::new();
        loop {
            match self.tok().kind {
                TokenKind::Keyword(k) if stop(k) => break,
                TokenKind::Eof => break,
                TokenKind::Keyword(k) if k.is_section_boundary() => break,
                TokenKind::Punctuation(Sym::Semi) => {
                    self.bump();
                    continue;
                }
                _ => {}
            }
            match self.stmt() {
                Ok(s) => out.push(s),
                Err(Failed) => self.recover(),
            }
        }
        out
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let start = self.tok().span;
        match self.tok().kind {
            TokenKind::Keyword(Keyword::If) => self.if_stmt(),
            TokenKind::Keyword(Keyword::Case) => self.case_stmt(),
            TokenKind::Keyword(Keyword::For) => self.for_stmt(),
            TokenKind::Keyword(Keyword::While) => {
                self.bump();
                let id = self.new_id();
                let cond = self.expr()?;
                self.expect_kw(Keyword::Do)?;
                let body = self.stmt_list(&|k| k == Keyword::EndWhile);
                self.expect_kw(Keyword::EndWhile)?;
                let end = self.expect_sym(Sym::Semi)?;
                Ok(Stmt { id, kind: StmtKind::While { cond, body }, span: start.join(end) })
            }
            TokenKind::Keyword(Keyword::Repeat) => {
                self.bump();
                let id = self.new_id();
                let body = self.stmt_list(&|k| k == Keyword::Until);
                self.expect_kw(Keyword::Until)?;
                let until = self.expr()?;
                self.expect_kw(Keyword::EndRepeat)?;
                let end = self.expect_sym(Sym::Semi)?;
                Ok(Stmt { id, kind: StmtKind::Repeat { body, until }, span: start.join(end) })
            }
            TokenKind::Keyword(Keyword::Exit) => {
                self.bump();
                let id = self.new_id();
                let end = self.expect_sym(Sym::Semi)?;
                Ok(Stmt { id, kind: StmtKind::Exit, span: start.join(end) })
            }
            TokenKind::Keyword(Keyword::Return) => {
                self.bump();
                let id = self.new_id();
                let end = self.expect_sym(Sym::Semi)?;
                Ok(Stmt { id, kind: StmtKind::Return, span: start.join(end) })
            }
            TokenKind::Ident(_) => {
                let id = self.new_id();
                let target = self.postfix_place()?;
                if self.eat_sym(Sym::Assign) {
                    let value = self.expr()?;
                    let end = self.expect_sym(Sym::Semi)?;
                    Ok(Stmt { id, kind: StmtKind::Assign { target, value }, span: start.join(end) })
                } else if self.is_sym(Sym::LParen) {
                    let args = self.call_args()?;
                    let end = self.expect_sym(Sym::Semi)?;
                    Ok(Stmt { id, kind: StmtKind::Call { callee: target, args }, span: start.join(end) })
                } else {
                    self.errors.push(ParseError {
                        span: start.join(self.prev_span()),
                        message: format!("expression statements are not allowed; expected `:=` or `(`, found {}", self.tok().kind),
                        expected: vec![":=".into(), "(".into()],
                    });
                    Err(Failed)
                }
            }
            _ => Err(self.error_here("expected statement", &["statement"])),
        }
    }

    fn if_stmt(&mut self) -> PResult<Stmt> {
        let start = self.bump().span;
        let mut branches = Vec::new();
        let mut branch_start = start;
        loop {
            let guard_id = self.new_id();
            let cond = self.expr()?;
            self.expect_kw(Keyword::Then)?;
            let guard_span = branch_start.join(self.prev_span());
            let body = self.stmt_list(&|k| matches!(k, Keyword::Elsif | Keyword::Else | Keyword::EndIf));
            branches.push(IfBranch { guard_id, cond, body, span: guard_span });
            if self.is_kw(Keyword::Elsif) {
                branch_start = self.bump().span;
                continue;
            }
            break;
        }
        let else_body = if self.eat_kw(Keyword::Else) { Some(self.stmt_list(&|k| k == Keyword::EndIf)) } else { None };
        self.expect_kw(Keyword::EndIf)?;
        let end = self.expect_sym(Sym::Semi)?;
        Ok(Stmt { id: branches[0].guard_id, kind: StmtKind::If { branches, else_body }, span: start.join(end) })
    }

    fn at_case_label(&self) -> bool {
        match self.tok().kind {
            TokenKind::Integer { .. } => true,
            TokenKind::Operator(Sym::Minus) => matches!(self.nth(1).kind, TokenKind::Integer { .. }),
            _ => false,
        }
    }

    fn case_stmt(&mut self) -> PResult<Stmt> {
        let start = self.bump().span;
        let id = self.new_id();
        let selector = self.expr()?;
        self.expect_kw(Keyword::Of)?;
        let mut arms = Vec::new();
        while self.at_case_label() {
            let arm_start = self.tok().span;
            let mut labels = Vec::new();
            loop {
                let lo = self.signed_int()?;
                let hi = if self.eat_sym(Sym::DotDot) { self.signed_int()? } else { lo };
                labels.push(CaseLabel { lo, hi });
                if !self.eat_sym(Sym::Comma) {
                    break;
                }
            }
            self.expect_sym(Sym::Colon)?;
            let arm_head = arm_start.join(self.prev_span());
            let mut body = Vec::new();
            loop {
                match self.tok().kind {
                    TokenKind::Keyword(Keyword::Else | Keyword::EndCase) | TokenKind::Eof => break,
                    TokenKind::Keyword(k) if k.is_section_boundary() => break,
                    TokenKind::Punctuation(Sym::Semi) => {
                        self.bump();
                        continue;
                    }
                    _ if self.at_case_label() => break,
                    _ => {}
                }
                match self.stmt() {
                    Ok(s) => body.push(s),
                    Err(Failed) => self.recover(),
                }
            }
            arms.push(CaseArm { labels, body, span: arm_head });
        }
        let else_body = if self.eat_kw(Keyword::Else) { Some(self.stmt_list(&|k| k == Keyword::EndCase)) } else { None };
        self.expect_kw(Keyword::EndCase)?;
        let end = self.expect_sym(Sym::Semi)?;
        Ok(Stmt { id, kind: StmtKind::Case { selector, arms, else_body }, span: start.join(end) })
    }

    fn for_stmt(&mut self) -> PResult<Stmt> {
        let start = self.bump().span;
        let id = self.new_id();
        let var = self.ident()?;
        self.expect_sym(Sym::Assign)?;
        let from = self.expr()?;
        self.expect_kw(Keyword::To)?;
        let to = self.expr()?;
        let by = if self.eat_kw(Keyword::By) { Some(self.expr()?) } else { None };
        self.expect_kw(Keyword::Do)?;
        let body = self.stmt_list(&|k| k == Keyword::EndFor);
        self.expect_kw(Keyword::EndFor)?;
        let end = self.expect_sym(Sym::Semi)?;
        Ok(Stmt { id, kind: StmtKind::For { var, from, to, by, body }, span: start.join(end) })
    }

    fn call_args(&mut self) -> PResult<Vec<CallArg>> {
        self.expect_sym(Sym::LParen)?;
        let mut args = Vec::new();
        if self.eat_sym(Sym::RParen) {
            return Ok(args);
        }
        loop {
            let start = self.tok().span;
            let named =
                matches!(self.tok().kind, TokenKind::Ident(_)) && matches!(self.nth(1).kind.sym(), Some(Sym::Assign | Sym::OutAssign));
            if named {
                let name = self.ident()?;
                let direction = if self.bump().kind.sym() == Some(Sym::Assign) { ArgDirection::In } else { ArgDirection::Out };
                let value = self.expr()?;
                args.push(CallArg { span: start.join(value.span), name: Some(name), direction, value });
            } else {
                let value = self.expr()?;
                args.push(CallArg { span: value.span, name: None, direction: ArgDirection::In, value });
            }
            if !self.eat_sym(Sym::Comma) {
                break;
            }
        }
        self.expect_sym(Sym::RParen)?;
        Ok(args)
    }

    fn configuration(&mut self) -> PResult<ConfigDecl> {
        let start = self.bump().span;
        let name = self.ident()?;
        let mut resources = Vec::new();
        let mut implicit = ResourceDecl { name: None, on: None, tasks: Vec::new(), programs: Vec::new(), span: Span::default() };
        while !self.is_kw(Keyword::EndConfiguration) && !self.at_eof() {
            if self.is_kw(Keyword::Resource) {
                let rstart = self.bump().span;
                let rname = self.ident()?;
                self.expect_kw(Keyword::On)?;
                let on = self.ident()?;
                let mut res = ResourceDecl { name: Some(rname), on: Some(on), tasks: Vec::new(), programs: Vec::new(), span: rstart };
                while !self.is_kw(Keyword::EndResource) && !self.at_eof() {
                    self.resource_item(&mut res)?;
                }
                let end = self.expect_kw(Keyword::EndResource)?;
                self.eat_sym(Sym::Semi);
                res.span = rstart.join(end);
                resources.push(res);
            } else {
                self.resource_item(&mut implicit)?;
            }
        }
        let end = self.expect_kw(Keyword::EndConfiguration)?;
        self.eat_sym(Sym::Semi);
        if !implicit.tasks.is_empty() || !implicit.programs.is_empty() {
            resources.insert(0, implicit);
        }
        Ok(ConfigDecl { name, resources, span: start.join(end) })
    }

    fn resource_item(&mut self, res: &mut ResourceDecl) -> PResult<()> {
        let start = self.tok().span;
        if self.eat_kw(Keyword::Task) {
            let name = self.ident()?;
            self.expect_sym(Sym::LParen)?;
            let mut interval = None;
            let mut priority = None;
            if !self.is_sym(Sym::RParen) {
                loop {
                    let key = self.ident()?;
                    self.expect_sym(Sym::Assign)?;
                    let value = self.expr()?;
                    match key.name.as_str() {
                        "INTERVAL" => interval = Some(value),
                        "PRIORITY" => priority = Some(value),
                        other => {
                            self.errors.push(ParseError {
                                span: key.span,
                                message: format!("unsupported task attribute `{other}`"),
                                expected: vec!["INTERVAL".into(), "PRIORITY".into()],
                            });
                            return Err(Failed);
                        }
                    }
                    if !self.eat_sym(Sym::Comma) {
                        break;
                    }
                }
            }
            self.expect_sym(Sym::RParen)?;
            let end = self.expect_sym(Sym::Semi)?;
            res.tasks.push(TaskDecl { name, interval, priority, span: start.join(end) });
            Ok(())
        } else if self.eat_kw(Keyword::Program) {
            let name = self.ident()?;
            let task = if self.eat_kw(Keyword::With) { Some(self.ident()?) } else { None };
            self.expect_sym(Sym::Colon)?;
            let program_type = self.ident()?;
            let end = self.expect_sym(Sym::Semi)?;
            res.programs.push(ProgramInstanceDecl { name, task, program_type, span: start.join(end) });
            Ok(())
        } else {
            Err(self.error_here("expected `TASK` or `PROGRAM`", &["TASK", "PROGRAM", "END_RESOURCE"]))
        }
    }

    // ---- expressions ----

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        self.binary(0)
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        Some(match &self.tok().kind {
            TokenKind::Keyword(Keyword::Or) => BinaryOp::Or,
            TokenKind::Keyword(Keyword::Xor) => BinaryOp::Xor,
            TokenKind::Keyword(Keyword::And) | TokenKind::Operator(Sym::Amp) => BinaryOp::And,
            TokenKind::Keyword(Keyword::Mod) => BinaryOp::Mod,
            TokenKind::Operator(s) => match s {
                Sym::Eq => BinaryOp::Eq,
                Sym::Ne => BinaryOp::Ne,
                Sym::Lt => BinaryOp::Lt,
                Sym::Le => BinaryOp::Le,
                Sym::Gt => BinaryOp::Gt,
                Sym::Ge => BinaryOp::Ge,
                Sym::Plus => BinaryOp::Add,
                Sym::Minus => BinaryOp::Sub,
                Sym::Star => BinaryOp::Mul,
                Sym::Slash => BinaryOp::Div,
                Sym::Power => BinaryOp::Pow,
                _ => return None,
            },
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            let span = lhs.span.join(rhs.span);
            lhs = Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.tok().span;
        let op = if self.is_sym(Sym::Minus) {
            UnaryOp::Neg
        } else if self.is_kw(Keyword::Not) {
            UnaryOp::Not
        } else if self.is_sym(Sym::Plus) {
            // unary plus is a no-op
            self.bump();
            return self.unary();
        } else {
            return self.postfix();
        };
        self.bump();
        let operand = self.binary(BinaryOp::Pow.precedence())?;
        let span = start.join(operand.span);
        if op == UnaryOp::Neg {
            match operand.kind {
                ExprKind::Literal(Literal::Int { value, type_prefix }) => {
                    return Ok(Expr { kind: ExprKind::Literal(Literal::Int { value: value.wrapping_neg(), type_prefix }), span })
                }
                ExprKind::Literal(Literal::Real { value, type_prefix }) => {
                    return Ok(Expr { kind: ExprKind::Literal(Literal::Real { value: -value, type_prefix }), span })
                }
                ExprKind::Literal(Literal::Time(ms)) => return Ok(Expr { kind: ExprKind::Literal(Literal::Time(-ms)), span }),
                _ => {}
            }
        }
        Ok(Expr { kind: ExprKind::Unary(op, Box::new(operand)), span })
    }

    /// Variable with member/index selectors (no calls).
    fn postfix_place(&mut self) -> PResult<Expr> {
        let id = self.ident()?;
        let mut e = Expr { span: id.span, kind: ExprKind::Var(id) };
        self.selectors(&mut e)?;
        Ok(e)
    }

    fn selectors(&mut self, e: &mut Expr) -> PResult<()> {
        loop {
            if self.is_sym(Sym::Dot) {
                self.bump();
                let member = self.ident()?;
                let span = e.span.join(member.span);
                let inner = std::mem::replace(e, Expr::new(ExprKind::Literal(Literal::Bool(false))));
                *e = Expr { kind: ExprKind::Member(Box::new(inner), member), span };
            } else if self.is_sym(Sym::LBracket) {
                self.bump();
                let mut idx = vec![self.expr()?];
                while self.eat_sym(Sym::Comma) {
                    idx.push(self.expr()?);
                }
                let end = self.expect_sym(Sym::RBracket)?;
                let span = e.span.join(end);
                let inner = std::mem::replace(e, Expr::new(ExprKind::Literal(Literal::Bool(false))));
                *e = Expr { kind: ExprKind::Index(Box::new(inner), idx), span };
            } else {
                return Ok(());
            }
        }
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let t = self.tok();
        let span = t.span;
        let lit = |kind| Ok(Expr { kind: ExprKind::Literal(kind), span });
        match &t.kind {
            TokenKind::Integer { value, type_prefix } => {
                let value = *value;
                let prefix = type_prefix.as_deref().and_then(ElementaryType::from_name);
                self.bump();
                if value > i64::MAX as u64 {
                    self.errors.push(ParseError { span, message: "integer literal too large".into(), expected: vec![] });
                    return Err(Failed);
                }
                match prefix {
                    Some(p @ (ElementaryType::Real | ElementaryType::Lreal)) => {
                        lit(Literal::Real { value: value as f64, type_prefix: Some(p) })
                    }
                    Some(ElementaryType::Time) => lit(Literal::Time(value as i64)),
                    p => lit(Literal::Int { value: value as i64, type_prefix: p }),
                }
            }
            TokenKind::Real { value, type_prefix } => {
                let value = *value;
                let prefix = type_prefix.as_deref().and_then(ElementaryType::from_name);
                self.bump();
                lit(Literal::Real { value, type_prefix: prefix })
            }
            TokenKind::Time(ms) => {
                let ms = *ms;
                self.bump();
                lit(Literal::Time(ms))
            }
            TokenKind::Str(s) => {
                let s = s.clone();
                self.bump();
                lit(Literal::Str(s))
            }
            TokenKind::Keyword(Keyword::True) => {
                self.bump();
                lit(Literal::Bool(true))
            }
            TokenKind::Keyword(Keyword::False) => {
                self.bump();
                lit(Literal::Bool(false))
            }
            TokenKind::Punctuation(Sym::LParen) => {
                self.bump();
                let mut e = self.expr()?;
                let end = self.expect_sym(Sym::RParen)?;
                e.span = span.join(end);
                Ok(e)
            }
            TokenKind::Ident(_) => {
                if self.nth(1).kind.sym() == Some(Sym::LParen) {
                    let name = self.ident()?;
                    let args = self.call_args()?;
                    return Ok(Expr { kind: ExprKind::Call(name, args), span: span.join(self.prev_span()) });
                }
                self.postfix_place()
            }
            _ => Err(self.error_here("expected expression", &["expression"])),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::lexer::tokenize;
    use crate::frontend::source::SourceUnit;

    fn parse_text(text: &str) -> Result<CompilationUnit, Vec<ParseError>> {
        let src = SourceUnit::new("t", text);
        parse(&tokenize(&src).unwrap())
    }

    fn body_of(stmts: &str) -> Vec<Stmt> {
        let text = format!("FUNCTION_BLOCK FB1 VAR A, B : BOOL; X, I : INT; END_VAR {stmts} END_FUNCTION_BLOCK");
        parse_text(&text).unwrap().pous.remove(0).body
    }

    #[test]
    fn bare_expression_statement_is_rejected() {
        let errs = parse_text("FUNCTION_BLOCK FB1 VAR_INPUT A:BOOL; END_VAR A; END_FUNCTION_BLOCK").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].span.start_pos.column, 46);
        assert!(errs[0].message.contains("expression statements are not allowed"));
    }

    #[test]
    fn if_with_elsif_and_else() {
        let body = body_of("IF A THEN X:=1; ELSIF B THEN X:=2; ELSE X:=3; END_IF;");
        assert_eq!(body.len(), 1);
        let StmtKind::If { branches, else_body } = &body[0].kind else { panic!("expected IF") };
        assert_eq!(branches.len(), 2);
        assert_eq!(else_body.as_ref().map(Vec::len), Some(1));
        let sites: Vec<u32> = statement_sites(&body).iter().map(|s| s.id.0).collect();
        assert_eq!(sites, vec![0, 1, 2, 3, 4]);
        let assign_ids: Vec<u32> = branches.iter().flat_map(|b| b.body.iter()).chain(else_body.iter().flatten()).map(|s| s.id.0).collect();
        assert_eq!(assign_ids, vec![1, 3, 4]);
        assert_eq!(branches[1].guard_id, StmtId(2));
    }

    #[test]
    fn for_with_negative_step() {
        let body = body_of("FOR I := 10 TO 1 BY -1 DO X := X + I; END_FOR;");
        let StmtKind::For { by, .. } = &body[0].kind else { panic!("expected FOR") };
        assert_eq!(by.as_ref().map(|e| &e.kind), Some(&ExprKind::Literal(Literal::Int { value: -1, type_prefix: None })));
    }

    #[test]
    fn case_with_ranges() {
        let body = body_of("CASE X OF 1: A := TRUE; 2..4, 7: A := FALSE; B := TRUE; -1: ; ELSE B := FALSE; END_CASE;");
        let StmtKind::Case { arms, else_body, .. } = &body[0].kind else { panic!("expected CASE") };
        assert_eq!(arms.len(), 3);
        assert_eq!(arms[1].labels, vec![CaseLabel { lo: 2, hi: 4 }, CaseLabel { lo: 7, hi: 7 }]);
        assert_eq!(arms[1].body.len(), 2);
        assert_eq!(arms[2].labels[0].lo, -1);
        assert!(else_body.is_some());
    }

    #[test]
    fn precedence() {
        let body = body_of("X := 1 + 2 * 3; A := NOT A AND B OR A;");
        let StmtKind::Assign { value, .. } = &body[0].kind else { panic!() };
        let ExprKind::Binary(BinaryOp::Add, _, r) = &value.kind else { panic!() };
        assert!(matches!(r.kind, ExprKind::Binary(BinaryOp::Mul, _, _)));
        let StmtKind::Assign { value, .. } = &body[1].kind else { panic!() };
        let ExprKind::Binary(BinaryOp::Or, l, _) = &value.kind else { panic!() };
        let ExprKind::Binary(BinaryOp::And, ll, _) = &l.kind else { panic!() };
        assert!(matches!(ll.kind, ExprKind::Unary(UnaryOp::Not, _)));
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let body = body_of("X := -2 ** 2;");
        let StmtKind::Assign { value, .. } = &body[0].kind else { panic!() };
        assert!(matches!(value.kind, ExprKind::Unary(UnaryOp::Neg, _)));
    }

    #[test]
    fn recovery_collects_all_errors() {
        let errs =
            parse_text("FUNCTION_BLOCK FB1 VAR X : INT; END_VAR X := ; X := 1; X 2; IF X THEN END_IF END_FUNCTION_BLOCK").unwrap_err();
        assert_eq!(errs.len(), 3, "{errs:?}");
    }

    #[test]
    fn fb_call_with_outputs() {
        let body = body_of("t(IN := A, PT := T#1s, Q => B);");
        let StmtKind::Call { args, .. } = &body[0].kind else { panic!() };
        assert_eq!(args.len(), 3);
        assert_eq!(args[2].direction, ArgDirection::Out);
    }

    #[test]
    fn configuration() {
        let unit = parse_text(
            "PROGRAM P END_PROGRAM
             CONFIGURATION C RESOURCE R ON PLC
               TASK T(INTERVAL := T#10ms, PRIORITY := 1);
               PROGRAM I WITH T : P;
             END_RESOURCE END_CONFIGURATION",
        )
        .unwrap();
        let c = &unit.configurations[0];
        assert_eq!(c.resources[0].tasks.len(), 1);
        assert_eq!(c.resources[0].programs[0].program_type.name, "P");
    }

    #[test]
    fn statement_ids_are_dense_across_pous() {
        let unit = parse_text(
            "FUNCTION_BLOCK A VAR X : INT; END_VAR X := 1; WHILE X < 3 DO X := X + 1; END_WHILE; END_FUNCTION_BLOCK
             FUNCTION_BLOCK B VAR X : INT; END_VAR REPEAT X := X + 1; UNTIL X > 2 END_REPEAT; END_FUNCTION_BLOCK",
        )
        .unwrap();
        assert_eq!(unit.statement_count, 5);
        let mut ids = Vec::new();
        for p in &unit.pous {
            ids.extend(statement_sites(&p.body).iter().map(|s| s.id.0));
        }
        assert_eq!(ids, vec![0, 1, 2, 3, 4]);
    }
}
