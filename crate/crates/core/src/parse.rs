//! Lexer and recursive-descent parser for `.rk` source.
//!
//! The grammar is statement-oriented: `;` sequences, `{ … }` groups, and
//! every construct is introduced by a keyword except calls (`Name(args)`)
//! and the unit statement `()`. Line comments start with `//`.

use crate::surface::{Pos, Spanned, SurfaceDef, SurfaceKind, SurfaceProgram, SurfaceTerm};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{pos}: {message}")]
pub struct ParseError {
    pub pos: Pos,
    pub message: String,
}

impl ParseError {
    fn new(pos: Pos, message: impl Into<String>) -> ParseError {
        ParseError {
            pos,
            message: message.into(),
        }
    }

    /// Render with a file name prefix, the shape diagnostics are reported in.
    pub fn render(&self, file: &str) -> String {
        format!("{file}:{}: {}", self.pos, self.message)
    }
}

pub(crate) const KEYWORDS: &[&str] = &[
    "emit", "local", "thread", "when", "watch", "await", "loop", "now", "pause", "exit", "trap",
    "present", "else", "yield", "def", "interface", "run",
];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Keyword(&'static str),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Semi,
    Eof,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Keyword(k) => write!(f, "`{k}`"),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut out = Vec::new();
    let mut line: u32 = 1;
    let mut col: u32 = 1;
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '/' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'/') {
                    for c in chars.by_ref() {
                        if c == '\n' {
                            line += 1;
                            col = 1;
                            break;
                        }
                    }
                } else {
                    return Err(ParseError::new(pos, "stray `/` (comments are `//`)"));
                }
            }
            '{' | '}' | '(' | ')' | ',' | ';' => {
                chars.next();
                col += 1;
                out.push((
                    match c {
                        '{' => Tok::LBrace,
                        '}' => Tok::RBrace,
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        ',' => Tok::Comma,
                        _ => Tok::Semi,
                    },
                    pos,
                ));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        word.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                let tok = match KEYWORDS.iter().find(|k| **k == word) {
                    Some(k) => Tok::Keyword(k),
                    None => Tok::Ident(word),
                };
                out.push((tok, pos));
            }
            other => {
                return Err(ParseError::new(pos, format!("unexpected character `{other}`")));
            }
        }
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok) -> Result<Pos, ParseError> {
        let pos = self.pos();
        if self.peek() == want {
            self.bump();
            Ok(pos)
        } else {
            Err(ParseError::new(
                pos,
                format!("expected {want}, found {}", self.peek()),
            ))
        }
    }

    fn ident(&mut self, what: &str) -> Result<Spanned<String>, ParseError> {
        let pos = self.pos();
        match self.bump().0 {
            Tok::Ident(s) => Ok(Spanned { pos, value: s }),
            other => Err(ParseError::new(
                pos,
                format!("expected {what}, found {other}"),
            )),
        }
    }

    /// `a, b, c` — one or more identifiers.
    fn ident_list(&mut self, what: &str) -> Result<Vec<Spanned<String>>, ParseError> {
        let mut names = vec![self.ident(what)?];
        while self.peek() == &Tok::Comma {
            self.bump();
            names.push(self.ident(what)?);
        }
        Ok(names)
    }

    /// `{ stmt; stmt; … }` — an empty block is `()`.
    fn block(&mut self) -> Result<SurfaceTerm, ParseError> {
        self.expect(&Tok::LBrace)?;
        let pos = self.pos();
        let body = if self.peek() == &Tok::RBrace {
            SurfaceTerm::at(pos, SurfaceKind::Nil)
        } else {
            self.sequence()?
        };
        self.expect(&Tok::RBrace)?;
        Ok(body)
    }

    /// Statements folded right: `a; b; c` is `Seq(a, Seq(b, c))`.
    fn sequence(&mut self) -> Result<SurfaceTerm, ParseError> {
        let mut stmts = vec![self.statement()?];
        while self.peek() == &Tok::Semi {
            self.bump();
            // Trailing semicolon before `}` or end.
            if matches!(self.peek(), Tok::RBrace | Tok::Eof) {
                break;
            }
            stmts.push(self.statement()?);
        }
        let mut it = stmts.into_iter().rev();
        let last = it.next().expect("at least one statement");
        Ok(it.fold(last, |acc, s| {
            let pos = s.pos;
            SurfaceTerm::at(pos, SurfaceKind::Seq(Box::new(s), Box::new(acc)))
        }))
    }

    fn statement(&mut self) -> Result<SurfaceTerm, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Keyword("emit") => {
                self.bump();
                let s = self.ident("a signal name after `emit`")?;
                Ok(SurfaceTerm::at(pos, SurfaceKind::Emit(s.value)))
            }
            Tok::Keyword("await") => {
                self.bump();
                let s = self.ident("a signal name after `await`")?;
                Ok(SurfaceTerm::at(pos, SurfaceKind::Await(s.value)))
            }
            Tok::Keyword("exit") => {
                self.bump();
                let s = self.ident("a signal name after `exit`")?;
                Ok(SurfaceTerm::at(pos, SurfaceKind::Exit(s.value)))
            }
            Tok::Keyword("local") => {
                self.bump();
                let names = self.ident_list("a signal name after `local`")?;
                let body = self.block()?;
                Ok(SurfaceTerm::at(
                    pos,
                    SurfaceKind::Local(
                        names.into_iter().map(|n| n.value).collect(),
                        Box::new(body),
                    ),
                ))
            }
            Tok::Keyword("when") => {
                self.bump();
                let names = self.ident_list("a signal name after `when`")?;
                let body = self.block()?;
                Ok(SurfaceTerm::at(
                    pos,
                    SurfaceKind::When(
                        names.into_iter().map(|n| n.value).collect(),
                        Box::new(body),
                    ),
                ))
            }
            Tok::Keyword("watch") => {
                self.bump();
                let names = self.ident_list("a signal name after `watch`")?;
                let body = self.block()?;
                Ok(SurfaceTerm::at(
                    pos,
                    SurfaceKind::Watch(
                        names.into_iter().map(|n| n.value).collect(),
                        Box::new(body),
                    ),
                ))
            }
            Tok::Keyword("thread") => {
                self.bump();
                let body = self.block()?;
                Ok(SurfaceTerm::at(pos, SurfaceKind::Spawn(Box::new(body))))
            }
            Tok::Keyword("loop") => {
                self.bump();
                let body = self.block()?;
                Ok(SurfaceTerm::at(pos, SurfaceKind::Loop(Box::new(body))))
            }
            Tok::Keyword("now") => {
                self.bump();
                let body = self.block()?;
                Ok(SurfaceTerm::at(pos, SurfaceKind::Now(Box::new(body))))
            }
            Tok::Keyword("pause") => {
                self.bump();
                Ok(SurfaceTerm::at(pos, SurfaceKind::Pause))
            }
            Tok::Keyword("yield") => {
                self.bump();
                Ok(SurfaceTerm::at(pos, SurfaceKind::Yield))
            }
            Tok::Keyword("trap") => {
                self.bump();
                let s = self.ident("a signal name after `trap`")?;
                let body = self.block()?;
                Ok(SurfaceTerm::at(
                    pos,
                    SurfaceKind::Trap(s.value, Box::new(body)),
                ))
            }
            Tok::Keyword("present") => {
                self.bump();
                let s = self.ident("a signal name after `present`")?;
                let then_branch = self.block()?;
                self.expect(&Tok::Keyword("else"))
                    .map_err(|e| ParseError::new(e.pos, "`present` needs an `else { … }` branch"))?;
                let else_branch = self.block()?;
                Ok(SurfaceTerm::at(
                    pos,
                    SurfaceKind::Present(s.value, Box::new(then_branch), Box::new(else_branch)),
                ))
            }
            Tok::LParen => {
                self.bump();
                self.expect(&Tok::RParen)?;
                Ok(SurfaceTerm::at(pos, SurfaceKind::Nil))
            }
            Tok::LBrace => self.block(),
            Tok::Ident(name) => {
                self.bump();
                self.expect(&Tok::LParen).map_err(|e| {
                    ParseError::new(
                        e.pos,
                        format!("expected `(` after `{name}` (a bare name is not a statement)"),
                    )
                })?;
                let mut args = Vec::new();
                if self.peek() != &Tok::RParen {
                    args = self
                        .ident_list("a signal argument")?
                        .into_iter()
                        .map(|a| a.value)
                        .collect();
                }
                self.expect(&Tok::RParen)?;
                Ok(SurfaceTerm::at(pos, SurfaceKind::Call(name, args)))
            }
            other => Err(ParseError::new(
                pos,
                format!("expected a statement, found {other}"),
            )),
        }
    }

    fn program(&mut self) -> Result<SurfaceProgram, ParseError> {
        let mut prog = SurfaceProgram::default();
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                // Stray separators between top-level items are harmless.
                Tok::Semi => {
                    self.bump();
                }
                Tok::Keyword("interface") => {
                    self.bump();
                    let names = self.ident_list("a signal name in the interface")?;
                    self.expect(&Tok::Semi)?;
                    prog.interface.extend(names);
                }
                Tok::Keyword("def") => {
                    self.bump();
                    let name = self.ident("a definition name after `def`")?;
                    self.expect(&Tok::LParen)?;
                    let mut params = Vec::new();
                    if self.peek() != &Tok::RParen {
                        params = self.ident_list("a parameter name")?;
                    }
                    self.expect(&Tok::RParen)?;
                    let body = self.block()?;
                    prog.defs.push(SurfaceDef { name, params, body });
                }
                Tok::Keyword("run") => {
                    self.bump();
                    let body = self.block()?;
                    prog.roots.push(body);
                }
                other => {
                    return Err(ParseError::new(
                        self.pos(),
                        format!("expected `interface`, `def` or `run`, found {other}"),
                    ));
                }
            }
        }
        Ok(prog)
    }
}

/// Parse and validate a whole program.
pub fn parse(src: &str) -> Result<SurfaceProgram, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, at: 0 };
    let prog = p.program()?;
    crate::surface::validate(&prog).map_err(|e| ParseError::new(e.pos, e.message))?;
    Ok(prog)
}
