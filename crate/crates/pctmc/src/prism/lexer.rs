//! Hand-rolled lexer with line and column tracking.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Double(f64),
    Str(String),
    Kw(Kw),
    LBracket,
    RBracket,
    LParen,
    RParen,
    Semi,
    Colon,
    Comma,
    DotDot,
    Arrow,
    Prime,
    Assign,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    Amp,
    Pipe,
    Bang,
    Plus,
    Minus,
    Star,
    Slash,
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kw {
    Ctmc,
    Dtmc,
    Mdp,
    Pta,
    Nondeterministic,
    Probabilistic,
    Stochastic,
    Const,
    Int,
    Double,
    Bool,
    Module,
    Endmodule,
    Init,
    Endinit,
    True,
    False,
    Rewards,
    Endrewards,
    Formula,
    Label,
    Global,
    System,
    Endsystem,
}

fn keyword(s: &str) -> Option<Kw> {
    Some(match s {
        "ctmc" => Kw::Ctmc,
        "dtmc" => Kw::Dtmc,
        "mdp" => Kw::Mdp,
        "pta" => Kw::Pta,
        "nondeterministic" => Kw::Nondeterministic,
        "probabilistic" => Kw::Probabilistic,
        "stochastic" => Kw::Stochastic,
        "const" => Kw::Const,
        "int" => Kw::Int,
        "double" => Kw::Double,
        "bool" => Kw::Bool,
        "module" => Kw::Module,
        "endmodule" => Kw::Endmodule,
        "init" => Kw::Init,
        "endinit" => Kw::Endinit,
        "true" => Kw::True,
        "false" => Kw::False,
        "rewards" => Kw::Rewards,
        "endrewards" => Kw::Endrewards,
        "formula" => Kw::Formula,
        "label" => Kw::Label,
        "global" => Kw::Global,
        "system" => Kw::System,
        "endsystem" => Kw::Endsystem,
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

pub fn lex(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;

    let fail = |line: u32, col: u32, msg: String| Error::Parse { line, col, msg };

    while i < chars.len() {
        let c = chars[i];
        let (tline, tcol) = (line, col);
        let mut push = |tok: Tok| out.push(Token { tok, line: tline, col: tcol });

        macro_rules! advance {
            ($n:expr) => {{
                col += $n as u32;
                i += $n;
            }};
        }

        match c {
            '\n' => {
                line += 1;
                col = 1;
                i += 1;
            }
            c if c.is_whitespace() => advance!(1),
            '/' if chars.get(i + 1) == Some(&'/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '[' => {
                push(Tok::LBracket);
                advance!(1);
            }
            ']' => {
                push(Tok::RBracket);
                advance!(1);
            }
            '(' => {
                push(Tok::LParen);
                advance!(1);
            }
            ')' => {
                push(Tok::RParen);
                advance!(1);
            }
            ';' => {
                push(Tok::Semi);
                advance!(1);
            }
            ':' => {
                push(Tok::Colon);
                advance!(1);
            }
            ',' => {
                push(Tok::Comma);
                advance!(1);
            }
            '\'' => {
                push(Tok::Prime);
                advance!(1);
            }
            '"' => {
                let start = i + 1;
                let mut end = start;
                while end < chars.len() && chars[end] != '"' && chars[end] != '\n' {
                    end += 1;
                }
                if end >= chars.len() || chars[end] != '"' {
                    return Err(fail(tline, tcol, "unterminated string literal".into()));
                }
                push(Tok::Str(chars[start..end].iter().collect()));
                advance!(end + 1 - i);
            }
            '&' => {
                push(Tok::Amp);
                advance!(1);
            }
            '|' => {
                push(Tok::Pipe);
                advance!(1);
            }
            '+' => {
                push(Tok::Plus);
                advance!(1);
            }
            '*' => {
                push(Tok::Star);
                advance!(1);
            }
            '/' => {
                push(Tok::Slash);
                advance!(1);
            }
            '-' => {
                if chars.get(i + 1) == Some(&'>') {
                    push(Tok::Arrow);
                    advance!(2);
                } else {
                    push(Tok::Minus);
                    advance!(1);
                }
            }
            '=' => {
                push(Tok::Assign);
                advance!(1);
            }
            '!' => {
                if chars.get(i + 1) == Some(&'=') {
                    push(Tok::Neq);
                    advance!(2);
                } else {
                    push(Tok::Bang);
                    advance!(1);
                }
            }
            '<' => {
                if chars.get(i + 1) == Some(&'=') {
                    push(Tok::Le);
                    advance!(2);
                } else {
                    push(Tok::Lt);
                    advance!(1);
                }
            }
            '>' => {
                if chars.get(i + 1) == Some(&'=') {
                    push(Tok::Ge);
                    advance!(2);
                } else {
                    push(Tok::Gt);
                    advance!(1);
                }
            }
            '.' if chars.get(i + 1) == Some(&'.') => {
                push(Tok::DotDot);
                advance!(2);
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let mut is_double = false;
                if i < chars.len() && chars[i] == '.' && chars.get(i + 1) != Some(&'.') {
                    is_double = true;
                    i += 1;
                    if i >= chars.len() || !chars[i].is_ascii_digit() {
                        return Err(fail(tline, tcol, "expected digits after decimal point".into()));
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                col += (i - start) as u32;
                if is_double {
                    let v: f64 = text
                        .parse()
                        .map_err(|_| fail(tline, tcol, format!("bad number `{text}`")))?;
                    push(Tok::Double(v));
                } else {
                    let v: i64 = text
                        .parse()
                        .map_err(|_| fail(tline, tcol, format!("integer `{text}` out of range")))?;
                    push(Tok::Int(v));
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                col += (i - start) as u32;
                match keyword(&text) {
                    Some(kw) => push(Tok::Kw(kw)),
                    None => push(Tok::Ident(text)),
                }
            }
            other => {
                return Err(fail(tline, tcol, format!("unexpected character `{other}`")));
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}
