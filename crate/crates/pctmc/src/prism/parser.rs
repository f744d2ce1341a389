//! Recursive-descent parser for the supported model subset: a `ctmc`
//! header, integer and double constants, and modules holding bounded
//! integer variables plus guarded commands. Anything else that is valid
//! in the wider modelling language (rewards, formulas, labels, global
//! variables, init blocks, module renaming, other model kinds) is
//! rejected with a dedicated message.

use crate::error::{Error, Result};

use super::ast::*;
use super::lexer::{lex, Kw, Tok, Token};

pub fn parse(src: &str) -> Result<ModelAst> {
    let tokens = lex(src)?;
    let mut p = Parser { tokens, pos: 0 };
    p.model()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn here(&self) -> (u32, u32) {
        let t = &self.tokens[self.pos];
        (t.line, t.col)
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T> {
        let (line, col) = self.here();
        Err(Error::Parse { line, col, msg: msg.into() })
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: Tok, what: &str) -> Result<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.fail(format!("expected {what}"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Tok::Ident(_) => match self.bump() {
                Tok::Ident(n) => Ok(n),
                _ => unreachable!(),
            },
            _ => self.fail(format!("expected {what}")),
        }
    }

    fn model(&mut self) -> Result<ModelAst> {
        match self.peek() {
            Tok::Kw(Kw::Ctmc) | Tok::Kw(Kw::Stochastic) => {
                self.bump();
            }
            Tok::Kw(Kw::Dtmc) | Tok::Kw(Kw::Mdp) | Tok::Kw(Kw::Pta)
            | Tok::Kw(Kw::Probabilistic) | Tok::Kw(Kw::Nondeterministic) => {
                return self.fail("only continuous-time models (`ctmc`) are supported");
            }
            _ => return self.fail("model must start with `ctmc`"),
        }

        let mut consts = Vec::new();
        let mut modules = Vec::new();
        loop {
            match self.peek() {
                Tok::Kw(Kw::Const) => consts.push(self.const_decl()?),
                Tok::Kw(Kw::Module) => modules.push(self.module()?),
                Tok::Kw(Kw::Rewards) => {
                    return self.fail("rewards blocks are not supported");
                }
                Tok::Kw(Kw::Formula) => {
                    return self.fail("formulas are not supported");
                }
                Tok::Kw(Kw::Label) => {
                    return self.fail("label definitions are not supported");
                }
                Tok::Kw(Kw::Global) => {
                    return self.fail("global variables are not supported");
                }
                Tok::Kw(Kw::System) => {
                    return self.fail("explicit system composition is not supported");
                }
                Tok::Kw(Kw::Init) => {
                    return self.fail("init blocks are not supported; use `init` in variable declarations");
                }
                Tok::Eof => break,
                _ => return self.fail("expected `const`, `module` or end of file"),
            }
        }
        if modules.is_empty() {
            return self.fail("model has no modules");
        }
        Ok(ModelAst { consts, modules })
    }

    fn const_decl(&mut self) -> Result<ConstDecl> {
        let (line, _) = self.here();
        self.eat(Tok::Kw(Kw::Const), "`const`")?;
        let ty = match self.peek() {
            Tok::Kw(Kw::Int) => {
                self.bump();
                ConstType::Int
            }
            Tok::Kw(Kw::Double) => {
                self.bump();
                ConstType::Double
            }
            Tok::Kw(Kw::Bool) => return self.fail("boolean constants are not supported"),
            _ => return self.fail("expected `int` or `double` after `const`"),
        };
        let name = self.ident("constant name")?;
        let value = if *self.peek() == Tok::Assign {
            self.bump();
            Some(self.expr()?)
        } else {
            None
        };
        self.eat(Tok::Semi, "`;` after constant declaration")?;
        Ok(ConstDecl { name, ty, value, line })
    }

    fn module(&mut self) -> Result<ModuleAst> {
        let (line, _) = self.here();
        self.eat(Tok::Kw(Kw::Module), "`module`")?;
        let name = self.ident("module name")?;
        if *self.peek() == Tok::Assign {
            return self.fail("module renaming is not supported");
        }
        let mut vars = Vec::new();
        let mut commands = Vec::new();
        loop {
            match self.peek() {
                Tok::Kw(Kw::Endmodule) => {
                    self.bump();
                    break;
                }
                Tok::LBracket => commands.push(self.command()?),
                Tok::Ident(_) => vars.push(self.var_decl()?),
                Tok::Eof => return self.fail("unterminated module, expected `endmodule`"),
                _ => return self.fail("expected a variable declaration, a command or `endmodule`"),
            }
        }
        Ok(ModuleAst { name, vars, commands, line })
    }

    fn var_decl(&mut self) -> Result<VarDecl> {
        let (line, _) = self.here();
        let name = self.ident("variable name")?;
        self.eat(Tok::Colon, "`:` after variable name")?;
        self.eat(Tok::LBracket, "`[` starting the variable range")?;
        let lo = self.expr()?;
        self.eat(Tok::DotDot, "`..` in the variable range")?;
        let hi = self.expr()?;
        self.eat(Tok::RBracket, "`]` closing the variable range")?;
        self.eat(Tok::Kw(Kw::Init), "`init` with the initial value")?;
        let init = self.expr()?;
        self.eat(Tok::Semi, "`;` after variable declaration")?;
        Ok(VarDecl { name, lo, hi, init, line })
    }

    fn command(&mut self) -> Result<Command> {
        let (line, _) = self.here();
        self.eat(Tok::LBracket, "`[`")?;
        let action = match self.peek() {
            Tok::Ident(_) => Some(self.ident("action name")?),
            _ => None,
        };
        self.eat(Tok::RBracket, "`]` after the action")?;
        let guard = self.expr()?;
        self.eat(Tok::Arrow, "`->` between guard and updates")?;
        let mut updates = vec![self.update()?];
        while *self.peek() == Tok::Plus {
            self.bump();
            updates.push(self.update()?);
        }
        self.eat(Tok::Semi, "`;` after command")?;
        Ok(Command { action, guard, updates, line })
    }

    fn update(&mut self) -> Result<Update> {
        let rate = self.expr()?;
        self.eat(Tok::Colon, "`:` between rate and assignments")?;
        let mut assigns = Vec::new();
        if *self.peek() == Tok::Kw(Kw::True) {
            self.bump();
        } else {
            assigns.push(self.assign()?);
            while *self.peek() == Tok::Amp {
                self.bump();
                assigns.push(self.assign()?);
            }
        }
        Ok(Update { rate, assigns })
    }

    fn assign(&mut self) -> Result<(String, Expr)> {
        self.eat(Tok::LParen, "`(` starting an assignment")?;
        let name = self.ident("assigned variable")?;
        self.eat(Tok::Prime, "`'` after the assigned variable")?;
        self.eat(Tok::Assign, "`=` in the assignment")?;
        let value = self.expr()?;
        self.eat(Tok::RParen, "`)` closing the assignment")?;
        Ok((name, value))
    }

    fn expr(&mut self) -> Result<Expr> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.and_expr()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            let rhs = self.and_expr()?;
            lhs = Expr::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.cmp_expr()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let rhs = self.cmp_expr()?;
            lhs = Expr::Binary(BinOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> Result<Expr> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Tok::Assign => BinOp::Eq,
            Tok::Neq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.add_expr()?;
        Ok(Expr::Binary(op, Box::new(lhs), Box::new(rhs)))
    }

    fn add_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn mul_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)))
            }
            Tok::Bang => {
                self.bump();
                Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)))
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::Double(v) => {
                self.bump();
                Ok(Expr::Double(v))
            }
            Tok::Kw(Kw::True) => {
                self.bump();
                Ok(Expr::Bool(true))
            }
            Tok::Kw(Kw::False) => {
                self.bump();
                Ok(Expr::Bool(false))
            }
            Tok::Ident(_) => Ok(Expr::Ident(self.ident("identifier")?)),
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.eat(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => self.fail("expected an expression"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TANDEM_FRAGMENT: &str = "
ctmc
const int c;
const double lambda = 4*c;
const double mu1b = 1.8;

module serverC
  sc : [0..c] init 0;
  ph : [1..2] init 1;

  [] (sc<c) -> lambda : (sc'=sc+1);
  [route] (sc>0) & (ph=1) -> mu1b : (sc'=sc-1);
endmodule
";

    #[test]
    fn parses_modules_constants_and_commands() {
        let m = parse(TANDEM_FRAGMENT).unwrap();
        assert_eq!(m.consts.len(), 3);
        assert_eq!(m.consts[0].ty, ConstType::Int);
        assert!(m.consts[0].value.is_none());
        assert!(m.consts[1].value.is_some());
        assert_eq!(m.modules.len(), 1);
        let module = &m.modules[0];
        assert_eq!(module.name, "serverC");
        assert_eq!(module.vars.len(), 2);
        assert_eq!(module.commands.len(), 2);
        assert_eq!(module.commands[0].action, None);
        assert_eq!(module.commands[1].action.as_deref(), Some("route"));
        assert_eq!(module.commands[1].updates.len(), 1);
        assert_eq!(module.commands[1].updates[0].assigns.len(), 1);
    }

    #[test]
    fn parses_multiple_updates_and_identity() {
        let src = "
ctmc
module m
  x : [0..2] init 0;
  [] x<2 -> 1.0 : (x'=x+1) + 2.0 : true;
endmodule
";
        let m = parse(src).unwrap();
        let cmd = &m.modules[0].commands[0];
        assert_eq!(cmd.updates.len(), 2);
        assert_eq!(cmd.updates[0].assigns.len(), 1);
        assert!(cmd.updates[1].assigns.is_empty());
    }

    #[test]
    fn rejects_other_model_kinds() {
        let err = parse("dtmc\nmodule m x : [0..1] init 0; endmodule").unwrap_err();
        assert!(err.to_string().contains("ctmc"), "{err}");
    }

    #[test]
    fn rejects_out_of_subset_features() {
        for (src, needle) in [
            ("ctmc\nrewards \"r\" true : 1; endrewards", "rewards"),
            ("ctmc\nformula f = 1;", "formula"),
            ("ctmc\nlabel \"l\" = true;", "label"),
            ("ctmc\nglobal g : [0..1] init 0;", "global"),
            ("ctmc\nmodule a = b [x=y] endmodule", "renaming"),
            ("ctmc\nconst bool b = true;", "boolean"),
            ("ctmc\ninit true endinit", "init"),
        ] {
            let err = parse(src).unwrap_err();
            assert!(err.to_string().contains(needle), "{src}: {err}");
        }
    }

    #[test]
    fn error_positions_point_at_the_problem() {
        let err = parse("ctmc\nmodule m\n  x : [0..1] init 0\nendmodule").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn precedence_of_arithmetic_and_comparison() {
        let m = parse("ctmc\nmodule m\nx : [0..9] init 0;\n[] x+1*2=3 -> 1 : true;\nendmodule").unwrap();
        let guard = &m.modules[0].commands[0].guard;
        match guard {
            Expr::Binary(BinOp::Eq, lhs, _) => match lhs.as_ref() {
                Expr::Binary(BinOp::Add, _, rhs) => {
                    assert!(matches!(rhs.as_ref(), Expr::Binary(BinOp::Mul, _, _)));
                }
                other => panic!("unexpected lhs {other:?}"),
            },
            other => panic!("unexpected guard {other:?}"),
        }
    }
}
