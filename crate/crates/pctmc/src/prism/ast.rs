//! Syntax tree for the supported model-source subset.

/// Binary operators, in source notation: arithmetic, comparison, boolean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    And,
    Or,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Double(f64),
    Bool(bool),
    Ident(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Collect every identifier occurring in the expression.
    pub fn idents(&self, out: &mut std::collections::BTreeSet<String>) {
        match self {
            Expr::Ident(n) => {
                out.insert(n.clone());
            }
            Expr::Unary(_, e) => e.idents(out),
            Expr::Binary(_, a, b) => {
                a.idents(out);
                b.idents(out);
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstType {
    Int,
    Double,
}

#[derive(Debug, Clone)]
pub struct ConstDecl {
    pub name: String,
    pub ty: ConstType,
    pub value: Option<Expr>,
    pub line: u32,
}

#[derive(Debug, Clone)]
pub struct VarDecl {
    pub name: String,
    pub lo: Expr,
    pub hi: Expr,
    pub init: Expr,
    pub line: u32,
}

/// One `rate : assignments` alternative of a command.
#[derive(Debug, Clone)]
pub struct Update {
    pub rate: Expr,
    /// `(variable, expression)` pairs; empty for the identity update `true`.
    pub assigns: Vec<(String, Expr)>,
}

#[derive(Debug, Clone)]
pub struct Command {
    /// Synchronization action, `None` for a silent command.
    pub action: Option<String>,
    pub guard: Expr,
    pub updates: Vec<Update>,
    pub line: u32,
}

#[derive(Debug, Clone)]
pub struct ModuleAst {
    pub name: String,
    pub vars: Vec<VarDecl>,
    pub commands: Vec<Command>,
    pub line: u32,
}

#[derive(Debug, Clone)]
pub struct ModelAst {
    pub consts: Vec<ConstDecl>,
    pub modules: Vec<ModuleAst>,
}
