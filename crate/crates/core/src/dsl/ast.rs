use super::Span;

/// Identifier occurrence with its source position.
#[derive(Debug, Clone, PartialEq)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Exp,
    Cos,
    Sin,
    Conj,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Cos => "cos",
            Func::Sin => "sin",
            Func::Conj => "conj",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Tensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorStyle {
    /// `[a, b]`
    Bracket,
    /// `ket(a, b)`
    Call,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Number(f64),
    Imaginary(f64),
    ImaginaryUnit,
    Pi,
    Var(String),
    /// Symbols of a `|..>` literal.
    KetLiteral(String),
    Vector(VectorStyle, Vec<Expr>),
    Call(Func, Box<Expr>),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorDef {
    Alias(Ident),
    Matrix(Vec<Vec<Expr>>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObservableRef {
    Named(Ident),
    Inline(Vec<Ident>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Chosen(Ident),
    Any,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Space {
        name: Ident,
        dim: usize,
    },
    System {
        name: Ident,
        space: Ident,
    },
    Ket {
        name: Ident,
        spaces: Option<Vec<Ident>>,
        value: Expr,
    },
    Operator {
        name: Ident,
        def: OperatorDef,
    },
    Observable {
        name: Ident,
        space: Ident,
        kets: Vec<Ident>,
    },
    Assume {
        systems: Vec<Ident>,
        value: Expr,
    },
    Apply {
        operator: Ident,
        systems: Vec<Ident>,
        rename: Option<Vec<Ident>>,
    },
    Measure {
        system: Ident,
        observable: ObservableRef,
        outcome: Outcome,
        rename: Option<Ident>,
    },
    QueryPossible {
        system: Ident,
        observable: ObservableRef,
    },
    QueryVerifies {
        systems: Vec<Ident>,
        value: Expr,
    },
    ExpectVerifies {
        systems: Vec<Ident>,
        value: Expr,
    },
    ExpectPossible {
        system: Ident,
        observable: ObservableRef,
        outcomes: Vec<Ident>,
    },
    Param {
        name: Ident,
        default: Option<Expr>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Script {
    pub statements: Vec<Stmt>,
}

impl Script {
    /// Declared parameters with their defaults, in order.
    pub fn params(&self) -> impl Iterator<Item = (&Ident, Option<&Expr>)> {
        self.statements.iter().filter_map(|s| match &s.kind {
            StmtKind::Param { name, default } => Some((name, default.as_ref())),
            _ => None,
        })
    }
}
