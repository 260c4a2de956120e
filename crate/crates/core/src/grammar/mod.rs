//! Bounded symbolic factor grammar.
//!
//! Expressions are written in prefix functional notation, for example
//! `cs_rank(delta(volume, 1))`. Windowed operators take an integer window as
//! their last argument; the window is a parameter, not a tree node.

mod eval;
mod parse;
mod random;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use eval::{cs_rank, evaluate, FactorSeries, RankedRow};
pub use parse::parse_expr;
pub use random::random_expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Primitive {
    Ret,
    MktRet,
    Price,
    Volume,
    VolRatio,
    Rvol20,
    PriceMa,
    MktVol,
    VolGrowth,
    Spread,
}

impl Primitive {
    pub const ALL: [Primitive; 10] = [
        Primitive::Ret,
        Primitive::MktRet,
        Primitive::Price,
        Primitive::Volume,
        Primitive::VolRatio,
        Primitive::Rvol20,
        Primitive::PriceMa,
        Primitive::MktVol,
        Primitive::VolGrowth,
        Primitive::Spread,
    ];

    /// Grammar name, which is also the panel column name.
    pub fn name(self) -> &'static str {
        match self {
            Primitive::Ret => "ret",
            Primitive::MktRet => "mkt_ret",
            Primitive::Price => "price",
            Primitive::Volume => "volume",
            Primitive::VolRatio => "vol_ratio",
            Primitive::Rvol20 => "rvol20",
            Primitive::PriceMa => "price_ma",
            Primitive::MktVol => "mkt_vol",
            Primitive::VolGrowth => "vol_growth",
            Primitive::Spread => "spread",
        }
    }

    pub fn from_name(name: &str) -> Option<Primitive> {
        Primitive::ALL.into_iter().find(|p| p.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnaryOp {
    Neg,
    Abs,
    /// `ln(1 + x)` for `x >= 0`, missing otherwise.
    Log1p,
    Sign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    /// Missing when `|denominator| < 1e-12`.
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WindowOp {
    Lag,
    RollingMean,
    RollingStd,
    RollingSum,
    RollingMax,
    RollingMin,
    /// `x_t - x_{t-w}`.
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CsOp {
    Rank,
    ZScore,
}

/// The operator vocabulary. Names are the text-syntax spellings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operator {
    Unary(UnaryOp),
    Binary(BinaryOp),
    Window(WindowOp),
    Cs(CsOp),
}

impl Operator {
    pub const ALL: [Operator; 17] = [
        Operator::Unary(UnaryOp::Neg),
        Operator::Unary(UnaryOp::Abs),
        Operator::Unary(UnaryOp::Log1p),
        Operator::Unary(UnaryOp::Sign),
        Operator::Binary(BinaryOp::Add),
        Operator::Binary(BinaryOp::Sub),
        Operator::Binary(BinaryOp::Mul),
        Operator::Binary(BinaryOp::Div),
        Operator::Window(WindowOp::Lag),
        Operator::Window(WindowOp::RollingMean),
        Operator::Window(WindowOp::RollingStd),
        Operator::Window(WindowOp::RollingSum),
        Operator::Window(WindowOp::RollingMax),
        Operator::Window(WindowOp::RollingMin),
        Operator::Window(WindowOp::Delta),
        Operator::Cs(CsOp::Rank),
        Operator::Cs(CsOp::ZScore),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Operator::Unary(UnaryOp::Neg) => "neg",
            Operator::Unary(UnaryOp::Abs) => "abs",
            Operator::Unary(UnaryOp::Log1p) => "log1p",
            Operator::Unary(UnaryOp::Sign) => "sign",
            Operator::Binary(BinaryOp::Add) => "add",
            Operator::Binary(BinaryOp::Sub) => "sub",
            Operator::Binary(BinaryOp::Mul) => "mul",
            Operator::Binary(BinaryOp::Div) => "div",
            Operator::Window(WindowOp::Lag) => "lag",
            Operator::Window(WindowOp::RollingMean) => "rolling_mean",
            Operator::Window(WindowOp::RollingStd) => "rolling_std",
            Operator::Window(WindowOp::RollingSum) => "rolling_sum",
            Operator::Window(WindowOp::RollingMax) => "rolling_max",
            Operator::Window(WindowOp::RollingMin) => "rolling_min",
            Operator::Window(WindowOp::Delta) => "delta",
            Operator::Cs(CsOp::Rank) => "cs_rank",
            Operator::Cs(CsOp::ZScore) => "cs_zscore",
        }
    }

    pub fn from_name(name: &str) -> Option<Operator> {
        Operator::ALL.into_iter().find(|o| o.name() == name)
    }

    /// Number of expression arguments (the window parameter is not counted).
    pub fn arity(self) -> usize {
        match self {
            Operator::Binary(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FactorExpr {
    Primitive(Primitive),
    Const(f64),
    Unary(UnaryOp, Box<FactorExpr>),
    Binary(BinaryOp, Box<FactorExpr>, Box<FactorExpr>),
    Window(WindowOp, Box<FactorExpr>, u32),
    Cs(CsOp, Box<FactorExpr>),
}

/// Size limits on expression trees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budget {
    pub max_depth: usize,
    pub max_nodes: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_depth: 6,
            max_nodes: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GrammarError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("unknown primitive `{0}`")]
    UnknownPrimitive(String),
    #[error("`{op}` takes {expected} argument(s), got {found}")]
    Arity {
        op: String,
        expected: usize,
        found: usize,
    },
    #[error("`{op}` window {window} out of bounds")]
    WindowBound { op: String, window: i64 },
    #[error("invalid constant `{0}`")]
    InvalidConstant(String),
    #[error("depth {depth} exceeds budget {max} at `{node}`")]
    DepthBudget {
        depth: usize,
        max: usize,
        node: String,
    },
    #[error("{nodes} nodes exceed budget {max}")]
    NodeBudget { nodes: usize, max: usize },
    #[error("panel has no column `{0}`")]
    MissingColumn(String),
    #[error("look-ahead violation at `{node}`: {reason}")]
    LookAhead { node: String, reason: String },
}

impl FactorExpr {
    pub fn prim(p: Primitive) -> FactorExpr {
        FactorExpr::Primitive(p)
    }

    pub fn unary(op: UnaryOp, a: FactorExpr) -> FactorExpr {
        FactorExpr::Unary(op, Box::new(a))
    }

    pub fn binary(op: BinaryOp, a: FactorExpr, b: FactorExpr) -> FactorExpr {
        FactorExpr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn window(op: WindowOp, a: FactorExpr, w: u32) -> FactorExpr {
        FactorExpr::Window(op, Box::new(a), w)
    }

    pub fn cs(op: CsOp, a: FactorExpr) -> FactorExpr {
        FactorExpr::Cs(op, Box::new(a))
    }

    pub fn operator(&self) -> Option<Operator> {
        match self {
            FactorExpr::Primitive(_) | FactorExpr::Const(_) => None,
            FactorExpr::Unary(op, _) => Some(Operator::Unary(*op)),
            FactorExpr::Binary(op, _, _) => Some(Operator::Binary(*op)),
            FactorExpr::Window(op, _, _) => Some(Operator::Window(*op)),
            FactorExpr::Cs(op, _) => Some(Operator::Cs(*op)),
        }
    }

    pub fn children(&self) -> Vec<&FactorExpr> {
        match self {
            FactorExpr::Primitive(_) | FactorExpr::Const(_) => vec![],
            FactorExpr::Unary(_, a) | FactorExpr::Window(_, a, _) | FactorExpr::Cs(_, a) => {
                vec![a]
            }
            FactorExpr::Binary(_, a, b) => vec![a, b],
        }
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(|c| c.node_count()).sum::<usize>()
    }

    /// `(depth, nodes)`.
    pub fn complexity(&self) -> (usize, usize) {
        (self.depth(), self.node_count())
    }

    /// Canonical text form.
    pub fn canonical(&self) -> String {
        self.to_string()
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn structural_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// Operators used anywhere in the tree, in pre-order.
    pub fn operators(&self) -> Vec<Operator> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Some(op) = e.operator() {
                out.push(op);
            }
        });
        out
    }

    /// Primitives referenced anywhere in the tree, in pre-order.
    pub fn primitives(&self) -> Vec<Primitive> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let FactorExpr::Primitive(p) = e {
                out.push(*p);
            }
        });
        out
    }

    fn walk<'a>(&'a self, f: &mut impl FnMut(&'a FactorExpr)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    /// Budget check: depth first, then node count.
    pub fn check_budget(&self, budget: &Budget) -> Result<(), GrammarError> {
        let depth = self.depth();
        if depth > budget.max_depth {
            return Err(GrammarError::DepthBudget {
                depth,
                max: budget.max_depth,
                node: self.deepest_path_node(budget.max_depth),
            });
        }
        let nodes = self.node_count();
        if nodes > budget.max_nodes {
            return Err(GrammarError::NodeBudget {
                nodes,
                max: budget.max_nodes,
            });
        }
        Ok(())
    }

    /// Text of the node sitting one level below the allowed depth on the deepest path.
    fn deepest_path_node(&self, max_depth: usize) -> String {
        let mut node = self;
        for _ in 0..max_depth {
            match node.children().into_iter().max_by_key(|c| c.depth()) {
                Some(c) => node = c,
                None => break,
            }
        }
        node.to_string()
    }

    /// Structural no-look-ahead check.
    ///
    /// The grammar has no lead operator, so this reduces to window-sign rules
    /// and the budget. `lag(ret, 0)` is rejected because it restates the
    /// contemporaneous return.
    pub fn validate_no_lookahead(&self, budget: &Budget) -> Result<(), GrammarError> {
        self.check_budget(budget)?;
        self.check_windows()
    }

    fn check_windows(&self) -> Result<(), GrammarError> {
        if let FactorExpr::Window(op, a, w) = self {
            let own_return = matches!(**a, FactorExpr::Primitive(Primitive::Ret));
            let bad = match op {
                WindowOp::Lag => *w == 0 && own_return,
                _ => *w == 0,
            };
            if bad {
                return Err(GrammarError::LookAhead {
                    node: self.to_string(),
                    reason: format!("window {w} is not backward-looking"),
                });
            }
        }
        if let FactorExpr::Const(c) = self {
            if !c.is_finite() {
                return Err(GrammarError::InvalidConstant(c.to_string()));
            }
        }
        for c in self.children() {
            c.check_windows()?;
        }
        Ok(())
    }
}

impl fmt::Display for FactorExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactorExpr::Primitive(p) => f.write_str(p.name()),
            FactorExpr::Const(c) => write!(f, "{c}"),
            FactorExpr::Unary(op, a) => {
                write!(f, "{}({a})", Operator::Unary(*op).name())
            }
            FactorExpr::Binary(op, a, b) => {
                write!(f, "{}({a}, {b})", Operator::Binary(*op).name())
            }
            FactorExpr::Window(op, a, w) => {
                write!(f, "{}({a}, {w})", Operator::Window(*op).name())
            }
            FactorExpr::Cs(op, a) => write!(f, "{}({a})", Operator::Cs(*op).name()),
        }
    }
}

impl FromStr for FactorExpr {
    type Err = GrammarError;

    /// Parses without a budget check; use [`parse_expr`] for budgeted parsing.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse::parse_unbudgeted(s)
    }
}

impl Serialize for FactorExpr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.canonical())
    }
}

impl<'de> Deserialize<'de> for FactorExpr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}
