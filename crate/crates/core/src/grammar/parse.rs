//! Recursive-descent parser for the prefix expression syntax.

use super::{Budget, FactorExpr, GrammarError, Operator, Primitive};

const MAX_NESTING: usize = 128;

/// Parses `text` and checks it against `budget`.
pub fn parse_expr(text: &str, budget: &Budget) -> Result<FactorExpr, GrammarError> {
    let e = parse_unbudgeted(text)?;
    e.check_budget(budget)?;
    Ok(e)
}

pub(super) fn parse_unbudgeted(text: &str) -> Result<FactorExpr, GrammarError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let e = p.expr(0)?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> GrammarError {
        GrammarError::Syntax {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), GrammarError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self, nesting: usize) -> Result<FactorExpr, GrammarError> {
        if nesting > MAX_NESTING {
            return Err(self.err("nesting too deep"));
        }
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.call(nesting),
            Some(c) if c.is_ascii_digit() || c == b'-' || c == b'+' || c == b'.' => {
                self.number().map(FactorExpr::Const)
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn ident(&mut self) -> &str {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).unwrap()
    }

    fn number(&mut self) -> Result<f64, GrammarError> {
        let start = self.pos;
        let bytes = self.src;
        let mut i = self.pos;
        if i < bytes.len() && (bytes[i] == b'-' || bytes[i] == b'+') {
            i += 1;
        }
        while i < bytes.len()
            && (bytes[i].is_ascii_digit()
                || bytes[i] == b'.'
                || bytes[i] == b'e'
                || bytes[i] == b'E'
                || ((bytes[i] == b'-' || bytes[i] == b'+')
                    && (bytes[i - 1] == b'e' || bytes[i - 1] == b'E')))
        {
            i += 1;
        }
        self.pos = i;
        let text = std::str::from_utf8(&bytes[start..i]).unwrap();
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(GrammarError::InvalidConstant(text.to_string())),
        }
    }

    fn call(&mut self, nesting: usize) -> Result<FactorExpr, GrammarError> {
        let name = self.ident().to_string();
        if self.peek() != Some(b'(') {
            return Primitive::from_name(&name)
                .map(FactorExpr::Primitive)
                .ok_or(GrammarError::UnknownPrimitive(name));
        }
        let op = Operator::from_name(&name).ok_or_else(|| GrammarError::UnknownOperator(name.clone()))?;
        self.expect(b'(')?;
        let mut args = Vec::new();
        if self.peek() != Some(b')') {
            loop {
                args.push(self.expr(nesting + 1)?);
                if self.peek() == Some(b',') {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(b')')?;
        build(op, args)
    }
}

fn build(op: Operator, args: Vec<FactorExpr>) -> Result<FactorExpr, GrammarError> {
    let expected = match op {
        Operator::Window(_) => 2,
        _ => op.arity(),
    };
    if args.len() != expected {
        return Err(GrammarError::Arity {
            op: op.name().to_string(),
            expected,
            found: args.len(),
        });
    }
    let mut it = args.into_iter();
    Ok(match op {
        Operator::Unary(u) => FactorExpr::unary(u, it.next().unwrap()),
        Operator::Binary(b) => FactorExpr::binary(b, it.next().unwrap(), it.next().unwrap()),
        Operator::Cs(c) => FactorExpr::cs(c, it.next().unwrap()),
        Operator::Window(w) => {
            let a = it.next().unwrap();
            let win = it.next().unwrap();
            let FactorExpr::Const(v) = win else {
                return Err(GrammarError::Syntax {
                    pos: 0,
                    msg: format!("`{}` window must be an integer literal, got `{win}`", op.name()),
                });
            };
            let min = if w == super::WindowOp::Lag { 0.0 } else { 1.0 };
            if v.fract() != 0.0 || v < min || v > u32::MAX as f64 {
                return Err(GrammarError::WindowBound {
                    op: op.name().to_string(),
                    window: v as i64,
                });
            }
            FactorExpr::window(w, a, v as u32)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{random_expr, WindowOp};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(s: &str) -> Result<FactorExpr, GrammarError> {
        parse_expr(s, &Budget::default())
    }

    #[test]
    fn minimal_lag() {
        let e = p("lag(ret, 1)").unwrap();
        assert_eq!(
            e,
            FactorExpr::window(WindowOp::Lag, FactorExpr::prim(Primitive::Ret), 1)
        );
        assert_eq!(e.node_count(), 2);
    }

    #[test]
    fn negative_window() {
        assert!(matches!(
            p("lag(ret, -1)"),
            Err(GrammarError::WindowBound { window: -1, .. })
        ));
        assert!(matches!(
            p("rolling_mean(ret, 0)"),
            Err(GrammarError::WindowBound { window: 0, .. })
        ));
        assert!(matches!(
            p("delta(ret, 1.5)"),
            Err(GrammarError::WindowBound { .. })
        ));
    }

    #[test]
    fn depth_seven_cites_depth() {
        let s = "neg(neg(neg(neg(neg(neg(ret))))))";
        match p(s) {
            Err(GrammarError::DepthBudget { depth, max, .. }) => {
                assert_eq!((depth, max), (7, 6));
            }
            other => panic!("{other:?}"),
        }
        let msg = p(s).unwrap_err().to_string();
        assert!(msg.contains("depth 7"), "{msg}");
    }

    #[test]
    fn distinct_errors() {
        assert!(matches!(p("lead(ret, 1)"), Err(GrammarError::UnknownOperator(n)) if n == "lead"));
        assert!(matches!(p("foo"), Err(GrammarError::UnknownPrimitive(_))));
        assert!(matches!(p("add(ret)"), Err(GrammarError::Arity { found: 1, .. })));
        assert!(matches!(p("lag(ret)"), Err(GrammarError::Arity { expected: 2, .. })));
        assert!(matches!(p("add(ret, ret"), Err(GrammarError::Syntax { .. })));
        assert!(matches!(p("ret ret"), Err(GrammarError::Syntax { .. })));
        let wide = (0..12).fold("ret".to_string(), |acc, _| format!("add({acc}, ret)"));
        assert!(matches!(
            parse_expr(&wide, &Budget { max_depth: 20, max_nodes: 24 }),
            Err(GrammarError::NodeBudget { nodes: 25, .. })
        ));
    }

    #[test]
    fn constants() {
        let e = p("mul(-0.5, add(price, 1e-3))").unwrap();
        assert_eq!(e.canonical(), "mul(-0.5, add(price, 0.001))");
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = random_expr(&mut rng, &Budget::default());
            let text = e.canonical();
            let back = p(&text).unwrap();
            prop_assert_eq!(back.canonical(), text);
            prop_assert_eq!(back, e);
        }
    }
}
